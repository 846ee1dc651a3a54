//! Builds both syntactic views of one sentence and prints them.
//!
//! Usage: `cargo run --example build_graphs -- [corpus.jsonl] [json|dot]`

use synoie::corpus::load_corpus;
use synoie::graphs::{build_const_graph, build_const_paths, build_dep_graph, export_graph, FlattenConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/figure1.jsonl").into());
    let format = args.next().unwrap_or_else(|| "dot".into());
    let corpus = load_corpus(&path)?;
    let s = &corpus[0];
    let words = s.surfaces();

    println!("{}\n", words.join(" "));
    for (w, p) in words.iter().zip(build_const_paths(s.const_tree())) {
        println!("{w:>8}  {}", p.join(" "));
    }

    let con = build_const_graph(s, &FlattenConfig::default());
    let dep = build_dep_graph(s);
    println!("\nconst edges");
    for e in con.edges() {
        println!("  {} -- {}  {}", words[e.i], words[e.j], e.kind);
    }
    println!("\n{}", export_graph(&dep, &format, Some(&words))?);
    Ok(())
}
