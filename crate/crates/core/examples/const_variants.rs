//! Compares the const-graph variants and distance limits on one sentence.
//!
//! Usage: `cargo run --example const_variants -- [corpus.jsonl]`

use synoie::corpus::load_corpus;
use synoie::graphs::{build_const_graph, ConstVariant, FlattenConfig};

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/figure1.jsonl").into());
    let corpus = load_corpus(&path)?;
    let s = &corpus[0];
    let words = s.surfaces();

    for variant in [ConstVariant::Paper, ConstVariant::V1, ConstVariant::V2, ConstVariant::V3] {
        let g = build_const_graph(s, &FlattenConfig::with_variant(variant));
        let edges: Vec<String> = g.edges().iter().map(|e| format!("{}-{}", e.i, e.j)).collect();
        println!("{variant:<6} {:>2} edges  {}", edges.len(), edges.join(" "));
        println!("       label of '{}': {}", words[0], g.label(0).join(" "));
    }

    println!();
    for max_distance in [1, 2, 4, 8, 16] {
        let cfg = FlattenConfig {
            max_distance,
            ..FlattenConfig::default()
        };
        println!("max distance {max_distance:>2}: {} edges", build_const_graph(s, &cfg).edges().len());
    }
    Ok(())
}
