//! Trains the ablation grid on the bundled corpus and prints the table.
//!
//! Usage: `cargo run --release --example ablation_grid -- [epochs] [table|variants|all]`

use synoie::corpus::load_corpus;
use synoie::trainer::{format_ablation_table, run_ablation, split_corpus, AblationGrid, TrainConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(Ok(20), |a| a.parse())?;
    let grid: AblationGrid = args.next().as_deref().unwrap_or("table").parse()?;
    let corpus = load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/data/synthetic.jsonl"))?;

    let base = TrainConfig {
        epochs,
        dev_fraction: 0.2,
        ..TrainConfig::default()
    };
    let (train_ids, test_ids) = split_corpus(corpus.len(), &base);
    let pick = |ids: &[usize]| ids.iter().map(|&i| corpus[i].clone()).collect::<Vec<_>>();
    let (train, test) = (pick(&train_ids), pick(&test_ids));
    let base = TrainConfig { dev_fraction: 0.0, ..base };

    let rows = run_ablation(&train, &test, &base, grid, |name, row| {
        eprintln!("{name}: F1 {:.3}", row.exact.f1)
    })?;
    print!("{}", format_ablation_table(&rows));
    Ok(())
}
