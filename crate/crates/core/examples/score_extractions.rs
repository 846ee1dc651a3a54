//! Scores predicted tuples against gold with both matching modes.
//!
//! Usage: `cargo run --example score_extractions -- [pred.jsonl] [gold.jsonl]`

use synoie::eval::{load_eval_file, score, MatchMode};

fn main() -> anyhow::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data/scorer");
    let mut args = std::env::args().skip(1);
    let pred = args.next().unwrap_or_else(|| format!("{dir}/pred.jsonl"));
    let gold = args.next().unwrap_or_else(|| format!("{dir}/gold.jsonl"));
    let (pred, gold) = (load_eval_file(&pred)?, load_eval_file(&gold)?);

    for (mode, binary) in [(MatchMode::Exact, false), (MatchMode::Lexical, false), (MatchMode::Exact, true)] {
        let r = score(&pred, &gold, mode, binary)?;
        println!(
            "{mode:?}{}  P {:.4}  R {:.4}  F1 {:.4}  AUC {:.4}",
            if binary { " binary" } else { "" },
            r.precision,
            r.recall,
            r.f1,
            r.auc
        );
    }
    let r = score(&pred, &gold, MatchMode::Exact, false)?;
    println!("\ncurve (recall, precision)");
    for (rec, prec) in &r.curve {
        println!("  {rec:.4} {prec:.4}");
    }
    Ok(())
}
