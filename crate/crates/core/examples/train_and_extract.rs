//! Trains on a synthetic template corpus, then extracts and scores.
//!
//! Usage: `cargo run --release --example train_and_extract [sentences] [epochs] [ce-only]`

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synoie::eval::MatchMode;
use synoie::model::{extract, token_accuracy};
use synoie::synth::template_corpus;
use synoie::trainer::{evaluate_model, train_with_progress, TrainConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(50), |a| a.parse())?;
    let epochs: usize = args.next().map_or(Ok(60), |a| a.parse())?;

    let corpus = template_corpus(&mut ChaCha8Rng::seed_from_u64(7), n);
    let ce_only = args.next().as_deref() == Some("ce-only");
    let cfg = TrainConfig {
        epochs,
        use_r1: !ce_only,
        use_r2: !ce_only,
        use_r3: !ce_only,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let ckpt = train_with_progress(&corpus, &cfg, |r| {
        if r.epoch % 10 == 0 || r.epoch == 1 {
            println!(
                "epoch {:>4}  loss {:.5}  dev F1 {}",
                r.epoch,
                r.train_loss,
                r.dev_f1.map_or("-".into(), |f| format!("{f:.3}"))
            );
        }
    })?;
    println!("trained in {:.1?}, best epoch {}", start.elapsed(), ckpt.epoch);

    let model = ckpt.to_model()?;
    println!("token accuracy {:.4}", token_accuracy(&model, &corpus)?);
    let exact = evaluate_model(&model, &corpus, MatchMode::Exact)?;
    let lexical = evaluate_model(&model, &corpus, MatchMode::Lexical)?;
    println!("exact   P {:.3} R {:.3} F1 {:.3} AUC {:.3}", exact.precision, exact.recall, exact.f1, exact.auc);
    println!("lexical P {:.3} R {:.3} F1 {:.3}", lexical.precision, lexical.recall, lexical.f1);

    let s = &corpus[0];
    let words = s.surfaces();
    println!("\n{}", words.join(" "));
    for t in extract(s, &model)? {
        println!("  {:.3} {:?}", t.confidence, t.texts(&words));
    }
    Ok(())
}
