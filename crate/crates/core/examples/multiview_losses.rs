//! Runs one forward pass and prints the attention and each loss term.
//!
//! Usage: `cargo run --example multiview_losses -- [corpus.jsonl]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synoie::corpus::load_corpus;
use synoie::model::{LossOptions, Model, ModelConfig};
use synoie::multiview::LossWeights;
use synoie::numerics::Tape;

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/figure1.jsonl").into());
    let corpus = load_corpus(&path)?;
    let model = Model::init(ModelConfig::default(), &corpus, &mut ChaCha8Rng::seed_from_u64(1));
    let s = &corpus[0];
    let f = model.features(s);
    let inst = &model.instances(&corpus)?[0];
    let words = s.surfaces();

    for weights in [LossWeights::default(), LossWeights { alpha: 0.0, beta: 0.0, gamma: 0.0 }] {
        let mut tape = Tape::new();
        let vars = model.bind(&mut tape);
        let opts = LossOptions {
            weights,
            exclude_self_loops: true,
        };
        let loss = model.instance_loss(&mut tape, &vars, &f, inst.verb, &inst.gold, &opts)?;
        let term = |v: Option<_>| v.map_or("-".to_string(), |v| format!("{:.5}", tape.value(v).data()[0]));
        println!(
            "α {} β {} γ {}:  CE {:.5}  R1 {}  R2 {}  R3 {}  total {:.5}",
            weights.alpha,
            weights.beta,
            weights.gamma,
            tape.value(loss.parts.ce).data()[0],
            term(loss.parts.r1),
            term(loss.parts.r2),
            term(loss.parts.r3),
            tape.value(loss.total).data()[0]
        );
        if let Some(att) = loss.forward.att_con {
            let a = tape.value(att);
            let row: Vec<String> = (0..a.cols())
                .filter(|&j| a.get(inst.verb, j) > 0.0)
                .map(|j| format!("{} {:.3}", words[j], a.get(inst.verb, j)))
                .collect();
            println!("  const attention of '{}': {}", words[inst.verb], row.join(", "));
        }
    }
    Ok(())
}
