//! Writes a seeded template corpus as JSONL.
//!
//! Usage: `cargo run --example synthetic_corpus -- [sentences] [seed] [out.jsonl]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synoie::corpus::{save_corpus, sentence_to_json};
use synoie::synth::{reporting_sentence, template_corpus};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map_or(Ok(50), |a| a.parse())?;
    let seed: u64 = args.get(1).map_or(Ok(7), |a| a.parse())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = template_corpus(&mut rng, n);

    match args.get(2) {
        Some(path) => {
            save_corpus(path, &corpus)?;
            println!("wrote {} sentences to {path}", corpus.len());
        }
        None => {
            for s in corpus.iter().take(3) {
                println!("{}", s.surfaces().join(" "));
                for t in s.gold_tuples() {
                    println!("  {:?}", t.texts(&s.surfaces()));
                }
            }
            let r = reporting_sentence(&mut rng, "reporting");
            println!("{}  (verbs {:?}, {} tuple)", r.surfaces().join(" "), r.verbs(), r.gold_tuples().len());
            println!("{}", sentence_to_json(&r));
        }
    }
    Ok(())
}
