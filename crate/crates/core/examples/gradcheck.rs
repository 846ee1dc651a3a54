//! Checks analytic gradients of the full loss against central differences.
//!
//! Usage: `cargo run --release --example gradcheck -- [instances] [seed]`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synoie::model::{gradient_check, GradCheckSpec};
use synoie::multiview::LossWeights;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let instances: usize = args.next().map_or(Ok(5), |a| a.parse())?;
    let seed: u64 = args.next().map_or(Ok(0), |a| a.parse())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let spec = GradCheckSpec {
            n: rng.gen_range(2..=8),
            d_h: rng.gen_range(4..=12),
            d_l: rng.gen_range(2..=6),
            weights: if i % 2 == 0 { GradCheckSpec::default().weights } else { LossWeights::default() },
            ..GradCheckSpec::default()
        };
        let r = gradient_check(&mut rng, &spec)?;
        println!(
            "n {} d_h {:>2} d_l {}  {:>6} coords  max rel error {:.3e}",
            spec.n, spec.d_h, spec.d_l, r.coordinates, r.max_rel_error
        );
        worst = worst.max(r.max_rel_error);
    }
    println!("worst {worst:.3e}");
    Ok(())
}
