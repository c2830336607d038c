//! Estimate a sampling distribution from a schedule and smooth it.
//!
//! ```bash
//! cargo run --example estimate_and_smooth
//! ```

use autosampling::rng::{Domain, RngStream};
use autosampling::sampling::{draw_schedule, estimate_distribution, smooth_distribution, SmoothingParams};
use autosampling::schedule::{MiniBatch, Provenance, SamplingSchedule};

fn main() -> autosampling::error::Result<()> {
    // Six samples, batches of two; sample 0 shows up far more than the rest
    // and sample 5 never does.
    let mut h = SamplingSchedule::new(6, 2)?;
    for ids in [[0, 1], [0, 2], [0, 3], [0, 4], [0, 1], [2, 3]] {
        h.push(MiniBatch::from_indices(ids), Provenance::Alternation(0))?;
    }

    let p = estimate_distribution(&h, 6)?;
    println!("estimated   {:?}", rounded(p.probs()));

    for params in [SmoothingParams::default(), SmoothingParams::new(1.0, 0)?, SmoothingParams::new(50.0, 3)?] {
        let s = smooth_distribution(&p, params)?;
        println!(
            "beta={:<4} n_u={}  {:?}  floor={:.4}",
            params.beta,
            params.n_uniform,
            rounded(s.probs()),
            params.floor(6)
        );
    }

    // Draw a fresh schedule from the smoothed distribution.
    let smoothed = smooth_distribution(&p, SmoothingParams::default())?;
    let mut rng = RngStream::for_domain(0, Domain::User(0), 0, 0);
    let drawn = draw_schedule(&smoothed, 3000, 2, &mut rng)?;
    let freq: Vec<f64> = drawn.counts().iter().map(|&c| c as f64 / drawn.num_samples() as f64).collect();
    println!("drawn freq  {:?}", rounded(&freq));
    Ok(())
}

fn rounded(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
