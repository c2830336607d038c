//! Uniform, random and mixture exploration on the same task across seeds.
//!
//! ```bash
//! cargo run --release --example exploration_comparison
//! ```

use autosampling::rng::{Domain, RngStream};
use autosampling::search::{run_autosampling, ExplorationType, SearchConfig};
use autosampling::trainer::{gen_synthetic_dataset, LrSchedule, SyntheticSpec, TrainHyper};

fn main() -> autosampling::error::Result<()> {
    let seeds = 0..5u64;
    let kinds = [ExplorationType::Uniform, ExplorationType::Random, ExplorationType::Mixture];
    let mut acc = vec![Vec::new(); kinds.len()];
    for seed in seeds.clone() {
        let data =
            gen_synthetic_dataset(&SyntheticSpec::default(), &mut RngStream::for_domain(seed, Domain::Dataset, 0, 0))?
                .dataset;
        for (k, &exploration) in kinds.iter().enumerate() {
            let config = SearchConfig {
                exploration,
                seed,
                trainer: TrainHyper {
                    schedule: LrSchedule::StepDecay { factor: 0.1, boundaries: vec![500, 750] },
                    ..Default::default()
                },
                ..Default::default()
            };
            acc[k].push(run_autosampling(&config, &data)?.final_eval.metric * 100.0);
        }
    }
    for (kind, a) in kinds.iter().zip(&acc) {
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        println!("{kind:<8} mean {mean:.2}  per seed {a:.1?}");
    }
    Ok(())
}
