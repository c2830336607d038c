//! UNIFORM / STATIC / DYNAMIC comparison: the search itself, a replay of
//! the distribution it learned, and plain training, all on the same sample
//! budget.
//!
//! ```bash
//! cargo run --release --example static_vs_dynamic
//! ```

use autosampling::analysis::{compare_conditions_with, Condition, StaticSource};
use autosampling::rng::{Domain, RngStream};
use autosampling::search::SearchConfig;
use autosampling::trainer::{gen_synthetic_dataset, LrSchedule, SyntheticSpec, TrainHyper};

fn main() -> autosampling::error::Result<()> {
    let data =
        gen_synthetic_dataset(&SyntheticSpec::default(), &mut RngStream::for_domain(0, Domain::Dataset, 0, 0))?.dataset;
    let config = SearchConfig {
        trainer: TrainHyper {
            schedule: LrSchedule::StepDecay { factor: 0.1, boundaries: vec![500, 750] },
            ..Default::default()
        },
        ..Default::default()
    };
    let seeds = [0, 1, 2, 3, 4];
    for source in [StaticSource::FullRun, StaticSource::FinalAlternation] {
        let table = compare_conditions_with(&config, &data, &seeds, source)?;
        println!("static distribution from {source:?}:");
        for c in Condition::ALL {
            let row = table.row(c);
            println!("  {c:<8} {:.2} ± {:.2}  ({} samples each)", row.mean * 100.0, row.std * 100.0, row.samples[0]);
        }
    }
    Ok(())
}
