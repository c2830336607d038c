//! Run the search end to end and save its artifacts.
//!
//! ```bash
//! cargo run --release --example autosampling_search [output-dir]
//! ```

use std::path::PathBuf;

use autosampling::format::{save_distribution, save_model, save_schedule};
use autosampling::rng::{Domain, RngStream};
use autosampling::search::{run_autosampling, SearchConfig};
use autosampling::trainer::{gen_synthetic_dataset, SyntheticSpec};

fn main() -> autosampling::error::Result<()> {
    let config = SearchConfig { population_size: 8, total_alternations: 10, seed: 1, ..Default::default() };
    let data =
        gen_synthetic_dataset(&SyntheticSpec::default(), &mut RngStream::for_domain(1, Domain::Dataset, 0, 0))?.dataset;

    let out = run_autosampling(&config, &data)?;

    for r in out.log.records.iter().filter(|r| r.interval + 1 == config.intervals_per_exploitation) {
        println!(
            "alternation {:>2}: winner {} at {:.3} (children {:.3}..{:.3})",
            r.alternation,
            r.winner,
            r.winner_metric,
            r.metrics.iter().cloned().fold(f64::INFINITY, f64::min),
            r.metrics.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
    }
    let max_p = out.distribution.probs().iter().cloned().fold(0.0, f64::max);
    let unseen = out.distribution.probs().iter().filter(|&&p| p == 0.0).count();
    println!(
        "H*: {} batches, {} samples; final P(D): max {:.5}, {} unseen ids; final accuracy {:.3}",
        out.schedule.num_batches(),
        out.schedule.num_samples(),
        max_p,
        unseen,
        out.final_eval.metric
    );

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        std::fs::create_dir_all(&dir).expect("output directory");
        save_schedule(&out.schedule, &dir.join("schedule.bin"))?;
        save_distribution(&out.distribution, &dir.join("distribution.bin"))?;
        save_model(&out.model, &dir.join("model.bin"))?;
        std::fs::write(dir.join("run_log.txt"), out.log.to_text(true)).ok();
        println!("artifacts written to {}", dir.display());
    }
    Ok(())
}
