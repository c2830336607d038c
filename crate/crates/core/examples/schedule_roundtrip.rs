//! Persist a search's artifacts, load them back and replay the schedule to
//! the same weights.
//!
//! ```bash
//! cargo run --release --example schedule_roundtrip
//! ```

use autosampling::analysis::replay_run;
use autosampling::format::{
    encode_model, load_distribution, load_model, load_schedule, save_distribution, save_model, save_schedule,
};
use autosampling::rng::{Domain, RngStream};
use autosampling::search::{run_autosampling, SearchConfig};
use autosampling::trainer::{gen_synthetic_dataset, SyntheticSpec};

fn main() -> autosampling::error::Result<()> {
    let config = SearchConfig { population_size: 4, total_alternations: 4, seed: 5, ..Default::default() };
    let data =
        gen_synthetic_dataset(&SyntheticSpec::default(), &mut RngStream::for_domain(5, Domain::Dataset, 0, 0))?.dataset;
    let out = run_autosampling(&config, &data)?;

    let dir = std::env::temp_dir().join(format!("autosampling-roundtrip-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    save_schedule(&out.schedule, &dir.join("schedule.bin"))?;
    save_distribution(&out.distribution, &dir.join("distribution.bin"))?;
    save_model(&out.model, &dir.join("model.bin"))?;

    let schedule = load_schedule(&dir.join("schedule.bin"))?;
    let dist = load_distribution(&dir.join("distribution.bin"))?;
    let model = load_model(&dir.join("model.bin"))?;
    assert_eq!(schedule, out.schedule);
    assert_eq!(dist, out.distribution);

    let arch = model.architecture();
    let (replayed, eval) = replay_run(&schedule, arch, &config.trainer, &data, config.seed)?;
    println!("search accuracy {:.4}, replay accuracy {:.4}", out.final_eval.metric, eval.metric);
    println!("weights identical: {}", encode_model(&replayed) == encode_model(&model));
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
