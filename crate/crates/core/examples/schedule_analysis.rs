//! Segment histograms of a searched schedule and the frequency versus loss
//! table, exported as CSV.
//!
//! ```bash
//! cargo run --release --example schedule_analysis [output-dir]
//! ```

use std::path::PathBuf;

use autosampling::analysis::{frequency_loss_table, segment_histogram};
use autosampling::rng::{Domain, RngStream};
use autosampling::search::{run_autosampling, SearchConfig};
use autosampling::trainer::{gen_synthetic_dataset, per_sample_losses, SyntheticSpec};

fn main() -> autosampling::error::Result<()> {
    let config = SearchConfig::default();
    let synth = gen_synthetic_dataset(&SyntheticSpec::default(), &mut RngStream::for_domain(0, Domain::Dataset, 0, 0))?;
    let data = &synth.dataset;
    let out = run_autosampling(&config, data)?;
    let n = data.num_samples();

    let last = config.total_alternations as u32 - 1;
    let reference = segment_histogram(&out.schedule.alternation(last), n, 20)?;
    for alt in [0, last / 2, last] {
        let h = segment_histogram(&out.schedule.alternation(alt), n, 20)?.ordered_like(&reference);
        println!("alternation {alt:>2}: {:?}", h.ordered_counts());
    }

    let losses = per_sample_losses(&out.model, data)?;
    let table = frequency_loss_table(&out.schedule, &losses)?;
    println!("frequency vs loss Pearson: {}", table.correlation_label());

    let flipped: Vec<usize> = synth.flipped.iter().map(|s| s.index()).collect();
    let counts = out.schedule.counts();
    let mean = |ids: &mut dyn Iterator<Item = usize>| {
        let v: Vec<u64> = ids.map(|i| counts[i]).collect();
        v.iter().sum::<u64>() as f64 / v.len().max(1) as f64
    };
    println!(
        "mean appearances: flipped {:.2}, clean {:.2}",
        mean(&mut flipped.iter().copied()),
        mean(&mut (0..n).filter(|i| !flipped.contains(i)))
    );

    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    reference.write_csv(&dir.join("example_DYNAMIC_s0_segments.csv"))?;
    table.write_csv(&dir.join("example_DYNAMIC_s0_freq_loss.csv"))?;
    println!("CSV files written to {}", dir.display());
    Ok(())
}
