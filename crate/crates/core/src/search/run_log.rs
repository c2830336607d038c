use std::fmt::Write as _;

use crate::schedule::SamplingSchedule;

/// Outcome of one exploit step.
#[derive(Debug, Clone, PartialEq)]
pub struct ExploitRecord {
    pub alternation: usize,
    pub interval: usize,
    pub winner: usize,
    pub winner_metric: f64,
    /// Validation metric of every child, by worker index.
    pub metrics: Vec<f64>,
    /// The winner's sub-schedule for this interval.
    pub winner_schedule: SamplingSchedule,
}

/// Every exploit record of a run with the wall-clock offset (milliseconds
/// since the run started) at which its alternation finished.
#[derive(Debug, Clone, Default)]
pub struct RunLog {
    pub records: Vec<ExploitRecord>,
    pub elapsed_ms: Vec<u64>,
}

impl RunLog {
    pub fn push(&mut self, record: ExploitRecord, elapsed_ms: u64) {
        self.records.push(record);
        self.elapsed_ms.push(elapsed_ms);
    }

    /// One line per record:
    ///
    /// ```text
    /// alternation=0 interval=3 winner=2 winner_metric=0.81 metrics=0.8,0.79,0.81 elapsed_ms=12
    /// ```
    ///
    /// Metrics use the shortest representation that parses back to the same
    /// `f64`. Without timestamps the text is a pure function of the run.
    pub fn to_text(&self, with_timestamps: bool) -> String {
        let mut out = String::new();
        for (r, ms) in self.records.iter().zip(&self.elapsed_ms) {
            let metrics: Vec<String> = r.metrics.iter().map(|m| m.to_string()).collect();
            write!(
                out,
                "alternation={} interval={} winner={} winner_metric={} metrics={}",
                r.alternation,
                r.interval,
                r.winner,
                r.winner_metric,
                metrics.join(",")
            )
            .unwrap();
            if with_timestamps {
                write!(out, " elapsed_ms={ms}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Winning sub-schedules in order.
    pub fn winner_schedules(&self) -> impl Iterator<Item = &SamplingSchedule> {
        self.records.iter().map(|r| &r.winner_schedule)
    }
}
