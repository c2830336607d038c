pub mod analysis;
pub mod cli;
pub mod dataset;
pub mod distribution;
pub mod error;
pub mod format;
pub mod rng;
pub mod sampling;
pub mod schedule;
pub mod search;
pub mod trainer;
