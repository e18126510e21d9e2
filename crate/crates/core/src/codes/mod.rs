//! Baseline codes, the online (prequential) code and compression ratios.

mod baselines;
mod online;
mod schedule;

pub use baselines::{compression_ratio, prior_codelength, uniform_codelength};
pub use online::{decompose_online, online_code, CurvePoint, OnlineOptions, OnlineReport};
pub use schedule::{make_schedule, Schedule, DEFAULT_FRACTIONS};
