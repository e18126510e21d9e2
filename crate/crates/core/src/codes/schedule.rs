use serde::{Deserialize, Serialize};

use crate::error::{MdlError, Result};

/// Block boundaries, in percent of the dataset.
pub const DEFAULT_FRACTIONS: [f64; 11] = [0.1, 0.2, 0.4, 0.8, 1.6, 3.2, 6.25, 12.5, 25.0, 50.0, 100.0];

/// Transmission timesteps `t_1 < … < t_S = n` of an online code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub fractions: Vec<f64>,
    pub timesteps: Vec<usize>,
}

impl Schedule {
    pub fn n(&self) -> usize {
        *self.timesteps.last().expect("schedules are never empty")
    }

    /// Number of blocks coded by a trained model (`S − 1`).
    pub fn num_blocks(&self) -> usize {
        self.timesteps.len() - 1
    }
}

/// `t_i = round_half_up(n·f_i/100)`, clamped to at least 1, deduplicated,
/// with the last step forced to `n`.
pub fn make_schedule(n: usize, fractions: &[f64]) -> Result<Schedule> {
    if n < 2 {
        return Err(MdlError::Size(format!("an online code needs at least 2 examples, got {n}")));
    }
    if fractions.is_empty() {
        return Err(MdlError::Usage("schedule fractions are empty".into()));
    }
    for pair in fractions.windows(2) {
        if !(pair[0] < pair[1]) {
            return Err(MdlError::Usage(format!("schedule fractions must be strictly ascending, got {fractions:?}")));
        }
    }
    if fractions.iter().any(|&f| !(f > 0.0 && f <= 100.0)) {
        return Err(MdlError::Usage(format!("schedule fractions must lie in (0, 100], got {fractions:?}")));
    }
    if *fractions.last().unwrap() != 100.0 {
        return Err(MdlError::Usage(format!("the last schedule fraction must be 100, got {fractions:?}")));
    }
    let mut timesteps: Vec<usize> = Vec::with_capacity(fractions.len());
    for &f in fractions {
        // The tiny offset keeps exact halves such as 62.5 from rounding down
        // after floating-point error in n·f/100.
        let t = ((n as f64 * f / 100.0) + 0.5 + 1e-9).floor() as usize;
        let t = t.clamp(1, n);
        if timesteps.last() != Some(&t) {
            timesteps.push(t);
        }
    }
    if timesteps.last() != Some(&n) {
        timesteps.push(n);
    }
    Ok(Schedule {
        fractions: fractions.to_vec(),
        timesteps,
    })
}
