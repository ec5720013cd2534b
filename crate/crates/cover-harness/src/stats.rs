//! Wilson score intervals. Every empirical probability in the harness is
//! reported with its 95% interval, and bound comparisons use the interval
//! edges, never point estimates.

/// 95% two-sided z.
pub const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub successes: u64,
    pub trials: u64,
}

impl McEstimate {
    pub fn new(successes: u64, trials: u64) -> Self {
        assert!(successes <= trials && trials > 0);
        McEstimate { successes, trials }
    }

    pub fn rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    /// Wilson score interval at 95%.
    pub fn wilson(&self) -> (f64, f64) {
        wilson_interval(self.successes, self.trials, Z95)
    }

    pub fn lower(&self) -> f64 {
        self.wilson().0
    }

    pub fn upper(&self) -> f64 {
        self.wilson().1
    }
}

pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}
