//! Monte Carlo summaries: plain means and ratio estimators.

use libm::sqrt;

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MeanEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n > 0);
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            sqrt(ss / (n as f64 - 1.0) / n as f64)
        } else {
            0.0
        };
        MeanEstimate { mean, std_error, samples: n }
    }

    /// `|mean - target| <= k * std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }
}

/// Streaming estimator of `E[X] / E[Y]` from paired draws, with a
/// delta-method standard error
/// `sqrt(Var(X - R Y) / n) / mean(Y)`.
///
/// Accumulation order is the caller's; feeding the same pairs in the same
/// order gives bit-identical results.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RatioAccumulator {
    n: u64,
    sum_x: f64,
    sum_y: f64,
    sum_xx: f64,
    sum_yy: f64,
    sum_xy: f64,
}

impl RatioAccumulator {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        self.sum_x += x;
        self.sum_y += y;
        self.sum_xx += x * x;
        self.sum_yy += y * y;
        self.sum_xy += x * y;
    }

    pub fn samples(&self) -> u64 {
        self.n
    }

    pub fn ratio(&self) -> f64 {
        self.sum_x / self.sum_y
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let r = self.ratio();
        let mx = self.sum_x / n;
        let my = self.sum_y / n;
        let var_x = (self.sum_xx - n * mx * mx) / (n - 1.0);
        let var_y = (self.sum_yy - n * my * my) / (n - 1.0);
        let cov = (self.sum_xy - n * mx * my) / (n - 1.0);
        let var_resid = (var_x - 2.0 * r * cov + r * r * var_y).max(0.0);
        sqrt(var_resid / n) / my
    }
}
