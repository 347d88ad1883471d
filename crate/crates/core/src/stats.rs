//! Small summary-statistics helpers shared by the Monte Carlo paths.

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Pairwise (cascade) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Sample mean with a normal-approximation 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub ci_half_width: f64,
    pub count: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Self { mean: f64::NAN, ci_half_width: f64::NAN, count };
        }
        let mean = pairwise_sum(xs) / count as f64;
        let ci_half_width = if count > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            let var = pairwise_sum(&dev) / (count - 1) as f64;
            Z95 * (var / count as f64).sqrt()
        } else {
            f64::INFINITY
        };
        Self { mean, ci_half_width, count }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci_half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci_half_width
    }

    /// Standard error implied by the half-width.
    pub fn std_error(&self) -> f64 {
        self.ci_half_width / Z95
    }
}
