//! Summary statistics over per-trial values.

/// Mean, spread and accuracy of an estimator over independent trials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialStats {
    pub trials: usize,
    pub mean: f64,
    /// Unbiased sample variance (divisor `trials - 1`).
    pub sample_variance: f64,
    /// `sqrt(sample_variance / trials)`.
    pub stderr_of_mean: f64,
    /// Approximate standard error of `sample_variance`.
    pub variance_stderr: f64,
    pub truth: f64,
    /// `sqrt(mean((estimate - truth)^2)) / truth`; zero when `truth == 0`.
    pub rmse_over_truth: f64,
}

impl TrialStats {
    /// Values are summed in slice order, so equal inputs give equal bits.
    pub fn from_values(values: &[f64], truth: f64) -> Self {
        let n = values.len();
        assert!(n >= 2, "need at least two trials");
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let (mut m2, mut m4, mut sq_err) = (0.0, 0.0, 0.0);
        for &v in values {
            let d = v - mean;
            m2 += d * d;
            m4 += d * d * d * d;
            sq_err += (v - truth) * (v - truth);
        }
        let sample_variance = m2 / (nf - 1.0);
        let central2 = m2 / nf;
        let central4 = m4 / nf;
        let variance_stderr = ((central4 - central2 * central2 * (nf - 3.0) / (nf - 1.0)) / nf)
            .max(0.0)
            .sqrt();
        TrialStats {
            trials: n,
            mean,
            sample_variance,
            stderr_of_mean: (sample_variance / nf).sqrt(),
            variance_stderr,
            truth,
            rmse_over_truth: if truth > 0.0 {
                (sq_err / nf).sqrt() / truth
            } else {
                0.0
            },
        }
    }

    /// `(mean - truth) / stderr_of_mean`.
    pub fn z_score(&self) -> f64 {
        (self.mean - self.truth) / self.stderr_of_mean
    }
}

/// Sample covariance of paired values and its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceStats {
    pub covariance: f64,
    pub stderr: f64,
}

impl CovarianceStats {
    pub fn from_pairs(a: &[f64], b: &[f64]) -> Self {
        assert_eq!(a.len(), b.len());
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let products: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
        let mp = products.iter().sum::<f64>() / n;
        let var_p = products.iter().map(|p| (p - mp) * (p - mp)).sum::<f64>() / (n - 1.0);
        CovarianceStats {
            covariance: products.iter().sum::<f64>() / (n - 1.0),
            stderr: (var_p / n).sqrt(),
        }
    }
}
