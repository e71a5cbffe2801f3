//! Exact distributions and closed-form moments used as test oracles.
//!
//! The central object is the distribution of the Alpha sampler's final level
//! `I` after `u = n - k` distinct identifiers beyond the first `k`:
//!
//! ```text
//! Pr(I=0; 0) = 1
//! Pr(I=i; 0) = 0                for i > 0
//! Pr(I=0; u) = 0                for u > 0
//! Pr(I=i; u) = (1 - a^i) Pr(I=i; u-1) + a^(i-1) Pr(I=i-1; u-1)
//! ```
//!
//! with `a = k / (k + 1)`. It is evaluated by dynamic programming in binary64;
//! every term of the recurrence is non-negative, so there is no cancellation.
//!
//! The KMV, KMV-subpopulation and adaptive-sampling variance formulas of the
//! older estimators are collected here too.

use crate::error::{Error, Result};
use crate::tcf::alpha_for;

/// Largest `u` accepted by the quadratic dynamic program.
pub const DP_LIMIT: usize = 100_000;

/// Exact distribution of the Alpha level counter, `Pr(I = i; u)` for
/// `i = 0..=u`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelDistribution {
    k: usize,
    u: usize,
    probs: Vec<f64>,
}

impl LevelDistribution {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn u(&self) -> usize {
        self.u
    }

    pub fn alpha(&self) -> f64 {
        alpha_for(self.k)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `g(q, k, u) = sum_i a^(-q i) Pr(I = i; u)`.
    pub fn g(&self, q: u32) -> f64 {
        let step = (1.0 / self.alpha()).powi(q as i32);
        let log_step = step.ln();
        let mut weight: f64 = 1.0;
        let mut sum = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                sum += if weight.is_finite() {
                    weight * p
                } else {
                    (p.ln() + i as f64 * log_step).exp()
                };
            }
            weight *= step;
        }
        sum
    }

    /// Mean and variance of the sample size `|S|`, mixing the conditional
    /// second moment `k^2 + (a - a^(2i+1)) / (1 - a^2)` over the level
    /// distribution (the conditional mean is `k` at every level).
    pub fn sample_size_moments(&self) -> (f64, f64) {
        let k = self.k as f64;
        let a = self.alpha();
        let mut a_pow = a; // a^(2i+1)
        let mut mean = 0.0;
        let mut var = 0.0;
        for &p in &self.probs {
            mean += p * k;
            var += p * (a - a_pow) / (1.0 - a * a);
            a_pow *= a * a;
        }
        (mean, var)
    }

    /// Variance of `|S| / a^I` computed from the mixture, independent of the
    /// closed form in [`alpha_estimator_variance`].
    pub fn estimator_variance(&self) -> f64 {
        let k = self.k as f64;
        let a = self.alpha();
        let inv2 = 1.0 / (a * a);
        let mut w = 1.0; // a^(-2i)
        let mut a_pow = a; // a^(2i+1)
        let mut second = 0.0;
        for &p in &self.probs {
            if p > 0.0 {
                second += p * w * (k * k + (a - a_pow) / (1.0 - a * a));
            }
            w *= inv2;
            a_pow *= a * a;
        }
        let n = k + self.u as f64;
        second - n * n
    }
}

/// Row-by-row evaluation of the level distribution for `u = 0, 1, 2, ...`.
///
/// Producing all rows up to `u_max` costs the same as producing the last one.
#[derive(Clone, Debug)]
pub struct LevelDistributions {
    k: usize,
    alpha_pows: Vec<f64>,
    row: Vec<f64>,
    next_u: usize,
    u_max: usize,
}

impl LevelDistributions {
    pub fn new(k: usize, u_max: usize) -> Result<Self> {
        check_dp(k, u_max)?;
        let alpha = alpha_for(k);
        let mut alpha_pows = Vec::with_capacity(u_max + 1);
        let mut p = 1.0;
        for _ in 0..=u_max {
            alpha_pows.push(p);
            p *= alpha;
        }
        Ok(LevelDistributions {
            k,
            alpha_pows,
            row: Vec::with_capacity(u_max + 1),
            next_u: 0,
            u_max,
        })
    }
}

impl Iterator for LevelDistributions {
    type Item = LevelDistribution;

    fn next(&mut self) -> Option<LevelDistribution> {
        if self.next_u > self.u_max {
            return None;
        }
        let u = self.next_u;
        if u == 0 {
            self.row.push(1.0);
        } else {
            self.row.push(0.0);
            for i in (1..=u).rev() {
                self.row[i] = (1.0 - self.alpha_pows[i]) * self.row[i]
                    + self.alpha_pows[i - 1] * self.row[i - 1];
            }
            self.row[0] = 0.0;
        }
        self.next_u += 1;
        Some(LevelDistribution {
            k: self.k,
            u,
            probs: self.row.clone(),
        })
    }
}

fn check_dp(k: usize, u: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    if u > DP_LIMIT {
        return Err(Error::ResourceLimit { u, limit: DP_LIMIT });
    }
    Ok(())
}

pub fn alpha_level_distribution(k: usize, u: usize) -> Result<LevelDistribution> {
    Ok(LevelDistributions::new(k, u)?
        .last()
        .expect("at least the u = 0 row"))
}

/// `g(q, k, u)` from the dynamic program. Works for any `q`.
pub fn g_moment_dp(q: u32, k: usize, u: usize) -> Result<f64> {
    Ok(alpha_level_distribution(k, u)?.g(q))
}

/// Closed forms of `g(q, k, u)` for `q = 0, 1, 2`.
pub fn g_closed(q: u32, k: usize, u: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let (k, u) = (k as f64, u as f64);
    match q {
        0 => Ok(1.0),
        1 => Ok((k + u) / k),
        2 => Ok((k * k * k + 2.0 * k * k * u + k * u * u + u * (u - 1.0) / 2.0) / (k * k * k)),
        q => Err(Error::UnsupportedQ(q)),
    }
}

/// Mean and variance of the Alpha sample size `|S|` for `n = k + u`.
pub fn alpha_sample_size_moments(k: usize, u: usize) -> Result<(f64, f64)> {
    Ok(alpha_level_distribution(k, u)?.sample_size_moments())
}

fn require_n_at_least_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || n < k {
        return Err(Error::Domain(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    Ok(())
}

/// Variance of the Alpha sketch estimate `|S| / a^I`:
/// `((2k+1) n^2 - (k^2+k)(2n-1) - n) / (2k^2)`.
pub fn alpha_estimator_variance(k: usize, n: usize) -> Result<f64> {
    require_n_at_least_k(k, n)?;
    let (k, n) = (k as f64, n as f64);
    Ok(((2.0 * k + 1.0) * n * n - (k * k + k) * (2.0 * n - 1.0) - n) / (2.0 * k * k))
}

/// Mean and variance of the HIP estimate `k / a^I`: `(n, u(u-1)/(2k))`.
pub fn hip_mean_var(k: usize, n: usize) -> Result<(f64, f64)> {
    require_n_at_least_k(k, n)?;
    let u = (n - k) as f64;
    Ok((n as f64, u * (u - 1.0) / (2.0 * k as f64)))
}

fn require_kmv_domain(k: usize, n: usize) -> Result<()> {
    if k < 2 || n < k {
        return Err(Error::Domain(format!("need 2 <= k <= n, got k={k}, n={n}")));
    }
    Ok(())
}

/// `(n^2 - k n) / (k - 1)`.
pub fn kmv_variance(k: usize, n: usize) -> Result<f64> {
    require_kmv_domain(k, n)?;
    let (k, n) = (k as f64, n as f64);
    Ok((n * n - k * n) / (k - 1.0))
}

/// `n_P (n - k) / (k - 1)`.
pub fn kmv_subpop_variance(k: usize, n: usize, n_p: usize) -> Result<f64> {
    require_kmv_domain(k, n)?;
    if n_p > n {
        return Err(Error::Domain(format!("subpopulation {n_p} exceeds n = {n}")));
    }
    let (k, n, n_p) = (k as f64, n as f64, n_p as f64);
    Ok(n_p * (n - k) / (k - 1.0))
}

/// Centre value `1.44 n^2 / (k - 1)` of adaptive sampling's variance. The
/// true variance oscillates around it as `n` grows.
pub fn adaptive_variance_approx(k: usize, n: usize) -> Result<f64> {
    require_kmv_domain(k, n)?;
    let (k, n) = (k as f64, n as f64);
    Ok(1.44 * n * n / (k - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn base_rows() {
        assert_eq!(alpha_level_distribution(5, 0).unwrap().probs(), &[1.0]);
        assert_eq!(alpha_level_distribution(5, 1).unwrap().probs(), &[0.0, 1.0]);
    }

    #[test]
    fn k4_u3_values() {
        // exact rationals: Pr = [0, 1/25, 56/125, 64/125]
        let d = alpha_level_distribution(4, 3).unwrap();
        let want = [0.0, 1.0 / 25.0, 56.0 / 125.0, 64.0 / 125.0];
        for (p, w) in d.probs().iter().zip(want) {
            assert!((p - w).abs() < 1e-15);
        }
        assert!(rel(4.0 * d.g(1), 7.0) < 1e-9);
        assert!(rel(g_moment_dp(1, 4, 3).unwrap(), 1.75) < 1e-12);
        assert!(rel(g_moment_dp(2, 4, 3).unwrap(), 199.0 / 64.0) < 1e-12);
        assert_eq!(g_moment_dp(0, 4, 3).unwrap(), 1.0);
        assert!(rel(16.0 * d.g(2) - 49.0, 0.75) < 1e-9);
        // E(Z^2) - n^2 = 871/16 - 49
        assert!(rel(d.estimator_variance(), 87.0 / 16.0) < 1e-12);
        let (mean, var) = d.sample_size_moments();
        assert!(rel(mean, 4.0) < 1e-12);
        assert!(rel(var, 570_036.0 / 390_625.0) < 1e-12);
    }

    #[test]
    fn closed_forms() {
        assert_eq!(g_closed(1, 4, 3).unwrap(), 1.75);
        assert_eq!(g_closed(2, 9, 0).unwrap(), 1.0);
        assert_eq!(g_closed(0, 9, 70).unwrap(), 1.0);
        assert!(matches!(g_closed(3, 4, 3), Err(Error::UnsupportedQ(3))));
        assert!(g_moment_dp(3, 4, 3).is_ok());
    }

    #[test]
    fn moment_formulas() {
        assert_eq!(alpha_estimator_variance(4, 7).unwrap(), 5.4375);
        assert_eq!(alpha_estimator_variance(6, 6).unwrap(), 0.0);
        assert!(alpha_estimator_variance(6, 5).is_err());
        assert_eq!(hip_mean_var(4, 7).unwrap(), (7.0, 0.75));
        assert_eq!(hip_mean_var(9, 9).unwrap(), (9.0, 0.0));
        assert_eq!(hip_mean_var(9, 10).unwrap(), (10.0, 0.0));
        assert!(hip_mean_var(9, 8).is_err());
        assert_eq!(alpha_sample_size_moments(7, 0).unwrap(), (7.0, 0.0));
    }

    #[test]
    fn prior_art_variances() {
        let v = kmv_variance(128, 4096).unwrap();
        assert!((v - 127_975.811_023_622).abs() < 1e-6);
        assert_eq!(kmv_variance(8, 8).unwrap(), 0.0);
        assert_eq!(kmv_subpop_variance(16, 100, 0).unwrap(), 0.0);
        assert!((kmv_subpop_variance(128, 4096, 410).unwrap() - 12_810.078_740_157).abs() < 1e-6);
        assert!(kmv_variance(1, 10).is_err());
        assert!(kmv_subpop_variance(4, 10, 11).is_err());
        assert!(adaptive_variance_approx(2, 10).unwrap() > 0.0);
    }

    #[test]
    fn dp_limit() {
        assert!(matches!(
            alpha_level_distribution(4, DP_LIMIT + 1),
            Err(Error::ResourceLimit { .. })
        ));
        assert!(alpha_level_distribution(0, 3).is_err());
    }

    #[test]
    fn estimator_variance_dp_matches_closed_form() {
        for k in [1, 2, 3, 8, 31] {
            for d in LevelDistributions::new(k, 200).unwrap() {
                let closed = alpha_estimator_variance(k, k + d.u()).unwrap();
                let dp = d.estimator_variance();
                if closed == 0.0 {
                    assert!(dp.abs() < 1e-9 * (k * k) as f64);
                } else {
                    assert!(rel(dp, closed) < 1e-9, "k={k} u={} {dp} {closed}", d.u());
                }
            }
        }
    }
}
