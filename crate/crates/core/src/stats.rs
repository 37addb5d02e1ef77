//! Single-pass statistics with associative merges, plus the small amount of
//! distribution machinery the verification harness needs.
//!
//! Replica statistics are accumulated with Welford updates and merged along a
//! tree that is fixed by replica index, so aggregation order never changes a
//! result beyond floating-point reassociation.

use crate::error::Error;
use crate::Result;

/// Streaming count/mean/M2 accumulator.
#[derive(Debug, Clone, Default)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let n = n1 + n2;
        let delta = other.mean - self.mean;
        self.mean += delta * n2 / n;
        self.m2 += other.m2 + delta * delta * n1 * n2 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean, `s / sqrt(n)`.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            f64::INFINITY
        } else {
            self.std_dev() / (self.count as f64).sqrt()
        }
    }
}

/// Welford-style accumulator for a fixed-length vector per replica, with the
/// full cross-moment matrix (upper triangle).
#[derive(Debug, Clone)]
pub struct VectorMoments {
    dim: usize,
    count: u64,
    mean: Vec<f64>,
    /// Upper-triangle (row-major, including the diagonal) of the co-moment
    /// matrix `sum (x_p - mean_p)(x_q - mean_q)`.
    m2: Vec<f64>,
    delta: Vec<f64>,
}

impl VectorMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim * (dim + 1) / 2],
            delta: vec![0.0; dim],
        }
    }

    #[inline]
    fn tri(&self, p: usize, q: usize) -> usize {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        lo * self.dim - lo * (lo + 1) / 2 + hi
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim);
        self.count += 1;
        let n = self.count as f64;
        for ((d, m), &xi) in self.delta.iter_mut().zip(&mut self.mean).zip(x) {
            *d = xi - *m;
            *m += *d / n;
        }
        for p in 0..self.dim {
            let row = p * self.dim - p * (p + 1) / 2;
            for (q, (&xq, &mq)) in x.iter().zip(&self.mean).enumerate().skip(p) {
                self.m2[row + q] += self.delta[p] * (xq - mq);
            }
        }
    }

    pub fn merge(&mut self, other: &VectorMoments) {
        assert_eq!(self.dim, other.dim);
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let n = n1 + n2;
        let scale = n1 * n2 / n;
        for p in 0..self.dim {
            self.delta[p] = other.mean[p] - self.mean[p];
        }
        for p in 0..self.dim {
            for q in p..self.dim {
                let idx = p * self.dim - p * (p + 1) / 2 + q;
                self.m2[idx] += other.m2[idx] + self.delta[p] * self.delta[q] * scale;
            }
        }
        for p in 0..self.dim {
            self.mean[p] += self.delta[p] * n2 / n;
        }
        self.count += other.count;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self, p: usize) -> f64 {
        self.mean[p]
    }

    /// Unbiased sample covariance between components `p` and `q`.
    pub fn covariance(&self, p: usize, q: usize) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2[self.tri(p, q)] / (self.count - 1) as f64
        }
    }

    pub fn variance(&self, p: usize) -> f64 {
        self.covariance(p, p)
    }

    /// Standard error of the mean of component `p`.
    pub fn std_error(&self, p: usize) -> f64 {
        if self.count == 0 {
            f64::INFINITY
        } else {
            (self.variance(p) / self.count as f64).sqrt()
        }
    }

    /// Standard error of the sample covariance between `p` and `q`, using the
    /// Gaussian large-sample formula `sqrt((c_pp c_qq + c_pq^2) / (n - 1))`.
    pub fn covariance_std_error(&self, p: usize, q: usize) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        let cpq = self.covariance(p, q);
        let v = self.variance(p) * self.variance(q) + cpq * cpq;
        (v / (self.count - 1) as f64).sqrt()
    }
}

/// A Monte Carlo scalar with its verdict; every statistical claim in the
/// harness is expressed through this type.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: u64,
    pub target: f64,
    /// Additive slack on top of `se_multiplier * std_error`.
    pub slack: f64,
    pub se_multiplier: f64,
    pub pass: bool,
}

impl McEstimate {
    pub fn new(mean: f64, std_error: f64, replicas: u64, target: f64, slack: f64) -> Self {
        let se_multiplier = 3.0;
        let mut est = Self {
            mean,
            std_error,
            replicas,
            target,
            slack,
            se_multiplier,
            pass: false,
        };
        est.pass = est.recompute_verdict();
        est
    }

    /// The verdict is a pure function of the stored fields.
    pub fn recompute_verdict(&self) -> bool {
        (self.mean - self.target).abs() <= self.se_multiplier * self.std_error + self.slack
    }

    pub fn from_welford(w: &Welford, target: f64, slack: f64) -> Self {
        Self::new(w.mean(), w.std_error(), w.count(), target, slack)
    }
}

/// Error function, Abramowitz-Stegun 7.1.26 (absolute error below 1.5e-7).
pub fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// One-sample Kolmogorov-Smirnov outcome against a reference CDF.
#[derive(Debug, Clone)]
pub struct KsOutcome {
    pub statistic: f64,
    /// `1.63 / sqrt(n)`, the alpha = 0.01 asymptotic critical value.
    pub threshold: f64,
    pub n: usize,
    pub pass: bool,
}

/// One-sample KS statistic of `samples` against `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsOutcome> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("KS test needs samples".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = (f - i as f64 / n).abs();
        let hi = (f - (i as f64 + 1.0) / n).abs();
        d = d.max(lo).max(hi);
    }
    let threshold = 1.63 / n.sqrt();
    Ok(KsOutcome {
        statistic: d,
        threshold,
        n: xs.len(),
        pass: d <= threshold,
    })
}

/// KS test of `samples` against `N(mean, sd^2)`.
pub fn ks_normal_test(samples: &[f64], mean: f64, sd: f64) -> Result<KsOutcome> {
    if !(sd > 0.0) {
        return Err(Error::InsufficientData(
            "KS reference needs positive standard deviation".into(),
        ));
    }
    ks_test(samples, |x| normal_cdf((x - mean) / sd))
}

/// Least-squares fit of `ln y` against `ln x`; returns `(slope, intercept)`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(
            "slope fit needs at least two points".into(),
        ));
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::InsufficientData(format!(
                "log-log fit needs positive points, got ({x}, {y})"
            )));
        }
        let lx = x.ln();
        let ly = y.ln();
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::InsufficientData("degenerate abscissae".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Ok((slope, intercept))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_direct_formulas() {
        let xs = [1.0, 4.0, 9.0, 16.0, 25.0, -3.0];
        let mut w = Welford::new();
        for &x in &xs {
            w.push(x);
        }
        let mean: f64 = xs.iter().sum::<f64>() / xs.len() as f64;
        let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((w.mean() - mean).abs() < 1e-12);
        assert!((w.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn welford_merge_equals_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.13).collect();
        let mut whole = Welford::new();
        for &x in &xs {
            whole.push(x);
        }
        let mut left = Welford::new();
        let mut right = Welford::new();
        for &x in &xs[..400] {
            left.push(x);
        }
        for &x in &xs[400..] {
            right.push(x);
        }
        left.merge(&right);
        assert_eq!(left.count(), whole.count());
        assert!((left.mean() - whole.mean()).abs() < 1e-10 * whole.mean().abs().max(1.0));
        assert!((left.variance() - whole.variance()).abs() < 1e-10 * whole.variance());
    }

    #[test]
    fn vector_moments_covariance() {
        let data = [
            [1.0, 2.0, 0.5],
            [2.0, 4.1, 0.4],
            [3.0, 5.9, 0.7],
            [4.0, 8.2, 0.2],
            [5.0, 9.8, 0.9],
        ];
        let mut vm = VectorMoments::new(3);
        for row in &data {
            vm.push(row);
        }
        // direct two-pass covariance
        let n = data.len() as f64;
        for p in 0..3 {
            for q in 0..3 {
                let mp: f64 = data.iter().map(|r| r[p]).sum::<f64>() / n;
                let mq: f64 = data.iter().map(|r| r[q]).sum::<f64>() / n;
                let cov: f64 =
                    data.iter().map(|r| (r[p] - mp) * (r[q] - mq)).sum::<f64>() / (n - 1.0);
                assert!((vm.covariance(p, q) - cov).abs() < 1e-12, "cov({p},{q})");
            }
        }
        // merge consistency
        let mut a = VectorMoments::new(3);
        let mut b = VectorMoments::new(3);
        for row in &data[..2] {
            a.push(row);
        }
        for row in &data[2..] {
            b.push(row);
        }
        a.merge(&b);
        for p in 0..3 {
            for q in 0..3 {
                assert!((a.covariance(p, q) - vm.covariance(p, q)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mc_estimate_verdict() {
        let pass = McEstimate::new(1.01, 0.01, 100, 1.0, 0.0);
        assert!(pass.pass);
        assert_eq!(pass.pass, pass.recompute_verdict());
        let fail = McEstimate::new(1.2, 0.01, 100, 1.0, 0.05);
        assert!(!fail.pass);
        let slacked = McEstimate::new(1.2, 0.01, 100, 1.0, 0.18);
        assert!(slacked.pass);
    }

    #[test]
    fn erf_reference_values() {
        assert!((erf(0.0)).abs() < 3e-7);
        assert!((erf(0.5) - 0.5204998778).abs() < 2e-7);
        assert!((erf(1.0) - 0.8427006897).abs() < 2e-7);
        assert!((erf(-1.0) + 0.8427006897).abs() < 2e-7);
        assert!((normal_cdf(1.959963985) - 0.975).abs() < 2e-7);
        assert!((normal_cdf(0.0) - 0.5).abs() < 3e-7);
    }

    #[test]
    fn ks_statistic_hand_case() {
        // empirical CDF of {0.25, 0.75} vs U(0,1): D = 0.25
        let out = ks_test(&[0.25, 0.75], |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((out.statistic - 0.25).abs() < 1e-12);
        assert!(ks_test(&[], |x| x).is_err());
    }

    #[test]
    fn ks_normal_accepts_normal_samples() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..2000)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let out = ks_normal_test(&xs, 0.0, 1.0).unwrap();
        assert!(out.pass, "D = {} over {}", out.statistic, out.threshold);
        // and rejects a clearly shifted reference
        let shifted = ks_normal_test(&xs, 0.5, 1.0).unwrap();
        assert!(!shifted.pass);
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = (1..=6)
            .map(|i| {
                let x = 2f64.powi(-i);
                (x, 3.0 * x.powf(1.5))
            })
            .collect();
        let (slope, intercept) = log_log_slope(&pts).unwrap();
        assert!((slope - 1.5).abs() < 1e-10);
        assert!((intercept - 3f64.ln()).abs() < 1e-10);
        assert!(log_log_slope(&pts[..1]).is_err());
        assert!(log_log_slope(&[(1.0, -2.0), (2.0, 1.0)]).is_err());
    }
}
