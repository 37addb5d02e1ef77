//! Rescaled sheet fields and the statistical verification of their Gaussian
//! limit.
//!
//! For a density path `u` and scale `N`, the sheet field is
//!
//! ```text
//! V_N(t, x) = N^{-1/2} int_0^{xN} (u(t, z) - 1) dz,
//! ```
//!
//! which converges (jointly in `(t, x)`) to the Brownian sheet with
//! covariance `(t ^ s)(x ^ y)`. All comparisons here use the computable
//! finite-`N` quantity (the Fourier pair quadrature, or the iterated
//! log-Laplace exponent) as the primary target, with the limit reported
//! alongside: at desk scale the pure limit is unreachable at 3-standard-error
//! strictness.

use std::sync::Arc;

use rand::Rng;

use crate::duhamel;
use crate::error::Error;
use crate::heat::{plancherel_pair_integral, SampledFunction, Spectral};
use crate::lattice::{Lattice, SeedPlan, StreamDomain};
use crate::parallel::run_replicas;
use crate::scalar::Scalar;
use crate::sim::{simulate_fd_with, DensityPath, FdOptions};
use crate::stats::{ks_normal_test, log_log_slope, KsOutcome, McEstimate, VectorMoments, Welford};
use crate::Result;

/// Observation grid `{(t_k, x_l)}`, both axes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetGrid<T> {
    times: Vec<T>,
    xs: Vec<T>,
}

impl<T: Scalar> SheetGrid<T> {
    pub fn new(times: Vec<T>, xs: Vec<T>) -> Result<Self> {
        if times.is_empty() || xs.is_empty() {
            return Err(Error::InsufficientData("grid axes must be nonempty".into()));
        }
        for w in times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::TimeOrdering(
                    "grid times must strictly increase".into(),
                ));
            }
        }
        for w in xs.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::TimeOrdering("grid xs must strictly increase".into()));
            }
        }
        if times[0] < T::zero() || xs[0] < T::zero() {
            return Err(Error::TimeOrdering("grid axes must be nonnegative".into()));
        }
        Ok(Self { times, xs })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn n_points(&self) -> usize {
        self.times.len() * self.xs.len()
    }

    pub fn index(&self, ti: usize, xi: usize) -> usize {
        ti * self.xs.len() + xi
    }

    pub fn point(&self, p: usize) -> (T, T) {
        (self.times[p / self.xs.len()], self.xs[p % self.xs.len()])
    }

    /// Grid coordinates of `(t, x)` within a relative tolerance of 1e-9.
    pub fn find(&self, t: T, x: T) -> Option<(usize, usize)> {
        let tol = T::of(1e-9);
        let ti = self
            .times
            .iter()
            .position(|&u| (u - t).abs() <= tol * (T::one() + t.abs()))?;
        let xi = self
            .xs
            .iter()
            .position(|&u| (u - x).abs() <= tol * (T::one() + x.abs()))?;
        Some((ti, xi))
    }
}

/// `V_N` evaluated on the observation grid for one replica.
#[derive(Debug, Clone)]
pub struct SheetSample<T> {
    scale_n: T,
    replica: usize,
    n_xs: usize,
    values: Vec<T>,
}

impl<T: Scalar> SheetSample<T> {
    pub fn scale_n(&self) -> T {
        self.scale_n
    }

    pub fn replica(&self) -> usize {
        self.replica
    }

    pub fn value(&self, ti: usize, xi: usize) -> T {
        self.values[ti * self.n_xs + xi]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Evaluates `V_N` on the grid from a simulated density path.
///
/// The lattice must span `[0, x_max * N]`; the right endpoint of each window
/// gets linear partial-cell weighting.
pub fn compute_sheet<T: Scalar>(
    path: &DensityPath<T>,
    scale_n: T,
    grid: &SheetGrid<T>,
) -> Result<SheetSample<T>> {
    let lat = path.lattice();
    let x_max = *grid.xs().last().unwrap();
    if x_max * scale_n > lat.length() {
        return Err(Error::LatticeMismatch(format!(
            "window [0, {}] exceeds the lattice length {}",
            (x_max * scale_n).f64(),
            lat.length().f64()
        )));
    }
    let dx = lat.dx();
    let inv_sqrt_n = scale_n.sqrt().recip();
    let n_cells = lat.cells();

    let mut values = Vec::with_capacity(grid.n_points());
    let mut prefix: Vec<T> = Vec::with_capacity(n_cells + 1);
    for &t in grid.times() {
        if t == T::zero() {
            values.extend(std::iter::repeat_n(T::zero(), grid.xs().len()));
            continue;
        }
        let field = path.field_at(t).ok_or_else(|| {
            Error::LatticeMismatch(format!("time {t} not among the path's observation times"))
        })?;
        prefix.clear();
        prefix.push(T::zero());
        let mut acc = T::zero();
        for &u in field {
            acc = acc + (u - T::one()) * dx;
            prefix.push(acc);
        }
        for &x in grid.xs() {
            let edge = x * scale_n / dx;
            let j = edge.floor().f64() as usize;
            if j >= n_cells {
                values.push(inv_sqrt_n * prefix[n_cells]);
                continue;
            }
            let frac = edge - T::of(j as f64);
            let integral = prefix[j] + frac * (field[j] - T::one()) * dx;
            values.push(inv_sqrt_n * integral);
        }
    }
    Ok(SheetSample {
        scale_n,
        replica: path.replica(),
        n_xs: grid.xs().len(),
        values,
    })
}

/// Simulates `replicas` finite-difference paths and reduces each one to its
/// sheet sample.
pub fn fd_sheet_ensemble<T: Scalar>(
    lattice: &Lattice<T>,
    plan: &SeedPlan,
    scale_n: T,
    grid: &SheetGrid<T>,
    options: &FdOptions,
) -> Result<Vec<SheetSample<T>>> {
    run_replicas(plan.replica_count(), |rep| {
        let path = simulate_fd_with(lattice, plan, rep, options)?;
        compute_sheet(&path, scale_n, grid)
    })
}

/// Exact Brownian-sheet replicas on the grid, for calibrating the statistical
/// tests against their own null.
pub fn synthetic_sheet_ensemble<T: Scalar>(
    grid: &SheetGrid<T>,
    plan: &SeedPlan,
) -> Vec<SheetSample<T>> {
    let nt = grid.times().len();
    let nx = grid.xs().len();
    (0..plan.replica_count())
        .map(|rep| {
            let mut rng = plan.rng(StreamDomain::Synthetic, rep);
            // independent rectangle increments, cumulated in both axes
            let mut values = vec![T::zero(); nt * nx];
            let mut prev_t = T::zero();
            let mut row_acc = vec![T::zero(); nx];
            for ti in 0..nt {
                let dt = grid.times()[ti] - prev_t;
                prev_t = grid.times()[ti];
                let mut prev_x = T::zero();
                let mut acc = T::zero();
                for xi in 0..nx {
                    let dxw = grid.xs()[xi] - prev_x;
                    prev_x = grid.xs()[xi];
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    acc = acc + T::of(z) * (dt * dxw).sqrt();
                    row_acc[xi] = row_acc[xi] + acc;
                    values[ti * nx + xi] = row_acc[xi];
                }
            }
            SheetSample {
                scale_n: T::one(),
                replica: rep,
                n_xs: nx,
                values,
            }
        })
        .collect()
}

/// Cross moments of the sheet values across replicas, merged in replica
/// order.
pub fn sheet_moments<T: Scalar>(samples: &[SheetSample<T>]) -> VectorMoments {
    let dim = samples.first().map_or(0, |s| s.values().len());
    let mut vm = VectorMoments::new(dim);
    let mut row = vec![0.0; dim];
    for s in samples {
        for (dst, &v) in row.iter_mut().zip(s.values()) {
            *dst = v.f64();
        }
        vm.push(&row);
    }
    vm
}

/// The scaled window `1^{(N)}_{[0, x]} = N^{-1/2} 1_[0, xN]` on the
/// simulation lattice.
pub fn scaled_window<T: Scalar>(ctx: &Arc<Spectral<T>>, x: T, scale_n: T) -> SampledFunction<T> {
    let f = SampledFunction::indicator(ctx, T::zero(), x * scale_n);
    let amp = scale_n.sqrt().recip();
    SampledFunction::from_values(ctx, f.values().iter().map(|&v| v * amp).collect())
}

/// Finite-`N` covariance target
/// `Cov(V_N(t, x), V_N(s, y)) = int_0^{t^s} <P_{r+|t-s|} h_x, P_r h_y> dr`
/// through the Fourier quadrature on the simulation lattice.
pub fn finite_n_covariance<T: Scalar>(
    ctx: &Arc<Spectral<T>>,
    scale_n: T,
    a: (T, T),
    b: (T, T),
) -> Result<f64> {
    let (t1, x1) = a;
    let (t2, x2) = b;
    let tm = t1.min(t2);
    if tm == T::zero() || x1 == T::zero() || x2 == T::zero() {
        return Ok(0.0);
    }
    let h1 = scaled_window(ctx, x1, scale_n);
    let h2 = scaled_window(ctx, x2, scale_n);
    let gap = (t1 - t2).abs();
    Ok(plancherel_pair_integral(&h1, &h2, tm, gap, T::zero(), T::one())?.f64())
}

/// All-pairs covariance targets on the grid: `targets[p * P + q]`.
pub fn finite_n_cov_targets<T: Scalar>(
    ctx: &Arc<Spectral<T>>,
    scale_n: T,
    grid: &SheetGrid<T>,
) -> Result<Vec<f64>> {
    let p_total = grid.n_points();
    let mut out = vec![0.0; p_total * p_total];
    for p in 0..p_total {
        for q in p..p_total {
            let v = finite_n_covariance(ctx, scale_n, grid.point(p), grid.point(q))?;
            out[p * p_total + q] = v;
            out[q * p_total + p] = v;
        }
    }
    Ok(out)
}

/// Brownian-sheet limit covariance `(t ^ s)(x ^ y)` for every grid pair.
pub fn limit_cov_targets<T: Scalar>(grid: &SheetGrid<T>) -> Vec<f64> {
    let p_total = grid.n_points();
    let mut out = vec![0.0; p_total * p_total];
    for p in 0..p_total {
        let (t1, x1) = grid.point(p);
        for q in 0..p_total {
            let (t2, x2) = grid.point(q);
            out[p * p_total + q] = (t1.min(t2) * x1.min(x2)).f64();
        }
    }
    out
}

/// One grid pair in the covariance verdict matrix.
#[derive(Debug, Clone)]
pub struct CovarianceEntry {
    pub t1: f64,
    pub x1: f64,
    pub t2: f64,
    pub x2: f64,
    pub estimate: McEstimate,
    pub target_limit: f64,
    /// `|empirical - limit| <= limit_abs_tol` when a tolerance was requested.
    pub within_limit_tol: Option<bool>,
}

/// Empirical covariances of every grid pair against their finite-`N` targets
/// (verdict at 3 SE) and optionally against the limit in absolute terms.
///
/// The standard error is nonparametric: the spread of the centered products
/// across replicas. The Gaussian-moment formula understates it on
/// heavy-tailed pairs, which matters when a hundred pairs are gated at 3 SE
/// simultaneously.
pub fn covariance_check<T: Scalar>(
    samples: &[SheetSample<T>],
    grid: &SheetGrid<T>,
    targets_finite_n: &[f64],
    targets_limit: &[f64],
    limit_abs_tol: Option<f64>,
) -> Result<Vec<CovarianceEntry>> {
    if samples.len() < 100 {
        return Err(Error::InsufficientData(format!(
            "covariance check needs at least 100 replicas, got {}",
            samples.len()
        )));
    }
    let vm = sheet_moments(samples);
    let p_total = grid.n_points();
    let r = samples.len() as f64;
    let bessel = r / (r - 1.0);
    let mut entries = Vec::with_capacity(p_total * (p_total + 1) / 2);
    for p in 0..p_total {
        for q in p..p_total {
            let mut w = Welford::new();
            for s in samples {
                let a = s.values()[p].f64() - vm.mean(p);
                let b = s.values()[q].f64() - vm.mean(q);
                w.push(a * b);
            }
            let est = w.mean() * bessel;
            let se = w.std_error() * bessel;
            let target = targets_finite_n[p * p_total + q];
            let limit = targets_limit[p * p_total + q];
            let (t1, x1) = grid.point(p);
            let (t2, x2) = grid.point(q);
            entries.push(CovarianceEntry {
                t1: t1.f64(),
                x1: x1.f64(),
                t2: t2.f64(),
                x2: x2.f64(),
                estimate: McEstimate::new(est, se, vm.count(), target, 0.0),
                within_limit_tol: limit_abs_tol.map(|tol| (est - limit).abs() <= tol),
                target_limit: limit,
            });
        }
    }
    Ok(entries)
}

/// Restricts sheet samples to a subgrid (axes must be subsets of the grid's).
pub fn restrict_to_subgrid<T: Scalar>(
    samples: &[SheetSample<T>],
    grid: &SheetGrid<T>,
    times: &[T],
    xs: &[T],
) -> Result<(SheetGrid<T>, Vec<SheetSample<T>>)> {
    let sub = SheetGrid::new(times.to_vec(), xs.to_vec())?;
    let mut coords = Vec::with_capacity(sub.n_points());
    for &t in times {
        for &x in xs {
            let (ti, xi) = grid.find(t, x).ok_or_else(|| {
                Error::LatticeMismatch(format!("subgrid point ({t}, {x}) not on the grid"))
            })?;
            coords.push((ti, xi));
        }
    }
    let restricted = samples
        .iter()
        .map(|s| SheetSample {
            scale_n: s.scale_n,
            replica: s.replica,
            n_xs: xs.len(),
            values: coords.iter().map(|&(ti, xi)| s.value(ti, xi)).collect(),
        })
        .collect();
    Ok((sub, restricted))
}

/// Marginal normality verdict at one grid point.
#[derive(Debug, Clone)]
pub struct NormalityOutcome {
    /// All-zero samples (the `x = 0` or `t = 0` column): test skipped.
    pub degenerate: bool,
    pub ks: Option<KsOutcome>,
    pub sample_mean: f64,
    pub sample_variance: f64,
    /// Standard deviation of the finite-`N` reference normal.
    pub reference_sd: f64,
}

/// One-sample KS test of `V_N(t, x)` against a centered normal with the
/// finite-`N` reference variance.
pub fn normality_check<T: Scalar>(
    samples: &[SheetSample<T>],
    grid: &SheetGrid<T>,
    t: T,
    x: T,
    reference_variance: f64,
) -> Result<NormalityOutcome> {
    if samples.len() < 1000 {
        return Err(Error::InsufficientData(format!(
            "normality check needs at least 1000 replicas, got {}",
            samples.len()
        )));
    }
    let (ti, xi) = grid
        .find(t, x)
        .ok_or_else(|| Error::LatticeMismatch(format!("point ({t}, {x}) not on the grid")))?;
    let xs: Vec<f64> = samples.iter().map(|s| s.value(ti, xi).f64()).collect();
    let mut w = Welford::new();
    for &v in &xs {
        w.push(v);
    }
    if reference_variance <= 0.0 || xs.iter().all(|&v| v == 0.0) {
        return Ok(NormalityOutcome {
            degenerate: true,
            ks: None,
            sample_mean: w.mean(),
            sample_variance: w.variance(),
            reference_sd: reference_variance.max(0.0).sqrt(),
        });
    }
    let sd = reference_variance.sqrt();
    let ks = ks_normal_test(&xs, 0.0, sd)?;
    Ok(NormalityOutcome {
        degenerate: false,
        ks: Some(ks),
        sample_mean: w.mean(),
        sample_variance: w.variance(),
        reference_sd: sd,
    })
}

/// Multi-point Laplace transform verdict.
#[derive(Debug, Clone)]
pub struct FddLaplaceOutcome {
    /// Monte Carlo mean of `exp(-sum_k theta_k V_N(t_k, x_k))` against the
    /// finite-`N` (iterated-exponent) target.
    pub estimate: McEstimate,
    pub target_limit: f64,
    pub gap_to_limit: f64,
}

/// Compares the empirical multi-point Laplace transform with both the
/// finite-`N` exponent (the verdict) and the Gaussian limit (reported).
pub fn fdd_laplace_check<T: Scalar>(
    samples: &[SheetSample<T>],
    grid: &SheetGrid<T>,
    points: &[(T, T, T)],
    finite_n_exponent: f64,
    limit_exponent: f64,
) -> Result<FddLaplaceOutcome> {
    if points.is_empty() {
        return Err(Error::InsufficientData("need at least one point".into()));
    }
    let coords: Vec<(usize, usize, T)> = points
        .iter()
        .map(|&(t, x, theta)| {
            grid.find(t, x)
                .map(|(ti, xi)| (ti, xi, theta))
                .ok_or_else(|| Error::LatticeMismatch(format!("point ({t}, {x}) not on the grid")))
        })
        .collect::<Result<_>>()?;
    let mut w = Welford::new();
    for s in samples {
        let mut expo = 0.0;
        for &(ti, xi, theta) in &coords {
            expo += theta.f64() * s.value(ti, xi).f64();
        }
        w.push((-expo).exp());
    }
    let target = finite_n_exponent.exp();
    let limit = limit_exponent.exp();
    let estimate = McEstimate::from_welford(&w, target, 0.0);
    let gap = (estimate.mean - limit).abs();
    Ok(FddLaplaceOutcome {
        estimate,
        target_limit: limit,
        gap_to_limit: gap,
    })
}

/// A fitted log-log scaling slope with its pass threshold.
#[derive(Debug, Clone)]
pub struct SlopeFit {
    /// `(lag, k-th absolute moment)` pairs the slope was fitted on.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Lag ladders for the Hoelder moment checks. All referenced points must be
/// on the grid; the spatial ladder measures `V(t, h) - V(t, 0) = V(t, h)`.
#[derive(Debug, Clone)]
pub struct HolderSpec<T> {
    pub spatial_t: T,
    pub spatial_lags: Vec<T>,
    pub temporal_x: T,
    pub temporal_base: T,
    pub temporal_lags: Vec<T>,
    /// Rectangle corner `(t0, x0)` and `(tau, h)` lags, exercised at `k = 4`.
    pub rect_base: (T, T),
    pub rect_lags: Vec<(T, T)>,
}

/// Fitted scaling exponents for moment order `k`.
#[derive(Debug, Clone)]
pub struct HolderReport {
    pub k: u32,
    pub spatial: SlopeFit,
    pub temporal: SlopeFit,
    pub rectangle: Option<SlopeFit>,
}

fn moment_ladder<T: Scalar, F>(
    samples: &[SheetSample<T>],
    k: u32,
    lags: &[f64],
    increment: F,
) -> Result<Vec<(f64, f64)>>
where
    F: Fn(&SheetSample<T>, usize) -> f64,
{
    let mut points = Vec::with_capacity(lags.len());
    for (li, &lag) in lags.iter().enumerate() {
        let mut w = Welford::new();
        for s in samples {
            w.push(increment(s, li).abs().powi(k as i32));
        }
        points.push((lag, w.mean()));
    }
    Ok(points)
}

/// Fits the spatial, temporal and (for `k = 4`) rectangle scaling slopes of
/// the `k`-th absolute moments over the lag ladders.
///
/// Pass margins: `k/2 - 0.3` on the marginal slopes; the rectangle slope is a
/// lower-bound check at `5/4 - 0.3`.
pub fn holder_check<T: Scalar>(
    samples: &[SheetSample<T>],
    grid: &SheetGrid<T>,
    k: u32,
    spec: &HolderSpec<T>,
) -> Result<HolderReport> {
    if !(k == 2 || k == 4) {
        return Err(Error::InsufficientData(format!(
            "moment order must be 2 or 4, got {k}"
        )));
    }
    if samples.len() < 1000 {
        return Err(Error::InsufficientData(format!(
            "Hoelder check needs at least 1000 replicas, got {}",
            samples.len()
        )));
    }
    if spec.spatial_lags.len() < 4 || spec.temporal_lags.len() < 4 {
        return Err(Error::InsufficientData(
            "lag ladders need at least 4 points".into(),
        ));
    }

    let locate = |t: T, x: T| -> Result<(usize, usize)> {
        grid.find(t, x)
            .ok_or_else(|| Error::LatticeMismatch(format!("point ({t}, {x}) not on the grid")))
    };

    // spatial: V(t, h)
    let spatial_coords: Vec<(usize, usize)> = spec
        .spatial_lags
        .iter()
        .map(|&h| locate(spec.spatial_t, h))
        .collect::<Result<_>>()?;
    let spatial_pts = moment_ladder(
        samples,
        k,
        &spec
            .spatial_lags
            .iter()
            .map(|&h| h.f64())
            .collect::<Vec<_>>(),
        |s, li| {
            let (ti, xi) = spatial_coords[li];
            s.value(ti, xi).f64()
        },
    )?;
    let (slope, intercept) = log_log_slope(&spatial_pts)?;
    let threshold = k as f64 / 2.0 - 0.3;
    let spatial = SlopeFit {
        points: spatial_pts,
        slope,
        intercept,
        threshold,
        pass: slope >= threshold,
    };

    // temporal: V(t0 + tau, x) - V(t0, x)
    let base = locate(spec.temporal_base, spec.temporal_x)?;
    let temporal_coords: Vec<(usize, usize)> = spec
        .temporal_lags
        .iter()
        .map(|&tau| locate(spec.temporal_base + tau, spec.temporal_x))
        .collect::<Result<_>>()?;
    let temporal_pts = moment_ladder(
        samples,
        k,
        &spec
            .temporal_lags
            .iter()
            .map(|&tau| tau.f64())
            .collect::<Vec<_>>(),
        |s, li| {
            let (ti, xi) = temporal_coords[li];
            s.value(ti, xi).f64() - s.value(base.0, base.1).f64()
        },
    )?;
    let (slope, intercept) = log_log_slope(&temporal_pts)?;
    let temporal = SlopeFit {
        points: temporal_pts,
        slope,
        intercept,
        threshold,
        pass: slope >= threshold,
    };

    // rectangle increments at k = 4 against the 5/4 exponent
    let rectangle = if k == 4 && spec.rect_lags.len() >= 4 {
        let (t0, x0) = spec.rect_base;
        let corner = locate(t0, x0)?;
        let rect_coords: Vec<[(usize, usize); 3]> = spec
            .rect_lags
            .iter()
            .map(|&(tau, h)| {
                Ok([
                    locate(t0 + tau, x0 + h)?,
                    locate(t0 + tau, x0)?,
                    locate(t0, x0 + h)?,
                ])
            })
            .collect::<Result<_>>()?;
        let rect_pts = moment_ladder(
            samples,
            k,
            &spec
                .rect_lags
                .iter()
                .map(|&(tau, h)| (tau * h).f64())
                .collect::<Vec<_>>(),
            |s, li| {
                let [hh, ht, th] = rect_coords[li];
                s.value(hh.0, hh.1).f64() + s.value(corner.0, corner.1).f64()
                    - s.value(ht.0, ht.1).f64()
                    - s.value(th.0, th.1).f64()
            },
        )?;
        let (slope, intercept) = log_log_slope(&rect_pts)?;
        let threshold = 5.0 / 4.0 - 0.3;
        Some(SlopeFit {
            points: rect_pts,
            slope,
            intercept,
            threshold,
            pass: slope >= threshold,
        })
    } else {
        None
    };

    Ok(HolderReport {
        k,
        spatial,
        temporal,
        rectangle,
    })
}

/// Verifies the exact centering `E V_N(t, x) = 0` at every grid point, at 3
/// standard errors.
pub fn centering_check<T: Scalar>(
    samples: &[SheetSample<T>],
    grid: &SheetGrid<T>,
) -> Vec<McEstimate> {
    let vm = sheet_moments(samples);
    (0..grid.n_points())
        .map(|p| McEstimate::new(vm.mean(p), vm.std_error(p), vm.count(), 0.0, 0.0))
        .collect()
}

/// Finite-`N` iterated exponent and its Gaussian limit for indicator windows
/// `theta_k 1_[0, x_k]` at the sheet points, solved on a dedicated scaled
/// lattice.
pub fn window_exponents<T: Scalar>(
    points: &[(T, T, T)],
    scale_n: T,
    solver_dx: T,
) -> Result<(f64, f64)> {
    if points.is_empty() {
        return Err(Error::InsufficientData("need at least one point".into()));
    }
    let x_max = points.iter().map(|&(_, x, _)| x).fold(T::zero(), T::max);
    let t_max = points.iter().map(|&(t, _, _)| t).fold(T::zero(), T::max);

    // unit-scale home for the windows
    let unit_len = x_max * T::of(2.0) + T::of(12.0) * t_max.sqrt();
    let unit = Spectral::new(crate::lattice::build_lattice(
        unit_len,
        solver_dx,
        t_max,
        &[t_max],
    )?);
    // scaled lattice sized by the wraparound rule
    let scaled_len = x_max * scale_n * T::of(2.0) + T::of(12.0) * t_max.sqrt();
    let target = Spectral::new(crate::lattice::build_lattice(
        scaled_len,
        solver_dx,
        t_max,
        &[t_max],
    )?);

    let mut entries: Vec<(T, SampledFunction<T>, T)> = points
        .iter()
        .map(|&(t, x, theta)| (t, SampledFunction::indicator(&unit, T::zero(), x), theta))
        .collect();
    entries.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite times"));
    let spec = duhamel::FddSpec::new(entries, scale_n)?;
    let iterated = duhamel::iterated_exponent(&spec, &target, &duhamel::SolveOptions::default())?;
    let gaussian = duhamel::gaussian_limit_exponent(spec.times(), spec.functions())?;
    Ok((iterated.exponent.f64(), gaussian.f64()))
}
