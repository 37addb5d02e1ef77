//! Heat-semigroup and Fourier machinery on the periodic lattice.
//!
//! The heat flow is applied as a Fourier multiplier `exp(-t xi_k^2 / 2)`,
//! which is exact (to roundoff) for lattice data: no spatial truncation error
//! enters the deterministic verifications. Frequencies are `xi_k = 2 pi k / L`
//! with `k` running over the signed lattice indices.
//!
//! Transform conventions match the continuum definition
//! `f_hat(xi) = int f(y) e^{i xi y} dy`:
//!
//! * analysis: `f_hat_k = dx * sum_j f_j e^{+i xi_k x_j}`
//! * synthesis: `f_j = (1/L) * sum_k f_hat_k e^{-i xi_k x_j}`
//!
//! so analysis followed by synthesis is the identity with no further
//! normalization.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::Fft;

use crate::error::Error;
use crate::lattice::Lattice;
use crate::scalar::Scalar;
use crate::Result;

/// Gaussian heat kernel `p_t(x) = (2 pi t)^{-1/2} exp(-x^2 / (2t))`.
pub fn heat_kernel<T: Scalar>(t: T, x: T) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::InvalidTime(format!(
            "heat kernel needs t > 0, got {t}"
        )));
    }
    let two = T::of(2.0);
    let norm = (two * T::PI() * t).sqrt().recip();
    Ok(norm * (-(x * x) / (two * t)).exp())
}

/// `|hat 1_[y,x](a)|^2 = 2 (1 - cos((x - y) a)) / a^2`, continued by
/// `(x - y)^2` at `a = 0`.
pub fn indicator_fourier_sq<T: Scalar>(x: T, y: T, a: T) -> T {
    let w = x - y;
    let h = w * a / T::of(2.0);
    if h == T::zero() {
        return w * w;
    }
    // 2(1 - cos(2h))/a^2 = (w * sin(h)/h)^2, stable near a = 0
    let s = h.sin() / h;
    (w * s) * (w * s)
}

/// FFT plans plus the frequency table for one lattice. Shared read-only by
/// every sampled function on that lattice.
pub struct Spectral<T: Scalar> {
    lattice: Arc<Lattice<T>>,
    analysis: Arc<dyn Fft<T>>,
    synthesis: Arc<dyn Fft<T>>,
    freq: Vec<T>,
}

impl<T: Scalar> std::fmt::Debug for Spectral<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("cells", &self.lattice.cells())
            .finish()
    }
}

impl<T: Scalar> Spectral<T> {
    pub fn new(lattice: Lattice<T>) -> Arc<Self> {
        let n = lattice.cells();
        let mut planner = rustfft::FftPlanner::new();
        // analysis uses the +i kernel, i.e. rustfft's "inverse" direction
        let analysis = planner.plan_fft_inverse(n);
        let synthesis = planner.plan_fft_forward(n);
        let two_pi = T::of(2.0) * T::PI();
        let freq = (0..n)
            .map(|k| {
                let signed = if k <= n / 2 {
                    k as f64
                } else {
                    k as f64 - n as f64
                };
                two_pi * T::of(signed) / lattice.length()
            })
            .collect();
        Arc::new(Self {
            lattice: Arc::new(lattice),
            analysis,
            synthesis,
            freq,
        })
    }

    pub fn lattice(&self) -> &Lattice<T> {
        &self.lattice
    }

    /// Lattice frequencies `xi_k` in FFT index order.
    pub fn frequencies(&self) -> &[T] {
        &self.freq
    }

    /// Fourier coefficients of lattice values.
    pub fn analyze(&self, values: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.analysis.process(&mut buf);
        let dx = self.lattice.dx();
        for c in &mut buf {
            *c = *c * dx;
        }
        buf
    }

    /// Lattice values from Fourier coefficients (real part).
    pub fn synthesize(&self, coeffs: &[Complex<T>]) -> Vec<T> {
        let mut buf = coeffs.to_vec();
        self.synthesis.process(&mut buf);
        let inv_l = self.lattice.length().recip();
        buf.into_iter().map(|c| c.re * inv_l).collect()
    }

    /// Heat multiplier `exp(-t xi_k^2 / 2)` per frequency.
    pub fn heat_multiplier(&self, t: T) -> Vec<T> {
        let half = T::of(0.5);
        self.freq
            .iter()
            .map(|&xi| (-t * xi * xi * half).exp())
            .collect()
    }

    /// In-place heat flow on raw values using a precomputed multiplier and a
    /// caller-provided scratch buffer. This is the marching solver's hot path.
    pub fn apply_multiplier(
        &self,
        values: &mut [T],
        multiplier: &[T],
        scratch: &mut Vec<Complex<T>>,
    ) {
        let n = values.len();
        scratch.clear();
        scratch.extend(values.iter().map(|&v| Complex::new(v, T::zero())));
        self.analysis.process(scratch);
        for (c, &m) in scratch.iter_mut().zip(multiplier) {
            *c = *c * m;
        }
        self.synthesis.process(scratch);
        let inv_n = T::of(n as f64).recip();
        for (v, c) in values.iter_mut().zip(scratch.iter()) {
            *v = c.re * inv_n;
        }
    }
}

/// A real function sampled on the lattice, interpreted as piecewise constant
/// on cells. Norms and Fourier coefficients are computed at construction and
/// never mutated.
#[derive(Clone)]
pub struct SampledFunction<T: Scalar> {
    ctx: Arc<Spectral<T>>,
    values: Vec<T>,
    l1: T,
    l2: T,
    sup: T,
    mass: T,
    fourier: Vec<Complex<T>>,
    admissible: bool,
}

impl<T: Scalar> std::fmt::Debug for SampledFunction<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SampledFunction")
            .field("cells", &self.values.len())
            .field("l1", &self.l1)
            .field("sup", &self.sup)
            .field("admissible", &self.admissible)
            .finish()
    }
}

impl<T: Scalar> SampledFunction<T> {
    pub fn from_values(ctx: &Arc<Spectral<T>>, values: Vec<T>) -> Self {
        assert_eq!(
            values.len(),
            ctx.lattice().cells(),
            "one value per lattice cell"
        );
        let dx = ctx.lattice().dx();
        let mut l1 = T::zero();
        let mut l2 = T::zero();
        let mut sup = T::zero();
        let mut mass = T::zero();
        let mut nonneg = true;
        let mut finite = true;
        for &v in &values {
            l1 = l1 + v.abs() * dx;
            l2 = l2 + v * v * dx;
            mass = mass + v * dx;
            if v.abs() > sup {
                sup = v.abs();
            }
            nonneg &= v >= T::zero();
            finite &= v.is_finite();
        }
        let fourier = ctx.analyze(&values);
        Self {
            ctx: Arc::clone(ctx),
            values,
            l1,
            l2: l2.sqrt(),
            sup,
            mass,
            fourier,
            admissible: nonneg && finite,
        }
    }

    pub fn zero(ctx: &Arc<Spectral<T>>) -> Self {
        Self::from_values(ctx, vec![T::zero(); ctx.lattice().cells()])
    }

    pub fn constant(ctx: &Arc<Spectral<T>>, c: T) -> Self {
        Self::from_values(ctx, vec![c; ctx.lattice().cells()])
    }

    /// Cell-averaged indicator of `[a, b]` in `[0, L]`; partial cells get
    /// their overlap fraction, so the lattice mass is `b - a` exactly.
    pub fn indicator(ctx: &Arc<Spectral<T>>, a: T, b: T) -> Self {
        let lat = ctx.lattice();
        assert!(
            T::zero() <= a && a <= b && b <= lat.length(),
            "indicator endpoints must satisfy 0 <= a <= b <= L"
        );
        let dx = lat.dx();
        let values = (0..lat.cells())
            .map(|j| {
                let lo = lat.x(j);
                let hi = lo + dx;
                let overlap = (b.min(hi) - a.max(lo)).max(T::zero());
                overlap / dx
            })
            .collect();
        Self::from_values(ctx, values)
    }

    /// Random nonnegative bounded bandlimited function: a constant plus a few
    /// low-frequency cosines, offset to stay strictly positive.
    pub fn random_admissible<R: rand::Rng>(
        ctx: &Arc<Spectral<T>>,
        rng: &mut R,
        max_modes: usize,
    ) -> Self {
        let lat = ctx.lattice();
        let n = lat.cells();
        let two_pi = 2.0 * std::f64::consts::PI;
        let modes = rng.gen_range(1..=max_modes.max(1));
        let coeffs: Vec<(f64, f64, f64)> = (0..modes)
            .map(|_| {
                let k = rng.gen_range(1..=8) as f64;
                let amp = rng.gen_range(0.05..0.6);
                let phase = rng.gen_range(0.0..two_pi);
                (k, amp, phase)
            })
            .collect();
        let offset: f64 = coeffs.iter().map(|&(_, a, _)| a).sum::<f64>() + rng.gen_range(0.02..0.5);
        let len = lat.length().f64();
        let values = (0..n)
            .map(|j| {
                let x = lat.x(j).f64();
                let mut v = offset;
                for &(k, a, p) in &coeffs {
                    v += a * (two_pi * k * x / len + p).cos();
                }
                T::of(v)
            })
            .collect();
        Self::from_values(ctx, values)
    }

    pub fn ctx(&self) -> &Arc<Spectral<T>> {
        &self.ctx
    }

    pub fn lattice(&self) -> &Lattice<T> {
        self.ctx.lattice()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `int |f|`.
    pub fn l1_norm(&self) -> T {
        self.l1
    }

    /// `(int f^2)^{1/2}`.
    pub fn l2_norm(&self) -> T {
        self.l2
    }

    /// `sup |f|`.
    pub fn sup_norm(&self) -> T {
        self.sup
    }

    /// `<lambda, f> = int f` (signed).
    pub fn mass(&self) -> T {
        self.mass
    }

    /// Cached lattice Fourier coefficients.
    pub fn fourier(&self) -> &[Complex<T>] {
        &self.fourier
    }

    /// Nonnegative, bounded and finite: the admissible class for the Laplace
    /// functional. Checked strictly (tolerance zero) at construction.
    pub fn admissible(&self) -> bool {
        self.admissible
    }

    pub fn require_admissible(&self) -> Result<()> {
        if self.admissible {
            Ok(())
        } else {
            Err(Error::NotAdmissible(
                "function must be nonnegative, bounded and finite".into(),
            ))
        }
    }

    /// `<f, g> = int f g` on the shared lattice.
    pub fn inner(&self, other: &Self) -> T {
        assert!(
            self.lattice().same_grid(other.lattice()),
            "inner product needs a shared lattice"
        );
        let dx = self.lattice().dx();
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum::<T>()
            * dx
    }
}

/// `P_t f`: circular convolution with the wrapped Gaussian kernel, computed
/// in Fourier space. `t = 0` returns `f` unchanged.
pub fn apply_semigroup<T: Scalar>(f: &SampledFunction<T>, t: T) -> SampledFunction<T> {
    assert!(t >= T::zero(), "the heat semigroup needs t >= 0");
    if t == T::zero() {
        return f.clone();
    }
    let ctx = f.ctx();
    let half = T::of(0.5);
    let coeffs: Vec<Complex<T>> = f
        .fourier()
        .iter()
        .zip(ctx.frequencies())
        .map(|(&c, &xi)| c * (-t * xi * xi * half).exp())
        .collect();
    let values = ctx.synthesize(&coeffs);
    SampledFunction::from_values(ctx, values)
}

/// `f^{(N)}(x) = N^{-1/2} f(x/N)`, resampled exactly (cell averages of the
/// piecewise-constant source) onto the target lattice.
///
/// The stretched support must fit inside the target domain.
pub fn scale_function<T: Scalar>(
    f: &SampledFunction<T>,
    scale_n: T,
    target: &Arc<Spectral<T>>,
) -> Result<SampledFunction<T>> {
    assert!(scale_n > T::zero(), "scale must be positive");
    let src = f.lattice();
    let tgt = target.lattice();

    let nonzero: Vec<usize> = (0..src.cells())
        .filter(|&j| f.values()[j] != T::zero())
        .collect();
    if nonzero.is_empty() {
        return Ok(SampledFunction::zero(target));
    }
    let support_lo = src.x(*nonzero.first().unwrap());
    let support_hi = src.x(*nonzero.last().unwrap()) + src.dx();
    let scaled_lo = support_lo * scale_n;
    let scaled_hi = support_hi * scale_n;
    if scaled_hi > tgt.length() * (T::one() + T::of(1e-12)) {
        return Err(Error::SupportOverflow(
            scaled_lo.f64(),
            scaled_hi.f64(),
            tgt.length().f64(),
        ));
    }

    // prefix integral of the piecewise-constant source
    let dx_s = src.dx();
    let mut prefix = Vec::with_capacity(src.cells() + 1);
    prefix.push(T::zero());
    let mut acc = T::zero();
    for &v in f.values() {
        acc = acc + v * dx_s;
        prefix.push(acc);
    }
    let eval_prefix = |x: T| -> T {
        if x <= T::zero() {
            return T::zero();
        }
        if x >= src.length() {
            return *prefix.last().unwrap();
        }
        let j = (x / dx_s).floor();
        let idx = (j.f64() as usize).min(src.cells() - 1);
        let r = x - dx_s * T::of(idx as f64);
        prefix[idx] + f.values()[idx] * r
    };

    let amp = scale_n.sqrt().recip();
    let dx_t = tgt.dx();
    let values = (0..tgt.cells())
        .map(|j| {
            let a = tgt.x(j) / scale_n;
            let b = (tgt.x(j) + dx_t) / scale_n;
            amp * (eval_prefix(b) - eval_prefix(a)) * scale_n / dx_t
        })
        .collect();
    Ok(SampledFunction::from_values(target, values))
}

/// `int_0^t ds int P_{s+r1} f^{(N)} (y) P_{s+r2} g^{(N)} (y) dy`, evaluated
/// through the Fourier representation with the time integral done
/// analytically per frequency:
///
/// ```text
/// int_0^t e^{-(s+c) xi^2 / N^2} ds = e^{-c q} (1 - e^{-t q}) / q,
/// q = xi^2/N^2, c = (r1 + r2)/2,
/// ```
///
/// and the `xi = 0` frequency contributing `t * f_hat(0) * conj(g_hat(0))`.
///
/// The integral converges, increasing in `N`, to `t * <f, g>`, and for
/// `f = g` is bounded by `t * <f, f>` uniformly in `N`.
pub fn plancherel_pair_integral<T: Scalar>(
    f: &SampledFunction<T>,
    g: &SampledFunction<T>,
    t: T,
    r1: T,
    r2: T,
    scale_n: T,
) -> Result<T> {
    if !f.lattice().same_grid(g.lattice()) {
        return Err(Error::LatticeMismatch(
            "pair integral needs both functions on one lattice".into(),
        ));
    }
    if !(t > T::zero()) {
        return Err(Error::InvalidTime(format!(
            "pair integral needs t > 0, got {t}"
        )));
    }
    if r1 < T::zero() || r2 < T::zero() {
        return Err(Error::InvalidTime("r1, r2 must be nonnegative".into()));
    }
    assert!(scale_n > T::zero(), "scale must be positive");

    let c = (r1 + r2) / T::of(2.0);
    let inv_l = f.lattice().length().recip();
    let n2 = scale_n * scale_n;
    let mut total = T::zero();
    for ((&fc, &gc), &xi) in f
        .fourier()
        .iter()
        .zip(g.fourier())
        .zip(f.ctx().frequencies())
    {
        let cross = fc.re * gc.re + fc.im * gc.im; // Re(f_hat conj(g_hat))
        let weight = if xi == T::zero() {
            t
        } else {
            let q = xi * xi / n2;
            (-c * q).exp() * (-(-t * q).exp_m1()) / q
        };
        total = total + cross * weight;
    }
    Ok(total * inv_l)
}
