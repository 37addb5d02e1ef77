//! Stochastic backends producing samples of the super-Brownian density `u`
//! and of integrals `<X_t, f>`.
//!
//! Two independent constructions of the same process:
//!
//! * [`simulate_fd`]: an explicit finite-difference scheme for the SPDE in
//!   mild form, driven by counter-based white-noise blocks;
//! * [`simulate_particles`]: a critical binary branching particle system with
//!   mass `1/M` per particle, whose empirical measure approximates the
//!   process.
//!
//! Both start from the flat profile `u(0, .) = 1` (Lebesgue initial measure).

mod fd;
mod particles;

pub use fd::{simulate_fd, simulate_fd_with, FdOptions, NoiseMode};
pub use particles::{simulate_particles, ParticleEnsemble, ParticleOptions};

use crate::error::Error;
use crate::heat::{plancherel_pair_integral, SampledFunction};
use crate::lattice::Lattice;
use crate::scalar::Scalar;
use crate::Result;

/// Which stochastic construction produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    FiniteDifference,
    Particles,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::FiniteDifference => "fd",
            Backend::Particles => "particles",
        }
    }
}

/// The simulated density at the lattice observation times, for one replica.
#[derive(Debug, Clone)]
pub struct DensityPath<T: Scalar> {
    lattice: Lattice<T>,
    backend: Backend,
    replica: usize,
    master_seed: u64,
    obs_steps: Vec<usize>,
    fields: Vec<Vec<T>>,
    clamp_events: u64,
    total_updates: u64,
}

impl<T: Scalar> DensityPath<T> {
    #[allow(clippy::too_many_arguments)] // internal constructor, both backends feed it
    pub(crate) fn new(
        lattice: Lattice<T>,
        backend: Backend,
        replica: usize,
        master_seed: u64,
        obs_steps: Vec<usize>,
        fields: Vec<Vec<T>>,
        clamp_events: u64,
        total_updates: u64,
    ) -> Self {
        Self {
            lattice,
            backend,
            replica,
            master_seed,
            obs_steps,
            fields,
            clamp_events,
            total_updates,
        }
    }

    pub fn lattice(&self) -> &Lattice<T> {
        &self.lattice
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn replica(&self) -> usize {
        self.replica
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Observation times of the stored fields.
    pub fn times(&self) -> Vec<T> {
        self.obs_steps
            .iter()
            .map(|&k| self.lattice.dt() * T::of(k as f64))
            .collect()
    }

    pub fn n_observations(&self) -> usize {
        self.fields.len()
    }

    /// Field at observation index `i`.
    pub fn field(&self, i: usize) -> &[T] {
        &self.fields[i]
    }

    /// Field at an observation time, if stored.
    pub fn field_at(&self, t: T) -> Option<&[T]> {
        let k = self.lattice.step_of_time(t)?;
        let i = self.obs_steps.iter().position(|&s| s == k)?;
        Some(&self.fields[i])
    }

    /// Fraction of cell updates that hit the nonnegativity clamp.
    pub fn clamp_fraction(&self) -> f64 {
        if self.total_updates == 0 {
            0.0
        } else {
            self.clamp_events as f64 / self.total_updates as f64
        }
    }

    pub fn clamp_events(&self) -> u64 {
        self.clamp_events
    }

    /// `<X_t, f> = sum_j f(x_j) u(t, x_j) dx` at observation index `i`.
    pub fn functional(&self, f: &SampledFunction<T>, i: usize) -> Result<T> {
        if !f.lattice().same_grid(&self.lattice) {
            return Err(Error::LatticeMismatch(
                "functional needs the test function on the path's lattice".into(),
            ));
        }
        let dx = self.lattice.dx();
        Ok(self.fields[i]
            .iter()
            .zip(f.values())
            .map(|(&u, &fv)| u * fv)
            .sum::<T>()
            * dx)
    }
}

/// Deterministic second-moment identity
/// `E <X_t, f>^2 = <lambda, f>^2 + int_0^t <lambda, (P_s f)^2> ds`,
/// evaluated through the Fourier quadrature (the pair integral at scale 1).
pub fn second_moment_target<T: Scalar>(f: &SampledFunction<T>, t: T) -> Result<T> {
    f.require_admissible()?;
    if t == T::zero() {
        return Ok(f.mass() * f.mass());
    }
    let correction = plancherel_pair_integral(f, f, t, T::zero(), T::zero(), T::one())?;
    Ok(f.mass() * f.mass() + correction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::Spectral;
    use crate::lattice::build_lattice;

    #[test]
    fn second_moment_target_values() {
        let ctx = Spectral::new(build_lattice::<f64>(16.0, 1.0 / 256.0, 1.0, &[1.0]).unwrap());
        let f = SampledFunction::indicator(&ctx, 0.0, 1.0);
        // frozen continuum oracle: 1 + 0.4206492272
        let target = second_moment_target(&f, 1.0).unwrap();
        assert!(
            (target - 1.4206492272).abs() < 2e-3,
            "target {target} vs oracle"
        );
        assert_eq!(second_moment_target(&f, 0.0).unwrap(), 1.0);

        // small-t expansion: <lambda,f>^2 + t <f,f> within 1%
        let t = 1e-3;
        let target = second_moment_target(&f, t).unwrap();
        let approx = 1.0 + t * f.inner(&f);
        assert!((target - approx).abs() <= 0.01 * approx);

        let zero = SampledFunction::zero(&ctx);
        assert_eq!(second_moment_target(&zero, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn second_moment_cross_checked_by_direct_quadrature() {
        // trapezoid in s of <lambda, (P_s f)^2> against the analytic-in-time
        // Fourier form, two independent routes to the same number
        use crate::heat::apply_semigroup;
        let ctx = Spectral::new(build_lattice::<f64>(16.0, 1.0 / 64.0, 1.0, &[1.0]).unwrap());
        let f = SampledFunction::indicator(&ctx, 0.0, 1.0);
        let t = 0.5;
        let steps = 4000;
        let ds = t / steps as f64;
        let mut acc = 0.0;
        for k in 0..=steps {
            let s = ds * k as f64;
            let g = apply_semigroup(&f, s);
            let sq = g.values().iter().map(|&v| v * v).sum::<f64>() * ctx.lattice().dx();
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            acc += w * sq * ds;
        }
        let direct = 1.0 + acc;
        let target = second_moment_target(&f, t).unwrap();
        // the s-integrand has a sqrt singularity in slope at s=0; 4000 panels
        // of trapezoid resolve it to ~1e-6
        assert!(
            (target - direct).abs() < 5e-6,
            "fourier {target} vs direct {direct}"
        );
    }
}
