//! Explicit finite-difference scheme for the SPDE in mild form.
//!
//! Per step and cell,
//!
//! ```text
//! u' = u + (dt / (2 dx^2)) (u_left - 2u + u_right)
//!        + sqrt(max(u, 0)) * sqrt(dt/dx) * xi,
//! ```
//!
//! then `u'` is clamped at zero. `xi` are the counter-based standard normals
//! of the replica stream; `sqrt(dt/dx)` matches the variance of space-time
//! white noise integrated over a `dt x dx` cell. Clamp events are counted and
//! surfaced, never hidden: their fraction falls with `dx` and their
//! accumulated mass is the scheme's only mean bias.

use crate::error::Error;
use crate::lattice::{Lattice, SeedPlan};
use crate::scalar::Scalar;
use crate::Result;

use super::{Backend, DensityPath};

/// Noise wiring for the field update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Standard,
    /// Noise forced to zero: the update degenerates to the pure heat stencil.
    Silent,
}

#[derive(Debug, Clone, Default)]
pub struct FdOptions {
    pub noise: NoiseMode,
}

/// Runs one replica of the finite-difference backend.
pub fn simulate_fd<T: Scalar>(
    lattice: &Lattice<T>,
    plan: &SeedPlan,
    replica: usize,
) -> Result<DensityPath<T>> {
    simulate_fd_with(lattice, plan, replica, &FdOptions::default())
}

/// [`simulate_fd`] with explicit options.
pub fn simulate_fd_with<T: Scalar>(
    lattice: &Lattice<T>,
    plan: &SeedPlan,
    replica: usize,
    options: &FdOptions,
) -> Result<DensityPath<T>> {
    debug_assert!(lattice.stability_number() <= T::of(0.5));
    let n = lattice.cells();
    let steps = lattice.steps();
    let dt = lattice.dt();
    let dx = lattice.dx();
    let r = dt / (T::of(2.0) * dx * dx);
    let noise_amp = match options.noise {
        NoiseMode::Standard => (dt / dx).sqrt(),
        NoiseMode::Silent => T::zero(),
    };

    let mut stream = plan.noise_stream(lattice, replica);
    let mut u = vec![T::one(); n];
    let mut next = vec![T::zero(); n];
    let mut xi = vec![T::zero(); n];
    let mut clamp_events = 0u64;

    let obs_steps = lattice.observation_steps().to_vec();
    let mut fields = Vec::with_capacity(obs_steps.len());
    let mut next_obs = 0usize;

    for step in 0..steps {
        if noise_amp != T::zero() {
            stream.fill_block(step, &mut xi);
        }

        let zero = T::zero();
        let two = T::of(2.0);
        let update = |uc: T, ul: T, ur: T, z: T, clamps: &mut u64| -> T {
            let lap = ul - two * uc + ur;
            let val = uc + r * lap + uc.max(zero).sqrt() * noise_amp * z;
            if val < zero {
                *clamps += 1;
                zero
            } else {
                val
            }
        };

        next[0] = update(u[0], u[n - 1], u[1], xi[0], &mut clamp_events);
        for j in 1..n - 1 {
            next[j] = update(u[j], u[j - 1], u[j + 1], xi[j], &mut clamp_events);
        }
        next[n - 1] = update(u[n - 1], u[n - 2], u[0], xi[n - 1], &mut clamp_events);

        if let Some(cell) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                backend: "fd",
                step,
                cell,
            });
        }

        std::mem::swap(&mut u, &mut next);

        if next_obs < obs_steps.len() && obs_steps[next_obs] == step + 1 {
            fields.push(u.clone());
            next_obs += 1;
        }
    }

    Ok(DensityPath::new(
        lattice.clone(),
        Backend::FiniteDifference,
        replica,
        plan.master_seed(),
        obs_steps,
        fields,
        clamp_events,
        n as u64 * steps as u64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{SampledFunction, Spectral};
    use crate::lattice::build_lattice;
    use crate::stats::Welford;

    #[test]
    fn silent_noise_keeps_flat_profile() {
        let lat = build_lattice::<f64>(8.0, 0.1, 0.5, &[0.25, 0.5]).unwrap();
        let plan = SeedPlan::new(9, 1);
        let opts = FdOptions {
            noise: NoiseMode::Silent,
        };
        let path = simulate_fd_with(&lat, &plan, 0, &opts).unwrap();
        for i in 0..path.n_observations() {
            for &v in path.field(i) {
                assert_eq!(v, 1.0, "flat data must be a fixed point of the heat step");
            }
        }
        assert_eq!(path.clamp_events(), 0);
        // <X_t, 1_[0,1]> under the flat profile is the window mass exactly
        let ctx = Spectral::new(lat.clone());
        let f = SampledFunction::indicator(&ctx, 0.0, 1.0);
        assert!((path.functional(&f, 0).unwrap() - 1.0).abs() < 1e-12);
        let zero = SampledFunction::zero(&ctx);
        assert_eq!(path.functional(&zero, 0).unwrap(), 0.0);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let lat = build_lattice::<f64>(8.0, 0.1, 0.25, &[0.25]).unwrap();
        let plan = SeedPlan::new(1234, 4);
        let a = simulate_fd(&lat, &plan, 2).unwrap();
        let b = simulate_fd(&lat, &plan, 2).unwrap();
        assert_eq!(a.field(0), b.field(0));
        assert_eq!(a.clamp_events(), b.clamp_events());
        let c = simulate_fd(&lat, &plan, 3).unwrap();
        assert_ne!(a.field(0), c.field(0));
    }

    #[test]
    fn mean_functional_near_one() {
        // small, fast version of the moment identity; the acceptance suite
        // runs the full-size one
        let lat = build_lattice::<f64>(8.0, 0.1, 0.5, &[0.5]).unwrap();
        let ctx = Spectral::new(lat.clone());
        let f = SampledFunction::indicator(&ctx, 0.0, 1.0);
        let plan = SeedPlan::new(77, 200);
        let mut w = Welford::new();
        for rep in 0..plan.replica_count() {
            let path = simulate_fd(&lat, &plan, rep).unwrap();
            w.push(path.functional(&f, 0).unwrap());
        }
        let err = (w.mean() - 1.0).abs();
        assert!(
            err <= 3.0 * w.std_error() + 0.02,
            "E<X,f> = {} +- {}",
            w.mean(),
            w.std_error()
        );
    }

    #[test]
    fn functional_requires_matching_grid() {
        let lat = build_lattice::<f64>(8.0, 0.1, 0.25, &[0.25]).unwrap();
        let other = Spectral::new(build_lattice::<f64>(8.0, 0.2, 0.25, &[0.25]).unwrap());
        let f = SampledFunction::indicator(&other, 0.0, 1.0);
        let plan = SeedPlan::new(5, 1);
        let path = simulate_fd(&lat, &plan, 0).unwrap();
        assert!(path.functional(&f, 0).is_err());
    }

    #[test]
    fn fourth_moment_finite_and_stable_across_resolutions() {
        // sup_x E[u(t,x)^4] stays bounded as the grid refines
        let plan = SeedPlan::new(661, 100);
        let mut maxima = Vec::new();
        for &dx in &[0.2, 0.1, 0.05] {
            let lat = build_lattice::<f64>(8.0, dx, 0.5, &[0.5]).unwrap();
            let mut acc = vec![0.0f64; lat.cells()];
            for rep in 0..plan.replica_count() {
                let path = simulate_fd(&lat, &plan, rep).unwrap();
                for (a, &u) in acc.iter_mut().zip(path.field(0)) {
                    *a += u.powi(4);
                }
            }
            let max = acc
                .iter()
                .map(|a| a / plan.replica_count() as f64)
                .fold(0.0, f64::max);
            assert!(max.is_finite());
            maxima.push(max);
        }
        let hi = maxima.iter().cloned().fold(0.0, f64::max);
        let lo = maxima.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            hi / lo < 2.0,
            "fourth moment unstable across resolutions: {maxima:?}"
        );
    }

    #[test]
    fn f32_backend_runs() {
        let lat = build_lattice::<f32>(8.0, 0.1, 0.25, &[0.25]).unwrap();
        let plan = SeedPlan::new(5, 1);
        let path = simulate_fd(&lat, &plan, 0).unwrap();
        assert!(path.field(0).iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn clamp_fraction_falls_with_dx() {
        let plan = SeedPlan::new(31, 8);
        let mut fracs = Vec::new();
        for &dx in &[0.2, 0.1, 0.05] {
            let lat = build_lattice::<f64>(8.0, dx, 0.25, &[0.25]).unwrap();
            let mut events = 0u64;
            let mut updates = 0u64;
            for rep in 0..plan.replica_count() {
                let path = simulate_fd(&lat, &plan, rep).unwrap();
                events += path.clamp_events();
                updates += lat.cells() as u64 * lat.steps() as u64;
            }
            fracs.push(events as f64 / updates as f64);
        }
        assert!(
            fracs[0] > fracs[1] && fracs[1] > fracs[2],
            "clamp fractions not decreasing: {fracs:?}"
        );
    }
}
