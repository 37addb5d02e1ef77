//! Space-time discretization and the deterministic random-number contract.
//!
//! Everything lives on a periodic domain (a torus of length `L`) split into
//! `cells` intervals of width `dx`, marched with an explicit step `dt`. The
//! torus replaces the full line: the flat initial condition is exactly
//! invariant under the discrete heat flow, and `L` is chosen per experiment so
//! heat-kernel wraparound mass over the horizon stays below 1e-8
//! (`L >= 2 * x_extent + 12 * sqrt(t_max)`).

mod noise;

pub use noise::{NoiseStream, SeedPlan, StreamDomain};

use crate::error::Error;
use crate::scalar::Scalar;
use crate::Result;

/// Shared space-time discretization: periodic spatial grid plus a uniform
/// time step with snapped observation times.
///
/// Immutable after construction and safe to share read-only across parallel
/// replicas.
#[derive(Debug, Clone)]
pub struct Lattice<T> {
    length: T,
    cells: usize,
    dx: T,
    dt: T,
    steps: usize,
    t_max: T,
    obs_steps: Vec<usize>,
    max_snap_distance: T,
}

/// Tunable construction parameters for [`Lattice`].
#[derive(Debug, Clone)]
pub struct LatticeOptions {
    /// `dt = dt_factor * dx^2`; must lie in `(0, 1/2]` for stability of the
    /// explicit scheme. The default `1/4` leaves margin for the
    /// multiplicative noise term.
    pub dt_factor: f64,
    /// Upper bound on the number of time steps; guards runaway jobs.
    pub max_steps: usize,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        Self {
            dt_factor: 0.25,
            max_steps: 10_000_000,
        }
    }
}

/// Builds a lattice for a periodic domain of period `length`.
///
/// `cells` is derived as the nearest integer to `length / dx_request` and
/// `dx` adjusted so that `cells * dx = length`. Observation times are snapped
/// to integer multiples of `dt`; the largest snap distance is reported on the
/// result.
pub fn build_lattice<T: Scalar>(
    length: T,
    dx_request: T,
    t_max: T,
    observation_times: &[T],
) -> Result<Lattice<T>> {
    build_lattice_with(
        length,
        dx_request,
        t_max,
        observation_times,
        &LatticeOptions::default(),
    )
}

/// [`build_lattice`] with explicit [`LatticeOptions`].
pub fn build_lattice_with<T: Scalar>(
    length: T,
    dx_request: T,
    t_max: T,
    observation_times: &[T],
    options: &LatticeOptions,
) -> Result<Lattice<T>> {
    if !(length > T::zero()) {
        return Err(Error::Lattice("length must be positive".into()));
    }
    if !(dx_request > T::zero()) {
        return Err(Error::Lattice("dx_request must be positive".into()));
    }
    if dx_request >= length {
        return Err(Error::Lattice(format!(
            "dx_request {dx_request} must be smaller than the domain length {length}"
        )));
    }
    if !(t_max > T::zero()) {
        return Err(Error::Lattice("t_max must be positive".into()));
    }
    if observation_times.is_empty() {
        return Err(Error::Lattice("observation_times must be nonempty".into()));
    }
    if !(options.dt_factor > 0.0 && options.dt_factor <= 0.5) {
        return Err(Error::Lattice(format!(
            "dt_factor {} outside the stable range (0, 1/2]",
            options.dt_factor
        )));
    }

    let cells = (length / dx_request).round().f64() as usize;
    let cells = cells.max(2);
    let dx = length / T::of(cells as f64);
    let dt = dx * dx * T::of(options.dt_factor);

    let steps_f = (t_max / dt).round().f64();
    let steps = (steps_f as usize).max(1);
    if steps > options.max_steps {
        return Err(Error::Lattice(format!(
            "horizon {t_max} needs {steps} steps of dt = {dt}, over the budget of {}",
            options.max_steps
        )));
    }
    let t_max_snapped = dt * T::of(steps as f64);

    let mut obs_steps = Vec::with_capacity(observation_times.len());
    let mut max_snap = T::zero();
    for &t in observation_times {
        if !(t > T::zero()) || t > t_max + dt {
            return Err(Error::Lattice(format!(
                "observation time {t} outside (0, t_max = {t_max}]"
            )));
        }
        let k = (t / dt).round().f64() as usize;
        let k = k.clamp(1, steps);
        let snapped = dt * T::of(k as f64);
        let dist = (snapped - t).abs();
        if dist > max_snap {
            max_snap = dist;
        }
        obs_steps.push(k);
    }
    obs_steps.sort_unstable();
    obs_steps.dedup();

    Ok(Lattice {
        length,
        cells,
        dx,
        dt,
        steps,
        t_max: t_max_snapped,
        obs_steps,
        max_snap_distance: max_snap,
    })
}

impl<T: Scalar> Lattice<T> {
    /// Domain period `L`.
    pub fn length(&self) -> T {
        self.length
    }

    /// Number of spatial cells; `cells * dx = length`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Cell width.
    pub fn dx(&self) -> T {
        self.dx
    }

    /// Time step.
    pub fn dt(&self) -> T {
        self.dt
    }

    /// Number of time steps to the horizon.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Snapped horizon `steps * dt`.
    pub fn t_max(&self) -> T {
        self.t_max
    }

    /// Step indices of the (snapped, sorted, deduplicated) observation times.
    pub fn observation_steps(&self) -> &[usize] {
        &self.obs_steps
    }

    /// Snapped observation times.
    pub fn observation_times(&self) -> Vec<T> {
        self.obs_steps
            .iter()
            .map(|&k| self.dt * T::of(k as f64))
            .collect()
    }

    /// Largest distance any requested observation time moved while snapping.
    pub fn max_snap_distance(&self) -> T {
        self.max_snap_distance
    }

    /// `dt / dx^2`, which must be at most `1/2` for the explicit scheme.
    pub fn stability_number(&self) -> T {
        self.dt / (self.dx * self.dx)
    }

    /// Left edge of cell `j`.
    pub fn x(&self, j: usize) -> T {
        self.dx * T::of(j as f64)
    }

    /// Whether `other` shares this lattice's spatial grid.
    pub fn same_grid(&self, other: &Self) -> bool {
        self.cells == other.cells && self.length == other.length
    }

    /// Step index for a time that is (close to) a multiple of `dt`, if it is
    /// on the grid.
    pub fn step_of_time(&self, t: T) -> Option<usize> {
        let k = (t / self.dt).round();
        let k_usize = k.f64() as usize;
        if k_usize == 0 || k_usize > self.steps {
            return None;
        }
        let snapped = self.dt * k;
        let tol = self.dt * T::of(1e-9);
        ((snapped - t).abs() <= tol).then_some(k_usize)
    }
}
