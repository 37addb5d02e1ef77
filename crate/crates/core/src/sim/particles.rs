//! Critical binary branching particle system.
//!
//! Initial particles are Poisson with intensity `M` per unit length, each of
//! mass `1/M`. Every particle performs Brownian motion on the torus and
//! branches by per-step thinning: with probability `M dt` the particle dies
//! and leaves 0 or 2 offspring with probability 1/2 each (bias of the
//! thinning against exponential lifetimes is O(M dt^2) per unit time).
//! Criticality keeps the expected total mass constant.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::Error;
use crate::lattice::{Lattice, SeedPlan, StreamDomain};
use crate::scalar::Scalar;
use crate::Result;

use super::{Backend, DensityPath};
use crate::heat::SampledFunction;

#[derive(Debug, Clone)]
pub struct ParticleOptions {
    /// Mass resolution: particles of mass `1/M`, initial intensity `M` per
    /// unit length, branch rate `M`.
    pub mass_resolution: f64,
    /// Abort when the population exceeds `cap_factor` times the initial
    /// expectation.
    pub cap_factor: f64,
}

impl Default for ParticleOptions {
    fn default() -> Self {
        Self {
            mass_resolution: 200.0,
            cap_factor: 32.0,
        }
    }
}

/// Particle positions recorded at the lattice observation times.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble<T: Scalar> {
    lattice: Lattice<T>,
    mass_unit: f64,
    replica: usize,
    obs_steps: Vec<usize>,
    snapshots: Vec<Vec<T>>,
    max_population: usize,
}

impl<T: Scalar> ParticleEnsemble<T> {
    pub fn lattice(&self) -> &Lattice<T> {
        &self.lattice
    }

    /// Particle mass `1/M`.
    pub fn mass_unit(&self) -> f64 {
        self.mass_unit
    }

    pub fn replica(&self) -> usize {
        self.replica
    }

    pub fn times(&self) -> Vec<T> {
        self.obs_steps
            .iter()
            .map(|&k| self.lattice.dt() * T::of(k as f64))
            .collect()
    }

    pub fn n_observations(&self) -> usize {
        self.snapshots.len()
    }

    /// Positions at observation index `i`.
    pub fn positions(&self, i: usize) -> &[T] {
        &self.snapshots[i]
    }

    pub fn max_population(&self) -> usize {
        self.max_population
    }

    /// Total mass `count / M` at observation index `i`.
    pub fn total_mass(&self, i: usize) -> f64 {
        self.snapshots[i].len() as f64 * self.mass_unit
    }

    /// `<X_t, f> = (1/M) sum_particles f(position)`, with `f` read as
    /// piecewise constant on its cells.
    pub fn functional(&self, f: &SampledFunction<T>, i: usize) -> Result<T> {
        if !f.lattice().same_grid(&self.lattice) {
            return Err(Error::LatticeMismatch(
                "functional needs the test function on the ensemble's lattice".into(),
            ));
        }
        let dx = self.lattice.dx();
        let n = self.lattice.cells();
        let mut acc = T::zero();
        for &pos in &self.snapshots[i] {
            let cell = ((pos / dx).f64() as usize).min(n - 1);
            acc = acc + f.values()[cell];
        }
        Ok(acc * T::of(self.mass_unit))
    }

    /// Cell-histogram density: `u = mass in cell / dx`, matching the
    /// quadrature of [`DensityPath::functional`](super::DensityPath::functional).
    pub fn density_path(&self) -> DensityPath<T> {
        let n = self.lattice.cells();
        let dx = self.lattice.dx();
        let fields = self
            .snapshots
            .iter()
            .map(|snap| {
                let mut hist = vec![T::zero(); n];
                for &pos in snap {
                    let cell = ((pos / dx).f64() as usize).min(n - 1);
                    hist[cell] = hist[cell] + T::one();
                }
                let scale = T::of(self.mass_unit) / dx;
                for h in &mut hist {
                    *h = *h * scale;
                }
                hist
            })
            .collect();
        DensityPath::new(
            self.lattice.clone(),
            Backend::Particles,
            self.replica,
            0,
            self.obs_steps.clone(),
            fields,
            0,
            0,
        )
    }
}

/// Runs one replica of the branching particle backend.
pub fn simulate_particles<T: Scalar>(
    lattice: &Lattice<T>,
    plan: &SeedPlan,
    replica: usize,
    options: &ParticleOptions,
) -> Result<ParticleEnsemble<T>> {
    let m = options.mass_resolution;
    assert!(m >= 1.0, "mass resolution must be at least 1");
    let length = lattice.length().f64();
    let dt = lattice.dt().f64();
    let branch_prob = m * dt;
    assert!(
        branch_prob < 1.0,
        "M dt = {branch_prob} must be below 1 for per-step thinning"
    );
    let cap = ((m * length * options.cap_factor).ceil() as usize).max(16);

    let mut rng = plan.rng(StreamDomain::Particles, replica);

    let initial: f64 = Poisson::new(m * length)
        .expect("positive Poisson mean")
        .sample(&mut rng);
    let mut current: Vec<T> = (0..initial as usize)
        .map(|_| T::of(rng.gen_range(0.0..length)))
        .collect();
    let mut scratch: Vec<T> = Vec::with_capacity(current.len() * 2);

    let obs_steps = lattice.observation_steps().to_vec();
    let mut snapshots = Vec::with_capacity(obs_steps.len());
    let mut next_obs = 0usize;
    let mut max_population = current.len();

    let step_sd = dt.sqrt();
    let len_t = lattice.length();

    for step in 0..lattice.steps() {
        scratch.clear();
        for &particle in &current {
            let z: f64 = StandardNormal.sample(&mut rng);
            let mut pos = particle + T::of(z * step_sd);
            if pos >= len_t {
                pos = pos - len_t;
            } else if pos < T::zero() {
                pos = pos + len_t;
            }
            if rng.gen::<f64>() < branch_prob {
                if rng.gen::<bool>() {
                    scratch.push(pos);
                    scratch.push(pos);
                }
                // else: death, no offspring
            } else {
                scratch.push(pos);
            }
        }
        std::mem::swap(&mut current, &mut scratch);
        max_population = max_population.max(current.len());
        if current.len() > cap {
            return Err(Error::PopulationExplosion {
                step,
                count: current.len(),
                cap,
            });
        }
        if next_obs < obs_steps.len() && obs_steps[next_obs] == step + 1 {
            snapshots.push(current.clone());
            next_obs += 1;
        }
    }

    Ok(ParticleEnsemble {
        lattice: lattice.clone(),
        mass_unit: 1.0 / m,
        replica,
        obs_steps,
        snapshots,
        max_population,
    })
}
