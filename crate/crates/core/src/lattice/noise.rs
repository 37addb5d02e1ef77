//! Reproducible replica noise.
//!
//! Replica streams are ChaCha8 streams keyed by `(master_seed, domain,
//! replica)`. For the field noise the per-step blocks are addressed by an
//! absolute word position inside the stream, so any `(stream, step, cell)`
//! triple maps to fixed cipher output regardless of evaluation order: replicas
//! can be scheduled in any order, or re-run in isolation, and reproduce
//! bit-identical noise.
//!
//! Standard normals come from a Box-Muller transform on fixed-width 64-bit
//! words (two words per pair of variates), never from rejection sampling, so
//! the word consumption per block is a constant known in advance.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Lattice;
use crate::scalar::Scalar;

/// Which consumer a replica stream feeds. Distinct domains never overlap even
/// for equal replica indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// White-noise blocks for the finite-difference field update.
    FieldNoise,
    /// Sequential draws for the branching particle system.
    Particles,
    /// Synthetic data in statistical self-calibration tests.
    Synthetic,
}

impl StreamDomain {
    fn tag(self) -> u64 {
        match self {
            StreamDomain::FieldNoise => 1,
            StreamDomain::Particles => 2,
            StreamDomain::Synthetic => 3,
        }
    }
}

/// Master seed plus replica count; `stream(i)` is a pure function of
/// `(master_seed, i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPlan {
    master_seed: u64,
    replica_count: usize,
}

impl SeedPlan {
    pub fn new(master_seed: u64, replica_count: usize) -> Self {
        Self {
            master_seed,
            replica_count,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replica_count(&self) -> usize {
        self.replica_count
    }

    /// Raw cipher stream for `(domain, replica)`.
    pub fn rng(&self, domain: StreamDomain, replica: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream((domain.tag() << 48) ^ replica as u64);
        rng
    }

    /// Counter-addressed white-noise stream for one replica on `lattice`.
    pub fn noise_stream<T: Scalar>(&self, lattice: &Lattice<T>, replica: usize) -> NoiseStream {
        NoiseStream::new(self.rng(StreamDomain::FieldNoise, replica), lattice.cells())
    }
}

/// Per-replica source of white-noise blocks: one standard normal per cell per
/// step, deterministic in `(stream, step, cell)`.
pub struct NoiseStream {
    rng: ChaCha8Rng,
    cells: usize,
    words_per_step: u128,
    scratch: Vec<u8>,
}

impl NoiseStream {
    fn new(rng: ChaCha8Rng, cells: usize) -> Self {
        let pairs = cells.div_ceil(2);
        Self {
            rng,
            cells,
            // each pair of variates consumes two u64 = four 32-bit words
            words_per_step: (pairs as u128) * 4,
            scratch: vec![0u8; pairs * 16],
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Fills `out` (one slot per cell) with the step's standard normals.
    pub fn fill_block<T: Scalar>(&mut self, step: usize, out: &mut [T]) {
        assert_eq!(
            out.len(),
            self.cells,
            "output block must have one slot per cell"
        );
        self.rng.set_word_pos(step as u128 * self.words_per_step);
        self.rng.fill_bytes(&mut self.scratch);
        for (pair, bytes) in self.scratch.chunks_exact(16).enumerate() {
            let a = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
            let b = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
            let (z0, z1) = box_muller(a, b);
            let j = pair * 2;
            out[j] = T::of(z0);
            if j + 1 < self.cells {
                out[j + 1] = T::of(z1);
            }
        }
    }

    /// Allocating variant of [`Self::fill_block`].
    pub fn block<T: Scalar>(&mut self, step: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.cells];
        self.fill_block(step, &mut out);
        out
    }
}

const INV_2_POW_53: f64 = 1.0 / 9007199254740992.0;

/// Two standard normals from two 64-bit words.
#[inline]
fn box_muller(a: u64, b: u64) -> (f64, f64) {
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((a >> 11) as f64 + 1.0) * INV_2_POW_53;
    let u2 = (b >> 11) as f64 * INV_2_POW_53;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    fn plan() -> (crate::Lattice64, SeedPlan) {
        let lat = build_lattice(8.0, 0.1, 1.0, &[1.0]).unwrap();
        (lat, SeedPlan::new(0x5eed_cafe, 8))
    }

    #[test]
    fn same_seed_and_step_reproduces_block() {
        let (lat, plan) = plan();
        let mut s1 = plan.noise_stream(&lat, 3);
        let mut s2 = plan.noise_stream(&lat, 3);
        let a: Vec<f64> = s1.block(17);
        let b: Vec<f64> = s2.block(17);
        assert_eq!(a, b);
    }

    #[test]
    fn blocks_are_order_independent() {
        let (lat, plan) = plan();
        let mut s = plan.noise_stream(&lat, 0);
        let late: Vec<f64> = s.block(100);
        let early: Vec<f64> = s.block(2);
        let mut fresh = plan.noise_stream(&lat, 0);
        assert_eq!(early, fresh.block::<f64>(2));
        assert_eq!(late, fresh.block::<f64>(100));
    }

    #[test]
    fn distinct_replicas_and_domains_differ() {
        let (lat, plan) = plan();
        let a: Vec<f64> = plan.noise_stream(&lat, 0).block(0);
        let b: Vec<f64> = plan.noise_stream(&lat, 1).block(0);
        assert_ne!(a, b);
        let mut r1 = plan.rng(StreamDomain::FieldNoise, 5);
        let mut r2 = plan.rng(StreamDomain::Particles, 5);
        assert_ne!(r1.next_u64(), r2.next_u64());
    }

    #[test]
    fn sample_moments_match_standard_normal() {
        let (lat, plan) = plan();
        let mut stream = plan.noise_stream(&lat, 0);
        let n_steps = 12_500; // 12_500 * 80 cells = 1e6 draws
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut buf = vec![0.0f64; stream.cells()];
        for step in 0..n_steps {
            stream.fill_block(step, &mut buf);
            for &z in &buf {
                sum += z;
                sumsq += z * z;
            }
        }
        let n = (n_steps * 80) as f64;
        let mean = sum / n;
        let var = sumsq / n - mean * mean;
        assert!(mean.abs() <= 3e-3, "mean {mean} too far from 0");
        assert!((var - 1.0).abs() <= 5e-3, "variance {var} too far from 1");
    }

    #[test]
    fn replica_streams_uncorrelated() {
        let (lat, plan) = plan();
        let mut s0 = plan.noise_stream(&lat, 0);
        let mut s1 = plan.noise_stream(&lat, 1);
        let n_steps = 12_500;
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut bx = vec![0.0f64; s0.cells()];
        let mut by = vec![0.0f64; s1.cells()];
        for step in 0..n_steps {
            s0.fill_block(step, &mut bx);
            s1.fill_block(step, &mut by);
            for (&x, &y) in bx.iter().zip(&by) {
                sx += x;
                sy += y;
                sxy += x * y;
                sxx += x * x;
                syy += y * y;
            }
        }
        let n = (n_steps * 80) as f64;
        let cov = sxy / n - (sx / n) * (sy / n);
        let corr = cov / ((sxx / n - (sx / n).powi(2)) * (syy / n - (sy / n).powi(2))).sqrt();
        assert!(
            corr.abs() <= 4.0 / n.sqrt(),
            "corr {corr} exceeds 4/sqrt(n)"
        );
    }
}
