//! Synthetic benchmark instances: sparse non-negative ground-truth factors,
//! a binary occurrence tensor from their CP support, and exact-count flip
//! noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{
    stream_rng, STREAM_FACTOR_A, STREAM_FACTOR_B, STREAM_FACTOR_C, STREAM_FLIP_NOISE,
};
use crate::tensor::{cp_reconstruct, FactorTriple, Matrix, Tensor3};

/// Default seed for benchmark instances. The noiseless default instance is
/// exactly recoverable, so it doubles as a smoke test of the whole pipeline.
pub const DEFAULT_SEED: u64 = 1;

/// Entry coordinates (i, j, k).
pub type Coord = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dims: (usize, usize, usize),
    pub true_rank: usize,
    /// Fraction of entries forced to zero in each ground-truth factor,
    /// per mode.
    pub sparsity_ratios: (f64, f64, f64),
    /// Fraction of tensor entries whose occurrence bit gets flipped.
    pub noise_ratio: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            dims: (50, 20, 10),
            true_rank: 3,
            sparsity_ratios: (0.7067, 0.55, 0.30),
            noise_ratio: 0.1,
            seed: DEFAULT_SEED,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let (n1, n2, n3) = self.dims;
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return Err(Error::Domain("dims must all be >= 1".into()));
        }
        if self.true_rank == 0 {
            return Err(Error::Domain("true_rank must be >= 1".into()));
        }
        for s in [
            self.sparsity_ratios.0,
            self.sparsity_ratios.1,
            self.sparsity_ratios.2,
        ] {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Domain(format!("sparsity ratio {s} outside [0, 1]")));
            }
        }
        if !(0.0..=1.0).contains(&self.noise_ratio) {
            return Err(Error::Domain(format!(
                "noise ratio {} outside [0, 1]",
                self.noise_ratio
            )));
        }
        Ok(())
    }

    /// Draws the full instance. Deterministic per spec: each factor and the
    /// flip noise consume their own stream of `seed`.
    pub fn generate(&self) -> Result<SynthInstance> {
        self.validate()?;
        let (n1, n2, n3) = self.dims;
        let (s1, s2, s3) = self.sparsity_ratios;
        let a = gen_sparse_factor(
            n1,
            self.true_rank,
            s1,
            &mut stream_rng(self.seed, STREAM_FACTOR_A),
        )?;
        let b = gen_sparse_factor(
            n2,
            self.true_rank,
            s2,
            &mut stream_rng(self.seed, STREAM_FACTOR_B),
        )?;
        let c = gen_sparse_factor(
            n3,
            self.true_rank,
            s3,
            &mut stream_rng(self.seed, STREAM_FACTOR_C),
        )?;
        let factors = FactorTriple::new(a, b, c)?;
        let ground_truth = make_ground_truth(&factors);
        let (observation, flipped) = apply_flip_noise(
            &ground_truth,
            self.noise_ratio,
            &mut stream_rng(self.seed, STREAM_FLIP_NOISE),
        )?;
        Ok(SynthInstance {
            factors,
            ground_truth,
            observation,
            flipped,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SynthInstance {
    /// Ground-truth sparse non-negative factors.
    pub factors: FactorTriple,
    /// Binary occurrence tensor: 1 where the CP model of `factors` is
    /// positive.
    pub ground_truth: Tensor3,
    /// `ground_truth` with `round(noise_ratio * total)` entries flipped.
    pub observation: Tensor3,
    /// Flipped positions, ascending in the canonical linear order.
    pub flipped: Vec<Coord>,
}

/// `n x r` matrix with exactly `round(sparsity * n * r)` zeros at positions
/// sampled without replacement; every other entry is a strictly positive
/// uniform (0, 1) draw. Positions use the row-major linearization
/// `row * r + col`; values fill the non-zero positions in that order.
pub fn gen_sparse_factor(n: usize, r: usize, sparsity: f64, rng: &mut impl Rng) -> Result<Matrix> {
    if n == 0 || r == 0 {
        return Err(Error::Domain("factor dims must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::Domain(format!(
            "sparsity ratio {sparsity} outside [0, 1]"
        )));
    }
    let total = n * r;
    let zeros = (sparsity * total as f64).round() as usize;
    let mut is_zero = vec![false; total];
    for idx in rand::seq::index::sample(rng, total, zeros) {
        is_zero[idx] = true;
    }
    let data: Vec<f64> = is_zero
        .iter()
        .map(|&z| {
            if z {
                0.0
            } else {
                rng.sample(rand::distributions::Open01)
            }
        })
        .collect();
    Ok(Matrix::from_shape_vec((n, r), data).expect("length matches shape"))
}

/// Indicator of the CP support: 1 where the reconstruction is positive,
/// 0 elsewhere.
pub fn make_ground_truth(factors: &FactorTriple) -> Tensor3 {
    cp_reconstruct(factors).map(|v| if v > 0.0 { 1.0 } else { 0.0 })
}

/// Flips exactly `round(noise_ratio * total)` occurrence bits of a binary
/// tensor, chosen without replacement over all entries (so both spurious
/// occurrences and deletions happen). Returns the noisy tensor and the
/// flipped positions in ascending canonical order.
pub fn apply_flip_noise(
    x: &Tensor3,
    noise_ratio: f64,
    rng: &mut impl Rng,
) -> Result<(Tensor3, Vec<Coord>)> {
    if !(0.0..=1.0).contains(&noise_ratio) {
        return Err(Error::Domain(format!(
            "noise ratio {noise_ratio} outside [0, 1]"
        )));
    }
    if x.values().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Domain(
            "flip noise needs a binary (0/1) tensor".into(),
        ));
    }
    let total = x.total_entries();
    let count = (noise_ratio * total as f64).round() as usize;
    let mut linear: Vec<usize> = rand::seq::index::sample(rng, total, count).into_vec();
    linear.sort_unstable();

    let mut values = x.values().to_vec();
    let mut flipped = Vec::with_capacity(count);
    for &idx in &linear {
        values[idx] = 1.0 - values[idx];
        flipped.push(x.multi_index(idx));
    }
    Ok((Tensor3::new(x.dims(), values)?, flipped))
}
