//! Unconstrained CP-ALS, used to warm-start the solver.
//!
//! Plain alternating least squares against the observation itself: no sign
//! constraint during the sweeps, so factors may go negative. Callers that
//! need a feasible starting point clamp with [`nn_project`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, STREAM_CP_INIT};
use crate::solver::rel_change_norm;
use crate::tensor::{
    cp_reconstruct, kr_least_squares, FactorTriple, Matrix, Mode, Tensor3, DEFAULT_RCOND,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpAlsConfig {
    pub rank: usize,
    pub max_iters: usize,
    /// Stop once the relative change of the reconstruction between sweeps
    /// falls below this.
    pub rel_change_tol: f64,
    pub seed: u64,
}

impl CpAlsConfig {
    pub fn new(rank: usize, seed: u64) -> Self {
        Self {
            rank,
            max_iters: 50,
            rel_change_tol: 1e-4,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Domain("init rank must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Domain("init max_iters must be >= 1".into()));
        }
        if !(self.rel_change_tol > 0.0 && self.rel_change_tol.is_finite()) {
            return Err(Error::Domain(
                "init rel_change_tol must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Row-major uniform [0, 1) fill; the draw order is part of the recipe for
/// reproducing an instance.
fn uniform_matrix(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen::<f64>()).collect();
    Matrix::from_shape_vec((rows, cols), data).expect("length matches shape")
}

/// Alternating least squares fit of a rank-`cfg.rank` CP model to `o`.
///
/// Deterministic for a given `(o, cfg)`: init is uniform [0, 1) from the
/// dedicated init stream of `cfg.seed`. Factors are updated A, B, C within a
/// sweep, each update seeing the ones before it.
pub fn cp_als(o: &Tensor3, cfg: &CpAlsConfig) -> Result<FactorTriple> {
    cfg.validate()?;
    let (n1, n2, n3) = o.dims();
    let mut rng = stream_rng(cfg.seed, STREAM_CP_INIT);
    let a = uniform_matrix(n1, cfg.rank, &mut rng);
    let b = uniform_matrix(n2, cfg.rank, &mut rng);
    let c = uniform_matrix(n3, cfg.rank, &mut rng);
    let mut f = FactorTriple::new(a, b, c)?;

    let m1 = o.unfold(Mode::One);
    let m2 = o.unfold(Mode::Two);
    let m3 = o.unfold(Mode::Three);
    let mut recon = cp_reconstruct(&f);
    for _ in 0..cfg.max_iters {
        f.a = kr_least_squares(&m1, &f.c, &f.b, DEFAULT_RCOND)?;
        f.b = kr_least_squares(&m2, &f.c, &f.a, DEFAULT_RCOND)?;
        f.c = kr_least_squares(&m3, &f.b, &f.a, DEFAULT_RCOND)?;
        let next = cp_reconstruct(&f);
        let rel = rel_change_norm(next.sub(&recon).frobenius_norm(), recon.frobenius_norm());
        recon = next;
        if rel < cfg.rel_change_tol {
            break;
        }
    }
    if !f.all_finite() {
        return Err(Error::Domain(
            "ALS produced non-finite factors; input scale too large".into(),
        ));
    }
    Ok(f)
}

/// Element-wise projection onto the non-negative orthant.
pub fn nn_project(f: &FactorTriple) -> FactorTriple {
    FactorTriple {
        a: f.a.mapv(|v| v.max(0.0)),
        b: f.b.mapv(|v| v.max(0.0)),
        c: f.c.mapv(|v| v.max(0.0)),
    }
}
