//! Non-negative occurrence tensor factorization with a sparse discrete
//! error term.
//!
//! A noisy binary (or count) occurrence tensor `O` is decomposed as
//! `O + U ≈ ⟦A, B, C⟧`: a low-rank CP model with non-negative factors plus
//! a sparse error tensor `U` absorbing the discrete corruptions. The
//! factors expose community structure (each rank-one component groups the
//! indices it weights), and the sparsity penalty on `U` (count, l1 or
//! squared l2) decides how aggressively deviations are treated as errors.
//!
//! Modules: [`tensor`] holds the CP algebra, [`cp_init`] the ALS warm
//! start, [`solver`] the ADMM splitting, [`synth`] benchmark instance
//! generation, [`eval`] recovery metrics and community extraction, [`io`]
//! the triple/factor file formats.

pub mod cp_init;
pub mod error;
pub mod eval;
pub mod io;
pub mod rng;
pub mod solver;
pub mod synth;
pub mod tensor;

pub use error::{Error, ParseError, Result};
pub use solver::{solve, NormVariant, Solution, SolverConfig, SolverTrace};
pub use synth::SynthSpec;
pub use tensor::{FactorTriple, Matrix, Mode, Tensor3};
