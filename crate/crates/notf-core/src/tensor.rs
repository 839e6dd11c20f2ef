//! Dense order-3 tensors, mode unfoldings, and the CP algebra the solver is
//! built on.
//!
//! Layout convention used everywhere in this crate: entry `(i, j, k)` of an
//! `n1 x n2 x n3` tensor lives at linear offset `i + n1*j + n1*n2*k` (first
//! index fastest). Mode-`d` unfoldings keep the remaining indices in that
//! same order, so
//!
//! - mode 1: row `i`, column `j + n2*k`
//! - mode 2: row `j`, column `i + n1*k`
//! - mode 3: row `k`, column `i + n1*j`
//!
//! and the CP identities hold as `X_(1) = A (C ⊙ B)^T`,
//! `X_(2) = B (C ⊙ A)^T`, `X_(3) = C (B ⊙ A)^T` with `⊙` the column-wise
//! Khatri-Rao product defined below.

use ndarray::Array2;

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

/// Eigenvalues below `rcond * lambda_max` are treated as zero when forming
/// pseudo-inverses of Gram matrices.
pub const DEFAULT_RCOND: f64 = 1e-10;

/// Unfolding mode, named by which index becomes the row index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    /// Length of the axis that becomes the rows of the unfolding.
    pub fn axis_len(self, dims: (usize, usize, usize)) -> usize {
        match self {
            Mode::One => dims.0,
            Mode::Two => dims.1,
            Mode::Three => dims.2,
        }
    }
}

/// Dense order-3 tensor of `f64` in the canonical layout above.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl Tensor3 {
    /// Wraps `values` (canonical layout) as a tensor. Errors if the length
    /// does not match `dims`.
    pub fn new(dims: (usize, usize, usize), values: Vec<f64>) -> Result<Self> {
        let expect = dims.0 * dims.1 * dims.2;
        if values.len() != expect {
            return Err(Error::Shape(format!(
                "tensor buffer holds {} values, dims ({}, {}, {}) need {}",
                values.len(),
                dims.0,
                dims.1,
                dims.2,
                expect
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self {
            dims,
            values: vec![0.0; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Self::zeros(dims);
        for k in 0..dims.2 {
            for j in 0..dims.1 {
                for i in 0..dims.0 {
                    let idx = t.linear_index(i, j, k);
                    t.values[idx] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn total_entries(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims.0 && j < self.dims.1 && k < self.dims.2);
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    /// Inverse of [`linear_index`](Self::linear_index).
    #[inline]
    pub fn multi_index(&self, linear: usize) -> (usize, usize, usize) {
        let (n1, n2, _) = self.dims;
        (linear % n1, (linear / n1) % n2, linear / (n1 * n2))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.linear_index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.linear_index(i, j, k);
        self.values[idx] = v;
    }

    /// Backing slice in canonical layout.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise combination. Panics on shape mismatch; callers own the
    /// shapes here, unlike the fallible file-facing ops.
    pub fn zip_map(&self, other: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Tensor3 {
        assert_eq!(self.dims, other.dims, "tensor shapes differ");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Tensor3 {
            dims: self.dims,
            values,
        }
    }

    pub fn add(&self, other: &Tensor3) -> Tensor3 {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Count of entries with `|v| > eps` (strict).
    pub fn count_nonzero(&self, eps: f64) -> usize {
        count_nonzero(self.values.iter(), eps)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Mode-`mode` unfolding as a dense row-major matrix.
    pub fn unfold(&self, mode: Mode) -> Matrix {
        let (n1, n2, n3) = self.dims;
        match mode {
            Mode::One => Array2::from_shape_fn((n1, n2 * n3), |(i, c)| self.values[i + n1 * c]),
            Mode::Two => Array2::from_shape_fn((n2, n1 * n3), |(j, c)| {
                let i = c % n1;
                let k = c / n1;
                self.values[i + n1 * (j + n2 * k)]
            }),
            Mode::Three => {
                Array2::from_shape_fn((n3, n1 * n2), |(k, c)| self.values[c + n1 * n2 * k])
            }
        }
    }

    /// Inverse of [`unfold`](Self::unfold): `fold(t.unfold(m), m, t.dims()) == t`
    /// exactly (pure index shuffle, no arithmetic).
    pub fn fold(m: &Matrix, mode: Mode, dims: (usize, usize, usize)) -> Result<Tensor3> {
        let (n1, n2, n3) = dims;
        let rows = mode.axis_len(dims);
        let cols = n1 * n2 * n3 / rows.max(1);
        if m.nrows() != rows || m.ncols() != cols {
            return Err(Error::Shape(format!(
                "cannot fold {}x{} matrix as mode-{:?} unfolding of ({}, {}, {})",
                m.nrows(),
                m.ncols(),
                mode,
                n1,
                n2,
                n3
            )));
        }
        let mut t = Tensor3::zeros(dims);
        match mode {
            Mode::One => {
                for c in 0..cols {
                    for i in 0..n1 {
                        t.values[i + n1 * c] = m[(i, c)];
                    }
                }
            }
            Mode::Two => {
                for c in 0..cols {
                    let i = c % n1;
                    let k = c / n1;
                    for j in 0..n2 {
                        t.values[i + n1 * (j + n2 * k)] = m[(j, c)];
                    }
                }
            }
            Mode::Three => {
                for c in 0..cols {
                    for k in 0..n3 {
                        t.values[c + n1 * n2 * k] = m[(k, c)];
                    }
                }
            }
        }
        Ok(t)
    }
}

/// Count of values with `|v| > eps` (strict), for matrices and slices alike.
pub fn count_nonzero<'a>(values: impl IntoIterator<Item = &'a f64>, eps: f64) -> usize {
    values.into_iter().filter(|v| v.abs() > eps).count()
}

pub fn frobenius_norm_matrix(m: &Matrix) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Column-wise Khatri-Rao product: column `r` of the result is the Kronecker
/// product of column `r` of `a` with column `r` of `b`, so row `p*b.nrows()+q`
/// holds `a[p,r] * b[q,r]` (rows of `a` vary slowest).
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "khatri-rao operands have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let (pa, pb, r) = (a.nrows(), b.nrows(), a.ncols());
    Ok(Array2::from_shape_fn((pa * pb, r), |(row, col)| {
        a[(row / pb, col)] * b[(row % pb, col)]
    }))
}

/// Rank-`R` factor triple `(A, B, C)` of a CP model. All three matrices share
/// a column count (the rank) and hold only finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTriple {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl FactorTriple {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let r = a.ncols();
        if b.ncols() != r || c.ncols() != r {
            return Err(Error::Shape(format!(
                "factor column counts differ: {}, {}, {}",
                r,
                b.ncols(),
                c.ncols()
            )));
        }
        if r == 0 || a.nrows() == 0 || b.nrows() == 0 || c.nrows() == 0 {
            return Err(Error::Shape(
                "factors must be non-empty with rank >= 1".into(),
            ));
        }
        for (name, m) in [("A", &a), ("B", &b), ("C", &c)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "factor {name} contains a non-finite value"
                )));
            }
        }
        Ok(Self { a, b, c })
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.b.nrows(), self.c.nrows())
    }

    pub fn all_finite(&self) -> bool {
        [&self.a, &self.b, &self.c]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
    }
}

/// Dense tensor of the CP model `sum_r a_r (outer) b_r (outer) c_r`.
pub fn cp_reconstruct(f: &FactorTriple) -> Tensor3 {
    let kr = khatri_rao(&f.c, &f.b).expect("factor triple has consistent rank");
    let x1 = f.a.dot(&kr.t());
    Tensor3::fold(&x1, Mode::One, f.dims()).expect("mode-1 product has unfolding shape")
}

/// Pseudo-inverse of a symmetric positive semidefinite matrix via its
/// eigendecomposition. Eigenvalues at or below `rcond * lambda_max` (and any
/// non-positive ones) are dropped; a zero matrix maps to a zero matrix.
pub fn pinv_psd(g: &Matrix, rcond: f64) -> Result<Matrix> {
    if g.nrows() != g.ncols() {
        return Err(Error::Shape(format!(
            "pinv_psd needs a square matrix, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    let n = g.nrows();
    let sym = nalgebra::DMatrix::from_fn(n, n, |i, j| g[(i, j)]);
    let eig = sym.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v));
    let cutoff = rcond * lambda_max;
    let mut out = Matrix::zeros((n, n));
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff && lambda > 0.0 {
            let w = 1.0 / lambda;
            let v = eig.eigenvectors.column(idx);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += w * v[i] * v[j];
                }
            }
        }
    }
    Ok(out)
}

/// One least-squares factor update against a fixed mode-`d` target unfolding:
/// `M_(d) (F1 ⊙ F2) pinv(F1ᵀF1 ∗ F2ᵀF2)` with `∗` element-wise. The caller
/// picks `(F1, F2)` per mode and clamps if it wants non-negativity.
pub(crate) fn kr_least_squares(
    m_unf: &Matrix,
    f1: &Matrix,
    f2: &Matrix,
    rcond: f64,
) -> Result<Matrix> {
    let kr = khatri_rao(f1, f2)?;
    let gram = f1.t().dot(f1) * f2.t().dot(f2);
    let pinv = pinv_psd(&gram, rcond)?;
    Ok(m_unf.dot(&kr).dot(&pinv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    use crate::rng::stream_rng;

    fn counting_tensor(dims: (usize, usize, usize)) -> Tensor3 {
        // Entry value equals its canonical linear index.
        let total = dims.0 * dims.1 * dims.2;
        Tensor3::new(dims, (0..total).map(|v| v as f64).collect()).unwrap()
    }

    fn random_tensor(dims: (usize, usize, usize), seed: u64) -> Tensor3 {
        let mut rng = stream_rng(seed, 900);
        Tensor3::from_fn(dims, |_, _, _| rng.gen_range(-1.0..1.0))
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = stream_rng(seed, 901);
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn linear_index_first_axis_fastest() {
        let t = Tensor3::zeros((3, 4, 5));
        assert_eq!(t.linear_index(0, 0, 0), 0);
        assert_eq!(t.linear_index(1, 0, 0), 1);
        assert_eq!(t.linear_index(0, 1, 0), 3);
        assert_eq!(t.linear_index(0, 0, 1), 12);
        assert_eq!(t.linear_index(2, 3, 4), 2 + 3 * 3 + 12 * 4);
        for lin in [0, 1, 17, 59] {
            let (i, j, k) = t.multi_index(lin);
            assert_eq!(t.linear_index(i, j, k), lin);
        }
    }

    #[test]
    fn unfold_2x2x2_enumerated() {
        // Values 0..8 at linear offsets; rows spelled out by hand from the
        // layout convention.
        let t = counting_tensor((2, 2, 2));
        let m1 = t.unfold(Mode::One);
        assert_eq!(m1.row(0).to_vec(), vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(m1.row(1).to_vec(), vec![1.0, 3.0, 5.0, 7.0]);
        let m2 = t.unfold(Mode::Two);
        assert_eq!(m2.row(0).to_vec(), vec![0.0, 1.0, 4.0, 5.0]);
        assert_eq!(m2.row(1).to_vec(), vec![2.0, 3.0, 6.0, 7.0]);
        let m3 = t.unfold(Mode::Three);
        assert_eq!(m3.row(0).to_vec(), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(m3.row(1).to_vec(), vec![4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn fold_inverts_unfold_bit_exact() {
        let mut rng = stream_rng(3, 902);
        for _ in 0..40 {
            let dims = (
                rng.gen_range(1..6),
                rng.gen_range(1..6),
                rng.gen_range(1..6),
            );
            let t = random_tensor(dims, rng.gen());
            for mode in [Mode::One, Mode::Two, Mode::Three] {
                let back = Tensor3::fold(&t.unfold(mode), mode, dims).unwrap();
                assert_eq!(back, t, "mode {mode:?} dims {dims:?}");
            }
        }
    }

    #[test]
    fn fold_rejects_wrong_shape() {
        let m = Matrix::zeros((2, 5));
        assert!(matches!(
            Tensor3::fold(&m, Mode::One, (2, 2, 2)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn khatri_rao_hand_example() {
        let a = ndarray::arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = ndarray::arr2(&[[0.0, 1.0], [1.0, 0.0]]);
        let kr = khatri_rao(&a, &b).unwrap();
        let expect = ndarray::arr2(&[[0.0, 2.0], [1.0, 0.0], [0.0, 4.0], [3.0, 0.0]]);
        assert_eq!(kr, expect);
    }

    #[test]
    fn khatri_rao_rejects_column_mismatch() {
        let a = Matrix::zeros((2, 2));
        let b = Matrix::zeros((2, 3));
        assert!(matches!(khatri_rao(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn khatri_rao_columns_are_kronecker_products() {
        let a = random_matrix(3, 4, 11);
        let b = random_matrix(5, 4, 12);
        let kr = khatri_rao(&a, &b).unwrap();
        for r in 0..4 {
            for p in 0..3 {
                for q in 0..5 {
                    assert_eq!(kr[(p * 5 + q, r)], a[(p, r)] * b[(q, r)]);
                }
            }
        }
    }

    #[test]
    fn cp_reconstruct_matches_triple_loop() {
        let f = FactorTriple::new(
            random_matrix(4, 3, 21),
            random_matrix(5, 3, 22),
            random_matrix(6, 3, 23),
        )
        .unwrap();
        let t = cp_reconstruct(&f);
        for i in 0..4 {
            for j in 0..5 {
                for k in 0..6 {
                    let direct: f64 = (0..3)
                        .map(|r| f.a[(i, r)] * f.b[(j, r)] * f.c[(k, r)])
                        .sum();
                    assert_abs_diff_eq!(t.get(i, j, k), direct, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn unfoldings_satisfy_cp_identities() {
        let f = FactorTriple::new(
            random_matrix(4, 2, 31),
            random_matrix(3, 2, 32),
            random_matrix(5, 2, 33),
        )
        .unwrap();
        let t = cp_reconstruct(&f);
        let pairs = [
            (Mode::One, &f.a, khatri_rao(&f.c, &f.b).unwrap()),
            (Mode::Two, &f.b, khatri_rao(&f.c, &f.a).unwrap()),
            (Mode::Three, &f.c, khatri_rao(&f.b, &f.a).unwrap()),
        ];
        for (mode, factor, kr) in pairs {
            let lhs = t.unfold(mode);
            let rhs = factor.dot(&kr.t());
            let diff = frobenius_norm_matrix(&(&lhs - &rhs));
            assert!(diff < 1e-10, "mode {mode:?} identity residual {diff}");
        }
    }

    #[test]
    fn factor_triple_validates() {
        assert!(FactorTriple::new(
            Matrix::zeros((2, 2)),
            Matrix::zeros((3, 2)),
            Matrix::zeros((4, 2))
        )
        .is_ok());
        assert!(matches!(
            FactorTriple::new(
                Matrix::zeros((2, 2)),
                Matrix::zeros((3, 3)),
                Matrix::zeros((4, 2))
            ),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            FactorTriple::new(
                Matrix::zeros((2, 0)),
                Matrix::zeros((3, 0)),
                Matrix::zeros((4, 0))
            ),
            Err(Error::Shape(_))
        ));
        let mut a = Matrix::zeros((2, 2));
        a[(0, 0)] = f64::NAN;
        assert!(matches!(
            FactorTriple::new(a, Matrix::zeros((3, 2)), Matrix::zeros((4, 2))),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn pinv_identity_and_diagonal() {
        let eye = Array2::eye(3);
        let p = pinv_psd(&eye, DEFAULT_RCOND).unwrap();
        assert_abs_diff_eq!(frobenius_norm_matrix(&(&p - &eye)), 0.0, epsilon = 1e-12);

        let d = ndarray::arr2(&[[4.0, 0.0], [0.0, 0.0]]);
        let p = pinv_psd(&d, DEFAULT_RCOND).unwrap();
        let expect = ndarray::arr2(&[[0.25, 0.0], [0.0, 0.0]]);
        assert_abs_diff_eq!(frobenius_norm_matrix(&(&p - &expect)), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pinv_zero_matrix_is_zero() {
        let z = Matrix::zeros((3, 3));
        let p = pinv_psd(&z, DEFAULT_RCOND).unwrap();
        assert_eq!(p, z);
    }

    #[test]
    fn pinv_satisfies_penrose_conditions() {
        // Rank-deficient PSD matrix: G = V V^T with V 4x2.
        let v = random_matrix(4, 2, 41);
        let g = v.dot(&v.t());
        let p = pinv_psd(&g, DEFAULT_RCOND).unwrap();
        let gp = g.dot(&p);
        let checks = [
            g.dot(&p).dot(&g) - &g,
            p.dot(&g).dot(&p) - &p,
            &gp.t().to_owned() - &gp,
        ];
        for (idx, m) in checks.iter().enumerate() {
            let res = frobenius_norm_matrix(m);
            assert!(res < 1e-9, "penrose condition {idx} residual {res}");
        }
    }

    #[test]
    fn pinv_rejects_non_square() {
        assert!(matches!(
            pinv_psd(&Matrix::zeros((2, 3)), DEFAULT_RCOND),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn kr_least_squares_recovers_exact_factor() {
        // If M_(1) comes from an exact CP model, the update returns A exactly
        // (up to numerics) when B and C are the true factors.
        let f = FactorTriple::new(
            random_matrix(4, 2, 51),
            random_matrix(3, 2, 52),
            random_matrix(5, 2, 53),
        )
        .unwrap();
        let m1 = cp_reconstruct(&f).unfold(Mode::One);
        let a = kr_least_squares(&m1, &f.c, &f.b, DEFAULT_RCOND).unwrap();
        let diff = frobenius_norm_matrix(&(&a - &f.a));
        assert!(diff < 1e-8, "residual {diff}");
    }

    #[test]
    fn count_nonzero_is_strict() {
        let t = Tensor3::new((1, 1, 4), vec![0.0, 0.5, -0.5, 1.0]).unwrap();
        assert_eq!(t.count_nonzero(0.5), 1);
        assert_eq!(t.count_nonzero(0.0), 3);
        assert_eq!(t.count_nonzero(1e-6), 3);
    }

    #[test]
    fn norms_and_arithmetic() {
        let t = Tensor3::new((1, 2, 2), vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert_abs_diff_eq!(t.frobenius_norm(), 25.0_f64.sqrt(), epsilon = 1e-15);
        let sum = t.add(&t);
        assert_eq!(sum.values(), &[2.0, 4.0, 4.0, 8.0]);
        let zero = t.sub(&t);
        assert_eq!(zero.frobenius_norm(), 0.0);
    }

    #[test]
    fn tensor_new_rejects_bad_length() {
        assert!(matches!(
            Tensor3::new((2, 2, 2), vec![0.0; 7]),
            Err(Error::Shape(_))
        ));
    }
}
