//! Dense complex matrix kernels shared by the other modules: ranks over R,
//! definiteness classification, and the dense solve for operators of the
//! form `N -> A N + P (N X + X N)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default relative tolerance for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Condition number above which operator solves are rejected.
pub const MAX_OPERATOR_CONDITION: f64 = 1e12;

pub fn check_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix contains NaN or Inf".into()))
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc, &s| acc.max(s))
}

/// Number of singular values above `tol` times the largest one.
pub fn numerical_rank(m: &CMatrix, tol: f64) -> Result<usize> {
    check_finite(m)?;
    if tol < 0.0 {
        return Err(Error::InvalidInput("negative rank tolerance".into()));
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |acc, &s| acc.max(s));
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * smax).count())
}

fn real_matrix_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |acc, &s| acc.max(s));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Stacks real and imaginary parts of each vector into the columns of a
/// `2k x m` real matrix.
pub fn realify_columns(vectors: &[CVector]) -> Result<DMatrix<f64>> {
    if vectors.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    let k = vectors[0].len();
    if vectors.iter().any(|v| v.len() != k) {
        return Err(Error::InvalidInput("vectors of mixed lengths".into()));
    }
    let mut out = DMatrix::zeros(2 * k, vectors.len());
    for (c, v) in vectors.iter().enumerate() {
        for i in 0..k {
            out[(i, c)] = v[i].re;
            out[(k + i, c)] = v[i].im;
        }
    }
    Ok(out)
}

/// Dimension over R of the real span of the given complex vectors.
pub fn real_span_rank(vectors: &[CVector], tol: f64) -> Result<usize> {
    let stacked = realify_columns(vectors)?;
    Ok(real_matrix_rank(&stacked, tol))
}

/// Smallest singular value of the realified column stack; 0 for empty input.
pub fn real_span_smallest_sv(vectors: &[CVector]) -> Result<f64> {
    let stacked = realify_columns(vectors)?;
    if stacked.is_empty() {
        return Ok(0.0);
    }
    let sv = stacked.svd(false, false).singular_values;
    Ok(sv.iter().fold(f64::INFINITY, |acc, &s| acc.min(s)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Definiteness {
    PositiveDefinite,
    NegativeDefinite,
    Indefinite,
    Singular,
}

/// Classifies a Hermitian matrix by its eigenvalue signs, with threshold
/// `tol` times the largest eigenvalue magnitude.
pub fn definiteness(m: &CMatrix, tol: f64) -> Result<Definiteness> {
    check_finite(m)?;
    if !m.is_square() {
        return Err(Error::InvalidInput(
            "definiteness of non-square matrix".into(),
        ));
    }
    let dev = (m - m.adjoint()).norm();
    if dev > 1e-12 * (1.0 + m.norm()) {
        return Err(Error::InvalidInput(format!(
            "matrix is not Hermitian (deviation {dev:.3e})"
        )));
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let eigs = herm.symmetric_eigenvalues();
    let emax = eigs.iter().fold(0.0f64, |acc, &e| acc.max(e.abs()));
    if emax == 0.0 {
        return Ok(Definiteness::Singular);
    }
    let thr = tol * emax;
    if eigs.iter().any(|&e| e.abs() <= thr) {
        return Ok(Definiteness::Singular);
    }
    let pos = eigs.iter().filter(|&&e| e > thr).count();
    let neg = eigs.len() - pos;
    Ok(match (pos, neg) {
        (_, 0) => Definiteness::PositiveDefinite,
        (0, _) => Definiteness::NegativeDefinite,
        _ => Definiteness::Indefinite,
    })
}

/// Classification for a real symmetric matrix.
pub fn definiteness_real(m: &DMatrix<f64>, tol: f64) -> Result<Definiteness> {
    let cm = m.map(|x| C64::new(x, 0.0));
    definiteness(&cm, tol)
}

#[derive(Clone, Debug)]
pub struct OperatorSolution {
    pub n: CMatrix,
    pub condition: f64,
    pub residual: f64,
}

fn apply_phi(a: &CMatrix, p: &CMatrix, x: &CMatrix, n: &CMatrix) -> CMatrix {
    a * n + p * (n * x + x * n)
}

/// Solves `A N + P (N X + X N) = rhs` for `N` by one dense factorization of
/// the induced n^2 x n^2 system (column-major vectorization).
pub fn solve_operator_equation(
    a: &CMatrix,
    p: &CMatrix,
    x: &CMatrix,
    rhs: &CMatrix,
) -> Result<OperatorSolution> {
    let n = a.nrows();
    for m in [a, p, x, rhs] {
        check_finite(m)?;
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::InvalidInput(
                "operator solve needs square matrices of one size".into(),
            ));
        }
    }
    let eye = CMatrix::identity(n, n);
    // vec(A N) + vec(P N X) + vec(P X N) = (I (x) (A + PX) + X^T (x) P) vec(N)
    let op = eye.kronecker(&(a + p * x)) + x.transpose().kronecker(p);

    let sv = op.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |acc, &s| acc.max(s));
    let smin = sv.iter().fold(f64::INFINITY, |acc, &s| acc.min(s));
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !condition.is_finite() || condition > MAX_OPERATOR_CONDITION {
        return Err(Error::SingularOperator { condition });
    }

    let rhs_vec = CVector::from_column_slice(rhs.as_slice());
    let lu = op.clone().lu();
    let mut sol = lu
        .solve(&rhs_vec)
        .ok_or(Error::SingularOperator { condition })?;

    let bound = 1e-12 * (rhs.norm() + 1.0);
    let mut result = CMatrix::from_column_slice(n, n, sol.as_slice());
    let mut residual = (apply_phi(a, p, x, &result) - rhs).norm();
    if residual > bound {
        // one step of iterative refinement
        let res_mat = rhs - apply_phi(a, p, x, &result);
        let res_vec = CVector::from_column_slice(res_mat.as_slice());
        if let Some(corr) = lu.solve(&res_vec) {
            sol += corr;
            result = CMatrix::from_column_slice(n, n, sol.as_slice());
            residual = (apply_phi(a, p, x, &result) - rhs).norm();
        }
    }
    if residual > bound {
        return Err(Error::SingularOperator { condition });
    }
    Ok(OperatorSolution {
        n: result,
        condition,
        residual,
    })
}

/// Hermitian matrix, symmetrized once at construction and exact thereafter.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    m: CMatrix,
}

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_finite(&m)?;
        if !m.is_square() {
            return Err(Error::InvalidInput(
                "Hermitian matrix must be square".into(),
            ));
        }
        let sym = (&m + m.adjoint()).scale(0.5);
        Ok(Self { m: sym })
    }

    /// Deviation from Hermitian symmetry of an arbitrary matrix.
    pub fn deviation(m: &CMatrix) -> f64 {
        (m - m.adjoint()).norm()
    }

    pub fn order(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }
}

impl std::ops::Deref for HermitianMatrix {
    type Target = CMatrix;

    fn deref(&self) -> &CMatrix {
        &self.m
    }
}
