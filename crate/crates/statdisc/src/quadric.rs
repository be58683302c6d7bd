//! Model quadrics `Re w_j = z^* A_j z` and their pointwise classifications:
//! Levi generating, Levi nondegeneracy, strong nondegeneracy and
//! pseudoconvexity at a covector, Segre rank, D-nondegeneracy, and the
//! normalizing change of coordinates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    definiteness, numerical_rank, real_span_rank, CMatrix, CVector, Definiteness, HermitianMatrix,
    C64, DEFAULT_RANK_TOL,
};

/// Maximum Hermitian deviation accepted when loading a quadric from disk.
pub const LOAD_HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadricModel {
    n: usize,
    d: usize,
    matrices: Vec<HermitianMatrix>,
}

#[derive(Serialize, Deserialize)]
struct QuadricRepr {
    n: usize,
    d: usize,
    matrices: Vec<Vec<Vec<[f64; 2]>>>,
}

impl QuadricModel {
    pub fn new(n: usize, d: usize, matrices: Vec<HermitianMatrix>) -> Result<Self> {
        if n < 1 || d < 1 {
            return Err(Error::InvalidInput(
                "quadric needs n >= 1 and d >= 1".into(),
            ));
        }
        if matrices.len() != d {
            return Err(Error::InvalidInput(format!(
                "expected {d} matrices, got {}",
                matrices.len()
            )));
        }
        if matrices.iter().any(|m| m.order() != n) {
            return Err(Error::InvalidInput("matrix order does not match n".into()));
        }
        Ok(Self { n, d, matrices })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrices(&self) -> &[HermitianMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, j: usize) -> &HermitianMatrix {
        &self.matrices[j]
    }

    /// Real combination `sum_j c_j A_j`.
    pub fn combine(&self, coeffs: &DVector<f64>) -> CMatrix {
        let mut out = CMatrix::zeros(self.n, self.n);
        for (j, m) in self.matrices.iter().enumerate() {
            out += m.matrix().scale(coeffs[j]);
        }
        out
    }

    /// Complex combination `sum_j c_j A_j`.
    pub fn combine_complex(&self, coeffs: &CVector) -> CMatrix {
        let mut out = CMatrix::zeros(self.n, self.n);
        for (j, m) in self.matrices.iter().enumerate() {
            out += m.matrix() * coeffs[j];
        }
        out
    }

    /// Transforms all defining matrices by `A_j -> C^* A_j C`.
    pub fn congruence(&self, c: &CMatrix) -> Result<QuadricModel> {
        let transformed = self
            .matrices
            .iter()
            .map(|m| HermitianMatrix::new(c.adjoint() * m.matrix() * c))
            .collect::<Result<Vec<_>>>()?;
        QuadricModel::new(self.n, self.d, transformed)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let matrices = self
            .matrices
            .iter()
            .map(|m| {
                (0..self.n)
                    .map(|i| {
                        (0..self.n)
                            .map(|j| {
                                let z = m.matrix()[(i, j)];
                                [z.re, z.im]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        serde_json::to_value(QuadricRepr {
            n: self.n,
            d: self.d,
            matrices,
        })
        .expect("quadric serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let repr: QuadricRepr = serde_json::from_value(value.clone())?;
        if repr.matrices.len() != repr.d {
            return Err(Error::InvalidInput("matrix count does not match d".into()));
        }
        let mut matrices = Vec::with_capacity(repr.d);
        for rows in &repr.matrices {
            if rows.len() != repr.n || rows.iter().any(|r| r.len() != repr.n) {
                return Err(Error::InvalidInput("matrix is not n x n".into()));
            }
            let m = CMatrix::from_fn(repr.n, repr.n, |i, j| {
                C64::new(rows[i][j][0], rows[i][j][1])
            });
            let dev = HermitianMatrix::deviation(&m);
            if dev > LOAD_HERMITIAN_TOL {
                return Err(Error::InvalidInput(format!(
                    "matrix is not Hermitian on load (deviation {dev:.3e})"
                )));
            }
            matrices.push(HermitianMatrix::new(m)?);
        }
        QuadricModel::new(repr.n, repr.d, matrices)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        Self::from_json(&value)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }
}

impl Serialize for QuadricModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuadricModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        QuadricModel::from_json(&value).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LeviClassification {
    pub generating: bool,
    pub generating_rank: usize,
    pub levi_nondegenerate: bool,
    pub b: Option<Vec<f64>>,
    pub strongly_nondegenerate_at_b: Option<bool>,
    pub strongly_pseudoconvex_at_b: Option<bool>,
    /// Smallest singular value of `sum b_j A_j` when `b` was supplied.
    pub smallest_singular_value: Option<f64>,
    /// Smallest eigenvalue of `sum b_j A_j` when `b` was supplied.
    pub smallest_eigenvalue: Option<f64>,
}

/// Flattens each defining matrix into a complex n^2-vector.
fn flattened(q: &QuadricModel) -> Vec<CVector> {
    q.matrices()
        .iter()
        .map(|m| CVector::from_column_slice(m.matrix().as_slice()))
        .collect()
}

/// Levi generating test: R-independence of the defining matrices.
pub fn generating(q: &QuadricModel, tol: f64) -> Result<(bool, usize)> {
    let rank = real_span_rank(&flattened(q), tol)?;
    Ok((rank == q.d(), rank))
}

/// True iff the common kernel of the defining matrices is trivial.
pub fn levi_nondegenerate(q: &QuadricModel, tol: f64) -> Result<bool> {
    let n = q.n();
    let mut stacked = CMatrix::zeros(q.d() * n, n);
    for (j, m) in q.matrices().iter().enumerate() {
        stacked.view_mut((j * n, 0), (n, n)).copy_from(m.matrix());
    }
    Ok(numerical_rank(&stacked, tol)? == n)
}

pub fn strongly_nondegenerate_at(
    q: &QuadricModel,
    b: &DVector<f64>,
    tol: f64,
) -> Result<(bool, f64)> {
    let s = q.combine(b);
    let sv = s.clone().svd(false, false).singular_values;
    let smin = sv.iter().fold(f64::INFINITY, |acc, &x| acc.min(x));
    Ok((numerical_rank(&s, tol)? == q.n(), smin))
}

pub fn strongly_pseudoconvex_at(
    q: &QuadricModel,
    b: &DVector<f64>,
    tol: f64,
) -> Result<(bool, f64)> {
    let s = q.combine(b);
    let eigs = ((&s + s.adjoint()).scale(0.5)).symmetric_eigenvalues();
    let emin = eigs.iter().fold(f64::INFINITY, |acc, &x| acc.min(x));
    Ok((
        definiteness(&s, tol)? == Definiteness::PositiveDefinite,
        emin,
    ))
}

pub fn classify(
    q: &QuadricModel,
    b: Option<&DVector<f64>>,
    tol: f64,
) -> Result<LeviClassification> {
    let (gen, rank) = generating(q, tol)?;
    let levi = levi_nondegenerate(q, tol)?;
    let mut out = LeviClassification {
        generating: gen,
        generating_rank: rank,
        levi_nondegenerate: levi,
        b: None,
        strongly_nondegenerate_at_b: None,
        strongly_pseudoconvex_at_b: None,
        smallest_singular_value: None,
        smallest_eigenvalue: None,
    };
    if let Some(b) = b {
        let (nondeg, smin) = strongly_nondegenerate_at(q, b, tol)?;
        let (pc, emin) = strongly_pseudoconvex_at(q, b, tol)?;
        out.b = Some(b.iter().copied().collect());
        out.strongly_nondegenerate_at_b = Some(nondeg);
        out.strongly_pseudoconvex_at_b = Some(pc);
        out.smallest_singular_value = Some(smin);
        out.smallest_eigenvalue = Some(emin);
    }
    Ok(out)
}

/// Heuristic search for `b` with `sum b_j A_j` positive definite.
///
/// Random unit starts plus random-perturbation ascent on the smallest
/// eigenvalue. Absence after the budget is *not* a proof that no such `b`
/// exists.
pub fn find_positive_combination(
    q: &QuadricModel,
    budget: usize,
    seed: u64,
) -> Option<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = q.d();
    let min_eig = |b: &DVector<f64>| -> f64 {
        let s = q.combine(b);
        let herm = (&s + s.adjoint()).scale(0.5);
        herm.symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |acc, &x| acc.min(x))
    };
    let mut used = 0usize;
    while used < budget {
        let mut b = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        if b.norm() == 0.0 {
            b[0] = 1.0;
        }
        b /= b.norm();
        let mut best = min_eig(&b);
        used += 1;
        let mut step = 0.5;
        while used < budget && step > 1e-3 {
            let cand = &b + DVector::from_fn(d, |_, _| rng.gen_range(-step..step));
            let cn = cand.norm();
            if cn == 0.0 {
                used += 1;
                continue;
            }
            let cand = cand / cn;
            let val = min_eig(&cand);
            used += 1;
            if val > best {
                best = val;
                b = cand;
            } else {
                step *= 0.7;
            }
        }
        if best > 1e-8 {
            return Some(b);
        }
    }
    None
}

/// The n x d matrix whose j-th column is `A_j V`.
pub fn segre_matrix(q: &QuadricModel, v: &CVector) -> CMatrix {
    let mut d0 = CMatrix::zeros(q.n(), q.d());
    for (j, m) in q.matrices().iter().enumerate() {
        d0.set_column(j, &(m.matrix() * v));
    }
    d0
}

pub fn segre_rank(q: &QuadricModel, v: &CVector, tol: f64) -> Result<usize> {
    if v.norm() == 0.0 {
        return Err(Error::InvalidInput("Segre rank needs V != 0".into()));
    }
    if v.len() != q.n() {
        return Err(Error::InvalidInput("V has wrong length".into()));
    }
    numerical_rank(&segre_matrix(q, v), tol)
}

/// Maximum Segre rank over random unit vectors; attains the generic rank
/// with probability one.
pub fn generic_segre_rank(
    q: &QuadricModel,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<(usize, CVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_rank = 0;
    let mut witness = CVector::zeros(q.n());
    for _ in 0..samples.max(1) {
        let mut v = CVector::from_fn(q.n(), |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        if v.norm() == 0.0 {
            v[0] = C64::new(1.0, 0.0);
        }
        let v = v.clone() / C64::new(v.norm(), 0.0);
        let r = segre_rank(q, &v, tol)?;
        if r > best_rank {
            best_rank = r;
            witness = v;
        }
    }
    Ok((best_rank, witness))
}

/// D-nondegeneracy at `(b, V)`: invertibility of `Re(D0^* (sum b_j A_j)^{-1} D0)`.
pub fn d_nondegenerate(
    q: &QuadricModel,
    b: &DVector<f64>,
    v: &CVector,
    tol: f64,
) -> Result<(bool, DMatrix<f64>)> {
    let s = q.combine(b);
    let lu = s.clone().lu();
    if numerical_rank(&s, tol)? != q.n() {
        return Err(Error::Precondition("sum b_j A_j is singular".into()));
    }
    let d0 = segre_matrix(q, v);
    let sinv_d0 = lu
        .solve(&d0)
        .ok_or_else(|| Error::Precondition("sum b_j A_j is singular".into()))?;
    let cert_c = d0.adjoint() * sinv_d0;
    let cert = cert_c.map(|z| z.re);
    let cm = cert.map(|x| C64::new(x, 0.0));
    let nondeg = numerical_rank(&cm, tol)? == q.d();
    Ok((nondeg, cert))
}

/// Change of coordinates making `sum c_j A_j` the identity.
///
/// Returns the transformed quadric and the matrix `C = S^{-1/2}`; vectors
/// transport as `z' = C^{-1} z`.
pub fn normalize(q: &QuadricModel, c: &DVector<f64>) -> Result<(QuadricModel, CMatrix)> {
    let s = q.combine(c);
    if definiteness(&s, DEFAULT_RANK_TOL)? != Definiteness::PositiveDefinite {
        return Err(Error::Precondition(
            "sum c_j A_j is not positive definite".into(),
        ));
    }
    let herm = (&s + s.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(1.0 / l.sqrt(), 0.0)));
    let cmat = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.adjoint();
    let qn = q.congruence(&cmat)?;
    let check = (qn.combine(c) - CMatrix::identity(q.n(), q.n())).norm();
    if check > 1e-12 {
        return Err(Error::Regime(format!(
            "normalization residual {check:.3e} exceeds 1e-12"
        )));
    }
    Ok((qn, cmat))
}

/// Convenience: smallest singular value of a complex matrix.
pub fn smallest_singular_value(m: &CMatrix) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |acc, &x| acc.min(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(entries: CMatrix) -> HermitianMatrix {
        HermitianMatrix::new(entries).unwrap()
    }

    fn diag(vals: &[f64]) -> HermitianMatrix {
        herm(CMatrix::from_diagonal(&CVector::from_iterator(
            vals.len(),
            vals.iter().map(|&x| C64::new(x, 0.0)),
        )))
    }

    fn cv(vals: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(vals.len(), vals.iter().map(|&(re, im)| C64::new(re, im)))
    }

    #[test]
    fn generating_independent_diagonals() {
        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 1.0]), diag(&[1.0, -1.0])]).unwrap();
        assert!(generating(&q, 1e-8).unwrap().0);
    }

    #[test]
    fn generating_proportional_fails() {
        let q = QuadricModel::new(1, 2, vec![diag(&[1.0]), diag(&[2.0])]).unwrap();
        let (gen, rank) = generating(&q, 1e-8).unwrap();
        assert!(!gen);
        assert_eq!(rank, 1);
    }

    #[test]
    fn generating_zero_matrix_fails() {
        let q = QuadricModel::new(2, 1, vec![diag(&[0.0, 0.0])]).unwrap();
        assert!(!generating(&q, 1e-8).unwrap().0);
    }

    #[test]
    fn levi_nondegenerate_cases() {
        let q = QuadricModel::new(2, 1, vec![diag(&[1.0, 0.0])]).unwrap();
        assert!(!levi_nondegenerate(&q, 1e-8).unwrap());
        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])]).unwrap();
        assert!(levi_nondegenerate(&q, 1e-8).unwrap());
        let q = QuadricModel::new(2, 1, vec![diag(&[1.0, 1.0])]).unwrap();
        assert!(levi_nondegenerate(&q, 1e-8).unwrap());
    }

    #[test]
    fn strong_classes_at_b() {
        let q = QuadricModel::new(2, 1, vec![diag(&[1.0, -1.0])]).unwrap();
        let b = DVector::from_vec(vec![1.0]);
        assert!(strongly_nondegenerate_at(&q, &b, 1e-8).unwrap().0);
        assert!(!strongly_pseudoconvex_at(&q, &b, 1e-8).unwrap().0);
        let b0 = DVector::from_vec(vec![0.0]);
        assert!(!strongly_nondegenerate_at(&q, &b0, 1e-8).unwrap().0);
        assert!(!strongly_pseudoconvex_at(&q, &b0, 1e-8).unwrap().0);

        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 1.0]), diag(&[1.0, -1.0])]).unwrap();
        let b = DVector::from_vec(vec![1.0, 0.0]);
        assert!(strongly_nondegenerate_at(&q, &b, 1e-8).unwrap().0);
        assert!(strongly_pseudoconvex_at(&q, &b, 1e-8).unwrap().0);
    }

    #[test]
    fn positive_combination_identity() {
        let q = QuadricModel::new(2, 1, vec![diag(&[1.0, 1.0])]).unwrap();
        let b = find_positive_combination(&q, 100, 1).unwrap();
        assert!(strongly_pseudoconvex_at(&q, &b, 1e-8).unwrap().0);
    }

    #[test]
    fn positive_combination_indefinite_absent() {
        // eigenvalues are b and -b for every b, so no pd combination exists
        let q = QuadricModel::new(2, 1, vec![diag(&[1.0, -1.0])]).unwrap();
        assert!(find_positive_combination(&q, 200, 1).is_none());
    }

    #[test]
    fn positive_combination_split_diagonals() {
        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 0.0]), diag(&[0.0, 1.0])]).unwrap();
        let b = find_positive_combination(&q, 500, 3).unwrap();
        assert!(strongly_pseudoconvex_at(&q, &b, 1e-8).unwrap().0);
    }

    #[test]
    fn segre_rank_examples() {
        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 1.0]), diag(&[1.0, -1.0])]).unwrap();
        let v = cv(&[(1.0, 0.0), (1.0, 0.0)]);
        assert_eq!(segre_rank(&q, &v, 1e-8).unwrap(), 2);
        let v = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        assert_eq!(segre_rank(&q, &v, 1e-8).unwrap(), 1);

        let q1 = QuadricModel::new(2, 1, vec![diag(&[1.0, 1.0])]).unwrap();
        let v = cv(&[(0.4, 0.1), (0.2, -0.3)]);
        assert_eq!(segre_rank(&q1, &v, 1e-8).unwrap(), 1);
    }

    #[test]
    fn segre_rank_zero_vector_rejected() {
        let q = QuadricModel::new(2, 1, vec![diag(&[1.0, 1.0])]).unwrap();
        let v = cv(&[(0.0, 0.0), (0.0, 0.0)]);
        assert!(segre_rank(&q, &v, 1e-8).is_err());
    }

    #[test]
    fn generic_segre_rank_stabilizes() {
        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 1.0]), diag(&[1.0, -1.0])]).unwrap();
        let (r10, _) = generic_segre_rank(&q, 10, 42, 1e-8).unwrap();
        let (r100, _) = generic_segre_rank(&q, 100, 42, 1e-8).unwrap();
        assert_eq!(r10, 2);
        assert_eq!(r100, 2);
    }

    #[test]
    fn d_nondegenerate_examples() {
        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 1.0]), diag(&[1.0, -1.0])]).unwrap();
        let b = DVector::from_vec(vec![1.0, 0.0]);

        let v = cv(&[(1.0, 0.0), (1.0, 0.0)]);
        let (ok, cert) = d_nondegenerate(&q, &b, &v, 1e-8).unwrap();
        assert!(ok);
        assert!((cert[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((cert[(1, 1)] - 2.0).abs() < 1e-12);
        assert!(cert[(0, 1)].abs() < 1e-12);

        let v = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        let (ok, cert) = d_nondegenerate(&q, &b, &v, 1e-8).unwrap();
        assert!(!ok);
        assert!((cert[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((cert[(0, 1)] - 1.0).abs() < 1e-12);

        let q1 = QuadricModel::new(1, 1, vec![diag(&[1.0])]).unwrap();
        let b1 = DVector::from_vec(vec![1.0]);
        let v1 = cv(&[(1.0, 0.0)]);
        let (ok, cert) = d_nondegenerate(&q1, &b1, &v1, 1e-8).unwrap();
        assert!(ok);
        assert!((cert[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn d_nondegenerate_singular_combination_rejected() {
        let q = QuadricModel::new(2, 1, vec![diag(&[1.0, -1.0])]).unwrap();
        let b = DVector::from_vec(vec![0.0]);
        let v = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        assert!(matches!(
            d_nondegenerate(&q, &b, &v, 1e-8),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn normalize_scalar() {
        let q = QuadricModel::new(1, 1, vec![diag(&[4.0])]).unwrap();
        let c = DVector::from_vec(vec![1.0]);
        let (qn, cm) = normalize(&q, &c).unwrap();
        assert!((qn.matrix(0).matrix()[(0, 0)].re - 1.0).abs() < 1e-14);
        assert!((cm[(0, 0)].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn normalize_identity_is_noop() {
        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 1.0]), diag(&[1.0, -1.0])]).unwrap();
        let c = DVector::from_vec(vec![1.0, 0.0]);
        let (qn, cm) = normalize(&q, &c).unwrap();
        assert!((cm - CMatrix::identity(2, 2)).norm() < 1e-13);
        assert!((qn.matrix(1).matrix() - q.matrix(1).matrix()).norm() < 1e-13);
    }

    #[test]
    fn normalize_rejects_indefinite() {
        let q = QuadricModel::new(2, 1, vec![diag(&[1.0, -1.0])]).unwrap();
        let c = DVector::from_vec(vec![1.0]);
        assert!(normalize(&q, &c).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = C64::new(0.3, 0.7);
        m[(1, 0)] = C64::new(0.3, -0.7);
        let q = QuadricModel::new(2, 2, vec![herm(m), diag(&[1.0, -1.0])]).unwrap();
        let text = serde_json::to_string(&q.to_json()).unwrap();
        let back = QuadricModel::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(q, back);
    }

    #[test]
    fn json_load_rejects_non_hermitian() {
        let v: serde_json::Value = serde_json::json!({
            "n": 2, "d": 1,
            "matrices": [[[[1.0, 0.0], [0.5, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]]
        });
        assert!(QuadricModel::from_json(&v).is_err());
    }
}
