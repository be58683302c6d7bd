//! Explicit stationary-disc lifts, their boundary evaluation and
//! verification (attachment, holomorphy, normalization, conormal
//! nonvanishing), orbit spaces, stationary minimality, defectivity, and
//! the a-dependent nondegeneracy certificate.

use nalgebra::{DMatrix, DVector};
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    definiteness_real, real_span_rank, real_span_smallest_sv, spectral_norm, CMatrix, CVector,
    Definiteness, HermitianMatrix, C64, DEFAULT_RANK_TOL,
};
use crate::matrix_eq::{solve_x, stein_k, DiscParameters, MatrixEquationSolution, SolveOptions};
use crate::quadric::{segre_matrix, QuadricModel};

#[derive(Clone, Debug)]
pub struct StationaryLift {
    pub quadric: QuadricModel,
    pub params: DiscParameters,
    pub v: CVector,
    pub solution: MatrixEquationSolution,
    pub k: Vec<HermitianMatrix>,
}

/// Boundary values of the four lift components at one `|zeta| = 1` point.
#[derive(Clone, Debug)]
pub struct BoundaryValue {
    pub h: CVector,
    pub g: CVector,
    pub h_tilde: CVector,
    pub g_tilde: CVector,
}

#[derive(Clone, Debug, Serialize)]
pub struct LiftVerification {
    pub attachment_residual: f64,
    pub holomorphy_defect: f64,
    pub endpoint_residual: f64,
    pub conormal_min_norm: f64,
    pub max_im_multiplier: f64,
    pub samples: usize,
}

pub fn build_lift(
    q: &QuadricModel,
    a: CVector,
    b: DVector<f64>,
    v: CVector,
    opts: &SolveOptions,
) -> Result<StationaryLift> {
    if v.len() != q.n() {
        return Err(Error::InvalidInput("V has wrong length".into()));
    }
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("V has non-finite entries".into()));
    }
    let params = DiscParameters::new(q, a, b)?;
    let solution = solve_x(&params, opts)?;
    let k = q
        .matrices()
        .iter()
        .map(|aj| stein_k(&solution.x, aj))
        .collect::<Result<Vec<_>>>()?;
    Ok(StationaryLift {
        quadric: q.clone(),
        params,
        v,
        solution,
        k,
    })
}

impl StationaryLift {
    /// Evaluates `(h, g, h~, g~)` at a unit-modulus point.
    pub fn eval_boundary(&self, zeta: C64) -> Result<BoundaryValue> {
        if (zeta.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "boundary evaluation needs |zeta| = 1, got {:.6}",
                zeta.norm()
            )));
        }
        let q = &self.quadric;
        let n = q.n();
        let d = q.d();
        let x = &self.solution.x;
        let eye = CMatrix::identity(n, n);
        let imx_v = (&eye - x) * &self.v;
        // w = (I - zeta X)^-1 (I - X) V
        let w = (&eye - x * zeta)
            .lu()
            .solve(&imx_v)
            .ok_or_else(|| Error::Regime("I - zeta X singular on the boundary".into()))?;
        let h = &self.v - &w * zeta;

        let mut g = CVector::zeros(d);
        for j in 0..d {
            let aj = q.matrix(j).matrix();
            let kj = self.k[j].matrix();
            let t1 = self.v.dotc(&(aj * &self.v));
            let t2 = -C64::new(2.0, 0.0) * self.v.dotc(&(aj * &w * zeta));
            let t3 = self.v.dotc(&((x.adjoint() * kj - kj * x) * &self.v));
            let arg = &imx_v + x * &w * C64::new(2.0, 0.0) * zeta;
            let t4 = self.v.dotc(&((&eye - x.adjoint()) * kj * arg));
            g[j] = t1 + t2 + t3 + t4;
        }

        let c = self.multipliers(zeta);
        let s = q.combine_complex(&c);
        let h_tilde = s.transpose() * h.conjugate() * (-zeta);

        let mut g_tilde = CVector::zeros(d);
        for j in 0..d {
            let aj = self.params.a[j];
            g_tilde[j] = (aj
                + C64::new(self.params.b[j] - 2.0 * aj.re, 0.0) * zeta
                + aj.conj() * zeta * zeta)
                * C64::new(0.5, 0.0);
        }

        Ok(BoundaryValue {
            h,
            g,
            h_tilde,
            g_tilde,
        })
    }

    /// The conormal multipliers `c_j(zeta) = 2 g~_j(zeta) / zeta`; real on
    /// the unit circle.
    pub fn multipliers(&self, zeta: C64) -> CVector {
        let zbar = C64::new(1.0, 0.0) / zeta;
        CVector::from_fn(self.params.d(), |j, _| {
            let aj = self.params.a[j];
            aj * zbar + C64::new(self.params.b[j] - 2.0 * aj.re, 0.0) + aj.conj() * zeta
        })
    }

    /// Distance of the lift value at `zeta = 1` from `(0, 0, 0, b/2)`.
    pub fn endpoint_residual(&self) -> Result<f64> {
        let bv = self.eval_boundary(C64::new(1.0, 0.0))?;
        let half_b = self.params.b.map(|x| 0.5 * x);
        let mut sq = bv.h.norm_squared() + bv.g.norm_squared() + bv.h_tilde.norm_squared();
        for j in 0..self.params.d() {
            sq += (bv.g_tilde[j] - C64::new(half_b[j], 0.0)).norm_sqr();
        }
        Ok(sq.sqrt())
    }

    /// Samples the boundary on `samples` equispaced points and reports the
    /// attachment, holomorphy, endpoint, and conormal diagnostics.
    pub fn verify(&self, samples: usize) -> Result<LiftVerification> {
        if samples < 64 || !samples.is_power_of_two() {
            return Err(Error::InvalidInput(
                "samples must be a power of two >= 64".into(),
            ));
        }
        let q = &self.quadric;
        let n = q.n();
        let d = q.d();
        let mut attachment: f64 = 0.0;
        let mut max_im_c: f64 = 0.0;
        let mut conormal_min = f64::INFINITY;
        // one complex series per lift component
        let mut series = vec![Vec::with_capacity(samples); 2 * n + 2 * d];
        for k in 0..samples {
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / (samples as f64);
            let zeta = C64::new(theta.cos(), theta.sin());
            let bv = self.eval_boundary(zeta)?;
            for j in 0..d {
                let quad = bv.h.dotc(&(q.matrix(j).matrix() * &bv.h)).re;
                attachment = attachment.max((bv.g[j].re - quad).abs());
            }
            let c = self.multipliers(zeta);
            for j in 0..d {
                max_im_c = max_im_c.max(c[j].im.abs());
            }
            // conormal sum c_j dr_j at f(zeta): z-part -sum c_j A_j^T conj(h),
            // w-part c/2
            let mut zpart = CVector::zeros(n);
            for j in 0..d {
                zpart -= q.matrix(j).matrix().transpose() * bv.h.conjugate() * c[j];
            }
            let norm = (zpart.norm_squared() + 0.25 * c.norm_squared()).sqrt();
            conormal_min = conormal_min.min(norm);

            for i in 0..n {
                series[i].push(bv.h[i]);
                series[n + d + i].push(bv.h_tilde[i]);
            }
            for j in 0..d {
                series[n + j].push(bv.g[j]);
                series[n + d + n + j].push(bv.g_tilde[j]);
            }
        }

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(samples);
        let mut defect: f64 = 0.0;
        for comp in series.iter_mut() {
            fft.process(comp);
            let largest = comp.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            if largest == 0.0 {
                continue;
            }
            let neg = comp[samples / 2 + 1..]
                .iter()
                .map(|z| z.norm())
                .fold(0.0f64, f64::max);
            defect = defect.max(neg / largest);
        }

        Ok(LiftVerification {
            attachment_residual: attachment,
            holomorphy_defect: defect,
            endpoint_residual: self.endpoint_residual()?,
            conormal_min_norm: conormal_min,
            max_im_multiplier: max_im_c,
            samples,
        })
    }

    /// Lift dump with parameters, X, the K_j, and an optional verification
    /// block; complex entries as `[re, im]`.
    pub fn to_json(&self, verification: Option<&LiftVerification>) -> serde_json::Value {
        let pair = |z: &C64| serde_json::json!([z.re, z.im]);
        let mat = |m: &CMatrix| -> serde_json::Value {
            serde_json::Value::Array(
                (0..m.nrows())
                    .map(|i| {
                        serde_json::Value::Array((0..m.ncols()).map(|j| pair(&m[(i, j)])).collect())
                    })
                    .collect(),
            )
        };
        let vec = |v: &CVector| -> serde_json::Value {
            serde_json::Value::Array(v.iter().map(pair).collect())
        };
        serde_json::json!({
            "a": vec(&self.params.a),
            "b": self.params.b.iter().copied().collect::<Vec<_>>(),
            "v": vec(&self.v),
            "x": mat(&self.solution.x),
            "norm_x": self.solution.norm_x,
            "equation_residual": self.solution.residual_norm,
            "k": self.k.iter().map(|k| mat(k.matrix())).collect::<Vec<_>>(),
            "verification": verification.map(|v| serde_json::to_value(v).unwrap()),
        })
    }

    /// Boundary trace as CSV: `zeta_re, zeta_im`, then interleaved re/im
    /// columns for h, g, h~, g~.
    pub fn boundary_trace_csv(&self, samples: usize) -> Result<String> {
        let n = self.quadric.n();
        let d = self.quadric.d();
        let mut out = String::from("zeta_re,zeta_im");
        for (label, len) in [("h", n), ("g", d), ("ht", n), ("gt", d)] {
            for i in 0..len {
                out.push_str(&format!(",{label}{i}_re,{label}{i}_im"));
            }
        }
        out.push('\n');
        for k in 0..samples {
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / (samples as f64);
            let zeta = C64::new(theta.cos(), theta.sin());
            let bv = self.eval_boundary(zeta)?;
            out.push_str(&format!("{},{}", zeta.re, zeta.im));
            for group in [&bv.h, &bv.g, &bv.h_tilde, &bv.g_tilde] {
                for z in group.iter() {
                    out.push_str(&format!(",{},{}", z.re, z.im));
                }
            }
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct OrbitSpace {
    /// Complex vectors whose realifications form an R-orthonormal basis.
    pub basis: Vec<CVector>,
    pub dim: usize,
    pub powers_used: usize,
}

/// Krylov construction of `span_R { V, XV, X^2 V, ... }`: powers are
/// appended while the real rank grows; the first stall makes the span
/// X-invariant, so it is the whole orbit space.
pub fn orbit_space(x: &CMatrix, v: &CVector, tol: f64) -> Result<OrbitSpace> {
    if v.norm() == 0.0 {
        return Err(Error::InvalidInput("orbit space needs V != 0".into()));
    }
    let n = v.len();
    let max_dim = 2 * n;
    let mut accepted: Vec<CVector> = Vec::new();
    let mut current = v.clone();
    let mut powers_used = 0;
    for power in 0..=(max_dim + 1) {
        let mut trial = accepted.clone();
        trial.push(current.clone());
        let rank = real_span_rank(&trial, tol)?;
        if rank == accepted.len() + 1 {
            accepted.push(current.clone());
            powers_used = power;
            if accepted.len() == max_dim {
                break;
            }
            current = x * &current;
        } else {
            break;
        }
    }
    // real Gram-Schmidt on the realified vectors
    let mut basis: Vec<CVector> = Vec::with_capacity(accepted.len());
    for w in &accepted {
        let mut r = w.clone();
        for e in &basis {
            let proj = real_inner(&r, e);
            r -= e * C64::new(proj, 0.0);
        }
        let norm = r.norm();
        if norm > 0.0 {
            basis.push(r / C64::new(norm, 0.0));
        }
    }
    let dim = basis.len();
    Ok(OrbitSpace {
        basis,
        dim,
        powers_used,
    })
}

/// Real inner product of the realifications: `Re <u, w>`.
fn real_inner(u: &CVector, w: &CVector) -> f64 {
    u.iter()
        .zip(w.iter())
        .map(|(a, b)| a.re * b.re + a.im * b.im)
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimalityReport {
    pub minimal: bool,
    pub rank: usize,
    pub orbit_dim: usize,
    pub smallest_singular_value: f64,
}

/// Stationary minimality given a precomputed equation solution: the maps
/// `A_j` restricted to the orbit space of `(X, V)` are R-independent.
pub fn stationary_minimal_with(
    q: &QuadricModel,
    x: &CMatrix,
    v: &CVector,
    tol: f64,
) -> Result<MinimalityReport> {
    let orbit = orbit_space(x, v, tol)?;
    let m = orbit.dim;
    let n = q.n();
    // stack (A_j e_1, ..., A_j e_m) into one C^{nm} vector per j
    let stacked: Vec<CVector> = (0..q.d())
        .map(|j| {
            let mut w = CVector::zeros(n * m);
            for (i, e) in orbit.basis.iter().enumerate() {
                w.rows_mut(i * n, n).copy_from(&(q.matrix(j).matrix() * e));
            }
            w
        })
        .collect();
    let rank = real_span_rank(&stacked, tol)?;
    let smallest = real_span_smallest_sv(&stacked)?;
    Ok(MinimalityReport {
        minimal: rank == q.d(),
        rank,
        orbit_dim: m,
        smallest_singular_value: smallest,
    })
}

/// Stationary minimality at `(a, b - a - conj(a), V)`.
pub fn stationary_minimal(
    q: &QuadricModel,
    a: &CVector,
    b: &DVector<f64>,
    v: &CVector,
    opts: &SolveOptions,
) -> Result<MinimalityReport> {
    let params = DiscParameters::new(q, a.clone(), b.clone())?;
    let sol = solve_x(&params, opts)?;
    stationary_minimal_with(q, &sol.x, v, DEFAULT_RANK_TOL)
}

/// A lift is defective exactly when the quadric fails to be stationary
/// minimal for its parameters, with `V = h(0)`.
pub fn defective(lift: &StationaryLift) -> Result<bool> {
    let report =
        stationary_minimal_with(&lift.quadric, &lift.solution.x, &lift.v, DEFAULT_RANK_TOL)?;
    Ok(!report.minimal)
}

#[derive(Clone, Debug, Serialize)]
pub struct DaNondegReport {
    pub nondegenerate: bool,
    pub strongly: bool,
    pub certificate: Vec<Vec<f64>>,
    pub terms_used: usize,
    pub tail_bound: f64,
    pub verdict: Definiteness,
}

impl DaNondegReport {
    pub fn certificate_matrix(&self) -> DMatrix<f64> {
        let d = self.certificate.len();
        DMatrix::from_fn(d, d, |i, j| self.certificate[i][j])
    }
}

/// The a-dependent nondegeneracy certificate
/// `Re sum_r V^* (X^*)^r A_j Acoef^-1 A_s X^r V`, summed to an explicit
/// geometric tail bound and classified by definiteness.
pub fn da_nondegenerate(
    q: &QuadricModel,
    a: &CVector,
    b: &DVector<f64>,
    v: &CVector,
    opts: &SolveOptions,
) -> Result<DaNondegReport> {
    let params = DiscParameters::new(q, a.clone(), b.clone())?;
    let sol = solve_x(&params, opts)?;
    da_nondegenerate_with(q, &params, &sol, v)
}

pub fn da_nondegenerate_with(
    q: &QuadricModel,
    params: &DiscParameters,
    sol: &MatrixEquationSolution,
    v: &CVector,
) -> Result<DaNondegReport> {
    let d = q.d();
    let lu = params.acoef.matrix().clone().lu();
    let norm_x = sol.norm_x;
    let max_a_norm = q
        .matrices()
        .iter()
        .map(|m| spectral_norm(m.matrix()))
        .fold(0.0f64, f64::max);
    let ainv_norm = {
        let inv = lu
            .solve(&CMatrix::identity(q.n(), q.n()))
            .ok_or_else(|| Error::Precondition("singular coefficient matrix".into()))?;
        spectral_norm(&inv)
    };
    let scale = v.norm_squared() * max_a_norm * max_a_norm * ainv_norm;
    let geo = 1.0 - norm_x * norm_x;

    let mut cert = DMatrix::<C64>::zeros(d, d);
    let mut w = v.clone();
    let mut terms_used = 0;
    let mut tail = f64::INFINITY;
    for r in 0..10_000 {
        // term = D_r^* Acoef^-1 D_r with D_r the columns A_s X^r V
        let dr = segre_matrix(q, &w);
        let ainv_dr = lu
            .solve(&dr)
            .ok_or_else(|| Error::Precondition("singular coefficient matrix".into()))?;
        cert += dr.adjoint() * ainv_dr;
        terms_used = r + 1;
        tail = if geo > 0.0 {
            scale * norm_x.powi(2 * (r as i32 + 1)) / geo
        } else {
            f64::INFINITY
        };
        if tail < 1e-13 {
            break;
        }
        w = &sol.x * w;
    }
    let real_cert = cert.map(|z| z.re);
    // the certificate is symmetric up to the series tail; symmetrize for
    // the eigenvalue classification
    let sym = (&real_cert + real_cert.transpose()).scale(0.5);
    let verdict = definiteness_real(&sym, DEFAULT_RANK_TOL)?;
    Ok(DaNondegReport {
        nondegenerate: verdict != Definiteness::Singular,
        strongly: verdict == Definiteness::PositiveDefinite,
        certificate: (0..d)
            .map(|i| (0..d).map(|j| real_cert[(i, j)]).collect())
            .collect(),
        terms_used,
        tail_bound: tail,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_eq::contraction_guard;
    use crate::sample;
    use rand::Rng;

    fn herm(m: CMatrix) -> HermitianMatrix {
        HermitianMatrix::new(m).unwrap()
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

    fn scalar_lift(a: f64) -> StationaryLift {
        let q = QuadricModel::new(1, 1, vec![diag(&[1.0])]).unwrap();
        build_lift(
            &q,
            CVector::from_element(1, C64::new(a, 0.0)),
            DVector::from_element(1, 1.0),
            CVector::from_element(1, C64::new(1.0, 0.0)),
            &SolveOptions::default(),
        )
        .unwrap()
    }

    fn random_lift(n: usize, d: usize, a_scale: f64, rng: &mut impl Rng) -> StationaryLift {
        loop {
            let mats = (0..d)
                .map(|_| herm(sample::random_hermitian(n, rng)))
                .collect();
            let q = QuadricModel::new(n, d, mats).unwrap();
            let a = sample::random_complex_vector(d, rng) * C64::new(a_scale, 0.0);
            let b = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
            let v = sample::random_complex_vector(n, rng) * C64::new(2.0, 0.0);
            if let Ok(params) = DiscParameters::new(&q, a.clone(), b.clone()) {
                if contraction_guard(&params).map(|g| g.ok).unwrap_or(false) {
                    if let Ok(lift) = build_lift(&q, a, b, v, &SolveOptions::default()) {
                        return lift;
                    }
                }
            }
        }
    }

    const SCALAR_X: f64 = -0.127_016_653_792_583;

    #[test]
    fn initial_disc_formulas() {
        // a = 0 gives the polynomial initial disc
        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 1.0]), diag(&[1.0, -1.0])]).unwrap();
        let v = cv(&[(0.7, 0.2), (-0.3, 0.5)]);
        let b = DVector::from_vec(vec![1.0, 0.3]);
        let lift = build_lift(
            &q,
            CVector::zeros(2),
            b.clone(),
            v.clone(),
            &SolveOptions::default(),
        )
        .unwrap();
        let zeta = C64::new(0.6, 0.8);
        let bv = lift.eval_boundary(zeta).unwrap();
        let one = C64::new(1.0, 0.0);
        assert!((&bv.h - &v * (one - zeta)).norm() < 1e-13);
        for j in 0..2 {
            let expect = C64::new(2.0, 0.0) * (one - zeta) * v.dotc(&(q.matrix(j).matrix() * &v));
            assert!((bv.g[j] - expect).norm() < 1e-13);
        }
        let s = q.combine(&b);
        let expect_ht = s.transpose() * v.conjugate() * (one - zeta);
        assert!((&bv.h_tilde - expect_ht).norm() < 1e-13);
        for j in 0..2 {
            assert!((bv.g_tilde[j] - C64::new(0.5 * b[j], 0.0) * zeta).norm() < 1e-14);
        }
    }

    #[test]
    fn endpoint_value() {
        let mut rng = sample::rng_from_seed(12);
        let lift = random_lift(3, 2, 0.04, &mut rng);
        assert!(lift.endpoint_residual().unwrap() <= 1e-12);
    }

    #[test]
    fn eval_at_minus_one_initial_disc() {
        let q = QuadricModel::new(2, 1, vec![diag(&[1.0, 1.0])]).unwrap();
        let v = cv(&[(0.5, 0.0), (0.0, 0.5)]);
        let b = DVector::from_vec(vec![0.8]);
        let lift = build_lift(
            &q,
            CVector::zeros(1),
            b,
            v.clone(),
            &SolveOptions::default(),
        )
        .unwrap();
        let bv = lift.eval_boundary(C64::new(-1.0, 0.0)).unwrap();
        assert!((&bv.h - &v * C64::new(2.0, 0.0)).norm() < 1e-13);
        let expect_g = C64::new(4.0, 0.0) * v.dotc(&(q.matrix(0).matrix() * &v));
        assert!((bv.g[0] - expect_g).norm() < 1e-13);
        assert!((bv.g_tilde[0] - C64::new(-0.4, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn scalar_boundary_closed_form() {
        let lift = scalar_lift(0.1);
        let bv = lift.eval_boundary(C64::new(-1.0, 0.0)).unwrap();
        let expected = 1.0 + (1.0 - SCALAR_X) / (1.0 + SCALAR_X);
        assert!((bv.h[0].re - expected).abs() < 1e-10);
        assert!((expected - 2.291).abs() < 1e-3);
    }

    #[test]
    fn interior_zeta_rejected() {
        let lift = scalar_lift(0.0);
        assert!(lift.eval_boundary(C64::new(0.5, 0.0)).is_err());
    }

    #[test]
    fn verify_initial_disc_polynomial() {
        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 1.0]), diag(&[1.0, -1.0])]).unwrap();
        let v = cv(&[(0.7, 0.2), (-0.3, 0.5)]);
        let b = DVector::from_vec(vec![1.0, 0.3]);
        let lift = build_lift(&q, CVector::zeros(2), b, v, &SolveOptions::default()).unwrap();
        let rep = lift.verify(128).unwrap();
        assert!(rep.holomorphy_defect < 1e-13);
        assert!(rep.attachment_residual < 1e-12);
        assert!(rep.endpoint_residual < 1e-13);
    }

    #[test]
    fn verify_random_lifts() {
        let mut rng = sample::rng_from_seed(23);
        for _ in 0..5 {
            let lift = random_lift(4, 2, 0.04, &mut rng);
            let rep = lift.verify(256).unwrap();
            assert!(rep.attachment_residual <= 1e-10, "{:?}", rep);
            assert!(rep.holomorphy_defect <= 1e-9, "{:?}", rep);
            assert!(rep.endpoint_residual <= 1e-12, "{:?}", rep);
            assert!(rep.max_im_multiplier <= 1e-12, "{:?}", rep);
        }
    }

    #[test]
    fn verify_rejects_bad_sample_count() {
        let lift = scalar_lift(0.0);
        assert!(lift.verify(100).is_err());
        assert!(lift.verify(32).is_err());
    }

    #[test]
    fn orbit_zero_x() {
        let v = cv(&[(3.0, 0.0), (4.0, 0.0)]);
        let orbit = orbit_space(&CMatrix::zeros(2, 2), &v, 1e-8).unwrap();
        assert_eq!(orbit.dim, 1);
        assert!((orbit.basis[0].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn orbit_rotation_by_i() {
        let x = CMatrix::identity(2, 2) * C64::new(0.0, 1.0);
        let v = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        let orbit = orbit_space(&x, &v, 1e-8).unwrap();
        assert_eq!(orbit.dim, 2);
    }

    #[test]
    fn orbit_nilpotent() {
        let mut x = CMatrix::zeros(2, 2);
        x[(0, 1)] = C64::new(1.0, 0.0);
        let v = cv(&[(0.0, 0.0), (1.0, 0.0)]);
        let orbit = orbit_space(&x, &v, 1e-8).unwrap();
        assert_eq!(orbit.dim, 2);
    }

    #[test]
    fn orbit_rejects_zero_vector() {
        assert!(orbit_space(&CMatrix::zeros(2, 2), &CVector::zeros(2), 1e-8).is_err());
    }

    #[test]
    fn orbit_basis_is_invariant_under_x() {
        let mut rng = sample::rng_from_seed(31);
        for _ in 0..10 {
            let x = sample::random_hermitian(3, &mut rng).scale(0.3);
            let v = sample::random_unit_vector(3, &mut rng);
            let orbit = orbit_space(&x, &v, 1e-8).unwrap();
            for e in &orbit.basis {
                let xe = &x * e;
                let mut residual = xe.clone();
                for f in &orbit.basis {
                    let proj = real_inner(&xe, f);
                    residual -= f * C64::new(proj, 0.0);
                }
                assert!(residual.norm() <= 1e-10, "orbit not X-invariant");
            }
        }
    }

    #[test]
    fn minimality_diag_example() {
        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 1.0]), diag(&[1.0, -1.0])]).unwrap();
        let a = CVector::zeros(2);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let good = stationary_minimal(
            &q,
            &a,
            &b,
            &cv(&[(1.0, 0.0), (1.0, 0.0)]),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(good.minimal);
        let bad = stationary_minimal(
            &q,
            &a,
            &b,
            &cv(&[(1.0, 0.0), (0.0, 0.0)]),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(!bad.minimal);
    }

    #[test]
    fn minimality_scalar_always() {
        let q = QuadricModel::new(1, 1, vec![diag(&[1.0])]).unwrap();
        let rep = stationary_minimal(
            &q,
            &CVector::from_element(1, C64::new(0.1, 0.0)),
            &DVector::from_element(1, 1.0),
            &cv(&[(0.3, -0.2)]),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(rep.minimal);
    }

    #[test]
    fn defectivity_matches_minimality() {
        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 1.0]), diag(&[1.0, -1.0])]).unwrap();
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let bad = build_lift(
            &q,
            CVector::zeros(2),
            b.clone(),
            cv(&[(1.0, 0.0), (0.0, 0.0)]),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(defective(&bad).unwrap());
        let good = build_lift(
            &q,
            CVector::zeros(2),
            b,
            cv(&[(1.0, 0.0), (1.0, 0.0)]),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(!defective(&good).unwrap());
    }

    #[test]
    fn da_nondeg_reduces_to_d_matrix_at_zero_a() {
        let mut rng = sample::rng_from_seed(41);
        for _ in 0..10 {
            let mats: Vec<_> = (0..2)
                .map(|_| herm(sample::random_hermitian(3, &mut rng)))
                .collect();
            let q = QuadricModel::new(3, 2, mats).unwrap();
            let b = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let v = sample::random_unit_vector(3, &mut rng);
            if DiscParameters::new(&q, CVector::zeros(2), b.clone()).is_err() {
                continue;
            }
            let rep =
                da_nondegenerate(&q, &CVector::zeros(2), &b, &v, &SolveOptions::default()).unwrap();
            let (_, dmat) = crate::quadric::d_nondegenerate(&q, &b, &v, 1e-8).unwrap();
            let diff = (rep.certificate_matrix() - dmat).norm();
            assert!(diff < 1e-12, "certificates differ by {diff:.3e}");
        }
    }

    #[test]
    fn da_nondeg_scalar_oracle() {
        let q = QuadricModel::new(1, 1, vec![diag(&[1.0])]).unwrap();
        let rep = da_nondegenerate(
            &q,
            &CVector::from_element(1, C64::new(0.1, 0.0)),
            &DVector::from_element(1, 1.0),
            &cv(&[(1.0, 0.0)]),
            &SolveOptions::default(),
        )
        .unwrap();
        let expected = 1.25 / (1.0 - SCALAR_X * SCALAR_X);
        assert!((rep.certificate[0][0] - expected).abs() < 1e-6);
        assert!(rep.strongly);
    }

    #[test]
    fn da_nondeg_zero_v() {
        let q = QuadricModel::new(2, 1, vec![diag(&[1.0, 1.0])]).unwrap();
        let rep = da_nondegenerate(
            &q,
            &CVector::zeros(1),
            &DVector::from_element(1, 1.0),
            &CVector::zeros(2),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(!rep.nondegenerate);
        assert!(rep.certificate_matrix().norm() == 0.0);
    }

    #[test]
    fn da_implies_minimal_randomized() {
        let mut rng = sample::rng_from_seed(57);
        let mut checked = 0;
        while checked < 40 {
            let n = rng.gen_range(2..=4);
            let d = rng.gen_range(1..=3);
            let mats: Vec<_> = (0..d)
                .map(|_| herm(sample::random_hermitian(n, &mut rng)))
                .collect();
            let q = QuadricModel::new(n, d, mats).unwrap();
            let a = sample::random_complex_vector(d, &mut rng) * C64::new(0.03, 0.0);
            let b = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
            let v = sample::random_unit_vector(n, &mut rng);
            let Ok(params) = DiscParameters::new(&q, a.clone(), b.clone()) else {
                continue;
            };
            if !contraction_guard(&params).map(|g| g.ok).unwrap_or(false) {
                continue;
            }
            let Ok(rep) = da_nondegenerate(&q, &a, &b, &v, &SolveOptions::default()) else {
                continue;
            };
            if rep.nondegenerate {
                let min = stationary_minimal(&q, &a, &b, &v, &SolveOptions::default()).unwrap();
                assert!(min.minimal, "da-nondegenerate instance not minimal");
            }
            checked += 1;
        }
    }

    #[test]
    fn minimality_invariant_under_congruence() {
        let mut rng = sample::rng_from_seed(61);
        let mut checked = 0;
        while checked < 10 {
            let mats: Vec<_> = (0..2)
                .map(|_| herm(sample::random_hermitian(3, &mut rng)))
                .collect();
            let q = QuadricModel::new(3, 2, mats).unwrap();
            let a = sample::random_complex_vector(2, &mut rng) * C64::new(0.01, 0.0);
            let b = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let v = sample::random_unit_vector(3, &mut rng);
            let Ok(params) = DiscParameters::new(&q, a.clone(), b.clone()) else {
                continue;
            };
            if !contraction_guard(&params).map(|g| g.ok).unwrap_or(false) {
                continue;
            }
            let c = sample::random_conditioned_matrix(3, 6.0, &mut rng);
            let qc = q.congruence(&c).unwrap();
            let vc = c.clone().lu().solve(&v).unwrap();
            let base = stationary_minimal(&q, &a, &b, &v, &SolveOptions::default()).unwrap();
            let opts = SolveOptions {
                force: true,
                ..Default::default()
            };
            let Ok(trans) = stationary_minimal(&qc, &a, &b, &vc, &opts) else {
                continue;
            };
            assert_eq!(base.minimal, trans.minimal);
            checked += 1;
        }
    }
}
