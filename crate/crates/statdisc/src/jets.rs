//! The 1-jet map at `zeta = 1`, its analytic d x d Jacobian block, the
//! finite-difference cross-checks, and the local-diffeomorphism verdict
//! with its definiteness certificate.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{definiteness_real, spectral_norm, CMatrix, CVector, Definiteness, C64};
use crate::matrix_eq::{
    contraction_guard, dx_dre_a, solve_x, stein_k, DiscParameters, SolveOptions,
};
use crate::quadric::QuadricModel;

/// Relative singular-value tolerance deciding block invertibility.
pub const DIFFEO_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct JetValue {
    pub v: Vec<[f64; 2]>,
    pub m: Vec<f64>,
    pub im_a: Vec<f64>,
}

/// The 1-jet map `(a, V) -> (V, m, Im a)` with
/// `m_j = V^* (I - X^*) K_j (I - X) V`.
pub fn jet_map(
    q: &QuadricModel,
    a: &CVector,
    b: &DVector<f64>,
    v: &CVector,
    opts: &SolveOptions,
) -> Result<JetValue> {
    let params = DiscParameters::new(q, a.clone(), b.clone())?;
    let sol = solve_x(&params, opts)?;
    let m = jet_m_block(q, &sol.x, v)?;
    Ok(JetValue {
        v: v.iter().map(|z| [z.re, z.im]).collect(),
        m: m.iter().copied().collect(),
        im_a: a.iter().map(|z| z.im).collect(),
    })
}

fn jet_m_block(q: &QuadricModel, x: &CMatrix, v: &CVector) -> Result<DVector<f64>> {
    let eye = CMatrix::identity(q.n(), q.n());
    let right = (&eye - x) * v;
    let mut m = DVector::zeros(q.d());
    for j in 0..q.d() {
        let k = stein_k(x, q.matrix(j))?;
        let val = right.dotc(&(k.matrix() * &right));
        if val.im.abs() > 1e-12 * (1.0 + val.re.abs()) {
            return Err(Error::Regime(format!(
                "jet component {j} has imaginary part {:.3e}",
                val.im
            )));
        }
        m[j] = val.re;
    }
    Ok(m)
}

/// The analytic block `(d m_j / d Re a_s)_{j,s}`, entry
/// `-2 Re sum_r V^* (I - X^*)^2 (X^*)^r K_j X_s X^r V`, summed with a
/// geometric tail bound below 1e-13.
pub fn jacobian_block_analytic(
    q: &QuadricModel,
    a: &CVector,
    b: &DVector<f64>,
    v: &CVector,
    opts: &SolveOptions,
) -> Result<DMatrix<f64>> {
    let params = DiscParameters::new(q, a.clone(), b.clone())?;
    let sol = solve_x(&params, opts)?;
    let d = q.d();
    let n = q.n();
    let eye = CMatrix::identity(n, n);
    let imx = &eye - &sol.x;
    let u0 = &imx * &imx * v;
    let norm_x = sol.norm_x;
    let geo = 1.0 - norm_x * norm_x;

    let ks: Vec<_> = (0..d)
        .map(|j| stein_k(&sol.x, q.matrix(j)))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<_> = (0..d)
        .map(|s| dx_dre_a(q, &params, &sol, s))
        .collect::<Result<Vec<_>>>()?;
    let max_k = ks
        .iter()
        .map(|k| spectral_norm(k.matrix()))
        .fold(0.0f64, f64::max);
    let max_xs = xs.iter().map(spectral_norm).fold(0.0f64, f64::max);
    let scale = u0.norm() * v.norm() * max_k * max_xs;

    let mut block = DMatrix::zeros(d, d);
    let mut u = u0;
    let mut w = v.clone();
    for r in 0..10_000 {
        for (s, xsm) in xs.iter().enumerate() {
            let xsw = xsm * &w;
            for (j, kj) in ks.iter().enumerate() {
                let term = u.dotc(&(kj.matrix() * &xsw));
                block[(j, s)] -= 2.0 * term.re;
            }
        }
        let tail = if geo > 0.0 {
            scale * norm_x.powi(2 * (r + 1)) / geo
        } else {
            f64::INFINITY
        };
        if tail < 1e-13 {
            break;
        }
        u = &sol.x * u;
        w = &sol.x * w;
    }
    Ok(block)
}

fn default_step(a: &CVector) -> f64 {
    1e-5 * a.norm().max(1.0)
}

/// Central-difference approximation of the analytic block; the oracle for
/// it. The guard is re-checked at every perturbed point.
pub fn jacobian_block_fd(
    q: &QuadricModel,
    a: &CVector,
    b: &DVector<f64>,
    v: &CVector,
    step: Option<f64>,
    richardson: bool,
    opts: &SolveOptions,
) -> Result<DMatrix<f64>> {
    let h = step.unwrap_or_else(|| default_step(a));
    let d = q.d();
    let m_at = |a_pt: &CVector| -> Result<DVector<f64>> {
        let params = DiscParameters::new(q, a_pt.clone(), b.clone())?;
        if !opts.force {
            let guard = contraction_guard(&params)?;
            if !guard.ok {
                return Err(Error::StepTooLarge(format!(
                    "guard fails at perturbed point (r0={:.3e}, q={:.3e})",
                    guard.r0, guard.q
                )));
            }
        }
        let sol = solve_x(&params, opts)?;
        jet_m_block(q, &sol.x, v)
    };
    let diff_at = |h: f64| -> Result<DMatrix<f64>> {
        let mut block = DMatrix::zeros(d, d);
        for s in 0..d {
            let mut plus = a.clone();
            plus[s] += C64::new(h, 0.0);
            let mut minus = a.clone();
            minus[s] -= C64::new(h, 0.0);
            let col = (m_at(&plus)? - m_at(&minus)?).unscale(2.0 * h);
            block.set_column(s, &col);
        }
        Ok(block)
    };
    let coarse = diff_at(h)?;
    if richardson {
        let fine = diff_at(h / 2.0)?;
        Ok((fine.scale(4.0) - coarse).unscale(3.0))
    } else {
        Ok(coarse)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct JetReport {
    pub analytic_block: Vec<Vec<f64>>,
    pub fd_block: Vec<Vec<f64>>,
    pub block_rel_error: f64,
    pub full_fd_jacobian: Vec<Vec<f64>>,
    pub structure_ok: bool,
    pub diffeo: bool,
    /// smin / smax of the analytic block.
    pub singular_margin: f64,
    pub condition: f64,
    pub definiteness_of_sym_part: Definiteness,
    pub step: f64,
    pub tolerance: f64,
}

impl JetReport {
    pub fn analytic_block_matrix(&self) -> DMatrix<f64> {
        let d = self.analytic_block.len();
        DMatrix::from_fn(d, d, |i, j| self.analytic_block[i][j])
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Full finite-difference Jacobian of `(Re V, Im V, m, Im a)` with respect
/// to `(Re a, Im a, Re V, Im V)`.
fn full_fd_jacobian(
    q: &QuadricModel,
    a: &CVector,
    b: &DVector<f64>,
    v: &CVector,
    h: f64,
    opts: &SolveOptions,
) -> Result<DMatrix<f64>> {
    let n = q.n();
    let d = q.d();
    let out_dim = 2 * n + 2 * d;
    let in_dim = 2 * d + 2 * n;
    let eval = |a_pt: &CVector, v_pt: &CVector| -> Result<DVector<f64>> {
        let jet = jet_map(q, a_pt, b, v_pt, opts)?;
        let mut out = DVector::zeros(out_dim);
        for i in 0..n {
            out[i] = jet.v[i][0];
            out[n + i] = jet.v[i][1];
        }
        for j in 0..d {
            out[2 * n + j] = jet.m[j];
            out[2 * n + d + j] = jet.im_a[j];
        }
        Ok(out)
    };
    let mut jac = DMatrix::zeros(out_dim, in_dim);
    for c in 0..in_dim {
        let mut ap = a.clone();
        let mut am = a.clone();
        let mut vp = v.clone();
        let mut vm = v.clone();
        if c < d {
            ap[c] += C64::new(h, 0.0);
            am[c] -= C64::new(h, 0.0);
        } else if c < 2 * d {
            ap[c - d] += C64::new(0.0, h);
            am[c - d] -= C64::new(0.0, h);
        } else if c < 2 * d + n {
            vp[c - 2 * d] += C64::new(h, 0.0);
            vm[c - 2 * d] -= C64::new(h, 0.0);
        } else {
            vp[c - 2 * d - n] += C64::new(0.0, h);
            vm[c - 2 * d - n] -= C64::new(0.0, h);
        }
        let col = (eval(&ap, &vp)? - eval(&am, &vm)?).unscale(2.0 * h);
        jac.set_column(c, &col);
    }
    Ok(jac)
}

/// Decides the local-diffeomorphism question on the analytic block and
/// assembles the finite-difference diagnostics around it.
pub fn local_diffeo_verdict(
    q: &QuadricModel,
    a: &CVector,
    b: &DVector<f64>,
    v: &CVector,
    opts: &SolveOptions,
) -> Result<JetReport> {
    local_diffeo_verdict_with_tol(q, a, b, v, opts, DIFFEO_TOL)
}

pub fn local_diffeo_verdict_with_tol(
    q: &QuadricModel,
    a: &CVector,
    b: &DVector<f64>,
    v: &CVector,
    opts: &SolveOptions,
    tol: f64,
) -> Result<JetReport> {
    let n = q.n();
    let d = q.d();
    let analytic = jacobian_block_analytic(q, a, b, v, opts)?;
    let h = default_step(a);
    let fd = jacobian_block_fd(q, a, b, v, Some(h), false, opts)?;
    let block_rel_error = (&analytic - &fd).norm() / fd.norm().max(1e-300);

    let sv = analytic.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |acc, &x| acc.max(x));
    let smin = sv.iter().fold(f64::INFINITY, |acc, &x| acc.min(x));
    let margin = if smax > 0.0 { smin / smax } else { 0.0 };
    let diffeo = margin > tol;
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };

    let full = full_fd_jacobian(q, a, b, v, h, opts)?;
    // structural blocks of the jet map: V passes through untouched and
    // Im a is a projection of the input
    let dv_da = full.view((0, 0), (2 * n, 2 * d)).norm();
    let dima_dv = full.view((2 * n + d, 2 * d), (d, 2 * n)).norm();
    let dima_dima = (full.view((2 * n + d, d), (d, d)) - DMatrix::identity(d, d)).norm();
    let structure_ok = dv_da <= 1e-8 && dima_dv <= 1e-8 && dima_dima <= 1e-8;

    let sym = (&analytic + analytic.transpose()).scale(0.5);
    let definiteness_of_sym_part = definiteness_real(&sym, tol)?;

    Ok(JetReport {
        analytic_block: rows(&analytic),
        fd_block: rows(&fd),
        block_rel_error,
        full_fd_jacobian: rows(&full),
        structure_ok,
        diffeo,
        singular_margin: margin,
        condition,
        definiteness_of_sym_part,
        step: h,
        tolerance: tol,
    })
}
