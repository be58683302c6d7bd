//! The quadratic matrix equation `P X^2 + A X + P^* = 0` in the `||X|| < 1`
//! regime, the Stein identities for the K_j matrices, and the derivative
//! systems used by the jet module.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{solve_operator_equation, spectral_norm, CMatrix, CVector, HermitianMatrix};
use crate::quadric::QuadricModel;

/// Disc parameters `(a, b)` with the derived combinations
/// `P = sum a_j A_j` and `Acoef = sum (b_j - 2 Re a_j) A_j`.
#[derive(Clone, Debug)]
pub struct DiscParameters {
    pub a: CVector,
    pub b: DVector<f64>,
    pub p: CMatrix,
    pub acoef: HermitianMatrix,
}

impl DiscParameters {
    pub fn new(q: &QuadricModel, a: CVector, b: DVector<f64>) -> Result<Self> {
        if a.len() != q.d() || b.len() != q.d() {
            return Err(Error::InvalidInput("a and b must have length d".into()));
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
            || b.iter().any(|x| !x.is_finite())
        {
            return Err(Error::InvalidInput("non-finite disc parameters".into()));
        }
        let p = q.combine_complex(&a);
        let coeffs = DVector::from_fn(q.d(), |j, _| b[j] - 2.0 * a[j].re);
        let acoef = HermitianMatrix::new(q.combine(&coeffs))?;
        if acoef.matrix().clone().lu().is_invertible() {
            Ok(Self { a, b, p, acoef })
        } else {
            Err(Error::Precondition(
                "coefficient matrix sum (b_j - 2 Re a_j) A_j is singular".into(),
            ))
        }
    }

    pub fn d(&self) -> usize {
        self.a.len()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GuardReport {
    pub r0: f64,
    pub q: f64,
    pub ok: bool,
    /// The inequality actually tested.
    pub inequality: &'static str,
}

const GUARD_INEQUALITY: &str =
    "r0 = 2*||Acoef^-1 P^*|| < 1 and q = ||Acoef^-1 P|| * 2*||Acoef^-1 P^*|| / (1 - r0) < 1";

/// Smallness surrogate for `a`: contraction bound for the quadratic
/// fixed-point map started at `-Acoef^-1 P^*`.
pub fn contraction_guard(params: &DiscParameters) -> Result<GuardReport> {
    let lu = params.acoef.matrix().clone().lu();
    let ainv_p = lu
        .solve(&params.p)
        .ok_or_else(|| Error::Precondition("singular coefficient matrix".into()))?;
    let ainv_ph = lu
        .solve(&params.p.adjoint())
        .ok_or_else(|| Error::Precondition("singular coefficient matrix".into()))?;
    let r0 = 2.0 * spectral_norm(&ainv_ph);
    let q = if r0 < 1.0 {
        spectral_norm(&ainv_p) * (2.0 * spectral_norm(&ainv_ph) / (1.0 - r0))
    } else {
        f64::INFINITY
    };
    Ok(GuardReport {
        r0,
        q,
        ok: r0 < 1.0 && q < 1.0,
        inequality: GUARD_INEQUALITY,
    })
}

#[derive(Clone, Debug)]
pub struct MatrixEquationSolution {
    pub x: CMatrix,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Spectral norm of X.
    pub norm_x: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub update_tol: f64,
    pub max_iterations: usize,
    /// Skip the contraction guard.
    pub force: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            update_tol: 1e-14,
            max_iterations: 500,
            force: false,
        }
    }
}

fn equation_residual(params: &DiscParameters, x: &CMatrix) -> CMatrix {
    &params.p * x * x + params.acoef.matrix() * x + params.p.adjoint()
}

fn residual_bound(params: &DiscParameters) -> f64 {
    1e-12 * (params.p.norm() + params.acoef.matrix().norm() + 1.0)
}

/// Solves `P X^2 + Acoef X + P^* = 0` for the contraction-regime solution.
///
/// Fixed-point iteration from `X0 = -Acoef^-1 P^*`, with a Newton fallback
/// on the flattened system if the fixed point stalls.
pub fn solve_x(params: &DiscParameters, opts: &SolveOptions) -> Result<MatrixEquationSolution> {
    let n = params.p.nrows();
    if !opts.force {
        let guard = contraction_guard(params)?;
        if !guard.ok {
            return Err(Error::Regime(format!(
                "contraction guard failed (r0={:.3e}, q={:.3e})",
                guard.r0, guard.q
            )));
        }
    }
    if params.p.norm() == 0.0 {
        return Ok(MatrixEquationSolution {
            x: CMatrix::zeros(n, n),
            residual_norm: 0.0,
            iterations: 0,
            norm_x: 0.0,
        });
    }

    let lu = params.acoef.matrix().clone().lu();
    let ph = params.p.adjoint();
    let mut x = lu
        .solve(&ph)
        .map(|m| -m)
        .ok_or_else(|| Error::Precondition("singular coefficient matrix".into()))?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let rhs = &params.p * &x * &x + &ph;
        let next = lu
            .solve(&rhs)
            .map(|m| -m)
            .ok_or_else(|| Error::Precondition("singular coefficient matrix".into()))?;
        let update = (&next - &x).norm();
        x = next;
        iterations += 1;
        if update < opts.update_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        // Newton fallback on the flattened system
        for _ in 0..50 {
            let f = equation_residual(params, &x);
            let step = solve_operator_equation(params.acoef.matrix(), &params.p, &x, &(-f))?;
            let update = step.n.norm();
            x += step.n;
            iterations += 1;
            if update < opts.update_tol {
                converged = true;
                break;
            }
        }
    }
    let residual_norm = equation_residual(params, &x).norm();
    if !converged || residual_norm > residual_bound(params) {
        return Err(Error::IterationLimit {
            iterations,
            residual: residual_norm,
        });
    }
    let norm_x = spectral_norm(&x);
    if norm_x >= 1.0 {
        return Err(Error::Regime(format!(
            "solution has spectral norm {norm_x:.6} >= 1"
        )));
    }
    Ok(MatrixEquationSolution {
        x,
        residual_norm,
        iterations,
        norm_x,
    })
}

/// Solves the Stein identity `K = A_j + X^* K X`; equals the series
/// `sum_r (X^*)^r A_j X^r` in the `||X|| < 1` regime.
pub fn stein_k(x: &CMatrix, a_j: &HermitianMatrix) -> Result<HermitianMatrix> {
    let nx = spectral_norm(x);
    if nx >= 1.0 {
        return Err(Error::Regime(format!(
            "Stein solve needs ||X|| < 1, got {nx:.6}"
        )));
    }
    let xh = x.adjoint();
    let mut k = a_j.matrix().clone();
    for _ in 0..100_000 {
        let next = a_j.matrix() + &xh * &k * x;
        let update = (&next - &k).norm();
        k = next;
        if update < 1e-14 {
            break;
        }
    }
    HermitianMatrix::new(k)
}

/// Derivative of the equation solution in `Re a_s`, from the linearized
/// system `Acoef N + P (N X + X N) = -A_s (I - X)^2`.
pub fn dx_dre_a(
    q: &QuadricModel,
    params: &DiscParameters,
    sol: &MatrixEquationSolution,
    s: usize,
) -> Result<CMatrix> {
    if s >= q.d() {
        return Err(Error::InvalidInput(format!("index s={s} out of range")));
    }
    let n = q.n();
    let eye = CMatrix::identity(n, n);
    let imx = &eye - &sol.x;
    let rhs = -(q.matrix(s).matrix() * &imx * &imx);
    let solved = solve_operator_equation(params.acoef.matrix(), &params.p, &sol.x, &rhs)?;
    Ok(solved.n)
}

/// Truncated series inverse of `phi(N) = N + P (N X + X N)` in the
/// normalized regime `Acoef = I`; kept as a small-`a` cross-check of the
/// direct operator solve.
pub fn phi_inverse_series(
    p: &CMatrix,
    x: &CMatrix,
    n_in: &CMatrix,
    order: usize,
) -> Result<CMatrix> {
    let t = 2.0 * spectral_norm(p) * spectral_norm(x);
    if t >= 1.0 {
        return Err(Error::Regime(format!(
            "series divergence estimate failed (2 ||P|| ||X|| = {t:.4})"
        )));
    }
    let tail = n_in.norm() * t.powi(order as i32 + 1) / (1.0 - t);
    if tail > 1e-12 * (1.0 + n_in.norm()) {
        return Err(Error::Regime(format!(
            "series tail estimate {tail:.3e} above 1e-12 at order {order}"
        )));
    }
    let mut result = n_in.clone();
    let mut term = n_in.clone();
    for _ in 1..=order {
        term = -(p * (&term * x + x * &term));
        result += &term;
        if term.norm() < 1e-16 * (1.0 + n_in.norm()) {
            break;
        }
    }
    Ok(result)
}
