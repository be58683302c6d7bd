//! Search for parameters making a strongly pseudoconvex quadric
//! stationary minimal: a homogeneous-orbit stage, a lambda-scaling scan,
//! and a random fallback.

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;
use statdisc::discs::stationary_minimal_with;
use statdisc::error::{Error, Result};
use statdisc::linalg::{CVector, C64, DEFAULT_RANK_TOL};
use statdisc::matrix_eq::{contraction_guard, solve_x, DiscParameters, SolveOptions};
use statdisc::quadric::{normalize, strongly_pseudoconvex_at, QuadricModel};
use statdisc::sample;

#[derive(Clone, Debug, Serialize)]
pub struct SearchResult {
    pub a: Vec<[f64; 2]>,
    pub v: Vec<[f64; 2]>,
    /// Smallest singular value of the realified minimality system.
    pub margin: f64,
    pub evaluations: usize,
    pub stage: u8,
}

impl SearchResult {
    pub fn a_vector(&self) -> CVector {
        CVector::from_iterator(self.a.len(), self.a.iter().map(|p| C64::new(p[0], p[1])))
    }

    pub fn v_vector(&self) -> CVector {
        CVector::from_iterator(self.v.len(), self.v.iter().map(|p| C64::new(p[0], p[1])))
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SearchStats {
    pub evaluations: usize,
    pub stage1_rejections: usize,
    pub lambda_scans: usize,
    pub fallback_draws: usize,
}

const LAMBDA_GRID: usize = 32;
const A0_RADIUS: f64 = 0.02;

fn lambda_grid() -> Vec<f64> {
    // 32 logarithmically spaced values in (1e-3, 1]
    (0..LAMBDA_GRID)
        .map(|i| 10f64.powf(-3.0 * (1.0 - i as f64 / (LAMBDA_GRID - 1) as f64)))
        .collect()
}

/// Looks for `(a, V)` with the quadric stationary minimal at
/// `(a, b - a - conj(a), V)`. Returns the witness in the original
/// coordinates, re-verified there, or `None` once the budget is spent.
pub fn search_stationary_minimal(
    q: &QuadricModel,
    b: &DVector<f64>,
    budget: usize,
    seed: u64,
) -> Result<(Option<SearchResult>, SearchStats)> {
    let (pc, _) = strongly_pseudoconvex_at(q, b, DEFAULT_RANK_TOL)?;
    if !pc {
        return Err(Error::Precondition(
            "search needs a strongly pseudoconvex combination at b".into(),
        ));
    }
    let (qn, cmat) = normalize(q, b)?;
    let mut rng = sample::rng_from_seed(seed);
    let mut stats = SearchStats::default();
    let opts = SolveOptions::default();
    let grid = lambda_grid();

    let certify =
        |a: &CVector, v_norm: &CVector, stats: &SearchStats, stage: u8| -> Option<SearchResult> {
            // transport back and re-verify on the original quadric
            let v_orig = &cmat * v_norm;
            let params = DiscParameters::new(q, a.clone(), b.clone()).ok()?;
            let sol = solve_x(&params, &opts).ok()?;
            let rep = stationary_minimal_with(q, &sol.x, &v_orig, DEFAULT_RANK_TOL).ok()?;
            if !rep.minimal {
                return None;
            }
            Some(SearchResult {
                a: a.iter().map(|z| [z.re, z.im]).collect(),
                v: v_orig.iter().map(|z| [z.re, z.im]).collect(),
                margin: rep.smallest_singular_value,
                evaluations: stats.evaluations,
                stage,
            })
        };

    while stats.evaluations < budget {
        // stage 1: real a0 and unit V with the A_j independent on the
        // homogeneous orbit span{V, PV, P^2 V, ...}
        let a0 = CVector::from_fn(q.d(), |_, _| {
            C64::new(rng.gen_range(-A0_RADIUS..A0_RADIUS), 0.0)
        });
        let v = sample::random_unit_vector(qn.n(), &mut rng);
        let p = qn.combine_complex(&a0);
        stats.evaluations += 1;
        let hom = stationary_minimal_with(&qn, &p, &v, DEFAULT_RANK_TOL)?;
        if !hom.minimal {
            stats.stage1_rejections += 1;
            // stage 3 fallback interleaved: fully random complex a
            if stats.evaluations < budget {
                let a = sample::random_complex_vector(q.d(), &mut rng)
                    * C64::new(rng.gen_range(0.0..A0_RADIUS), 0.0);
                stats.evaluations += 1;
                stats.fallback_draws += 1;
                if let Ok(params) = DiscParameters::new(&qn, a.clone(), b.clone()) {
                    if contraction_guard(&params).map(|g| g.ok).unwrap_or(false) {
                        if let Ok(sol) = solve_x(&params, &opts) {
                            let rep = stationary_minimal_with(&qn, &sol.x, &v, DEFAULT_RANK_TOL)?;
                            if rep.minimal {
                                if let Some(res) = certify(&a, &v, &stats, 3) {
                                    return Ok((Some(res), stats));
                                }
                            }
                        }
                    }
                }
            }
            continue;
        }
        // stage 2: lambda scan over the grid
        stats.lambda_scans += 1;
        for &lambda in &grid {
            if stats.evaluations >= budget {
                break;
            }
            let a = &a0 * C64::new(lambda, 0.0);
            stats.evaluations += 1;
            let Ok(params) = DiscParameters::new(&qn, a.clone(), b.clone()) else {
                continue;
            };
            if !contraction_guard(&params).map(|g| g.ok).unwrap_or(false) {
                continue;
            }
            let Ok(sol) = solve_x(&params, &opts) else {
                continue;
            };
            let rep = stationary_minimal_with(&qn, &sol.x, &v, DEFAULT_RANK_TOL)?;
            if rep.minimal {
                if let Some(res) = certify(&a, &v, &stats, 2) {
                    return Ok((Some(res), stats));
                }
            }
        }
    }
    Ok((None, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statdisc::discs::stationary_minimal;
    use statdisc::linalg::{CMatrix, HermitianMatrix};

    fn diag(vals: &[f64]) -> HermitianMatrix {
        HermitianMatrix::new(CMatrix::from_diagonal(&CVector::from_iterator(
            vals.len(),
            vals.iter().map(|&x| C64::new(x, 0.0)),
        )))
        .unwrap()
    }

    #[test]
    fn scalar_succeeds_immediately() {
        let q = QuadricModel::new(1, 1, vec![diag(&[1.0])]).unwrap();
        let b = DVector::from_element(1, 1.0);
        let (res, _) = search_stationary_minimal(&q, &b, 100, 1).unwrap();
        assert!(res.is_some());
    }

    #[test]
    fn diag_pair_succeeds_and_reverifies() {
        let q = QuadricModel::new(2, 2, vec![diag(&[1.0, 1.0]), diag(&[1.0, -1.0])]).unwrap();
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let (res, _) = search_stationary_minimal(&q, &b, 2000, 5).unwrap();
        let res = res.expect("search should find a witness");
        let rep = stationary_minimal(
            &q,
            &res.a_vector(),
            &b,
            &res.v_vector(),
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(rep.minimal);
    }

    #[test]
    fn zero_budget_absent() {
        let q = QuadricModel::new(1, 1, vec![diag(&[1.0])]).unwrap();
        let b = DVector::from_element(1, 1.0);
        let (res, stats) = search_stationary_minimal(&q, &b, 0, 1).unwrap();
        assert!(res.is_none());
        assert_eq!(stats.evaluations, 0);
    }

    #[test]
    fn non_pseudoconvex_rejected() {
        let q = QuadricModel::new(2, 1, vec![diag(&[1.0, -1.0])]).unwrap();
        let b = DVector::from_element(1, 1.0);
        assert!(search_stationary_minimal(&q, &b, 10, 1).is_err());
    }
}
