//! Seeded random quadric generators with class guarantees.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statdisc::error::{Error, Result};
use statdisc::linalg::{CMatrix, HermitianMatrix, C64};
use statdisc::quadric::{self, QuadricModel};
use statdisc::sample;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadricKind {
    /// A pd combination is guaranteed: the first matrix dominates.
    Pseudoconvex,
    /// An invertible indefinite combination is enforced and the pd-search
    /// heuristic must come up empty.
    StronglyNondegIndefinite,
    /// A forced common kernel vector.
    LeviDegenerate,
}

impl std::str::FromStr for QuadricKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pseudoconvex" => Ok(Self::Pseudoconvex),
            "strongly-nondeg-indefinite" => Ok(Self::StronglyNondegIndefinite),
            "levi-degenerate" => Ok(Self::LeviDegenerate),
            other => Err(format!("unknown quadric kind '{other}'")),
        }
    }
}

const MAX_RETRIES: usize = 200;

/// Deterministic-in-seed generator; retries until the advertised class
/// certificate holds.
pub fn random_quadric(kind: QuadricKind, n: usize, d: usize, seed: u64) -> Result<QuadricModel> {
    if d > n * n {
        return Err(Error::InvalidInput(format!(
            "no generating tuple exists for d={d} > n^2={}",
            n * n
        )));
    }
    let mut rng = sample::rng_from_seed(seed);
    for _ in 0..MAX_RETRIES {
        let candidate = match kind {
            QuadricKind::Pseudoconvex => gen_pseudoconvex(n, d, &mut rng)?,
            QuadricKind::StronglyNondegIndefinite => gen_indefinite(n, d, &mut rng)?,
            QuadricKind::LeviDegenerate => gen_levi_degenerate(n, d, &mut rng)?,
        };
        if class_holds(kind, &candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::InvalidInput(format!(
        "could not generate a {kind:?} quadric at n={n}, d={d} within {MAX_RETRIES} retries"
    )))
}

fn class_holds(kind: QuadricKind, q: &QuadricModel) -> bool {
    match kind {
        QuadricKind::Pseudoconvex => {
            quadric::generating(q, 1e-8)
                .map(|(g, _)| g)
                .unwrap_or(false)
                && quadric::find_positive_combination(q, 400, 0).is_some()
        }
        QuadricKind::StronglyNondegIndefinite => {
            let e1 = DVector::from_fn(q.d(), |j, _| if j == 0 { 1.0 } else { 0.0 });
            let (nondeg, _) =
                quadric::strongly_nondegenerate_at(q, &e1, 1e-8).unwrap_or((false, 0.0));
            let (pc, _) = quadric::strongly_pseudoconvex_at(q, &e1, 1e-8).unwrap_or((true, 0.0));
            nondeg && !pc && quadric::find_positive_combination(q, 400, 0).is_none()
        }
        QuadricKind::LeviDegenerate => !quadric::levi_nondegenerate(q, 1e-8).unwrap_or(true),
    }
}

fn gen_pseudoconvex(n: usize, d: usize, rng: &mut impl Rng) -> Result<QuadricModel> {
    let mut mats = Vec::with_capacity(d);
    // A_1 = B^* B + I dominates the small random tail matrices
    let b = sample::random_complex_matrix(n, n, rng);
    let a1 = b.adjoint() * &b + CMatrix::identity(n, n);
    mats.push(HermitianMatrix::new(a1)?);
    for _ in 1..d {
        mats.push(HermitianMatrix::new(
            sample::random_hermitian(n, rng).scale(0.2),
        )?);
    }
    QuadricModel::new(n, d, mats)
}

fn gen_indefinite(n: usize, d: usize, rng: &mut impl Rng) -> Result<QuadricModel> {
    if n < 2 {
        return Err(Error::InvalidInput("indefinite class needs n >= 2".into()));
    }
    // A_1 = U^* D U with mixed-sign unit spectrum, so it is invertible and
    // indefinite and dominates the tail
    let u = sample::unitary_factor(n, rng);
    let signs = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| {
        C64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
    }));
    let a1 = u.adjoint() * signs * &u;
    let mut mats = vec![HermitianMatrix::new(a1)?];
    for _ in 1..d {
        mats.push(HermitianMatrix::new(
            sample::random_hermitian(n, rng).scale(0.1),
        )?);
    }
    QuadricModel::new(n, d, mats)
}

fn gen_levi_degenerate(n: usize, d: usize, rng: &mut impl Rng) -> Result<QuadricModel> {
    // project every matrix away from a common kernel vector
    let k = sample::random_unit_vector(n, rng);
    let proj = CMatrix::identity(n, n) - &k * k.adjoint();
    let mats = (0..d)
        .map(|_| HermitianMatrix::new(proj.adjoint() * sample::random_hermitian(n, rng) * &proj))
        .collect::<Result<Vec<_>>>()?;
    QuadricModel::new(n, d, mats)
}
