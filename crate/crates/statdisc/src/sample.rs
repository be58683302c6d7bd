//! Seeded random matrix and vector samples used by the experiment harness
//! and by randomized tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{CMatrix, CVector, C64};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent per-trial seed from a master seed (splitmix64 mix).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn random_complex_matrix(n: usize, m: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(n, m, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMatrix {
    let b = random_complex_matrix(n, n, rng);
    (&b + b.adjoint()).scale(0.5)
}

pub fn random_complex_vector(n: usize, rng: &mut impl Rng) -> CVector {
    CVector::from_fn(n, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_unit_vector(n: usize, rng: &mut impl Rng) -> CVector {
    loop {
        let v = random_complex_vector(n, rng);
        let norm = v.norm();
        if norm > 1e-3 {
            return v / C64::new(norm, 0.0);
        }
    }
}

/// Random invertible matrix with condition number at most `max_cond`,
/// built from a random SVD with controlled singular value spread.
pub fn random_conditioned_matrix(n: usize, max_cond: f64, rng: &mut impl Rng) -> CMatrix {
    let q1 = unitary_factor(n, rng);
    let q2 = unitary_factor(n, rng);
    let smax = 1.0;
    let smin = smax / max_cond;
    let diag = CMatrix::from_diagonal(&CVector::from_fn(n, |i, _| {
        if i == 0 {
            C64::new(smax, 0.0)
        } else if i == n - 1 && n > 1 {
            C64::new(smin, 0.0)
        } else {
            C64::new(rng.gen_range(smin..smax), 0.0)
        }
    }));
    q1 * diag * q2
}

/// Unitary factor from the QR decomposition of a random matrix.
pub fn unitary_factor(n: usize, rng: &mut impl Rng) -> CMatrix {
    let m = random_complex_matrix(n, n, rng);
    m.qr().q()
}
