//! Reference helpers shared by the integration tests. None of these call
//! the closed-form propagator code.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use pulsetrain::twostate::{CKPair, Matrix2c};
use pulsetrain::{CMatrix, C64};
use rand::Rng;
use rand_distr::StandardNormal;

/// Uniformly distributed SU(2) pair from four normal deviates.
pub fn random_pair(rng: &mut impl Rng) -> CKPair {
    let v: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    CKPair::new(C64::new(v[0] / n, v[1] / n), C64::new(v[2] / n, v[3] / n)).unwrap()
}

/// A pair with `|sin θ|` of order `scale`, close to `+1` or `-1`.
pub fn near_degenerate_pair(rng: &mut impl Rng, scale: f64) -> CKPair {
    let s: f64 = rng.random_range(0.05..1.0) * scale;
    let mix: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let a = C64::new(sign * (1.0 - s * s).sqrt(), s * mix.cos());
    let b = C64::from_polar(s * mix.sin().abs(), phase);
    CKPair::new(a, b).unwrap()
}

pub fn random_complex(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    DMatrix::from_fn(rows, cols, |_, _| random_complex(rng))
}

pub fn naive_power_2x2(m: &Matrix2c, n: u32) -> Matrix2c {
    let mut acc = Matrix2c::identity();
    for _ in 0..n {
        acc *= m;
    }
    acc
}

pub fn naive_power(m: &CMatrix, n: u32) -> CMatrix {
    let mut acc = CMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..n {
        acc = &acc * m;
    }
    acc
}

pub fn max_diff_2x2(x: &Matrix2c, y: &Matrix2c) -> f64 {
    (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_diff(x: &CMatrix, y: &CMatrix) -> f64 {
    assert_eq!(x.shape(), y.shape());
    (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `exp(-i H t)` through the Hermitian eigendecomposition.
pub fn spectral_exp(h: &CMatrix, t: f64) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let phases = CMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// Whether the eigenvalues of `u` are the multiset `expected`, compared
/// through the power sums `tr(U^p) = Σ λ^p`, `p = 1..=dim`.
pub fn eigenvalues_match(u: &CMatrix, expected: &[C64], tol: f64) -> bool {
    let mut power = CMatrix::identity(u.nrows(), u.ncols());
    (1..=expected.len() as i32).all(|p| {
        power = &power * u;
        let sum: C64 = expected.iter().map(|z| z.powi(p)).sum();
        (power.trace() - sum).norm() <= tol
    })
}
