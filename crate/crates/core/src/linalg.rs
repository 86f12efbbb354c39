//! Small dense complex matrix helpers shared by every module.

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Largest elementwise modulus of `a - b`.
///
/// Panics if the shapes differ.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "matrix shapes differ");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Elementwise squared moduli, `P[i][j] = |U[i][j]|^2`.
pub fn populations(u: &CMatrix) -> DMatrix<f64> {
    u.map(|z| z.norm_sqr())
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
