//! Brute-force references: direct integration of the Schrödinger equation,
//! repeated multiplication, and unitarity diagnostics.
//!
//! Nothing here uses the closed-form propagators, so agreement between the
//! two is a meaningful check of either.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Integration steps used when verifying a closed-form result.
pub const DEFAULT_ORACLE_STEPS: usize = 8192;

/// Fewest steps `integrate` accepts.
pub const MIN_STEPS: usize = 16;

/// Largest tolerated `max|H - H†|` of an evaluated Hamiltonian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A Hamiltonian given as a function of time.
pub struct TimeDependentHamiltonian<'a> {
    dimension: usize,
    evaluator: Box<dyn Fn(f64) -> CMatrix + 'a>,
}

impl<'a> TimeDependentHamiltonian<'a> {
    pub fn new(dimension: usize, evaluator: impl Fn(f64) -> CMatrix + 'a) -> Self {
        TimeDependentHamiltonian { dimension, evaluator: Box::new(evaluator) }
    }

    pub fn constant(h: CMatrix) -> TimeDependentHamiltonian<'static> {
        TimeDependentHamiltonian::new(h.nrows(), move |_| h.clone())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Evaluates `H(t)`, checking its shape and hermiticity.
    pub fn at(&self, t: f64) -> Result<CMatrix> {
        let h = (self.evaluator)(t);
        if h.shape() != (self.dimension, self.dimension) {
            return Err(Error::Domain(format!(
                "Hamiltonian at t={t} is {}x{}, expected {d}x{d}",
                h.nrows(),
                h.ncols(),
                d = self.dimension
            )));
        }
        let skew = (&h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !(skew <= HERMITIAN_TOL) {
            return Err(Error::Domain(format!("Hamiltonian at t={t} is not Hermitian (defect {skew:e})")));
        }
        Ok(h)
    }
}

/// `U(T, 0)` from classical RK4 on `i dU/dt = H(t) U`, `U(0) = 1`.
pub fn integrate(h: &TimeDependentHamiltonian, duration: f64, steps: usize) -> Result<CMatrix> {
    if steps < MIN_STEPS {
        return Err(Error::Domain(format!("oracle needs at least {MIN_STEPS} steps, got {steps}")));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::Domain(format!("duration must be positive, got {duration}")));
    }
    let d = h.dimension();
    let dt = duration / steps as f64;
    let minus_i = C64::new(0.0, -1.0);
    let mut u = CMatrix::identity(d, d);
    for i in 0..steps {
        let t = i as f64 * duration / steps as f64;
        let t_mid = t + 0.5 * dt;
        let t_end = (i + 1) as f64 * duration / steps as f64;
        let h_start = h.at(t)?;
        let h_mid = h.at(t_mid)?;
        let h_end = h.at(t_end)?;
        let k1 = &h_start * &u * minus_i;
        let k2 = &h_mid * (&u + &k1 * C64::from(0.5 * dt)) * minus_i;
        let k3 = &h_mid * (&u + &k2 * C64::from(0.5 * dt)) * minus_i;
        let k4 = &h_end * (&u + &k3 * C64::from(dt)) * minus_i;
        u += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(dt / 6.0);
        if u.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Numeric(format!("oracle integration diverged at t={t}")));
        }
    }
    Ok(u)
}

/// `U^n` by binary exponentiation. `n = 0` gives the identity.
pub fn matrix_power(u: &CMatrix, n: u32) -> CMatrix {
    assert!(u.is_square(), "matrix_power needs a square matrix");
    let mut result = CMatrix::identity(u.nrows(), u.ncols());
    let mut base = u.clone();
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

/// `max|U†U - I|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let gram = u.adjoint() * u;
    let id = CMatrix::identity(u.ncols(), u.ncols());
    (gram - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
