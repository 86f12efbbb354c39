//! Two-state propagators and their powers.
//!
//! Any traceless two-state Hamiltonian
//!
//! ```text
//! H(t) = 1/2 [ -Δ(t)   Ω(t) ]
//!            [ Ω*(t)   Δ(t) ]
//! ```
//!
//! generates an SU(2) propagator `[[a, b], [-b*, a*]]` fixed by the two
//! Cayley-Klein parameters `(a, b)`. Its `N`-th power is again of that form,
//! with
//!
//! ```text
//! a_N = cos(Nθ) + i Im(a) sin(Nθ)/sin θ,   b_N = b sin(Nθ)/sin θ,   cos θ = Re a.
//! ```
//!
//! The bright pairs of a Morris-Shore system use the other convention,
//! diagonal `(0, Δ)`, whose propagator has determinant `e^{-iδ}` with
//! `δ = ∫Δ dt`. [`solve_ms_pair`] factors out `e^{-iδ/2}` so the remaining
//! "primed" pair is SU(2) again, and [`primed_power`] raises it to the `N`-th
//! power. The two Hamiltonian conventions live in separate code paths and are
//! never mixed.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::linalg::{C64, I};
use crate::pulses::{Envelope, PulseShape};

/// Norm mismatches above this are rejected; below it pairs are renormalized.
pub const NORM_REJECT_TOL: f64 = 1e-6;

/// Below this `|sin θ|` the power formula switches to its analytic limit.
pub const DEGENERATE_SIN: f64 = 1e-8;

pub type Matrix2c = Matrix2<C64>;

/// Cayley-Klein parameters of an SU(2) matrix `[[a, b], [-b*, a*]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CKPair {
    a: C64,
    b: C64,
}

impl CKPair {
    /// Builds a pair, renormalizing small norm errors and rejecting large ones.
    pub fn new(a: C64, b: C64) -> Result<Self> {
        if !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()) {
            return Err(Error::Numeric("Cayley-Klein parameters are not finite".into()));
        }
        let norm_sq = a.norm_sqr() + b.norm_sqr();
        if (norm_sq - 1.0).abs() > NORM_REJECT_TOL {
            return Err(Error::NotUnitNorm { norm_sq });
        }
        Ok(Self::normalized(a, b))
    }

    fn normalized(a: C64, b: C64) -> Self {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        CKPair { a: a / n, b: b / n }
    }

    pub fn identity() -> Self {
        CKPair { a: C64::new(1.0, 0.0), b: C64::new(0.0, 0.0) }
    }

    /// The real-`a` pair `(cos θ, -i sin θ)` of a resonant pulse with area `2θ`.
    pub fn resonant(theta: f64) -> Self {
        CKPair {
            a: C64::new(theta.cos(), 0.0),
            b: C64::new(0.0, -theta.sin()),
        }
    }

    pub fn a(&self) -> C64 {
        self.a
    }

    pub fn b(&self) -> C64 {
        self.b
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }

    pub fn matrix(&self) -> Matrix2c {
        Matrix2c::new(self.a, self.b, -self.b.conj(), self.a.conj())
    }

    /// Pair of the SU(2) product `self · rhs`.
    pub fn compose(&self, rhs: &CKPair) -> CKPair {
        let a = self.a * rhs.a - self.b * rhs.b.conj();
        let b = self.a * rhs.b + self.b * rhs.a.conj();
        CKPair::normalized(a, b)
    }
}

/// The angle `θ ∈ [0, π]` with `cos θ = Re a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerAngle {
    theta: f64,
    sin: f64,
}

impl PowerAngle {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `sin θ ≥ 0`, computed from `(Im a, |b|)` rather than from `θ`.
    pub fn sin(&self) -> f64 {
        self.sin
    }
}

/// `θ = arccos(Re a)`.
///
/// For a unit pair `sin θ = sqrt((Im a)² + |b|²)`, so the angle is taken from
/// `atan2` of that and `Re a`: identical to the clamped arccos but without
/// its loss of precision near `θ = 0` and `θ = π`.
pub fn power_angle(ck: &CKPair) -> PowerAngle {
    let sin = ck.a.im.hypot(ck.b.norm());
    let theta = sin.atan2(ck.a.re.clamp(-1.0, 1.0));
    PowerAngle { theta, sin }
}

/// `U^n` for the SU(2) matrix `U` of `ck`.
///
/// `n = 0` yields the identity.
pub fn su2_power(ck: &CKPair, n: u32) -> CKPair {
    match n {
        0 => return CKPair::identity(),
        1 => return *ck,
        _ => {}
    }
    let angle = power_angle(ck);
    let nf = f64::from(n);
    let cos_n = (nf * angle.theta).cos();
    if angle.sin < DEGENERATE_SIN {
        // sin(Nθ)/sin θ → N at θ = 0 and → N(-1)^(N+1) at θ = π
        let ratio = if ck.a.re >= 0.0 || n % 2 == 1 { nf } else { -nf };
        let a = C64::new(cos_n, ck.a.im * ratio);
        CKPair::normalized(a, ck.b * ratio)
    } else {
        let ratio = (nf * angle.theta).sin() / angle.sin;
        CKPair {
            a: C64::new(cos_n, ck.a.im * ratio),
            b: ck.b * ratio,
        }
    }
}

/// A bright-pair propagator `[[a, b], [-b* e^{-iδ}, a* e^{-iδ}]]` stored as
/// its SU(2) part `(a', b') = (a e^{iδ/2}, b e^{iδ/2})` and the accumulated
/// detuning `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MSPairSolution {
    pub ck: CKPair,
    pub delta: f64,
}

impl MSPairSolution {
    pub fn new(ck: CKPair, delta: f64) -> Self {
        MSPairSolution { ck, delta }
    }

    /// From the unprimed single-pass parameters `(a, b)`.
    pub fn from_unprimed(a: C64, b: C64, delta: f64) -> Result<Self> {
        let phase = C64::from_polar(1.0, delta / 2.0);
        Ok(MSPairSolution { ck: CKPair::new(a * phase, b * phase)?, delta })
    }

    /// `(a, b) = (a' e^{-iδ/2}, b' e^{-iδ/2})`.
    pub fn unprimed(&self) -> (C64, C64) {
        let phase = C64::from_polar(1.0, -self.delta / 2.0);
        (self.ck.a * phase, self.ck.b * phase)
    }

    /// `e^{-iδ/2}` times the SU(2) matrix of the primed pair.
    pub fn matrix(&self) -> Matrix2c {
        self.ck.matrix() * C64::from_polar(1.0, -self.delta / 2.0)
    }
}

/// The `N`-pass bright-pair parameters `(a'_N, b'_N)` and total phase `Nδ`.
///
/// The reassembled matrix `[[a'_N, b'_N], [-b'*_N e^{-iNδ}, a'*_N e^{-iNδ}]]`
/// is the `N`-th power of the single-pass pair matrix, with determinant
/// `e^{-iNδ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimedPower {
    pub ck: CKPair,
    pub total_phase: f64,
}

impl PrimedPower {
    pub fn matrix(&self) -> Matrix2c {
        let phase = C64::from_polar(1.0, -self.total_phase);
        let (a, b) = (self.ck.a, self.ck.b);
        Matrix2c::new(a, b, -b.conj() * phase, a.conj() * phase)
    }
}

pub fn primed_power(sol: &MSPairSolution, n: u32) -> PrimedPower {
    let total_phase = f64::from(n) * sol.delta;
    let powered = su2_power(&sol.ck, n);
    let phase = C64::from_polar(1.0, -total_phase / 2.0);
    PrimedPower {
        ck: CKPair { a: powered.a * phase, b: powered.b * phase },
        total_phase,
    }
}

/// Cayley-Klein parameters of one pulse under the traceless Hamiltonian.
pub fn solve_traceless(pulse: &PulseShape) -> Result<CKPair> {
    if pulse.is_resonant() && matches!(pulse.envelope(), Envelope::Rectangular) {
        let rabi = pulse.peak_rabi();
        let half_area = 0.5 * rabi.norm() * pulse.duration();
        let b = -I * C64::from_polar(1.0, rabi.arg()) * half_area.sin();
        return Ok(CKPair { a: C64::new(half_area.cos(), 0.0), b });
    }
    let u = integrate(pulse, |t| {
        let rabi = pulse.rabi_at(t);
        let det = pulse.detuning_at(t);
        Matrix2c::new(C64::new(-0.5 * det, 0.0), 0.5 * rabi, 0.5 * rabi.conj(), C64::new(0.5 * det, 0.0))
    })?;
    pair_from_first_row(u[(0, 0)], u[(0, 1)])
}

/// Bright pair with coupling `λ` under the `(0, Δ)` Hamiltonian
/// `[[0, λΩ(t)/2], [λΩ*(t)/2, Δ(t)]]`, factored into its SU(2) part and `δ`.
pub fn solve_ms_pair(lambda: f64, pulse: &PulseShape) -> Result<MSPairSolution> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Domain(format!("bright coupling must be finite and >= 0, got {lambda}")));
    }
    let delta = pulse.accumulated_detuning();
    let u = integrate(pulse, |t| {
        let coupling = 0.5 * lambda * pulse.rabi_at(t);
        Matrix2c::new(C64::new(0.0, 0.0), coupling, coupling.conj(), C64::new(pulse.detuning_at(t), 0.0))
    })?;
    let phase = C64::from_polar(1.0, delta / 2.0);
    Ok(MSPairSolution {
        ck: pair_from_first_row(u[(0, 0)] * phase, u[(0, 1)] * phase)?,
        delta,
    })
}

fn pair_from_first_row(a: C64, b: C64) -> Result<CKPair> {
    CKPair::new(a, b).map_err(|e| match e {
        Error::NotUnitNorm { norm_sq } => Error::Numeric(format!(
            "integrator lost unitarity (|a|^2 + |b|^2 = {norm_sq}); increase the grid steps"
        )),
        other => other,
    })
}

/// Classical RK4 for `i dU/dt = H(t) U`, `U(0) = 1`, on the pulse grid.
fn integrate(pulse: &PulseShape, hamiltonian: impl Fn(f64) -> Matrix2c) -> Result<Matrix2c> {
    let steps = pulse.steps();
    let duration = pulse.duration();
    let h = duration / steps as f64;
    let minus_i = -I;
    let deriv = |t: f64, u: &Matrix2c| hamiltonian(t) * u * minus_i;
    let mut u = Matrix2c::identity();
    for i in 0..steps {
        let t = i as f64 * duration / steps as f64;
        let k1 = deriv(t, &u);
        let k2 = deriv(t + 0.5 * h, &(u + k1 * C64::from(0.5 * h)));
        let k3 = deriv(t + 0.5 * h, &(u + k2 * C64::from(0.5 * h)));
        let k4 = deriv(t + h, &(u + k3 * C64::from(h)));
        u += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
    }
    if u.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numeric("two-state integration produced non-finite values".into()));
    }
    Ok(u)
}
