//! Multistate systems with the Majorana SU(2) symmetry.
//!
//! An `M`-state chain whose Hamiltonian is the spin-`j` representation
//! (`M = 2j + 1`) of a two-state Hamiltonian evolves as the corresponding
//! Wigner rotation of that two-state problem. Every propagator element is a
//! polynomial in the Cayley-Klein pair `(a, b)`, so the `N`-pass propagator is
//! the same polynomial evaluated at `(a_N, b_N)`.
//!
//! States are numbered from 1 to `M` in the public API.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::pulses::PulseShape;
use crate::twostate::{power_angle, solve_traceless, su2_power, CKPair, DEGENERATE_SIN};

/// Largest supported number of states.
pub const MAX_STATES: usize = 30;

/// Below this `|u|` the diagonalization gauge fixes `v` real instead of `u`.
const GAUGE_SWITCH: f64 = 1e-12;

const FACTORIALS: [f64; MAX_STATES] = factorials();

const fn factorials() -> [f64; MAX_STATES] {
    let mut out = [0.0; MAX_STATES];
    let mut acc: u128 = 1;
    let mut n = 0;
    while n < MAX_STATES {
        if n > 0 {
            acc *= n as u128;
        }
        out[n] = acc as f64;
        n += 1;
    }
    out
}

fn check_states(m: usize) -> Result<()> {
    if !(2..=MAX_STATES).contains(&m) {
        return Err(Error::Domain(format!(
            "number of states must be between 2 and {MAX_STATES}, got {m}"
        )));
    }
    Ok(())
}

fn check_passes(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("number of passes must be positive".into()));
    }
    Ok(())
}

/// An `M`-state Majorana chain driven by one pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct MajoranaSystem {
    m: usize,
    pulse: PulseShape,
}

impl MajoranaSystem {
    pub fn new(m: usize, pulse: PulseShape) -> Result<Self> {
        check_states(m)?;
        Ok(MajoranaSystem { m, pulse })
    }

    pub fn states(&self) -> usize {
        self.m
    }

    pub fn pulse(&self) -> &PulseShape {
        &self.pulse
    }

    pub fn hamiltonian_at(&self, t: f64) -> CMatrix {
        build_hamiltonian(self.m, self.pulse.rabi_at(t), self.pulse.detuning_at(t))
            .expect("state count validated at construction")
    }

    /// Cayley-Klein pair of the underlying two-state problem.
    pub fn ck(&self) -> Result<CKPair> {
        solve_traceless(&self.pulse)
    }

    pub fn propagator(&self) -> Result<MajoranaPropagator> {
        propagator_from_ck(&self.ck()?, self.m)
    }

    pub fn npass(&self, n: u32) -> Result<MajoranaPropagator> {
        npass_propagator(&self.ck()?, self.m, n)
    }
}

/// An `M x M` propagator generated by a single Cayley-Klein pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MajoranaPropagator {
    m: usize,
    matrix: CMatrix,
    source_ck: CKPair,
}

impl MajoranaPropagator {
    pub fn states(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn source_ck(&self) -> &CKPair {
        &self.source_ck
    }

    /// Element `U_kl` with 1-based indices.
    pub fn element(&self, k: usize, l: usize) -> Result<C64> {
        check_index(self.m, k, l)?;
        Ok(self.matrix[(k - 1, l - 1)])
    }
}

/// Parameters `(u, v, θ)` of the eigenvector matrix of `U_2`.
///
/// `a = |u|² e^{-iθ} + |v|² e^{iθ}` and `b = 2i u v sin θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagFactors {
    pub u: C64,
    pub v: C64,
    pub theta: f64,
}

/// Tridiagonal Hamiltonian `H_kk = (k - (M+1)/2) Δ`,
/// `H_{k,k+1} = H*_{k+1,k} = √(k(M-k)) Ω / 2`.
///
/// The coupling sits above the diagonal, as in the two-state Hamiltonian
/// `[[-Δ/2, Ω/2], [Ω*/2, Δ/2]]` that this reduces to at `M = 2`.
pub fn build_hamiltonian(m: usize, rabi: C64, detuning: f64) -> Result<CMatrix> {
    check_states(m)?;
    let mut h = CMatrix::zeros(m, m);
    let center = (m as f64 + 1.0) / 2.0;
    for k in 1..=m {
        h[(k - 1, k - 1)] = C64::new((k as f64 - center) * detuning, 0.0);
    }
    for k in 1..m {
        let c = 0.5 * ((k * (m - k)) as f64).sqrt();
        h[(k - 1, k)] = rabi * c;
        h[(k, k - 1)] = rabi.conj() * c;
    }
    Ok(h)
}

fn check_index(m: usize, k: usize, l: usize) -> Result<()> {
    if k == 0 || l == 0 || k > m || l > m {
        return Err(Error::Domain(format!("indices ({k}, {l}) outside 1..={m}")));
    }
    Ok(())
}

/// `U_kl` of the `M`-state propagator generated by `ck`.
///
/// Sums over every `r` for which all factorial arguments are nonnegative,
/// `max(0, l-k) ≤ r ≤ min(l-1, M-k)`.
pub fn wigner_element(ck: &CKPair, m: usize, k: usize, l: usize) -> Result<C64> {
    check_states(m)?;
    check_index(m, k, l)?;
    Ok(wigner_unchecked(ck.a(), ck.b(), m, k, l))
}

fn wigner_unchecked(a: C64, b: C64, m: usize, k: usize, l: usize) -> C64 {
    let f = &FACTORIALS;
    let prefactor = (f[k - 1] * f[l - 1] * f[m - k] * f[m - l]).sqrt();
    let minus_b_conj = -b.conj();
    let (r_min, r_max) = ((l as isize - k as isize).max(0) as usize, (l - 1).min(m - k));
    let mut sum = C64::new(0.0, 0.0);
    for r in r_min..=r_max {
        let denom = f[l - 1 - r] * f[m - k - r] * f[r + k - l] * f[r];
        let term = a.powu((m - k - r) as u32)
            * a.conj().powu((l - 1 - r) as u32)
            * b.powu(r as u32)
            * minus_b_conj.powu((r + k - l) as u32);
        sum += term * (prefactor / denom);
    }
    sum
}

fn wigner_matrix(a: C64, b: C64, m: usize) -> CMatrix {
    DMatrix::from_fn(m, m, |i, j| wigner_unchecked(a, b, m, i + 1, j + 1))
}

pub fn propagator_from_ck(ck: &CKPair, m: usize) -> Result<MajoranaPropagator> {
    check_states(m)?;
    Ok(MajoranaPropagator { m, matrix: wigner_matrix(ck.a(), ck.b(), m), source_ck: *ck })
}

/// `N`-pass propagator: the Wigner matrix of `(a_N, b_N)`.
pub fn npass_propagator(ck: &CKPair, m: usize, n: u32) -> Result<MajoranaPropagator> {
    check_passes(n)?;
    let mut prop = propagator_from_ck(&su2_power(ck, n), m)?;
    prop.source_ck = *ck;
    Ok(prop)
}

pub fn diag_factors(ck: &CKPair) -> Result<DiagFactors> {
    let angle = power_angle(ck);
    let s = angle.sin();
    if s <= DEGENERATE_SIN {
        return Err(Error::DegenerateAngle { sin_theta: s });
    }
    let im = ck.a().im;
    // |u|²|v|² = |b|²/(4 sin²θ); the smaller of the two is taken from the
    // product to avoid cancellation in sin θ ∓ Im a
    let product = ck.b().norm_sqr() / (4.0 * s * s);
    let (u_sq, v_sq) = if im >= 0.0 {
        let v_sq = (s + im) / (2.0 * s);
        (product / v_sq, v_sq)
    } else {
        let u_sq = (s - im) / (2.0 * s);
        (u_sq, product / u_sq)
    };
    let uv = -C64::i() * ck.b() / (2.0 * s);
    let (u, v) = if u_sq.sqrt() >= GAUGE_SWITCH {
        let u = u_sq.sqrt();
        (C64::new(u, 0.0), uv / u)
    } else {
        let v = v_sq.sqrt();
        (uv / v, C64::new(v, 0.0))
    };
    Ok(DiagFactors { u, v, theta: angle.theta() })
}

/// `N`-pass propagator as `V D^N V†`, with `V` the Wigner matrix of `(u, v)`
/// and `D_kk = e^{i(2k-1-M)θ}`.
pub fn npass_via_diagonalization(ck: &CKPair, m: usize, n: u32) -> Result<MajoranaPropagator> {
    check_states(m)?;
    check_passes(n)?;
    let factors = diag_factors(ck)?;
    let v = wigner_matrix(factors.u, factors.v, m);
    let nf = f64::from(n);
    let mut scaled = v.clone();
    for (k, mut column) in scaled.column_iter_mut().enumerate() {
        let phase = (2.0 * (k + 1) as f64 - 1.0 - m as f64) * nf * factors.theta;
        column *= C64::from_polar(1.0, phase);
    }
    Ok(MajoranaPropagator { m, matrix: scaled * v.adjoint(), source_ck: *ck })
}

/// `N`-pass transition probabilities for the real-`a` pair `(cos θ, -i sin θ)`:
/// `p_2 = sin²(Nθ)` of the underlying two-state system and `p_3 = sin⁴(Nθ)`
/// for `1 → 3` in the three-state chain.
pub fn three_state_probabilities(theta: f64, n: u32) -> (f64, f64) {
    let s = (f64::from(n) * theta).sin().powi(2);
    (s, s * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, SQRT_2};

    fn random_pair(rng: &mut impl Rng) -> CKPair {
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        CKPair::new(C64::new(v[0] / n, v[1] / n), C64::new(v[2] / n, v[3] / n)).unwrap()
    }

    fn naive_power(m: &CMatrix, n: u32) -> CMatrix {
        let mut acc = CMatrix::identity(m.nrows(), m.ncols());
        for _ in 0..n {
            acc = &acc * m;
        }
        acc
    }

    fn unitarity_defect(u: &CMatrix) -> f64 {
        max_abs_diff(&(u.adjoint() * u), &CMatrix::identity(u.nrows(), u.ncols()))
    }

    fn binomial(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn hamiltonian_examples() {
        let (rabi, det) = (C64::new(0.4, -1.3), 0.7);
        let h2 = build_hamiltonian(2, rabi, det).unwrap();
        assert_eq!(h2[(0, 0)], C64::new(-0.35, 0.0));
        assert_eq!(h2[(1, 1)], C64::new(0.35, 0.0));
        assert_eq!(h2[(0, 1)], rabi * 0.5);
        assert_eq!(h2[(1, 0)], rabi.conj() * 0.5);

        let h3 = build_hamiltonian(3, rabi, det).unwrap();
        let diag: Vec<f64> = (0..3).map(|i| h3[(i, i)].re).collect();
        assert_eq!(diag, vec![-det, 0.0, det]);
        assert!((h3[(0, 1)] - rabi / SQRT_2).norm() < 1e-15);
        assert!((h3[(1, 2)] - rabi / SQRT_2).norm() < 1e-15);
        assert_eq!(h3[(0, 2)], C64::new(0.0, 0.0));
        assert_eq!(h3, h3.adjoint());

        assert!(build_hamiltonian(4, C64::new(0.0, 0.0), 0.0).unwrap().iter().all(|z| z.norm() == 0.0));
        assert!(matches!(build_hamiltonian(1, rabi, det), Err(Error::Domain(_))));
        assert!(build_hamiltonian(31, rabi, det).is_err());
    }

    #[test]
    fn three_and_four_state_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ck = random_pair(&mut rng);
        let (a, b) = (ck.a(), ck.b());
        let el = |m, k, l| wigner_element(&ck, m, k, l).unwrap();
        assert!((el(3, 1, 1) - a * a).norm() < 1e-14);
        assert!((el(3, 1, 2) - a * b * SQRT_2).norm() < 1e-14);
        assert!((el(3, 2, 2) - (a.norm_sqr() - b.norm_sqr())).norm() < 1e-14);
        assert!((el(3, 2, 3) - b * a.conj() * SQRT_2).norm() < 1e-14);
        assert!((el(4, 2, 2) - a * (a.norm_sqr() - 2.0 * b.norm_sqr())).norm() < 1e-14);
        assert!((el(4, 1, 4) - b * b * b).norm() < 1e-14);
        assert!(wigner_element(&ck, 3, 0, 1).is_err());
        assert!(wigner_element(&ck, 3, 1, 4).is_err());
    }

    #[test]
    fn identity_pair_gives_identity() {
        for m in 2..=MAX_STATES {
            let u = propagator_from_ck(&CKPair::identity(), m).unwrap();
            assert!(max_abs_diff(u.matrix(), &CMatrix::identity(m, m)) < 1e-14);
        }
    }

    #[test]
    fn two_states_reproduce_the_su2_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ck = random_pair(&mut rng);
        let u = propagator_from_ck(&ck, 2).unwrap();
        let m = ck.matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert!((u.matrix()[(i, j)] - m[(i, j)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn corners_rows_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [2, 3, 5, 8, 13, 30] {
            let ck = random_pair(&mut rng);
            let (a, b) = (ck.a(), ck.b());
            let u = propagator_from_ck(&ck, m).unwrap();
            assert!(unitarity_defect(u.matrix()) < 1e-10, "M={m}");
            let p = (m - 1) as u32;
            assert!((u.element(1, 1).unwrap() - a.powu(p)).norm() < 1e-12);
            assert!((u.element(1, m).unwrap() - b.powu(p)).norm() < 1e-12);
            assert!((u.element(m, 1).unwrap() - (-b.conj()).powu(p)).norm() < 1e-12);
            assert!((u.element(m, m).unwrap() - a.conj().powu(p)).norm() < 1e-12);
            for l in 1..=m {
                let c = binomial(m - 1, l - 1).sqrt();
                let top = a.powu((m - l) as u32) * b.powu((l - 1) as u32) * c;
                assert!((u.element(1, l).unwrap() - top).norm() < 1e-12);
                let bottom = (-b.conj()).powu((m - l) as u32) * a.conj().powu((l - 1) as u32) * c;
                assert!((u.element(m, l).unwrap() - bottom).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn npass_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ck = random_pair(&mut rng);
        assert_eq!(npass_propagator(&ck, 4, 1).unwrap(), propagator_from_ck(&ck, 4).unwrap());

        let single = propagator_from_ck(&ck, 4).unwrap();
        let twenty = npass_propagator(&ck, 4, 20).unwrap();
        assert!(max_abs_diff(twenty.matrix(), &naive_power(single.matrix(), 20)) < 1e-10);

        let theta = 0.3;
        for n in 1..12 {
            let u = npass_propagator(&CKPair::resonant(theta), 3, n).unwrap();
            let p3 = u.element(3, 1).unwrap().norm_sqr();
            assert!((p3 - (f64::from(n) * theta).sin().powi(4)).abs() < 1e-13);
        }
        assert!(npass_propagator(&ck, 4, 0).is_err());
    }

    #[test]
    fn diag_factor_examples() {
        let theta = 0.8;
        let f = diag_factors(&CKPair::resonant(theta)).unwrap();
        assert!((f.u - C64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!((f.v - C64::new(-(0.5f64.sqrt()), 0.0)).norm() < 1e-15);
        assert!((f.theta - theta).abs() < 1e-15);

        let phase = CKPair::new(C64::from_polar(1.0, theta), C64::new(0.0, 0.0)).unwrap();
        let f = diag_factors(&phase).unwrap();
        assert!(f.u.norm() < 1e-15);
        assert!((f.v - C64::new(1.0, 0.0)).norm() < 1e-15);

        assert!(matches!(diag_factors(&CKPair::identity()), Err(Error::DegenerateAngle { .. })));
        assert!(npass_via_diagonalization(&CKPair::identity(), 3, 2).is_err());
    }

    #[test]
    fn diag_factors_reconstruct_the_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let ck = random_pair(&mut rng);
            let f = diag_factors(&ck).unwrap();
            assert!((f.u.norm_sqr() + f.v.norm_sqr() - 1.0).abs() < 1e-10);
            let a = f.u.norm_sqr() * C64::from_polar(1.0, -f.theta) + f.v.norm_sqr() * C64::from_polar(1.0, f.theta);
            let b = C64::i() * f.u * f.v * (2.0 * f.theta.sin());
            assert!((a - ck.a()).norm() < 1e-10 && (b - ck.b()).norm() < 1e-10);
            assert!(f.u.im == 0.0 && f.u.re >= 0.0 || f.v.im == 0.0 && f.v.re >= 0.0);
        }
    }

    #[test]
    fn eigenvector_matrix_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in 2..=8 {
            let f = diag_factors(&random_pair(&mut rng)).unwrap();
            assert!(unitarity_defect(&wigner_matrix(f.u, f.v, m)) < 1e-10);
        }
    }

    #[test]
    fn routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for m in 2..=8 {
            for n in [1, 2, 5, 20, 50] {
                let ck = random_pair(&mut rng);
                let direct = npass_propagator(&ck, m, n).unwrap();
                let diag = npass_via_diagonalization(&ck, m, n).unwrap();
                let brute = naive_power(propagator_from_ck(&ck, m).unwrap().matrix(), n);
                assert!(max_abs_diff(direct.matrix(), diag.matrix()) < 1e-9);
                assert!(max_abs_diff(direct.matrix(), &brute) < 1e-9);
            }
        }
    }

    #[test]
    fn trace_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in 2..=8 {
            let ck = random_pair(&mut rng);
            let theta = power_angle(&ck).theta();
            let trace = propagator_from_ck(&ck, m).unwrap().matrix().trace();
            let expected: C64 = (1..=m)
                .map(|k| C64::from_polar(1.0, (2.0 * k as f64 - 1.0 - m as f64) * theta))
                .sum();
            assert!((trace - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn three_state_probability_examples() {
        assert_eq!(three_state_probabilities(PI / 2.0, 1), (1.0, 1.0));
        let (p2, p3) = three_state_probabilities(PI / 4.0, 4);
        assert!(p2 < 1e-30 && p3 < 1e-60);
        let (p2, p3) = three_state_probabilities(0.3, 5);
        assert!((p2 - 1.5f64.sin().powi(2)).abs() < 1e-15);
        assert!((p3 - 1.5f64.sin().powi(4)).abs() < 1e-15);
        let u = npass_propagator(&CKPair::resonant(0.3), 3, 5).unwrap();
        assert!((u.element(2, 1).unwrap().norm_sqr() - 0.5 * 3.0f64.sin().powi(2)).abs() < 1e-13);
        assert!((u.element(3, 1).unwrap().norm_sqr() - p3).abs() < 1e-13);
    }

    fn pair_strategy() -> impl Strategy<Value = CKPair> {
        prop::array::uniform4(-1.0f64..1.0)
            .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
            .prop_map(|v| {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                CKPair::new(C64::new(v[0] / n, v[1] / n), C64::new(v[2] / n, v[3] / n)).unwrap()
            })
    }

    proptest! {
        #[test]
        fn wigner_map_is_a_homomorphism(p in pair_strategy(), q in pair_strategy(), m in 2usize..=8) {
            let r = p.compose(&q);
            let lhs = propagator_from_ck(&r, m).unwrap();
            let rhs = propagator_from_ck(&p, m).unwrap().into_matrix() * propagator_from_ck(&q, m).unwrap().into_matrix();
            prop_assert!(max_abs_diff(lhs.matrix(), &rhs) < 1e-10);
        }
    }
}
