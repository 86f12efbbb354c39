//! Two-manifold systems with the Morris-Shore symmetry.
//!
//! `L` ground states couple to `M ≤ L` excited states through a constant
//! coupling matrix `Ω` (`L x M`) modulated by a shared pulse:
//!
//! ```text
//! H(t) = [ 0_L            Ω r(t)/2 ]      r(t) = Ω₀ f(t)
//!        [ Ω† r*(t)/2     Δ(t) 1_M ]
//! ```
//!
//! The singular value decomposition `Ω = P Σ Q†` splits the system into `M`
//! independent bright pairs with couplings `λ_m` plus `L - M` uncoupled dark
//! ground states. With `S = blockdiag(P†, Q†)` the propagator is
//! `U = S† Ũ S`, where `Ũ` is block diagonal in the pairs.
//!
//! In the Morris-Shore basis states are ordered bright ground states first
//! (descending `λ`), then the dark states, then the excited states.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::pulses::PulseShape;
use crate::twostate::{primed_power, solve_ms_pair, CKPair, MSPairSolution, Matrix2c};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

fn check_coupling(omega: &CMatrix) -> Result<()> {
    let (l, m) = omega.shape();
    if l < m || m == 0 {
        return Err(Error::Shape { rows: l, cols: m });
    }
    if omega.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Domain("coupling matrix has non-finite entries".into()));
    }
    if omega.iter().all(|z| z.norm() == 0.0) {
        return Err(Error::DegenerateCoupling);
    }
    Ok(())
}

fn check_passes(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("number of passes must be positive".into()));
    }
    Ok(())
}

/// `L` ground and `M` excited states driven by one shared pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct MSSystem {
    omega: CMatrix,
    pulse: PulseShape,
}

impl MSSystem {
    pub fn new(omega: CMatrix, pulse: PulseShape) -> Result<Self> {
        check_coupling(&omega)?;
        Ok(MSSystem { omega, pulse })
    }

    pub fn omega(&self) -> &CMatrix {
        &self.omega
    }

    pub fn pulse(&self) -> &PulseShape {
        &self.pulse
    }

    pub fn ground_count(&self) -> usize {
        self.omega.nrows()
    }

    pub fn excited_count(&self) -> usize {
        self.omega.ncols()
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows() + self.omega.ncols()
    }

    /// Full `(L+M) x (L+M)` Hamiltonian at time `t`.
    pub fn hamiltonian_at(&self, t: f64) -> CMatrix {
        let (l, m) = self.omega.shape();
        let r = self.pulse.rabi_at(t);
        let mut h = CMatrix::zeros(l + m, l + m);
        for i in 0..l {
            for j in 0..m {
                let c = self.omega[(i, j)] * r * 0.5;
                h[(i, l + j)] = c;
                h[(l + j, i)] = c.conj();
            }
        }
        for j in 0..m {
            h[(l + j, l + j)] = C64::new(self.pulse.detuning_at(t), 0.0);
        }
        h
    }

    pub fn decomposition(&self) -> MSDecomposition {
        decompose(&self.omega).expect("coupling validated at construction")
    }
}

/// Morris-Shore basis change: `s_l Ω s_m†` is `diag(λ)` padded with zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MSDecomposition {
    pub s_l: CMatrix,
    pub s_m: CMatrix,
    pub lambdas: Vec<f64>,
    /// `L - M`, the number of ground states without an excited partner.
    pub dark_count: usize,
    /// Number of singular values above `RANK_TOL · λ_max`.
    pub rank: usize,
}

impl MSDecomposition {
    /// `S = blockdiag(s_l, s_m)`.
    pub fn transform(&self) -> CMatrix {
        let (l, m) = (self.s_l.nrows(), self.s_m.nrows());
        let mut s = CMatrix::zeros(l + m, l + m);
        s.view_mut((0, 0), (l, l)).copy_from(&self.s_l);
        s.view_mut((l, l), (m, m)).copy_from(&self.s_m);
        s
    }

    /// Coupling actually used for pair `m`: zero for rank-deficient directions.
    fn effective_lambda(&self, m: usize) -> f64 {
        if m < self.rank {
            self.lambdas[m]
        } else {
            0.0
        }
    }
}

/// A Morris-Shore propagator together with the pair solutions it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MSPropagator {
    pub dim: usize,
    pub matrix: CMatrix,
    pub pairs: Vec<MSPairSolution>,
    pub n_passes: u32,
}

pub fn decompose(omega: &CMatrix) -> Result<MSDecomposition> {
    check_coupling(omega)?;
    let (l, m) = omega.shape();
    let svd = omega.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let lambdas: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let mut columns: Vec<DVector<C64>> = order.iter().map(|&i| u.column(i).into_owned()).collect();
    complete_basis(&mut columns, l);

    let mut s_l = CMatrix::zeros(l, l);
    for (i, col) in columns.iter().enumerate() {
        s_l.set_row(i, &col.adjoint());
    }
    let mut s_m = CMatrix::zeros(m, m);
    for (i, &src) in order.iter().enumerate() {
        s_m.set_row(i, &v_t.row(src));
    }
    let threshold = RANK_TOL * lambdas[0];
    let rank = lambdas.iter().filter(|&&x| x >= threshold).count();
    Ok(MSDecomposition { s_l, s_m, lambdas, dark_count: l - m, rank })
}

/// Extends orthonormal `columns` to a basis of `C^dim` by Gram-Schmidt on
/// the standard basis vectors, taking the best-conditioned candidate each time.
fn complete_basis(columns: &mut Vec<DVector<C64>>, dim: usize) {
    let project_out = |v: &mut DVector<C64>, basis: &[DVector<C64>]| {
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for q in basis {
                let overlap = q.dotc(v);
                *v -= q * overlap;
            }
        }
    };
    while columns.len() < dim {
        let best = (0..dim)
            .map(|j| {
                let mut e = DVector::<C64>::zeros(dim);
                e[j] = C64::new(1.0, 0.0);
                project_out(&mut e, columns);
                e
            })
            .max_by(|x, y| x.norm().total_cmp(&y.norm()))
            .expect("dim > 0");
        let norm = best.norm();
        columns.push(best / C64::new(norm, 0.0));
    }
}

/// Orthonormal basis of the null space of `Ω†`: ground states that no
/// coupling reaches, including directions lost to rank deficiency.
pub fn dark_basis(omega: &CMatrix) -> Result<Vec<DVector<C64>>> {
    let decomp = decompose(omega)?;
    let l = decomp.s_l.nrows();
    Ok((decomp.rank..l).map(|i| decomp.s_l.row(i).adjoint()).collect())
}

pub fn single_pass(system: &MSSystem) -> Result<MSPropagator> {
    multi_pass(system, 1)
}

/// `N`-pass propagator `S† Ũ^N S`.
pub fn multi_pass(system: &MSSystem, n: u32) -> Result<MSPropagator> {
    propagator_from_decomposition(&system.decomposition(), system.pulse(), n)
}

/// Assembles `S† Ũ^N S` from any valid decomposition of the coupling matrix.
pub fn propagator_from_decomposition(
    decomp: &MSDecomposition,
    pulse: &PulseShape,
    n: u32,
) -> Result<MSPropagator> {
    check_passes(n)?;
    let (l, m) = (decomp.s_l.nrows(), decomp.s_m.nrows());
    let pairs = (0..m)
        .map(|i| solve_ms_pair(decomp.effective_lambda(i), pulse))
        .collect::<Result<Vec<_>>>()?;
    let blocks: Vec<Matrix2c> = pairs.iter().map(|p| primed_power(p, n).matrix()).collect();
    let u_ms = ms_basis_matrix(&blocks, l, m);
    let s = decomp.transform();
    Ok(MSPropagator {
        dim: l + m,
        matrix: s.adjoint() * u_ms * s,
        pairs,
        n_passes: n,
    })
}

/// `R Ũ_b R^T`: the pair-ordered block-diagonal matrix `Ũ_b`
/// (`g_1, e_1, g_2, e_2, …, dark`) permuted into the Morris-Shore order.
fn ms_basis_matrix(blocks: &[Matrix2c], l: usize, m: usize) -> CMatrix {
    let dim = l + m;
    let mut paired = CMatrix::identity(dim, dim);
    for (i, block) in blocks.iter().enumerate() {
        paired.view_mut((2 * i, 2 * i), (2, 2)).copy_from(block);
    }
    // ms_index[p]: Morris-Shore position of pair-ordered position p
    let ms_index: Vec<usize> = (0..dim)
        .map(|p| match p {
            p if p < 2 * m && p % 2 == 0 => p / 2,
            p if p < 2 * m => l + p / 2,
            p => p - m,
        })
        .collect();
    let mut r = CMatrix::zeros(dim, dim);
    for (p, &q) in ms_index.iter().enumerate() {
        r[(q, p)] = C64::new(1.0, 0.0);
    }
    &r * paired * r.transpose()
}

/// `(L+1)`-state multipod after `N` passes, in closed form.
///
/// `ck` is the primed (SU(2)) pair of the bright channel with coupling
/// `Ω = ‖(Ω_1, …, Ω_L)‖` and `delta` its accumulated detuning.
pub fn multipod_npass(omegas: &[C64], ck: &CKPair, delta: f64, n: u32) -> Result<CMatrix> {
    check_passes(n)?;
    let l = omegas.len();
    let omega_sq: f64 = omegas.iter().map(|z| z.norm_sqr()).sum();
    if omega_sq == 0.0 {
        return Err(Error::DegenerateCoupling);
    }
    let omega = omega_sq.sqrt();
    let p = primed_power(&MSPairSolution::new(*ck, delta), n);
    let (a_n, b_n) = (p.ck.a(), p.ck.b());
    let phase = C64::from_polar(1.0, -p.total_phase);

    let mut u = CMatrix::identity(l + 1, l + 1);
    for i in 0..l {
        for j in 0..l {
            u[(i, j)] += (a_n - 1.0) * omegas[i] * omegas[j].conj() / omega_sq;
        }
        u[(i, l)] = b_n * omegas[i] / omega;
        u[(l, i)] = -b_n.conj() * omegas[i].conj() * phase / omega;
    }
    u[(l, l)] = a_n.conj() * phase;
    Ok(u)
}

/// Three-state Λ system after `N` passes, written out element by element.
pub fn lambda_npass(omega1: C64, omega2: C64, ck: &CKPair, delta: f64, n: u32) -> Result<CMatrix> {
    check_passes(n)?;
    let omega_sq = omega1.norm_sqr() + omega2.norm_sqr();
    if omega_sq == 0.0 {
        return Err(Error::DegenerateCoupling);
    }
    let omega = omega_sq.sqrt();
    let p = primed_power(&MSPairSolution::new(*ck, delta), n);
    let (a, b) = (p.ck.a(), p.ck.b());
    let e = C64::from_polar(1.0, -p.total_phase);
    let (w1, w2) = (omega1, omega2);
    Ok(CMatrix::from_row_slice(
        3,
        3,
        &[
            (w2.norm_sqr() + a * w1.norm_sqr()) / omega_sq,
            (a - 1.0) * w1 * w2.conj() / omega_sq,
            b * w1 / omega,
            (a - 1.0) * w2 * w1.conj() / omega_sq,
            (w1.norm_sqr() + a * w2.norm_sqr()) / omega_sq,
            b * w2 / omega,
            -b.conj() * w1.conj() * e / omega,
            -b.conj() * w2.conj() * e / omega,
            a.conj() * e,
        ],
    ))
}

/// Four-state tripod after `N` passes: the multipod formula with `L = 3`.
pub fn tripod_npass(omegas: [C64; 3], ck: &CKPair, delta: f64, n: u32) -> Result<CMatrix> {
    multipod_npass(&omegas, ck, delta, n)
}
