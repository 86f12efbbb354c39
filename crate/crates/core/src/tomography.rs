//! Estimating a small rotation error from pulse-train populations.
//!
//! A gate meant to rotate by `θ₀` actually rotates by `θ = θ₀ + ε`. After
//! `N` repetitions the error enters as `Nε`, so populations measured at
//! several `N` pin down `ε` far more precisely than a single pass does.
//! [`amplified_series`] generates such data (optionally with binomial shot
//! noise) and [`estimate_error`] fits `ε` back from it.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::majorana::{self, MAX_STATES};
use crate::morris_shore::multipod_npass;
use crate::twostate::{su2_power, CKPair};

/// Errors are searched in `[-EPSILON_RANGE, EPSILON_RANGE]`.
pub const EPSILON_RANGE: f64 = 0.3;
/// Points of the coarse grid over the search range.
pub const GRID_POINTS: usize = 601;
/// Golden-section refinement stops below this bracket width.
pub const REFINE_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    TwoState,
    /// Majorana chain with `M` states.
    Majorana(usize),
    /// `L` ground states coupled equally to one excited state.
    Multipod(usize),
}

impl ModelKind {
    pub fn dim(&self) -> usize {
        match *self {
            ModelKind::TwoState => 2,
            ModelKind::Majorana(m) => m,
            ModelKind::Multipod(l) => l + 1,
        }
    }

    /// The population from the first state to the last.
    pub fn default_observable(&self) -> (usize, usize) {
        (1, self.dim())
    }
}

/// Which gate is intended and which population is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplificationModel {
    kind: ModelKind,
    target_theta: f64,
    /// `(from, to)`, 1-based; the measured population is `|U_{to,from}|²`.
    observable: (usize, usize),
}

impl AmplificationModel {
    pub fn new(kind: ModelKind, target_theta: f64, observable: Option<(usize, usize)>) -> Result<Self> {
        match kind {
            ModelKind::Majorana(m) if !(2..=MAX_STATES).contains(&m) => {
                return Err(Error::Domain(format!("majorana model needs 2..={MAX_STATES} states, got {m}")));
            }
            ModelKind::Multipod(0) => {
                return Err(Error::Domain("multipod model needs at least one ground state".into()));
            }
            _ => {}
        }
        if !(target_theta > 0.0 && target_theta < PI) {
            return Err(Error::Domain(format!("target theta must lie in (0, pi), got {target_theta}")));
        }
        let observable = observable.unwrap_or_else(|| kind.default_observable());
        let dim = kind.dim();
        let (from, to) = observable;
        if from == 0 || to == 0 || from > dim || to > dim {
            return Err(Error::Domain(format!("observable ({from}, {to}) outside states 1..={dim}")));
        }
        Ok(AmplificationModel { kind, target_theta, observable })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn target_theta(&self) -> f64 {
        self.target_theta
    }

    pub fn observable(&self) -> (usize, usize) {
        self.observable
    }

    /// Measured population after `n` passes of a gate with error `epsilon`.
    pub fn population(&self, epsilon: f64, n: u32) -> f64 {
        let ck = CKPair::resonant(self.target_theta + epsilon);
        let (from, to) = self.observable;
        let element = match self.kind {
            ModelKind::TwoState => su2_power(&ck, n).matrix()[(to - 1, from - 1)],
            ModelKind::Majorana(m) => majorana::wigner_element(&su2_power(&ck, n), m, to, from)
                .expect("model validated at construction"),
            ModelKind::Multipod(l) => {
                let omegas = vec![C64::new(1.0, 0.0); l];
                multipod_npass(&omegas, &ck, 0.0, n).expect("nonzero couplings")[(to - 1, from - 1)]
            }
        };
        element.norm_sqr().min(1.0)
    }
}

/// Populations measured at several pass counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    n_values: Vec<u32>,
    populations: Vec<f64>,
    shots: Option<u64>,
}

impl MeasurementSeries {
    pub fn new(n_values: Vec<u32>, populations: Vec<f64>, shots: Option<u64>) -> Result<Self> {
        if n_values.len() != populations.len() {
            return Err(Error::Domain(format!(
                "{} pass counts but {} populations",
                n_values.len(),
                populations.len()
            )));
        }
        if n_values.is_empty() {
            return Err(Error::Domain("measurement series is empty".into()));
        }
        if n_values.contains(&0) {
            return Err(Error::Domain("pass counts must be positive".into()));
        }
        if let Some(p) = populations.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(format!("population {p} outside [0, 1]")));
        }
        if shots == Some(0) {
            return Err(Error::Domain("shots must be positive".into()));
        }
        Ok(MeasurementSeries { n_values, populations, shots })
    }

    pub fn n_values(&self) -> &[u32] {
        &self.n_values
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn shots(&self) -> Option<u64> {
        self.shots
    }
}

/// Populations at `θ₀ + ε` for each `N`, with binomial shot noise when
/// `shots` is set. The same seed always gives the same series.
pub fn amplified_series(
    model: &AmplificationModel,
    epsilon: f64,
    n_values: &[u32],
    shots: Option<u64>,
    seed: u64,
) -> Result<MeasurementSeries> {
    if !(epsilon.abs() < EPSILON_RANGE) {
        return Err(Error::Domain(format!("|epsilon| must be below {EPSILON_RANGE}, got {epsilon}")));
    }
    let exact: Vec<f64> = n_values.iter().map(|&n| model.population(epsilon, n)).collect();
    let populations = match shots {
        None => exact,
        Some(0) => return Err(Error::Domain("shots must be positive".into())),
        Some(shots) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            exact
                .iter()
                .map(|&p| {
                    let dist = Binomial::new(shots, p.clamp(0.0, 1.0)).expect("probability in [0, 1]");
                    dist.sample(&mut rng) as f64 / shots as f64
                })
                .collect()
        }
    };
    MeasurementSeries::new(n_values.to_vec(), populations, shots)
}

/// A fitted error and the sum of squared residuals at the fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub epsilon: f64,
    pub residual: f64,
}

/// Least-squares estimate of `ε` from a series with at least two distinct `N`.
pub fn estimate_error(model: &AmplificationModel, series: &MeasurementSeries) -> Result<ErrorEstimate> {
    let distinct: BTreeSet<u32> = series.n_values.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Domain("estimate_error needs at least two distinct pass counts".into()));
    }
    fit(model, series)
}

/// The same fit restricted to single-pass data (every `N` equal to 1),
/// the baseline that pulse trains improve on.
pub fn estimate_single_pass(model: &AmplificationModel, series: &MeasurementSeries) -> Result<ErrorEstimate> {
    if series.n_values.iter().any(|&n| n != 1) {
        return Err(Error::Domain("single-pass estimate needs every pass count equal to 1".into()));
    }
    fit(model, series)
}

fn fit(model: &AmplificationModel, series: &MeasurementSeries) -> Result<ErrorEstimate> {
    let ssr = |eps: f64| -> f64 {
        series
            .n_values
            .iter()
            .zip(&series.populations)
            .map(|(&n, &p)| (model.population(eps, n) - p).powi(2))
            .sum()
    };
    minimize_residual(&ssr, model.target_theta)
}

/// Grid search plus golden-section refinement of `ssr` over the error window.
fn minimize_residual(ssr: &impl Fn(f64) -> f64, target_theta: f64) -> Result<ErrorEstimate> {
    let step = 2.0 * EPSILON_RANGE / (GRID_POINTS - 1) as f64;
    let grid: Vec<(f64, f64)> = (0..GRID_POINTS)
        .map(|i| {
            let eps = -EPSILON_RANGE + i as f64 * step;
            (eps, ssr(eps))
        })
        .collect();
    let (lo, hi) = grid.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, s)| (lo.min(s), hi.max(s)));
    if hi - lo <= 1e-14 * (1.0 + hi) {
        return Err(Error::NonIdentifiable(format!(
            "residual is flat in epsilon over [-{EPSILON_RANGE}, {EPSILON_RANGE}]"
        )));
    }
    let best = grid.iter().copied().min_by(|x, y| x.1.total_cmp(&y.1)).expect("nonempty grid").0;
    let epsilon = golden_section(ssr, (best - step).max(-EPSILON_RANGE), (best + step).min(EPSILON_RANGE));
    let residual = ssr(epsilon);

    // θ → -θ and θ → θ + π leave many observables unchanged, so ε may have
    // exact aliases in the window; report the largest of them.
    let tol = 1e-12 + 1e-9 * residual;
    let mut chosen = (epsilon, residual);
    for k in -3..=3 {
        let shift = k as f64 * PI;
        for candidate in [epsilon + shift, -2.0 * target_theta - epsilon + shift] {
            if candidate.abs() <= EPSILON_RANGE && candidate > chosen.0 + 1e-9 {
                let s = ssr(candidate);
                if (s - residual).abs() <= tol {
                    chosen = (candidate, s);
                }
            }
        }
    }
    Ok(ErrorEstimate { epsilon: chosen.0, residual: chosen.1 })
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > REFINE_WIDTH {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    fn two_state(theta: f64) -> AmplificationModel {
        AmplificationModel::new(ModelKind::TwoState, theta, None).unwrap()
    }

    #[test]
    fn model_validation() {
        assert!(AmplificationModel::new(ModelKind::TwoState, 0.0, None).is_err());
        assert!(AmplificationModel::new(ModelKind::TwoState, PI, None).is_err());
        assert!(AmplificationModel::new(ModelKind::Majorana(1), 1.0, None).is_err());
        assert!(AmplificationModel::new(ModelKind::Multipod(0), 1.0, None).is_err());
        assert!(AmplificationModel::new(ModelKind::TwoState, 1.0, Some((1, 3))).is_err());
        let m = AmplificationModel::new(ModelKind::Multipod(3), 1.0, None).unwrap();
        assert_eq!(m.observable(), (1, 4));
    }

    #[test]
    fn series_examples() {
        let s = amplified_series(&two_state(FRAC_PI_2), 0.01, &[10], None, 0).unwrap();
        assert!((s.populations()[0] - 0.1f64.sin().powi(2)).abs() < 1e-12);
        assert!((s.populations()[0] - 9.966e-3).abs() < 1e-6);

        let maj = AmplificationModel::new(ModelKind::Majorana(3), FRAC_PI_2, None).unwrap();
        let s = amplified_series(&maj, 0.01, &[10], None, 0).unwrap();
        assert!((s.populations()[0] - 0.1f64.sin().powi(4)).abs() < 1e-12);
        assert!((s.populations()[0] - 9.93e-5).abs() < 1e-7);

        let nominal = amplified_series(&two_state(FRAC_PI_3), 0.0, &[1, 2, 3], None, 0).unwrap();
        for (n, p) in [1.0, 2.0, 3.0].iter().zip(nominal.populations()) {
            assert_eq!(*p, (n * FRAC_PI_3).sin().powi(2).min(1.0));
        }
        assert!(amplified_series(&two_state(1.0), 0.3, &[1], None, 0).is_err());
    }

    #[test]
    fn multipod_population_matches_bright_channel() {
        let model = AmplificationModel::new(ModelKind::Multipod(2), 1.0, None).unwrap();
        // |U_{L+1,1}|² = sin²(Nθ) / L for equal couplings
        for n in 1..6 {
            let expected = (f64::from(n) * 1.02).sin().powi(2) / 2.0;
            assert!((model.population(0.02, n) - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn shot_noise_is_reproducible() {
        let model = two_state(FRAC_PI_3);
        let n: Vec<u32> = (1..=20).collect();
        let a = amplified_series(&model, 0.01, &n, Some(1000), 7).unwrap();
        let b = amplified_series(&model, 0.01, &n, Some(1000), 7).unwrap();
        let c = amplified_series(&model, 0.01, &n, Some(1000), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.populations().iter().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(a.shots(), Some(1000));
    }

    #[test]
    fn noise_free_round_trip() {
        let n: Vec<u32> = (1..=20).collect();
        for eps in [0.02, -0.04, 0.0] {
            let model = two_state(FRAC_PI_3);
            let s = amplified_series(&model, eps, &n, None, 0).unwrap();
            let fit = estimate_error(&model, &s).unwrap();
            assert!((fit.epsilon - eps).abs() < 1e-8, "{eps}: {}", fit.epsilon);
            assert!(fit.residual < 1e-20);
        }
    }

    #[test]
    fn sign_is_canonical_when_unidentifiable() {
        // at θ₀ = π/2 the two-state populations are even in ε
        let model = two_state(FRAC_PI_2);
        let n: Vec<u32> = (1..=10).collect();
        for eps in [0.03, -0.03] {
            let s = amplified_series(&model, eps, &n, None, 0).unwrap();
            let fit = estimate_error(&model, &s).unwrap();
            assert!((fit.epsilon - 0.03).abs() < 1e-7);
        }
    }

    #[test]
    fn estimator_preconditions() {
        let model = two_state(FRAC_PI_3);
        let single = amplified_series(&model, 0.01, &[1, 1, 1], None, 0).unwrap();
        assert!(matches!(estimate_error(&model, &single), Err(Error::Domain(_))));
        assert!((estimate_single_pass(&model, &single).unwrap().epsilon - 0.01).abs() < 1e-7);
        let multi = amplified_series(&model, 0.01, &[1, 2], None, 0).unwrap();
        assert!(estimate_single_pass(&model, &multi).is_err());
        assert!(MeasurementSeries::new(vec![1, 2], vec![0.5], None).is_err());
        assert!(MeasurementSeries::new(vec![1], vec![1.5], None).is_err());
        assert!(MeasurementSeries::new(vec![0], vec![0.5], None).is_err());
    }

    #[test]
    fn flat_objective_is_not_identifiable() {
        let flat = minimize_residual(&|_| 0.25, 1.0);
        assert!(matches!(flat, Err(Error::NonIdentifiable(_))));
        let bowl = minimize_residual(&|e: f64| (e - 0.1234).powi(2), 1.0).unwrap();
        assert!((bowl.epsilon - 0.1234).abs() < 1e-7);
    }

    #[test]
    fn amplitude_sensitivity_grows_linearly_at_half_pi() {
        // a_N = cos(N(π/2 + ε)) = ∓sin(Nε) for odd N
        let h = 1e-6;
        let slope = |n: u32| {
            let amp = |eps: f64| su2_power(&CKPair::resonant(FRAC_PI_2 + eps), n).a().norm();
            (amp(0.001 + h) - amp(0.001 - h)) / (2.0 * h)
        };
        let base = slope(1);
        for n in [5, 9] {
            let ratio = slope(n) / base / f64::from(n);
            assert!((ratio - 1.0).abs() < 0.1, "N={n}: {ratio}");
        }
    }

    #[test]
    fn population_sensitivity_grows_linearly_at_quarter_pi() {
        let model = two_state(FRAC_PI_4);
        let h = 1e-6;
        let slope = |n: u32| ((model.population(h, n) - model.population(-h, n)) / (2.0 * h)).abs();
        let base = slope(1);
        for n in [5, 9] {
            let ratio = slope(n) / base / f64::from(n);
            assert!((ratio - 1.0).abs() < 0.1, "N={n}: {ratio}");
        }
    }

    #[test]
    fn majorana_corner_is_more_sensitive() {
        let eps = 0.02;
        let loss = |m| {
            let model = AmplificationModel::new(ModelKind::Majorana(m), FRAC_PI_2, None).unwrap();
            1.0 - model.population(eps, 1)
        };
        assert!(loss(3) > 1.5 * loss(2));
        assert!(loss(5) > loss(3));
    }
}
