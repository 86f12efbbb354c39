//! Config-driven front end for the `pulsetrain` binary.
//!
//! `simulate` reads a TOML description of a system, a pulse and a train
//! length, evaluates the closed-form `N`-pass propagators and writes
//! populations (CSV or JSON) and/or propagators (JSON). With `--verify` each
//! result is compared against direct integration of the full Hamiltonian.
//! `tomo` runs the error-amplification workflow and `verify` compares two
//! stored JSON results.
//!
//! Exit codes: 2 for unreadable or invalid configs, 3 for errors raised by the
//! numerical modules, 4 when verification finds a deviation above
//! [`VERIFY_LIMIT`].

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{max_abs_diff, CMatrix, C64};
use crate::majorana::{build_hamiltonian, MajoranaSystem, MAX_STATES};
use crate::morris_shore::{lambda_npass, multi_pass, multipod_npass, tripod_npass, MSSystem};
use crate::oracle::{self, TimeDependentHamiltonian, DEFAULT_ORACLE_STEPS};
use crate::pulses::{Detuning, Envelope, PulseShape, DEFAULT_STEPS};
use crate::tomography::{
    amplified_series, estimate_error, estimate_single_pass, AmplificationModel, ModelKind,
};
use crate::twostate::solve_ms_pair;

/// Environment variable overriding the default integration grid.
pub const STEPS_ENV: &str = "PULSETRAIN_STEPS";

/// Largest oracle deviation `simulate --verify` accepts.
pub const VERIFY_LIMIT: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "pulsetrain", version, about = "Closed-form pulse-train propagators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute N-pass propagators and populations for a configured system.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Compare against direct integration of the full Hamiltonian.
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an amplified measurement series and estimate the gate error.
    Tomo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two JSON results produced by `simulate`.
    Verify {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = VERIFY_LIMIT)]
        tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Unreadable or invalid configuration.
    Config(String),
    /// Error raised by a numerical module.
    Domain(String),
    /// Verification found a deviation above the limit.
    Deviation { deviation: f64, limit: f64 },
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Deviation { .. } => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Domain(m) => write!(f, "{m}"),
            CliError::Deviation { deviation, limit } => {
                write!(f, "verification failed: max deviation {deviation:e} exceeds {limit:e}")
            }
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

fn config_error(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

/// `[re, im]`.
pub type ComplexPair = [f64; 2];

fn complex(z: &ComplexPair) -> C64 {
    C64::new(z[0], z[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub verify: bool,
    pub system: SystemConfig,
    pub pulse: PulseConfig,
    pub train: TrainConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub majorana: Option<MajoranaConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ms: Option<MsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tripod: Option<TripodConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multipod: Option<MultipodConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MajoranaConfig {
    #[serde(rename = "M")]
    pub m: usize,
}

/// Coupling matrix as `L` rows of `M` complex entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsConfig {
    pub omega: Vec<Vec<ComplexPair>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaConfig {
    pub omega1: ComplexPair,
    pub omega2: ComplexPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripodConfig {
    pub omega1: ComplexPair,
    pub omega2: ComplexPair,
    pub omega3: ComplexPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipodConfig {
    pub omegas: Vec<ComplexPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PulseKind {
    Rectangular,
    Gaussian,
    SinSquared,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub kind: PulseKind,
    pub peak_rabi: ComplexPair,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning: Option<DetuningConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetuningKind {
    Constant,
    Chirp,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningConfig {
    pub kind: DetuningKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(rename = "N_list", default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputWhat {
    Propagator,
    Populations,
    Both,
}

impl OutputWhat {
    fn propagator(self) -> bool {
        matches!(self, OutputWhat::Propagator | OutputWhat::Both)
    }

    fn populations(self) -> bool {
        matches!(self, OutputWhat::Populations | OutputWhat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub format: OutputFormat,
    pub what: OutputWhat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<usize>,
}

/// The validated system of a [`RunConfig`].
#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    Majorana(usize),
    Ms(CMatrix),
    Lambda(C64, C64),
    Tripod([C64; 3]),
    Multipod(Vec<C64>),
}

impl SystemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SystemSpec::Majorana(_) => "majorana",
            SystemSpec::Ms(_) => "ms",
            SystemSpec::Lambda(..) => "lambda",
            SystemSpec::Tripod(_) => "tripod",
            SystemSpec::Multipod(_) => "multipod",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SystemSpec::Majorana(m) => *m,
            SystemSpec::Ms(omega) => omega.nrows() + omega.ncols(),
            SystemSpec::Lambda(..) => 3,
            SystemSpec::Tripod(_) => 4,
            SystemSpec::Multipod(w) => w.len() + 1,
        }
    }

    /// Ground couplings of the single-excited-state variants.
    fn pod_couplings(&self) -> Option<Vec<C64>> {
        match self {
            SystemSpec::Lambda(w1, w2) => Some(vec![*w1, *w2]),
            SystemSpec::Tripod(w) => Some(w.to_vec()),
            SystemSpec::Multipod(w) => Some(w.clone()),
            _ => None,
        }
    }
}

fn check_complex(path: &str, z: &ComplexPair) -> Result<(), CliError> {
    if z.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(config_error(path, "complex entries must be finite"))
    }
}

fn check_nonzero(path: &str, couplings: &[C64]) -> Result<(), CliError> {
    if couplings.iter().all(|z| z.norm() == 0.0) {
        Err(config_error(path, "at least one coupling must be nonzero"))
    } else {
        Ok(())
    }
}

impl RunConfig {
    pub fn system_spec(&self) -> Result<SystemSpec, CliError> {
        let s = &self.system;
        let present: Vec<&str> = [
            ("majorana", s.majorana.is_some()),
            ("ms", s.ms.is_some()),
            ("lambda", s.lambda.is_some()),
            ("tripod", s.tripod.is_some()),
            ("multipod", s.multipod.is_some()),
        ]
        .iter()
        .filter(|(_, p)| *p)
        .map(|(n, _)| *n)
        .collect();
        if present.len() != 1 {
            return Err(config_error(
                "system",
                format!(
                    "exactly one of majorana, ms, lambda, tripod, multipod must be given (found {})",
                    if present.is_empty() { "none".to_string() } else { present.join(", ") }
                ),
            ));
        }
        if let Some(cfg) = &s.majorana {
            if cfg.m < 2 || cfg.m > MAX_STATES {
                return Err(config_error(
                    "system.majorana.M",
                    format!("M >= 2 and M <= {MAX_STATES} required (got {})", cfg.m),
                ));
            }
            return Ok(SystemSpec::Majorana(cfg.m));
        }
        if let Some(cfg) = &s.ms {
            let rows = cfg.omega.len();
            let cols = cfg.omega.first().map_or(0, Vec::len);
            if rows == 0 || cols == 0 {
                return Err(config_error("system.ms.omega", "coupling matrix must be nonempty"));
            }
            for (i, row) in cfg.omega.iter().enumerate() {
                if row.len() != cols {
                    return Err(config_error(
                        &format!("system.ms.omega[{i}]"),
                        format!("row has {} entries, first row has {cols}", row.len()),
                    ));
                }
                for (j, z) in row.iter().enumerate() {
                    check_complex(&format!("system.ms.omega[{i}][{j}]"), z)?;
                }
            }
            if rows < cols {
                return Err(config_error(
                    "system.ms.omega",
                    format!(
                        "{rows} ground rows but {cols} excited columns; the ground manifold must be the \
                         larger one, so transpose the matrix (swap ground and excited roles)"
                    ),
                ));
            }
            let omega = CMatrix::from_fn(rows, cols, |i, j| complex(&cfg.omega[i][j]));
            check_nonzero("system.ms.omega", omega.as_slice())?;
            return Ok(SystemSpec::Ms(omega));
        }
        if let Some(cfg) = &s.lambda {
            check_complex("system.lambda.omega1", &cfg.omega1)?;
            check_complex("system.lambda.omega2", &cfg.omega2)?;
            let (w1, w2) = (complex(&cfg.omega1), complex(&cfg.omega2));
            check_nonzero("system.lambda", &[w1, w2])?;
            return Ok(SystemSpec::Lambda(w1, w2));
        }
        if let Some(cfg) = &s.tripod {
            check_complex("system.tripod.omega1", &cfg.omega1)?;
            check_complex("system.tripod.omega2", &cfg.omega2)?;
            check_complex("system.tripod.omega3", &cfg.omega3)?;
            let w = [complex(&cfg.omega1), complex(&cfg.omega2), complex(&cfg.omega3)];
            check_nonzero("system.tripod", &w)?;
            return Ok(SystemSpec::Tripod(w));
        }
        let cfg = s.multipod.as_ref().expect("one variant present");
        if cfg.omegas.is_empty() {
            return Err(config_error("system.multipod.omegas", "at least one coupling required"));
        }
        for (i, z) in cfg.omegas.iter().enumerate() {
            check_complex(&format!("system.multipod.omegas[{i}]"), z)?;
        }
        let w: Vec<C64> = cfg.omegas.iter().map(complex).collect();
        check_nonzero("system.multipod.omegas", &w)?;
        Ok(SystemSpec::Multipod(w))
    }

    pub fn n_values(&self) -> Result<Vec<u32>, CliError> {
        let values = match (&self.train.n, &self.train.n_list) {
            (Some(n), None) => vec![*n],
            (None, Some(list)) => list.clone(),
            _ => return Err(config_error("train", "give exactly one of N and N_list")),
        };
        if values.is_empty() {
            return Err(config_error("train.N_list", "must not be empty"));
        }
        if let Some(i) = values.iter().position(|&n| n == 0) {
            let path = if self.train.n.is_some() { "train.N".to_string() } else { format!("train.N_list[{i}]") };
            return Err(config_error(&path, "N >= 1 required"));
        }
        Ok(values)
    }

    fn validate(&self) -> Result<(), CliError> {
        let spec = self.system_spec()?;
        self.n_values()?;
        let p = &self.pulse;
        check_complex("pulse.peak_rabi", &p.peak_rabi)?;
        if !(p.duration.is_finite() && p.duration > 0.0) {
            return Err(config_error("pulse.duration", format!("must be positive (got {})", p.duration)));
        }
        if let Some(steps) = p.steps {
            check_steps("pulse.steps", steps)?;
        }
        let gaussian = p.kind == PulseKind::Gaussian;
        for (name, present, wanted) in [
            ("center", p.center.is_some(), gaussian),
            ("width", p.width.is_some(), gaussian),
            ("samples", p.samples.is_some(), p.kind == PulseKind::Sampled),
        ] {
            if present && !wanted {
                return Err(config_error(&format!("pulse.{name}"), format!("not used by {:?} pulses", p.kind)));
            }
            if wanted && !present {
                return Err(config_error(&format!("pulse.{name}"), format!("required for {:?} pulses", p.kind)));
            }
        }
        if let Some(d) = &p.detuning {
            let (value, chirp, sampled) = match d.kind {
                DetuningKind::Constant => (true, false, false),
                DetuningKind::Chirp => (false, true, false),
                DetuningKind::Sampled => (false, false, true),
            };
            for (name, present, wanted, required) in [
                ("value", d.value.is_some(), value, value),
                ("offset", d.offset.is_some(), chirp, false),
                ("slope", d.slope.is_some(), chirp, chirp),
                ("samples", d.samples.is_some(), sampled, sampled),
            ] {
                if present && !wanted {
                    return Err(config_error(
                        &format!("pulse.detuning.{name}"),
                        format!("not used by {:?} detuning", d.kind),
                    ));
                }
                if required && !present {
                    return Err(config_error(
                        &format!("pulse.detuning.{name}"),
                        format!("required for {:?} detuning", d.kind),
                    ));
                }
            }
        }
        let out = &self.output;
        if out.format == OutputFormat::Csv && out.what.propagator() {
            return Err(config_error(
                "output.what",
                "csv output holds populations only; use format = \"json\" for propagators",
            ));
        }
        if let Some(k) = out.initial_state {
            if k == 0 || k > spec.dim() {
                return Err(config_error(
                    "output.initial_state",
                    format!("must be a state index in 1..={} (got {k})", spec.dim()),
                ));
            }
        }
        Ok(())
    }

    /// The pulse described by the config, on `steps` grid intervals unless
    /// the config fixes its own.
    pub fn pulse_shape(&self, default_steps: usize) -> Result<PulseShape, CliError> {
        let p = &self.pulse;
        let envelope = match p.kind {
            PulseKind::Rectangular => Envelope::Rectangular,
            PulseKind::SinSquared => Envelope::SinSquared,
            PulseKind::Gaussian => Envelope::Gaussian {
                center: p.center.expect("validated"),
                width: p.width.expect("validated"),
            },
            PulseKind::Sampled => Envelope::Sampled(p.samples.clone().expect("validated")),
        };
        let detuning = match &p.detuning {
            None => Detuning::Constant(0.0),
            Some(d) => match d.kind {
                DetuningKind::Constant => Detuning::Constant(d.value.expect("validated")),
                DetuningKind::Chirp => Detuning::Chirp {
                    offset: d.offset.unwrap_or(0.0),
                    slope: d.slope.expect("validated"),
                },
                DetuningKind::Sampled => Detuning::Sampled(d.samples.clone().expect("validated")),
            },
        };
        let shape = PulseShape::new(envelope, complex(&p.peak_rabi), detuning, p.duration)?;
        Ok(shape.with_steps(p.steps.unwrap_or(default_steps))?)
    }

    /// The same config with every default made explicit.
    pub fn effective(&self, default_steps: usize) -> RunConfig {
        let mut cfg = self.clone();
        cfg.pulse.steps = Some(self.pulse.steps.unwrap_or(default_steps));
        cfg
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn check_steps(path: &str, steps: usize) -> Result<(), CliError> {
    if steps < 2 || !steps.is_multiple_of(2) {
        return Err(config_error(path, format!("must be an even number >= 2 (got {steps})")));
    }
    Ok(())
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().trim_end().to_string();
        let location = inner
            .span()
            .map(|span| {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!(" (line {line})")
            })
            .unwrap_or_default();
        if path == "." {
            CliError::Config(format!("{msg}{location}"))
        } else {
            CliError::Config(format!("{path}: {msg}{location}"))
        }
    })
}

/// Parses and validates a simulation config.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = parse_toml(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Grid steps from the environment override, falling back to the default.
pub fn steps_from_env(value: Option<&str>) -> Result<usize, CliError> {
    match value {
        None => Ok(DEFAULT_STEPS),
        Some(v) => {
            let steps: usize = v
                .trim()
                .parse()
                .map_err(|_| config_error(STEPS_ENV, format!("expected an integer, got {v:?}")))?;
            check_steps(STEPS_ENV, steps)?;
            Ok(steps)
        }
    }
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub n: u32,
    pub propagator: CMatrix,
    pub max_abs_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub system: &'static str,
    pub dim: usize,
    pub results: Vec<TrainResult>,
}

impl SimulationReport {
    pub fn max_deviation(&self) -> Option<f64> {
        self.results.iter().filter_map(|r| r.max_abs_deviation).reduce(f64::max)
    }
}

/// Evaluates every requested train length; `steps` is the grid used when the
/// config does not fix one.
pub fn simulate(cfg: &RunConfig, verify: bool, steps: usize) -> Result<SimulationReport, CliError> {
    let spec = cfg.system_spec()?;
    let n_values = cfg.n_values()?;
    let pulse = cfg.pulse_shape(steps)?;
    let mut results = Vec::with_capacity(n_values.len());
    let oracle_single = if verify { Some(oracle_propagator(&spec, &pulse)?) } else { None };
    for &n in &n_values {
        let propagator = formula_propagator(&spec, &pulse, n)?;
        let max_abs_deviation = oracle_single
            .as_ref()
            .map(|single| max_abs_diff(&propagator, &oracle::matrix_power(single, n)));
        results.push(TrainResult { n, propagator, max_abs_deviation });
    }
    Ok(SimulationReport { system: spec.name(), dim: spec.dim(), results })
}

fn formula_propagator(spec: &SystemSpec, pulse: &PulseShape, n: u32) -> Result<CMatrix, CliError> {
    Ok(match spec {
        SystemSpec::Majorana(m) => MajoranaSystem::new(*m, pulse.clone())?.npass(n)?.into_matrix(),
        SystemSpec::Ms(omega) => multi_pass(&MSSystem::new(omega.clone(), pulse.clone())?, n)?.matrix,
        pod => {
            let w = pod.pod_couplings().expect("single excited state");
            let bright = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let pair = solve_ms_pair(bright, pulse)?;
            match pod {
                SystemSpec::Lambda(w1, w2) => lambda_npass(*w1, *w2, &pair.ck, pair.delta, n)?,
                SystemSpec::Tripod(w3) => tripod_npass(*w3, &pair.ck, pair.delta, n)?,
                _ => multipod_npass(&w, &pair.ck, pair.delta, n)?,
            }
        }
    })
}

/// Single-pass propagator from direct integration of the full Hamiltonian.
fn oracle_propagator(spec: &SystemSpec, pulse: &PulseShape) -> Result<CMatrix, CliError> {
    let u = match spec {
        SystemSpec::Majorana(m) => {
            let h = TimeDependentHamiltonian::new(*m, |t| {
                build_hamiltonian(*m, pulse.rabi_at(t), pulse.detuning_at(t)).expect("validated M")
            });
            oracle::integrate(&h, pulse.duration(), DEFAULT_ORACLE_STEPS)?
        }
        other => {
            let omega = match other {
                SystemSpec::Ms(omega) => omega.clone(),
                pod => {
                    let w = pod.pod_couplings().expect("single excited state");
                    CMatrix::from_column_slice(w.len(), 1, &w)
                }
            };
            let system = MSSystem::new(omega, pulse.clone())?;
            let h = TimeDependentHamiltonian::new(system.dim(), |t| system.hamiltonian_at(t));
            oracle::integrate(&h, pulse.duration(), DEFAULT_ORACLE_STEPS)?
        }
    };
    Ok(u)
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn population_rows(report: &SimulationReport, initial: Option<usize>) -> Vec<(u32, usize, usize, f64)> {
    let froms: Vec<usize> = match initial {
        Some(k) => vec![k],
        None => (1..=report.dim).collect(),
    };
    let mut rows = Vec::new();
    for r in &report.results {
        for &from in &froms {
            for to in 1..=report.dim {
                rows.push((r.n, from, to, r.propagator[(to - 1, from - 1)].norm_sqr()));
            }
        }
    }
    rows
}

/// `N,from,to,population` rows.
pub fn render_csv(report: &SimulationReport, initial: Option<usize>) -> String {
    let mut out = String::from("N,from,to,population\n");
    for (n, from, to, p) in population_rows(report, initial) {
        let _ = writeln!(out, "{n},{from},{to},{}", fmt_num(p));
    }
    out
}

pub fn render_json(report: &SimulationReport, what: OutputWhat, initial: Option<usize>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "  \"system\": \"{}\",", report.system);
    let _ = writeln!(out, "  \"dim\": {},", report.dim);
    let _ = writeln!(out, "  \"results\": [");
    for (idx, r) in report.results.iter().enumerate() {
        let mut fields: Vec<String> = vec![format!("      \"N\": {}", r.n)];
        if what.propagator() {
            let rows: Vec<String> = r
                .propagator
                .row_iter()
                .map(|row| {
                    let entries: Vec<String> =
                        row.iter().map(|z| format!("[{}, {}]", fmt_num(z.re), fmt_num(z.im))).collect();
                    format!("        [{}]", entries.join(", "))
                })
                .collect();
            fields.push(format!("      \"propagator\": [\n{}\n      ]", rows.join(",\n")));
        }
        if what.populations() {
            let single = SimulationReport { system: report.system, dim: report.dim, results: vec![r.clone()] };
            let pops: Vec<String> = population_rows(&single, initial)
                .into_iter()
                .map(|(_, from, to, p)| {
                    format!("        {{\"from\": {from}, \"to\": {to}, \"population\": {}}}", fmt_num(p))
                })
                .collect();
            fields.push(format!("      \"populations\": [\n{}\n      ]", pops.join(",\n")));
        }
        if let Some(d) = r.max_abs_deviation {
            fields.push(format!("      \"max_abs_deviation\": {}", fmt_num(d)));
        }
        let sep = if idx + 1 < report.results.len() { "," } else { "" };
        let _ = writeln!(out, "    {{\n{}\n    }}{sep}", fields.join(",\n"));
    }
    let _ = writeln!(out, "  ]");
    let _ = writeln!(out, "}}");
    out
}

/// The report in the configured output format.
pub fn render(report: &SimulationReport, output: &OutputConfig) -> String {
    match output.format {
        OutputFormat::Csv => render_csv(report, output.initial_state),
        OutputFormat::Json => render_json(report, output.what, output.initial_state),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoConfig {
    pub tomo: TomoSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TomoModel {
    TwoState,
    Majorana,
    Multipod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoSection {
    pub model: TomoModel,
    /// `M` for a Majorana chain, `L` for a multipod.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    pub target_theta: f64,
    pub epsilon: f64,
    pub n_values: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    /// `[from, to]`, 1-based.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<[usize; 2]>,
}

pub fn parse_tomo_config(text: &str) -> Result<TomoConfig, CliError> {
    let cfg: TomoConfig = parse_toml(text)?;
    let t = &cfg.tomo;
    match (t.model, t.states) {
        (TomoModel::TwoState, Some(_)) => {
            return Err(config_error("tomo.states", "not used by the two-state model"));
        }
        (TomoModel::Majorana | TomoModel::Multipod, None) => {
            return Err(config_error("tomo.states", "required for majorana and multipod models"));
        }
        _ => {}
    }
    if t.n_values.is_empty() {
        return Err(config_error("tomo.n_values", "must not be empty"));
    }
    if let Some(i) = t.n_values.iter().position(|&n| n == 0) {
        return Err(config_error(&format!("tomo.n_values[{i}]"), "N >= 1 required"));
    }
    if t.shots == Some(0) {
        return Err(config_error("tomo.shots", "must be positive"));
    }
    Ok(cfg)
}

/// Output text of `tomo`.
pub fn run_tomo(cfg: &TomoConfig, seed: u64) -> Result<String, CliError> {
    let t = &cfg.tomo;
    let kind = match t.model {
        TomoModel::TwoState => ModelKind::TwoState,
        TomoModel::Majorana => ModelKind::Majorana(t.states.expect("validated")),
        TomoModel::Multipod => ModelKind::Multipod(t.states.expect("validated")),
    };
    let model = AmplificationModel::new(kind, t.target_theta, t.observable.map(|[f, to]| (f, to)))?;
    let series = amplified_series(&model, t.epsilon, &t.n_values, t.shots, seed)?;
    let distinct: BTreeSet<u32> = t.n_values.iter().copied().collect();
    let estimate = if distinct.len() >= 2 {
        estimate_error(&model, &series)?
    } else if distinct.contains(&1) {
        estimate_single_pass(&model, &series)?
    } else {
        return Err(config_error("tomo.n_values", "need two distinct N, or only N = 1"));
    };
    let (from, to) = model.observable();
    let mut out = String::from("{\n");
    let model_name = match t.model {
        TomoModel::TwoState => "two-state",
        TomoModel::Majorana => "majorana",
        TomoModel::Multipod => "multipod",
    };
    let _ = writeln!(out, "  \"model\": \"{model_name}\",");
    let _ = writeln!(out, "  \"dim\": {},", kind.dim());
    let _ = writeln!(out, "  \"observable\": {{\"from\": {from}, \"to\": {to}}},");
    let _ = writeln!(out, "  \"target_theta\": {},", fmt_num(t.target_theta));
    let _ = writeln!(out, "  \"epsilon\": {},", fmt_num(t.epsilon));
    let _ = writeln!(out, "  \"seed\": {seed},");
    match t.shots {
        Some(s) => {
            let _ = writeln!(out, "  \"shots\": {s},");
        }
        None => {
            let _ = writeln!(out, "  \"shots\": null,");
        }
    }
    let points: Vec<String> = series
        .n_values()
        .iter()
        .zip(series.populations())
        .map(|(n, p)| format!("    {{\"N\": {n}, \"population\": {}}}", fmt_num(*p)))
        .collect();
    let _ = writeln!(out, "  \"series\": [\n{}\n  ],", points.join(",\n"));
    let _ = writeln!(
        out,
        "  \"estimate\": {{\"epsilon\": {}, \"residual\": {}}}",
        fmt_num(estimate.epsilon),
        fmt_num(estimate.residual)
    );
    out.push_str("}\n");
    Ok(out)
}

/// Largest elementwise difference between two `simulate` JSON outputs,
/// over propagators and populations alike.
pub fn compare_outputs(a: &str, b: &str) -> Result<f64, CliError> {
    let parse = |text: &str, which: &str| -> Result<serde_json::Value, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("{which}: not valid JSON: {e}")))
    };
    let (a, b) = (parse(a, "a")?, parse(b, "b")?);
    let results = |v: &serde_json::Value, which: &str| -> Result<Vec<serde_json::Value>, CliError> {
        v.get("results")
            .and_then(|r| r.as_array())
            .cloned()
            .ok_or_else(|| CliError::Config(format!("{which}: missing \"results\" array")))
    };
    let (ra, rb) = (results(&a, "a")?, results(&b, "b")?);
    if a.get("dim") != b.get("dim") || ra.len() != rb.len() {
        return Err(CliError::Domain("outputs describe different systems or train lengths".into()));
    }
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for (x, y) in ra.iter().zip(&rb) {
        if x.get("N") != y.get("N") {
            return Err(CliError::Domain(format!("train lengths differ: {:?} vs {:?}", x.get("N"), y.get("N"))));
        }
        for key in ["propagator", "populations"] {
            if let (Some(px), Some(py)) = (x.get(key), y.get(key)) {
                let (fx, fy) = (flatten_numbers(px), flatten_numbers(py));
                if fx.len() != fy.len() {
                    return Err(CliError::Domain(format!("{key} entries differ in shape")));
                }
                for (u, v) in fx.iter().zip(&fy) {
                    worst = worst.max((u - v).abs());
                }
                compared += fx.len();
            }
        }
    }
    if compared == 0 {
        return Err(CliError::Domain("outputs share no propagator or population data".into()));
    }
    Ok(worst)
}

fn flatten_numbers(v: &serde_json::Value) -> Vec<f64> {
    match v {
        serde_json::Value::Number(n) => vec![n.as_f64().unwrap_or(f64::NAN)],
        serde_json::Value::Array(items) => items.iter().flat_map(flatten_numbers).collect(),
        serde_json::Value::Object(map) => map
            .iter()
            .filter(|(k, _)| k.as_str() == "population")
            .flat_map(|(_, v)| flatten_numbers(v))
            .collect(),
        _ => Vec::new(),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pulsetrain: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, verify, out } => {
            let cfg = parse_config(&read(&config)?)?;
            let steps = steps_from_env(std::env::var(STEPS_ENV).ok().as_deref())?;
            let verify = verify || cfg.verify;
            let report = simulate(&cfg, verify, steps)?;
            if cfg.output.format == OutputFormat::Csv {
                // CSV rows carry populations only; deviations go to stderr
                for r in &report.results {
                    if let Some(d) = r.max_abs_deviation {
                        eprintln!("max_abs_deviation N={}: {}", r.n, fmt_num(d));
                    }
                }
            }
            emit(&render(&report, &cfg.output), out.as_deref())?;
            match report.max_deviation() {
                Some(d) if !(d <= VERIFY_LIMIT) => Err(CliError::Deviation { deviation: d, limit: VERIFY_LIMIT }),
                _ => Ok(()),
            }
        }
        Command::Tomo { config, seed, out } => {
            let cfg = parse_tomo_config(&read(&config)?)?;
            emit(&run_tomo(&cfg, seed)?, out.as_deref())
        }
        Command::Verify { a, b, tol } => {
            let deviation = compare_outputs(&read(&a)?, &read(&b)?)?;
            println!("max_abs_deviation: {}", fmt_num(deviation));
            if deviation <= tol {
                Ok(())
            } else {
                Err(CliError::Deviation { deviation, limit: tol })
            }
        }
    }
}
