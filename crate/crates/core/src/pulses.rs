//! Single-pulse field shapes and pulse-level integrals.
//!
//! A pulse is `Ω(t) = Ω₀ f(t)` with a real envelope `f` peaking at 1, together
//! with a detuning profile `Δ(t)`, both defined on `[0, T]`. The integrals
//! here use composite Simpson quadrature on the same uniform grid the
//! two-state integrator steps over.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Default number of uniform steps per pulse for quadrature and integration.
pub const DEFAULT_STEPS: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    Rectangular,
    /// `exp(-((t - center) / width)^2)`, truncated to `[0, T]`.
    Gaussian { center: f64, width: f64 },
    /// `sin^2(π t / T)`.
    SinSquared,
    /// Values on a uniform grid spanning `[0, T]`, linearly interpolated.
    /// Rescaled on construction so that the largest magnitude is 1.
    Sampled(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Detuning {
    Constant(f64),
    /// `offset + slope * t`.
    Chirp { offset: f64, slope: f64 },
    /// Values on a uniform grid spanning `[0, T]`, linearly interpolated.
    Sampled(Vec<f64>),
}

impl Detuning {
    fn at(&self, t: f64, duration: f64) -> f64 {
        match self {
            Detuning::Constant(d) => *d,
            Detuning::Chirp { offset, slope } => offset + slope * t,
            Detuning::Sampled(v) => interpolate(v, t, duration),
        }
    }

    /// The same profile multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Detuning {
        match self {
            Detuning::Constant(d) => Detuning::Constant(c * d),
            Detuning::Chirp { offset, slope } => Detuning::Chirp {
                offset: c * offset,
                slope: c * slope,
            },
            Detuning::Sampled(v) => Detuning::Sampled(v.iter().map(|x| c * x).collect()),
        }
    }
}

/// One pulse of the train. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape {
    envelope: Envelope,
    peak_rabi: C64,
    detuning: Detuning,
    duration: f64,
    steps: usize,
}

impl PulseShape {
    pub fn new(envelope: Envelope, peak_rabi: C64, detuning: Detuning, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidPulse(format!(
                "duration must be positive and finite, got {duration}"
            )));
        }
        if !(peak_rabi.re.is_finite() && peak_rabi.im.is_finite()) {
            return Err(Error::InvalidPulse("peak Rabi frequency is not finite".into()));
        }
        let envelope = match envelope {
            Envelope::Gaussian { center, width } => {
                if !(width.is_finite() && width > 0.0) {
                    return Err(Error::InvalidPulse(format!(
                        "gaussian width must be positive, got {width}"
                    )));
                }
                if !(0.0..=duration).contains(&center) {
                    return Err(Error::InvalidPulse(format!(
                        "gaussian center {center} lies outside [0, {duration}]"
                    )));
                }
                Envelope::Gaussian { center, width }
            }
            Envelope::Sampled(values) => {
                check_samples("envelope", &values)?;
                let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if peak > 0.0 {
                    Envelope::Sampled(values.iter().map(|v| v / peak).collect())
                } else {
                    Envelope::Sampled(values)
                }
            }
            other => other,
        };
        match &detuning {
            Detuning::Constant(d) if !d.is_finite() => {
                return Err(Error::InvalidPulse("detuning is not finite".into()))
            }
            Detuning::Chirp { offset, slope } if !(offset.is_finite() && slope.is_finite()) => {
                return Err(Error::InvalidPulse("chirp parameters are not finite".into()))
            }
            Detuning::Sampled(values) => check_samples("detuning", values)?,
            _ => {}
        }
        Ok(PulseShape {
            envelope,
            peak_rabi,
            detuning,
            duration,
            steps: DEFAULT_STEPS,
        })
    }

    /// Constant-amplitude pulse with constant detuning.
    pub fn rectangular(peak_rabi: C64, detuning: f64, duration: f64) -> Result<Self> {
        Self::new(Envelope::Rectangular, peak_rabi, Detuning::Constant(detuning), duration)
    }

    /// Overrides the grid resolution. Must be even and at least 2 (Simpson).
    pub fn with_steps(mut self, steps: usize) -> Result<Self> {
        if steps < 2 || !steps.is_multiple_of(2) {
            return Err(Error::InvalidPulse(format!(
                "grid steps must be an even number >= 2, got {steps}"
            )));
        }
        self.steps = steps;
        Ok(self)
    }

    /// Same shape with the peak Rabi frequency multiplied by `factor`.
    pub fn with_rabi_scaled(&self, factor: f64) -> Self {
        PulseShape {
            peak_rabi: self.peak_rabi * factor,
            ..self.clone()
        }
    }

    /// Same shape with the detuning profile replaced.
    pub fn with_detuning(&self, detuning: Detuning) -> Result<Self> {
        let p = Self::new(self.envelope.clone(), self.peak_rabi, detuning, self.duration)?;
        p.with_steps(self.steps)
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    pub fn detuning(&self) -> &Detuning {
        &self.detuning
    }

    pub fn peak_rabi(&self) -> C64 {
        self.peak_rabi
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// True when `Δ(t)` vanishes identically.
    pub fn is_resonant(&self) -> bool {
        match &self.detuning {
            Detuning::Constant(d) => *d == 0.0,
            Detuning::Chirp { offset, slope } => *offset == 0.0 && *slope == 0.0,
            Detuning::Sampled(v) => v.iter().all(|x| *x == 0.0),
        }
    }

    /// `(Ω(t), Δ(t))` for `t` in `[0, T]`.
    pub fn evaluate(&self, t: f64) -> Result<(C64, f64)> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::Domain(format!(
                "time {t} lies outside the pulse interval [0, {}]",
                self.duration
            )));
        }
        Ok((self.rabi_at(t), self.detuning_at(t)))
    }

    /// Envelope `f(t)`; `t` is clamped to `[0, T]`.
    pub fn envelope_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration);
        match &self.envelope {
            Envelope::Rectangular => 1.0,
            Envelope::Gaussian { center, width } => {
                let x = (t - center) / width;
                (-x * x).exp()
            }
            Envelope::SinSquared => {
                let s = (PI * t / self.duration).sin();
                s * s
            }
            Envelope::Sampled(v) => interpolate(v, t, self.duration),
        }
    }

    /// `Ω₀ f(t)`; `t` is clamped to `[0, T]`.
    pub fn rabi_at(&self, t: f64) -> C64 {
        self.peak_rabi * self.envelope_at(t)
    }

    /// `Δ(t)`; `t` is clamped to `[0, T]`.
    pub fn detuning_at(&self, t: f64) -> f64 {
        self.detuning.at(t.clamp(0.0, self.duration), self.duration)
    }

    /// `δ = ∫₀ᵀ Δ(t) dt`, exact for every detuning profile.
    pub fn accumulated_detuning(&self) -> f64 {
        let t = self.duration;
        match &self.detuning {
            Detuning::Constant(d) => d * t,
            Detuning::Chirp { offset, slope } => offset * t + 0.5 * slope * t * t,
            Detuning::Sampled(v) => {
                let inner: f64 = v[1..v.len() - 1].iter().sum();
                (0.5 * (v[0] + v[v.len() - 1]) + inner) * t / (v.len() - 1) as f64
            }
        }
    }

    /// `A = ∫₀ᵀ |Ω(t)| dt`.
    pub fn pulse_area(&self) -> f64 {
        let amp = self.peak_rabi.norm();
        if amp == 0.0 {
            return 0.0;
        }
        match self.envelope {
            Envelope::Rectangular => amp * self.duration,
            _ => amp * simpson(self.steps, self.duration, |t| self.envelope_at(t).abs()),
        }
    }
}

fn check_samples(what: &str, values: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::InvalidPulse(format!(
            "sampled {what} needs at least 2 grid values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidPulse(format!("sampled {what} contains non-finite values")));
    }
    Ok(())
}

/// Linear interpolation of uniformly spaced samples covering `[0, duration]`.
fn interpolate(values: &[f64], t: f64, duration: f64) -> f64 {
    let intervals = values.len() - 1;
    let x = (t / duration * intervals as f64).clamp(0.0, intervals as f64);
    let i = (x.floor() as usize).min(intervals - 1);
    let frac = x - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

/// Composite Simpson rule over `[0, duration]` with `steps` (even) intervals.
pub(crate) fn simpson(steps: usize, duration: f64, g: impl Fn(f64) -> f64) -> f64 {
    debug_assert!(steps >= 2 && steps.is_multiple_of(2));
    let h = duration / steps as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..steps {
        let v = g(i as f64 * h);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (g(0.0) + 4.0 * odd + 2.0 * even + g(duration))
}
