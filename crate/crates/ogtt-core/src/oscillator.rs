//! Damped-oscillator glucose deviation model.
//!
//! The glucose deviation from the fasting level follows
//! `g(t) = A e^{-alpha t} cos(omega t - delta)`, the closed-form solution of
//! `g'' + 2 alpha g' + omega0^2 g = 0` in the underdamped regime
//! `alpha^2 < omega0^2`, with `omega = sqrt(omega0^2 - alpha^2)`. The second-order
//! equation is itself the reduction of a linear two-compartment glucose/hormone
//! system with nonnegative rate constants.
//!
//! [`integrate_ode`] provides a fixed-step fourth-order integration of the same
//! equation and serves as an independent numerical oracle for the closed form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ParamVector;

/// Errors produced by model construction and the ODE oracle.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    /// The rate combination violates `alpha^2 < omega0^2`.
    #[error("not underdamped: damping {damping} vs natural frequency {natural_frequency}")]
    NotUnderdamped {
        damping: f64,
        natural_frequency: f64,
    },
    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Parameters of the closed-form deviation curve, `u = (A, alpha, omega, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    /// Amplitude `A` (mg/dl); nonnegative.
    #[serde(rename = "A")]
    pub amplitude: f64,
    /// Damping rate `alpha` (1/min); nonnegative.
    #[serde(rename = "alpha")]
    pub damping: f64,
    /// Damped angular frequency `omega` (rad/min); positive.
    #[serde(rename = "omega")]
    pub frequency: f64,
    /// Phase `delta` (rad).
    #[serde(rename = "delta")]
    pub phase: f64,
}

impl OscillatorParams {
    /// Validating constructor.
    pub fn new(amplitude: f64, damping: f64, frequency: f64, phase: f64) -> Result<Self, ModelError> {
        let p = Self {
            amplitude,
            damping,
            frequency,
            phase,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from the natural frequency `omega0`, enforcing underdamping
    /// and setting `omega = sqrt(omega0^2 - alpha^2)`.
    pub fn from_natural_frequency(
        amplitude: f64,
        damping: f64,
        natural_frequency: f64,
        phase: f64,
    ) -> Result<Self, ModelError> {
        if damping * damping >= natural_frequency * natural_frequency
            || damping.is_nan()
            || natural_frequency.is_nan()
        {
            return Err(ModelError::NotUnderdamped {
                damping,
                natural_frequency,
            });
        }
        let frequency = (natural_frequency * natural_frequency - damping * damping).sqrt();
        Self::new(amplitude, damping, frequency, phase)
    }

    /// Checks the type invariants.
    pub fn validate(&self) -> Result<(), ModelError> {
        let all_finite = self.amplitude.is_finite()
            && self.damping.is_finite()
            && self.frequency.is_finite()
            && self.phase.is_finite();
        if !all_finite {
            return Err(ModelError::InvalidParams("non-finite component".into()));
        }
        if self.amplitude < 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "amplitude {} < 0",
                self.amplitude
            )));
        }
        if self.damping < 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "damping {} < 0",
                self.damping
            )));
        }
        if self.frequency <= 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "frequency {} <= 0",
                self.frequency
            )));
        }
        Ok(())
    }

    /// Glucose deviation at time `t` minutes: `A e^{-alpha t} cos(omega t - delta)`.
    pub fn evaluate(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0, "time must be nonnegative");
        self.amplitude * (-self.damping * t).exp() * (self.frequency * t - self.phase).cos()
    }

    /// Element-wise [`evaluate`](Self::evaluate) over a nonempty time grid.
    ///
    /// This is the observation operator of the estimation problem when called on
    /// the 30/60/90/120 minute grid.
    pub fn predict(&self, times: &[f64]) -> Vec<f64> {
        assert!(!times.is_empty(), "predict requires a nonempty time grid");
        times.iter().map(|&t| self.evaluate(t)).collect()
    }

    /// Closed-form initial conditions `(g(0), g'(0))` of the deviation curve:
    /// `g(0) = A cos(delta)`, `g'(0) = A (omega sin(delta) - alpha cos(delta))`.
    pub fn initial_conditions(&self) -> (f64, f64) {
        let g0 = self.amplitude * self.phase.cos();
        let gdot0 =
            self.amplitude * (self.frequency * self.phase.sin() - self.damping * self.phase.cos());
        (g0, gdot0)
    }

    pub fn as_vector(&self) -> ParamVector {
        [self.amplitude, self.damping, self.frequency, self.phase]
    }

    /// Reinterprets a raw parameter vector; invariants are not re-checked.
    pub fn from_vector(u: ParamVector) -> Self {
        Self {
            amplitude: u[0],
            damping: u[1],
            frequency: u[2],
            phase: u[3],
        }
    }
}

/// Rate constants of the linearized two-compartment glucose/hormone system
/// plus the fasting operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompartmentParams {
    /// `m1` (1/min): glucose self-clearance rate.
    pub glucose_clearance: f64,
    /// `m2` (1/min per hormone unit): hormone-driven glucose removal.
    pub hormone_sensitivity: f64,
    /// `m3` (1/min): hormone clearance rate.
    pub hormone_clearance: f64,
    /// `m4` (hormone units per mg/dl per min): glucose-stimulated hormone release.
    pub hormone_release: f64,
    /// Fasting glucose level `G0` (mg/dl).
    pub fasting_glucose: f64,
    /// Fasting hormone level `H0` (arbitrary hormone units); carried but never estimated.
    pub fasting_hormone: f64,
}

/// Second-order reduction of [`CompartmentParams`]: `2 alpha = m1 + m3`,
/// `omega0^2 = m1 m3 + m2 m4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorRates {
    pub damping: f64,
    pub natural_frequency: f64,
}

impl CompartmentParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let rates = [
            self.glucose_clearance,
            self.hormone_sensitivity,
            self.hormone_clearance,
            self.hormone_release,
        ];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(ModelError::InvalidParams(
                "rate constants must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Eliminates the hormone compartment, returning the damping rate and natural
    /// frequency of the reduced second-order equation. Fails unless the result is
    /// strictly underdamped.
    pub fn oscillator_rates(&self) -> Result<OscillatorRates, ModelError> {
        self.validate()?;
        let damping = 0.5 * (self.glucose_clearance + self.hormone_clearance);
        let omega0_sq = self.glucose_clearance * self.hormone_clearance
            + self.hormone_sensitivity * self.hormone_release;
        let natural_frequency = omega0_sq.sqrt();
        if damping * damping >= omega0_sq {
            return Err(ModelError::NotUnderdamped {
                damping,
                natural_frequency,
            });
        }
        Ok(OscillatorRates {
            damping,
            natural_frequency,
        })
    }

    /// Minimal compartment realization of given second-order rates: `m1 = m3 = alpha`,
    /// `m2 = omega0^2 - alpha^2`, `m4 = 1`. Used by tests to drive the ODE oracle
    /// from closed-form parameters.
    pub fn from_rates(damping: f64, natural_frequency: f64) -> Result<Self, ModelError> {
        if damping * damping >= natural_frequency * natural_frequency
            || damping.is_nan()
            || natural_frequency.is_nan()
        {
            return Err(ModelError::NotUnderdamped {
                damping,
                natural_frequency,
            });
        }
        Ok(Self {
            glucose_clearance: damping,
            hormone_sensitivity: natural_frequency * natural_frequency - damping * damping,
            hormone_clearance: damping,
            hormone_release: 1.0,
            fasting_glucose: 0.0,
            fasting_hormone: 0.0,
        })
    }
}

/// Fixed-step fourth-order (classic Runge-Kutta) integration of
/// `g'' + 2 alpha g' + omega0^2 g = 0` from the given initial deviation and slope.
///
/// Returns the trajectory sampled at every step, `(t_k, g(t_k))` with
/// `t_k = k dt`, including `t = 0`. The step count is `ceil(t_end / dt)`.
/// Intended as an independent oracle for [`OscillatorParams::evaluate`].
pub fn integrate_ode(
    compartments: &CompartmentParams,
    g0: f64,
    gdot0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>, ModelError> {
    assert!(dt > 0.0, "step size must be positive");
    assert!(t_end > 0.0, "integration horizon must be positive");
    let rates = compartments.oscillator_rates()?;
    let two_alpha = 2.0 * rates.damping;
    let omega0_sq = rates.natural_frequency * rates.natural_frequency;

    let deriv = |g: f64, v: f64| -> (f64, f64) { (v, -two_alpha * v - omega0_sq * g) };

    let steps = (t_end / dt).ceil() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let (mut g, mut v) = (g0, gdot0);
    out.push((0.0, g));
    for k in 0..steps {
        let (k1g, k1v) = deriv(g, v);
        let (k2g, k2v) = deriv(g + 0.5 * dt * k1g, v + 0.5 * dt * k1v);
        let (k3g, k3v) = deriv(g + 0.5 * dt * k2g, v + 0.5 * dt * k2v);
        let (k4g, k4v) = deriv(g + dt * k3g, v + dt * k3v);
        g += dt / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        out.push(((k + 1) as f64 * dt, g));
    }
    Ok(out)
}
