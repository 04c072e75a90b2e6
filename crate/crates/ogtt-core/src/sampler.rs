//! Affine-invariant ensemble MCMC with the stretch move.
//!
//! An ensemble of `K` walkers explores parameter space in two half-ensemble
//! sweeps per iteration. For walker `X` with partner `Y` drawn from the
//! complementary half, the proposal is `X' = Y + z (X - Y)` with `z` drawn from
//! the density proportional to `1/sqrt(z)` on `[1/a, a]`, accepted with
//! probability `min(1, z^{d-1} pi(X') / pi(X))` for `d = 4`. Each walker owns
//! an independent deterministic random stream, so serial and per-walker
//! parallel execution produce identical chains.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::{log_posterior, NoiseModel, PriorBox};
use crate::cohort::DeviationData;
use crate::seeds::derive_seed;
use crate::{ParamVector, PARAM_DIM};

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("walker count {0} must be even and at least {min}", min = 2 * PARAM_DIM + 2)]
    BadWalkerCount(usize),
    #[error("stretch scale {0} must exceed 1")]
    BadStretchScale(f64),
    #[error("burn-in {burn_in} must be shorter than the total iterations {iterations}")]
    BadBurnIn { burn_in: usize, iterations: usize },
    #[error("thinning stride must be positive")]
    ZeroThin,
    /// Could not find a finite-density point for a walker; the target is -inf
    /// on (essentially) the whole box.
    #[error("walker {walker}: no finite-density start after {attempts} draws")]
    InitFailure { walker: usize, attempts: usize },
}

/// Stretch-move sampler settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Walker count `K`; even and at least `2d + 2`.
    pub walkers: usize,
    /// Stretch parameter `a`.
    pub stretch_scale: f64,
    /// Total iterations (each updates every walker once).
    pub iterations: usize,
    /// Iterations discarded before retaining samples.
    pub burn_in: usize,
    /// Retain every `thin`-th post-burn-in iteration.
    pub thin: usize,
    pub seed: u64,
    /// Keep the raw per-iteration chain for export.
    #[serde(default)]
    pub store_raw: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            walkers: 32,
            stretch_scale: 2.0,
            iterations: 20_000,
            burn_in: 5_000,
            thin: 10,
            seed: 0,
            store_raw: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if !self.walkers.is_multiple_of(2) || self.walkers < 2 * PARAM_DIM + 2 {
            return Err(SamplerError::BadWalkerCount(self.walkers));
        }
        if self.stretch_scale <= 1.0 || self.stretch_scale.is_nan() {
            return Err(SamplerError::BadStretchScale(self.stretch_scale));
        }
        if self.burn_in >= self.iterations {
            return Err(SamplerError::BadBurnIn {
                burn_in: self.burn_in,
                iterations: self.iterations,
            });
        }
        if self.thin == 0 {
            return Err(SamplerError::ZeroThin);
        }
        Ok(())
    }
}

/// Walker positions and cached log-density values at one iteration.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    positions: Vec<ParamVector>,
    log_density: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
    stretch_scale: f64,
    iteration: usize,
}

const WALKER_STREAM: u64 = 31;
const MAX_INIT_ATTEMPTS: usize = 10_000;

/// Draws `z` from the density proportional to `1/sqrt(z)` on `[1/a, a]`
/// by inverse CDF: `z = ((a - 1) u + 1)^2 / a`.
fn stretch_factor(scale: f64, unit: f64) -> f64 {
    let r = (scale - 1.0) * unit + 1.0;
    r * r / scale
}

/// Acceptance rule of the stretch move: accept when
/// `(d - 1) ln z + ln pi(X') - ln pi(X) > ln u`.
fn accept_decision(z: f64, log_new: f64, log_old: f64, unit: f64) -> bool {
    if log_new == f64::NEG_INFINITY || log_new.is_nan() {
        return false;
    }
    let ln_ratio = (PARAM_DIM as f64 - 1.0) * z.ln() + log_new - log_old;
    ln_ratio > unit.ln()
}

impl EnsembleState {
    /// Draws `K` walkers uniformly in the box, redrawing each until its target
    /// value is finite. Deterministic under `config.seed`.
    pub fn init<F: Fn(&ParamVector) -> f64>(
        prior: &PriorBox,
        config: &SamplerConfig,
        target: F,
    ) -> Result<Self, SamplerError> {
        config.validate()?;
        let mut positions = Vec::with_capacity(config.walkers);
        let mut log_density = Vec::with_capacity(config.walkers);
        let mut rngs = Vec::with_capacity(config.walkers);
        for w in 0..config.walkers {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(config.seed, WALKER_STREAM, w as u64));
            let mut found = None;
            for _ in 0..MAX_INIT_ATTEMPTS {
                let u = prior.sample(&mut rng);
                let ld = target(&u);
                if ld.is_finite() {
                    found = Some((u, ld));
                    break;
                }
            }
            let (u, ld) = found.ok_or(SamplerError::InitFailure {
                walker: w,
                attempts: MAX_INIT_ATTEMPTS,
            })?;
            positions.push(u);
            log_density.push(ld);
            rngs.push(rng);
        }
        Ok(Self {
            positions,
            log_density,
            rngs,
            stretch_scale: config.stretch_scale,
            iteration: 0,
        })
    }

    /// Draws `K` walkers uniformly in a small box around `center` (clamped to
    /// the prior box), redrawing each until its target value is finite. The
    /// half-width per coordinate is `relative_radius` times the prior width.
    ///
    /// Starting the ensemble concentrated at the MAP point keeps every walker
    /// in the dominant posterior mode; with uniform-in-box starts, walkers
    /// that land in remote low-mass modes can never leave them (the stretch
    /// move makes no inter-mode proposals) and distort marginal weights.
    pub fn init_ball<F: Fn(&ParamVector) -> f64>(
        center: &ParamVector,
        relative_radius: f64,
        prior: &PriorBox,
        config: &SamplerConfig,
        target: F,
    ) -> Result<Self, SamplerError> {
        let mut bounds = [(0.0, 0.0); PARAM_DIM];
        for d in 0..PARAM_DIM {
            let radius = relative_radius * prior.width(d);
            let (lo, hi) = prior.bounds[d];
            bounds[d] = (
                (center[d] - radius).clamp(lo, hi),
                (center[d] + radius).clamp(lo, hi),
            );
        }
        let ball = PriorBox { bounds };
        Self::init(&ball, config, target)
    }

    /// Builds an ensemble from explicit walker positions (used by the
    /// affine-invariance checks). Every position must have finite density.
    pub fn from_positions<F: Fn(&ParamVector) -> f64>(
        positions: Vec<ParamVector>,
        config: &SamplerConfig,
        target: F,
    ) -> Result<Self, SamplerError> {
        config.validate()?;
        if positions.len() != config.walkers {
            return Err(SamplerError::BadWalkerCount(positions.len()));
        }
        let log_density: Vec<f64> = positions.iter().map(target).collect();
        if let Some(w) = log_density.iter().position(|ld| !ld.is_finite()) {
            return Err(SamplerError::InitFailure { walker: w, attempts: 0 });
        }
        let rngs = (0..config.walkers)
            .map(|w| ChaCha8Rng::seed_from_u64(derive_seed(config.seed, WALKER_STREAM, w as u64)))
            .collect();
        Ok(Self {
            positions,
            log_density,
            rngs,
            stretch_scale: config.stretch_scale,
            iteration: 0,
        })
    }

    pub fn positions(&self) -> &[ParamVector] {
        &self.positions
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Advances the ensemble one iteration (two half-ensemble sweeps);
    /// returns the number of accepted proposals.
    pub fn stretch_move<F: Fn(&ParamVector) -> f64>(&mut self, target: &F) -> usize {
        let half = self.positions.len() / 2;
        let scale = self.stretch_scale;
        let mut accepted = 0;

        {
            let (active, complement) = self.positions.split_at_mut(half);
            let (ld_active, _) = self.log_density.split_at_mut(half);
            let (rng_active, _) = self.rngs.split_at_mut(half);
            for i in 0..half {
                accepted += usize::from(move_walker(
                    &mut active[i],
                    &mut ld_active[i],
                    &mut rng_active[i],
                    complement,
                    scale,
                    target,
                ));
            }
        }
        {
            let (complement, active) = self.positions.split_at_mut(half);
            let (_, ld_active) = self.log_density.split_at_mut(half);
            let (_, rng_active) = self.rngs.split_at_mut(half);
            for i in 0..half {
                accepted += usize::from(move_walker(
                    &mut active[i],
                    &mut ld_active[i],
                    &mut rng_active[i],
                    complement,
                    scale,
                    target,
                ));
            }
        }

        self.iteration += 1;
        accepted
    }
}

fn move_walker<F: Fn(&ParamVector) -> f64>(
    position: &mut ParamVector,
    log_density: &mut f64,
    rng: &mut ChaCha8Rng,
    complement: &[ParamVector],
    scale: f64,
    target: &F,
) -> bool {
    let partner = complement[rng.random_range(0..complement.len())];
    let z = stretch_factor(scale, rng.random::<f64>());
    let mut proposal = [0.0; PARAM_DIM];
    for d in 0..PARAM_DIM {
        proposal[d] = partner[d] + z * (position[d] - partner[d]);
    }
    let log_new = target(&proposal);
    if accept_decision(z, log_new, *log_density, rng.random::<f64>()) {
        *position = proposal;
        *log_density = log_new;
        true
    } else {
        false
    }
}

/// Raw chain retained when `store_raw` is set: iteration-major walker states.
#[derive(Debug, Clone)]
pub struct RawChain {
    pub walkers: usize,
    pub iterations: usize,
    /// `positions[iter * walkers + walker]`.
    pub positions: Vec<ParamVector>,
    pub log_density: Vec<f64>,
}

/// Post-burn-in, thinned, walker-flattened sample set.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    pub samples: Vec<ParamVector>,
    pub log_density: Vec<f64>,
    /// Accepted / proposed over post-burn-in iterations.
    pub acceptance_rate: f64,
    pub raw: Option<RawChain>,
}

/// Runs the sampler on an arbitrary log-density with uniform-in-box
/// initialization.
pub fn sample_target<F: Fn(&ParamVector) -> f64>(
    target: F,
    init_region: &PriorBox,
    config: &SamplerConfig,
) -> Result<PosteriorSample, SamplerError> {
    let state = EnsembleState::init(init_region, config, &target)?;
    Ok(run_from(state, target, config))
}

/// Continues a prepared ensemble; exposed for seed-matched experiments.
pub fn run_from<F: Fn(&ParamVector) -> f64>(
    mut state: EnsembleState,
    target: F,
    config: &SamplerConfig,
) -> PosteriorSample {
    let retained_iters = (config.iterations - config.burn_in).div_ceil(config.thin);
    let mut samples = Vec::with_capacity(retained_iters * config.walkers);
    let mut log_density = Vec::with_capacity(retained_iters * config.walkers);
    let mut raw = config.store_raw.then(|| RawChain {
        walkers: config.walkers,
        iterations: config.iterations,
        positions: Vec::with_capacity(config.iterations * config.walkers),
        log_density: Vec::with_capacity(config.iterations * config.walkers),
    });

    let mut accepted_after_burn_in = 0usize;
    for iter in 0..config.iterations {
        let accepted = state.stretch_move(&target);
        if iter >= config.burn_in {
            accepted_after_burn_in += accepted;
            if (iter - config.burn_in).is_multiple_of(config.thin) {
                samples.extend_from_slice(state.positions());
                log_density.extend_from_slice(state.log_density());
            }
        }
        if let Some(raw) = raw.as_mut() {
            raw.positions.extend_from_slice(state.positions());
            raw.log_density.extend_from_slice(state.log_density());
        }
    }

    let proposed = (config.iterations - config.burn_in) * config.walkers;
    PosteriorSample {
        samples,
        log_density,
        acceptance_rate: accepted_after_burn_in as f64 / proposed as f64,
        raw,
    }
}

/// Walker initialization strategy for posterior runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitStrategy {
    /// Uniform draws over the whole prior box.
    UniformBox,
    /// A small ball around a center point (typically the MAP estimate);
    /// the half-width is this fraction of each prior interval.
    Ball {
        center: ParamVector,
        relative_radius: f64,
    },
}

/// Samples the oscillator posterior of one patient with uniform-in-box
/// initialization.
pub fn run(
    y: &DeviationData,
    prior: &PriorBox,
    noise: &NoiseModel,
    config: &SamplerConfig,
) -> Result<PosteriorSample, SamplerError> {
    run_with_init(y, prior, noise, config, InitStrategy::UniformBox)
}

/// Samples the oscillator posterior with an explicit initialization strategy.
pub fn run_with_init(
    y: &DeviationData,
    prior: &PriorBox,
    noise: &NoiseModel,
    config: &SamplerConfig,
    init: InitStrategy,
) -> Result<PosteriorSample, SamplerError> {
    let target = |u: &ParamVector| log_posterior(u, y, prior, noise);
    let state = match init {
        InitStrategy::UniformBox => EnsembleState::init(prior, config, target)?,
        InitStrategy::Ball {
            center,
            relative_radius,
        } => EnsembleState::init_ball(&center, relative_radius, prior, config, target)?,
    };
    Ok(run_from(state, target, config))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> PriorBox {
        PriorBox::new([(0.0, 1.0); 4]).unwrap()
    }

    #[test]
    fn identity_stretch_with_equal_density_always_accepts() {
        for unit in [0.0, 0.3, 0.9999] {
            assert!(accept_decision(1.0, -3.5, -3.5, unit));
        }
    }

    #[test]
    fn proposals_outside_the_support_are_rejected() {
        for unit in [0.0, 0.5, 0.9999] {
            assert!(!accept_decision(1.3, f64::NEG_INFINITY, -1.0, unit));
        }
    }

    #[test]
    fn stretch_factor_spans_the_expected_interval() {
        let a = 2.0;
        assert!((stretch_factor(a, 0.0) - 0.5).abs() < 1e-15);
        assert!((stretch_factor(a, 1.0) - 2.0).abs() < 1e-15);
        for u in [0.1, 0.4, 0.8] {
            let z = stretch_factor(a, u);
            assert!((0.5..=2.0).contains(&z));
        }
    }

    #[test]
    fn init_on_a_constant_density_caches_equal_values() {
        let cfg = SamplerConfig { seed: 4, ..SamplerConfig::default() };
        let state = EnsembleState::init(&unit_box(), &cfg, |_| -1.25).unwrap();
        assert!(state.log_density().iter().all(|&ld| ld == -1.25));
        assert_eq!(state.positions().len(), 32);
    }

    #[test]
    fn init_is_deterministic_under_seed() {
        let cfg = SamplerConfig { seed: 11, ..SamplerConfig::default() };
        let a = EnsembleState::init(&unit_box(), &cfg, |_| 0.0).unwrap();
        let b = EnsembleState::init(&unit_box(), &cfg, |_| 0.0).unwrap();
        assert_eq!(a.positions(), b.positions());
    }

    #[test]
    fn point_box_collapses_all_walkers() {
        let point_box = PriorBox::new([(0.3, 0.3), (0.1, 0.1), (0.2, 0.2), (0.4, 0.4)]).unwrap();
        let cfg = SamplerConfig { seed: 2, ..SamplerConfig::default() };
        let state = EnsembleState::init(&point_box, &cfg, |_| 0.0).unwrap();
        assert!(state
            .positions()
            .iter()
            .all(|&p| p == [0.3, 0.1, 0.2, 0.4]));
    }

    #[test]
    fn init_failure_when_target_is_never_finite() {
        let cfg = SamplerConfig { seed: 1, ..SamplerConfig::default() };
        let err = EnsembleState::init(&unit_box(), &cfg, |_| f64::NEG_INFINITY).unwrap_err();
        assert!(matches!(err, SamplerError::InitFailure { walker: 0, .. }));
    }

    #[test]
    fn config_validation_catches_bad_settings() {
        let mut cfg = SamplerConfig { walkers: 7, ..SamplerConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.walkers = 8;
        assert!(cfg.validate().is_err(), "below 2d+2");
        cfg.walkers = 32;
        cfg.stretch_scale = 1.0;
        assert!(cfg.validate().is_err());
        cfg.stretch_scale = 2.0;
        cfg.burn_in = cfg.iterations;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sample_count_matches_the_retention_rule() {
        let cfg = SamplerConfig {
            iterations: 101,
            burn_in: 100,
            thin: 1,
            seed: 5,
            ..SamplerConfig::default()
        };
        let out = sample_target(|_| 0.0, &unit_box(), &cfg).unwrap();
        assert_eq!(out.samples.len(), cfg.walkers);
    }

    #[test]
    fn runs_are_deterministic_under_seed() {
        let cfg = SamplerConfig {
            iterations: 200,
            burn_in: 50,
            thin: 2,
            seed: 123,
            ..SamplerConfig::default()
        };
        let target = |u: &ParamVector| -> f64 {
            if u.iter().all(|x| (0.0..=1.0).contains(x)) {
                -u.iter().map(|x| x * x).sum::<f64>()
            } else {
                f64::NEG_INFINITY
            }
        };
        let a = sample_target(target, &unit_box(), &cfg).unwrap();
        let b = sample_target(target, &unit_box(), &cfg).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.acceptance_rate, b.acceptance_rate);
    }

    #[test]
    fn cached_values_stay_coherent_with_the_target() {
        let target = |u: &ParamVector| -> f64 {
            if u.iter().all(|x| (0.0..=1.0).contains(x)) {
                -(u[0] * 1.7 + u[1] * 0.3 + u[2] * u[2] + u[3]).sin()
            } else {
                f64::NEG_INFINITY
            }
        };
        let cfg = SamplerConfig { seed: 77, ..SamplerConfig::default() };
        let mut state = EnsembleState::init(&unit_box(), &cfg, target).unwrap();
        for _ in 0..250 {
            state.stretch_move(&target);
        }
        for (pos, &cached) in state.positions().iter().zip(state.log_density()) {
            assert_eq!(target(pos), cached, "cache must reproduce exactly");
        }
    }

    #[test]
    fn raw_chain_has_every_iteration() {
        let cfg = SamplerConfig {
            iterations: 40,
            burn_in: 10,
            thin: 3,
            seed: 6,
            store_raw: true,
            ..SamplerConfig::default()
        };
        let out = sample_target(|_| 0.0, &unit_box(), &cfg).unwrap();
        let raw = out.raw.expect("raw chain requested");
        assert_eq!(raw.positions.len(), 40 * cfg.walkers);
        assert_eq!(raw.log_density.len(), 40 * cfg.walkers);
    }
}
