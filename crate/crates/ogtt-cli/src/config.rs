//! Run configuration: a flat TOML file in which every key can also be set
//! from the command line (`--set key=value`, plus dedicated flags for the
//! common ones).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ogtt_core::bayes::{LikelihoodExponent, OptimizerConfig, PriorBox};
use ogtt_core::cohort::{ClassModel, CohortSpec, DeviationData};
use ogtt_core::sampler::SamplerConfig;
use ogtt_core::seeds::derive_seed;
use ogtt_core::svm::TrainConfig;

/// Root seed streams, one per pipeline stage.
pub const STREAM_SYNTH: u64 = 1;
pub const STREAM_FIT_OPTIMIZER: u64 = 2;
pub const STREAM_FIT_SAMPLER: u64 = 3;

fn default_gamma() -> f64 {
    5.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Synthetic-cohort overrides; anything unset falls back to the built-in
/// cluster defaults and the top-level `gamma`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortOverrides {
    /// Per-class patient counts in H, IFG, IGT, IFG-IGT, T2DM order.
    pub counts: Option<Vec<usize>>,
    /// Synthesis noise standard deviation; defaults to `gamma`.
    pub noise_sd: Option<f64>,
    /// Full replacement of the class clusters.
    pub classes: Option<Vec<ClassModel>>,
}

/// Prior-box overrides; the amplitude interval stays data driven unless
/// explicitly pinned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorOverrides {
    pub damping_max: f64,
    pub frequency_max: f64,
    /// Fixed amplitude interval `[lo, hi]` replacing the data-driven one.
    pub amplitude: Option<[f64; 2]>,
    /// Phase interval `[lo, hi]`.
    pub phase: [f64; 2],
}

impl Default for PriorOverrides {
    fn default() -> Self {
        Self {
            damping_max: ogtt_core::bayes::DAMPING_INTERVAL.1,
            frequency_max: ogtt_core::bayes::FREQUENCY_INTERVAL.1,
            amplitude: None,
            phase: [
                ogtt_core::bayes::PHASE_INTERVAL.0,
                ogtt_core::bayes::PHASE_INTERVAL.1,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerOverrides {
    pub starts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub restarts: usize,
}

impl Default for OptimizerOverrides {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            starts: d.starts,
            max_iterations: d.max_iterations,
            tolerance: d.tolerance,
            restarts: d.restarts,
        }
    }
}

/// How the fit stage seeds its walkers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WalkerInit {
    /// Small ball around the per-patient MAP estimate (default); keeps the
    /// ensemble inside the dominant posterior mode.
    #[default]
    #[serde(rename = "map-ball")]
    MapBall,
    /// Uniform draws over the whole prior box.
    #[serde(rename = "box")]
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerOverrides {
    pub walkers: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub stretch_scale: f64,
    pub init: WalkerInit,
    /// Ball half-width as a fraction of each prior interval.
    pub ball_radius: f64,
}

impl Default for SamplerOverrides {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            walkers: d.walkers,
            iterations: d.iterations,
            burn_in: d.burn_in,
            thin: d.thin,
            stretch_scale: d.stretch_scale,
            init: WalkerInit::default(),
            ball_radius: 0.01,
        }
    }
}

/// Which point estimate feeds the classifier features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    #[default]
    Map,
    Cm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmOverrides {
    pub cost: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub standardize: bool,
    pub features: FeatureSource,
}

impl Default for SvmOverrides {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            cost: 1.0,
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            standardize: d.standardize,
            features: FeatureSource::default(),
        }
    }
}

/// Full pipeline configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root seed; every stage derives its streams from it.
    pub seed: u64,
    /// Observation noise standard deviation (mg/dl).
    pub gamma: f64,
    /// Likelihood exponent convention.
    pub likelihood: LikelihoodExponent,
    pub output_dir: PathBuf,
    /// Existing cohort CSV; mutually exclusive with `[cohort]`.
    pub input: Option<PathBuf>,
    pub cohort: Option<CohortOverrides>,
    pub prior: PriorOverrides,
    pub optimizer: OptimizerOverrides,
    pub sampler: SamplerOverrides,
    pub svm: SvmOverrides,
    /// Write raw chains per patient.
    pub export_chains: bool,
    /// Render static SVG figures next to the CSV data.
    pub svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            gamma: default_gamma(),
            likelihood: LikelihoodExponent::default(),
            output_dir: default_output_dir(),
            input: None,
            cohort: None,
            prior: PriorOverrides::default(),
            optimizer: OptimizerOverrides::default(),
            sampler: SamplerOverrides::default(),
            svm: SvmOverrides::default(),
            export_chains: false,
            svg: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut value: toml::Value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config file {}", p.display()))?;
                text.parse()
                    .with_context(|| format!("cannot parse config file {}", p.display()))?
            }
            None => toml::Value::Table(Default::default()),
        };
        for set in sets {
            apply_override(&mut value, set)?;
        }
        let config: RunConfig = value
            .try_into()
            .context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.is_some() && self.cohort.is_some() {
            bail!("exactly one of `input` and `[cohort]` may be set");
        }
        if self.gamma <= 0.0 || !self.gamma.is_finite() {
            bail!("gamma must be positive, got {}", self.gamma);
        }
        Ok(())
    }

    /// Resolved synthetic cohort spec (used when no `input` file is given).
    pub fn cohort_spec(&self) -> Result<CohortSpec> {
        let overrides = self.cohort.clone().unwrap_or_default();
        let mut spec = CohortSpec {
            noise_sd: overrides.noise_sd.unwrap_or(self.gamma),
            seed: derive_seed(self.seed, STREAM_SYNTH, 0),
            ..CohortSpec::default()
        };
        if let Some(classes) = overrides.classes {
            spec.classes = classes;
        }
        if let Some(counts) = overrides.counts {
            if counts.len() != spec.classes.len() {
                bail!(
                    "cohort.counts needs {} entries, got {}",
                    spec.classes.len(),
                    counts.len()
                );
            }
            for (class, count) in spec.classes.iter_mut().zip(counts) {
                class.count = count;
            }
        }
        Ok(spec)
    }

    /// Prior box for one patient's deviations, with overrides applied.
    pub fn prior_box(&self, dev: &DeviationData) -> Result<PriorBox> {
        let mut bounds = PriorBox::from_deviations(dev).bounds;
        bounds[ogtt_core::bayes::DAMPING].1 = self.prior.damping_max;
        bounds[ogtt_core::bayes::FREQUENCY].1 = self.prior.frequency_max;
        bounds[ogtt_core::bayes::PHASE] = (self.prior.phase[0], self.prior.phase[1]);
        if let Some([lo, hi]) = self.prior.amplitude {
            bounds[ogtt_core::bayes::AMPLITUDE] = (lo, hi);
        }
        PriorBox::new(bounds).context("invalid prior overrides")
    }

    pub fn noise_model(&self) -> Result<ogtt_core::bayes::NoiseModel> {
        ogtt_core::bayes::NoiseModel::new(self.gamma, self.likelihood)
            .context("invalid noise model")
    }

    pub fn optimizer_config(&self, patient_index: usize) -> OptimizerConfig {
        OptimizerConfig {
            starts: self.optimizer.starts,
            max_iterations: self.optimizer.max_iterations,
            tolerance: self.optimizer.tolerance,
            restarts: self.optimizer.restarts,
            seed: derive_seed(self.seed, STREAM_FIT_OPTIMIZER, patient_index as u64),
        }
    }

    pub fn sampler_config(&self, patient_index: usize) -> SamplerConfig {
        SamplerConfig {
            walkers: self.sampler.walkers,
            stretch_scale: self.sampler.stretch_scale,
            iterations: self.sampler.iterations,
            burn_in: self.sampler.burn_in,
            thin: self.sampler.thin,
            seed: derive_seed(self.seed, STREAM_FIT_SAMPLER, patient_index as u64),
            store_raw: self.export_chains,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            tolerance: self.svm.tolerance,
            max_iterations: self.svm.max_iterations,
            standardize: self.svm.standardize,
        }
    }

    /// Canonical TOML rendering, echoed into the run report.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Applies one `dotted.path=value` override onto the raw TOML tree.
fn apply_override(root: &mut toml::Value, set: &str) -> Result<()> {
    let (path, raw) = set
        .split_once('=')
        .with_context(|| format!("override `{set}` must look like key=value"))?;
    let path = path.trim();
    let raw = raw.trim();
    if path.is_empty() {
        bail!("override `{set}` has an empty key");
    }
    // parse the value through a one-line TOML document to get a typed value;
    // fall back to a string for bare words
    let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Value>() {
        Ok(toml::Value::Table(mut t)) => t.remove("v").expect("v was just parsed"),
        _ => toml::Value::String(raw.to_string()),
    };
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let table = node
            .as_table_mut()
            .with_context(|| format!("`{}` is not a table", segments[..i].join(".")))?;
        if i + 1 == segments.len() {
            table.insert(segment.to_string(), parsed);
            break;
        }
        node = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let config = RunConfig::default();
        let text = config.to_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let config = RunConfig::load(
            None,
            &[
                "seed=9".into(),
                "sampler.iterations=500".into(),
                "likelihood=\"half-inverse-variance\"".into(),
                "prior.damping_max=0.2".into(),
            ],
        )
        .unwrap();
        assert_eq!(config.seed, 9);
        assert_eq!(config.sampler.iterations, 500);
        assert_eq!(config.likelihood, LikelihoodExponent::HalfInverseVariance);
        assert_eq!(config.prior.damping_max, 0.2);
    }

    #[test]
    fn input_and_cohort_are_mutually_exclusive() {
        let err = RunConfig::load(
            None,
            &["input=\"x.csv\"".into(), "cohort.noise_sd=1.0".into()],
        )
        .unwrap_err();
        assert!(err.to_string().contains("exactly one"));
    }

    #[test]
    fn counts_override_rewrites_class_sizes() {
        let config =
            RunConfig::load(None, &["cohort.counts=[2, 1, 1, 1, 1]".into()]).unwrap();
        let spec = config.cohort_spec().unwrap();
        assert_eq!(spec.total_count(), 6);
        assert_eq!(spec.classes[0].count, 2);
    }
}
