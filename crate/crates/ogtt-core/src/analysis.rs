//! Posterior summaries: conditional means, credible intervals, marginal
//! densities and concentration diagnostics.
//!
//! Phase is treated circularly: before averaging or density estimation, phase
//! samples are folded into one period anchored at their circular mean, so the
//! double-period prior does not manufacture artificial bimodality in reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::{PriorBox, PHASE};
use crate::cohort::DiagnosticClass;
use crate::oscillator::OscillatorParams;
use crate::{ParamVector, PARAM_DIM};

/// Grid resolution of returned density estimates.
pub const DENSITY_GRID_POINTS: usize = 256;
/// Histogram bin count over the prior interval.
pub const HISTOGRAM_BINS: usize = 64;
/// A local maximum counts as a mode when its topographic prominence exceeds
/// this fraction of the global maximum.
pub const MODE_PROMINENCE_FRACTION: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("empty sample set")]
    EmptySamples,
}

/// Circular mean of phase samples (period 2 pi).
pub fn circular_mean(phases: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for &p in phases {
        s += p.sin();
        c += p.cos();
    }
    s.atan2(c)
}

/// Folds each phase into `[anchor - pi, anchor + pi)`.
pub fn fold_phases(phases: &[f64], anchor: f64) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    phases
        .iter()
        .map(|&p| p - tau * ((p - anchor + std::f64::consts::PI) / tau).floor())
        .collect()
}

/// Component-wise posterior mean; phase is averaged after folding into one
/// period anchored at the circular mean.
pub fn conditional_mean(samples: &[ParamVector]) -> Result<ParamVector, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::EmptySamples);
    }
    let n = samples.len() as f64;
    let mut mean = [0.0; PARAM_DIM];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s).take(PARAM_DIM - 1) {
            *m += v;
        }
    }
    for m in mean.iter_mut().take(PARAM_DIM - 1) {
        *m /= n;
    }
    let phases: Vec<f64> = samples.iter().map(|s| s[PHASE]).collect();
    let folded = fold_phases(&phases, circular_mean(&phases));
    mean[PHASE] = folded.iter().sum::<f64>() / n;
    Ok(mean)
}

/// Equal-tailed credible interval via linearly interpolated order statistics.
pub fn credible_interval(values: &[f64], level: f64) -> Result<(f64, f64), AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptySamples);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    Ok((quantile(&sorted, tail), quantile(&sorted, 1.0 - tail)))
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Histogram and kernel-smoothed density estimate of one marginal on a
/// 256-point grid, both normalized to unit trapezoidal integral.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDensity {
    /// Interval the estimate covers (the prior interval; folded period for phase).
    pub interval: (f64, f64),
    pub grid: Vec<f64>,
    pub histogram: Vec<f64>,
    pub smoothed: Vec<f64>,
    /// Normal-reference bandwidth used by the smoothed estimate.
    pub bandwidth: f64,
}

/// Builds the marginal density estimate for samples of one parameter.
pub fn marginal_density(
    values: &[f64],
    interval: (f64, f64),
) -> Result<MarginalDensity, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptySamples);
    }
    let (lo, hi) = interval;
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let n = values.len() as f64;

    let grid: Vec<f64> = (0..DENSITY_GRID_POINTS)
        .map(|j| lo + span * j as f64 / (DENSITY_GRID_POINTS - 1) as f64)
        .collect();

    // histogram over the interval, piecewise constant on the grid
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    for &v in values {
        let idx = (((v - lo) / span) * HISTOGRAM_BINS as f64) as isize;
        let idx = idx.clamp(0, HISTOGRAM_BINS as isize - 1) as usize;
        counts[idx] += 1;
    }
    let bin_width = span / HISTOGRAM_BINS as f64;
    let mut histogram: Vec<f64> = grid
        .iter()
        .map(|&x| {
            let idx = (((x - lo) / span) * HISTOGRAM_BINS as f64) as isize;
            let idx = idx.clamp(0, HISTOGRAM_BINS as isize - 1) as usize;
            counts[idx] as f64 / (n * bin_width)
        })
        .collect();

    // Gaussian kernel estimate, normal-reference bandwidth
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    // An estimate narrower than the grid spacing cannot be represented on the
    // grid (and underflows for degenerate samples), so the spacing is a floor.
    let grid_spacing = span / (DENSITY_GRID_POINTS - 1) as f64;
    let mut bandwidth = var.sqrt() * (4.0 / (3.0 * n)).powf(0.2);
    if !bandwidth.is_finite() || bandwidth < grid_spacing {
        bandwidth = grid_spacing;
    }
    let norm = 1.0 / (n * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let mut smoothed: Vec<f64> = grid
        .iter()
        .map(|&x| {
            let mut acc = 0.0;
            for &v in values {
                let z = (x - v) / bandwidth;
                acc += (-0.5 * z * z).exp();
            }
            acc * norm
        })
        .collect();

    renormalize(&grid, &mut histogram);
    renormalize(&grid, &mut smoothed);

    Ok(MarginalDensity {
        interval,
        grid,
        histogram,
        smoothed,
        bandwidth,
    })
}

/// Trapezoidal integral over the grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..grid.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    }
    acc
}

fn renormalize(grid: &[f64], values: &mut [f64]) {
    let integral = trapezoid(grid, values);
    if integral > 0.0 {
        for v in values.iter_mut() {
            *v /= integral;
        }
    }
}

/// Counts local maxima whose topographic prominence exceeds
/// `MODE_PROMINENCE_FRACTION` of the global maximum.
pub fn mode_count(density: &[f64]) -> usize {
    let global_max = density.iter().copied().fold(0.0_f64, f64::max);
    if global_max <= 0.0 {
        return 0;
    }
    let threshold = MODE_PROMINENCE_FRACTION * global_max;
    let n = density.len();
    let mut count = 0;
    let mut i = 0;
    while i < n {
        // candidate peak: start of a plateau strictly above both neighbours
        let mut j = i;
        while j + 1 < n && density[j + 1] == density[i] {
            j += 1;
        }
        let left_ok = i == 0 || density[i - 1] < density[i];
        let right_ok = j + 1 == n || density[j + 1] < density[i];
        if left_ok && right_ok && !(i == 0 && j + 1 == n) {
            let peak = density[i];
            // walk outwards to the next higher ground, tracking the lowest saddle
            let mut left_base = peak;
            let mut k = i;
            while k > 0 {
                k -= 1;
                left_base = left_base.min(density[k]);
                if density[k] > peak {
                    break;
                }
            }
            let mut right_base = peak;
            let mut k = j;
            while k + 1 < n {
                k += 1;
                right_base = right_base.min(density[k]);
                if density[k] > peak {
                    break;
                }
            }
            if peak - left_base.max(right_base) >= threshold {
                count += 1;
            }
        }
        i = j + 1;
    }
    count
}

/// Per-parameter interval and shape diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub credible_interval: (f64, f64),
    /// Credible width divided by the prior interval width.
    pub relative_width: f64,
    /// Modes of the smoothed marginal above the prominence threshold.
    pub mode_count: usize,
}

/// Point estimates and marginal diagnostics for one patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub patient_id: String,
    pub label: DiagnosticClass,
    pub map: OscillatorParams,
    pub map_log_posterior: f64,
    pub cm: OscillatorParams,
    pub acceptance_rate: f64,
    #[serde(rename = "A")]
    pub amplitude: ParameterSummary,
    #[serde(rename = "alpha")]
    pub damping: ParameterSummary,
    #[serde(rename = "omega")]
    pub frequency: ParameterSummary,
    #[serde(rename = "delta")]
    pub phase: ParameterSummary,
}

impl PosteriorSummary {
    pub fn parameter(&self, index: usize) -> &ParameterSummary {
        match index {
            0 => &self.amplitude,
            1 => &self.damping,
            2 => &self.frequency,
            3 => &self.phase,
            _ => panic!("parameter index {index} out of range"),
        }
    }
}

/// Credible level used throughout the summaries.
pub const CREDIBLE_LEVEL: f64 = 0.95;

/// Builds the four marginal density estimates; phase is folded first.
pub fn marginal_densities(
    samples: &[ParamVector],
    prior: &PriorBox,
) -> Result<[MarginalDensity; 4], AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::EmptySamples);
    }
    let mut out = Vec::with_capacity(PARAM_DIM);
    for d in 0..PARAM_DIM {
        let (values, interval) = parameter_values(samples, d, prior);
        out.push(marginal_density(&values, interval)?);
    }
    Ok(out.try_into().expect("four marginals"))
}

fn parameter_values(
    samples: &[ParamVector],
    index: usize,
    prior: &PriorBox,
) -> (Vec<f64>, (f64, f64)) {
    if index == PHASE {
        let raw: Vec<f64> = samples.iter().map(|s| s[PHASE]).collect();
        let anchor = circular_mean(&raw);
        let folded = fold_phases(&raw, anchor);
        (
            folded,
            (anchor - std::f64::consts::PI, anchor + std::f64::consts::PI),
        )
    } else {
        (
            samples.iter().map(|s| s[index]).collect(),
            prior.bounds[index],
        )
    }
}

/// Assembles the posterior summary from precomputed marginals.
pub fn summarize_with_densities(
    patient_id: String,
    label: DiagnosticClass,
    samples: &[ParamVector],
    map: crate::bayes::MapEstimate,
    prior: &PriorBox,
    acceptance_rate: f64,
    densities: &[MarginalDensity; 4],
) -> Result<PosteriorSummary, AnalysisError> {
    let cm = conditional_mean(samples)?;
    let mut params = Vec::with_capacity(PARAM_DIM);
    for (d, density) in densities.iter().enumerate() {
        let (values, _) = parameter_values(samples, d, prior);
        let ci = credible_interval(&values, CREDIBLE_LEVEL)?;
        let prior_width = prior.width(d).max(f64::MIN_POSITIVE);
        params.push(ParameterSummary {
            credible_interval: ci,
            relative_width: (ci.1 - ci.0) / prior_width,
            mode_count: mode_count(&density.smoothed),
        });
    }
    Ok(PosteriorSummary {
        patient_id,
        label,
        map: map.params,
        map_log_posterior: map.log_posterior,
        cm: OscillatorParams::from_vector(cm),
        acceptance_rate,
        amplitude: params[0],
        damping: params[1],
        frequency: params[2],
        phase: params[3],
    })
}

/// Convenience wrapper computing the marginals internally.
pub fn summarize(
    patient_id: String,
    label: DiagnosticClass,
    samples: &[ParamVector],
    map: crate::bayes::MapEstimate,
    prior: &PriorBox,
    acceptance_rate: f64,
) -> Result<PosteriorSummary, AnalysisError> {
    let densities = marginal_densities(samples, prior)?;
    summarize_with_densities(
        patient_id,
        label,
        samples,
        map,
        prior,
        acceptance_rate,
        &densities,
    )
}

/// Concentration diagnostics for one parameter of a summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationReport {
    pub relative_width: f64,
    pub mode_count: usize,
}

/// Reads the concentration diagnostics (typically queried for the damping rate).
pub fn concentration_report(summary: &PosteriorSummary, index: usize) -> ConcentrationReport {
    let p = summary.parameter(index);
    ConcentrationReport {
        relative_width: p.relative_width,
        mode_count: p.mode_count,
    }
}
