//! OGTT cohort ingestion, the fasting-level shift, and synthetic cohorts.
//!
//! Glucose concentrations are in mg/dl, the conventional OGTT unit. A record
//! holds the five samples taken at 0/30/60/90/120 minutes together with a
//! diagnostic label. Fitting operates on the shifted deviations
//! `g_t = G_t - G_0` for t in {30, 60, 90, 120}.
//!
//! CSV dialect: comma separated, UTF-8, `.` decimal point, required header
//! `patient_id,label,g0,g30,g60,g90,g120`. Synthetic cohorts additionally emit
//! a sidecar of generating parameters with header `patient_id,A,alpha,omega,delta`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oscillator::OscillatorParams;
use crate::seeds::derive_seed;

/// Minutes at which OGTT glucose is sampled.
pub const SAMPLE_MINUTES: [f64; 5] = [0.0, 30.0, 60.0, 90.0, 120.0];

/// Minutes entering the fit (the shifted deviations).
pub const OBSERVATION_MINUTES: [f64; 4] = [30.0, 60.0, 90.0, 120.0];

/// Expected header of a cohort CSV file.
pub const COHORT_HEADER: &str = "patient_id,label,g0,g30,g60,g90,g120";

/// Expected header of a generating-parameter sidecar file.
pub const TRUTHS_HEADER: &str = "patient_id,A,alpha,omega,delta";

/// Diagnostic classes of the cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticClass {
    #[serde(rename = "H")]
    Healthy,
    #[serde(rename = "IFG")]
    ImpairedFasting,
    #[serde(rename = "IGT")]
    ImpairedTolerance,
    #[serde(rename = "IFG-IGT")]
    BothImpairments,
    #[serde(rename = "T2DM")]
    Diabetes,
}

impl DiagnosticClass {
    pub const ALL: [DiagnosticClass; 5] = [
        DiagnosticClass::Healthy,
        DiagnosticClass::ImpairedFasting,
        DiagnosticClass::ImpairedTolerance,
        DiagnosticClass::BothImpairments,
        DiagnosticClass::Diabetes,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            DiagnosticClass::Healthy => "H",
            DiagnosticClass::ImpairedFasting => "IFG",
            DiagnosticClass::ImpairedTolerance => "IGT",
            DiagnosticClass::BothImpairments => "IFG-IGT",
            DiagnosticClass::Diabetes => "T2DM",
        }
    }

    /// True for any non-healthy condition.
    pub fn is_condition(&self) -> bool {
        !matches!(self, DiagnosticClass::Healthy)
    }
}

impl fmt::Display for DiagnosticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DiagnosticClass {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DiagnosticClass::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or(())
    }
}

/// One patient's raw OGTT samples plus diagnostic label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OgttRecord {
    pub patient_id: String,
    pub label: DiagnosticClass,
    /// Concentrations (mg/dl) at 0/30/60/90/120 minutes; each > 0.
    pub glucose: [f64; 5],
}

impl OgttRecord {
    pub fn validate(&self) -> Result<(), CohortError> {
        if let Some(g) = self.glucose.iter().find(|g| !g.is_finite() || **g <= 0.0) {
            return Err(CohortError::InvalidRecord {
                patient_id: self.patient_id.clone(),
                reason: format!("concentration {g} must be finite and > 0"),
            });
        }
        Ok(())
    }
}

/// Shifted deviations and their absolute-value extremes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationData {
    /// `g_t = G_t - G_0` at t = 30, 60, 90, 120 minutes.
    pub y: [f64; 4],
    /// `min |g_t|`.
    pub magnitude_min: f64,
    /// `max |g_t|`.
    pub magnitude_max: f64,
}

/// Applies the fasting-level shift `g_t = G_t - G_0`.
pub fn shift(record: &OgttRecord) -> DeviationData {
    let g0 = record.glucose[0];
    let y = [
        record.glucose[1] - g0,
        record.glucose[2] - g0,
        record.glucose[3] - g0,
        record.glucose[4] - g0,
    ];
    DeviationData::from_deviations(y)
}

impl DeviationData {
    pub fn from_deviations(y: [f64; 4]) -> Self {
        let mut magnitude_min = f64::INFINITY;
        let mut magnitude_max = 0.0_f64;
        for v in y {
            magnitude_min = magnitude_min.min(v.abs());
            magnitude_max = magnitude_max.max(v.abs());
        }
        Self {
            y,
            magnitude_min,
            magnitude_max,
        }
    }
}

/// Errors from cohort parsing, serialization and synthesis.
#[derive(Debug, Error)]
pub enum CohortError {
    #[error("empty input: no header line")]
    EmptyInput,
    #[error("bad header: expected `{COHORT_HEADER}`, found `{found}`")]
    Header { found: String },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("invalid record for patient {patient_id}: {reason}")]
    InvalidRecord { patient_id: String, reason: String },
    #[error("patient id `{0}` contains a delimiter or newline")]
    UnserializableId(String),
    #[error("class {class}: could not draw parameters representable in the prior box after {attempts} attempts")]
    DrawRejected { class: &'static str, attempts: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses a cohort CSV stream; one record per data row, order preserved.
pub fn parse_cohort<R: BufRead>(reader: R) -> Result<Vec<OgttRecord>, CohortError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(CohortError::EmptyInput),
    };
    if header.trim_end_matches('\r') != COHORT_HEADER {
        return Err(CohortError::Header { found: header });
    }

    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CohortError::MalformedRow {
                line: lineno,
                reason: format!("expected 7 columns, found {}", fields.len()),
            });
        }
        let label = fields[1]
            .parse::<DiagnosticClass>()
            .map_err(|_| CohortError::MalformedRow {
                line: lineno,
                reason: format!("unknown label `{}`", fields[1]),
            })?;
        let mut glucose = [0.0_f64; 5];
        for (i, raw) in fields[2..].iter().enumerate() {
            let v = raw.parse::<f64>().map_err(|_| CohortError::MalformedRow {
                line: lineno,
                reason: format!("non-numeric concentration `{raw}`"),
            })?;
            if !v.is_finite() || v <= 0.0 {
                return Err(CohortError::MalformedRow {
                    line: lineno,
                    reason: format!("concentration `{raw}` must be finite and > 0"),
                });
            }
            glucose[i] = v;
        }
        records.push(OgttRecord {
            patient_id: fields[0].to_string(),
            label,
            glucose,
        });
    }
    Ok(records)
}

fn check_id(id: &str) -> Result<(), CohortError> {
    if id.contains(',') || id.contains('\n') || id.contains('\r') {
        return Err(CohortError::UnserializableId(id.to_string()));
    }
    Ok(())
}

/// Writes records in the cohort CSV dialect.
pub fn serialize_cohort<W: Write>(records: &[OgttRecord], mut out: W) -> Result<(), CohortError> {
    writeln!(out, "{COHORT_HEADER}")?;
    for r in records {
        check_id(&r.patient_id)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.patient_id, r.label, r.glucose[0], r.glucose[1], r.glucose[2], r.glucose[3], r.glucose[4]
        )?;
    }
    Ok(())
}

/// Writes the generating-parameter sidecar for a synthetic cohort.
pub fn serialize_truths<W: Write>(
    patients: &[SyntheticPatient],
    mut out: W,
) -> Result<(), CohortError> {
    writeln!(out, "{TRUTHS_HEADER}")?;
    for p in patients {
        check_id(&p.record.patient_id)?;
        writeln!(
            out,
            "{},{},{},{},{}",
            p.record.patient_id,
            p.truth.amplitude,
            p.truth.damping,
            p.truth.frequency,
            p.truth.phase
        )?;
    }
    Ok(())
}

/// Parses a generating-parameter sidecar, returning `(patient_id, params)` rows.
pub fn parse_truths<R: BufRead>(reader: R) -> Result<Vec<(String, OscillatorParams)>, CohortError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(CohortError::EmptyInput),
    };
    if header.trim_end_matches('\r') != TRUTHS_HEADER {
        return Err(CohortError::Header { found: header });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(CohortError::MalformedRow {
                line: lineno,
                reason: format!("expected 5 columns, found {}", fields.len()),
            });
        }
        let mut vals = [0.0_f64; 4];
        for (i, raw) in fields[1..].iter().enumerate() {
            vals[i] = raw.parse::<f64>().map_err(|_| CohortError::MalformedRow {
                line: lineno,
                reason: format!("non-numeric value `{raw}`"),
            })?;
        }
        rows.push((
            fields[0].to_string(),
            OscillatorParams::from_vector(vals),
        ));
    }
    Ok(rows)
}

/// Mean and standard deviation of one synthetic parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamDist {
    pub mean: f64,
    pub sd: f64,
}

impl ParamDist {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }
}

/// Synthetic parameter cluster for one diagnostic class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub label: DiagnosticClass,
    pub count: usize,
    pub amplitude: ParamDist,
    pub damping: ParamDist,
    pub frequency: ParamDist,
    pub phase: ParamDist,
    /// Fasting glucose level distribution (mg/dl).
    pub fasting: ParamDist,
}

/// Specification of a synthetic cohort.
///
/// The default clusters are invented stand-ins for the unavailable clinical
/// data: healthy patients get higher damping and moderate amplitude, diabetic
/// conditions get lower damping and higher amplitude, so the cohort reproduces
/// the qualitative separation the classifier expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub classes: Vec<ClassModel>,
    /// Observation noise standard deviation (mg/dl) added to each shifted sample.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            classes: vec![
                ClassModel {
                    label: DiagnosticClass::Healthy,
                    count: 51,
                    amplitude: ParamDist::new(95.0, 11.0),
                    damping: ParamDist::new(0.020, 0.003),
                    frequency: ParamDist::new(0.042, 0.0045),
                    phase: ParamDist::new(1.30, 0.12),
                    fasting: ParamDist::new(88.0, 6.0),
                },
                ClassModel {
                    label: DiagnosticClass::ImpairedFasting,
                    count: 4,
                    amplitude: ParamDist::new(115.0, 12.0),
                    damping: ParamDist::new(0.0145, 0.0024),
                    frequency: ParamDist::new(0.038, 0.004),
                    phase: ParamDist::new(1.33, 0.12),
                    fasting: ParamDist::new(108.0, 7.0),
                },
                ClassModel {
                    label: DiagnosticClass::ImpairedTolerance,
                    count: 15,
                    amplitude: ParamDist::new(132.0, 13.0),
                    damping: ParamDist::new(0.0125, 0.002),
                    frequency: ParamDist::new(0.035, 0.004),
                    phase: ParamDist::new(1.35, 0.12),
                    fasting: ParamDist::new(92.0, 6.0),
                },
                ClassModel {
                    label: DiagnosticClass::BothImpairments,
                    count: 7,
                    amplitude: ParamDist::new(150.0, 14.0),
                    damping: ParamDist::new(0.010, 0.0018),
                    frequency: ParamDist::new(0.032, 0.004),
                    phase: ParamDist::new(1.37, 0.12),
                    fasting: ParamDist::new(112.0, 8.0),
                },
                ClassModel {
                    label: DiagnosticClass::Diabetes,
                    count: 3,
                    amplitude: ParamDist::new(172.0, 15.0),
                    damping: ParamDist::new(0.0075, 0.0014),
                    frequency: ParamDist::new(0.028, 0.0035),
                    phase: ParamDist::new(1.40, 0.12),
                    fasting: ParamDist::new(135.0, 12.0),
                },
            ],
            noise_sd: 5.0,
            seed: 0,
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<(), CohortError> {
        if !self.noise_sd.is_finite() || self.noise_sd < 0.0 {
            return Err(CohortError::InvalidRecord {
                patient_id: String::new(),
                reason: format!("noise sd {} must be finite and >= 0", self.noise_sd),
            });
        }
        Ok(())
    }

    pub fn total_count(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }
}

/// A synthetic record together with its generating parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPatient {
    pub record: OgttRecord,
    pub truth: OscillatorParams,
}

const SYNTH_PARAM_STREAM: u64 = 11;
const SYNTH_NOISE_STREAM: u64 = 12;
const MAX_DRAW_ATTEMPTS: usize = 10_000;

// Draws stay strictly inside the fixed prior intervals so that generating
// parameters are always admissible points of the estimation problem.
const DAMPING_DRAW_RANGE: (f64, f64) = (0.003, 0.097);
const FREQUENCY_DRAW_RANGE: (f64, f64) = (0.005, 0.145);

fn draw(dist: &ParamDist, rng: &mut ChaCha8Rng) -> f64 {
    if dist.sd == 0.0 {
        return dist.mean;
    }
    Normal::new(dist.mean, dist.sd).expect("finite sd").sample(rng)
}

/// Generates a labelled synthetic cohort, deterministic under the spec seed.
///
/// Per patient the generating parameters are drawn from the class cluster,
/// redrawing until the amplitude is representable inside the data-driven prior
/// bound `A <= 2.5 max|g| + 15` with a noise-tail margin; the observed samples
/// are the model curve plus `N(0, noise_sd)` noise, shifted by a drawn fasting
/// level and clamped positive.
pub fn synthesize_cohort(spec: &CohortSpec) -> Result<Vec<SyntheticPatient>, CohortError> {
    spec.validate()?;
    let mut patients = Vec::with_capacity(spec.total_count());
    let mut index = 0usize;
    for class in &spec.classes {
        for _ in 0..class.count {
            let param_rng_seed = derive_seed(spec.seed, SYNTH_PARAM_STREAM, index as u64);
            let noise_rng_seed = derive_seed(spec.seed, SYNTH_NOISE_STREAM, index as u64);
            let mut param_rng = ChaCha8Rng::seed_from_u64(param_rng_seed);
            let mut noise_rng = ChaCha8Rng::seed_from_u64(noise_rng_seed);

            let truth = draw_representable(class, spec.noise_sd, &mut param_rng)?;
            let fasting = draw(&class.fasting, &mut param_rng).max(40.0);

            let mut glucose = [0.0_f64; 5];
            glucose[0] = fasting;
            for (i, &t) in OBSERVATION_MINUTES.iter().enumerate() {
                let noise = if spec.noise_sd > 0.0 {
                    Normal::new(0.0, spec.noise_sd).unwrap().sample(&mut noise_rng)
                } else {
                    0.0
                };
                glucose[i + 1] = (fasting + truth.evaluate(t) + noise).max(1.0);
            }

            let record = OgttRecord {
                patient_id: format!("p{:03}", index + 1),
                label: class.label,
                glucose,
            };
            record.validate()?;
            patients.push(SyntheticPatient { record, truth });
            index += 1;
        }
    }
    Ok(patients)
}

fn draw_representable(
    class: &ClassModel,
    noise_sd: f64,
    rng: &mut ChaCha8Rng,
) -> Result<OscillatorParams, CohortError> {
    for _ in 0..MAX_DRAW_ATTEMPTS {
        let amplitude = draw(&class.amplitude, rng);
        let damping = draw(&class.damping, rng);
        let frequency = draw(&class.frequency, rng);
        let phase = draw(&class.phase, rng);
        if amplitude < 1.0
            || !(DAMPING_DRAW_RANGE.0..=DAMPING_DRAW_RANGE.1).contains(&damping)
            || !(FREQUENCY_DRAW_RANGE.0..=FREQUENCY_DRAW_RANGE.1).contains(&frequency)
            || phase.abs() >= std::f64::consts::TAU - 0.05
        {
            continue;
        }
        let truth = OscillatorParams {
            amplitude,
            damping,
            frequency,
            phase,
        };
        let max_dev = OBSERVATION_MINUTES
            .iter()
            .map(|&t| truth.evaluate(t).abs())
            .fold(0.0_f64, f64::max);
        if amplitude <= 2.5 * (max_dev - 1.5 * noise_sd) + 15.0 {
            return Ok(truth);
        }
    }
    Err(CohortError::DrawRejected {
        class: class.label.label(),
        attempts: MAX_DRAW_ATTEMPTS,
    })
}
