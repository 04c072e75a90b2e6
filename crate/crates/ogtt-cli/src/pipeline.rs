//! The four pipeline stages. Each stage reads and writes documented files in
//! the output directory, so stages compose through the filesystem and every
//! figure family is independently reproducible.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use ogtt_core::analysis::{marginal_densities, summarize_with_densities, PosteriorSummary};
use ogtt_core::bayes::{map_estimate, DAMPING};
use ogtt_core::cohort::{shift, synthesize_cohort, DiagnosticClass, OgttRecord};
use ogtt_core::sampler;
use ogtt_core::svm::{self, Group, LabeledPoint};

use crate::config::{FeatureSource, RunConfig};
use crate::outputs::{self, ClassifyArtifact, Layout, ScatterRow};
use crate::plot;

/// Generates the synthetic cohort and its truth sidecar.
pub fn synth_command(config: &RunConfig) -> Result<()> {
    if config.input.is_some() {
        bail!("synth generates a cohort; remove `input` from the configuration");
    }
    let layout = Layout::new(&config.output_dir);
    outputs::ensure_dir(&layout.root)?;
    let spec = config.cohort_spec()?;
    let patients = synthesize_cohort(&spec)?;
    let records: Vec<OgttRecord> = patients.iter().map(|p| p.record.clone()).collect();
    outputs::write_cohort(&layout.cohort(), &records)?;
    outputs::write_truths(&layout.truths(), &patients)?;
    println!(
        "synth: wrote {} patients to {}",
        patients.len(),
        layout.cohort().display()
    );
    Ok(())
}

fn load_or_synthesize(config: &RunConfig, layout: &Layout) -> Result<Vec<OgttRecord>> {
    match &config.input {
        Some(path) => outputs::read_cohort(path),
        None => {
            let spec = config.cohort_spec()?;
            let patients = synthesize_cohort(&spec)?;
            let records: Vec<OgttRecord> = patients.iter().map(|p| p.record.clone()).collect();
            outputs::write_cohort(&layout.cohort(), &records)?;
            outputs::write_truths(&layout.truths(), &patients)?;
            Ok(records)
        }
    }
}

/// Fits every patient (MAP + posterior sampling) and writes the summaries,
/// fit curves, marginal grids and optional raw chains.
pub fn fit_command(config: &RunConfig) -> Result<Vec<PosteriorSummary>> {
    let layout = Layout::new(&config.output_dir);
    outputs::ensure_dir(&layout.root)?;
    let records = load_or_synthesize(config, &layout)?;
    outputs::ensure_dir(&layout.fit_curves_dir())?;
    outputs::ensure_dir(&layout.marginals_dir())?;
    if config.export_chains {
        outputs::ensure_dir(&layout.chains_dir())?;
    }
    if config.svg {
        outputs::ensure_dir(&layout.figures_dir())?;
    }
    let noise = config.noise_model()?;

    let summaries: Vec<PosteriorSummary> = records
        .par_iter()
        .enumerate()
        .map(|(index, record)| -> Result<PosteriorSummary> {
            fit_patient(config, &layout, index, record, &noise)
                .with_context(|| format!("patient {}", record.patient_id))
        })
        .collect::<Result<Vec<_>>>()?;

    outputs::write_summaries(&layout.summaries(), &summaries)?;
    println!(
        "fit: wrote {} summaries to {}",
        summaries.len(),
        layout.summaries().display()
    );
    Ok(summaries)
}

fn fit_patient(
    config: &RunConfig,
    layout: &Layout,
    index: usize,
    record: &OgttRecord,
    noise: &ogtt_core::bayes::NoiseModel,
) -> Result<PosteriorSummary> {
    record.validate()?;
    let deviations = shift(record);
    let prior = config.prior_box(&deviations)?;
    let map = map_estimate(
        &deviations,
        &prior,
        noise,
        &config.optimizer_config(index),
    )?;
    let init = match config.sampler.init {
        crate::config::WalkerInit::MapBall => sampler::InitStrategy::Ball {
            center: map.params.as_vector(),
            relative_radius: config.sampler.ball_radius,
        },
        crate::config::WalkerInit::Box => sampler::InitStrategy::UniformBox,
    };
    let run = sampler::run_with_init(
        &deviations,
        &prior,
        noise,
        &config.sampler_config(index),
        init,
    )?;
    let densities = marginal_densities(&run.samples, &prior)?;
    let summary = summarize_with_densities(
        record.patient_id.clone(),
        record.label,
        &run.samples,
        map,
        &prior,
        run.acceptance_rate,
        &densities,
    )?;

    let stem = outputs::patient_stem(index, &record.patient_id);
    outputs::write_fit_curve(
        &layout.fit_curves_dir().join(format!("{stem}.csv")),
        &summary.map,
        &deviations.y,
    )?;
    outputs::write_marginals(
        &layout.marginals_dir().join(format!("{stem}.csv")),
        &densities,
    )?;
    if let Some(raw) = &run.raw {
        outputs::write_chain(&layout.chains_dir().join(format!("{stem}.csv")), raw)?;
    }
    if config.svg {
        std::fs::write(
            layout.figures_dir().join(format!("fit_{stem}.svg")),
            plot::fit_figure(&record.patient_id, &summary.map, &deviations.y),
        )?;
        std::fs::write(
            layout.figures_dir().join(format!("marginals_{stem}.svg")),
            plot::marginals_figure(&record.patient_id, &densities, &summary.map, &summary.cm),
        )?;
    }
    Ok(summary)
}

/// Outcome of the classification stage.
pub struct ClassifyOutcome {
    pub accuracy: f64,
    pub model: svm::SvmModel,
}

/// Trains the healthy-vs-condition separator on the fitted `(A, alpha)`
/// estimates and writes the scatter, boundary and model artifacts.
pub fn classify_command(config: &RunConfig) -> Result<ClassifyOutcome> {
    let layout = Layout::new(&config.output_dir);
    let summaries = outputs::read_summaries(&layout.summaries())?;

    let points: Vec<LabeledPoint> = summaries
        .iter()
        .map(|s| {
            let estimate = match config.svm.features {
                FeatureSource::Map => &s.map,
                FeatureSource::Cm => &s.cm,
            };
            LabeledPoint::new(estimate.amplitude, estimate.damping, Group::from(s.label))
        })
        .collect();

    let model = svm::train(&points, config.svm.cost, &config.train_config())
        .context("classification needs at least two patients spanning both groups")?;
    let accuracy = model.accuracy(&points);

    let rows: Vec<ScatterRow> = summaries
        .iter()
        .zip(&points)
        .map(|(s, p)| ScatterRow {
            patient_id: s.patient_id.clone(),
            amplitude: p.amplitude,
            damping: p.damping,
            label: s.label.label().to_string(),
            predicted: match model.classify([p.amplitude, p.damping]).0 {
                Group::Healthy => "healthy".to_string(),
                Group::Condition => "condition".to_string(),
            },
        })
        .collect();
    outputs::write_scatter(&layout.scatter(), &rows)?;

    let segment = boundary_segment(&model, &points)?;
    outputs::write_boundary(&layout.boundary(), &segment)?;

    let healthy = points.iter().filter(|p| p.group == Group::Healthy).count();
    let artifact = ClassifyArtifact {
        model: model.clone(),
        accuracy,
        features: match config.svm.features {
            FeatureSource::Map => "map".to_string(),
            FeatureSource::Cm => "cm".to_string(),
        },
        patients: points.len(),
        healthy,
        condition: points.len() - healthy,
    };
    outputs::write_model(&layout.model(), &artifact)?;

    if config.svg {
        outputs::ensure_dir(&layout.figures_dir())?;
        let scatter_points: Vec<(f64, f64, DiagnosticClass)> = summaries
            .iter()
            .zip(&points)
            .map(|(s, p)| (p.amplitude, p.damping, s.label))
            .collect();
        std::fs::write(
            layout.figures_dir().join("scatter.svg"),
            plot::scatter_figure(&scatter_points, Some(segment), accuracy),
        )?;
    }

    println!("classify: training accuracy {accuracy:.4} over {} patients", points.len());
    Ok(ClassifyOutcome { accuracy, model })
}

fn boundary_segment(model: &svm::SvmModel, points: &[LabeledPoint]) -> Result<[(f64, f64); 2]> {
    let (mut a_lo, mut a_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut d_lo, mut d_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        a_lo = a_lo.min(p.amplitude);
        a_hi = a_hi.max(p.amplitude);
        d_lo = d_lo.min(p.damping);
        d_hi = d_hi.max(p.damping);
    }
    let mut pad = 0.1;
    loop {
        let a_pad = pad * (a_hi - a_lo).max(1.0);
        let d_pad = pad * (d_hi - d_lo).max(1e-3);
        match model.export_boundary((a_lo - a_pad, a_hi + a_pad), (d_lo - d_pad, d_hi + d_pad)) {
            Ok(segment) => return Ok(segment),
            Err(svm::SvmError::BoundaryOutsideRange) if pad < 100.0 => pad *= 4.0,
            Err(e) => return Err(e.into()),
        }
    }
}

/// Assembles the human-readable run report from the stage artifacts.
pub fn report_command(config: &RunConfig) -> Result<String> {
    let layout = Layout::new(&config.output_dir);
    let summaries = outputs::read_summaries(&layout.summaries())?;

    let mut text = String::new();
    let _ = writeln!(text, "OGTT pipeline report");
    let _ = writeln!(text, "====================");
    let _ = writeln!(text);

    let _ = writeln!(text, "Cohort ({} patients)", summaries.len());
    for class in DiagnosticClass::ALL {
        let count = summaries.iter().filter(|s| s.label == class).count();
        let _ = writeln!(text, "  {:<8} {count}", class.label());
    }
    let _ = writeln!(text);

    if summaries.is_empty() {
        let _ = writeln!(text, "No patients fitted; classification skipped.");
    } else {
        let rates: Vec<f64> = summaries.iter().map(|s| s.acceptance_rate).collect();
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
        let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(text, "Sampler acceptance rate");
        let _ = writeln!(text, "  mean {mean:.4}  min {min:.4}  max {max:.4}");
        let _ = writeln!(text);

        let unimodal = summaries
            .iter()
            .filter(|s| s.parameter(DAMPING).mode_count == 1)
            .count();
        let narrow = summaries
            .iter()
            .filter(|s| s.parameter(DAMPING).relative_width < 0.5)
            .count();
        let mut widths: Vec<f64> = summaries
            .iter()
            .map(|s| s.parameter(DAMPING).relative_width)
            .collect();
        widths.sort_by(f64::total_cmp);
        let median = widths[widths.len() / 2];
        let n = summaries.len();
        let _ = writeln!(text, "Damping-rate concentration (alpha)");
        let _ = writeln!(
            text,
            "  unimodal marginals      {unimodal}/{n} ({:.1}%)",
            100.0 * unimodal as f64 / n as f64
        );
        let _ = writeln!(
            text,
            "  relative width < 0.5    {narrow}/{n} ({:.1}%)",
            100.0 * narrow as f64 / n as f64
        );
        let _ = writeln!(text, "  median relative width   {median:.4}");
        let _ = writeln!(text);

        let artifact = outputs::read_model(&layout.model())?;
        let _ = writeln!(text, "Classification (features: {})", artifact.features);
        let _ = writeln!(
            text,
            "  healthy {}  condition {}",
            artifact.healthy, artifact.condition
        );
        let _ = writeln!(text, "  training accuracy {:.4}", artifact.accuracy);
        let _ = writeln!(
            text,
            "  boundary: w = [{:.6}, {:.6}], b = {:.6} (standardized)",
            artifact.model.weights[0], artifact.model.weights[1], artifact.model.bias
        );
        let _ = writeln!(text);
    }

    let _ = writeln!(text, "Configuration");
    for line in config.to_toml().lines() {
        let _ = writeln!(text, "  {line}");
    }

    std::fs::write(layout.report(), &text)
        .with_context(|| format!("cannot write {}", layout.report().display()))?;
    println!("report: wrote {}", layout.report().display());
    Ok(text)
}

/// Runs fit, classify and report in sequence (the full reproduction).
pub fn run_all(config: &RunConfig) -> Result<()> {
    fit_command(config)?;
    classify_command(config)?;
    report_command(config)?;
    Ok(())
}

/// Byte-compare two output trees; returns the first differing path.
pub fn diff_trees(a: &Path, b: &Path) -> Result<Option<String>> {
    fn walk(root: &Path, prefix: &Path, files: &mut Vec<String>) -> Result<()> {
        for entry in std::fs::read_dir(root.join(prefix))? {
            let entry = entry?;
            let rel = prefix.join(entry.file_name());
            if entry.file_type()?.is_dir() {
                walk(root, &rel, files)?;
            } else {
                files.push(rel.to_string_lossy().into_owned());
            }
        }
        Ok(())
    }
    let mut files_a = Vec::new();
    walk(a, Path::new(""), &mut files_a)?;
    files_a.sort();
    let mut files_b = Vec::new();
    walk(b, Path::new(""), &mut files_b)?;
    files_b.sort();
    if files_a != files_b {
        return Ok(Some(format!(
            "file lists differ: {} vs {} entries",
            files_a.len(),
            files_b.len()
        )));
    }
    for rel in &files_a {
        let bytes_a = std::fs::read(a.join(rel))?;
        let bytes_b = std::fs::read(b.join(rel))?;
        if bytes_a != bytes_b {
            return Ok(Some(rel.clone()));
        }
    }
    Ok(None)
}
