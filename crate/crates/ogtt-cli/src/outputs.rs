//! Writers and readers for the pipeline's documented file formats.
//!
//! - `cohort.csv` / `cohort_truths.csv`: cohort CSV dialect and truth sidecar
//! - `summaries.jsonl`: one JSON posterior summary per patient and line
//! - `fit_curves/<n>_<id>.csv`: `t,curve,observed` at 1-minute resolution
//! - `marginals/<n>_<id>.csv`: `parameter,x,histogram,smoothed` on 256-point grids
//! - `chains/<n>_<id>.csv`: `walker,iteration,A,alpha,omega,delta,log_post`
//! - `scatter.csv`: `patient_id,A,alpha,label,predicted`
//! - `boundary.csv`: `A,alpha` endpoints of the separating segment
//! - `svm_model.json`: trained model, standardization and accuracy

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use ogtt_core::analysis::{MarginalDensity, PosteriorSummary};
use ogtt_core::cohort::{OgttRecord, SyntheticPatient, OBSERVATION_MINUTES};
use ogtt_core::oscillator::OscillatorParams;
use ogtt_core::sampler::RawChain;
use ogtt_core::svm::SvmModel;
use ogtt_core::PARAM_NAMES;

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("cannot create directory {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

/// `<index>_<sanitized id>` keeps per-patient file names unique and portable.
pub fn patient_stem(index: usize, patient_id: &str) -> String {
    let safe: String = patient_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{index:03}_{safe}")
}

pub fn write_cohort(path: &Path, records: &[OgttRecord]) -> Result<()> {
    let mut out = create(path)?;
    ogtt_core::cohort::serialize_cohort(records, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_truths(path: &Path, patients: &[SyntheticPatient]) -> Result<()> {
    let mut out = create(path)?;
    ogtt_core::cohort::serialize_truths(patients, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_cohort(path: &Path) -> Result<Vec<OgttRecord>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    ogtt_core::cohort::parse_cohort(BufReader::new(file))
        .with_context(|| format!("cannot parse cohort {}", path.display()))
}

/// MAP fit curve on t in [0, 120] at 1-minute resolution, with the observed
/// deviations alongside their sample times.
pub fn write_fit_curve(path: &Path, map: &OscillatorParams, observed: &[f64; 4]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "t,curve,observed")?;
    for minute in 0..=120u32 {
        let t = f64::from(minute);
        let curve = map.evaluate(t);
        match OBSERVATION_MINUTES.iter().position(|&m| m == t) {
            Some(i) => writeln!(out, "{t},{curve},{}", observed[i])?,
            None => writeln!(out, "{t},{curve},")?,
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_marginals(path: &Path, densities: &[MarginalDensity; 4]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "parameter,x,histogram,smoothed")?;
    for (name, density) in PARAM_NAMES.iter().zip(densities) {
        for ((x, h), s) in density
            .grid
            .iter()
            .zip(&density.histogram)
            .zip(&density.smoothed)
        {
            writeln!(out, "{name},{x},{h},{s}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Raw chain rows ordered by iteration, then walker.
pub fn write_chain(path: &Path, chain: &RawChain) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "walker,iteration,A,alpha,omega,delta,log_post")?;
    for iter in 0..chain.iterations {
        for walker in 0..chain.walkers {
            let idx = iter * chain.walkers + walker;
            let p = chain.positions[idx];
            writeln!(
                out,
                "{walker},{iter},{},{},{},{},{}",
                p[0], p[1], p[2], p[3], chain.log_density[idx]
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_summaries(path: &Path, summaries: &[PosteriorSummary]) -> Result<()> {
    let mut out = create(path)?;
    for summary in summaries {
        serde_json::to_writer(&mut out, summary)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_summaries(path: &Path) -> Result<Vec<PosteriorSummary>> {
    let file = File::open(path)
        .with_context(|| format!("missing fit artifact {}", path.display()))?;
    let mut summaries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let summary: PosteriorSummary = serde_json::from_str(&line)
            .with_context(|| format!("bad summary at {}:{}", path.display(), i + 1))?;
        summaries.push(summary);
    }
    Ok(summaries)
}

/// One classified patient in the scatter export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatterRow {
    pub patient_id: String,
    pub amplitude: f64,
    pub damping: f64,
    pub label: String,
    pub predicted: String,
}

pub fn write_scatter(path: &Path, rows: &[ScatterRow]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "patient_id,A,alpha,label,predicted")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.patient_id, r.amplitude, r.damping, r.label, r.predicted
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_boundary(path: &Path, segment: &[(f64, f64); 2]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "A,alpha")?;
    for (a, alpha) in segment {
        writeln!(out, "{a},{alpha}")?;
    }
    out.flush()?;
    Ok(())
}

/// Persisted classification artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyArtifact {
    pub model: SvmModel,
    pub accuracy: f64,
    pub features: String,
    pub patients: usize,
    pub healthy: usize,
    pub condition: usize,
}

pub fn write_model(path: &Path, artifact: &ClassifyArtifact) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, artifact)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ClassifyArtifact> {
    let file = File::open(path)
        .with_context(|| format!("missing classification artifact {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("cannot parse {}", path.display()))
}

/// Standard artifact locations inside the output directory.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn cohort(&self) -> PathBuf {
        self.root.join("cohort.csv")
    }
    pub fn truths(&self) -> PathBuf {
        self.root.join("cohort_truths.csv")
    }
    pub fn summaries(&self) -> PathBuf {
        self.root.join("summaries.jsonl")
    }
    pub fn fit_curves_dir(&self) -> PathBuf {
        self.root.join("fit_curves")
    }
    pub fn marginals_dir(&self) -> PathBuf {
        self.root.join("marginals")
    }
    pub fn chains_dir(&self) -> PathBuf {
        self.root.join("chains")
    }
    pub fn figures_dir(&self) -> PathBuf {
        self.root.join("figures")
    }
    pub fn scatter(&self) -> PathBuf {
        self.root.join("scatter.csv")
    }
    pub fn boundary(&self) -> PathBuf {
        self.root.join("boundary.csv")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("svm_model.json")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.txt")
    }
}
