//! Shared fixtures for the benchmark targets.

use ogtt_core::bayes::PriorBox;
use ogtt_core::cohort::{shift, synthesize_cohort, CohortSpec, DeviationData};
use ogtt_core::oscillator::OscillatorParams;

/// A representative mid-cohort patient: deviations, prior box and truth.
pub fn reference_patient() -> (DeviationData, PriorBox, OscillatorParams) {
    let mut spec = CohortSpec {
        seed: 2024,
        ..CohortSpec::default()
    };
    for class in &mut spec.classes {
        class.count = usize::from(class.count > 0);
    }
    let cohort = synthesize_cohort(&spec).expect("default spec synthesizes");
    let patient = &cohort[0];
    let deviations = shift(&patient.record);
    let prior = PriorBox::from_deviations(&deviations);
    (deviations, prior, patient.truth)
}

/// The default 80-patient cohort's `(A, alpha)` truth features.
pub fn reference_features() -> Vec<ogtt_core::svm::LabeledPoint> {
    let spec = CohortSpec {
        seed: 2024,
        ..CohortSpec::default()
    };
    synthesize_cohort(&spec)
        .expect("default spec synthesizes")
        .iter()
        .map(|p| {
            ogtt_core::svm::LabeledPoint::new(
                p.truth.amplitude,
                p.truth.damping,
                ogtt_core::svm::Group::from(p.record.label),
            )
        })
        .collect()
}
