//! Linear soft-margin SVM over the `(A, alpha)` plane.
//!
//! Separates healthy patients (+1) from any diabetic condition (-1) by
//! minimizing `0.5 |w|^2 + C sum_i hinge(y_i (w . x_i + b))` over standardized
//! features. The trainer is a deterministic maximal-violating-pair coordinate
//! ascent on the dual (no randomness, bit-stable across runs); the incumbent
//! dual objective is recorded after every update so convergence is auditable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::DiagnosticClass;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("training requires at least one point of each class")]
    DegenerateClasses,
    #[error("the weight vector is zero; no boundary exists")]
    ZeroWeight,
    #[error("the separating line does not cross the requested plot range")]
    BoundaryOutsideRange,
}

/// Binary grouping of the five diagnostic classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "healthy")]
    Healthy,
    #[serde(rename = "condition")]
    Condition,
}

impl Group {
    pub fn sign(&self) -> f64 {
        match self {
            Group::Healthy => 1.0,
            Group::Condition => -1.0,
        }
    }
}

impl From<DiagnosticClass> for Group {
    fn from(class: DiagnosticClass) -> Self {
        if class.is_condition() {
            Group::Condition
        } else {
            Group::Healthy
        }
    }
}

/// One training point in the `(A, alpha)` feature plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub amplitude: f64,
    pub damping: f64,
    pub group: Group,
}

impl LabeledPoint {
    pub fn new(amplitude: f64, damping: f64, group: Group) -> Self {
        Self {
            amplitude,
            damping,
            group,
        }
    }

    fn features(&self) -> [f64; 2] {
        [self.amplitude, self.damping]
    }
}

/// Per-feature centering and scaling fitted on the training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; 2],
    /// Population standard deviation; a zero-variance feature gets scale 1.
    pub scale: [f64; 2],
}

impl Standardizer {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; 2],
            scale: [1.0; 2],
        }
    }

    pub fn fit(points: &[[f64; 2]]) -> Self {
        let n = points.len() as f64;
        let mut mean = [0.0; 2];
        for p in points {
            mean[0] += p[0];
            mean[1] += p[1];
        }
        mean[0] /= n;
        mean[1] /= n;
        let mut var = [0.0; 2];
        for p in points {
            var[0] += (p[0] - mean[0]) * (p[0] - mean[0]);
            var[1] += (p[1] - mean[1]) * (p[1] - mean[1]);
        }
        let mut scale = [(var[0] / n).sqrt(), (var[1] / n).sqrt()];
        for s in &mut scale {
            if *s <= 0.0 || s.is_nan() {
                *s = 1.0;
            }
        }
        Self { mean, scale }
    }

    pub fn transform(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.mean[0]) / self.scale[0],
            (p[1] - self.mean[1]) / self.scale[1],
        ]
    }
}

/// Trainer settings; the procedure itself is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// KKT violation threshold terminating the pair updates.
    pub tolerance: f64,
    /// Cap on pair updates.
    pub max_iterations: usize,
    /// Fit and apply feature standardization.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 500_000,
            standardize: true,
        }
    }
}

/// Trained linear separator with its standardization and training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Weights in standardized feature space.
    pub weights: [f64; 2],
    pub bias: f64,
    pub cost: f64,
    pub standardizer: Standardizer,
    pub iterations: usize,
    pub converged: bool,
    pub dual_objective: f64,
    /// Dual objective after every pair update; monotone nondecreasing.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

/// Trains the soft-margin separator with regularization `cost`.
pub fn train(
    points: &[LabeledPoint],
    cost: f64,
    config: &TrainConfig,
) -> Result<SvmModel, SvmError> {
    assert!(cost > 0.0, "regularization C must be positive");
    let has_healthy = points.iter().any(|p| p.group == Group::Healthy);
    let has_condition = points.iter().any(|p| p.group == Group::Condition);
    if !has_healthy || !has_condition {
        return Err(SvmError::DegenerateClasses);
    }

    let raw: Vec<[f64; 2]> = points.iter().map(|p| p.features()).collect();
    let standardizer = if config.standardize {
        Standardizer::fit(&raw)
    } else {
        Standardizer::identity()
    };
    let x: Vec<[f64; 2]> = raw.iter().map(|p| standardizer.transform(*p)).collect();
    let y: Vec<f64> = points.iter().map(|p| p.group.sign()).collect();
    let n = x.len();

    let dot = |a: &[f64; 2], b: &[f64; 2]| a[0] * b[0] + a[1] * b[1];

    let mut alpha = vec![0.0_f64; n];
    let mut w = [0.0_f64; 2];
    let mut trace = Vec::new();
    trace.push(0.0); // objective at alpha = 0
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iterations {
        // maximal violating pair over -y_t grad_t with grad_t = y_t (w.x_t) - 1
        let mut up_idx = None;
        let mut up_val = f64::NEG_INFINITY;
        let mut low_idx = None;
        let mut low_val = f64::INFINITY;
        for t in 0..n {
            let score = -y[t] * (y[t] * dot(&w, &x[t]) - 1.0);
            let in_up = (alpha[t] < cost && y[t] > 0.0) || (alpha[t] > 0.0 && y[t] < 0.0);
            let in_low = (alpha[t] < cost && y[t] < 0.0) || (alpha[t] > 0.0 && y[t] > 0.0);
            if in_up && score > up_val {
                up_val = score;
                up_idx = Some(t);
            }
            if in_low && score < low_val {
                low_val = score;
                low_idx = Some(t);
            }
        }
        let (i, j) = match (up_idx, low_idx) {
            (Some(i), Some(j)) => (i, j),
            _ => break,
        };
        if up_val - low_val <= config.tolerance {
            converged = true;
            break;
        }

        // two-variable subproblem along the equality constraint
        let (lo, hi) = if y[i] != y[j] {
            (
                (alpha[j] - alpha[i]).max(0.0),
                (cost + alpha[j] - alpha[i]).min(cost),
            )
        } else {
            (
                (alpha[i] + alpha[j] - cost).max(0.0),
                (alpha[i] + alpha[j]).min(cost),
            )
        };
        let eta = (dot(&x[i], &x[i]) + dot(&x[j], &x[j]) - 2.0 * dot(&x[i], &x[j])).max(1e-12);
        let e_i = dot(&w, &x[i]) - y[i];
        let e_j = dot(&w, &x[j]) - y[j];
        let mut alpha_j_new = alpha[j] + y[j] * (e_i - e_j) / eta;
        alpha_j_new = alpha_j_new.clamp(lo, hi);
        let alpha_i_new = alpha[i] + y[i] * y[j] * (alpha[j] - alpha_j_new);

        let di = alpha_i_new - alpha[i];
        let dj = alpha_j_new - alpha[j];
        if di == 0.0 && dj == 0.0 {
            converged = true;
            break;
        }
        for d in 0..2 {
            w[d] += y[i] * di * x[i][d] + y[j] * dj * x[j][d];
        }
        alpha[i] = alpha_i_new;
        alpha[j] = alpha_j_new;
        iterations += 1;
        trace.push(alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w));
    }

    // bias from the KKT conditions: free support vectors pin it exactly,
    // otherwise take the midpoint of the admissible interval
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let eps = 1e-9 * cost.max(1.0);
    for t in 0..n {
        let u = dot(&w, &x[t]);
        let pinned = y[t] - u;
        let at_zero = alpha[t] <= eps;
        let at_cost = alpha[t] >= cost - eps;
        if !at_zero && !at_cost {
            free_sum += pinned;
            free_count += 1;
        } else if (y[t] > 0.0 && at_zero) || (y[t] < 0.0 && at_cost) {
            lower = lower.max(pinned);
        } else {
            upper = upper.min(pinned);
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else if lower.is_finite() && upper.is_finite() {
        0.5 * (lower + upper)
    } else if lower.is_finite() {
        lower
    } else {
        upper
    };

    let dual_objective = *trace.last().expect("trace holds the initial value");
    Ok(SvmModel {
        weights: w,
        bias,
        cost,
        standardizer,
        iterations,
        converged,
        dual_objective,
        objective_trace: trace,
    })
}

impl SvmModel {
    /// Decision function in standardized space.
    pub fn decision_value(&self, point: [f64; 2]) -> f64 {
        let xs = self.standardizer.transform(point);
        self.weights[0] * xs[0] + self.weights[1] * xs[1] + self.bias
    }

    /// Predicted group and signed distance to the boundary (standardized
    /// units). Boundary ties classify as healthy.
    pub fn classify(&self, point: [f64; 2]) -> (Group, f64) {
        let value = self.decision_value(point);
        let norm = (self.weights[0] * self.weights[0] + self.weights[1] * self.weights[1]).sqrt();
        let distance = if norm > 0.0 { value / norm } else { 0.0 };
        let group = if value >= 0.0 {
            Group::Healthy
        } else {
            Group::Condition
        };
        (group, distance)
    }

    /// Fraction of points whose predicted group matches the label.
    pub fn accuracy(&self, points: &[LabeledPoint]) -> f64 {
        assert!(!points.is_empty(), "accuracy requires at least one point");
        let correct = points
            .iter()
            .filter(|p| self.classify(p.features()).0 == p.group)
            .count();
        correct as f64 / points.len() as f64
    }

    /// Primal hinge objective over standardized features.
    pub fn primal_objective(&self, points: &[LabeledPoint]) -> f64 {
        let mut hinge_sum = 0.0;
        for p in points {
            let margin = p.group.sign() * self.decision_value(p.features());
            hinge_sum += (1.0 - margin).max(0.0);
        }
        0.5 * (self.weights[0] * self.weights[0] + self.weights[1] * self.weights[1])
            + self.cost * hinge_sum
    }

    /// Boundary coefficients in original coordinates:
    /// `raw_w . x + raw_b = 0`.
    pub fn raw_line(&self) -> ([f64; 2], f64) {
        let w = [
            self.weights[0] / self.standardizer.scale[0],
            self.weights[1] / self.standardizer.scale[1],
        ];
        let b = self.bias
            - self.weights[0] * self.standardizer.mean[0] / self.standardizer.scale[0]
            - self.weights[1] * self.standardizer.mean[1] / self.standardizer.scale[1];
        (w, b)
    }

    /// Slope and intercept of `alpha` as a function of `A`; `None` for a
    /// vertical boundary.
    pub fn slope_intercept(&self) -> Option<(f64, f64)> {
        let (w, b) = self.raw_line();
        if w[1] == 0.0 {
            return None;
        }
        Some((-w[0] / w[1], -b / w[1]))
    }

    /// The separating line clipped to a plot rectangle, in original
    /// `(A, alpha)` coordinates.
    pub fn export_boundary(
        &self,
        amplitude_range: (f64, f64),
        damping_range: (f64, f64),
    ) -> Result<[(f64, f64); 2], SvmError> {
        let (w, b) = self.raw_line();
        if w[0] == 0.0 && w[1] == 0.0 {
            return Err(SvmError::ZeroWeight);
        }
        let (a_lo, a_hi) = amplitude_range;
        let (d_lo, d_hi) = damping_range;
        let mut hits: Vec<(f64, f64)> = Vec::new();
        let mut push = |p: (f64, f64)| {
            const REL: f64 = 1e-9;
            if !hits
                .iter()
                .any(|q| (q.0 - p.0).abs() <= REL * (1.0 + p.0.abs()) && (q.1 - p.1).abs() <= REL * (1.0 + p.1.abs()))
            {
                hits.push(p);
            }
        };
        // intersections with the vertical edges
        if w[1] != 0.0 {
            for a in [a_lo, a_hi] {
                let d = -(w[0] * a + b) / w[1];
                if (d_lo..=d_hi).contains(&d) {
                    push((a, d));
                }
            }
        }
        // intersections with the horizontal edges
        if w[0] != 0.0 {
            for d in [d_lo, d_hi] {
                let a = -(w[1] * d + b) / w[0];
                if (a_lo..=a_hi).contains(&a) {
                    push((a, d));
                }
            }
        }
        hits.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
        match hits.len() {
            0 | 1 => Err(SvmError::BoundaryOutsideRange),
            _ => Ok([hits[0], *hits.last().unwrap()]),
        }
    }
}
