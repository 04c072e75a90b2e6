//! Bounded multi-start Nelder-Mead minimization over the 4-d parameter space.
//!
//! Constraints are handled through the objective: infeasible points must map to
//! `+inf`. The simplex loop is fully deterministic, so multi-start searches are
//! reproducible from the start list alone.

use crate::{ParamVector, PARAM_DIM};

/// Settings of one simplex search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadConfig {
    /// Iteration cap per simplex run.
    pub max_iterations: usize,
    /// Convergence when the simplex coordinate spread falls below this.
    pub tolerance: f64,
    /// Number of re-initializations around the incumbent after convergence;
    /// helps escape the slow crawl along curved valleys.
    pub restarts: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-8,
            restarts: 2,
        }
    }
}

/// Outcome of a minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub point: ParamVector,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn spread(simplex: &[ParamVector]) -> f64 {
    let mut s = 0.0_f64;
    for d in 0..PARAM_DIM {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in simplex {
            lo = lo.min(v[d]);
            hi = hi.max(v[d]);
        }
        s = s.max(hi - lo);
    }
    s
}

fn combine(a: &ParamVector, b: &ParamVector, coeff: f64) -> ParamVector {
    let mut out = [0.0; PARAM_DIM];
    for d in 0..PARAM_DIM {
        out[d] = a[d] + coeff * (a[d] - b[d]);
    }
    out
}

/// One Nelder-Mead run from `start` with the given initial simplex steps.
pub fn nelder_mead<F: Fn(&ParamVector) -> f64>(
    objective: F,
    start: ParamVector,
    steps: [f64; PARAM_DIM],
    config: &NelderMeadConfig,
) -> Minimum {
    let mut best = run_simplex(&objective, start, steps, config);
    let mut restart_steps = steps;
    for _ in 0..config.restarts {
        for s in &mut restart_steps {
            *s *= 0.01;
        }
        let again = run_simplex(&objective, best.point, restart_steps, config);
        if again.value < best.value {
            let iterations = best.iterations + again.iterations;
            best = Minimum { iterations, ..again };
        } else {
            best.iterations += again.iterations;
        }
    }
    best
}

fn run_simplex<F: Fn(&ParamVector) -> f64>(
    objective: &F,
    start: ParamVector,
    steps: [f64; PARAM_DIM],
    config: &NelderMeadConfig,
) -> Minimum {
    let mut simplex: Vec<ParamVector> = Vec::with_capacity(PARAM_DIM + 1);
    simplex.push(start);
    for d in 0..PARAM_DIM {
        let mut v = start;
        v[d] += steps[d];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(objective).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        iterations += 1;

        // order by value, stable so ties keep insertion order
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let reordered: Vec<ParamVector> = order.iter().map(|&i| simplex[i]).collect();
        let revalued: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = reordered;
        values = revalued;

        if spread(&simplex) < config.tolerance {
            converged = true;
            break;
        }

        let worst = PARAM_DIM;
        let mut centroid = [0.0; PARAM_DIM];
        for v in &simplex[..worst] {
            for d in 0..PARAM_DIM {
                centroid[d] += v[d];
            }
        }
        for c in &mut centroid {
            *c /= worst as f64;
        }

        let reflected = combine(&centroid, &simplex[worst], REFLECT);
        let f_reflected = objective(&reflected);

        if f_reflected < values[0] {
            let expanded = combine(&centroid, &simplex[worst], EXPAND);
            let f_expanded = objective(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[worst - 1] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let contracted = if f_reflected < values[worst] {
                combine(&centroid, &simplex[worst], CONTRACT)
            } else {
                combine(&centroid, &simplex[worst], -CONTRACT)
            };
            let f_contracted = objective(&contracted);
            if f_contracted < f_reflected.min(values[worst]) {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                let anchor = simplex[0];
                for i in 1..simplex.len() {
                    for d in 0..PARAM_DIM {
                        simplex[i][d] = anchor[d] + SHRINK * (simplex[i][d] - anchor[d]);
                    }
                    values[i] = objective(&simplex[i]);
                }
            }
        }
    }

    let mut best_idx = 0;
    for i in 1..values.len() {
        if values[i] < values[best_idx] {
            best_idx = i;
        }
    }
    Minimum {
        point: simplex[best_idx],
        value: values[best_idx],
        iterations,
        converged,
    }
}

/// Runs [`nelder_mead`] from every start and returns the best minimum,
/// first-found among equal-best values.
pub fn minimize_multistart<F: Fn(&ParamVector) -> f64>(
    objective: F,
    starts: &[ParamVector],
    steps: [f64; PARAM_DIM],
    config: &NelderMeadConfig,
) -> Option<Minimum> {
    let mut best: Option<Minimum> = None;
    for &start in starts {
        let candidate = nelder_mead(&objective, start, steps, config);
        best = match best {
            None => Some(candidate),
            Some(current) if candidate.value < current.value => Some(candidate),
            Some(current) => Some(current),
        };
    }
    best
}
