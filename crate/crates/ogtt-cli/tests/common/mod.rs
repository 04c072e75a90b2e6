//! Independent oracles used by the acceptance suite. Everything here solves
//! the same problems as the library through a different route: brute-force
//! enumeration, dense grids, exact linear algebra.

use ogtt_core::bayes::{log_posterior, NoiseModel, PriorBox};
use ogtt_core::cohort::DeviationData;
use ogtt_core::svm::LabeledPoint;
use ogtt_core::ParamVector;

/// Solves a dense linear system by Gaussian elimination with partial
/// pivoting; returns `None` when the pivot collapses.
#[allow(clippy::needless_range_loop)]
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Exact optimum of the soft-margin SVM dual
/// `max sum(a) - 0.5 a' Q a  s.t.  0 <= a <= C, y' a = 0`
/// by enumerating every bound/free partition and solving the KKT system of
/// the free set. Feasible only for small instances (3^n partitions).
pub fn svm_dual_optimum(features: &[[f64; 2]], labels: &[f64], cost: f64) -> f64 {
    let n = features.len();
    assert!(n <= 12, "enumeration oracle is for desk-scale instances");
    let q = |i: usize, j: usize| -> f64 {
        labels[i] * labels[j] * (features[i][0] * features[j][0] + features[i][1] * features[j][1])
    };
    let mut best = f64::NEG_INFINITY;
    let total = 3usize.pow(n as u32);
    for assignment in 0..total {
        let mut digits = assignment;
        let mut state = vec![0u8; n]; // 0 = at zero, 1 = at cost, 2 = free
        for s in state.iter_mut() {
            *s = (digits % 3) as u8;
            digits /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let upper: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let mut alpha = vec![0.0; n];
        for &i in &upper {
            alpha[i] = cost;
        }
        if free.is_empty() {
            let balance: f64 = (0..n).map(|i| labels[i] * alpha[i]).sum();
            if balance.abs() > 1e-9 * cost.max(1.0) {
                continue;
            }
        } else {
            // KKT: margins of the free set are exactly 1, plus the balance row
            let m = free.len();
            let mut mat = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    mat[r][c] = q(i, j);
                }
                mat[r][m] = labels[i];
                rhs[r] = 1.0 - upper.iter().map(|&j| q(i, j) * cost).sum::<f64>();
            }
            for (c, &j) in free.iter().enumerate() {
                mat[m][c] = labels[j];
            }
            rhs[m] = -upper.iter().map(|&j| labels[j] * cost).sum::<f64>();
            let Some(solution) = solve_dense(mat, rhs) else {
                continue;
            };
            let mut feasible = true;
            for (c, &i) in free.iter().enumerate() {
                alpha[i] = solution[c];
                if !(-1e-9..=cost + 1e-9).contains(&solution[c]) {
                    feasible = false;
                    break;
                }
            }
            if !feasible {
                continue;
            }
        }
        let mut value: f64 = alpha.iter().sum();
        let mut quad = 0.0;
        for i in 0..n {
            if alpha[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if alpha[j] != 0.0 {
                    quad += alpha[i] * alpha[j] * q(i, j);
                }
            }
        }
        value -= 0.5 * quad;
        if value > best {
            best = value;
        }
    }
    best
}

/// Dual optimum of a labelled-point instance in the trainer's standardized
/// coordinates (taken from the trained model so both routes see one instance).
pub fn svm_dual_optimum_standardized(
    points: &[LabeledPoint],
    model: &ogtt_core::svm::SvmModel,
) -> f64 {
    let features: Vec<[f64; 2]> = points
        .iter()
        .map(|p| model.standardizer.transform([p.amplitude, p.damping]))
        .collect();
    let labels: Vec<f64> = points.iter().map(|p| p.group.sign()).collect();
    svm_dual_optimum(&features, &labels, model.cost)
}

pub const GRID_CELLS: usize = 30;

/// Brute-force posterior marginal for the damping rate: the un-normalized
/// posterior evaluated on a 30^4 grid of cell centers over the prior box,
/// marginalized by summation. Returns the 30-cell marginal.
#[allow(clippy::needless_range_loop)]
pub fn grid_alpha_marginal(
    y: &DeviationData,
    prior: &PriorBox,
    noise: &NoiseModel,
) -> [f64; GRID_CELLS] {
    let center = |d: usize, i: usize| -> f64 {
        let (lo, hi) = prior.bounds[d];
        lo + (i as f64 + 0.5) * (hi - lo) / GRID_CELLS as f64
    };
    let mut marginal = [0.0; GRID_CELLS];
    for ia in 0..GRID_CELLS {
        let amplitude = center(0, ia);
        for ial in 0..GRID_CELLS {
            let damping = center(1, ial);
            let mut acc = 0.0;
            for iom in 0..GRID_CELLS {
                let frequency = center(2, iom);
                for ide in 0..GRID_CELLS {
                    let phase = center(3, ide);
                    let u: ParamVector = [amplitude, damping, frequency, phase];
                    acc += log_posterior(&u, y, prior, noise).exp();
                }
            }
            marginal[ial] += acc;
        }
    }
    marginal
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Histogram mode of damping samples on the oracle's grid cells.
pub fn sample_alpha_mode(samples: &[ParamVector], prior: &PriorBox) -> usize {
    let (lo, hi) = prior.bounds[1];
    let mut counts = [0usize; GRID_CELLS];
    for s in samples {
        let idx = (((s[1] - lo) / (hi - lo)) * GRID_CELLS as f64) as isize;
        counts[idx.clamp(0, GRID_CELLS as isize - 1) as usize] += 1;
    }
    let as_float: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    argmax(&as_float)
}

/// 4x4 matrix inverse via Gaussian elimination, for the affine-invariance check.
pub fn invert4(m: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut inverse = [[0.0; 4]; 4];
    for col in 0..4 {
        let mut e = vec![0.0; 4];
        e[col] = 1.0;
        let a: Vec<Vec<f64>> = m.iter().map(|row| row.to_vec()).collect();
        let x = solve_dense(a, e).expect("transform must be invertible");
        for row in 0..4 {
            inverse[row][col] = x[row];
        }
    }
    inverse
}

pub fn mat_vec(m: &[[f64; 4]; 4], v: &ParamVector) -> ParamVector {
    let mut out = [0.0; 4];
    for (r, row) in m.iter().enumerate() {
        out[r] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
    }
    out
}
