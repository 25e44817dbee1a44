//! Soft-margin linear SVM trained by sequential minimal optimization on the
//! dual (second-order working-set selection, unregularized bias).
//!
//! Training stops when the maximal KKT violation drops below [`TOLERANCE`]
//! or after [`MAX_EPOCHS`]·n pair updates. Examples are put into a canonical
//! order first, so the result does not depend on input order.

use std::cmp::Ordering;

use crate::error::{Error, Result};

pub const TOLERANCE: f64 = 1e-4;
pub const MAX_EPOCHS: usize = 1000;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    /// Class labeled +1.
    pub class_pos: usize,
    /// Class labeled −1.
    pub class_neg: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub seed: u64,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// +1 when the decision value is ≥ 0, else −1.
    pub fn outcome(&self, x: &[f64]) -> i8 {
        if self.decision(x) >= 0.0 {
            1
        } else {
            -1
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Trains `pos` (+1) against `neg` (−1). Class ids default to 0 / 1.
pub fn train_binary<T: AsRef<[f64]>>(pos: &[T], neg: &[T], c: f64, seed: u64) -> Result<BinarySvm> {
    if pos.is_empty() {
        return Err(Error::EmptyClass("positive".into()));
    }
    if neg.is_empty() {
        return Err(Error::EmptyClass("negative".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("C must be positive, got {c}")));
    }
    let dim = pos[0].as_ref().len();
    for x in pos.iter().chain(neg) {
        if x.as_ref().len() != dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{dim} features"),
                actual: format!("{} features", x.as_ref().len()),
            });
        }
    }

    let mut examples: Vec<(&[f64], f64)> = pos
        .iter()
        .map(|x| (x.as_ref(), 1.0))
        .chain(neg.iter().map(|x| (x.as_ref(), -1.0)))
        .collect();
    examples.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| lexicographic(a.0, b.0)));

    let xs: Vec<&[f64]> = examples.iter().map(|e| e.0).collect();
    let y: Vec<f64> = examples.iter().map(|e| e.1).collect();
    let alpha = solve_dual(&xs, &y, c);

    let mut weights = vec![0.0; dim];
    for ((x, &yi), &a) in xs.iter().zip(&y).zip(&alpha.alpha) {
        if a != 0.0 {
            for (w, &v) in weights.iter_mut().zip(x.iter()) {
                *w += a * yi * v;
            }
        }
    }
    Ok(BinarySvm { class_pos: 0, class_neg: 1, weights, bias: -alpha.rho, c, seed })
}

struct DualSolution {
    alpha: Vec<f64>,
    rho: f64,
}

fn solve_dual(xs: &[&[f64]], y: &[f64], c: f64) -> DualSolution {
    let n = xs.len();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = dot(xs[i], xs[j]);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }
    let k = |i: usize, j: usize| kernel[i * n + j];
    // Q_ij = y_i y_j K_ij; gradient of ½αᵀQα − eᵀα.
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    for _ in 0..MAX_EPOCHS.saturating_mul(n) {
        // Maximal violator in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        // Second-order partner in I_low.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let yg = y[t] * grad[t];
            gmax2 = gmax2.max(yg);
            if i == usize::MAX {
                continue;
            }
            let diff = gmax + yg;
            if diff > 0.0 {
                let quad = (k(i, i) + k(t, t) - 2.0 * k(i, t)).max(TAU);
                let obj = -(diff * diff) / quad;
                if obj <= best_obj {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax + gmax2 < TOLERANCE {
            break;
        }

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * k(i, j);
        if y[i] != y[j] {
            let quad = (k(i, i) + k(j, j) + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k(i, i) + k(j, j) - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
    }

    DualSolution { rho: compute_rho(&alpha, &grad, y, c), alpha }
}

fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for ((&a, &g), &yi) in alpha.iter().zip(grad).zip(y) {
        let yg = yi * g;
        if a >= c {
            if yi < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if a <= 0.0 {
            if yi > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}
