//! Box-constrained limited-memory quasi-Newton minimizer.
//!
//! Search directions come from the L-BFGS two-loop recursion restricted to the variables
//! that are not held at an active bound; steps are projected back into the box and
//! accepted by a backtracking Armijo test. Variables with equal bounds are fixed.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Converged when the projected gradient norm falls to this value.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub memory: usize,
    /// Largest change of any single variable in one step.
    pub max_step: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 5000,
            memory: 12,
            max_step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective value after every accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_gradient(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64], out: &mut [f64]) {
    for i in 0..x.len() {
        out[i] = if lo[i] >= hi[i] || (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0) {
            0.0
        } else {
            g[i]
        };
    }
}

/// Minimizes `f` over the box `[lo, hi]` starting from (the projection of) `x0`.
///
/// `f(x, grad)` returns the objective and writes its gradient.
pub fn minimize<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: &Options) -> Outcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x: Vec<f64> = (0..n).map(|i| x0[i].clamp(lo[i], hi[i].max(lo[i]))).collect();
    let mut g = vec![0.0; n];
    let mut value = f(&x, &mut g);
    let mut trace = vec![value];
    let mut pg = vec![0.0; n];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);

    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut pg_new = vec![0.0; n];
    let mut alpha = vec![0.0; opts.memory];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        projected_gradient(&x, &g, lo, hi, &mut pg);
        let pg_norm = dot(&pg, &pg).sqrt();
        if pg_norm <= opts.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        // Two-loop recursion on the free variables.
        d.copy_from_slice(&pg);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * masked_dot(s, &d, &pg, lo, hi);
            alpha[k] = a;
            for i in 0..n {
                if is_free(i, &pg, lo, hi) {
                    d[i] -= a * y[i];
                }
            }
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * masked_dot(y, &d, &pg, lo, hi);
            for i in 0..n {
                if is_free(i, &pg, lo, hi) {
                    d[i] += (alpha[k] - b) * s[i];
                }
            }
        }
        for i in 0..n {
            d[i] = if is_free(i, &pg, lo, hi) { -d[i] } else { 0.0 };
        }
        if dot(&d, &g) >= 0.0 {
            history.clear();
            d.iter_mut().zip(&pg).for_each(|(di, p)| *di = -p);
        }

        let mut accepted = false;
        for attempt in 0..2 {
            let largest = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut t = if largest > opts.max_step { opts.max_step / largest } else { 1.0 };
            let noise = 1e-12 * (1.0 + value.abs());
            for _ in 0..60 {
                for i in 0..n {
                    x_new[i] = (x[i] + t * d[i]).clamp(lo[i], hi[i].max(lo[i]));
                }
                let predicted: f64 = (0..n).map(|i| g[i] * (x_new[i] - x[i])).sum();
                let v_new = f(&x_new, &mut g_new);
                if v_new <= value + 1e-4 * predicted {
                    accepted = true;
                } else if v_new <= value + noise {
                    // Inside round-off: fall back to progress in the projected gradient.
                    projected_gradient(&x_new, &g_new, lo, hi, &mut pg_new);
                    accepted = dot(&pg_new, &pg_new).sqrt() < pg_norm;
                }
                if accepted {
                    let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                    let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
                    let sy = dot(&s, &y);
                    if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
                        if history.len() == opts.memory {
                            history.pop_front();
                        }
                        history.push_back((s, y, 1.0 / sy));
                    }
                    std::mem::swap(&mut x, &mut x_new);
                    std::mem::swap(&mut g, &mut g_new);
                    value = v_new;
                    trace.push(value);
                    break;
                }
                t *= 0.5;
            }
            if accepted || attempt == 1 {
                break;
            }
            // Retry once along the steepest projected descent.
            history.clear();
            d.iter_mut().zip(&pg).for_each(|(di, p)| *di = -p);
        }
        if !accepted {
            break;
        }
    }
    projected_gradient(&x, &g, lo, hi, &mut pg);
    let gradient_norm = dot(&pg, &pg).sqrt();
    Outcome {
        x,
        value,
        converged: converged || gradient_norm <= opts.tolerance,
        iterations,
        gradient_norm,
        trace,
    }
}

fn is_free(i: usize, pg: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    lo[i] < hi[i] && pg[i] != 0.0
}

fn masked_dot(a: &[f64], b: &[f64], pg: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    (0..a.len())
        .filter(|&i| is_free(i, pg, lo, hi))
        .map(|i| a[i] * b[i])
        .sum()
}
