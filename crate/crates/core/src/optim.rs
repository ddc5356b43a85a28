//! Limited-memory BFGS with backtracking line search, sized for the
//! handful of parameters a tomography fit needs.

use std::collections::VecDeque;

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct Lbfgs {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when one iteration improves the objective by less than this.
    pub tolerance: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Lbfgs {
    /// Minimizes `f`, which returns the value and writes the gradient.
    pub fn minimize<F>(&self, mut f: F, x0: Vec<f64>) -> Minimum
    where
        F: FnMut(&[f64], &mut [f64]) -> f64,
    {
        let n = x0.len();
        let mut x = x0;
        let mut g = vec![0.0; n];
        let mut value = f(&x, &mut g);
        let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
        let mut x_new = vec![0.0; n];
        let mut g_new = vec![0.0; n];
        let mut restarted = false;

        for iteration in 1..=self.max_iterations {
            if g.iter().all(|v| *v == 0.0) {
                return Minimum {
                    x,
                    value,
                    iterations: iteration - 1,
                    converged: true,
                };
            }
            let mut dir = self.direction(&g, &history);
            let mut slope = dot(&dir, &g);
            if !(slope < 0.0) {
                history.clear();
                dir = g.iter().map(|v| -v).collect();
                slope = -dot(&g, &g);
            }

            // First steepest-descent step gets a unit-length trial.
            let mut step = if history.is_empty() {
                1.0 / dot(&dir, &dir).sqrt().max(1.0)
            } else {
                1.0
            };
            let mut accepted = None;
            for _ in 0..60 {
                for i in 0..n {
                    x_new[i] = x[i] + step * dir[i];
                }
                let trial = f(&x_new, &mut g_new);
                if trial.is_finite() && trial <= value + 1e-4 * step * slope {
                    accepted = Some(trial);
                    break;
                }
                step *= 0.5;
            }

            let improvement = accepted.map_or(0.0, |v| value - v);
            if let Some(trial) = accepted {
                let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-16 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                    if history.len() == self.memory {
                        history.pop_front();
                    }
                    history.push_back((s, y, 1.0 / sy));
                }
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                value = trial;
            }

            if improvement < self.tolerance {
                // A stalled quasi-Newton step may just be a stale curvature
                // model; retry once from steepest descent before stopping.
                if restarted || history.is_empty() {
                    return Minimum {
                        x,
                        value,
                        iterations: iteration,
                        converged: true,
                    };
                }
                history.clear();
                restarted = true;
            } else {
                restarted = false;
            }
        }
        Minimum {
            x,
            value,
            iterations: self.max_iterations,
            converged: false,
        }
    }

    fn direction(&self, g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
        let mut q: Vec<f64> = g.to_vec();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        q.iter().map(|v| -v).collect()
    }
}
