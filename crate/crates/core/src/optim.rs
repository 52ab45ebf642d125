//! Limited-memory BFGS for smooth unconstrained minimization.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once the largest coordinate step is below this ...
    pub step_tol: f64,
    /// ... and the objective fell by less than this over `stall_window` iterations.
    pub decrease_tol: f64,
    pub stall_window: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 12,
            max_iter: 500,
            step_tol: 1e-10,
            decrease_tol: 1e-12,
            stall_window: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub value: f64,
    pub iterations: usize,
    /// False only when the iteration cap was reached.
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` starting from `x`, which is overwritten with the result.
///
/// `f(x, grad)` returns the value and writes the gradient. The objective
/// never increases between accepted iterates.
pub fn minimize<F>(mut f: F, x: &mut [f64], opts: &LbfgsOptions) -> LbfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let d = x.len();
    let mut g = vec![0.0; d];
    let mut fx = f(x, &mut g);
    let mut history: VecDeque<f64> = VecDeque::from([fx]);
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut dir = vec![0.0; d];
    let mut x_new = vec![0.0; d];
    let mut g_new = vec![0.0; d];

    for iter in 0..opts.max_iter {
        if g.iter().all(|v| *v == 0.0) {
            return LbfgsOutcome { value: fx, iterations: iter, converged: true };
        }
        // two-loop recursion
        dir.iter_mut().zip(&g).for_each(|(p, gi)| *p = -gi);
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(p, yi)| *p -= a * yi);
            alphas.push(a);
        }
        let gamma = pairs
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y))
            .unwrap_or_else(|| 1.0 / g.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0));
        dir.iter_mut().for_each(|p| *p *= gamma);
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(p, si)| *p += (a - b) * si);
        }
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            // not a descent direction; restart from steepest descent
            pairs.clear();
            let scale = 1.0 / g.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
            dir.iter_mut().zip(&g).for_each(|(p, gi)| *p = -gi * scale);
            slope = dot(&g, &dir);
        }

        // Armijo backtracking; expands while the curvature condition fails.
        let mut t = 1.0;
        let mut shrunk = false;
        let mut candidate: Option<(f64, Vec<f64>, Vec<f64>)> = None;
        for _ in 0..80 {
            x_new.iter_mut().zip(x.iter().zip(&dir)).for_each(|(xn, (xi, p))| *xn = xi + t * p);
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * t * slope {
                let better = candidate.as_ref().is_none_or(|c| f_new < c.0);
                if better {
                    candidate = Some((f_new, x_new.clone(), g_new.clone()));
                }
                if !better || shrunk || dot(&g_new, &dir) >= 0.9 * slope || t >= 1e6 {
                    break;
                }
                t *= 2.0;
            } else {
                if candidate.is_some() {
                    break;
                }
                t *= 0.5;
                shrunk = true;
            }
        }
        let Some((f_new, xc, gc)) = candidate else {
            // no representable decrease along the search direction
            return LbfgsOutcome { value: fx, iterations: iter, converged: true };
        };
        x_new.copy_from_slice(&xc);
        g_new.copy_from_slice(&gc);

        let s: Vec<f64> = x_new.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s.clone(), y, 1.0 / sy));
        }
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        fx = f_new;

        history.push_back(fx);
        if history.len() > opts.stall_window + 1 {
            history.pop_front();
        }
        let step = s.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let decrease = history.front().unwrap() - fx;
        if history.len() == opts.stall_window + 1 && step < opts.step_tol && decrease < opts.decrease_tol {
            return LbfgsOutcome { value: fx, iterations: iter + 1, converged: true };
        }
    }
    LbfgsOutcome { value: fx, iterations: opts.max_iter, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let mut x = vec![-1.2, 1.0];
        let out = minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &mut x,
            &LbfgsOptions { max_iter: 2000, ..Default::default() },
        );
        assert!(out.converged);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?}");
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let scales: Vec<f64> = (0..40).map(|i| 10f64.powf(i as f64 / 16.0)).collect();
        let mut x = vec![1.0; 40];
        let out = minimize(
            |x, g| {
                let mut f = 0.0;
                for i in 0..x.len() {
                    g[i] = scales[i] * x[i];
                    f += 0.5 * scales[i] * x[i] * x[i];
                }
                f
            },
            &mut x,
            &LbfgsOptions { max_iter: 2000, ..Default::default() },
        );
        assert!(out.value < 1e-16, "{out:?}");
    }

    #[test]
    fn converges_on_quartic() {
        let mut x = vec![3.0, -2.0, 0.5];
        minimize(
            |x, g| {
                let f = x.iter().map(|v| v.powi(4) + v * v).sum::<f64>();
                for i in 0..3 {
                    g[i] = 4.0 * x[i].powi(3) + 2.0 * x[i];
                }
                f
            },
            &mut x,
            &LbfgsOptions::default(),
        );
        assert!(x.iter().all(|v| v.abs() < 1e-6));
    }
}
