//! The H∞ min-max problem `γ = inf_f max_{z ∈ Γ} rho(z, f(z))` over truncated
//! analytic maps, solved by annealed log-sum-exp smoothing plus L-BFGS.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::{fd_gradient, FiberScenario};
use crate::hardy::{conjugate_symmetrize, AnalyticMap, CircleGrid};
use crate::optim::{self, LbfgsOptions};
use crate::C64;

/// Probes used to decide whether a scenario is conjugate-symmetric.
const SYMMETRY_PROBES: usize = 100;
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub degree: usize,
    pub grid: usize,
    /// Strictly decreasing, positive.
    pub temperatures: Vec<f64>,
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Coefficient-step tolerance of each stage.
    pub tol: f64,
    /// Optimize over real coefficients only.
    #[serde(default)]
    pub real_coefficients: bool,
    /// Use central differences instead of the scenario's gradient.
    #[serde(default)]
    pub finite_difference: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            degree: 32,
            grid: 256,
            temperatures: geometric_schedule(1.0, 1e-4, 0.5),
            starts: 10,
            seed: 7,
            max_iter: 400,
            tol: 1e-10,
            real_coefficients: false,
            finite_difference: false,
        }
    }
}

/// `t0, t0·ratio, …` down to the last value not below `t_min`.
pub fn geometric_schedule(t0: f64, t_min: f64, ratio: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = t0;
    while t >= t_min * (1.0 - 1e-12) {
        out.push(t);
        t *= ratio;
    }
    out
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperatures.is_empty()
            || self.temperatures.iter().any(|t| !(*t > 0.0))
            || self.temperatures.windows(2).any(|w| !(w[1] < w[0]))
        {
            return Err(Error::Config("temperatures must be positive and strictly decreasing".into()));
        }
        if self.starts == 0 {
            return Err(Error::Config("at least one start is required".into()));
        }
        if self.degree == 0 {
            return Err(Error::Config("degree must be at least 1".into()));
        }
        CircleGrid::new(self.grid)?;
        if self.grid < 4 * self.degree {
            return Err(Error::Config(format!(
                "grid {} is too coarse for degree {} (need grid >= 4·degree)",
                self.grid, self.degree
            )));
        }
        Ok(())
    }

    fn lbfgs(&self) -> LbfgsOptions {
        let widen = if self.finite_difference { 10.0 } else { 1.0 };
        LbfgsOptions {
            max_iter: self.max_iter,
            step_tol: self.tol * widen,
            decrease_tol: 1e-12 * widen,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub gamma: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Grid maximum of `rho(z_k, φ̂(z_k))`.
    pub gamma_hat: f64,
    pub phi_hat: AnalyticMap,
    pub flatness_residual: f64,
    /// Largest pairwise grid sup-distance between converged runs.
    pub multistart_dispersion: f64,
    /// `‖φ̂ − sym(φ̂)‖` when the scenario is conjugate-symmetric.
    pub symmetry_residual: Option<f64>,
    pub converged: bool,
    /// Best grid maximum after each anneal stage of the winning run.
    pub stage_gammas: Vec<f64>,
    /// Smoothed objective at the end of each anneal stage of the winning run.
    pub stage_objectives: Vec<f64>,
    pub runs: Vec<RunSummary>,
    pub degree: usize,
    pub grid: usize,
}

/// Maps of the form `f(z) = base(z) + q(z)·Σ_j c_j z^j` sampled on a grid.
///
/// Plain solves use `base = 0, q = 1`; hull membership uses
/// `base = w₀, q = z − z₀` so the interpolation constraint holds exactly.
pub(crate) struct AffineProblem<'a> {
    scenario: &'a FiberScenario,
    nodes: Vec<C64>,
    base: Vec<Vec<C64>>,
    basis: Vec<Vec<C64>>,
    n: usize,
    free: usize,
    real_only: bool,
    finite_difference: bool,
}

pub(crate) struct RunOutcome {
    pub x: Vec<f64>,
    pub gamma: f64,
    pub converged: bool,
    pub iterations: usize,
    pub stage_gammas: Vec<f64>,
    pub stage_objectives: Vec<f64>,
}

impl<'a> AffineProblem<'a> {
    pub fn new(
        scenario: &'a FiberScenario,
        grid: &CircleGrid,
        base: &[C64],
        multiplier: impl Fn(C64) -> C64,
        free: usize,
        config: &SolveConfig,
    ) -> Self {
        let nodes = grid.nodes().to_vec();
        let basis = nodes
            .iter()
            .map(|&z| {
                let q = multiplier(z);
                let mut p = C64::new(1.0, 0.0);
                (0..free)
                    .map(|_| {
                        let v = q * p;
                        p *= z;
                        v
                    })
                    .collect()
            })
            .collect();
        Self {
            scenario,
            base: vec![base.to_vec(); nodes.len()],
            nodes,
            basis,
            n: scenario.n(),
            free,
            real_only: config.real_coefficients,
            finite_difference: config.finite_difference,
        }
    }

    fn parts(&self) -> usize {
        if self.real_only {
            1
        } else {
            2
        }
    }

    pub fn dim(&self) -> usize {
        self.n * self.free * self.parts()
    }

    /// `c[j][i]` from the packed real vector.
    pub fn coefficients(&self, x: &[f64]) -> Vec<Vec<C64>> {
        let p = self.parts();
        (0..self.free)
            .map(|j| {
                (0..self.n)
                    .map(|i| {
                        let at = (i * self.free + j) * p;
                        C64::new(x[at], if p == 2 { x[at + 1] } else { 0.0 })
                    })
                    .collect()
            })
            .collect()
    }

    pub fn pack(&self, c: &[Vec<C64>]) -> Vec<f64> {
        let p = self.parts();
        let mut x = vec![0.0; self.dim()];
        for (j, row) in c.iter().enumerate().take(self.free) {
            for (i, v) in row.iter().enumerate() {
                let at = (i * self.free + j) * p;
                x[at] = v.re;
                if p == 2 {
                    x[at + 1] = v.im;
                }
            }
        }
        x
    }

    fn values(&self, x: &[f64]) -> Vec<Vec<C64>> {
        let c = self.coefficients(x);
        self.basis
            .iter()
            .zip(&self.base)
            .map(|(b, base)| {
                let mut f = base.clone();
                for (bj, cj) in b.iter().zip(&c) {
                    for (fi, ci) in f.iter_mut().zip(cj) {
                        *fi += bj * ci;
                    }
                }
                f
            })
            .collect()
    }

    pub fn rho_values(&self, x: &[f64]) -> Vec<f64> {
        self.values(x)
            .iter()
            .zip(&self.nodes)
            .map(|(f, &z)| self.scenario.value(z, f))
            .collect()
    }

    /// `(max, min)` of `rho` over the grid.
    pub fn grid_extremes(&self, x: &[f64]) -> (f64, f64) {
        let v = self.rho_values(x);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        (max, min)
    }

    fn check_finite(&self, x: &[f64]) -> Result<()> {
        for (f, &z) in self.values(x).iter().zip(&self.nodes) {
            if !self.scenario.value(z, f).is_finite() {
                return Err(Error::NonFinite { z });
            }
        }
        Ok(())
    }

    /// `T·log Σ_k exp(rho_k / T)` and its gradient.
    fn smoothed(&self, x: &[f64], temperature: f64, grad: &mut [f64]) -> f64 {
        let f = self.values(x);
        let rho: Vec<f64> = f.iter().zip(&self.nodes).map(|(w, &z)| self.scenario.value(z, w)).collect();
        let m = rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return f64::INFINITY;
        }
        let weights: Vec<f64> = rho.iter().map(|r| ((r - m) / temperature).exp()).collect();
        let total: f64 = weights.iter().sum();
        let value = m + temperature * total.ln();

        // complex gradient G[j][i] = 2 Σ_k p_k conj(D_{k,i} b_{k,j})
        let mut g = vec![vec![C64::new(0.0, 0.0); self.n]; self.free];
        for (k, (w, &z)) in f.iter().zip(&self.nodes).enumerate() {
            let p = weights[k] / total;
            if p < 1e-300 {
                continue;
            }
            let d = if self.finite_difference {
                fd_gradient(|v| self.scenario.value(z, v), w)
            } else {
                self.scenario.gradient(z, w)
            };
            for (gj, bj) in g.iter_mut().zip(&self.basis[k]) {
                for (gji, di) in gj.iter_mut().zip(&d) {
                    *gji += 2.0 * p * (di * bj).conj();
                }
            }
        }
        let parts = self.parts();
        for (j, gj) in g.iter().enumerate() {
            for (i, v) in gj.iter().enumerate() {
                let at = (i * self.free + j) * parts;
                grad[at] = v.re;
                if parts == 2 {
                    grad[at + 1] = v.im;
                }
            }
        }
        value
    }

    /// Annealed descent from `x0`, keeping the iterate with the smallest grid max.
    pub fn run(&self, x0: Vec<f64>, config: &SolveConfig) -> Result<RunOutcome> {
        self.check_finite(&x0)?;
        let opts = config.lbfgs();
        let mut x = x0;
        let mut best_x = x.clone();
        let mut best = self.grid_extremes(&x).0;
        let mut converged = true;
        let mut iterations = 0;
        let mut stage_gammas = Vec::with_capacity(config.temperatures.len());
        let mut stage_objectives = Vec::with_capacity(config.temperatures.len());
        for &t in &config.temperatures {
            let out = optim::minimize(|x, g| self.smoothed(x, t, g), &mut x, &opts);
            converged &= out.converged;
            iterations += out.iterations;
            stage_objectives.push(out.value);
            let gm = self.grid_extremes(&x).0;
            if gm < best {
                best = gm;
                best_x.copy_from_slice(&x);
            }
            stage_gammas.push(best);
        }
        self.check_finite(&best_x)?;
        Ok(RunOutcome {
            x: best_x,
            gamma: best,
            converged,
            iterations,
            stage_gammas,
            stage_objectives,
        })
    }
}

/// Deterministic per-start perturbation, scale `0.5·2^{−j}` on coefficient `j`.
pub(crate) fn perturbation(seed: u64, start: usize, n: usize, free: usize) -> Vec<Vec<C64>> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    (0..free)
        .map(|j| {
            let s = 0.5 * 0.5f64.powi(j as i32);
            (0..n)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re * s, im * s)
                })
                .collect()
        })
        .collect()
}

/// Solves the min-max problem from the zero map plus seeded perturbations.
pub fn solve_gamma(scenario: &FiberScenario, config: &SolveConfig) -> Result<SolveResult> {
    solve_gamma_from(scenario, config, None)
}

/// As [`solve_gamma`], with start 0 at `warm` (zero-padded or truncated to the
/// configured degree). The result is never worse than the warm start.
pub fn solve_gamma_from(
    scenario: &FiberScenario,
    config: &SolveConfig,
    warm: Option<&AnalyticMap>,
) -> Result<SolveResult> {
    config.validate()?;
    let n = scenario.n();
    if let Some(w) = warm {
        if w.n() != n {
            return Err(Error::Config("warm start has the wrong dimension".into()));
        }
    }
    let grid = CircleGrid::new(config.grid)?;
    let free = config.degree + 1;
    let problem = AffineProblem::new(scenario, &grid, &vec![C64::new(0.0, 0.0); n], |_| C64::new(1.0, 0.0), free, config);
    let mut start0 = match warm {
        Some(w) => w.with_degree(config.degree).coeffs().to_vec(),
        None => vec![vec![C64::new(0.0, 0.0); n]; free],
    };
    if config.real_coefficients {
        for v in start0.iter_mut().flatten() {
            v.im = 0.0;
        }
    }

    let outcomes: Vec<Result<RunOutcome>> = (0..config.starts)
        .into_par_iter()
        .map(|s| {
            let mut c = start0.clone();
            if s > 0 {
                for (cj, pj) in c.iter_mut().zip(perturbation(config.seed, s, n, free)) {
                    for (a, b) in cj.iter_mut().zip(pj) {
                        *a += b;
                    }
                }
            }
            problem.run(problem.pack(&c), config)
        })
        .collect();
    let outcomes: Vec<RunOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.gamma.total_cmp(&b.1.gamma).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one start");
    let maps: Vec<AnalyticMap> = outcomes
        .iter()
        .map(|o| AnalyticMap::from_coeffs(problem.coefficients(&o.x)).expect("rectangular"))
        .collect();
    let converged_idx: Vec<usize> = (0..outcomes.len()).filter(|&i| outcomes[i].converged).collect();
    let pool = if converged_idx.len() >= 2 { converged_idx } else { (0..outcomes.len()).collect() };
    let multistart_dispersion = pairwise_dispersion(pool.iter().map(|&i| &maps[i]), &grid);

    let winner = &outcomes[best];
    let phi_hat = maps[best].clone();
    let (max, min) = problem.grid_extremes(&winner.x);
    let symmetry_residual = (scenario.conjugate_symmetry_mismatch(SYMMETRY_PROBES, config.seed) < SYMMETRY_TOL)
        .then(|| phi_hat.coeff_distance(&conjugate_symmetrize(&phi_hat)));

    Ok(SolveResult {
        gamma_hat: max,
        flatness_residual: max - min,
        multistart_dispersion,
        symmetry_residual,
        converged: outcomes.iter().all(|o| o.converged),
        stage_gammas: winner.stage_gammas.clone(),
        stage_objectives: winner.stage_objectives.clone(),
        runs: outcomes
            .iter()
            .map(|o| RunSummary {
                gamma: o.gamma,
                converged: o.converged,
                iterations: o.iterations,
            })
            .collect(),
        phi_hat,
        degree: config.degree,
        grid: config.grid,
    })
}

fn pairwise_dispersion<'m>(maps: impl Iterator<Item = &'m AnalyticMap>, grid: &CircleGrid) -> f64 {
    let maps: Vec<&AnalyticMap> = maps.collect();
    let mut worst: f64 = 0.0;
    for a in 0..maps.len() {
        for b in (a + 1)..maps.len() {
            worst = worst.max(maps[a].grid_distance(maps[b], grid));
        }
    }
    worst
}

/// `max_k rho(z_k, φ(z_k)) − min_k rho(z_k, φ(z_k))`.
pub fn flatness_report(scenario: &FiberScenario, phi: &AnalyticMap, grid: &CircleGrid) -> f64 {
    let (max, min) = grid_extremes(scenario, phi, grid);
    max - min
}

/// `(max, min)` of `rho(z_k, f(z_k))` over the grid.
pub fn grid_extremes(scenario: &FiberScenario, f: &AnalyticMap, grid: &CircleGrid) -> (f64, f64) {
    grid.nodes()
        .iter()
        .map(|&z| scenario.value(z, &f.eval_unchecked(z)))
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), v| (a.max(v), b.min(v)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub dispersion: f64,
    /// Start indices that hit the iteration cap.
    pub stalled_starts: Vec<usize>,
    pub gamma_hat: f64,
}

/// Multistart agreement of the optimizer.
pub fn uniqueness_probe(scenario: &FiberScenario, config: &SolveConfig) -> Result<UniquenessReport> {
    if config.starts < 2 {
        return Err(Error::Config("uniqueness probe needs at least two starts".into()));
    }
    let res = solve_gamma(scenario, config)?;
    Ok(UniquenessReport {
        dispersion: res.multistart_dispersion,
        stalled_starts: res
            .runs
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.converged)
            .map(|(i, _)| i)
            .collect(),
        gamma_hat: res.gamma_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn small() -> SolveConfig {
        SolveConfig {
            degree: 8,
            grid: 64,
            starts: 3,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = small();
        cfg.temperatures = vec![1.0, 1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.grid = 16;
        assert!(cfg.validate().is_err());
        let mut cfg = small();
        cfg.starts = 0;
        assert!(cfg.validate().is_err());
        assert!(small().validate().is_ok());
        let s = geometric_schedule(1.0, 1e-4, 0.5);
        assert_eq!(s.len(), 14);
        assert!(s.last().unwrap() >= &1e-4);
    }

    #[test]
    fn smoothed_gradient_matches_finite_differences() {
        let s = FiberScenario::shifted_conjugate(2, 2, 1.0);
        let grid = CircleGrid::new(32).unwrap();
        let cfg = small();
        let p = AffineProblem::new(&s, &grid, &[c(0.2, 0.0), c(0.0, 0.1)], |z| z - c(0.3, 0.1), 5, &cfg);
        let x: Vec<f64> = (0..p.dim()).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.1).collect();
        let mut g = vec![0.0; x.len()];
        p.smoothed(&x, 0.05, &mut g);
        let mut scratch = vec![0.0; x.len()];
        for a in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[a] += 1e-6;
            xm[a] -= 1e-6;
            let fd = (p.smoothed(&xp, 0.05, &mut scratch) - p.smoothed(&xm, 0.05, &mut scratch)) / 2e-6;
            assert!((fd - g[a]).abs() < 1e-6, "coordinate {a}: {fd} vs {}", g[a]);
        }
    }

    #[test]
    fn exact_fit_is_recovered() {
        let a = AnalyticMap::from_components(&[vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(3.0, 0.0)]]).unwrap();
        let s = FiberScenario::ball(a.clone(), 1.0, 2, 1.0);
        let res = solve_gamma(&s, &small()).unwrap();
        assert!(res.gamma_hat < 1e-8, "{}", res.gamma_hat);
        assert!(res.phi_hat.coeff_distance(&a) < 1e-6);
        assert!(res.multistart_dispersion < 1e-6);
        assert!(res.stage_gammas.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn conjugate_shift_has_value_one() {
        let s = FiberScenario::shifted_conjugate(2, 2, 1.0);
        let res = solve_gamma(&s, &small()).unwrap();
        assert!((res.gamma_hat - 1.0).abs() < 1e-3, "{}", res.gamma_hat);
        assert!(res.phi_hat.grid_norm(&CircleGrid::new(64).unwrap()) < 1e-3);
        assert!(res.symmetry_residual.unwrap() < 1e-3);
        assert!(res.stage_objectives.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn separable_sum_of_oracles() {
        // |w₁ − z̄|² + |w₂ − 1|²
        let center = AnalyticMap::constant(&[c(0.0, 0.0), c(1.0, 0.0)]);
        let rho = crate::fiber::WeightedDistance::new(2, vec![1.0, 1.0], 2)
            .with_center(center)
            .with_conjugate_shift(1.0);
        let s = FiberScenario::new(crate::FamilyId::Custom, 1.0, std::sync::Arc::new(rho));
        let res = solve_gamma(&s, &small()).unwrap();
        assert!((res.gamma_hat - 1.0).abs() < 1e-3);
        let want = AnalyticMap::constant(&[c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(res.phi_hat.grid_distance(&want, &CircleGrid::new(64).unwrap()) < 1e-3);
    }

    #[test]
    fn flatness_examples() {
        let s = FiberScenario::shifted_conjugate(2, 2, 1.0);
        let grid = CircleGrid::new(64).unwrap();
        assert!(flatness_report(&s, &AnalyticMap::zero(2, 3), &grid) < 1e-15);
        let bumped = AnalyticMap::constant(&[c(0.1, 0.0), c(0.0, 0.0)]);
        assert!((flatness_report(&s, &bumped, &grid) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn warm_start_is_never_worsened() {
        let s = FiberScenario::shifted_conjugate(2, 2, 1.0);
        let mut cfg = small();
        cfg.temperatures = vec![10.0];
        cfg.max_iter = 1;
        cfg.starts = 1;
        let warm = AnalyticMap::constant(&[c(0.01, 0.0), c(0.0, 0.0)]);
        let (bound, _) = grid_extremes(&s, &warm, &CircleGrid::new(64).unwrap());
        let res = solve_gamma_from(&s, &cfg, Some(&warm)).unwrap();
        assert!(res.gamma_hat <= bound);
        assert!(!res.converged);
    }

    #[test]
    fn non_finite_scenarios_are_rejected() {
        struct Bad;
        impl crate::fiber::DefiningFunction for Bad {
            fn n(&self) -> usize {
                2
            }
            fn value(&self, _z: C64, _w: &[C64]) -> f64 {
                f64::NAN
            }
            fn anchor(&self, _z: C64) -> Vec<C64> {
                vec![c(0.0, 0.0); 2]
            }
        }
        let s = FiberScenario::new(crate::FamilyId::Custom, 1.0, std::sync::Arc::new(Bad));
        assert!(matches!(solve_gamma(&s, &small()), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn perturbations_are_deterministic_and_decay() {
        let a = perturbation(7, 3, 2, 6);
        assert_eq!(a, perturbation(7, 3, 2, 6));
        assert_ne!(a, perturbation(7, 4, 2, 6));
        assert!(a[5].iter().all(|v| v.norm() < 0.5));
    }
}
