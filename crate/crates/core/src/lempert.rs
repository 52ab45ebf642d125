//! Extremal discs, left inverses and the Green-type function `u₁` on ball and
//! ellipsoid fibers, where everything has a closed form.
//!
//! Points are handled in normalized coordinates `x = (w − S)/a` (componentwise),
//! which carry an ellipsoid with semi-axes `a` onto the unit ball.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvec;
use crate::error::{Error, Result};
use crate::fiber::{complex_tangent_basis, FiberScenario};
use crate::{AnalyticMap, C64};

/// Unit-norm tolerance for disc directions.
const DIRECTION_TOL: f64 = 1e-12;
/// Coarse ν grid size for `n = 2`; scaled up with the sphere dimension otherwise.
const NU_GRID: usize = 256;
const ASCENT_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ball,
    Ellipsoid,
}

/// `{Σ |w_j − S_j|² / a_j² < 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFiber {
    kind: ModelKind,
    center: Vec<C64>,
    axes: Vec<f64>,
}

impl ModelFiber {
    pub fn ball(center: Vec<C64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("ball radius must be positive, got {radius}")));
        }
        Self::checked(ModelKind::Ball, vec![radius; center.len()], center)
    }

    pub fn unit_ball(n: usize) -> Self {
        Self::ball(vec![C64::new(0.0, 0.0); n], 1.0).expect("valid")
    }

    pub fn ellipsoid(center: Vec<C64>, axes: Vec<f64>) -> Result<Self> {
        if axes.len() != center.len() {
            return Err(Error::Config("ellipsoid axes and center differ in length".into()));
        }
        Self::checked(ModelKind::Ellipsoid, axes, center)
    }

    fn checked(kind: ModelKind, axes: Vec<f64>, center: Vec<C64>) -> Result<Self> {
        if center.len() < 2 {
            return Err(Error::Dimension(center.len()));
        }
        if axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Config("semi-axes must be positive and finite".into()));
        }
        if center.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Config("center must be finite".into()));
        }
        Ok(Self { kind, center, axes })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[C64] {
        &self.center
    }

    pub fn axes(&self) -> &[f64] {
        &self.axes
    }

    /// `Σ |w_j − S_j|² / a_j²`; equal to 1 on the boundary.
    pub fn defining_value(&self, w: &[C64]) -> f64 {
        cvec::norm_sqr(&self.normalize(w))
    }

    /// The same fiber as a constant-in-`z` scenario at level 1.
    pub fn scenario(&self) -> FiberScenario {
        FiberScenario::ellipsoid(&self.axes, Some(AnalyticMap::constant(&self.center)), 2, 1.0)
    }

    pub fn inradius(&self) -> f64 {
        self.axes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn normalize(&self, w: &[C64]) -> Vec<C64> {
        w.iter()
            .zip(&self.center)
            .zip(&self.axes)
            .map(|((w, s), a)| (w - s) / a)
            .collect()
    }

    fn denormalize(&self, x: &[C64]) -> Vec<C64> {
        x.iter()
            .zip(&self.center)
            .zip(&self.axes)
            .map(|((x, s), a)| s + x * a)
            .collect()
    }

    /// `ν ↦ A⁻¹ν / |A⁻¹ν|`, the disc direction in normalized coordinates.
    fn normalized_direction(&self, nu: &[C64]) -> Vec<C64> {
        let v: Vec<C64> = nu.iter().zip(&self.axes).map(|(v, a)| v / a).collect();
        let norm = cvec::norm(&v);
        cvec::scale(&v, C64::new(1.0 / norm, 0.0))
    }
}

/// The extremal disc through the center with initial direction `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalDisc {
    pub nu: Vec<C64>,
    fiber: ModelFiber,
    direction: Vec<C64>,
}

impl ExtremalDisc {
    /// `f_ν(λ) = S + A(λν')`.
    pub fn disc(&self, lambda: C64) -> Vec<C64> {
        self.fiber.denormalize(&cvec::scale(&self.direction, lambda))
    }

    /// `F_ν(w) = ⟨x, ν'⟩`, a holomorphic left inverse of the disc.
    pub fn left_inverse(&self, w: &[C64]) -> C64 {
        cvec::hdot(&self.direction, &self.fiber.normalize(w))
    }

    /// `f_ν′(0)`, a positive multiple of `ν`.
    pub fn derivative_at_zero(&self) -> Vec<C64> {
        self.direction.iter().zip(&self.fiber.axes).map(|(d, a)| d * a).collect()
    }
}

pub fn extremal_disc(fiber: &ModelFiber, nu: &[C64]) -> Result<ExtremalDisc> {
    let norm = cvec::norm(nu);
    if nu.len() != fiber.n() || !((norm - 1.0).abs() <= DIRECTION_TOL) {
        return Err(Error::BadDirection { norm });
    }
    Ok(ExtremalDisc {
        nu: nu.to_vec(),
        direction: fiber.normalized_direction(nu),
        fiber: fiber.clone(),
    })
}

/// `|F_ν(w)|² + ε |w − f_ν(F_ν(w))|²` as a function of the normalized
/// direction, with its gradient in `ν̄'`.
fn modified_inverse(fiber: &ModelFiber, x: &[C64], dir: &[C64], eps: f64) -> (f64, Vec<C64>) {
    let f = cvec::hdot(dir, x);
    let mut value = f.norm_sqr();
    let mut grad: Vec<C64> = x.iter().map(|xj| xj * f.conj()).collect();
    if eps != 0.0 {
        let e: Vec<C64> = x.iter().zip(dir).map(|(xj, dj)| xj - f * dj).collect();
        let a2: Vec<f64> = fiber.axes.iter().map(|a| a * a).collect();
        value += eps * e.iter().zip(&a2).map(|(ek, ak)| ak * ek.norm_sqr()).sum::<f64>();
        let mix: C64 = dir.iter().zip(&e).zip(&a2).map(|((d, ek), ak)| d * ek.conj() * ak).sum();
        for j in 0..x.len() {
            grad[j] -= eps * (x[j] * mix + a2[j] * e[j] * f.conj());
        }
    }
    (value, grad)
}

/// Coarse sphere grid followed by projected ascent. Returns `(max, direction)`.
fn maximize_over_directions(fiber: &ModelFiber, x: &[C64], eps: f64, grid: usize, steps: usize) -> (f64, Vec<C64>) {
    let dirs = cvec::sphere_directions(fiber.n(), grid.max(1));
    let (mut best, dir) = dirs
        .par_iter()
        .map(|d| (modified_inverse(fiber, x, d, eps).0, d))
        .collect::<Vec<_>>()
        .into_iter()
        .fold((f64::NEG_INFINITY, &dirs[0]), |acc, (v, d)| if v > acc.0 { (v, d) } else { acc });
    let mut dir = dir.clone();
    let mut t = 1.0;
    for _ in 0..steps {
        let (_, g) = modified_inverse(fiber, x, &dir, eps);
        if cvec::norm(&g) == 0.0 {
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let trial = cvec::axpy(&dir, C64::new(t, 0.0), &g);
            let nt = cvec::norm(&trial);
            let trial = cvec::scale(&trial, C64::new(1.0 / nt, 0.0));
            let v = modified_inverse(fiber, x, &trial, eps).0;
            if v > best {
                best = v;
                dir = trial;
                improved = true;
                t *= 2.0;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (best, dir)
}

fn nu_grid(n: usize) -> usize {
    // keep the angular spacing of the n = 2 grid on higher-dimensional spheres
    NU_GRID.saturating_mul(1usize << (2 * (n.saturating_sub(2))).min(8))
}

/// `u₁ = e^{2τ}`, the squared maximal left inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenData {
    pub fiber: ModelFiber,
}

impl GreenData {
    pub fn pole(&self) -> &[C64] {
        &self.fiber.center
    }

    /// `max_ν |F_ν(w)|²` by sampling and refinement.
    pub fn value(&self, w: &[C64]) -> f64 {
        let x = self.fiber.normalize(w);
        if cvec::norm_sqr(&x) == 0.0 {
            return 0.0;
        }
        maximize_over_directions(&self.fiber, &x, 0.0, nu_grid(self.fiber.n()), ASCENT_STEPS).0
    }

    /// Maximum over the first `count` grid directions only, without refinement.
    pub fn sampled_value(&self, w: &[C64], count: usize) -> f64 {
        let x = self.fiber.normalize(w);
        maximize_over_directions(&self.fiber, &x, 0.0, count, 0).0
    }

    /// `Σ |w_j − S_j|² / a_j²`.
    pub fn closed_form(&self, w: &[C64]) -> f64 {
        self.fiber.defining_value(w)
    }

    /// Real Hessian in `(Re w₁, Im w₁, …)`; constant on model fibers.
    pub fn hessian(&self, _w: &[C64]) -> DMatrix<f64> {
        let n = self.fiber.n();
        DMatrix::from_fn(2 * n, 2 * n, |i, j| if i == j { 2.0 / self.fiber.axes[i / 2].powi(2) } else { 0.0 })
    }
}

pub fn green_u1(fiber: &ModelFiber) -> GreenData {
    GreenData { fiber: fiber.clone() }
}

/// `F_ν^ε(w)² = |F_ν(w)|² + ε|w − f_ν(F_ν(w))|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonInverse {
    pub fiber: ModelFiber,
    pub eps: f64,
}

impl EpsilonInverse {
    pub fn value(&self, disc: &ExtremalDisc, w: &[C64]) -> f64 {
        let f = disc.left_inverse(w);
        let back = disc.disc(f);
        f.norm_sqr() + self.eps * cvec::norm_sqr(&cvec::sub(w, &back))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonMax {
    /// `max_ν F_ν^ε(w)²`.
    pub value: f64,
    /// Maximizing direction `ν`.
    pub nu: Vec<C64>,
    pub u1: f64,
    /// `u₁(w) > 1/2`: outside the region where the maximum equals `u₁`.
    pub region_violation: bool,
}

pub fn epsilon_inverse_max(fiber: &ModelFiber, eps: f64, w: &[C64], nu_samples: usize) -> Result<EpsilonMax> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
    }
    if w.len() != fiber.n() {
        return Err(Error::Config("probe has the wrong dimension".into()));
    }
    let x = fiber.normalize(w);
    let u1 = cvec::norm_sqr(&x);
    let (value, dir) = maximize_over_directions(fiber, &x, eps, nu_samples, ASCENT_STEPS);
    // back from ν' to ν ∝ A ν'
    let nu: Vec<C64> = dir.iter().zip(&fiber.axes).map(|(d, a)| d * a).collect();
    let norm = cvec::norm(&nu);
    Ok(EpsilonMax {
        value,
        nu: cvec::scale(&nu, C64::new(1.0 / norm, 0.0)),
        u1,
        region_violation: u1 > 0.5,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSelection {
    pub eps: f64,
    /// Smallest tangent-Hessian eigenvalue of `u₁` on the shell `1/3 ≤ u₁ ≤ 2/3`.
    pub shell_margin: f64,
    pub halvings: usize,
    pub probes: usize,
    /// Largest `max_ν F^ε² − u₁` on the probe set at the selected `ε`.
    pub max_excess: f64,
}

/// Quarter of the shell margin, halved until `max_ν F^ε² = u₁` holds on
/// `probes` seeded points with `u₁ ≤ 1/2`.
pub fn admissible_epsilon(fiber: &ModelFiber, probes: usize, seed: u64) -> Result<EpsilonSelection> {
    let scenario = fiber.scenario();
    let z = C64::new(1.0, 0.0);
    let mut shell_margin = f64::INFINITY;
    for level in [1.0 / 3.0, 0.5, 2.0 / 3.0] {
        let s = scenario.with_level(level);
        for dir in cvec::sphere_directions(fiber.n(), 64) {
            let w = s.level_point(z, &dir)?;
            shell_margin = shell_margin.min(complex_tangent_basis(&s, z, &w)?.margin);
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<C64>> = (0..probes)
        .map(|_| {
            let x: Vec<C64> = (0..fiber.n())
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let r = (0.5 * rng.random::<f64>()).sqrt() / cvec::norm(&x).max(1e-300);
            fiber.denormalize(&cvec::scale(&x, C64::new(r, 0.0)))
        })
        .collect();
    let mut eps = 0.25 * shell_margin;
    for halvings in 0..60 {
        let max_excess = points
            .par_iter()
            .map(|w| {
                let m = epsilon_inverse_max(fiber, eps, w, nu_grid(fiber.n())).map(|m| m.value - m.u1);
                m.unwrap_or(f64::INFINITY)
            })
            .reduce(|| f64::NEG_INFINITY, f64::max);
        if max_excess <= 1e-10 {
            return Ok(EpsilonSelection {
                eps,
                shell_margin,
                halvings,
                probes,
                max_excess,
            });
        }
        eps *= 0.5;
    }
    Err(Error::Config("no admissible epsilon found".into()))
}

/// Smallest real-Hessian eigenvalue of `u₁` over `probes` points with
/// `0 < |w − S| < δ`.
pub fn pole_convexity_check(fiber: &ModelFiber, delta: f64, probes: usize) -> Result<f64> {
    if !(delta > 0.0) || delta >= fiber.inradius() {
        return Err(Error::Config(format!(
            "delta must lie in (0, {}) for this fiber",
            fiber.inradius()
        )));
    }
    let green = green_u1(fiber);
    let dirs = cvec::sphere_directions(fiber.n(), probes.max(1));
    let mut worst = f64::INFINITY;
    for (k, d) in dirs.iter().enumerate() {
        let r = delta * (k as f64 + 0.5) / dirs.len() as f64;
        let w = cvec::axpy(fiber.center(), C64::new(r, 0.0), d);
        let eig = SymmetricEigen::new(green.hessian(&w)).eigenvalues.min();
        worst = worst.min(eig);
    }
    Ok(worst)
}
