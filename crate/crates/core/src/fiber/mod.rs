//! Fibered defining functions `rho(z, w)` over the unit circle and their
//! differential geometry.

mod dual;
mod families;
mod geometry;
mod smooth_max;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cvec;
use crate::error::{Error, Result};
use crate::C64;

pub use dual::{diagonal_quadric_fit, dual_transform, fiber_boundary_samples, QuadricFit};
pub use families::{ModulusPolynomial, MonomialTerm, WeightedDistance};
pub use geometry::{
    center_selector, complex_tangent_basis, hypoconvexity_margin, midpoint_check,
    midpoint_constant, tangent_quadratic_form, HypoconvexityReport, KappaSample,
    MidpointConvexityCheck, MidpointProbe, TangentFrame,
};
pub use smooth_max::{smooth_max_combine, SmoothAbs, SmoothMax};

/// Bisection tolerance for level-set points along rays.
pub const ROOT_TOL: f64 = 1e-12;
/// Bisection iteration cap for level-set points along rays.
pub const ROOT_MAX_ITER: usize = 200;

/// A real function on `Γ × Cⁿ` with `w`-derivatives.
///
/// Only [`value`](Self::value) and [`anchor`](Self::anchor) are required; the
/// derivative methods fall back to central finite differences.
pub trait DefiningFunction: Send + Sync {
    fn n(&self) -> usize;

    fn value(&self, z: C64, w: &[C64]) -> f64;

    /// Wirtinger gradient `∂rho/∂w_j`.
    fn gradient(&self, z: C64, w: &[C64]) -> Vec<C64> {
        fd_gradient(|v| self.value(z, v), w)
    }

    /// Real Hessian in `(Re w₁, Im w₁, Re w₂, …)` coordinates.
    fn hessian(&self, z: C64, w: &[C64]) -> DMatrix<f64> {
        fd_hessian(|v| self.gradient(z, v), w)
    }

    /// A point strictly inside the sublevel set over `z ∈ Γ`.
    fn anchor(&self, z: C64) -> Vec<C64>;

    /// Holomorphic extension of the anchor to the open disk, when the family has one.
    fn interior_center(&self, _z0: C64) -> Option<Vec<C64>> {
        None
    }
}

/// Central-difference Wirtinger gradient.
pub fn fd_gradient(f: impl Fn(&[C64]) -> f64, w: &[C64]) -> Vec<C64> {
    let h = 1e-6 * (1.0 + cvec::norm(w));
    let mut x = cvec::to_real(w);
    let mut partials = vec![0.0; x.len()];
    for a in 0..x.len() {
        let x0 = x[a];
        x[a] = x0 + h;
        let fp = f(&cvec::from_real(&x));
        x[a] = x0 - h;
        let fm = f(&cvec::from_real(&x));
        x[a] = x0;
        partials[a] = (fp - fm) / (2.0 * h);
    }
    partials
        .chunks_exact(2)
        .map(|p| C64::new(0.5 * p[0], -0.5 * p[1]))
        .collect()
}

/// Real gradient `(∂x₁, ∂y₁, …)` from a Wirtinger gradient.
pub fn real_gradient(d: &[C64]) -> Vec<f64> {
    d.iter().flat_map(|c| [2.0 * c.re, -2.0 * c.im]).collect()
}

/// Central differences of a Wirtinger gradient, symmetrized.
pub fn fd_hessian(grad: impl Fn(&[C64]) -> Vec<C64>, w: &[C64]) -> DMatrix<f64> {
    let h = 1e-5 * (1.0 + cvec::norm(w));
    let mut x = cvec::to_real(w);
    let d = x.len();
    let mut hess = DMatrix::zeros(d, d);
    for a in 0..d {
        let x0 = x[a];
        x[a] = x0 + h;
        let gp = real_gradient(&grad(&cvec::from_real(&x)));
        x[a] = x0 - h;
        let gm = real_gradient(&grad(&cvec::from_real(&x)));
        x[a] = x0;
        for b in 0..d {
            hess[(b, a)] = (gp[b] - gm[b]) / (2.0 * h);
        }
    }
    (&hess + hess.transpose()) * 0.5
}

/// Tag identifying how a scenario was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyId {
    Ball,
    Ellipsoid,
    ShiftedConjugate,
    CircledRadius,
    CustomSumOfSquares,
    SmoothMax,
    Recentered,
    Custom,
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        let s = s.as_ref().and_then(|v| v.as_str()).unwrap_or("custom");
        f.write_str(s)
    }
}

/// A defining function plus the constraint level `c`; `K` is `{rho = c}`.
#[derive(Clone)]
pub struct FiberScenario {
    level: f64,
    family: FamilyId,
    rho: Arc<dyn DefiningFunction>,
}

impl fmt::Debug for FiberScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiberScenario")
            .field("family", &self.family)
            .field("n", &self.n())
            .field("level", &self.level)
            .finish()
    }
}

impl FiberScenario {
    pub fn new(family: FamilyId, level: f64, rho: Arc<dyn DefiningFunction>) -> Self {
        Self { level, family, rho }
    }

    /// `rho = (|w − a(z)|² / r²)^{p/2}`.
    pub fn ball(center: crate::AnalyticMap, radius: f64, exponent: u8, level: f64) -> Self {
        let n = center.n();
        let rho = WeightedDistance::new(n, vec![1.0 / (radius * radius); n], exponent).with_center(center);
        Self::new(FamilyId::Ball, level, Arc::new(rho))
    }

    /// Unit-ball fibers centred at the origin, `rho = |w|²`, level 1.
    pub fn unit_ball(n: usize) -> Self {
        Self::ball(crate::AnalyticMap::zero(n, 0), 1.0, 2, 1.0)
    }

    /// `rho = (Σ |w_j − a_j(z)|² / a_j²)^{p/2}` with semi-axes `axes`.
    pub fn ellipsoid(axes: &[f64], center: Option<crate::AnalyticMap>, exponent: u8, level: f64) -> Self {
        let weights = axes.iter().map(|a| 1.0 / (a * a)).collect();
        let mut rho = WeightedDistance::new(axes.len(), weights, exponent);
        if let Some(c) = center {
            rho = rho.with_center(c);
        }
        Self::new(FamilyId::Ellipsoid, level, Arc::new(rho))
    }

    /// `rho = |w − (z̄, 0, …)|^p`.
    pub fn shifted_conjugate(n: usize, exponent: u8, level: f64) -> Self {
        let rho = WeightedDistance::new(n, vec![1.0; n], exponent).with_conjugate_shift(1.0);
        Self::new(FamilyId::ShiftedConjugate, level, Arc::new(rho))
    }

    /// Circled fibers `|w| = exp(Re(αz))`: `rho = (|w|² e^{−2 Re(αz)})^{p/2}`.
    pub fn circled_radius(n: usize, alpha: C64, exponent: u8, level: f64) -> Self {
        let rho = WeightedDistance::new(n, vec![1.0; n], exponent).with_log_radius(alpha);
        Self::new(FamilyId::CircledRadius, level, Arc::new(rho))
    }

    pub fn sum_of_squares(rho: ModulusPolynomial, level: f64) -> Self {
        Self::new(FamilyId::CustomSumOfSquares, level, Arc::new(rho))
    }

    pub fn n(&self) -> usize {
        self.rho.n()
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn family(&self) -> FamilyId {
        self.family
    }

    pub fn defining_function(&self) -> &Arc<dyn DefiningFunction> {
        &self.rho
    }

    /// Same defining function, different level.
    pub fn with_level(&self, level: f64) -> Self {
        Self {
            level,
            ..self.clone()
        }
    }

    pub fn value(&self, z: C64, w: &[C64]) -> f64 {
        self.rho.value(z, w)
    }

    pub fn gradient(&self, z: C64, w: &[C64]) -> Vec<C64> {
        self.rho.gradient(z, w)
    }

    pub fn hessian(&self, z: C64, w: &[C64]) -> DMatrix<f64> {
        self.rho.hessian(z, w)
    }

    pub fn anchor(&self, z: C64) -> Vec<C64> {
        self.rho.anchor(z)
    }

    pub fn interior_center(&self, z0: C64) -> Option<Vec<C64>> {
        self.rho.interior_center(z0)
    }

    /// Point of `{rho(z, ·) = c}` on the ray from the anchor along `dir`.
    pub fn level_point(&self, z: C64, dir: &[C64]) -> Result<Vec<C64>> {
        self.level_point_indexed(z, dir, 0)
    }

    pub(crate) fn level_point_indexed(&self, z: C64, dir: &[C64], index: usize) -> Result<Vec<C64>> {
        let a = self.anchor(z);
        let g = |t: f64| self.value(z, &cvec::axpy(&a, C64::new(t, 0.0), dir)) - self.level;
        let fail = Error::RootFindFailure { direction: index };
        if !(g(0.0) < 0.0) {
            return Err(fail);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut grown = 0;
        loop {
            let v = g(hi);
            if !v.is_finite() {
                return Err(fail);
            }
            if v > 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
            grown += 1;
            if grown > 64 {
                return Err(fail);
            }
        }
        for _ in 0..ROOT_MAX_ITER {
            if hi - lo <= ROOT_TOL * hi.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(cvec::axpy(&a, C64::new(0.5 * (lo + hi), 0.0), dir))
    }

    /// Largest `|rho(z̄, w̄) − rho(z, w)|` over seeded random probes near the fibers.
    pub fn conjugate_symmetry_mismatch(&self, probes: usize, seed: u64) -> f64 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let z = C64::from_polar(1.0, theta);
            let a = self.anchor(z);
            let w: Vec<C64> = a
                .iter()
                .map(|x| x + C64::new(rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0))
                .collect();
            let lhs = self.value(z.conj(), &cvec::conj(&w));
            let rhs = self.value(z, &w);
            let scale = 1.0_f64.max(rhs.abs());
            worst = worst.max((lhs - rhs).abs() / scale);
        }
        worst
    }
}

/// `(z, w) ↦ rho(z, w + f(z))`.
struct Recentered {
    inner: Arc<dyn DefiningFunction>,
    shift: crate::AnalyticMap,
}

impl DefiningFunction for Recentered {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn value(&self, z: C64, w: &[C64]) -> f64 {
        self.inner.value(z, &cvec::add(w, &self.shift.eval_unchecked(z)))
    }

    fn gradient(&self, z: C64, w: &[C64]) -> Vec<C64> {
        self.inner.gradient(z, &cvec::add(w, &self.shift.eval_unchecked(z)))
    }

    fn hessian(&self, z: C64, w: &[C64]) -> DMatrix<f64> {
        self.inner.hessian(z, &cvec::add(w, &self.shift.eval_unchecked(z)))
    }

    fn anchor(&self, z: C64) -> Vec<C64> {
        cvec::sub(&self.inner.anchor(z), &self.shift.eval_unchecked(z))
    }

    fn interior_center(&self, z0: C64) -> Option<Vec<C64>> {
        self.inner
            .interior_center(z0)
            .map(|c| cvec::sub(&c, &self.shift.eval_unchecked(z0)))
    }
}

/// Scenario in coordinates translated by an analytic map: `rho'(z, w) = rho(z, w + f(z))`.
pub fn recenter_on_graph(scenario: &FiberScenario, f: &crate::AnalyticMap) -> Result<FiberScenario> {
    if f.n() != scenario.n() {
        return Err(Error::Config(format!(
            "recentering map has {} components, scenario has n = {}",
            f.n(),
            scenario.n()
        )));
    }
    Ok(FiberScenario::new(
        FamilyId::Recentered,
        scenario.level(),
        Arc::new(Recentered {
            inner: scenario.rho.clone(),
            shift: f.clone(),
        }),
    ))
}
