//! Value-domain smooth maximum of two defining functions.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::geometry::gradient_norm;
use super::{real_gradient, DefiningFunction, FamilyId, FiberScenario};
use crate::cvec;
use crate::error::{Error, Result};
use crate::hardy::CircleGrid;
use crate::C64;

const QUAD_NODES: usize = 96;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -t;
        x[n - 1 - i] = t;
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `|x|` convolved with a C^∞ bump supported on `(−ε, ε)`.
///
/// Equal to `|x|` for `|x| ≥ ε`; convex, with `h'' = 2ψ_ε`.
#[derive(Debug, Clone)]
pub struct SmoothAbs {
    eps: f64,
    norm: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SmoothAbs {
    pub fn new(eps: f64) -> Self {
        let (nodes, weights) = gauss_legendre(QUAD_NODES);
        let mut s = Self {
            eps,
            norm: 1.0,
            nodes,
            weights,
        };
        let total: f64 = s.integrate(-eps, eps, |y| s.bump_raw(y));
        s.norm = 1.0 / total;
        s
    }

    pub fn width(&self) -> f64 {
        self.eps
    }

    fn bump_raw(&self, y: f64) -> f64 {
        let t = y / self.eps;
        if t.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - t * t)).exp()
        }
    }

    /// Normalized bump density `ψ_ε`.
    pub fn bump(&self, y: f64) -> f64 {
        self.norm * self.bump_raw(y)
    }

    fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// `(Ψ(x), M₁(x))`: mass and first moment of the bump on `[−ε, x]`.
    fn moments(&self, x: f64) -> (f64, f64) {
        let m0 = self.integrate(-self.eps, x, |y| self.bump(y));
        let m1 = self.integrate(-self.eps, x, |y| y * self.bump(y));
        (m0, m1)
    }

    pub fn value(&self, x: f64) -> f64 {
        if x.abs() >= self.eps {
            return x.abs();
        }
        let (m0, m1) = self.moments(x);
        x * (2.0 * m0 - 1.0) - 2.0 * m1
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x.abs() >= self.eps {
            return x.signum();
        }
        2.0 * self.moments(x).0 - 1.0
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        2.0 * self.bump(x)
    }
}

/// `(rho₁ + rho₂ + h_ε(rho₁ − rho₂)) / 2`, equal to `max(rho₁, rho₂)` wherever
/// `|rho₁ − rho₂| ≥ ε`.
pub struct SmoothMax {
    first: Arc<dyn DefiningFunction>,
    second: Arc<dyn DefiningFunction>,
    abs: SmoothAbs,
}

impl SmoothMax {
    pub fn new(first: Arc<dyn DefiningFunction>, second: Arc<dyn DefiningFunction>, eps: f64) -> Self {
        Self {
            first,
            second,
            abs: SmoothAbs::new(eps),
        }
    }
}

impl DefiningFunction for SmoothMax {
    fn n(&self) -> usize {
        self.first.n()
    }

    fn value(&self, z: C64, w: &[C64]) -> f64 {
        let a = self.first.value(z, w);
        let b = self.second.value(z, w);
        if (a - b).abs() >= self.abs.width() {
            return a.max(b);
        }
        0.5 * (a + b + self.abs.value(a - b))
    }

    fn gradient(&self, z: C64, w: &[C64]) -> Vec<C64> {
        let a = self.first.value(z, w);
        let b = self.second.value(z, w);
        let ga = self.first.gradient(z, w);
        let gb = self.second.gradient(z, w);
        let s = self.abs.derivative(a - b);
        ga.iter()
            .zip(&gb)
            .map(|(x, y)| 0.5 * (x + y + s * (x - y)))
            .collect()
    }

    fn hessian(&self, z: C64, w: &[C64]) -> DMatrix<f64> {
        let a = self.first.value(z, w);
        let b = self.second.value(z, w);
        let ha = self.first.hessian(z, w);
        let hb = self.second.hessian(z, w);
        let s = self.abs.derivative(a - b);
        let k = self.abs.second_derivative(a - b);
        let mut h = (&ha + &hb + (&ha - &hb) * s) * 0.5;
        if k != 0.0 {
            let gd = real_gradient(&cvec::sub(&self.first.gradient(z, w), &self.second.gradient(z, w)));
            for i in 0..gd.len() {
                for j in 0..gd.len() {
                    h[(i, j)] += 0.5 * k * gd[i] * gd[j];
                }
            }
        }
        h
    }

    fn anchor(&self, z: C64) -> Vec<C64> {
        self.second.anchor(z)
    }

    fn interior_center(&self, z0: C64) -> Option<Vec<C64>> {
        self.second.interior_center(z0)
    }
}

/// Smooth maximum of two defining functions sharing the level set `K`.
///
/// `rho1` must have the steeper gradient on `K`; this is checked at
/// `fiber_samples` level-set points over every grid node.
pub fn smooth_max_combine(
    rho1: &FiberScenario,
    rho2: &FiberScenario,
    eps: f64,
    grid: &CircleGrid,
    fiber_samples: usize,
) -> Result<FiberScenario> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("mollification width must be positive, got {eps}")));
    }
    if rho1.n() != rho2.n() || rho1.level() != rho2.level() {
        return Err(Error::Config("combined scenarios need the same dimension and level".into()));
    }
    let dirs = cvec::sphere_directions(rho1.n(), fiber_samples.max(1));
    for (k, &z) in grid.nodes().iter().enumerate() {
        for (d, dir) in dirs.iter().enumerate() {
            let w = rho1.level_point_indexed(z, dir, d)?;
            if !(gradient_norm(rho1, z, &w) > gradient_norm(rho2, z, &w)) {
                return Err(Error::GradientOrderViolation { index: k });
            }
        }
    }
    Ok(FiberScenario::new(
        FamilyId::SmoothMax,
        rho1.level(),
        Arc::new(SmoothMax::new(
            rho1.defining_function().clone(),
            rho2.defining_function().clone(),
            eps,
        )),
    ))
}
