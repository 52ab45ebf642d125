//! Complex tangent frames, hypoconvexity margins, center selection and the
//! midpoint convexity probe.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{real_gradient, FiberScenario};
use crate::cvec;
use crate::error::{Error, Result};
use crate::hardy::CircleGrid;
use crate::C64;

const DEGENERATE_GRADIENT: f64 = 1e-12;

/// Orthonormal basis of the complex tangent space at a boundary point, and
/// the smallest value of the Hessian quadratic form on unit tangent vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentFrame {
    pub z: C64,
    pub w: Vec<C64>,
    pub basis: Vec<Vec<C64>>,
    pub margin: f64,
    /// Unit tangent vector attaining `margin`.
    pub witness: Vec<C64>,
}

/// `D²rho[(0,u),(0,u)]` with `u` embedded as `(Re u, Im u)`.
pub fn tangent_quadratic_form(hess: &DMatrix<f64>, u: &[C64]) -> f64 {
    let x = DVector::from_vec(cvec::to_real(u));
    (x.transpose() * hess * &x)[(0, 0)]
}

fn project_out(v: &mut [C64], e: &[C64]) {
    let p = cvec::hdot(e, v);
    for (a, b) in v.iter_mut().zip(e) {
        *a -= p * b;
    }
}

/// Basis of `{u : Σ u_j ∂rho/∂w_j = 0}` built from the standard basis in index order.
pub fn complex_tangent_basis(scenario: &FiberScenario, z: C64, w: &[C64]) -> Result<TangentFrame> {
    let grad = scenario.gradient(z, w);
    let gnorm = cvec::norm(&grad);
    if !(gnorm >= DEGENERATE_GRADIENT) {
        return Err(Error::DegenerateGradient { norm: gnorm });
    }
    let n = w.len();
    // Σ u_j D_j = ⟨conj(D), u⟩, so the complex normal is conj(D)/|D|.
    let normal: Vec<C64> = grad.iter().map(|d| d.conj() / gnorm).collect();
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(n - 1);
    for j in 0..n {
        if basis.len() == n - 1 {
            break;
        }
        let mut v = cvec::unit(n, j);
        // Two Gram-Schmidt sweeps keep the pairing at rounding level.
        for _ in 0..2 {
            project_out(&mut v, &normal);
            for b in &basis {
                project_out(&mut v, b);
            }
        }
        let len = cvec::norm(&v);
        if len > 1e-6 {
            basis.push(cvec::scale(&v, C64::new(1.0 / len, 0.0)));
        }
    }

    let hess = scenario.hessian(z, w);
    let (margin, witness) = restricted_minimum(&hess, &basis);
    Ok(TangentFrame {
        z,
        w: w.to_vec(),
        basis,
        margin,
        witness,
    })
}

/// Minimum of the quadratic form over the real unit sphere of `span_R{u_k, i·u_k}`.
fn restricted_minimum(hess: &DMatrix<f64>, basis: &[Vec<C64>]) -> (f64, Vec<C64>) {
    let i = C64::new(0.0, 1.0);
    let real_basis: Vec<Vec<C64>> = basis
        .iter()
        .flat_map(|u| [u.clone(), cvec::scale(u, i)])
        .collect();
    let k = real_basis.len();
    let cols: Vec<DVector<f64>> = real_basis
        .iter()
        .map(|u| DVector::from_vec(cvec::to_real(u)))
        .collect();
    let mut q = DMatrix::zeros(k, k);
    for a in 0..k {
        let ha = hess * &cols[a];
        for b in 0..k {
            q[(b, a)] = cols[b].dot(&ha);
        }
    }
    let q = (&q + q.transpose()) * 0.5;
    let eig = SymmetricEigen::new(q);
    let (idx, &min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty tangent space");
    let coeffs = eig.eigenvectors.column(idx);
    let n = basis[0].len();
    let mut u = vec![C64::new(0.0, 0.0); n];
    for (c, v) in coeffs.iter().zip(&real_basis) {
        for (a, b) in u.iter_mut().zip(v) {
            *a += *c * b;
        }
    }
    let len = cvec::norm(&u);
    let u = cvec::scale(&u, C64::new(1.0 / len, 0.0));
    (min, u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSample {
    pub z_index: usize,
    pub w: Vec<C64>,
    pub kappa: f64,
}

/// Sampled strict-hypoconvexity margin of a scenario's level set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypoconvexityReport {
    pub grid_size: usize,
    pub fiber_samples: usize,
    pub samples: Vec<KappaSample>,
    pub kappa_min: f64,
    pub witness_z: C64,
    pub witness_w: Vec<C64>,
    pub witness_u: Vec<C64>,
    pub strictly_hypoconvex: bool,
}

/// Minimum tangent-Hessian value over level-set points on each fiber.
///
/// Level-set points come from bisection along `fiber_samples` deterministic
/// rays out of the fiber anchor (coordinate axes first). The minimum over unit
/// tangent directions at each point is computed exactly from the restricted
/// quadratic form.
pub fn hypoconvexity_margin(
    scenario: &FiberScenario,
    grid: &CircleGrid,
    fiber_samples: usize,
) -> Result<HypoconvexityReport> {
    use rayon::prelude::*;
    let dirs = cvec::sphere_directions(scenario.n(), fiber_samples.max(1));
    let per_z: Vec<Result<Vec<(KappaSample, Vec<C64>)>>> = grid
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(k, &z)| {
            dirs.iter()
                .enumerate()
                .map(|(d, dir)| {
                    let w = scenario.level_point_indexed(z, dir, d)?;
                    let frame = complex_tangent_basis(scenario, z, &w)?;
                    Ok((
                        KappaSample {
                            z_index: k,
                            w,
                            kappa: frame.margin,
                        },
                        frame.witness,
                    ))
                })
                .collect()
        })
        .collect();

    let mut samples = Vec::with_capacity(grid.len() * dirs.len());
    let mut best: Option<(f64, usize, Vec<C64>)> = None;
    for row in per_z {
        for (s, u) in row? {
            // Sequential reduction in index order; ties keep the first.
            if best.as_ref().is_none_or(|b| s.kappa < b.0) {
                best = Some((s.kappa, samples.len(), u));
            }
            samples.push(s);
        }
    }
    let (kappa_min, idx, witness_u) = best.expect("at least one sample");
    let ws = &samples[idx];
    Ok(HypoconvexityReport {
        grid_size: grid.len(),
        fiber_samples: dirs.len(),
        kappa_min,
        witness_z: grid.node(ws.z_index),
        witness_w: ws.w.clone(),
        witness_u,
        strictly_hypoconvex: kappa_min > 0.0,
        samples,
    })
}

/// Inward unit normal `−conj(D)/|D|` of the level set through `w`.
fn inward_normal(scenario: &FiberScenario, z: C64, w: &[C64]) -> Result<Vec<C64>> {
    let g = scenario.gradient(z, w);
    let len = cvec::norm(&g);
    if !(len >= DEGENERATE_GRADIENT) {
        return Err(Error::DegenerateGradient { norm: len });
    }
    Ok(g.iter().map(|d| -d.conj() / len).collect())
}

/// `S(z) = I(z) + r·n(z)` where `I(z)` is the boundary point on the ray from the
/// anchor along `e₁` and `n` the inward unit normal there.
pub fn center_selector(scenario: &FiberScenario, grid: &CircleGrid, depth: f64) -> Result<Vec<Vec<C64>>> {
    if !(depth > 0.0) {
        return Err(Error::Config(format!("push depth must be positive, got {depth}")));
    }
    let e1 = cvec::unit(scenario.n(), 0);
    grid.nodes()
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            let boundary = scenario.level_point_indexed(z, &e1, 0)?;
            let normal = inward_normal(scenario, z, &boundary)?;
            let s = cvec::axpy(&boundary, C64::new(depth, 0.0), &normal);
            let value = scenario.value(z, &s);
            if !(value < scenario.level()) {
                return Err(Error::PushTooDeep {
                    depth,
                    index: k,
                    value,
                });
            }
            Ok(s)
        })
        .collect()
}

/// One evaluation of `½[rho(w+hv) + rho(w−hv)] ≥ rho(w) + C h²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidpointProbe {
    pub direction: Vec<C64>,
    /// Angle between the direction and the complex tangent space.
    pub angle: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidpointConvexityCheck {
    pub step: f64,
    pub angle_tolerance: f64,
    pub constant: f64,
    pub probes: Vec<MidpointProbe>,
}

impl MidpointConvexityCheck {
    pub fn all_pass(&self) -> bool {
        self.probes.iter().all(|p| p.pass)
    }
}

/// Largest `C` with `½[rho(w+hv) + rho(w−hv)] ≥ rho(w) + C h²` at one probe.
pub fn midpoint_constant(scenario: &FiberScenario, z: C64, w: &[C64], v: &[C64], h: f64) -> f64 {
    let hv = C64::new(h, 0.0);
    let avg = 0.5 * (scenario.value(z, &cvec::axpy(w, hv, v)) + scenario.value(z, &cvec::axpy(w, -hv, v)));
    (avg - scenario.value(z, w)) / (h * h)
}

/// Probes the midpoint inequality along directions within `theta` of the
/// complex tangent space at `w`.
pub fn midpoint_check(
    scenario: &FiberScenario,
    z: C64,
    w: &[C64],
    step: f64,
    theta: f64,
    constant: f64,
) -> Result<MidpointConvexityCheck> {
    let frame = complex_tangent_basis(scenario, z, w)?;
    let normal = inward_normal(scenario, z, w)?;
    let i = C64::new(0.0, 1.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut tangents = Vec::new();
    for u in &frame.basis {
        tangents.push(u.clone());
        tangents.push(cvec::scale(u, i));
        tangents.push(cvec::scale(u, C64::new(s, s)));
    }
    let mut probes = Vec::new();
    for t in &tangents {
        for frac in [0.0, 0.5, 1.0] {
            let angle = theta * frac;
            let v: Vec<C64> = t
                .iter()
                .zip(&normal)
                .map(|(a, b)| a * angle.cos() + b * angle.sin())
                .collect();
            let hv = C64::new(step, 0.0);
            let lhs = 0.5 * (scenario.value(z, &cvec::axpy(w, hv, &v)) + scenario.value(z, &cvec::axpy(w, -hv, &v)));
            let rhs = scenario.value(z, w) + constant * step * step;
            probes.push(MidpointProbe {
                direction: v,
                angle,
                lhs,
                rhs,
                pass: lhs >= rhs,
            });
        }
    }
    Ok(MidpointConvexityCheck {
        step,
        angle_tolerance: theta,
        constant,
        probes,
    })
}

/// Real gradient norm of `rho(z, ·)` at `w`.
pub(crate) fn gradient_norm(scenario: &FiberScenario, z: C64, w: &[C64]) -> f64 {
    real_gradient(&scenario.gradient(z, w)).iter().map(|x| x * x).sum::<f64>().sqrt()
}
