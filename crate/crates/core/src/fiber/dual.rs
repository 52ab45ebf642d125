//! Dual-complement transform `w ↦ ∂rho/∂w / Σ w_j ∂rho/∂w_j`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FiberScenario;
use crate::cvec;
use crate::error::{Error, Result};
use crate::C64;

/// Level-set points of the fiber over `z` along `count` deterministic rays.
pub fn fiber_boundary_samples(scenario: &FiberScenario, z: C64, count: usize) -> Result<Vec<Vec<C64>>> {
    cvec::sphere_directions(scenario.n(), count)
        .iter()
        .enumerate()
        .map(|(d, dir)| scenario.level_point_indexed(z, dir, d))
        .collect()
}

/// Maps boundary samples of the fiber over `z` to boundary samples of its dual.
///
/// With `center = Some(p)` the fiber is first translated so that `p` sits at
/// the origin; the image lives in the translated coordinates.
pub fn dual_transform(
    scenario: &FiberScenario,
    z: C64,
    samples: &[Vec<C64>],
    center: Option<&[C64]>,
) -> Result<Vec<Vec<C64>>> {
    samples
        .iter()
        .enumerate()
        .map(|(index, w)| {
            let x = match center {
                Some(p) => cvec::sub(w, p),
                None => w.clone(),
            };
            let grad = scenario.gradient(z, w);
            let denom = cvec::pair(&x, &grad);
            let scale = cvec::norm(&x) * cvec::norm(&grad);
            if !(denom.norm() > 1e-12 * scale) || scale == 0.0 {
                return Err(Error::VanishingDenominator { index });
            }
            Ok(grad.iter().map(|d| d / denom).collect())
        })
        .collect()
}

/// Least-squares fit of `Σ b_j |w_j|² = 1` to a point cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadricFit {
    pub coefficients: Vec<f64>,
    /// Largest `|Σ b_j |w_j|² − 1|` over the samples.
    pub max_residual: f64,
}

pub fn diagonal_quadric_fit(samples: &[Vec<C64>]) -> Result<QuadricFit> {
    let n = samples.first().map(Vec::len).unwrap_or(0);
    if samples.len() < n || n == 0 {
        return Err(Error::Config("not enough samples for a quadric fit".into()));
    }
    let a = DMatrix::from_fn(samples.len(), n, |i, j| samples[i][j].norm_sqr());
    let rhs = DVector::from_element(samples.len(), 1.0);
    let svd = a.clone().svd(true, true);
    let b = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Config(format!("quadric fit failed: {e}")))?;
    let resid = &a * &b - rhs;
    Ok(QuadricFit {
        coefficients: b.iter().copied().collect(),
        max_residual: resid.amax(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn spheres_map_to_reciprocal_spheres() {
        let z = c(1.0, 0.0);
        for r in [0.5, 1.0, 2.0] {
            let s = FiberScenario::unit_ball(2).with_level(r * r);
            let pts = fiber_boundary_samples(&s, z, 64).unwrap();
            let img = dual_transform(&s, z, &pts, None).unwrap();
            for (w, v) in pts.iter().zip(&img) {
                assert!((cvec::norm(v) - 1.0 / r).abs() < 1e-8);
                // w ↦ conj(w)/|w|²
                let want = cvec::scale(&cvec::conj(w), c(1.0 / cvec::norm_sqr(w), 0.0));
                assert!(cvec::max_abs_diff(v, &want) < 1e-12);
            }
        }
    }

    #[test]
    fn ellipsoid_dual_has_reciprocal_axes_and_is_an_involution() {
        let z = c(1.0, 0.0);
        let s = FiberScenario::ellipsoid(&[2.0, 1.0], None, 2, 1.0);
        let pts = fiber_boundary_samples(&s, z, 128).unwrap();
        let img = dual_transform(&s, z, &pts, None).unwrap();
        let fit = diagonal_quadric_fit(&img).unwrap();
        assert!((fit.coefficients[0] - 4.0).abs() < 1e-6);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-6);
        assert!(fit.max_residual < 1e-6);

        let dual = FiberScenario::ellipsoid(&[0.5, 1.0], None, 2, 1.0);
        let back = dual_transform(&dual, z, &img, None).unwrap();
        for (w, b) in pts.iter().zip(&back) {
            assert!(cvec::max_abs_diff(w, b) < 1e-6);
        }
    }

    #[test]
    fn translation_and_vanishing_denominator() {
        let z = c(1.0, 0.0);
        let center = crate::AnalyticMap::constant(&[c(3.0, 0.0), c(0.0, 0.0)]);
        let s = FiberScenario::ball(center, 1.0, 2, 1.0);
        let pts = fiber_boundary_samples(&s, z, 16).unwrap();
        let img = dual_transform(&s, z, &pts, Some(&[c(3.0, 0.0), c(0.0, 0.0)])).unwrap();
        assert!(img.iter().all(|v| (cvec::norm(v) - 1.0).abs() < 1e-8));

        // the origin-star condition fails when the sample is tangent to the ray
        let origin = FiberScenario::unit_ball(2);
        let err = dual_transform(&origin, z, &[vec![c(1.0, 0.0), c(0.0, 0.0)]], Some(&[c(1.0, 0.0), c(0.0, 0.0)]));
        assert!(matches!(err, Err(Error::VanishingDenominator { index: 0 })));
    }
}
