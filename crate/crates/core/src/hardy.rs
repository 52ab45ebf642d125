//! Discrete Hardy-space toolkit on equispaced samples of the unit circle.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Tolerance on `|z0| ≤ 1` for evaluation at boundary points.
const DISK_SLACK: f64 = 1e-12;

/// `M` equispaced nodes `z_k = exp(2πik/M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleGrid {
    m: usize,
    #[serde(skip)]
    nodes: Vec<C64>,
}

impl CircleGrid {
    /// `m` must be a power of two, at least 4.
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size must be a power of two >= 4, got {m}"
            )));
        }
        let nodes = (0..m)
            .map(|k| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / m as f64))
            .collect();
        Ok(Self { m, nodes })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> C64 {
        self.nodes[k]
    }

    /// Largest series degree whose products stay resolved on this grid (`M/4`).
    pub fn max_degree(&self) -> usize {
        self.m / 4
    }

    /// Same grid with twice as many nodes.
    pub fn doubled(&self) -> Self {
        Self::new(self.m * 2).expect("doubling a valid grid")
    }
}

/// Truncated power series `f(z) = Σ_{j≤N} c_j z^j` with `c_j ∈ Cⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticMap {
    /// `coeffs[j][i]` is the `z^j` coefficient of component `i`.
    coeffs: Vec<Vec<C64>>,
}

impl AnalyticMap {
    pub fn zero(n: usize, degree: usize) -> Self {
        Self {
            coeffs: vec![vec![C64::new(0.0, 0.0); n]; degree + 1],
        }
    }

    pub fn constant(c: &[C64]) -> Self {
        Self {
            coeffs: vec![c.to_vec()],
        }
    }

    /// Builds from `coeffs[j][i]`; all rows must share the same length `n ≥ 1`.
    pub fn from_coeffs(coeffs: Vec<Vec<C64>>) -> Result<Self> {
        let n = coeffs.first().map(Vec::len).unwrap_or(0);
        if n == 0 || coeffs.iter().any(|c| c.len() != n) {
            return Err(Error::Schema("analytic map needs a non-empty rectangular coefficient table".into()));
        }
        Ok(Self { coeffs })
    }

    /// Builds from per-component coefficient lists, zero-padding short components.
    pub fn from_components(components: &[Vec<C64>]) -> Result<Self> {
        let n = components.len();
        let len = components.iter().map(Vec::len).max().unwrap_or(0).max(1);
        if n == 0 {
            return Err(Error::Schema("analytic map needs at least one component".into()));
        }
        let mut coeffs = vec![vec![C64::new(0.0, 0.0); n]; len];
        for (i, comp) in components.iter().enumerate() {
            for (j, c) in comp.iter().enumerate() {
                coeffs[j][i] = *c;
            }
        }
        Ok(Self { coeffs })
    }

    pub fn n(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Vec<C64>] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> &[C64] {
        &self.coeffs[j]
    }

    pub fn components(&self) -> Vec<Vec<C64>> {
        (0..self.n())
            .map(|i| self.coeffs.iter().map(|c| c[i]).collect())
            .collect()
    }

    /// Zero-pads or truncates to the given degree.
    pub fn with_degree(&self, degree: usize) -> Self {
        let n = self.n();
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(degree + 1, vec![C64::new(0.0, 0.0); n]);
        Self { coeffs }
    }

    /// Horner evaluation without the disk check.
    pub fn eval_unchecked(&self, z: C64) -> Vec<C64> {
        let mut acc = vec![C64::new(0.0, 0.0); self.n()];
        for c in self.coeffs.iter().rev() {
            for (a, ci) in acc.iter_mut().zip(c) {
                *a = *a * z + ci;
            }
        }
        acc
    }

    /// Values at every grid node, as `M` rows of length `n`.
    pub fn sample(&self, grid: &CircleGrid) -> Vec<Vec<C64>> {
        grid.nodes().iter().map(|&z| self.eval_unchecked(z)).collect()
    }

    pub fn add(&self, other: &AnalyticMap) -> AnalyticMap {
        let deg = self.degree().max(other.degree());
        let a = self.with_degree(deg);
        let b = other.with_degree(deg);
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| crate::cvec::add(x, y))
            .collect();
        AnalyticMap { coeffs }
    }

    pub fn neg(&self) -> AnalyticMap {
        AnalyticMap {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.iter().map(|x| -x).collect())
                .collect(),
        }
    }

    /// Largest coefficient modulus.
    pub fn max_coeff_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flatten()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient difference after padding to a common degree.
    pub fn coeff_distance(&self, other: &AnalyticMap) -> f64 {
        let deg = self.degree().max(other.degree());
        let a = self.with_degree(deg);
        let b = other.with_degree(deg);
        a.coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(x, y)| crate::cvec::max_abs_diff(x, y))
            .fold(0.0, f64::max)
    }

    /// Max over grid nodes of the Euclidean norm of the difference.
    pub fn grid_distance(&self, other: &AnalyticMap, grid: &CircleGrid) -> f64 {
        grid.nodes()
            .iter()
            .map(|&z| {
                crate::cvec::norm(&crate::cvec::sub(
                    &self.eval_unchecked(z),
                    &other.eval_unchecked(z),
                ))
            })
            .fold(0.0, f64::max)
    }

    /// Max over grid nodes of `|f(z_k)|`.
    pub fn grid_norm(&self, grid: &CircleGrid) -> f64 {
        grid.nodes()
            .iter()
            .map(|&z| crate::cvec::norm(&self.eval_unchecked(z)))
            .fold(0.0, f64::max)
    }
}

/// Horner evaluation at `|z0| ≤ 1`.
pub fn evaluate(f: &AnalyticMap, z0: C64) -> Result<Vec<C64>> {
    let r = z0.norm();
    if r > 1.0 + DISK_SLACK {
        return Err(Error::OutsideDisk { modulus: r });
    }
    Ok(f.eval_unchecked(z0))
}

fn forward_fft(values: &mut [C64]) {
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(values.len()).process(values);
}

/// Non-negative-frequency part of grid samples, truncated at degree `M/2 − 1`.
///
/// `samples` holds `M` rows of length `n`.
pub fn project_analytic(samples: &[Vec<C64>]) -> Result<AnalyticMap> {
    let m = samples.len();
    if m < 4 || !m.is_power_of_two() {
        return Err(Error::Config(format!("{m} samples do not form a circle grid")));
    }
    let n = samples[0].len();
    if n == 0 || samples.iter().any(|s| s.len() != n) {
        return Err(Error::Config("ragged boundary samples".into()));
    }
    let half = m / 2;
    let mut coeffs = vec![vec![C64::new(0.0, 0.0); n]; half];
    let mut buf = vec![C64::new(0.0, 0.0); m];
    for i in 0..n {
        for (b, s) in buf.iter_mut().zip(samples) {
            *b = s[i];
        }
        forward_fft(&mut buf);
        for j in 0..half {
            coeffs[j][i] = buf[j] / m as f64;
        }
    }
    Ok(AnalyticMap { coeffs })
}

/// Discrete Poisson extension of real boundary samples to `|z0| < 1`.
///
/// Exact on trigonometric polynomials of degree below `M/2`.
pub fn harmonic_extension(samples: &[f64], z0: C64) -> Result<f64> {
    let m = samples.len();
    if m < 4 || !m.is_power_of_two() {
        return Err(Error::Config(format!("{m} samples do not form a circle grid")));
    }
    let r = z0.norm();
    if r >= 1.0 {
        return Err(Error::OutsideDisk { modulus: r });
    }
    let mut buf: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
    forward_fft(&mut buf);
    let half = m / 2;
    let mut acc = buf[0].re / m as f64;
    let mut zp = C64::new(1.0, 0.0);
    for c in buf.iter().take(half).skip(1) {
        zp *= z0;
        acc += 2.0 * (c / m as f64 * zp).re;
    }
    zp *= z0;
    acc += (buf[half] / m as f64 * zp).re;
    Ok(acc)
}

/// Projection onto maps with `conj(f(conj z)) = f(z)` (real coefficients).
pub fn conjugate_symmetrize(f: &AnalyticMap) -> AnalyticMap {
    AnalyticMap {
        coeffs: f
            .coeffs
            .iter()
            .map(|c| c.iter().map(|x| C64::new(x.re, 0.0)).collect())
            .collect(),
    }
}

/// Serialized form: one array of `[re, im]` pairs per component.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct AnalyticMapRepr {
    components: Vec<Vec<[f64; 2]>>,
}

impl Serialize for AnalyticMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AnalyticMapRepr {
            components: self
                .components()
                .into_iter()
                .map(|comp| comp.into_iter().map(|c| [c.re, c.im]).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AnalyticMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = AnalyticMapRepr::deserialize(d)?;
        let comps: Vec<Vec<C64>> = repr
            .components
            .into_iter()
            .map(|c| c.into_iter().map(|[re, im]| C64::new(re, im)).collect())
            .collect();
        AnalyticMap::from_components(&comps).map_err(serde::de::Error::custom)
    }
}

/// Parses an analytic map from its JSON form.
pub fn analytic_map_from_json(text: &str) -> Result<AnalyticMap> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn samples_of(grid: &CircleGrid, f: impl Fn(C64) -> Vec<C64>) -> Vec<Vec<C64>> {
        grid.nodes().iter().map(|&z| f(z)).collect()
    }

    #[test]
    fn grid_rejects_non_power_of_two() {
        assert!(CircleGrid::new(12).is_err());
        assert!(CircleGrid::new(2).is_err());
        let g = CircleGrid::new(8).unwrap();
        assert!((g.node(2) - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn projection_drops_negative_frequencies() {
        let grid = CircleGrid::new(64).unwrap();
        let f = project_analytic(&samples_of(&grid, |z| vec![z.conj()])).unwrap();
        assert!(f.max_coeff_abs() < 1e-15);

        let f = project_analytic(&samples_of(&grid, |z| vec![z * z + z.conj().powi(3)])).unwrap();
        for (j, cj) in f.coeffs().iter().enumerate() {
            let want = if j == 2 { 1.0 } else { 0.0 };
            assert!((cj[0] - c(want, 0.0)).norm() < 1e-14, "j = {j}");
        }

        let f = project_analytic(&samples_of(&grid, |_| vec![c(3.0, 4.0)])).unwrap();
        assert!((f.coeff(0)[0] - c(3.0, 4.0)).norm() < 1e-14);
        assert!(f.coeffs()[1..].iter().all(|x| x[0].norm() < 1e-14));
    }

    #[test]
    fn evaluate_examples() {
        let f = AnalyticMap::constant(&[c(1.0, 2.0), c(-1.0, 0.5)]);
        assert_eq!(evaluate(&f, c(0.3, -0.2)).unwrap(), vec![c(1.0, 2.0), c(-1.0, 0.5)]);

        let f = AnalyticMap::from_components(&[
            vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(3.0, 0.0)],
        ])
        .unwrap();
        let v = evaluate(&f, c(0.5, 0.0)).unwrap();
        assert!((v[0] - c(0.25, 0.0)).norm() < 1e-15);
        assert!((v[1] - c(1.5, 0.0)).norm() < 1e-15);

        assert!(matches!(evaluate(&f, c(1.1, 0.0)), Err(Error::OutsideDisk { .. })));
        assert!(evaluate(&f, c(1.0, 0.0)).is_ok());
    }

    #[test]
    fn top_degree_monomial_matches_grid_samples() {
        let grid = CircleGrid::new(128).unwrap();
        let deg = grid.len() / 2 - 1;
        let mut comps = vec![c(0.0, 0.0); deg + 1];
        comps[deg] = c(1.0, 0.0);
        let f = AnalyticMap::from_components(&[comps]).unwrap();
        for &z in grid.nodes() {
            assert!((evaluate(&f, z).unwrap()[0] - z.powu(deg as u32)).norm() < 1e-14);
        }
        let back = project_analytic(&f.sample(&grid)).unwrap();
        assert!(back.coeff_distance(&f) < 1e-12);
    }

    #[test]
    fn harmonic_extension_examples() {
        let grid = CircleGrid::new(64).unwrap();
        let z0 = c(0.3, 0.1);
        let re: Vec<f64> = grid.nodes().iter().map(|z| z.re).collect();
        assert!((harmonic_extension(&re, z0).unwrap() - z0.re).abs() < 1e-14);

        let ones = vec![1.0; 64];
        assert!((harmonic_extension(&ones, z0).unwrap() - 1.0).abs() < 1e-14);

        let alpha = c(2.0, -1.0);
        let s: Vec<f64> = grid.nodes().iter().map(|z| (alpha * z).re).collect();
        assert!((harmonic_extension(&s, z0).unwrap() - (alpha * z0).re).abs() < 1e-14);

        assert!(matches!(harmonic_extension(&s, c(1.0, 0.0)), Err(Error::OutsideDisk { .. })));
    }

    #[test]
    fn harmonic_extension_at_origin_is_the_mean() {
        let samples: Vec<f64> = (0..128).map(|k| ((k * 37 % 11) as f64).sin()).collect();
        let mean = samples.iter().sum::<f64>() / 128.0;
        assert!((harmonic_extension(&samples, c(0.0, 0.0)).unwrap() - mean).abs() < 1e-13);
    }

    #[test]
    fn conjugate_symmetrize_examples() {
        let real = AnalyticMap::from_components(&[vec![c(1.0, 0.0), c(-2.0, 0.0)]]).unwrap();
        assert_eq!(conjugate_symmetrize(&real), real);

        let iz = AnalyticMap::from_components(&[vec![c(0.0, 0.0), c(0.0, 1.0)]]).unwrap();
        assert!(conjugate_symmetrize(&iz).max_coeff_abs() == 0.0);

        let f = AnalyticMap::from_components(&[vec![c(1.0, 1.0), c(2.0, -3.0)]]).unwrap();
        let want = AnalyticMap::from_components(&[vec![c(1.0, 0.0), c(2.0, 0.0)]]).unwrap();
        assert_eq!(conjugate_symmetrize(&f), want);
    }

    #[test]
    fn json_round_trip() {
        let f = AnalyticMap::from_components(&[vec![c(1.0, 2.0)], vec![c(0.0, 0.0), c(-1.5, 0.25)]]).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(text, r#"{"components":[[[1.0,2.0],[0.0,0.0]],[[0.0,0.0],[-1.5,0.25]]]}"#);
        assert_eq!(analytic_map_from_json(&text).unwrap(), f);
        assert!(analytic_map_from_json(r#"{"components":[]}"#).is_err());
    }

    fn arb_map(n: usize, max_deg: usize) -> impl Strategy<Value = AnalyticMap> {
        prop::collection::vec(
            prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n),
            1..=max_deg + 1,
        )
        .prop_map(|rows| {
            AnalyticMap::from_coeffs(
                rows.into_iter()
                    .map(|r| r.into_iter().map(|(a, b)| C64::new(a, b)).collect())
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn sample_then_project_recovers_coefficients(f in arb_map(2, 31)) {
            let grid = CircleGrid::new(64).unwrap();
            let back = project_analytic(&f.sample(&grid)).unwrap();
            prop_assert!(back.coeff_distance(&f) < 1e-12);
            // idempotence
            let again = project_analytic(&back.sample(&grid)).unwrap();
            prop_assert!(again.coeff_distance(&back) < 1e-13);
        }

        #[test]
        fn symmetrized_maps_are_real_on_the_real_axis(f in arb_map(2, 8), re in -0.9f64..0.9, im in -0.4f64..0.4) {
            let g = conjugate_symmetrize(&f);
            prop_assert_eq!(conjugate_symmetrize(&g).clone(), g.clone());
            let z = C64::new(re, im);
            let lhs: Vec<C64> = g.eval_unchecked(z.conj()).iter().map(|v| v.conj()).collect();
            let rhs = g.eval_unchecked(z);
            prop_assert!(crate::cvec::max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }
}
