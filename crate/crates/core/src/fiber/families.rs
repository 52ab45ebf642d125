//! Builtin defining functions with closed-form derivatives.

use nalgebra::DMatrix;

use super::DefiningFunction;
use crate::{AnalyticMap, C64};

/// `rho(z, w) = (s(z) · Σ_j q_j |w_j − c_j(z)|²)^{p/2}` with `p ∈ {1, 2}`.
///
/// The center is `c(z) = a(z) + σ·z̄·e₁` for a polynomial map `a`, and the
/// scale is `s(z) = exp(−2 Re(αz))`. Balls, ellipsoids, the shifted-conjugate
/// family and circled fibers are all special cases.
#[derive(Debug, Clone)]
pub struct WeightedDistance {
    weights: Vec<f64>,
    exponent: u8,
    center: AnalyticMap,
    conj_shift: f64,
    log_radius: C64,
}

impl WeightedDistance {
    pub fn new(n: usize, weights: Vec<f64>, exponent: u8) -> Self {
        assert_eq!(weights.len(), n);
        assert!(exponent == 1 || exponent == 2, "exponent must be 1 or 2");
        Self {
            weights,
            exponent,
            center: AnalyticMap::zero(n, 0),
            conj_shift: 0.0,
            log_radius: C64::new(0.0, 0.0),
        }
    }

    pub fn with_center(mut self, center: AnalyticMap) -> Self {
        assert_eq!(center.n(), self.weights.len());
        self.center = center;
        self
    }

    pub fn with_conjugate_shift(mut self, sigma: f64) -> Self {
        self.conj_shift = sigma;
        self
    }

    pub fn with_log_radius(mut self, alpha: C64) -> Self {
        self.log_radius = alpha;
        self
    }

    fn center_at(&self, z: C64) -> Vec<C64> {
        let mut c = self.center.eval_unchecked(z);
        c[0] += self.conj_shift * z.conj();
        c
    }

    fn scale(&self, z: C64) -> f64 {
        (-2.0 * (self.log_radius * z).re).exp()
    }

    fn quadratic(&self, z: C64, w: &[C64]) -> (f64, f64, Vec<C64>) {
        let s = self.scale(z);
        let d: Vec<C64> = w.iter().zip(self.center_at(z)).map(|(a, b)| a - b).collect();
        let q = s * d.iter().zip(&self.weights).map(|(x, q)| q * x.norm_sqr()).sum::<f64>();
        (q, s, d)
    }
}

impl DefiningFunction for WeightedDistance {
    fn n(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, z: C64, w: &[C64]) -> f64 {
        let (q, _, _) = self.quadratic(z, w);
        if self.exponent == 2 {
            q
        } else {
            q.sqrt()
        }
    }

    fn gradient(&self, z: C64, w: &[C64]) -> Vec<C64> {
        let (q, s, d) = self.quadratic(z, w);
        let factor = if self.exponent == 2 {
            1.0
        } else if q > 0.0 {
            0.5 / q.sqrt()
        } else {
            0.0
        };
        d.iter()
            .zip(&self.weights)
            .map(|(x, wt)| x.conj() * (factor * s * wt))
            .collect()
    }

    fn hessian(&self, z: C64, w: &[C64]) -> DMatrix<f64> {
        let (q, s, d) = self.quadratic(z, w);
        let dim = 2 * d.len();
        let mut hq = DMatrix::zeros(dim, dim);
        let mut gq = vec![0.0; dim];
        for (j, (x, wt)) in d.iter().zip(&self.weights).enumerate() {
            hq[(2 * j, 2 * j)] = 2.0 * s * wt;
            hq[(2 * j + 1, 2 * j + 1)] = 2.0 * s * wt;
            gq[2 * j] = 2.0 * s * wt * x.re;
            gq[2 * j + 1] = 2.0 * s * wt * x.im;
        }
        if self.exponent == 2 {
            return hq;
        }
        let q = q.max(f64::MIN_POSITIVE);
        let r = q.sqrt();
        let mut h = hq / (2.0 * r);
        for a in 0..dim {
            for b in 0..dim {
                h[(a, b)] -= gq[a] * gq[b] / (4.0 * q * r);
            }
        }
        h
    }

    fn anchor(&self, z: C64) -> Vec<C64> {
        self.center_at(z)
    }

    fn interior_center(&self, z0: C64) -> Option<Vec<C64>> {
        (self.conj_shift == 0.0).then(|| self.center.eval_unchecked(z0))
    }
}

/// `coef · Π_j |w_j − a_j(z)|^{2 e_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialTerm {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Real polynomial in the squared moduli `|w_j − a_j(z)|²`.
///
/// Example: `|w₁|² − |w₂|² + |w|⁴` is five monomials with powers
/// `(1,0), (0,1), (2,0), (1,1)×2, (0,2)`.
#[derive(Debug, Clone)]
pub struct ModulusPolynomial {
    terms: Vec<MonomialTerm>,
    center: AnalyticMap,
}

impl ModulusPolynomial {
    pub fn new(n: usize, terms: Vec<MonomialTerm>) -> Self {
        assert!(terms.iter().all(|t| t.powers.len() == n));
        Self {
            terms,
            center: AnalyticMap::zero(n, 0),
        }
    }

    pub fn with_center(mut self, center: AnalyticMap) -> Self {
        self.center = center;
        self
    }

    fn moduli(&self, z: C64, w: &[C64]) -> (Vec<C64>, Vec<f64>) {
        let d: Vec<C64> = w.iter().zip(self.center.eval_unchecked(z)).map(|(a, b)| a - b).collect();
        let s = d.iter().map(|x| x.norm_sqr()).collect();
        (d, s)
    }

    /// `Π_l s_l^{e_l}` with the listed exponents lowered.
    fn monomial(s: &[f64], powers: &[u32], lower: &[usize]) -> f64 {
        let mut e: Vec<i64> = powers.iter().map(|&p| p as i64).collect();
        for &j in lower {
            e[j] -= 1;
        }
        s.iter().zip(&e).map(|(v, &k)| if k == 0 { 1.0 } else { v.powi(k as i32) }).product()
    }

    /// First partials in the `s_j`.
    fn ds(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; s.len()];
        for t in &self.terms {
            for (j, &e) in t.powers.iter().enumerate() {
                if e > 0 {
                    out[j] += t.coef * e as f64 * Self::monomial(s, &t.powers, &[j]);
                }
            }
        }
        out
    }
}

impl DefiningFunction for ModulusPolynomial {
    fn n(&self) -> usize {
        self.center.n()
    }

    fn value(&self, z: C64, w: &[C64]) -> f64 {
        let (_, s) = self.moduli(z, w);
        self.terms.iter().map(|t| t.coef * Self::monomial(&s, &t.powers, &[])).sum()
    }

    fn gradient(&self, z: C64, w: &[C64]) -> Vec<C64> {
        let (d, s) = self.moduli(z, w);
        self.ds(&s).iter().zip(&d).map(|(p, x)| x.conj() * *p).collect()
    }

    fn hessian(&self, z: C64, w: &[C64]) -> DMatrix<f64> {
        let (d, s) = self.moduli(z, w);
        let n = d.len();
        let first = self.ds(&s);
        let mut second = DMatrix::<f64>::zeros(n, n);
        for t in &self.terms {
            for j in 0..n {
                for l in 0..n {
                    let (ej, el) = (t.powers[j] as f64, t.powers[l] as f64);
                    let factor = if j == l { ej * (ej - 1.0) } else { ej * el };
                    if factor != 0.0 {
                        second[(j, l)] += t.coef * factor * Self::monomial(&s, &t.powers, &[j, l]);
                    }
                }
            }
        }
        let r: Vec<f64> = crate::cvec::to_real(&d);
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for a in 0..2 * n {
            for b in 0..2 * n {
                h[(a, b)] = 4.0 * second[(a / 2, b / 2)] * r[a] * r[b];
            }
            h[(a, a)] += 2.0 * first[a / 2];
        }
        h
    }

    fn anchor(&self, z: C64) -> Vec<C64> {
        self.center.eval_unchecked(z)
    }

    fn interior_center(&self, z0: C64) -> Option<Vec<C64>> {
        Some(self.center.eval_unchecked(z0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvec;
    use rand::{Rng, SeedableRng};

    // Independent oracle: plain central differences on the real coordinates.
    fn oracle_real_grad(f: &dyn DefiningFunction, z: C64, w: &[C64]) -> Vec<f64> {
        let h = 1e-6;
        let x = cvec::to_real(w);
        (0..x.len())
            .map(|a| {
                let mut p = x.clone();
                let mut m = x.clone();
                p[a] += h;
                m[a] -= h;
                (f.value(z, &cvec::from_real(&p)) - f.value(z, &cvec::from_real(&m))) / (2.0 * h)
            })
            .collect()
    }

    fn oracle_hessian(f: &dyn DefiningFunction, z: C64, w: &[C64]) -> Vec<Vec<f64>> {
        let h = 1e-4;
        let x = cvec::to_real(w);
        let d = x.len();
        let v = |p: &[f64]| f.value(z, &cvec::from_real(p));
        let mut out = vec![vec![0.0; d]; d];
        for a in 0..d {
            for b in 0..d {
                let mut pp = x.clone();
                let mut pm = x.clone();
                let mut mp = x.clone();
                let mut mm = x.clone();
                pp[a] += h;
                pp[b] += h;
                pm[a] += h;
                pm[b] -= h;
                mp[a] -= h;
                mp[b] += h;
                mm[a] -= h;
                mm[b] -= h;
                out[a][b] = (v(&pp) - v(&pm) - v(&mp) + v(&mm)) / (4.0 * h * h);
            }
        }
        out
    }

    fn check_consistency(f: &dyn DefiningFunction, seed: u64) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = f.n();
        for _ in 0..100 {
            let z = C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
            let a = f.anchor(z);
            let w: Vec<C64> = a
                .iter()
                .map(|x| x + C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0) * 0.8 + 0.05)
                .collect();
            let g = super::super::real_gradient(&f.gradient(z, &w));
            let go = oracle_real_grad(f, z, &w);
            let gscale = go.iter().fold(1e-3_f64, |m, v| m.max(v.abs()));
            for (x, y) in g.iter().zip(&go) {
                assert!((x - y).abs() <= 1e-5 * gscale, "gradient {x} vs {y}");
            }
            let hm = f.hessian(z, &w);
            let ho = oracle_hessian(f, z, &w);
            let hscale = ho.iter().flatten().fold(1e-3_f64, |m, v| m.max(v.abs()));
            for a in 0..2 * n {
                for b in 0..2 * n {
                    assert!(
                        (hm[(a, b)] - ho[a][b]).abs() <= 1e-5 * hscale,
                        "hessian ({a},{b}) {} vs {}",
                        hm[(a, b)],
                        ho[a][b]
                    );
                }
            }
        }
    }

    fn poly(components: &[&[(f64, f64)]]) -> AnalyticMap {
        AnalyticMap::from_components(
            &components
                .iter()
                .map(|c| c.iter().map(|&(a, b)| C64::new(a, b)).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn ball_and_ellipsoid_derivatives_match_finite_differences() {
        let center = poly(&[&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)], &[(0.2, -0.1)]]);
        check_consistency(&WeightedDistance::new(2, vec![1.0, 1.0], 2).with_center(center.clone()), 1);
        check_consistency(&WeightedDistance::new(2, vec![0.25, 1.0], 2), 2);
        check_consistency(&WeightedDistance::new(3, vec![0.25, 1.0, 4.0], 1).with_center(poly(&[&[(0.1, 0.0)], &[], &[(0.0, 1.0)]])), 3);
    }

    #[test]
    fn shifted_and_circled_derivatives_match_finite_differences() {
        check_consistency(&WeightedDistance::new(2, vec![1.0, 1.0], 1).with_conjugate_shift(1.0), 4);
        check_consistency(&WeightedDistance::new(2, vec![1.0, 1.0], 2).with_conjugate_shift(1.0), 5);
        check_consistency(&WeightedDistance::new(2, vec![1.0, 1.0], 2).with_log_radius(C64::new(0.7, 0.0)), 6);
    }

    #[test]
    fn modulus_polynomial_derivatives_match_finite_differences() {
        let terms = vec![
            MonomialTerm { coef: 1.0, powers: vec![1, 0] },
            MonomialTerm { coef: -1.0, powers: vec![0, 1] },
            MonomialTerm { coef: 1.0, powers: vec![2, 0] },
            MonomialTerm { coef: 2.0, powers: vec![1, 1] },
            MonomialTerm { coef: 1.0, powers: vec![0, 2] },
        ];
        let f = ModulusPolynomial::new(2, terms);
        check_consistency(&f, 7);
        // |w₁|² − |w₂|² + |w|⁴ at a generic point.
        let w = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5)];
        let (a, b) = (w[0].norm_sqr(), w[1].norm_sqr());
        let z = C64::new(1.0, 0.0);
        assert!((f.value(z, &w) - (a - b + (a + b).powi(2))).abs() < 1e-15);
    }

    #[test]
    fn exponent_one_gradient_is_zero_at_the_center() {
        let f = WeightedDistance::new(2, vec![1.0, 1.0], 1).with_conjugate_shift(1.0);
        let z = C64::from_polar(1.0, 0.3);
        let g = f.gradient(z, &[z.conj(), C64::new(0.0, 0.0)]);
        assert!(cvec::norm(&g) == 0.0);
    }
}
