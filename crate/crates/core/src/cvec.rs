//! Small helpers for points of `Cⁿ` stored as slices.

use crate::C64;

/// Hermitian inner product `Σ conj(a_j) b_j`.
pub fn hdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Bilinear pairing `Σ a_j b_j` (no conjugation).
pub fn pair(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[C64], s: C64) -> Vec<C64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + t·b`.
pub fn axpy(a: &[C64], t: C64, b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

pub fn conj(a: &[C64]) -> Vec<C64> {
    a.iter().map(|x| x.conj()).collect()
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Interleaved real coordinates `(Re w₁, Im w₁, Re w₂, …)`.
pub fn to_real(a: &[C64]) -> Vec<f64> {
    a.iter().flat_map(|x| [x.re, x.im]).collect()
}

pub fn from_real(x: &[f64]) -> Vec<C64> {
    x.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()
}

pub fn unit(n: usize, j: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[j] = C64::new(1.0, 0.0);
    v
}

/// Deterministic spread of unit vectors on the sphere of `Cⁿ`.
///
/// The first `2n` entries are the coordinate directions `e_j` and `i·e_j`,
/// followed by pairwise diagonals, then points from an additive recurrence
/// in `[-1, 1]^{2n}` pushed to the sphere.
pub fn sphere_directions(n: usize, count: usize) -> Vec<Vec<C64>> {
    let i = C64::new(0.0, 1.0);
    let mut out = Vec::with_capacity(count);
    for j in 0..n {
        out.push(unit(n, j));
        out.push(scale(&unit(n, j), i));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..n {
        for k in (j + 1)..n {
            for phase in [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), i, -i] {
                let mut v = vec![C64::new(0.0, 0.0); n];
                v[j] = C64::new(s, 0.0);
                v[k] = phase * s;
                out.push(v);
            }
        }
    }
    out.truncate(count);
    // Additive recurrence with the generalized golden ratio for dimension 2n.
    let d = 2 * n;
    let mut phi = 2.0_f64;
    for _ in 0..32 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    let alpha: Vec<f64> = (1..=d).map(|k| (1.0 / phi.powi(k as i32)).fract()).collect();
    let mut idx = 1u64;
    while out.len() < count {
        let x: Vec<f64> = alpha
            .iter()
            .map(|a| 2.0 * (0.5 + a * idx as f64).fract() - 1.0)
            .collect();
        idx += 1;
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(0.2..=1.0).contains(&r) {
            continue;
        }
        out.push(from_real(&x.iter().map(|v| v / r).collect::<Vec<_>>()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_directions_are_unit_and_deterministic() {
        let a = sphere_directions(3, 200);
        let b = sphere_directions(3, 200);
        assert_eq!(a.len(), 200);
        for (u, v) in a.iter().zip(&b) {
            assert!((norm(u) - 1.0).abs() < 1e-14);
            assert_eq!(u, v);
        }
    }

    #[test]
    fn real_embedding_round_trips() {
        let w = vec![C64::new(1.0, -2.0), C64::new(0.5, 3.0)];
        assert_eq!(from_real(&to_real(&w)), w);
    }
}
