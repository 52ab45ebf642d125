//! Polynomial-hull queries through interpolation-constrained min-max problems.
//!
//! A point `(z₀, w₀)` with `|z₀| < 1` is tested by minimizing the grid max of
//! `rho(z, f(z))` over maps `f = w₀ + (z − z₀)·g`, so every candidate graph
//! passes through the query point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvec;
use crate::error::{Error, Result};
use crate::fiber::FiberScenario;
use crate::hardy::{evaluate, AnalyticMap, CircleGrid};
use crate::solver::{self, perturbation, AffineProblem, SolveConfig, SolveResult};
use crate::C64;

pub use crate::fiber::recenter_on_graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullConfig {
    pub solve: SolveConfig,
    /// Half-width of the boundary band around the level.
    pub tol: f64,
    /// Points whose value lies within this distance of the level are re-solved
    /// on the doubled grid.
    pub stability_band: f64,
}

impl Default for HullConfig {
    fn default() -> Self {
        Self {
            solve: SolveConfig {
                degree: 16,
                grid: 64,
                starts: 1,
                ..SolveConfig::default()
            },
            tol: 1e-3,
            stability_band: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullQuery {
    pub z0: C64,
    pub w0: Vec<C64>,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Outside,
    Boundary,
    Inside,
}

impl Verdict {
    pub fn classify(value: f64, level: f64, tol: f64) -> Self {
        if value < level - tol {
            Verdict::Inside
        } else if value > level + tol {
            Verdict::Outside
        } else {
            Verdict::Boundary
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Outside => "outside",
            Verdict::Boundary => "boundary",
            Verdict::Inside => "inside",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullVerdict {
    /// Smallest grid max of `rho(z, f(z))` found with `f(z₀) = w₀`.
    pub value: f64,
    pub verdict: Verdict,
    /// The map attaining `value`.
    pub certificate: AnalyticMap,
    /// Value on the doubled grid, when it was computed.
    pub doubled_value: Option<f64>,
    /// The doubled grid gives a different verdict.
    pub unstable: bool,
    /// Grid sup-distance between multistart certificates (more than one start only).
    pub dispersion: Option<f64>,
    pub converged: bool,
}

struct Constrained {
    certificate: AnalyticMap,
    value: f64,
    free: Vec<Vec<C64>>,
    dispersion: Option<f64>,
    converged: bool,
}

/// `w₀ + (z − z₀)·g` as a power series.
fn interpolating_map(z0: C64, w0: &[C64], g: &[Vec<C64>]) -> AnalyticMap {
    let n = w0.len();
    let mut coeffs = vec![vec![C64::new(0.0, 0.0); n]; g.len() + 1];
    coeffs[0] = w0.to_vec();
    for (j, gj) in g.iter().enumerate() {
        for i in 0..n {
            coeffs[j + 1][i] += gj[i];
            coeffs[j][i] -= z0 * gj[i];
        }
    }
    AnalyticMap::from_coeffs(coeffs).expect("rectangular")
}

fn solve_constrained(
    scenario: &FiberScenario,
    z0: C64,
    w0: &[C64],
    grid: &CircleGrid,
    config: &SolveConfig,
    warm: Option<&[Vec<C64>]>,
) -> Result<Constrained> {
    let n = scenario.n();
    let free = config.degree;
    let problem = AffineProblem::new(scenario, grid, w0, |z| z - z0, free, config);
    let start0: Vec<Vec<C64>> = match warm {
        Some(g) => g.to_vec(),
        None => vec![vec![C64::new(0.0, 0.0); n]; free],
    };
    let runs: Vec<_> = (0..config.starts)
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
        .collect::<Result<_>>()?;
    let best = (0..runs.len())
        .min_by(|&a, &b| runs[a].gamma.total_cmp(&runs[b].gamma).then(a.cmp(&b)))
        .expect("at least one start");
    let maps: Vec<AnalyticMap> = runs
        .iter()
        .map(|r| interpolating_map(z0, w0, &problem.coefficients(&r.x)))
        .collect();
    let dispersion = (runs.len() > 1).then(|| {
        let mut worst: f64 = 0.0;
        for a in 0..maps.len() {
            for b in (a + 1)..maps.len() {
                worst = worst.max(maps[a].grid_distance(&maps[b], grid));
            }
        }
        worst
    });
    let certificate = maps[best].clone();
    let value = solver::grid_extremes(scenario, &certificate, grid).0;
    Ok(Constrained {
        certificate,
        value,
        free: problem.coefficients(&runs[best].x),
        dispersion,
        converged: runs.iter().all(|r| r.converged),
    })
}

/// Decides whether `(z₀, w₀)` lies in the hull of `{rho ≤ level}`.
pub fn membership(query: &HullQuery, scenario: &FiberScenario, config: &HullConfig) -> Result<HullVerdict> {
    if !(query.z0.norm() < 1.0) {
        return Err(Error::OutsideDisk { modulus: query.z0.norm() });
    }
    if query.w0.len() != scenario.n() {
        return Err(Error::Config(format!(
            "query point has {} components, scenario has n = {}",
            query.w0.len(),
            scenario.n()
        )));
    }
    if query.w0.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
        return Err(Error::Config("query point is not finite".into()));
    }
    config.solve.validate()?;
    let grid = CircleGrid::new(config.solve.grid)?;
    let base = solve_constrained(scenario, query.z0, &query.w0, &grid, &config.solve, None)?;
    let verdict = Verdict::classify(base.value, query.level, config.tol);

    let mut doubled_value = None;
    let mut unstable = false;
    if (base.value - query.level).abs() <= config.stability_band.max(config.tol) {
        let fine = grid.doubled();
        let cfg = SolveConfig {
            grid: fine.len(),
            starts: 1,
            ..config.solve.clone()
        };
        let again = solve_constrained(scenario, query.z0, &query.w0, &fine, &cfg, Some(&base.free))?;
        unstable = Verdict::classify(again.value, query.level, config.tol) != verdict;
        doubled_value = Some(again.value);
    }

    Ok(HullVerdict {
        value: base.value,
        verdict,
        certificate: base.certificate,
        doubled_value,
        unstable,
        dispersion: base.dispersion,
        converged: base.converged,
    })
}

/// `|f(z₀) − w₀|` for a certificate.
pub fn interpolation_error(verdict: &HullVerdict, query: &HullQuery) -> Result<f64> {
    Ok(cvec::norm(&cvec::sub(&evaluate(&verdict.certificate, query.z0)?, &query.w0)))
}

/// A complex-line section `w = w_ref + ζ·direction`, `ζ` on a `res × res`
/// real grid over `[−extent, extent]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    /// Defaults to the fiber center at `z₀`, or the anchor when there is none.
    pub w_ref: Option<Vec<C64>>,
    pub direction: Vec<C64>,
    pub extent: f64,
    pub res: usize,
}

impl SliceSpec {
    /// The `w₁` coordinate line.
    pub fn coordinate_line(n: usize, extent: f64, res: usize) -> Self {
        Self {
            w_ref: None,
            direction: cvec::unit(n, 0),
            extent,
            res,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePoint {
    pub zeta: C64,
    pub value: f64,
    pub verdict: Verdict,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullSlice {
    pub z0: C64,
    pub level: f64,
    pub w_ref: Vec<C64>,
    pub direction: Vec<C64>,
    pub extent: f64,
    pub res: usize,
    /// Row-major, `ζ_im` outer.
    pub points: Vec<SlicePoint>,
    /// Level crossings of the value field along grid edges, in `ζ`.
    pub boundary: Vec<C64>,
    pub inside_count: usize,
    pub unstable_count: usize,
}

fn reference_point(scenario: &FiberScenario, z0: C64, given: Option<&Vec<C64>>) -> Vec<C64> {
    match given {
        Some(w) => w.clone(),
        None => scenario.interior_center(z0).unwrap_or_else(|| scenario.anchor(z0)),
    }
}

fn unit_direction(dir: &[C64], n: usize) -> Result<Vec<C64>> {
    let norm = cvec::norm(dir);
    if dir.len() != n || !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::BadDirection { norm });
    }
    Ok(cvec::scale(dir, C64::new(1.0 / norm, 0.0)))
}

/// Membership verdicts on a complex-line section of the fiber over `z₀`.
pub fn hull_slice(scenario: &FiberScenario, z0: C64, spec: &SliceSpec, config: &HullConfig) -> Result<HullSlice> {
    if spec.res < 2 || !(spec.extent > 0.0) {
        return Err(Error::Config("slice needs res >= 2 and a positive extent".into()));
    }
    let n = scenario.n();
    let dir = unit_direction(&spec.direction, n)?;
    let w_ref = reference_point(scenario, z0, spec.w_ref.as_ref());
    let level = scenario.level();
    let res = spec.res;
    let coord = |i: usize| -spec.extent + 2.0 * spec.extent * i as f64 / (res - 1) as f64;
    let points: Vec<SlicePoint> = (0..res * res)
        .into_par_iter()
        .map(|k| {
            let zeta = C64::new(coord(k % res), coord(k / res));
            let q = HullQuery {
                z0,
                w0: cvec::axpy(&w_ref, zeta, &dir),
                level,
            };
            membership(&q, scenario, config).map(|v| SlicePoint {
                zeta,
                value: v.value,
                verdict: v.verdict,
                unstable: v.unstable,
            })
        })
        .collect::<Result<_>>()?;

    let mut boundary = Vec::new();
    let mut crossing = |a: &SlicePoint, b: &SlicePoint| {
        let (fa, fb) = (a.value - level, b.value - level);
        if (fa < 0.0) != (fb < 0.0) {
            let t = fa / (fa - fb);
            boundary.push(a.zeta + (b.zeta - a.zeta) * t);
        }
    };
    for r in 0..res {
        for c in 0..res {
            let here = &points[r * res + c];
            if c + 1 < res {
                crossing(here, &points[r * res + c + 1]);
            }
            if r + 1 < res {
                crossing(here, &points[(r + 1) * res + c]);
            }
        }
    }
    Ok(HullSlice {
        z0,
        level,
        w_ref,
        direction: dir,
        extent: spec.extent,
        res,
        inside_count: points.iter().filter(|p| p.verdict == Verdict::Inside).count(),
        unstable_count: points.iter().filter(|p| p.unstable).count(),
        points,
        boundary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialScan {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub verdicts: Vec<Verdict>,
    pub unstable: Vec<bool>,
    /// First radius where the value climbs through the level, linearly interpolated.
    pub transition: Option<f64>,
}

/// Membership values at `points` equispaced radii in `[0, extent]` along
/// `w_ref + r·direction`.
pub fn radial_scan(
    scenario: &FiberScenario,
    z0: C64,
    w_ref: Option<&[C64]>,
    direction: &[C64],
    extent: f64,
    points: usize,
    config: &HullConfig,
) -> Result<RadialScan> {
    if points < 2 || !(extent > 0.0) {
        return Err(Error::Config("radial scan needs at least two points and a positive extent".into()));
    }
    let dir = unit_direction(direction, scenario.n())?;
    let w_ref = reference_point(scenario, z0, w_ref.map(|w| w.to_vec()).as_ref());
    let level = scenario.level();
    let radii: Vec<f64> = (0..points).map(|i| extent * i as f64 / (points - 1) as f64).collect();
    let verdicts: Vec<HullVerdict> = radii
        .par_iter()
        .map(|&r| {
            let q = HullQuery {
                z0,
                w0: cvec::axpy(&w_ref, C64::new(r, 0.0), &dir),
                level,
            };
            membership(&q, scenario, config)
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = verdicts.iter().map(|v| v.value).collect();
    let transition = (1..points).find(|&i| values[i - 1] < level && values[i] >= level).map(|i| {
        let t = (level - values[i - 1]) / (values[i] - values[i - 1]);
        radii[i - 1] + t * (radii[i] - radii[i - 1])
    });
    Ok(RadialScan {
        radii,
        values,
        verdicts: verdicts.iter().map(|v| v.verdict).collect(),
        unstable: verdicts.iter().map(|v| v.unstable).collect(),
        transition,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HullCase {
    Empty,
    SingleGraph,
    ManyGraphs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Evidence {
    /// The optimal value exceeds the level and no probe was inside.
    Empty {
        lower_bound: f64,
        probes: usize,
        inside_count: usize,
    },
    SingleGraph { graph: AnalyticMap, flatness: f64 },
    /// Membership certificates through distinct points over the same `z₀`.
    ManyGraphs {
        queries: Vec<HullQuery>,
        certificates: Vec<HullVerdict>,
        separation: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trichotomy {
    pub case: HullCase,
    pub level: f64,
    pub gamma_hat: f64,
    pub flatness: f64,
    pub evidence: Evidence,
}

/// Flatness above this (relative to `tol`) makes a near-level optimum inconclusive.
const FLATNESS_FACTOR: f64 = 10.0;

/// Probe points for the empty case: 8 disk points times 8 fiber offsets.
pub fn empty_case_probes(scenario: &FiberScenario, level: f64) -> Vec<HullQuery> {
    let n = scenario.n();
    let mut out = Vec::with_capacity(64);
    for a in 0..8 {
        let z0 = C64::from_polar(0.1 * a as f64, std::f64::consts::FRAC_PI_4 * a as f64);
        let center = scenario.interior_center(z0).unwrap_or_else(|| vec![C64::new(0.0, 0.0); n]);
        for b in 0..8 {
            let offset = C64::from_polar(0.25 * b as f64, std::f64::consts::FRAC_PI_4 * (b as f64 + 0.5));
            out.push(HullQuery {
                z0,
                w0: cvec::axpy(&center, offset, &cvec::unit(n, 0)),
                level,
            });
        }
    }
    out
}

/// Empty, single-graph or many-graphs, with the optimal value as the deciding statistic.
pub fn classify_trichotomy(
    scenario: &FiberScenario,
    level: f64,
    solve: &SolveConfig,
    hull: &HullConfig,
) -> Result<Trichotomy> {
    let res: SolveResult = solver::solve_gamma(scenario, solve)?;
    classify_from_solution(scenario, level, &res, hull)
}

/// As [`classify_trichotomy`], reusing an existing solve.
pub fn classify_from_solution(
    scenario: &FiberScenario,
    level: f64,
    res: &SolveResult,
    hull: &HullConfig,
) -> Result<Trichotomy> {
    let tol = hull.tol;
    let gamma = res.gamma_hat;
    let flatness = res.flatness_residual;
    if (gamma - level).abs() <= 2.0 * tol && flatness > FLATNESS_FACTOR * tol {
        return Err(Error::Inconclusive { flatness });
    }
    let scenario = scenario.with_level(level);
    let (case, evidence) = if gamma > level + tol {
        let probes = empty_case_probes(&scenario, level);
        let inside_count = probes
            .par_iter()
            .map(|q| membership(q, &scenario, &no_doubling(hull)).map(|v| (v.verdict == Verdict::Inside) as usize))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum();
        (
            HullCase::Empty,
            Evidence::Empty {
                lower_bound: gamma,
                probes: probes.len(),
                inside_count,
            },
        )
    } else if gamma >= level - tol {
        (
            HullCase::SingleGraph,
            Evidence::SingleGraph {
                graph: res.phi_hat.clone(),
                flatness,
            },
        )
    } else {
        (HullCase::ManyGraphs, many_graphs_evidence(&scenario, res, hull)?)
    };
    Ok(Trichotomy {
        case,
        level,
        gamma_hat: gamma,
        flatness,
        evidence,
    })
}

fn no_doubling(hull: &HullConfig) -> HullConfig {
    HullConfig {
        stability_band: 0.0,
        ..hull.clone()
    }
}

/// Two certificates over `z₀ = 0`: through the optimizer's value and through a
/// point displaced along `w₁`.
fn many_graphs_evidence(scenario: &FiberScenario, res: &SolveResult, hull: &HullConfig) -> Result<Evidence> {
    let n = scenario.n();
    let z0 = C64::new(0.0, 0.0);
    let level = scenario.level();
    let first = HullQuery {
        z0,
        w0: res.phi_hat.coeff(0).to_vec(),
        level,
    };
    let mut queries = vec![first.clone()];
    let mut certificates = vec![membership(&first, scenario, &no_doubling(hull))?];
    for s in [1.0, 0.5, 0.25, 0.125] {
        let q = HullQuery {
            z0,
            w0: cvec::axpy(&first.w0, C64::new(s, 0.0), &cvec::unit(n, 0)),
            level,
        };
        let v = membership(&q, scenario, &no_doubling(hull))?;
        if v.verdict == Verdict::Inside {
            queries.push(q);
            certificates.push(v);
            break;
        }
    }
    let grid = CircleGrid::new(hull.solve.grid)?;
    let separation = if certificates.len() == 2 {
        certificates[0].certificate.grid_distance(&certificates[1].certificate, &grid)
    } else {
        0.0
    };
    Ok(Evidence::ManyGraphs {
        queries,
        certificates,
        separation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: f64,
    pub gamma_hat: f64,
    pub values: Vec<f64>,
    pub verdicts: Vec<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFamily {
    pub probes: Vec<(C64, Vec<C64>)>,
    pub rows: Vec<LevelRow>,
    /// Every probe moves only toward `inside` as the level grows.
    pub monotone: bool,
}

/// Membership at fixed probes across a non-decreasing level schedule.
///
/// The min-max value does not depend on the level, so each probe is solved
/// once and compared with every level.
pub fn level_family_scan(
    scenario: &FiberScenario,
    schedule: &[f64],
    probes: &[(C64, Vec<C64>)],
    gamma_hat: f64,
    config: &HullConfig,
) -> Result<LevelFamily> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] < w[0]) || schedule.iter().any(|t| !t.is_finite()) {
        return Err(Error::Config("level schedule must be finite and non-decreasing".into()));
    }
    let quiet = no_doubling(config);
    let values: Vec<f64> = probes
        .par_iter()
        .map(|(z0, w0)| {
            let q = HullQuery {
                z0: *z0,
                w0: w0.clone(),
                level: schedule[0],
            };
            membership(&q, scenario, &quiet).map(|v| v.value)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<LevelRow> = schedule
        .iter()
        .map(|&t| LevelRow {
            level: t,
            gamma_hat,
            values: values.clone(),
            verdicts: values.iter().map(|&v| Verdict::classify(v, t, config.tol)).collect(),
        })
        .collect();
    let monotone = (0..probes.len()).all(|p| rows.windows(2).all(|w| w[0].verdicts[p] <= w[1].verdicts[p]));
    Ok(LevelFamily {
        probes: probes.to_vec(),
        rows,
        monotone,
    })
}
