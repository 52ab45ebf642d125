use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use hullscope::fiber::{
    diagonal_quadric_fit, dual_transform, fiber_boundary_samples, hypoconvexity_margin, recenter_on_graph,
};
use hullscope::hardy::{analytic_map_from_json, evaluate};
use hullscope::hull::{
    classify_trichotomy, hull_slice, level_family_scan, membership, Evidence, HullConfig, HullQuery, SliceSpec,
};
use hullscope::lempert::{extremal_disc, green_u1};
use hullscope::report::{content_hash, emit_report, num, record_json, Emit, Plot, RunRecord, Table};
use hullscope::scenario_file::{parse_complex_scalar, parse_complex_vector, parse_model_fiber, parse_scenario};
use hullscope::solver::{solve_gamma, grid_extremes};
use hullscope::{cvec, CircleGrid, Error, FiberScenario, SolveConfig, C64};

const EXIT_UNSTABLE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "hullscope", version, about = "Polynomial hulls and H-infinity min-max problems over the circle")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Circle grid size (power of two).
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Truncation degree of analytic maps.
    #[arg(long, global = true)]
    degree: Option<usize>,
    /// Number of optimizer starts.
    #[arg(long, global = true)]
    starts: Option<usize>,
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Verdict band for hull commands; coefficient step tolerance for `solve`.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output path (JSON, or CSV for `.csv`); JSON goes to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// SVG plot path.
    #[arg(long, global = true)]
    plot: Option<PathBuf>,
    /// Leave wall time out of the record so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal value and optimizer of the min-max problem.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Hull membership of one point over the open disk.
    Member {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "0")]
        z0: String,
        #[arg(long)]
        w0: String,
        /// Defaults to the scenario level.
        #[arg(long)]
        level: Option<f64>,
    },
    /// Membership verdicts on a complex-line section.
    Slice {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "0")]
        z0: String,
        /// `wK` for a coordinate line, or a JSON direction vector.
        #[arg(long, default_value = "w1")]
        section: String,
        /// Base point of the line; defaults to the fiber center.
        #[arg(long)]
        through: Option<String>,
        #[arg(long, default_value_t = 64)]
        res: usize,
        #[arg(long, default_value_t = 2.0)]
        extent: f64,
    },
    /// Empty, single-graph or many-graphs hull.
    Classify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        level: Option<f64>,
    },
    /// Membership at fixed probes across a level schedule.
    ScanLevels {
        #[arg(long)]
        scenario: PathBuf,
        /// JSON array of levels, non-decreasing.
        #[arg(long)]
        levels: String,
        /// `{"z0": .., "w0": [..]}`, repeatable.
        #[arg(long = "probe", required = true)]
        probes: Vec<String>,
    },
    /// Dual-complement transform of one fiber.
    Dual {
        #[arg(long)]
        scenario: PathBuf,
        /// Argument of the circle point, in radians.
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long)]
        center: Option<String>,
    },
    /// Sampled complex-tangent Hessian margin of the level set.
    CheckHypoconvex {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 32)]
        fiber_samples: usize,
    },
    /// Green-type function of a model fiber at a point.
    Green {
        #[arg(long)]
        fiber: String,
        #[arg(long)]
        probe: String,
    },
    /// Extremal disc of a model fiber.
    Disc {
        #[arg(long)]
        fiber: String,
        #[arg(long)]
        nu: String,
        /// Verify the left-inverse identity on 32 disc points.
        #[arg(long)]
        check: bool,
    },
    /// Min-max value and optional membership after moving the fibers along a graph.
    Recenter {
        #[arg(long)]
        scenario: PathBuf,
        /// AnalyticMap JSON file.
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        z0: Option<String>,
        #[arg(long)]
        w0: Option<String>,
    },
}

struct Output {
    record: RunRecord,
    csv: Option<Table>,
    plot: Option<Plot>,
    unstable: bool,
}

impl Output {
    fn new(outputs: Value) -> Self {
        Self {
            record: RunRecord {
                command: Vec::new(),
                config: Value::Null,
                input_hash: String::new(),
                outputs,
                wall_time_s: None,
                stability_flags: Vec::new(),
                notes: Vec::new(),
            },
            csv: None,
            plot: None,
            unstable: false,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn solve_config(g: &Global, degree: usize, grid: usize, starts: usize) -> SolveConfig {
    SolveConfig {
        degree: g.degree.unwrap_or(degree),
        grid: g.grid.unwrap_or(grid),
        starts: g.starts.unwrap_or(starts),
        seed: g.seed,
        ..SolveConfig::default()
    }
}

fn hull_config(g: &Global) -> HullConfig {
    let d = HullConfig::default();
    HullConfig {
        solve: solve_config(g, d.solve.degree, d.solve.grid, d.solve.starts),
        tol: g.tol.unwrap_or(d.tol),
        ..d
    }
}

fn read(path: &Path) -> hullscope::Result<(String, FiberScenario)> {
    let text = std::fs::read_to_string(path)?;
    let (_, s) = parse_scenario(&text)?;
    Ok((text, s))
}

fn pairs(v: &[C64]) -> Value {
    json!(v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>())
}

fn to_value<T: serde::Serialize>(t: &T) -> hullscope::Result<Value> {
    Ok(serde_json::to_value(t)?)
}

fn run(cli: &Cli) -> hullscope::Result<ExitCode> {
    let g = &cli.global;
    let start = Instant::now();
    let mut inputs: Vec<Vec<u8>> = std::env::args().skip(1).map(String::into_bytes).collect();
    let (config, mut out) = match &cli.command {
        Command::Solve { scenario } => {
            let (text, s) = read(scenario)?;
            inputs.push(text.into_bytes());
            let mut cfg = solve_config(g, 32, 256, 10);
            if let Some(t) = g.tol {
                cfg.tol = t;
            }
            let res = solve_gamma(&s, &cfg)?;
            let grid = CircleGrid::new(cfg.grid)?;
            let points: Vec<(f64, f64)> = grid
                .nodes()
                .iter()
                .map(|&z| (z.arg(), s.value(z, &res.phi_hat.eval_unchecked(z))))
                .collect();
            let mut out = Output::new(to_value(&res)?);
            if !res.converged {
                out.record.stability_flags.push("iteration cap reached on at least one start".into());
            }
            let mut table = Table::new(&["k", "arg_z", "rho"]);
            for (k, (a, r)) in points.iter().enumerate() {
                table.push(vec![k.to_string(), num(*a), num(*r)]);
            }
            out.csv = Some(table);
            out.plot = Some(Plot::Curve {
                title: format!("rho(z, phi(z)), gamma = {:.6}", res.gamma_hat),
                x_label: "arg z".into(),
                y_label: "rho".into(),
                points,
            });
            (to_value(&cfg)?, out)
        }
        Command::Member { scenario, z0, w0, level } => {
            let (text, s) = read(scenario)?;
            inputs.push(text.into_bytes());
            let cfg = hull_config(g);
            let q = HullQuery {
                z0: parse_complex_scalar(z0)?,
                w0: parse_complex_vector(w0)?,
                level: level.unwrap_or(s.level()),
            };
            let v = membership(&q, &s, &cfg)?;
            let mut out = Output::new(json!({"query": to_value(&q)?, "verdict": to_value(&v)?}));
            if v.unstable {
                out.record.stability_flags.push("verdict changes on the doubled grid".into());
                out.unstable = true;
            }
            (to_value(&cfg)?, out)
        }
        Command::Slice {
            scenario,
            z0,
            section,
            through,
            res,
            extent,
        } => {
            let (text, s) = read(scenario)?;
            inputs.push(text.into_bytes());
            let cfg = hull_config(g);
            let n = s.n();
            let direction = match section.strip_prefix('w').and_then(|k| k.parse::<usize>().ok()) {
                Some(k) if (1..=n).contains(&k) => cvec::unit(n, k - 1),
                Some(_) => return Err(Error::Config(format!("section `{section}` is out of range for n = {n}"))),
                None => parse_complex_vector(section)?,
            };
            let spec = SliceSpec {
                w_ref: through.as_deref().map(parse_complex_vector).transpose()?,
                direction,
                extent: *extent,
                res: *res,
            };
            let slice = hull_slice(&s, parse_complex_scalar(z0)?, &spec, &cfg)?;
            let mut table = Table::new(&["zeta_re", "zeta_im", "value", "verdict"]);
            for p in &slice.points {
                table.push(vec![num(p.zeta.re), num(p.zeta.im), num(p.value), p.verdict.as_str().into()]);
            }
            let mut out = Output::new(to_value(&slice)?);
            if slice.inside_count == 0 {
                out.record.notes.push(format!("zero inside verdicts on {} points", slice.points.len()));
            }
            if slice.unstable_count > 0 {
                out.record.stability_flags.push(format!("{} verdicts change on the doubled grid", slice.unstable_count));
                out.unstable = true;
            }
            out.plot = Some(Plot::Scatter {
                title: format!("hull slice at z0 = {}", slice.z0),
                x_label: "Re ζ".into(),
                y_label: "Im ζ".into(),
                points: slice.points.iter().map(|p| (p.zeta.re, p.zeta.im, p.verdict.as_str().to_string())).collect(),
                outline: slice.boundary.iter().map(|b| (b.re, b.im)).collect(),
            });
            out.csv = Some(table);
            (to_value(&cfg)?, out)
        }
        Command::Classify { scenario, level } => {
            let (text, s) = read(scenario)?;
            inputs.push(text.into_bytes());
            let hull = hull_config(g);
            let solve = solve_config(g, 32, 256, 10);
            let level = level.unwrap_or(s.level());
            let t = classify_trichotomy(&s, level, &solve, &hull)?;
            let mut out = Output::new(to_value(&t)?);
            if let Evidence::Empty { inside_count, probes, .. } = &t.evidence {
                out.record.notes.push(format!("{inside_count} inside verdicts on {probes} probes"));
            }
            (json!({"solve": to_value(&solve)?, "hull": to_value(&hull)?}), out)
        }
        Command::ScanLevels { scenario, levels, probes } => {
            let (text, s) = read(scenario)?;
            inputs.push(text.into_bytes());
            let cfg = hull_config(g);
            let schedule: Vec<f64> =
                serde_json::from_str(levels).map_err(|e| Error::Schema(format!("bad level list: {e}")))?;
            let probes = probes.iter().map(|p| parse_probe(p)).collect::<hullscope::Result<Vec<_>>>()?;
            let solve = solve_config(g, 16, 64, 1);
            let gamma = solve_gamma(&s, &solve)?.gamma_hat;
            let fam = level_family_scan(&s, &schedule, &probes, gamma, &cfg)?;
            let mut out = Output::new(to_value(&fam)?);
            if !fam.monotone {
                out.record.stability_flags.push("verdicts are not monotone in the level".into());
            }
            (to_value(&cfg)?, out)
        }
        Command::Dual {
            scenario,
            theta,
            samples,
            center,
        } => {
            let (text, s) = read(scenario)?;
            inputs.push(text.into_bytes());
            let z = C64::from_polar(1.0, *theta);
            let center = center.as_deref().map(parse_complex_vector).transpose()?;
            let pts = fiber_boundary_samples(&s, z, *samples)?;
            let img = dual_transform(&s, z, &pts, center.as_deref())?;
            let fit = diagonal_quadric_fit(&img)?;
            let mut table = Table::new(&["index", "w", "dual"]);
            for (k, (w, v)) in pts.iter().zip(&img).enumerate() {
                table.push(vec![k.to_string(), format_vec(w), format_vec(v)]);
            }
            let mut out = Output::new(json!({
                "z": [z.re, z.im],
                "samples": pts.iter().map(|w| pairs(w)).collect::<Vec<_>>(),
                "dual": img.iter().map(|w| pairs(w)).collect::<Vec<_>>(),
                "diagonal_quadric": to_value(&fit)?,
            }));
            out.csv = Some(table);
            (json!({"theta": theta, "samples": samples}), out)
        }
        Command::CheckHypoconvex { scenario, fiber_samples } => {
            let (text, s) = read(scenario)?;
            inputs.push(text.into_bytes());
            let grid = CircleGrid::new(g.grid.unwrap_or(64))?;
            let rep = hypoconvexity_margin(&s, &grid, *fiber_samples)?;
            let mut table = Table::new(&["z_index", "w", "kappa"]);
            for k in &rep.samples {
                table.push(vec![k.z_index.to_string(), format_vec(&k.w), num(k.kappa)]);
            }
            let mut out = Output::new(to_value(&rep)?);
            out.csv = Some(table);
            (json!({"grid": grid.len(), "fiber_samples": fiber_samples}), out)
        }
        Command::Green { fiber, probe } => {
            let f = parse_model_fiber(fiber)?;
            let w = parse_complex_vector(probe)?;
            if w.len() != f.n() {
                return Err(Error::Config("probe has the wrong dimension".into()));
            }
            let green = green_u1(&f);
            let out = Output::new(json!({
                "fiber": to_value(&f)?,
                "probe": pairs(&w),
                "u1": green.value(&w),
                "closed_form": green.closed_form(&w),
            }));
            (Value::Null, out)
        }
        Command::Disc { fiber, nu, check } => {
            let f = parse_model_fiber(fiber)?;
            let disc = extremal_disc(&f, &parse_complex_vector(nu)?)?;
            let lambdas: Vec<C64> = (0..32)
                .map(|k| C64::from_polar(0.95 * ((k as f64 + 0.5) / 32.0).sqrt(), 2.399963 * k as f64))
                .collect();
            let mut outputs = json!({
                "fiber": to_value(&f)?,
                "nu": pairs(&disc.nu),
                "center": pairs(&disc.disc(C64::new(0.0, 0.0))),
                "derivative_at_zero": pairs(&disc.derivative_at_zero()),
                "samples": lambdas.iter().map(|&l| json!({"lambda": [l.re, l.im], "w": pairs(&disc.disc(l))})).collect::<Vec<_>>(),
            });
            let mut failed = false;
            if *check {
                let err = lambdas.iter().map(|&l| (disc.left_inverse(&disc.disc(l)) - l).norm()).fold(0.0, f64::max);
                failed = !(err < 1e-12);
                outputs["left_inverse_error"] = json!(err);
                outputs["check_passed"] = json!(!failed);
            }
            let mut out = Output::new(outputs);
            if failed {
                out.record.stability_flags.push("left-inverse identity fails".into());
            }
            (json!({"check": check}), out)
        }
        Command::Recenter { scenario, map, z0, w0 } => {
            let (text, s) = read(scenario)?;
            let map_text = std::fs::read_to_string(map)?;
            inputs.push(text.into_bytes());
            inputs.push(map_text.clone().into_bytes());
            let f = analytic_map_from_json(&map_text)?;
            let moved = recenter_on_graph(&s, &f)?;
            let cfg = solve_config(g, 16, 64, 1);
            let before = solve_gamma(&s, &cfg)?;
            let after = solve_gamma(&moved, &cfg)?;
            let grid = CircleGrid::new(cfg.grid)?;
            let mut outputs = json!({
                "gamma_hat": before.gamma_hat,
                "recentered_gamma_hat": after.gamma_hat,
                "recentered_phi_hat": to_value(&after.phi_hat)?,
                "map_grid_max": grid_extremes(&s, &f, &grid).0,
            });
            let mut out_unstable = false;
            if let (Some(z0), Some(w0)) = (z0, w0) {
                let hull = hull_config(g);
                let z0 = parse_complex_scalar(z0)?;
                let w0 = parse_complex_vector(w0)?;
                let shifted = cvec::add(&w0, &evaluate(&f, z0)?);
                let new = membership(&HullQuery { z0, w0: w0.clone(), level: s.level() }, &moved, &hull)?;
                let old = membership(&HullQuery { z0, w0: shifted.clone(), level: s.level() }, &s, &hull)?;
                out_unstable = new.unstable || old.unstable;
                outputs["membership"] = json!({
                    "recentered": to_value(&new)?,
                    "original_point": pairs(&shifted),
                    "original": to_value(&old)?,
                });
            }
            let mut out = Output::new(outputs);
            out.unstable = out_unstable;
            (to_value(&cfg)?, out)
        }
    };

    out.record.command = std::env::args().skip(1).collect();
    out.record.config = config;
    out.record.input_hash = content_hash(&inputs.iter().map(Vec::as_slice).collect::<Vec<_>>());
    if !g.no_timing {
        out.record.wall_time_s = Some(start.elapsed().as_secs_f64());
    }

    let mut emit = Emit::default();
    match &g.out {
        Some(p) if p.extension().is_some_and(|e| e == "csv") => {
            emit.json = Some(p.with_extension("json"));
            if let Some(t) = out.csv.take() {
                emit.csv = Some((p.clone(), t));
            }
        }
        Some(p) => emit.json = Some(p.clone()),
        None => print!("{}", record_json(&out.record)?),
    }
    if let (Some(p), Some(plot)) = (&g.plot, out.plot.take()) {
        emit.svg = Some((p.clone(), plot));
    }
    for p in emit_report(&out.record, &emit)? {
        eprintln!("wrote {}", p.display());
    }
    if out.unstable {
        return Ok(ExitCode::from(EXIT_UNSTABLE));
    }
    if out.record.stability_flags.iter().any(|f| f.contains("left-inverse")) {
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_probe(text: &str) -> hullscope::Result<(C64, Vec<C64>)> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Schema(format!("bad probe `{text}`: {e}")))?;
    let z0 = v.get("z0").map(hullscope::scenario_file::parse_complex).transpose()?.unwrap_or_default();
    let w0 = v.get("w0").ok_or_else(|| Error::Schema("probe needs `w0`".into()))?;
    Ok((z0, parse_complex_vector(&w0.to_string())?))
}

fn format_vec(v: &[C64]) -> String {
    v.iter().map(|c| format!("{}{:+}i", num(c.re), c.im)).collect::<Vec<_>>().join(" ")
}
