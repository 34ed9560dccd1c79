//! Batch front-end for `junction-core`: one declarative problem file drives
//! every subcommand, so the solver and the oracle always see the same
//! problem.

mod error;
pub mod schema;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use junction_core::prelude::{
    brute_force_value, check_h0_h1, check_h2, check_h3, check_h3_tilde, controllability_radius, cost, delta_min_set,
    h_gamma, h_gamma_t, h_gamma_t_i, h_i, h_i_plus, h_zero, integrate, value_iteration, ControlLaw, Covector,
    JunctionPoint, JunctionProblem, MinimizerSet, OracleConfig, RadiusMode, SchemeConfig,
};
use junction_core::problem::H0H1Report;
use junction_core::problem::H2Report;
use junction_core::solver::{write_field_csv, write_plane_csv};
use junction_core::trajectories::write_trajectory_csv;
use serde::Serialize;

pub use error::{exit, exit_code, CliError, Kind};
pub use schema::ProblemFile;

#[derive(Debug, Parser)]
#[command(name = "junction", version, about = "Optimal control on junctions of half-planes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run value iteration and write the value field.
    Solve(SolveArgs),
    /// Report on the structural assumptions of a problem.
    Check(CheckArgs),
    /// Integrate a piecewise-constant control law.
    Rollout(RolloutArgs),
    /// Compare the solver against the brute-force oracle at given points.
    Compare(CompareArgs),
    /// Print the Hamiltonians at a point and covector.
    EvalHamiltonian(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub problem: PathBuf,
    /// Output directory for `values.csv`, `plane_<k>.csv` and `report.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `scheme.tol`.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Overrides `scheme.dt`.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub problem: PathBuf,
    /// Seed of the sampled checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    pub problem: PathBuf,
    /// Start point `plane,x0,xi` (plane 0 for Γ).
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub start: JunctionPoint,
    /// JSON law: `{"schedule": [{"duration": 1.0, "atom": "a#3"}, {"duration": 0.5, "mix": ["a#1", "a#5"]}]}`.
    #[arg(long)]
    pub law: PathBuf,
    /// Trajectory CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Integration step; defaults to `scheme.dt`.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub problem: PathBuf,
    /// Point `plane,x0,xi`; repeat for several points.
    #[arg(long = "point", required = true, value_parser = parse_point, allow_hyphen_values = true)]
    pub points: Vec<JunctionPoint>,
    /// Maximum number of enumerated laws per point.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u64,
    #[arg(long, default_value_t = 3)]
    pub segments: usize,
    #[arg(long, default_value_t = 1.0)]
    pub seg_duration: f64,
    /// Oracle integration step; defaults to `scheme.dt`.
    #[arg(long)]
    pub oracle_dt: Option<f64>,
    /// Added to the oracle bracket to account for the solver's own error.
    #[arg(long, default_value_t = 0.0)]
    pub slack: f64,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Comparison table as CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub problem: PathBuf,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub point: JunctionPoint,
    /// Covector `p0,pi`.
    #[arg(long, value_parser = parse_covector, allow_hyphen_values = true)]
    pub covector: Covector,
    /// Require the Γ quantities (H_i⁺, Δ, tangential Hamiltonians).
    #[arg(long)]
    pub gamma: bool,
    #[arg(long)]
    pub json: bool,
}

fn parse_numbers(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

pub fn parse_point(s: &str) -> std::result::Result<JunctionPoint, String> {
    let v = parse_numbers(s, 3)?;
    if v[0] < 0.0 || v[0].fract() != 0.0 {
        return Err(format!("plane must be a non-negative integer, got {}", v[0]));
    }
    let plane = v[0] as usize;
    if plane == 0 && v[2] != 0.0 {
        return Err("points of Γ (plane 0) must have xi = 0".into());
    }
    JunctionPoint::new(plane, v[1], v[2]).map_err(|e| e.to_string())
}

pub fn parse_covector(s: &str) -> std::result::Result<Covector, String> {
    let v = parse_numbers(s, 2)?;
    Ok(Covector::new(v[0], v[1]))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Check(a) => cmd_check(a),
        Command::Rollout(a) => cmd_rollout(a),
        Command::Compare(a) => cmd_compare(a),
        Command::EvalHamiltonian(a) => cmd_eval_hamiltonian(a),
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn scheme_with(file: &ProblemFile, tol: Option<f64>, dt: Option<f64>) -> Result<SchemeConfig> {
    let mut s = file.scheme();
    if let Some(t) = tol {
        if !(t > 0.0) {
            return Err(CliError::schema(format!("--tol must be > 0, got {t}")).into());
        }
        s.tol = t;
    }
    if let Some(d) = dt {
        if !(d > 0.0) {
            return Err(CliError::schema(format!("--dt must be > 0, got {d}")).into());
        }
        s.dt = d;
    }
    Ok(s)
}

#[derive(Debug, Serialize)]
pub struct AssumptionReport {
    pub h0_h1: H0H1Report,
    /// Hull gap of each plane's `(f, ℓ)` set at the Γ point in the middle of
    /// the domain.
    pub h2: Vec<H2Report>,
    /// Per plane, the smallest strong controllability radius over Γ samples.
    pub h3: Vec<f64>,
    /// Per plane, the smallest normal controllability constant over Γ samples.
    pub h3_tilde: Vec<f64>,
    pub radius_h3: f64,
    pub radius_h3_tilde: f64,
    pub warnings: Vec<String>,
}

pub fn assumption_report(file: &ProblemFile, problem: &JunctionProblem, samples: usize, seed: u64) -> Result<AssumptionReport> {
    let domain = file.domain();
    let h0_h1 = check_h0_h1(problem, &domain, samples, seed);
    let mid = JunctionPoint::gamma(0.5 * (domain.x0_min + domain.x0_max));
    let mut h2 = Vec::new();
    for k in problem.shape().planes() {
        h2.push(check_h2(problem, k, &mid, 20_000)?);
    }
    let n = problem.n_planes();
    let (mut h3, mut h3_tilde) = (vec![f64::INFINITY; n], vec![f64::INFINITY; n]);
    for j in 0..=20 {
        let x = JunctionPoint::gamma(domain.x0_min + (domain.x0_max - domain.x0_min) * j as f64 / 20.0);
        for (k, r) in check_h3(problem, &x)?.into_iter().enumerate() {
            h3[k] = h3[k].min(r);
        }
        for (k, r) in check_h3_tilde(problem, &x)?.into_iter().enumerate() {
            h3_tilde[k] = h3_tilde[k].min(r);
        }
    }
    let mut warnings = Vec::new();
    let d = problem.declared();
    if h0_h1.m_f_violated {
        warnings.push(format!("declared M_f = {} is below the sampled bound {}", d.m_f, h0_h1.m_f_est));
    }
    if h0_h1.m_ell_violated {
        warnings.push(format!("declared M_ell = {} is below the sampled bound {}", d.m_ell, h0_h1.m_ell_est));
    }
    if h0_h1.l_f_violated {
        warnings.push(format!("declared L_f = {} is below the sampled Lipschitz quotient {}", d.l_f, h0_h1.l_f_est));
    }
    for (k, r) in h2.iter().enumerate() {
        if r.max_hull_violation > 1e-9 {
            warnings.push(format!("plane {}: (f, l) set is not convex, hull gap {:.3e}", k + 1, r.max_hull_violation));
        }
    }
    for k in 0..n {
        if h3_tilde[k] <= 0.0 {
            warnings.push(format!("plane {}: normal controllability fails (delta = 0)", k + 1));
        } else if h3[k] <= 0.0 {
            warnings.push(format!("plane {}: only normal controllability holds", k + 1));
        }
    }
    Ok(AssumptionReport {
        h0_h1,
        h2,
        h3,
        h3_tilde,
        radius_h3: controllability_radius(problem, &domain, RadiusMode::H3, 50, 21),
        radius_h3_tilde: controllability_radius(problem, &domain, RadiusMode::H3Tilde, 50, 21),
        warnings,
    })
}

#[derive(Debug, Serialize)]
pub struct GridReport {
    pub n_planes: usize,
    pub n0: usize,
    pub ni: usize,
    pub x0: [f64; 2],
    pub xi_max: f64,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub tol: f64,
    pub dt: f64,
    pub contraction: f64,
    pub flagged: usize,
    pub grid: GridReport,
    pub problem_hash: String,
    pub timing_seconds: f64,
    pub assumption_reports: AssumptionReport,
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let file = ProblemFile::load(&a.problem)?;
    let problem = file.problem()?;
    let grid = file.grid()?;
    let scheme = scheme_with(&file, a.tol, a.dt)?;
    let assumptions = assumption_report(&file, &problem, 200, 0)?;
    let start = Instant::now();
    let field = value_iteration(&problem, &grid, &scheme)?;
    let timing_seconds = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    write_field_csv(&field, create(&a.out.join("values.csv"))?)?;
    for k in 1..=grid.n_planes {
        write_plane_csv(&field, k, create(&a.out.join(format!("plane_{k}.csv")))?)?;
    }
    let report = RunReport {
        converged: field.meta.converged,
        iterations: field.meta.iterations,
        residual: field.meta.residual,
        tol: scheme.tol,
        dt: scheme.dt,
        contraction: field.meta.contraction,
        flagged: field.flagged_count(),
        grid: GridReport {
            n_planes: grid.n_planes,
            n0: grid.n0,
            ni: grid.ni,
            x0: file.domain.x0,
            xi_max: file.domain.xi_max,
        },
        problem_hash: file.hash(),
        timing_seconds,
        assumption_reports: assumptions,
    };
    let mut w = create(&a.out.join("report.json"))?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    if a.json {
        print_json(&report)?;
    } else {
        println!(
            "converged in {} iterations (residual {:.3e}, {:.2} s); {} flagged nodes; wrote {}",
            report.iterations,
            report.residual,
            report.timing_seconds,
            report.flagged,
            a.out.display()
        );
        for w in &report.assumption_reports.warnings {
            println!("warning: {w}");
        }
    }
    Ok(())
}

fn cmd_check(a: &CheckArgs) -> Result<()> {
    let file = ProblemFile::load(&a.problem)?;
    let problem = file.problem()?;
    let r = assumption_report(&file, &problem, a.samples, a.seed)?;
    if a.json {
        return print_json(&r);
    }
    let d = problem.declared();
    let mark = |bad: bool| if bad { "VIOLATED" } else { "ok" };
    println!("[H0-H1] M_f   declared {:<10} sampled {:.6} {}", d.m_f, r.h0_h1.m_f_est, mark(r.h0_h1.m_f_violated));
    println!("[H0-H1] M_ell declared {:<10} sampled {:.6} {}", d.m_ell, r.h0_h1.m_ell_est, mark(r.h0_h1.m_ell_violated));
    println!("[H0-H1] L_f   declared {:<10} sampled {:.6} {}", d.l_f, r.h0_h1.l_f_est, mark(r.h0_h1.l_f_violated));
    for (k, h2) in r.h2.iter().enumerate() {
        println!("[H2]  plane {}: hull gap {:.3e} over {} pairs", k + 1, h2.max_hull_violation, h2.pairs_checked);
    }
    for k in 0..problem.n_planes() {
        println!("[H3]  plane {}: delta {:.6}   [H3~] delta {:.6}", k + 1, r.h3[k], r.h3_tilde[k]);
    }
    println!("controllability radius: H3 {:.4}, H3~ {:.4}", r.radius_h3, r.radius_h3_tilde);
    for w in &r.warnings {
        println!("warning: {w}");
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RolloutReport {
    feasible: bool,
    infeasible_at: Option<f64>,
    cost: Option<f64>,
    truncation_bound: Option<f64>,
    crossings: Vec<(f64, String)>,
    end: JunctionPoint,
}

fn cmd_rollout(a: &RolloutArgs) -> Result<()> {
    let file = ProblemFile::load(&a.problem)?;
    let problem = file.problem()?;
    let text = std::fs::read_to_string(&a.law).with_context(|| format!("cannot read {}", a.law.display()))?;
    let law: ControlLaw = serde_json::from_str(&text).map_err(|e| CliError::schema(format!("law file: {e}")))?;
    let dt = a.dt.unwrap_or(file.scheme.dt);
    let traj = integrate(&problem, &a.start, &law, dt)?;
    match &a.out {
        Some(p) => write_trajectory_csv(&problem, &traj, create(p)?)?,
        None => write_trajectory_csv(&problem, &traj, std::io::stdout().lock())?,
    }
    let cost = if traj.feasible { Some(cost(&problem, &traj)?) } else { None };
    let report = RolloutReport {
        feasible: traj.feasible,
        infeasible_at: traj.infeasible_at,
        cost: cost.map(|c| c.value),
        truncation_bound: cost.map(|c| c.truncation_bound),
        crossings: traj.crossings().into_iter().map(|(t, e)| (t, e.label())).collect(),
        end: traj.end().point,
    };
    if a.json {
        print_json(&report)?;
    } else {
        for (t, e) in &report.crossings {
            eprintln!("t = {t:.6}: {e}");
        }
        if let Some(c) = cost {
            eprintln!("cost {:.10} (+ at most {:.3e} beyond the horizon)", c.value, c.truncation_bound);
        }
    }
    if let Some(t) = traj.infeasible_at {
        return Err(CliError { kind: Kind::Infeasible, message: format!("law is infeasible at t = {t}") }.into());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompareRow {
    plane: usize,
    x0: f64,
    xi: f64,
    solver: f64,
    oracle: f64,
    bracket: f64,
    diff: f64,
    pass: bool,
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let file = ProblemFile::load(&a.problem)?;
    let problem = file.problem()?;
    let scheme = scheme_with(&file, a.tol, a.dt)?;
    let cfg = OracleConfig {
        budget: a.budget,
        ..OracleConfig::new(a.segments, a.seg_duration, a.oracle_dt.unwrap_or(scheme.dt))
    };
    let mut oracle = Vec::new();
    for x in &a.points {
        oracle.push(brute_force_value(&problem, x, &cfg)?);
    }
    let field = value_iteration(&problem, &file.grid()?, &scheme)?;
    let mut rows = Vec::new();
    for (x, o) in a.points.iter().zip(oracle) {
        let solver = field.interpolate(x)?;
        let diff = (solver - o.value).abs();
        let bracket = o.bracket + a.slack;
        rows.push(CompareRow { plane: x.plane, x0: x.x0, xi: x.xi, solver, oracle: o.value, bracket, diff, pass: diff <= bracket });
    }
    if a.json {
        print_json(&rows)?;
    } else {
        let out: Box<dyn Write> = match &a.out {
            Some(p) => Box::new(create(p)?),
            None => Box::new(std::io::stdout().lock()),
        };
        let mut w = csv::Writer::from_writer(out);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::other(format!("{failed} of {} points outside the bracket", rows.len())).into());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PlaneEval {
    plane: usize,
    h_i: f64,
    h_i_plus: Option<f64>,
    delta: Option<MinimizerSet>,
    h_gamma_t_i: Option<f64>,
    /// `|H_i(x, p + δ_min e_i) - H_Γ,iᵀ(x, p0)|`.
    identity_gap: Option<f64>,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    point: JunctionPoint,
    covector: Covector,
    planes: Vec<PlaneEval>,
    h_zero: Option<f64>,
    h_gamma: Option<f64>,
    h_gamma_t: Option<f64>,
}

fn cmd_eval_hamiltonian(a: &EvalArgs) -> Result<()> {
    let file = ProblemFile::load(&a.problem)?;
    let problem = file.problem()?;
    let (x, p) = (a.point, a.covector);
    if a.gamma && !x.on_gamma() {
        return Err(CliError::other(format!("--gamma needs a point of Γ, got plane {} xi {}", x.plane, x.xi)).into());
    }
    let mut report = EvalReport { point: x, covector: p, planes: Vec::new(), h_zero: None, h_gamma: None, h_gamma_t: None };
    if !x.on_gamma() {
        report.planes.push(PlaneEval {
            plane: x.plane,
            h_i: h_i(&problem, x.plane, &x, &p)?,
            h_i_plus: None,
            delta: None,
            h_gamma_t_i: None,
            identity_gap: None,
        });
    } else {
        for k in problem.shape().planes() {
            let delta = delta_min_set(&problem, k, &x, &p).ok();
            let h_t = h_gamma_t_i(&problem, k, &x, p.p0).ok();
            let identity_gap = match (delta, h_t) {
                (Some(d), Some(t)) => Some((h_i(&problem, k, &x, &p.shifted(d.delta_min))? - t).abs()),
                _ => None,
            };
            report.planes.push(PlaneEval {
                plane: k,
                h_i: h_i(&problem, k, &x, &p)?,
                h_i_plus: h_i_plus(&problem, k, &x, &p).ok(),
                delta,
                h_gamma_t_i: h_t,
                identity_gap,
            });
        }
        report.h_zero = h_zero(&problem, &x, p.p0)?;
        report.h_gamma = h_gamma(&problem, &x, &vec![p; problem.n_planes()]).ok();
        report.h_gamma_t = h_gamma_t(&problem, &x, p.p0).ok();
    }
    if a.json {
        return print_json(&report);
    }
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.10}"));
    for e in &report.planes {
        println!("plane {}: H_i {:.10}", e.plane, e.h_i);
        if x.on_gamma() {
            println!("  H_i+ {}   H_Gamma,i^T {}", opt(e.h_i_plus), opt(e.h_gamma_t_i));
            match e.delta {
                Some(d) => println!(
                    "  Delta [{:.10}, {:.10}] value {:.10}, identity gap {}",
                    d.delta_min,
                    d.delta_max,
                    d.value,
                    opt(e.identity_gap)
                ),
                None => println!("  Delta undefined (fi does not take both signs)"),
            }
        }
    }
    if x.on_gamma() {
        println!("H_0 {}   H_Gamma {}   H_Gamma^T {}", opt(report.h_zero), opt(report.h_gamma), opt(report.h_gamma_t));
    }
    Ok(())
}
