//! The subcommands. Each returns the process exit code or a [`CliError`].

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use psinehari::domain::{load_field_csv, write_field_csv};
use psinehari::energy::energy;
use psinehari::fracops::{assemble_hilfer_derivative, assemble_rl_integral};
use psinehari::nehari::{fiber_analysis, fiber_w, fiber_w1, fiber_w2, phi, phi_hat};
use psinehari::oracle::{dense_reference, EnergyTerm, OracleConfig, Quantity};
use psinehari::solver::{lambda_sweep, sample_directions, two_solution_solve, write_sweep_csv, SolveResult};
use psinehari::spaces::{modular_rho_h, norm_bundle};
use psinehari::{
    integrate, validate_params, AnalyticField, Axis, EnergyBreakdown, Error, FiberReport, Field, GridSpec, Operators,
    ProblemParams, Side,
};
use serde::Serialize;

use crate::config::{CliError, CliResult, RunConfig};

/// Points of the fiber curve.
pub const CURVE_POINTS: usize = 512;

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_field(dir: &Path, name: &str, f: &Field) -> CliResult<()> {
    let w = create(dir, name)?;
    write_field_csv(w, f)?;
    Ok(())
}

/// Prints the hypothesis report; 0 iff every clause holds.
pub fn cmd_validate(config: &RunConfig, out: &mut dyn Write) -> CliResult<i32> {
    let params = config.params()?;
    let report = validate_params(&params);
    writeln!(out, "{report}")?;
    if let Err(e) = config.psi.validate_on(&config.grid) {
        writeln!(out, "[FAIL] psi: {e}")?;
        return Ok(1);
    }
    Ok(if report.passed() { 0 } else { 1 })
}

#[derive(Debug, Clone)]
pub struct FracApplyArgs {
    pub side: Side,
    pub alpha: f64,
    /// Hilfer type; without it the fractional integral of order `alpha` is applied.
    pub beta: Option<f64>,
    pub axis: Axis,
    pub input: PathBuf,
    pub output: PathBuf,
}

/// Applies one 1-D operator along an axis of a nodal field read from CSV.
pub fn cmd_frac_apply(config: &RunConfig, args: &FracApplyArgs) -> CliResult<i32> {
    config.grid.validate()?;
    if args.axis == Axis::X2 && config.grid.dim == 1 {
        return Err(CliError::Usage("axis 2 needs a 2-D grid".into()));
    }
    let u = load_field_csv(&args.input, &config.grid)?;
    let op = match args.beta {
        Some(beta) => assemble_hilfer_derivative(args.side, args.alpha, beta, config.psi, &config.grid)?,
        None => assemble_rl_integral(args.side, args.alpha, config.psi, &config.grid)?,
    };
    let v = op.apply(&u, args.axis)?;
    if let Some(dir) = args.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_field_csv(BufWriter::new(File::create(&args.output)?), &v)?;
    Ok(0)
}

/// `sine` (first sine mode), `bump:SEED` (seeded random bump) or a CSV path.
pub fn resolve_direction(spec: &str, grid: &GridSpec) -> CliResult<(String, Field)> {
    if spec == "sine" {
        return Ok((spec.into(), AnalyticField::SineProduct { k1: 1, k2: 1 }.sample(grid)));
    }
    if let Some(seed) = spec.strip_prefix("bump:") {
        let seed: u64 = seed.parse().map_err(|_| CliError::Usage(format!("bad bump seed `{seed}`")))?;
        let f = sample_directions(grid, 1, seed).remove(0);
        return Ok((spec.into(), f));
    }
    let f = load_field_csv(Path::new(spec), grid)?;
    Ok((spec.into(), f))
}

#[derive(Debug, Serialize)]
pub struct FiberJson {
    pub direction: String,
    pub two_roots: bool,
    pub critical_lambda: f64,
    pub report: FiberReport,
}

/// Writes `fiber.json` and `fiber_curve.csv` for one direction.
///
/// A missing two-root structure is informational: the report records the
/// gap and degenerate flag and the command still exits 0.
pub fn cmd_fiber_report(config: &RunConfig, direction: &str, out: &mut dyn Write) -> CliResult<i32> {
    let params = config.params()?;
    let ops = config.operators()?;
    let (name, u) = resolve_direction(direction, &config.grid)?;
    let b = norm_bundle(&u.abs(), &params, &ops)?;
    let e = params.exponents();
    let report = fiber_analysis(&b, &e, &config.solver.tolerances)?;
    let dir = &config.output;
    let json =
        FiberJson { direction: name, two_roots: report.has_roots(), critical_lambda: report.critical_lambda(), report };
    write_json(dir, "fiber.json", &json)?;

    let mut w = create(dir, "fiber_curve.csv")?;
    writeln!(w, "t,w,w1,w2,phi,phi_hat")?;
    let (lo, hi) = ((report.t_hat0 / 100.0).ln(), (report.t_hat0 * 100.0).ln());
    for k in 0..CURVE_POINTS {
        let t = (lo + (hi - lo) * k as f64 / (CURVE_POINTS - 1) as f64).exp();
        let row =
            [t, fiber_w(&b, t, &e)?, fiber_w1(&b, t, &e)?, fiber_w2(&b, t, &e)?, phi(&b, t, &e)?, phi_hat(&b, t, &e)?];
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    match (report.t1, report.t2) {
        (Some(t1), Some(t2)) => writeln!(out, "t1 = {t1:e}, t0 = {:e}, t2 = {t2:e}", report.t0)?,
        _ => writeln!(out, "no two-root structure: gap = {:e}, degenerate = {}", report.gap, report.degenerate)?,
    }
    Ok(0)
}

#[derive(Debug, Serialize)]
pub struct SolveSummary {
    pub status: &'static str,
    pub reason: Option<String>,
    pub lambda: f64,
    pub grid: GridSpec,
    pub seed: u64,
    pub energy_u_star: Option<EnergyBreakdown>,
    pub energy_v_star: Option<EnergyBreakdown>,
    pub u_star: Option<SolveResult>,
    pub v_star: Option<SolveResult>,
}

/// Computes u* and v*; writes `u_star.csv`, `v_star.csv` and `summary.json`.
///
/// On failure whatever was computed is still written and the exit code is 1.
pub fn cmd_solve(config: &RunConfig, out: &mut dyn Write) -> CliResult<i32> {
    let params = config.params()?;
    let ops = config.operators()?;
    let (plus, minus, reason) = match two_solution_solve(&params, &ops, &config.solver) {
        Ok((a, b)) => (Some(a), Some(b), None),
        Err(Error::TwoSolutionFailure { reason, plus, minus }) => (plus.map(|b| *b), minus.map(|b| *b), Some(reason)),
        Err(e @ (Error::LambdaTooLarge { .. } | Error::NumericalBreakdown(_) | Error::NoTwoRootStructure { .. })) => {
            (None, None, Some(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    let dir = &config.output;
    if let Some(r) = &plus {
        write_field(dir, "u_star.csv", &r.u)?;
    }
    if let Some(r) = &minus {
        write_field(dir, "v_star.csv", &r.u)?;
    }
    let summary = SolveSummary {
        status: if reason.is_none() { "ok" } else { "failed" },
        reason: reason.clone(),
        lambda: params.lambda,
        grid: config.grid,
        seed: config.solver.seed,
        energy_u_star: plus.as_ref().map(|r| r.energy),
        energy_v_star: minus.as_ref().map(|r| r.energy),
        u_star: plus,
        v_star: minus,
    };
    write_json(dir, "summary.json", &summary)?;
    for (name, r) in [("u*", &summary.u_star), ("v*", &summary.v_star)] {
        if let Some(r) = r {
            writeln!(
                out,
                "{name}: E = {:e}, residual = {:e}, nehari = {:e}, iterations = {}, converged = {}",
                r.energy.total, r.residual_rel, r.nehari_residual, r.iterations, r.converged
            )?;
        }
    }
    match reason {
        None => Ok(0),
        Some(r) => {
            writeln!(out, "two-solution solve failed: {r}")?;
            Ok(1)
        }
    }
}

pub fn parse_lambdas(list: &str) -> CliResult<Vec<f64>> {
    list.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad lambda `{s}`")))).collect()
}

/// Runs the λ sweep and writes `sweep.csv`; exit 1 if a branch sign or the
/// monotonicity of m⁺ fails.
pub fn cmd_sweep(config: &RunConfig, lambdas: &[f64], out: &mut dyn Write) -> CliResult<i32> {
    let params = config.params()?;
    let ops = config.operators()?;
    let report = lambda_sweep(&params, &ops, lambdas, &config.solver)?;
    write_sweep_csv(create(&config.output, "sweep.csv")?, &report.rows)?;
    for r in &report.rows {
        writeln!(out, "lambda = {:e}: m+ = {:e}, m- = {:e}", r.lambda, r.m_plus, r.m_minus)?;
        if let Some(e) = &r.error {
            writeln!(out, "  {e}")?;
        }
    }
    let ok = report.m_plus_negative && report.m_plus_nonincreasing && report.m_minus_positive;
    writeln!(
        out,
        "m+ < 0: {}, m+ nonincreasing: {}, m- > 0: {}",
        report.m_plus_negative, report.m_plus_nonincreasing, report.m_minus_positive
    )?;
    Ok(if ok { 0 } else { 1 })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub n: usize,
    pub dim: usize,
    pub primary: f64,
    pub reference: f64,
    pub rel_diff: f64,
}

fn nearest_node(grid: &GridSpec, x: f64) -> usize {
    ((x / grid.spacing()).round() as usize).min(grid.n - 1)
}

/// The library's own value of a registered quantity on `grid`.
pub fn primary_value(q: &Quantity, grid: &GridSpec) -> CliResult<f64> {
    let t = grid.extent;
    Ok(match q {
        Quantity::Integral { u } => integrate(&u.sample(grid), grid)?,
        Quantity::Modular { u, mu, p, q } => modular_rho_h(&u.sample(grid), &Field::constant(grid, *mu), *p, *q)?,
        Quantity::RlAt { u, order, psi, x } => {
            let g = grid.axis_grid();
            let op = assemble_rl_integral(Side::Left, *order, *psi, &g)?;
            op.apply(&u.sample(&g), Axis::X1)?.values[nearest_node(&g, *x)]
        }
        Quantity::HilferAt { u, alpha, beta, psi, x } => {
            let g = grid.axis_grid();
            let op = assemble_hilfer_derivative(Side::Left, *alpha, *beta, *psi, &g)?;
            op.apply(&u.sample(&g), Axis::X1)?.values[nearest_node(&g, *x)]
        }
        Quantity::EnergyTerm { f, g, problem: pb, term } => {
            let u = Field::from_fn(grid, |x1, x2| {
                let a = f.eval(x1, 0.0, t, 1);
                if grid.dim == 2 {
                    a * g.eval(x2, 0.0, t, 1)
                } else {
                    a
                }
            });
            let params = ProblemParams {
                alpha: pb.alpha,
                beta: pb.beta,
                p: pb.p,
                q: pb.q,
                r: pb.r,
                gamma: pb.gamma,
                lambda: pb.lambda,
                a: Field::constant(grid, pb.a),
                mu: Field::constant(grid, pb.mu),
            };
            let ops = Operators::new(pb.alpha, pb.beta, pb.psi, grid)?;
            let e = energy(&u, &params, &ops)?;
            match term {
                EnergyTerm::P => e.term_p,
                EnergyTerm::Q => e.term_q,
                EnergyTerm::Sing => e.term_sing,
                EnergyTerm::R => e.term_r,
                EnergyTerm::Total => e.total,
            }
        }
    })
}

pub fn oracle_check(name: &str, grid: &GridSpec) -> CliResult<OracleCheck> {
    let q = Quantity::from_name(name)?;
    let primary = primary_value(&q, grid)?;
    let reference = dense_reference(&q, grid, &OracleConfig::default())?;
    let scale = primary.abs().max(reference.abs());
    let rel_diff = if scale == 0.0 { 0.0 } else { (primary - reference).abs() / scale };
    Ok(OracleCheck { name: name.into(), n: grid.n, dim: grid.dim, primary, reference, rel_diff })
}

/// Compares the library against the independent reference; all registered
/// quantities when `name` is `None`. Prints one JSON object per line.
pub fn cmd_oracle(config: &RunConfig, name: Option<&str>, out: &mut dyn Write) -> CliResult<i32> {
    config.grid.validate()?;
    let names: Vec<&str> = match name {
        Some(n) => vec![n],
        None => Quantity::NAMES.to_vec(),
    };
    for n in names {
        let c = oracle_check(n, &config.grid)?;
        writeln!(out, "{}", serde_json::to_string(&c)?)?;
    }
    Ok(0)
}
