//! Command-line front end for the phasecost toolkit: inversion of transport
//! costs into phase-field potentials, forward evaluation by independent
//! routes, optimal 1D profiles, Abel-type deconvolution, 2D network
//! simulation, verification reports and batch sweeps.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use phasecost::costs::TransportCost;
use phasecost::forward::{self, Route};
use phasecost::inverse::{self, InverseOptions, InverseRoute, UrbanVariant};
use phasecost::network2d::{self, SimConfig};
use phasecost::phase_costs::{MassSpecificCost, PhaseFieldCost};
use phasecost::profiles;

#[derive(Parser)]
#[command(
    name = "phasecost",
    version,
    about = "Synthesize phase-field potentials for prescribed transport costs"
)]
struct Cli {
    /// Seed for stochastic components (all current solvers are
    /// deterministic; the flag is accepted for report reproducibility)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance for verification checks
    #[arg(long, global = true, default_value_t = 1e-3)]
    tol: f64,
    /// Output path (file, or directory for simulate2d); stdout when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Recover a phase-field cost c inducing the given transport cost
    Invert(InvertArgs),
    /// Evaluate the induced transport cost of a phase-field cost
    Forward(ForwardArgs),
    /// Cross-check a (tau, c) pair and emit a verification report
    Verify(VerifyArgs),
    /// Construct the optimal 1D profile at a given mass
    Profile(ProfileArgs),
    /// Solve the Abel-type convolution equation for the g-transform
    Deconvolve(DeconvolveArgs),
    /// Minimize the 2D phase-field network energy
    Simulate2d(Simulate2dArgs),
    /// Tabulate tau over a mass range by all applicable routes
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Auto,
    Affine,
    Analytic,
    Deconvolve,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Smooth,
    Step,
}

#[derive(Args)]
struct InvertArgs {
    /// Transport cost: inline JSON or a path to a JSON file
    #[arg(long)]
    tau: String,
    #[arg(long, value_enum, default_value = "auto")]
    route: RouteArg,
    /// Urban-planning variant for the analytic route
    #[arg(long, value_enum, default_value = "step")]
    variant: VariantArg,
    /// Lower end of the slope grid (deconvolution route)
    #[arg(long)]
    tmin: Option<f64>,
    /// Upper end of the slope grid (deconvolution route)
    #[arg(long)]
    tmax: Option<f64>,
    /// Number of deconvolution cells
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ForwardRouteArg {
    Auto,
    ClosedForm,
    ModicaMortola,
    Direct,
    All,
}

#[derive(Args)]
struct ForwardArgs {
    /// Phase-field cost: inline JSON or a path (z encoding)
    #[arg(long)]
    c: String,
    /// Mass value(s); repeat the flag for several
    #[arg(long, required = true, num_args = 1..)]
    w: Vec<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    route: ForwardRouteArg,
}

#[derive(Args)]
struct VerifyArgs {
    /// Transport cost: inline JSON or a path
    #[arg(long)]
    tau: String,
    /// Phase-field cost: inline JSON or a path
    #[arg(long)]
    c: String,
    /// Mass grid as min:max:count[:lin|:log]
    #[arg(long, default_value = "0.25:4:9:log")]
    wgrid: String,
}

#[derive(Args)]
struct ProfileArgs {
    /// Phase-field cost: inline JSON or a path
    #[arg(long)]
    c: String,
    #[arg(long)]
    w: f64,
}

#[derive(Args)]
struct DeconvolveArgs {
    /// Transport cost: inline JSON or a path
    #[arg(long)]
    tau: String,
    #[arg(long)]
    tmin: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    /// Number of collocation cells
    #[arg(long, default_value_t = 800)]
    grid: usize,
    /// Grid grading exponent (1 uniform, 2 clusters near tmax)
    #[arg(long, default_value_t = 2.0)]
    grading: f64,
    /// Ridge regularization weight
    #[arg(long, default_value_t = 0.0)]
    reg: f64,
}

#[derive(Args)]
struct Simulate2dArgs {
    /// Simulation config JSON (inline or path)
    #[arg(long)]
    config: String,
}

#[derive(Args)]
struct SweepArgs {
    /// Transport cost: inline JSON or a path
    #[arg(long)]
    tau: String,
    #[arg(long, default_value_t = 0.01)]
    wmin: f64,
    #[arg(long, default_value_t = 10.0)]
    wmax: f64,
    #[arg(long, default_value_t = 50)]
    num: usize,
    /// Space the masses linearly instead of logarithmically
    #[arg(long)]
    linear: bool,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("PHASECOST_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let out = cli.out.clone();
    let result = match cli.cmd {
        Cmd::Invert(a) => cmd_invert(a, out.as_deref()),
        Cmd::Forward(a) => cmd_forward(a, out.as_deref()),
        Cmd::Verify(a) => cmd_verify(a, out.as_deref(), cli.tol),
        Cmd::Profile(a) => cmd_profile(a, out.as_deref(), cli.tol),
        Cmd::Deconvolve(a) => cmd_deconvolve(a, out.as_deref()),
        Cmd::Simulate2d(a) => cmd_simulate2d(a, out.as_deref()),
        Cmd::Sweep(a) => cmd_sweep(a, out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Parse a value either from inline JSON (starts with '{') or a file path.
fn parse_json_or_file<T: serde::de::DeserializeOwned>(spec: &str, what: &str) -> Result<T> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        fs::read_to_string(spec).with_context(|| format!("reading {what} file {spec}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing {what} JSON"))
}

fn write_or_print(out: Option<&Path>, contents: &str, label: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("{label} written to {}", path.display());
        }
        None => {
            use std::io::Write;
            // tolerate closed pipes (e.g. piping into `head`)
            if let Err(e) = writeln!(std::io::stdout(), "{contents}") {
                if e.kind() == std::io::ErrorKind::BrokenPipe {
                    std::process::exit(0);
                }
                return Err(e.into());
            }
        }
    }
    Ok(())
}

/// Sidecar path `<stem>.report.json` next to an output file.
fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    out.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Serialize)]
struct InvertChecks {
    necessary: Option<f64>,
    roundtrip: Option<f64>,
}

#[derive(Serialize)]
struct InvertSidecar {
    residual: Option<f64>,
    route: String,
    checks: InvertChecks,
}

fn cmd_invert(a: InvertArgs, out: Option<&Path>) -> Result<ExitCode> {
    let tau: TransportCost = parse_json_or_file(&a.tau, "transport cost")?;
    let route = match a.route {
        RouteArg::Auto => InverseRoute::Auto,
        RouteArg::Affine => InverseRoute::Affine,
        RouteArg::Analytic => InverseRoute::Analytic,
        RouteArg::Deconvolve => InverseRoute::Deconvolve,
    };
    let mut opts = InverseOptions {
        variant: match a.variant {
            VariantArg::Smooth => UrbanVariant::Smooth,
            VariantArg::Step => UrbanVariant::Step,
        },
        t_min: a.tmin,
        t_max: a.tmax,
        ..InverseOptions::default()
    };
    if let Some(grid) = a.grid {
        opts.grid = grid;
    }
    let solution = inverse::solve_inverse(&tau, route, &opts)?;
    let c_json = serde_json::to_string_pretty(&solution.c)?;
    let sidecar = InvertSidecar {
        residual: solution.report.residual,
        route: solution.report.route.clone(),
        checks: InvertChecks {
            necessary: solution.report.necessary_gap,
            roundtrip: solution.report.roundtrip_rel_error,
        },
    };
    let report_json = serde_json::to_string_pretty(&sidecar)?;
    match out {
        Some(path) => {
            write_or_print(Some(path), &c_json, "phase-field cost")?;
            write_or_print(Some(&sidecar_path(path, "report.json")), &report_json, "report")?;
        }
        None => {
            println!("{c_json}");
            println!("{report_json}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_else(|| "NA".into())
}

fn forward_rows(
    c: &PhaseFieldCost,
    ws: &[f64],
    routes: &[Route],
) -> Vec<std::result::Result<forward::ForwardResult, String>> {
    let mut rows = Vec::new();
    for &w in ws {
        for &route in routes {
            rows.push(forward::tau_forward(c, w, route).map_err(|e| e.to_string()));
        }
    }
    rows
}

fn cmd_forward(a: ForwardArgs, out: Option<&Path>) -> Result<ExitCode> {
    let c: PhaseFieldCost = parse_json_or_file(&a.c, "phase-field cost")?;
    let is_step = matches!(c.z, MassSpecificCost::Step(_));
    let routes: Vec<Route> = match a.route {
        ForwardRouteArg::Auto => {
            vec![if is_step { Route::ClosedForm } else { Route::ModicaMortola }]
        }
        ForwardRouteArg::ClosedForm => vec![Route::ClosedForm],
        ForwardRouteArg::ModicaMortola => vec![Route::ModicaMortola],
        ForwardRouteArg::Direct => vec![Route::DirectMinimization],
        ForwardRouteArg::All => {
            let mut r = Vec::new();
            if is_step {
                r.push(Route::ClosedForm);
            }
            r.push(Route::ModicaMortola);
            r.push(Route::DirectMinimization);
            r
        }
    };
    let mut csv = String::from("w,tau,route,profile_max,lagrange_slope\n");
    for row in forward_rows(&c, &a.w, &routes) {
        match row {
            Ok(r) => {
                csv += &format!(
                    "{:.12e},{:.12e},{},{},{}\n",
                    r.w,
                    r.tau_value,
                    r.route,
                    fmt_opt(r.profile_max),
                    fmt_opt(r.lagrange_slope)
                );
            }
            Err(e) => bail!("forward evaluation failed: {e}"),
        }
    }
    write_or_print(out, &csv, "forward table")?;
    Ok(ExitCode::SUCCESS)
}

/// One entry of a verification report.
#[derive(Serialize)]
struct Check {
    name: String,
    status: String,
    measured: f64,
    tolerance: f64,
    route: String,
}

#[derive(Serialize)]
struct VerificationReport {
    checks: Vec<Check>,
    pass: bool,
}

fn parse_wgrid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() < 3 || parts.len() > 4 {
        bail!("mass grid must be min:max:count[:lin|:log], got {spec}");
    }
    let lo: f64 = parts[0].parse().context("parsing grid minimum")?;
    let hi: f64 = parts[1].parse().context("parsing grid maximum")?;
    let n: usize = parts[2].parse().context("parsing grid count")?;
    let log = match parts.get(3).copied() {
        None | Some("log") => true,
        Some("lin") => false,
        Some(other) => bail!("unknown grid spacing {other}"),
    };
    if n == 0 {
        bail!("mass grid is empty");
    }
    if !(hi > lo && lo > 0.0) {
        bail!("need 0 < min < max, got [{lo}, {hi}]");
    }
    Ok((0..n)
        .map(|k| {
            let s = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
            if log {
                lo * (hi / lo).powf(s)
            } else {
                lo + (hi - lo) * s
            }
        })
        .collect())
}

fn cmd_verify(a: VerifyArgs, out: Option<&Path>, tol: f64) -> Result<ExitCode> {
    let tau: TransportCost = parse_json_or_file(&a.tau, "transport cost")?;
    let c: PhaseFieldCost = parse_json_or_file(&a.c, "phase-field cost")?;
    let ws = parse_wgrid(&a.wgrid)?;
    let mut checks = Vec::new();

    // 1. admissibility of the input transport cost on the grid
    let adm = tau.validate_admissible(&ws)?;
    checks.push(Check {
        name: "admissibility".into(),
        status: if adm.pass() { "pass" } else { "fail" }.into(),
        measured: if adm.pass() { 0.0 } else { 1.0 },
        tolerance: 0.0,
        route: "validate_admissible".into(),
    });

    // 2. forward round trip: tau induced by c matches the input tau
    let is_step = matches!(c.z, MassSpecificCost::Step(_));
    let route = if is_step { Route::ClosedForm } else { Route::ModicaMortola };
    let mut gap = 0.0f64;
    for &w in &ws {
        let predicted = forward::tau_forward(&c, w, route)?.tau_value;
        let target = tau.eval(w)?;
        gap = gap.max((predicted - target).abs() / (1.0 + target.abs()));
    }
    checks.push(Check {
        name: "roundtrip".into(),
        status: if gap <= tol { "pass" } else { "fail" }.into(),
        measured: gap,
        tolerance: tol,
        route: route.to_string(),
    });

    // 3. necessary condition at differentiable slopes
    let necessary = inverse::necessary_condition_gap(&c.z, &tau, &ws)?;
    checks.push(Check {
        name: "necessary_condition".into(),
        status: if necessary <= tol { "pass" } else { "fail" }.into(),
        measured: necessary,
        tolerance: tol,
        route: "abel_forward".into(),
    });

    // 4. profile energy bounds and the Lagrange sandwich at sampled masses
    let mut bound_gap = 0.0f64;
    let mut bound_route = "optimal_profile".to_string();
    for &w in ws.iter().take(5) {
        let prof = match forward::optimal_profile(&c, w, None) {
            Ok(p) => p,
            Err(phasecost::Error::NoMinimizer { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        let lower = 2.0 * (prof.psi_max / 2.0).powi(3) / w;
        bound_gap = bound_gap.max((lower - prof.energy) / (1.0 + prof.energy));
        if let Ok(rep) = profiles::lagrange_slope(&prof, &c.z) {
            if !rep.consistent {
                bound_gap = bound_gap.max(1.0);
                bound_route = "lagrange_slope".into();
            }
        }
    }
    checks.push(Check {
        name: "energy_bounds".into(),
        status: if bound_gap <= tol { "pass" } else { "fail" }.into(),
        measured: bound_gap,
        tolerance: tol,
        route: bound_route,
    });

    let pass = checks.iter().all(|c| c.status == "pass");
    let report = VerificationReport { checks, pass };
    let json = serde_json::to_string_pretty(&report)?;
    // human-readable table alongside the JSON artifact
    eprintln!("{:<22} {:<6} {:>14} {:>10}  route", "check", "status", "measured", "tol");
    for ch in &report.checks {
        eprintln!(
            "{:<22} {:<6} {:>14.6e} {:>10.1e}  {}",
            ch.name, ch.status, ch.measured, ch.tolerance, ch.route
        );
    }
    write_or_print(out, &json, "verification report")?;
    if pass {
        Ok(ExitCode::SUCCESS)
    } else {
        // communicate the first failing category through the exit code
        let first = report.checks.iter().position(|c| c.status != "pass").unwrap();
        Ok(ExitCode::from(first as u8 + 1))
    }
}

#[derive(Serialize)]
struct ProfileSidecar {
    mass: f64,
    energy: f64,
    lambda: Option<f64>,
    exists: bool,
}

fn cmd_profile(a: ProfileArgs, out: Option<&Path>, tol: f64) -> Result<ExitCode> {
    let c: PhaseFieldCost = parse_json_or_file(&a.c, "phase-field cost")?;
    let existence = profiles::exists_minimizer(&c.z, a.w)?;
    let delta = tol * existence.tau.max(1e-9);
    let prof = forward::optimal_profile(&c, a.w, Some(delta))?;
    let r = prof.support_radius();
    let (ys, psis) = prof.sample(1001, r * 1.05);
    let mut csv = String::from("y,psi\n");
    for (y, psi) in ys.iter().zip(&psis) {
        csv += &format!("{y:.12e},{psi:.12e}\n");
    }
    let lambda = profiles::lagrange_slope(&prof, &c.z).ok().map(|r| r.lambda);
    let sidecar = ProfileSidecar {
        mass: prof.mass,
        energy: prof.energy,
        lambda,
        exists: existence.exists && !prof.epsilon_minimizer,
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    match out {
        Some(path) => {
            write_or_print(Some(path), &csv, "profile")?;
            write_or_print(Some(&sidecar_path(path, "json")), &json, "profile sidecar")?;
        }
        None => {
            print!("{csv}");
            println!("{json}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PowerFitOut {
    coeff: f64,
    exponent: f64,
}

#[derive(Serialize)]
struct DeconvolveSidecar {
    residual: f64,
    head_fit: Option<PowerFitOut>,
    tail_fit: Option<PowerFitOut>,
}

fn cmd_deconvolve(a: DeconvolveArgs, out: Option<&Path>) -> Result<ExitCode> {
    let tau: TransportCost = parse_json_or_file(&a.tau, "transport cost")?;
    let t_min = match a.tmin {
        Some(t) => t,
        None => {
            let w_hi = match &tau {
                TransportCost::PiecewiseAffine { breakpoints, .. } => {
                    2.0 * breakpoints.last().copied().unwrap_or(8.0)
                }
                TransportCost::Sampled { w, .. } => *w.last().unwrap(),
                _ => 16.0,
            };
            tau.left_derivative(w_hi)?
        }
    };
    let t_max = match a.tmax {
        Some(t) => t,
        None => {
            let t = tau.right_derivative(0.0)?;
            if !t.is_finite() {
                bail!("tau'(0) is infinite; pass an explicit --tmax for the slope grid");
            }
            t
        }
    };
    let problem =
        inverse::DeconvolutionProblem::from_transport_cost(&tau, t_min, t_max, a.grid, a.grading)?;
    let mut problem = problem;
    problem.regularization = a.reg;
    let result = inverse::deconvolve(&problem)?;
    let mut csv = String::from("t,g\n");
    for (t, g) in result.g.x().iter().zip(result.g.y()) {
        csv += &format!("{t:.12e},{g:.12e}\n");
    }
    let sidecar = DeconvolveSidecar {
        residual: result.residual,
        head_fit: result.head_fit.map(|f| PowerFitOut { coeff: f.coeff, exponent: f.exponent }),
        tail_fit: result.tail_fit.map(|f| PowerFitOut { coeff: f.coeff, exponent: f.exponent }),
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    match out {
        Some(path) => {
            write_or_print(Some(path), &csv, "g-transform")?;
            write_or_print(Some(&sidecar_path(path, "json")), &json, "deconvolution sidecar")?;
        }
        None => {
            print!("{csv}");
            println!("{json}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn grid_csv(n: usize, values: &[f64]) -> String {
    let cols = values.len() / n;
    let mut s = String::new();
    for row in 0..n {
        for col in 0..cols {
            if col > 0 {
                s.push(',');
            }
            s += &format!("{:.9e}", values[row * cols + col]);
        }
        s.push('\n');
    }
    s
}

fn cmd_simulate2d(a: Simulate2dArgs, out: Option<&Path>) -> Result<ExitCode> {
    let config: SimConfig = parse_json_or_file(&a.config, "simulation config")?;
    let dir = out.unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let result = network2d::minimize_2d(&config)?;
    let n = config.n;

    fs::write(dir.join("u.csv"), grid_csv(n + 1, &result.field.u))?;
    let (cx, cy) = result.field.sigma_cells();
    let mag: Vec<f64> = cx.iter().zip(&cy).map(|(a, b)| a.hypot(*b)).collect();
    fs::write(dir.join("sigma_mag.csv"), grid_csv(n, &mag))?;
    let mut trace = String::from("iter,epsilon,energy,div_residual\n");
    for row in &result.trace {
        trace += &format!(
            "{},{:.9e},{:.12e},{:.3e}\n",
            row.iter, row.epsilon, row.energy, row.div_residual
        );
    }
    fs::write(dir.join("trace.csv"), trace)?;
    eprintln!(
        "final energy {:.6e}, line search {}, outputs in {}",
        result.final_energy,
        if result.line_search_ok { "converged" } else { "FAILED" },
        dir.display()
    );
    Ok(if result.line_search_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_sweep(a: SweepArgs, out: Option<&Path>) -> Result<ExitCode> {
    let tau: TransportCost = parse_json_or_file(&a.tau, "transport cost")?;
    if !(a.wmax > a.wmin && a.wmin >= 0.0) || a.num == 0 {
        bail!("need 0 <= wmin < wmax and a positive sample count");
    }
    let solution = inverse::solve_inverse(&tau, InverseRoute::Auto, &InverseOptions::default())?;
    let c = solution.c;
    let is_step = matches!(c.z, MassSpecificCost::Step(_));
    let ws: Vec<f64> = (0..a.num)
        .map(|k| {
            let s = if a.num == 1 { 0.0 } else { k as f64 / (a.num - 1) as f64 };
            if a.linear || a.wmin == 0.0 {
                a.wmin + (a.wmax - a.wmin) * s
            } else {
                a.wmin * (a.wmax / a.wmin).powf(s)
            }
        })
        .collect();

    let mut csv =
        String::from("w,tau,tau_closed_form,tau_modica_mortola,tau_direct,max_rel_gap\n");
    // rows are independent; evaluate the costly direct route as a sweep
    // (data-parallel inside the library) and the rest per row
    let direct: Vec<Option<f64>> = match forward::tau_sweep(&c, &ws, Route::DirectMinimization) {
        Ok(rows) => rows.into_iter().map(|r| Some(r.tau_value)).collect(),
        Err(_) => ws
            .iter()
            .map(|&w| {
                forward::tau_forward(&c, w, Route::DirectMinimization).ok().map(|r| r.tau_value)
            })
            .collect(),
    };
    for (k, &w) in ws.iter().enumerate() {
        if w == 0.0 {
            csv += "0,0,0,0,0,0\n";
            continue;
        }
        let target = tau.eval(w)?;
        let closed = if is_step {
            match forward::tau_forward(&c, w, Route::ClosedForm) {
                Ok(r) => Ok(r.tau_value),
                Err(e) => Err(format!("NA({e})")),
            }
        } else {
            Err("NA(closed form needs a step cost)".to_string())
        };
        let mm = forward::tau_forward(&c, w, Route::ModicaMortola)
            .map(|r| r.tau_value)
            .map_err(|e| format!("NA({e})"));
        let direct_v = direct[k].ok_or_else(|| "NA(direct route failed)".to_string());
        let mut gap = 0.0f64;
        for v in [closed.as_ref().ok(), mm.as_ref().ok(), direct_v.as_ref().ok()]
            .into_iter()
            .flatten()
        {
            gap = gap.max((v - target).abs() / (1.0 + target.abs()));
        }
        let cell = |v: &std::result::Result<f64, String>| match v {
            Ok(x) => format!("{x:.12e}"),
            Err(reason) => reason.replace(',', ";"),
        };
        csv += &format!(
            "{:.12e},{:.12e},{},{},{},{:.3e}\n",
            w,
            target,
            cell(&closed),
            cell(&mm),
            cell(&direct_v),
            gap
        );
    }
    write_or_print(out, &csv, "sweep table")?;
    Ok(ExitCode::SUCCESS)
}
