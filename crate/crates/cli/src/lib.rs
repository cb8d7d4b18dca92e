//! Library side of the `birkhoff` command: configuration, the three
//! subcommands, and CSV/SVG output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod plot;

use std::io::Write;
use std::path::Path;

use birkhoff_core::integrator::{run_simulation, Grid, StateLevel, U};
use birkhoff_core::monitor::{discrete_dissipation_residual, propagate_tangents, seeded_tangent_levels, staggered_forms};
use birkhoff_core::structure::{check_self_adjointness, CovariantSystem, Perturbation, Perturbed, Sample};
use birkhoff_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::RunConfig;
pub use plot::{emit_plot, Series};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(Error),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("check failed: {}", .0.join(", "))]
    CheckFailed(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 1,
            CliError::CheckFailed(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(m) | Error::Unsupported(m) => CliError::Usage(m),
            other => CliError::Runtime(other),
        }
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(io(&cfg.out_dir))
}

fn say(out: &mut dyn Write, line: String) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn simulate(cfg: &RunConfig) -> Result<(Grid, Vec<StateLevel>), CliError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let init = cfg.problem.initial_level(&grid)?;
    let levels = run_simulation(&cfg.scheme_config(), &grid, &init)?;
    Ok((grid, levels))
}

fn snapshot(grid: &Grid, level: &StateLevel) -> Series {
    let t = grid.t(level.j);
    Series::new(format!("u at t = {t:.4}"), level.z.iter().enumerate().map(|(i, n)| (grid.x(i), n[U])).collect())
}

/// Integrates the configured problem and writes `solution.csv` and `solution.svg`.
pub fn cmd_run(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let (grid, levels) = simulate(cfg)?;
    prepare_out_dir(cfg)?;
    let csv_path = cfg.out_dir.join("solution.csv");
    output::write_solution(&csv_path, &grid, &levels)?;
    let last = levels.last().expect("nt + 1 levels");
    emit_plot(
        &cfg.out_dir.join("solution.svg"),
        "solution snapshots",
        "x",
        "u",
        &[snapshot(&grid, &levels[0]), snapshot(&grid, last)],
    )?;
    let mut summary = format!(
        "run: scheme={} nx={} dt={} nt={} t_final={}",
        cfg.scheme,
        grid.nx,
        grid.dt,
        grid.nt,
        grid.t_end()
    );
    if cfg.problem.beta == 0.0 {
        let err = cfg.problem.error_norm(&grid, last)?;
        summary.push_str(&format!(" l2_error={err:e}"));
    }
    say(out, summary)?;
    say(out, format!("wrote {}", csv_path.display()))
}

fn samples(cfg: &RunConfig, count: usize) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..count)
        .map(|_| {
            let z = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Sample::new(z, rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..=cfg.t_end))
        })
        .collect()
}

/// Self-adjointness of the problem, then the discrete dissipation law on a
/// seeded tangent pair. Writes `report.csv` and two plots before judging.
pub fn cmd_check(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.validate()?;
    let covariant = cfg.problem.covariant_system();
    let system: Box<dyn CovariantSystem> = if cfg.debug_perturb_m {
        Box::new(Perturbed {
            inner: covariant,
            perturbation: Perturbation::TimeStructureEntry { row: 1, col: 1, value: 0.1 },
        })
    } else {
        Box::new(covariant)
    };
    let adjoint = check_self_adjointness(system.as_ref(), &samples(cfg, 50), cfg.adjoint_tol)?;
    say(
        out,
        format!(
            "self-adjointness: skew_M={:e} skew_K={:e} closure_M={:e} closure_K={:e} compat={:e} tol={:e}",
            adjoint.skew_m_max,
            adjoint.skew_k_max,
            adjoint.closure_m_max,
            adjoint.closure_k_max,
            adjoint.compat_max,
            adjoint.tolerance
        ),
    )?;

    let (grid, base) = simulate(cfg)?;
    let (du, dv) = seeded_tangent_levels(&grid, cfg.seed);
    let tangents = propagate_tangents(&cfg.scheme_config(), &grid, &base, &du, &dv)?;
    let sys = cfg.problem.as_birkhoff_system();
    let report = discrete_dissipation_residual(&grid, &staggered_forms(&sys, &grid, &base, &tangents)?)?;

    prepare_out_dir(cfg)?;
    output::write_report(&cfg.out_dir.join("report.csv"), &grid, &report)?;
    let times: Vec<f64> = (0..=grid.nt).map(|j| grid.t(j)).collect();
    let along = |v: &[f64]| times.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
    emit_plot(
        &cfg.out_dir.join("global_form.svg"),
        "spatially summed two-form",
        "t",
        "sum",
        &[
            Series::new("weighted", along(&report.global_form)),
            Series::new("unweighted", along(&report.global_unweighted_form)),
        ],
    )?;
    emit_plot(
        &cfg.out_dir.join("residual.svg"),
        "max box residual per level",
        "t",
        "residual",
        &[Series::new("max residual", along(&report.per_level))],
    )?;

    let g0 = report.global_form[0];
    let drift = report.global_form.iter().fold(0.0_f64, |m, g| m.max((g - g0).abs())) / g0.abs().max(f64::MIN_POSITIVE);
    say(
        out,
        format!(
            "dissipation: max_box_residual={:e} tol={:e} global_form_drift={:e}",
            report.max_residual, cfg.dissipation_tol, drift
        ),
    )?;

    let mut failures: Vec<String> = adjoint.failures().iter().map(ToString::to_string).collect();
    if !(report.max_residual <= cfg.dissipation_tol) {
        failures.push("discrete dissipation law".into());
    }
    if failures.is_empty() {
        say(out, "check: passed".into())
    } else {
        say(out, format!("check: FAILED ({})", failures.join(", ")))?;
        Err(CliError::CheckFailed(failures))
    }
}

/// Refines `(nx, dt)` by halving `levels - 1` times and tabulates the
/// final-time error against the exact solution.
pub fn cmd_converge(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    cfg.validate()?;
    if cfg.problem.beta != 0.0 {
        return Err(CliError::Config(format!("`beta`: convergence study needs beta = 0, got {}", cfg.problem.beta)));
    }
    if cfg.levels < 3 {
        return Err(CliError::Usage(format!("`levels`: need at least 3 refinement levels, got {}", cfg.levels)));
    }
    let refinements: Vec<(usize, f64)> = (0..cfg.levels)
        .map(|l| (cfg.nx << l, cfg.dt() / f64::from(1u32 << l)))
        .collect();
    let rows = cfg.problem.convergence_study(&cfg.scheme_config(), &refinements, cfg.t_end)?;
    prepare_out_dir(cfg)?;
    output::write_convergence(&cfg.out_dir.join("convergence.csv"), &rows)?;
    emit_plot(
        &cfg.out_dir.join("convergence.svg"),
        "convergence",
        "log10 dx",
        "log10 L2 error",
        &[Series::new(
            format!("{}", cfg.scheme),
            rows.iter().map(|r| (r.dx.log10(), r.l2_error.log10())).collect(),
        )],
    )?;
    for r in &rows {
        let order = r.observed_order.map(|o| format!("{o:.4}")).unwrap_or_else(|| "-".into());
        say(out, format!("nx={} dx={:.6e} dt={:.6e} l2_error={:.6e} order={order}", r.nx, r.dx, r.dt, r.l2_error))?;
    }
    Ok(())
}

