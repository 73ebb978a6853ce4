use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::output::{ensure_dir, write_report, Cell, Table};
use super::CliError;
use crate::dynamics::{evolve_analytic, evolve_ode_path, EvolutionResult};
use crate::estimator::{estimate_gamma, simulate_trajectory, update_posteriors};
use crate::fock::SystemConfig;
use crate::metrology::{fidelity_approx, fidelity_exact_at, qfi_approx_closed, qfi_exact_at};
use crate::optimize::{
    constrained_optimum, evaluate_grid, pareto_front, solve_tau_star, ConstrainedOptimum, GridSpec,
    ParetoPoint, TauStar,
};
use crate::Result as LibResult;

/// The four control settings of the time-evolution figures.
fn control_settings(config: &RunConfig) -> Result<Vec<(&'static str, SystemConfig)>, CliError> {
    let base = config.system()?;
    Ok(vec![
        ("none", base.with_controls(0.0, 0.0)),
        ("linear", base.with_controls(config.u1, 0.0)),
        ("kerr", base.with_controls(0.0, config.u2)),
        ("both", base.with_controls(config.u1, config.u2)),
    ])
}

/// (control, τ, [value by method]).
type CurveRow = (&'static str, f64, [f64; 2]);

/// `f` over every (control, τ) pair, in parallel, rows ordered by control
/// then τ.
fn curve_rows<F>(config: &RunConfig, f: F) -> Result<Vec<CurveRow>, CliError>
where
    F: Fn(&SystemConfig, f64) -> LibResult<[f64; 2]> + Sync,
{
    let taus = config.tau_grid.values();
    let settings = control_settings(config)?;
    let jobs: Vec<(usize, f64)> = (0..settings.len())
        .flat_map(|c| taus.iter().map(move |&t| (c, t)))
        .collect();
    jobs.par_iter()
        .map(|&(c, tau)| f(&settings[c].1, tau).map(|v| (settings[c].0, tau, v)))
        .collect::<LibResult<Vec<_>>>()
        .map_err(CliError::Numerical)
}

fn curve_table(value_column: &str, methods: [&'static str; 2], rows: &[CurveRow]) -> Table {
    let mut table = Table::new(["tau", "control", "method", value_column]);
    let controls: Vec<&'static str> = rows.iter().map(|r| r.0).fold(Vec::new(), |mut v, c| {
        if !v.contains(&c) {
            v.push(c);
        }
        v
    });
    for control in controls {
        for (m, method) in methods.iter().enumerate() {
            for r in rows.iter().filter(|r| r.0 == control) {
                table.push(vec![
                    Cell::Num(r.1),
                    Cell::Text(control),
                    Cell::Text(method),
                    Cell::Num(r.2[m]),
                ]);
            }
        }
    }
    table
}

pub fn qfi_curve(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let rows = curve_rows(config, |sys, tau| {
        Ok([
            qfi_exact_at(sys, tau)?.value,
            qfi_approx_closed(tau, sys).value,
        ])
    })?;
    ensure_dir(&config.out_dir)?;
    let table = curve_table("qfi", ["exact_eig", "closed_form"], &rows);
    Ok(vec![table.write(
        &config.out_dir,
        "qfi_curve",
        config.format,
    )?])
}

pub fn fidelity_curve(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let rows = curve_rows(config, |sys, tau| {
        Ok([
            fidelity_exact_at(sys, tau)?.value,
            fidelity_approx(tau, sys).value,
        ])
    })?;
    ensure_dir(&config.out_dir)?;
    let table = curve_table("fidelity", ["uhlmann", "pure_closed_form"], &rows);
    Ok(vec![table.write(
        &config.out_dir,
        "fidelity_curve",
        config.format,
    )?])
}

fn point_table(points: &[ParetoPoint], with_u1: bool, with_alpha2: bool) -> Table {
    let mut columns = Vec::new();
    if with_u1 {
        columns.push("u1");
    }
    columns.push("u2");
    if with_alpha2 {
        columns.push("alpha2");
    }
    columns.extend(["i_star", "d"]);
    let mut table = Table::new(columns);
    for p in points {
        let mut row = Vec::with_capacity(5);
        if with_u1 {
            row.push(Cell::Num(p.u1));
        }
        row.push(Cell::Num(p.u2));
        if with_alpha2 {
            row.push(Cell::Num(p.alpha2));
        }
        row.extend([Cell::Num(p.i_star), Cell::Num(p.d)]);
        table.push(row);
    }
    table
}

#[derive(Serialize)]
struct OptimumReport<'a> {
    scenario: &'a str,
    gamma: f64,
    grid: GridSpec,
    optimum: ConstrainedOptimum,
    tau_star: TauStar,
}

pub fn optimize(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let points = evaluate_grid(&config.grid, config.gamma).map_err(CliError::Numerical)?;
    ensure_dir(&config.out_dir)?;
    let alpha2_varies = config.grid.alpha2_range.count > 1;
    let mut written = vec![point_table(&points, true, alpha2_varies).write(
        &config.out_dir,
        "surface",
        config.format,
    )?];
    let front = pareto_front(&points);
    written.push(point_table(&front, true, true).write(
        &config.out_dir,
        "pareto_front",
        config.format,
    )?);

    let mut first_error = None;
    for &epsilon in &config.epsilons {
        let outcome = constrained_optimum(&points, epsilon).and_then(|optimum| {
            let b = optimum.best;
            Ok((optimum, solve_tau_star(b.u1, b.u2, b.alpha2)?))
        });
        match outcome {
            Ok((optimum, tau_star)) => {
                let report = OptimumReport {
                    scenario: &config.scenario,
                    gamma: config.gamma,
                    grid: config.grid,
                    optimum,
                    tau_star,
                };
                written.push(write_report(
                    &config.out_dir,
                    &format!("optimum_eps_{epsilon}.json"),
                    &report,
                )?);
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) => Err(CliError::Numerical(e)),
        None => Ok(written),
    }
}

pub fn scan_alpha(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let grid = GridSpec {
        u1_range: crate::optimize::AxisRange::fixed(0.0),
        ..config.grid
    };
    let points = evaluate_grid(&grid, config.gamma).map_err(CliError::Numerical)?;
    ensure_dir(&config.out_dir)?;
    Ok(vec![point_table(&points, false, true).write(
        &config.out_dir,
        "scan_alpha",
        config.format,
    )?])
}

#[derive(Serialize)]
struct EstimateSummary<'a> {
    scenario: &'a str,
    final_gamma_hat: f64,
    gamma_true: f64,
    candidates: &'a [f64],
    prior: &'a [f64],
    final_weights: &'a [f64],
    seed: u64,
    efficiency: f64,
    dt: f64,
    duration: f64,
    reference_log_likelihood: f64,
}

pub fn estimate(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let sys = config.system()?;
    let candidates = config.candidate_set()?;
    let record = simulate_trajectory(
        config.gamma,
        &sys,
        config.duration,
        config.dt,
        config.efficiency,
        config.seed,
    )
    .map_err(CliError::Numerical)?;
    let posterior = update_posteriors(&record, &candidates, &sys).map_err(CliError::Numerical)?;

    let mut columns = vec!["t".to_string(), "gamma_hat".to_string()];
    columns.extend((1..=candidates.len()).map(|i| format!("p_{i}")));
    let mut table = Table::new(columns);
    for ((t, g), w) in posterior
        .times()
        .zip(&posterior.estimate_over_time)
        .zip(&posterior.weights_over_time)
    {
        let mut row = vec![Cell::Num(t), Cell::Num(*g)];
        row.extend(w.iter().map(|&p| Cell::Num(p)));
        table.push(row);
    }
    ensure_dir(&config.out_dir)?;
    let mut written = vec![table.write(&config.out_dir, "estimate", config.format)?];
    let summary = EstimateSummary {
        scenario: &config.scenario,
        final_gamma_hat: estimate_gamma(&posterior),
        gamma_true: config.gamma,
        candidates: candidates.rates(),
        prior: candidates.prior(),
        final_weights: posterior.final_weights(),
        seed: config.seed,
        efficiency: config.efficiency,
        dt: config.dt,
        duration: record.duration(),
        reference_log_likelihood: posterior.reference_log_likelihood,
    };
    written.push(write_report(
        &config.out_dir,
        "estimate_summary.json",
        &summary,
    )?);
    Ok(written)
}

pub fn evolve(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let sys = config.system()?;
    let taus = config.tau_grid.values();
    let analytic = taus
        .par_iter()
        .map(|&t| evolve_analytic(&sys, t))
        .collect::<LibResult<Vec<_>>>()
        .map_err(CliError::Numerical)?;
    let ode = evolve_ode_path(&sys, &taus, config.dt).map_err(CliError::Numerical)?;

    let mut table = Table::new(["tau", "method", "p", "q", "re", "im"]);
    let mut emit = |results: &[EvolutionResult], method: &'static str| {
        for r in results {
            let m = r.state.matrix();
            for p in 0..m.dim() {
                for q in 0..m.dim() {
                    let z = m[(p, q)];
                    table.push(vec![
                        Cell::Num(r.tau),
                        Cell::Text(method),
                        Cell::Int(p),
                        Cell::Int(q),
                        Cell::Num(z.re),
                        Cell::Num(z.im),
                    ]);
                }
            }
        }
    };
    emit(&analytic, "analytic");
    emit(&ode, "ode");
    ensure_dir(&config.out_dir)?;
    Ok(vec![table.write(
        &config.out_dir,
        "evolve",
        config.format,
    )?])
}
