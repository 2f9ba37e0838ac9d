//! Command-line front end: one config file, seven subcommands, CSV
//! artifacts plus a manifest per run. Exit codes separate the failure
//! kinds: 0 success, 2 configuration, 3 numerical abort, 4 property
//! failure.

use crate::analysis::{
    convergence_study, gagliardo_seminorm, increment_statistics, moment_study,
    occupancy_study, simulate_ensemble, uniqueness_experiment, AnalysisError,
};
use crate::config::{parse_config, ConfigError, ParsedRun};
use crate::output::{Cell, Manifest, OutputError, Table};
use crate::properties::{full_suite, PropertiesError, PropertyRow, SuiteBudget};
use crate::solver::{simulate, SolverError};
use crate::spaces::NormKind;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_PROPERTY: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Properties(#[from] PropertiesError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("run aborted: {0}")]
    Aborted(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Aborted(_) => EXIT_NUMERICAL,
            CliError::Analysis(AnalysisError::RunAborted { .. }) => EXIT_NUMERICAL,
            CliError::Solver(SolverError::NoConvergence { .. })
            | CliError::Solver(SolverError::Blowup { .. }) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "levpde", version, about = "Spectral Galerkin runs for monotone SPDEs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for CSV artifacts and the manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides study.paths for ensemble subcommands.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Suppresses progress and warning output.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// One trajectory: state, norms and the energy ledger per step.
    Simulate,
    /// The structural property table with fitted constants.
    Properties,
    /// Frozen-noise refinement along the configured study axis.
    Converge,
    /// Perturbed-twin run with the Gronwall diagnostics.
    Uniqueness,
    /// Monte Carlo energy moments over an ensemble.
    Moments,
    /// Time-averaged truncation occupancy across the R grid.
    Occupancy,
    /// Time-regularity seminorm and increment statistics.
    Seminorm,
}

pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Loads the config, applies overrides, dispatches, writes the manifest.
pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    let path = cli.config.as_ref().ok_or(ConfigError::Missing { key: "--config".into() })?;
    let text = std::fs::read_to_string(path)
        .map_err(|source| CliError::ReadConfig { path: path.clone(), source })?;
    let mut run = parse_config(&text)?;
    if let Some(seed) = cli.seed {
        run.solver.seed = seed;
        for (k, v) in &mut run.echo {
            if k == "seed" {
                *v = seed.to_string();
            }
        }
    }
    if let Some(paths) = cli.paths {
        run.study.paths = paths;
        for (k, v) in &mut run.echo {
            if k == "study.paths" {
                *v = paths.to_string();
            }
        }
    }
    std::fs::create_dir_all(&cli.out).map_err(|source| CliError::ReadConfig {
        path: cli.out.clone(),
        source,
    })?;
    run_command(cli.command, &run, &cli.out, cli.quiet)
}

/// The dispatch used by both the binary and the acceptance harness.
pub fn run_command(
    command: Command,
    run: &ParsedRun,
    out: &Path,
    quiet: bool,
) -> Result<i32, CliError> {
    let mut manifest = Manifest::new(run.solver.seed, run.echo.clone());
    let code = match command {
        Command::Simulate => cmd_simulate(run, out, quiet, &mut manifest)?,
        Command::Properties => cmd_properties(run, out, quiet, &mut manifest)?,
        Command::Converge => cmd_converge(run, out, quiet, &mut manifest)?,
        Command::Uniqueness => cmd_uniqueness(run, out, quiet, &mut manifest)?,
        Command::Moments => cmd_moments(run, out, quiet, &mut manifest)?,
        Command::Occupancy => cmd_occupancy(run, out, quiet, &mut manifest)?,
        Command::Seminorm => cmd_seminorm(run, out, quiet, &mut manifest)?,
    };
    manifest.write(&out.join("manifest.txt"))?;
    if !quiet {
        println!("manifest digest {}", manifest.stable_digest());
    }
    Ok(code)
}

fn emit(
    table: &Table,
    name: &str,
    out: &Path,
    manifest: &mut Manifest,
) -> Result<(), CliError> {
    let digest = table.write(&out.join(name))?;
    manifest.record(name, digest);
    Ok(())
}

fn aborted(e: Box<crate::solver::Aborted>) -> CliError {
    CliError::Aborted(format!("{} after {} steps", e.error, e.partial.ledger.len()))
}

fn cmd_simulate(
    run: &ParsedRun,
    out: &Path,
    quiet: bool,
    manifest: &mut Manifest,
) -> Result<i32, CliError> {
    let cfg = &run.solver;
    cfg.validate()?;
    let basis = cfg.basis()?;
    if let Some(w) = cfg.stability_warning(&basis) {
        if !quiet {
            eprintln!("warning: {w}");
        }
    }
    let traj = simulate(cfg).map_err(aborted)?;

    let (p, k) = cfg.operator.as_ref().map_or((2.0, 1), |o| (o.p, o.k));
    let mut cols = vec!["t".to_string()];
    for j in 1..=cfg.n {
        cols.push(format!("coeff_{j}"));
    }
    cols.extend(["H_norm", "V_norm", "X_norm", "jump_flag"].map(String::from));
    let mut table = Table::new(cols);
    for (i, (t, u)) in traj.times.iter().zip(&traj.states).enumerate() {
        let mut row = Vec::with_capacity(cfg.n + 5);
        row.push(Cell::Float(*t));
        row.extend(u.coeffs.iter().map(|c| Cell::Float(*c)));
        row.push(Cell::Float(basis.norm(u, NormKind::H)));
        row.push(Cell::Float(basis.norm(u, NormKind::V)));
        row.push(Cell::Float(basis.norm(u, NormKind::X { p, k })));
        let jumped = i > 0 && traj.jump_log.iter().any(|j| j.step + 1 == i);
        row.push(Cell::Int(jumped as i64));
        table.push(row);
    }
    emit(&table, "trajectory.csv", out, manifest)?;

    let mut energy = Table::new([
        "step",
        "t",
        "d_h2",
        "quad_var",
        "viscous",
        "convection",
        "f_pairing",
        "wiener_work",
        "jump_work",
        "residual",
    ]);
    for (k, row) in traj.ledger.iter().enumerate() {
        energy.push(vec![
            Cell::Int(k as i64),
            Cell::Float(traj.times[k + 1]),
            Cell::Float(row.d_h2),
            Cell::Float(row.quad_var),
            Cell::Float(row.viscous),
            Cell::Float(row.convection),
            Cell::Float(row.f_pairing),
            Cell::Float(row.wiener_work),
            Cell::Float(row.jump_work),
            Cell::Float(row.residual),
        ]);
    }
    emit(&energy, "energy.csv", out, manifest)?;

    if !quiet {
        let worst = traj.ledger.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
        println!("simulate: {} steps, max ledger residual {worst:.3e}", traj.ledger.len());
    }
    Ok(EXIT_OK)
}

fn constants_cell(row: &PropertyRow) -> Cell {
    let packed = row
        .constants
        .iter()
        .map(|(k, v)| format!("{k}={v:.16e}"))
        .collect::<Vec<_>>()
        .join(";");
    Cell::Text(packed)
}

fn cmd_properties(
    run: &ParsedRun,
    out: &Path,
    quiet: bool,
    manifest: &mut Manifest,
) -> Result<i32, CliError> {
    let p = run.solver.operator.as_ref().map_or(4.0, |o| o.p);
    let budget = SuiteBudget {
        points: run.study.points,
        pairs: run.study.pairs,
        fields: run.study.fields,
        states: run.study.states,
    };
    let rows = full_suite(p, budget, run.solver.seed)?;
    let mut table = Table::new(["name", "pass", "statistic", "bound", "constants"]);
    let mut failures = 0usize;
    for row in &rows {
        if !row.pass {
            failures += 1;
        }
        table.push(vec![
            Cell::Text(row.name.clone()),
            Cell::Int(row.pass as i64),
            Cell::Float(row.statistic),
            Cell::Float(row.bound),
            constants_cell(row),
        ]);
    }
    emit(&table, "properties.csv", out, manifest)?;
    if !quiet {
        println!("properties: {} rows, {} failing", rows.len(), failures);
    }
    Ok(if failures == 0 { EXIT_OK } else { EXIT_PROPERTY })
}

fn cmd_converge(
    run: &ParsedRun,
    out: &Path,
    quiet: bool,
    manifest: &mut Manifest,
) -> Result<i32, CliError> {
    let report = convergence_study(&run.solver, run.study.axis, &run.study.values)?;
    let mut table = Table::new(["from", "to", "l2_distance", "terminal_distance"]);
    for (w, (l2, term)) in report
        .axis
        .windows(2)
        .zip(report.l2_distances.iter().zip(&report.terminal_distances))
    {
        table.push(vec![
            Cell::Float(w[0]),
            Cell::Float(w[1]),
            Cell::Float(*l2),
            Cell::Float(*term),
        ]);
    }
    emit(&table, "convergence.csv", out, manifest)?;
    if !quiet {
        println!(
            "converge: {} runs, monotone {}, complete {}",
            report.axis.len(),
            report.monotone_cauchy,
            report.complete
        );
    }
    Ok(if report.complete { EXIT_OK } else { EXIT_NUMERICAL })
}

fn cmd_uniqueness(
    run: &ParsedRun,
    out: &Path,
    quiet: bool,
    manifest: &mut Manifest,
) -> Result<i32, CliError> {
    let report =
        uniqueness_experiment(&run.solver, run.study.delta0, run.study.m_level)?;
    let mut table = Table::new([
        "delta0",
        "sup_distance",
        "gronwall_integral",
        "gronwall_weight",
        "m_level",
        "tau_m",
        "identical",
    ]);
    table.push(vec![
        Cell::Float(run.study.delta0),
        Cell::Float(report.sup_distance),
        Cell::Float(report.gronwall_integral),
        Cell::Float(report.gronwall_weight),
        Cell::Float(report.m_level),
        Cell::Float(report.tau_m),
        Cell::Int(report.identical as i64),
    ]);
    emit(&table, "uniqueness.csv", out, manifest)?;
    if !quiet {
        println!(
            "uniqueness: sup distance {:.3e}, identical {}",
            report.sup_distance, report.identical
        );
    }
    Ok(EXIT_OK)
}

fn cmd_moments(
    run: &ParsedRun,
    out: &Path,
    quiet: bool,
    manifest: &mut Manifest,
) -> Result<i32, CliError> {
    let report = moment_study(&run.solver, run.study.paths)?;
    let mut table = Table::new(["statistic", "mean", "se", "paths"]);
    for (name, est) in [
        ("sup_h2", report.sup_h2),
        ("int_v2", report.int_v2),
        ("int_xp", report.int_xp),
    ] {
        table.push(vec![
            Cell::Text(name.to_string()),
            Cell::Float(est.mean),
            Cell::Float(est.se),
            Cell::Int(report.paths as i64),
        ]);
    }
    emit(&table, "moments.csv", out, manifest)?;
    if !quiet {
        println!(
            "moments: {} paths, E sup |u|^2 = {:.6e} (se {:.1e})",
            report.paths, report.sup_h2.mean, report.sup_h2.se
        );
    }
    Ok(EXIT_OK)
}

fn cmd_occupancy(
    run: &ParsedRun,
    out: &Path,
    quiet: bool,
    manifest: &mut Manifest,
) -> Result<i32, CliError> {
    let report = occupancy_study(&run.solver, &run.study.r_values)?;
    let mut table = Table::new(["R", "occupancy", "occ_rp"]);
    for ((r, occ), rp) in
        report.r_values.iter().zip(&report.occupancy).zip(&report.occ_rp)
    {
        table.push(vec![Cell::Float(*r), Cell::Float(*occ), Cell::Float(*rp)]);
    }
    emit(&table, "occupancy.csv", out, manifest)?;
    if !quiet {
        println!(
            "occupancy: {} radii, monotone {}",
            report.r_values.len(),
            report.monotone
        );
    }
    Ok(EXIT_OK)
}

fn cmd_seminorm(
    run: &ParsedRun,
    out: &Path,
    quiet: bool,
    manifest: &mut Manifest,
) -> Result<i32, CliError> {
    let cfg = &run.solver;
    cfg.validate()?;
    let basis = cfg.basis()?;
    let trajs = simulate_ensemble(cfg, run.study.paths)?;
    let first = &trajs[0];
    let alpha = run.study.alpha;
    let m = run.study.m;
    let h_semi = gagliardo_seminorm(&basis, first, alpha, m, NormKind::H)?;
    let dual_semi = gagliardo_seminorm(&basis, first, alpha, m, NormKind::DualV)?;
    let (p, k) = cfg.operator.as_ref().map_or((2.0, 1), |o| (o.p, o.k));
    let increments =
        increment_statistics(&basis, &trajs, &run.study.lags, p, k, cfg.seed)?;

    let mut table = Table::new(["alpha", "m", "h_seminorm", "dual_seminorm", "epsilon"]);
    table.push(vec![
        Cell::Float(alpha),
        Cell::Float(m),
        Cell::Float(h_semi),
        Cell::Float(dual_semi),
        Cell::Float(increments.epsilon),
    ]);
    emit(&table, "seminorm.csv", out, manifest)?;

    let mut inc = Table::new(["lag", "mean", "se"]);
    for ((lag, mean), se) in
        increments.lags.iter().zip(&increments.means).zip(&increments.ses)
    {
        inc.push(vec![Cell::Float(*lag), Cell::Float(*mean), Cell::Float(*se)]);
    }
    emit(&inc, "increments.csv", out, manifest)?;
    if !quiet {
        println!("seminorm: alpha {alpha}, m {m}, value {h_semi:.6e}");
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::Manifest;

    const BASE: &str = "T = 0.25\ndt = 0.0625\nn = 4\nseed = 11\noperator.name = p_laplacian\n";

    fn parsed(extra: &str) -> ParsedRun {
        parse_config(&format!("{BASE}{extra}")).unwrap()
    }

    #[test]
    fn simulate_emits_stable_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let run = parsed("");
        let code = run_command(Command::Simulate, &run, dir.path(), true).unwrap();
        assert_eq!(code, EXIT_OK);
        let m1 =
            Manifest::parse(&std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap())
                .unwrap();
        assert_eq!(m1.outputs.len(), 2);
        let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
        assert!(traj.starts_with("t,coeff_1,coeff_2,coeff_3,coeff_4,H_norm,V_norm,X_norm,jump_flag\n"));

        let dir2 = tempfile::tempdir().unwrap();
        run_command(Command::Simulate, &run, dir2.path(), true).unwrap();
        let m2 =
            Manifest::parse(&std::fs::read_to_string(dir2.path().join("manifest.txt")).unwrap())
                .unwrap();
        assert_eq!(m1.stable_digest(), m2.stable_digest());
    }

    #[test]
    fn zero_config_rows_are_zero() {
        let dir = tempfile::tempdir().unwrap();
        let run = parsed("");
        run_command(Command::Simulate, &run, dir.path(), true).unwrap();
        let table = Table::parse_csv(
            &std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap(),
        )
        .unwrap();
        for row in &table.rows[1..] {
            for cell in &row[1..] {
                match cell {
                    Cell::Float(v) => assert_eq!(*v, 0.0),
                    Cell::Int(v) => assert_eq!(*v, 0),
                    other => panic!("unexpected {other:?}"),
                }
            }
        }
    }

    #[test]
    fn converge_rows_follow_the_axis() {
        let dir = tempfile::tempdir().unwrap();
        let run = parsed("study.values = 4,8,8\n");
        let code = run_command(Command::Converge, &run, dir.path(), true).unwrap();
        assert_eq!(code, EXIT_OK);
        let table = Table::parse_csv(
            &std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap(),
        )
        .unwrap();
        assert_eq!(table.rows.len(), 2);
        // duplicated axis tail: identical runs, exactly zero distance
        match (&table.rows[1][2], &table.rows[1][3]) {
            (Cell::Float(l2), Cell::Float(term)) => {
                assert_eq!(*l2, 0.0);
                assert_eq!(*term, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn uniqueness_zero_delta_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let run = parsed("study.delta0 = 0.0\n");
        run_command(Command::Uniqueness, &run, dir.path(), true).unwrap();
        let table = Table::parse_csv(
            &std::fs::read_to_string(dir.path().join("uniqueness.csv")).unwrap(),
        )
        .unwrap();
        assert_eq!(table.rows[0][1], Cell::Float(0.0));
        assert_eq!(table.rows[0][6], Cell::Int(1));
    }

    #[test]
    fn moments_and_seminorm_emit_their_schemas() {
        let dir = tempfile::tempdir().unwrap();
        let run = parsed("study.paths = 3\nnoise.q0 = 0.01\ninitial.kind = mode\n");
        run_command(Command::Moments, &run, dir.path(), true).unwrap();
        let moments = std::fs::read_to_string(dir.path().join("moments.csv")).unwrap();
        assert!(moments.starts_with("statistic,mean,se,paths\nsup_h2,"));
        run_command(Command::Seminorm, &run, dir.path(), true).unwrap();
        let semi = std::fs::read_to_string(dir.path().join("seminorm.csv")).unwrap();
        assert!(semi.starts_with("alpha,m,h_seminorm,dual_seminorm,epsilon\n"));
        let inc = std::fs::read_to_string(dir.path().join("increments.csv")).unwrap();
        assert_eq!(inc.lines().count(), 1 + run.study.lags.len());
    }

    #[test]
    fn occupancy_emits_one_row_per_radius() {
        let dir = tempfile::tempdir().unwrap();
        let run = parsed("initial.kind = mode\ninitial.amp = 0.5\nstudy.r_values = 2,4\n");
        run_command(Command::Occupancy, &run, dir.path(), true).unwrap();
        let table = Table::parse_csv(
            &std::fs::read_to_string(dir.path().join("occupancy.csv")).unwrap(),
        )
        .unwrap();
        assert_eq!(table.rows.len(), 2);
    }

    #[test]
    fn exit_codes_separate_failure_kinds() {
        let bad_cfg: CliError = ConfigError::Missing { key: "T".into() }.into();
        assert_eq!(bad_cfg.exit_code(), EXIT_CONFIG);
        let abort = CliError::Aborted("blew up".into());
        assert_eq!(abort.exit_code(), EXIT_NUMERICAL);
    }
}
