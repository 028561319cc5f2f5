//! The `run` and `sweep` pipelines.

use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cubicavoid::{
    detect_biconjugate, first_biconjugate, fundamental_scan, integrate_cubic, shoot_bvp, verdict, CubicState,
    LieAlgebraElement,
};
use rayon::prelude::*;

use crate::config::{ConfigError, Mode, ScenarioConfig, Start, SweepConfig};
use crate::report::{
    config_hash, scan_csv, sweep_csv, trajectory_csv, write_json, BvpRecord, DetectionRecord, FailureRecord, RunReport,
    SweepReport, SweepRow, TOOL, VERSION,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Command-line overrides applied on top of the scenario file.
#[derive(Clone, Debug, Default)]
pub struct Flags {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub tol_scale: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(io_at(path))
}

/// Loads the scenario and folds the flags into it, so the echoed config
/// reproduces the run without them.
pub fn effective_config(path: &Path, flags: &Flags) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(mode) = flags.mode {
        cfg.mode = mode;
    }
    if let Some(seed) = flags.seed {
        cfg.tolerances.seed = seed;
    }
    if let Some(scale) = flags.tol_scale {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(ConfigError { path: "--tol-scale".into(), message: "must be positive and finite".into() });
        }
        cfg.scale_tolerances(scale);
    }
    Ok(cfg)
}

/// A finished single run.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub exit_code: i32,
    /// Shooting solution, reused as the next warm start in sweeps.
    pub solved: Option<CubicState>,
}

/// Runs one ivp, bvp or check scenario into `out`.
pub fn execute(cfg: &ScenarioConfig, out: &Path, warm: Option<&CubicState>) -> Result<RunOutcome, CliError> {
    if cfg.mode == Mode::Sweep {
        return Err(
            ConfigError { path: "mode".into(), message: "sweep runs go through the sweep driver".into() }.into()
        );
    }
    let scenario = cfg.validate()?;
    std::fs::create_dir_all(out).map_err(io_at(out))?;
    let clock = Instant::now();
    let mut report = RunReport::new(cfg);
    let mut solved = None;
    let (model, spec) = (&scenario.model, &scenario.spec);

    let result = (|| -> Result<(), CliError> {
        let init = match &scenario.start {
            Start::Initial(s) => s.clone(),
            Start::Boundary(bd) => {
                let zero = LieAlgebraElement::zeros(model.dim());
                let guess = warm.map_or((&zero, &zero), |w| (&w.xi1, &w.xi2));
                let t = Instant::now();
                let sol = shoot_bvp(model, spec, bd, guess, &scenario.bvp);
                report.timing.bvp_s = t.elapsed().as_secs_f64();
                let sol = match sol {
                    Ok(sol) => sol,
                    Err(e) => {
                        report.failure = Some(FailureRecord::from(&e));
                        return Ok(());
                    }
                };
                report.bvp = Some(BvpRecord {
                    residual: sol.residual,
                    iterations: sol.iterations,
                    attempt: sol.attempt,
                    xi1: sol.initial.xi1.as_slice().to_vec(),
                    xi2: sol.initial.xi2.as_slice().to_vec(),
                });
                solved = Some(sol.initial.clone());
                sol.initial
            }
        };

        let t = Instant::now();
        let traj = match integrate_cubic(model, spec, &init, scenario.a, scenario.b, scenario.nodes) {
            Ok(traj) => traj,
            Err(e) => {
                report.failure = Some(FailureRecord::from(&e));
                return Ok(());
            }
        };
        report.timing.integrate_s = t.elapsed().as_secs_f64();
        write(&out.join("trajectory.csv"), &trajectory_csv(model, spec, &traj))?;
        report.outputs.push("trajectory.csv".into());

        if scenario.mode == Mode::Check {
            let t = Instant::now();
            let scan = match fundamental_scan(model, spec, &traj) {
                Ok(scan) => scan,
                Err(e) => {
                    report.failure = Some(FailureRecord::from(&e));
                    return Ok(());
                }
            };
            let found = detect_biconjugate(&scan, &scenario.detect);
            report.timing.scan_s = t.elapsed().as_secs_f64();
            report.verdict = Some(verdict(&scan, &found).to_string());
            report.first_biconjugate = first_biconjugate(&found);
            report.min_sv_ratio = Some(scan.min_sv_ratio(scenario.detect.burn_in));
            report.detections = found.iter().map(DetectionRecord::from).collect();
            write(&out.join("scan.csv"), &scan_csv(&scan))?;
            report.outputs.push("scan.csv".into());
        }
        Ok(())
    })();
    result?;

    let exit_code = if report.failure.is_some() {
        report.status = "failed";
        EXIT_NUMERIC
    } else {
        EXIT_OK
    };
    report.timing.total_s = clock.elapsed().as_secs_f64();
    report.outputs.push("report.json".into());
    let path = out.join("report.json");
    write_json(&path, &report).map_err(io_at(&path))?;
    Ok(RunOutcome { report, exit_code, solved })
}

/// One check-mode run per value of the scalar at `parameter`, each in its
/// own `value_NNN` subdirectory, summarised in `sweep.csv`.
///
/// Boundary scenarios run in order so each shot starts from the previous
/// solution; initial-value scenarios run in parallel.
pub fn sweep(cfg: &ScenarioConfig, parameter: &str, values: &[f64], out: &Path) -> Result<i32, CliError> {
    if values.is_empty() {
        return Err(ConfigError { path: "--values".into(), message: "at least one value is required".into() }.into());
    }
    cfg.with_parameter(parameter, values[0])?;
    let mut echo = cfg.clone();
    echo.mode = Mode::Sweep;
    echo.sweep = Some(SweepConfig { parameter: parameter.to_string(), values: values.to_vec() });
    echo.validate()?;
    std::fs::create_dir_all(out).map_err(io_at(out))?;
    let clock = Instant::now();

    let child = |value: f64| -> Result<ScenarioConfig, ConfigError> {
        let mut c = cfg.with_parameter(parameter, value)?;
        c.mode = Mode::Check;
        c.sweep = None;
        Ok(c)
    };
    let row = |i: usize, value: f64, warm: Option<&CubicState>| -> Result<(SweepRow, Option<CubicState>), CliError> {
        let directory = format!("value_{i:03}");
        let failed = |verdict: &str| SweepRow {
            value,
            verdict: verdict.to_string(),
            first_biconjugate: None,
            min_sv_ratio: None,
            directory: directory.clone(),
        };
        let c = match child(value) {
            Ok(c) => c,
            Err(_) => return Ok((failed("Invalid"), None)),
        };
        match execute(&c, &out.join(&directory), warm) {
            Ok(run) if run.exit_code == EXIT_OK => {
                let r = &run.report;
                let row = SweepRow {
                    value,
                    verdict: r.verdict.clone().unwrap_or_default(),
                    first_biconjugate: r.first_biconjugate,
                    min_sv_ratio: r.min_sv_ratio,
                    directory: directory.clone(),
                };
                Ok((row, run.solved))
            }
            Ok(_) => Ok((failed("Failed"), None)),
            Err(CliError::Config(_)) => Ok((failed("Invalid"), None)),
            Err(e) => Err(e),
        }
    };

    let rows: Vec<SweepRow> = if cfg.boundary.is_some() {
        let mut rows = Vec::with_capacity(values.len());
        let mut warm: Option<CubicState> = None;
        for (i, &value) in values.iter().enumerate() {
            let (r, solved) = row(i, value, warm.as_ref())?;
            if solved.is_some() {
                warm = solved;
            }
            rows.push(r);
        }
        rows
    } else {
        values.par_iter().enumerate().map(|(i, &v)| row(i, v, None).map(|r| r.0)).collect::<Result<_, _>>()?
    };

    write(&out.join("sweep.csv"), &sweep_csv(&rows))?;
    let report = SweepReport {
        tool: TOOL,
        version: VERSION,
        config_hash: config_hash(&echo),
        config: echo,
        parameter: parameter.to_string(),
        rows,
        total_s: clock.elapsed().as_secs_f64(),
    };
    let path = out.join("report.json");
    write_json(&path, &report).map_err(io_at(&path))?;
    Ok(EXIT_OK)
}

/// `cubicavoid run`: dispatches on the (possibly overridden) mode.
pub fn run_command(config: &Path, out: &Path, flags: &Flags) -> Result<i32, CliError> {
    let cfg = effective_config(config, flags)?;
    if cfg.mode == Mode::Sweep {
        cfg.validate()?;
        let s = cfg.sweep.clone().expect("validated sweep section");
        return sweep(&cfg, &s.parameter, &s.values, out);
    }
    let run = execute(&cfg, out, None)?;
    if let Some(f) = &run.report.failure {
        eprintln!("numerical failure ({}): {}", f.kind, f.message);
    }
    Ok(run.exit_code)
}

/// `cubicavoid sweep`: the parameter and values come from the command line.
pub fn sweep_command(
    config: &Path,
    parameter: &str,
    values: &[f64],
    out: &Path,
    flags: &Flags,
) -> Result<i32, CliError> {
    let cfg = effective_config(config, flags)?;
    sweep(&cfg, parameter, values, out)
}
