use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use breather_core::resolvent::norm_decay_report;
use breather_core::solver::{self, r_angle};
use breather_core::verify::{assumption_report, decay_profile, mode_tail, verify_solution};
use breather_core::{
    mountain_pass_constants, snapshot, Check, DualProblem, Resolvent, Solution, TimeField,
    VerificationReport,
};

use crate::config::RunConfig;
use crate::error::{CliError, EXIT_NO_CONVERGENCE, EXIT_PASS, EXIT_VERIFY_FAIL};

/// Slack of the mountain-pass level check `J >= delta`.
const LEVEL_SLACK: f64 = 1e-6;

pub const V_FILE: &str = "V.field";
pub const U_FILE: &str = "U.field";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.display().to_string(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Output {
        path: path.display().to_string(),
        source,
    })
}

/// Resolved config with a trailing `[diagnostics]` table.
fn manifest(config: &RunConfig, diagnostics: toml::Table) -> String {
    let mut table = match toml::Value::try_from(config).expect("config serializes") {
        toml::Value::Table(t) => t,
        _ => unreachable!("config is a table"),
    };
    table.insert("diagnostics".into(), toml::Value::Table(diagnostics));
    toml::to_string(&table).expect("manifest serializes")
}

/// Stage timings live apart from the reproducible artifacts.
#[derive(Default)]
struct Timings(Vec<(String, f64)>);

impl Timings {
    fn record<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((stage.to_string(), start.elapsed().as_secs_f64() * 1e3));
        out
    }

    fn csv(&self) -> String {
        let mut out = String::from("stage,wall_ms\n");
        for (stage, ms) in &self.0 {
            let _ = writeln!(out, "{stage},{ms:.3}");
        }
        out
    }
}

/// Estimated `C_R` with the mountain-pass radius and level.
#[derive(Clone, Copy, Debug)]
pub struct LevelConstants {
    pub c_r: f64,
    pub r: f64,
    pub delta: f64,
}

pub fn level_constants(problem: &DualProblem, config: &RunConfig) -> Result<LevelConstants, CliError> {
    let c_r = problem.estimate_operator_norm(
        config.verify.norm_trials,
        config.verify.norm_steps,
        config.run.seed,
    )?;
    let (r, delta) = mountain_pass_constants(c_r, problem.p_conj())?;
    Ok(LevelConstants { c_r, r, delta })
}

fn level_check(solution: &Solution, level: &LevelConstants) -> Check {
    Check::above("mountain_pass_level", solution.j_value, level.delta - LEVEL_SLACK)
}

fn spectrum_value(spectrum: &[(i64, f64)]) -> toml::Value {
    toml::Value::Array(
        spectrum
            .iter()
            .map(|&(k, n)| toml::Value::Array(vec![toml::Value::Integer(k), toml::Value::Float(n)]))
            .collect(),
    )
}

fn solution_diagnostics(
    problem: &DualProblem,
    index: usize,
    solution: &Solution,
    angles: &[f64],
    report: &VerificationReport,
) -> Result<toml::Table, CliError> {
    let mut d = toml::Table::new();
    d.insert("index".into(), toml::Value::Integer(index as i64));
    d.insert("scheme".into(), solution.scheme.name().into());
    d.insert("j_value".into(), solution.j_value.into());
    d.insert("residual".into(), solution.residual.into());
    d.insert("iterations".into(), toml::Value::Integer(solution.iterations as i64));
    d.insert("converged".into(), solution.converged.into());
    d.insert("norm_v".into(), solution.norm(problem)?.into());
    d.insert("dominant_mode".into(), toml::Value::Integer(solution.dominant_mode()));
    d.insert("spectrum".into(), spectrum_value(&solution.spectrum));
    if let Some(&t) = solution.nehari_history.last() {
        d.insert("final_nehari_t".into(), t.into());
    }
    d.insert(
        "angles_to_previous".into(),
        toml::Value::Array(angles.iter().map(|&a| a.into()).collect()),
    );
    d.insert("verification_passed".into(), report.passed().into());
    let failures: Vec<toml::Value> = report.failures().iter().map(|c| c.name.clone().into()).collect();
    d.insert("failed_checks".into(), toml::Value::Array(failures));
    Ok(d)
}

fn write_report(dir: &Path, stem: &str, report: &VerificationReport) -> Result<(), CliError> {
    write(&dir.join(format!("{stem}.txt")), report.text())?;
    write(&dir.join(format!("{stem}.csv")), report.csv())
}

fn write_solution(
    dir: &Path,
    config: &RunConfig,
    diagnostics: toml::Table,
    solution: &Solution,
    report: &VerificationReport,
) -> Result<(), CliError> {
    create_dir(dir)?;
    snapshot::write_field(dir.join(V_FILE), &solution.v)?;
    snapshot::write_field(dir.join(U_FILE), &solution.u)?;
    write(&dir.join("log.csv"), solution.log.csv())?;
    write(&dir.join("timings.csv"), solution.log.timings_csv())?;
    write_report(dir, "report", report)?;
    write(&dir.join("manifest.toml"), manifest(config, diagnostics))
}

pub fn init_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

/// Assumption checks, solve with deflation, per-solution verification.
pub fn solve(config: &RunConfig) -> Result<i32, CliError> {
    config.validate()?;
    let out = config.output.dir.clone();
    create_dir(&out)?;
    let mut timings = Timings::default();
    let problem = timings.record("setup", || config.problem())?;
    let solver_config = config.solver()?;

    let mut run_diag = toml::Table::new();
    run_diag.insert("alpha".into(), problem.alpha().into());
    run_diag.insert("time_samples".into(), toml::Value::Integer(problem.time_grid().samples() as i64));
    run_diag.insert("dual_cutoff".into(), toml::Value::Integer(problem.dual_cutoff() as i64));

    let mut assumptions = VerificationReport::default();
    let mut level = None;
    if !config.verify.quick {
        let checks = timings.record("assumptions", || {
            assumption_report(
                problem.params(),
                problem.spec(),
                problem.potential(),
                &config.assumption_options(),
            )
        })?;
        assumptions.extend(checks);
        write_report(&out, "assumptions", &assumptions)?;
        let constants = timings.record("operator_norm", || level_constants(&problem, config))?;
        run_diag.insert("c_r".into(), constants.c_r.into());
        run_diag.insert("mountain_pass_radius".into(), constants.r.into());
        run_diag.insert("mountain_pass_level".into(), constants.delta.into());
        level = Some(constants);
    }
    run_diag.insert("assumptions_passed".into(), assumptions.passed().into());

    let mut solutions: Vec<Solution> = Vec::new();
    let mut all_verified = assumptions.passed();
    let mut all_converged = true;
    for index in 1..=solver_config.solutions {
        let next = timings.record(&format!("solve_{index}"), || {
            solver::deflate_and_continue(&solutions, &problem, &solver_config)
        })?;
        let mut report = timings.record(&format!("verify_{index}"), || {
            verify_solution(
                &problem,
                &next,
                config.verify.tol,
                config.verify.test_functions,
                config.verify.test_seed,
            )
        })?;
        if let Some(level) = &level {
            report.extend([level_check(&next, level)]);
        }
        let angles = solutions
            .iter()
            .map(|prev| r_angle(&problem, &prev.v, &next.v))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(&min) = angles.iter().min_by(|a, b| a.total_cmp(b)) {
            report.extend([Check::above("angle_to_previous", min, solver_config.angle_threshold)]);
        }
        let diag = solution_diagnostics(&problem, index, &next, &angles, &report)?;
        write_solution(&out.join(format!("solution_{index}")), config, diag, &next, &report)?;
        print!("solution {index}: J = {:.12e}, residual = {:.3e}, iterations = {}\n{}", next.j_value, next.residual, next.iterations, report.text());
        all_verified &= report.passed();
        let converged = next.converged;
        all_converged &= converged;
        solutions.push(next);
        if !converged {
            break;
        }
    }

    run_diag.insert("solutions".into(), toml::Value::Integer(solutions.len() as i64));
    run_diag.insert("all_converged".into(), all_converged.into());
    run_diag.insert("all_verified".into(), all_verified.into());
    write(&out.join("manifest.toml"), manifest(config, run_diag))?;
    write(&out.join("timings.csv"), timings.csv())?;

    if !all_converged {
        eprintln!("no convergence within {} iterations; partial artifacts in {}", solver_config.max_iter, out.display());
        return Ok(EXIT_NO_CONVERGENCE);
    }
    Ok(if all_verified { EXIT_PASS } else { EXIT_VERIFY_FAIL })
}

fn check_compatible(problem: &DualProblem, field: &TimeField, path: &Path) -> Result<(), CliError> {
    let grid = problem.grid();
    let g = field.grid();
    let params = problem.params();
    let ok = g.dim() == grid.dim()
        && g.points() == grid.points()
        && g.half_width() == grid.half_width()
        && field.symmetry() == params.symmetry
        && field.period() == params.period
        && field.cutoff() == problem.dual_cutoff();
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "snapshot {} does not match the configured problem (grid, class, period or cutoff)",
            path.display()
        )))
    }
}

/// Re-runs the verification on a stored dual field.
pub fn verify(config: &RunConfig, dir: &Path, out: Option<&Path>) -> Result<i32, CliError> {
    config.validate()?;
    let problem = config.problem()?;
    let v_path = dir.join(V_FILE);
    let v = snapshot::read_field(&v_path)?;
    check_compatible(&problem, &v, &v_path)?;
    let solution = Solution::assemble(
        &problem,
        config.solver()?.scheme,
        v,
        0,
        true,
        Default::default(),
    )?;
    let mut report = verify_solution(
        &problem,
        &solution,
        config.verify.tol,
        config.verify.test_functions,
        config.verify.test_seed,
    )?;
    let u_path = dir.join(U_FILE);
    if u_path.exists() {
        let stored = snapshot::read_field(&u_path)?;
        let mut diff = 0.0f64;
        let mut scale = 0.0f64;
        for (k, uk) in solution.u.iter() {
            let other = stored.mode(k);
            for (i, z) in uk.iter().enumerate() {
                let w = other.map(|m| m[i]).unwrap_or_default();
                diff = diff.max((z - w).norm());
                scale = scale.max(z.norm());
            }
        }
        let rel = if scale > 0.0 { diff / scale } else { diff };
        report.extend([Check::below("stored_u_agreement", rel, 1e-10)]);
    }
    if !config.verify.quick {
        let level = level_constants(&problem, config)?;
        report.extend([level_check(&solution, &level)]);
    }
    let target: PathBuf = out.map(Path::to_path_buf).unwrap_or_else(|| dir.to_path_buf());
    create_dir(&target)?;
    write_report(&target, "verify_report", &report)?;
    print!("{}", report.text());
    Ok(if report.passed() { EXIT_PASS } else { EXIT_VERIFY_FAIL })
}

/// Operator-norm decay of the weighted resolvent over `1..=max_mode`.
pub fn resolvent_bench(config: &RunConfig) -> Result<i32, CliError> {
    config.validate()?;
    let params = config.params()?;
    let spec = config.spec()?;
    let alpha = params.validate(&spec)?;
    let grid = params.grid()?;
    let potential = config.potential(&params)?;
    let resolvent = Resolvent::new(&grid, spec, params.resolvent_params())?;
    let modes: Vec<i64> = (1..=config.bench.max_mode)
        .filter(|&k| params.symmetry.contains(k) && spec.check_mode(k, params.period).is_ok())
        .collect();
    let report = norm_decay_report(
        &resolvent,
        &modes,
        params.p,
        Some(potential.root_p()),
        config.bench.trials,
        config.run.seed,
        alpha,
    )?;
    let target = -alpha / 2.0;
    let mut csv = String::from("k,epsilon,norm_estimate,alpha_target\n");
    for (k, n) in &report.entries {
        let _ = writeln!(csv, "{k},{:e},{n:e},{target:e}", params.epsilon);
    }
    let _ = writeln!(csv, "slope,{:e},{:e},{target:e}", params.epsilon, report.slope);
    let out = &config.output.dir;
    create_dir(out)?;
    write(&out.join("resolvent_bench.csv"), &csv)?;
    print!("{csv}");
    Ok(if report.passes(config.verify.slope_slack) {
        EXIT_PASS
    } else {
        EXIT_VERIFY_FAIL
    })
}

/// Config for one sweep point.
pub fn sweep_point(config: &RunConfig, axis: &str, value: f64) -> Result<RunConfig, CliError> {
    let mut c = config.clone();
    match axis {
        "epsilon" => c.problem.epsilon = value,
        "p" => c.problem.p = value,
        "box" => c.problem.half_width = value,
        "k_cutoff" => {
            if !(value >= 0.0 && value.fract() == 0.0) {
                return Err(CliError::Config(format!("k_cutoff values must be nonnegative integers, got {value}")));
            }
            c.problem.cutoff = value as usize;
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown sweep axis '{other}' (expected k_cutoff, epsilon, box or p)"
            )))
        }
    }
    c.solver.solutions = 1;
    Ok(c)
}

/// Repeated single-solution solves along one parameter axis.
pub fn sweep(config: &RunConfig) -> Result<i32, CliError> {
    config.validate()?;
    let axis = config.sweep.axis.as_str();
    if config.sweep.values.is_empty() {
        return Err(CliError::Config("sweep.values is empty".into()));
    }
    let points = config
        .sweep
        .values
        .iter()
        .map(|&v| {
            let c = sweep_point(config, axis, v)?;
            c.validate()?;
            Ok((v, c))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let out = &config.output.dir;
    create_dir(out)?;
    let mut csv = String::from("axis,value,J_value,residual,iterations,converged,decay_slope,mode_tail,rel_delta_J\n");
    let mut previous: Option<f64> = None;
    let mut all_converged = true;
    for (value, c) in points {
        let problem = c.problem()?;
        let solution = solver::solve_default(&problem, &c.solver()?)?;
        let slope = decay_profile(&problem, &solution.u).map(|f| f.slope).unwrap_or(f64::NAN);
        let tail = mode_tail(&problem, &solution.v);
        let delta = previous
            .map(|j| (solution.j_value - j).abs() / j.abs())
            .unwrap_or(f64::NAN);
        previous = Some(solution.j_value);
        all_converged &= solution.converged;
        let _ = writeln!(
            csv,
            "{axis},{value:e},{:e},{:e},{},{},{slope:e},{tail:e},{delta:e}",
            solution.j_value, solution.residual, solution.iterations, solution.converged
        );
    }
    write(&out.join("sweep.csv"), &csv)?;
    write(&out.join("manifest.toml"), manifest(config, toml::Table::new()))?;
    print!("{csv}");
    Ok(if all_converged { EXIT_PASS } else { EXIT_NO_CONVERGENCE })
}
