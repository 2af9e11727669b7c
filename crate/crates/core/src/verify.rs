use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::{DualProblem, Potential, ProblemParams};
use crate::error::{check_len, Error, Result};
use crate::grid::SpaceGrid;
use crate::resolvent::{
    admissible_exponents, duality_power, least_squares_slope, norm_decay_report, shift,
    shifted_symbol, OperatorSpec, Resolvent,
};
use crate::solver::Solution;
use crate::symmetry::SymmetryClass;
use crate::time::{mixed_norm, TimeField, TimeGrid};

/// One verification entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Recorded for information only; never fails a report.
    pub informational: bool,
}

impl Check {
    /// Passes when `value < tolerance`.
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value < tolerance,
            informational: false,
        }
    }

    /// Passes when `value > bound`.
    pub fn above(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance: bound,
            passed: value > bound,
            informational: false,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 1.0,
            passed: ok,
            informational: false,
        }
    }

    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance: f64::NAN,
            passed: true,
            informational: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        self.checks.extend(checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.informational || c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| !c.informational && !c.passed)
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("name,value,tolerance,pass\n");
        for c in &self.checks {
            let pass = if c.informational {
                "info"
            } else if c.passed {
                "true"
            } else {
                "false"
            };
            let _ = writeln!(out, "{},{:e},{:e},{}", c.name, c.value, c.tolerance, pass);
        }
        out
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.informational {
                "INFO"
            } else if c.passed {
                "PASS"
            } else {
                "FAIL"
            };
            let _ = writeln!(
                out,
                "{status:4}  {:<40} value = {:e}  tolerance = {:e}",
                c.name, c.value, c.tolerance
            );
        }
        let _ = writeln!(
            out,
            "overall: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        );
        out
    }
}

/// Spatial test profile `phi` paired with the temporal factor `e^{-ik w t}`.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub k: i64,
    pub phi: Vec<f64>,
    /// `(L - kappa^2) phi`.
    pub shifted: Vec<f64>,
}

impl TestFunction {
    /// Bump `exp(-r^2/sigma^2) (1 - r^2/rho^2)^3_+` with `sigma = rho / 2`,
    /// supported at distance at least `2h` from the box faces.
    pub fn bump(
        grid: &SpaceGrid,
        spec: &OperatorSpec,
        period: f64,
        k: i64,
        center: [f64; 3],
        radius: f64,
    ) -> Result<Self> {
        let limit = grid.half_width() - 2.0 * grid.spacing();
        for c in &center[..grid.dim()] {
            if c.abs() + radius > limit {
                return Err(Error::SupportViolation(format!(
                    "ball of radius {radius} at {:?} leaves the box interior [-{limit}, {limit}]",
                    &center[..grid.dim()]
                )));
            }
        }
        if !(radius > 0.0) {
            return Err(Error::SupportViolation(format!(
                "support radius must be positive, got {radius}"
            )));
        }
        let sigma2 = 0.25 * radius * radius;
        let phi = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                let r2: f64 = (0..grid.dim()).map(|a| (x[a] - center[a]).powi(2)).sum();
                let cut = 1.0 - r2 / (radius * radius);
                if cut > 0.0 {
                    (-r2 / sigma2).exp() * cut.powi(3)
                } else {
                    0.0
                }
            })
            .collect();
        Self::from_profile(grid, spec, period, k, phi)
    }

    /// Arbitrary profile; `(L - kappa^2) phi` is applied spectrally.
    pub fn from_profile(
        grid: &SpaceGrid,
        spec: &OperatorSpec,
        period: f64,
        k: i64,
        phi: Vec<f64>,
    ) -> Result<Self> {
        check_len(grid.len(), phi.len())?;
        let symbol = shifted_symbol(grid, spec, shift(k, period));
        let shifted = grid.apply_multiplier_real(&symbol, &phi)?;
        Ok(Self { k, phi, shifted })
    }

    /// `a self + b other` for test functions of the same frequency.
    pub fn combine(&self, a: f64, other: &TestFunction, b: f64) -> Result<Self> {
        if self.k != other.k {
            return Err(Error::InvalidParameter(format!(
                "cannot combine test functions of frequencies {} and {}",
                self.k, other.k
            )));
        }
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        Ok(Self {
            k: self.k,
            phi: mix(&self.phi, &other.phi),
            shifted: mix(&self.shifted, &other.shifted),
        })
    }
}

/// Randomized bumps with centers in the inner quarter of the box, radii in
/// `[2, 6]`, and frequencies from `I_s ∩ [-K, K]`.
pub fn random_test_functions(
    problem: &DualProblem,
    count: usize,
    seed: u64,
) -> Result<Vec<TestFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = problem.grid();
    let modes = problem.params().modes();
    let quarter = 0.25 * grid.half_width();
    let max_radius = (grid.half_width() - 2.0 * grid.spacing() - quarter).min(6.0);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let k = modes[rng.gen_range(0..modes.len())];
        let mut center = [0.0; 3];
        for c in center.iter_mut().take(grid.dim()) {
            *c = rng.gen_range(-quarter..quarter);
        }
        let radius = rng.gen_range(2.0f64.min(max_radius)..=max_radius);
        out.push(TestFunction::bump(
            grid,
            problem.spec(),
            problem.params().period,
            k,
            center,
            radius,
        )?);
    }
    Ok(out)
}

/// Both sides of the weak formulation for one test function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakFormValue {
    /// `int int U (d_tt + L) Phi`.
    pub lhs: Complex64,
    /// `int int Q |U|^{p-2} U Phi`.
    pub rhs: Complex64,
    /// `|lhs - rhs|` over the Cauchy-Schwarz scale.
    pub residual: f64,
}

/// Precomputed time-Fourier data of `U` and of `Q |U|^{p-2} U`.
#[derive(Clone, Debug)]
pub struct WeakForm {
    u: TimeField,
    nonlinearity: TimeField,
    period: f64,
    /// Space-time `L^2` norms over `T`, summed over all modes.
    u_norm: f64,
    nonlinearity_norm: f64,
}

impl WeakForm {
    /// The nonlinearity is sampled on a time grid four times finer than the
    /// solver's before its modes are taken.
    pub fn new(problem: &DualProblem, u: &TimeField) -> Result<Self> {
        let grid = problem.grid();
        let params = problem.params();
        let fine = TimeGrid::for_symmetry(
            params.symmetry,
            params.period,
            4 * problem.time_grid().samples(),
        )?;
        let samples = u.synthesize_uniform(&fine)?;
        let p = params.p;
        let q = problem.potential().values();
        let m = fine.samples();
        let mut values = samples.into_values();
        for (x, chunk) in values.chunks_mut(m).enumerate() {
            for v in chunk.iter_mut() {
                *v = q[x] * duality_power(*v, p);
            }
        }
        let nl = crate::time::Samples::new(fine, grid.len(), values)?;
        let nonlinearity = TimeField::analyze(&nl, grid, SymmetryClass::General, u.cutoff())?;
        let total = |f: &TimeField| {
            f.iter()
                .map(|(_, m)| m.iter().map(|z| z.norm_sqr()).sum::<f64>())
                .sum::<f64>()
                .sqrt()
                * grid.cell_volume().sqrt()
        };
        Ok(Self {
            u: u.clone(),
            u_norm: total(u),
            nonlinearity_norm: total(&nonlinearity),
            nonlinearity,
            period: params.period,
        })
    }

    pub fn evaluate(&self, phi: &TestFunction) -> Result<WeakFormValue> {
        let grid = self.u.grid();
        check_len(grid.len(), phi.phi.len())?;
        let h = grid.cell_volume();
        let zero = Complex64::default();
        let pair = |mode: Option<&[Complex64]>, f: &[f64]| -> Complex64 {
            match mode {
                Some(m) => m.iter().zip(f).map(|(z, x)| z * x).sum::<Complex64>() * h,
                None => zero,
            }
        };
        let l = pair(self.u.mode(phi.k), &phi.shifted);
        let r = pair(self.nonlinearity.mode(phi.k), &phi.phi);
        let (u_norm, n_norm) = (self.u_norm, self.nonlinearity_norm);
        let lhs = l * self.period;
        let rhs = r * self.period;
        let phi_norm = grid.lp_norm(&phi.phi, 2.0);
        let shifted_norm = grid.lp_norm(&phi.shifted, 2.0);
        let scale = self.period * (u_norm * shifted_norm + n_norm * phi_norm);
        let diff = (lhs - rhs).norm();
        let residual = if scale > 0.0 { diff / scale } else { 0.0 };
        Ok(WeakFormValue { lhs, rhs, residual })
    }

    /// `lhs - rhs`, linear in the test function.
    pub fn difference(&self, phi: &TestFunction) -> Result<Complex64> {
        let v = self.evaluate(phi)?;
        Ok(v.lhs - v.rhs)
    }
}

/// Normalized weak-form residual of `U` against one test function.
pub fn weak_form_residual(problem: &DualProblem, u: &TimeField, phi: &TestFunction) -> Result<f64> {
    Ok(WeakForm::new(problem, u)?.evaluate(phi)?.residual)
}

/// Pointwise and integral identities satisfied at critical points.
/// The pointwise duality checks are residuals of the critical-point equation,
/// so their tolerance is `max(base, 10 tol)` for a solve stopped at `tol`.
pub fn identity_audit(problem: &DualProblem, solution: &Solution, tol: f64) -> Result<Vec<Check>> {
    let grid = problem.grid();
    let params = problem.params();
    let pc = problem.p_conj();
    let v = &solution.v;
    let vs = problem.samples(v)?;
    let us = problem.samples(&solution.u)?;
    let rv = problem.big_r(v)?;
    let rs = problem.samples(&rv)?;
    let forward = problem.duality_forward(&vs);
    let root = problem.potential().root_p();
    let m = problem.time_grid().samples();
    let mut checks = Vec::new();

    let max_rel = |a: &[f64], b: &[f64]| {
        let scale = b.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        let diff = a.iter().zip(b).fold(0.0f64, |s, (x, y)| s.max((x - y).abs()));
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    };

    let weighted_u: Vec<f64> = us
        .values()
        .chunks(m)
        .enumerate()
        .flat_map(|(x, c)| c.iter().map(move |u| root[x] * u))
        .collect();
    checks.push(Check::below(
        "duality_weighted_u",
        max_rel(&weighted_u, forward.values()),
        (10.0 * tol).max(1e-10),
    ));
    checks.push(Check::below(
        "reconstruction_identity",
        max_rel(&weighted_u, rs.values()),
        1e-10,
    ));
    let back = problem.duality_forward(&problem.duality_inverse(&rs));
    checks.push(Check::below(
        "duality_round_trip",
        max_rel(back.values(), rs.values()),
        1e-10,
    ));
    let q = problem.potential().values();
    let rp = problem.potential().root_p();
    let p = params.p;
    let mut lhs = Vec::with_capacity(us.values().len());
    let mut rhs = Vec::with_capacity(us.values().len());
    for (x, (uc, vc)) in us.values().chunks(m).zip(vs.values().chunks(m)).enumerate() {
        for (u, vv) in uc.iter().zip(vc) {
            lhs.push(q[x] * duality_power(*u, p));
            rhs.push(rp[x] * vv);
        }
    }
    checks.push(Check::below(
        "critical_nonlinearity",
        max_rel(&lhs, &rhs),
        (10.0 * tol).max(1e-8),
    ));

    let power = vs.power_integral(grid, pc);
    let j = power / pc - 0.5 * v.pairing(&rv);
    let gradient = problem.gradient(v)?;
    let dj_v = gradient.pairing(v);
    let ps_rhs = (1.0 - 2.0 / pc) * power;
    let ps_err = ((dj_v - 2.0 * j) - ps_rhs).abs() / ps_rhs.abs().max(f64::MIN_POSITIVE);
    checks.push(Check::below("palais_smale_identity", ps_err, 1e-10));

    let norm_v = power.powf(1.0 / pc);
    let u_mixed = mixed_norm(&us, grid, params.q, params.p)?;
    let bound = problem.potential().norm().powf(1.0 / p) * u_mixed;
    checks.push(Check::above(
        "unboundedness_margin",
        bound - norm_v.powf(pc - 1.0),
        0.0,
    ));
    checks.push(Check::below("nehari_identity", dj_v.abs() / power, 1e-8));

    let sym_err = symmetry_residual(&solution.u).max(symmetry_residual(v));
    checks.push(Check::below("symmetry_residual", sym_err, 1e-12));
    Ok(checks)
}

/// Largest deviation of a field from its own symmetry projection, relative.
pub fn symmetry_residual(field: &TimeField) -> f64 {
    let projected = field.project(field.symmetry());
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for ((_, a), (_, b)) in field.iter().zip(projected.iter()) {
        for (x, y) in a.iter().zip(b) {
            diff = diff.max((x - y).norm());
            scale = scale.max(x.norm());
        }
    }
    if scale > 0.0 {
        diff / scale
    } else {
        0.0
    }
}

/// Least-squares radial decay exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub residual: f64,
}

/// Fit `log(radial mean of f) ~ slope log r` over the annulus `[L/4, L/2]`.
pub fn decay_fit(grid: &SpaceGrid, values: &[f64]) -> Result<DecayFit> {
    check_len(grid.len(), values.len())?;
    let inner = 0.25 * grid.half_width();
    let outer = 0.5 * grid.half_width();
    let h = grid.spacing();
    let bins = ((outer - inner) / h).ceil() as usize;
    let mut sum = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    let mut signal = 0.0f64;
    for (i, &f) in values.iter().enumerate() {
        let r = grid.radius(i);
        if r < inner || r >= outer {
            continue;
        }
        let b = (((r - inner) / h) as usize).min(bins - 1);
        sum[b] += f.abs();
        count[b] += 1;
        signal = signal.max(f.abs());
    }
    if signal < 1e-12 {
        return Err(Error::NoDecaySignal);
    }
    let points: Vec<(f64, f64)> = (0..bins)
        .filter(|&b| count[b] > 0 && sum[b] > 0.0)
        .map(|b| {
            let r = inner + (b as f64 + 0.5) * h;
            (r.ln(), (sum[b] / count[b] as f64).ln())
        })
        .collect();
    let (slope, residual) = least_squares_slope(&points);
    Ok(DecayFit { slope, residual })
}

/// Decay of `x -> ||U(., x)||_{L^p(T)}`.
pub fn decay_profile(problem: &DualProblem, u: &TimeField) -> Result<DecayFit> {
    let samples = problem.samples(u)?;
    decay_fit(problem.grid(), &samples.time_norms(problem.p()))
}

/// Options of the assumption checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssumptionOptions {
    /// Largest frequency in the operator-norm decay fit.
    pub decay_modes: i64,
    pub trials: usize,
    pub seed: u64,
    /// Allowed excess of the fitted slope over `-alpha/2`.
    pub slope_slack: f64,
}

impl Default for AssumptionOptions {
    fn default() -> Self {
        Self {
            decay_modes: 15,
            trials: 16,
            seed: 1,
            slope_slack: 0.15,
        }
    }
}

/// Runtime checks of exponent admissibility, operator-norm decay, the weight,
/// and positivity of the quadratic form on trial fields.
pub fn assumption_report(
    params: &ProblemParams,
    spec: &OperatorSpec,
    potential: &Potential,
    options: &AssumptionOptions,
) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let admissible = admissible_exponents(params.dim, spec, params.p)
        .and_then(|range| range.alpha(params.q).map(|a| (range, a)));
    let alpha = match admissible {
        Ok((range, alpha)) => {
            checks.push(Check::flag("exponents_admissible", true));
            checks.push(Check::info("q_min", range.q_min));
            checks.push(Check::info("q_max", range.q_max));
            checks.push(Check::info("alpha", alpha));
            alpha
        }
        Err(_) => {
            checks.push(Check::flag("exponents_admissible", false));
            return Ok(checks);
        }
    };
    let trivial = potential.is_trivial();
    checks.push(Check::flag("weight_nontrivial", !trivial));
    checks.push(Check::info("weight_norm", potential.norm()));
    let grid = params.grid()?;
    let edge = (0..grid.len())
        .filter(|&i| {
            let idx = grid.indices(i);
            idx[..grid.dim()].iter().any(|&j| j == 0)
        })
        .map(|i| potential.values()[i])
        .fold(0.0f64, f64::max);
    if potential.max() > 0.0 {
        checks.push(Check::info("weight_edge_ratio", edge / potential.max()));
    }

    let resolvent = Resolvent::new(&grid, *spec, params.resolvent_params())?;
    let decay_modes: Vec<i64> = (1..=options.decay_modes)
        .filter(|&k| params.symmetry.contains(k) && spec.check_mode(k, params.period).is_ok())
        .collect();
    let report = norm_decay_report(
        &resolvent,
        &decay_modes,
        params.p,
        Some(potential.root_p()),
        options.trials,
        options.seed,
        alpha,
    )?;
    checks.push(Check::below(
        "operator_norm_decay_slope",
        report.slope,
        -alpha / 2.0 + options.slope_slack,
    ));
    checks.push(Check::info("operator_norm_decay_fit_residual", report.residual));

    let problem = DualProblem::new(params.clone(), *spec, potential.clone())?;
    let trials: Vec<(i64, Vec<f64>)> = params
        .modes()
        .into_iter()
        .filter(|&k| k > 0)
        .map(|k| (k, problem.default_a3_trial(k)))
        .collect();
    for (k, value) in problem.check_a3(&trials)? {
        checks.push(Check::above(format!("positivity_mode_{k}"), value, 0.0));
    }
    Ok(checks)
}

/// Weak-form residuals over a family of test functions.
pub fn weak_form_checks(
    problem: &DualProblem,
    u: &TimeField,
    tests: &[TestFunction],
) -> Result<(Vec<f64>, Check)> {
    let weak = WeakForm::new(problem, u)?;
    let residuals = tests
        .iter()
        .map(|t| weak.evaluate(t).map(|v| v.residual))
        .collect::<Result<Vec<_>>>()?;
    let worst = residuals.iter().fold(0.0f64, |m, &r| m.max(r));
    let tol = (5.0 * problem.params().epsilon).max(1e-6);
    Ok((residuals, Check::below("weak_form_max_residual", worst, tol)))
}

/// Relative size of the nonlinearity's modes above the operator cutoff.
pub fn mode_tail(problem: &DualProblem, v: &TimeField) -> f64 {
    let cutoff = problem.params().cutoff as i64;
    let w = problem.potential().root_p();
    let grid = problem.grid();
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for (k, vk) in v.iter() {
        let n = (grid.cell_volume() * vk.iter().zip(w).map(|(z, a)| (z * a).norm_sqr()).sum::<f64>()).sqrt();
        if k.abs() <= cutoff {
            inside = inside.max(n);
        } else {
            outside = outside.max(n);
        }
    }
    if inside > 0.0 {
        outside / inside
    } else {
        0.0
    }
}

/// Full post-hoc verification of one solution.
pub fn verify_solution(
    problem: &DualProblem,
    solution: &Solution,
    tol: f64,
    test_count: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::default();
    report.extend([
        Check::below("critical_point_residual", solution.residual, tol),
        Check::above("functional_value", solution.j_value, 0.0),
    ]);
    report.extend(identity_audit(problem, solution, tol)?);
    let tests = random_test_functions(problem, test_count, seed)?;
    let (_, weak) = weak_form_checks(problem, &solution.u, &tests)?;
    report.extend([weak]);
    let energies = solution.u.mode_norms(2.0);
    let top = energies.iter().fold(0.0f64, |m, (_, n)| m.max(*n));
    let active = energies
        .iter()
        .filter(|(k, n)| *k > 0 && *n > 1e-6 * top)
        .count();
    if problem.params().symmetry.uses_sine() {
        report.extend([Check::above("active_modes", active as f64, 1.0)]);
    } else {
        report.extend([Check::info("active_modes", active as f64)]);
    }
    match decay_profile(problem, &solution.u) {
        Ok(fit) => report.extend([
            Check::info("decay_slope", fit.slope),
            Check::info("decay_slope_expected", (1.0 - problem.grid().dim() as f64) / 2.0),
        ]),
        Err(_) => report.extend([Check::info("decay_slope", f64::NAN)]),
    }
    report.extend([Check::info("mode_tail", mode_tail(problem, &solution.v))]);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bumps_must_stay_inside_the_box() {
        let grid = SpaceGrid::new(2, 8.0, 32).unwrap();
        let lap = OperatorSpec::laplacian();
        assert!(TestFunction::bump(&grid, &lap, 1.0, 1, [6.0, 0.0, 0.0], 2.0).is_err());
        assert!(TestFunction::bump(&grid, &lap, 1.0, 1, [0.0, 0.0, 0.0], 0.0).is_err());
        let a = TestFunction::bump(&grid, &lap, 1.0, 1, [1.0, -1.0, 0.0], 2.0).unwrap();
        let b = TestFunction::bump(&grid, &lap, 1.0, 2, [0.0, 0.0, 0.0], 2.0).unwrap();
        assert!(a.combine(1.0, &b, 1.0).is_err());
        let twice = a.combine(1.0, &a, 1.0).unwrap();
        for (x, y) in twice.shifted.iter().zip(&a.shifted) {
            assert!((x - 2.0 * y).abs() < 1e-14);
        }
    }

    #[test]
    fn decay_fit_recovers_a_power_law() {
        let grid = SpaceGrid::new(2, 32.0, 128).unwrap();
        let values: Vec<f64> = grid.radii().iter().map(|r| (1.0 + r).powf(-1.5) * 1e3).collect();
        let fit = decay_fit(&grid, &values).unwrap();
        assert!((fit.slope + 1.5).abs() < 0.15, "{}", fit.slope);
        assert!(matches!(decay_fit(&grid, &vec![0.0; grid.len()]), Err(Error::NoDecaySignal)));
    }

    #[test]
    fn symmetry_residual_of_projected_fields() {
        let grid = SpaceGrid::new(2, 2.0, 4).unwrap();
        let mut f = TimeField::zeros(&grid, SymmetryClass::Odd, 1.0, 2);
        assert_eq!(symmetry_residual(&f), 0.0);
        f.mode_mut(1).unwrap()[0] = Complex64::new(0.0, 1.0);
        assert!(symmetry_residual(&f) > 0.1);
        assert_eq!(symmetry_residual(&f.project(SymmetryClass::Odd)), 0.0);
    }

    #[test]
    fn report_formats() {
        let mut report = VerificationReport::default();
        report.extend([Check::below("a", 1.0, 2.0), Check::above("b", 1.0, 2.0)]);
        assert!(!report.passed());
        assert_eq!(report.failures().len(), 1);
        assert!(report.csv().starts_with("name,value,tolerance,pass\n"));
        assert!(report.get("a").unwrap().passed);
    }
}
