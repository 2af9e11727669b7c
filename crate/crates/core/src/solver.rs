use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::DualProblem;
use crate::error::{Error, Result};
use crate::resolvent::duality_power;
use crate::symmetry::SymmetryClass;
use crate::time::{Samples, TimeField};

/// Reseeds attempted when an iterate leaves the positive cone.
const MAX_RESEEDS: usize = 5;
/// Window of the stagnation test.
const STAGNATION_WINDOW: usize = 20;
/// Backtracking steps before a line search is declared failed.
/// Fixed-point steps during which previous solutions are projected out.
const DEFLATION_WARMUP: usize = 100;
const MAX_BACKTRACKS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    NehariFixedPoint,
    MountainPassDescent,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::NehariFixedPoint => "nehari_fixed_point",
            Self::MountainPassDescent => "mountain_pass_descent",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nehari_fixed_point" => Ok(Self::NehariFixedPoint),
            "mountain_pass_descent" => Ok(Self::MountainPassDescent),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme '{other}' (expected nehari_fixed_point or mountain_pass_descent)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub max_iter: usize,
    /// Residual tolerance.
    pub tol: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Backtracking factor.
    pub backtrack: f64,
    /// Quasi-Newton memory of the descent scheme.
    pub memory: usize,
    /// Relative J change over the stagnation window that stops the descent scheme.
    pub stagnation: f64,
    pub seed: u64,
    /// Total number of solutions requested (first plus deflated ones).
    pub solutions: usize,
    /// Relative amplitude of the seeded noise added to initial guesses.
    pub noise: f64,
    /// Minimal angle to previous solutions in the `<., R .>` geometry.
    pub angle_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::NehariFixedPoint,
            max_iter: 2000,
            tol: 1e-8,
            armijo: 1e-4,
            backtrack: 0.5,
            memory: 8,
            stagnation: 1e-12,
            seed: 1,
            solutions: 1,
            noise: 1e-3,
            angle_threshold: 0.1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad(format!("armijo constant must lie in (0, 1), got {}", self.armijo));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad(format!("backtrack factor must lie in (0, 1), got {}", self.backtrack));
        }
        if self.memory < 1 {
            return bad("memory must be at least 1".into());
        }
        if self.solutions < 1 {
            return bad("at least one solution must be requested".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be nonnegative, got {}", self.noise));
        }
        if !(self.angle_threshold > 0.0 && self.angle_threshold < std::f64::consts::FRAC_PI_2) {
            return bad(format!(
                "angle threshold must lie in (0, pi/2), got {}",
                self.angle_threshold
            ));
        }
        Ok(())
    }
}

/// One row of the iteration log.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub j: f64,
    pub residual: f64,
    pub norm_v: f64,
    pub nehari_t: f64,
    pub wall_ms: f64,
}

/// Iteration log; wall-clock data is kept apart so the main log is reproducible.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
}

impl IterationLog {
    pub fn csv(&self) -> String {
        let mut out = String::from("iter,J,residual,norm_V_pprime,nehari_t\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e}",
                r.iter, r.j, r.residual, r.norm_v, r.nehari_t
            );
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("iter,wall_ms\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:.3}", r.iter, r.wall_ms);
        }
        out
    }

    fn push(&mut self, start: &Instant, iter: usize, j: f64, residual: f64, norm_v: f64, t: f64) {
        self.records.push(IterationRecord {
            iter,
            j,
            residual,
            norm_v,
            nehari_t: t,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub scheme: Scheme,
    pub v: TimeField,
    pub u: TimeField,
    pub j_value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub nehari_history: Vec<f64>,
    /// `||v_k||_{p'}` for each mode of V.
    pub spectrum: Vec<(i64, f64)>,
    pub log: IterationLog,
}

impl Solution {
    /// Derived quantities (`U`, `J`, residual, spectrum) of a dual field.
    pub fn assemble(
        problem: &DualProblem,
        scheme: Scheme,
        v: TimeField,
        iterations: usize,
        converged: bool,
        log: IterationLog,
    ) -> Result<Self> {
        let u = problem.reconstruct(&v)?;
        let j_value = problem.functional(&v)?;
        let residual = problem.residual(&v)?;
        let spectrum = v.mode_norms(problem.p_conj());
        let nehari_history = log.records.iter().map(|r| r.nehari_t).collect();
        Ok(Self {
            scheme,
            v,
            u,
            j_value,
            residual,
            iterations,
            converged,
            nehari_history,
            spectrum,
            log,
        })
    }

    /// `||V||_{p'}`.
    pub fn norm(&self, problem: &DualProblem) -> Result<f64> {
        Ok(problem.power_integral(&self.v)?.powf(1.0 / problem.p_conj()))
    }

    /// Positive frequency carrying the largest `||v_k||_{p'}`.
    pub fn dominant_mode(&self) -> i64 {
        self.spectrum
            .iter()
            .filter(|(k, _)| *k > 0)
            .fold((0, -1.0), |best, &(k, n)| if n > best.1 { (k, n) } else { best })
            .0
    }
}

/// Rescale factor onto the Nehari set from `A = int |V|^{p'}` and `B = <V, R V>`.
pub fn nehari_factor(a: f64, b: f64, p_conj: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::NotPositive { pairing: b });
    }
    Ok((a / b).powf(1.0 / (2.0 - p_conj)))
}

/// `t = (||V||^{p'} / <V, R V>)^{1/(2-p')}` and the rescaled field `tV`.
pub fn nehari_rescale(problem: &DualProblem, v: &TimeField) -> Result<(f64, TimeField)> {
    let a = problem.power_integral(v)?;
    let b = problem.quadratic(v)?;
    let t = nehari_factor(a, b, problem.p_conj())?;
    Ok((t, v.scaled(t)))
}

/// Mountain-pass basis `V_k = w_k T_k(t)` normalized so that `<V_k, R V_k> = 2`.
#[derive(Clone, Debug)]
pub struct MpgBasis {
    pub elements: Vec<(i64, TimeField)>,
}

impl MpgBasis {
    /// Basis directions for the first `count` positive admissible modes,
    /// built from the default positivity trial fields.
    pub fn new(problem: &DualProblem, count: usize) -> Result<Self> {
        let modes: Vec<i64> = problem
            .params()
            .modes()
            .into_iter()
            .filter(|&k| k > 0)
            .take(count)
            .collect();
        let mut elements = Vec::with_capacity(modes.len());
        for k in modes {
            let omega = problem.default_a3_trial(k);
            elements.push((k, Self::element(problem, k, &omega)?));
        }
        Ok(Self { elements })
    }

    /// `V_k` for a given spatial profile `w_k`.
    pub fn element(problem: &DualProblem, k: i64, omega: &[f64]) -> Result<TimeField> {
        let form = problem.grid().inner(omega, &problem.birman_schwinger_apply(k, omega)?);
        if !(form > 0.0) {
            return Err(Error::NotPositive { pairing: form });
        }
        let target = 4.0 / problem.params().period;
        let scale = (target / form).sqrt();
        let sine = problem.params().symmetry.uses_sine();
        let half: Vec<Complex64> = omega.iter().map(|w| Complex64::new(0.5 * scale * w, 0.0)).collect();
        let (plus, minus): (Vec<Complex64>, Vec<Complex64>) = if sine {
            let i = Complex64::i();
            (half.iter().map(|z| -i * z).collect(), half.iter().map(|z| i * z).collect())
        } else {
            (half.clone(), half)
        };
        let mut field = problem.zero_field();
        field
            .mode_mut(k)
            .ok_or_else(|| Error::InvalidParameter(format!("mode {k} is not admissible")))?
            .copy_from_slice(&plus);
        field
            .mode_mut(-k)
            .ok_or_else(|| Error::InvalidParameter(format!("mode {} is not admissible", -k)))?
            .copy_from_slice(&minus);
        Ok(field)
    }

    pub fn get(&self, k: i64) -> Option<&TimeField> {
        self.elements.iter().find(|(m, _)| *m == k).map(|(_, f)| f)
    }
}

/// Endpoint radius `max{r, (c^2/p')^{1/(2-p')}}` with `c = max(||V||, 1/||V||)`.
pub fn endpoint_radius(norm: f64, r: f64, p_conj: f64) -> f64 {
    let c = norm.max(1.0 / norm);
    r.max((c * c / p_conj).powf(1.0 / (2.0 - p_conj)))
}

/// Angle between two fields in the `<., R .>` geometry; `pi/2` if undefined.
pub fn r_angle(problem: &DualProblem, a: &TimeField, b: &TimeField) -> Result<f64> {
    let ra = problem.big_r(a)?;
    let rb = problem.big_r(b)?;
    let aa = a.pairing(&ra);
    let bb = b.pairing(&rb);
    if !(aa > 0.0 && bb > 0.0) {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    let c = (a.pairing(&rb).abs() / (aa * bb).sqrt()).min(1.0);
    Ok(c.acos())
}

/// Seeded, `Q`-localized perturbation on the operator modes with the
/// given L^2 norm.
fn noise_field(problem: &DualProblem, amplitude: f64, seed: u64) -> Result<TimeField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = problem.params();
    let mut raw = TimeField::zeros(problem.grid(), SymmetryClass::General, params.period, params.cutoff);
    let weight = problem.potential().root_p_conj();
    for (_, slot) in raw.iter_mut() {
        for (z, w) in slot.iter_mut().zip(weight) {
            *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * *w;
        }
    }
    let mut field = raw.project(params.symmetry).with_cutoff(problem.dual_cutoff());
    let norm = field.l2_norm();
    if norm > 0.0 {
        field.scale(amplitude / norm);
    }
    Ok(field)
}

/// Basis direction for the `index`-th positive mode plus seeded noise.
pub fn initial_guess(problem: &DualProblem, index: usize, config: &SolverConfig, seed: u64) -> Result<TimeField> {
    let basis = MpgBasis::new(problem, index + 1)?;
    let (_, base) = basis.elements.get(index).ok_or_else(|| {
        Error::InvalidParameter(format!("no positive mode with index {index} below the cutoff"))
    })?;
    let mut v = base.clone();
    if config.noise > 0.0 {
        v.axpy(1.0, &noise_field(problem, config.noise * base.l2_norm(), seed)?);
    }
    Ok(v)
}

/// Previous solution prepared for Gram-Schmidt removal in the `<., R .>` pairing.
struct Deflator {
    v: TimeField,
    rv: TimeField,
    norm: f64,
}

fn deflators(problem: &DualProblem, prev: &[Solution]) -> Result<Vec<Deflator>> {
    let mut out: Vec<Deflator> = Vec::with_capacity(prev.len());
    for s in prev {
        let mut v = s.v.clone();
        deflate(&mut v, &out);
        let rv = problem.big_r(&v)?;
        let norm = v.pairing(&rv);
        if norm > 0.0 {
            out.push(Deflator { v, rv, norm });
        }
    }
    Ok(out)
}

fn deflate(v: &mut TimeField, deflators: &[Deflator]) {
    for d in deflators {
        let c = v.pairing(&d.rv) / d.norm;
        v.axpy(-c, &d.v);
    }
}

/// Outcome of one fixed-point run before assembly.
struct Run {
    v: TimeField,
    iterations: usize,
    converged: bool,
    log: IterationLog,
}

fn fixed_point_run(
    problem: &DualProblem,
    initial: &TimeField,
    config: &SolverConfig,
    deflators: &[Deflator],
    prev: &[Solution],
) -> Result<Run> {
    let start = Instant::now();
    let grid = problem.grid();
    let pc = problem.p_conj();
    let p = problem.p();
    let mut log = IterationLog::default();
    let mut v = initial.with_cutoff(problem.dual_cutoff());
    deflate(&mut v, deflators);
    let mut rv = problem.big_r(&v)?;
    for iter in 0..config.max_iter {
        let mut vs = problem.samples(&v)?;
        let a = vs.power_integral(grid, pc);
        let b = v.pairing(&rv);
        let t = nehari_factor(a, b, pc)?;
        v.scale(t);
        rv.scale(t);
        vs.values_mut().iter_mut().for_each(|x| *x *= t);
        let a = a * t.powf(pc);
        let norm_v = a.powf(1.0 / pc);
        let j = a / pc - 0.5 * t * t * b;
        let rs = problem.samples(&rv)?;
        let mut g = problem.duality_forward(&vs);
        for (x, y) in g.values_mut().iter_mut().zip(rs.values()) {
            *x -= y;
        }
        let residual = g.lp_norm(grid, p) / norm_v.powf(pc - 1.0);
        log.push(&start, iter, j, residual, norm_v, t);
        if residual < config.tol {
            // a run that fell back onto a previous solution cannot recover
            let converged = separated(problem, &v, prev, config.angle_threshold)?;
            return Ok(Run {
                v,
                iterations: iter + 1,
                converged,
                log,
            });
        }
        if !residual.is_finite() {
            break;
        }
        v = problem.analyze(&problem.duality_inverse(&rs))?;
        if iter < DEFLATION_WARMUP {
            deflate(&mut v, deflators);
        }
        rv = problem.big_r(&v)?;
    }
    let iterations = log.records.len();
    Ok(Run {
        v,
        iterations,
        converged: false,
        log,
    })
}

fn separated(problem: &DualProblem, v: &TimeField, prev: &[Solution], threshold: f64) -> Result<bool> {
    for s in prev {
        if r_angle(problem, v, &s.v)? <= threshold {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Nehari-normalized fixed-point iteration `V <- t(psi(R V))`, `psi(W) = |W|^{p-2} W`.
/// Leaving the positive cone triggers up to five reseeds from the default
/// initial guess.
pub fn iterate_fixed_point(
    problem: &DualProblem,
    initial: &TimeField,
    config: &SolverConfig,
) -> Result<Solution> {
    config.validate()?;
    if initial.is_zero() {
        return Err(Error::NotPositive { pairing: 0.0 });
    }
    let mut guess = initial.clone();
    let mut last_err = None;
    for attempt in 0..=MAX_RESEEDS {
        match fixed_point_run(problem, &guess, config, &[], &[]) {
            Ok(run) => {
                return Solution::assemble(
                    problem,
                    Scheme::NehariFixedPoint,
                    run.v,
                    run.iterations,
                    run.converged,
                    run.log,
                )
            }
            Err(e @ Error::NotPositive { .. }) => {
                last_err = Some(e);
                let seed = config.seed.wrapping_add(1000 * (attempt as u64 + 1));
                guess = initial_guess(problem, 0, config, seed)?;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(Error::NotPositive { pairing: 0.0 }))
}

/// Fixed-point solve from the default initial guess.
pub fn solve_default(problem: &DualProblem, config: &SolverConfig) -> Result<Solution> {
    let v0 = initial_guess(problem, 0, config, config.seed)?;
    match config.scheme {
        Scheme::NehariFixedPoint => iterate_fixed_point(problem, &v0, config),
        Scheme::MountainPassDescent => mountain_pass_descent(problem, config),
    }
}

/// Next solution, started from higher basis directions, with the components
/// along `prev` removed in the `<., R .>` pairing after every step.
/// Accepted once the undeflated residual is below `tol` and the angle to
/// every previous solution exceeds the threshold.
pub fn deflate_and_continue(
    prev: &[Solution],
    problem: &DualProblem,
    config: &SolverConfig,
) -> Result<Solution> {
    config.validate()?;
    if prev.is_empty() {
        return solve_default(problem, config);
    }
    let defl = deflators(problem, prev)?;
    let positive = problem.params().modes().into_iter().filter(|&k| k > 0).count();
    let mut fallback: Option<Run> = None;
    for index in prev.len()..positive.min(prev.len() + 3) {
        let seed = config.seed.wrapping_add(7919 * index as u64);
        let guess = initial_guess(problem, index, config, seed)?;
        match fixed_point_run(problem, &guess, config, &defl, prev) {
            Ok(run) if run.converged => {
                return Solution::assemble(
                    problem,
                    Scheme::NehariFixedPoint,
                    run.v,
                    run.iterations,
                    true,
                    run.log,
                )
            }
            Ok(run) => {
                if fallback.is_none() {
                    fallback = Some(run);
                }
            }
            Err(Error::NotPositive { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    match fallback {
        Some(run) => Solution::assemble(
            problem,
            Scheme::NehariFixedPoint,
            run.v,
            run.iterations,
            false,
            run.log,
        ),
        None => Err(Error::NotPositive { pairing: 0.0 }),
    }
}

/// Up to `config.solutions` solutions: the first plus deflated continuations.
pub fn solve_family(problem: &DualProblem, config: &SolverConfig) -> Result<Vec<Solution>> {
    let mut out: Vec<Solution> = Vec::with_capacity(config.solutions);
    for _ in 0..config.solutions {
        let next = deflate_and_continue(&out, problem, config)?;
        let done = !next.converged;
        out.push(next);
        if done {
            break;
        }
    }
    Ok(out)
}

/// Profile of `J` along the ray `beta V`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathReport {
    /// `int |V|^{p'}`.
    pub power: f64,
    /// `<V, R V>`.
    pub quadratic: f64,
    pub beta_max: f64,
    pub j_max: f64,
    pub beta_end: f64,
    pub j_end: f64,
    /// `||V||_{p'}`.
    pub norm: f64,
}

impl PathReport {
    pub fn j_at(&self, beta: f64, p_conj: f64) -> f64 {
        beta.powf(p_conj) * self.power / p_conj - 0.5 * beta * beta * self.quadratic
    }
}

/// Locate the maximum of `J` along `beta V` for `beta` in `[0, beta_end]`, with
/// the endpoint pushed out until `||beta_end V|| > radius` and `J < 0` there.
pub fn mountain_pass_path(problem: &DualProblem, v: &TimeField, radius: f64) -> Result<PathReport> {
    const SAMPLES: usize = 64;
    let pc = problem.p_conj();
    let power = problem.power_integral(v)?;
    let quadratic = problem.quadratic(v)?;
    if !(quadratic > 0.0) {
        return Err(Error::NotPositive { pairing: quadratic });
    }
    let norm = power.powf(1.0 / pc);
    let j = |beta: f64| beta.powf(pc) * power / pc - 0.5 * beta * beta * quadratic;
    let mut beta_end = 2.0 * radius / norm;
    for _ in 0..64 {
        let values: Vec<f64> = (0..=SAMPLES)
            .map(|i| j(beta_end * i as f64 / SAMPLES as f64))
            .collect();
        let arg = values
            .iter()
            .enumerate()
            .fold(0, |best, (i, &x)| if x > values[best] { i } else { best });
        if arg == SAMPLES || values[SAMPLES] >= 0.0 {
            beta_end *= 2.0;
            continue;
        }
        let h = beta_end / SAMPLES as f64;
        let mut lo = (arg as f64 - 1.0).max(0.0) * h;
        let mut hi = (arg as f64 + 1.0) * h;
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - ratio * (hi - lo);
        let mut x2 = lo + ratio * (hi - lo);
        let (mut f1, mut f2) = (j(x1), j(x2));
        while hi - lo > 1e-13 * hi {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + ratio * (hi - lo);
                f2 = j(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - ratio * (hi - lo);
                f1 = j(x1);
            }
        }
        let beta_max = 0.5 * (lo + hi);
        return Ok(PathReport {
            power,
            quadratic,
            beta_max,
            j_max: j(beta_max),
            beta_end,
            j_end: values[SAMPLES],
            norm,
        });
    }
    Err(Error::InvalidParameter("mountain-pass path has no interior maximum".into()))
}

/// Evaluation of the Nehari-reduced functional `J(t(V) V)`.
struct Reduced {
    j: f64,
    t: f64,
    residual: f64,
    norm_v: f64,
    /// Gradient samples `t G(tV)`.
    grad: Vec<f64>,
}

fn reduced(problem: &DualProblem, vs: &Samples) -> Result<Reduced> {
    let grid = problem.grid();
    let pc = problem.p_conj();
    let v = problem.analyze(vs)?;
    let rv = problem.big_r(&v)?;
    let a = vs.power_integral(grid, pc);
    let b = v.pairing(&rv);
    let t = nehari_factor(a, b, pc)?;
    let rs = problem.samples(&rv)?;
    let scaled = vs.map(|x| duality_power(t * x, pc));
    let mut g = scaled;
    for (x, y) in g.values_mut().iter_mut().zip(rs.values()) {
        *x -= t * y;
    }
    let norm_v = t * a.powf(1.0 / pc);
    let residual = g.lp_norm(grid, problem.p()) / norm_v.powf(pc - 1.0);
    let j = (1.0 / pc - 0.5) * t.powf(pc) * a;
    let grad = g.into_values().into_iter().map(|x| t * x).collect();
    Ok(Reduced {
        j,
        t,
        residual,
        norm_v,
        grad,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mountain-pass descent: locate the maximum of `J` on the ray through the
/// first basis direction, then minimize the Nehari-reduced functional
/// `J(t(V) V)` by limited-memory quasi-Newton steps with Armijo backtracking.
/// Converged when the residual falls below `tol`; stops unconverged on `J`
/// stagnation or `max_iter`.
pub fn mountain_pass_descent(problem: &DualProblem, config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    let start = Instant::now();
    let basis = MpgBasis::new(problem, 1)?;
    let (_, v1) = basis
        .elements
        .first()
        .ok_or_else(|| Error::InvalidParameter("no positive mode below the cutoff".into()))?;
    let pc = problem.p_conj();
    let norm1 = problem.power_integral(v1)?.powf(1.0 / pc);
    let path = mountain_pass_path(problem, v1, endpoint_radius(norm1, 0.0, pc))?;
    let mut vs = problem.samples(&v1.scaled(path.beta_max))?;
    if config.noise > 0.0 {
        let noise = noise_field(problem, config.noise * v1.l2_norm() * path.beta_max, config.seed)?;
        let ns = problem.samples(&noise)?;
        for (x, y) in vs.values_mut().iter_mut().zip(ns.values()) {
            *x += y;
        }
    }
    let weight = problem.time_grid().weight() * problem.grid().cell_volume();
    let mut log = IterationLog::default();
    let mut cur = reduced(problem, &vs)?;
    let mut pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..config.max_iter {
        iterations = iter + 1;
        log.push(&start, iter, cur.j, cur.residual, cur.norm_v, cur.t);
        if cur.residual < config.tol {
            converged = true;
            break;
        }
        if iter >= STAGNATION_WINDOW {
            let old = log.records[iter - STAGNATION_WINDOW].j;
            if (old - cur.j).abs() <= config.stagnation * cur.j.abs() {
                break;
            }
        }
        // two-loop recursion in the weighted sample inner product
        let mut d: Vec<f64> = cur.grad.iter().map(|g| -g).collect();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * weight * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(x, yy)| *x -= a * yy);
            alphas.push(a);
        }
        let scale = match pairs.last() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => {
                let gn = (weight * dot(&cur.grad, &cur.grad)).sqrt();
                let vn = (weight * dot(vs.values(), vs.values())).sqrt();
                if gn > 0.0 {
                    1e-2 * vn / gn
                } else {
                    1.0
                }
            }
        };
        d.iter_mut().for_each(|x| *x *= scale);
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * weight * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(x, ss)| *x += (a - b) * ss);
        }
        let mut slope = weight * dot(&cur.grad, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = cur.grad.iter().map(|g| -g * scale.abs()).collect();
            slope = weight * dot(&cur.grad, &d);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial = vs.clone();
            trial
                .values_mut()
                .iter_mut()
                .zip(&d)
                .for_each(|(x, dd)| *x += step * dd);
            if let Ok(next) = reduced(problem, &trial) {
                if next.j <= cur.j + config.armijo * step * slope {
                    accepted = Some((trial, next));
                    break;
                }
            }
            step *= config.backtrack;
        }
        let Some((trial, next)) = accepted else {
            if pairs.is_empty() {
                break;
            }
            pairs.clear();
            continue;
        };
        let s: Vec<f64> = d.iter().map(|x| step * x).collect();
        let y: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy = weight * dot(&s, &y);
        if sy > 0.0 {
            if pairs.len() == config.memory {
                pairs.remove(0);
            }
            pairs.push((s, y, 1.0 / sy));
        }
        vs = trial;
        cur = next;
    }
    let v = problem.analyze(&vs)?.scaled(cur.t);
    Solution::assemble(
        problem,
        Scheme::MountainPassDescent,
        v,
        iterations,
        converged,
        log,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::{Potential, ProblemParams};
    use crate::resolvent::OperatorSpec;

    fn small() -> DualProblem {
        let params = ProblemParams {
            points: 64,
            cutoff: 3,
            ..ProblemParams::benchmark()
        };
        let grid = params.grid().unwrap();
        let q = Potential::gaussian(&grid, 1.0, 2.0, params.p, params.q).unwrap();
        DualProblem::new(params, OperatorSpec::laplacian(), q).unwrap()
    }

    #[test]
    fn nehari_factor_values() {
        assert!((nehari_factor(1.0, 2.0, 1.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(nehari_factor(1.0, 0.0, 1.5), Err(Error::NotPositive { .. })));
        assert!(matches!(nehari_factor(1.0, -1.0, 1.5), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn endpoint_radius_values() {
        assert_eq!(endpoint_radius(1.0, 5.0, 1.5), 5.0);
        let expected = (4.0f64 / 1.5).powf(2.0);
        assert!((endpoint_radius(0.5, 0.1, 1.5) - expected).abs() < 1e-12);
        assert!((endpoint_radius(2.0, 0.1, 1.5) - expected).abs() < 1e-12);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::NehariFixedPoint, Scheme::MountainPassDescent] {
            assert_eq!(Scheme::parse(s.name()).unwrap(), s);
        }
        assert!(Scheme::parse("newton").is_err());
    }

    #[test]
    fn basis_is_normalized_and_rescale_lands_on_nehari() {
        let problem = small();
        let basis = MpgBasis::new(&problem, 2).unwrap();
        assert_eq!(basis.elements.len(), 2);
        let v = basis.get(1).unwrap();
        assert!((problem.quadratic(v).unwrap() - 2.0).abs() < 1e-12);
        assert!(r_angle(&problem, v, &v.scaled(3.0)).unwrap() < 1e-6);
        let (_, w) = nehari_rescale(&problem, v).unwrap();
        let a = problem.power_integral(&w).unwrap();
        let b = problem.quadratic(&w).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn fixed_point_converges_and_is_reproducible() {
        let problem = small();
        let config = SolverConfig::default();
        let a = solve_default(&problem, &config).unwrap();
        assert!(a.converged && a.residual < config.tol);
        assert!(a.j_value > 0.0);
        assert_eq!(a.log.records.len(), a.iterations);
        let b = solve_default(&problem, &config).unwrap();
        assert_eq!(a.log.csv(), b.log.csv());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let problem = small();
        let config = SolverConfig {
            tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(solve_default(&problem, &config).is_err());
    }
}
