use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::grid::SpaceGrid;
use crate::resolvent::{
    admissible_exponents, duality_power, multiplier, shift, OperatorSpec, ResolventParams,
};
use crate::symmetry::{mode_set, SymmetryClass};
use crate::time::{Samples, TimeField, TimeGrid};

/// Problem parameters shared by every stage of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemParams {
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub symmetry: SymmetryClass,
    pub period: f64,
    /// Largest time frequency `K` on which the operator acts.
    pub cutoff: usize,
    pub half_width: f64,
    pub points: usize,
    pub epsilon: f64,
}

impl ProblemParams {
    /// Two-dimensional cubic wave equation with odd-in-time symmetry.
    pub fn benchmark() -> Self {
        Self {
            dim: 2,
            p: 3.0,
            q: 8.0,
            symmetry: SymmetryClass::Odd,
            period: 2.0 * PI,
            cutoff: 7,
            half_width: 16.0,
            points: 128,
            epsilon: 1e-3,
        }
    }

    /// `p' = p / (p - 1)`.
    pub fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn q_conj(&self) -> f64 {
        self.q / (self.q - 1.0)
    }

    /// Operator modes `I_s ∩ [-K, K]`.
    pub fn modes(&self) -> Vec<i64> {
        mode_set(self.symmetry, self.cutoff)
    }

    pub fn grid(&self) -> Result<SpaceGrid> {
        SpaceGrid::new(self.dim, self.half_width, self.points)
    }

    pub fn resolvent_params(&self) -> ResolventParams {
        ResolventParams::new(self.epsilon, self.period)
    }

    /// Full validation; returns the decay exponent `alpha`.
    pub fn validate(&self, spec: &OperatorSpec) -> Result<f64> {
        if !(self.p > 2.0) {
            return Err(Error::ExponentRange {
                p: self.p,
                low: 2.0,
                high: f64::INFINITY,
            });
        }
        let range = admissible_exponents(self.dim, spec, self.p)?;
        let alpha = range.alpha(self.q)?;
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        let modes = self.modes();
        if !modes.iter().any(|&k| k > 0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff {} leaves no positive mode for class {}",
                self.cutoff, self.symmetry
            )));
        }
        let params = self.resolvent_params();
        for &k in modes.iter().filter(|&&k| k >= 0) {
            spec.check_mode(k, self.period)?;
            if params.epsilon == 0.0 && !spec.is_coercive(k, self.period) {
                return Err(Error::InvalidParameter(format!(
                    "epsilon = 0 requires every mode to be non-resonant; mode {k} is resonant"
                )));
            }
        }
        self.grid()?;
        Ok(alpha)
    }
}

/// Nonnegative weight `Q` with cached powers.
#[derive(Clone, Debug)]
pub struct Potential {
    values: Vec<f64>,
    root_p: Vec<f64>,
    root_p_conj: Vec<f64>,
    norm: f64,
}

impl Potential {
    pub fn new(grid: &SpaceGrid, values: Vec<f64>, p: f64, q: f64) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "potential must be finite and nonnegative, found {bad}"
            )));
        }
        let p_conj = p / (p - 1.0);
        let root_p = values.iter().map(|v| v.powf(1.0 / p)).collect();
        let root_p_conj = values.iter().map(|v| v.powf(1.0 / p_conj)).collect();
        let norm = grid.lp_norm(&values, q / (q - p));
        Ok(Self {
            values,
            root_p,
            root_p_conj,
            norm,
        })
    }

    /// `A exp(-|x|^2 / sigma^2)`.
    pub fn gaussian(grid: &SpaceGrid, amplitude: f64, width: f64, p: f64, q: f64) -> Result<Self> {
        if !(amplitude >= 0.0 && width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian potential needs amplitude >= 0 and width > 0, got {amplitude}, {width}"
            )));
        }
        let values = grid
            .radii()
            .into_iter()
            .map(|r| amplitude * (-(r * r) / (width * width)).exp())
            .collect();
        Self::new(grid, values, p, q)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Q^{1/p}`.
    pub fn root_p(&self) -> &[f64] {
        &self.root_p
    }

    /// `Q^{1/p'}`.
    pub fn root_p_conj(&self) -> &[f64] {
        &self.root_p_conj
    }

    /// `||Q||_{q/(q-p)}` on the grid.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_trivial(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }
}

/// Weighted dual formulation of one problem: the Birman-Schwinger blocks,
/// the functional `J`, and the duality maps.
///
/// The dual variable lives on all time frequencies resolved by the sampling
/// grid; the operator acts on frequencies `|k| <= K` and vanishes above.
#[derive(Clone, Debug)]
pub struct DualProblem {
    params: ProblemParams,
    spec: OperatorSpec,
    grid: SpaceGrid,
    potential: Potential,
    time: TimeGrid,
    alpha: f64,
    blocks: Vec<(i64, Vec<f64>)>,
}

impl DualProblem {
    pub fn new(params: ProblemParams, spec: OperatorSpec, potential: Potential) -> Result<Self> {
        let alpha = params.validate(&spec)?;
        let grid = params.grid()?;
        check_len(grid.len(), potential.values().len())?;
        let time = TimeGrid::default_for(params.symmetry, params.period, params.cutoff)?;
        let rp = params.resolvent_params();
        let blocks = params
            .modes()
            .into_iter()
            .filter(|&k| k >= 0)
            .map(|k| Ok((k, multiplier(&grid, &spec, k, &rp)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            spec,
            grid,
            potential,
            time,
            alpha,
            blocks,
        })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    pub fn p_conj(&self) -> f64 {
        self.params.p_conj()
    }

    /// Time cutoff of the dual variable.
    pub fn dual_cutoff(&self) -> usize {
        self.time.max_cutoff()
    }

    pub fn zero_field(&self) -> TimeField {
        TimeField::zeros(
            &self.grid,
            self.params.symmetry,
            self.params.period,
            self.dual_cutoff(),
        )
    }

    fn block(&self, k: i64) -> Result<&[f64]> {
        let key = k.abs();
        self.blocks
            .iter()
            .find(|(m, _)| *m == key)
            .map(|(_, b)| b.as_slice())
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "mode {k} is outside the operator modes {:?}",
                    self.params.modes()
                ))
            })
    }

    /// `R_k^Q v = Q^{1/p} R_k (Q^{1/p} v)` on a complex field.
    pub fn birman_schwinger_complex(&self, k: i64, v: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.grid.len(), v.len())?;
        let m = self.block(k)?;
        let w = self.potential.root_p();
        let weighted: Vec<Complex64> = v.iter().zip(w).map(|(z, a)| z * a).collect();
        let mut out = self.grid.apply_multiplier(m, &weighted)?;
        for (z, a) in out.iter_mut().zip(w) {
            *z *= a;
        }
        Ok(out)
    }

    pub fn birman_schwinger_apply(&self, k: i64, v: &[f64]) -> Result<Vec<f64>> {
        let data: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Ok(self
            .birman_schwinger_complex(k, &data)?
            .into_iter()
            .map(|z| z.re)
            .collect())
    }

    /// Block operator `[R V]_k = R_k^Q v_k` for `|k| <= K`.
    pub fn big_r(&self, v: &TimeField) -> Result<TimeField> {
        let cutoff = v.cutoff().min(self.params.cutoff);
        let mut out = TimeField::zeros(&self.grid, v.symmetry(), v.period(), cutoff);
        let modes: Vec<i64> = out.modes().to_vec();
        let results: Vec<Result<Vec<Complex64>>> = modes
            .par_iter()
            .map(|&k| match v.mode(k) {
                Some(vk) => self.birman_schwinger_complex(k, vk),
                None => Ok(vec![Complex64::default(); self.grid.len()]),
            })
            .collect();
        for ((_, slot), r) in out.iter_mut().zip(results) {
            *slot = r?;
        }
        Ok(out)
    }

    /// `<V, R V>` computed modally.
    pub fn quadratic(&self, v: &TimeField) -> Result<f64> {
        Ok(v.pairing(&self.big_r(v)?))
    }

    /// Uniform time samples of a field.
    pub fn samples(&self, v: &TimeField) -> Result<Samples> {
        v.synthesize_uniform(&self.time)
    }

    /// Modes of samples at the dual cutoff.
    pub fn analyze(&self, samples: &Samples) -> Result<TimeField> {
        TimeField::analyze(samples, &self.grid, self.params.symmetry, self.dual_cutoff())
    }

    /// `int int |V|^{p'}`.
    pub fn power_integral(&self, v: &TimeField) -> Result<f64> {
        Ok(self.samples(v)?.power_integral(&self.grid, self.p_conj()))
    }

    /// `J(V) = (1/p') int |V|^{p'} - (1/2) <V, R V>`.
    pub fn functional(&self, v: &TimeField) -> Result<f64> {
        let pc = self.p_conj();
        Ok(self.power_integral(v)? / pc - 0.5 * self.quadratic(v)?)
    }

    /// `|V|^{p'-2} V` pointwise.
    pub fn duality_forward(&self, samples: &Samples) -> Samples {
        let pc = self.p_conj();
        samples.map(|x| duality_power(x, pc))
    }

    /// `|W|^{p-2} W` pointwise, inverse of [`Self::duality_forward`].
    pub fn duality_inverse(&self, samples: &Samples) -> Samples {
        let p = self.p();
        samples.map(|x| duality_power(x, p))
    }

    /// `|W|^{p-2} W` of a field, re-analyzed to modes at the dual cutoff.
    pub fn duality_inverse_field(&self, w: &TimeField) -> Result<TimeField> {
        self.analyze(&self.duality_inverse(&self.samples(w)?))
    }

    /// Samples of `|V|^{p'-2} V - R V` together with `R V`.
    pub fn gradient_samples(&self, v: &TimeField) -> Result<(Samples, TimeField)> {
        let rv = self.big_r(v)?;
        let mut g = self.duality_forward(&self.samples(v)?);
        let rs = self.samples(&rv)?;
        for (a, b) in g.values_mut().iter_mut().zip(rs.values()) {
            *a -= b;
        }
        Ok((g, rv))
    }

    /// Gradient representative `G = |V|^{p'-2} V - R V`, so `J'(V)[W] = <G, W>`.
    pub fn gradient(&self, v: &TimeField) -> Result<TimeField> {
        let (g, _) = self.gradient_samples(v)?;
        self.analyze(&g)
    }

    /// `||G||_p / ||V||_{p'}^{p'-1}`; zero field gives infinity.
    pub fn residual(&self, v: &TimeField) -> Result<f64> {
        let (g, _) = self.gradient_samples(v)?;
        let pc = self.p_conj();
        let norm_v = self.samples(v)?.lp_norm(&self.grid, pc);
        if norm_v == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(g.lp_norm(&self.grid, self.p()) / norm_v.powf(pc - 1.0))
    }

    /// `u_k = R_k [Q^{1/p} v_k]` for `|k| <= K`.
    pub fn reconstruct(&self, v: &TimeField) -> Result<TimeField> {
        let cutoff = v.cutoff().min(self.params.cutoff);
        let mut out = TimeField::zeros(&self.grid, v.symmetry(), v.period(), cutoff);
        let w = self.potential.root_p();
        let modes: Vec<i64> = out.modes().to_vec();
        let results: Vec<Result<Vec<Complex64>>> = modes
            .par_iter()
            .map(|&k| {
                let m = self.block(k)?;
                match v.mode(k) {
                    Some(vk) => {
                        let weighted: Vec<Complex64> =
                            vk.iter().zip(w).map(|(z, a)| z * a).collect();
                        self.grid.apply_multiplier(m, &weighted)
                    }
                    None => Ok(vec![Complex64::default(); self.grid.len()]),
                }
            })
            .collect();
        for ((_, slot), r) in out.iter_mut().zip(results) {
            *slot = r?;
        }
        Ok(out)
    }

    /// `int w R_k^Q w` for each trial field.
    pub fn check_a3(&self, trials: &[(i64, Vec<f64>)]) -> Result<Vec<(i64, f64)>> {
        trials
            .iter()
            .map(|(k, w)| {
                let rw = self.birman_schwinger_apply(*k, w)?;
                Ok((*k, self.grid.inner(w, &rw)))
            })
            .collect()
    }

    /// Band-pass field above the resonant sphere, centered at the origin and
    /// multiplied by `Q^{1/p}`.
    pub fn default_a3_trial(&self, k: i64) -> Vec<f64> {
        const WIDTH: f64 = 1.0;
        let kappa = shift(k, self.params.period);
        let kappa2 = kappa * kappa;
        let gamma = self.spec.order();
        let base = match self.spec {
            OperatorSpec::FractionalLaplacian { .. } => kappa.powf(1.0 / gamma),
            OperatorSpec::KleinGordon { mass } => (kappa2 - mass * mass).max(0.0).sqrt(),
        };
        let center = base + 3.0 * WIDTH;
        let shell: Vec<f64> = self
            .grid
            .xi_squared()
            .into_iter()
            .map(|xi2| {
                if self.spec.symbol(xi2) > kappa2 {
                    (-((xi2.sqrt() - center) / WIDTH).powi(2)).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let mut data = vec![Complex64::default(); self.grid.len()];
        // the sign (-1)^{i_1 + ... + i_N} centers the field at the origin
        for (flat, (z, s)) in data.iter_mut().zip(&shell).enumerate() {
            let parity: usize = self.grid.indices(flat)[..self.grid.dim()].iter().sum();
            let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
            *z = Complex64::new(sign * s, 0.0);
        }
        self.grid.inverse(&mut data);
        data.iter()
            .zip(self.potential.root_p())
            .map(|(z, &w)| z.re * w)
            .collect()
    }

    /// Lower estimate of `||R||_{L^{p'} -> L^p}` on the full space-time operator.
    pub fn estimate_operator_norm(&self, trials: usize, steps: usize, seed: u64) -> Result<f64> {
        let p = self.p();
        let pc = self.p_conj();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = 0.0f64;
        for _ in 0..trials {
            let mut raw = TimeField::zeros(
                &self.grid,
                SymmetryClass::General,
                self.params.period,
                self.params.cutoff,
            );
            for (_, slot) in raw.iter_mut() {
                for z in slot.iter_mut() {
                    *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            let mut v = raw
            .project(self.params.symmetry)
            .with_cutoff(self.dual_cutoff());
            for _ in 0..steps {
                let nv = self.samples(&v)?.lp_norm(&self.grid, pc);
                if nv == 0.0 {
                    break;
                }
                let w = self.samples(&self.big_r(&v)?)?;
                let ratio = w.lp_norm(&self.grid, p) / nv;
                best = best.max(ratio);
                if ratio == 0.0 {
                    break;
                }
                v = self.analyze(&self.duality_inverse(&w))?;
                let nv = self.samples(&v)?.lp_norm(&self.grid, pc);
                if nv == 0.0 {
                    break;
                }
                v.scale(1.0 / nv);
            }
        }
        Ok(best)
    }
}

/// Radius `r = (C_R p')^{-1/(2-p')}` and level `delta = r^{p'} / (2 p')` of the
/// small sphere on which `J >= delta`.
pub fn mountain_pass_constants(c_r: f64, p_conj: f64) -> Result<(f64, f64)> {
    if !(c_r > 0.0 && c_r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "operator norm estimate must be positive, got {c_r}"
        )));
    }
    if !(p_conj > 1.0 && p_conj < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "p' must lie in (1, 2), got {p_conj}"
        )));
    }
    let r = (c_r * p_conj).powf(-1.0 / (2.0 - p_conj));
    Ok((r, r.powf(p_conj) / (2.0 * p_conj)))
}
