use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::grid::{signed_index, CubeFft, SpaceGrid};

/// Elliptic operator given by a radial Fourier symbol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OperatorSpec {
    /// `(-Delta)^gamma`, symbol `|xi|^{2 gamma}`.
    FractionalLaplacian { gamma: f64 },
    /// `-Delta + m^2`, symbol `|xi|^2 + m^2`.
    KleinGordon { mass: f64 },
}

impl OperatorSpec {
    pub fn laplacian() -> Self {
        Self::FractionalLaplacian { gamma: 1.0 }
    }

    /// Symbol as a function of `|xi|^2`.
    pub fn symbol(&self, xi_sq: f64) -> f64 {
        match *self {
            Self::FractionalLaplacian { gamma } => {
                if gamma == 1.0 {
                    xi_sq
                } else {
                    xi_sq.powf(gamma)
                }
            }
            Self::KleinGordon { mass } => xi_sq + mass * mass,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            Self::FractionalLaplacian { gamma } => {
                let low = dim as f64 / (dim as f64 + 1.0);
                if !(gamma.is_finite() && gamma > low) {
                    return Err(Error::InvalidParameter(format!(
                        "fractional order gamma must exceed N/(N+1) = {low}, got {gamma}"
                    )));
                }
            }
            Self::KleinGordon { mass } => {
                if !(mass.is_finite() && mass > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Klein-Gordon mass must be positive, got {mass}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Frequency exponent `gamma` (1 for Klein-Gordon).
    pub fn order(&self) -> f64 {
        match *self {
            Self::FractionalLaplacian { gamma } => gamma,
            Self::KleinGordon { .. } => 1.0,
        }
    }

    /// Check that mode `k` has a bounded real resolvent.
    pub fn check_mode(&self, k: i64, period: f64) -> Result<()> {
        match *self {
            Self::FractionalLaplacian { .. } if k == 0 => Err(Error::ZeroModeInverse),
            Self::KleinGordon { mass } => {
                let kappa = shift(k, period);
                if (kappa - mass).abs() <= 1e-12 * mass {
                    Err(Error::Resonance { k, mass })
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Whether `a(xi) - kappa^2` is bounded away from zero for every `xi`.
    pub fn is_coercive(&self, k: i64, period: f64) -> bool {
        match *self {
            Self::KleinGordon { mass } => shift(k, period) < mass,
            Self::FractionalLaplacian { .. } => false,
        }
    }
}

/// Frequency shift `kappa = 2 pi k / T`.
pub fn shift(k: i64, period: f64) -> f64 {
    2.0 * PI * k.unsigned_abs() as f64 / period
}

/// How the whole-space resolvent is realized on the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Fourier multiplier on the periodic box.
    Periodic,
    /// Truncated outgoing kernel on a zero-padded box (`padding` times wider).
    FreeSpace { padding: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolventParams {
    pub epsilon: f64,
    pub period: f64,
    pub boundary: Boundary,
}

impl ResolventParams {
    pub fn new(epsilon: f64, period: f64) -> Self {
        Self {
            epsilon,
            period,
            boundary: Boundary::Periodic,
        }
    }

    pub fn free_space(mut self, padding: usize) -> Self {
        self.boundary = Boundary::FreeSpace { padding };
        self
    }

    fn validate(&self, spec: &OperatorSpec, k: i64) -> Result<()> {
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        spec.check_mode(k, self.period)?;
        if self.epsilon == 0.0 && !spec.is_coercive(k, self.period) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = 0 is only allowed for non-resonant modes; mode {k} meets the spectrum"
            )));
        }
        if let Boundary::FreeSpace { padding } = self.boundary {
            if padding < 2 {
                return Err(Error::InvalidParameter(format!(
                    "free-space padding must be at least 2, got {padding}"
                )));
            }
        }
        Ok(())
    }
}

/// Periodic multiplier `Re 1/(a(xi) - kappa^2 - i eps)` in FFT order.
pub fn multiplier(
    grid: &SpaceGrid,
    spec: &OperatorSpec,
    k: i64,
    params: &ResolventParams,
) -> Result<Vec<f64>> {
    params.validate(spec, k)?;
    let kappa2 = shift(k, params.period).powi(2);
    let eps2 = params.epsilon * params.epsilon;
    Ok(grid
        .xi_squared()
        .into_iter()
        .map(|xi2| {
            let d = spec.symbol(xi2) - kappa2;
            d / (d * d + eps2)
        })
        .collect())
}

/// Symbol `a(xi) - kappa^2` in FFT order.
pub fn shifted_symbol(grid: &SpaceGrid, spec: &OperatorSpec, kappa: f64) -> Vec<f64> {
    grid.xi_squared()
        .into_iter()
        .map(|xi2| spec.symbol(xi2) - kappa * kappa)
        .collect()
}

/// Resolvent of one operator on one grid.
#[derive(Clone, Debug)]
pub struct Resolvent {
    grid: SpaceGrid,
    spec: OperatorSpec,
    params: ResolventParams,
}

impl Resolvent {
    pub fn new(grid: &SpaceGrid, spec: OperatorSpec, params: ResolventParams) -> Result<Self> {
        spec.validate(grid.dim())?;
        Ok(Self {
            grid: grid.clone(),
            spec,
            params,
        })
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn params(&self) -> &ResolventParams {
        &self.params
    }

    pub fn apply(&self, k: i64, f: &[f64]) -> Result<Vec<f64>> {
        apply_resolvent(&self.grid, &self.spec, k, &self.params, f)
    }

    pub fn apply_complex(&self, k: i64, f: &[Complex64]) -> Result<Vec<Complex64>> {
        apply_resolvent_complex(&self.grid, &self.spec, k, &self.params, f)
    }
}

/// Real part of the regularized resolvent `(a(D) - kappa^2 - i eps)^{-1}` on a real field.
pub fn apply_resolvent(
    grid: &SpaceGrid,
    spec: &OperatorSpec,
    k: i64,
    params: &ResolventParams,
    f: &[f64],
) -> Result<Vec<f64>> {
    let data: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Ok(apply_resolvent_complex(grid, spec, k, params, &data)?
        .into_iter()
        .map(|z| z.re)
        .collect())
}

/// Complex extension `R(f + ig) = Rf + iRg`.
pub fn apply_resolvent_complex(
    grid: &SpaceGrid,
    spec: &OperatorSpec,
    k: i64,
    params: &ResolventParams,
    f: &[Complex64],
) -> Result<Vec<Complex64>> {
    check_len(grid.len(), f.len())?;
    match params.boundary {
        Boundary::Periodic => {
            let m = multiplier(grid, spec, k, params)?;
            grid.apply_multiplier(&m, f)
        }
        Boundary::FreeSpace { padding } => {
            params.validate(spec, k)?;
            free_space_apply(grid, spec, shift(k, params.period), params.epsilon, padding, f)
        }
    }
}

/// Convolution with `Re e^{i k_c r} / (4 pi r)` truncated at `r < R`, where
/// `k_c^2 = kappa^2 - m^2 + i eps` and `R` is the padding margin. Exact for
/// sources and targets closer than `R`.
fn free_space_apply(
    grid: &SpaceGrid,
    spec: &OperatorSpec,
    kappa: f64,
    epsilon: f64,
    padding: usize,
    f: &[Complex64],
) -> Result<Vec<Complex64>> {
    if grid.dim() != 3 {
        return Err(Error::NotImplemented(format!(
            "free-space resolvent in dimension {}",
            grid.dim()
        )));
    }
    let mass2 = match *spec {
        OperatorSpec::FractionalLaplacian { gamma } if gamma == 1.0 => 0.0,
        OperatorSpec::KleinGordon { mass } => mass * mass,
        _ => {
            return Err(Error::NotImplemented(
                "free-space resolvent for fractional order other than 1".into(),
            ))
        }
    };
    let n = grid.points();
    let big = padding * n;
    let h = grid.spacing();
    let reach = (big - n) as f64 * h;
    let dk = 2.0 * PI / (big as f64 * h);
    let kc = Complex64::new(kappa * kappa - mass2, epsilon).sqrt();
    let edge = (Complex64::i() * kc * reach).exp();
    let fft = CubeFft::new(3, big);
    let mut data = vec![Complex64::default(); fft.len()];
    for (flat, z) in f.iter().enumerate() {
        let [i, j, l] = grid.indices(flat);
        data[(i * big + j) * big + l] = *z;
    }
    fft.forward(&mut data);
    let axis: Vec<f64> = (0..big).map(|i| dk * signed_index(i, big) as f64).collect();
    for (flat, z) in data.iter_mut().enumerate() {
        let (i, rest) = (flat / (big * big), flat % (big * big));
        let (j, l) = (rest / big, rest % big);
        let s2 = axis[i] * axis[i] + axis[j] * axis[j] + axis[l] * axis[l];
        let s = s2.sqrt();
        let sinc = if s == 0.0 {
            reach
        } else {
            (s * reach).sin() / s
        };
        let num = Complex64::new(1.0, 0.0)
            - edge * (Complex64::new((s * reach).cos(), 0.0) - Complex64::i() * kc * sinc);
        let symbol = num / (s2 - kc * kc);
        *z *= symbol.re;
    }
    fft.inverse(&mut data);
    let mut out = vec![Complex64::default(); grid.len()];
    for (flat, z) in out.iter_mut().enumerate() {
        let [i, j, l] = grid.indices(flat);
        *z = data[(i * big + j) * big + l];
    }
    Ok(out)
}

/// Closed-form real outgoing kernel `G_k(z)` of the resolvent at `kappa = 2 pi k / T`.
pub fn kernel_oracle(spec: &OperatorSpec, dim: usize, k: i64, period: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kernel distance must be positive, got {z}"
        )));
    }
    let kappa = shift(k, period);
    let mass = match *spec {
        OperatorSpec::FractionalLaplacian { gamma } if gamma == 1.0 => 0.0,
        OperatorSpec::KleinGordon { mass } => mass,
        _ => {
            return Err(Error::NotImplemented(format!(
                "kernel for {spec:?} in dimension {dim}"
            )))
        }
    };
    spec.check_mode(k, period)?;
    let oscillating = kappa > mass;
    let wn = (kappa * kappa - mass * mass).abs().sqrt();
    match (dim, oscillating) {
        (3, true) => Ok((wn * z).cos() / (4.0 * PI * z)),
        (3, false) => Ok((-wn * z).exp() / (4.0 * PI * z)),
        (2, true) => Ok(-0.25 * puruspe::bessel::Yn(0, wn * z)),
        (2, false) => Ok(puruspe::bessel::Kn(0, wn * z) / (2.0 * PI)),
        _ => Err(Error::NotImplemented(format!(
            "kernel in dimension {dim}"
        ))),
    }
}

/// Admissible spatial exponents `q` for a given `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Admissible {
    pub dim: usize,
    pub gamma: f64,
    pub p: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl Admissible {
    /// Decay exponent `2 - N/(gamma q') + N/(gamma q)`, checked against `1 - 2/p`.
    pub fn alpha(&self, q: f64) -> Result<f64> {
        if !(q > self.q_min && q < self.q_max) {
            return Err(Error::InvalidParameter(format!(
                "q = {q} outside admissible range ({}, {})",
                self.q_min, self.q_max
            )));
        }
        let n = self.dim as f64;
        let q_conj = q / (q - 1.0);
        let alpha = 2.0 - n / (self.gamma * q_conj) + n / (self.gamma * q);
        if alpha <= 1.0 - 2.0 / self.p {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} does not exceed 1 - 2/p = {}",
                1.0 - 2.0 / self.p
            )));
        }
        Ok(alpha)
    }

    pub fn contains(&self, q: f64) -> bool {
        q > self.q_min && q < self.q_max
    }
}

/// Admissible `(q_min, q_max)` for the operator, dimension and nonlinearity `p`.
pub fn admissible_exponents(dim: usize, spec: &OperatorSpec, p: f64) -> Result<Admissible> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "dimension must be at least 2, got {dim}"
        )));
    }
    spec.validate(dim)?;
    let gamma = spec.order();
    if gamma != 1.0 && dim < 3 {
        return Err(Error::InvalidParameter(
            "fractional exponent ranges require N >= 3".into(),
        ));
    }
    let n = dim as f64;
    let p_denominator = (2.0 - gamma) * n - gamma;
    let p_max = if p_denominator > 0.0 {
        2.0 * gamma * (n + 1.0) / p_denominator
    } else {
        f64::INFINITY
    };
    if !(p > 2.0 && p < p_max) {
        return Err(Error::ExponentRange {
            p,
            low: 2.0,
            high: p_max,
        });
    }
    let q_min = 2.0 * (n + 1.0) / (n - 1.0);
    let q_denominator = (n - gamma) * p - 2.0 * gamma;
    let q_max = if q_denominator > 0.0 {
        2.0 * n * p / q_denominator
    } else {
        f64::INFINITY
    };
    if q_max <= q_min {
        return Err(Error::ExponentRange {
            p,
            low: 2.0,
            high: p_max,
        });
    }
    Ok(Admissible {
        dim,
        gamma,
        p,
        q_min,
        q_max,
    })
}

/// Duality map `|w|^{r-2} w`.
pub fn duality_power(w: f64, r: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w.abs().powf(r - 1.0).copysign(w)
    }
}

/// Lower estimate of `||R_k||_{r' -> r}` (unweighted) or `||w R_k w||_{r' -> r}`
/// (weighted by `weight = Q^{1/p}`), from seeded random starts refined by the
/// normalized duality-map power iteration.
pub fn estimate_operator_norm(
    resolvent: &Resolvent,
    k: i64,
    exponent: f64,
    weight: Option<&[f64]>,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    const STEPS: usize = 30;
    if trials < 16 {
        return Err(Error::InvalidParameter(format!(
            "need at least 16 trials, got {trials}"
        )));
    }
    if !(exponent > 2.0 && exponent.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target exponent must exceed 2, got {exponent}"
        )));
    }
    let grid = resolvent.grid();
    if let Some(w) = weight {
        check_len(grid.len(), w.len())?;
    }
    let conj = exponent / (exponent - 1.0);
    let m = multiplier(grid, resolvent.spec(), k, resolvent.params())?;
    let apply = |v: &[f64]| -> Result<Vec<f64>> {
        match weight {
            Some(w) => {
                let wv: Vec<f64> = v.iter().zip(w).map(|(a, b)| a * b).collect();
                let out = grid.apply_multiplier_real(&m, &wv)?;
                Ok(out.iter().zip(w).map(|(a, b)| a * b).collect())
            }
            None => grid.apply_multiplier_real(&m, v),
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k.unsigned_abs() << 32));
    let mut best = 0.0f64;
    for _ in 0..trials {
        let mut v: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..STEPS {
            let nv = grid.lp_norm(&v, conj);
            if nv == 0.0 {
                break;
            }
            let w = apply(&v)?;
            let ratio = grid.lp_norm(&w, exponent) / nv;
            best = best.max(ratio);
            if ratio == 0.0 {
                break;
            }
            v = w.iter().map(|&x| duality_power(x, exponent)).collect();
            let nv = grid.lp_norm(&v, conj);
            if nv == 0.0 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= nv);
        }
    }
    Ok(best)
}

/// Norm estimates over several modes with a log-log decay fit.
#[derive(Clone, Debug, PartialEq)]
pub struct NormDecayReport {
    pub entries: Vec<(i64, f64)>,
    /// Slope of `log ||R_k||` against `log(k^2 + 1)`.
    pub slope: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub alpha: f64,
}

impl NormDecayReport {
    /// Fitted slope does not exceed `-alpha/2 + slack`.
    pub fn passes(&self, slack: f64) -> bool {
        self.slope <= -self.alpha / 2.0 + slack
    }
}

pub fn norm_decay_report(
    resolvent: &Resolvent,
    modes: &[i64],
    exponent: f64,
    weight: Option<&[f64]>,
    trials: usize,
    seed: u64,
    alpha: f64,
) -> Result<NormDecayReport> {
    let mut entries = Vec::with_capacity(modes.len());
    for &k in modes {
        entries.push((k, estimate_operator_norm(resolvent, k, exponent, weight, trials, seed)?));
    }
    let points: Vec<(f64, f64)> = entries
        .iter()
        .filter(|(_, n)| *n > 0.0)
        .map(|&(k, n)| (((k * k + 1) as f64).ln(), n.ln()))
        .collect();
    let (slope, residual) = least_squares_slope(&points);
    Ok(NormDecayReport {
        entries,
        slope,
        residual,
        alpha,
    })
}

/// Least-squares slope and RMS residual of `y` against `x`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let rss: f64 = points
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    (slope, (rss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TWO_PI: f64 = 2.0 * PI;

    #[test]
    fn kernels_match_tabulated_values() {
        // Y0(1) = 0.088256964215676957, K0(1) = 0.42102443824070834.
        let lap = OperatorSpec::laplacian();
        let g2 = kernel_oracle(&lap, 2, 1, TWO_PI, 1.0).unwrap();
        assert!((g2 + 0.25 * 0.088256964215676957).abs() < 1e-12);
        let kg = OperatorSpec::KleinGordon { mass: 2.0 };
        let g2 = kernel_oracle(&kg, 2, 1, TWO_PI, 1.0 / 3f64.sqrt()).unwrap();
        assert!((g2 - 0.42102443824070834 / TWO_PI).abs() < 1e-12);
        let g3 = kernel_oracle(&lap, 3, 2, TWO_PI, 0.7).unwrap();
        assert!((g3 - (1.4f64).cos() / (4.0 * PI * 0.7)).abs() < 1e-15);
        assert!(kernel_oracle(&lap, 3, 1, TWO_PI, 0.0).is_err());
    }

    #[test]
    fn mode_checks() {
        let lap = OperatorSpec::laplacian();
        assert!(matches!(lap.check_mode(0, TWO_PI), Err(Error::ZeroModeInverse)));
        let kg = OperatorSpec::KleinGordon { mass: 2.0 };
        assert!(matches!(kg.check_mode(2, TWO_PI), Err(Error::Resonance { .. })));
        assert!(kg.is_coercive(1, TWO_PI) && !kg.is_coercive(3, TWO_PI));
        assert_eq!(shift(-3, TWO_PI), 3.0);
        let grid = SpaceGrid::new(2, 1.0, 4).unwrap();
        assert!(Resolvent::new(&grid, lap, ResolventParams::new(0.0, TWO_PI)).is_ok());
        let r = Resolvent::new(&grid, lap, ResolventParams::new(0.0, TWO_PI)).unwrap();
        assert!(r.apply(1, &[0.0; 16]).is_err());
        let free = Resolvent::new(&grid, lap, ResolventParams::new(1e-3, TWO_PI).free_space(2)).unwrap();
        assert!(matches!(free.apply(1, &[0.0; 16]), Err(Error::NotImplemented(_))));
    }

    #[test]
    fn wave_exponents_in_the_plane() {
        let a = admissible_exponents(2, &OperatorSpec::laplacian(), 3.0).unwrap();
        assert_eq!(a.q_min, 6.0);
        assert_eq!(a.q_max, 12.0);
        assert!((a.alpha(8.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(a.alpha(6.0).is_err());
        let err = admissible_exponents(2, &OperatorSpec::laplacian(), 2.0).unwrap_err();
        assert!(err.to_string().contains("2 < p"));
        assert!(admissible_exponents(2, &OperatorSpec::laplacian(), 6.0).is_err());
    }

    #[test]
    fn multiplier_at_zero_frequency() {
        let grid = SpaceGrid::new(2, 1.0, 4).unwrap();
        let eps = 1e-2;
        let m = multiplier(&grid, &OperatorSpec::laplacian(), 2, &ResolventParams::new(eps, TWO_PI)).unwrap();
        assert!((m[0] + 4.0 / (16.0 + eps * eps)).abs() < 1e-15);
    }

    #[test]
    fn slope_of_an_exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 1.0 - 0.25 * i as f64)).collect();
        let (slope, res) = least_squares_slope(&pts);
        assert!((slope + 0.25).abs() < 1e-15 && res < 1e-15);
        assert!(least_squares_slope(&pts[..1]).0.is_nan());
    }

    #[test]
    fn norm_estimate_grows_with_trials() {
        let grid = SpaceGrid::new(2, 4.0, 16).unwrap();
        let r = Resolvent::new(&grid, OperatorSpec::laplacian(), ResolventParams::new(1e-2, TWO_PI)).unwrap();
        assert!(estimate_operator_norm(&r, 1, 3.0, None, 8, 1).is_err());
        let a = estimate_operator_norm(&r, 1, 3.0, None, 16, 1).unwrap();
        let b = estimate_operator_norm(&r, 1, 3.0, None, 32, 1).unwrap();
        assert!(a > 0.0 && b >= a);
    }

    proptest! {
        #[test]
        fn resolvent_is_symmetric(
            f in proptest::collection::vec(-1.0f64..1.0, 256),
            g in proptest::collection::vec(-1.0f64..1.0, 256),
            k in 1i64..6,
            eps in 1e-3f64..1e-1,
        ) {
            let grid = SpaceGrid::new(2, 4.0, 16).unwrap();
            let r = Resolvent::new(&grid, OperatorSpec::laplacian(), ResolventParams::new(eps, TWO_PI)).unwrap();
            let a = grid.inner(&r.apply(k, &f).unwrap(), &g);
            let b = grid.inner(&f, &r.apply(k, &g).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
        }

        #[test]
        fn plane_wave_is_damped_by_the_regularization(
            m1 in -6i64..6, m2 in -6i64..6, k in 1i64..5, eps in 1e-3f64..1.0,
        ) {
            let grid = SpaceGrid::new(2, PI, 16).unwrap();
            let r = Resolvent::new(&grid, OperatorSpec::laplacian(), ResolventParams::new(eps, TWO_PI)).unwrap();
            let f: Vec<f64> = (0..grid.len())
                .map(|i| {
                    let x = grid.position(i);
                    (m1 as f64 * x[0] + m2 as f64 * x[1]).cos()
                })
                .collect();
            let d = (m1 * m1 + m2 * m2 - k * k) as f64;
            let u = r.apply(k, &f).unwrap();
            let expected = d / (d * d + eps * eps);
            for (a, b) in u.iter().zip(&f) {
                prop_assert!((a - expected * b).abs() < 1e-10);
            }
        }
    }
}
