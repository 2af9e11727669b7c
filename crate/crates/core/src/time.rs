use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::grid::SpaceGrid;
use crate::symmetry::{mode_set, SymmetryClass};

/// Relative imaginary residual tolerated when synthesizing a real signal.
pub const REALITY_TOL: f64 = 1e-10;

/// Uniform sampling of one time period.
#[derive(Clone)]
pub struct TimeGrid {
    period: f64,
    samples: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TimeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeGrid")
            .field("period", &self.period)
            .field("samples", &self.samples)
            .finish()
    }
}

impl TimeGrid {
    pub fn new(period: f64, samples: usize) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "period must be positive, got {period}"
            )));
        }
        if samples == 0 {
            return Err(Error::InvalidParameter("need at least one time sample".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            period,
            samples,
            forward: planner.plan_fft_forward(samples),
            inverse: planner.plan_fft_inverse(samples),
        })
    }

    /// Smallest grid with at least `min_samples` points whose sample set is
    /// closed under the time symmetry of `sym`, so that modes up to
    /// `max_cutoff()` and samples of class-`sym` signals are in bijection.
    pub fn for_symmetry(sym: SymmetryClass, period: f64, min_samples: usize) -> Result<Self> {
        let fits = |m: usize| match sym {
            SymmetryClass::General | SymmetryClass::Even | SymmetryClass::Odd => m % 2 == 1,
            SymmetryClass::HalfPeriodic => m % 4 == 2,
            SymmetryClass::HalfAntiperiodic => m % 4 == 0,
        };
        let m = (min_samples.max(1)..).find(|&m| fits(m)).unwrap_or(min_samples);
        Self::new(period, m)
    }

    /// Default sampling for fields with mode cutoff `cutoff`.
    pub fn default_for(sym: SymmetryClass, period: f64, cutoff: usize) -> Result<Self> {
        Self::for_symmetry(sym, period, 64.max(8 * (cutoff + 1)))
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Largest cutoff `K` with `2K < M`.
    pub fn max_cutoff(&self) -> usize {
        (self.samples - 1) / 2
    }

    /// Quadrature weight `T/M`.
    pub fn weight(&self) -> f64 {
        self.period / self.samples as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples).map(|j| j as f64 * self.weight()).collect()
    }

    fn bin(&self, k: i64) -> usize {
        k.rem_euclid(self.samples as i64) as usize
    }
}

/// Real space-time samples on a uniform time grid, stored point-major:
/// `values[x * M + j]` is the value at time `t_j` and grid point `x`.
#[derive(Clone, Debug)]
pub struct Samples {
    time: TimeGrid,
    points: usize,
    values: Vec<f64>,
}

impl Samples {
    pub fn new(time: TimeGrid, points: usize, values: Vec<f64>) -> Result<Self> {
        check_len(time.samples() * points, values.len())?;
        Ok(Self {
            time,
            points,
            values,
        })
    }

    pub fn zeros(time: TimeGrid, points: usize) -> Self {
        let values = vec![0.0; time.samples() * points];
        Self {
            time,
            points,
            values,
        }
    }

    /// Sample `f(t, x)` on the time grid and the spatial grid.
    pub fn from_fn(time: &TimeGrid, grid: &SpaceGrid, f: impl Fn(f64, [f64; 3]) -> f64) -> Self {
        let times = time.times();
        let mut values = Vec::with_capacity(times.len() * grid.len());
        for x in 0..grid.len() {
            let pos = grid.position(x);
            values.extend(times.iter().map(|&t| f(t, pos)));
        }
        Self {
            time: time.clone(),
            points: grid.len(),
            values,
        }
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.time
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Samples of a single grid point.
    pub fn series(&self, x: usize) -> &[f64] {
        let m = self.time.samples();
        &self.values[x * m..(x + 1) * m]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            time: self.time.clone(),
            points: self.points,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `T/M h^N sum V W`.
    pub fn inner(&self, other: &Samples, grid: &SpaceGrid) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        s * self.time.weight() * grid.cell_volume()
    }

    /// `int int |V|^r` by uniform quadrature.
    pub fn power_integral(&self, grid: &SpaceGrid, r: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.abs().powf(r)).sum();
        s * self.time.weight() * grid.cell_volume()
    }

    /// Space-time `L^r` norm.
    pub fn lp_norm(&self, grid: &SpaceGrid, r: f64) -> f64 {
        self.power_integral(grid, r).powf(1.0 / r)
    }

    /// Per-point `L^p(T)` norm.
    pub fn time_norms(&self, p: f64) -> Vec<f64> {
        let w = self.time.weight();
        (0..self.points)
            .map(|x| {
                let s: f64 = self.series(x).iter().map(|v| v.abs().powf(p)).sum();
                (w * s).powf(1.0 / p)
            })
            .collect()
    }
}

/// Mixed norm `( int ( int_T |W|^p dt )^{q/p} dx )^{1/q}`.
pub fn mixed_norm(samples: &Samples, grid: &SpaceGrid, q: f64, p: f64) -> Result<f64> {
    if !(q > 1.0 && p > 1.0 && q.is_finite() && p.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mixed norm exponents must lie in (1, inf), got q = {q}, p = {p}"
        )));
    }
    check_len(grid.len(), samples.points())?;
    let s: f64 = samples.time_norms(p).iter().map(|n| n.powf(q)).sum();
    Ok((grid.cell_volume() * s).powf(1.0 / q))
}

/// Truncated Fourier-in-time family `V(t, x) = sum_k e^{i k w t} v_k(x)`,
/// `w = 2 pi / T`, restricted to the modes of a symmetry class.
#[derive(Clone, Debug)]
pub struct TimeField {
    grid: SpaceGrid,
    symmetry: SymmetryClass,
    period: f64,
    cutoff: usize,
    modes: Vec<i64>,
    data: Vec<Vec<Complex64>>,
}

impl TimeField {
    pub fn zeros(grid: &SpaceGrid, symmetry: SymmetryClass, period: f64, cutoff: usize) -> Self {
        let modes = mode_set(symmetry, cutoff);
        let data = vec![vec![Complex64::default(); grid.len()]; modes.len()];
        Self {
            grid: grid.clone(),
            symmetry,
            period,
            cutoff,
            modes,
            data,
        }
    }

    /// Build from explicit modes; absent admissible modes are zero. Rejects
    /// modes outside the class or cutoff and fields violating the per-mode
    /// constraint by more than `REALITY_TOL` relative.
    pub fn from_modes(
        grid: &SpaceGrid,
        symmetry: SymmetryClass,
        period: f64,
        cutoff: usize,
        modes: impl IntoIterator<Item = (i64, Vec<Complex64>)>,
    ) -> Result<Self> {
        let mut field = Self::zeros(grid, symmetry, period, cutoff);
        for (k, v) in modes {
            check_len(grid.len(), v.len())?;
            match field.slot(k) {
                Some(i) => field.data[i] = v,
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "mode {k} is not admissible for class {symmetry} with cutoff {cutoff}"
                    )))
                }
            }
        }
        let projected = field.project(symmetry);
        let mut diff = 0.0f64;
        let mut scale = 0.0f64;
        for (a, b) in field.data.iter().zip(&projected.data) {
            for (x, y) in a.iter().zip(b) {
                diff = diff.max((x - y).norm());
                scale = scale.max(x.norm());
            }
        }
        if diff > REALITY_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::SymmetryViolation {
                max_imag: diff,
                relative: diff / scale,
            });
        }
        Ok(field)
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn symmetry(&self) -> SymmetryClass {
        self.symmetry
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Angular base frequency `2 pi / T`.
    pub fn frequency(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn modes(&self) -> &[i64] {
        &self.modes
    }

    fn slot(&self, k: i64) -> Option<usize> {
        self.modes.binary_search(&k).ok()
    }

    pub fn mode(&self, k: i64) -> Option<&[Complex64]> {
        self.slot(k).map(|i| self.data[i].as_slice())
    }

    pub fn mode_mut(&mut self, k: i64) -> Option<&mut [Complex64]> {
        self.slot(k).map(move |i| self.data[i].as_mut_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &[Complex64])> {
        self.modes.iter().copied().zip(self.data.iter().map(|v| v.as_slice()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (i64, &mut Vec<Complex64>)> {
        self.modes.iter().copied().zip(self.data.iter_mut())
    }

    /// Replace every mode by `f(k, v_k)`, keeping the layout.
    pub fn map_modes(&self, f: impl Fn(i64, &[Complex64]) -> Vec<Complex64> + Sync) -> Self {
        use rayon::prelude::*;
        let data: Vec<Vec<Complex64>> = self
            .modes
            .par_iter()
            .zip(self.data.par_iter())
            .map(|(&k, v)| f(k, v))
            .collect();
        Self {
            data,
            ..self.layout()
        }
    }

    fn layout(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            symmetry: self.symmetry,
            period: self.period,
            cutoff: self.cutoff,
            modes: self.modes.clone(),
            data: Vec::new(),
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            for z in v.iter_mut() {
                *z *= c;
            }
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// `self += a * other`, matching modes by frequency.
    pub fn axpy(&mut self, a: f64, other: &TimeField) {
        for (k, w) in other.iter() {
            if let Some(v) = self.mode_mut(k) {
                for (x, y) in v.iter_mut().zip(w) {
                    *x += a * y;
                }
            }
        }
    }

    /// Space-time pairing `int_T int V W = T sum_k Re int v_k conj(w_k)`.
    pub fn pairing(&self, other: &TimeField) -> f64 {
        let mut s = 0.0;
        for (k, v) in self.iter() {
            if let Some(w) = other.mode(k) {
                s += self.grid.inner_complex(v, w);
            }
        }
        self.period * s
    }

    pub fn l2_norm(&self) -> f64 {
        self.pairing(self).max(0.0).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.iter().all(|z| *z == Complex64::default()))
    }

    /// Spatial `L^r` norm of `|v_k|` per mode.
    pub fn mode_norms(&self, r: f64) -> Vec<(i64, f64)> {
        let h = self.grid.cell_volume();
        self.iter()
            .map(|(k, v)| {
                let s: f64 = v.iter().map(|z| z.norm().powf(r)).sum();
                (k, (h * s).powf(1.0 / r))
            })
            .collect()
    }

    /// Same signal with a different cutoff (truncating or zero-padding).
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut out = Self::zeros(&self.grid, self.symmetry, self.period, cutoff);
        for (k, v) in out.iter_mut() {
            if let Some(w) = self.mode(k) {
                v.copy_from_slice(w);
            }
        }
        out
    }

    /// Orthogonal projection onto class `sym` in the discrete L^2 pairing.
    pub fn project(&self, sym: SymmetryClass) -> Self {
        let mut out = Self::zeros(&self.grid, sym, self.period, self.cutoff);
        let zero = Complex64::default();
        let n = self.grid.len();
        for k in 0..=self.cutoff as i64 {
            if !sym.contains(k) {
                continue;
            }
            if k == 0 {
                if let (Some(src), Some(dst)) = (self.mode(0), out.mode_mut(0)) {
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d = sym.project_zero(*s);
                    }
                }
                continue;
            }
            let mut plus = vec![zero; n];
            let mut minus = vec![zero; n];
            for x in 0..n {
                let a = self.mode(k).map_or(zero, |v| v[x]);
                let b = self.mode(-k).map_or(zero, |v| v[x]);
                let (p, m) = sym.project_pair(a, b);
                plus[x] = p;
                minus[x] = m;
            }
            let (ip, im) = (out.slot(k).expect("admissible"), out.slot(-k).expect("admissible"));
            out.data[ip] = plus;
            out.data[im] = minus;
        }
        out
    }

    /// Evaluate on arbitrary times; one spatial field per time.
    pub fn synthesize(&self, times: &[f64]) -> Result<Vec<Vec<f64>>> {
        let w = self.frequency();
        let mut out = Vec::with_capacity(times.len());
        let mut max_re = 0.0f64;
        let mut max_im = 0.0f64;
        for &t in times {
            let mut acc = vec![Complex64::default(); self.grid.len()];
            for (k, v) in self.iter() {
                let phase = Complex64::from_polar(1.0, k as f64 * w * t);
                for (a, z) in acc.iter_mut().zip(v) {
                    *a += phase * z;
                }
            }
            for z in &acc {
                max_re = max_re.max(z.re.abs());
                max_im = max_im.max(z.im.abs());
            }
            out.push(acc.into_iter().map(|z| z.re).collect());
        }
        check_reality(max_re, max_im)?;
        Ok(out)
    }

    /// Evaluate on a uniform time grid by FFT.
    pub fn synthesize_uniform(&self, time: &TimeGrid) -> Result<Samples> {
        if (time.period() - self.period).abs() > 1e-12 * self.period {
            return Err(Error::InvalidParameter(format!(
                "time grid period {} differs from field period {}",
                time.period(),
                self.period
            )));
        }
        let m = time.samples();
        if 2 * self.cutoff >= m {
            return Err(Error::Aliasing {
                samples: m,
                cutoff: self.cutoff,
            });
        }
        let n = self.grid.len();
        let mut buf = vec![Complex64::default(); m * n];
        for (k, v) in self.iter() {
            let b = time.bin(k);
            for (x, z) in v.iter().enumerate() {
                buf[x * m + b] = *z;
            }
        }
        time.inverse.process(&mut buf);
        let (max_re, max_im) = buf.iter().fold((0.0f64, 0.0f64), |(r, i), z| {
            (r.max(z.re.abs()), i.max(z.im.abs()))
        });
        check_reality(max_re, max_im)?;
        Samples::new(time.clone(), n, buf.into_iter().map(|z| z.re).collect())
    }

    /// Time-Fourier modes of real samples, projected onto class `sym`.
    pub fn analyze(
        samples: &Samples,
        grid: &SpaceGrid,
        sym: SymmetryClass,
        cutoff: usize,
    ) -> Result<Self> {
        let time = samples.time_grid();
        let m = time.samples();
        if 2 * cutoff >= m {
            return Err(Error::Aliasing {
                samples: m,
                cutoff,
            });
        }
        let n = grid.len();
        check_len(n, samples.points())?;
        let mut buf: Vec<Complex64> = samples
            .values()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        time.forward.process(&mut buf);
        let inv = 1.0 / m as f64;
        let mut raw = Self::zeros(grid, SymmetryClass::General, time.period(), cutoff);
        for (k, v) in raw.iter_mut() {
            let b = time.bin(k);
            for (x, z) in v.iter_mut().enumerate() {
                *z = buf[x * m + b] * inv;
            }
        }
        Ok(raw.project(sym))
    }
}

fn check_reality(max_re: f64, max_im: f64) -> Result<()> {
    let scale = max_re.max(max_im);
    if scale > 0.0 && max_im > REALITY_TOL * scale {
        return Err(Error::SymmetryViolation {
            max_imag: max_im,
            relative: max_im / scale,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> SpaceGrid {
        SpaceGrid::new(2, 2.0, 4).unwrap()
    }

    fn random(sym: SymmetryClass, cutoff: usize, seed: u64) -> TimeField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = TimeField::zeros(&grid(), SymmetryClass::General, 2.0 * PI, cutoff);
        for (_, v) in f.iter_mut() {
            for z in v.iter_mut() {
                *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        f.project(sym)
    }

    #[test]
    fn sample_counts_respect_the_class() {
        let m = |sym, min| TimeGrid::for_symmetry(sym, 1.0, min).unwrap().samples();
        assert_eq!(m(SymmetryClass::Odd, 64), 65);
        assert_eq!(m(SymmetryClass::HalfPeriodic, 64), 66);
        assert_eq!(m(SymmetryClass::HalfAntiperiodic, 65), 68);
        let benchmark = TimeGrid::default_for(SymmetryClass::Odd, 2.0 * PI, 7).unwrap();
        assert_eq!(benchmark.samples(), 65);
        assert_eq!(benchmark.max_cutoff(), 32);
    }

    #[test]
    fn aliasing_is_rejected() {
        let f = random(SymmetryClass::General, 4, 1);
        let time = TimeGrid::new(2.0 * PI, 8).unwrap();
        assert!(matches!(f.synthesize_uniform(&time), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn foreign_modes_are_rejected() {
        let g = grid();
        let bad = TimeField::from_modes(&g, SymmetryClass::Odd, 1.0, 3, [(4, vec![Complex64::default(); g.len()])]);
        assert!(bad.is_err());
        let one_sided = TimeField::from_modes(&g, SymmetryClass::Odd, 1.0, 3, [(1, vec![Complex64::new(0.0, 1.0); g.len()])]);
        assert!(matches!(one_sided, Err(Error::SymmetryViolation { .. })));
    }

    #[test]
    fn uniform_and_pointwise_synthesis_agree() {
        let f = random(SymmetryClass::HalfAntiperiodic, 5, 2);
        let time = TimeGrid::default_for(f.symmetry(), f.period(), 5).unwrap();
        let fast = f.synthesize_uniform(&time).unwrap();
        let slow = f.synthesize(&time.times()).unwrap();
        let m = time.samples();
        for (j, field) in slow.iter().enumerate() {
            for (x, v) in field.iter().enumerate() {
                assert!((fast.values()[x * m + j] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn half_periodic_signals_repeat() {
        let f = random(SymmetryClass::HalfPeriodic, 6, 3);
        let half = 0.5 * f.period();
        let s = f.synthesize(&[0.3, 0.3 + half]).unwrap();
        for (a, b) in s[0].iter().zip(&s[1]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn analyze_inverts_synthesis(seed in 0u64..1000, s in 1u8..=5, cutoff in 1usize..8) {
            let sym = SymmetryClass::from_index(s).unwrap();
            let f = random(sym, cutoff, seed);
            let time = TimeGrid::default_for(sym, f.period(), cutoff).unwrap();
            let samples = f.synthesize_uniform(&time).unwrap();
            let back = TimeField::analyze(&samples, &grid(), sym, cutoff).unwrap();
            let mut diff = back.clone();
            diff.axpy(-1.0, &f);
            prop_assert!(diff.l2_norm() < 1e-12 * f.l2_norm());
            // Parseval between the modal pairing and the sampled space-time integral.
            let direct = samples.inner(&samples, &grid());
            prop_assert!((direct - f.pairing(&f)).abs() < 1e-11 * direct);
        }

        #[test]
        fn projection_is_idempotent(seed in 0u64..1000, s in 1u8..=5) {
            let sym = SymmetryClass::from_index(s).unwrap();
            let f = random(sym, 6, seed);
            let mut diff = f.project(sym);
            diff.axpy(-1.0, &f);
            prop_assert!(diff.l2_norm() <= 1e-14 * f.l2_norm());
        }
    }
}
