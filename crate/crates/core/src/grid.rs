use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};

/// Lines gathered per batch when transforming along a strided axis.
const LINE_BATCH: usize = 64;

/// Separable FFT over a cube of `points^dim` values stored in row-major order.
#[derive(Clone)]
pub struct CubeFft {
    dim: usize,
    points: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for CubeFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CubeFft")
            .field("dim", &self.dim)
            .field("points", &self.points)
            .finish()
    }
}

impl CubeFft {
    pub fn new(dim: usize, points: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            points,
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
        }
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &*self.forward);
    }

    /// Inverse transform including the 1/len normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &*self.inverse);
        let scale = 1.0 / self.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        let n = self.points;
        let total = data.len();
        debug_assert_eq!(total, self.len());
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // last axis is contiguous
        fft.process_with_scratch(data, &mut scratch);
        let mut buf = vec![Complex64::default(); n * LINE_BATCH];
        for axis in 0..self.dim.saturating_sub(1) {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let outer = total / (stride * n);
            for o in 0..outer {
                let base = o * stride * n;
                let mut j0 = 0;
                while j0 < stride {
                    let width = LINE_BATCH.min(stride - j0);
                    let lines = &mut buf[..width * n];
                    for i in 0..n {
                        let row = base + i * stride + j0;
                        for (w, z) in data[row..row + width].iter().enumerate() {
                            lines[w * n + i] = *z;
                        }
                    }
                    fft.process_with_scratch(lines, &mut scratch);
                    for i in 0..n {
                        let row = base + i * stride + j0;
                        for (w, z) in data[row..row + width].iter_mut().enumerate() {
                            *z = lines[w * n + i];
                        }
                    }
                    j0 += width;
                }
            }
        }
    }
}

/// Signed lattice index of FFT bin `i` on `n` points.
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Periodic box `[-L, L)^N` sampled at `n` points per axis.
#[derive(Clone, Debug)]
pub struct SpaceGrid {
    dim: usize,
    half_width: f64,
    points: usize,
    fft: CubeFft,
}

impl SpaceGrid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "spatial dimension must be 2 or 3, got {dim}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "box half-width must be positive, got {half_width}"
            )));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "points per axis must be a power of two >= 2, got {points}"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            points,
            fft: CubeFft::new(dim, points),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Per-axis indices of a flat index.
    pub fn indices(&self, flat: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % self.points;
            rest /= self.points;
        }
        out
    }

    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.indices(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.coordinate(idx[axis]);
        }
        x
    }

    pub fn radius(&self, flat: usize) -> f64 {
        self.position(flat).iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.radius(i)).collect()
    }

    /// Angular wavenumber of FFT bin `i` on one axis.
    pub fn wavenumber(&self, i: usize) -> f64 {
        PI / self.half_width * signed_index(i, self.points) as f64
    }

    /// Wave vector of a flat frequency index.
    pub fn wave_vector(&self, flat: usize) -> [f64; 3] {
        let idx = self.indices(flat);
        let mut xi = [0.0; 3];
        for axis in 0..self.dim {
            xi[axis] = self.wavenumber(idx[axis]);
        }
        xi
    }

    /// `|xi|^2` for every frequency bin, in FFT order.
    pub fn xi_squared(&self) -> Vec<f64> {
        let k2: Vec<f64> = (0..self.points).map(|i| self.wavenumber(i).powi(2)).collect();
        (0..self.len())
            .map(|flat| {
                let idx = self.indices(flat);
                idx[..self.dim].iter().map(|&i| k2[i]).sum()
            })
            .collect()
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.fft.forward(data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.fft.inverse(data);
    }

    /// Apply a real Fourier multiplier to a complex field.
    pub fn apply_multiplier(&self, symbol: &[f64], field: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.len(), symbol.len())?;
        check_len(self.len(), field.len())?;
        let mut data = field.to_vec();
        self.forward(&mut data);
        for (z, m) in data.iter_mut().zip(symbol) {
            *z *= *m;
        }
        self.inverse(&mut data);
        Ok(data)
    }

    /// Apply a real, even Fourier multiplier to a real field.
    pub fn apply_multiplier_real(&self, symbol: &[f64], field: &[f64]) -> Result<Vec<f64>> {
        let data: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Ok(self
            .apply_multiplier(symbol, &data)?
            .into_iter()
            .map(|z| z.re)
            .collect())
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.cell_volume() * f.iter().sum::<f64>()
    }

    /// Discrete L^2 pairing `h^N sum f g`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.cell_volume() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Real part of `h^N sum f conj(g)`.
    pub fn inner_complex(&self, f: &[Complex64], g: &[Complex64]) -> f64 {
        self.cell_volume()
            * f.iter()
                .zip(g)
                .map(|(a, b)| a.re * b.re + a.im * b.im)
                .sum::<f64>()
    }

    pub fn lp_norm(&self, f: &[f64], p: f64) -> f64 {
        (self.cell_volume() * f.iter().map(|x| x.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
    }

    pub fn l2_norm_complex(&self, f: &[Complex64]) -> f64 {
        (self.cell_volume() * f.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(SpaceGrid::new(1, 1.0, 8).is_err());
        assert!(SpaceGrid::new(2, 0.0, 8).is_err());
        assert!(SpaceGrid::new(2, 1.0, 12).is_err());
    }

    #[test]
    fn geometry() {
        let g = SpaceGrid::new(2, 16.0, 128).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.cell_volume(), 0.0625);
        assert_eq!(g.coordinate(0), -16.0);
        assert_eq!(g.coordinate(64), 0.0);
        let flat = 3 * 128 + 70;
        assert_eq!(g.indices(flat), [3, 70, 0]);
        assert_eq!(g.position(flat), [-15.25, 1.5, 0.0]);
        assert_eq!(signed_index(127, 128), -1);
        assert_eq!(signed_index(64, 128), -64);
    }

    #[test]
    fn laplacian_of_a_plane_wave() {
        let g = SpaceGrid::new(2, PI, 16).unwrap();
        let f: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.position(i);
                (2.0 * x[0] + 3.0 * x[1]).cos()
            })
            .collect();
        let lap = g.apply_multiplier_real(&g.xi_squared(), &f).unwrap();
        for (a, b) in lap.iter().zip(&f) {
            assert!((a - 13.0 * b).abs() < 1e-11);
        }
    }

    #[test]
    fn multiplier_length_is_checked() {
        let g = SpaceGrid::new(2, 1.0, 8).unwrap();
        assert!(g.apply_multiplier_real(&[1.0; 3], &[0.0; 64]).is_err());
    }

    proptest! {
        #[test]
        fn fft_round_trip_and_parseval(values in proptest::collection::vec(-1.0f64..1.0, 2 * 64)) {
            let g = SpaceGrid::new(2, 3.0, 8).unwrap();
            let field: Vec<Complex64> = values.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
            let mut data = field.clone();
            g.forward(&mut data);
            let spectral: f64 = data.iter().map(|z| z.norm_sqr()).sum::<f64>() / g.len() as f64;
            let physical: f64 = field.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((spectral - physical).abs() <= 1e-12 * physical.max(1.0));
            g.inverse(&mut data);
            for (a, b) in data.iter().zip(&field) {
                prop_assert!((a - b).norm() < 1e-13);
            }
        }

        #[test]
        fn real_even_multiplier_is_symmetric(
            f in proptest::collection::vec(-1.0f64..1.0, 64),
            h in proptest::collection::vec(-1.0f64..1.0, 64),
        ) {
            let g = SpaceGrid::new(2, 2.0, 8).unwrap();
            let symbol: Vec<f64> = g.xi_squared().iter().map(|s| 1.0 / (1.0 + s)).collect();
            let a = g.inner(&g.apply_multiplier_real(&symbol, &f).unwrap(), &h);
            let b = g.inner(&f, &g.apply_multiplier_real(&symbol, &h).unwrap());
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
