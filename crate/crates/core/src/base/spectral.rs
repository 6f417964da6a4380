//! Periodic tensor grids with Fourier differentiation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on `∏ [0, L_i)`; nodes are stored row-major
/// (last axis fastest).
pub struct SpectralGrid {
    periods: Vec<f64>,
    sizes: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// Angular wavenumbers per axis, Nyquist kept (for even-order operators).
    wavenumbers: Vec<Vec<f64>>,
    /// Same, with the Nyquist mode zeroed (for first derivatives).
    wavenumbers_odd: Vec<Vec<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("periods", &self.periods)
            .field("sizes", &self.sizes)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(periods: &[f64], sizes: &[usize]) -> Result<Self> {
        if periods.is_empty() || periods.len() > 3 {
            return Err(Error::Unsupported(format!(
                "spectral grids support 1 to 3 dimensions, got {}",
                periods.len()
            )));
        }
        if periods.len() != sizes.len() {
            return Err(Error::Config("grid sizes must match the number of periods".into()));
        }
        if let Some(p) = periods.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
            return Err(Error::Domain(format!("torus periods must be positive, got {p}")));
        }
        if let Some(n) = sizes.iter().find(|n| **n < 3) {
            return Err(Error::Domain(format!("grid size must be at least 3, got {n}")));
        }
        let mut planner = FftPlanner::new();
        let forward = sizes.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = sizes.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let wave = |n: usize, l: f64, keep_nyquist: bool| -> Vec<f64> {
            (0..n)
                .map(|j| {
                    if !keep_nyquist && n.is_multiple_of(2) && j == n / 2 {
                        return 0.0;
                    }
                    let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                    2.0 * PI * m / l
                })
                .collect()
        };
        let wavenumbers = sizes.iter().zip(periods).map(|(&n, &l)| wave(n, l, true)).collect();
        let wavenumbers_odd = sizes.iter().zip(periods).map(|(&n, &l)| wave(n, l, false)).collect();
        Ok(SpectralGrid {
            periods: periods.to_vec(),
            sizes: sizes.to_vec(),
            forward,
            inverse,
            wavenumbers,
            wavenumbers_odd,
        })
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn node_count(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Exact cell weight (uniform).
    pub fn cell_weight(&self) -> f64 {
        self.periods.iter().product::<f64>() / self.node_count() as f64
    }

    /// Largest grid spacing.
    pub fn spacing(&self) -> f64 {
        self.periods
            .iter()
            .zip(&self.sizes)
            .map(|(l, &n)| l / n as f64)
            .fold(0.0, f64::max)
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.dim()];
        for a in (0..self.dim().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.sizes[a + 1];
        }
        s
    }

    /// Multi-index of a flat node index.
    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = idx % self.sizes[a];
            idx /= self.sizes[a];
        }
        out
    }

    /// Coordinates of a node, padded with zeros to three components.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let mut c = [0.0; 3];
        for (a, j) in self.multi_index(idx).into_iter().enumerate() {
            c[a] = self.periods[a] * j as f64 / self.sizes[a] as f64;
        }
        c
    }

    #[allow(clippy::needless_range_loop)]
    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let strides = self.strides();
        let total = self.node_count();
        for axis in 0..self.dim() {
            let n = self.sizes[axis];
            let stride = strides[axis];
            let plan = if inverse { &self.inverse[axis] } else { &self.forward[axis] };
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for start in 0..total {
                // line starts are the indices whose coordinate on `axis` is zero
                if !(start / stride).is_multiple_of(n) {
                    continue;
                }
                for j in 0..n {
                    line[j] = data[start + j * stride];
                }
                plan.process(&mut line);
                for j in 0..n {
                    data[start + j * stride] = line[j];
                }
            }
        }
        if inverse {
            let scale = 1.0 / total as f64;
            for z in data.iter_mut() {
                *z *= scale;
            }
        }
    }

    /// Applies a Fourier multiplier that annihilates constants; the input is
    /// shifted by its first value so constant fields map to exact zeros.
    fn apply_derivative(&self, u: &[f64], symbol: impl Fn(&[usize]) -> Complex64) -> Vec<f64> {
        let base = u.first().copied().unwrap_or(0.0);
        let shifted: Vec<f64> = u.iter().map(|x| x - base).collect();
        self.apply_symbol(&shifted, symbol)
    }

    fn apply_symbol(&self, u: &[f64], symbol: impl Fn(&[usize]) -> Complex64) -> Vec<f64> {
        let mut data: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut data, false);
        for (idx, z) in data.iter_mut().enumerate() {
            *z *= symbol(&self.multi_index(idx));
        }
        self.transform(&mut data, true);
        data.into_iter().map(|z| z.re).collect()
    }

    fn k_sq(&self, mi: &[usize]) -> f64 {
        mi.iter()
            .enumerate()
            .map(|(a, &j)| self.wavenumbers[a][j].powi(2))
            .sum()
    }

    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        self.apply_derivative(u, |mi| Complex64::new(-self.k_sq(mi), 0.0))
    }

    pub fn partial(&self, u: &[f64], axis: usize) -> Vec<f64> {
        self.apply_derivative(u, |mi| Complex64::new(0.0, self.wavenumbers_odd[axis][mi[axis]]))
    }

    /// Pointwise `Σ_a (∂_a u)²`.
    pub fn grad_sq(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for axis in 0..self.dim() {
            for (o, d) in out.iter_mut().zip(self.partial(u, axis)) {
                *o += d * d;
            }
        }
        out
    }

    /// Solves `(−Δ + shift) x = rhs` exactly in Fourier space.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        self.apply_symbol(rhs, |mi| Complex64::new(1.0 / (self.k_sq(mi) + shift), 0.0))
    }

    /// Smallest positive eigenvalue of the discrete `−Δ`, read off its symbol.
    pub fn first_eigenvalue(&self) -> f64 {
        self.wavenumbers
            .iter()
            .map(|k| k.iter().map(|x| x * x).filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min)
    }
}
