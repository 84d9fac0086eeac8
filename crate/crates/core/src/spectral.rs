//! Uniform periodic grid, discrete continuous-Fourier transforms and circular
//! convolution.
//!
//! Grid points are `x_i = -L/2 + i·dx`, so `x = 0` sits at index `n/2`.
//! Spectra are stored in FFT order: index `k < n/2` holds `λ = 2πk/L`, index
//! `k ≥ n/2` holds `λ = 2π(k - n)/L`.
//!
//! The forward transform is the Riemann sum `dx Σ f(x_i) e^{-iλ x_i}` and the
//! inverse is `(1/L) Σ F(λ_k) e^{iλ_k x}`, the discrete counterparts of the
//! continuous pair without any `1/√(2π)` symmetrization.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

/// Residual imaginary magnitude (relative to the peak real magnitude, floored
/// at one) above which an inverse transform is rejected.
pub const IMAGINARY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpatialGrid {
    n_points: usize,
    length: f64,
}

impl SpatialGrid {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::domain(format!(
                "grid size must be a power of two >= 8, got {n_points}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::domain(format!(
                "grid length must be positive, got {length}"
            )));
        }
        Ok(Self { n_points, length })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Index of the grid point `x = 0`.
    pub fn origin(&self) -> usize {
        self.n_points / 2
    }

    /// Angular frequency stored at FFT-order index `k`.
    pub fn frequency(&self, k: usize) -> f64 {
        let n = self.n_points as isize;
        let signed = if (k as isize) < n / 2 {
            k as isize
        } else {
            k as isize - n
        };
        2.0 * PI * signed as f64 / self.length
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.frequency(k)).collect()
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.dx()
    }

    /// Indices of grid points with `|x| <= half_width`.
    pub fn window(&self, half_width: f64) -> Vec<usize> {
        let tol = 1e-12 * self.length;
        (0..self.n_points)
            .filter(|&i| self.x(i).abs() <= half_width + tol)
            .collect()
    }

    /// Index of the grid point closest to `x` (with periodic wrap).
    pub fn nearest_index(&self, x: f64) -> usize {
        let shifted = crate::kernels::wrap(x, self.length) + 0.5 * self.length;
        ((shifted / self.dx()).round() as usize) % self.n_points
    }

    pub(crate) fn check_same(&self, other: &SpatialGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for SpatialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "grid(n={}, L={})", self.n_points, self.length)
    }
}

/// Real samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    grid: SpatialGrid,
    samples: Vec<f64>,
}

impl Signal {
    pub fn new(grid: SpatialGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.n_points() {
            return Err(Error::domain(format!(
                "expected {} samples, got {}",
                grid.n_points(),
                samples.len()
            )));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self {
            grid,
            samples: vec![0.0; grid.n_points()],
        }
    }

    /// Discrete delta of height `1/dx` at `x = 0` (unit mass).
    pub fn delta(grid: SpatialGrid) -> Self {
        let mut s = Self::zeros(grid);
        s.samples[grid.origin()] = 1.0 / grid.dx();
        s
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.samples.iter().map(|&v| f(v)).collect())
    }

    /// Riemann sum `dx Σ f_i`.
    pub fn sum_integral(&self) -> f64 {
        self.grid.dx() * self.samples.iter().sum::<f64>()
    }

    /// Circular shift by `k` grid points towards larger `x`.
    pub fn shifted(&self, k: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.rotate_right(k % self.grid.n_points());
        Self {
            grid: self.grid,
            samples,
        }
    }
}

/// Complex samples at the grid frequencies, FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: SpatialGrid,
    samples: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: SpatialGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n_points() {
            return Err(Error::domain(format!(
                "expected {} spectral samples, got {}",
                grid.n_points(),
                samples.len()
            )));
        }
        Ok(Self { grid, samples })
    }

    /// Sample a real-valued analytic spectrum at the grid frequencies.
    pub fn from_real_fn(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        let samples = (0..grid.n_points())
            .map(|k| Complex64::new(f(grid.frequency(k)), 0.0))
            .collect();
        Self { grid, samples }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    /// Pointwise product.
    pub fn multiply(&self, other: &Spectrum) -> Result<Spectrum> {
        self.grid.check_same(&other.grid)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Spectrum {
            grid: self.grid,
            samples,
        })
    }

    /// Largest deviation from `F(-λ) = conj(F(λ))`, ignoring the unpaired
    /// Nyquist bin.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let n = self.grid.n_points();
        (1..n / 2)
            .map(|k| (self.samples[k] - self.samples[n - k].conj()).norm())
            .fold(self.samples[0].im.abs(), f64::max)
    }
}

fn parity_sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `dx Σ_i f(x_i) e^{-iλ_k x_i}` for every grid frequency.
pub fn forward_transform(f: &Signal) -> Spectrum {
    let grid = f.grid;
    let n = grid.n_points();
    let mut buf: Vec<Complex64> = f.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let dx = grid.dx();
    // x_0 = -L/2 contributes the phase e^{iλ_k L/2} = (-1)^k.
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= dx * parity_sign(k);
    }
    Spectrum { grid, samples: buf }
}

/// Inverse of [`forward_transform`]; rejects spectra whose inverse carries a
/// non-negligible imaginary part.
pub fn inverse_transform(spectrum: &Spectrum) -> Result<Signal> {
    let (re, residue) = inverse_complex(spectrum);
    let scale = re.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if residue > IMAGINARY_TOLERANCE * scale {
        return Err(Error::ImaginaryResidue { residue });
    }
    Signal::new(spectrum.grid, re)
}

fn inverse_complex(spectrum: &Spectrum) -> (Vec<f64>, f64) {
    let grid = spectrum.grid;
    let n = grid.n_points();
    let mut buf: Vec<Complex64> = spectrum
        .samples
        .iter()
        .enumerate()
        .map(|(k, v)| v * parity_sign(k))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / grid.length();
    let residue = buf.iter().fold(0.0f64, |m, v| m.max((v.im * scale).abs()));
    (buf.iter().map(|v| v.re * scale).collect(), residue)
}

/// Circular convolution of `f` with the kernel whose spectrum is `kernel`.
pub fn convolve(f: &Signal, kernel: &Spectrum) -> Result<Signal> {
    f.grid.check_same(&kernel.grid)?;
    inverse_transform(&forward_transform(f).multiply(kernel)?)
}

/// Sample `f` at every grid point.
pub fn sample_function(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Result<Signal> {
    Signal::new(grid, grid.xs().into_iter().map(f).collect())
}

/// Samples of a band-limited periodic kernel: the inverse transform of an
/// analytic spectrum taken at the grid frequencies.
///
/// The circulant operator built from these samples has exactly the analytic
/// spectrum as its eigenvalues.
pub fn band_limited_kernel(grid: SpatialGrid, spectrum: impl Fn(f64) -> f64) -> Result<Signal> {
    inverse_transform(&Spectrum::from_real_fn(grid, spectrum))
}

/// Multiply by a raised-cosine window that falls from one to zero over the
/// outer `fraction` of the domain (half of it at each end).
pub fn cosine_taper(f: &Signal, fraction: f64) -> Result<Signal> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::domain(format!(
            "taper fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let grid = f.grid;
    let half = 0.5 * grid.length();
    let edge = 0.5 * fraction * grid.length();
    let samples = f
        .samples
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let dist = half - grid.x(i).abs();
            if edge > 0.0 && dist < edge {
                v * 0.5 * (1.0 - (PI * dist / edge).cos())
            } else {
                v
            }
        })
        .collect();
    Signal::new(grid, samples)
}

const GREGORY: [f64; 6] = [
    1.0 / 12.0,
    1.0 / 24.0,
    19.0 / 720.0,
    3.0 / 160.0,
    863.0 / 60480.0,
    275.0 / 24192.0,
];

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Gregory quadrature over equispaced samples `f_0 … f_m` (end corrections up to
/// sixth differences).
pub fn gregory(samples: &[f64], h: f64) -> Result<f64> {
    let m = samples.len().saturating_sub(1);
    let order = GREGORY.len();
    if m < 2 * order {
        return Err(Error::domain(format!(
            "Gregory rule needs at least {} intervals, got {m}",
            2 * order
        )));
    }
    let trap = samples.iter().sum::<f64>() - 0.5 * (samples[0] + samples[m]);
    let mut correction = 0.0;
    for (idx, c) in GREGORY.iter().enumerate() {
        let k = idx + 1;
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        for j in 0..=k {
            let w = binomial(k, j);
            let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
            fwd += sign * w * samples[j];
            let sign_b = if j % 2 == 0 { 1.0 } else { -1.0 };
            bwd += sign_b * w * samples[m - j];
        }
        let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
        correction += c * (bwd + parity * fwd);
    }
    Ok(h * (trap - correction))
}

/// Integral over one period of a periodic signal that is smooth except for
/// derivative jumps at the grid indices in `kinks`.
///
/// Without kinks this is the plain sum, which is spectrally accurate for smooth
/// periodic data. With kinks, each smooth piece between consecutive kinks gets
/// a Gregory rule.
pub fn integrate_periodic(f: &Signal, kinks: &[usize]) -> Result<f64> {
    let n = f.grid.n_points();
    if kinks.is_empty() {
        return Ok(f.sum_integral());
    }
    let mut ks: Vec<usize> = kinks.iter().map(|&k| k % n).collect();
    ks.sort_unstable();
    ks.dedup();
    let h = f.grid.dx();
    let mut total = 0.0;
    for (idx, &start) in ks.iter().enumerate() {
        let end = if idx + 1 < ks.len() {
            ks[idx + 1]
        } else {
            ks[0] + n
        };
        let piece: Vec<f64> = (start..=end).map(|i| f.samples[i % n]).collect();
        total += gregory(&piece, h)?;
    }
    Ok(total)
}

/// `‖actual - reference‖ / ‖reference‖` over the given indices.
pub fn relative_l2_error(actual: &[f64], reference: &[f64], indices: &[usize]) -> f64 {
    let (num, den) = indices.iter().fold((0.0, 0.0), |(n, d), &i| {
        let e = actual[i] - reference[i];
        (n + e * e, d + reference[i] * reference[i])
    });
    (num / den).sqrt()
}
