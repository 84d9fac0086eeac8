//! Continuous wavelet transform over the `W_ff` dictionary and its small-scale
//! behaviour.
//!
//! Because `W_ff` is even, `Wf(u, s) = ∫ f ψ_{u,s} = (f ⋆ ψ_{0,s})(u)`. As
//! `s → 0`, `Wf(u, s) ≈ K s^{5/2} f''(u)` with `K = θ̂(0)`, so the normalized
//! response `s^{-5/2} Wf / K` approaches the second derivative.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::FeedforwardKernel;
use crate::spectral::{
    convolve, forward_transform, integrate_periodic, sample_function, Signal, SpatialGrid, Spectrum,
};

/// Transform of a signal at one scale, on the signal's own grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoomResult {
    pub s: f64,
    pub u_grid: Vec<f64>,
    /// `Wf(u, s)`.
    pub transform_values: Vec<f64>,
    /// `s^{-5/2} Wf(u, s) / K`.
    pub normalized_values: Vec<f64>,
    /// `K = θ̂(0)`.
    pub k_constant: f64,
}

/// Smallest atom width, in grid steps, accepted by the transform.
pub const MIN_ATOM_STEPS: f64 = 2.0;

fn check_resolved(grid: &SpatialGrid, s: f64, ff: &FeedforwardKernel) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::domain(format!("scale must be positive, got {s}")));
    }
    let width = s * ff.a();
    let min_width = MIN_ATOM_STEPS * grid.dx();
    if width < min_width {
        return Err(Error::Unresolved {
            scale: s,
            width,
            min_width,
        });
    }
    Ok(())
}

fn atom_spectrum(grid: SpatialGrid, s: f64, ff: &FeedforwardKernel) -> Spectrum {
    // Scale validity is checked by the callers.
    Spectrum::from_real_fn(grid, |l| ff.atom_spectrum(s, l).unwrap_or(0.0))
}

/// `Wf(·, s)` at every grid point.
pub fn wavelet_transform(f: &Signal, s: f64, ff: &FeedforwardKernel) -> Result<ZoomResult> {
    let grid = *f.grid();
    check_resolved(&grid, s, ff)?;
    let raw = convolve(f, &atom_spectrum(grid, s, ff))?;
    let k = ff.theta_spectrum(0.0);
    let factor = s.powf(-2.5) / k;
    let transform_values = raw.into_samples();
    Ok(ZoomResult {
        s,
        u_grid: grid.xs(),
        normalized_values: transform_values.iter().map(|v| v * factor).collect(),
        transform_values,
        k_constant: k,
    })
}

/// `Wf(u, s)` at an arbitrary position, from the trigonometric interpolant of
/// the grid transform.
pub fn wavelet_coefficient(f: &Signal, u: f64, s: f64, ff: &FeedforwardKernel) -> Result<f64> {
    check_resolved(f.grid(), s, ff)?;
    Ok(coefficient_from_spectrum(&forward_transform(f), u, s, ff))
}

fn coefficient_from_spectrum(spec: &Spectrum, u: f64, s: f64, ff: &FeedforwardKernel) -> f64 {
    let grid = spec.grid();
    let sum: Complex64 = spec
        .samples()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let l = grid.frequency(k);
            v * ff.atom_spectrum(s, l).unwrap_or(0.0) * Complex64::from_polar(1.0, l * u)
        })
        .sum();
    sum.re / grid.length()
}

/// Log-log slope of `|Wf(u, s)|` against `s` at one position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub u: f64,
    /// `None` when fewer than [`MIN_FIT_SCALES`] scales survive the exclusion.
    pub slope: Option<f64>,
    pub scales_used: Vec<f64>,
}

/// Fewest scales accepted in a slope fit.
pub const MIN_FIT_SCALES: usize = 4;

/// Exclusion radius around known singularities, in units of `s·b`.
pub const SINGULARITY_EXCLUSION: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoomSweep {
    pub results: Vec<ZoomResult>,
    pub fits: Vec<SlopeFit>,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Transforms at every scale plus slope fits at `fit_points`.
///
/// A scale is dropped from the fit at `u` when `u` lies within
/// `3·s·b` of any of `singularities`.
pub fn zoom_sweep(
    f: &Signal,
    s_values: &[f64],
    ff: &FeedforwardKernel,
    fit_points: &[f64],
    singularities: &[f64],
) -> Result<ZoomSweep> {
    for &s in s_values {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::domain(format!(
                "zoom scales must lie in (0, 1], got {s}"
            )));
        }
        check_resolved(f.grid(), s, ff)?;
    }
    let results = s_values
        .iter()
        .map(|&s| wavelet_transform(f, s, ff))
        .collect::<Result<Vec<_>>>()?;
    let spec = forward_transform(f);
    let fits = fit_points
        .iter()
        .map(|&u| {
            let scales: Vec<f64> = s_values
                .iter()
                .copied()
                .filter(|&s| {
                    singularities
                        .iter()
                        .all(|&x0| (u - x0).abs() > SINGULARITY_EXCLUSION * s * ff.b())
                })
                .collect();
            let slope = (scales.len() >= MIN_FIT_SCALES).then(|| {
                let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
                let ys: Vec<f64> = scales
                    .iter()
                    .map(|&s| coefficient_from_spectrum(&spec, u, s, ff).abs().ln())
                    .collect();
                fit_slope(&xs, &ys)
            });
            SlopeFit {
                u,
                slope: slope.filter(|v| v.is_finite()),
                scales_used: scales,
            }
        })
        .collect();
    Ok(ZoomSweep { results, fits })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    /// `∫ W_ff` over one period of its periodization.
    pub integral: f64,
    /// `‖W_ff‖₂` over the grid domain.
    pub norm: f64,
    /// Largest `|W_ff(x_i)| - envelope(x_i)` over the grid; non-positive when
    /// the decay bound holds.
    pub envelope_excess: f64,
    /// `θ̂(0)`, which must be nonzero.
    pub theta_at_zero: f64,
}

impl AdmissibilityReport {
    pub fn norm_error(&self) -> f64 {
        (self.norm - 1.0).abs()
    }

    pub fn envelope_holds(&self) -> bool {
        self.envelope_excess <= 0.0
    }

    pub fn is_admissible(&self, tol_integral: f64, tol_norm: f64) -> bool {
        self.integral.abs() < tol_integral
            && self.norm_error() < tol_norm
            && self.envelope_holds()
            && self.theta_at_zero != 0.0
    }
}

/// Zero average, unit norm, exponential decay and `θ̂(0) ≠ 0` on `grid`.
///
/// Both integrals use a Gregory rule split at the cusp `x = 0`.
pub fn admissibility_check(
    ff: &FeedforwardKernel,
    grid: SpatialGrid,
) -> Result<AdmissibilityReport> {
    let kink = [grid.origin()];
    let periodic = sample_function(grid, |x| ff.periodized_value(x, grid.length()))?;
    let integral = integrate_periodic(&periodic, &kink)?;
    let square = sample_function(grid, |x| ff.value(x).powi(2))?;
    let norm = integrate_periodic(&square, &kink)?.sqrt();
    let envelope_excess = grid
        .xs()
        .into_iter()
        .map(|x| ff.value(x).abs() - ff.envelope(x) * (1.0 + 1e-14))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(AdmissibilityReport {
        integral,
        norm,
        envelope_excess,
        theta_at_zero: ff.theta_spectrum(0.0),
    })
}

/// Relative rescalings a feedforward implementation would need at two source
/// positions to move from scale 1 to scale `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RescalingReport {
    pub x: f64,
    pub y1: f64,
    pub y2: f64,
    pub s: f64,
    /// `ΔW₁ / W_ff(x - y₁)` with `ΔW₁ = ψ_{y₁,s}(x) - ψ_{y₁,1}(x)`.
    pub ratio1: f64,
    pub ratio2: f64,
    pub discrepancy: f64,
}

/// Rescaling ratios at `y1` and `y2`; unequal ratios mean the feedforward
/// weights must be retuned position by position.
pub fn feedforward_rescaling_demo(
    ff: &FeedforwardKernel,
    x: f64,
    y1: f64,
    y2: f64,
    s: f64,
) -> Result<RescalingReport> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::domain(format!("scale must lie in (0, 1], got {s}")));
    }
    let floor = 1e-10 * ff.value(0.0).abs();
    let ratio = |y: f64| -> Result<f64> {
        let base = ff.value(x - y);
        if base.abs() <= floor {
            return Err(Error::domain(format!(
                "W_ff(x - y) vanishes at x - y = {}",
                x - y
            )));
        }
        Ok((ff.atom_value(y, s, x)? - base) / base)
    };
    let (ratio1, ratio2) = (ratio(y1)?, ratio(y2)?);
    Ok(RescalingReport {
        x,
        y1,
        y2,
        s,
        ratio1,
        ratio2,
        discrepancy: ratio1 - ratio2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::cosine_taper;
    use approx::assert_relative_eq;

    fn ff() -> FeedforwardKernel {
        FeedforwardKernel::new(1.0, 2.0).unwrap()
    }

    fn default_grid() -> SpatialGrid {
        SpatialGrid::new(2048, 40.0).unwrap()
    }

    #[test]
    fn constant_is_annihilated() {
        let g = default_grid();
        let f = sample_function(g, |_| 3.0).unwrap();
        let r = wavelet_transform(&f, 0.3, &ff()).unwrap();
        assert!(r.transform_values.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn atom_autocorrelation_peak_is_unit_norm() {
        let g = default_grid();
        let k = ff();
        let band = crate::spectral::band_limited_kernel(g, |l| k.spectrum(l)).unwrap();
        let r = wavelet_transform(&band, 1.0, &k).unwrap();
        // Only the spectral tail beyond Nyquist, O(1/λ_N³), is missing.
        assert_relative_eq!(r.transform_values[g.origin()], 1.0, max_relative = 1e-6);

        // Sampling the cusp adds the Euler-Maclaurin term dx²/12 · |ΔW_ff'(0)|,
        // constant in λ, which shifts the peak by that times W_ff(0).
        let f = sample_function(g, |x| k.value(x)).unwrap();
        let r = wavelet_transform(&f, 1.0, &k).unwrap();
        let jump = (1.0 / (k.a() * k.a()) - 1.0 / (k.b() * k.b())) / k.normalization();
        let predicted = g.dx().powi(2) / 12.0 * jump * k.value(0.0);
        assert_relative_eq!(
            r.transform_values[g.origin()] - 1.0,
            predicted,
            max_relative = 0.02
        );
    }

    #[test]
    fn unresolved_scale_is_rejected() {
        let g = default_grid();
        let f = sample_function(g, f64::tanh).unwrap();
        assert!(matches!(
            wavelet_transform(&f, 0.03, &ff()),
            Err(Error::Unresolved { .. })
        ));
        assert!(wavelet_transform(&f, 0.04, &ff()).is_ok());
    }

    #[test]
    fn coefficient_interpolates_grid_values() {
        let g = default_grid();
        let f = sample_function(g, f64::tanh).unwrap();
        let r = wavelet_transform(&f, 0.2, &ff()).unwrap();
        for i in [100, 1024, 1500] {
            let c = wavelet_coefficient(&f, g.x(i), 0.2, &ff()).unwrap();
            assert!((c - r.transform_values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_normalizes_to_two() {
        let g = default_grid();
        let f = cosine_taper(&sample_function(g, |x| x * x).unwrap(), 0.5).unwrap();
        let r = wavelet_transform(&f, 0.1, &ff()).unwrap();
        for i in g.window(4.0) {
            assert!(
                (r.normalized_values[i] - 2.0).abs() < 1e-6,
                "{}",
                r.normalized_values[i]
            );
        }
    }

    #[test]
    fn affine_signal_is_annihilated_on_tapered_window() {
        let g = default_grid();
        let f = cosine_taper(&sample_function(g, |x| 0.7 * x - 1.5).unwrap(), 0.5).unwrap();
        let r = wavelet_transform(&f, 0.2, &ff()).unwrap();
        for i in g.window(4.0) {
            assert!(r.transform_values[i].abs() < 1e-7);
        }
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let xs = [0.1f64, 0.2, 0.4, 0.8];
        let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = xs.iter().map(|v| (3.0 * v.powf(2.5)).ln()).collect();
        assert_relative_eq!(fit_slope(&lx, &ly), 2.5, max_relative = 1e-12);
    }

    #[test]
    fn kink_lowers_the_decay_rate() {
        let g = default_grid();
        let f = sample_function(g, |x| (x * x.abs()) * (-x * x / 50.0).exp()).unwrap();
        let sw = zoom_sweep(&f, &[0.4, 0.2, 0.1, 0.05], &ff(), &[0.0, 2.0], &[]).unwrap();
        let at0 = sw.fits[0].slope.unwrap();
        let at2 = sw.fits[1].slope.unwrap();
        assert!(at0 < 2.0, "{at0}");
        assert!((at2 - 2.5).abs() < 0.3, "{at2}");

        let sw = zoom_sweep(&f, &[0.4, 0.2, 0.1, 0.05], &ff(), &[0.0], &[0.0]).unwrap();
        assert!(sw.fits[0].slope.is_none());
        assert!(sw.fits[0].scales_used.is_empty());
    }

    #[test]
    fn admissibility_on_default_grid() {
        let rep = admissibility_check(&ff(), default_grid()).unwrap();
        assert!(rep.integral.abs() < 1e-8, "{:e}", rep.integral);
        assert!(rep.norm_error() < 1e-6, "{:e}", rep.norm_error());
        assert!(rep.envelope_holds());
        assert_relative_eq!(
            rep.theta_at_zero,
            -14.696_938_456_699_067,
            max_relative = 1e-12
        );
        assert!(rep.is_admissible(1e-8, 1e-6));
    }

    #[test]
    fn rescaling_ratios() {
        let k = ff();
        let rep = feedforward_rescaling_demo(&k, 0.0, 0.2, 0.4, 0.5).unwrap();
        let direct = |y: f64| (k.value(-y / 0.5) / 0.5f64.sqrt() - k.value(-y)) / k.value(-y);
        assert_relative_eq!(rep.ratio1, direct(0.2), max_relative = 1e-14);
        assert_relative_eq!(rep.ratio2, direct(0.4), max_relative = 1e-14);
        assert!(rep.discrepancy.abs() > 1e-3);

        let unit = feedforward_rescaling_demo(&k, 0.0, 0.2, 0.4, 1.0).unwrap();
        assert_eq!((unit.ratio1, unit.ratio2), (0.0, 0.0));

        let same = feedforward_rescaling_demo(&k, 0.3, 0.2, 0.2, 0.5).unwrap();
        assert_eq!(same.ratio1, same.ratio2);

        let root = 2.0 * 2f64.ln();
        assert!(feedforward_rescaling_demo(&k, root, 0.0, 0.4, 0.5).is_err());
    }
}
