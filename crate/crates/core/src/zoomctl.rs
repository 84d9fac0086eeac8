//! Closed-loop spatial transfer function, scale-dependent gain schedules and
//! temporal stability tests.
//!
//! The closed loop is `Ĥ(λ) = Ŵ_ff(λ) / (γ - K_E Ŵ_E(λ) + K_I Ŵ_I(λ))`. With
//! matched kernels (`a = α`, `b = β`) the exact schedule makes `Ĥ` equal the
//! spectrum of the dictionary atom at scale `s`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelBank;
use crate::spectral::{inverse_transform, Signal, SpatialGrid, Spectrum};

/// Damping and feedback gains of the linear field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gains {
    pub gamma: f64,
    pub k_e: f64,
    pub k_i: f64,
}

impl Gains {
    pub fn new(gamma: f64, k_e: f64, k_i: f64) -> Self {
        Self { gamma, k_e, k_i }
    }

    /// No feedback, unit damping: the closed loop reduces to `W_ff`.
    pub fn open_loop() -> Self {
        Self::new(1.0, 0.0, 0.0)
    }

    /// Both feedback gains non-negative, as for excitatory and inhibitory
    /// synaptic populations.
    pub fn model_consistent(&self) -> bool {
        self.k_e >= 0.0 && self.k_i >= 0.0
    }

    /// Closed-loop denominator `γ - K_E Ŵ_E(λ) + K_I Ŵ_I(λ)`.
    pub fn denominator(&self, bank: &KernelBank, lambda: f64) -> f64 {
        self.gamma - bank.feedback_spectrum(self.k_e, self.k_i, lambda)
    }
}

/// Gains produced by a schedule at a given scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduledGains {
    pub s: f64,
    pub gains: Gains,
    /// Coupling factor when produced by [`approx_gain_schedule`].
    pub delta: Option<f64>,
}

fn check_schedule_args(s: f64, alpha: f64, beta: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0 && s <= 1.0) {
        return Err(Error::domain(format!("scale must lie in (0, 1], got {s}")));
    }
    if !(alpha > 0.0 && beta.is_finite() && alpha < beta) {
        return Err(Error::domain(format!(
            "requires 0 < alpha < beta, got alpha={alpha}, beta={beta}"
        )));
    }
    Ok(())
}

/// Damping schedule `ρ(s) = s^{3/2}`.
pub fn rho(s: f64) -> f64 {
    s.powf(1.5)
}

/// Excitatory gain schedule κ_e(s).
pub fn kappa_e(s: f64, alpha: f64, beta: f64) -> f64 {
    let (a2, b2) = (alpha * alpha, beta * beta);
    (a2 * (s.powf(-2.5) - s.powf(-0.5)) - b2 * (s.powf(-0.5) - s.powf(1.5))) / (b2 - a2)
}

/// Inhibitory gain schedule κ_i(s).
pub fn kappa_i(s: f64, alpha: f64, beta: f64) -> f64 {
    let (a2, b2) = (alpha * alpha, beta * beta);
    (b2 * (s.powf(-2.5) - s.powf(-0.5)) - a2 * (s.powf(-0.5) - s.powf(1.5))) / (b2 - a2)
}

/// Exact schedule `(ρ(s), κ_e(s), κ_i(s))` realizing the atom at scale `s`.
///
/// κ_e is negative on `(α/β, 1)`; the values are returned as computed and
/// [`Gains::model_consistent`] reports the sign regime.
pub fn gain_schedule(s: f64, alpha: f64, beta: f64) -> Result<ScheduledGains> {
    check_schedule_args(s, alpha, beta)?;
    Ok(ScheduledGains {
        s,
        gains: Gains::new(rho(s), kappa_e(s, alpha, beta), kappa_i(s, alpha, beta)),
        delta: None,
    })
}

/// Exact schedule for a bank, rejecting banks whose feedforward scales differ
/// from the feedback scales.
pub fn schedule_for_bank(bank: &KernelBank, s: f64) -> Result<ScheduledGains> {
    if !bank.is_matched() {
        return Err(Error::UnmatchedBank);
    }
    gain_schedule(s, bank.alpha(), bank.beta())
}

/// Proportional schedule `κ_e = δ (α²/β²) κ_i`, which satisfies the ratio
/// stability condition for every `δ ≤ 1`.
pub fn approx_gain_schedule(s: f64, alpha: f64, beta: f64, delta: f64) -> Result<ScheduledGains> {
    check_schedule_args(s, alpha, beta)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::domain(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    let k_i = kappa_i(s, alpha, beta);
    let k_e = delta * (alpha * alpha) / (beta * beta) * k_i;
    Ok(ScheduledGains {
        s,
        gains: Gains::new(rho(s), k_e, k_i),
        delta: Some(delta),
    })
}

/// `Ĥ(λ)` from the analytic spectra.
pub fn closed_loop_spectrum(bank: &KernelBank, g: &Gains, lambda: f64) -> Result<f64> {
    let den = g.denominator(bank, lambda);
    let scale = g.gamma.abs() + g.k_e.abs() + g.k_i.abs();
    if den.abs() <= 1e-14 * scale || !den.is_finite() {
        return Err(Error::SingularDenominator { lambda });
    }
    Ok(bank.ff.spectrum(lambda) / den)
}

/// Spatial closed-loop kernel on the grid: inverse transform of `Ĥ` sampled at
/// the grid frequencies.
pub fn closed_loop_kernel(bank: &KernelBank, g: &Gains, grid: SpatialGrid) -> Result<Signal> {
    let margin = stability_margin(bank, g);
    if margin <= 0.0 {
        return Err(Error::Unstable { margin });
    }
    let mut spec = Spectrum::from_real_fn(grid, |_| 0.0);
    for (k, v) in spec.samples_mut().iter_mut().enumerate() {
        v.re = closed_loop_spectrum(bank, g, grid.frequency(k))?;
    }
    inverse_transform(&spec)
}

const MARGIN_GRID_POINTS: usize = 10_000;
const MARGIN_LAMBDA_MIN: f64 = 1e-4;
const MARGIN_LAMBDA_MAX: f64 = 1e3;

/// `inf_λ [γ - K_E Ŵ_E(λ) + K_I Ŵ_I(λ)]`.
///
/// Combines the λ = 0 and λ → ∞ limits, the closed-form interior stationary
/// point (the denominator is a rational function of λ² with at most one), and a
/// log-spaced scan refined by golden-section search. A positive value certifies
/// exponential stability of every Fourier mode.
pub fn stability_margin(bank: &KernelBank, g: &Gains) -> f64 {
    let d = |lambda: f64| g.denominator(bank, lambda);
    let mut best = d(0.0).min(g.gamma);

    let (a2, b2) = (bank.alpha().powi(2), bank.beta().powi(2));
    let (pe, pi) = (g.k_e * a2, g.k_i * b2);
    if pe != 0.0 && pi / pe > 0.0 {
        let r = (pi / pe).sqrt();
        let u = (r - 1.0) / (b2 - r * a2);
        if u.is_finite() && u > 0.0 {
            best = best.min(d(u.sqrt()));
        }
    }

    let log_lo = MARGIN_LAMBDA_MIN.ln();
    let step = (MARGIN_LAMBDA_MAX.ln() - log_lo) / (MARGIN_GRID_POINTS - 1) as f64;
    let lam = |i: usize| (log_lo + step * i as f64).exp();
    let (mut idx, mut grid_best) = (0, f64::INFINITY);
    for i in 0..MARGIN_GRID_POINTS {
        let v = d(lam(i));
        if v < grid_best {
            grid_best = v;
            idx = i;
        }
    }
    let lo = lam(idx.saturating_sub(1));
    let hi = lam((idx + 1).min(MARGIN_GRID_POINTS - 1));
    best = best
        .min(grid_best)
        .min(golden_section_min(d, lo, hi, 1e-12));
    best
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, width: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > width {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    fc.min(fd).min(f(lo)).min(f(hi))
}

/// Outcome of the sufficient ratio test `γ > 0` and `(K_E/K_I)(β²/α²) ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RatioTest {
    /// Condition holds; the stability margin is at least γ.
    Holds {
        ratio: f64,
    },
    Fails {
        ratio: f64,
    },
    /// Outside the `K_I > 0`, `K_E ≥ 0` regime; use [`stability_margin`].
    NotApplicable,
}

impl RatioTest {
    pub fn holds(&self) -> bool {
        matches!(self, RatioTest::Holds { .. })
    }
}

pub fn ratio_stability_test(g: &Gains, alpha: f64, beta: f64) -> RatioTest {
    if !(g.k_i > 0.0 && g.k_e >= 0.0) {
        return RatioTest::NotApplicable;
    }
    let ratio = g.k_e / g.k_i * (beta * beta) / (alpha * alpha);
    if g.gamma > 0.0 && ratio <= 1.0 {
        RatioTest::Holds { ratio }
    } else {
        RatioTest::Fails { ratio }
    }
}

/// κ(s) = κ_e(s)/κ_i(s) on a set of scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainRatioCurve {
    pub points: Vec<(f64, f64)>,
    /// `lim_{s→0} κ(s) = α²/β²`.
    pub small_scale_limit: f64,
}

pub fn gain_ratio_curve(alpha: f64, beta: f64, s_grid: &[f64]) -> Result<GainRatioCurve> {
    let mut points = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::domain(format!(
                "gain ratio requires s in (0, 1), got {s}"
            )));
        }
        check_schedule_args(s, alpha, beta)?;
        let ki = kappa_i(s, alpha, beta);
        // κ_i > 0 on (0, 1) whenever α < β.
        assert!(ki > 0.0, "kappa_i vanished at s = {s}");
        points.push((s, kappa_e(s, alpha, beta) / ki));
    }
    Ok(GainRatioCurve {
        points,
        small_scale_limit: (alpha * alpha) / (beta * beta),
    })
}
