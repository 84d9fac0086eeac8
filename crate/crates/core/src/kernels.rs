//! Closed-form spatial kernels and their exact Fourier spectra.
//!
//! Everything here is analytic. Sampling onto a grid lives in [`crate::spectral`],
//! so these closed forms serve as the reference values that numerical transforms
//! are checked against.
//!
//! Fourier convention: `F(f)(λ) = ∫ f(x) e^{-iλx} dx`, angular frequency λ.

use serde::Serialize;

use crate::error::{Error, Result};

/// Normalized two-sided exponential `e^{-|x|/r} / (2r)`.
///
/// Used for the excitatory and inhibitory feedback kernels and as the building
/// block of the feedforward kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpKernel {
    r: f64,
}

impl ExpKernel {
    pub fn new(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::domain(format!(
                "kernel scale must be positive, got {r}"
            )));
        }
        Ok(Self { r })
    }

    pub fn scale(&self) -> f64 {
        self.r
    }

    pub fn value(&self, x: f64) -> f64 {
        (-x.abs() / self.r).exp() / (2.0 * self.r)
    }

    /// Value of the `period`-periodization `Σ_m value(x + m·period)`.
    ///
    /// Closed form `cosh((P/2 - |x|)/r) / (2r sinh(P/(2r)))` on the fundamental
    /// cell, written with decaying exponentials only so it cannot overflow.
    pub fn periodized_value(&self, x: f64, period: f64) -> f64 {
        let y = wrap(x, period).abs() / self.r;
        let half = period / (2.0 * self.r);
        ((-y).exp() + (y - 2.0 * half).exp()) / (1.0 - (-2.0 * half).exp()) / (2.0 * self.r)
    }

    pub fn spectrum(&self, lambda: f64) -> f64 {
        1.0 / (1.0 + self.r * self.r * lambda * lambda)
    }
}

/// Wrap `x` into the fundamental cell `[-period/2, period/2)`.
pub(crate) fn wrap(x: f64, period: f64) -> f64 {
    x - period * (x / period + 0.5).floor()
}

/// L²-normalization factor of the difference of exponentials with scales `a < b`.
///
/// `‖e^{-|x|/a}/(2a) - e^{-|x|/b}/(2b)‖² = (b-a)² / (4ab(a+b))`, so the factor is the
/// square root of that.
pub fn normalization_constant(a: f64, b: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!(
            "scales must be positive, got a={a}, b={b}"
        )));
    }
    if a >= b {
        return Err(Error::domain(format!("requires a < b, got a={a}, b={b}")));
    }
    Ok(((b - a) * (b - a) / (4.0 * a * b * (a + b))).sqrt())
}

/// Zero-average, unit-norm center-surround kernel
/// `W_ff(x) = (e^{-|x|/a}/(2a) - e^{-|x|/b}/(2b)) / N(a, b)`.
///
/// This is the mother wavelet of the dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeedforwardKernel {
    a: f64,
    b: f64,
    n: f64,
}

impl FeedforwardKernel {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let n = normalization_constant(a, b)?;
        Ok(Self { a, b, n })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn normalization(&self) -> f64 {
        self.n
    }

    pub fn value(&self, x: f64) -> f64 {
        let d = x.abs();
        ((-d / self.a).exp() / (2.0 * self.a) - (-d / self.b).exp() / (2.0 * self.b)) / self.n
    }

    pub fn periodized_value(&self, x: f64, period: f64) -> f64 {
        // Scales were validated in the constructor.
        let narrow = ExpKernel { r: self.a };
        let broad = ExpKernel { r: self.b };
        (narrow.periodized_value(x, period) - broad.periodized_value(x, period)) / self.n
    }

    /// Pointwise bound `max(e^{-|x|/a}/(2a), e^{-|x|/b}/(2b)) / N`.
    pub fn envelope(&self, x: f64) -> f64 {
        let d = x.abs();
        let narrow = (-d / self.a).exp() / (2.0 * self.a);
        let broad = (-d / self.b).exp() / (2.0 * self.b);
        narrow.max(broad) / self.n
    }

    pub fn spectrum(&self, lambda: f64) -> f64 {
        let (a2, b2, l2) = (self.a * self.a, self.b * self.b, lambda * lambda);
        (b2 - a2) * l2 / ((1.0 + a2 * l2) * (1.0 + b2 * l2)) / self.n
    }

    /// Spectrum of θ, the fast-decaying function with `θ'' = W_ff`.
    ///
    /// `theta_spectrum(0)` is the constant `K` of the small-scale law
    /// `Wf(u, s) ≈ K s^{5/2} f''(u)`.
    pub fn theta_spectrum(&self, lambda: f64) -> f64 {
        let (a2, b2, l2) = (self.a * self.a, self.b * self.b, lambda * lambda);
        -(b2 - a2) / ((1.0 + a2 * l2) * (1.0 + b2 * l2)) / self.n
    }

    /// Dictionary atom `ψ_{u,s}(x) = W_ff((x - u)/s) / √s`.
    pub fn atom_value(&self, u: f64, s: f64, x: f64) -> Result<f64> {
        check_scale(s)?;
        Ok(self.value((x - u) / s) / s.sqrt())
    }

    /// Fourier transform of the centered atom `ψ_{0,s}`, written as the rational
    /// function whose denominator the closed loop has to match.
    pub fn atom_spectrum(&self, s: f64, lambda: f64) -> Result<f64> {
        check_scale(s)?;
        let (a2, b2, l2) = (self.a * self.a, self.b * self.b, lambda * lambda);
        let den = s.powf(-2.5) + (a2 + b2) * s.powf(-0.5) * l2 + a2 * b2 * s.powf(1.5) * l2 * l2;
        Ok((b2 - a2) * l2 / den / self.n)
    }
}

fn check_scale(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("scale must be positive, got {s}")))
    }
}

/// Feedforward kernel plus the excitatory and inhibitory feedback kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelBank {
    pub ff: FeedforwardKernel,
    pub exc: ExpKernel,
    pub inh: ExpKernel,
}

impl KernelBank {
    pub fn new(ff: FeedforwardKernel, exc: ExpKernel, inh: ExpKernel) -> Result<Self> {
        if exc.scale() >= inh.scale() {
            return Err(Error::domain(format!(
                "excitatory scale {} must be below inhibitory scale {}",
                exc.scale(),
                inh.scale()
            )));
        }
        Ok(Self { ff, exc, inh })
    }

    /// Bank with `a = α` and `b = β`, the pairing the gain schedule is built for.
    pub fn matched(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(
            FeedforwardKernel::new(alpha, beta)?,
            ExpKernel::new(alpha)?,
            ExpKernel::new(beta)?,
        )
    }

    pub fn alpha(&self) -> f64 {
        self.exc.scale()
    }

    pub fn beta(&self) -> f64 {
        self.inh.scale()
    }

    /// Whether the feedforward scales coincide with the feedback scales.
    pub fn is_matched(&self) -> bool {
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
        close(self.ff.a(), self.alpha()) && close(self.ff.b(), self.beta())
    }

    /// Feedback spectrum `Ŵ(λ) = K_E Ŵ_E(λ) - K_I Ŵ_I(λ)` for the given gains.
    pub fn feedback_spectrum(&self, k_e: f64, k_i: f64, lambda: f64) -> f64 {
        k_e * self.exc.spectrum(lambda) - k_i * self.inh.spectrum(lambda)
    }
}
