//! Feedback realization of a wavelet zoom.
//!
//! A linear neural field `a_t = -γa + (K_E W_E - K_I W_I) ⋆ a + W_ff ⋆ l` filters
//! a stimulus `l` through the closed-loop transfer function
//! `Ĥ = Ŵ_ff / (γ - K_E Ŵ_E + K_I Ŵ_I)`. Scaling only the three gains
//! `(γ, K_E, K_I)` along the schedule in [`zoomctl`] turns `Ĥ` into the
//! dilated feedforward wavelet at any scale `s ∈ (0, 1]`.
//!
//! Modules:
//! - [`kernels`]: closed-form kernels and spectra
//! - [`spectral`]: periodic grid, transforms, convolution, quadrature
//! - [`zoomctl`]: transfer function, gain schedules, stability margins
//! - [`fieldsim`]: discretized field, steady states, time integration
//! - [`wavelet`]: continuous wavelet transform and the zoom law
//! - [`robustness`]: seeded perturbation experiments
//! - [`stimulus`]: named input signals
//! - [`export`]: CSV and JSON writers

pub mod error;
pub mod export;
pub mod fieldsim;
pub mod kernels;
pub mod robustness;
pub mod spectral;
pub mod stimulus;
pub mod wavelet;
pub mod zoomctl;

pub use error::{Error, Result};
