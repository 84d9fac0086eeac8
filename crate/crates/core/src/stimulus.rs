//! Named input signals with known second derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{cosine_taper, sample_function, Signal, SpatialGrid};

/// Outer fraction of the domain over which unbounded stimuli are tapered to
/// zero so that they become periodic.
pub const TAPER_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stimulus {
    /// `tanh(x)`.
    Tanh,
    /// Heaviside step, one half at the origin.
    Step,
    /// Discrete unit impulse at the origin.
    Delta,
    /// `x`, tapered.
    Ramp,
    /// `x²`, tapered.
    Quadratic,
    /// Caller-supplied samples on the grid.
    Samples(Vec<f64>),
}

impl Stimulus {
    pub fn name(&self) -> &'static str {
        match self {
            Stimulus::Tanh => "tanh",
            Stimulus::Step => "step",
            Stimulus::Delta => "delta",
            Stimulus::Ramp => "ramp",
            Stimulus::Quadratic => "quadratic",
            Stimulus::Samples(_) => "file",
        }
    }

    pub fn signal(&self, grid: SpatialGrid) -> Result<Signal> {
        match self {
            Stimulus::Tanh => sample_function(grid, f64::tanh),
            Stimulus::Step => sample_function(grid, |x| {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    0.0
                } else {
                    0.5
                }
            }),
            Stimulus::Delta => Ok(Signal::delta(grid)),
            Stimulus::Ramp => cosine_taper(&sample_function(grid, |x| x)?, TAPER_FRACTION),
            Stimulus::Quadratic => cosine_taper(&sample_function(grid, |x| x * x)?, TAPER_FRACTION),
            Stimulus::Samples(v) => {
                if v.len() != grid.n_points() {
                    return Err(Error::domain(format!(
                        "stimulus has {} samples, grid has {}",
                        v.len(),
                        grid.n_points()
                    )));
                }
                Signal::new(grid, v.clone())
            }
        }
    }

    /// `f''` on the untapered part of the domain, when it is a function.
    pub fn second_derivative(&self, grid: SpatialGrid) -> Option<Signal> {
        let f: fn(f64) -> f64 = match self {
            Stimulus::Tanh => |x| {
                let sech = 1.0 / x.cosh();
                -2.0 * x.tanh() * sech * sech
            },
            Stimulus::Ramp => |_| 0.0,
            Stimulus::Quadratic => |_| 2.0,
            _ => return None,
        };
        sample_function(grid, f).ok()
    }

    /// Half-width of the region where [`Stimulus::second_derivative`] is
    /// valid and far from tapering and wrap-around effects.
    pub fn comparison_half_width(&self, grid: &SpatialGrid) -> f64 {
        0.25 * grid.length()
    }
}
