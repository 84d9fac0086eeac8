//! Monte-Carlo robustness of the feedback realization.
//!
//! Each trial perturbs the kernel spreads and the scale multiplicatively,
//! builds gains with the proportional schedule at the perturbed scale and
//! spreads, adds per-entry noise to the feedback matrix, and measures how far
//! the resulting closed-loop kernel and response drift from the nominal ones.
//!
//! Randomness comes from ChaCha20 seeded with `spec.seed`. Trial `i` draws its
//! global factors from stream `2i` and its matrix noise from stream `2i + 1`,
//! so a trial depends only on its index and every scale sees the same draws.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldsim::{
    build_connectivity, operator_spectrum_check, LocalNoise, OperatorSpectrum, SteadyStateSolver,
};
use crate::kernels::{ExpKernel, FeedforwardKernel, KernelBank};
use crate::spectral::{relative_l2_error, Signal, SpatialGrid};
use crate::stimulus::Stimulus;
use crate::zoomctl::{approx_gain_schedule, closed_loop_kernel, gain_schedule, Gains};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSpec {
    /// Relative size of the multiplicative perturbation on α, β, a, b and s.
    pub global_rel: f64,
    /// Relative size of the per-entry matrix noise.
    pub local_eps: f64,
    /// Coupling factor of the proportional schedule.
    pub delta: f64,
    pub seed: u64,
    pub n_trials: usize,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            global_rel: 1e-2,
            local_eps: 1e-4,
            delta: 0.99,
            seed: 0,
            n_trials: 5,
        }
    }
}

impl PerturbationSpec {
    /// No noise and `δ = 1`.
    pub fn noiseless() -> Self {
        Self {
            global_rel: 0.0,
            local_eps: 0.0,
            delta: 1.0,
            seed: 0,
            n_trials: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.global_rel.is_finite() && self.global_rel >= 0.0) {
            return Err(Error::domain(format!(
                "global_rel must be non-negative, got {}",
                self.global_rel
            )));
        }
        if !(self.local_eps.is_finite() && self.local_eps >= 0.0) {
            return Err(Error::domain(format!(
                "local_eps must be non-negative, got {}",
                self.local_eps
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::domain(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if self.n_trials == 0 {
            return Err(Error::domain("n_trials must be at least 1"));
        }
        Ok(())
    }
}

/// Parameters actually used by one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialParameters {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub s: f64,
}

impl TrialParameters {
    /// Draws in the order α, β, a, b, s from stream `2·index`.
    pub fn draw(spec: &PerturbationSpec, nominal: &KernelBank, s: f64, index: usize) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
        rng.set_stream(2 * index as u64);
        let mut factor = || {
            let z: f64 = StandardNormal.sample(&mut rng);
            1.0 + spec.global_rel * z
        };
        Self {
            alpha: nominal.alpha() * factor(),
            beta: nominal.beta() * factor(),
            a: nominal.ff.a() * factor(),
            b: nominal.ff.b() * factor(),
            s: s * factor(),
        }
    }

    pub fn bank(&self) -> Result<KernelBank> {
        KernelBank::new(
            FeedforwardKernel::new(self.a, self.b)?,
            ExpKernel::new(self.alpha)?,
            ExpKernel::new(self.beta)?,
        )
    }
}

/// Deviations of one trial from the nominal pipeline, over the central half
/// of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialMetrics {
    /// Relative L² distance between the trial kernel and the nominal kernel.
    pub kernel_deviation: f64,
    /// Relative L² distance between the normalized response and `f''`, when
    /// the stimulus has one.
    pub response_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub index: usize,
    /// Nominal scale of the trial.
    pub s: f64,
    pub params: TrialParameters,
    pub gains: Option<Gains>,
    /// Stability verdict on `-γI + M`; `None` when it could not be computed.
    pub verdict: Option<OperatorSpectrum>,
    pub metrics: Option<TrialMetrics>,
    /// Why the trial could not be completed, if it could not.
    pub failure: Option<String>,
    /// Impulse response of the perturbed steady-state map.
    #[serde(skip)]
    pub kernel: Vec<f64>,
    /// Steady-state response to the stimulus.
    #[serde(skip)]
    pub response: Vec<f64>,
    /// `s^{-5/2} response / K` with the nominal `s` and `K`.
    #[serde(skip)]
    pub normalized_response: Vec<f64>,
}

impl TrialResult {
    pub fn is_stable(&self) -> bool {
        self.verdict.is_some_and(|v| v.is_stable())
    }
}

/// Nominal quantities a trial is compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalReference {
    pub s: f64,
    pub bank: KernelBank,
    /// Closed-loop kernel of the proportional schedule with matched kernels.
    pub kernel: Signal,
    /// `f''` of the stimulus, if defined.
    pub second_derivative: Option<Signal>,
    /// Indices of the central half of the grid.
    pub window: Vec<usize>,
}

impl NominalReference {
    pub fn new(
        spec: &PerturbationSpec,
        s: f64,
        grid: SpatialGrid,
        bank: &KernelBank,
        stimulus: &Stimulus,
    ) -> Result<Self> {
        let g = approx_gain_schedule(s, bank.alpha(), bank.beta(), spec.delta)?.gains;
        Ok(Self {
            s,
            bank: *bank,
            kernel: closed_loop_kernel(bank, &g, grid)?,
            second_derivative: stimulus.second_derivative(grid),
            window: grid.window(stimulus.comparison_half_width(&grid)),
        })
    }
}

/// Run trial `index` at scale `nominal.s`.
///
/// Failures of the perturbed pipeline are recorded in the result rather than
/// returned.
pub fn run_trial(
    spec: &PerturbationSpec,
    index: usize,
    stimulus: &Signal,
    nominal: &NominalReference,
) -> TrialResult {
    let grid = *stimulus.grid();
    let params = TrialParameters::draw(spec, &nominal.bank, nominal.s, index);
    let mut result = TrialResult {
        index,
        s: nominal.s,
        params,
        gains: None,
        verdict: None,
        metrics: None,
        failure: None,
        kernel: Vec::new(),
        response: Vec::new(),
        normalized_response: Vec::new(),
    };
    if let Err(e) = complete_trial(spec, index, stimulus, nominal, grid, &mut result) {
        result.failure = Some(e.to_string());
    }
    result
}

fn complete_trial(
    spec: &PerturbationSpec,
    index: usize,
    stimulus: &Signal,
    nominal: &NominalReference,
    grid: SpatialGrid,
    result: &mut TrialResult,
) -> Result<()> {
    let p = result.params;
    let bank = p.bank()?;
    let g = approx_gain_schedule(p.s, p.alpha, p.beta, spec.delta)?.gains;
    result.gains = Some(g);
    let noise = LocalNoise {
        eps: spec.local_eps,
        seed: spec.seed,
        stream: 2 * index as u64 + 1,
    };
    let c = build_connectivity(grid, &g, &bank, Some(&noise))?;
    result.verdict = Some(operator_spectrum_check(&c, &g)?);

    let solver = SteadyStateSolver::new(&c, &g)?;
    let kernel = solver.respond(&Signal::delta(grid), &bank)?;
    let response = solver.respond(stimulus, &bank)?;
    let k = nominal.bank.ff.theta_spectrum(0.0);
    let factor = nominal.s.powf(-2.5) / k;
    let normalized: Vec<f64> = response.samples().iter().map(|v| v * factor).collect();

    result.metrics = Some(TrialMetrics {
        kernel_deviation: relative_l2_error(
            kernel.samples(),
            nominal.kernel.samples(),
            &nominal.window,
        ),
        response_error: nominal
            .second_derivative
            .as_ref()
            .map(|d2| relative_l2_error(&normalized, d2.samples(), &nominal.window)),
    });
    result.kernel = kernel.into_samples();
    result.response = response.into_samples();
    result.normalized_response = normalized;
    Ok(())
}

/// Per-scale statistics over the completed trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSummary {
    pub s: f64,
    pub n_trials: usize,
    pub stability_failures: usize,
    /// Trials whose pipeline raised an error.
    pub solver_failures: usize,
    pub median_kernel_deviation: Option<f64>,
    pub max_kernel_deviation: Option<f64>,
    pub median_response_error: Option<f64>,
    pub max_response_error: Option<f64>,
    /// Response error of the unperturbed proportional schedule.
    pub nominal_response_error: Option<f64>,
    /// Relative L² distance between the proportional and exact closed-loop
    /// kernels, both unperturbed.
    pub approximation_gap: f64,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    })
}

fn max(v: &[f64]) -> Option<f64> {
    v.iter().copied().reduce(f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRun {
    pub summary: ScaleSummary,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub spec: PerturbationSpec,
    pub grid: SpatialGrid,
    pub bank: KernelBank,
    pub stimulus: String,
    pub scales: Vec<ScaleRun>,
}

impl ExperimentReport {
    pub fn stability_failures(&self) -> usize {
        self.scales
            .iter()
            .map(|r| r.summary.stability_failures)
            .sum()
    }

    pub fn solver_failures(&self) -> usize {
        self.scales.iter().map(|r| r.summary.solver_failures).sum()
    }
}

/// Run `spec.n_trials` trials at each scale.
pub fn run_experiment(
    spec: &PerturbationSpec,
    s_values: &[f64],
    stimulus: &Stimulus,
    grid: SpatialGrid,
    bank: &KernelBank,
) -> Result<ExperimentReport> {
    spec.validate()?;
    if !bank.is_matched() {
        return Err(Error::UnmatchedBank);
    }
    let signal = stimulus.signal(grid)?;
    let mut scales = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let nominal = NominalReference::new(spec, s, grid, bank, stimulus)?;
        let trials: Vec<TrialResult> = (0..spec.n_trials)
            .map(|i| run_trial(spec, i, &signal, &nominal))
            .collect();
        let summary = summarize(spec, &nominal, &signal, &trials)?;
        scales.push(ScaleRun { summary, trials });
    }
    Ok(ExperimentReport {
        spec: *spec,
        grid,
        bank: *bank,
        stimulus: stimulus.name().to_string(),
        scales,
    })
}

fn summarize(
    spec: &PerturbationSpec,
    nominal: &NominalReference,
    signal: &Signal,
    trials: &[TrialResult],
) -> Result<ScaleSummary> {
    let grid = *signal.grid();
    let bank = &nominal.bank;
    let kernel_dev: Vec<f64> = trials
        .iter()
        .filter_map(|t| t.metrics)
        .map(|m| m.kernel_deviation)
        .collect();
    let response_err: Vec<f64> = trials
        .iter()
        .filter_map(|t| t.metrics.and_then(|m| m.response_error))
        .collect();

    let exact = gain_schedule(nominal.s, bank.alpha(), bank.beta())?.gains;
    let exact_kernel = closed_loop_kernel(bank, &exact, grid)?;
    let approximation_gap = relative_l2_error(
        nominal.kernel.samples(),
        exact_kernel.samples(),
        &nominal.window,
    );

    let nominal_response_error = match &nominal.second_derivative {
        Some(d2) => {
            let g = approx_gain_schedule(nominal.s, bank.alpha(), bank.beta(), spec.delta)?.gains;
            let c = build_connectivity(grid, &g, bank, None)?;
            let response = SteadyStateSolver::new(&c, &g)?.respond(signal, bank)?;
            let factor = nominal.s.powf(-2.5) / bank.ff.theta_spectrum(0.0);
            let normalized: Vec<f64> = response.samples().iter().map(|v| v * factor).collect();
            Some(relative_l2_error(
                &normalized,
                d2.samples(),
                &nominal.window,
            ))
        }
        None => None,
    };

    Ok(ScaleSummary {
        s: nominal.s,
        n_trials: trials.len(),
        stability_failures: trials.iter().filter(|t| !t.is_stable()).count(),
        solver_failures: trials.iter().filter(|t| t.failure.is_some()).count(),
        max_kernel_deviation: max(&kernel_dev),
        median_kernel_deviation: median(kernel_dev),
        max_response_error: max(&response_err),
        median_response_error: median(response_err),
        nominal_response_error,
        approximation_gap,
    })
}
