//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use wavezoom::kernels::KernelBank;
use wavezoom::robustness::PerturbationSpec;
use wavezoom::spectral::SpatialGrid;
use wavezoom::stimulus::Stimulus;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StimulusKind {
    Tanh,
    Step,
    Delta,
    Ramp,
    Quadratic,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Exact schedule: the closed loop equals the dilated atom.
    Exact,
    /// Proportional schedule `K_E = δ (α²/β²) K_I`.
    Approx,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    kernels: KernelSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    schedule: ScheduleSection,
    #[serde(default)]
    perturbation: PerturbationSection,
    #[serde(default)]
    zoom: ZoomSection,
    #[serde(default)]
    dynamics: DynamicsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n_points: Option<usize>,
    length: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    a: Option<f64>,
    b: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    scales: Option<Vec<f64>>,
    stimulus: Option<StimulusKind>,
    stimulus_file: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleSection {
    mode: Option<ScheduleMode>,
    delta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbationSection {
    global_rel: Option<f64>,
    local_eps: Option<f64>,
    delta: Option<f64>,
    n_trials: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ZoomSection {
    fit_points: Option<Vec<f64>>,
    singularities: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsSection {
    t_end: Option<f64>,
    dt: Option<f64>,
    stride: Option<usize>,
}

/// Flags shared by every command; each mirrors one configuration key and
/// overrides it.
#[derive(Debug, Default, Clone, Args)]
pub struct ConfigFlags {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed of the random generator [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: out].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Grid points, a power of two [default: 2048].
    #[arg(long, global = true, value_name = "N")]
    pub grid_n: Option<usize>,
    /// Periodic domain length in space units [default: 40].
    #[arg(long, global = true, value_name = "L")]
    pub grid_len: Option<f64>,
    /// Narrow feedforward spread a [default: 1].
    #[arg(long, global = true)]
    pub a: Option<f64>,
    /// Broad feedforward spread b [default: 2].
    #[arg(long, global = true)]
    pub b: Option<f64>,
    /// Excitatory feedback spread α [default: 1].
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Inhibitory feedback spread β [default: 2].
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Comma-separated scales in (0, 1] [default: 0.8,0.3,0.1].
    #[arg(long, global = true, value_delimiter = ',', value_name = "S,...")]
    pub scales: Option<Vec<f64>>,
    /// Input signal [default: tanh].
    #[arg(long, global = true, value_enum)]
    pub stimulus: Option<StimulusKind>,
    /// One sample per line (or `x,value` rows) for `--stimulus file`.
    #[arg(long, global = true, value_name = "PATH")]
    pub stimulus_file: Option<PathBuf>,
    /// Gain schedule [default: exact].
    #[arg(long, global = true, value_enum)]
    pub schedule: Option<ScheduleMode>,
    /// Coupling factor δ of the proportional schedule [default: 0.99].
    #[arg(long, global = true)]
    pub schedule_delta: Option<f64>,
    /// Relative size of the global parameter perturbations [default: 0.01].
    #[arg(long, global = true)]
    pub global_rel: Option<f64>,
    /// Relative size of the per-entry connectivity noise [default: 1e-4].
    #[arg(long, global = true)]
    pub local_eps: Option<f64>,
    /// δ used by robustness trials [default: 0.99].
    #[arg(long, global = true)]
    pub trial_delta: Option<f64>,
    /// Trials per scale [default: 5].
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Comma-separated positions for slope fits [default: -2,-1,-0.5,0.5,1,2].
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        value_name = "U,...",
        allow_hyphen_values = true
    )]
    pub fit_points: Option<Vec<f64>>,
    /// Comma-separated known singularities excluded from slope fits.
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        value_name = "X,...",
        allow_hyphen_values = true
    )]
    pub singularities: Option<Vec<f64>>,
    /// Simulated time for trajectories; none are written when absent.
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    /// Time step [default: 0.01·s^(-5/2)].
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Record every N-th step of a trajectory [default: 10].
    #[arg(long, global = true)]
    pub stride: Option<usize>,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub grid: SpatialGrid,
    pub bank: KernelBank,
    pub scales: Vec<f64>,
    pub stimulus: Stimulus,
    pub schedule: ScheduleMode,
    pub schedule_delta: f64,
    pub perturbation: PerturbationSpec,
    pub fit_points: Vec<f64>,
    pub singularities: Vec<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub stride: usize,
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(
            key,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn read_samples(path: &Path, n: usize) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| invalid("run.stimulus_file", format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            // A leading header row is allowed.
            Err(_) if values.is_empty() && lineno == 0 => continue,
            Err(e) => {
                return Err(invalid(
                    "run.stimulus_file",
                    format!("{}:{}: {e}", path.display(), lineno + 1),
                ))
            }
        }
    }
    if values.len() != n {
        return Err(invalid(
            "run.stimulus_file",
            format!(
                "{} holds {} samples, grid has {n}",
                path.display(),
                values.len()
            ),
        ));
    }
    Ok(values)
}

impl RunConfig {
    /// Merge the optional file with the flags and validate the result.
    pub fn load(flags: &ConfigFlags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                toml::from_str::<FileConfig>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        Self::resolve(file, flags)
    }

    fn resolve(file: FileConfig, flags: &ConfigFlags) -> Result<Self, CliError> {
        let n = flags.grid_n.or(file.grid.n_points).unwrap_or(2048);
        let length = positive(
            "grid.length",
            flags.grid_len.or(file.grid.length).unwrap_or(40.0),
        )?;
        let grid = SpatialGrid::new(n, length).map_err(|e| invalid("grid.n_points", e))?;

        let a = positive("kernels.a", flags.a.or(file.kernels.a).unwrap_or(1.0))?;
        let b = positive("kernels.b", flags.b.or(file.kernels.b).unwrap_or(2.0))?;
        let alpha = positive(
            "kernels.alpha",
            flags.alpha.or(file.kernels.alpha).unwrap_or(1.0),
        )?;
        let beta = positive(
            "kernels.beta",
            flags.beta.or(file.kernels.beta).unwrap_or(2.0),
        )?;
        if a >= b {
            return Err(invalid(
                "kernels.a",
                format!("must be below kernels.b ({a} >= {b})"),
            ));
        }
        if alpha >= beta {
            return Err(invalid(
                "kernels.alpha",
                format!("must be below kernels.beta ({alpha} >= {beta})"),
            ));
        }
        let bank = KernelBank::new(
            wavezoom::kernels::FeedforwardKernel::new(a, b).map_err(|e| invalid("kernels", e))?,
            wavezoom::kernels::ExpKernel::new(alpha).map_err(|e| invalid("kernels.alpha", e))?,
            wavezoom::kernels::ExpKernel::new(beta).map_err(|e| invalid("kernels.beta", e))?,
        )
        .map_err(|e| invalid("kernels", e))?;

        let scales = flags
            .scales
            .clone()
            .or(file.run.scales)
            .unwrap_or_else(|| vec![0.8, 0.3, 0.1]);
        if scales.is_empty() {
            return Err(invalid("run.scales", "must not be empty"));
        }
        for (i, &s) in scales.iter().enumerate() {
            if !(s.is_finite() && s > 0.0 && s <= 1.0) {
                return Err(invalid(
                    &format!("run.scales[{i}]"),
                    format!("must lie in (0, 1], got {s}"),
                ));
            }
        }

        let kind = flags
            .stimulus
            .or(file.run.stimulus)
            .unwrap_or(StimulusKind::Tanh);
        let stimulus = match kind {
            StimulusKind::Tanh => Stimulus::Tanh,
            StimulusKind::Step => Stimulus::Step,
            StimulusKind::Delta => Stimulus::Delta,
            StimulusKind::Ramp => Stimulus::Ramp,
            StimulusKind::Quadratic => Stimulus::Quadratic,
            StimulusKind::File => {
                let path = flags
                    .stimulus_file
                    .clone()
                    .or(file.run.stimulus_file)
                    .ok_or_else(|| {
                        invalid("run.stimulus_file", "required when run.stimulus = \"file\"")
                    })?;
                Stimulus::Samples(read_samples(&path, n)?)
            }
        };

        let schedule = flags
            .schedule
            .or(file.schedule.mode)
            .unwrap_or(ScheduleMode::Exact);
        let schedule_delta = flags.schedule_delta.or(file.schedule.delta).unwrap_or(0.99);
        if !(schedule_delta > 0.0 && schedule_delta <= 1.0) {
            return Err(invalid(
                "schedule.delta",
                format!("must lie in (0, 1], got {schedule_delta}"),
            ));
        }

        let defaults = PerturbationSpec::default();
        let seed = flags.seed.or(file.seed).unwrap_or(0);
        let perturbation = PerturbationSpec {
            global_rel: flags
                .global_rel
                .or(file.perturbation.global_rel)
                .unwrap_or(defaults.global_rel),
            local_eps: flags
                .local_eps
                .or(file.perturbation.local_eps)
                .unwrap_or(defaults.local_eps),
            delta: flags
                .trial_delta
                .or(file.perturbation.delta)
                .unwrap_or(defaults.delta),
            seed,
            n_trials: flags
                .trials
                .or(file.perturbation.n_trials)
                .unwrap_or(defaults.n_trials),
        };
        perturbation
            .validate()
            .map_err(|e| invalid("perturbation", e))?;

        let t_end = flags.t_end.or(file.dynamics.t_end);
        if let Some(t) = t_end {
            positive("dynamics.t_end", t)?;
        }
        let dt = flags.dt.or(file.dynamics.dt);
        if let Some(dt) = dt {
            positive("dynamics.dt", dt)?;
        }
        let stride = flags.stride.or(file.dynamics.stride).unwrap_or(10);
        if stride == 0 {
            return Err(invalid("dynamics.stride", "must be at least 1"));
        }

        Ok(Self {
            seed,
            out: flags
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("out")),
            grid,
            bank,
            scales,
            stimulus,
            schedule,
            schedule_delta,
            perturbation,
            fit_points: flags
                .fit_points
                .clone()
                .or(file.zoom.fit_points)
                .unwrap_or_else(|| vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]),
            singularities: flags
                .singularities
                .clone()
                .or(file.zoom.singularities)
                .unwrap_or_default(),
            t_end,
            dt,
            stride,
        })
    }

    /// Reject scales whose atom is narrower than two grid steps.
    pub fn require_resolved(&self) -> Result<(), CliError> {
        let min = 2.0 * self.grid.dx();
        for (i, &s) in self.scales.iter().enumerate() {
            if s * self.bank.ff.a() < min {
                return Err(invalid(
                    &format!("run.scales[{i}]"),
                    format!(
                        "scale {s} is unresolved: s·a = {} < 2·dx = {min}",
                        s * self.bank.ff.a()
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn require_matched(&self) -> Result<(), CliError> {
        if self.bank.is_matched() {
            Ok(())
        } else {
            Err(invalid(
                "kernels",
                "this command requires a = alpha and b = beta",
            ))
        }
    }
}
