use std::path::{Path, PathBuf};

use serde::Serialize;
use wavezoom::export::{
    format_number, write_csv, write_experiment, write_json, write_records, write_trajectory_csv,
    write_zoom_csv,
};
use wavezoom::fieldsim::{
    build_connectivity, integrate, operator_spectrum_check, FieldState, IntegrationOptions,
    SteadyStateSolver,
};
use wavezoom::robustness::{run_experiment, PerturbationSpec};
use wavezoom::spectral::SpatialGrid;
use wavezoom::stimulus::Stimulus;
use wavezoom::wavelet::{zoom_sweep, SlopeFit};
use wavezoom::zoomctl::{
    approx_gain_schedule, closed_loop_kernel, closed_loop_spectrum, gain_ratio_curve,
    gain_schedule, ratio_stability_test, stability_margin, Gains, RatioTest,
};

use crate::config::{RunConfig, ScheduleMode};
use crate::error::CliError;

type CmdResult = Result<Vec<PathBuf>, CliError>;

fn gains(cfg: &RunConfig, s: f64) -> Result<Gains, CliError> {
    let (alpha, beta) = (cfg.bank.alpha(), cfg.bank.beta());
    let scheduled = match cfg.schedule {
        ScheduleMode::Exact => gain_schedule(s, alpha, beta)?,
        ScheduleMode::Approx => approx_gain_schedule(s, alpha, beta, cfg.schedule_delta)?,
    };
    Ok(scheduled.gains)
}

fn scaled(dir: &Path, stem: &str, s: f64) -> PathBuf {
    dir.join(format!("{stem}_{s}.csv"))
}

pub fn schedule(cfg: &RunConfig) -> CmdResult {
    println!(
        "{:>10} {:>14} {:>14} {:>14} {:>10} {:>12} {:>10}",
        "s", "gamma", "K_E", "K_I", "kappa", "margin", "consistent"
    );
    let mut rows = Vec::new();
    for &s in &cfg.scales {
        let g = gains(cfg, s)?;
        let kappa = (g.k_i != 0.0).then(|| g.k_e / g.k_i);
        let margin = stability_margin(&cfg.bank, &g);
        println!(
            "{:>10.6} {:>14.6} {:>14.6} {:>14.6} {:>10} {:>12.6} {:>10}",
            s,
            g.gamma,
            g.k_e,
            g.k_i,
            kappa.map_or("-".to_string(), |k| format!("{k:.6}")),
            margin,
            g.model_consistent()
        );
        rows.push(vec![
            format_number(s),
            format_number(g.gamma),
            format_number(g.k_e),
            format_number(g.k_i),
            kappa.map_or(String::new(), format_number),
            format_number(margin),
            g.model_consistent().to_string(),
        ]);
    }
    let path = cfg.out.join("schedule.csv");
    write_records(
        &path,
        &[
            "s",
            "gamma",
            "k_e",
            "k_i",
            "kappa",
            "margin",
            "model_consistent",
        ],
        rows,
    )?;
    Ok(vec![path])
}

pub fn kernel(cfg: &RunConfig) -> CmdResult {
    let grid = cfg.grid;
    let mut written = Vec::new();
    for &s in &cfg.scales {
        let k = closed_loop_kernel(&cfg.bank, &gains(cfg, s)?, grid)?;
        let rows = (0..grid.n_points())
            .map(|i| -> Result<[f64; 3], CliError> {
                let x = grid.x(i);
                Ok([x, k.samples()[i], cfg.bank.ff.atom_value(0.0, s, x)?])
            })
            .collect::<Result<Vec<_>, _>>()?;
        let path = scaled(&cfg.out, "kernel", s);
        write_csv(&path, &["x", "kernel", "atom"], rows)?;
        written.push(path);
    }
    Ok(written)
}

pub fn spectrum(cfg: &RunConfig) -> CmdResult {
    let grid = cfg.grid;
    let mut written = Vec::new();
    for &s in &cfg.scales {
        let g = gains(cfg, s)?;
        let rows = (0..=grid.n_points() / 2)
            .map(|k| -> Result<[f64; 5], CliError> {
                let l = grid.frequency(k).abs();
                Ok([
                    l,
                    closed_loop_spectrum(&cfg.bank, &g, l)?,
                    cfg.bank.ff.atom_spectrum(s, l)?,
                    cfg.bank.ff.spectrum(l),
                    g.denominator(&cfg.bank, l),
                ])
            })
            .collect::<Result<Vec<_>, _>>()?;
        let path = scaled(&cfg.out, "spectrum", s);
        write_csv(
            &path,
            &[
                "lambda",
                "closed_loop",
                "atom",
                "feedforward",
                "denominator",
            ],
            rows,
        )?;
        written.push(path);
    }
    Ok(written)
}

pub fn respond(cfg: &RunConfig) -> CmdResult {
    let grid = cfg.grid;
    let stimulus = cfg.stimulus.signal(grid)?;
    let d2 = cfg.stimulus.second_derivative(grid);
    let k = cfg.bank.ff.theta_spectrum(0.0);
    let mut written = Vec::new();
    for &s in &cfg.scales {
        let g = gains(cfg, s)?;
        let margin = stability_margin(&cfg.bank, &g);
        if margin <= 0.0 {
            return Err(wavezoom::Error::Unstable { margin }.into());
        }
        let c = build_connectivity(grid, &g, &cfg.bank, None)?;
        let response = SteadyStateSolver::new(&c, &g)?.respond(&stimulus, &cfg.bank)?;
        let factor = s.powf(-2.5) / k;
        let mut header = vec!["x", "stimulus", "response", "normalized"];
        if d2.is_some() {
            header.push("second_derivative");
        }
        let rows = (0..grid.n_points()).map(|i| {
            let r = response.samples()[i];
            let mut row = vec![grid.x(i), stimulus.samples()[i], r, r * factor];
            if let Some(d) = &d2 {
                row.push(d.samples()[i]);
            }
            row
        });
        let path = scaled(&cfg.out, "response", s);
        write_csv(&path, &header, rows)?;
        written.push(path);

        if let Some(t_end) = cfg.t_end {
            let opts = match cfg.dt {
                Some(dt) => IntegrationOptions::new(dt, t_end)?,
                None => IntegrationOptions::for_scale(s, t_end)?,
            }
            .with_stride(cfg.stride);
            let tr = integrate(
                &c,
                &g,
                &stimulus,
                &cfg.bank,
                &opts,
                &FieldState::zeros(grid),
            )?;
            let path = scaled(&cfg.out, "trajectory", s);
            write_trajectory_csv(&path, &tr)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Serialize)]
struct ZoomSidecar<'a> {
    k_constant: f64,
    grid: SpatialGrid,
    a: f64,
    b: f64,
    stimulus: &'a str,
    scales: &'a [f64],
    singularities: &'a [f64],
    fits: &'a [SlopeFit],
}

pub fn zoom(cfg: &RunConfig) -> CmdResult {
    cfg.require_resolved()?;
    let f = cfg.stimulus.signal(cfg.grid)?;
    let sweep = zoom_sweep(
        &f,
        &cfg.scales,
        &cfg.bank.ff,
        &cfg.fit_points,
        &cfg.singularities,
    )?;
    for fit in &sweep.fits {
        match fit.slope {
            Some(v) => println!("u = {:>8.4}  slope = {v:.4}", fit.u),
            None => println!(
                "u = {:>8.4}  slope = n/a ({} scales)",
                fit.u,
                fit.scales_used.len()
            ),
        }
    }
    let csv = cfg.out.join("zoom.csv");
    write_zoom_csv(&csv, &sweep.results)?;
    let json = cfg.out.join("zoom.json");
    write_json(
        &json,
        &ZoomSidecar {
            k_constant: cfg.bank.ff.theta_spectrum(0.0),
            grid: cfg.grid,
            a: cfg.bank.ff.a(),
            b: cfg.bank.ff.b(),
            stimulus: cfg.stimulus.name(),
            scales: &cfg.scales,
            singularities: &cfg.singularities,
            fits: &sweep.fits,
        },
    )?;
    Ok(vec![csv, json])
}

/// Points of the `κ(s)` curve written by the stability command.
const RATIO_CURVE_POINTS: usize = 200;

pub fn stability(cfg: &RunConfig) -> CmdResult {
    let mut rows = Vec::new();
    for &s in &cfg.scales {
        let g = gains(cfg, s)?;
        let margin = stability_margin(&cfg.bank, &g);
        let ratio = ratio_stability_test(&g, cfg.bank.alpha(), cfg.bank.beta());
        let c = build_connectivity(cfg.grid, &g, &cfg.bank, None)?;
        let op = operator_spectrum_check(&c, &g)?;
        println!(
            "s = {s:<8} margin = {margin:>12.6}  max Re = {:>12.6}  {}",
            op.max_real_part,
            if op.is_stable() { "stable" } else { "UNSTABLE" }
        );
        let (ratio_value, holds) = match ratio {
            RatioTest::Holds { ratio } => (format_number(ratio), "true"),
            RatioTest::Fails { ratio } => (format_number(ratio), "false"),
            RatioTest::NotApplicable => (String::new(), ""),
        };
        rows.push(vec![
            format_number(s),
            format_number(g.gamma),
            format_number(g.k_e),
            format_number(g.k_i),
            format_number(margin),
            ratio_value,
            holds.to_string(),
            format_number(op.max_real_part),
            serde_json::to_value(op.method)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
            op.is_stable().to_string(),
        ]);
    }
    let path = cfg.out.join("stability.csv");
    write_records(
        &path,
        &[
            "s",
            "gamma",
            "k_e",
            "k_i",
            "margin",
            "ratio",
            "ratio_holds",
            "max_real_part",
            "method",
            "stable",
        ],
        rows,
    )?;
    let s_grid: Vec<f64> = (1..=RATIO_CURVE_POINTS)
        .map(|i| 0.01 + 0.98 * (i - 1) as f64 / (RATIO_CURVE_POINTS - 1) as f64)
        .collect();
    let curve = gain_ratio_curve(cfg.bank.alpha(), cfg.bank.beta(), &s_grid)?;
    let curve_path = cfg.out.join("gain_ratio.csv");
    write_csv(
        &curve_path,
        &["s", "kappa"],
        curve.points.iter().map(|&(s, k)| [s, k]),
    )?;
    Ok(vec![path, curve_path])
}

pub fn robustness(cfg: &RunConfig) -> CmdResult {
    cfg.require_matched()?;
    cfg.require_resolved()?;
    let report = run_experiment(
        &cfg.perturbation,
        &cfg.scales,
        &cfg.stimulus,
        cfg.grid,
        &cfg.bank,
    )?;
    for run in &report.scales {
        let s = &run.summary;
        println!(
            "s = {:<6} trials = {}  unstable = {}  failed = {}  median kernel dev = {}  median response err = {}",
            s.s,
            s.n_trials,
            s.stability_failures,
            s.solver_failures,
            s.median_kernel_deviation.map_or("n/a".into(), |v| format!("{v:.4}")),
            s.median_response_error.map_or("n/a".into(), |v| format!("{v:.4}")),
        );
    }
    Ok(write_experiment(&cfg.out, &report)?)
}

/// Robustness experiment with the reference settings: tanh input, scales
/// 0.8, 0.3, 0.1 and the default perturbation spec. Grid, kernels, seed and
/// output directory still come from the configuration.
pub fn reproduce_fig3(cfg: &RunConfig) -> CmdResult {
    let mut cfg = cfg.clone();
    cfg.scales = vec![0.8, 0.3, 0.1];
    cfg.stimulus = Stimulus::Tanh;
    cfg.perturbation = PerturbationSpec {
        seed: cfg.seed,
        ..PerturbationSpec::default()
    };
    robustness(&cfg)
}
