//! Discretized linear neural field `a_t = -γa + M a + W_ff ⋆ l`.
//!
//! `M` is the dense feedback matrix on the periodic grid. Entry `(i, j)` is
//! `dx [K_E w_E(x_i - x_j)(1 + ε p_ij) - K_I w_I(x_i - x_j)(1 + ε q_ij)]`, where
//! `w_E`, `w_I` are the band-limited periodic versions of the exponential
//! kernels. Without local noise `M` is circulant and its eigenvalues are
//! exactly `K_E Ŵ_E(λ_k) - K_I Ŵ_I(λ_k)` at the grid frequencies.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, Side};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelBank;
use crate::spectral::{band_limited_kernel, convolve, Signal, SpatialGrid, Spectrum};
use crate::zoomctl::Gains;

/// Magnitude beyond which a trajectory is treated as diverging.
pub const OVERFLOW_GUARD: f64 = 1e12;

/// Reciprocal condition estimates below this are rejected by the solver.
pub const MIN_RCOND: f64 = 1e-14;

/// Largest grid for which [`operator_spectrum_check`] runs the dense
/// nonsymmetric eigensolver without first trying the symmetric bound.
pub const DENSE_EIGEN_LIMIT: usize = 512;

/// Multiplicative per-entry noise on the feedback matrix.
///
/// `p_ij`, `q_ij` are standard normal draws from a ChaCha20 generator seeded
/// with `seed` on stream `stream`, taken in row-major order (`p` before `q`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalNoise {
    pub eps: f64,
    pub seed: u64,
    pub stream: u64,
}

/// Feedback matrix `M` on a periodic grid.
#[derive(Debug, Clone)]
pub struct Connectivity {
    grid: SpatialGrid,
    matrix: Mat<f64>,
    perturbed: bool,
}

impl Connectivity {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// True when local noise was applied, i.e. the matrix is not circulant.
    pub fn is_perturbed(&self) -> bool {
        self.perturbed
    }

    /// Eigenvalues of the circulant matrix, `Σ_m M[m, 0] e^{-2πikm/n}`, in
    /// FFT order. `None` for perturbed matrices.
    pub fn circulant_eigenvalues(&self) -> Option<Vec<Complex64>> {
        if self.perturbed {
            return None;
        }
        let n = self.grid.n_points();
        let mut buf: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(self.matrix[(i, 0)], 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        Some(buf)
    }

    /// Largest `|M_ij - M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.grid.n_points();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
            }
        }
        worst
    }
}

/// Assemble `M` for gains `g` and the feedback kernels of `bank`.
pub fn build_connectivity(
    grid: SpatialGrid,
    g: &Gains,
    bank: &KernelBank,
    noise: Option<&LocalNoise>,
) -> Result<Connectivity> {
    let n = grid.n_points();
    let dx = grid.dx();
    let w_e = band_limited_kernel(grid, |l| bank.exc.spectrum(l))?;
    let w_i = band_limited_kernel(grid, |l| bank.inh.spectrum(l))?;
    let o = grid.origin();
    // Lag m = (i - j) mod n sits at index origin + m of the centered samples.
    let lag_e: Vec<f64> = (0..n)
        .map(|m| dx * g.k_e * w_e.samples()[(o + m) % n])
        .collect();
    let lag_i: Vec<f64> = (0..n)
        .map(|m| dx * g.k_i * w_i.samples()[(o + m) % n])
        .collect();

    let mut matrix = Mat::<f64>::zeros(n, n);
    let noise = noise.filter(|nz| nz.eps != 0.0);
    if let Some(nz) = noise {
        if !nz.eps.is_finite() {
            return Err(Error::domain(format!(
                "noise amplitude must be finite, got {}",
                nz.eps
            )));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(nz.seed);
        rng.set_stream(nz.stream);
        for i in 0..n {
            for j in 0..n {
                let p: f64 = StandardNormal.sample(&mut rng);
                let q: f64 = StandardNormal.sample(&mut rng);
                let m = (i + n - j) % n;
                matrix[(i, j)] = lag_e[m] * (1.0 + nz.eps * p) - lag_i[m] * (1.0 + nz.eps * q);
            }
        }
    } else {
        for i in 0..n {
            for j in 0..n {
                let m = (i + n - j) % n;
                matrix[(i, j)] = lag_e[m] - lag_i[m];
            }
        }
    }
    Ok(Connectivity {
        grid,
        matrix,
        perturbed: noise.is_some(),
    })
}

/// Activity snapshot `a(x_i, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub activity: Signal,
}

impl FieldState {
    pub fn new(t: f64, activity: Signal) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::domain(format!(
                "time must be finite and non-negative, got {t}"
            )));
        }
        Ok(Self { t, activity })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self {
            t: 0.0,
            activity: Signal::zeros(grid),
        }
    }
}

/// Sampled solution of [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<FieldState>,
}

impl Trajectory {
    pub fn last(&self) -> &FieldState {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }
}

/// Feedforward drive `W_ff ⋆ l`, computed spectrally.
pub fn feedforward_drive(stimulus: &Signal, bank: &KernelBank) -> Result<Signal> {
    let ff = Spectrum::from_real_fn(*stimulus.grid(), |l| bank.ff.spectrum(l));
    convolve(stimulus, &ff)
}

fn operator_1_norm(a: &Mat<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn column(values: &[f64]) -> Mat<f64> {
    Mat::from_fn(values.len(), 1, |i, _| values[i])
}

/// Hager's estimate of `‖A⁻¹‖₁` from an LU factorization.
fn inverse_1_norm_estimate(lu: &PartialPivLu<f64>, n: usize) -> f64 {
    let mut x = column(&vec![1.0 / n as f64; n]);
    let mut estimate = 0.0;
    for _ in 0..5 {
        let mut y = x.clone();
        lu.solve_in_place(y.as_mut());
        estimate = (0..n).map(|i| y[(i, 0)].abs()).sum::<f64>();
        let mut z = Mat::from_fn(n, 1, |i, _| if y[(i, 0)] >= 0.0 { 1.0 } else { -1.0 });
        lu.solve_transpose_in_place(z.as_mut());
        let (jmax, zmax) = (0..n)
            .map(|i| (i, z[(i, 0)].abs()))
            .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        let ztx: f64 = (0..n).map(|i| z[(i, 0)] * x[(i, 0)]).sum();
        if zmax <= ztx {
            break;
        }
        x = Mat::from_fn(n, 1, |i, _| if i == jmax { 1.0 } else { 0.0 });
    }
    estimate
}

/// Factorized `cI - dM` with a reciprocal condition estimate.
struct ShiftedSolver {
    lu: PartialPivLu<f64>,
    rcond: f64,
}

impl ShiftedSolver {
    fn new(c: &Connectivity, diag: f64, scale: f64) -> Result<Self> {
        let n = c.grid.n_points();
        let a = Mat::from_fn(n, n, |i, j| {
            let v = -scale * c.matrix[(i, j)];
            if i == j {
                v + diag
            } else {
                v
            }
        });
        let norm = operator_1_norm(&a);
        let lu = a.partial_piv_lu();
        let rcond = 1.0 / (norm * inverse_1_norm_estimate(&lu, n));
        if !(rcond.is_finite() && rcond >= MIN_RCOND) {
            return Err(Error::IllConditioned {
                rcond: if rcond.is_finite() { rcond } else { 0.0 },
            });
        }
        Ok(Self { lu, rcond })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = column(rhs);
        self.lu.solve_in_place(x.as_mut());
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }
}

/// Direct solver for the equilibrium `(γI - M) a = h`.
pub struct SteadyStateSolver {
    grid: SpatialGrid,
    inner: ShiftedSolver,
}

impl SteadyStateSolver {
    pub fn new(c: &Connectivity, g: &Gains) -> Result<Self> {
        Ok(Self {
            grid: c.grid,
            inner: ShiftedSolver::new(c, g.gamma, 1.0)?,
        })
    }

    /// Estimated reciprocal 1-norm condition number of `γI - M`.
    pub fn rcond(&self) -> f64 {
        self.inner.rcond
    }

    /// Solve for the equilibrium under an already-filtered drive `h`.
    pub fn solve(&self, drive: &Signal) -> Result<Signal> {
        self.grid.check_same(drive.grid())?;
        Signal::new(self.grid, self.inner.solve(drive.samples()))
    }

    /// Equilibrium response to a raw stimulus `l`.
    pub fn respond(&self, stimulus: &Signal, bank: &KernelBank) -> Result<Signal> {
        self.solve(&feedforward_drive(stimulus, bank)?)
    }
}

/// Equilibrium `a = (γI - M)⁻¹ (W_ff ⋆ l)`.
pub fn steady_state(
    c: &Connectivity,
    g: &Gains,
    stimulus: &Signal,
    bank: &KernelBank,
) -> Result<Signal> {
    c.grid.check_same(stimulus.grid())?;
    SteadyStateSolver::new(c, g)?.respond(stimulus, bank)
}

/// Time stepping controls shared by both integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrationOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Record every `stride`-th step; the final state is always recorded.
    pub stride: usize,
}

impl IntegrationOptions {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::domain(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::domain(format!(
                "end time must be positive, got {t_end}"
            )));
        }
        Ok(Self {
            dt,
            t_end,
            stride: 1,
        })
    }

    /// Default step `10⁻² s^{-5/2}` for the schedule at scale `s`.
    pub fn for_scale(s: f64, t_end: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::domain(format!("scale must lie in (0, 1], got {s}")));
        }
        Self::new(1e-2 * s.powf(-2.5), t_end)
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    /// Number of uniform steps; the step is shrunk so they end exactly at `t_end`.
    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    pub fn effective_dt(&self) -> f64 {
        self.t_end / self.steps() as f64
    }

    fn records(&self, step: usize) -> bool {
        step.is_multiple_of(self.stride) || step == self.steps()
    }
}

/// Backward Euler on `a' = -γa + Ma + W_ff ⋆ l` from `initial`.
pub fn integrate(
    c: &Connectivity,
    g: &Gains,
    stimulus: &Signal,
    bank: &KernelBank,
    opts: &IntegrationOptions,
    initial: &FieldState,
) -> Result<Trajectory> {
    c.grid.check_same(stimulus.grid())?;
    c.grid.check_same(initial.activity.grid())?;
    let drive = feedforward_drive(stimulus, bank)?;
    let steps = opts.steps();
    let dt = opts.effective_dt();
    let solver = ShiftedSolver::new(c, 1.0 + dt * g.gamma, dt)?;

    let mut states = vec![initial.clone()];
    let mut a = initial.activity.samples().to_vec();
    for step in 1..=steps {
        let rhs: Vec<f64> = a
            .iter()
            .zip(drive.samples())
            .map(|(v, h)| v + dt * h)
            .collect();
        a = solver.solve(&rhs);
        let t = initial.t + step as f64 * dt;
        for (index, v) in a.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if v.abs() > OVERFLOW_GUARD {
                return Err(Error::Overflow { t });
            }
        }
        if opts.records(step) {
            states.push(FieldState {
                t,
                activity: Signal::new(c.grid, a.clone())?,
            });
        }
    }
    Ok(Trajectory { states })
}

/// Spectrum of the activity at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub t: f64,
    pub spectrum: Spectrum,
}

/// Exact per-mode solution of `â' = (-γ + Ŵ(λ_k)) â + Ŵ_ff(λ_k) l̂(λ_k)`,
/// sampled at the same times as [`integrate`].
pub fn spectral_integrate(
    g: &Gains,
    bank: &KernelBank,
    stimulus: &Spectrum,
    initial: &Spectrum,
    opts: &IntegrationOptions,
) -> Result<Vec<SpectralState>> {
    let grid = *stimulus.grid();
    grid.check_same(initial.grid())?;
    let steps = opts.steps();
    let dt = opts.effective_dt();
    let n = grid.n_points();
    let mut growth = Vec::with_capacity(n);
    let mut forcing = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = grid.frequency(k);
        let mu = -g.denominator(bank, lambda);
        // (e^{μ dt} - 1)/μ, with the μ → 0 limit dt.
        let phi = if mu == 0.0 {
            dt
        } else {
            (mu * dt).exp_m1() / mu
        };
        growth.push((mu * dt).exp());
        forcing.push(stimulus.samples()[k] * bank.ff.spectrum(lambda) * phi);
    }

    let mut states = vec![SpectralState {
        t: 0.0,
        spectrum: initial.clone(),
    }];
    let mut a = initial.clone();
    for step in 1..=steps {
        for (k, v) in a.samples_mut().iter_mut().enumerate() {
            *v = *v * growth[k] + forcing[k];
        }
        if opts.records(step) {
            states.push(SpectralState {
                t: step as f64 * dt,
                spectrum: a.clone(),
            });
        }
    }
    Ok(states)
}

/// How the largest real part of `-γI + M` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// FFT of the first column of a circulant matrix.
    Circulant,
    /// Dense nonsymmetric eigensolver.
    Dense,
    /// Largest eigenvalue of the symmetric part, an upper bound on every
    /// eigenvalue's real part.
    NumericalAbscissa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorSpectrum {
    pub method: EigenMethod,
    pub max_real_part: f64,
}

impl OperatorSpectrum {
    /// Negative maximum real part certifies exponential stability.
    pub fn is_stable(&self) -> bool {
        self.max_real_part < 0.0
    }
}

fn operator_matrix(c: &Connectivity, g: &Gains) -> Mat<f64> {
    let n = c.grid.n_points();
    Mat::from_fn(n, n, |i, j| {
        let v = c.matrix[(i, j)];
        if i == j {
            v - g.gamma
        } else {
            v
        }
    })
}

/// Largest real part of the spectrum of `-γI + M` by the requested method.
pub fn operator_spectrum_with(
    c: &Connectivity,
    g: &Gains,
    method: EigenMethod,
) -> Result<OperatorSpectrum> {
    let max_real_part = match method {
        EigenMethod::Circulant => {
            let eig = c
                .circulant_eigenvalues()
                .ok_or_else(|| Error::domain("circulant method requires an unperturbed matrix"))?;
            eig.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max) - g.gamma
        }
        EigenMethod::Dense => operator_matrix(c, g)
            .eigenvalues()
            .map_err(|e| Error::Solver(format!("{e:?}")))?
            .iter()
            .map(|v| v.re)
            .fold(f64::NEG_INFINITY, f64::max),
        EigenMethod::NumericalAbscissa => {
            let a = operator_matrix(c, g);
            let n = a.nrows();
            let h = Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
            h.self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| Error::Solver(format!("{e:?}")))?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
        }
    };
    Ok(OperatorSpectrum {
        method,
        max_real_part,
    })
}

/// Stability verdict for `-γI + M`.
///
/// Unperturbed matrices use the circulant diagonalization, small perturbed ones
/// the dense eigensolver. Large perturbed matrices first try the symmetric-part
/// bound and fall back to the dense eigensolver only when that bound is
/// inconclusive.
pub fn operator_spectrum_check(c: &Connectivity, g: &Gains) -> Result<OperatorSpectrum> {
    if !c.perturbed {
        return operator_spectrum_with(c, g, EigenMethod::Circulant);
    }
    if c.grid.n_points() <= DENSE_EIGEN_LIMIT {
        return operator_spectrum_with(c, g, EigenMethod::Dense);
    }
    let bound = operator_spectrum_with(c, g, EigenMethod::NumericalAbscissa)?;
    if bound.is_stable() {
        Ok(bound)
    } else {
        operator_spectrum_with(c, g, EigenMethod::Dense)
    }
}
