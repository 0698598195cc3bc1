//! Stochastic shell dynamics with multiplicative node noise.
//!
//! The Stratonovich form perturbs every node by its own noise through the
//! parent intensity and by its children's noises:
//!
//! ```text
//! dX_j = (c_j X_par^2 - X_j sum_k c_k X_k) dt
//!        + c_j X_par o dW_j - sum_{k child} c_k X_k o dW_k
//! ```
//!
//! The equivalent Ito form carries the corrector
//! `-(c_j^2 [j != root] + sum_k c_k^2) X_j / 2`; the root's own-noise
//! coefficient is the frozen phantom intensity f, so it contributes no
//! corrector term. At the leaves, child noises and the matching corrector
//! terms are both absent, which keeps the truncated Ito system exactly the
//! Ito form of the truncated Stratonovich system.

use crate::dynamics::{ShellModel, DIVERGENCE_THRESHOLD};
use crate::error::{Error, Result};
use crate::parallel::run_indexed;
use crate::philox::standard_normal;
use crate::state::{energy, Trajectory};

/// Stability guard for explicit stochastic stepping.
pub fn dt_stability_bound(model: &ShellModel) -> f64 {
    let cmax = model.max_coupling();
    1e-2 / (cmax * cmax)
}

/// Identifies which increments a path consumed; regeneration from the
/// indices is bit-identical.
#[derive(Debug, Clone)]
pub struct NoiseRecord {
    pub seed: u64,
    pub path_index: u32,
    pub dt: f64,
    pub n_steps: usize,
    pub n_nodes: usize,
}

impl NoiseRecord {
    /// Gaussian increment with variance dt for (step, node).
    #[inline]
    pub fn increment(&self, step: usize, node: usize) -> f64 {
        self.dt.sqrt() * standard_normal(self.seed, self.path_index, step as u64, node as u32)
    }

    pub fn fill(&self, step: usize, out: &mut [f64]) {
        for (node, slot) in out.iter_mut().enumerate() {
            *slot = self.increment(step, node);
        }
    }
}

/// Integration scheme / law tag for stochastic paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdeScheme {
    /// Ito Euler-Maruyama of the nonlinear system.
    ItoEulerMaruyama,
    /// Predictor-corrector (Heun) of the Stratonovich nonlinear system.
    StratonovichHeun,
    /// Ito Euler-Maruyama of the Girsanov-linearised system.
    LinearEulerMaruyama,
}

impl SdeScheme {
    pub fn name(self) -> &'static str {
        match self {
            SdeScheme::ItoEulerMaruyama => "ito-euler-maruyama",
            SdeScheme::StratonovichHeun => "stratonovich-heun",
            SdeScheme::LinearEulerMaruyama => "linear-euler-maruyama",
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(self, SdeScheme::LinearEulerMaruyama)
    }
}

/// Sparse diffusion table: row j holds the coefficient of dW_k in dX_j.
/// Row j carries its own-noise entry (column j) and one entry per child.
pub fn diffusion_rows(model: &ShellModel, x: &[f64]) -> Vec<Vec<(usize, f64)>> {
    let c = &model.coeffs.c;
    model
        .topology
        .nodes()
        .map(|j| {
            let mut row = Vec::with_capacity(1 + model.topology.arity());
            row.push((j, c[j] * model.parent_intensity(x, j)));
            for k in model.topology.children(j) {
                row.push((k, -c[k] * x[k]));
            }
            row
        })
        .collect()
}

/// G(x) * dw accumulated into `out`.
#[inline]
fn apply_diffusion(model: &ShellModel, x: &[f64], dw: &[f64], out: &mut [f64]) {
    let c = &model.coeffs.c;
    for j in model.topology.nodes() {
        let mut acc = c[j] * model.parent_intensity(x, j) * dw[j];
        for k in model.topology.children(j) {
            acc -= c[k] * x[k] * dw[k];
        }
        out[j] += acc;
    }
}

/// Nonlinear Stratonovich drift: the inviscid tree rule.
#[inline]
fn strat_drift_into(model: &ShellModel, x: &[f64], out: &mut [f64]) {
    let c = &model.coeffs.c;
    for j in model.topology.nodes() {
        let xp = model.parent_intensity(x, j);
        let child_flux: f64 = model.topology.children(j).map(|k| c[k] * x[k]).sum();
        out[j] = c[j] * xp * xp - x[j] * child_flux;
    }
}

/// Ito drift of the nonlinear system: inviscid tree rule plus corrector.
pub fn ito_drift(model: &ShellModel, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    strat_drift_into(model, x, &mut out);
    for j in model.topology.nodes() {
        out[j] -= model.ito_corr[j] * x[j];
    }
    out
}

/// Ito drift of the Girsanov-linearised system: corrector only.
pub fn linear_drift(model: &ShellModel, x: &[f64]) -> Vec<f64> {
    model
        .topology
        .nodes()
        .map(|j| -model.ito_corr[j] * x[j])
        .collect()
}

#[derive(Debug, Clone)]
pub struct SdeOptions {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub n_paths: usize,
    /// Energy snapshots every `stride` steps.
    pub stride: usize,
    pub threads: usize,
    /// Also keep full states at the snapshot times (memory per path grows
    /// with node count; meant for small demonstration runs).
    pub store_states: bool,
}

impl SdeOptions {
    pub fn new(dt: f64, t_end: f64, seed: u64, n_paths: usize) -> Self {
        SdeOptions { dt, t_end, seed, n_paths, stride: 10, threads: 1, store_states: false }
    }
}

/// Per-path result retained by an ensemble.
#[derive(Debug, Clone)]
pub struct PathSummary {
    pub path_index: u32,
    pub final_state: Vec<f64>,
    /// Energy at the snapshot times.
    pub energies: Vec<f64>,
    /// States at the snapshot times, when requested.
    pub states: Option<Vec<Vec<f64>>>,
    /// Log Radon-Nikodym derivative toward the other law (see
    /// `girsanov`): d(linear law)/d(own) on nonlinear paths and vice versa.
    pub log_weight: f64,
    pub diverged_at: Option<f64>,
}

/// Seeded collection of stochastic paths with shared snapshot times.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub scheme: SdeScheme,
    pub seed: u64,
    pub dt: f64,
    pub snapshot_times: Vec<f64>,
    pub paths: Vec<PathSummary>,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn diverged_count(&self) -> usize {
        self.paths.iter().filter(|p| p.diverged_at.is_some()).count()
    }
}

/// One fully recorded path: every step's state plus its noise record.
#[derive(Debug, Clone)]
pub struct StochPath {
    pub trajectory: Trajectory,
    pub noise: NoiseRecord,
    pub scheme: SdeScheme,
    pub log_weight: f64,
}

fn check_sde_inputs(model: &ShellModel, x0: &[f64], dt: f64, t_end: f64) -> Result<usize> {
    if model.scheme.nu != 0.0 {
        return Err(Error::invalid("the stochastic model is inviscid: set nu = 0"));
    }
    if x0.len() != model.node_count() {
        return Err(Error::invalid("initial state dimension does not match the topology"));
    }
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::invalid("need positive dt and t_end"));
    }
    let bound = dt_stability_bound(model);
    if dt > bound {
        return Err(Error::invalid(format!(
            "dt = {dt:.3e} exceeds the stability guard {bound:.3e} = 1e-2 / max c^2"
        )));
    }
    Ok((t_end / dt).round().max(1.0) as usize)
}

struct StepContext<'a> {
    model: &'a ShellModel,
    scheme: SdeScheme,
    dt: f64,
    dw: Vec<f64>,
    drift: Vec<f64>,
    drift_pred: Vec<f64>,
    pred: Vec<f64>,
    diff: Vec<f64>,
}

impl<'a> StepContext<'a> {
    fn new(model: &'a ShellModel, scheme: SdeScheme, dt: f64) -> Self {
        let n = model.node_count();
        StepContext {
            model,
            scheme,
            dt,
            dw: vec![0.0; n],
            drift: vec![0.0; n],
            drift_pred: vec![0.0; n],
            pred: vec![0.0; n],
            diff: vec![0.0; n],
        }
    }

    /// Advance `x` by one step; also accumulate the left-point log-weight
    /// quadrature. Increments for the step are already in `self.dw`.
    fn advance(&mut self, x: &mut [f64], log_weight: &mut f64) {
        let model = self.model;
        let n = x.len();
        let dt = self.dt;

        // Left-point Girsanov quadrature (theta_j = parent intensity):
        // nonlinear paths accumulate log d(linear)/d(own) = -sum theta dW - 1/2 sum theta^2 dt,
        // linear paths accumulate log d(nonlinear)/d(own) = +sum theta dW - 1/2 sum theta^2 dt.
        let sign = if self.scheme.is_linear() { 1.0 } else { -1.0 };
        let mut quad = 0.0;
        for j in 0..n {
            let theta = model.parent_intensity(x, j);
            quad += sign * theta * self.dw[j] - 0.5 * theta * theta * dt;
        }
        *log_weight += quad;

        match self.scheme {
            SdeScheme::ItoEulerMaruyama => {
                strat_drift_into(model, x, &mut self.drift);
                for j in 0..n {
                    self.drift[j] -= model.ito_corr[j] * x[j];
                }
                self.diff.fill(0.0);
                apply_diffusion(model, x, &self.dw, &mut self.diff);
                for j in 0..n {
                    x[j] += self.drift[j] * dt + self.diff[j];
                }
            }
            SdeScheme::LinearEulerMaruyama => {
                self.diff.fill(0.0);
                apply_diffusion(model, x, &self.dw, &mut self.diff);
                for j in 0..n {
                    x[j] += -model.ito_corr[j] * x[j] * dt + self.diff[j];
                }
            }
            SdeScheme::StratonovichHeun => {
                // Predictor (Euler) with the same increments, then trapezoidal
                // average of drift and diffusion.
                strat_drift_into(model, x, &mut self.drift);
                self.diff.fill(0.0);
                apply_diffusion(model, x, &self.dw, &mut self.diff);
                for j in 0..n {
                    self.pred[j] = x[j] + self.drift[j] * dt + self.diff[j];
                }
                strat_drift_into(model, &self.pred, &mut self.drift_pred);
                self.diff.fill(0.0);
                apply_diffusion(model, &self.pred, &self.dw, &mut self.diff);
                apply_diffusion(model, x, &self.dw, &mut self.diff);
                for j in 0..n {
                    x[j] += 0.5 * (self.drift[j] + self.drift_pred[j]) * dt + 0.5 * self.diff[j];
                }
            }
        }
    }
}

fn run_one_path(
    model: &ShellModel,
    scheme: SdeScheme,
    x0: &[f64],
    opts: &SdeOptions,
    path_index: u32,
    n_steps: usize,
    stride: usize,
) -> PathSummary {
    let noise = NoiseRecord {
        seed: opts.seed,
        path_index,
        dt: opts.dt,
        n_steps,
        n_nodes: model.node_count(),
    };
    let mut ctx = StepContext::new(model, scheme, opts.dt);
    let mut x = x0.to_vec();
    let mut log_weight = 0.0;
    let mut energies = vec![energy(&x)];
    let mut states = opts.store_states.then(|| vec![x.clone()]);
    let mut diverged_at = None;
    for step in 0..n_steps {
        noise.fill(step, &mut ctx.dw);
        ctx.advance(&mut x, &mut log_weight);
        if !x.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_THRESHOLD) {
            diverged_at = Some((step + 1) as f64 * opts.dt);
            break;
        }
        if (step + 1) % stride == 0 || step + 1 == n_steps {
            energies.push(energy(&x));
            if let Some(states) = states.as_mut() {
                states.push(x.clone());
            }
        }
    }
    PathSummary { path_index, final_state: x, energies, states, log_weight, diverged_at }
}

fn run_ensemble(
    model: &ShellModel,
    scheme: SdeScheme,
    x0: &[f64],
    opts: &SdeOptions,
) -> Result<PathEnsemble> {
    let n_steps = check_sde_inputs(model, x0, opts.dt, opts.t_end)?;
    if opts.n_paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    let stride = opts.stride.max(1);
    let mut snapshot_times = vec![0.0];
    for step in 1..=n_steps {
        if step % stride == 0 || step == n_steps {
            snapshot_times.push(step as f64 * opts.dt);
        }
    }
    let paths = run_indexed(opts.n_paths, opts.threads, |p| {
        run_one_path(model, scheme, x0, opts, p as u32, n_steps, stride)
    });
    Ok(PathEnsemble { scheme, seed: opts.seed, dt: opts.dt, snapshot_times, paths })
}

/// Ito Euler-Maruyama ensemble of the nonlinear system.
pub fn euler_maruyama(model: &ShellModel, x0: &[f64], opts: &SdeOptions) -> Result<PathEnsemble> {
    run_ensemble(model, SdeScheme::ItoEulerMaruyama, x0, opts)
}

/// Heun (predictor-corrector) ensemble of the Stratonovich system, using
/// the same increments as the Ito runs.
pub fn stratonovich_heun(model: &ShellModel, x0: &[f64], opts: &SdeOptions) -> Result<PathEnsemble> {
    run_ensemble(model, SdeScheme::StratonovichHeun, x0, opts)
}

/// Ito Euler-Maruyama ensemble of the Girsanov-linearised system.
pub fn simulate_linear(model: &ShellModel, x0: &[f64], opts: &SdeOptions) -> Result<PathEnsemble> {
    run_ensemble(model, SdeScheme::LinearEulerMaruyama, x0, opts)
}

/// One path with the full per-step state history retained (for the
/// standalone log-weight quadrature and small demos).
pub fn simulate_path(
    model: &ShellModel,
    scheme: SdeScheme,
    x0: &[f64],
    dt: f64,
    t_end: f64,
    seed: u64,
    path_index: u32,
) -> Result<StochPath> {
    let n_steps = check_sde_inputs(model, x0, dt, t_end)?;
    let noise = NoiseRecord { seed, path_index, dt, n_steps, n_nodes: model.node_count() };
    let mut ctx = StepContext::new(model, scheme, dt);
    let mut x = x0.to_vec();
    let mut log_weight = 0.0;
    let mut times = vec![0.0];
    let mut energies = vec![energy(&x)];
    let mut states = vec![x.clone()];
    let mut diverged_at = None;
    for step in 0..n_steps {
        noise.fill(step, &mut ctx.dw);
        ctx.advance(&mut x, &mut log_weight);
        let t = (step + 1) as f64 * dt;
        if !x.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_THRESHOLD) {
            diverged_at = Some(t);
            break;
        }
        times.push(t);
        energies.push(energy(&x));
        states.push(x.clone());
    }
    Ok(StochPath {
        trajectory: Trajectory {
            times,
            energies,
            states: Some(states),
            dt,
            method: crate::state::Method::Euler,
            diverged_at,
        },
        noise,
        scheme,
        log_weight,
    })
}

/// Empirical check of the energy-controlled class: fraction of paths whose
/// recorded energy never exceeds E(0) + tol, and the worst excess. The
/// tolerance 10 * dt * E(0) is a scheme-error allowance, not a claim about
/// exact solutions.
pub fn energy_control_check(ensemble: &PathEnsemble, x0: &[f64]) -> (f64, f64) {
    energy_control_check_with_tol(ensemble, x0, 10.0 * ensemble.dt * energy(x0))
}

pub fn energy_control_check_with_tol(ensemble: &PathEnsemble, x0: &[f64], tol: f64) -> (f64, f64) {
    let e0 = energy(x0);
    let mut ok = 0usize;
    let mut max_excess: f64 = 0.0;
    for path in &ensemble.paths {
        let max_e = path.energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let excess = max_e - e0;
        if excess <= tol {
            ok += 1;
        }
        max_excess = max_excess.max(excess);
    }
    (ok as f64 / ensemble.n_paths() as f64, max_excess)
}
