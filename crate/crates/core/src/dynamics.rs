//! Deterministic shell dynamics: right-hand sides, fixed-step integration,
//! and energy diagnostics.
//!
//! The tree rule for node j reads
//!
//! ```text
//! dX_j/dt = -nu*v_j*X_j + c_j*X_par(j)^2 - X_j * sum_{k child of j} c_k*X_k
//! ```
//!
//! with the phantom parent of the root held at the forcing intensity f. The
//! chain rule is the arity-1 specialisation and is implemented separately as
//! a direct indexed loop; the two must agree bit for bit on chains.

use crate::error::{Error, Result};
use crate::scheme::{coefficient_table, CoefficientScheme, CoefficientTable};
use crate::state::{energy, Method, Trajectory};
use crate::topology::Topology;

/// Any |x_j| beyond this flags blow-up: far above desk-scale regular
/// solutions, far below overflow.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Topology, scheme and derived tables bundled for the dynamics modules.
#[derive(Debug, Clone)]
pub struct ShellModel {
    pub topology: Topology,
    pub scheme: CoefficientScheme,
    pub coeffs: CoefficientTable,
    /// Ito corrector coefficients: corr_j = (c_j^2 [j != root] +
    /// sum_{k child} c_k^2) / 2. The root term is absent because the
    /// phantom parent is frozen at f and contributes no Stratonovich
    /// correction.
    pub ito_corr: Vec<f64>,
}

impl ShellModel {
    pub fn new(topology: Topology, scheme: CoefficientScheme) -> ShellModel {
        let coeffs = coefficient_table(&topology, &scheme);
        let mut ito_corr = vec![0.0; topology.node_count()];
        for j in topology.nodes() {
            let own = if j == 0 { 0.0 } else { coeffs.c[j] * coeffs.c[j] };
            let kids: f64 = topology.children(j).map(|k| coeffs.c[k] * coeffs.c[k]).sum();
            ito_corr[j] = 0.5 * (own + kids);
        }
        ShellModel { topology, scheme, coeffs, ito_corr }
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn max_coupling(&self) -> f64 {
        self.coeffs.c.iter().cloned().fold(0.0, f64::max)
    }

    /// Intensity of the parent of `j`, with the phantom parent of the root
    /// frozen at the forcing value.
    #[inline]
    pub fn parent_intensity(&self, x: &[f64], j: usize) -> f64 {
        match self.topology.parent(j) {
            Some(p) => x[p],
            None => self.scheme.forcing,
        }
    }

    /// Tree-rule drift, written against parent/children adjacency.
    pub fn drift_kp(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.drift_kp_into(x, &mut out);
        out
    }

    pub fn drift_kp_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.node_count());
        let c = &self.coeffs.c;
        let visc = &self.coeffs.visc;
        let nu = self.scheme.nu;
        for j in self.topology.nodes() {
            let xp = self.parent_intensity(x, j);
            let child_flux: f64 = self.topology.children(j).map(|k| c[k] * x[k]).sum();
            out[j] = -nu * visc[j] * x[j] + c[j] * xp * xp - x[j] * child_flux;
        }
    }

    /// Chain-rule drift as a direct indexed loop; defined on chains only.
    pub fn drift_dn(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.drift_dn_into(x, &mut out);
        out
    }

    pub fn drift_dn_into(&self, x: &[f64], out: &mut [f64]) {
        assert!(self.topology.is_chain(), "the chain rule needs a chain topology");
        debug_assert_eq!(x.len(), self.node_count());
        let c = &self.coeffs.c;
        let visc = &self.coeffs.visc;
        let nu = self.scheme.nu;
        let n = x.len();
        for j in 0..n {
            let xp = if j == 0 { self.scheme.forcing } else { x[j - 1] };
            let child = if j + 1 < n { c[j + 1] * x[j + 1] } else { 0.0 };
            out[j] = -nu * visc[j] * x[j] + c[j] * xp * xp - x[j] * child;
        }
    }

    /// Dispatch on the model kind used by integrate().
    fn drift_into(&self, kind: ModelKind, x: &[f64], out: &mut [f64]) {
        match kind {
            ModelKind::Kp => self.drift_kp_into(x, out),
            ModelKind::Dn => self.drift_dn_into(x, out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Kp,
    Dn,
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
    /// Snapshots every `stride` steps (initial and final always recorded).
    pub stride: usize,
    /// Keep full states; energy-only mode otherwise.
    pub store_states: bool,
}

impl IntegrateOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        IntegrateOptions { dt, t_end, method: Method::Rk4, stride: 10, store_states: true }
    }
}

fn state_ok(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_THRESHOLD)
}

/// Fixed-step integration with divergence flagging. On blow-up the
/// trajectory is truncated at the last healthy snapshot and carries the
/// flagged time.
pub fn integrate(model: &ShellModel, kind: ModelKind, x0: &[f64], opts: &IntegrateOptions) -> Result<Trajectory> {
    if !(opts.dt > 0.0) || !(opts.t_end > opts.dt) {
        return Err(Error::invalid("need 0 < dt < t_end"));
    }
    if x0.len() != model.node_count() {
        return Err(Error::invalid("initial state dimension does not match the topology"));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("initial state must be finite"));
    }
    let stride = opts.stride.max(1);
    let n_steps = (opts.t_end / opts.dt).round().max(1.0) as usize;

    let mut x = x0.to_vec();
    let mut times = vec![0.0];
    let mut energies = vec![energy(&x)];
    let mut states = opts.store_states.then(|| vec![x.clone()]);
    let mut diverged_at = None;

    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    for step in 1..=n_steps {
        let dt = opts.dt;
        match opts.method {
            Method::Euler => {
                model.drift_into(kind, &x, &mut k1);
                for i in 0..n {
                    x[i] += dt * k1[i];
                }
            }
            Method::Rk4 => {
                model.drift_into(kind, &x, &mut k1);
                for i in 0..n {
                    tmp[i] = x[i] + 0.5 * dt * k1[i];
                }
                model.drift_into(kind, &tmp, &mut k2);
                for i in 0..n {
                    tmp[i] = x[i] + 0.5 * dt * k2[i];
                }
                model.drift_into(kind, &tmp, &mut k3);
                for i in 0..n {
                    tmp[i] = x[i] + dt * k3[i];
                }
                model.drift_into(kind, &tmp, &mut k4);
                for i in 0..n {
                    x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        let t = step as f64 * dt;
        if !state_ok(&x) {
            diverged_at = Some(t);
            break;
        }
        if step % stride == 0 || step == n_steps {
            times.push(t);
            energies.push(energy(&x));
            if let Some(states) = states.as_mut() {
                states.push(x.clone());
            }
        }
    }

    Ok(Trajectory {
        times,
        energies,
        states,
        dt: opts.dt,
        method: opts.method,
        diverged_at,
    })
}

/// One row of the energy budget: numerical dE/dt against the analytic
/// dissipation and injection terms.
#[derive(Debug, Clone, Copy)]
pub struct BudgetRow {
    pub time: f64,
    pub dedt_numeric: f64,
    pub dissipation: f64,
    pub injection: f64,
}

impl BudgetRow {
    pub fn residual(&self) -> f64 {
        self.dedt_numeric - self.dissipation - self.injection
    }
}

/// Central-difference dE/dt alongside -2 nu sum v_j x_j^2 and the forcing
/// injection 2 c_root x_root f^2, per interior snapshot.
pub fn energy_budget(model: &ShellModel, traj: &Trajectory) -> Result<Vec<BudgetRow>> {
    if traj.len() < 3 {
        return Err(Error::invalid("energy budget needs at least 3 snapshots"));
    }
    if traj.states.is_none() {
        return Err(Error::invalid("energy budget needs stored states"));
    }
    let nu = model.scheme.nu;
    let f = model.scheme.forcing;
    let c0 = model.coeffs.c[0];
    let mut rows = Vec::with_capacity(traj.len() - 2);
    for i in 1..traj.len() - 1 {
        let x = traj.state_at(i)?;
        let dedt = (traj.energies[i + 1] - traj.energies[i - 1]) / (traj.times[i + 1] - traj.times[i - 1]);
        let dissipation = -2.0
            * nu
            * x.iter()
                .zip(&model.coeffs.visc)
                .map(|(xi, vi)| vi * xi * xi)
                .sum::<f64>();
        let injection = 2.0 * c0 * x[0] * f * f;
        rows.push(BudgetRow { time: traj.times[i], dedt_numeric: dedt, dissipation, injection });
    }
    Ok(rows)
}
