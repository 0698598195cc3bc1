//! Experiment presets: build the model from the configuration, run, write
//! CSVs and the run manifest.
//!
//! Every run writes `manifest.txt` (canonical config echo + version + seed
//! + summary values) so any output file can be regenerated from the
//! manifest alone. The manifest never records the thread count: outputs
//! are byte-identical across schedulers by construction.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dyadic_core::girsanov::{
    mean_final_energy, reweighted_final_energy, second_moment_estimates, weight_stats,
};
use dyadic_core::io;
use dyadic_core::moments::{moment_generator, moment_source, solve_moments, MomentMethod};
use dyadic_core::philox::uniform_in;
use dyadic_core::sde::{
    dt_stability_bound, energy_control_check, euler_maruyama, simulate_linear, stratonovich_heun,
    SdeOptions,
};
use dyadic_core::solutions::{
    constant_solution, self_similar_profile, self_similar_profile_decaying, verify_ansatz,
};
use dyadic_core::spectral::FourierField;
use dyadic_core::corrector::{nu_sigma, remainder_fit, shell_sigma};
use dyadic_core::{
    energy, integrate, CoefficientScheme, Error as CoreError, IntegrateOptions, ModelKind,
    ShellModel, Topology,
};

use crate::config::{ExperimentConfig, ExperimentKind, ModelChoice};

/// Node budget for the runner; larger requests are rejected at validation.
pub const NODE_BUDGET: u128 = 1 << 24;

/// Seed stream tags for derived data (initial conditions, test fields).
const TAG_X0: u32 = 201;
const TAG_ATTRACTOR: u32 = 202;

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Divergence(String),
    OracleMismatch(String),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Divergence(m) => write!(f, "numerical divergence: {m}"),
            RunError::OracleMismatch(m) => write!(f, "oracle mismatch: {m}"),
            RunError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io(_) => 1,
            RunError::Config(_) => 2,
            RunError::Divergence(_) => 3,
            RunError::OracleMismatch(_) => 4,
        }
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Diverged { .. } | CoreError::NonConvergence { .. } => {
                RunError::Divergence(e.to_string())
            }
            CoreError::Io(io) => RunError::Io(io),
            other => RunError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

type Result<T> = std::result::Result<T, RunError>;

/// Outcome of a run: the files written and the manifest summary pairs.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<(String, String)>,
}

fn default_deltas(arity: usize) -> Vec<f64> {
    // log-spaced sibling factors in [1/2, 2]; |log d| <= log 2
    if arity == 1 {
        return vec![1.0];
    }
    (0..arity)
        .map(|w| (-1.0 + 2.0 * w as f64 / (arity - 1) as f64).exp2())
        .collect()
}

/// Build topology + scheme from the configuration.
pub fn build_model(cfg: &ExperimentConfig) -> Result<ShellModel> {
    let required = match cfg.model {
        ModelChoice::Dn => cfg.depth as u128 + 1,
        _ => Topology::required_nodes(cfg.d, cfg.depth),
    };
    if required > NODE_BUDGET {
        return Err(RunError::Config(format!(
            "topology needs {required} nodes, over the runner budget {NODE_BUDGET}"
        )));
    }
    let topology = match cfg.model {
        ModelChoice::Dn => Topology::chain(cfg.depth)?,
        _ => Topology::tree(cfg.d, cfg.depth)?,
    };
    let scheme = match cfg.model {
        ModelChoice::Rcm => {
            let deltas = cfg
                .deltas
                .clone()
                .unwrap_or_else(|| default_deltas(topology.arity()));
            CoefficientScheme::rcm(&topology, cfg.alpha, cfg.gamma, cfg.nu, cfg.forcing, &deltas)?
        }
        _ => CoefficientScheme::uniform(&topology, cfg.alpha, cfg.gamma, cfg.nu, cfg.forcing)?,
    }
    .with_log_bound(cfg.log_bound)?;
    Ok(ShellModel::new(topology, scheme))
}

fn model_kind(cfg: &ExperimentConfig) -> ModelKind {
    match cfg.model {
        ModelChoice::Dn => ModelKind::Dn,
        _ => ModelKind::Kp,
    }
}

/// Deterministic initial state for a preset: uniform draws keyed by the
/// run seed, amplitude scaled down each generation.
fn preset_x0(model: &ShellModel, seed: u64, amplitude: f64) -> Vec<f64> {
    model
        .topology
        .nodes()
        .map(|j| {
            let g = model.topology.generation(j) as f64;
            amplitude / (1.0 + g) * uniform_in(seed, TAG_X0, j as u64, 0.5, 1.0)
        })
        .collect()
}

fn write_file(dir: &Path, name: &str, contents: &str, outcome: &mut RunOutcome) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    outcome.files.push(path);
    Ok(())
}

fn push_summary(outcome: &mut RunOutcome, key: &str, value: String) {
    outcome.summary.push((key.to_string(), value));
}

/// Run the configured experiment, writing outputs under `cfg.out_dir`.
pub fn run(cfg: &ExperimentConfig, threads: usize) -> Result<RunOutcome> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut outcome = match cfg.kind {
        ExperimentKind::DetDecay => run_det_decay(cfg)?,
        ExperimentKind::ConstantAttractor => run_constant_attractor(cfg)?,
        ExperimentKind::SelfSimilar => run_self_similar(cfg)?,
        ExperimentKind::StochEnergy => run_stoch_energy(cfg, threads)?,
        ExperimentKind::GirsanovCheck => run_girsanov_check(cfg, threads)?,
        ExperimentKind::MomentOracle => run_moment_oracle(cfg, threads)?,
        ExperimentKind::CorrectorSweep => run_corrector_sweep(cfg)?,
    };
    write_manifest(cfg, &mut outcome)?;
    Ok(outcome)
}

fn write_manifest(cfg: &ExperimentConfig, outcome: &mut RunOutcome) -> Result<()> {
    let mut m = String::new();
    let _ = writeln!(m, "# run manifest: regenerate with `dyadic run` on the echo below");
    let _ = writeln!(m, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "seed = {}", cfg.seed);
    let names: Vec<String> = outcome
        .files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let _ = writeln!(m, "outputs = {}", names.join(","));
    for (k, v) in &outcome.summary {
        let _ = writeln!(m, "summary.{k} = {v}");
    }
    let _ = writeln!(m, "# resolved configuration");
    m.push_str(&cfg.canonical_echo());
    let path = cfg.out_dir.join("manifest.txt");
    std::fs::write(&path, m)?;
    outcome.files.push(path);
    Ok(())
}

fn run_det_decay(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let model = build_model(cfg)?;
    let x0 = preset_x0(&model, cfg.seed, 0.1);
    let opts = IntegrateOptions {
        dt: cfg.dt,
        t_end: cfg.t_end,
        method: dyadic_core::Method::Rk4,
        stride: cfg.stride,
        store_states: cfg.store_states,
    };
    let traj = integrate(&model, model_kind(cfg), &x0, &opts)?;
    let mut outcome = RunOutcome::default();
    write_file(&cfg.out_dir, "trajectory.csv", &io::trajectory_csv(&traj), &mut outcome)?;
    write_file(&cfg.out_dir, "energy.csv", &io::energy_csv(&traj), &mut outcome)?;
    if cfg.store_states && traj.len() >= 3 {
        let budget = dyadic_core::energy_budget(&model, &traj)?;
        let mut csv = String::from("time,dedt_numeric,dissipation,injection,residual\n");
        for row in &budget {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                io::fmt_f64(row.time),
                io::fmt_f64(row.dedt_numeric),
                io::fmt_f64(row.dissipation),
                io::fmt_f64(row.injection),
                io::fmt_f64(row.residual())
            );
        }
        write_file(&cfg.out_dir, "budget.csv", &csv, &mut outcome)?;
    }
    let e0 = traj.energies[0];
    let ef = *traj.energies.last().unwrap();
    push_summary(&mut outcome, "energy_initial", io::fmt_f64(e0));
    push_summary(&mut outcome, "energy_final", io::fmt_f64(ef));
    push_summary(
        &mut outcome,
        "energy_rel_drift",
        io::fmt_f64(if e0 != 0.0 { (ef - e0).abs() / e0 } else { 0.0 }),
    );
    if let Some(t) = traj.diverged_at {
        push_summary(&mut outcome, "diverged_at", io::fmt_f64(t));
        write_manifest(cfg, &mut outcome)?;
        return Err(RunError::Divergence(format!("trajectory flagged at t = {t}")));
    }
    Ok(outcome)
}

fn run_constant_attractor(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let model = build_model(cfg)?;
    let xstar = constant_solution(&model)?;
    let mut outcome = RunOutcome::default();
    write_file(&cfg.out_dir, "fixed_point.csv", &io::state_csv(&xstar), &mut outcome)?;

    let residual = model
        .drift_dn(&xstar)
        .iter()
        .take(xstar.len().saturating_sub(2))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    push_summary(&mut outcome, "fixed_point_interior_residual", io::fmt_f64(residual));

    let n = model.node_count();
    let interior = n.saturating_sub(2);
    let mut rows = String::from("trial,final_interior_sup_distance,diverged_at\n");
    let mut worst: f64 = 0.0;
    let mut any_diverged = false;
    for trial in 0..cfg.n_initial {
        let x0: Vec<f64> = (0..n)
            .map(|j| uniform_in(cfg.seed ^ trial as u64, TAG_ATTRACTOR, j as u64, 0.0, 1.0))
            .collect();
        let mut opts = IntegrateOptions::new(cfg.dt, cfg.t_end);
        opts.stride = cfg.stride.max(1);
        opts.store_states = true;
        let traj = integrate(&model, ModelKind::Dn, &x0, &opts)?;
        match traj.diverged_at {
            Some(t) => {
                any_diverged = true;
                let _ = writeln!(rows, "{trial},nan,{}", io::fmt_f64(t));
            }
            None => {
                let xf = traj.final_state().unwrap();
                let dist = xf
                    .iter()
                    .zip(&xstar)
                    .take(interior)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                worst = worst.max(dist);
                let _ = writeln!(rows, "{trial},{},", io::fmt_f64(dist));
            }
        }
    }
    write_file(&cfg.out_dir, "trials.csv", &rows, &mut outcome)?;
    push_summary(&mut outcome, "worst_interior_sup_distance", io::fmt_f64(worst));
    push_summary(&mut outcome, "any_trial_diverged", any_diverged.to_string());
    Ok(outcome)
}

fn run_self_similar(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    // profiles live on the inviscid unforced chain
    let topology = Topology::chain(cfg.depth)?;
    let scheme = CoefficientScheme::uniform(&topology, cfg.alpha, cfg.gamma, 0.0, 0.0)?;
    let model = ShellModel::new(topology, scheme);
    let profile = if cfg.decaying {
        self_similar_profile_decaying(&model, cfg.t0)?
    } else {
        self_similar_profile(&model, cfg.a0, cfg.a1, cfg.t0)?
    };
    let mut outcome = RunOutcome::default();
    write_file(&cfg.out_dir, "profile.csv", &io::state_csv(&profile.a), &mut outcome)?;

    let offsets = [1.0, 2.0, 5.0];
    let mut csv = String::from("t_minus_t0,interior_residual,leaf_residual\n");
    let mut worst_interior: f64 = 0.0;
    for &off in &offsets {
        let t = profile.t0 + off;
        let check = verify_ansatz(&model, &profile, &[t])?;
        worst_interior = worst_interior.max(check.interior_max);
        let _ = writeln!(
            csv,
            "{},{},{}",
            io::fmt_f64(off),
            io::fmt_f64(check.interior_max),
            io::fmt_f64(check.leaf)
        );
    }
    write_file(&cfg.out_dir, "residuals.csv", &csv, &mut outcome)?;
    push_summary(&mut outcome, "interior_residual_max", io::fmt_f64(worst_interior));

    // time-reversed integration toward the blow-up time
    let y0 = profile.reversed_state_at(0.0);
    let mut opts = IntegrateOptions::new(cfg.dt, cfg.t_end);
    opts.stride = cfg.stride.max(1);
    opts.store_states = false;
    let traj = integrate(&model, ModelKind::Dn, &y0, &opts)?;
    write_file(&cfg.out_dir, "reversed_energy.csv", &io::energy_csv(&traj), &mut outcome)?;
    push_summary(&mut outcome, "blow_up_time_ansatz", io::fmt_f64(profile.blow_up_time()));
    push_summary(
        &mut outcome,
        "reversed_flagged_t",
        traj.diverged_at.map(io::fmt_f64).unwrap_or_else(|| "none".into()),
    );
    Ok(outcome)
}

fn run_stoch_energy(cfg: &ExperimentConfig, threads: usize) -> Result<RunOutcome> {
    let model = build_model(cfg)?;
    require_inviscid(cfg)?;
    let x0 = preset_x0(&model, cfg.seed, 0.3);
    let mut opts = SdeOptions::new(cfg.dt, cfg.t_end, cfg.seed, cfg.n_paths);
    opts.stride = cfg.stride;
    opts.threads = threads;
    opts.store_states = cfg.record_nodes;
    let ens = stratonovich_heun(&model, &x0, &opts)?;
    let mut outcome = RunOutcome::default();
    write_file(&cfg.out_dir, "ensemble.csv", &io::ensemble_csv(&ens, cfg.record_nodes), &mut outcome)?;

    let e0 = energy(&x0);
    let (fraction, excess) = energy_control_check(&ens, &x0);
    let mut drifts: Vec<f64> = ens
        .paths
        .iter()
        .map(|p| (p.energies.last().unwrap() - e0).abs() / e0)
        .collect();
    drifts.sort_by(f64::total_cmp);
    let median = drifts[drifts.len() / 2];
    push_summary(&mut outcome, "median_energy_drift", io::fmt_f64(median));
    push_summary(&mut outcome, "control_fraction", io::fmt_f64(fraction));
    push_summary(&mut outcome, "control_max_excess", io::fmt_f64(excess));
    push_summary(&mut outcome, "control_tolerance", io::fmt_f64(10.0 * cfg.dt * e0));
    push_summary(&mut outcome, "diverged_paths", ens.diverged_count().to_string());
    Ok(outcome)
}

fn require_inviscid(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.nu != 0.0 {
        return Err(RunError::Config(
            "stochastic experiments run the inviscid model; set scheme.nu = 0".into(),
        ));
    }
    Ok(())
}

fn run_girsanov_check(cfg: &ExperimentConfig, threads: usize) -> Result<RunOutcome> {
    let topology = Topology::chain(cfg.depth)?;
    let scheme = CoefficientScheme::uniform(&topology, cfg.alpha, cfg.gamma, 0.0, cfg.forcing)?;
    let model = ShellModel::new(topology, scheme);
    let x0 = preset_x0(&model, cfg.seed, 0.4);

    let mut opts = SdeOptions::new(cfg.dt, cfg.t_end, cfg.seed, cfg.n_paths);
    opts.stride = usize::MAX / 2;
    opts.threads = threads;
    let nonlinear = euler_maruyama(&model, &x0, &opts)?;
    let mut lin_opts = opts.clone();
    lin_opts.seed = cfg.seed.wrapping_add(1);
    let linear = simulate_linear(&model, &x0, &lin_opts)?;

    let (e_nl, se_nl) = mean_final_energy(&nonlinear);
    let (e_rw, se_rw) = reweighted_final_energy(&linear);
    let combined = (se_nl * se_nl + se_rw * se_rw).sqrt();
    let stats = weight_stats(&linear);

    let mut outcome = RunOutcome::default();
    let mut csv = String::from("quantity,value\n");
    for (k, v) in [
        ("nonlinear_mean_energy", e_nl),
        ("nonlinear_se", se_nl),
        ("linear_reweighted_mean_energy", e_rw),
        ("linear_reweighted_se", se_rw),
        ("difference", e_nl - e_rw),
        ("combined_3se", 3.0 * combined),
        ("weight_mean", stats.mean),
        ("weight_se", stats.se),
        ("effective_sample_size", stats.ess),
    ] {
        let _ = writeln!(csv, "{k},{}", io::fmt_f64(v));
    }
    write_file(&cfg.out_dir, "report.csv", &csv, &mut outcome)?;
    push_summary(&mut outcome, "difference", io::fmt_f64(e_nl - e_rw));
    push_summary(&mut outcome, "combined_3se", io::fmt_f64(3.0 * combined));
    push_summary(&mut outcome, "weight_mean", io::fmt_f64(stats.mean));
    push_summary(&mut outcome, "ess", io::fmt_f64(stats.ess));

    if (e_nl - e_rw).abs() > 3.0 * combined {
        write_manifest(cfg, &mut outcome)?;
        return Err(RunError::OracleMismatch(format!(
            "reweighted estimate off by {} > 3se {}",
            (e_nl - e_rw).abs(),
            3.0 * combined
        )));
    }
    if (stats.mean - 1.0).abs() > 3.0 * stats.se {
        write_manifest(cfg, &mut outcome)?;
        return Err(RunError::OracleMismatch(format!(
            "weight mean {} not within 3se of 1",
            stats.mean
        )));
    }
    Ok(outcome)
}

fn run_moment_oracle(cfg: &ExperimentConfig, threads: usize) -> Result<RunOutcome> {
    let model = build_model(cfg)?;
    require_inviscid(cfg)?;
    let n = model.node_count();
    let x0 = vec![0.3; n];
    let mut opts = SdeOptions::new(cfg.dt, cfg.t_end, cfg.seed, cfg.n_paths);
    opts.stride = usize::MAX / 2;
    opts.threads = threads;
    let ens = simulate_linear(&model, &x0, &opts)?;
    let estimates = second_moment_estimates(&ens);

    let gen = moment_generator(&model);
    let m0: Vec<f64> = x0.iter().map(|x| x * x).collect();
    let source = moment_source(&model);
    let ode_rk4 = solve_moments(&gen, &m0, &source, cfg.t_end, MomentMethod::Rk4)?;
    let ode_exp = solve_moments(&gen, &m0, &source, cfg.t_end, MomentMethod::MatrixExp)?;

    let mut outcome = RunOutcome::default();
    let mut csv = String::from("node,mc_mean,mc_se,ode,z\n");
    let mut worst_z: f64 = 0.0;
    for j in 0..n {
        let (mc, se) = estimates[j];
        let z = if se > 0.0 { (mc - ode_rk4[j]) / se } else { 0.0 };
        worst_z = worst_z.max(z.abs());
        let _ = writeln!(
            csv,
            "{j},{},{},{},{}",
            io::fmt_f64(mc),
            io::fmt_f64(se),
            io::fmt_f64(ode_rk4[j]),
            io::fmt_f64(z)
        );
    }
    write_file(&cfg.out_dir, "moments.csv", &csv, &mut outcome)?;
    write_file(
        &cfg.out_dir,
        "generator.csv",
        &io::triplets_csv(&gen.triplets()),
        &mut outcome,
    )?;

    let integrator_gap = ode_rk4
        .iter()
        .zip(&ode_exp)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    push_summary(&mut outcome, "worst_z", io::fmt_f64(worst_z));
    push_summary(&mut outcome, "integrator_gap", io::fmt_f64(integrator_gap));
    if cfg.forcing == 0.0 {
        let total0: f64 = m0.iter().sum();
        let total: f64 = ode_rk4.iter().sum();
        push_summary(
            &mut outcome,
            "total_moment_rel_drift",
            io::fmt_f64(((total - total0) / total0).abs()),
        );
    }
    if worst_z > 3.0 {
        write_manifest(cfg, &mut outcome)?;
        return Err(RunError::OracleMismatch(format!(
            "second-moment estimate {worst_z:.2} standard errors from the ODE"
        )));
    }
    Ok(outcome)
}

fn run_corrector_sweep(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    if cfg.shells.is_empty() {
        return Err(RunError::Config("corrector.shells must not be empty".into()));
    }
    let fields: Vec<FourierField> = (0..cfg.n_fields)
        .map(|i| FourierField::random_divergence_free(cfg.seed.wrapping_add(i as u64), 0, cfg.field_m_max))
        .collect();
    let mut rows = Vec::new();
    for &n in &cfg.shells {
        let sigma = shell_sigma(n, cfg.nu_target)?;
        let nu = nu_sigma(&sigma)?;
        let (c_hat, residual) = remainder_fit(&sigma, &fields)?;
        rows.push((n, nu, c_hat, residual));
    }
    let mut outcome = RunOutcome::default();
    write_file(&cfg.out_dir, "sweep.csv", &io::sweep_csv(&rows), &mut outcome)?;
    write_file(&cfg.out_dir, "test_field_0.csv", &io::field_csv(&fields[0]), &mut outcome)?;
    let last = rows.last().unwrap();
    push_summary(&mut outcome, "c_hat_final", io::fmt_f64(last.2));
    push_summary(&mut outcome, "c_hat_final_residual", io::fmt_f64(last.3));
    push_summary(
        &mut outcome,
        "c_hat_distance_to_minus_0.4",
        io::fmt_f64((last.2 + 0.4).abs()),
    );
    Ok(outcome)
}

/// Dry-run validation: derived quantities and warnings, no outputs.
pub fn validate(cfg: &ExperimentConfig) -> String {
    let mut report = String::new();
    let _ = writeln!(report, "experiment = {}", cfg.kind.name());
    if cfg.kind == ExperimentKind::CorrectorSweep {
        let _ = writeln!(report, "shells = {:?}", cfg.shells);
        for &n in &cfg.shells {
            let count = dyadic_core::corrector::shell_wavevectors(n).len();
            let _ = writeln!(report, "shell_{n}.wavevectors = {count}");
        }
        let _ = writeln!(report, "verdict = ok");
        return report;
    }
    let required = match cfg.model {
        ModelChoice::Dn => cfg.depth as u128 + 1,
        _ => Topology::required_nodes(cfg.d, cfg.depth),
    };
    let _ = writeln!(report, "topology.nodes_required = {required}");
    let _ = writeln!(report, "budget.max_nodes = {NODE_BUDGET}");
    if required > NODE_BUDGET {
        let _ = writeln!(report, "verdict = rejected (node count over budget)");
        return report;
    }
    match build_model(cfg) {
        Err(e) => {
            let _ = writeln!(report, "verdict = rejected ({e})");
        }
        Ok(model) => {
            let c_max = model.max_coupling();
            let _ = writeln!(report, "coeff.c_max = {}", io::fmt_f64(c_max));
            let stochastic = matches!(
                cfg.kind,
                ExperimentKind::StochEnergy | ExperimentKind::GirsanovCheck | ExperimentKind::MomentOracle
            );
            if stochastic {
                let bound = dt_stability_bound(&model);
                let _ = writeln!(report, "stability.dt_bound = {}", io::fmt_f64(bound));
                if cfg.dt > bound {
                    let _ = writeln!(
                        report,
                        "warning = dt {} exceeds the stability bound {}",
                        io::fmt_f64(cfg.dt),
                        io::fmt_f64(bound)
                    );
                }
            }
            let _ = writeln!(report, "verdict = ok");
        }
    }
    report
}
