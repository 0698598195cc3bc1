//! CSV and manifest serialisation.
//!
//! All floats are written with 17 significant digits so files round-trip
//! exactly; formatting is locale-independent by construction.

use crate::state::Trajectory;

/// 17 significant digits, scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Trajectory CSV: `time,node_<id>,...` with states, `time,energy` without.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::new();
    match &traj.states {
        Some(states) => {
            let n = states[0].len();
            out.push_str("time");
            for j in 0..n {
                out.push_str(&format!(",node_{j}"));
            }
            out.push('\n');
            for (i, t) in traj.times.iter().enumerate() {
                out.push_str(&fmt_f64(*t));
                for v in &states[i] {
                    out.push(',');
                    out.push_str(&fmt_f64(*v));
                }
                out.push('\n');
            }
        }
        None => {
            out.push_str("time,energy\n");
            for (t, e) in traj.times.iter().zip(&traj.energies) {
                out.push_str(&fmt_f64(*t));
                out.push(',');
                out.push_str(&fmt_f64(*e));
                out.push('\n');
            }
        }
    }
    out
}

/// `time,energy` view regardless of stored states.
pub fn energy_csv(traj: &Trajectory) -> String {
    let mut out = String::from("time,energy\n");
    for (t, e) in traj.times.iter().zip(&traj.energies) {
        out.push_str(&fmt_f64(*t));
        out.push(',');
        out.push_str(&fmt_f64(*e));
        out.push('\n');
    }
    out
}

/// Single state vector as `node,value` rows.
pub fn state_csv(x: &[f64]) -> String {
    let mut out = String::from("node,value\n");
    for (j, v) in x.iter().enumerate() {
        out.push_str(&format!("{j},{}\n", fmt_f64(*v)));
    }
    out
}

/// Sparse matrix triplets as `row,col,value` rows.
pub fn triplets_csv(triplets: &[(usize, usize, f64)]) -> String {
    let mut out = String::from("row,col,value\n");
    for (r, c, v) in triplets {
        out.push_str(&format!("{r},{c},{}\n", fmt_f64(*v)));
    }
    out
}

/// Ensemble summary: `path,seed,time,energy[,node_<id>,...]` rows per
/// snapshot. Node columns need the ensemble to have stored states.
pub fn ensemble_csv(ensemble: &crate::sde::PathEnsemble, include_nodes: bool) -> String {
    let mut out = String::from("path,seed,time,energy");
    if include_nodes {
        let n = ensemble.paths[0].final_state.len();
        for j in 0..n {
            out.push_str(&format!(",node_{j}"));
        }
    }
    out.push('\n');
    for path in &ensemble.paths {
        for (i, e) in path.energies.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}",
                path.path_index,
                ensemble.seed,
                fmt_f64(ensemble.snapshot_times[i]),
                fmt_f64(*e)
            ));
            if include_nodes {
                let states = path
                    .states
                    .as_ref()
                    .expect("node columns need stored states");
                for v in &states[i] {
                    out.push(',');
                    out.push_str(&fmt_f64(*v));
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Fourier field rows `mx,my,mz,re1,im1,re2,im2,re3,im3`, sorted by
/// wavevector.
pub fn field_csv(field: &crate::spectral::FourierField) -> String {
    let mut out = String::from("mx,my,mz,re1,im1,re2,im2,re3,im3\n");
    for (m, v) in field.iter() {
        out.push_str(&format!("{},{},{}", m[0], m[1], m[2]));
        for c in v {
            out.push(',');
            out.push_str(&fmt_f64(c.re));
            out.push(',');
            out.push_str(&fmt_f64(c.im));
        }
        out.push('\n');
    }
    out
}

/// Corrector sweep rows `N,nu_sigma,c_hat,residual`.
pub fn sweep_csv(rows: &[(u32, f64, f64, f64)]) -> String {
    let mut out = String::from("N,nu_sigma,c_hat,residual\n");
    for (n, nu, c_hat, residual) in rows {
        out.push_str(&format!(
            "{n},{},{},{}\n",
            fmt_f64(*nu),
            fmt_f64(*c_hat),
            fmt_f64(*residual)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::Method;

    #[test]
    fn float_formatting_round_trips() {
        for &x in &[0.0, 1.0, -1.5, 0.1, 1e-300, 123456.789012345678, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn energy_only_trajectory_header() {
        let traj = Trajectory {
            times: vec![0.0, 0.1],
            energies: vec![1.0, 0.9],
            states: None,
            dt: 0.1,
            method: Method::Rk4,
            diverged_at: None,
        };
        let csv = trajectory_csv(&traj);
        assert!(csv.starts_with("time,energy\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
