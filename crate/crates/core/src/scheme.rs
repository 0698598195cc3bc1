//! Coefficient schemes: per-node factors and derived coupling tables.
//!
//! Every node `j` carries a coupling coefficient `c_j = d_j * 2^(alpha*|j|)`
//! and a viscous coefficient `ct_j = dt_j * 2^(gamma*|j|)`. The repeated
//! coefficients variant reuses one fixed set of sibling factors at every
//! node. The viscous *multiplier* applied by the dynamics is `ct_j` on trees
//! and `ct_j^2` on chains, matching the two conventions in circulation; the
//! chain squaring is what the CLI documents as the unsquared-gamma input.

use crate::error::{Error, Result};
use crate::topology::{NodeId, Topology};

/// Default bound on |log d_j|; a configuration value, not a modelling claim.
pub const DEFAULT_LOG_BOUND: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct CoefficientScheme {
    pub alpha: f64,
    pub gamma: f64,
    pub nu: f64,
    /// Intensity of the phantom parent of the root.
    pub forcing: f64,
    pub log_bound: f64,
    d: Vec<f64>,
    d_tilde: Vec<f64>,
}

impl CoefficientScheme {
    /// Uniform factors d_j = dt_j = 1 (plain KP / DN).
    pub fn uniform(topology: &Topology, alpha: f64, gamma: f64, nu: f64, forcing: f64) -> Result<Self> {
        let n = topology.node_count();
        Self::from_factors(alpha, gamma, nu, forcing, vec![1.0; n], vec![1.0; n])
    }

    /// Repeated-coefficients scheme: sibling factors `deltas` reused at
    /// every node, d_tilde uniform.
    pub fn rcm(
        topology: &Topology,
        alpha: f64,
        gamma: f64,
        nu: f64,
        forcing: f64,
        deltas: &[f64],
    ) -> Result<Self> {
        let d = rcm_assign(topology, deltas)?;
        let n = topology.node_count();
        Self::from_factors(alpha, gamma, nu, forcing, d, vec![1.0; n])
    }

    pub fn from_factors(
        alpha: f64,
        gamma: f64,
        nu: f64,
        forcing: f64,
        d: Vec<f64>,
        d_tilde: Vec<f64>,
    ) -> Result<Self> {
        let scheme = CoefficientScheme {
            alpha,
            gamma,
            nu,
            forcing,
            log_bound: DEFAULT_LOG_BOUND,
            d,
            d_tilde,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn with_log_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::invalid("log bound must be positive"));
        }
        self.log_bound = bound;
        self.validate()?;
        Ok(self)
    }

    pub fn with_nu(mut self, nu: f64) -> Result<Self> {
        self.nu = nu;
        self.validate()?;
        Ok(self)
    }

    pub fn d_factor(&self, node: NodeId) -> f64 {
        self.d[node]
    }

    pub fn d_tilde_factor(&self, node: NodeId) -> f64 {
        self.d_tilde[node]
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha must be positive"));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::invalid("gamma must be positive"));
        }
        if !(self.nu >= 0.0) {
            return Err(Error::invalid("viscosity nu must be nonnegative"));
        }
        if !self.forcing.is_finite() {
            return Err(Error::invalid("forcing must be finite"));
        }
        if self.d.len() != self.d_tilde.len() || self.d.is_empty() {
            return Err(Error::invalid("factor tables must cover every node"));
        }
        if self.d[0] != 1.0 {
            return Err(Error::invalid("the root factor d must equal 1"));
        }
        for (j, (&dj, &dtj)) in self.d.iter().zip(&self.d_tilde).enumerate() {
            if !(dj > 0.0) || !(dtj > 0.0) {
                return Err(Error::invalid(format!("factor at node {j} must be positive")));
            }
            if dj.ln().abs() > self.log_bound || dtj.ln().abs() > self.log_bound {
                return Err(Error::invalid(format!(
                    "|log d| at node {j} exceeds the bound {}",
                    self.log_bound
                )));
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        format!(
            "scheme.alpha = {}\nscheme.gamma = {}\nscheme.nu = {}\nscheme.f = {}\nscheme.log_bound = {}\n",
            crate::io::fmt_f64(self.alpha),
            crate::io::fmt_f64(self.gamma),
            crate::io::fmt_f64(self.nu),
            crate::io::fmt_f64(self.forcing),
            crate::io::fmt_f64(self.log_bound),
        )
    }
}

/// Sibling factor assignment for the repeated-coefficients scheme: the child
/// at ordinal position `w` inside every sibling set receives `deltas[w]`;
/// the root keeps factor 1.
pub fn rcm_assign(topology: &Topology, deltas: &[f64]) -> Result<Vec<f64>> {
    if deltas.len() != topology.arity() {
        return Err(Error::invalid(format!(
            "got {} sibling factors for arity {}",
            deltas.len(),
            topology.arity()
        )));
    }
    for (w, &delta) in deltas.iter().enumerate() {
        if !(delta > 0.0) {
            return Err(Error::invalid(format!("sibling factor {w} must be positive")));
        }
    }
    let mut d = vec![1.0; topology.node_count()];
    for node in topology.nodes() {
        for (w, child) in topology.children(node).enumerate() {
            d[child] = deltas[w];
        }
    }
    Ok(d)
}

/// Derived per-node tables: coupling `c`, viscous coefficient `c_tilde`, and
/// the viscous multiplier `visc` actually used by the dynamics.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub c: Vec<f64>,
    pub c_tilde: Vec<f64>,
    pub visc: Vec<f64>,
}

pub fn coefficient_table(topology: &Topology, scheme: &CoefficientScheme) -> CoefficientTable {
    let n = topology.node_count();
    let mut c = vec![0.0; n];
    let mut c_tilde = vec![0.0; n];
    let mut visc = vec![0.0; n];
    for node in topology.nodes() {
        let g = topology.generation(node) as f64;
        c[node] = scheme.d_factor(node) * (scheme.alpha * g).exp2();
        c_tilde[node] = scheme.d_tilde_factor(node) * (scheme.gamma * g).exp2();
        visc[node] = if topology.is_chain() {
            c_tilde[node] * c_tilde[node]
        } else {
            c_tilde[node]
        };
    }
    CoefficientTable { c, c_tilde, visc }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dn_coupling_at_alpha_five_halves() {
        // c_2 = 2^(5/2 * 2) = 32 for the chain with d = 1.
        let topo = Topology::chain(4).unwrap();
        let scheme = CoefficientScheme::uniform(&topo, 2.5, 1.0, 0.0, 0.0).unwrap();
        let table = coefficient_table(&topo, &scheme);
        assert_eq!(table.c[2], 32.0);
        assert_eq!(table.c[0], 1.0); // root: exponent 0, d = 1
    }

    #[test]
    fn rcm_sibling_values_alpha_one() {
        // Binary tree, deltas (1/2, 2): generation-1 c values are
        // {0.5 * 2, 2 * 2} = {1, 4}.
        let topo = Topology::tree(1, 2).unwrap();
        let scheme = CoefficientScheme::rcm(&topo, 1.0, 1.0, 0.0, 0.0, &[0.5, 2.0]).unwrap();
        let table = coefficient_table(&topo, &scheme);
        let mut gen1: Vec<f64> = topo.generation_nodes(1).map(|j| table.c[j]).collect();
        gen1.sort_by(f64::total_cmp);
        assert_eq!(gen1, vec![1.0, 4.0]);
        // |log d_j| <= log 2 for every node.
        for j in topo.nodes() {
            assert!(scheme.d_factor(j).ln().abs() <= 2.0f64.ln() + 1e-15);
        }
    }

    #[test]
    fn rcm_uniform_deltas_reduce_to_plain_kp() {
        let topo = Topology::tree(2, 2).unwrap();
        let deltas = vec![1.0; 4];
        let scheme = CoefficientScheme::rcm(&topo, 1.0, 1.0, 0.0, 0.0, &deltas).unwrap();
        for j in topo.nodes() {
            assert_eq!(scheme.d_factor(j), 1.0);
        }
    }

    #[test]
    fn rcm_rejects_bad_deltas() {
        let topo = Topology::tree(1, 2).unwrap();
        assert!(rcm_assign(&topo, &[1.0]).is_err());
        assert!(rcm_assign(&topo, &[1.0, -2.0]).is_err());
    }

    #[test]
    fn chain_viscous_multiplier_is_squared() {
        let topo = Topology::chain(3).unwrap();
        let scheme = CoefficientScheme::uniform(&topo, 1.0, 1.0, 0.1, 0.0).unwrap();
        let table = coefficient_table(&topo, &scheme);
        // l_j = 2^j, multiplier l_j^2 = 4^j on chains.
        assert_eq!(table.visc[2], 16.0);

        let tree = Topology::tree(1, 3).unwrap();
        let scheme = CoefficientScheme::uniform(&tree, 1.0, 1.0, 0.1, 0.0).unwrap();
        let table = coefficient_table(&tree, &scheme);
        // trees use c_tilde itself.
        for j in tree.nodes() {
            assert_eq!(table.visc[j], table.c_tilde[j]);
        }
    }

    #[test]
    fn kv_serialisation_round_trips_floats() {
        let topo = Topology::chain(2).unwrap();
        let scheme = CoefficientScheme::uniform(&topo, 1.5, 1.0, 0.25, 2.0).unwrap();
        let kv = scheme.to_kv();
        assert!(kv.contains("scheme.alpha = 1.5"));
        assert!(kv.contains("scheme.f = 2.0"));
    }

    #[test]
    fn log_bound_is_enforced() {
        let topo = Topology::tree(1, 1).unwrap();
        // |ln 1e3| ~ 6.9: fine under the default bound 10, rejected at 2.
        let scheme = CoefficientScheme::rcm(&topo, 1.0, 1.0, 0.0, 0.0, &[1e-3, 1e3]).unwrap();
        assert!(scheme.with_log_bound(2.0).is_err());
        // far outside the default bound: rejected at construction
        assert!(CoefficientScheme::rcm(&topo, 1.0, 1.0, 0.0, 0.0, &[1e-6, 1e6]).is_err());
    }
}
