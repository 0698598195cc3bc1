//! Closed second-moment system of the Girsanov-linearised dynamics.
//!
//! Writing m_j(t) for the second moment of X_j under the transformed
//! measure, the moments satisfy m' = A m + s with
//!
//! ```text
//! A[j][j]      = -(c_j^2 [j != root] + sum_{k child} c_k^2)
//! A[j][par(j)] = c_j^2
//! A[j][k]      = c_k^2          (k child of j)
//! s[root]      = c_root^2 f^2
//! ```
//!
//! A is a negated weighted tree Laplacian: symmetric, Metzler, zero column
//! sums. The root diagonal carries no own term because the phantom parent
//! is frozen; with it the column sums (and total-moment conservation) would
//! fail, and the Monte-Carlo cross-checks would drift from the simulated
//! linear system.

use crate::dynamics::ShellModel;
use crate::error::{Error, Result};
use crate::expm::{expm, Mat};

#[derive(Debug, Clone)]
pub struct MomentGenerator {
    pub n: usize,
    /// Squared couplings c_j^2 (edge weight between j and its parent).
    cj2: Vec<f64>,
    diag: Vec<f64>,
    parents: Vec<Option<usize>>,
    children: Vec<std::ops::Range<usize>>,
}

pub fn moment_generator(model: &ShellModel) -> MomentGenerator {
    let topo = &model.topology;
    let n = topo.node_count();
    let cj2: Vec<f64> = model.coeffs.c.iter().map(|c| c * c).collect();
    let mut diag = vec![0.0; n];
    for j in topo.nodes() {
        let own = if j == 0 { 0.0 } else { cj2[j] };
        let kids: f64 = topo.children(j).map(|k| cj2[k]).sum();
        diag[j] = -(own + kids);
    }
    MomentGenerator {
        n,
        cj2,
        diag,
        parents: topo.nodes().map(|j| topo.parent(j)).collect(),
        children: topo.nodes().map(|j| topo.children(j)).collect(),
    }
}

/// Constant source from the frozen phantom parent: c_root^2 f^2 at the root.
pub fn moment_source(model: &ShellModel) -> Vec<f64> {
    let mut s = vec![0.0; model.node_count()];
    s[0] = model.coeffs.c[0] * model.coeffs.c[0] * model.scheme.forcing * model.scheme.forcing;
    s
}

impl MomentGenerator {
    pub fn matvec(&self, m: &[f64], out: &mut [f64]) {
        for j in 0..self.n {
            let mut acc = self.diag[j] * m[j];
            if let Some(p) = self.parents[j] {
                acc += self.cj2[j] * m[p];
            }
            for k in self.children[j].clone() {
                acc += self.cj2[k] * m[k];
            }
            out[j] = acc;
        }
    }

    /// Sparse triplets (row, col, value), rows in order, zero entries kept
    /// out.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for j in 0..self.n {
            if let Some(p) = self.parents[j] {
                out.push((j, p, self.cj2[j]));
            }
            out.push((j, j, self.diag[j]));
            for k in self.children[j].clone() {
                out.push((j, k, self.cj2[k]));
            }
        }
        out
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for (_, col, v) in self.triplets() {
            sums[col] += v;
        }
        sums
    }

    pub fn max_abs_diag(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }

    pub fn dense(&self) -> Mat {
        let mut a = Mat::zeros(self.n);
        for (r, c, v) in self.triplets() {
            a[(r, c)] += v;
        }
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    Rk4,
    MatrixExp,
}

/// Integrate m' = A m + source over [0, t].
pub fn solve_moments(
    generator: &MomentGenerator,
    m0: &[f64],
    source: &[f64],
    t: f64,
    method: MomentMethod,
) -> Result<Vec<f64>> {
    if m0.len() != generator.n || source.len() != generator.n {
        return Err(Error::invalid("moment vector dimension does not match the generator"));
    }
    if m0.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("initial second moments must be nonnegative"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("horizon must be nonnegative"));
    }
    if t == 0.0 {
        return Ok(m0.to_vec());
    }
    let out = match method {
        MomentMethod::Rk4 => solve_rk4(generator, m0, source, t),
        MomentMethod::MatrixExp => solve_expm(generator, m0, source, t)?,
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged { t });
    }
    Ok(out)
}

fn solve_rk4(gen: &MomentGenerator, m0: &[f64], source: &[f64], t: f64) -> Vec<f64> {
    let n = gen.n;
    // Spectral bound from the Gershgorin disks of the Laplacian structure.
    let lam = 2.0 * gen.max_abs_diag();
    // Step targets total truncation error ~1e-9 along the run; the cap
    // keeps stiff cases affordable (conservation is exact at any stable
    // step because the column sums vanish).
    let lam_h = (1.2e-7 / (t * lam).max(1.0)).powf(0.25).min(0.05);
    let n_steps = if lam > 0.0 {
        ((t * lam / lam_h).ceil().max(1.0) as usize).min(50_000)
    } else {
        1
    };
    let h = t / n_steps as f64;

    let mut m = m0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for _ in 0..n_steps {
        gen.matvec(&m, &mut k1);
        for i in 0..n {
            k1[i] += source[i];
            tmp[i] = m[i] + 0.5 * h * k1[i];
        }
        gen.matvec(&tmp, &mut k2);
        for i in 0..n {
            k2[i] += source[i];
            tmp[i] = m[i] + 0.5 * h * k2[i];
        }
        gen.matvec(&tmp, &mut k3);
        for i in 0..n {
            k3[i] += source[i];
            tmp[i] = m[i] + h * k3[i];
        }
        gen.matvec(&tmp, &mut k4);
        for i in 0..n {
            k4[i] += source[i];
            m[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    m
}

fn solve_expm(gen: &MomentGenerator, m0: &[f64], source: &[f64], t: f64) -> Result<Vec<f64>> {
    let n = gen.n;
    let homogeneous = source.iter().all(|&s| s == 0.0);
    if homogeneous {
        let e = expm(&gen.dense().scaled(t))?;
        return Ok(e.matvec(m0));
    }
    // Augmented generator [[A, s], [0, 0]]: the exponential's last column
    // integrates the constant source.
    let mut aug = Mat::zeros(n + 1);
    for (r, c, v) in gen.triplets() {
        aug[(r, c)] = v;
    }
    for i in 0..n {
        aug[(i, n)] = source[i];
    }
    let e = expm(&aug.scaled(t))?;
    let mut z0 = m0.to_vec();
    z0.push(1.0);
    let z = e.matvec(&z0);
    Ok(z[..n].to_vec())
}
