//! Small dense linear algebra: row-major matrices, LU solves, and the
//! scaling-and-squaring matrix exponential (Pade order 13).
//!
//! Sized for moment systems of a few hundred nodes; nothing here is tuned
//! for large n.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Mat {
        Mat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Mat {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * other.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Mat {
        Mat { n: self.n, a: self.a.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.n, other.n);
        Mat { n: self.n, a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect() }
    }

    pub fn add_scaled_identity(&mut self, s: f64) {
        for i in 0..self.n {
            self.a[i * self.n + i] += s;
        }
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.a[i * n + j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.a[i * n + j] * x[j]).sum())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.a[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }
}

/// Solve A X = B in place (X overwrites `b`, column-major list of RHS
/// vectors), partial pivoting.
pub fn lu_solve(a: &Mat, b: &mut Mat) -> Result<()> {
    let n = a.n;
    debug_assert_eq!(b.n, n);
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let (pivot_row, pivot_val) = (col..n)
            .map(|r| (r, lu[(r, col)].abs()))
            .fold((col, -1.0), |acc, it| if it.1 > acc.1 { it } else { acc });
        if pivot_val == 0.0 || !pivot_val.is_finite() {
            return Err(Error::invalid("singular or non-finite matrix in LU solve"));
        }
        if pivot_row != col {
            for j in 0..n {
                lu.a.swap(col * n + j, pivot_row * n + j);
            }
            perm.swap(col, pivot_row);
        }
        let inv = 1.0 / lu[(col, col)];
        for r in col + 1..n {
            let factor = lu[(r, col)] * inv;
            lu[(r, col)] = factor;
            if factor != 0.0 {
                for j in col + 1..n {
                    let v = lu[(col, j)];
                    lu.a[r * n + j] -= factor * v;
                }
            }
        }
    }
    // Apply row permutation to B, then forward/back substitution.
    let orig = b.clone();
    for (row, &src) in perm.iter().enumerate() {
        for j in 0..n {
            b.a[row * n + j] = orig.a[src * n + j];
        }
    }
    for col in 0..n {
        for r in col + 1..n {
            let factor = lu[(r, col)];
            if factor != 0.0 {
                for j in 0..n {
                    let v = b.a[col * n + j];
                    b.a[r * n + j] -= factor * v;
                }
            }
        }
    }
    for col in (0..n).rev() {
        let inv = 1.0 / lu[(col, col)];
        for j in 0..n {
            b.a[col * n + j] *= inv;
        }
        for r in 0..col {
            let factor = lu[(r, col)];
            if factor != 0.0 {
                for j in 0..n {
                    let v = b.a[col * n + j];
                    b.a[r * n + j] -= factor * v;
                }
            }
        }
    }
    Ok(())
}

/// Solve A x = b for a single right-hand side.
pub fn lu_solve_vec(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    let mut bm = Mat::zeros(n);
    for i in 0..n {
        bm[(i, 0)] = b[i];
    }
    lu_solve(a, &mut bm)?;
    Ok((0..n).map(|i| bm[(i, 0)]).collect())
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the [13/13] Pade
/// approximant.
pub fn expm(a: &Mat) -> Result<Mat> {
    let n = a.n;
    let norm = a.norm_1();
    if !norm.is_finite() {
        return Err(Error::invalid("non-finite matrix in expm"));
    }
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a_scaled = a.scaled(0.5f64.powi(s));

    let a2 = a_scaled.matmul(&a_scaled);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);
    let b = &PADE13;

    // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let mut inner = a6.scaled(b[13]).add(&a4.scaled(b[11])).add(&a2.scaled(b[9]));
    inner = a6.matmul(&inner);
    inner = inner.add(&a6.scaled(b[7])).add(&a4.scaled(b[5])).add(&a2.scaled(b[3]));
    inner.add_scaled_identity(b[1]);
    let u = a_scaled.matmul(&inner);

    // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let mut v = a6.scaled(b[12]).add(&a4.scaled(b[10])).add(&a2.scaled(b[8]));
    v = a6.matmul(&v);
    v = v.add(&a6.scaled(b[6])).add(&a4.scaled(b[4])).add(&a2.scaled(b[2]));
    v.add_scaled_identity(b[0]);

    // (V - U) R = (V + U)
    let vm = Mat { n, a: v.a.iter().zip(&u.a).map(|(x, y)| x - y).collect() };
    let mut r = Mat { n, a: v.a.iter().zip(&u.a).map(|(x, y)| x + y).collect() };
    lu_solve(&vm, &mut r)?;

    for _ in 0..s {
        r = r.matmul(&r);
    }
    Ok(r)
}
