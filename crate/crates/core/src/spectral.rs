//! Truncated Fourier representation of real divergence-free 3D fields.
//!
//! A field is a map from nonzero integer wavevectors m (|m|_inf bounded)
//! to complex 3-vectors, with the conjugate symmetry of a real field. The
//! convention is xi(x) = sum_m xi_m exp(2 pi i m.x), so d/dx_l carries the
//! symbol 2 pi i m_l and the Laplacian -4 pi^2 |m|^2.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Complex {
        Complex { re, im }
    }

    pub fn conj(self) -> Complex {
        Complex { re: self.re, im: -self.im }
    }

    pub fn scale(self, s: f64) -> Complex {
        Complex { re: self.re * s, im: self.im * s }
    }

    /// Multiplication by i*s.
    pub fn mul_i(self, s: f64) -> Complex {
        Complex { re: -self.im * s, im: self.re * s }
    }

    pub fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

impl Add for Complex {
    type Output = Complex;
    fn add(self, o: Complex) -> Complex {
        Complex { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for Complex {
    type Output = Complex;
    fn sub(self, o: Complex) -> Complex {
        Complex { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Mul for Complex {
    type Output = Complex;
    fn mul(self, o: Complex) -> Complex {
        Complex {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }
}

impl Neg for Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex { re: -self.re, im: -self.im }
    }
}

pub type WaveVec = [i32; 3];

pub fn wave_neg(k: WaveVec) -> WaveVec {
    [-k[0], -k[1], -k[2]]
}

pub fn wave_add(a: WaveVec, b: WaveVec) -> WaveVec {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn norm_inf(k: WaveVec) -> u32 {
    k.iter().map(|v| v.unsigned_abs()).max().unwrap()
}

pub fn norm_sq(k: WaveVec) -> i64 {
    k.iter().map(|&v| v as i64 * v as i64).sum()
}

/// Deterministic orthonormal basis of the plane perpendicular to k:
/// a1 = normalize(k x u) with u = z-hat (x-hat when k is parallel to z),
/// a2 = normalize(k x a1).
pub fn polarization(k: WaveVec) -> ([f64; 3], [f64; 3]) {
    assert!(k != [0, 0, 0], "polarization needs a nonzero wavevector");
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    let u: [f64; 3] = if k[0] == 0 && k[1] == 0 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
    let a1 = normalize(cross(kf, u));
    let a2 = normalize(cross(kf, a1));
    (a1, a2)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

pub fn dot(a: [f64; 3], k: WaveVec) -> f64 {
    a[0] * k[0] as f64 + a[1] * k[1] as f64 + a[2] * k[2] as f64
}

/// Conjugate-symmetric map from wavevectors to mode amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    modes: BTreeMap<WaveVec, [Complex; 3]>,
    m_max: u32,
}

impl FourierField {
    pub fn new(m_max: u32) -> FourierField {
        FourierField { modes: BTreeMap::new(), m_max }
    }

    pub fn m_max(&self) -> u32 {
        self.m_max
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn get(&self, m: WaveVec) -> [Complex; 3] {
        self.modes.get(&m).copied().unwrap_or([Complex::ZERO; 3])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WaveVec, &[Complex; 3])> {
        self.modes.iter()
    }

    /// Accumulate an amplitude; returns false (and drops the value) when
    /// the destination lies outside the truncation. The zero wavevector is
    /// never stored: mean-zero fields stay mean-zero.
    pub fn accumulate(&mut self, m: WaveVec, v: [Complex; 3]) -> bool {
        if m == [0, 0, 0] {
            return v.iter().all(|c| c.norm_sq() == 0.0);
        }
        if norm_inf(m) > self.m_max {
            return false;
        }
        let slot = self.modes.entry(m).or_insert([Complex::ZERO; 3]);
        for i in 0..3 {
            slot[i] = slot[i] + v[i];
        }
        true
    }

    pub fn set(&mut self, m: WaveVec, v: [Complex; 3]) {
        assert!(m != [0, 0, 0] && norm_inf(m) <= self.m_max, "mode out of range");
        self.modes.insert(m, v);
    }

    /// Real-field pair insert: v at m and its conjugate at -m.
    pub fn set_pair(&mut self, m: WaveVec, v: [Complex; 3]) {
        self.set(m, v);
        self.set(wave_neg(m), [v[0].conj(), v[1].conj(), v[2].conj()]);
    }

    /// Componentwise Leray projection: each mode multiplied by
    /// I - m m^T / |m|^2; idempotent, kills gradient fields.
    pub fn leray_project(&self) -> FourierField {
        let mut out = FourierField::new(self.m_max);
        for (&m, v) in &self.modes {
            out.modes.insert(m, project_mode(m, *v));
        }
        out
    }

    /// Laplacian: multiply each mode by -4 pi^2 |m|^2.
    pub fn laplacian(&self) -> FourierField {
        let mut out = FourierField::new(self.m_max);
        for (&m, v) in &self.modes {
            let s = -4.0 * std::f64::consts::PI * std::f64::consts::PI * norm_sq(m) as f64;
            out.modes.insert(m, [v[0].scale(s), v[1].scale(s), v[2].scale(s)]);
        }
        out
    }

    pub fn add_scaled(&mut self, other: &FourierField, s: f64) {
        for (&m, v) in &other.modes {
            self.accumulate(m, [v[0].scale(s), v[1].scale(s), v[2].scale(s)]);
        }
    }

    pub fn scaled(&self, s: f64) -> FourierField {
        let mut out = self.clone();
        for v in out.modes.values_mut() {
            for c in v.iter_mut() {
                *c = c.scale(s);
            }
        }
        out
    }

    /// Sum over modes of |v|^2 (squared l2 norm of the coefficient table).
    pub fn norm_sq(&self) -> f64 {
        self.modes
            .values()
            .map(|v| v.iter().map(|c| c.norm_sq()).sum::<f64>())
            .sum()
    }

    /// Real part of the l2 inner product sum_m <u_m, v_m>.
    pub fn inner_re(&self, other: &FourierField) -> f64 {
        let mut acc = 0.0;
        for (&m, u) in &self.modes {
            let v = other.get(m);
            for i in 0..3 {
                acc += u[i].re * v[i].re + u[i].im * v[i].im;
            }
        }
        acc
    }

    /// Worst violation of the real-field symmetry xi_{-m} = conj(xi_m).
    pub fn conjugate_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (&m, v) in &self.modes {
            let w = self.get(wave_neg(m));
            for i in 0..3 {
                let d = v[i] - w[i].conj();
                worst = worst.max(d.norm_sq().sqrt());
            }
        }
        worst
    }

    /// Worst |m . xi_m| over modes (zero for divergence-free fields).
    pub fn max_divergence(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (&m, v) in &self.modes {
            let mut re = 0.0;
            let mut im = 0.0;
            for i in 0..3 {
                re += m[i] as f64 * v[i].re;
                im += m[i] as f64 * v[i].im;
            }
            worst = worst.max((re * re + im * im).sqrt());
        }
        worst
    }

    /// Drop modes of negligible magnitude (exact zeros from cancellations).
    pub fn prune(&mut self, eps: f64) {
        self.modes
            .retain(|_, v| v.iter().map(|c| c.norm_sq()).sum::<f64>().sqrt() > eps);
    }

    /// Seeded conjugate-symmetric divergence-free field on |m|_inf <= m_max.
    pub fn random_divergence_free(seed: u64, tag: u32, m_max: u32) -> FourierField {
        let mut field = FourierField::new(m_max);
        let r = m_max as i32;
        let mut idx = 0u64;
        for mx in -r..=r {
            for my in -r..=r {
                for mz in -r..=r {
                    let m = [mx, my, mz];
                    if m == [0, 0, 0] || !lex_positive(m) {
                        continue;
                    }
                    let mut v = [Complex::ZERO; 3];
                    for comp in v.iter_mut() {
                        let re = crate::philox::uniform_in(seed, tag, idx, -1.0, 1.0);
                        let im = crate::philox::uniform_in(seed, tag, idx + 1, -1.0, 1.0);
                        *comp = Complex::new(re, im);
                        idx += 2;
                    }
                    field.set_pair(m, project_mode(m, v));
                }
            }
        }
        field
    }
}

/// Representative-half test used when generating real fields.
pub fn lex_positive(m: WaveVec) -> bool {
    if m[0] != 0 {
        return m[0] > 0;
    }
    if m[1] != 0 {
        return m[1] > 0;
    }
    m[2] > 0
}

fn project_mode(m: WaveVec, v: [Complex; 3]) -> [Complex; 3] {
    let n2 = norm_sq(m) as f64;
    let mf = [m[0] as f64, m[1] as f64, m[2] as f64];
    // m . v (complex) / |m|^2
    let mut dot_re = 0.0;
    let mut dot_im = 0.0;
    for i in 0..3 {
        dot_re += mf[i] * v[i].re;
        dot_im += mf[i] * v[i].im;
    }
    let mut out = v;
    for i in 0..3 {
        out[i].re -= mf[i] * dot_re / n2;
        out[i].im -= mf[i] * dot_im / n2;
    }
    out
}

/// Directional advection by the basis field with wavevector k and
/// polarization vector a: mode m contributes 2 pi i (a . m) xi_m at m + k.
/// Destinations beyond `m_max_out` are dropped and counted.
pub fn advect(field: &FourierField, k: WaveVec, a: [f64; 3], m_max_out: u32) -> (FourierField, usize) {
    let mut out = FourierField::new(m_max_out);
    let mut dropped = 0usize;
    let tau = std::f64::consts::TAU;
    for (&m, v) in field.iter() {
        let directional = dot(a, m);
        // Exact-zero directional derivatives come out as rounding dust
        // (~1e-16) because a is a normalized float vector; for integer m
        // genuinely nonzero products are bounded well away from this.
        if directional.abs() <= 1e-12 * (1.0 + norm_inf(m) as f64) {
            continue;
        }
        let factor = tau * directional;
        let shifted = [v[0].mul_i(factor), v[1].mul_i(factor), v[2].mul_i(factor)];
        if !out.accumulate(wave_add(m, k), shifted) {
            dropped += 1;
        }
    }
    (out, dropped)
}
