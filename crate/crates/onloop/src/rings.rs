//! Ring generating functions A_{k,k'} and their transfer matrices.
//!
//! A ring separates an outer contour of length 2k from an inner one of
//! length 2k'. The generating series Σ_{k'} A_{k,k'} z^{−k'} equals
//! tr M(z)^{2k} for a small transfer matrix M(z), whose squared eigenvalues
//! λ±(z) control the large-k behaviour through the fixed point λ₊(z*) = z*.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elliptic::IdentityCheck;
use crate::quad::{brent, ln_binomial};
use crate::series::Rational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RingError {
    #[error("operation requires symmetric ring weights")]
    UnsupportedVariant,
    #[error("z = {z} is not above the pole {pole}")]
    BelowPole { z: f64, pole: f64 },
    #[error("no fixed point of λ₊(z) = z in ({lo}, {hi})")]
    NoFixedPoint { lo: f64, hi: f64 },
    #[error("exponent a = {0} outside (3/2, 5/2)")]
    ExponentOutOfRange(f64),
    #[error("Q(z) vanishes")]
    SingularDenominator,
    #[error("invalid weight table: {0}")]
    InvalidTable(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum RingVariant {
    Symmetric {
        h1: f64,
        h2: f64,
    },
    /// `h2_out` weights squares whose two free edges lie on the inner
    /// contour (outward turns), `h2_in` those with both on the outer contour.
    NonSymmetric {
        h1: f64,
        h2_out: f64,
        h2_in: f64,
    },
    /// Faces of degree m1 + m2 + 2 with m1 outer and m2 inner edges,
    /// m1 + m2 ≤ 2M, m1 ≡ m2 mod 2.
    General {
        m: usize,
        table: BTreeMap<(usize, usize), f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingWeights {
    pub variant: RingVariant,
    /// Loop lengths restricted to multiples of N (1 = unrestricted).
    pub length_modulus: usize,
}

impl RingWeights {
    pub fn symmetric(h1: f64, h2: f64) -> Self {
        RingWeights {
            variant: RingVariant::Symmetric { h1, h2 },
            length_modulus: 1,
        }
    }

    pub fn rigid(h1: f64) -> Self {
        Self::symmetric(h1, 0.0)
    }

    pub fn nonsymmetric(h1: f64, h2_out: f64, h2_in: f64) -> Self {
        RingWeights {
            variant: RingVariant::NonSymmetric { h1, h2_out, h2_in },
            length_modulus: 1,
        }
    }

    pub fn general(m: usize, table: BTreeMap<(usize, usize), f64>) -> Result<Self, RingError> {
        if m == 0 {
            return Err(RingError::InvalidTable("M must be at least 1".into()));
        }
        for (&(m1, m2), &h) in &table {
            if m1 + m2 > 2 * m {
                return Err(RingError::InvalidTable(format!(
                    "({m1},{m2}) exceeds degree bound 2M = {}",
                    2 * m
                )));
            }
            if (m1 + m2) % 2 != 0 {
                return Err(RingError::InvalidTable(format!(
                    "({m1},{m2}) violates parity"
                )));
            }
            if m1 == 0 && m2 == 0 {
                return Err(RingError::InvalidTable("(0,0) is not a face".into()));
            }
            if !(h.is_finite() && h >= 0.0) {
                return Err(RingError::InvalidTable(format!(
                    "weight {h} at ({m1},{m2})"
                )));
            }
        }
        Ok(RingWeights {
            variant: RingVariant::General { m, table },
            length_modulus: 1,
        })
    }

    /// Parses a JSON object mapping "m1,m2" to a weight.
    pub fn general_from_json(m: usize, json: &str) -> Result<Self, RingError> {
        let raw: BTreeMap<String, f64> =
            serde_json::from_str(json).map_err(|e| RingError::InvalidTable(e.to_string()))?;
        let mut table = BTreeMap::new();
        for (key, h) in raw {
            let parts: Vec<&str> = key.split(',').map(str::trim).collect();
            let parsed: Result<Vec<usize>, _> = parts.iter().map(|p| p.parse::<usize>()).collect();
            match parsed.as_deref() {
                Ok([m1, m2]) => {
                    table.insert((*m1, *m2), h);
                }
                _ => return Err(RingError::InvalidTable(format!("bad key {key:?}"))),
            }
        }
        Self::general(m, table)
    }

    pub fn with_length_modulus(mut self, n: usize) -> Self {
        assert!(n >= 1);
        self.length_modulus = n;
        self
    }

    /// Loop-visited weights h1 + 2h2 entering τ = 4R(1)(h1 + 2h2); for the
    /// non-symmetric variant the combination h1 + h2_out + h2_in = z*.
    pub fn zstar_closed_form(&self) -> Option<f64> {
        match self.variant {
            RingVariant::Symmetric { h1, h2 } => Some(h1 + 2.0 * h2),
            RingVariant::NonSymmetric { h1, h2_out, h2_in } => Some(h1 + h2_out + h2_in),
            RingVariant::General { .. } => None,
        }
    }

    fn as_general_table(&self) -> (usize, BTreeMap<(usize, usize), f64>) {
        match &self.variant {
            RingVariant::Symmetric { h1, h2 } => {
                let mut t = BTreeMap::new();
                t.insert((1, 1), *h1);
                t.insert((0, 2), *h2);
                t.insert((2, 0), *h2);
                (1, t)
            }
            RingVariant::NonSymmetric { h1, h2_out, h2_in } => {
                let mut t = BTreeMap::new();
                t.insert((1, 1), *h1);
                t.insert((0, 2), *h2_out);
                t.insert((2, 0), *h2_in);
                (1, t)
            }
            RingVariant::General { m, table } => (*m, table.clone()),
        }
    }

    /// Largest z at which the inner-contour denominator 1 − Σ h^{(0,m2)} z^{−m2/2} vanishes.
    pub fn pole(&self) -> f64 {
        match self.variant {
            RingVariant::Symmetric { h2, .. } => h2,
            RingVariant::NonSymmetric { h2_out, .. } => h2_out,
            RingVariant::General { .. } => {
                let (_, t) = self.as_general_table();
                let den = |z: f64| {
                    1.0 - t
                        .iter()
                        .filter(|((m1, _), _)| *m1 == 0)
                        .map(|((_, m2), h)| h * z.powf(-(*m2 as f64) / 2.0))
                        .sum::<f64>()
                };
                let total: f64 = t
                    .iter()
                    .filter(|((m1, _), _)| *m1 == 0)
                    .map(|(_, h)| h)
                    .sum();
                if total == 0.0 {
                    return 0.0;
                }
                let mut hi = 1.0f64.max(total);
                while den(hi) <= 0.0 {
                    hi *= 2.0;
                }
                let mut lo = hi;
                while den(lo) > 0.0 && lo > 1e-300 {
                    lo *= 0.5;
                }
                brent(den, lo, hi, 1e-15).unwrap_or(lo)
            }
        }
    }
}

/// Exact A_{k,k'} as a polynomial in (h1, h2): the coefficients of
/// h1^{2j} h2^{k+k'−2j}, indexed by j.
pub fn ring_gf_coefficients(k: usize, kprime: usize) -> Vec<(usize, Rational)> {
    assert!(k >= 1);
    let fact = |n: usize| -> BigInt { (1..=n).fold(BigInt::one(), |a, i| a * BigInt::from(i)) };
    (0..=k.min(kprime))
        .map(|j| {
            let num = BigInt::from(2 * k) * fact(k + kprime);
            let den = BigInt::from(k + kprime) * fact(2 * j) * fact(k - j) * fact(kprime - j);
            (j, Rational::new(num, den))
        })
        .filter(|(_, c)| !c.is_zero())
        .collect()
}

/// ln A_{k,k'}(h1, h2) for the symmetric weights, via log-sum-exp over j.
pub fn ln_ring_gf(k: usize, kprime: usize, h1: f64, h2: f64) -> f64 {
    ln_ring_gf_two_state(k, kprime, h1, h2, h2)
}

/// Two-state rings with 2j type-(b) squares, k − j squares weighted
/// `h_outer` (free edges on the outer contour) and k' − j weighted `h_inner`.
pub fn ln_ring_gf_two_state(k: usize, kprime: usize, h1: f64, h_outer: f64, h_inner: f64) -> f64 {
    assert!(k >= 1);
    let pow = |e: usize, h: f64| if e == 0 { 0.0 } else { e as f64 * h.ln() };
    let terms: Vec<f64> = (0..=k.min(kprime))
        .map(|j| {
            ring_gf_multinomial_ln(k, kprime, j)
                + pow(2 * j, h1)
                + pow(k - j, h_outer)
                + pow(kprime - j, h_inner)
        })
        .filter(|v| *v > f64::NEG_INFINITY)
        .collect();
    log_sum_exp(&terms)
}

/// ln A_{k,k'} for k = 1..=kmax, k' = 0..=kpmax, sparse: entries with
/// A_{k,k'} = 0 are omitted. When N > 1 only k + k' ≡ 0 mod N is kept.
pub fn ln_ring_table(
    w: &RingWeights,
    kmax: usize,
    kpmax: usize,
) -> Result<Vec<Vec<(usize, f64)>>, RingError> {
    let n = w.length_modulus;
    let keep = |k: usize, kp: usize| (k + kp) % n == 0;
    match w.variant {
        RingVariant::Symmetric { h1, h2: 0.0 }
        | RingVariant::NonSymmetric {
            h1,
            h2_out: 0.0,
            h2_in: 0.0,
        } => Ok((1..=kmax)
            .map(|k| {
                if k <= kpmax && keep(k, k) && h1 > 0.0 {
                    vec![(k, 2.0 * k as f64 * h1.ln())]
                } else {
                    vec![]
                }
            })
            .collect()),
        RingVariant::Symmetric { .. } | RingVariant::NonSymmetric { .. } => {
            let (h1, h_inner, h_outer) = two_state(w).expect("two-state");
            use rayon::prelude::*;
            Ok((1..=kmax)
                .into_par_iter()
                .map(|k| {
                    (0..=kpmax)
                        .filter(|&kp| keep(k, kp))
                        .map(|kp| (kp, ln_ring_gf_two_state(k, kp, h1, h_outer, h_inner)))
                        .filter(|(_, v)| *v > f64::NEG_INFINITY)
                        .collect()
                })
                .collect())
        }
        RingVariant::General { .. } => {
            if n > 1 {
                return Err(RingError::UnsupportedVariant);
            }
            Ok(general_ring_table(w, kmax, kpmax)
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .enumerate()
                        .filter(|(_, v)| *v > 0.0)
                        .map(|(kp, v)| (kp, v.ln()))
                        .collect()
                })
                .collect())
        }
    }
}

/// A_{k,k'} for the general variant as coefficients of x^{2k'} in
/// tr (M²)^k, with M expanded in x = z^{−1/2}. All coefficients are
/// non-negative, so the expansion is free of cancellations.
fn general_ring_table(w: &RingWeights, kmax: usize, kpmax: usize) -> Vec<Vec<f64>> {
    let (m, table) = w.as_general_table();
    let size = 2 * m;
    let deg = 2 * kpmax + 1;
    type Ser = Vec<f64>;
    let zero = || vec![0.0; deg];
    let mul = |a: &Ser, b: &Ser| -> Ser {
        let mut out = vec![0.0; deg];
        for (i, ai) in a.iter().enumerate() {
            if *ai == 0.0 {
                continue;
            }
            for (j, bj) in b.iter().enumerate().take(deg - i) {
                out[i + j] += ai * bj;
            }
        }
        out
    };
    let column = |i: usize| -> Ser {
        let mut s = zero();
        for (&(m1, m2), &h) in &table {
            if m1 == i && m2 < deg {
                s[m2] += h;
            }
        }
        s
    };
    // 1/(1 − S0) with S0(0) = 0
    let s0 = column(0);
    let mut inv = zero();
    inv[0] = 1.0;
    for d in 1..deg {
        inv[d] = (1..=d).map(|j| s0[j] * inv[d - j]).sum();
    }
    let mut mat: Vec<Vec<Ser>> = vec![vec![zero(); size]; size];
    mat[0][0] = mul(&column(1), &inv);
    mat[0][1] = inv.clone();
    for i in 1..size {
        mat[i][0] = column(i + 1);
        if i + 1 < size {
            mat[i][i + 1][0] = 1.0;
        }
    }
    let matmul = |a: &Vec<Vec<Ser>>, b: &Vec<Vec<Ser>>| -> Vec<Vec<Ser>> {
        let mut c = vec![vec![zero(); size]; size];
        for i in 0..size {
            for j in 0..size {
                for l in 0..size {
                    let p = mul(&a[i][l], &b[l][j]);
                    for (x, y) in c[i][j].iter_mut().zip(p) {
                        *x += y;
                    }
                }
            }
        }
        c
    };
    let sq = matmul(&mat, &mat);
    let mut acc = sq.clone();
    let mut out = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        if k > 1 {
            acc = matmul(&acc, &sq);
        }
        let mut row = vec![0.0; kpmax + 1];
        for (kp, r) in row.iter_mut().enumerate() {
            *r = (0..size).map(|i| acc[i][i][2 * kp]).sum();
        }
        out.push(row);
    }
    out
}

fn ln_factorial(n: usize) -> f64 {
    statrs::function::factorial::ln_factorial(n as u64)
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn ring_gf(k: usize, kprime: usize, w: &RingWeights) -> Result<f64, RingError> {
    match w.variant {
        RingVariant::Symmetric { h1, h2 } => Ok(ln_ring_gf(k, kprime, h1, h2).exp()),
        _ => Err(RingError::UnsupportedVariant),
    }
}

fn check_z(w: &RingWeights, z: f64) -> Result<(), RingError> {
    let pole = w.pole();
    if !(z > 0.0 && z > pole) {
        return Err(RingError::BelowPole { z, pole });
    }
    Ok(())
}

/// M(z) at complex z with the principal branch of z^{1/2}.
pub fn transfer_matrix_complex(w: &RingWeights, z: Complex64) -> DMatrix<Complex64> {
    let (m, table) = w.as_general_table();
    let size = 2 * m;
    let zh = z.sqrt();
    let column = |i: usize| -> Complex64 {
        table
            .iter()
            .filter(|((m1, _), _)| *m1 == i)
            .map(|((_, m2), h)| *h / zh.powu(*m2 as u32))
            .sum()
    };
    let den = Complex64::new(1.0, 0.0) - column(0);
    let mut mat = DMatrix::from_element(size, size, Complex64::zero());
    mat[(0, 0)] = column(1) / den;
    mat[(0, 1)] = Complex64::new(1.0, 0.0) / den;
    for i in 1..size {
        mat[(i, 0)] = column(i + 1);
        if i + 1 < size {
            mat[(i, i + 1)] = Complex64::new(1.0, 0.0);
        }
    }
    mat
}

pub fn transfer_matrix(w: &RingWeights, z: f64) -> Result<DMatrix<f64>, RingError> {
    check_z(w, z)?;
    Ok(transfer_matrix_complex(w, Complex64::new(z, 0.0)).map(|c| c.re))
}

/// λ±(z) for the two-state variants at complex z:
/// λ± = z ((h1 ± √(h1² + 4 h_in (z − h_out))) / (2 (z − h_out)))².
fn lambda_pair(h1: f64, h_out: f64, h_in: f64, z: Complex64) -> (Complex64, Complex64) {
    let d = z - h_out;
    let root = (h1 * h1 + 4.0 * h_in * d).sqrt();
    let plus = (h1 + root) / (2.0 * d);
    let minus = (h1 - root) / (2.0 * d);
    (z * plus * plus, z * minus * minus)
}

fn two_state(w: &RingWeights) -> Option<(f64, f64, f64)> {
    match w.variant {
        RingVariant::Symmetric { h1, h2 } => Some((h1, h2, h2)),
        RingVariant::NonSymmetric { h1, h2_out, h2_in } => Some((h1, h2_out, h2_in)),
        RingVariant::General { .. } => None,
    }
}

/// Eigenvalues of M²(z) sorted by decreasing real part.
pub fn squared_eigenvalues(w: &RingWeights, z: f64) -> Result<Vec<Complex64>, RingError> {
    check_z(w, z)?;
    let mut ev: Vec<Complex64> = if let Some((h1, ho, hi)) = two_state(w) {
        let (p, m) = lambda_pair(h1, ho, hi, Complex64::new(z, 0.0));
        vec![p, m]
    } else {
        let m = transfer_matrix(w, z)?;
        let m2 = &m * &m;
        m2.complex_eigenvalues().iter().cloned().collect()
    };
    ev.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
    Ok(ev)
}

pub fn lambda_plus(w: &RingWeights, z: f64) -> Result<f64, RingError> {
    Ok(squared_eigenvalues(w, z)?[0].re)
}

/// dλ₊/dz: closed form for the two-state variants, centered differences otherwise.
pub fn lambda_plus_derivative(w: &RingWeights, z: f64) -> Result<f64, RingError> {
    check_z(w, z)?;
    if let Some((h1, ho, hi)) = two_state(w) {
        let d = z - ho;
        let root = (h1 * h1 + 4.0 * hi * d).sqrt();
        let s = h1 + root;
        let ds = 2.0 * hi / root;
        return Ok(s * s / (4.0 * d * d) + z * 2.0 * s * ds / (4.0 * d * d)
            - z * s * s / (2.0 * d * d * d));
    }
    let h = 1e-5 * (z - w.pole()).min(z);
    let f = |x: f64| lambda_plus(w, x);
    Ok((8.0 * (f(z + h)? - f(z - h)?) - (f(z + 2.0 * h)? - f(z - 2.0 * h)?)) / (12.0 * h))
}

/// Σ_{k'} A_{k,k'} z^{−k'}, restricted to k + k' ≡ 0 mod N when N > 1 by
/// averaging over N-th roots of unity.
pub fn transfer_series(w: &RingWeights, k: usize, z: f64) -> Result<f64, RingError> {
    check_z(w, z)?;
    let n = w.length_modulus;
    let trace_at = |zc: Complex64| -> Complex64 {
        if let Some((h1, ho, hi)) = two_state(w) {
            let (p, m) = lambda_pair(h1, ho, hi, zc);
            p.powu(k as u32) + m.powu(k as u32)
        } else {
            let m = transfer_matrix_complex(w, zc);
            let m2 = &m * &m;
            let mut acc = DMatrix::<Complex64>::identity(m2.nrows(), m2.ncols());
            for _ in 0..k {
                acc = &acc * &m2;
            }
            acc.trace()
        }
    };
    if n == 1 {
        return Ok(trace_at(Complex64::new(z, 0.0)).re);
    }
    let mut acc = Complex64::zero();
    for j in 0..n {
        let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64);
        acc += omega.powu(k as u32) * trace_at(Complex64::new(z, 0.0) / omega);
    }
    Ok(acc.re / n as f64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenData {
    pub zstar: f64,
    pub mustar: f64,
    pub degenerate: bool,
}

pub const DEGENERACY_TOL: f64 = 1e-9;

/// Fixed point λ₊(z*) = z* by bracketed root finding on (pole, pole + Σh + 1).
pub fn eigen_fixed_point(w: &RingWeights) -> Result<EigenData, RingError> {
    let pole = w.pole();
    let (_, table) = w.as_general_table();
    let total: f64 = table.values().sum();
    let lo = (pole * (1.0 + 1e-9)).max(1e-300).max(pole + 1e-14);
    let hi = pole + total + 1.0;
    let f = |z: f64| lambda_plus(w, z).map(|l| l - z).unwrap_or(f64::NAN);
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(RingError::NoFixedPoint { lo, hi });
    }
    let zstar = brent(f, lo, hi, 1e-15 * hi).ok_or(RingError::NoFixedPoint { lo, hi })?;
    let mustar = -lambda_plus_derivative(w, zstar)?;
    let ev = squared_eigenvalues(w, zstar)?;
    let degenerate = ev.len() > 1 && (ev[0] - ev[1]).norm() <= DEGENERACY_TOL * ev[0].norm();
    Ok(EigenData {
        zstar,
        mustar,
        degenerate,
    })
}

/// n = 2N (μ*)^a sin π(a − 3/2), with the factor 2 dropped for a degenerate
/// top eigenvalue and the factor N dropped for rigid loops (always of even
/// length).
pub fn consistency_relation(w: &RingWeights, a: f64) -> Result<f64, RingError> {
    if !(a > 1.5 && a < 2.5) {
        return Err(RingError::ExponentOutOfRange(a));
    }
    let e = eigen_fixed_point(w)?;
    let base = (std::f64::consts::PI * (a - 1.5)).sin() * e.mustar.powf(a);
    let pair = if e.degenerate { 1.0 } else { 2.0 };
    let rigid = matches!(w.variant, RingVariant::Symmetric { h2, .. } if h2 == 0.0);
    let modulus = if rigid { 1.0 } else { w.length_modulus as f64 };
    Ok(pair * modulus * base)
}

/// P(λ, z)/Q(z) from the unrooted-ring logarithm, equal to det(λ − M²(z)).
/// Evaluated for λ, z > 0.
pub fn char_poly_ratio(w: &RingWeights, lambda: f64, z: f64) -> Result<f64, RingError> {
    let (m, table) = w.as_general_table();
    let mm = 2 * m;
    let mono =
        |m1: usize, m2: usize| lambda.powf((mm - m1) as f64 / 2.0) * z.powf((mm - m2) as f64 / 2.0);
    let mut even = (lambda * z).powi(m as i32);
    let mut odd = 0.0;
    for (&(m1, m2), &h) in &table {
        if m1 % 2 == 0 {
            even -= h * mono(m1, m2);
        } else {
            odd += h * mono(m1, m2);
        }
    }
    let p = (even - odd) * (even + odd);
    let qbase = z.powi(m as i32)
        - table
            .iter()
            .filter(|((m1, _), _)| *m1 == 0)
            .map(|((_, m2), h)| h * z.powf((mm - m2) as f64 / 2.0))
            .sum::<f64>();
    let q = qbase * qbase;
    if q == 0.0 {
        return Err(RingError::SingularDenominator);
    }
    Ok(p / q)
}

/// det(λ − M²(z)) computed directly.
pub fn char_poly_direct(w: &RingWeights, lambda: f64, z: f64) -> f64 {
    let m = transfer_matrix_complex(w, Complex64::new(z, 0.0)).map(|c| c.re);
    let m2 = &m * &m;
    let id = DMatrix::<f64>::identity(m2.nrows(), m2.ncols());
    (id * lambda - m2).determinant()
}

/// Exact coefficient of h1^{2j} h2^{k+k'−2j} in A_{k,k'} as f64 (used for logs).
pub fn ring_gf_multinomial_ln(k: usize, kprime: usize, j: usize) -> f64 {
    (2.0 * k as f64 / (k + kprime) as f64).ln()
        + ln_binomial((k + kprime) as u64, (2 * j) as u64)
        + ln_factorial(k + kprime - 2 * j)
        - ln_factorial(k - j)
        - ln_factorial(kprime - j)
}

/// Random general table of order M: each admissible (m1, m2) is present with
/// probability 2/3 and weight uniform in (0, 0.3).
pub fn random_general_table<R: Rng>(m: usize, rng: &mut R) -> BTreeMap<(usize, usize), f64> {
    let mut table = BTreeMap::new();
    for m1 in 0..=2 * m {
        for m2 in 0..=2 * m - m1 {
            if (m1 + m2) % 2 != 0 || m1 + m2 == 0 {
                continue;
            }
            if rng.gen_bool(2.0 / 3.0) {
                table.insert((m1, m2), rng.gen_range(0.0..0.3));
            }
        }
    }
    if table.is_empty() {
        table.insert((1, 1), 0.1);
    }
    table
}

/// Characteristic-polynomial, symmetric-involution and non-symmetric μ*
/// checks on seeded random samples.
pub fn identity_suite(seed: u64) -> Vec<IdentityCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for m in 1..=3usize {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let table = random_general_table(m, &mut rng);
            let w = RingWeights::general(m, table).expect("valid random table");
            let lambda = rng.gen_range(0.2..3.0);
            let z = rng.gen_range(1.0..3.0);
            let r = match char_poly_ratio(&w, lambda, z) {
                Ok(r) => (r - char_poly_direct(&w, lambda, z)).abs(),
                Err(_) => f64::INFINITY,
            };
            worst = worst.max(r);
        }
        out.push(IdentityCheck {
            name: format!("char poly P/Q = det(lambda - M^2), M = {m}"),
            residual: worst,
            threshold: 1e-10,
        });
    }
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let w = RingWeights::symmetric(rng.gen_range(0.0..0.5), rng.gen_range(0.01..0.5));
        worst = worst.max(
            eigen_fixed_point(&w)
                .map(|e| (e.mustar - 1.0).abs())
                .unwrap_or(f64::INFINITY),
        );
    }
    out.push(IdentityCheck {
        name: "symmetric mu* = 1".into(),
        residual: worst,
        threshold: 1e-8,
    });
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (h1, ho, hi) = (
            rng.gen_range(0.0..0.5),
            rng.gen_range(0.01..0.5),
            rng.gen_range(0.01..0.5),
        );
        let expected = (h1 + 2.0 * ho) / (h1 + 2.0 * hi);
        let got = eigen_fixed_point(&RingWeights::nonsymmetric(h1, ho, hi)).map(|e| e.mustar);
        worst = worst.max(got.map(|m| (m - expected).abs()).unwrap_or(f64::INFINITY));
    }
    out.push(IdentityCheck {
        name: "non-symmetric mu* ratio".into(),
        residual: worst,
        threshold: 1e-10,
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_ring_counts() {
        let w = RingWeights::symmetric(0.3, 0.2);
        assert!((ring_gf(1, 0, &w).unwrap() - 0.4).abs() < 1e-15);
        assert!((ring_gf(1, 1, &w).unwrap() - (0.09 + 2.0 * 0.04)).abs() < 1e-15);
        let rigid = RingWeights::rigid(0.3);
        assert!((ring_gf(2, 2, &rigid).unwrap() - 0.3f64.powi(4)).abs() < 1e-15);
        assert_eq!(ring_gf(2, 1, &rigid).unwrap(), 0.0);
    }

    #[test]
    fn exact_coefficients() {
        let c = ring_gf_coefficients(1, 1);
        assert_eq!(
            c,
            vec![
                (0, Rational::from_integer(2.into())),
                (1, Rational::from_integer(1.into()))
            ]
        );
        // multinomial logs agree with the exact integers
        for (j, coeff) in ring_gf_coefficients(3, 4) {
            let v: f64 = coeff.to_string().parse().unwrap();
            assert!((ring_gf_multinomial_ln(3, 4, j).exp() - v).abs() < 1e-9 * v);
        }
    }

    #[test]
    fn rigid_eigenvalues() {
        let w = RingWeights::rigid(0.2);
        let ev = squared_eigenvalues(&w, 0.5).unwrap();
        assert!((ev[0].re - 0.04 / 0.5).abs() < 1e-15);
        assert!(ev[1].norm() < 1e-15);
    }

    #[test]
    fn symmetric_fixed_point() {
        let w = RingWeights::symmetric(0.1, 0.05);
        let e = eigen_fixed_point(&w).unwrap();
        assert!((e.zstar - 0.2).abs() < 1e-13);
        assert!((e.mustar - 1.0).abs() < 1e-10);
        assert!(!e.degenerate);
    }

    #[test]
    fn below_pole_rejected() {
        let w = RingWeights::symmetric(0.1, 0.05);
        assert!(transfer_matrix(&w, 0.04).is_err());
        assert!(transfer_matrix(&w, -1.0).is_err());
    }
}
