//! Exact solution of the rigid loop model (h2 = 0): the resolvent functional
//! equation, critical spectral densities, the non-generic and generic critical
//! lines and the assembled phase diagram.

use crate::elliptic::{
    self, jacobi_sn_cn_dn, theta, zeta_b_derivative, zeta_b_regular_real_derivatives,
    EllipticError, ModeSums, ModularParam, ZetaBParams,
};
use crate::maps::SpectralDensity;
use crate::quad::{brent, fit_line, tanh_sinh};
use num_bigint::BigInt;
use num_complex::Complex64 as C;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RigidError {
    #[error("invalid parameters: {0}")]
    InvalidPoint(String),
    #[error("W_part is singular at ξ = 0")]
    SingularPoint,
    #[error("h1 = {h1} lies outside the non-generic arc [{lo}, {hi}]")]
    BeyondEndpoint { h1: f64, lo: f64, hi: f64 },
    #[error("point is off the non-generic line: g − g_line = {0:e}")]
    OffLine(f64),
    #[error("no admissible cut endpoint found: {0}")]
    Bracket(String),
    #[error("τ = {0} outside (0, 1)")]
    TauOutOfRange(f64),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
}

/// b with πb = arccos(n/2).
pub fn b_of_n(n: f64) -> f64 {
    (0.5 * n).acos() / PI
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhasePoint {
    pub n: f64,
    pub g: f64,
    pub h1: f64,
    pub b: f64,
}

impl PhasePoint {
    pub fn new(n: f64, g: f64, h1: f64) -> Result<Self, RigidError> {
        if !(n > 0.0 && n < 2.0) && n != 0.0 {
            return Err(RigidError::InvalidPoint(format!("n = {n} outside [0, 2)")));
        }
        if !(g >= 0.0 && h1 >= 0.0) || !g.is_finite() || !h1.is_finite() {
            return Err(RigidError::InvalidPoint(format!("g = {g}, h1 = {h1}")));
        }
        Ok(PhasePoint {
            n,
            g,
            h1,
            b: b_of_n(n),
        })
    }
}

/// The cut-free particular solution of the resolvent equation.
pub fn w_part(xi: C, p: &PhasePoint) -> Result<C, RigidError> {
    if xi.norm() == 0.0 {
        return Err(RigidError::SingularPoint);
    }
    let (n, g, h1) = (p.n, p.g, p.h1);
    let x3 = xi * xi * xi;
    let x5 = x3 * xi * xi;
    let num = 2.0 * (xi - g * x3) - n * (1.0 / (h1 * h1 * x3) - g / (h1.powi(4) * x5));
    Ok(num / (4.0 - n * n) + n / ((2.0 + n) * xi))
}

// ---------------------------------------------------------------------------
// Non-generic critical line

/// h1 at the dense end (g = 0) of the non-generic arc.
pub fn nongeneric_start(n: f64) -> f64 {
    let b = b_of_n(n);
    2.0 * b * b / (2.0 - n)
}

/// (g*, h1*) where the non-generic line meets the positivity boundary.
pub fn nongeneric_endpoint(n: f64) -> (f64, f64) {
    let b = b_of_n(n);
    let s = b * b - 2.0 * b + 3.0;
    let bb = b * b * (2.0 - b) * (2.0 - b);
    (3.0 * bb / (2.0 * (2.0 - n) * s * s), bb / ((2.0 - n) * s))
}

/// g on the non-generic line, without range checks.
pub fn nongeneric_g(n: f64, h1: f64) -> f64 {
    let b = b_of_n(n);
    3.0 / (2.0 + b * b) * (h1 - (2.0 - n) / (2.0 * b * b) * h1 * h1)
}

/// Largest g compatible with a positive density at given h1 (τ = 1).
pub fn positivity_bound(n: f64, h1: f64) -> f64 {
    let b = b_of_n(n);
    3.0 * h1 / (2.0 * (b * b - 2.0 * b + 3.0))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NonGenericPoint {
    pub n: f64,
    pub h1: f64,
    pub g: f64,
    pub positivity_bound: f64,
}

pub fn nongeneric_line(n: f64, h1: f64) -> Result<NonGenericPoint, RigidError> {
    if !(n > 0.0 && n < 2.0) {
        return Err(RigidError::InvalidPoint(format!("n = {n} outside (0, 2)")));
    }
    let (_, hs) = nongeneric_endpoint(n);
    let h0 = nongeneric_start(n);
    let slack = 1e-12 * h0;
    if !(h1 >= hs - slack && h1 <= h0 + slack) {
        return Err(RigidError::BeyondEndpoint { h1, lo: hs, hi: h0 });
    }
    Ok(NonGenericPoint {
        n,
        h1,
        g: nongeneric_g(n, h1).max(0.0),
        positivity_bound: positivity_bound(n, h1),
    })
}

/// Residuals of the large-ξ conditions fixing B, evaluated exactly.
///
/// With y = 1/ξ, B(ξ)((ξ − γ)/(ξ + γ))^b = y⁻³ Σ c_m y^m. The returned values
/// are c_0 − g/(4 − n²), c_1, c_2 + 1/(4 − n²), c_3, c_4 − 1/(2 + n) and c_5,
/// with g taken on the non-generic line at h1 = γ⁻². All vanish when the
/// polynomial B and the line equation are consistent.
///
/// `n` and `b` must satisfy n = 2cos πb; the only rational pairs are
/// (0, 1/2) and (1, 1/3).
pub fn nongeneric_expansion_residuals(
    n: &BigRational,
    b: &BigRational,
    gamma: &BigRational,
) -> Vec<BigRational> {
    let r = |a: i64, d: i64| BigRational::new(BigInt::from(a), BigInt::from(d));
    let one = BigRational::one();
    let two = r(2, 1);
    let four_n2 = r(4, 1) - n * n;
    let h1 = one.clone() / (gamma * gamma);
    let b2 = b * b;
    let g = r(3, 1) / (&two + &b2) * (&h1 - (&two - n) / (&two * &b2) * &h1 * &h1);
    let g3 = &g * gamma * gamma * gamma;
    // B(ξ) = β3 ξ³ + β2 ξ² + β1 ξ + β0
    let beta3 = &g / &four_n2;
    let beta2 = &two * b * gamma * &g / &four_n2;
    let beta1 = (&two * &b2 * gamma * gamma * &g - &one) / &four_n2;
    let beta0 = (r(2, 3) * (b + &two * b * &b2) * &g3 - &two * b * gamma) / &four_n2;
    const ORDER: usize = 6;
    // ln((1 − γy)/(1 + γy)) = −2 Σ (γy)^{2j+1}/(2j+1)
    let mut log = vec![BigRational::zero(); ORDER];
    let mut gp = gamma.clone();
    for j in 0.. {
        let m = 2 * j + 1;
        if m >= ORDER {
            break;
        }
        log[m] = -(&two * b) * &gp / r(m as i64, 1);
        gp = &gp * gamma * gamma;
    }
    // E = exp(log), E' = log' E
    let mut e = vec![BigRational::zero(); ORDER];
    e[0] = one.clone();
    for m in 1..ORDER {
        let mut acc = BigRational::zero();
        for k in 1..=m {
            acc += r(k as i64, 1) * &log[k] * &e[m - k];
        }
        e[m] = acc / r(m as i64, 1);
    }
    let poly = [beta3, beta2, beta1, beta0];
    let mut c = vec![BigRational::zero(); ORDER];
    for (i, p) in poly.iter().enumerate() {
        for m in 0..ORDER - i {
            c[m + i] += p * &e[m];
        }
    }
    vec![
        &c[0] - &g / &four_n2,
        c[1].clone(),
        &c[2] + &one / &four_n2,
        c[3].clone(),
        &c[4] - &one / (&two + n),
        c[5].clone(),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CriticalPhase {
    /// ρ ∝ (γ − |ξ|)^{1−b}, a = 2 − b
    Dense,
    /// ρ ∝ (γ − |ξ|)^{1+b}, a = 2 + b
    Dilute,
}

/// Exact spectral density on the non-generic line (τ = 1, γ = h1^{−1/2}).
#[derive(Clone, Debug)]
pub struct NonGenericDensity {
    pub point: PhasePoint,
    pub gamma: f64,
    /// B(−γ) − γB'(−γ), coefficient of the (1 − ξ²/γ²)^{1−b} edge term.
    pub edge_leading: f64,
    /// B(γ) + γB'(γ), coefficient of the (1 − ξ²/γ²)^{1+b} edge term.
    pub edge_subleading: f64,
    pub phase: CriticalPhase,
    /// Exponent a of F_k ~ c^k k^{−a}.
    pub a: f64,
    /// R(u) shifted to u = 1 and to u = −1, as polynomials in s = 1 ∓ u.
    r_at_plus: [f64; 7],
    r_at_minus: [f64; 7],
    /// Taylor coefficients of the even series ρ(γu) = Σ c_j u^{2j}.
    series: Vec<f64>,
    /// Odd Taylor coefficients of order 1 and 3 of R(u)H(u); zero on the line.
    pub pole_residue: [f64; 2],
}

const SERIES_RADIUS: f64 = 0.5;
const SERIES_TERMS: usize = 160;

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

/// Coefficients of p(x0 + s) in powers of s.
fn taylor_shift(c: &[f64], x0: f64) -> Vec<f64> {
    let mut out = c.to_vec();
    let n = out.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            out[j] += x0 * out[j + 1];
        }
    }
    out
}

pub fn critical_density(point: &PhasePoint) -> Result<NonGenericDensity, RigidError> {
    let (n, g, h1, b) = (point.n, point.g, point.h1, point.b);
    if !(n > 0.0 && n < 2.0) || h1 <= 0.0 {
        return Err(RigidError::InvalidPoint(format!("n = {n}, h1 = {h1}")));
    }
    let off = g - nongeneric_g(n, h1);
    if off.abs() > 1e-10 * (1.0 + g.abs()) {
        return Err(RigidError::OffLine(off));
    }
    let gamma = 1.0 / h1.sqrt();
    let d = 4.0 - n * n;
    let g3 = g * gamma.powi(3);
    // B(γu) = c3 u³ + c2 u² + c1 u + c0
    let bt = [
        (2.0 / 3.0 * (b + 2.0 * b.powi(3)) * g3 - 2.0 * b * gamma) / d,
        (2.0 * b * b * g3 - gamma) / d,
        2.0 * b * g3 / d,
        g3 / d,
    ];
    let bpoly = |x: f64| poly_eval(&bt, x / gamma);
    let bder =
        |x: f64| (bt[1] + 2.0 * bt[2] * (x / gamma) + 3.0 * bt[3] * (x / gamma).powi(2)) / gamma;
    let edge_leading = bpoly(-gamma) - gamma * bder(-gamma);
    let edge_subleading = bpoly(gamma) + gamma * bder(gamma);

    // Q(u) = u⁵Bt(u) − u³Bt(1/u) = (u² − 1) R(u)
    let mut q = [0.0; 9];
    q[8] = bt[3];
    q[7] = bt[2];
    q[6] = bt[1];
    q[5] = bt[0];
    q[3] = -bt[0];
    q[2] = -bt[1];
    q[1] = -bt[2];
    q[0] = -bt[3];
    let mut r = [0.0; 7];
    r[6] = q[8];
    r[5] = q[7];
    for i in (0..5).rev() {
        r[i] = q[i + 2] + r[i + 2];
    }
    let shift = |x0: f64| -> [f64; 7] {
        let s = taylor_shift(&r, x0);
        let mut out = [0.0; 7];
        for (i, v) in s.iter().enumerate() {
            // p(x0 + s) with s = ±(1 ∓ u) absorbed by the caller's sign
            out[i] = *v;
        }
        out
    };
    // R(u) at u = 1 − s: shift to 1 then flip odd powers
    let mut r_at_plus = shift(1.0);
    for (i, v) in r_at_plus.iter_mut().enumerate() {
        if i % 2 == 1 {
            *v = -*v;
        }
    }
    // R(−u) at u = 1 − s: R(−1 + s)
    let r_at_minus = shift(-1.0);

    // H(u) = (1 − u)^{1+b}(1 + u)^{1−b} = exp(Σ l_k u^k)
    let nt = SERIES_TERMS + 6;
    let mut l = vec![0.0; nt];
    for (k, slot) in l.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        *slot = (-(1.0 + b) + (1.0 - b) * sign) / kf;
    }
    let mut hser = vec![0.0; nt];
    hser[0] = 1.0;
    for m in 1..nt {
        let mut acc = 0.0;
        for k in 1..=m {
            acc += k as f64 * l[k] * hser[m - k];
        }
        hser[m] = acc / m as f64;
    }
    let mut gser = vec![0.0; nt];
    for (i, ri) in r.iter().enumerate() {
        for m in 0..nt - i {
            gser[m + i] += ri * hser[m];
        }
    }
    let pref = (PI * b).sin() / PI;
    let series: Vec<f64> = (0..SERIES_TERMS / 2)
        .map(|j| 2.0 * pref * gser.get(2 * j + 5).copied().unwrap_or(0.0))
        .collect();
    let scale = bt.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let dilute = edge_leading.abs() <= 1e-8 * scale.max(1.0);
    let phase = if dilute {
        CriticalPhase::Dilute
    } else {
        CriticalPhase::Dense
    };
    let a = if dilute { 2.0 + b } else { 2.0 - b };
    Ok(NonGenericDensity {
        point: *point,
        gamma,
        edge_leading,
        edge_subleading,
        phase,
        a,
        r_at_plus,
        r_at_minus,
        series,
        pole_residue: [gser[1], gser[3]],
    })
}

impl NonGenericDensity {
    /// ρ(γu) for u ∈ [0, 1], with `s` = 1 − u supplied exactly.
    fn rho_half(&self, u: f64, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if u < SERIES_RADIUS {
            self.rho_series(u)
        } else {
            self.rho_closed(u, s)
        }
    }

    fn rho_series(&self, u: f64) -> f64 {
        let u2 = u * u;
        self.series.iter().rev().fold(0.0, |acc, c| acc * u2 + c)
    }

    fn rho_closed(&self, u: f64, s: f64) -> f64 {
        let b = self.point.b;
        let p = 2.0 - s;
        let rp = poly_eval(&self.r_at_plus, s);
        let rm = poly_eval(&self.r_at_minus, s);
        let first = rp * s.powf(1.0 + b) * p.powf(1.0 - b);
        let second = rm * p.powf(1.0 + b) * s.powf(1.0 - b);
        (PI * b).sin() / PI * (first - second) / u.powi(5)
    }

    /// ρ at ξ = γu, u ∈ [−1, 1].
    pub fn rho_u(&self, u: f64) -> f64 {
        let a = u.abs();
        if a >= 1.0 {
            return 0.0;
        }
        self.rho_half(a, 1.0 - a)
    }

    pub fn rho(&self, xi: f64) -> f64 {
        self.rho_u(xi / self.gamma)
    }

    /// ρ on `grid` equispaced points of [−γ, γ].
    pub fn density(&self, grid: usize) -> SpectralDensity {
        let m = grid.max(3);
        let values = (0..m)
            .map(|i| {
                let u = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
                (self.gamma * u, self.rho_u(u))
            })
            .collect();
        SpectralDensity {
            gamma: self.gamma,
            values,
        }
    }

    /// ∫ u^{2k} ρ(γu) du over [−1, 1].
    fn scaled_moment(&self, k: usize) -> f64 {
        2.0 * tanh_sinh(
            |u, _, s| u.powi(2 * k as i32) * self.rho_half(u, s),
            0.0,
            1.0,
            1e-14,
        )
    }

    pub fn normalization(&self) -> f64 {
        self.gamma * self.scaled_moment(0)
    }

    /// F_k / γ^{2k} for k = 0..=kmax.
    pub fn scaled_moments(&self, kmax: usize) -> Vec<f64> {
        (0..=kmax)
            .into_par_iter()
            .map(|k| self.gamma * self.scaled_moment(k))
            .collect()
    }

    /// Local exponent of ρ at the edge, fitted on 1 − |ξ|/γ ∈ [1e−9, 1e−6].
    pub fn edge_exponent(&self) -> f64 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..=30)
            .map(|i| {
                let s = 10f64.powf(-9.0 + 3.0 * i as f64 / 30.0);
                (s.ln(), self.rho_half(1.0 - s, s).abs().ln())
            })
            .unzip();
        fit_line(&xs, &ys).0
    }

    /// Residuals of the resolvent functional equation at `samples` points of
    /// the cut, with W reconstructed from ρ by Cauchy transforms.
    pub fn functional_equation_residuals(&self, samples: usize) -> Vec<(f64, f64)> {
        let (n, g, h1) = (self.point.n, self.point.g, self.point.h1);
        let gamma = self.gamma;
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let u0 = -0.95 + 1.9 * (i as f64 + 0.5) / samples as f64;
                let r0 = self.rho_u(u0);
                let f = |u: f64| (self.rho_u(u) - r0) / (u0 - u);
                let pv = tanh_sinh(|u, _, _| f(u), -1.0, u0, 1e-13)
                    + tanh_sinh(|u, _, _| f(u), u0, 1.0, 1e-13)
                    + r0 * ((1.0 + u0) / (1.0 - u0)).ln();
                let xi = gamma * u0;
                let x = 1.0 / (h1 * xi);
                let w_out = tanh_sinh(
                    |u, _, s| gamma * self.rho_half(u, s) / (x - gamma * u),
                    0.0,
                    1.0,
                    1e-13,
                ) + tanh_sinh(
                    |u, _, s| gamma * self.rho_half(u, s) / (x + gamma * u),
                    0.0,
                    1.0,
                    1e-13,
                );
                let rhs = xi - g * xi.powi(3) + n / xi - n / (h1 * xi * xi) * w_out;
                (xi, 2.0 * pv - rhs)
            })
            .collect()
    }
}

/// Exponent a from a log-log fit of F_k/γ^{2k} over k ∈ [kmax/2, kmax].
pub fn moment_exponent(scaled: &[f64]) -> f64 {
    let kmax = scaled.len() - 1;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (kmax / 2..=kmax)
        .map(|k| ((k as f64).ln(), scaled[k].ln()))
        .unzip();
    -fit_line(&xs, &ys).0
}

// ---------------------------------------------------------------------------
// General (τ < 1) solution

/// The map between the cut plane and the v-strip.
#[derive(Clone, Copy, Debug)]
pub struct Uniformization {
    pub h1: f64,
    pub gamma: f64,
    pub tau: f64,
    pub t: ModularParam,
    /// K(τ)
    pub k: f64,
    pub v: C,
    pub xi_m1: C,
    pub xi_1: C,
    t4: ModularParam,
}

impl Uniformization {
    pub fn new(h1: f64, tau: f64) -> Result<Self, RigidError> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(RigidError::TauOutOfRange(tau));
        }
        if h1 <= 0.0 {
            return Err(RigidError::InvalidPoint(format!("h1 = {h1}")));
        }
        let gamma = (tau / h1).sqrt();
        let t = elliptic::t_from_tau(tau)?;
        let k = elliptic::elliptic_k(tau)?;
        let v = C::new(0.0, 1.0 / (4.0 * h1 * gamma * k));
        let xi_m1 = C::i() * v;
        let xi_1 = (gamma * gamma + 1.0 / (h1 * gamma).powi(2)) / (6.0 * xi_m1);
        let t4 = ModularParam::new(4.0 * t.t)?;
        Ok(Uniformization {
            h1,
            gamma,
            tau,
            t,
            k,
            v,
            xi_m1,
            xi_1,
            t4,
        })
    }

    /// ξ(v) = −h1^{−1/2} θ2(2T − 2v|4T)/θ3(2T − 2v|4T).
    pub fn xi(&self, v: C) -> C {
        let z = 2.0 * (self.t.t - v);
        -theta(2, z, &self.t4) / theta(3, z, &self.t4) / self.h1.sqrt()
    }

    /// ξ on the cut, as a function of w = T − v ∈ [0, 1/2].
    pub fn xi_on_cut(&self, w: f64) -> f64 {
        let kc2 = (1.0 - self.tau) * (1.0 + self.tau);
        let (_, cn, dn) = jacobi_sn_cn_dn(4.0 * self.k * w, kc2);
        -self.gamma * cn / dn
    }

    /// dξ/dw on the cut.
    pub fn dxi_dw(&self, w: f64) -> f64 {
        let kc2 = (1.0 - self.tau) * (1.0 + self.tau);
        let (sn, _, dn) = jacobi_sn_cn_dn(4.0 * self.k * w, kc2);
        4.0 * self.k * self.gamma * kc2 * sn / (dn * dn)
    }

    /// w(ξ) on the cut by quadrature of dw/dξ.
    pub fn w_on_cut_quadrature(&self, xi: f64) -> f64 {
        let (g, x) = (self.gamma, 1.0 / (self.h1 * self.gamma));
        let pref = 1.0 / (4.0 * self.h1 * self.gamma * self.k);
        let f = |eta: f64, dl: f64, dr: f64| {
            // γ² − η² = (γ + η)(γ − η); γ + η = dl for the lower limit −γ
            let gp = dl;
            let gm = g - eta;
            let _ = dr;
            pref / (gp * gm * (x - eta) * (x + eta)).sqrt()
        };
        tanh_sinh(f, -g, xi, 1e-14)
    }
}

/// Coefficients (α, β) of 𝒟 = β∂⁴ + α∂² + 1.
fn operator_coefficients(p: &PhasePoint, u: &Uniformization) -> (f64, f64) {
    let xi2 = u.xi_m1.re * u.xi_m1.re;
    let alpha = xi2 / (2.0 * (2.0 - p.n))
        * (-1.0 + p.g / 3.0 * (u.gamma * u.gamma + 1.0 / (p.h1 * u.gamma).powi(2)));
    let beta = p.g * xi2 * xi2 / (24.0 * (2.0 - p.n));
    (alpha, beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ResolventClass {
    Subcritical,
    GenericCritical,
}

/// Solution of the rigid model at a given τ = h1γ².
#[derive(Clone, Debug)]
pub struct RigidResolvent {
    pub point: PhasePoint,
    pub unif: Uniformization,
    pub alpha: f64,
    pub beta: f64,
    /// Z_0, Z_2, Z_4, Z_6
    pub z: [f64; 4],
    zeta: ZetaBParams,
}

impl RigidResolvent {
    pub fn at_tau(point: &PhasePoint, tau: f64) -> Result<Self, RigidError> {
        if !(point.n > 0.0 && point.n < 2.0) {
            return Err(RigidError::InvalidPoint(format!(
                "n = {} outside (0, 2)",
                point.n
            )));
        }
        let unif = Uniformization::new(point.h1, tau)?;
        let (alpha, beta) = operator_coefficients(point, &unif);
        let q = (-PI * unif.t.t.im).exp();
        let ms = ModeSums::<f64>::new(point.n, q);
        let zeta = ZetaBParams::new(point.b, unif.t)?;
        Ok(RigidResolvent {
            point: *point,
            unif,
            alpha,
            beta,
            z: ms.z,
            zeta,
        })
    }

    pub fn tau(&self) -> f64 {
        self.unif.tau
    }

    pub fn gamma(&self) -> f64 {
        self.unif.gamma
    }

    /// R(1) = γ²/4.
    pub fn r1(&self) -> f64 {
        0.25 * self.unif.gamma * self.unif.gamma
    }

    /// w⁰ coefficient of 𝒟{…}/2; vanishes at the physical τ.
    pub fn w0_coefficient(&self) -> f64 {
        self.z[0] + self.alpha * self.z[1] + self.beta * self.z[2]
    }

    /// w² coefficient of 𝒟{…}·(2!/2)⁻¹; vanishes in addition on the generic
    /// critical line.
    pub fn w2_coefficient(&self) -> f64 {
        self.z[1] + self.alpha * self.z[2] + self.beta * self.z[3]
    }

    pub fn classification(&self) -> ResolventClass {
        let scale =
            self.z[1].abs() + (self.alpha * self.z[2]).abs() + (self.beta * self.z[3]).abs();
        if self.w2_coefficient().abs() <= 1e-7 * scale {
            ResolventClass::GenericCritical
        } else {
            ResolventClass::Subcritical
        }
    }

    /// 𝒟 applied to ζ_b(w − ¼) + ζ_b(w + ¼) + ζ_b(−w + ¼) + ζ_b(−w − ¼).
    fn operator_sum(&self, w: f64) -> f64 {
        let abs_t = self.unif.t.t.im;
        let mut acc = 0.0;
        for x in [w - 0.25, w + 0.25] {
            let a = zeta_b_regular_real_derivatives(x, self.point.b, abs_t, 4);
            let bm = zeta_b_regular_real_derivatives(-x, self.point.b, abs_t, 4);
            acc += (a[0] + bm[0]) + self.alpha * (a[2] + bm[2]) + self.beta * (a[4] + bm[4]);
        }
        acc
    }

    /// ρ(ξ(w)) dξ/dw on w ∈ [0, 1/2].
    pub fn measure(&self, w: f64) -> f64 {
        let n = self.point.n;
        -((2.0 - n) / (2.0 + n)).sqrt() / (2.0 * PI) * self.operator_sum(w)
    }

    /// (ξ, ρ(ξ)) at the cut point labelled by w.
    pub fn density_at(&self, w: f64) -> (f64, f64) {
        let d = self.unif.dxi_dw(w);
        let rho = if d == 0.0 { 0.0 } else { self.measure(w) / d };
        (self.unif.xi_on_cut(w), rho)
    }

    pub fn density(&self, grid: usize) -> SpectralDensity {
        let m = grid.max(3);
        let values = (0..m)
            .map(|i| {
                let w = 0.5 * i as f64 / (m - 1) as f64;
                if i == 0 || i == m - 1 {
                    (self.unif.xi_on_cut(w), 0.0)
                } else {
                    self.density_at(w)
                }
            })
            .collect();
        SpectralDensity {
            gamma: self.unif.gamma,
            values,
        }
    }

    /// ∫ ξ^{2k} ρ dξ / γ^{2k}.
    fn scaled_moment(&self, k: usize) -> f64 {
        let g = self.unif.gamma;
        2.0 * tanh_sinh(
            |w, _, _| self.measure(w) * (self.unif.xi_on_cut(w) / g).powi(2 * k as i32),
            0.0,
            0.25,
            1e-13,
        )
    }

    pub fn normalization(&self) -> f64 {
        self.scaled_moment(0)
    }

    /// F_k / γ^{2k} for k = 0..=kmax.
    pub fn scaled_moments(&self, kmax: usize) -> Vec<f64> {
        (0..=kmax)
            .into_par_iter()
            .map(|k| self.scaled_moment(k))
            .collect()
    }

    /// Local exponent of ρ at ξ → −γ, fitted on w ∈ [1e−4, 1e−3].
    pub fn edge_exponent(&self) -> f64 {
        let g = self.unif.gamma;
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..=20)
            .map(|i| {
                let w = 10f64.powf(-4.0 + i as f64 / 20.0);
                let (xi, rho) = self.density_at(w);
                // ξ + γ from the Jacobi form without cancellation
                let kc2 = (1.0 - self.unif.tau) * (1.0 + self.unif.tau);
                let (sn, cn, dn) = jacobi_sn_cn_dn(4.0 * self.unif.k * w, kc2);
                let gap = g * (dn - cn) / dn;
                let gap = if gap > 0.0 { gap } else { xi + g };
                let _ = sn;
                (gap.ln(), rho.abs().ln())
            })
            .unzip();
        fit_line(&xs, &ys).0
    }

    /// ϖ(v) = W_hom(ξ(v)) ξ'(v) for complex v.
    pub fn varpi(&self, v: C) -> Result<C, RigidError> {
        let q = C::new(0.25, 0.0);
        let mut acc = C::new(0.0, 0.0);
        for (arg, sign) in [(v - q, 1.0), (v + q, 1.0), (-v + q, -1.0), (-v - q, -1.0)] {
            let f0 = elliptic::zeta_b(arg, &self.zeta)?;
            let f2 = zeta_b_derivative(arg, &self.zeta, 2)?;
            let f4 = zeta_b_derivative(arg, &self.zeta, 4)?;
            acc += sign * (f0 + self.alpha * f2 + self.beta * f4);
        }
        Ok(-acc / (2.0 + self.point.n))
    }

    /// Residuals of the resolvent functional equation at `samples` cut
    /// points, with W reconstructed from the density by Cauchy transforms.
    pub fn functional_equation_residuals(&self, samples: usize) -> Vec<(f64, f64)> {
        let (n, g, h1) = (self.point.n, self.point.g, self.point.h1);
        let gamma = self.unif.gamma;
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let w0 = 0.5 * (i as f64 + 0.5) / samples as f64;
                let (xi0, rho0) = self.density_at(w0);
                let f = |w: f64| {
                    let xi = self.unif.xi_on_cut(w);
                    (self.measure(w) - rho0 * self.unif.dxi_dw(w)) / (xi0 - xi)
                };
                let pv = tanh_sinh(|w, _, _| f(w), 0.0, w0, 1e-13)
                    + tanh_sinh(|w, _, _| f(w), w0, 0.5, 1e-13)
                    + rho0 * ((gamma + xi0) / (gamma - xi0)).ln();
                let x = 1.0 / (h1 * xi0);
                let w_out = tanh_sinh(
                    |w, _, _| self.measure(w) / (x - self.unif.xi_on_cut(w)),
                    0.0,
                    0.5,
                    1e-13,
                );
                let rhs = xi0 - g * xi0.powi(3) + n / xi0 - n / (h1 * xi0 * xi0) * w_out;
                (xi0, 2.0 * pv - rhs)
            })
            .collect()
    }
}

fn w0_at(point: &PhasePoint, tau: f64) -> f64 {
    match RigidResolvent::at_tau(point, tau) {
        Ok(r) => r.w0_coefficient() / r.z[0].abs(),
        Err(_) => f64::NAN,
    }
}

/// Solution at a point of the well-defined region: τ is the smallest root of
/// the w⁰ condition.
pub fn general_resolvent(point: &PhasePoint, tol: f64) -> Result<RigidResolvent, RigidError> {
    if !(point.n > 0.0 && point.n < 2.0) || point.h1 <= 0.0 {
        return Err(RigidError::InvalidPoint(format!(
            "n = {}, h1 = {}",
            point.n, point.h1
        )));
    }
    let mut grid: Vec<f64> = (1..=40)
        .map(|i| 1e-4 * 10f64.powf(3.0 * i as f64 / 40.0))
        .collect();
    grid.extend((1..400).map(|i| 0.1 + 0.9 * i as f64 / 400.0));
    grid.extend([0.999, 0.9999, 0.99999, 0.999999]);
    let mut prev = (grid[0], w0_at(point, grid[0]));
    for &t in &grid[1..] {
        let val = w0_at(point, t);
        if prev.1.is_finite() && val.is_finite() && prev.1 * val <= 0.0 {
            let tau = brent(|x| w0_at(point, x), prev.0, t, tol.max(1e-16))
                .ok_or_else(|| RigidError::Bracket(format!("Brent failed on [{}, {t}]", prev.0)))?;
            return RigidResolvent::at_tau(point, tau);
        }
        prev = (t, val);
    }
    Err(RigidError::Bracket(format!(
        "no sign change of the w⁰ condition for {point:?}"
    )))
}

// ---------------------------------------------------------------------------
// Generic critical line

/// (g, h1) on the generic critical line at nome q = e^{−π|T|}.
pub fn generic_line_at_q(n: f64, q: f64) -> (f64, f64) {
    ModeSums::<f64>::new(n, q).generic_point(n)
}

/// Same as [`generic_line_at_q`] in double-double arithmetic.
pub fn generic_line_at_q_dd(n: f64, q: f64) -> (f64, f64) {
    use twofloat::TwoFloat;
    let nn = TwoFloat::from(n);
    let (g, h) = ModeSums::<TwoFloat>::new(nn, TwoFloat::from(q)).generic_point(nn);
    (g.hi() + g.lo(), h.hi() + h.lo())
}

/// Below this |T| (τ within ~1e−8 of 1) the direct mode sums lose all
/// significant digits even in double-double arithmetic.
pub const MIN_ABS_T: f64 = 0.035;

/// (g, h1) on the generic critical line at τ ∈ (0, 1).
pub fn generic_line(n: f64, tau: f64) -> Result<(f64, f64), RigidError> {
    if !(n > 0.0 && n < 2.0) {
        return Err(RigidError::InvalidPoint(format!("n = {n} outside (0, 2)")));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(RigidError::TauOutOfRange(tau));
    }
    let t = elliptic::t_from_tau(tau)?;
    if t.t.im < MIN_ABS_T {
        return Err(RigidError::TauOutOfRange(tau));
    }
    let q = (-PI * t.t.im).exp();
    Ok(if tau > 0.9 {
        generic_line_at_q_dd(n, q)
    } else {
        generic_line_at_q(n, q)
    })
}

// ---------------------------------------------------------------------------
// Phase diagram

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DiagramTag {
    #[serde(rename = "nongeneric-dense")]
    NongenericDense,
    #[serde(rename = "dilute-endpoint")]
    DiluteEndpoint,
    #[serde(rename = "generic")]
    Generic,
}

impl DiagramTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiagramTag::NongenericDense => "nongeneric-dense",
            DiagramTag::DiluteEndpoint => "dilute-endpoint",
            DiagramTag::Generic => "generic",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiagramPoint {
    pub h1: f64,
    pub g: f64,
    pub tag: DiagramTag,
}

/// Derivatives of g(h1) on both sides of the junction at (g*, h1*).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JunctionDiagnostics {
    pub slope_nongeneric: f64,
    pub slope_generic: f64,
    pub curvature_nongeneric: f64,
    pub curvature_generic: f64,
    pub third_nongeneric: f64,
    pub third_generic: f64,
    /// Coefficient of |δ|^{1/b} in (g − g*)/g*, δ = (h1 − h1*)/h1*: fitted on
    /// the generic side and as predicted by the local expansion.
    pub singular_fitted: f64,
    pub singular_predicted: f64,
    pub fit_rms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalLineSample {
    pub n: f64,
    pub b: f64,
    pub endpoint: (f64, f64),
    pub points: Vec<DiagramPoint>,
    pub junction: JunctionDiagnostics,
}

impl CriticalLineSample {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h1,g,tag\n");
        for p in &self.points {
            s.push_str(&format!("{:.17e},{:.17e},{}\n", p.h1, p.g, p.tag.as_str()));
        }
        s
    }
}

/// Generic-line point at a prescribed relative distance δ = (h1 − h1*)/h1* < 0
/// from the tip, located by bisection in ln|T|.
fn generic_point_at_delta(n: f64, delta: f64) -> Option<(f64, f64)> {
    let (_, hs) = nongeneric_endpoint(n);
    let target = hs * (1.0 + delta);
    let h_at = |ln_t: f64| {
        let q = (-PI * ln_t.exp()).exp();
        generic_line_at_q_dd(n, q).1 - target
    };
    let (lo, hi) = ((0.04f64).ln(), (2.0f64).ln());
    if h_at(lo) < 0.0 || h_at(hi) > 0.0 {
        return None;
    }
    let root = brent(h_at, lo, hi, 1e-15)?;
    let q = (-PI * root.exp()).exp();
    Some(generic_line_at_q_dd(n, q))
}

fn junction(n: f64) -> JunctionDiagnostics {
    junction_fit(n, JUNCTION_WINDOW.0, JUNCTION_WINDOW.1)
}

/// Range of −δ used for the generic-side fit.
pub const JUNCTION_WINDOW: (f64, f64) = (5e-3, 5e-5);

/// Least-squares fit of (g − g*)/g* against δ, |δ|^{1/b} and δ² ... on the
/// generic side, for −δ between `dmax` and `dmin`.
pub fn junction_fit(n: f64, dmax: f64, dmin: f64) -> JunctionDiagnostics {
    let b = b_of_n(n);
    let (gs, hs) = nongeneric_endpoint(n);
    let p = 1.0 / b;
    let deltas: Vec<f64> = (0..24)
        .map(|i| -dmax * (dmin / dmax).powf(i as f64 / 23.0))
        .collect();
    let pts: Vec<(f64, f64)> = deltas
        .par_iter()
        .filter_map(|&d| generic_point_at_delta(n, d))
        .map(|(g, h)| ((h - hs) / hs, (g - gs) / gs))
        .collect();
    let mut a = nalgebra::DMatrix::<f64>::zeros(pts.len(), 4);
    let mut y = nalgebra::DVector::<f64>::zeros(pts.len());
    for (i, (d, v)) in pts.iter().enumerate() {
        a[(i, 0)] = *d;
        a[(i, 1)] = d * d;
        a[(i, 2)] = d.abs().powf(p);
        a[(i, 3)] = d.abs().powf(p + 1.0);
        y[i] = *v;
    }
    if pts.len() < 4 {
        let nan = f64::NAN;
        return JunctionDiagnostics {
            slope_nongeneric: nan,
            slope_generic: nan,
            curvature_nongeneric: nan,
            curvature_generic: nan,
            third_nongeneric: 0.0,
            third_generic: nan,
            singular_fitted: nan,
            singular_predicted: nan,
            fit_rms: nan,
        };
    }
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .unwrap_or_else(|_| nalgebra::DVector::zeros(4));
    let fit_rms = ((&a * &coef - &y).norm_squared() / pts.len().max(1) as f64).sqrt();
    // relative to absolute derivatives
    let s1 = gs / hs;
    let s2 = gs / (hs * hs);
    let s3 = gs / hs.powi(3);
    let third_generic = if (p - 3.0).abs() < 1e-9 {
        -6.0 * coef[2] * s3
    } else {
        f64::NAN
    };
    let x = (2.0 - b).powi(2) * (1.0 - b).powi(2) * (3.0 - 2.0 * b + b * b)
        / (4.0 * b * (1.0 + b).powi(2) * (2.0 + b * b));
    let singular_predicted = 64.0 * (1.0 + b) / ((1.0 - b) * (2.0 + b * b)) * x.powf(p);
    JunctionDiagnostics {
        slope_nongeneric: 3.0 / (2.0 + b * b) * (1.0 - (2.0 - n) * hs / (b * b)),
        slope_generic: coef[0] * s1,
        curvature_nongeneric: -3.0 * (2.0 - n) / ((2.0 + b * b) * b * b),
        curvature_generic: 2.0 * coef[1] * s2,
        third_nongeneric: 0.0,
        third_generic,
        singular_fitted: coef[2],
        singular_predicted,
        fit_rms,
    }
}

/// Non-generic arc from g = 0 to the tip, then the generic line from the tip
/// down to h1 → 0, with junction diagnostics.
pub fn assemble_diagram(n: f64, samples: usize) -> Result<CriticalLineSample, RigidError> {
    if !(n > 0.0 && n < 2.0) {
        return Err(RigidError::InvalidPoint(format!("n = {n} outside (0, 2)")));
    }
    let samples = samples.max(2);
    let b = b_of_n(n);
    let (gs, hs) = nongeneric_endpoint(n);
    let h0 = nongeneric_start(n);
    let mut points: Vec<DiagramPoint> = (0..samples)
        .map(|i| {
            let h1 = h0 + (hs - h0) * i as f64 / (samples - 1) as f64;
            if i == samples - 1 {
                DiagramPoint {
                    h1: hs,
                    g: gs,
                    tag: DiagramTag::DiluteEndpoint,
                }
            } else {
                DiagramPoint {
                    h1,
                    g: nongeneric_g(n, h1).max(0.0),
                    tag: DiagramTag::NongenericDense,
                }
            }
        })
        .collect();
    // generic side: |T| from small (τ → 1) to large (τ → 0)
    let generic: Vec<DiagramPoint> = (1..=samples)
        .into_par_iter()
        .map(|i| {
            let abs_t = 0.04 * (75.0f64).powf(i as f64 / samples as f64);
            let q = (-PI * abs_t).exp();
            let (g, h1) = generic_line_at_q_dd(n, q);
            DiagramPoint {
                h1,
                g,
                tag: DiagramTag::Generic,
            }
        })
        .collect();
    points.extend(generic);
    Ok(CriticalLineSample {
        n,
        b,
        endpoint: (gs, hs),
        points,
        junction: junction(n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn w_part_solves_the_cut_free_equation() {
        let p = PhasePoint::new(1.2, 0.04, 0.07).unwrap();
        for &x in &[0.3, 0.9, -1.4, 2.5] {
            let xi = C::new(x, 0.0);
            let lhs = 2.0 * w_part(xi, &p).unwrap()
                + p.n / (p.h1 * x * x) * w_part(1.0 / (p.h1 * xi), &p).unwrap();
            let rhs = x - p.g * x.powi(3) + p.n / x;
            assert!(
                (lhs.re - rhs).abs() < 1e-9 * (1.0 + rhs.abs()),
                "{x}: {lhs} vs {rhs}"
            );
            let odd = w_part(-xi, &p).unwrap() + w_part(xi, &p).unwrap();
            assert!(odd.norm() < 1e-12);
        }
        assert!(w_part(C::new(0.0, 0.0), &p).is_err());
    }

    #[test]
    fn endpoint_values() {
        let (g, h) = nongeneric_endpoint(1.0);
        assert!((g - 75.0 / 968.0).abs() < 1e-14 && (h - 25.0 / 198.0).abs() < 1e-14);
        let (g, h) = nongeneric_endpoint(1e-12);
        assert!((g - 1.0 / 12.0).abs() < 1e-10 && (h - 0.125).abs() < 1e-10);
        // the tip lies on both the line and the positivity boundary
        for &n in &[0.3, 1.0, 1.7] {
            let (g, h) = nongeneric_endpoint(n);
            assert!((nongeneric_g(n, h) - g).abs() < 1e-14);
            assert!((positivity_bound(n, h) - g).abs() < 1e-14);
        }
        assert!(nongeneric_line(1.0, 0.1).is_err());
        assert!(nongeneric_line(1.0, 0.3).is_err());
    }

    #[test]
    fn exact_expansion_conditions() {
        for (n, b) in [(rat(1, 1), rat(1, 3)), (rat(0, 1), rat(1, 2))] {
            for gamma in [rat(5, 2), rat(13, 5), rat(3, 1)] {
                let res = nongeneric_expansion_residuals(&n, &b, &gamma);
                for (i, r) in res.iter().take(5).enumerate() {
                    assert!(r.is_zero(), "n={n} γ={gamma} condition {i}: {r}");
                }
            }
        }
    }

    #[test]
    fn jacobi_identities() {
        let kc2 = 0.3;
        let k = elliptic::elliptic_k((1.0f64 - kc2).sqrt()).unwrap();
        let (sn, cn, dn) = jacobi_sn_cn_dn(k, kc2);
        assert!((sn - 1.0).abs() < 1e-13 && cn.abs() < 1e-7 && (dn - kc2.sqrt()).abs() < 1e-13);
        for &u in &[0.1, 0.7, 1.9, -2.3] {
            let (sn, cn, dn) = jacobi_sn_cn_dn(u, kc2);
            assert!((sn * sn + cn * cn - 1.0).abs() < 1e-14);
            assert!(((1.0 - kc2) * sn * sn + dn * dn - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_density_is_normalised_and_positive() {
        let n = 1.0;
        let h1 = 0.18;
        let p = PhasePoint::new(n, nongeneric_g(n, h1), h1).unwrap();
        let d = critical_density(&p).unwrap();
        assert_eq!(d.phase, CriticalPhase::Dense);
        assert!(d.edge_leading > 0.0);
        assert!(
            d.pole_residue.iter().all(|r| r.abs() < 1e-12),
            "{:?}",
            d.pole_residue
        );
        assert!(
            (d.normalization() - 1.0).abs() < 1e-10,
            "{}",
            d.normalization()
        );
        for (_, r) in d.density(401).values {
            assert!(r >= 0.0);
        }
        // series and closed form agree where both are used
        for &u in &[0.3, 0.45, 0.5, 0.6] {
            let (s, c) = (d.rho_series(u), d.rho_closed(u, 1.0 - u));
            assert!((s - c).abs() < 1e-12 * s.abs(), "{u}: {s} vs {c}");
        }
    }

    #[test]
    fn uniformization_matches_jacobi_form() {
        let u = Uniformization::new(0.05, 0.3).unwrap();
        for &w in &[0.01, 0.13, 0.25, 0.37, 0.49] {
            let v = u.t.t - C::new(w, 0.0);
            let a = u.xi(v);
            let b = u.xi_on_cut(w);
            assert!(
                (a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12,
                "{w}: {a} vs {b}"
            );
            let back = u.w_on_cut_quadrature(b);
            assert!((back - w).abs() < 1e-10, "{w} vs {back}");
        }
    }

    #[test]
    fn subcritical_solution_at_reference_point() {
        let p = PhasePoint::new(1.0, 0.05, 0.05).unwrap();
        let r = general_resolvent(&p, 1e-15).unwrap();
        assert!((r.r1() - 1.2308147502250897).abs() < 1e-8, "{}", r.r1());
        assert!(
            (r.normalization() - 1.0).abs() < 1e-10,
            "{}",
            r.normalization()
        );
        assert_eq!(r.classification(), ResolventClass::Subcritical);
    }

    /// Laurent coefficients c_{−1}, c_{−3}, c_{−5} of ϖ at `at`.
    fn principal_parts(r: &RigidResolvent, at: C) -> [C; 3] {
        let rad = 0.25 * r.unif.t.t.im.min(0.5);
        let npts = 64;
        let mut out = [C::new(0.0, 0.0); 3];
        for j in 0..npts {
            let e = C::from_polar(1.0, 2.0 * PI * j as f64 / npts as f64);
            let f = r.varpi(at + rad * e).unwrap();
            for (i, slot) in out.iter_mut().enumerate() {
                *slot += f * (rad * e).powi(2 * i as i32 + 1) / npts as f64;
            }
        }
        out
    }

    #[test]
    fn varpi_principal_parts_and_quasi_periodicity() {
        let p = PhasePoint::new(1.0, 0.05, 0.05).unwrap();
        let r = general_resolvent(&p, 1e-15).unwrap();
        let u = r.unif;
        let (n, g, h1, gam) = (p.n, p.g, p.h1, u.gamma);
        let xi2 = u.xi_m1.re * u.xi_m1.re;
        let d = 4.0 - n * n;
        let expected = [
            -2.0 / (2.0 + n),
            2.0 * xi2 / d * (1.0 - g / 3.0 * (gam * gam + 1.0 / (h1 * gam).powi(2))),
            -2.0 * g * xi2 * xi2 / d,
        ];
        let at_inf = principal_parts(&r, C::new(-0.25, 0.0));
        let at_zero = principal_parts(&r, u.t.t - 0.25);
        for i in 0..3 {
            assert!(
                (at_inf[i] - expected[i]).norm() < 1e-8,
                "{i}: {} vs {}",
                at_inf[i],
                expected[i]
            );
            assert!(
                (at_zero[i] - 0.5 * n * expected[i]).norm() < 1e-8,
                "{i}: {}",
                at_zero[i]
            );
        }
        for &v in &[C::new(0.1, 0.3 * u.t.t.im), C::new(-0.37, 0.8 * u.t.t.im)] {
            let t = u.t.t;
            let qp =
                r.varpi(v - 2.0 * t).unwrap() - n * r.varpi(v - t).unwrap() + r.varpi(v).unwrap();
            assert!(qp.norm() < 1e-8, "{qp}");
        }
    }

    #[test]
    fn xi_symmetry_table() {
        let u = Uniformization::new(0.05, 0.25).unwrap();
        for &v in &[C::new(0.13, 0.07), C::new(-0.31, 0.2), C::new(0.42, 0.35)] {
            let x = u.xi(v);
            assert!((u.xi(v + 1.0) - x).norm() < 1e-10);
            assert!((u.xi(-v) - x).norm() < 1e-10);
            assert!((u.xi(v + 0.5) + x).norm() < 1e-10);
            assert!((u.xi(u.t.t - v) - 1.0 / (u.h1 * x)).norm() < 1e-10);
        }
        // pole at v∞ with residue Ξ₋₁
        let eps = 1e-5;
        let r = u.xi(C::new(-0.25 + eps, 0.0)) * eps;
        assert!((r - u.xi_m1).norm() < 1e-8 * u.xi_m1.norm());
        assert!(
            (u.xi_1 * u.xi_m1).re - (u.gamma.powi(2) + 1.0 / (u.h1 * u.gamma).powi(2)) / 6.0
                < 1e-12
        );
    }

    #[test]
    fn densities_solve_the_functional_equation() {
        let n = 1.0;
        let h1 = 0.18;
        let d = critical_density(&PhasePoint::new(n, nongeneric_g(n, h1), h1).unwrap()).unwrap();
        assert!(d
            .functional_equation_residuals(50)
            .iter()
            .all(|r| r.1.abs() < 1e-6));
        let r = general_resolvent(&PhasePoint::new(n, 0.05, 0.05).unwrap(), 1e-15).unwrap();
        assert!(r
            .functional_equation_residuals(50)
            .iter()
            .all(|r| r.1.abs() < 1e-6));
    }

    #[test]
    fn dilute_endpoint_density() {
        let n = 1.0;
        let (g, h) = nongeneric_endpoint(n);
        let d = critical_density(&PhasePoint::new(n, g, h).unwrap()).unwrap();
        assert_eq!(d.phase, CriticalPhase::Dilute);
        assert!(d.edge_leading.abs() < 1e-8 && d.edge_subleading > 0.0);
        assert!((d.edge_exponent() - (1.0 + d.point.b)).abs() < 0.03 * (1.0 + d.point.b));
    }

    #[test]
    fn generic_line_small_nome() {
        for &n in &[0.5f64, 1.0, 1.5] {
            let mut prev: Option<(f64, f64)> = None;
            for &q in &[0.08f64, 0.04, 0.02] {
                use twofloat::TwoFloat as T;
                let (nn, qq) = (T::from(n), T::from(q));
                let (g, h) = ModeSums::<T>::new(nn, qq).generic_point(nn);
                let q2 = qq * qq;
                let q4 = q2 * q2;
                let ge = T::from(1.0) / 12.0 - nn * q4 / 18.0 + nn * (nn + 7.0) * q4 * q4 / 36.0;
                let he = q2 / 2.0 - (nn / 6.0 + 2.0) * q4 * q2;
                let (dg, dh) = (g - ge, h - he);
                let ratios = (
                    (dg.hi() + dg.lo()) / q.powi(12),
                    (dh.hi() + dh.lo()) / q.powi(10),
                );
                let (g, h) = (g.hi() + g.lo(), h.hi() + h.lo());
                assert!(
                    ratios.0.abs() < 10.0 && ratios.1.abs() < 20.0,
                    "{n} {q}: {ratios:?}"
                );
                if let Some(p) = prev {
                    assert!((ratios.1 - p.1).abs() < 0.1);
                }
                prev = Some(ratios);
                let slope = h / (1.5 * (2.0 / n).sqrt() * (1.0 / 12.0 - g).sqrt());
                if q <= 0.04 {
                    assert!((slope - 1.0).abs() < 0.01, "{slope}");
                }
            }
        }
    }

    #[test]
    fn junction_is_smooth_to_second_order() {
        let j = junction(1.0);
        assert!((j.slope_generic - j.slope_nongeneric).abs() < 1e-3 * j.slope_nongeneric.abs());
        assert!(
            (j.curvature_generic - j.curvature_nongeneric).abs()
                < 1e-2 * j.curvature_nongeneric.abs()
        );
        assert!(j.third_generic.abs() > 100.0);
        assert!(j.singular_fitted > 0.0 && j.singular_predicted > 0.0);
    }
}
