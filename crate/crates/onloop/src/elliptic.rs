//! Jacobi theta functions, complete elliptic integrals, the Weierstrass ℘
//! function and the quasi-periodic function ζ_b with period 1 and multiplier
//! e^{iπb} under v → v + T.
//!
//! Conventions: nome q = e^{iπT}, θ1(v|T) = 2 Σ (−1)^m q^{(m+½)²} sin((2m+1)πv).

use num_complex::Complex64;
use std::f64::consts::PI;
use std::ops::{Add, Div, Mul, Neg, Sub};
use thiserror::Error;

type C = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EllipticError {
    #[error("modular parameter must have positive imaginary part, got {0}")]
    BadModulus(C),
    #[error("argument {0} lies on the period lattice")]
    OnLattice(C),
    #[error("modulus {0} outside the admissible range")]
    OutOfRange(f64),
}

/// The half-period ratio T (Im T > 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModularParam {
    pub t: C,
}

impl ModularParam {
    pub fn new(t: C) -> Result<Self, EllipticError> {
        if !(t.im > 0.0) || !t.re.is_finite() || !t.im.is_finite() {
            return Err(EllipticError::BadModulus(t));
        }
        Ok(ModularParam { t })
    }

    /// Purely imaginary T = i·|T|.
    pub fn imaginary(abs_t: f64) -> Result<Self, EllipticError> {
        Self::new(C::new(0.0, abs_t))
    }

    pub fn q(&self) -> C {
        (C::i() * PI * self.t).exp()
    }

    /// Dual nome q' = e^{−iπ/T}.
    pub fn q_prime(&self) -> C {
        (-C::i() * PI / self.t).exp()
    }

    pub fn dual(&self) -> ModularParam {
        ModularParam { t: -1.0 / self.t }
    }

    fn use_dual(&self) -> bool {
        self.t.im < 0.5 && self.dual().t.im > self.t.im
    }
}

/// θ_j(v|T) and its first three v-derivatives from the defining series.
fn theta_direct(j: u8, v: C, t: C) -> [C; 4] {
    let shift = if j <= 2 { 0.5 } else { 0.0 };
    let ipi = C::i() * PI;
    let exponent = |m: i64| {
        let mm = m as f64 - shift;
        ipi * (mm * mm * t + 2.0 * mm * v)
    };
    let center = (shift - v.im / t.im).round() as i64;
    let peak = exponent(center).re;
    let mut acc = [C::new(0.0, 0.0); 4];
    let mut add = |m: i64| -> bool {
        let e = exponent(m);
        if e.re - peak < -60.0 {
            return false;
        }
        let sign = if (j == 1 || j == 4) && m.rem_euclid(2) == 1 {
            -1.0
        } else {
            1.0
        };
        let mut term = e.exp() * sign;
        if j == 1 {
            term *= C::i();
        }
        let factor = ipi * 2.0 * (m as f64 - shift);
        for slot in acc.iter_mut() {
            *slot += term;
            term *= factor;
        }
        true
    };
    add(center);
    let mut m = center + 1;
    while add(m) {
        m += 1;
    }
    let mut m = center - 1;
    while add(m) {
        m -= 1;
    }
    acc
}

fn modular_prefactor(v: C, t: C) -> C {
    (-C::i() * t).sqrt().inv() * (-C::i() * PI * v * v / t).exp()
}

/// Jacobi theta function θ_j(v|T), j ∈ 1..=4.
pub fn theta(j: u8, v: C, tp: &ModularParam) -> C {
    assert!((1..=4).contains(&j), "theta index must be 1..=4");
    if !tp.use_dual() {
        return theta_direct(j, v, tp.t)[0];
    }
    let d = tp.dual().t;
    let pre = modular_prefactor(v, tp.t);
    let w = v / tp.t;
    match j {
        1 => C::i() * pre * theta_direct(1, w, d)[0],
        2 => pre * theta_direct(4, w, d)[0],
        3 => pre * theta_direct(3, w, d)[0],
        _ => pre * theta_direct(2, w, d)[0],
    }
}

/// First three derivatives of ln θ1 at v.
pub fn ln_theta1_derivatives(v: C, tp: &ModularParam) -> [C; 3] {
    let raw = |v: C, t: C| {
        let th = theta_direct(1, v, t);
        let l1 = th[1] / th[0];
        let l2 = th[2] / th[0] - l1 * l1;
        let l3 = th[3] / th[0] - 3.0 * th[2] * th[1] / (th[0] * th[0]) + 2.0 * l1 * l1 * l1;
        [l1, l2, l3]
    };
    if !tp.use_dual() {
        return raw(v, tp.t);
    }
    let t = tp.t;
    let [d1, d2, d3] = raw(v / t, tp.dual().t);
    let ipi = C::i() * PI;
    [
        -2.0 * ipi * v / t + d1 / t,
        -2.0 * ipi / t + d2 / (t * t),
        d3 / (t * t * t),
    ]
}

/// θ1'(0|T).
pub fn theta1_prime_zero(tp: &ModularParam) -> C {
    if !tp.use_dual() {
        return theta_direct(1, C::new(0.0, 0.0), tp.t)[1];
    }
    let t = tp.t;
    C::i() * (-C::i() * t).sqrt().inv() * theta_direct(1, C::new(0.0, 0.0), tp.dual().t)[1] / t
}

/// θ1'''(0|T)/θ1'(0|T).
pub fn theta1_third_ratio(tp: &ModularParam) -> C {
    let raw = |t: C| {
        let th = theta_direct(1, C::new(0.0, 0.0), t);
        th[3] / th[1]
    };
    if !tp.use_dual() {
        return raw(tp.t);
    }
    let t = tp.t;
    raw(tp.dual().t) / (t * t) - 6.0 * C::i() * PI / t
}

fn lattice_distance(v: C, t: C) -> f64 {
    let m = (v.im / t.im).round();
    let w = v - m * t;
    let l = w.re.round();
    (w - l).norm()
}

fn check_off_lattice(v: C, t: C) -> Result<(), EllipticError> {
    if lattice_distance(v, t) < 1e-13 {
        Err(EllipticError::OnLattice(v))
    } else {
        Ok(())
    }
}

/// Weierstrass ℘(v|T) with periods 1 and T.
pub fn weierstrass_p(v: C, tp: &ModularParam) -> Result<C, EllipticError> {
    check_off_lattice(v, tp.t)?;
    let d = ln_theta1_derivatives(v, tp);
    Ok(-d[1] + theta1_third_ratio(tp) / 3.0)
}

/// ℘'(v|T).
pub fn weierstrass_p_prime(v: C, tp: &ModularParam) -> Result<C, EllipticError> {
    check_off_lattice(v, tp.t)?;
    Ok(-ln_theta1_derivatives(v, tp)[2])
}

/// Complete elliptic integral of the first kind, K(k) = ∫₀^{π/2} dφ/√(1 − k² sin²φ).
pub fn elliptic_k(k: f64) -> Result<f64, EllipticError> {
    if !(0.0..1.0).contains(&k) {
        return Err(EllipticError::OutOfRange(k));
    }
    Ok(PI / (2.0 * agm(1.0, (1.0 - k * k).sqrt())))
}

/// K'(k) = K(√(1 − k²)), evaluated without forming the complementary modulus.
pub fn elliptic_k_complement(k: f64) -> Result<f64, EllipticError> {
    if !(k > 0.0 && k <= 1.0) {
        return Err(EllipticError::OutOfRange(k));
    }
    Ok(PI / (2.0 * agm(1.0, k)))
}

pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    0.5 * (a + b)
}

/// K(m) and E(m) in the parameter m = k², given m and 1 − m separately so
/// that the logarithmic regime m → 1 keeps full relative accuracy.
pub fn complete_integrals(m: f64, one_minus_m: f64) -> (f64, f64) {
    let mut a = 1.0;
    let mut b = one_minus_m.sqrt();
    let mut c2 = m;
    let mut weight = 0.5;
    let mut sum = weight * c2;
    for _ in 0..64 {
        if c2 <= 1e-34 {
            break;
        }
        let an = 0.5 * (a + b);
        let cn = 0.5 * (a - b);
        b = (a * b).sqrt();
        a = an;
        c2 = cn * cn;
        weight *= 2.0;
        sum += weight * c2;
    }
    let k = PI / (2.0 * a);
    (k, k * (1.0 - sum))
}

/// τ = (θ2(0|4T)/θ3(0|4T))² for purely imaginary T.
pub fn tau_from_t(tp: &ModularParam) -> Result<f64, EllipticError> {
    if tp.t.re != 0.0 {
        return Err(EllipticError::BadModulus(tp.t));
    }
    let zero = C::new(0.0, 0.0);
    let four = ModularParam::new(4.0 * tp.t)?;
    if four.t.im >= 1.0 {
        let r = theta_direct(2, zero, four.t)[0] / theta_direct(3, zero, four.t)[0];
        Ok((r * r).re)
    } else {
        let d = four.dual().t;
        let r = theta_direct(4, zero, d)[0] / theta_direct(3, zero, d)[0];
        Ok((r * r).re)
    }
}

/// Inverse of [`tau_from_t`]: |T| = K'(τ)/(4K(τ)).
pub fn t_from_tau(tau: f64) -> Result<ModularParam, EllipticError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(EllipticError::OutOfRange(tau));
    }
    let abs_t = agm(1.0, ((1.0 - tau) * (1.0 + tau)).sqrt()) / (4.0 * agm(1.0, tau));
    ModularParam::imaginary(abs_t)
}

/// ζ_b together with its expansion coefficients at v = 0.
#[derive(Clone, Copy, Debug)]
pub struct ZetaBParams {
    pub b: f64,
    pub t: ModularParam,
    pub c0: C,
    pub c1: C,
}

impl ZetaBParams {
    pub fn new(b: f64, t: ModularParam) -> Result<Self, EllipticError> {
        if !(b > 0.0 && b < 1.0) {
            return Err(EllipticError::OutOfRange(b));
        }
        let at = C::new(-0.5 * b, 0.0);
        let d = ln_theta1_derivatives(at, &t);
        let c0 = d[0];
        let c1 = 0.5 * (d[1] + d[0] * d[0]) - theta1_third_ratio(&t) / 6.0;
        Ok(ZetaBParams { b, t, c0, c1 })
    }
}

/// ζ_b(v) from the theta ratio θ1(v − b/2)θ1'(0)/(θ1(v)θ1(−b/2)).
pub fn zeta_b(v: C, p: &ZetaBParams) -> Result<C, EllipticError> {
    check_off_lattice(v, p.t.t)?;
    let hb = C::new(0.5 * p.b, 0.0);
    if !p.t.use_dual() {
        let t = p.t.t;
        let zero = C::new(0.0, 0.0);
        return Ok(theta_direct(1, v - hb, t)[0] * theta_direct(1, zero, t)[1]
            / (theta_direct(1, v, t)[0] * theta_direct(1, -hb, t)[0]));
    }
    let t = p.t.t;
    let d = p.t.dual().t;
    let zero = C::new(0.0, 0.0);
    let ratio = theta_direct(1, (v - hb) / t, d)[0] * theta_direct(1, zero, d)[1]
        / (theta_direct(1, v / t, d)[0] * theta_direct(1, -hb / t, d)[0]);
    Ok((C::i() * PI * p.b * v / t).exp() / t * ratio)
}

/// k-th derivative of an analytic function by the trapezoidal Cauchy formula
/// on a circle of the given radius.
pub fn cauchy_derivative<F: Fn(C) -> C>(f: F, at: C, order: u32, radius: f64, points: usize) -> C {
    let mut acc = C::new(0.0, 0.0);
    for j in 0..points {
        let th = 2.0 * PI * j as f64 / points as f64;
        let e = C::from_polar(1.0, th);
        acc += f(at + radius * e) * C::from_polar(1.0, -(order as f64) * th);
    }
    let fact: f64 = (1..=order).map(|i| i as f64).product();
    acc * fact / (points as f64 * radius.powi(order as i32))
}

/// Radius used for Cauchy differentiation of ζ_b.
pub fn cauchy_radius(p: &ZetaBParams) -> f64 {
    p.t.t.norm().min(1.0) / 8.0
}

/// Derivative of ζ_b of the given order (≤ 6 in practice) at v.
pub fn zeta_b_derivative(v: C, p: &ZetaBParams, order: u32) -> Result<C, EllipticError> {
    let dist = lattice_distance(v, p.t.t);
    if dist < 1e-8 {
        return Err(EllipticError::OnLattice(v));
    }
    let r = cauchy_radius(p).min(0.5 * dist);
    if order == 0 {
        return zeta_b(v, p);
    }
    Ok(cauchy_derivative(
        |z| zeta_b(z, p).unwrap_or(C::new(f64::NAN, 0.0)),
        v,
        order,
        r,
        48,
    ))
}

/// Derivatives of π·cot(πx) of orders 0..=max_order.
fn pi_cot_derivatives(x: f64, max_order: usize) -> Vec<f64> {
    let y = 1.0 / (PI * x).tan();
    let mut poly = vec![0.0, 1.0];
    let mut out = Vec::with_capacity(max_order + 1);
    let mut scale = PI;
    for _ in 0..=max_order {
        let val = poly.iter().rev().fold(0.0, |acc, c| acc * y + c);
        out.push(scale * val);
        // d/dx P(cot πx) = −π (1 + y²) P'(y)
        let mut next = vec![0.0; poly.len() + 1];
        for (i, c) in poly.iter().enumerate().skip(1) {
            let dc = -(i as f64) * c;
            next[i - 1] += dc;
            next[i + 1] += dc;
        }
        poly = next;
        scale *= PI;
    }
    out
}

/// Derivatives of orders 0..=max_order of ζ_b at a real point x, for purely
/// imaginary T, from the Fourier representation
/// ζ_b(x) = π cot πx − π cot(πb/2) + 4π Σ_l Im(e^{2πilx} z_l/(1 − z_l)),
/// z_l = q^{2l} e^{−iπb}.
pub fn zeta_b_real_derivatives(x: f64, b: f64, abs_t: f64, max_order: usize) -> Vec<f64> {
    let cot = pi_cot_derivatives(x, max_order);
    let mut out = zeta_b_regular_real_derivatives(x, b, abs_t, max_order);
    for (o, c) in out.iter_mut().zip(cot) {
        *o += c;
    }
    out
}

/// Same as [`zeta_b_real_derivatives`] with the π cot πx term left out. The
/// remainder is smooth at x = 0.
pub fn zeta_b_regular_real_derivatives(x: f64, b: f64, abs_t: f64, max_order: usize) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    out[0] -= PI / (0.5 * PI * b).tan();
    let q2 = (-2.0 * PI * abs_t).exp();
    let phase = C::from_polar(1.0, -PI * b);
    let mut ql = 1.0;
    for l in 1.. {
        ql *= q2;
        let growth = (2.0 * PI * l as f64).powi(max_order as i32).max(1.0);
        if ql * growth < 1e-19 || l > 200_000 {
            break;
        }
        let z = phase * ql;
        let base = C::from_polar(1.0, 2.0 * PI * l as f64 * x) * z / (1.0 - z);
        let factor = C::new(0.0, 2.0 * PI * l as f64);
        let mut term = base;
        for slot in out.iter_mut() {
            *slot += 4.0 * PI * term.im;
            term *= factor;
        }
    }
    out
}

/// Jacobi sn, cn, dn of real argument u, given the complementary parameter
/// 1 − k² ∈ (0, 1], by descending Landen transformations.
pub fn jacobi_sn_cn_dn(u: f64, kc2: f64) -> (f64, f64, f64) {
    if kc2 == 0.0 {
        let cn = 1.0 / u.cosh();
        return (u.tanh(), cn, cn);
    }
    let mut em = [0.0; 16];
    let mut en = [0.0; 16];
    let mut a = 1.0;
    let mut emc = kc2;
    let mut c = 1.0;
    let mut l = 0;
    for i in 0..16 {
        l = i;
        em[i] = a;
        emc = emc.sqrt();
        en[i] = emc;
        c = 0.5 * (a + emc);
        if (a - emc).abs() <= 1e-15 * a {
            break;
        }
        emc *= a;
        a = c;
    }
    let u = c * u;
    let (mut sn, mut cn) = u.sin_cos();
    let mut dn = 1.0;
    if sn != 0.0 {
        let mut a = cn / sn;
        c *= a;
        for ii in (0..=l).rev() {
            let b = em[ii];
            a *= c;
            c *= dn;
            dn = (en[ii] + a) / (b + a);
            a = c / b;
        }
        let a = 1.0 / (c * c + 1.0).sqrt();
        sn = if sn >= 0.0 { a } else { -a };
        cn = c * sn;
    }
    (sn, cn, dn)
}

/// Minimal real arithmetic shared by the f64 and double-double evaluations of
/// the mode sums.
pub trait Real:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EPS: f64;
    fn of(x: f64) -> Self;
    fn sqrt(self) -> Self;
    fn pi() -> Self;
    fn to_f64(self) -> f64;
    /// Correctly rounded quotient (the `Div` of some backends is not).
    fn quot(self, rhs: Self) -> Self {
        self / rhs
    }
}

impl Real for f64 {
    const EPS: f64 = 1e-19;
    fn of(x: f64) -> Self {
        x
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn pi() -> Self {
        PI
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for twofloat::TwoFloat {
    const EPS: f64 = 1e-36;
    fn of(x: f64) -> Self {
        twofloat::TwoFloat::from(x)
    }
    fn sqrt(self) -> Self {
        twofloat::TwoFloat::sqrt(self)
    }
    fn pi() -> Self {
        twofloat::consts::PI
    }
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
    fn quot(self, rhs: Self) -> Self {
        // one Newton correction; TwoFloat / f64 and TwoFloat * TwoFloat are exact enough
        let y = self / rhs.hi();
        let r = self - rhs * y;
        y + r / rhs.hi()
    }
}

/// Even derivatives Z_{2j} = ∂^{2j}_w [ζ_b(w − 1/4) + ζ_b(w + 1/4)] at w = 0
/// and the quantities of the generic critical line, all as functions of the
/// real nome q = e^{−π|T|} and of n = 2cos πb.
///
/// ζ_b(w − 1/4) + ζ_b(w + 1/4) = c₀ + Σ_m a_m e^{4πimw} + (odd part), so
/// Z_{2j} are moments of the point masses a_m at x_m = −(4πm)², plus c₀ at
/// x = 0 for Z_0. The Hankel-type combinations are formed from pairwise sums,
/// which are free of cancellation as q → 0.
#[derive(Clone, Debug)]
pub struct ModeSums<R> {
    pub z: [R; 4],
    /// Z0Z4 − Z2²
    pub hankel4: R,
    /// Z0Z6 − Z2Z4
    pub hankel6: R,
    /// Z2Z6 − Z4²
    pub hankel8: R,
    /// τ as a function of q.
    pub tau: R,
    /// K(τ).
    pub k: R,
    /// (Z0Z6 − Z2Z4) + 64(1 + τ²)K²(Z0Z4 − Z2²)
    pub denominator: R,
}

impl<R: Real> ModeSums<R> {
    pub fn new(n: R, q: R) -> Self {
        let zero = R::of(0.0);
        let one = R::of(1.0);
        let two = R::of(2.0);
        let pi = R::pi();
        let cos_pb = n.quot(two);
        let sin_pb = (one - cos_pb * cos_pb).sqrt();
        let c0 = -two * pi * (two + n).quot(two - n).sqrt();
        let q4 = q * q * q * q;
        let mut a = Vec::new();
        let mut x = Vec::new();
        let mut qm = one;
        let mut m = 0usize;
        loop {
            m += 1;
            qm = qm * q4;
            let mf = m as f64;
            if qm.to_f64() * (1.0 + mf).powi(6) < R::EPS * q4.to_f64() || m > 4000 {
                break;
            }
            let sign = if m % 2 == 1 { -one } else { one };
            let am =
                (-R::of(8.0) * pi * sign * qm * sin_pb).quot(one - two * qm * cos_pb + qm * qm);
            a.push(am);
            let fm = R::of(4.0 * mf) * pi;
            x.push(-(fm * fm));
        }
        let mut z = [c0, zero, zero, zero];
        for (ai, xi) in a.iter().zip(&x) {
            let mut p = *ai;
            for slot in z.iter_mut() {
                *slot = *slot + p;
                p = p * *xi;
            }
        }
        // theta constants at nome q⁴
        let mut th2 = zero;
        let mut th3m1 = zero;
        let mut th4m1 = zero;
        for k in 0..64usize {
            let e = 4 * k * (k + 1);
            let term = powi(q, e);
            th2 = th2 + term;
            if k >= 1 {
                let t = powi(q, 4 * k * k);
                th3m1 = th3m1 + t;
                th4m1 = if k % 2 == 1 { th4m1 - t } else { th4m1 + t };
            }
            if term.to_f64() < 1e-40 {
                break;
            }
        }
        let th2 = two * q * th2;
        let th3 = one + two * th3m1;
        let th4m1 = two * th4m1;
        let tau = (th2 * th2).quot(th3 * th3);
        let k = pi.quot(two) * th3 * th3;
        let kappa = R::of(64.0) * (one + tau * tau) * k * k;
        let th2_4 = th2 * th2 * th2 * th2;
        let first_gap = R::of(16.0)
            * pi
            * pi
            * (two * th2_4
                + th4m1 * (R::of(4.0) + th4m1 * (R::of(6.0) + th4m1 * (R::of(4.0) + th4m1))));

        let mut h4 = zero;
        let mut h6 = zero;
        let mut h8 = zero;
        let mut den = zero;
        for r in 0..a.len() {
            let xr2 = x[r] * x[r];
            h4 = h4 + c0 * a[r] * xr2;
            h6 = h6 + c0 * a[r] * xr2 * x[r];
            let gap = if r == 0 { first_gap } else { x[r] + kappa };
            den = den + c0 * a[r] * xr2 * gap;
            for s in (r + 1)..a.len() {
                let aa = a[r] * a[s];
                let dx = x[s] - x[r];
                let dx2 = dx * dx;
                h4 = h4 + aa * dx2;
                h6 = h6 + aa * dx2 * (x[s] + x[r]);
                h8 = h8 + aa * x[r] * x[s] * dx2;
                den = den + aa * dx2 * (x[s] + x[r] + kappa);
            }
        }
        ModeSums {
            z,
            hankel4: h4,
            hankel6: h6,
            hankel8: h8,
            tau,
            k,
            denominator: den,
        }
    }

    /// Point (g, h1) of the generic critical line at nome q.
    pub fn generic_point(&self, n: R) -> (R, R) {
        let two = R::of(2.0);
        let h1 = self
            .hankel8
            .quot(R::of(32.0) * (two - n) * self.tau * self.k * self.k * self.denominator);
        let g = (R::of(6.0) * self.hankel8 * self.hankel4)
            .quot((two - n) * self.denominator * self.denominator);
        (g, h1)
    }
}

fn powi<R: Real>(x: R, e: usize) -> R {
    let mut acc = R::of(1.0);
    let mut base = x;
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base;
        }
        base = base * base;
        e >>= 1;
    }
    acc
}

/// Z_{0,2,4,6} by Cauchy differentiation of the theta-ratio ζ_b.
pub fn z_moments_cauchy(b: f64, abs_t: f64) -> Result<[f64; 4], EllipticError> {
    let p = ZetaBParams::new(b, ModularParam::imaginary(abs_t)?)?;
    let quarter = C::new(0.25, 0.0);
    let r = cauchy_radius(&p).min(0.05);
    let f = |w: C| {
        zeta_b(w - quarter, &p).unwrap_or(C::new(f64::NAN, 0.0))
            + zeta_b(w + quarter, &p).unwrap_or(C::new(f64::NAN, 0.0))
    };
    let zero = C::new(0.0, 0.0);
    let mut out = [0.0; 4];
    out[0] = f(zero).re;
    for j in 1..4 {
        out[j] = cauchy_derivative(f, zero, 2 * j as u32, r, 64).re;
    }
    Ok(out)
}

/// One named identity check with its residual and acceptance threshold.
#[derive(Clone, Debug, serde::Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.residual.is_finite() && self.residual < self.threshold
    }
}

/// Residuals of the theta, ℘ and ζ_b identities on a fixed sample of
/// parameters.
pub fn identity_suite() -> Vec<IdentityCheck> {
    let mut out = Vec::new();
    let mut push = |name: String, residual: f64, threshold: f64| {
        out.push(IdentityCheck {
            name,
            residual,
            threshold,
        });
    };
    let samples = [C::new(0.13, 0.07), C::new(0.31, -0.11), C::new(-0.22, 0.05)];
    for &abs_t in &[0.5, 1.0, 2.0] {
        let tp = ModularParam::imaginary(abs_t).unwrap();
        let mut modular = 0.0f64;
        let mut period = 0.0f64;
        for &v in &samples {
            let direct = theta_direct(1, v, tp.t)[0];
            let d = tp.dual().t;
            let via = C::i() * modular_prefactor(v, tp.t) * theta_direct(1, v / tp.t, d)[0];
            modular = modular.max((direct - via).norm());
            let shifted = theta(1, v + 1.0, &tp) + theta(1, v, &tp);
            period = period.max(shifted.norm());
        }
        push(format!("theta1 modular |T|={abs_t}"), modular, 1e-12);
        push(format!("theta1 antiperiod |T|={abs_t}"), period, 1e-12);
        for &b in &[0.1, 1.0 / 3.0, 0.49] {
            let p = ZetaBParams::new(b, tp).unwrap();
            let pb = weierstrass_p(C::new(0.5 * b, 0.0), &tp).unwrap();
            let ppb = weierstrass_p_prime(C::new(0.5 * b, 0.0), &tp).unwrap();
            let mut mirror = 0.0f64;
            let mut first = 0.0f64;
            let mut lame = 0.0f64;
            for &v in &samples {
                let z = zeta_b(v, &p).unwrap();
                let zm = zeta_b(-v, &p).unwrap();
                let pv = weierstrass_p(v, &tp).unwrap();
                mirror = mirror.max(((z * zm - (pb - pv)) / (1.0 + pv.norm())).norm());
                let z1 = zeta_b_derivative(v, &p, 1).unwrap();
                let ppv = weierstrass_p_prime(v, &tp).unwrap();
                // the logarithmic derivative of ζ_b carries the constant C0
                let rhs = (0.5 * (ppv + ppb) / (pv - pb) + p.c0) * z;
                first = first.max(((z1 - rhs) / (1.0 + z1.norm())).norm());
                let tilde = |w: C| (-p.c0 * w).exp() * zeta_b(w, &p).unwrap();
                let r = cauchy_radius(&p).min(0.5 * lattice_distance(v, tp.t));
                let t2 = cauchy_derivative(tilde, v, 2, r, 48);
                let res = t2 - (2.0 * pv + pb) * tilde(v);
                lame = lame.max((res / (1.0 + t2.norm())).norm());
            }
            push(format!("zeta_b mirror b={b:.4} |T|={abs_t}"), mirror, 1e-10);
            push(
                format!("zeta_b first-order ODE b={b:.4} |T|={abs_t}"),
                first,
                1e-8,
            );
            push(format!("zeta_b Lame b={b:.4} |T|={abs_t}"), lame, 1e-8);
            let coef = (pb - (p.c0 * p.c0 - 2.0 * p.c1)).norm() / (1.0 + pb.norm());
            push(
                format!("wp(b/2) = C0^2 - 2C1 b={b:.4} |T|={abs_t}"),
                coef,
                1e-10,
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_basic_values() {
        let tp = ModularParam::imaginary(0.8).unwrap();
        assert!(theta(1, C::new(0.0, 0.0), &tp).norm() < 1e-16);
        let q = tp.q().re;
        let th3 = theta(3, C::new(0.0, 0.0), &tp).re;
        assert!((th3 - (1.0 + 2.0 * q + 2.0 * q.powi(4) + 2.0 * q.powi(9))).abs() < 1e-12);
        // Jacobi identity θ3⁴ = θ2⁴ + θ4⁴
        let z = C::new(0.0, 0.0);
        for &a in &[0.05, 0.3, 0.8, 2.5] {
            let tp = ModularParam::imaginary(a).unwrap();
            let (t2, t3, t4) = (theta(2, z, &tp), theta(3, z, &tp), theta(4, z, &tp));
            let r = (t3.powi(4) - t2.powi(4) - t4.powi(4)).norm() / t3.powi(4).norm();
            assert!(r < 1e-12, "|T|={a} r={r}");
        }
    }

    #[test]
    fn k_against_quadrature() {
        let k = 0.6;
        let n = 100_000;
        let h = 0.5 * PI / n as f64;
        let f = |p: f64| 1.0 / (1.0 - k * k * p.sin().powi(2)).sqrt();
        // periodic analytic integrand over a half period: trapezoid is spectrally accurate
        let mut s = 0.5 * (f(0.0) + f(0.5 * PI));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        assert!((elliptic_k(k).unwrap() - s * h).abs() < 1e-10);
        assert!((elliptic_k(0.0).unwrap() - 0.5 * PI).abs() < 1e-15);
        assert!(elliptic_k(1.0).is_err());
    }

    #[test]
    fn complete_integrals_legendre_relation() {
        for &m in &[0.1, 0.5, 0.9, 1.0 - 1e-9] {
            let (k, e) = complete_integrals(m, 1.0 - m);
            let (kc, ec) = complete_integrals(1.0 - m, m);
            let legendre = e * kc + ec * k - k * kc;
            assert!((legendre - 0.5 * PI).abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn tau_round_trip() {
        for &tau in &[0.1, 0.5, 0.9, 0.999] {
            let t = t_from_tau(tau).unwrap();
            assert!((tau_from_t(&t).unwrap() - tau).abs() < 1e-12);
            let kk = elliptic_k(tau).unwrap();
            let kp = elliptic_k_complement(tau).unwrap();
            assert!((t.t.im - kp / (4.0 * kk)).abs() < 1e-13);
        }
        assert!(tau_from_t(&ModularParam::imaginary(20.0).unwrap()).unwrap() < 1e-20);
        assert!(tau_from_t(&ModularParam::imaginary(0.01).unwrap()).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn weierstrass_laurent_and_periods() {
        let tp = ModularParam::new(C::new(0.2, 0.9)).unwrap();
        let v = C::new(1e-3, 5e-4);
        let w = weierstrass_p(v, &tp).unwrap();
        assert!((w * v * v - 1.0).norm() < 1e-9);
        let u = C::new(0.21, 0.13);
        let base = weierstrass_p(u, &tp).unwrap();
        assert!((weierstrass_p(u + 1.0, &tp).unwrap() - base).norm() < 1e-10 * base.norm());
        assert!((weierstrass_p(u + tp.t, &tp).unwrap() - base).norm() < 1e-10 * base.norm());
        let dual = weierstrass_p(u / tp.t, &tp.dual()).unwrap() / (tp.t * tp.t);
        assert!((dual - base).norm() < 1e-10 * base.norm());
        assert!(weierstrass_p(tp.t, &tp).is_err());
    }

    #[test]
    fn zeta_b_defining_properties() {
        let tp = ModularParam::imaginary(0.7).unwrap();
        let p = ZetaBParams::new(1.0 / 3.0, tp).unwrap();
        let v = C::new(1e-6, 0.0);
        assert!((zeta_b(v, &p).unwrap() * v - 1.0).norm() < 1e-5);
        assert!(zeta_b(C::new(1.0 / 6.0, 0.0), &p).unwrap().norm() < 1e-13);
        let u = C::new(0.17, 0.2);
        let shifted = zeta_b(u + tp.t, &p).unwrap();
        let expect = C::from_polar(1.0, PI / 3.0) * zeta_b(u, &p).unwrap();
        assert!((shifted - expect).norm() < 1e-11 * expect.norm());
    }

    #[test]
    fn cotangent_representation() {
        let tp = ModularParam::imaginary(1.2).unwrap();
        let b = 0.3;
        let p = ZetaBParams::new(b, tp).unwrap();
        let v = C::new(0.21, 0.3);
        // the bare symmetric sum oscillates; subtract the limits ∓iπ of the
        // cotangents and add back their Abel sum −π cot(πb/2)
        let mut s = C::new(-PI / (0.5 * PI * b).tan(), 0.0);
        for m in -40i64..=40 {
            let w = PI * (v + m as f64 * tp.t);
            let limit = C::new(0.0, PI * (m.signum() as f64));
            s += C::from_polar(1.0, -PI * b * m as f64) * (PI * w.cos() / w.sin() + limit);
        }
        assert!((s - zeta_b(v, &p).unwrap()).norm() < 1e-8);
    }

    #[test]
    fn real_fourier_matches_theta_ratio() {
        for &abs_t in &[0.3, 1.0] {
            let p = ZetaBParams::new(0.4, ModularParam::imaginary(abs_t).unwrap()).unwrap();
            let x = 0.27;
            let four = zeta_b_real_derivatives(x, 0.4, abs_t, 3);
            for (k, val) in four.iter().enumerate() {
                let c = zeta_b_derivative(C::new(x, 0.0), &p, k as u32).unwrap();
                assert!(c.im.abs() < 1e-9 * (1.0 + c.norm()));
                assert!(
                    (c.re - val).abs() < 1e-9 * (1.0 + val.abs()),
                    "k={k}: {} vs {val}",
                    c.re
                );
            }
        }
    }

    #[test]
    fn mode_sums_match_cauchy_moments() {
        let n = 1.0;
        let b = (n / 2.0f64).acos() / PI;
        for &abs_t in &[0.2, 0.6] {
            let q = (-PI * abs_t).exp();
            let modes = ModeSums::<f64>::new(n, q);
            let cauchy = z_moments_cauchy(b, abs_t).unwrap();
            for j in 0..4 {
                let rel = (modes.z[j] - cauchy[j]).abs() / (1.0 + modes.z[j].abs());
                assert!(
                    rel < 1e-7,
                    "|T|={abs_t} j={j}: {} vs {}",
                    modes.z[j],
                    cauchy[j]
                );
            }
            let direct8 = modes.z[1] * modes.z[3] - modes.z[2] * modes.z[2];
            assert!((direct8 - modes.hankel8).abs() < 1e-9 * direct8.abs());
            let tau = tau_from_t(&ModularParam::imaginary(abs_t).unwrap()).unwrap();
            assert!((modes.tau - tau).abs() < 1e-13);
        }
    }

    #[test]
    fn identity_suite_passes() {
        for c in identity_suite() {
            assert!(c.passed(), "{} residual {}", c.name, c.residual);
        }
    }

    #[test]
    fn generic_line_small_q_double_double() {
        use twofloat::TwoFloat;
        let n = TwoFloat::from(1.0);
        for &qf in &[0.01f64, 0.03, 0.1] {
            let q = TwoFloat::from(qf);
            let modes = ModeSums::new(n, q);
            let (g, h1) = modes.generic_point(n);
            let q2 = q * q;
            let q4 = q2 * q2;
            let q8 = q4 * q4;
            let g_series = TwoFloat::from(1.0) / 12.0 - q4 / 18.0 + q8 * (8.0 / 36.0);
            let h_series = q2 / 2.0 - q4 * q2 * (2.0 + 1.0 / 6.0) + q8 * q2 * (9.0 + 1.0 / 18.0);
            let gr = (g - g_series).to_f64() / qf.powi(12);
            let hr = (h1 - h_series).to_f64() / qf.powi(14);
            assert!(gr.abs() < 5.0, "q={qf} g remainder/q^12 = {gr}");
            assert!(hr.abs() < 500.0, "q={qf} h1 remainder/q^14 = {hr}");
        }
    }
}
