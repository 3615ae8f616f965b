//! Boltzmann bipartite maps: R(u), the boundary generating functions F_k,
//! criticality, the resolvent and its spectral density, and non-generic
//! weight sequences with a power-law tail.
//!
//! ```text
//! R(u) = u + φ(R),   φ(R) = Σ_k g_k C(2k−1,k) R^k
//! F_k  = C(2k,k) ∫₀^{R(1)} R^k (1 − φ'(R)) dR
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{adaptive_gl, ln_binomial, tanh_sinh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapsError {
    #[error("weight sequence is not admissible (R(1) is infinite)")]
    Inadmissible,
    #[error("point {0} lies on the cut [-γ, γ]")]
    OnCut(f64),
    #[error("reference sums diverge: {0}")]
    DivergentReference(String),
    #[error("invalid weight sequence: {0}")]
    InvalidWeights(String),
}

/// Anything that provides φ and its derivatives on [0, R_c].
pub trait FaceWeights {
    fn phi(&self, r: f64) -> f64;
    fn dphi(&self, r: f64) -> f64;
    fn d2phi(&self, r: f64) -> f64;
    /// Radius of convergence of φ (`f64::INFINITY` for finite sequences).
    fn radius(&self) -> f64;
}

/// Truncated face-weight sequence g_1..g_Kmax, stored as logarithms so that
/// weights decaying like z^k for large k neither underflow nor overflow
/// intermediate products.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    ln_weights: Vec<f64>,
}

impl WeightSequence {
    /// `weights[k-1]` is g_k.
    pub fn new(weights: &[f64]) -> Result<Self, MapsError> {
        if weights.is_empty() {
            return Err(MapsError::InvalidWeights("Kmax must be at least 1".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(MapsError::InvalidWeights(format!(
                "weight {w} is not a non-negative real"
            )));
        }
        Ok(WeightSequence {
            ln_weights: weights.iter().map(|w| w.ln()).collect(),
        })
    }

    pub fn from_ln(ln_weights: Vec<f64>) -> Self {
        assert!(!ln_weights.is_empty());
        WeightSequence { ln_weights }
    }

    /// g_k = g δ_{k,2} padded to `kmax`.
    pub fn quadrangulation(g: f64, kmax: usize) -> Self {
        let mut w = vec![0.0; kmax.max(2)];
        w[1] = g;
        WeightSequence::new(&w).expect("valid")
    }

    pub fn kmax(&self) -> usize {
        self.ln_weights.len()
    }

    pub fn g(&self, k: usize) -> f64 {
        if k == 0 || k > self.kmax() {
            0.0
        } else {
            self.ln_weights[k - 1].exp()
        }
    }

    pub fn ln_g(&self, k: usize) -> f64 {
        if k == 0 || k > self.kmax() {
            f64::NEG_INFINITY
        } else {
            self.ln_weights[k - 1]
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        self.ln_weights.iter().map(|l| l.exp()).collect()
    }

    /// Σ_k g_k C(2k−1,k) k^(m) R^{k−m} for the m-th derivative.
    fn phi_derivative(&self, r: f64, m: usize) -> f64 {
        if r == 0.0 {
            // only the k = m term survives
            if m == 0 || m > self.kmax() {
                return 0.0;
            }
            let fall: f64 = (1..=m).map(|i| i as f64).product();
            return self.g(m) * ln_binomial(2 * m as u64 - 1, m as u64).exp() * fall;
        }
        let lr = r.ln();
        let mut s = 0.0;
        for k in 1..=self.kmax() {
            if k < m {
                continue;
            }
            let lg = self.ln_weights[k - 1];
            if lg == f64::NEG_INFINITY {
                continue;
            }
            let fall: f64 = (0..m).map(|i| (k - i) as f64).product();
            s += fall * (lg + ln_binomial(2 * k as u64 - 1, k as u64) + (k - m) as f64 * lr).exp();
        }
        s
    }

    /// c_j = j g_j C(2j−1,j) R^{j−1}: the terms of φ'(R).
    fn dphi_terms(&self, r: f64) -> Vec<f64> {
        let lr = r.ln();
        (1..=self.kmax())
            .map(|j| {
                let lg = self.ln_weights[j - 1];
                if lg == f64::NEG_INFINITY {
                    0.0
                } else {
                    (lg + ln_binomial(2 * j as u64 - 1, j as u64) + (j - 1) as f64 * lr).exp()
                        * j as f64
                }
            })
            .collect()
    }
}

impl FaceWeights for WeightSequence {
    fn phi(&self, r: f64) -> f64 {
        self.phi_derivative(r, 0)
    }
    fn dphi(&self, r: f64) -> f64 {
        self.phi_derivative(r, 1)
    }
    fn d2phi(&self, r: f64) -> f64 {
        self.phi_derivative(r, 2)
    }
    fn radius(&self) -> f64 {
        f64::INFINITY
    }
}

/// Smallest non-negative solution of R = u + φ(R); `f64::INFINITY` when none
/// exists below the radius of convergence.
///
/// h(R) = u + φ(R) − R is convex, so Newton steps started at R = 0 increase
/// monotonically towards the smallest root as long as h' < 0. The minimum of
/// h (where φ' = 1) is located first; a minimum value within `tol` of zero
/// is the critical case and returns the minimiser itself.
pub fn solve_r<W: FaceWeights + ?Sized>(w: &W, u: f64, tol: f64) -> f64 {
    assert!((0.0..=1.0).contains(&u), "u must lie in [0,1]");
    if u == 0.0 {
        return 0.0;
    }
    let h = |r: f64| u + w.phi(r) - r;
    let rc = w.radius();
    // Upper end of the search: radius, or a point where φ' ≥ 1.
    let mut hi = if rc.is_finite() { rc } else { 1.0 };
    if !rc.is_finite() {
        let mut guard = 0;
        while w.dphi(hi) < 1.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                // φ essentially linear with slope below one
                return u / (1.0 - w.dphi(0.0)).max(f64::MIN_POSITIVE);
            }
        }
    }
    let rmin = if w.dphi(hi) <= 1.0 + 1e-13 {
        hi
    } else {
        let mut lo = 0.0;
        let mut up = hi;
        for _ in 0..200 {
            let mid = 0.5 * (lo + up);
            if w.dphi(mid) < 1.0 {
                lo = mid;
            } else {
                up = mid;
            }
            if up - lo <= 1e-16 * up {
                break;
            }
        }
        0.5 * (lo + up)
    };
    let hmin = h(rmin);
    let snap = tol.max(1e-14) * (1.0 + rmin);
    if hmin > snap {
        return f64::INFINITY;
    }
    if hmin >= -snap {
        return rmin;
    }
    // Monotone Newton from the left, safeguarded by the bracket [lo, rmin].
    let mut lo = 0.0;
    let mut up = rmin;
    let mut r = 0.0;
    for _ in 0..500 {
        let hv = h(r);
        if hv > 0.0 {
            lo = r;
        } else {
            up = r;
        }
        let d = w.dphi(r) - 1.0;
        let mut next = if d < 0.0 { r - hv / d } else { f64::NAN };
        if !(next > lo && next < up) {
            next = 0.5 * (lo + up);
        }
        if (next - r).abs() <= 1e-16 * next.max(1e-300) || up - lo <= 2e-16 * up {
            return next;
        }
        r = next;
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseClassification {
    Inadmissible,
    Subcritical,
    GenericCritical,
    NonGenericCritical,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoltzmannState {
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "Rc")]
    pub rc: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub admissible: bool,
    pub classification: PhaseClassification,
    /// 1 − φ'(R(1)), the raw residual behind the criticality verdict.
    pub criticality_residual: f64,
}

/// Absolute tolerance on φ'(R(1)) = 1 and relative tolerance on R(1) = R_c.
pub const CRITICALITY_TOL: f64 = 1e-8;

pub fn boltzmann_state<W: FaceWeights + ?Sized>(w: &W) -> BoltzmannState {
    let r1 = solve_r(w, 1.0, 1e-14);
    let rc = w.radius();
    if !r1.is_finite() {
        return BoltzmannState {
            r1,
            rc,
            phi1: f64::NAN,
            phi2: f64::NAN,
            admissible: false,
            classification: PhaseClassification::Inadmissible,
            criticality_residual: f64::NAN,
        };
    }
    let phi1 = w.dphi(r1);
    let phi2 = w.d2phi(r1);
    let at_radius = rc.is_finite() && (rc - r1).abs() <= CRITICALITY_TOL * rc;
    let classification = if at_radius && (1.0 - phi1).abs() <= CRITICALITY_TOL {
        PhaseClassification::NonGenericCritical
    } else if (1.0 - phi1).abs() <= CRITICALITY_TOL {
        PhaseClassification::GenericCritical
    } else {
        PhaseClassification::Subcritical
    };
    BoltzmannState {
        r1,
        rc,
        phi1,
        phi2,
        admissible: true,
        classification,
        criticality_residual: 1.0 - phi1,
    }
}

pub fn classify<W: FaceWeights + ?Sized>(w: &W) -> PhaseClassification {
    boltzmann_state(w).classification
}

/// ln F_0 .. ln F_kmax for a finite sequence, from the R-variable form
///
/// ```text
/// F_k = C(2k,k) R1^{k+1}/(k+1) · [ (1 − φ'(R1)) + Σ_j c_j (j−1)/(k+j) ],
/// c_j = j g_j C(2j−1,j) R1^{j−1},
/// ```
///
/// which has no cancellations.
pub fn ln_fk_table(w: &WeightSequence, r1: f64, kmax: usize) -> Vec<f64> {
    let c = w.dphi_terms(r1);
    let slack = (1.0 - c.iter().sum::<f64>()).max(0.0);
    let lr = r1.ln();
    (0..=kmax)
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let bracket: f64 = slack
                + c.iter()
                    .enumerate()
                    .map(|(i, cj)| {
                        let j = (i + 1) as f64;
                        cj * (j - 1.0) / (k as f64 + j)
                    })
                    .sum::<f64>();
            ln_binomial(2 * k as u64, k as u64) + (k + 1) as f64 * lr - ((k + 1) as f64).ln()
                + bracket.ln()
        })
        .collect()
}

pub fn fk_table(w: &WeightSequence, kmax: usize) -> Result<Vec<f64>, MapsError> {
    let r1 = solve_r(w, 1.0, 1e-14);
    if !r1.is_finite() {
        return Err(MapsError::Inadmissible);
    }
    Ok(ln_fk_table(w, r1, kmax).into_iter().map(f64::exp).collect())
}

pub fn compute_fk(w: &WeightSequence, k: usize) -> Result<f64, MapsError> {
    Ok(fk_table(w, k)?[k])
}

/// F_k for any admissible weights by quadrature of the R-variable form.
pub fn compute_fk_quadrature<W: FaceWeights + ?Sized>(
    w: &W,
    k: usize,
    tol: f64,
) -> Result<f64, MapsError> {
    let r1 = solve_r(w, 1.0, 1e-14);
    if !r1.is_finite() {
        return Err(MapsError::Inadmissible);
    }
    if k == 0 {
        return Ok(1.0);
    }
    let integral = tanh_sinh(
        |r, _, _| (r / r1).powi(k as i32) * (1.0 - w.dphi(r)).max(0.0),
        0.0,
        r1,
        tol,
    );
    Ok((ln_binomial(2 * k as u64, k as u64) + k as f64 * r1.ln()).exp() * integral)
}

/// W(ξ) = (1/ξ) ∫₀^{R1} (1 − φ'(R)) dR / √(1 − 4R/ξ²), principal branch.
pub fn resolvent<W: FaceWeights + ?Sized>(w: &W, xi: Complex64) -> Result<Complex64, MapsError> {
    let r1 = solve_r(w, 1.0, 1e-14);
    if !r1.is_finite() {
        return Err(MapsError::Inadmissible);
    }
    let gamma = 2.0 * r1.sqrt();
    if xi.im == 0.0 && xi.re.abs() <= gamma {
        return Err(MapsError::OnCut(xi.re));
    }
    let integrand = |r: f64| {
        let up = (1.0 - w.dphi(r)).max(0.0);
        up / (Complex64::new(1.0, 0.0) - 4.0 * r / (xi * xi)).sqrt()
    };
    let re = adaptive_gl(|r| integrand(r).re, 0.0, r1, 1e-13);
    let im = adaptive_gl(|r| integrand(r).im, 0.0, r1, 1e-13);
    Ok(Complex64::new(re, im) / xi)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub gamma: f64,
    /// (ξ, ρ(ξ)) on a symmetric grid including both endpoints.
    pub values: Vec<(f64, f64)>,
}

impl SpectralDensity {
    pub fn trapezoid_integral(&self) -> f64 {
        self.values
            .windows(2)
            .map(|p| 0.5 * (p[1].0 - p[0].0) * (p[0].1 + p[1].1))
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("xi,rho\n");
        for (x, r) in &self.values {
            s.push_str(&format!("{x:.17e},{r:.17e}\n"));
        }
        s
    }
}

/// ρ(ξ) = (1/2π) ∫₀^{√(4R1−ξ²)} (1 − φ'((t²+ξ²)/4)) dt.
pub fn spectral_density_at<W: FaceWeights + ?Sized>(w: &W, r1: f64, xi: f64) -> f64 {
    let top = 4.0 * r1 - xi * xi;
    if top <= 0.0 {
        return 0.0;
    }
    let tmax = top.sqrt();
    let v = adaptive_gl(
        |t| (1.0 - w.dphi(((t * t + xi * xi) / 4.0).min(r1))).max(0.0),
        0.0,
        tmax,
        1e-13,
    );
    v / (2.0 * std::f64::consts::PI)
}

pub fn spectral_density<W: FaceWeights + ?Sized>(
    w: &W,
    grid_size: usize,
) -> Result<SpectralDensity, MapsError> {
    let r1 = solve_r(w, 1.0, 1e-14);
    if !r1.is_finite() {
        return Err(MapsError::Inadmissible);
    }
    let gamma = 2.0 * r1.sqrt();
    let m = grid_size.max(3);
    let values = (0..m)
        .map(|i| {
            let xi = -gamma + 2.0 * gamma * i as f64 / (m - 1) as f64;
            (xi, spectral_density_at(w, r1, xi))
        })
        .collect();
    Ok(SpectralDensity { gamma, values })
}

/// Probability that the external face of a rooted pointed map has degree 2k,
/// k = 1..kmax: g_k C(2k−1,k) R1^k / (R1 − 1).
pub fn pointed_degree_probabilities<W: FaceWeights + ?Sized>(
    w: &W,
    g: impl Fn(usize) -> f64,
    kmax: usize,
) -> Vec<f64> {
    pointed_degree_probabilities_ln(w, |k| g(k).ln(), kmax)
}

/// Same, from ln g_k; stays finite where g_k underflows.
pub fn pointed_degree_probabilities_ln<W: FaceWeights + ?Sized>(
    w: &W,
    ln_g: impl Fn(usize) -> f64,
    kmax: usize,
) -> Vec<f64> {
    let r1 = solve_r(w, 1.0, 1e-14);
    let ln_norm = (r1 - 1.0).ln();
    (1..=kmax)
        .map(|k| {
            (ln_g(k) + ln_binomial(2 * k as u64 - 1, k as u64) + k as f64 * r1.ln() - ln_norm).exp()
        })
        .collect()
}

/// Probability that the external face of a rooted map has degree 2k:
/// g_k F_k / (F_1 − 1).
pub fn rooted_degree_probabilities(w: &WeightSequence) -> Result<Vec<f64>, MapsError> {
    let f = fk_table(w, w.kmax())?;
    let f1 = f[1];
    Ok((1..=w.kmax()).map(|k| w.g(k) * f[k] / (f1 - 1.0)).collect())
}

/// Reference sequence g_k° with power-law decay k^{-a}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReferenceSequence {
    /// g_k° = k^{-a} exactly.
    PowerLaw { exponent: f64 },
    /// Explicit head g_1°..g_K°, continued by g_K° (K/k)^{exponent}.
    Explicit { head: Vec<f64>, exponent: f64 },
}

impl ReferenceSequence {
    pub fn exponent(&self) -> f64 {
        match self {
            ReferenceSequence::PowerLaw { exponent }
            | ReferenceSequence::Explicit { exponent, .. } => *exponent,
        }
    }

    pub fn value(&self, k: usize) -> f64 {
        match self {
            ReferenceSequence::PowerLaw { exponent } => (k as f64).powf(-exponent),
            ReferenceSequence::Explicit { head, exponent } => {
                if k <= head.len() {
                    head[k - 1]
                } else {
                    let kk = head.len();
                    head[kk - 1] * (kk as f64 / k as f64).powf(*exponent)
                }
            }
        }
    }

    /// Index after which the sequence is a pure power law, with its amplitude.
    fn tail(&self) -> (usize, f64) {
        match self {
            ReferenceSequence::PowerLaw { .. } => (0, 1.0),
            ReferenceSequence::Explicit { head, exponent } => {
                let kk = head.len();
                (kk, head[kk - 1] * (kk as f64).powf(*exponent))
            }
        }
    }
}

/// Hurwitz zeta Σ_{k≥m} k^{-s} for s > 1 by Euler–Maclaurin at a shifted start.
pub fn hurwitz_zeta(s: f64, m: usize) -> f64 {
    assert!(s > 1.0);
    let shift = 64usize;
    let start = m.max(1);
    let mut direct = 0.0;
    let big = start.max(shift);
    for k in start..big {
        direct += (k as f64).powf(-s);
    }
    let n = big as f64;
    // Σ_{k≥N} k^{-s} = N^{1-s}/(s-1) + N^{-s}/2 + Σ B_{2j}/(2j)! s^(2j-1) N^{-s-2j+1}
    let b2j = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
    ];
    let mut tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    let mut rising = s; // s (s+1) ... (s+2j-2)
    let mut fact = 2.0; // (2j)!
    for (j, b) in b2j.iter().enumerate() {
        let jj = j + 1;
        tail += b / fact * rising * n.powf(-s - 2.0 * jj as f64 + 1.0);
        rising *= (s + 2.0 * jj as f64 - 1.0) * (s + 2.0 * jj as f64);
        fact *= ((2 * jj + 1) * (2 * jj + 2)) as f64;
    }
    direct + tail
}

/// Σ_{k≥m} p_k k^{-s} with p_k = C(2k,k)/4^k, using
/// p_k = (πk)^{-1/2}(1 − 1/(8k) + 1/(128k²) + 5/(1024k³) − 21/(32768k⁴) + …).
fn central_tail(s: f64, m: usize) -> f64 {
    CENTRAL_EXPANSION
        .iter()
        .enumerate()
        .map(|(j, cj)| cj * hurwitz_zeta(s + 0.5 + j as f64, m))
        .sum::<f64>()
        / std::f64::consts::PI.sqrt()
}

const CENTRAL_EXPANSION: [f64; 5] = [1.0, -1.0 / 8.0, 1.0 / 128.0, 5.0 / 1024.0, -21.0 / 32768.0];

/// Σ_{k≥n} k^{-s} x^k for 0 < x < 1 by Euler–Maclaurin around the integral
/// ε^{s−1} Γ(1−s, εn), ε = −ln x.
fn lerch_tail(x: f64, s: f64, n: usize) -> f64 {
    use statrs::function::gamma::{gamma, gamma_ur};
    let eps = -x.ln();
    let nf = n as f64;
    let z = eps * nf;
    // Γ(b, z) for negative non-integer b by downward recurrence
    let b = 1.0 - s;
    let mut b0 = b;
    let mut steps = 0;
    while b0 <= 0.0 {
        b0 += 1.0;
        steps += 1;
    }
    let mut upper = gamma_ur(b0, z) * gamma(b0);
    let mut bb = b0;
    for _ in 0..steps {
        bb -= 1.0;
        upper = (upper - z.powf(bb) * (-z).exp()) / bb;
    }
    let integral = eps.powf(s - 1.0) * upper;
    let f_n = nf.powf(-s) * (-z).exp();
    // logarithmic derivative of k^{-s} e^{-εk} and its derivatives at n
    let l = -s / nf - eps;
    let l1 = s / (nf * nf);
    let l2 = -2.0 * s / (nf * nf * nf);
    let d1 = f_n * l;
    let d3 = f_n * (l * l * l + 3.0 * l * l1 + l2);
    integral + 0.5 * f_n - d1 / 12.0 + d3 / 720.0
}

fn ln_central(k: usize) -> f64 {
    ln_binomial(2 * k as u64, k as u64) - k as f64 * 4f64.ln()
}

/// Non-generic critical sequence g_k = c (1/(4R_c))^{k−1} g_k°.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonGenericCalibration {
    pub a: f64,
    pub c: f64,
    pub rc: f64,
    pub reference: ReferenceSequence,
    /// f∘(1/4) and f∘'(1/4).
    pub f0_quarter: f64,
    pub f0p_quarter: f64,
}

const DIRECT_TERMS: usize = 4000;

/// Returns (f∘(1/4), f∘'(1/4)):
/// f∘(1/4) = 2 Σ p_k g_k°, f∘'(1/4) = 8 Σ (k−1) p_k g_k°.
fn reference_sums(reference: &ReferenceSequence) -> Result<(f64, f64), MapsError> {
    let a = reference.exponent();
    if a <= 1.5 {
        return Err(MapsError::DivergentReference(format!(
            "exponent {a} ≤ 3/2 makes f∘'(1/4) diverge"
        )));
    }
    let (k0, amp) = reference.tail();
    let cut = DIRECT_TERMS.max(k0 + 1);
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for k in 1..cut {
        let t = ln_central(k).exp() * reference.value(k);
        s0 += t;
        s1 += (k as f64 - 1.0) * t;
    }
    // tail: amp Σ_{k≥cut} p_k k^{-a} and amp Σ p_k (k^{1-a} − k^{-a})
    let t0 = amp * central_tail(a, cut);
    let t1 = amp * (central_tail(a - 1.0, cut) - central_tail(a, cut));
    Ok((2.0 * (s0 + t0), 8.0 * (s1 + t1)))
}

pub fn calibrate_nongeneric(
    reference: ReferenceSequence,
    a: f64,
) -> Result<NonGenericCalibration, MapsError> {
    if !(a > 1.5 && a < 2.5) {
        return Err(MapsError::DivergentReference(format!(
            "a = {a} outside (3/2, 5/2)"
        )));
    }
    let (f0, f0p) = reference_sums(&reference)?;
    let c = 4.0 / (4.0 * f0 + f0p);
    let rc = 1.0 + 4.0 * f0 / f0p;
    Ok(NonGenericCalibration {
        a,
        c,
        rc,
        reference,
        f0_quarter: f0,
        f0p_quarter: f0p,
    })
}

impl NonGenericCalibration {
    pub fn g(&self, k: usize) -> f64 {
        self.ln_g(k).exp()
    }

    pub fn ln_g(&self, k: usize) -> f64 {
        self.c.ln() - (k as f64 - 1.0) * (4.0 * self.rc).ln() + self.reference.value(k).ln()
    }

    /// First `kmax` weights as a truncated sequence.
    pub fn truncated(&self, kmax: usize) -> WeightSequence {
        WeightSequence::new(&(1..=kmax).map(|k| self.g(k)).collect::<Vec<_>>())
            .expect("non-negative")
    }

    /// Σ_k C(2k−1,k) g_k° x^{k−1} k^(m) (falling factorial of k−1) at x = r/(4Rc).
    fn f_circ(&self, r: f64, m: usize) -> f64 {
        let ratio = r / self.rc;
        if ratio >= 1.0 - 1e-15 {
            return match m {
                0 => self.f0_quarter,
                1 => self.f0p_quarter,
                _ => f64::INFINITY,
            };
        }
        if ratio <= 0.0 {
            let k = m + 1;
            let fact: f64 = (1..=m).map(|i| i as f64).product();
            return 2.0
                * ln_central(k).exp()
                * self.reference.value(k)
                * fact
                * 4f64.powi(m as i32);
        }
        // term_k = 2 4^m p_k g_k° (k−1)…(k−m) ratio^{k−1−m}
        let lr = ratio.ln();
        let scale = 2.0 * 4f64.powi(m as i32);
        let (k0, amp) = self.reference.tail();
        let cut = DIRECT_TERMS.max(k0 + 1);
        let mut s = 0.0;
        for k in 1..cut {
            let fall: f64 = (0..m).map(|i| k as f64 - 1.0 - i as f64).product();
            let t = (ln_central(k) + (k as f64 - 1.0 - m as f64) * lr).exp()
                * self.reference.value(k)
                * fall;
            s += t;
            if k > 50 && k > k0 && t.abs() < 1e-18 * s.abs() {
                return scale * s;
            }
        }
        // remaining power-law tail, with (k−1)…(k−m) expanded in powers of k
        let poly: &[f64] = match m {
            0 => &[1.0],
            1 => &[1.0, -1.0],
            _ => &[1.0, -3.0, 2.0],
        };
        let a = self.reference.exponent();
        let mut tail = 0.0;
        for (j, cj) in CENTRAL_EXPANSION.iter().enumerate() {
            for (p, cp) in poly.iter().enumerate() {
                let s_exp = a + 0.5 + j as f64 - (m - p) as f64;
                tail += cj * cp * lerch_tail(ratio, s_exp, cut);
            }
        }
        tail *= amp / std::f64::consts::PI.sqrt() * (-(1.0 + m as f64) * lr).exp();
        scale * (s + tail)
    }

    pub fn u_at(&self, r: f64) -> f64 {
        r - self.phi(r)
    }
}

impl FaceWeights for NonGenericCalibration {
    fn phi(&self, r: f64) -> f64 {
        self.c * r * self.f_circ(r, 0)
    }
    fn dphi(&self, r: f64) -> f64 {
        // φ = c R f∘(R/4Rc) ⇒ φ' = c f∘ + c R f∘'/(4Rc)
        self.c * self.f_circ(r, 0) + self.c * r / (4.0 * self.rc) * self.f_circ(r, 1)
    }
    fn d2phi(&self, r: f64) -> f64 {
        let x = 1.0 / (4.0 * self.rc);
        2.0 * self.c * x * self.f_circ(r, 1) + self.c * r * x * x * self.f_circ(r, 2)
    }
    fn radius(&self) -> f64 {
        self.rc
    }
}
