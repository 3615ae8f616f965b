//! Linear integral equation for f(x) = u'(R x)/u'(0):
//!
//!   f(x) + (n/2π) ∫₀¹ K_τ(x, y) f(y) dy = 1 − ρx,
//!
//! solved by Nyström discretisation. Points are carried together with their
//! complements s = 1 − x so that the polar behaviour K ~ 1/(1 − xy) at
//! τ = 1 is resolved down to s ~ 1e−15.

use crate::elliptic::complete_integrals;
use crate::quad::{brent, fit_line, gauss_legendre, lagrange_eval, GlRule};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FredholmError {
    #[error("invalid kernel specification: {0}")]
    InvalidSpec(String),
    #[error("argument {0} outside [0, 1)")]
    Domain(f64),
    #[error("kernel is singular at (1, 1) when tau = 1")]
    SingularPoint,
    #[error("contour bracket is empty: lower {lower} >= upper {upper}")]
    Bracket { lower: f64, upper: f64 },
    #[error("Nystrom system is singular (characteristic value reached)")]
    SingularSystem,
    #[error("f_id(1) vanishes; critical rho undefined")]
    VanishingIdentity,
    #[error("exponent fit window has too few usable points")]
    FitWindow,
    #[error("no consistent R(1) in the admissible range")]
    NoConsistentRoot,
}

pub type Result<T> = std::result::Result<T, FredholmError>;

/// Which ring weights generate the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum KernelVariant {
    Rigid,
    /// Symmetric rings with h1/h2 = ratio ∈ [0, ∞]; ∞ is the rigid case.
    General {
        ratio: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelSpec {
    pub variant: KernelVariant,
    pub tau: f64,
}

impl KernelSpec {
    pub fn rigid(tau: f64) -> Result<Self> {
        Self::new(KernelVariant::Rigid, tau)
    }

    pub fn general(ratio: f64, tau: f64) -> Result<Self> {
        Self::new(KernelVariant::General { ratio }, tau)
    }

    pub fn new(variant: KernelVariant, tau: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(FredholmError::InvalidSpec(format!(
                "tau = {tau} outside [0, 1]"
            )));
        }
        if let KernelVariant::General { ratio } = variant {
            if ratio.is_nan() || ratio < 0.0 {
                return Err(FredholmError::InvalidSpec(format!(
                    "ratio = {ratio} must be >= 0"
                )));
            }
        }
        Ok(KernelSpec { variant, tau })
    }

    pub fn is_critical(&self) -> bool {
        self.tau == 1.0
    }

    /// Coefficient κ of the polar part κ/(1 − xy) at τ = 1.
    pub fn polar_strength(&self) -> f64 {
        match self.variant {
            KernelVariant::General { ratio } if ratio == 0.0 => 2.0,
            _ => 1.0,
        }
    }
}

/// ψ(t) = Σ_{k≥1} πk C(2k,k)² t^{k−1}/16^k.
pub fn psi(t: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(FredholmError::Domain(t));
    }
    Ok(psi_split(t, 1.0 - t))
}

/// ψ(t) given t and 1 − t separately. Uses the series for small t and
/// ψ(t) = (E(t)/(1 − t) − K(t))/t (parameter convention) otherwise.
pub fn psi_split(t: f64, one_minus_t: f64) -> f64 {
    if t < 0.5 {
        let mut coef = PI / 4.0;
        let mut sum = coef;
        let mut tp = 1.0;
        for k in 1..400 {
            let kf = k as f64;
            coef *= (2.0 * kf + 1.0).powi(2) / (4.0 * kf * (kf + 1.0));
            tp *= t;
            let term = coef * tp;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum
    } else {
        let (k, e) = complete_integrals(t, one_minus_t);
        (e / one_minus_t - k) / t
    }
}

/// Normalised ring couplings a = h1/(h1 + 2h2), c = h2/(h1 + 2h2).
#[derive(Clone, Copy, Debug)]
struct Couplings {
    a: f64,
    c: f64,
}

impl Couplings {
    fn of(variant: KernelVariant) -> Self {
        match variant {
            KernelVariant::Rigid => Couplings { a: 1.0, c: 0.0 },
            KernelVariant::General { ratio } if ratio.is_infinite() => Couplings { a: 1.0, c: 0.0 },
            KernelVariant::General { ratio } => Couplings {
                a: ratio / (ratio + 2.0),
                c: 1.0 / (ratio + 2.0),
            },
        }
    }

    /// Λ± at u = 1/ζ with w = 1 − u supplied exactly; returns
    /// [(Λ₊, 1 − Λ₊), (Λ₋, 1 − Λ₋)].
    fn branches(&self, u: f64, w: f64) -> [(f64, f64); 2] {
        let (a, c) = (self.a, self.c);
        let ru = u.sqrt();
        let s = (1.0 - (a - 2.0 * c) * w).max(0.0).sqrt();
        let p = a * ru + s;
        let d = 1.0 - c * u;
        let plus = p * p / (4.0 * d * d);
        let bracket = (a - 2.0 * c) / (1.0 + s) + 2.0 * c + a / (1.0 + ru);
        let plus_gap = w * bracket * (2.0 * d + p) / (4.0 * d * d);
        if c == 0.0 {
            return [(plus, plus_gap), (0.0, 1.0)];
        }
        let minus = 4.0 * c * c / (p * p);
        let q = a * (1.0 + ru) + 2.0 * c * w / (1.0 + s) - a * w / (1.0 + s);
        let minus_gap = q * (p + 2.0 * c) / (p * p);
        [(plus, plus_gap), (minus, minus_gap)]
    }
}

/// K_τ(x, y) for (x, y) ∈ [0, 1]².
pub fn kernel(spec: &KernelSpec, x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(FredholmError::Domain(x.max(y)));
    }
    if spec.is_critical() && x == 1.0 && y == 1.0 {
        return Err(FredholmError::SingularPoint);
    }
    Ok(kernel_complement(spec, 1.0 - x, 1.0 - y))
}

/// K_τ evaluated from the complements s_x = 1 − x, s_y = 1 − y.
pub fn kernel_complement(spec: &KernelSpec, sx: f64, sy: f64) -> f64 {
    let tau = spec.tau;
    if tau == 0.0 {
        return 0.0;
    }
    let (x, y) = (1.0 - sx, 1.0 - sy);
    let one_m_tau = 1.0 - tau;
    match spec.variant {
        KernelVariant::Rigid => {
            let t = tau * tau * x * y;
            let gap = one_m_tau * (1.0 + tau) + tau * tau * (sx + sy - sx * sy);
            tau * tau * y * psi_split(t, gap)
        }
        KernelVariant::General { .. } => general_kernel(spec, sx, sy),
    }
}

/// General kernel as a real integral over the cut of (1 − τyζ)^{−1/2}:
/// K = ∫₀^{π/2} dφ Σ± τΛ±(ζ)(1 − τxΛ±(ζ))^{−3/2}, ζ = 1/(τy sin²φ).
fn general_kernel(spec: &KernelSpec, sx: f64, sy: f64) -> f64 {
    let tau = spec.tau;
    let cp = Couplings::of(spec.variant);
    let (x, y) = (1.0 - sx, 1.0 - sy);
    let one_m_tau = 1.0 - tau;
    // θ = π/2 − φ; the integrand peaks at θ = 0 with width ~ √(gap)
    let integrand = |theta: f64| {
        let st = theta.sin();
        let ct2 = 1.0 - st * st;
        let u = tau * y * ct2;
        let w = one_m_tau + tau * sy + tau * y * st * st;
        let mut acc = 0.0;
        for (lam, lam_gap) in cp.branches(u, w) {
            if lam == 0.0 {
                continue;
            }
            let denom = one_m_tau + tau * sx + tau * x * lam_gap;
            acc += tau * lam * denom.powf(-1.5);
        }
        acc
    };
    let width = (one_m_tau + sx + sy).sqrt().max(1e-9);
    let rule = GlRule::new(12);
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut hi = width.min(0.5 * PI);
    loop {
        total += rule.integrate(lo, hi, integrand);
        if hi >= 0.5 * PI {
            break;
        }
        lo = hi;
        hi = (hi * 6.0).min(0.5 * PI);
    }
    total
}

/// The same kernel from the contour integral over |ζ| = ζ₀,
/// K = ∮ dζ/(2iζ) (1 − τyζ)^{−1/2} · ½ Σ± τΛ±(1 − τxΛ±)^{−3/2},
/// by the trapezoidal rule with the given number of points.
pub fn kernel_contour(spec: &KernelSpec, x: f64, y: f64, points: usize) -> Result<f64> {
    use num_complex::Complex64 as C;
    let tau = spec.tau;
    if tau == 0.0 {
        return Ok(0.0);
    }
    let cp = Couplings::of(spec.variant);
    let lambda_plus_real = |u: f64| cp.branches(u, 1.0 - u)[0].0;
    // Λ₊ is an involution, so Λ₊^{-1}(1/(τx)) = Λ₊(1/(τx)), i.e. u = τx
    let lower = if tau * x == 0.0 {
        cp.c
    } else {
        lambda_plus_real(tau * x)
    };
    let upper = if y == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (tau * y)
    };
    if lower >= upper {
        return Err(FredholmError::Bracket { lower, upper });
    }
    let zeta0 = if upper.is_infinite() {
        2.0 * lower + 1.0
    } else if lower == 0.0 {
        0.5 * upper
    } else {
        (lower * upper).sqrt()
    };
    let (a, c) = (cp.a, cp.c);
    let mut acc = C::new(0.0, 0.0);
    for j in 0..points {
        let th = 2.0 * PI * (j as f64 + 0.5) / points as f64;
        let zeta = C::from_polar(zeta0, th);
        let u = 1.0 / zeta;
        let ru = u.sqrt();
        let s = (a * a * u + 4.0 * c * (1.0 - c * u)).sqrt();
        let p = a * ru + s;
        let d = 1.0 - c * u;
        let plus = p * p / (4.0 * d * d);
        let minus = 4.0 * c * c / (p * p);
        let mut branch_sum = C::new(0.0, 0.0);
        for lam in [plus, minus] {
            if lam.norm() == 0.0 {
                continue;
            }
            branch_sum += tau * lam * (1.0 - tau * x * lam).powf(-1.5);
        }
        acc += (1.0 - tau * y * zeta).powf(-0.5) * 0.5 * branch_sum;
    }
    Ok((PI * acc / points as f64).re)
}

/// Quadrature nodes on [0, 1] with their complements.
#[derive(Clone, Debug, Serialize)]
pub struct Grid {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
}

impl Grid {
    /// Gauss–Legendre with n nodes.
    pub fn gauss(n: usize) -> Self {
        let (t, w) = gauss_legendre(n);
        Grid {
            x: t.iter().map(|t| 0.5 * (1.0 + t)).collect(),
            s: t.iter().map(|t| 0.5 * (1.0 - t)).collect(),
            w: w.iter().map(|w| 0.5 * w).collect(),
        }
    }

    /// Geometric panels [2^{−j−1}, 2^{−j}] in s = 1 − x (j < panels), plus a
    /// last panel [0, 2^{−panels}], each carrying `per_panel` Gauss points.
    pub fn graded(per_panel: usize, panels: usize) -> Self {
        let (t, w) = gauss_legendre(per_panel);
        let mut pts: Vec<(f64, f64)> = Vec::new();
        let mut push_panel = |a: f64, b: f64| {
            for (ti, wi) in t.iter().zip(&w) {
                pts.push((0.5 * (a + b) + 0.5 * (b - a) * ti, 0.5 * (b - a) * wi));
            }
        };
        for j in 0..panels {
            let hi = 0.5f64.powi(j as i32);
            push_panel(0.5 * hi, hi);
        }
        push_panel(0.0, 0.5f64.powi(panels as i32));
        pts.sort_by(|p, q| q.0.partial_cmp(&p.0).unwrap());
        Grid {
            x: pts.iter().map(|p| 1.0 - p.0).collect(),
            s: pts.iter().map(|p| p.0).collect(),
            w: pts.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Number of geometric panels used at τ = 1.
pub const CRITICAL_PANELS: usize = 50;

/// Nyström solution of the integral equation.
#[derive(Clone, Debug, Serialize)]
pub struct FredholmSolution {
    pub spec: KernelSpec,
    pub n: f64,
    pub rho: f64,
    pub nodes: Vec<f64>,
    pub complements: Vec<f64>,
    pub weights: Vec<f64>,
    pub f_values: Vec<f64>,
    pub f1_values: Vec<f64>,
    pub fid_values: Vec<f64>,
    pub residual: f64,
    pub f_at_1: f64,
    pub f1_at_1: f64,
    pub fid_at_1: f64,
    pub integral: f64,
}

impl FredholmSolution {
    /// ρ_c = f1(1)/f_id(1).
    pub fn critical_rho(&self) -> Result<f64> {
        if self.fid_at_1 == 0.0 || !self.fid_at_1.is_finite() {
            return Err(FredholmError::VanishingIdentity);
        }
        Ok(self.f1_at_1 / self.fid_at_1)
    }

    /// ∫₀¹ x^p f(x) dx.
    pub fn moment(&self, p: u32) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .zip(&self.f_values)
            .map(|((x, w), f)| w * x.powi(p as i32) * f)
            .sum()
    }

    /// F_p = C(2p, p) ∫x^p f / (∫f)^{p+1}.
    pub fn f_p(&self, p: u32) -> f64 {
        let ln_c = crate::quad::ln_binomial(2 * p as u64, p as u64);
        ln_c.exp() * self.moment(p) / self.integral.powi(p as i32 + 1)
    }

    /// f(1) by three-point Lagrange extrapolation from the nodes nearest 1.
    pub fn endpoint_lagrange(&self) -> f64 {
        let k = self.nodes.len();
        let idx: Vec<usize> = (k.saturating_sub(3)..k).collect();
        let xs: Vec<f64> = idx.iter().map(|&i| self.nodes[i]).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| self.f_values[i]).collect();
        lagrange_eval(&xs, &ys, 1.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,f,f1,f_id\n");
        for i in 0..self.nodes.len() {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.nodes[i], self.f_values[i], self.f1_values[i], self.fid_values[i]
            ));
        }
        out
    }
}

fn kernel_matrix(spec: &KernelSpec, grid: &Grid) -> DMatrix<f64> {
    use rayon::prelude::*;
    let m = grid.len();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|j| kernel_complement(spec, grid.s[i], grid.s[j]))
                .collect()
        })
        .collect();
    DMatrix::from_fn(m, m, |i, j| rows[i][j])
}

/// ∫₀¹ dy/(1 − xy) = −ln(1 − x)/x.
fn polar_integral(x: f64, s: f64) -> f64 {
    if x < 1e-8 {
        1.0 + 0.5 * x
    } else {
        -s.ln() / x
    }
}

/// Solves the equation on the given grid. At τ = 1 the polar part κ/(1 − xy)
/// is subtracted and integrated exactly.
pub fn solve_on(spec: &KernelSpec, n: f64, rho: f64, grid: &Grid) -> Result<FredholmSolution> {
    if !(n >= 0.0) || !rho.is_finite() {
        return Err(FredholmError::InvalidSpec(format!("n = {n}, rho = {rho}")));
    }
    let m = grid.len();
    let lam = n / (2.0 * PI);
    let kmat = kernel_matrix(spec, grid);
    let mut a = DMatrix::<f64>::identity(m, m);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] += lam * grid.w[j] * kmat[(i, j)];
        }
    }
    if spec.is_critical() {
        let kappa = spec.polar_strength();
        for i in 0..m {
            let (xi, si) = (grid.x[i], grid.s[i]);
            let discrete: f64 = (0..m)
                .map(|j| grid.w[j] / (si + grid.s[j] - si * grid.s[j]))
                .sum();
            a[(i, i)] += lam * kappa * (polar_integral(xi, si) - discrete);
        }
    }
    let lu = a.clone().lu();
    let ones = DVector::from_element(m, 1.0);
    let xs = DVector::from_vec(grid.x.clone());
    let f1 = lu.solve(&ones).ok_or(FredholmError::SingularSystem)?;
    let fid = lu.solve(&xs).ok_or(FredholmError::SingularSystem)?;
    if f1.iter().chain(fid.iter()).any(|v| !v.is_finite()) {
        return Err(FredholmError::SingularSystem);
    }
    let f = &f1 - &fid * rho;
    let rhs = &ones - &xs * rho;
    let residual = (&a * &f - rhs).amax();

    // endpoint values from the Nyström interpolant (τ < 1) or zero (τ = 1,
    // where the polar kernel forces f(1) = 0)
    let (f1_at_1, fid_at_1) = if spec.is_critical() {
        (0.0, 0.0)
    } else {
        let krow: Vec<f64> = (0..m)
            .map(|j| grid.w[j] * kernel_complement(spec, 0.0, grid.s[j]))
            .collect();
        let dot = |v: &DVector<f64>| krow.iter().zip(v.iter()).map(|(k, f)| k * f).sum::<f64>();
        (1.0 - lam * dot(&f1), 1.0 - lam * dot(&fid))
    };
    let integral = grid.w.iter().zip(f.iter()).map(|(w, f)| w * f).sum();
    Ok(FredholmSolution {
        spec: *spec,
        n,
        rho,
        nodes: grid.x.clone(),
        complements: grid.s.clone(),
        weights: grid.w.clone(),
        f_values: f.iter().copied().collect(),
        f1_values: f1.iter().copied().collect(),
        fid_values: fid.iter().copied().collect(),
        residual,
        f_at_1: f1_at_1 - rho * fid_at_1,
        f1_at_1,
        fid_at_1,
        integral,
    })
}

/// Nyström solve with `grid` Gauss points (τ < 1) or `grid` points on each
/// of the geometric panels (τ = 1).
pub fn solve(spec: &KernelSpec, n: f64, rho: f64, grid: usize) -> Result<FredholmSolution> {
    if grid < 16 {
        return Err(FredholmError::InvalidSpec(format!("grid = {grid} < 16")));
    }
    let g = if spec.is_critical() {
        Grid::graded(grid, CRITICAL_PANELS)
    } else {
        Grid::gauss(grid)
    };
    solve_on(spec, n, rho, &g)
}

/// ρ_c = f1(1)/f_id(1) for τ < 1.
pub fn critical_rho(spec: &KernelSpec, n: f64, grid: usize) -> Result<f64> {
    if spec.is_critical() {
        return Err(FredholmError::InvalidSpec(
            "critical_rho needs tau < 1".into(),
        ));
    }
    solve(spec, n, 0.0, grid)?.critical_rho()
}

/// Largest ρ keeping f = f1 − ρ f_id positive at every node and at x = 1,
/// found directly from the node values (f is linear in ρ).
pub fn positivity_threshold(spec: &KernelSpec, n: f64, grid: usize) -> Result<f64> {
    let sol = solve(spec, n, 0.0, grid)?;
    let ratios = sol
        .f1_values
        .iter()
        .zip(&sol.fid_values)
        .chain(std::iter::once((&sol.f1_at_1, &sol.fid_at_1)))
        .filter(|(_, &d)| d > 0.0)
        .map(|(&a, &d)| a / d);
    Ok(ratios.fold(f64::INFINITY, f64::min))
}

/// Result of the log-log fit f ~ C(1 − x)^α at τ = 1.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub rms: f64,
    pub points: usize,
    /// 1/2 − b and 1/2 + b, with 2cos πb = κn for polar strength κ.
    pub predicted: [f64; 2],
}

/// Fits the exponent of f near x = 1 over s ∈ [1e−12, 1e−7].
pub fn exponent_alpha(spec: &KernelSpec, n: f64, rho: f64, grid: usize) -> Result<AlphaFit> {
    if !spec.is_critical() {
        return Err(FredholmError::InvalidSpec(
            "exponent_alpha needs tau = 1".into(),
        ));
    }
    if !(n > 0.0 && n < 2.0) {
        return Err(FredholmError::InvalidSpec(format!(
            "n = {n} outside (0, 2)"
        )));
    }
    let sol = solve(spec, n, rho, grid)?;
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (s, f) in sol.complements.iter().zip(&sol.f_values) {
        if (1e-12..=1e-7).contains(s) && *f != 0.0 {
            lx.push(s.ln());
            ly.push(f.abs().ln());
        }
    }
    if lx.len() < 4 {
        return Err(FredholmError::FitWindow);
    }
    let (alpha, _, rms) = fit_line(&lx, &ly);
    let cos_pb = (0.5 * spec.polar_strength() * n).min(1.0);
    let b = cos_pb.acos() / PI;
    Ok(AlphaFit {
        alpha,
        rms,
        points: lx.len(),
        predicted: [0.5 - b, 0.5 + b],
    })
}

/// R(1) from the consistency relation R·∫f = 1, with ρ = 6gR and
/// τ = 4zR, z = h1 + 2h2 (z = h1 for rigid rings). Returns the smallest root
/// in (0, 1/(4z)).
pub fn consistency_r1(
    variant: KernelVariant,
    n: f64,
    g: f64,
    z: f64,
    grid: usize,
) -> Result<(f64, FredholmSolution)> {
    if !(z > 0.0) {
        return Err(FredholmError::InvalidSpec(format!(
            "z = {z} must be positive"
        )));
    }
    let r_max = 1.0 / (4.0 * z) * (1.0 - 1e-9);
    let eval = |r: f64| -> Result<(f64, FredholmSolution)> {
        let spec = KernelSpec::new(variant, 4.0 * z * r)?;
        let sol = solve(&spec, n, 6.0 * g * r, grid)?;
        Ok((r * sol.integral - 1.0, sol))
    };
    let steps = 64;
    let mut prev_r = 0.0;
    let mut prev_v = -1.0;
    for k in 1..=steps {
        let r = r_max * k as f64 / steps as f64;
        let (v, _) = eval(r)?;
        if v >= 0.0 && prev_v < 0.0 {
            let root = brent(
                |r| eval(r).map(|e| e.0).unwrap_or(f64::NAN),
                prev_r,
                r,
                1e-15,
            )
            .ok_or(FredholmError::NoConsistentRoot)?;
            let (_, sol) = eval(root)?;
            return Ok((root, sol));
        }
        prev_r = r;
        prev_v = v;
    }
    Err(FredholmError::NoConsistentRoot)
}
