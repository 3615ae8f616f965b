//! The gasket fixed point: effective face weights of the loop model
//!
//! ```text
//! g_k = g_k^{base} + n Σ_{k'≥0} A_{k,k'} F_{k'}(g)
//! ```
//!
//! solved numerically by monotone Picard iteration and exactly, order by
//! order, over the rationals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maps::{ln_fk_table, solve_r, WeightSequence};
use crate::quad::fit_line;
use crate::rings::log_sum_exp;
use crate::rings::{
    eigen_fixed_point, ln_ring_table, ring_gf_coefficients, RingError, RingVariant, RingWeights,
};
use crate::series::{binomial, solve_series_system, MultiSeries, Rational, SeriesError};

#[derive(Debug, Error)]
pub enum NestedError {
    #[error("solution did not converge (status {0:?})")]
    NotConverged(GasketStatus),
    #[error("degenerate fit window [{0}, {1}]")]
    DegenerateWindow(usize, usize),
    #[error("ring weights: {0}")]
    Ring(#[from] RingError),
    #[error("series: {0}")]
    Series(#[from] SeriesError),
    #[error("order {0} exceeds the supported cap {1}")]
    OrderTooLarge(u32, u32),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopModelParams {
    pub n: f64,
    pub g: f64,
    pub ring: RingWeights,
    /// Weights g^{(m)} of regular faces of degree 2m, m = 1, 2, ...; when
    /// absent the only regular faces are squares of weight `g`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_weights: Option<Vec<f64>>,
}

impl LoopModelParams {
    pub fn symmetric(n: f64, g: f64, h1: f64, h2: f64) -> Self {
        LoopModelParams {
            n,
            g,
            ring: RingWeights::symmetric(h1, h2),
            face_weights: None,
        }
    }

    pub fn rigid(n: f64, g: f64, h1: f64) -> Self {
        Self::symmetric(n, g, h1, 0.0)
    }

    fn validate(&self) -> Result<(), NestedError> {
        let bad = |x: f64| !(x.is_finite() && x >= 0.0);
        if bad(self.n) || bad(self.g) {
            return Err(NestedError::InvalidParams(
                "n and g must be non-negative".into(),
            ));
        }
        match self.ring.variant {
            RingVariant::Symmetric { h1, h2 } if bad(h1) || bad(h2) => Err(
                NestedError::InvalidParams("h1 and h2 must be non-negative".into()),
            ),
            RingVariant::NonSymmetric { h1, h2_out, h2_in }
                if bad(h1) || bad(h2_out) || bad(h2_in) =>
            {
                Err(NestedError::InvalidParams(
                    "ring weights must be non-negative".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// ln of the loop-free part of g_k for k = 1..=kmax.
    fn ln_base(&self, kmax: usize) -> Vec<f64> {
        let mut base = vec![0.0; kmax];
        match &self.face_weights {
            Some(fw) => {
                for (i, w) in fw.iter().enumerate().take(kmax) {
                    base[i] = *w;
                }
            }
            None => {
                if kmax >= 2 {
                    base[1] = self.g;
                }
            }
        }
        base.iter().map(|b| b.ln()).collect()
    }

    /// z* with 1/(4R(1)) = z* at a non-generic point; τ = 4 R(1) z*.
    pub fn zstar(&self) -> Result<f64, NestedError> {
        match self.ring.zstar_closed_form() {
            Some(z) => Ok(z),
            None => Ok(eigen_fixed_point(&self.ring)?.zstar),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GasketStatus {
    Converged,
    IllDefined,
    /// Iteration cap reached while the iterates were still increasing.
    Unconverged,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GasketConfig {
    pub kmax: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Largest inner boundary half-length k' summed in Σ A_{k,k'} F_{k'}.
    pub kprime_max: usize,
    /// Relative margin on τ ≤ 1 before declaring the point ill-defined.
    pub tau_margin: f64,
}

impl GasketConfig {
    pub fn new(kmax: usize, tol: f64, max_iter: usize) -> Self {
        GasketConfig {
            kmax,
            tol,
            max_iter,
            kprime_max: (8 * kmax).max(512),
            tau_margin: 1e-6,
        }
    }
}

/// Relative-change floor below which rounding noise dominates.
pub const TOL_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GasketSolution {
    pub params: LoopModelParams,
    pub kmax: usize,
    pub weights: Vec<f64>,
    #[serde(skip)]
    ln_weights: Vec<f64>,
    #[serde(rename = "R1")]
    pub r1: f64,
    pub fk: Vec<f64>,
    pub tau: f64,
    pub status: GasketStatus,
    pub iterations: usize,
    pub residual: f64,
    /// Estimate of the neglected Σ_{k' > kprime_max} contribution relative to g_k.
    pub tail_estimate: f64,
    /// Whether every iterate was componentwise non-decreasing.
    pub monotone: bool,
}

impl GasketSolution {
    pub fn weight_sequence(&self) -> WeightSequence {
        WeightSequence::from_ln(self.ln_weights.clone())
    }

    pub fn is_converged(&self) -> bool {
        self.status == GasketStatus::Converged
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}

struct Update {
    ln_g: Vec<f64>,
    tail: f64,
}

fn apply_map(ln_base: &[f64], ln_n: f64, table: &[Vec<(usize, f64)>], ln_f: &[f64]) -> Update {
    let mut tail: f64 = 0.0;
    let ln_g = ln_base
        .iter()
        .zip(table)
        .map(|(b, row)| {
            let terms: Vec<f64> = row.iter().map(|(kp, la)| la + ln_f[*kp]).collect();
            let loops = ln_n + log_sum_exp(&terms);
            let total = log_sum_exp(&[*b, loops]);
            if let (Some(last), Some(prev)) = (terms.last(), terms.iter().rev().nth(1)) {
                // geometric continuation of the last two terms
                let ratio = (last - prev).exp();
                if ratio < 1.0 {
                    let t = (ln_n + last - total).exp() * ratio / (1.0 - ratio);
                    tail = tail.max(t);
                } else {
                    tail = f64::INFINITY;
                }
            }
            total
        })
        .collect();
    Update { ln_g, tail }
}

pub fn solve_gasket(
    params: &LoopModelParams,
    kmax: usize,
    tol: f64,
    max_iter: usize,
) -> Result<GasketSolution, NestedError> {
    solve_gasket_with(params, &GasketConfig::new(kmax, tol, max_iter))
}

pub fn solve_gasket_with(
    params: &LoopModelParams,
    cfg: &GasketConfig,
) -> Result<GasketSolution, NestedError> {
    params.validate()?;
    if cfg.kmax < 2 {
        return Err(NestedError::InvalidParams("Kmax must be at least 2".into()));
    }
    let tol = cfg.tol.max(TOL_FLOOR);
    let ln_base = params.ln_base(cfg.kmax);
    let table = ln_ring_table(&params.ring, cfg.kmax, cfg.kprime_max)?;
    let kp_used = table
        .iter()
        .flat_map(|r| r.iter().map(|(kp, _)| *kp))
        .max()
        .unwrap_or(0);
    let zstar = params.zstar().unwrap_or(f64::NAN);
    let ln_n = params.n.ln();

    let mut ln_g = ln_base.clone();
    let mut status = GasketStatus::Unconverged;
    let mut iterations = 0;
    let mut monotone = true;
    let mut tail = 0.0;
    let mut last_change = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        iterations = it;
        let ws = WeightSequence::from_ln(ln_g.clone());
        let r1 = solve_r(&ws, 1.0, 1e-14);
        if !r1.is_finite() || (params.n > 0.0 && 4.0 * r1 * zstar > 1.0 + cfg.tau_margin) {
            status = GasketStatus::IllDefined;
            break;
        }
        let ln_f = ln_fk_table(&ws, r1, kp_used.max(cfg.kmax));
        let up = apply_map(&ln_base, ln_n, &table, &ln_f);
        tail = up.tail;
        let mut change: f64 = 0.0;
        for (new, old) in up.ln_g.iter().zip(&ln_g) {
            if new.is_finite() || old.is_finite() {
                let d = if old.is_finite() {
                    new - old
                } else {
                    f64::INFINITY
                };
                if d < -1e-12 {
                    monotone = false;
                }
                change = change.max(d.abs());
            }
        }
        ln_g = up.ln_g;
        last_change = change;
        if change <= tol {
            status = GasketStatus::Converged;
            break;
        }
    }
    if status == GasketStatus::Unconverged && !last_change.is_finite() {
        status = GasketStatus::IllDefined;
    }

    let ws = WeightSequence::from_ln(ln_g.clone());
    let r1 = solve_r(&ws, 1.0, 1e-14);
    let (fk, residual) = if r1.is_finite() {
        let ln_f = ln_fk_table(&ws, r1, kp_used.max(cfg.kmax));
        let up = apply_map(&ln_base, ln_n, &table, &ln_f);
        let residual = up
            .ln_g
            .iter()
            .zip(&ln_g)
            .map(|(a, b)| (a.exp() - b.exp()).abs() / (1.0 + b.exp()))
            .fold(0.0, f64::max);
        (
            ln_f[..=cfg.kmax].iter().map(|l| l.exp()).collect(),
            residual,
        )
    } else {
        (vec![], f64::INFINITY)
    };
    if status == GasketStatus::Converged
        && params.n > 0.0
        && 4.0 * r1 * zstar > 1.0 + cfg.tau_margin
    {
        status = GasketStatus::IllDefined;
    }
    Ok(GasketSolution {
        params: params.clone(),
        kmax: cfg.kmax,
        weights: ln_g.iter().map(|l| l.exp()).collect(),
        ln_weights: ln_g,
        r1,
        fk,
        tau: 4.0 * r1 * if zstar.is_nan() { 0.0 } else { zstar },
        status,
        iterations,
        residual,
        tail_estimate: tail,
        monotone,
    })
}

pub fn f_p_loop(sol: &GasketSolution, p: usize) -> Result<f64, NestedError> {
    if !sol.is_converged() {
        return Err(NestedError::NotConverged(sol.status));
    }
    if p == 0 {
        return Ok(1.0);
    }
    if p < sol.fk.len() {
        return Ok(sol.fk[p]);
    }
    let ws = sol.weight_sequence();
    Ok(ln_fk_table(&ws, sol.r1, p)[p].exp())
}

pub fn tau(sol: &GasketSolution) -> f64 {
    sol.tau
}

/// |1/(4R(1)) − z*|, which vanishes at a non-generic critical point.
pub fn exponential_rate_gap(sol: &GasketSolution) -> Result<f64, NestedError> {
    Ok((1.0 / (4.0 * sol.r1) - sol.params.zstar()?).abs())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExponentFit {
    pub a: f64,
    pub rms: f64,
}

/// Fit of F_k ~ χ (4R(1))^k k^{−a} over kmin..=kmax.
pub fn estimate_exponent(
    sol: &GasketSolution,
    kmin: usize,
    kmax: usize,
) -> Result<ExponentFit, NestedError> {
    if kmax < kmin + 10 || kmin == 0 || kmax > sol.kmax {
        return Err(NestedError::DegenerateWindow(kmin, kmax));
    }
    if !sol.is_converged() {
        return Err(NestedError::NotConverged(sol.status));
    }
    let ws = sol.weight_sequence();
    let ln_f = ln_fk_table(&ws, sol.r1, kmax);
    Ok(exponent_from_ln_fk(&ln_f, sol.r1, kmin, kmax))
}

/// Exponent fit from a table of ln F_k.
pub fn exponent_from_ln_fk(ln_f: &[f64], r1: f64, kmin: usize, kmax: usize) -> ExponentFit {
    let rate = (4.0 * r1).ln();
    let xs: Vec<f64> = (kmin..=kmax).map(|k| (k as f64).ln()).collect();
    let ys: Vec<f64> = (kmin..=kmax).map(|k| ln_f[k] - k as f64 * rate).collect();
    let (slope, _, rms) = fit_line(&xs, &ys);
    ExponentFit { a: -slope, rms }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesRing {
    Symmetric,
    Rigid,
}

pub const SERIES_ORDER_CAP: u32 = 10;
pub const SERIES_VARIABLES: [&str; 4] = ["n", "g", "h1", "h2"];

/// ∫₀¹ du applied termwise, keeping u in the variable list with exponent 0.
fn integrate_u(s: &MultiSeries, u_index: usize) -> MultiSeries {
    let mut out = s.zero_like();
    for (mono, c) in s.terms() {
        let mut e = mono.0.clone();
        let m = e[u_index];
        e[u_index] = 0;
        out.insert(e, c / Rational::from_integer((m as i64 + 1).into()));
    }
    out
}

/// Exact expansion of F_p^loop in (n, g, h1, h2) up to total degree `order`.
pub fn series_f_p_loop(p: usize, order: u32, ring: SeriesRing) -> Result<MultiSeries, NestedError> {
    Ok(series_f_loop_table(p, order, ring)?.swap_remove(p))
}

/// F_0^loop ..= F_pmax^loop as exact series.
pub fn series_f_loop_table(
    pmax: usize,
    order: u32,
    ring: SeriesRing,
) -> Result<Vec<MultiSeries>, NestedError> {
    if order > SERIES_ORDER_CAP {
        return Err(NestedError::OrderTooLarge(order, SERIES_ORDER_CAP));
    }
    // u carries grading 0: it is integrated out, not a small parameter.
    let vars = ["n", "g", "h1", "h2", "u"];
    let zero = MultiSeries::zero_graded(&vars, &[1, 1, 1, 1, 0], order);
    let nvar = zero.var_like("n")?;
    let gvar = zero.var_like("g")?;
    let h1 = zero.var_like("h1")?;
    let h2 = zero.var_like("h2")?;
    let u = zero.var_like("u")?;
    let kmax = order.max(2) as usize;
    let kpmax = order as usize;
    let pmax_all = kpmax.max(pmax);

    // A_{k,k'} as exact series
    let mut ring_series = vec![vec![zero.clone(); kpmax + 1]; kmax + 1];
    for k in 1..=kmax {
        for kp in 0..=kpmax {
            if (k + kp) as u32 > order {
                continue;
            }
            ring_series[k][kp] = match ring {
                SeriesRing::Rigid => {
                    if k == kp {
                        h1.pow(2 * k as u32)
                    } else {
                        zero.clone()
                    }
                }
                SeriesRing::Symmetric => {
                    let mut acc = zero.clone();
                    for (j, c) in ring_gf_coefficients(k, kp) {
                        let term = h1
                            .pow(2 * j as u32)
                            .mul(&h2.pow((k + kp - 2 * j) as u32))?
                            .scale(&c);
                        acc = acc.add(&term)?;
                    }
                    acc
                }
            };
        }
    }
    let central = |k: usize| Rational::from_integer(binomial(2 * k as u64, k as u64));
    let odd_central = |k: usize| Rational::from_integer(binomial(2 * k as u64 - 1, k as u64));

    // Unknowns: [R(u), g_1, ..., g_kmax].
    let start = vec![zero.clone(); kmax + 1];
    let sol = solve_series_system(&start, |x| {
        let r = &x[0];
        let mut phi = zero.clone();
        let mut rpow = zero.one_like();
        for k in 1..=kmax {
            rpow = rpow.mul(r)?;
            if x[k].is_zero() {
                continue;
            }
            phi = phi.add(&x[k].mul(&rpow)?.scale(&odd_central(k)))?;
        }
        let new_r = u.add(&phi)?;
        // F_{k'} from the current R(u)
        let mut fk = Vec::with_capacity(kpmax + 1);
        let mut rp = zero.one_like();
        for kp in 0..=kpmax {
            if kp > 0 {
                rp = rp.mul(r)?;
            }
            fk.push(integrate_u(&rp, 4).scale(&central(kp)));
        }
        let mut out = vec![new_r];
        for k in 1..=kmax {
            let mut gk = if k == 2 { gvar.clone() } else { zero.clone() };
            let mut loops = zero.clone();
            for kp in 0..=kpmax {
                if ring_series[k][kp].is_zero() {
                    continue;
                }
                loops = loops.add(&ring_series[k][kp].mul(&fk[kp])?)?;
            }
            gk = gk.add(&nvar.mul(&loops)?)?;
            out.push(gk);
        }
        Ok(out)
    })?;
    let r = &sol[0];
    let mut out = Vec::with_capacity(pmax + 1);
    let mut rp = zero.one_like();
    for p in 0..=pmax_all.min(pmax) {
        if p > 0 {
            rp = rp.mul(r)?;
        }
        out.push(rp.scale(&central(p)).definite_integral_unit("u")?);
    }
    Ok(out)
}
