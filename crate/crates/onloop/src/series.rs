//! Exact multivariate truncated power series over arbitrary-precision rationals.
//!
//! A [`MultiSeries`] keeps only monomials whose graded degree does not exceed
//! its truncation order. Every variable carries a grading weight (1 unless
//! stated otherwise); a weight-0 variable is carried along untruncated, which
//! is how the boundary variable `u` of R(u) rides along with the physical
//! weights.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = num_rational::BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("variable lists differ: {0:?} vs {1:?}")]
    MismatchedVariables(Vec<String>, Vec<String>),
    #[error("truncation orders differ: {0} vs {1}")]
    MismatchedOrder(u32, u32),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("fixed-point iteration did not stabilise within {0} steps")]
    NonContraction(u32),
    #[error("malformed series text: {0}")]
    Parse(String),
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Exponent tuple, ordered by total degree first, then reverse lexicographic
/// on the tuple so that `x` precedes `y` within a degree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(pub Vec<u32>);

impl Monomial {
    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiSeries {
    vars: Vec<String>,
    grading: Vec<u32>,
    order: u32,
    terms: BTreeMap<Monomial, Rational>,
}

impl MultiSeries {
    /// Zero series in `vars` with unit grading.
    pub fn zero(vars: &[&str], order: u32) -> Self {
        Self::zero_graded(vars, &vec![1; vars.len()], order)
    }

    pub fn zero_graded(vars: &[&str], grading: &[u32], order: u32) -> Self {
        assert_eq!(vars.len(), grading.len(), "one grading weight per variable");
        MultiSeries {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            grading: grading.to_vec(),
            order,
            terms: BTreeMap::new(),
        }
    }

    /// Empty series sharing the variables, grading and order of `self`.
    pub fn zero_like(&self) -> Self {
        MultiSeries {
            vars: self.vars.clone(),
            grading: self.grading.clone(),
            order: self.order,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant_like(&self, c: Rational) -> Self {
        let mut s = self.zero_like();
        s.insert(vec![0; self.vars.len()], c);
        s
    }

    pub fn one_like(&self) -> Self {
        self.constant_like(Rational::one())
    }

    /// The series consisting of a single variable.
    pub fn var_like(&self, name: &str) -> Result<Self, SeriesError> {
        let i = self.index_of(name)?;
        let mut e = vec![0; self.vars.len()];
        e[i] = 1;
        let mut s = self.zero_like();
        s.insert(e, Rational::one());
        Ok(s)
    }

    pub fn monomial_like(&self, exps: Vec<u32>, c: Rational) -> Self {
        let mut s = self.zero_like();
        s.insert(exps, c);
        s
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    pub fn grading(&self) -> &[u32] {
        &self.grading
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize, SeriesError> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| SeriesError::UnknownVariable(name.to_string()))
    }

    fn degree_of(&self, e: &[u32]) -> u32 {
        e.iter().zip(&self.grading).map(|(a, w)| a * w).sum()
    }

    /// Inserts (adds) a term, dropping it if it exceeds the order.
    pub fn insert(&mut self, exps: Vec<u32>, c: Rational) {
        assert_eq!(exps.len(), self.vars.len());
        if c.is_zero() || self.degree_of(&exps) > self.order {
            return;
        }
        let key = Monomial(exps);
        match self.terms.get_mut(&key) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, c);
            }
        }
    }

    pub fn coeff(&self, exps: &[u32]) -> Rational {
        self.terms
            .get(&Monomial(exps.to_vec()))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Coefficient addressed by variable names, e.g. `&[("n", 1), ("h1", 2)]`.
    pub fn coeff_of(&self, powers: &[(&str, u32)]) -> Result<Rational, SeriesError> {
        let mut e = vec![0; self.vars.len()];
        for (name, p) in powers {
            e[self.index_of(name)?] = *p;
        }
        Ok(self.coeff(&e))
    }

    fn check_compatible(&self, other: &Self) -> Result<(), SeriesError> {
        if self.vars != other.vars || self.grading != other.grading {
            return Err(SeriesError::MismatchedVariables(
                self.vars.clone(),
                other.vars.clone(),
            ));
        }
        if self.order != other.order {
            return Err(SeriesError::MismatchedOrder(self.order, other.order));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.insert(k.0.clone(), v.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.zero_like();
        for (k, v) in &self.terms {
            out.terms.insert(k.clone(), -v.clone());
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = self.zero_like();
        if c.is_zero() {
            return out;
        }
        for (k, v) in &self.terms {
            out.terms.insert(k.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compatible(other)?;
        let mut acc: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (ka, va) in &self.terms {
            let da = self.degree_of(&ka.0);
            for (kb, vb) in &other.terms {
                if da + self.degree_of(&kb.0) > self.order {
                    continue;
                }
                let e: Vec<u32> = ka.0.iter().zip(&kb.0).map(|(a, b)| a + b).collect();
                *acc.entry(Monomial(e)).or_insert_with(Rational::zero) += va * vb;
            }
        }
        acc.retain(|_, v| !v.is_zero());
        let mut out = self.zero_like();
        out.terms = acc;
        Ok(out)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = self.one_like();
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                out = out.mul(&base).expect("same ring");
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base).expect("same ring");
            }
        }
        out
    }

    /// Re-truncates to a (not larger) order.
    pub fn truncate(&self, order: u32) -> Self {
        let mut out = self.zero_like();
        out.order = order;
        for (k, v) in &self.terms {
            if self.degree_of(&k.0) <= order {
                out.terms.insert(k.clone(), v.clone());
            }
        }
        out
    }

    /// Lowest graded degree present, `None` for the zero series.
    pub fn valuation(&self) -> Option<u32> {
        self.terms.keys().map(|k| self.degree_of(&k.0)).min()
    }

    /// Termwise ∫₀¹ d(var); the variable disappears from the result.
    pub fn definite_integral_unit(&self, var: &str) -> Result<Self, SeriesError> {
        let i = self.index_of(var)?;
        let mut vars: Vec<String> = self.vars.clone();
        vars.remove(i);
        let mut grading = self.grading.clone();
        grading.remove(i);
        let mut out = MultiSeries {
            vars,
            grading,
            order: self.order,
            terms: BTreeMap::new(),
        };
        for (k, v) in &self.terms {
            let m = k.0[i];
            let mut e = k.0.clone();
            e.remove(i);
            out.insert(e, v / rat_int(m as i64 + 1));
        }
        Ok(out)
    }

    /// Floating-point evaluation at the given variable values.
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.vars.len());
        self.terms
            .iter()
            .map(|(k, v)| {
                let c = v.to_f64().unwrap_or(f64::NAN);
                k.0.iter()
                    .zip(values)
                    .fold(c, |acc, (&p, &x)| acc * x.powi(p as i32))
            })
            .sum()
    }

    /// Sum of |coefficient| times the monomial evaluated at |values|, restricted
    /// to graded degree exactly `d`.
    pub fn degree_slice_abs(&self, values: &[f64], d: u32) -> f64 {
        self.terms
            .iter()
            .filter(|(k, _)| self.degree_of(&k.0) == d)
            .map(|(k, v)| {
                let c = v.abs().to_f64().unwrap_or(f64::NAN);
                k.0.iter()
                    .zip(values)
                    .fold(c, |acc, (&p, &x)| acc * x.abs().powi(p as i32))
            })
            .sum()
    }

    /// Canonical text: two header lines, then `e1,…,ek : num/den` in
    /// graded-lex order.
    pub fn to_canonical_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("variables: {}\n", self.vars.join(",")));
        s.push_str(&format!("order: {}\n", self.order));
        for (k, v) in &self.terms {
            let e: Vec<String> = k.0.iter().map(|x| x.to_string()).collect();
            s.push_str(&format!("{} : {}/{}\n", e.join(","), v.numer(), v.denom()));
        }
        s
    }

    /// Inverse of [`to_canonical_text`](Self::to_canonical_text) (unit grading).
    pub fn parse_canonical_text(text: &str) -> Result<Self, SeriesError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let bad = |m: &str| SeriesError::Parse(m.to_string());
        let vars_line = lines.next().ok_or_else(|| bad("missing header"))?;
        let vars: Vec<&str> = vars_line
            .strip_prefix("variables:")
            .ok_or_else(|| bad("missing variables header"))?
            .trim()
            .split(',')
            .filter(|s| !s.is_empty())
            .collect();
        let order: u32 = lines
            .next()
            .and_then(|l| l.strip_prefix("order:"))
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| bad("missing order header"))?;
        let mut out = MultiSeries::zero(&vars, order);
        for line in lines {
            let (lhs, rhs) = line.split_once(':').ok_or_else(|| bad(line))?;
            let e: Vec<u32> = lhs
                .trim()
                .split(',')
                .map(|x| x.trim().parse::<u32>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(line))?;
            if e.len() != vars.len() {
                return Err(bad(line));
            }
            let (num, den) = rhs.trim().split_once('/').ok_or_else(|| bad(line))?;
            let num: BigInt = num.trim().parse().map_err(|_| bad(line))?;
            let den: BigInt = den.trim().parse().map_err(|_| bad(line))?;
            if den.is_zero() {
                return Err(bad(line));
            }
            out.insert(e, Rational::new(num, den));
        }
        Ok(out)
    }
}

impl fmt::Display for MultiSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, v) in &self.terms {
            let mut mono = Vec::new();
            for (name, &p) in self.vars.iter().zip(&k.0) {
                match p {
                    0 => {}
                    1 => mono.push(name.clone()),
                    _ => mono.push(format!("{name}^{p}")),
                }
            }
            let sign = if v.is_negative() { "-" } else { "+" };
            if first {
                if v.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let a = v.abs();
            if mono.is_empty() {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "{a}*{}", mono.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Solves `X = Φ(X)` by iterating Φ from the zero series `order + 1` times,
/// then confirms that one more application leaves `X` unchanged.
pub fn solve_series_fixed_point<F>(
    template: &MultiSeries,
    phi: F,
) -> Result<MultiSeries, SeriesError>
where
    F: Fn(&MultiSeries) -> Result<MultiSeries, SeriesError>,
{
    let mut out = solve_series_system(&[template.zero_like()], |xs| Ok(vec![phi(&xs[0])?]))?;
    Ok(out.remove(0))
}

/// Vector form of [`solve_series_fixed_point`]: `start` fixes the number of
/// unknowns and their ring; iteration starts from zero.
pub fn solve_series_system<F>(
    start: &[MultiSeries],
    phi: F,
) -> Result<Vec<MultiSeries>, SeriesError>
where
    F: Fn(&[MultiSeries]) -> Result<Vec<MultiSeries>, SeriesError>,
{
    let order = start.first().map(|s| s.order()).unwrap_or(0);
    let mut x: Vec<MultiSeries> = start.iter().map(|s| s.zero_like()).collect();
    for _ in 0..=order {
        x = phi(&x)?;
    }
    let check = phi(&x)?;
    if check != x {
        return Err(SeriesError::NonContraction(order + 1));
    }
    Ok(x)
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy(order: u32) -> (MultiSeries, MultiSeries, MultiSeries) {
        let z = MultiSeries::zero(&["x", "y"], order);
        let x = z.var_like("x").unwrap();
        let y = z.var_like("y").unwrap();
        (z, x, y)
    }

    #[test]
    fn add_cancels() {
        let (z, x, _) = xy(2);
        let one = z.one_like();
        let s = one.add(&x).unwrap().add(&one.sub(&x).unwrap()).unwrap();
        assert_eq!(s, z.constant_like(rat_int(2)));
    }

    #[test]
    fn mul_truncates() {
        let (z, x, y) = xy(1);
        let a = z.one_like().add(&x).unwrap();
        let sq = a.mul(&a).unwrap();
        assert_eq!(sq.coeff(&[1, 0]), rat_int(2));
        assert_eq!(sq.coeff(&[2, 0]), rat_int(0));
        assert!(x.mul(&y).unwrap().is_zero());
    }

    #[test]
    fn disjoint_supports() {
        let (_, x, y) = xy(2);
        let s = x.add(&y).unwrap().add(&x.mul(&y).unwrap()).unwrap();
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn mismatched_variables_rejected() {
        let a = MultiSeries::zero(&["x"], 2);
        let b = MultiSeries::zero(&["y"], 2);
        assert!(matches!(
            a.add(&b),
            Err(SeriesError::MismatchedVariables(..))
        ));
        let c = MultiSeries::zero(&["x"], 3);
        assert!(matches!(a.mul(&c), Err(SeriesError::MismatchedOrder(2, 3))));
    }

    #[test]
    fn integral_examples() {
        let z = MultiSeries::zero(&["u", "g"], 4);
        let u = z.var_like("u").unwrap();
        let g = z.var_like("g").unwrap();
        let i = u.pow(2).definite_integral_unit("u").unwrap();
        assert_eq!(i.coeff(&[0]), rat(1, 3));
        let s = u
            .add(&g.mul(&u.pow(2)).unwrap().scale(&rat_int(3)))
            .unwrap();
        let i = s.definite_integral_unit("u").unwrap();
        assert_eq!(i.coeff(&[0]), rat(1, 2));
        assert_eq!(i.coeff(&[1]), rat(1, 1));
        let i = g
            .mul(&u.pow(3))
            .unwrap()
            .definite_integral_unit("u")
            .unwrap();
        assert_eq!(i.coeff(&[1]), rat(1, 4));
        assert!(matches!(
            s.definite_integral_unit("w"),
            Err(SeriesError::UnknownVariable(_))
        ));
    }

    #[test]
    fn catalan_fixed_point() {
        let z = MultiSeries::zero(&["x"], 3);
        let x = z.var_like("x").unwrap();
        let sol = solve_series_fixed_point(&z, |s| x.add(&s.mul(s)?)).unwrap();
        assert_eq!(sol.coeff(&[1]), rat_int(1));
        assert_eq!(sol.coeff(&[2]), rat_int(1));
        assert_eq!(sol.coeff(&[3]), rat_int(2));
    }

    #[test]
    fn quadrangulation_fixed_point() {
        // X = u + 3gX² gives u + 3g u² + 18 g² u³ up to total degree 5.
        let z = MultiSeries::zero(&["u", "g"], 5);
        let u = z.var_like("u").unwrap();
        let g3 = z.var_like("g").unwrap().scale(&rat_int(3));
        let sol = solve_series_fixed_point(&z, |s| u.add(&g3.mul(&s.mul(s)?)?)).unwrap();
        assert_eq!(sol.coeff(&[1, 0]), rat_int(1));
        assert_eq!(sol.coeff(&[2, 1]), rat_int(3));
        assert_eq!(sol.coeff(&[3, 2]), rat_int(18));
        assert_eq!(sol.len(), 3);
    }

    #[test]
    fn constant_functional() {
        let z = MultiSeries::zero(&["u"], 4);
        let u = z.var_like("u").unwrap();
        let sol = solve_series_fixed_point(&z, |_| Ok(u.clone())).unwrap();
        assert_eq!(sol, u);
    }

    #[test]
    fn non_contraction_detected() {
        let z = MultiSeries::zero(&["x"], 3);
        let one = z.one_like();
        // X = 1 + X never stabilises.
        let r = solve_series_fixed_point(&z, |s| one.add(s));
        assert!(matches!(r, Err(SeriesError::NonContraction(_))));
    }

    #[test]
    fn canonical_text_round_trip() {
        let (z, x, y) = xy(3);
        let s = z
            .constant_like(rat(-1, 2))
            .add(&x.scale(&rat(3, 7)))
            .unwrap()
            .add(&x.mul(&y).unwrap())
            .unwrap()
            .add(&y.pow(3))
            .unwrap();
        let text = s.to_canonical_text();
        assert_eq!(
            text,
            "variables: x,y\norder: 3\n0,0 : -1/2\n1,0 : 3/7\n1,1 : 1/1\n0,3 : 1/1\n"
        );
        assert_eq!(MultiSeries::parse_canonical_text(&text).unwrap(), s);
    }

    #[test]
    fn weight_zero_variable_is_untruncated() {
        let z = MultiSeries::zero_graded(&["u", "g"], &[0, 1], 1);
        let u = z.var_like("u").unwrap();
        let g = z.var_like("g").unwrap();
        let s = u.pow(7).mul(&g).unwrap();
        assert_eq!(s.coeff(&[7, 1]), rat_int(1));
        assert!(s.mul(&g).unwrap().is_zero());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 3), BigInt::from(120));
        assert_eq!(binomial(3, 5), BigInt::from(0));
    }
}
