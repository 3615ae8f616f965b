//! Quadrature and small numerical helpers shared by the solvers.

use gauss_quad::GaussLegendre;

/// Gauss–Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(n.max(2)).expect("degree >= 2");
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// A fixed Gauss–Legendre rule mapped onto arbitrary intervals.
#[derive(Clone, Debug)]
pub struct GlRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GlRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        GlRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights on [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Adaptive bisection with a 10/20-point Gauss–Legendre pair per panel.
pub fn adaptive_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let lo = GlRule::new(10);
    let hi = GlRule::new(20);
    let mut total = 0.0;
    let mut stack = vec![(a, b, 0u32)];
    while let Some((x0, x1, depth)) = stack.pop() {
        let i1 = lo.integrate(x0, x1, &f);
        let i2 = hi.integrate(x0, x1, &f);
        let scale = (x1 - x0).abs() / (b - a).abs();
        if (i1 - i2).abs() <= tol * scale.max(1e-6) * (1.0 + i2.abs()) || depth >= 40 {
            total += i2;
        } else {
            let m = 0.5 * (x0 + x1);
            stack.push((x0, m, depth + 1));
            stack.push((m, x1, depth + 1));
        }
    }
    total
}

/// Double-exponential (tanh-sinh) quadrature on [a, b]. The integrand receives
/// `(x, x - a, b - x)` with the endpoint distances computed without
/// cancellation, so algebraic endpoint singularities can be evaluated
/// accurately.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let half = 0.5 * (b - a);
    let pi2 = std::f64::consts::FRAC_PI_2;
    let eval = |t: f64| -> f64 {
        let s = pi2 * t.sinh();
        let w = pi2 * t.cosh() / s.cosh().powi(2);
        if w * half == 0.0 {
            return 0.0;
        }
        let dl = half * 2.0 / ((-2.0 * s).exp() + 1.0);
        let dr = half * 2.0 / ((2.0 * s).exp() + 1.0);
        if dl <= 0.0 || dr <= 0.0 {
            return 0.0;
        }
        let x = if s < 0.0 { a + dl } else { b - dr };
        let v = f(x, dl, dr);
        if v.is_finite() {
            half * w * v
        } else {
            0.0
        }
    };
    let tmax = 6.5;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= tmax {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut est = h * sum;
    for _level in 0..12 {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1;
        while (k as f64) * h <= tmax {
            let t = k as f64 * h;
            add += eval(t) + eval(-t);
            k += 2;
        }
        sum += add;
        let new = h * sum;
        let done = (new - est).abs() <= tol * new.abs().max(1e-300);
        est = new;
        if done {
            break;
        }
    }
    est
}

/// Least-squares line through `(x, y)`; returns (slope, intercept, rms residual).
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icpt - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, icpt, rms)
}

/// Lagrange interpolation through the given points, evaluated at `x`.
pub fn lagrange_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..xs.len() {
        let mut l = 1.0;
        for j in 0..xs.len() {
            if i != j {
                l *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += l * ys[i];
    }
    acc
}

/// Bracketed scalar root via Brent's method.
pub fn brent<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Option<f64> {
    let mut conv = roots::SimpleConvergency {
        eps: tol,
        max_iter: 200,
    };
    roots::find_root_brent(a, b, &f, &mut conv).ok()
}

/// ln C(n, k) for non-negative integers.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    use statrs::function::factorial::ln_binomial as lb;
    lb(n, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_polynomial_exact() {
        let r = GlRule::new(5);
        let v = r.integrate(0.0, 2.0, |x| x.powi(9));
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-10);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫₀¹ x^{-1/2} (1-x)^{-1/3} dx = B(1/2, 2/3)
        let v = tanh_sinh(
            |_, dl, dr| dl.powf(-0.5) * dr.powf(-1.0 / 3.0),
            0.0,
            1.0,
            1e-13,
        );
        let exact = statrs::function::beta::beta(0.5, 2.0 / 3.0);
        assert!((v - exact).abs() < 1e-10 * exact);
        let w = tanh_sinh(|x, _, _| x.exp(), 0.0, 1.0, 1e-14);
        assert!((w - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn adaptive_peaked() {
        let v = adaptive_gl(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12);
        let exact = 2.0 * (1.0 / 1e-2) * (1.0 / 1e-2f64).atan();
        assert!((v - exact).abs() / exact < 1e-10);
    }

    #[test]
    fn line_fit_exact() {
        let x = [1.0, 2.0, 3.0];
        let y = [3.0, 5.0, 7.0];
        let (s, c, r) = fit_line(&x, &y);
        assert!((s - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14 && r < 1e-14);
    }

    #[test]
    fn brent_finds_sqrt2() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }
}
