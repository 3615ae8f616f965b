use num_complex::Complex64 as C;
use onloop::elliptic::{weierstrass_p, zeta_b, ModularParam, ZetaBParams};
use onloop::enumerate::for_each_map;
use onloop::fredholm::{self, KernelSpec};
use onloop::maps::{fk_table, solve_r, WeightSequence};
use onloop::nested::{f_p_loop, solve_gasket, LoopModelParams};
use onloop::rigid::{self, PhasePoint, Uniformization};
use onloop::rings::{eigen_fixed_point, lambda_plus, RingWeights};
use onloop::series::{rat, solve_series_fixed_point, MultiSeries};
use proptest::prelude::*;

fn series_from(terms: &[(u32, u32, i64)], order: u32) -> MultiSeries {
    let mut s = MultiSeries::zero(&["x", "y"], order);
    for &(a, b, c) in terms {
        s.insert(vec![a, b], rat(c, 1 + (a + b) as i64));
    }
    s
}

/// Face weights g_1..g_4 shrinking with the degree, mostly admissible.
fn weights_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 4).prop_map(|u| {
        u.iter()
            .enumerate()
            .map(|(i, x)| x * 0.03 * 0.15f64.powi(i as i32))
            .collect()
    })
}

fn series_strategy() -> impl Strategy<Value = Vec<(u32, u32, i64)>> {
    prop::collection::vec((0u32..4, 0u32..4, -5i64..6), 0..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_ring_axioms(a in series_strategy(), b in series_strategy(), c in series_strategy()) {
        let (a, b, c) = (series_from(&a, 5), series_from(&b, 5), series_from(&c, 5));
        prop_assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
        prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
        prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
        prop_assert_eq!(
            a.mul(&b.add(&c).unwrap()).unwrap(),
            a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap()
        );
    }

    #[test]
    fn truncation_is_a_ring_homomorphism(a in series_strategy(), b in series_strategy(), d in 0u32..5) {
        let (a, b) = (series_from(&a, 6), series_from(&b, 6));
        let lhs = a.mul(&b).unwrap().truncate(d);
        let rhs = a.truncate(d).mul(&b.truncate(d)).unwrap().truncate(d);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn series_fixed_point_is_exact(c in 1i64..5, d in 1i64..4, order in 1u32..7) {
        let t = MultiSeries::zero(&["x"], order);
        let x = t.var_like("x").unwrap();
        let phi = |s: &MultiSeries| t.constant_like(rat(c, d)).add(&x.mul(&s.mul(s)?)?);
        let sol = solve_series_fixed_point(&t, phi).unwrap();
        prop_assert!(sol.sub(&phi(&sol).unwrap()).unwrap().is_zero());
    }

    #[test]
    fn r1_is_monotone_in_the_weights(w in weights_strategy(), k in 0usize..4, bump in 0.0f64..1.0) {
        let small = WeightSequence::new(&w).unwrap();
        let mut w2 = w.clone();
        w2[k] += 1e-3 * bump * 0.15f64.powi(k as i32) + 1e-9;
        let large = WeightSequence::new(&w2).unwrap();
        let (r_small, r_large) = (solve_r(&small, 1.0, 1e-14), solve_r(&large, 1.0, 1e-14));
        prop_assume!(r_large.is_finite());
        prop_assert!(r_small < r_large);
    }

    #[test]
    fn root_degree_decomposition(w in weights_strategy()) {
        let seq = WeightSequence::new(&w).unwrap();
        prop_assume!(solve_r(&seq, 1.0, 1e-14).is_finite());
        let fk = fk_table(&seq, 4).unwrap();
        let rhs: f64 = (1..=4).map(|k| w[k - 1] * fk[k]).sum();
        prop_assert!((fk[1] - 1.0 - rhs).abs() < 1e-10 * fk[1]);
    }

    #[test]
    fn symmetric_transfer_eigenvalue_is_an_involution(h1 in 0.0f64..0.5, h2 in 0.01f64..0.5, s in 0.05f64..0.95) {
        let w = RingWeights::symmetric(h1, h2);
        let zs = eigen_fixed_point(&w).unwrap().zstar;
        let z = h2 + 1e-3 + s * (2.0 * zs - h2 - 1e-3);
        let back = lambda_plus(&w, lambda_plus(&w, z).unwrap()).unwrap();
        prop_assert!((back - z).abs() < 1e-9 * z, "{} vs {}", back, z);
    }

    #[test]
    fn fredholm_solution_is_linear_in_rho(tau in 0.0f64..0.95, n in 0.0f64..2.0, rho in -1.0f64..1.0) {
        let sol = fredholm::solve(&KernelSpec::rigid(tau).unwrap(), n, rho, 32).unwrap();
        for i in 0..sol.nodes.len() {
            let lin = sol.f1_values[i] - rho * sol.fid_values[i];
            prop_assert!((sol.f_values[i] - lin).abs() < 1e-12 * (1.0 + lin.abs()));
        }
    }

    #[test]
    fn mirror_relation(b in 0.05f64..0.95, abs_t in 0.5f64..2.0, re in -0.45f64..0.45, im in 0.05f64..0.45) {
        let tp = ModularParam::imaginary(abs_t).unwrap();
        let p = ZetaBParams::new(b, tp).unwrap();
        let v = C::new(re, im * abs_t);
        let lhs = zeta_b(v, &p).unwrap() * zeta_b(-v, &p).unwrap();
        let rhs = weierstrass_p(C::new(0.5 * b, 0.0), &tp).unwrap() - weierstrass_p(v, &tp).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-9 * (1.0 + rhs.norm()));
    }

    #[test]
    fn uniformization_symmetries(h1 in 0.02f64..0.2, tau in 0.1f64..0.9, re in -0.4f64..0.4, im in 0.1f64..0.9) {
        let u = Uniformization::new(h1, tau).unwrap();
        let v = C::new(re, im * u.t.t.im);
        let x = u.xi(v);
        let scale = 1.0 + x.norm();
        prop_assert!((u.xi(v + 1.0) - x).norm() < 1e-10 * scale);
        prop_assert!((u.xi(-v) - x).norm() < 1e-10 * scale);
        prop_assert!((u.xi(v + 0.5) + x).norm() < 1e-10 * scale);
        let dual = u.xi(u.t.t - v) * h1 * x;
        prop_assert!((dual - 1.0).norm() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gasket_fixed_point_residual(n in 0.0f64..2.0, g in 0.0f64..0.04, h1 in 0.0f64..0.06, h2 in 0.0f64..0.02) {
        let sol = solve_gasket(&LoopModelParams::symmetric(n, g, h1, h2), 32, 1e-12, 100_000).unwrap();
        prop_assume!(sol.is_converged());
        prop_assert!(sol.residual < 1e-10);
        prop_assert!(sol.monotone);
    }

    #[test]
    fn loop_generating_function_is_monotone(n in 0.0f64..1.9, g in 0.0f64..0.03, h1 in 0.0f64..0.05, h2 in 0.0f64..0.02, which in 0usize..4) {
        let mut x = [n, g, h1, h2];
        let base = LoopModelParams::symmetric(x[0], x[1], x[2], x[3]);
        x[which] += [0.05, 0.003, 0.005, 0.003][which];
        let bumped = LoopModelParams::symmetric(x[0], x[1], x[2], x[3]);
        let (a, b) = (solve_gasket(&base, 32, 1e-13, 100_000).unwrap(), solve_gasket(&bumped, 32, 1e-13, 100_000).unwrap());
        prop_assume!(a.is_converged() && b.is_converged());
        prop_assert!(f_p_loop(&a, 1).unwrap() <= f_p_loop(&b, 1).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn nongeneric_density_is_positive(n in 0.05f64..1.95, s in 0.0f64..1.0) {
        let (_, hs) = rigid::nongeneric_endpoint(n);
        let h0 = rigid::nongeneric_start(n);
        let h1 = hs + s * (h0 - hs);
        let d = rigid::critical_density(&PhasePoint::new(n, rigid::nongeneric_g(n, h1), h1).unwrap()).unwrap();
        let grid = d.density(101);
        prop_assert!(grid.values.iter().all(|&(_, r)| r >= -1e-12), "{:?}", grid.values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min));
        prop_assert!((d.normalization() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn generated_maps_are_planar_and_bipartite(p in 1usize..4, max_edges in 1usize..7) {
        let mut count = 0u64;
        for_each_map(p, &[(1, 0), (2, 0), (3, 0)], 0, max_edges.max(p), |m| {
            assert!(m.is_involution() && m.is_bipartite());
            assert_eq!(m.genus(), 0);
            assert_eq!(m.face_degrees[0], 2 * p);
            count += 1;
        });
        prop_assert!(count >= 1);
    }
}
