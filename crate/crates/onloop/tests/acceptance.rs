//! One PASS/FAIL line per acceptance criterion.
//!
//! Criteria listed in `KNOWN_FAILING` are reported but do not fail the run;
//! every other criterion must pass.

use std::time::Instant;

use onloop::elliptic::{identity_suite, ModeSums};
use onloop::enumerate::{enumerate_loops, first_mismatch, verify_fixed_point_order};
use onloop::fredholm::{self, KernelSpec, KernelVariant};
use onloop::maps::{fk_table, WeightSequence};
use onloop::nested::{series_f_p_loop, solve_gasket, LoopModelParams, SeriesRing};
use onloop::quad::fit_line;
use onloop::rigid::{self, PhasePoint, RigidResolvent};
use onloop::rings;
use twofloat::TwoFloat;

const KNOWN_FAILING: &[u32] = &[7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn catalan(k: u64) -> u64 {
    (0..k).fold(1u64, |c, i| c * 2 * (2 * i + 1) / (i + 2))
}

fn pure_map_closed_forms() -> Outcome {
    let w = WeightSequence::quadrangulation(1.0 / 12.0, 2);
    let fk = fk_table(&w, 10).expect("admissible");
    let mut worst = 0.0f64;
    for k in 1..=10u64 {
        let mut exact = 2f64.powi(k as i32 + 1);
        for j in 1..=2 * k {
            exact *= j as f64;
        }
        for j in 1..=k {
            exact /= j as f64;
        }
        for j in 1..=k + 2 {
            exact /= j as f64;
        }
        worst = worst.max(rel(fk[k as usize], exact));
    }
    let empty = fk_table(&WeightSequence::quadrangulation(0.0, 2), 10).expect("admissible");
    let catalan_ok = (0..=10u64).all(|k| {
        empty[k as usize].round() as u64 == catalan(k)
            && rel(empty[k as usize], catalan(k) as f64) < 1e-14
    });
    outcome(
        worst < 1e-8 && catalan_ok,
        format!("max rel err {worst:.2e}; Catalan at g = 0: {catalan_ok}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut compared = 0;
    let mut failures = Vec::new();
    for (rigid, ring) in [(true, SeriesRing::Rigid), (false, SeriesRing::Symmetric)] {
        for p in 1..=2 {
            let enumerated = enumerate_loops(p, 4, rigid).expect("within caps");
            let series = series_f_p_loop(p, 4, ring).expect("series");
            compared += enumerated.truncate(4).len();
            if let Some(m) = first_mismatch(&enumerated, &series, 4) {
                failures.push(format!("p = {p}, {ring:?}: {m}"));
            }
        }
        let fp = verify_fixed_point_order(4, rigid).expect("within caps");
        if let Some(m) = fp.failure {
            failures.push(format!("fixed point, {ring:?}: {m}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{compared} coefficients compared exactly; {}",
            if failures.is_empty() {
                "no mismatch".to_string()
            } else {
                failures.join("; ")
            }
        ),
    )
}

fn fredholm_baseline() -> Outcome {
    let spec = KernelSpec::rigid(0.0).unwrap();
    let rho = 0.5;
    let sol = fredholm::solve(&spec, 1.0, rho, 64).unwrap();
    let err = sol
        .nodes
        .iter()
        .zip(&sol.f_values)
        .map(|(x, f)| (f - (1.0 - rho * x)).abs())
        .fold(0.0, f64::max);
    let rc = fredholm::critical_rho(&spec, 1.0, 64).unwrap();
    outcome(
        err < 1e-12 && (rc - 1.0).abs() < 1e-10,
        format!(
            "max |f - (1 - rho x)| = {err:.2e}, rho_c - 1 = {:.2e}",
            rc - 1.0
        ),
    )
}

fn triple_consistency() -> Outcome {
    let (n, g, h1) = (1.0, 0.05, 0.05);
    let gasket = solve_gasket(&LoopModelParams::rigid(n, g, h1), 256, 1e-14, 100_000)
        .unwrap()
        .r1;
    let (fred, _) = fredholm::consistency_r1(KernelVariant::Rigid, n, g, h1, 64).unwrap();
    let ell = rigid::general_resolvent(&PhasePoint::new(n, g, h1).unwrap(), 1e-15).unwrap();
    let ell = ell.gamma().powi(2) / 4.0;
    let d = [
        (gasket - fred).abs(),
        (gasket - ell).abs(),
        (fred - ell).abs(),
    ];
    let worst = d.iter().cloned().fold(0.0, f64::max);
    outcome(worst < 1e-5, format!("R1: gasket {gasket:.12}, Fredholm {fred:.12}, elliptic {ell:.12}; max diff {worst:.2e}"))
}

fn nongeneric_line() -> Outcome {
    let mut worst_line = 0.0f64;
    for i in 0..=20 {
        let h1 = 0.125 * i as f64 / 20.0 + 0.125;
        let h1 = h1.min(0.25);
        worst_line =
            worst_line.max((rigid::nongeneric_g(0.0, h1) - 4.0 / 3.0 * (h1 - 4.0 * h1 * h1)).abs());
    }
    let (gs, hs) = rigid::nongeneric_endpoint(1e-9);
    let endpoint_err = (gs - 1.0 / 12.0).abs().max((hs - 0.125).abs());
    let mut min_tau = f64::INFINITY;
    for h1 in [0.13, 0.15, 0.18, 0.2, 0.215] {
        let p = LoopModelParams::rigid(1.0, rigid::nongeneric_g(1.0, h1), h1);
        let s = solve_gasket(&p, 256, 1e-12, 200_000).unwrap();
        min_tau = min_tau.min(if s.is_converged() { s.tau } else { 0.0 });
    }
    let pass = worst_line < 1e-15 && endpoint_err < 1e-8 && min_tau > 0.995;
    outcome(
        pass,
        format!("b = 1/2 line deviation {worst_line:.1e}; endpoint at n = 1e-9 off by {endpoint_err:.1e}; min tau on n = 1 line {min_tau:.5}"),
    )
}

fn exponents() -> Outcome {
    let kmax = 200;
    let dense = rigid::critical_density(&PhasePoint::new(1.0, 0.0, 2.0 / 9.0).unwrap()).unwrap();
    let a_dense = rigid::moment_exponent(&dense.scaled_moments(kmax));
    let (gs, hs) = rigid::nongeneric_endpoint(1.0);
    let dilute = rigid::critical_density(&PhasePoint::new(1.0, gs, hs).unwrap()).unwrap();
    let a_dilute = rigid::moment_exponent(&dilute.scaled_moments(kmax));
    let sub = rigid::general_resolvent(&PhasePoint::new(1.0, 0.05, 0.05).unwrap(), 1e-15).unwrap();
    let a_sub = rigid::moment_exponent(&sub.scaled_moments(kmax));
    let (gg, hg) = rigid::generic_line(1.0, 0.6).unwrap();
    let gen = RigidResolvent::at_tau(&PhasePoint::new(1.0, gg, hg).unwrap(), 0.6).unwrap();
    let a_gen = rigid::moment_exponent(&gen.scaled_moments(kmax));
    let pass = rel(a_dense, 5.0 / 3.0) < 0.05
        && rel(a_dilute, 7.0 / 3.0) < 0.07
        && rel(a_sub, 1.5) < 0.05
        && rel(a_gen, 2.5) < 0.05;
    outcome(pass, format!("a: dense {a_dense:.4} (5/3), dilute {a_dilute:.4} (7/3), subcritical {a_sub:.4} (3/2), generic {a_gen:.4} (5/2)"))
}

fn dd(x: TwoFloat) -> f64 {
    x.hi() + x.lo()
}

fn generic_asymptotics() -> Outcome {
    let n = 1.0;
    let qs: Vec<f64> = (0..=10)
        .map(|i| 10f64.powf(-2.0 + i as f64 / 10.0))
        .collect();
    let (mut lq, mut lg, mut lh) = (vec![], vec![], vec![]);
    for &q in &qs {
        let (nn, qq) = (TwoFloat::from(n), TwoFloat::from(q));
        let (g, h) = ModeSums::<TwoFloat>::new(nn, qq).generic_point(nn);
        let q2 = qq * qq;
        let q4 = q2 * q2;
        let ge = TwoFloat::from(1.0) / 12.0 - nn * q4 / 18.0 + nn * (nn + 7.0) * q4 * q4 / 36.0;
        let he = q2 / 2.0 - (nn / 6.0 + 2.0) * q4 * q2;
        lq.push(q.ln());
        lg.push(dd(g - ge).abs().ln());
        lh.push(dd(h - he).abs().ln());
    }
    let (sg, _, _) = fit_line(&lq, &lg);
    let (sh, _, _) = fit_line(&lq, &lh);
    let (g, h) = rigid::generic_line(n, 0.999).unwrap();
    let (gs, hs) = rigid::nongeneric_endpoint(n);
    let end = (g - gs).abs().max((h - hs).abs());
    let slopes_ok = (sg - 12.0).abs() < 0.5 && (sh - 10.0).abs() < 0.5;
    outcome(
        slopes_ok && end < 1e-4,
        format!("log-log slopes {sg:.3} (12), {sh:.3} (10); endpoint distance at tau = 0.999: {end:.2e} (needs < 1e-4)"),
    )
}

fn junction_regularity() -> Outcome {
    let line = rigid::assemble_diagram(1.0, 8).unwrap();
    let j = line.junction;
    let ds = rel(j.slope_generic, j.slope_nongeneric);
    let dc = rel(j.curvature_generic, j.curvature_nongeneric);
    let jump = (j.third_generic - j.third_nongeneric).abs();
    outcome(
        ds < 1e-3 && dc < 1e-2 && jump > 100.0,
        format!(
            "slope rel diff {ds:.1e}, curvature rel diff {dc:.1e}, third-derivative jump {jump:.0}"
        ),
    )
}

fn elliptic_identities() -> Outcome {
    let checks = identity_suite();
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.name.as_str())
        .collect();
    let worst = checks
        .iter()
        .map(|c| c.residual / c.threshold)
        .fold(0.0, f64::max);
    outcome(
        failed.is_empty(),
        format!(
            "{} checks, worst residual/threshold {worst:.1e}; failed: {failed:?}",
            checks.len()
        ),
    )
}

fn ring_suite(names: &[&str]) -> Outcome {
    let checks: Vec<_> = rings::identity_suite(2024)
        .into_iter()
        .filter(|c| names.iter().any(|n| c.name.starts_with(n)))
        .collect();
    let pass = !checks.is_empty() && checks.iter().all(|c| c.passed());
    let detail = checks
        .iter()
        .map(|c| format!("{}: {:.1e} (< {:e})", c.name, c.residual, c.threshold))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn functional_equation() -> Outcome {
    let sub = rigid::general_resolvent(&PhasePoint::new(1.0, 0.05, 0.05).unwrap(), 1e-15).unwrap();
    let r_sub = sub
        .functional_equation_residuals(50)
        .iter()
        .map(|r| r.1.abs())
        .fold(0.0, f64::max);
    let h1 = 0.18;
    let crit =
        rigid::critical_density(&PhasePoint::new(1.0, rigid::nongeneric_g(1.0, h1), h1).unwrap())
            .unwrap();
    let r_crit = crit
        .functional_equation_residuals(50)
        .iter()
        .map(|r| r.1.abs())
        .fold(0.0, f64::max);
    outcome(
        r_sub < 1e-6 && r_crit < 1e-6,
        format!("max residual: subcritical {r_sub:.1e}, critical line {r_crit:.1e}"),
    )
}

fn main() {
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "pure-map closed forms", Box::new(pure_map_closed_forms)),
        (2, "oracle equivalence", Box::new(oracle_equivalence)),
        (3, "Fredholm baseline", Box::new(fredholm_baseline)),
        (4, "triple cross-consistency", Box::new(triple_consistency)),
        (5, "non-generic line", Box::new(nongeneric_line)),
        (6, "exponents", Box::new(exponents)),
        (7, "generic line asymptotics", Box::new(generic_asymptotics)),
        (8, "junction regularity", Box::new(junction_regularity)),
        (9, "elliptic identity suite", Box::new(elliptic_identities)),
        (
            10,
            "characteristic polynomial",
            Box::new(|| ring_suite(&["char poly"])),
        ),
        (
            11,
            "symmetric involution",
            Box::new(|| ring_suite(&["symmetric mu*", "non-symmetric mu*"])),
        ),
        (
            12,
            "resolvent functional equation",
            Box::new(functional_equation),
        ),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let t = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {verdict} [{name}] {} ({:.1}s)",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass && !KNOWN_FAILING.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
