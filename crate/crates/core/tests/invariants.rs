use proptest::prelude::*;

use shl_core::harness::{fit_rate, log_times};
use shl_core::nonlinear::{convex_remainder, nonlinear_defect};
use shl_core::radial_pde::{solve_tridiagonal, step_implicit, NoReaction, RadialOperator, RightBoundary, SolverSetup};
use shl_core::semigroup::{apply_semigroup, l2_norm, weighted_norm, HardyFlow, WeightedNormSpec};
use shl_core::{compute_exponents, ExponentSet, LogGrid, ProblemParams, RadialField};

fn exponents() -> impl Strategy<Value = ExponentSet> {
    (3u32..=24, 0.01f64..12.0).prop_filter_map("inadmissible", |(n, dp)| {
        let p = 1.0 + 2.0 / (n as f64 - 2.0) + dp;
        ProblemParams::new(n, p).and_then(compute_exponents).ok()
    })
}

fn grid() -> impl Strategy<Value = LogGrid> {
    (-8.0f64..-1.0, 1.0f64..6.0, 32usize..160).prop_map(|(a, b, n)| LogGrid::new(a, b, n).unwrap())
}

fn dot(mu: &[f64], f: &[f64], g: &[f64]) -> f64 {
    mu.iter().zip(f).zip(g).map(|((m, a), b)| m * a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigma_solves_indicial_equation(e in exponents()) {
        let n = e.n as f64;
        prop_assert!((e.sigma * (n - 2.0 - e.sigma) - e.lambda).abs() <= 1e-10 * e.lambda.max(1.0));
        prop_assert!((e.sigma - e.m - e.lambda1).abs() <= 1e-10 * e.sigma.max(1.0));
    }

    #[test]
    fn defect_is_nonnegative(e in exponents(), lr in -6.0f64..4.0, frac in 0.0f64..1.0, x in 0.0f64..1.0) {
        let r = 10f64.powf(lr);
        let v = e.v_infinity(r);
        let d = nonlinear_defect(frac * v, r, &e).unwrap();
        prop_assert!(d >= -1e-14 * v.powf(e.p));
        prop_assert!(convex_remainder(x, e.p) >= 0.0);
    }

    #[test]
    fn q2_norm_is_plain_l2(e in exponents(), lt in -3.0f64..3.0, centre in -0.5f64..0.5) {
        let grid = LogGrid::new(-6.0, 6.0, 1200).unwrap();
        let width = 6.0 / (6.0 * e.n as f64 + 50.0).sqrt();
        let f = RadialField::from_unscaled(grid, e.sigma, |r| (-((r.ln() - centre) / width).powi(2)).exp()).unwrap();
        let a = weighted_norm(&f, e.n, e.sigma, WeightedNormSpec { q: 2.0, t: 10f64.powf(lt) }).unwrap();
        let b = l2_norm(&f, e.n);
        prop_assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
    }

    #[test]
    fn weighted_norm_is_homogeneous(e in exponents(), c in -50.0f64..50.0, q in 1.0f64..6.0, lt in -2.0f64..2.0) {
        // the origin end decays like r^{n-(2-q)σ} ≥ r^{5/2}
        let grid = LogGrid::new(-14.0, 4.0, 900).unwrap();
        let f = RadialField::from_unscaled(grid, e.sigma, |r| (-r * r).exp()).unwrap();
        let scaled = RadialField::new(grid, f.values.iter().map(|v| c * v).collect(), e.sigma, 0.0).unwrap();
        let spec = WeightedNormSpec { q, t: 10f64.powf(lt) };
        let a = weighted_norm(&f, e.n, e.sigma, spec).unwrap();
        let b = weighted_norm(&scaled, e.n, e.sigma, spec).unwrap();
        prop_assert!((b - c.abs() * a).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn linear_flow_keeps_sign(e in exponents(), g in grid(), seed in prop::collection::vec(0.0f64..1.0, 160), t in 0.01f64..10.0) {
        let w: Vec<f64> = seed[..g.points].iter().map(|v| v.powi(3)).collect();
        let top = w.iter().copied().fold(0.0, f64::max);
        let f = RadialField::new(g, w, e.sigma, 0.0).unwrap();
        let setup = SolverSetup { grid: g, dt0: 1e-3, ..SolverSetup::default() };
        let out = apply_semigroup(&f, &HardyFlow::from_exponents(&e), t, &setup).unwrap();
        prop_assert!(out.values.iter().all(|v| *v >= -1e-10 * top));
    }

    #[test]
    fn implicit_step_obeys_maximum_principle(g in grid(), drift in 0.0f64..8.0, seed in prop::collection::vec(-1.0f64..1.0, 160), ldt in -6.0f64..0.0) {
        let op = RadialOperator::new(g, drift, RightBoundary::ZeroFlux);
        let w = seed[..g.points].to_vec();
        let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let f = RadialField::new(g, w, 0.0, 0.0).unwrap();
        let out = step_implicit(&f, &op, &NoReaction, 10f64.powf(ldt), 1.0).unwrap();
        let slack = 1e-12 * (hi - lo).max(1.0);
        prop_assert!(out.values.iter().all(|v| *v >= lo - slack && *v <= hi + slack));
    }

    #[test]
    fn semigroup_is_self_adjoint(e in exponents(), a in -2.0f64..2.0, b in -2.0f64..2.0, t in 0.05f64..5.0) {
        let g = LogGrid::new(-4.0, 3.0, 200).unwrap();
        let flow = HardyFlow::from_exponents(&e);
        let setup = SolverSetup { grid: g, right: RightBoundary::ZeroFlux, dt0: 1e-3, ..SolverSetup::default() };
        let f = RadialField::new(g, g.s_nodes().iter().map(|s| (-(s - a).powi(2)).exp()).collect(), e.sigma, 0.0).unwrap();
        let h = RadialField::new(g, g.s_nodes().iter().map(|s| (s - b).sin() / (1.0 + s * s)).collect(), e.sigma, 0.0).unwrap();
        let mu = flow.operator(g, RightBoundary::ZeroFlux).measure();
        let pf = apply_semigroup(&f, &flow, t, &setup).unwrap();
        let ph = apply_semigroup(&h, &flow, t, &setup).unwrap();
        let lhs = dot(&mu, &pf.values, &h.values);
        let rhs = dot(&mu, &f.values, &ph.values);
        let scale = dot(&mu, &f.values, &f.values).sqrt() * dot(&mu, &h.values, &h.values).sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn fit_rate_recovers_power_laws(slope in -5.0f64..5.0, c in -5.0f64..5.0, llo in -2.0f64..2.0, span in 0.5f64..4.0, pts in 4usize..60) {
        let lo = 10f64.powf(llo);
        let hi = lo * 10f64.powf(span);
        let series: Vec<(f64, f64)> = log_times(lo, hi, pts).into_iter().map(|t| (t, (c + slope * t.ln()).exp())).collect();
        let f = fit_rate(&series, (lo, hi)).unwrap();
        prop_assert!((f.slope - slope).abs() <= 1e-12 * (1.0 + slope.abs()));
        prop_assert!(f.rms_residual <= 1e-9);
    }

    #[test]
    fn tridiagonal_residual_is_small(diag in prop::collection::vec(3.0f64..5.0, 2..80), seed in 0u64..1000) {
        let n = diag.len();
        let off = |i: usize| ((seed + i as u64) % 7) as f64 / 7.0 - 0.5;
        let lower: Vec<f64> = (0..n).map(|i| if i == 0 { 0.0 } else { off(i) }).collect();
        let upper: Vec<f64> = (0..n).map(|i| if i + 1 == n { 0.0 } else { off(i + 3) }).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for i in 0..n {
            let mut r = diag[i] * x[i] - rhs[i];
            if i > 0 { r += lower[i] * x[i - 1]; }
            if i + 1 < n { r += upper[i] * x[i + 1]; }
            prop_assert!(r.abs() <= 1e-12);
        }
    }
}
