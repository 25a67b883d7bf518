use shl_core::harness::experiments::{
    run_corollary_small_b, run_linear_decay, run_oracle_check, run_theorem_half_l, run_theorem_mth2, SigmaData,
};
use shl_core::harness::io::{reload_report, write_report};
use shl_core::harness::{Config, Mode, RunConfig, Verdict};
use shl_core::{compute_exponents, ProblemParams};

const N: u32 = 11;
const P: f64 = 7.0;

fn slope(r: &shl_core::harness::Report) -> f64 {
    r.fit.expect("report has a fit").slope
}

#[test]
fn linear_slope_ignores_amplitude() {
    let cfg = RunConfig::default();
    let a = run_linear_decay(N, P, 5.0, 0.1, &cfg).unwrap();
    let b = run_linear_decay(N, P, 5.0, 0.025, &cfg).unwrap();
    assert!((slope(&a) - slope(&b)).abs() < 1e-9);
    assert_eq!(a.verdict, Verdict::Pass);
}

#[test]
fn nonlinear_slopes_approach_linear_as_amplitude_shrinks() {
    let cfg = RunConfig::default();
    let big = run_theorem_half_l(N, P, 5.0, 0.1, &cfg).unwrap();
    let small = run_theorem_half_l(N, P, 5.0, 0.025, &cfg).unwrap();
    let lin = slope(&run_linear_decay(N, P, 5.0, 0.1, &cfg).unwrap());
    // measured spreads between the two amplitudes: about 0.008 outer and 0.0075 inner
    assert!((slope(&big.outer) - slope(&small.outer)).abs() < 0.02);
    assert!((slope(&big.inner) - slope(&small.inner)).abs() < 0.02);
    assert!((slope(&small.outer) - lin).abs() < (slope(&big.outer) - lin).abs());
    let inner_target = -(5.0 - 13.0 / 3.0) / 2.0;
    assert!((slope(&small.inner) - inner_target).abs() < (slope(&big.inner) - inner_target).abs());
}

#[test]
fn verdict_recomputes_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();
    let reports = run_theorem_half_l(N, P, 5.0, 0.1, &cfg).unwrap();
    for r in [reports.inner, reports.outer, run_linear_decay(N, P, 5.0, 0.1, &cfg).unwrap()] {
        let w = write_report(dir.path(), &r).unwrap();
        let (back, table) = reload_report(&w.report).unwrap();
        assert_eq!(back.verdict, r.verdict);
        assert_eq!(back.recompute(&table), r.verdict, "{}", r.id);
    }
}

#[test]
fn report_json_is_deterministic() {
    let cfg = RunConfig::default();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let wa = write_report(a.path(), &run_linear_decay(N, P, 5.0, 0.1, &cfg).unwrap()).unwrap();
    let wb = write_report(b.path(), &run_linear_decay(N, P, 5.0, 0.1, &cfg).unwrap()).unwrap();
    assert_eq!(std::fs::read(&wa.report).unwrap(), std::fs::read(&wb.report).unwrap());
    assert_eq!(
        std::fs::read(wa.series.unwrap()).unwrap(),
        std::fs::read(wb.series.unwrap()).unwrap()
    );
}

#[test]
fn oracle_error_shrinks_with_dt() {
    let coarse = run_oracle_check(N, P, 64, 1e-3).unwrap();
    let fine = run_oracle_check(N, P, 64, 1e-4).unwrap();
    let e = |r: &shl_core::harness::Report| r.scalars["relative_error"];
    assert!(e(&fine) < e(&coarse) / 5.0, "{} vs {}", e(&fine), e(&coarse));
    assert!(coarse.scalars["symmetry_residual"] < 1e-10);
}

#[test]
fn zero_amplitude_is_not_applicable() {
    let cfg = RunConfig::default();
    let h = run_theorem_half_l(N, P, 5.0, 0.0, &cfg).unwrap();
    assert_eq!(h.inner.verdict, Verdict::NotApplicable);
    assert_eq!(h.outer.verdict, Verdict::NotApplicable);
    let s = run_theorem_mth2(N, P, 0.0, SigmaData::SigmaTail, &cfg).unwrap();
    assert_eq!(s.verdict, Verdict::NotApplicable);
}

#[test]
fn power_tail_at_sigma_is_inconclusive() {
    let r = run_theorem_mth2(N, P, 0.1, SigmaData::PowerTailAtSigma, &RunConfig::default()).unwrap();
    assert_eq!(r.mode, Mode::Inconclusive);
    assert_eq!(r.verdict, Verdict::Inconclusive);
}

#[test]
fn growth_at_jl_exponent_is_inconclusive() {
    let e = compute_exponents(ProblemParams::new(N, 7.0).unwrap()).unwrap();
    let r = run_corollary_small_b(N, e.p_jl, 5.0, 1e-3, &RunConfig::growth()).unwrap();
    assert_eq!(r.verdict, Verdict::Inconclusive);
}

#[test]
fn config_file_drives_run_config() {
    let c = Config::parse("[grid]\npoints = 1024\n[time]\nt1 = 100\nsamples = 9\n").unwrap();
    let rc = c.run_config(RunConfig::default()).unwrap();
    assert_eq!(rc.setup.grid.points, 1024);
    assert_eq!(rc.times().len(), 9);
    assert_eq!(rc.window.1, 100.0);
}
