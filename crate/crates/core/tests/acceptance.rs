//! Acceptance criteria, one test each. Every test prints a single PASS/FAIL line.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use srm_core::bubble::BubbleStabilityOptions;
use srm_core::geom::QuadSpec;
use srm_core::surface::Hypersurface;
use srm_core::variation::minkowski_check;
use srm_core::verify::{self, Check};
use srm_core::builtin_heisenberg;

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let out = f();
    (out, t0.elapsed())
}

fn runtime(limit_s: f64, d: Duration) -> Check {
    Check::below("runtime (s)", d.as_secs_f64(), limit_s)
}

fn report(n: usize, title: &str, checks: &[Check]) {
    let ok = verify::all_passed(checks);
    let detail = match checks.iter().find(|c| !c.passed) {
        Some(c) => c.to_string(),
        None => checks.iter().map(|c| format!("{} = {:.3e}", c.name, c.measured)).collect::<Vec<_>>().join("; "),
    };
    println!("criterion {n:>2} {} ({title}): {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_01_bubble_closed_forms() {
    let (checks, d) = timed(|| verify::bubble_closed_form_checks(&[0.5, 1.0, 2.0], 50).unwrap());
    let mut checks = checks;
    checks.push(runtime(10.0, d));
    report(1, "bubble closed forms", &checks);
}

#[test]
fn criterion_02_cmc_verdict() {
    report(2, "constant H on the bubble", &verify::bubble_cmc_checks(&[0.5, 1.0, 2.0]).unwrap());
}

#[test]
fn criterion_03_minkowski_identity() {
    let l = 1.0;
    let m = builtin_heisenberg(2).unwrap();
    let s = Hypersurface::bubble(l, 2).unwrap();
    let (r, d) = timed(|| minkowski_check(&m, &s, QuadSpec::default()).unwrap());
    let p0 = r.perimeter;
    let vol = r.volume.expect("closed bubble volume");
    let identity = (5.0 * p0 - 24.0 * vol / l).abs() / (5.0 * p0);
    let oracle = 3.0 * PI.powi(3) * l.powi(5) / 2.0;
    let checks = vec![
        Check::below("|5 P0 - 24 Vol/L| / (5 P0)", identity, 1e-6),
        Check::below("|P0 - 3 pi^3 L^5/2| / (3 pi^3 L^5/2)", (p0 - oracle).abs() / oracle, 1e-8),
        runtime(30.0, d),
    ];
    report(3, "Minkowski identity, Q = 6", &checks);
}

#[test]
fn criterion_04_first_variation_oracle() {
    let (cases, d) = timed(|| verify::first_variation_checks().unwrap());
    let mut checks: Vec<Check> = cases.iter().flat_map(|c| c.checks()).collect();
    checks.push(Check::above("pairs", cases.len() as f64, 4.5));
    checks.push(runtime(60.0, d));
    report(4, "first variation vs difference quotient", &checks);
}

#[test]
fn criterion_05_divergence_equivalence() {
    let samples = verify::divergence_samples(200).unwrap();
    let gap = samples.iter().map(|s| (s.div_nu - s.div_sigma_nu).abs()).fold(0.0, f64::max);
    let worst_model = samples
        .iter()
        .max_by(|a, b| (a.div_nu - a.div_sigma_nu).abs().total_cmp(&(b.div_nu - b.div_sigma_nu).abs()))
        .map(|s| s.model.clone())
        .unwrap_or_default();
    let checks = vec![Check::below(
        format!("max |div nu - div_Sigma nu| over 200 points of all builtins (worst on {worst_model})"),
        gap,
        1e-6,
    )];
    report(5, "divergence equivalence", &checks);
}

#[test]
fn criterion_06_second_variation_specialization() {
    report(6, "general potential vs specialized forms", &verify::potential_checks(100).unwrap());
}

#[test]
fn criterion_07_second_variation_oracle() {
    report(7, "second variation vs 5-point difference", &verify::second_variation_oracle_checks().unwrap());
}

#[test]
fn criterion_08_fourier_inequality() {
    report(8, "Fourier inequality", &verify::fourier_checks(200).unwrap());
}

#[test]
fn criterion_09_bubble_stability() {
    let (checks, d) = timed(|| verify::bubble_stability_checks(&BubbleStabilityOptions::default()).unwrap());
    let mut checks = checks;
    checks.push(runtime(120.0, d));
    report(9, "bubble stability", &checks);
}

#[test]
fn criterion_10_characteristic_sets() {
    report(10, "characteristic sets", &verify::charset_checks().unwrap());
}

#[test]
fn criterion_11_rigidity_correction() {
    report(11, "bracket correction on rigid builtins", &verify::rigidity_checks(200).unwrap());
}
