use robin_plap::bounds::{sandwich_check, tol_h, BoundsCertificate};
use robin_plap::eigensolver::{
    interval_first_integral_oracle, interval_p2_oracle, radial_disk_oracle, solve_lambda, SolverOptions,
};
use robin_plap::functionals::Exponent;
use robin_plap::geometry::DomainSpec;
use robin_plap::harness::{
    alpha_sweep, certificate_for, emit, fit_ratio, from_csv, from_json, sweep_mesh, CertificateSource, Format,
    RunConfig,
};

fn ex(p: f64) -> Exponent {
    Exponent::new(p).unwrap()
}

#[test]
fn interval_sweep_ratios_match_the_closed_form() {
    let cfg = RunConfig::new(DomainSpec::interval(1.0), 2.0, vec![1.0, 2.0, 4.0, 8.0, 16.0], 1e-3).unwrap();
    let sweep = alpha_sweep(&cfg).unwrap();
    for r in &sweep.records {
        let exact = interval_p2_oracle(1.0, r.alpha).unwrap() / (r.alpha * r.alpha);
        assert!(r.converged);
        assert!(((r.ratio - exact) / exact).abs() <= 2e-3, "alpha {}: {} vs {exact}", r.alpha, r.ratio);
    }
    let fit = fit_ratio(&sweep.records).unwrap();
    assert!((fit.a + 1.0).abs() <= 5e-3, "{fit:?}");
}

#[test]
fn interval_sweep_for_general_p_matches_the_first_integral() {
    let cfg = RunConfig::new(DomainSpec::interval(1.0), 1.5, vec![1.0, 4.0], 2e-3).unwrap();
    for r in alpha_sweep(&cfg).unwrap().records {
        let exact = interval_first_integral_oracle(1.0, ex(1.5), r.alpha).unwrap();
        assert!(r.converged);
        assert!(((r.lambda - exact) / exact).abs() <= 2e-3, "alpha {}: {} vs {exact}", r.alpha, r.lambda);
    }
}

#[test]
fn disk_fit_approaches_one_minus_p() {
    let mut cfg = RunConfig::new(DomainSpec::disk(1.0), 3.0, vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0], 0.1).unwrap();
    cfg.warm = true;
    let sweep = alpha_sweep(&cfg).unwrap();
    assert!(sweep.records.iter().all(|r| r.converged));
    let fit = fit_ratio(&sweep.records).unwrap();
    assert!((fit.a + 2.0).abs() <= 0.2, "{fit:?}");
    assert!(sweep.records.windows(2).all(|w| w[1].ratio > w[0].ratio), "{:?}", sweep.records);
}

#[test]
fn planar_disk_matches_the_radial_oracle_and_the_sandwich() {
    let disk = DomainSpec::disk(1.0);
    let (p, alpha) = (ex(2.0), 8.0);
    let mesh = sweep_mesh(&disk, p, alpha, 0.1, true).unwrap();
    let r = solve_lambda(&mesh, p, alpha, &SolverOptions::default()).unwrap();
    let exact = radial_disk_oracle(1.0, p, alpha, robin_plap::eigensolver::MIN_ORACLE_CELLS).unwrap();
    assert!(((r.lambda - exact) / exact).abs() <= 1e-2, "{} vs {exact}", r.lambda);

    let ext = certificate_for(&disk, &CertificateSource::ClosedForm).unwrap();
    let cert = BoundsCertificate::new(p, alpha, &ext).unwrap();
    let tol = tol_h(p, alpha, robin_plap::bounds::layer_metric(&mesh, p, alpha));
    let verdict = sandwich_check(&r, &cert, tol, None);
    assert!(verdict.holds, "{verdict:?}");
}

#[test]
fn emitted_files_read_back() {
    let cfg = RunConfig::new(DomainSpec::ellipse(1.25, 0.8), 2.0, vec![1.0, 4.0], 0.15).unwrap();
    let records = alpha_sweep(&cfg).unwrap().records;
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = (dir.path().join("s.csv"), dir.path().join("s.json"));
    emit(&records, Format::Csv, &csv).unwrap();
    emit(&records, Format::Json, &json).unwrap();
    assert_eq!(from_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap(), records);
    assert_eq!(from_json(&std::fs::read_to_string(&json).unwrap()).unwrap(), records);
}
