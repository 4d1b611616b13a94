use std::path::Path;

use lvs_core::adversary::{kl_rss, optimal_power_boost};
use lvs_core::channel::{MeanVectors, Point, ShadowingModel};
use lvs_core::detector::DetectorSpec;
use lvs_core::experiments::{builtin_scenario, run_scenario_with, RunOptions};
use lvs_core::montecarlo::{estimate_kl, estimate_rate, sample_statistics, TrialPlan};
use lvs_core::scenario_file::{load_scenario, parse_scenario, write_scenario};
use lvs_core::LvsError;

fn fig3_model() -> (lvs_core::NetworkGeometry, ShadowingModel) {
    let s = builtin_scenario("fig3").unwrap();
    let m = ShadowingModel::new(&s.geometry, s.sigma_db, s.correlation_distance).unwrap();
    (s.geometry, m)
}

#[test]
fn fig1_file_matches_builtin() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/fig1.scenario");
    assert_eq!(load_scenario(&path).unwrap(), builtin_scenario("fig1").unwrap());
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_scenario(Path::new("/nonexistent/x.scenario")).unwrap_err();
    assert!(matches!(err, LvsError::Io(_)));
}

#[test]
fn written_scenario_parses_back() {
    let mut s = builtin_scenario("fig6").unwrap();
    s.thresholds = Some(vec![-3.0, 0.0, 3.0]);
    s.search.refine_iterations = Some(3);
    assert_eq!(parse_scenario(&write_scenario(&s), "w").unwrap(), s);
}

#[test]
fn kl_estimate_matches_closed_form() {
    let (g, m) = fig3_model();
    let xt = Point::new(150.0, 5.0);
    let means = MeanVectors::new(&g, xt).unwrap();
    let p_opt = optimal_power_boost(&means.u, &means.v, m.covariance()).unwrap();
    for p in [p_opt, p_opt + 3.0] {
        let est = estimate_kl(xt, p, &g, &m, 1_000_000, 17).unwrap();
        let exact = kl_rss(p, xt, &g, &m).unwrap();
        assert!(
            (est.mean - exact).abs() <= 3.0 * est.stderr,
            "p={p}: {est:?} vs {exact}"
        );
    }
}

#[test]
fn statistics_do_not_depend_on_thread_count() {
    let (g, m) = fig3_model();
    let spec = DetectorSpec::drss(&g, &m, Point::new(150.0, 5.0), 0.0).unwrap();
    let plan = TrialPlan::h0(20_000, 5);
    let pooled = sample_statistics(&plan, &spec, &g, &m).unwrap();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| sample_statistics(&plan, &spec, &g, &m).unwrap());
    assert_eq!(pooled, single);
}

#[test]
fn h0_rate_is_alpha_not_beta() {
    let s = builtin_scenario("fig1").unwrap();
    let m = ShadowingModel::new(&s.geometry, s.sigma_db, s.correlation_distance).unwrap();
    let run = run_scenario_with(&s, RunOptions { monte_carlo: false }).unwrap();
    let strategy = run.variants[0].primary_curve(lvs_core::Mode::Rss).unwrap().strategy;
    for t in [-2.0, 0.0, 2.0] {
        let spec =
            DetectorSpec::rss_with_boost(&s.geometry, &m, strategy.true_location, strategy.power_boost_db, t).unwrap();
        let rates = spec.analytic_rates();
        let h0 = estimate_rate(&TrialPlan::h0(100_000, 3), &spec, &s.geometry, &m).unwrap();
        let h1 = estimate_rate(&TrialPlan::h1(100_000, 4, strategy), &spec, &s.geometry, &m).unwrap();
        assert!(
            h0.z_score(rates.alpha).abs() < 3.89,
            "lnλ={t}: {h0:?} vs α={}",
            rates.alpha
        );
        assert!(
            h1.z_score(rates.beta).abs() < 3.89,
            "lnλ={t}: {h1:?} vs β={}",
            rates.beta
        );
        assert!((h0.rate - rates.beta).abs() > 5.0 * h0.stderr.max(1e-3));
    }
}

#[test]
fn sweeps_expand_into_named_variants() {
    let s = builtin_scenario("fig5").unwrap();
    let names: Vec<String> = s.variants().into_iter().map(|v| v.name).collect();
    assert_eq!(names, ["fig5_dc0", "fig5_dc10", "fig5_dc50", "fig5_dc200"]);
    let s = builtin_scenario("fig6").unwrap();
    let names: Vec<String> = s.variants().into_iter().map(|v| v.name).collect();
    assert_eq!(names, ["fig6_r100", "fig6_r250", "fig6_r500"]);
}
