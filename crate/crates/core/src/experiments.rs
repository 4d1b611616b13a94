//! Scenario registry, end-to-end scenario runs and the theorem checks.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::adversary::{
    drss_quadratic, kl_drss, kl_rss, optimal_power_boost, optimize_true_location, rss_minimized_quadratic,
    AttackStrategy, Objective, Region, SearchConfig,
};
use crate::channel::{MeanVectors, NetworkGeometry, Point, ShadowingModel};
use crate::detector::{build_d_matrix, default_thresholds, q_function, roc_sweep, DetectorSpec, Mode, RocCurve};
use crate::error::{LvsError, Result};
use crate::format::{fmt_g12, fmt_sig};
use crate::linalg::SpdMatrix;
use crate::montecarlo::{validate_detector, McRecord};

pub const CLAIMED_LOCATION: Point = Point::new(50.0, 5.0);
pub const REFERENCE_POWER_DB: f64 = -10.0;
pub const REFERENCE_DISTANCE: f64 = 1.0;
pub const PATH_LOSS_EXPONENT: f64 = 3.0;
pub const DEFAULT_MC_TRIALS: usize = 100_000;
pub const DEFAULT_MC_THRESHOLDS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// How the attacker's true location and boost are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackPolicy {
    /// Location searched per mode, boost from the closed form.
    Optimal,
    /// Fixed location, closed-form boost.
    FixedLocation(Point),
    /// Fixed location and fixed boost (RSS only; DRSS ignores the boost).
    FixedLocationAndBoost { location: Point, power_boost_db: f64 },
}

/// A parameter swept across variants of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    None,
    CorrelationDistance(Vec<f64>),
    MinDistance(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub trials: usize,
    pub seed: u64,
    pub thresholds: Vec<f64>,
}

/// Optional overrides of the default location search.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchOverrides {
    pub region: Option<Region>,
    pub coarse_grid_step: Option<f64>,
    pub refine_iterations: Option<usize>,
    pub refine_shrink: Option<f64>,
}

impl SearchOverrides {
    pub fn config_for(&self, geometry: &NetworkGeometry, min_distance: f64) -> Result<SearchConfig> {
        let mut config = match self.region {
            Some(region) => SearchConfig::with_region(region, min_distance)?,
            None => SearchConfig::default_for(geometry, min_distance)?,
        };
        if let Some(step) = self.coarse_grid_step {
            config.coarse_grid_step = step;
        }
        if let Some(iters) = self.refine_iterations {
            config.refine_iterations = iters;
        }
        if let Some(shrink) = self.refine_shrink {
            config.refine_shrink = shrink;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub geometry: NetworkGeometry,
    pub sigma_db: f64,
    pub correlation_distance: f64,
    pub min_distance: f64,
    pub attack: AttackPolicy,
    pub modes: Vec<Mode>,
    /// ROC threshold grid; `None` uses the default 201-point grid.
    pub thresholds: Option<Vec<f64>>,
    pub mc: McSettings,
    pub sweep: Sweep,
    /// Extra fixed true locations (closed-form boost) to compare against.
    pub comparison_locations: Vec<Point>,
    /// Extra RSS curves with the boost offset from its optimum by these dB.
    pub boost_offsets: Vec<f64>,
    pub search: SearchOverrides,
}

/// One concrete parameter set produced by expanding a scenario's sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    /// Output key: the scenario name, suffixed with the swept value.
    pub name: String,
    pub correlation_distance: f64,
    pub min_distance: f64,
}

impl Scenario {
    pub fn variants(&self) -> Vec<Variant> {
        match &self.sweep {
            Sweep::None => vec![Variant {
                name: self.name.clone(),
                correlation_distance: self.correlation_distance,
                min_distance: self.min_distance,
            }],
            Sweep::CorrelationDistance(values) => values
                .iter()
                .map(|&dc| Variant {
                    name: format!("{}_dc{}", self.name, fmt_g12(dc)),
                    correlation_distance: dc,
                    min_distance: self.min_distance,
                })
                .collect(),
            Sweep::MinDistance(values) => values
                .iter()
                .map(|&r| Variant {
                    name: format!("{}_r{}", self.name, fmt_g12(r)),
                    correlation_distance: self.correlation_distance,
                    min_distance: r,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LvsError::InvalidScenario(format!("{}: {m}", self.name)));
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return bad(format!("name {:?} must be a non-empty identifier", self.name));
        }
        if !(self.sigma_db > 0.0 && self.sigma_db.is_finite()) {
            return bad(format!("sigma_db must be positive, got {}", self.sigma_db));
        }
        if self.modes.is_empty() {
            return bad("at least one mode is required".into());
        }
        for (i, m) in self.modes.iter().enumerate() {
            if self.modes[..i].contains(m) {
                return bad(format!("mode {m} listed twice"));
            }
        }
        if self.mc.trials == 0 {
            return bad("mc_trials must be at least 1".into());
        }
        if let Some(t) = &self.thresholds {
            if t.len() < 2
                || t.windows(2)
                    .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
            {
                return bad("roc_thresholds must hold at least 2 strictly increasing values".into());
            }
        }
        if self.boost_offsets.iter().any(|o| *o == 0.0 || !o.is_finite()) {
            return bad("boost_offsets must be finite and non-zero".into());
        }
        if let Sweep::CorrelationDistance(v) | Sweep::MinDistance(v) = &self.sweep {
            if v.is_empty() {
                return bad("sweep list is empty".into());
            }
        }
        for variant in self.variants() {
            if !(variant.correlation_distance >= 0.0 && variant.correlation_distance.is_finite()) {
                return bad(format!(
                    "correlation_distance must be non-negative, got {}",
                    variant.correlation_distance
                ));
            }
            let r = variant.min_distance;
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("min_distance must be positive, got {r}"));
            }
            let mut fixed: Vec<Point> = self.comparison_locations.clone();
            match self.attack {
                AttackPolicy::Optimal => {}
                AttackPolicy::FixedLocation(p) | AttackPolicy::FixedLocationAndBoost { location: p, .. } => {
                    fixed.push(p)
                }
            }
            for p in fixed {
                let dist = p.distance(&self.geometry.claimed_location());
                if dist < r {
                    return bad(format!(
                        "true location ({}, {}) is {} m from the claimed location, violating the minimum-distance constraint r = {r} m",
                        p.x,
                        p.y,
                        fmt_sig(dist, 6)
                    ));
                }
                self.geometry.check_not_coincident(&p)?;
            }
            self.search.config_for(&self.geometry, r)?;
        }
        Ok(())
    }
}

fn base_geometry(stations: &[[f64; 2]]) -> NetworkGeometry {
    NetworkGeometry::new(
        stations.iter().map(|&p| Point::from(p)).collect(),
        CLAIMED_LOCATION,
        REFERENCE_POWER_DB,
        REFERENCE_DISTANCE,
        PATH_LOSS_EXPONENT,
    )
    .expect("builtin geometry is valid")
}

pub const FIG1_STATIONS: [[f64; 2]; 3] = [[-250.0, 10.0], [0.0, -10.0], [250.0, 10.0]];
pub const FIG2_STATIONS: [[f64; 2]; 4] = [[201.4, -9.0], [-161.7, 9.3], [-97.4, 1.2], [91.5, 2.4]];
pub const FIG3_STATIONS: [[f64; 2]; 3] = [[0.0, 10.0], [131.4, -9.3], [20.6, -0.9]];

fn scenario(
    name: &str,
    stations: &[[f64; 2]],
    sigma_db: f64,
    dc: f64,
    r: f64,
    modes: Vec<Mode>,
    seed: u64,
) -> Scenario {
    Scenario {
        name: name.to_string(),
        geometry: base_geometry(stations),
        sigma_db,
        correlation_distance: dc,
        min_distance: r,
        attack: AttackPolicy::Optimal,
        modes,
        thresholds: None,
        mc: McSettings {
            trials: DEFAULT_MC_TRIALS,
            seed,
            thresholds: DEFAULT_MC_THRESHOLDS.to_vec(),
        },
        sweep: Sweep::None,
        comparison_locations: Vec::new(),
        boost_offsets: Vec::new(),
        search: SearchOverrides::default(),
    }
}

/// The six reference scenarios.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let mut fig1 = scenario("fig1", &FIG1_STATIONS, 7.5, 50.0, 500.0, vec![Mode::Rss], 1);
    fig1.comparison_locations = vec![
        Point::new(550.0, 5.0),
        Point::new(50.0, -495.0),
        Point::new(-450.0, 5.0),
    ];

    let mut fig2 = scenario("fig2", &FIG2_STATIONS, 5.0, 50.0, 100.0, vec![Mode::Drss], 2);
    fig2.comparison_locations = vec![Point::new(150.0, 5.0), Point::new(50.0, 105.0), Point::new(-50.0, 5.0)];

    let mut fig3 = scenario("fig3", &FIG3_STATIONS, 5.0, 50.0, 100.0, vec![Mode::Rss, Mode::Drss], 3);
    fig3.boost_offsets = vec![-5.0, -2.0, 2.0, 5.0];

    let mut fig4 = scenario("fig4", &FIG1_STATIONS, 7.5, 50.0, 500.0, vec![Mode::Rss], 4);
    fig4.sweep = Sweep::CorrelationDistance(vec![0.0, 10.0, 50.0, 200.0]);
    fig4.comparison_locations = vec![Point::new(550.0, 5.0)];

    let mut fig5 = scenario("fig5", &FIG3_STATIONS, 5.0, 50.0, 100.0, vec![Mode::Drss], 5);
    fig5.sweep = Sweep::CorrelationDistance(vec![0.0, 10.0, 50.0, 200.0]);
    fig5.comparison_locations = vec![Point::new(150.0, 5.0)];

    let mut fig6 = scenario("fig6", &FIG3_STATIONS, 5.0, 50.0, 100.0, vec![Mode::Rss, Mode::Drss], 6);
    fig6.sweep = Sweep::MinDistance(vec![100.0, 250.0, 500.0]);

    vec![fig1, fig2, fig3, fig4, fig5, fig6]
}

pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

/// One analytic ROC produced by a scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    pub mode: Mode,
    /// `None` for the scenario's primary attack, otherwise a short tag.
    pub label: Option<String>,
    pub strategy: AttackStrategy,
    pub roc: RocCurve,
}

impl CurveResult {
    pub fn file_name(&self) -> String {
        match &self.label {
            None => format!("{}_roc.csv", self.mode),
            Some(label) => format!("{}_{label}_roc.csv", self.mode),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRun {
    pub variant: Variant,
    pub attacks: Vec<(Mode, AttackStrategy)>,
    pub curves: Vec<CurveResult>,
    pub mc: Vec<McRecord>,
}

impl VariantRun {
    pub fn primary_curve(&self, mode: Mode) -> Option<&CurveResult> {
        self.curves.iter().find(|c| c.mode == mode && c.label.is_none())
    }

    pub fn attack(&self, mode: Mode) -> Option<&AttackStrategy> {
        self.attacks.iter().find(|(m, _)| *m == mode).map(|(_, a)| a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub scenario: String,
    pub variants: Vec<VariantRun>,
}

/// Per-run knobs that do not belong to the scenario itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Skip Monte Carlo validation entirely.
    pub monte_carlo: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { monte_carlo: true }
    }
}

/// Strategy of the scenario's attack policy against one detector mode.
pub fn attack_for_mode(
    policy: &AttackPolicy,
    mode: Mode,
    config: &SearchConfig,
    geometry: &NetworkGeometry,
    model: &ShadowingModel,
) -> Result<AttackStrategy> {
    match (policy, mode) {
        (AttackPolicy::Optimal, Mode::Rss) => optimize_true_location(Objective::RssMinimized, config, geometry, model),
        (AttackPolicy::Optimal, Mode::Drss) => optimize_true_location(Objective::Drss, config, geometry, model),
        (AttackPolicy::FixedLocation(p), Mode::Rss) => AttackStrategy::at_location(*p, geometry, model),
        (
            AttackPolicy::FixedLocationAndBoost {
                location,
                power_boost_db,
            },
            Mode::Rss,
        ) => AttackStrategy::fixed(*location, *power_boost_db, geometry, model),
        (AttackPolicy::FixedLocation(p), Mode::Drss)
        | (AttackPolicy::FixedLocationAndBoost { location: p, .. }, Mode::Drss) => Ok(AttackStrategy {
            true_location: *p,
            power_boost_db: 0.0,
            kl_value: kl_drss(*p, geometry, model)?,
            boost_relevant: false,
        }),
    }
}

/// Detector matched to `strategy` in the given mode.
pub fn detector_for(
    mode: Mode,
    strategy: &AttackStrategy,
    geometry: &NetworkGeometry,
    model: &ShadowingModel,
    log_threshold: f64,
) -> Result<DetectorSpec> {
    match mode {
        Mode::Rss => DetectorSpec::rss_with_boost(
            geometry,
            model,
            strategy.true_location,
            strategy.power_boost_db,
            log_threshold,
        ),
        Mode::Drss => DetectorSpec::drss(geometry, model, strategy.true_location, log_threshold),
    }
}

fn curve(
    scenario: &Scenario,
    mode: Mode,
    label: Option<String>,
    strategy: AttackStrategy,
    geometry: &NetworkGeometry,
    model: &ShadowingModel,
) -> Result<CurveResult> {
    let spec = detector_for(mode, &strategy, geometry, model, 0.0)?;
    let thresholds = match &scenario.thresholds {
        Some(t) => t.clone(),
        None => default_thresholds(spec.separation()),
    };
    Ok(CurveResult {
        mode,
        label,
        strategy,
        roc: roc_sweep(&spec, &thresholds)?,
    })
}

fn mode_index(mode: Mode) -> u64 {
    match mode {
        Mode::Rss => 0,
        Mode::Drss => 1,
    }
}

/// Attack, analytic ROC per mode and (optionally) Monte Carlo validation for
/// every variant of `scenario`.
pub fn run_scenario_with(scenario: &Scenario, options: RunOptions) -> Result<ScenarioRun> {
    scenario.validate()?;
    let mut variants = Vec::new();
    for (vi, variant) in scenario.variants().into_iter().enumerate() {
        let geometry = &scenario.geometry;
        let model = ShadowingModel::new(geometry, scenario.sigma_db, variant.correlation_distance)?;
        let config = scenario.search.config_for(geometry, variant.min_distance)?;
        let mut attacks = Vec::new();
        let mut curves = Vec::new();
        let mut mc = Vec::new();
        for &mode in &scenario.modes {
            let strategy = attack_for_mode(&scenario.attack, mode, &config, geometry, &model)?;
            attacks.push((mode, strategy));
            curves.push(curve(scenario, mode, None, strategy, geometry, &model)?);

            if options.monte_carlo {
                let spec = detector_for(mode, &strategy, geometry, &model, 0.0)?;
                let seed = scenario
                    .mc
                    .seed
                    .wrapping_mul(1_000_003)
                    .wrapping_add(vi as u64 * 16 + mode_index(mode));
                mc.extend(validate_detector(
                    &variant.name,
                    &spec,
                    strategy,
                    geometry,
                    &model,
                    &scenario.mc.thresholds,
                    scenario.mc.trials,
                    seed,
                )?);
            }

            for (k, &loc) in scenario.comparison_locations.iter().enumerate() {
                let policy = AttackPolicy::FixedLocation(loc);
                let s = attack_for_mode(&policy, mode, &config, geometry, &model)?;
                curves.push(curve(scenario, mode, Some(format!("loc{k}")), s, geometry, &model)?);
            }

            if mode == Mode::Rss && strategy.boost_relevant {
                let means = MeanVectors::new(geometry, strategy.true_location)?;
                let optimal = optimal_power_boost(&means.u, &means.v, model.covariance())?;
                for &offset in &scenario.boost_offsets {
                    let s = AttackStrategy::fixed(strategy.true_location, optimal + offset, geometry, &model)?;
                    let label = format!("boost{}{}", if offset > 0.0 { "+" } else { "" }, fmt_g12(offset));
                    curves.push(curve(scenario, mode, Some(label), s, geometry, &model)?);
                }
            }
        }
        variants.push(VariantRun {
            variant,
            attacks,
            curves,
            mc,
        });
    }
    Ok(ScenarioRun {
        scenario: scenario.name.clone(),
        variants,
    })
}

pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun> {
    run_scenario_with(scenario, RunOptions::default())
}

/// Runs independent scenarios in parallel; output order follows the input.
pub fn run_all(scenarios: &[Scenario], options: RunOptions) -> Result<Vec<ScenarioRun>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        scenarios.par_iter().map(|s| run_scenario_with(s, options)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        scenarios.iter().map(|s| run_scenario_with(s, options)).collect()
    }
}

/// Rounds to 12 significant digits so emitted JSON has fixed precision.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() {
        fmt_g12(x).parse().unwrap_or(x)
    } else {
        x
    }
}

fn rounded_point(p: Point) -> serde_json::Value {
    serde_json::json!([round12(p.x), round12(p.y)])
}

fn strategy_json(s: &AttackStrategy) -> serde_json::Value {
    serde_json::json!({
        "true_location": rounded_point(s.true_location),
        "power_boost_db": round12(s.power_boost_db),
        "kl_value": round12(s.kl_value),
        "boost_relevant": s.boost_relevant,
        "distance_to_claim": round12(s.true_location.distance(&CLAIMED_LOCATION)),
    })
}

/// JSON document written as `attack.json`.
pub fn attack_json(scenario: &Scenario, run: &VariantRun) -> serde_json::Value {
    let mut attacks = serde_json::Map::new();
    for (mode, s) in &run.attacks {
        attacks.insert(mode.to_string(), strategy_json(s));
    }
    serde_json::json!({
        "scenario": run.variant.name,
        "sigma_db": round12(scenario.sigma_db),
        "correlation_distance": round12(run.variant.correlation_distance),
        "min_distance": round12(run.variant.min_distance),
        "claimed_location": rounded_point(scenario.geometry.claimed_location()),
        "attacks": attacks,
        "auc": run.curves.iter().map(|c| {
            (c.file_name().trim_end_matches("_roc.csv").to_string(), serde_json::json!(round12(c.roc.auc)))
        }).collect::<serde_json::Map<_, _>>(),
    })
}

pub fn mc_jsonl(records: &[McRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let rounded = McRecord {
            ln_lambda: round12(r.ln_lambda),
            rate: round12(r.rate),
            stderr: round12(r.stderr),
            analytic: round12(r.analytic),
            ..r.clone()
        };
        out.push_str(&serde_json::to_string(&rounded).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Writes `<outdir>/<variant>/{<mode>_roc.csv, mc.jsonl, attack.json}`.
pub fn write_scenario_outputs(scenario: &Scenario, run: &ScenarioRun, outdir: &Path) -> Result<()> {
    for v in &run.variants {
        let dir = outdir.join(&v.variant.name);
        fs::create_dir_all(&dir)?;
        for c in &v.curves {
            fs::write(dir.join(c.file_name()), c.roc.to_csv())?;
        }
        if !v.mc.is_empty() {
            fs::write(dir.join("mc.jsonl"), mc_jsonl(&v.mc))?;
        }
        let attack = serde_json::to_string_pretty(&attack_json(scenario, v)).expect("json");
        fs::write(dir.join("attack.json"), attack + "\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    /// Worst value seen over all trials.
    pub measured: f64,
    pub tolerance: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let rounded = VerificationReport {
            checks: self
                .checks
                .iter()
                .map(|c| CheckResult {
                    measured: round12(c.measured),
                    ..c.clone()
                })
                .collect(),
            ..self.clone()
        };
        serde_json::to_string_pretty(&rounded).expect("json") + "\n"
    }
}

/// A randomized instance for the theorem checks.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub geometry: NetworkGeometry,
    pub model: ShadowingModel,
    pub true_location: Point,
    pub min_distance: f64,
}

/// Base stations uniform in the 500 m × 20 m strip, σ ∈ [3, 10] dB,
/// `D_c ∈ [0, 200]` m, and a true location outside the `r`-disc.
pub fn random_instance<R: Rng>(rng: &mut R) -> RandomInstance {
    loop {
        let n = rng.random_range(3..=5);
        let stations: Vec<Point> = (0..n)
            .map(|_| Point::new(rng.random_range(-250.0..250.0), rng.random_range(-10.0..10.0)))
            .collect();
        let separated = stations
            .iter()
            .enumerate()
            .all(|(i, a)| a.distance(&CLAIMED_LOCATION) >= 1.0 && stations[..i].iter().all(|b| a.distance(b) >= 1.0));
        if !separated {
            continue;
        }
        let geometry = NetworkGeometry::new(
            stations,
            CLAIMED_LOCATION,
            REFERENCE_POWER_DB,
            REFERENCE_DISTANCE,
            PATH_LOSS_EXPONENT,
        )
        .expect("separated stations form a valid geometry");
        let sigma = rng.random_range(3.0..10.0);
        let dc = rng.random_range(0.0..200.0);
        let Ok(model) = ShadowingModel::new(&geometry, sigma, dc) else {
            continue;
        };
        let r = rng.random_range(50.0..300.0);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let rho = rng.random_range(r..r + 300.0);
        let true_location = Point::new(
            CLAIMED_LOCATION.x + rho * theta.cos(),
            CLAIMED_LOCATION.y + rho * theta.sin(),
        );
        if geometry.check_not_coincident(&true_location).is_err() {
            continue;
        }
        return RandomInstance {
            geometry,
            model,
            true_location,
            min_distance: r,
        };
    }
}

/// Minimizer of a smooth convex function on `[a, b]` by bisection on the
/// sign of a central difference.
pub fn bisect_minimum(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let h = 1e-3;
    while b - a > tol {
        let m = 0.5 * (a + b);
        if f(m + h) > f(m - h) {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Detection rate at false-positive rate `alpha` for separation `s`.
pub fn beta_at_alpha(s: f64, alpha: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z = normal.inverse_cdf(1.0 - alpha);
    q_function(z - s.sqrt())
}

/// Miss rate `1 − β` at false-positive rate `alpha`, accurate far into the tail.
pub fn miss_at_alpha(s: f64, alpha: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    q_function(s.sqrt() - normal.inverse_cdf(1.0 - alpha))
}

struct Tally {
    name: &'static str,
    description: &'static str,
    tolerance: f64,
    /// Pass when `measured < tolerance` (false) or `measured > tolerance` (true).
    lower_bound: bool,
    worst: f64,
    failed: bool,
}

impl Tally {
    fn upper(name: &'static str, tolerance: f64, description: &'static str) -> Self {
        Self {
            name,
            description,
            tolerance,
            lower_bound: false,
            worst: f64::NEG_INFINITY,
            failed: false,
        }
    }

    fn lower(name: &'static str, tolerance: f64, description: &'static str) -> Self {
        Self {
            name,
            description,
            tolerance,
            lower_bound: true,
            worst: f64::INFINITY,
            failed: false,
        }
    }

    fn record(&mut self, value: Result<f64>) {
        match value {
            Ok(v) if self.lower_bound => {
                self.worst = self.worst.min(v);
                self.failed |= v.partial_cmp(&self.tolerance) != Some(std::cmp::Ordering::Greater);
            }
            Ok(v) => {
                self.worst = self.worst.max(v);
                self.failed |= v.partial_cmp(&self.tolerance) != Some(std::cmp::Ordering::Less);
            }
            Err(_) => self.failed = true,
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            status: if self.failed {
                CheckStatus::Fail
            } else {
                CheckStatus::Pass
            },
            measured: self.worst,
            tolerance: self.tolerance,
            description: self.description.to_string(),
        }
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

pub const BOOST_PERTURBATIONS: [f64; 6] = [-10.0, -3.0, -1.0, 1.0, 3.0, 10.0];

fn quadratic_identity(inst: &RandomInstance) -> Result<f64> {
    let gap = MeanVectors::new(&inst.geometry, inst.true_location)?.gap();
    let rss = rss_minimized_quadratic(&gap, inst.model.covariance())?;
    let drss = drss_quadratic(&gap, inst.model.covariance().matrix())?;
    Ok(rel_diff(rss, drss))
}

fn rate_identity(inst: &RandomInstance) -> Result<f64> {
    let rss = DetectorSpec::rss_optimal_boost(&inst.geometry, &inst.model, inst.true_location, 0.0)?;
    let drss = DetectorSpec::drss(&inst.geometry, &inst.model, inst.true_location, 0.0)?;
    let mut worst = 0.0f64;
    for t in default_thresholds(rss.separation()) {
        let a = rss.with_threshold(t).analytic_rates();
        let b = drss.with_threshold(t).analytic_rates();
        worst = worst.max((a.alpha - b.alpha).abs()).max((a.beta - b.beta).abs());
    }
    Ok(worst)
}

/// Smallest relative margin by which the RSS detector with a perturbed boost
/// beats DRSS: in `s`, and in miss rate at α = 0.1. Miss rates that underflow
/// to zero carry no information and are skipped.
fn dominance_margin(inst: &RandomInstance) -> Result<f64> {
    let means = MeanVectors::new(&inst.geometry, inst.true_location)?;
    let optimal = optimal_power_boost(&means.u, &means.v, inst.model.covariance())?;
    let drss = DetectorSpec::drss(&inst.geometry, &inst.model, inst.true_location, 0.0)?;
    let miss_drss = miss_at_alpha(drss.separation(), 0.1);
    let mut margin = f64::INFINITY;
    for delta in BOOST_PERTURBATIONS {
        let rss = DetectorSpec::rss_with_boost(&inst.geometry, &inst.model, inst.true_location, optimal + delta, 0.0)?;
        margin = margin.min((rss.separation() - drss.separation()) / drss.separation());
        if miss_drss > 0.0 {
            let miss_rss = miss_at_alpha(rss.separation(), 0.1);
            margin = margin.min((miss_drss - miss_rss) / miss_drss);
        }
    }
    Ok(margin)
}

fn boost_oracle_error(inst: &RandomInstance) -> Result<f64> {
    let means = MeanVectors::new(&inst.geometry, inst.true_location)?;
    let closed = optimal_power_boost(&means.u, &means.v, inst.model.covariance())?;
    let phi = |p: f64| kl_rss(p, inst.true_location, &inst.geometry, &inst.model).unwrap_or(f64::INFINITY);
    let numeric = bisect_minimum(phi, -200.0, 200.0, 1e-10);
    Ok((closed - numeric).abs())
}

/// Most negative second difference of the KL divergence over a boost grid.
fn convexity_violation(inst: &RandomInstance) -> Result<f64> {
    let means = MeanVectors::new(&inst.geometry, inst.true_location)?;
    let center = optimal_power_boost(&means.u, &means.v, inst.model.covariance())?;
    let values = (-80..=80)
        .map(|k| {
            kl_rss(
                center + 0.25 * k as f64,
                inst.true_location,
                &inst.geometry,
                &inst.model,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values
        .windows(3)
        .map(|w| -(w[0] - 2.0 * w[1] + w[2]))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// For `R = I`: residual of `D·(I − 11ᵀ/N) = I` and the relative gap between
/// the DRSS form and `Σg² − (Σg)²/N`.
fn uncorrelated_inverse_error(inst: &RandomInstance) -> Result<f64> {
    let n = inst.geometry.num_stations();
    let d = build_d_matrix(&DMatrix::identity(n, n))?;
    let explicit = DMatrix::<f64>::identity(n - 1, n - 1) - DMatrix::from_element(n - 1, n - 1, 1.0 / n as f64);
    let residual = (d.matrix() * &explicit - DMatrix::<f64>::identity(n - 1, n - 1)).amax();
    let gap = MeanVectors::new(&inst.geometry, inst.true_location)?.gap();
    let closed = gap.iter().map(|g| g * g).sum::<f64>() - gap.sum().powi(2) / n as f64;
    let eye = SpdMatrix::new(DMatrix::identity(n, n))?;
    let via_d = drss_quadratic(&gap, eye.matrix())?;
    let via_rss = rss_minimized_quadratic(&gap, &eye)?;
    Ok(residual.max(rel_diff(closed, via_d)).max(rel_diff(closed, via_rss)))
}

/// Distance between the two optimizers' locations in final-cell units, or
/// infinity if their minimized divergences differ by more than 1e-6.
fn optimizer_disagreement(inst: &RandomInstance) -> Result<f64> {
    let mut config = SearchConfig::default_for(&inst.geometry, inst.min_distance)?;
    config.coarse_grid_step *= 200.0 / 60.0;
    let rss = optimize_true_location(Objective::RssMinimized, &config, &inst.geometry, &inst.model)?;
    let drss = optimize_true_location(Objective::Drss, &config, &inst.geometry, &inst.model)?;
    if rel_diff(rss.kl_value, drss.kl_value) > 1e-6 {
        return Ok(f64::INFINITY);
    }
    Ok(rss.true_location.distance(&drss.true_location) / config.final_cell())
}

/// Randomized checks of the RSS/DRSS equivalence and its corollaries.
pub fn verify_theorems(trials: usize, seed: u64) -> Result<VerificationReport> {
    if trials == 0 {
        return Err(LvsError::InvalidScenario(
            "verification needs at least one trial".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances: Vec<RandomInstance> = (0..trials).map(|_| random_instance(&mut rng)).collect();

    let mut identity = Tally::upper(
        "kl_identity",
        1e-9,
        "relative gap between (w-u)'R^-1(w-u) and (dv-du)'D^-1(dv-du)",
    );
    let mut rates = Tally::upper(
        "rate_identity",
        1e-9,
        "max |alpha| and |beta| difference between RSS (optimal boost) and DRSS over the threshold grid",
    );
    let mut dominance = Tally::lower(
        "rss_dominance",
        0.0,
        "min relative margin of s_RSS over s_DRSS and of DRSS over RSS miss rate at alpha = 0.1, boosts offset by +-1, 3, 10 dB",
    );
    let mut optimizers = Tally::upper(
        "optimizer_agreement",
        std::f64::consts::SQRT_2 + 1e-9,
        "distance between RSS and DRSS optimal locations in final refinement cells (KL within 1e-6)",
    );
    let mut boost = Tally::upper(
        "optimal_boost_closed_form",
        1e-6,
        "|closed-form boost - numerical minimizer| in dB",
    );
    let mut convexity = Tally::upper(
        "convexity",
        1e-9,
        "largest negative second difference of the RSS KL over a boost grid",
    );
    let mut uncorrelated = Tally::upper(
        "uncorrelated_d_inverse",
        1e-9,
        "R = I: residual of D (I - 11'/N) = I and gap to sum(g^2) - (sum g)^2/N",
    );

    for inst in &instances {
        identity.record(quadratic_identity(inst));
        rates.record(rate_identity(inst));
        dominance.record(dominance_margin(inst));
        optimizers.record(optimizer_disagreement(inst));
        boost.record(boost_oracle_error(inst));
        convexity.record(convexity_violation(inst));
        uncorrelated.record(uncorrelated_inverse_error(inst));
    }

    Ok(VerificationReport {
        trials,
        seed,
        checks: [identity, rates, dominance, optimizers, boost, convexity, uncorrelated]
            .into_iter()
            .map(Tally::finish)
            .collect(),
    })
}

/// AUC of the optimal-attack ROC for a given mode.
pub fn optimal_attack_auc(
    geometry: &NetworkGeometry,
    sigma_db: f64,
    correlation_distance: f64,
    min_distance: f64,
    mode: Mode,
) -> Result<(AttackStrategy, f64)> {
    let model = ShadowingModel::new(geometry, sigma_db, correlation_distance)?;
    let config = SearchConfig::default_for(geometry, min_distance)?;
    let strategy = attack_for_mode(&AttackPolicy::Optimal, mode, &config, geometry, &model)?;
    let spec = detector_for(mode, &strategy, geometry, &model, 0.0)?;
    let roc = roc_sweep(&spec, &default_thresholds(spec.separation()))?;
    Ok((strategy, roc.auc))
}
