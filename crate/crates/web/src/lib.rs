//! Browser bindings. Every export takes and returns JSON strings so the page
//! needs no generated type glue.

use lvs_core::adversary::{default_region, kl_rss_minimized, optimize_true_location, Objective, SearchConfig};
use lvs_core::channel::{NetworkGeometry, Point, ShadowingModel};
use lvs_core::detector::{default_thresholds, roc_sweep, DetectorSpec, Mode};
use lvs_core::experiments::{
    builtin_scenarios, detector_for, CLAIMED_LOCATION, PATH_LOSS_EXPONENT, REFERENCE_DISTANCE, REFERENCE_POWER_DB,
};
use lvs_core::montecarlo::{estimate_rate, TrialPlan};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

const MAX_TRIALS: usize = 1_000_000;
const MAX_HEATMAP_CELLS: usize = 200_000;

#[derive(Debug, Clone, Deserialize)]
pub struct Params {
    pub stations: Vec<[f64; 2]>,
    #[serde(default)]
    pub claimed: Option<[f64; 2]>,
    pub sigma_db: f64,
    pub correlation_distance: f64,
    pub min_distance: f64,
    pub mode: Mode,
}

struct Setup {
    geometry: NetworkGeometry,
    model: ShadowingModel,
    config: SearchConfig,
    mode: Mode,
}

fn setup(json: &str) -> Result<Setup, String> {
    let p: Params = serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))?;
    let claimed = p.claimed.map(Point::from).unwrap_or(CLAIMED_LOCATION);
    let stations = p.stations.iter().map(|&s| Point::from(s)).collect();
    let geometry = NetworkGeometry::new(
        stations,
        claimed,
        REFERENCE_POWER_DB,
        REFERENCE_DISTANCE,
        PATH_LOSS_EXPONENT,
    )
    .map_err(|e| e.to_string())?;
    let model = ShadowingModel::new(&geometry, p.sigma_db, p.correlation_distance).map_err(|e| e.to_string())?;
    let config = SearchConfig::default_for(&geometry, p.min_distance).map_err(|e| e.to_string())?;
    Ok(Setup {
        geometry,
        model,
        config,
        mode: p.mode,
    })
}

fn attack(s: &Setup) -> Result<(lvs_core::AttackStrategy, DetectorSpec), String> {
    let objective = match s.mode {
        Mode::Rss => Objective::RssMinimized,
        Mode::Drss => Objective::Drss,
    };
    let strategy = optimize_true_location(objective, &s.config, &s.geometry, &s.model).map_err(|e| e.to_string())?;
    let spec = detector_for(s.mode, &strategy, &s.geometry, &s.model, 0.0).map_err(|e| e.to_string())?;
    Ok((strategy, spec))
}

#[derive(Serialize)]
struct Analysis {
    true_location: [f64; 2],
    power_boost_db: f64,
    kl: f64,
    separation: f64,
    auc: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

/// Optimal attack and the resulting analytic ROC.
pub fn analyze_json(params: &str) -> Result<String, String> {
    let s = setup(params)?;
    let (strategy, spec) = attack(&s)?;
    let roc = roc_sweep(&spec, &default_thresholds(spec.separation())).map_err(|e| e.to_string())?;
    let out = Analysis {
        true_location: [strategy.true_location.x, strategy.true_location.y],
        power_boost_db: strategy.power_boost_db,
        kl: strategy.kl_value,
        separation: roc.separation,
        auc: roc.auc,
        alpha: roc.points.iter().map(|p| p.alpha).collect(),
        beta: roc.points.iter().map(|p| p.beta).collect(),
    };
    Ok(serde_json::to_string(&out).expect("json"))
}

#[derive(Serialize)]
struct Heatmap {
    min: [f64; 2],
    max: [f64; 2],
    nx: usize,
    ny: usize,
    /// Row-major from `min`; `null` inside the excluded disc or on a station.
    values: Vec<Option<f64>>,
}

/// Minimized KL divergence over the search region on an `nx × ny` grid.
pub fn kl_heatmap_json(params: &str, nx: usize, ny: usize) -> Result<String, String> {
    if nx < 2 || ny < 2 || nx * ny > MAX_HEATMAP_CELLS {
        return Err(format!(
            "grid must be at least 2×2 and at most {MAX_HEATMAP_CELLS} cells"
        ));
    }
    let s = setup(params)?;
    let region = default_region(&s.geometry, s.config.min_distance).map_err(|e| e.to_string())?;
    let claimed = s.geometry.claimed_location();
    let mut values = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = region.min.y + (region.max.y - region.min.y) * j as f64 / (ny - 1) as f64;
        for i in 0..nx {
            let x = region.min.x + (region.max.x - region.min.x) * i as f64 / (nx - 1) as f64;
            let p = Point::new(x, y);
            let v = if p.distance(&claimed) < s.config.min_distance {
                None
            } else {
                kl_rss_minimized(p, &s.geometry, &s.model).ok()
            };
            values.push(v);
        }
    }
    let out = Heatmap {
        min: [region.min.x, region.min.y],
        max: [region.max.x, region.max.y],
        nx,
        ny,
        values,
    };
    Ok(serde_json::to_string(&out).expect("json"))
}

#[derive(Serialize)]
struct McSummary {
    ln_lambda: f64,
    n: usize,
    alpha: f64,
    alpha_stderr: f64,
    alpha_analytic: f64,
    beta: f64,
    beta_stderr: f64,
    beta_analytic: f64,
}

/// Monte Carlo false-positive and detection rates against the optimal attack.
pub fn monte_carlo_json(params: &str, n_trials: usize, seed: u64, ln_lambda: f64) -> Result<String, String> {
    if n_trials == 0 || n_trials > MAX_TRIALS {
        return Err(format!("trials must be between 1 and {MAX_TRIALS}"));
    }
    let s = setup(params)?;
    let (strategy, spec) = attack(&s)?;
    let spec = spec.with_threshold(ln_lambda);
    let analytic = spec.analytic_rates();
    let h0 = estimate_rate(&TrialPlan::h0(n_trials, seed), &spec, &s.geometry, &s.model).map_err(|e| e.to_string())?;
    let h1 = estimate_rate(
        &TrialPlan::h1(n_trials, seed ^ 1, strategy),
        &spec,
        &s.geometry,
        &s.model,
    )
    .map_err(|e| e.to_string())?;
    let out = McSummary {
        ln_lambda,
        n: n_trials,
        alpha: h0.rate,
        alpha_stderr: h0.stderr,
        alpha_analytic: analytic.alpha,
        beta: h1.rate,
        beta_stderr: h1.stderr,
        beta_analytic: analytic.beta,
    };
    Ok(serde_json::to_string(&out).expect("json"))
}

#[derive(Serialize)]
struct Preset {
    name: String,
    stations: Vec<[f64; 2]>,
    claimed: [f64; 2],
    sigma_db: f64,
    correlation_distance: f64,
    min_distance: f64,
    mode: Mode,
}

/// The builtin scenario layouts, for the page's preset menu.
pub fn presets_json() -> String {
    let presets: Vec<Preset> = builtin_scenarios()
        .into_iter()
        .map(|s| Preset {
            stations: s.geometry.base_stations().iter().map(|p| [p.x, p.y]).collect(),
            claimed: [s.geometry.claimed_location().x, s.geometry.claimed_location().y],
            sigma_db: s.sigma_db,
            correlation_distance: s.correlation_distance,
            min_distance: s.min_distance,
            mode: s.modes[0],
            name: s.name,
        })
        .collect();
    serde_json::to_string(&presets).expect("json")
}

#[wasm_bindgen]
pub fn analyze(params: &str) -> Result<String, JsError> {
    analyze_json(params).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn kl_heatmap(params: &str, nx: usize, ny: usize) -> Result<String, JsError> {
    kl_heatmap_json(params, nx, ny).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn monte_carlo(params: &str, n_trials: usize, seed: u64, ln_lambda: f64) -> Result<String, JsError> {
    monte_carlo_json(params, n_trials, seed, ln_lambda).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn presets() -> String {
    presets_json()
}
