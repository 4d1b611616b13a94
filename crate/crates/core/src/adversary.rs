//! The malicious user's optimal strategy.
//!
//! For a fixed true location the KL divergence between the legitimate and
//! attacked RSS distributions is a convex quadratic in the power boost, so
//! the optimal boost has a closed form. The true location itself is found
//! by a deterministic grid-then-refine search over the feasible region
//! `{x : ‖x − x_c‖ ≥ r}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::{MeanVectors, NetworkGeometry, Point, ShadowingModel};
use crate::detector::{build_d_matrix, drss_transform};
use crate::error::{LvsError, Result};
use crate::linalg::SpdMatrix;

/// Relative tolerance under which two objective values count as a tie.
const TIE_TOLERANCE: f64 = 1e-12;

/// Number of points on the `‖x − x_c‖ = r` circle added to the coarse grid.
const BOUNDARY_SAMPLES: usize = 720;

/// Closed-form boost `((u − v)ᵀ R⁻¹ 1) / (1ᵀ R⁻¹ 1)` minimizing the RSS KL
/// divergence for a fixed true location.
pub fn optimal_power_boost(u: &DVector<f64>, v: &DVector<f64>, cov: &SpdMatrix) -> Result<f64> {
    let ones = DVector::from_element(cov.dim(), 1.0);
    let r_inv_ones = cov.solve(&ones)?;
    let denom = ones.dot(&r_inv_ones);
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(LvsError::SingularCovariance(format!("1ᵀR⁻¹1 = {denom}")));
    }
    if u.len() != cov.dim() || v.len() != cov.dim() {
        return Err(LvsError::DimensionMismatch {
            expected: cov.dim(),
            actual: if u.len() != cov.dim() { u.len() } else { v.len() },
        });
    }
    Ok((u - v).dot(&r_inv_ones) / denom)
}

/// Mean of the attacked observations when the boost is chosen optimally:
/// `w = p_x^o·1 + v`.
pub fn attacked_means(u: &DVector<f64>, v: &DVector<f64>, cov: &SpdMatrix) -> Result<DVector<f64>> {
    let boost = optimal_power_boost(u, v, cov)?;
    Ok(v.add_scalar(boost))
}

/// KL divergence `½(p_x·1 + v − u)ᵀ R⁻¹ (p_x·1 + v − u)` in nats.
pub fn kl_rss(
    power_boost: f64,
    true_location: Point,
    geometry: &NetworkGeometry,
    model: &ShadowingModel,
) -> Result<f64> {
    let means = MeanVectors::new(geometry, true_location)?;
    let diff = means.gap().add_scalar(power_boost);
    Ok(0.5 * model.covariance().quad_form(&diff)?)
}

/// `(w − u)ᵀ R⁻¹ (w − u)` for the gap `g = v − u`, i.e. the RSS quadratic
/// form with the boost minimized out.
pub fn rss_minimized_quadratic(gap: &DVector<f64>, cov: &SpdMatrix) -> Result<f64> {
    let zeros = DVector::zeros(gap.len());
    let boost = optimal_power_boost(&zeros, gap, cov)?;
    cov.quad_form(&gap.add_scalar(boost))
}

/// `(Δv − Δu)ᵀ D⁻¹ (Δv − Δu)` for the gap `g = v − u` and RSS covariance `r`.
pub fn drss_quadratic(gap: &DVector<f64>, r: &DMatrix<f64>) -> Result<f64> {
    let d = build_d_matrix(r)?;
    d.quad_form(&drss_transform(gap)?)
}

/// RSS KL divergence at the optimal boost, `½(w − u)ᵀ R⁻¹ (w − u)`.
pub fn kl_rss_minimized(true_location: Point, geometry: &NetworkGeometry, model: &ShadowingModel) -> Result<f64> {
    let means = MeanVectors::new(geometry, true_location)?;
    Ok(0.5 * rss_minimized_quadratic(&means.gap(), model.covariance())?)
}

/// DRSS KL divergence `½(Δv − Δu)ᵀ D⁻¹ (Δv − Δu)`; no boost enters.
pub fn kl_drss(true_location: Point, geometry: &NetworkGeometry, model: &ShadowingModel) -> Result<f64> {
    let means = MeanVectors::new(geometry, true_location)?;
    Ok(0.5 * drss_quadratic(&means.gap(), model.covariance().matrix())?)
}

/// Which divergence the location search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// RSS KL with the boost already minimized out.
    RssMinimized,
    Drss,
}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: Point,
    pub max: Point,
}

impl Region {
    pub fn new(min: Point, max: Point) -> Result<Self> {
        if !(min.x < max.x && min.y < max.y) || ![min.x, min.y, max.x, max.y].iter().all(|v| v.is_finite()) {
            return Err(LvsError::InvalidSearchConfig(format!(
                "region min ({}, {}) must be strictly below max ({}, {})",
                min.x, min.y, max.x, max.y
            )));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    fn corners(&self) -> [Point; 4] {
        [
            self.min,
            Point::new(self.max.x, self.min.y),
            Point::new(self.min.x, self.max.y),
            self.max,
        ]
    }

    fn longest_side(&self) -> f64 {
        (self.max.x - self.min.x).max(self.max.y - self.min.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub region: Region,
    pub coarse_grid_step: f64,
    pub refine_iterations: usize,
    pub refine_shrink: f64,
    /// Points per side of the local refinement grid.
    pub refine_points: usize,
    pub min_distance: f64,
}

impl SearchConfig {
    /// Bounding box of the base stations grown by `2r` per side, 200 coarse
    /// cells along the longest side, then 6 halvings of a 9×9 local grid.
    pub fn default_for(geometry: &NetworkGeometry, min_distance: f64) -> Result<Self> {
        let region = default_region(geometry, min_distance)?;
        Self::with_region(region, min_distance)
    }

    pub fn with_region(region: Region, min_distance: f64) -> Result<Self> {
        let config = Self {
            coarse_grid_step: region.longest_side() / 200.0,
            region,
            refine_iterations: 6,
            refine_shrink: 0.5,
            refine_points: 9,
            min_distance,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coarse_grid_step > 0.0 && self.coarse_grid_step.is_finite()) {
            return Err(LvsError::InvalidSearchConfig(
                "coarse_grid_step must be positive".into(),
            ));
        }
        if !(self.refine_shrink > 0.0 && self.refine_shrink < 1.0) {
            return Err(LvsError::InvalidSearchConfig(
                "refine_shrink must lie strictly in (0, 1)".into(),
            ));
        }
        if self.refine_points < 2 {
            return Err(LvsError::InvalidSearchConfig("refine_points must be at least 2".into()));
        }
        if !(self.min_distance > 0.0 && self.min_distance.is_finite()) {
            return Err(LvsError::InvalidSearchConfig("min_distance must be positive".into()));
        }
        Region::new(self.region.min, self.region.max)?;
        Ok(())
    }

    /// Spacing of the last local refinement grid.
    pub fn final_cell(&self) -> f64 {
        self.coarse_grid_step * self.refine_shrink.powi(self.refine_iterations as i32)
    }
}

pub fn default_region(geometry: &NetworkGeometry, min_distance: f64) -> Result<Region> {
    let (mut lo, mut hi) = geometry.bounding_box();
    let c = geometry.claimed_location();
    lo = Point::new(lo.x.min(c.x), lo.y.min(c.y));
    hi = Point::new(hi.x.max(c.x), hi.y.max(c.y));
    let pad = 2.0 * min_distance;
    Region::new(Point::new(lo.x - pad, lo.y - pad), Point::new(hi.x + pad, hi.y + pad))
}

/// An attacker's chosen true location, boost and the divergence it attains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackStrategy {
    pub true_location: Point,
    pub power_boost_db: f64,
    pub kl_value: f64,
    /// False for DRSS, where a common boost cancels out of every difference.
    pub boost_relevant: bool,
}

impl AttackStrategy {
    /// Fixed true location with the closed-form optimal boost.
    pub fn at_location(true_location: Point, geometry: &NetworkGeometry, model: &ShadowingModel) -> Result<Self> {
        let means = MeanVectors::new(geometry, true_location)?;
        let boost = optimal_power_boost(&means.u, &means.v, model.covariance())?;
        Ok(Self {
            true_location,
            power_boost_db: boost,
            kl_value: kl_rss(boost, true_location, geometry, model)?,
            boost_relevant: true,
        })
    }

    /// Fixed true location and fixed boost.
    pub fn fixed(
        true_location: Point,
        power_boost_db: f64,
        geometry: &NetworkGeometry,
        model: &ShadowingModel,
    ) -> Result<Self> {
        Ok(Self {
            true_location,
            power_boost_db,
            kl_value: kl_rss(power_boost_db, true_location, geometry, model)?,
            boost_relevant: true,
        })
    }
}

/// Precomputed pieces of one objective so the search loop only does a
/// triangular solve per candidate.
struct ObjectiveEvaluator<'a> {
    objective: Objective,
    geometry: &'a NetworkGeometry,
    model: &'a ShadowingModel,
    u: DVector<f64>,
    r_inv_ones: DVector<f64>,
    ones_r_inv_ones: f64,
    d: Option<SpdMatrix>,
}

impl<'a> ObjectiveEvaluator<'a> {
    fn new(objective: Objective, geometry: &'a NetworkGeometry, model: &'a ShadowingModel) -> Result<Self> {
        if geometry.num_stations() != model.num_stations() {
            return Err(LvsError::DimensionMismatch {
                expected: geometry.num_stations(),
                actual: model.num_stations(),
            });
        }
        let ones = DVector::from_element(model.num_stations(), 1.0);
        let r_inv_ones = model.covariance().solve(&ones)?;
        let ones_r_inv_ones = ones.dot(&r_inv_ones);
        let d = match objective {
            Objective::Drss => Some(build_d_matrix(model.covariance().matrix())?),
            Objective::RssMinimized => None,
        };
        Ok(Self {
            objective,
            geometry,
            model,
            u: geometry.claimed_means(),
            r_inv_ones,
            ones_r_inv_ones,
            d,
        })
    }

    /// Objective value, or `None` for a location on top of a base station.
    fn eval(&self, p: Point) -> Option<f64> {
        let v = self.geometry.mean_vector(p).ok()?;
        let gap = v - &self.u;
        let value = match (&self.objective, &self.d) {
            (Objective::Drss, Some(d)) => d.quad_form(&drss_transform(&gap).ok()?).ok()?,
            _ => {
                let boost = -gap.dot(&self.r_inv_ones) / self.ones_r_inv_ones;
                self.model.covariance().quad_form(&gap.add_scalar(boost)).ok()?
            }
        };
        let kl = 0.5 * value;
        kl.is_finite().then_some(kl)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    point: Point,
    value: f64,
}

/// Minimum with lexicographic `(x, y)` tie-break among values within the
/// tie tolerance of the minimum. Independent of input order.
fn select_best(candidates: &[Candidate]) -> Option<Candidate> {
    let min = candidates.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let cutoff = min + TIE_TOLERANCE * min.abs().max(1.0);
    candidates
        .iter()
        .filter(|c| c.value <= cutoff)
        .min_by(|a, b| a.point.x.total_cmp(&b.point.x).then(a.point.y.total_cmp(&b.point.y)))
        .copied()
}

fn evaluate_all(evaluator: &ObjectiveEvaluator<'_>, points: &[Point]) -> Vec<Candidate> {
    let eval = |p: &Point| evaluator.eval(*p).map(|value| Candidate { point: *p, value });
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        points.par_iter().filter_map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().filter_map(eval).collect()
    }
}

/// Pushes a point inside the open exclusion disc radially out to its boundary.
fn project_feasible(p: Point, center: Point, radius: f64) -> Option<Point> {
    let dist = p.distance(&center);
    if dist >= radius {
        return Some(p);
    }
    if dist == 0.0 {
        return None;
    }
    let mut scale = radius / dist;
    loop {
        let q = Point::new(center.x + (p.x - center.x) * scale, center.y + (p.y - center.y) * scale);
        if q.distance(&center) >= radius {
            return Some(q);
        }
        scale *= 1.0 + f64::EPSILON;
    }
}

fn coarse_candidates(config: &SearchConfig, center: Point) -> Vec<Point> {
    let Region { min, max } = config.region;
    let r = config.min_distance;
    let step = config.coarse_grid_step;
    let nx = ((max.x - min.x) / step).floor() as usize;
    let ny = ((max.y - min.y) / step).floor() as usize;
    let mut points = Vec::with_capacity((nx + 1) * (ny + 1) + BOUNDARY_SAMPLES);
    for i in 0..=nx {
        let x = min.x + i as f64 * step;
        for j in 0..=ny {
            let p = Point::new(x, min.y + j as f64 * step);
            if p.distance(&center) >= r {
                points.push(p);
            }
        }
    }
    for k in 0..BOUNDARY_SAMPLES {
        let theta = std::f64::consts::TAU * k as f64 / BOUNDARY_SAMPLES as f64;
        let raw = Point::new(center.x + r * theta.cos(), center.y + r * theta.sin());
        if let Some(p) = project_feasible(raw, center, r) {
            if config.region.contains(&p) {
                points.push(p);
            }
        }
    }
    points
}

/// Grid-then-refine minimization of the chosen divergence over the feasible
/// region. Deterministic for a given input, regardless of thread count.
pub fn optimize_true_location(
    objective: Objective,
    config: &SearchConfig,
    geometry: &NetworkGeometry,
    model: &ShadowingModel,
) -> Result<AttackStrategy> {
    config.validate()?;
    let center = geometry.claimed_location();
    let r = config.min_distance;
    if config.region.corners().iter().all(|c| c.distance(&center) < r) {
        return Err(LvsError::EmptyFeasibleRegion(format!(
            "region lies entirely within {r} m of the claimed location"
        )));
    }
    let evaluator = ObjectiveEvaluator::new(objective, geometry, model)?;

    let coarse = coarse_candidates(config, center);
    let mut best = select_best(&evaluate_all(&evaluator, &coarse))
        .ok_or_else(|| LvsError::EmptyFeasibleRegion("no feasible coarse-grid point has a finite objective".into()))?;

    let half = (config.refine_points - 1) as f64 / 2.0;
    let mut spacing = config.coarse_grid_step;
    for _ in 0..config.refine_iterations {
        spacing *= config.refine_shrink;
        let mut local = Vec::with_capacity(config.refine_points * config.refine_points);
        for i in 0..config.refine_points {
            for j in 0..config.refine_points {
                let raw = Point::new(
                    best.point.x + (i as f64 - half) * spacing,
                    best.point.y + (j as f64 - half) * spacing,
                );
                if let Some(p) = project_feasible(raw, center, r) {
                    if config.region.contains(&p) {
                        local.push(p);
                    }
                }
            }
        }
        let mut scored = evaluate_all(&evaluator, &local);
        scored.push(best);
        best = select_best(&scored).expect("incumbent is finite");
    }

    let strategy = match objective {
        Objective::RssMinimized => {
            let means = MeanVectors::new(geometry, best.point)?;
            AttackStrategy {
                true_location: best.point,
                power_boost_db: optimal_power_boost(&means.u, &means.v, model.covariance())?,
                kl_value: best.value,
                boost_relevant: true,
            }
        }
        Objective::Drss => AttackStrategy {
            true_location: best.point,
            power_boost_db: 0.0,
            kl_value: best.value,
            boost_relevant: false,
        },
    };
    Ok(strategy)
}
