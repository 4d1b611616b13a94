//! Network geometry, log-distance path-loss means and spatially correlated
//! log-normal shadowing.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LvsError, Result};
use crate::linalg::SpdMatrix;

/// A planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Point::new(p[0], p[1])
    }
}

/// Base-station layout, the claimed location under test, and the
/// log-distance path-loss parameters shared by every link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGeometry {
    base_stations: Vec<Point>,
    claimed_location: Point,
    reference_power_db: f64,
    reference_distance: f64,
    path_loss_exponent: f64,
}

impl NetworkGeometry {
    pub fn new(
        base_stations: Vec<Point>,
        claimed_location: Point,
        reference_power_db: f64,
        reference_distance: f64,
        path_loss_exponent: f64,
    ) -> Result<Self> {
        if base_stations.len() < 2 {
            return Err(LvsError::InvalidGeometry(format!(
                "at least 2 base stations are required, got {}",
                base_stations.len()
            )));
        }
        if let Some(i) = base_stations.iter().position(|p| !p.is_finite()) {
            return Err(LvsError::InvalidGeometry(format!(
                "base station {} has a non-finite coordinate",
                i + 1
            )));
        }
        for i in 0..base_stations.len() {
            for j in i + 1..base_stations.len() {
                if base_stations[i] == base_stations[j] {
                    return Err(LvsError::InvalidGeometry(format!(
                        "base stations {} and {} share the position ({}, {})",
                        i + 1,
                        j + 1,
                        base_stations[i].x,
                        base_stations[i].y
                    )));
                }
            }
        }
        if !claimed_location.is_finite() {
            return Err(LvsError::InvalidGeometry("claimed location is not finite".into()));
        }
        if !reference_power_db.is_finite() {
            return Err(LvsError::InvalidGeometry("reference power must be finite".into()));
        }
        if !(reference_distance > 0.0 && reference_distance.is_finite()) {
            return Err(LvsError::InvalidGeometry(format!(
                "reference distance must be positive, got {reference_distance}"
            )));
        }
        if !(path_loss_exponent > 0.0 && path_loss_exponent.is_finite()) {
            return Err(LvsError::InvalidGeometry(format!(
                "path-loss exponent must be positive, got {path_loss_exponent}"
            )));
        }
        let geometry = Self {
            base_stations,
            claimed_location,
            reference_power_db,
            reference_distance,
            path_loss_exponent,
        };
        geometry.check_not_coincident(&claimed_location)?;
        Ok(geometry)
    }

    pub fn base_stations(&self) -> &[Point] {
        &self.base_stations
    }

    pub fn num_stations(&self) -> usize {
        self.base_stations.len()
    }

    pub fn claimed_location(&self) -> Point {
        self.claimed_location
    }

    pub fn reference_power_db(&self) -> f64 {
        self.reference_power_db
    }

    pub fn reference_distance(&self) -> f64 {
        self.reference_distance
    }

    pub fn path_loss_exponent(&self) -> f64 {
        self.path_loss_exponent
    }

    /// Same geometry with a different claimed location.
    pub fn with_claimed_location(&self, claimed_location: Point) -> Result<Self> {
        Self::new(
            self.base_stations.clone(),
            claimed_location,
            self.reference_power_db,
            self.reference_distance,
            self.path_loss_exponent,
        )
    }

    pub fn check_not_coincident(&self, location: &Point) -> Result<()> {
        match self.base_stations.iter().position(|bs| bs.distance(location) == 0.0) {
            Some(index) => Err(LvsError::CoincidentLocation {
                index: index + 1,
                x: location.x,
                y: location.y,
            }),
            None => Ok(()),
        }
    }

    /// Mean received power (dB) at every base station for a transmitter at
    /// `location`: `p − 10·γ·log10(dist/d)`.
    pub fn mean_vector(&self, location: Point) -> Result<DVector<f64>> {
        self.check_not_coincident(&location)?;
        let gamma10 = 10.0 * self.path_loss_exponent;
        Ok(DVector::from_iterator(
            self.base_stations.len(),
            self.base_stations.iter().map(|bs| {
                self.reference_power_db - gamma10 * (bs.distance(&location) / self.reference_distance).log10()
            }),
        ))
    }

    /// Means for a legitimate user at the claimed location.
    pub fn claimed_means(&self) -> DVector<f64> {
        self.mean_vector(self.claimed_location)
            .expect("claimed location validated at construction")
    }

    /// Axis-aligned bounding box of the base stations.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for bs in &self.base_stations {
            lo.x = lo.x.min(bs.x);
            lo.y = lo.y.min(bs.y);
            hi.x = hi.x.max(bs.x);
            hi.y = hi.y.max(bs.y);
        }
        (lo, hi)
    }
}

/// Hypothesis means for one candidate attacker location.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVectors {
    /// Legitimate-claim means.
    pub u: DVector<f64>,
    /// Means from the true location, before any power boost.
    pub v: DVector<f64>,
}

impl MeanVectors {
    pub fn new(geometry: &NetworkGeometry, true_location: Point) -> Result<Self> {
        Ok(Self {
            u: geometry.claimed_means(),
            v: geometry.mean_vector(true_location)?,
        })
    }

    /// `g = v − u`.
    pub fn gap(&self) -> DVector<f64> {
        &self.v - &self.u
    }
}

/// Gudmundson-correlated shadowing over a fixed set of base stations.
#[derive(Debug, Clone)]
pub struct ShadowingModel {
    sigma_db: f64,
    correlation_distance: f64,
    covariance: SpdMatrix,
}

impl ShadowingModel {
    /// Builds `R_ij = σ²·exp(−(d_ij/D_c)·ln 2)`; `D_c = 0` is the
    /// uncorrelated case `R = σ²I`.
    pub fn new(geometry: &NetworkGeometry, sigma_db: f64, correlation_distance: f64) -> Result<Self> {
        if !(sigma_db > 0.0 && sigma_db.is_finite()) {
            return Err(LvsError::InvalidShadowing(format!(
                "sigma_db must be positive, got {sigma_db}"
            )));
        }
        if !(correlation_distance >= 0.0 && correlation_distance.is_finite()) {
            return Err(LvsError::InvalidShadowing(format!(
                "correlation distance must be non-negative, got {correlation_distance}"
            )));
        }
        let variance = sigma_db * sigma_db;
        let bs = geometry.base_stations();
        let n = bs.len();
        let mut r = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            r[(i, i)] = variance;
            for j in i + 1..n {
                let rij = if correlation_distance == 0.0 {
                    0.0
                } else {
                    let dij = bs[i].distance(&bs[j]);
                    variance * (-(dij / correlation_distance) * std::f64::consts::LN_2).exp()
                };
                r[(i, j)] = rij;
                r[(j, i)] = rij;
            }
        }
        let covariance = SpdMatrix::with_jitter_fallback(r, 1e-10 * variance)?;
        Ok(Self {
            sigma_db,
            correlation_distance,
            covariance,
        })
    }

    pub fn sigma_db(&self) -> f64 {
        self.sigma_db
    }

    pub fn correlation_distance(&self) -> f64 {
        self.correlation_distance
    }

    pub fn covariance(&self) -> &SpdMatrix {
        &self.covariance
    }

    pub fn num_stations(&self) -> usize {
        self.covariance.dim()
    }

    /// Diagonal jitter needed to factorize `R`, if any.
    pub fn jitter_applied(&self) -> Option<f64> {
        let j = self.covariance.jitter();
        (j > 0.0).then_some(j)
    }

    /// Draws `mean + L·z` with `z` i.i.d. standard normal.
    pub fn sample_observation<R: Rng + ?Sized>(&self, mean: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
        let n = self.num_stations();
        if mean.len() != n {
            return Err(LvsError::DimensionMismatch {
                expected: n,
                actual: mean.len(),
            });
        }
        let lower = self.covariance.lower();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        Ok(mean + lower * z)
    }
}
