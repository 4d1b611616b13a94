//! Likelihood-ratio detectors for RSS and DRSS observations.
//!
//! Both modes reduce to a linear statistic `T(y) = (μ₁ − μ₀)ᵀ C⁻¹ y`
//! compared against `Γ = ln λ + ½(μ₁ − μ₀)ᵀ C⁻¹ (μ₁ + μ₀)`. With
//! `s = (μ₁ − μ₀)ᵀ C⁻¹ (μ₁ − μ₀)` the rates are
//! `α = Q((ln λ + s/2)/√s)` and `β = Q((ln λ − s/2)/√s)`.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adversary::attacked_means;
use crate::channel::{MeanVectors, NetworkGeometry, Point, ShadowingModel};
use crate::error::{LvsError, Result};
use crate::format::fmt_g12;
use crate::linalg::SpdMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rss,
    Drss,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Rss => "rss",
            Mode::Drss => "drss",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = LvsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rss" => Ok(Mode::Rss),
            "drss" => Ok(Mode::Drss),
            other => Err(LvsError::InvalidScenario(format!(
                "unknown mode {other:?}, expected rss or drss"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    AcceptH0,
    AcceptH1,
}

/// Differences against the last entry: `y_m − y_N` for `m = 1..N−1`.
pub fn drss_transform(y: &DVector<f64>) -> Result<DVector<f64>> {
    let n = y.len();
    if n < 2 {
        return Err(LvsError::DimensionMismatch { expected: 2, actual: n });
    }
    let last = y[n - 1];
    Ok(DVector::from_iterator(n - 1, y.iter().take(n - 1).map(|v| v - last)))
}

/// Covariance of the differenced noise: `D_mn = R_NN + R_mn − R_mN − R_nN`.
pub fn build_d_matrix(r: &DMatrix<f64>) -> Result<SpdMatrix> {
    let n = r.nrows();
    if n < 2 || r.ncols() != n {
        return Err(LvsError::DimensionMismatch { expected: 2, actual: n });
    }
    let last = n - 1;
    let mut d = DMatrix::<f64>::zeros(n - 1, n - 1);
    for m in 0..n - 1 {
        for k in m..n - 1 {
            let v = r[(last, last)] + r[(m, k)] - r[(m, last)] - r[(k, last)];
            d[(m, k)] = v;
            d[(k, m)] = v;
        }
    }
    SpdMatrix::new(d)
}

/// Gaussian upper-tail probability `Q(x) = ½·erfc(x/√2)`.
pub fn q_function(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 1.0;
    }
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// A fully specified likelihood-ratio test between `N(μ₀, C)` and `N(μ₁, C)`.
#[derive(Debug, Clone)]
pub struct DetectorSpec {
    mode: Mode,
    mu0: DVector<f64>,
    mu1: DVector<f64>,
    cov: SpdMatrix,
    log_threshold: f64,
    weights: DVector<f64>,
    separation: f64,
    offset: f64,
}

impl DetectorSpec {
    pub fn new(mode: Mode, mu0: DVector<f64>, mu1: DVector<f64>, cov: SpdMatrix, log_threshold: f64) -> Result<Self> {
        if mu0.len() != cov.dim() || mu1.len() != cov.dim() {
            return Err(LvsError::DimensionMismatch {
                expected: cov.dim(),
                actual: if mu0.len() != cov.dim() { mu0.len() } else { mu1.len() },
            });
        }
        if mu0 == mu1 {
            return Err(LvsError::DegenerateDetector("hypothesis means coincide".into()));
        }
        if log_threshold.is_nan() {
            return Err(LvsError::DegenerateDetector("log threshold is NaN".into()));
        }
        let diff = &mu1 - &mu0;
        let weights = cov.solve(&diff)?;
        let separation = diff.dot(&weights);
        if !(separation > 0.0 && separation.is_finite()) {
            return Err(LvsError::DegenerateDetector(format!("separation s = {separation}")));
        }
        let offset = 0.5 * weights.dot(&(&mu1 + &mu0));
        Ok(Self {
            mode,
            mu0,
            mu1,
            cov,
            log_threshold,
            weights,
            separation,
            offset,
        })
    }

    /// RSS detector against an attacker at `true_location` who uses the
    /// closed-form optimal boost (`μ₁ = w`).
    pub fn rss_optimal_boost(
        geometry: &NetworkGeometry,
        model: &ShadowingModel,
        true_location: Point,
        log_threshold: f64,
    ) -> Result<Self> {
        let means = MeanVectors::new(geometry, true_location)?;
        let w = attacked_means(&means.u, &means.v, model.covariance())?;
        Self::new(Mode::Rss, means.u, w, model.covariance().clone(), log_threshold)
    }

    /// RSS detector against an attacker with an arbitrary boost
    /// (`μ₁ = p_x·1 + v`).
    pub fn rss_with_boost(
        geometry: &NetworkGeometry,
        model: &ShadowingModel,
        true_location: Point,
        power_boost_db: f64,
        log_threshold: f64,
    ) -> Result<Self> {
        let means = MeanVectors::new(geometry, true_location)?;
        let mu1 = means.v.add_scalar(power_boost_db);
        Self::new(Mode::Rss, means.u, mu1, model.covariance().clone(), log_threshold)
    }

    /// DRSS detector: `μ₀ = Δu`, `μ₁ = Δv`, covariance `D`.
    pub fn drss(
        geometry: &NetworkGeometry,
        model: &ShadowingModel,
        true_location: Point,
        log_threshold: f64,
    ) -> Result<Self> {
        let means = MeanVectors::new(geometry, true_location)?;
        let d = build_d_matrix(model.covariance().matrix())?;
        Self::new(
            Mode::Drss,
            drss_transform(&means.u)?,
            drss_transform(&means.v)?,
            d,
            log_threshold,
        )
    }

    pub fn with_threshold(&self, log_threshold: f64) -> Self {
        let mut spec = self.clone();
        spec.log_threshold = log_threshold;
        spec
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn mu0(&self) -> &DVector<f64> {
        &self.mu0
    }

    pub fn mu1(&self) -> &DVector<f64> {
        &self.mu1
    }

    pub fn cov(&self) -> &SpdMatrix {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn log_threshold(&self) -> f64 {
        self.log_threshold
    }

    /// `s = (μ₁ − μ₀)ᵀ C⁻¹ (μ₁ − μ₀)`.
    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// Threshold on the linear statistic, `Γ`.
    pub fn gamma(&self) -> f64 {
        self.gamma_at(self.log_threshold)
    }

    pub fn gamma_at(&self, log_threshold: f64) -> f64 {
        log_threshold + self.offset
    }

    /// `C⁻¹(μ₁ − μ₀)`, the weights of the linear statistic.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn test_statistic(&self, obs: &DVector<f64>) -> Result<f64> {
        self.check_dim(obs.len())?;
        Ok(self.weights.dot(obs))
    }

    /// `ln Λ(y) = T(y) − ½(μ₁ − μ₀)ᵀ C⁻¹ (μ₁ + μ₀)`.
    pub fn log_likelihood_ratio(&self, obs: &DVector<f64>) -> Result<f64> {
        Ok(self.test_statistic(obs)? - self.offset)
    }

    /// H1 iff `T(obs) ≥ Γ`.
    pub fn decide(&self, obs: &DVector<f64>) -> Result<Decision> {
        Ok(if self.test_statistic(obs)? >= self.gamma() {
            Decision::AcceptH1
        } else {
            Decision::AcceptH0
        })
    }

    pub fn analytic_rates(&self) -> RatePair {
        rates_from_separation(self.separation, self.log_threshold)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(LvsError::DimensionMismatch {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub alpha: f64,
    pub beta: f64,
}

/// Closed-form false-positive and detection rates of `spec`.
pub fn analytic_rates(spec: &DetectorSpec) -> Result<RatePair> {
    let s = spec.separation();
    if !(s > 0.0 && s.is_finite()) {
        return Err(LvsError::DegenerateDetector(format!("separation s = {s}")));
    }
    Ok(spec.analytic_rates())
}

pub fn rates_from_separation(s: f64, log_threshold: f64) -> RatePair {
    let root = s.sqrt();
    RatePair {
        alpha: q_function((log_threshold + 0.5 * s) / root),
        beta: q_function((log_threshold - 0.5 * s) / root),
    }
}

/// 201 thresholds uniform over `[−s/2 − 6√s, s/2 + 6√s]`.
pub fn default_thresholds(s: f64) -> Vec<f64> {
    let half_width = 0.5 * s + 6.0 * s.sqrt();
    let n = 201;
    (0..n)
        .map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub ln_lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// In the order of the thresholds that produced them (ascending ln λ).
    pub points: Vec<RocPoint>,
    pub separation: f64,
    pub auc: f64,
}

/// Analytic ROC over the given (ascending) log thresholds.
pub fn roc_sweep(spec: &DetectorSpec, thresholds: &[f64]) -> Result<RocCurve> {
    if thresholds.len() < 2 {
        return Err(LvsError::InvalidScenario(
            "an ROC sweep needs at least 2 thresholds".into(),
        ));
    }
    if thresholds
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(LvsError::InvalidScenario(
            "ROC thresholds must be strictly increasing".into(),
        ));
    }
    let s = spec.separation();
    let points: Vec<RocPoint> = thresholds
        .iter()
        .map(|&t| {
            let rp = rates_from_separation(s, t);
            RocPoint {
                ln_lambda: t,
                alpha: rp.alpha,
                beta: rp.beta,
            }
        })
        .collect();
    let auc = trapezoid_auc(&points);
    Ok(RocCurve {
        points,
        separation: s,
        auc,
    })
}

/// Trapezoidal area over alpha-sorted points, closed with (0,0) and (1,1).
pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.alpha, p.beta)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[1].1 + w[0].1))
        .sum()
}

impl RocCurve {
    /// Detection rate at a given false-positive rate, by linear interpolation.
    pub fn beta_at_alpha(&self, alpha: f64) -> f64 {
        let mut pts: Vec<(f64, f64)> = self.points.iter().map(|p| (p.alpha, p.beta)).collect();
        pts.push((0.0, 0.0));
        pts.push((1.0, 1.0));
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for w in pts.windows(2) {
            if alpha >= w[0].0 && alpha <= w[1].0 {
                if w[1].0 == w[0].0 {
                    return w[1].1;
                }
                let t = (alpha - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        1.0
    }

    /// `ln_lambda,alpha,beta` rows followed by a `# s=…,auc=…` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ln_lambda,alpha,beta\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", fmt_g12(p.ln_lambda), fmt_g12(p.alpha), fmt_g12(p.beta));
        }
        let _ = writeln!(out, "# s={},auc={}", fmt_g12(self.separation), fmt_g12(self.auc));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| LvsError::Parse {
            path: "<roc csv>".into(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "ln_lambda,alpha,beta")) => {}
            _ => return Err(parse_err(1, "missing header ln_lambda,alpha,beta".into())),
        }
        let mut points = Vec::new();
        let mut meta = None;
        for (idx, line) in lines {
            let line_no = idx + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let mut s = None;
                let mut auc = None;
                for field in rest.trim().split(',') {
                    match field.split_once('=') {
                        Some(("s", v)) => s = v.parse::<f64>().ok(),
                        Some(("auc", v)) => auc = v.parse::<f64>().ok(),
                        _ => return Err(parse_err(line_no, format!("bad metadata field {field:?}"))),
                    }
                }
                meta = Some((
                    s.ok_or_else(|| parse_err(line_no, "missing s".into()))?,
                    auc.ok_or_else(|| parse_err(line_no, "missing auc".into()))?,
                ));
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(line_no, e.to_string()))?;
            if cols.len() != 3 {
                return Err(parse_err(line_no, format!("expected 3 columns, got {}", cols.len())));
            }
            points.push(RocPoint {
                ln_lambda: cols[0],
                alpha: cols[1],
                beta: cols[2],
            });
        }
        let (separation, auc) = meta.ok_or_else(|| parse_err(0, "missing metadata line".into()))?;
        Ok(Self {
            points,
            separation,
            auc,
        })
    }

    /// Checks the ordering and range invariants of a swept curve.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |m: String| Err(LvsError::InvalidScenario(m));
        for p in &self.points {
            if !(0.0..=1.0).contains(&p.alpha) || !(0.0..=1.0).contains(&p.beta) {
                return bad(format!("rate out of [0,1] at ln λ = {}", p.ln_lambda));
            }
        }
        for w in self.points.windows(2) {
            if w[1].ln_lambda <= w[0].ln_lambda {
                return bad("thresholds not increasing".into());
            }
            if w[1].alpha > w[0].alpha || w[1].beta > w[0].beta {
                return bad(format!(
                    "rates increase between ln λ = {} and {}",
                    w[0].ln_lambda, w[1].ln_lambda
                ));
            }
        }
        if !(0.5 - 1e-9..=1.0 + 1e-9).contains(&self.auc) {
            return bad(format!("auc {} outside [0.5, 1]", self.auc));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig1() -> (NetworkGeometry, ShadowingModel) {
        let g = NetworkGeometry::new(
            vec![
                Point::new(-250.0, 10.0),
                Point::new(0.0, -10.0),
                Point::new(250.0, 10.0),
            ],
            Point::new(50.0, 5.0),
            -10.0,
            1.0,
            3.0,
        )
        .unwrap();
        let m = ShadowingModel::new(&g, 7.5, 50.0).unwrap();
        (g, m)
    }

    /// Log density of `N(mu, cov)` via an explicit inverse and determinant.
    fn log_density(y: &DVector<f64>, mu: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
        let n = y.len() as f64;
        let inv = cov.clone().try_inverse().unwrap();
        let d = y - mu;
        -0.5 * d.dot(&(inv * &d)) - 0.5 * cov.determinant().ln() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    #[test]
    fn drss_transform_examples() {
        let y = DVector::from_vec(vec![3.0, -1.0]);
        assert_eq!(drss_transform(&y).unwrap(), DVector::from_vec(vec![4.0]));
        assert!(drss_transform(&DVector::from_vec(vec![1.0])).is_err());
    }

    #[test]
    fn d_matrix_for_white_noise() {
        let r = DMatrix::identity(4, 4) * 9.0;
        let d = build_d_matrix(&r).unwrap();
        for m in 0..3 {
            for k in 0..3 {
                let expected = if m == k { 18.0 } else { 9.0 };
                assert_eq!(d.matrix()[(m, k)], expected);
            }
        }
    }

    #[test]
    fn d_diagonal_is_twice_variance_minus_covariance_to_reference() {
        let (_, m) = fig1();
        let r = m.covariance().matrix();
        let d = build_d_matrix(r).unwrap();
        for i in 0..2 {
            assert!((d.matrix()[(i, i)] - 2.0 * (56.25 - r[(i, 2)])).abs() < 1e-12);
        }
    }

    #[test]
    fn statistic_of_zero_is_zero_and_decisions_at_means() {
        let (g, m) = fig1();
        let spec = DetectorSpec::rss_optimal_boost(&g, &m, Point::new(550.0, 5.0), 0.0).unwrap();
        assert_eq!(spec.test_statistic(&DVector::zeros(3)).unwrap(), 0.0);
        assert_eq!(spec.decide(spec.mu0()).unwrap(), Decision::AcceptH0);
        assert_eq!(spec.decide(spec.mu1()).unwrap(), Decision::AcceptH1);
        assert!(matches!(
            spec.test_statistic(&DVector::zeros(2)),
            Err(LvsError::DimensionMismatch { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn tie_decides_h1() {
        let (g, m) = fig1();
        let spec = DetectorSpec::rss_optimal_boost(&g, &m, Point::new(550.0, 5.0), 0.0).unwrap();
        let w = spec.weights().clone();
        // obs = c·w gives T = c·|w|², pick c so T == Γ exactly when representable.
        let c = spec.gamma() / w.norm_squared();
        let obs = &w * c;
        let t = spec.test_statistic(&obs).unwrap();
        let expected = if t >= spec.gamma() {
            Decision::AcceptH1
        } else {
            Decision::AcceptH0
        };
        assert_eq!(spec.decide(&obs).unwrap(), expected);
    }

    #[test]
    fn equal_means_are_degenerate() {
        let (g, m) = fig1();
        let u = g.claimed_means();
        let r = DetectorSpec::new(Mode::Rss, u.clone(), u, m.covariance().clone(), 0.0);
        assert!(matches!(r, Err(LvsError::DegenerateDetector(_))));
    }

    #[test]
    fn unit_threshold_is_symmetric_and_limits_hold() {
        let rp = rates_from_separation(2.3, 0.0);
        assert!((rp.beta - (1.0 - rp.alpha)).abs() < 1e-15);
        let hi = rates_from_separation(2.3, f64::INFINITY);
        assert_eq!((hi.alpha, hi.beta), (0.0, 0.0));
        let lo = rates_from_separation(2.3, f64::NEG_INFINITY);
        assert_eq!((lo.alpha, lo.beta), (1.0, 1.0));
    }

    #[test]
    fn q_function_reference_values() {
        assert_eq!(q_function(0.0), 0.5);
        // Q(1.96) and Q(6) from standard normal tables.
        assert!((q_function(1.96) / 0.024997895148220435 - 1.0).abs() < 1e-13);
        assert!((q_function(6.0) / 9.865876450376946e-10 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn roc_auc_is_at_least_half_and_matches_binormal_closed_form() {
        let (g, m) = fig1();
        let spec = DetectorSpec::rss_optimal_boost(&g, &m, Point::new(550.0, 5.0), 0.0).unwrap();
        let s = spec.separation();
        let roc = roc_sweep(&spec, &default_thresholds(s)).unwrap();
        roc.check_invariants().unwrap();
        // Equal-variance binormal ROC: AUC = Φ(√(s/2)).
        let exact = 1.0 - q_function((s / 2.0).sqrt());
        assert!((roc.auc - exact).abs() < 2e-3, "{} vs {exact}", roc.auc);
    }

    #[test]
    fn vanishing_separation_gives_chance_auc() {
        let (g, m) = fig1();
        let xc = g.claimed_location();
        let spec = DetectorSpec::rss_with_boost(&g, &m, Point::new(xc.x + 1e-4, xc.y), 0.0, 0.0).unwrap();
        let roc = roc_sweep(&spec, &default_thresholds(spec.separation())).unwrap();
        assert!((roc.auc - 0.5).abs() < 1e-3);
    }

    #[test]
    fn csv_round_trip_preserves_curve() {
        let (g, m) = fig1();
        let spec = DetectorSpec::drss(&g, &m, Point::new(550.0, 5.0), 0.0).unwrap();
        let roc = roc_sweep(&spec, &default_thresholds(spec.separation())).unwrap();
        let back = RocCurve::from_csv(&roc.to_csv()).unwrap();
        back.check_invariants().unwrap();
        assert_eq!(back.points.len(), roc.points.len());
        for (a, b) in back.points.iter().zip(&roc.points) {
            assert!((a.alpha - b.alpha).abs() <= 1e-11 * b.alpha.abs().max(1e-300));
        }
        assert!(RocCurve::from_csv("alpha,beta\n").is_err());
    }

    #[test]
    fn unsorted_thresholds_are_rejected() {
        let (g, m) = fig1();
        let spec = DetectorSpec::drss(&g, &m, Point::new(550.0, 5.0), 0.0).unwrap();
        assert!(roc_sweep(&spec, &[1.0, 0.0]).is_err());
        assert!(roc_sweep(&spec, &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn log_likelihood_ratio_matches_density_difference(
            y in proptest::collection::vec(-120.0f64..-20.0, 3),
            xt in (-600.0f64..600.0, -600.0f64..600.0),
        ) {
            let (g, m) = fig1();
            let xt = Point::new(xt.0, xt.1);
            prop_assume!(xt.distance(&g.claimed_location()) > 1.0);
            let spec = DetectorSpec::rss_optimal_boost(&g, &m, xt, 0.0).unwrap();
            let y = DVector::from_vec(y);
            let cov = m.covariance().matrix();
            let direct = log_density(&y, spec.mu1(), cov) - log_density(&y, spec.mu0(), cov);
            let llr = spec.log_likelihood_ratio(&y).unwrap();
            prop_assert!((llr - direct).abs() <= 1e-9 * direct.abs().max(1.0), "{} vs {}", llr, direct);
        }

        #[test]
        fn statistic_is_linear(
            a in -5.0f64..5.0, b in -5.0f64..5.0,
            y1 in proptest::collection::vec(-100.0f64..0.0, 2),
            y2 in proptest::collection::vec(-100.0f64..0.0, 2),
        ) {
            let (g, m) = fig1();
            let spec = DetectorSpec::drss(&g, &m, Point::new(-300.0, 400.0), 0.0).unwrap();
            let (y1, y2) = (DVector::from_vec(y1), DVector::from_vec(y2));
            let lhs = spec.test_statistic(&(&y1 * a + &y2 * b)).unwrap();
            let rhs = a * spec.test_statistic(&y1).unwrap() + b * spec.test_statistic(&y2).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
        }

        #[test]
        fn drss_is_invariant_to_common_offset(c in -50.0f64..50.0, y in proptest::collection::vec(-100.0f64..0.0, 2..6)) {
            let y = DVector::from_vec(y);
            let shifted = y.add_scalar(c);
            let a = drss_transform(&y).unwrap();
            let b = drss_transform(&shifted).unwrap();
            prop_assert!((a - b).amax() < 1e-10);
        }

        #[test]
        fn rates_are_monotone_and_shift_consistent(s in 1e-3f64..200.0, t in -50.0f64..50.0, dt in 1e-3f64..5.0) {
            let a = rates_from_separation(s, t);
            let b = rates_from_separation(s, t + dt);
            prop_assert!(b.alpha <= a.alpha && b.beta <= a.beta);
            prop_assert!(a.beta >= a.alpha);
            let shifted = rates_from_separation(s, t - s);
            prop_assert!((a.beta - shifted.alpha).abs() < 1e-12);
        }

        #[test]
        fn scaling_covariance_and_gap_preserves_rates(c in 0.1f64..10.0, t in -3.0f64..3.0) {
            let (g, m) = fig1();
            let spec = DetectorSpec::rss_optimal_boost(&g, &m, Point::new(550.0, 5.0), t).unwrap();
            let cov = SpdMatrix::new(m.covariance().matrix() * c).unwrap();
            let mu1 = spec.mu0() + (spec.mu1() - spec.mu0()) * c.sqrt();
            let scaled = DetectorSpec::new(Mode::Rss, spec.mu0().clone(), mu1, cov, t).unwrap();
            let (a, b) = (spec.analytic_rates(), scaled.analytic_rates());
            prop_assert!((a.alpha - b.alpha).abs() < 1e-12 && (a.beta - b.beta).abs() < 1e-12);
        }
    }
}
