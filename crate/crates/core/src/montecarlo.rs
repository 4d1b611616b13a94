//! Monte Carlo estimation of false-positive and detection rates.
//!
//! Trial `i` of a plan draws its noise from a ChaCha stream keyed by
//! `(seed, i)`, so results do not depend on how trials are scheduled.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adversary::AttackStrategy;
use crate::channel::{NetworkGeometry, Point, ShadowingModel};
use crate::detector::{DetectorSpec, Mode};
use crate::error::{LvsError, Result};

/// Two-sided 1e-4 bound on `|z|` for empirical-vs-analytic agreement.
pub const AGREEMENT_Z_LIMIT: f64 = 3.89;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub n_trials: usize,
    pub seed: u64,
    pub hypothesis: Hypothesis,
    /// Attacker behaviour; required under H1.
    pub strategy: Option<AttackStrategy>,
}

impl TrialPlan {
    pub fn h0(n_trials: usize, seed: u64) -> Self {
        Self {
            n_trials,
            seed,
            hypothesis: Hypothesis::H0,
            strategy: None,
        }
    }

    pub fn h1(n_trials: usize, seed: u64, strategy: AttackStrategy) -> Self {
        Self {
            n_trials,
            seed,
            hypothesis: Hypothesis::H1,
            strategy: Some(strategy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRate {
    pub rate: f64,
    /// `√(rate(1 − rate)/n)`.
    pub stderr: f64,
    pub n_trials: usize,
    pub accepts: usize,
}

impl EmpiricalRate {
    pub fn from_counts(accepts: usize, n_trials: usize) -> Self {
        let rate = accepts as f64 / n_trials as f64;
        Self {
            rate,
            stderr: binomial_stderr(rate, n_trials),
            n_trials,
            accepts,
        }
    }

    /// Deviation from `analytic` in units of the binomial standard error at
    /// the analytic rate.
    pub fn z_score(&self, analytic: f64) -> f64 {
        let se = binomial_stderr(analytic, self.n_trials);
        let diff = (self.rate - analytic).abs();
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / se
        }
    }
}

pub fn binomial_stderr(rate: f64, n: usize) -> f64 {
    (rate * (1.0 - rate) / n as f64).max(0.0).sqrt()
}

/// Independent random stream for trial `index` of a plan seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn observation_mean(plan: &TrialPlan, geometry: &NetworkGeometry) -> Result<DVector<f64>> {
    match plan.hypothesis {
        Hypothesis::H0 => Ok(geometry.claimed_means()),
        Hypothesis::H1 => {
            let strategy = plan
                .strategy
                .ok_or_else(|| LvsError::InconsistentPlan("H1 plan carries no attack strategy".into()))?;
            Ok(geometry
                .mean_vector(strategy.true_location)?
                .add_scalar(strategy.power_boost_db))
        }
    }
}

fn check_consistent(
    plan: &TrialPlan,
    spec: &DetectorSpec,
    geometry: &NetworkGeometry,
    model: &ShadowingModel,
) -> Result<()> {
    if plan.n_trials == 0 {
        return Err(LvsError::InconsistentPlan("n_trials must be at least 1".into()));
    }
    let n = geometry.num_stations();
    if model.num_stations() != n {
        return Err(LvsError::InconsistentPlan(format!(
            "shadowing model covers {} stations, geometry has {n}",
            model.num_stations()
        )));
    }
    let expected = match spec.mode() {
        Mode::Rss => n,
        Mode::Drss => n - 1,
    };
    if spec.dim() != expected {
        return Err(LvsError::InconsistentPlan(format!(
            "{} detector has dimension {}, expected {expected}",
            spec.mode(),
            spec.dim()
        )));
    }
    Ok(())
}

/// Test statistic of every trial, in trial order.
pub fn sample_statistics(
    plan: &TrialPlan,
    spec: &DetectorSpec,
    geometry: &NetworkGeometry,
    model: &ShadowingModel,
) -> Result<Vec<f64>> {
    check_consistent(plan, spec, geometry, model)?;
    let mean: Vec<f64> = observation_mean(plan, geometry)?.iter().copied().collect();
    let n = mean.len();
    if n > 16 {
        return Err(LvsError::InconsistentPlan(
            "Monte Carlo supports at most 16 base stations".into(),
        ));
    }
    let lower = model.covariance().lower();
    let lower: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| lower[(i, j)])
        .collect();
    let weights: Vec<f64> = spec.weights().iter().copied().collect();
    let mode = spec.mode();
    let seed = plan.seed;

    let statistic = move |index: usize| -> f64 {
        let mut rng = trial_rng(seed, index as u64);
        let mut z = [0.0f64; 16];
        let mut y = [0.0f64; 16];
        let z = &mut z[..n];
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let y = &mut y[..n];
        for i in 0..n {
            let row = &lower[i * n..i * n + i + 1];
            y[i] = mean[i] + row.iter().zip(z.iter()).map(|(l, zj)| l * zj).sum::<f64>();
        }
        match mode {
            Mode::Rss => weights.iter().zip(y.iter()).map(|(w, yi)| w * yi).sum(),
            Mode::Drss => {
                let last = y[n - 1];
                weights.iter().zip(y.iter()).map(|(w, yi)| w * (yi - last)).sum()
            }
        }
    };

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok((0..plan.n_trials).into_par_iter().map(statistic).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok((0..plan.n_trials).map(statistic).collect())
    }
}

/// Fraction of trials whose observation the detector assigns to H1.
pub fn estimate_rate(
    plan: &TrialPlan,
    spec: &DetectorSpec,
    geometry: &NetworkGeometry,
    model: &ShadowingModel,
) -> Result<EmpiricalRate> {
    Ok(estimate_rates(plan, spec, geometry, model, &[spec.log_threshold()])?[0])
}

/// Rates at several log thresholds from one shared set of trials.
pub fn estimate_rates(
    plan: &TrialPlan,
    spec: &DetectorSpec,
    geometry: &NetworkGeometry,
    model: &ShadowingModel,
    log_thresholds: &[f64],
) -> Result<Vec<EmpiricalRate>> {
    let stats = sample_statistics(plan, spec, geometry, model)?;
    Ok(log_thresholds
        .iter()
        .map(|&t| {
            let gamma = spec.gamma_at(t);
            let accepts = stats.iter().filter(|&&s| s >= gamma).count();
            EmpiricalRate::from_counts(accepts, plan.n_trials)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Sample mean of `ln f(y|H0) − ln f(y|p_x, x_t, H1)` over `y ~ f(·|H0)`.
///
/// The log densities are evaluated with an explicitly inverted covariance,
/// independently of the Cholesky route used by the closed forms.
pub fn estimate_kl(
    true_location: Point,
    power_boost_db: f64,
    geometry: &NetworkGeometry,
    model: &ShadowingModel,
    n_samples: usize,
    seed: u64,
) -> Result<KlEstimate> {
    if n_samples == 0 {
        return Err(LvsError::InconsistentPlan("n_samples must be at least 1".into()));
    }
    let u = geometry.claimed_means();
    let mu1 = geometry.mean_vector(true_location)?.add_scalar(power_boost_db);
    let precision: DMatrix<f64> = model
        .covariance()
        .matrix()
        .clone()
        .try_inverse()
        .ok_or_else(|| LvsError::SingularCovariance("covariance not invertible".into()))?;
    let lower = model.covariance().lower();
    let n = u.len();

    let log_ratio = |index: usize| -> f64 {
        let mut rng = trial_rng(seed, index as u64);
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let y = &u + &lower * z;
        let d0 = &y - &u;
        let d1 = &y - &mu1;
        0.5 * (d1.dot(&(&precision * &d1)) - d0.dot(&(&precision * &d0)))
    };

    #[cfg(feature = "parallel")]
    let samples: Vec<f64> = {
        use rayon::prelude::*;
        (0..n_samples).into_par_iter().map(log_ratio).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let samples: Vec<f64> = (0..n_samples).map(log_ratio).collect();

    let nf = n_samples as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = if n_samples > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    Ok(KlEstimate {
        mean,
        stderr: (var / nf).sqrt(),
        n_samples,
    })
}

/// One line of `mc.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRecord {
    pub scenario: String,
    pub mode: Mode,
    pub ln_lambda: f64,
    pub hypothesis: Hypothesis,
    pub n: usize,
    pub rate: f64,
    pub stderr: f64,
    pub analytic: f64,
}

impl McRecord {
    pub fn z_score(&self) -> f64 {
        EmpiricalRate {
            rate: self.rate,
            stderr: self.stderr,
            n_trials: self.n,
            accepts: 0,
        }
        .z_score(self.analytic)
    }

    pub fn agrees(&self) -> bool {
        self.z_score().abs() <= AGREEMENT_Z_LIMIT
    }
}

/// Runs H0 and H1 plans at every threshold and pairs each empirical rate
/// with its closed-form counterpart.
#[allow(clippy::too_many_arguments)]
pub fn validate_detector(
    scenario: &str,
    spec: &DetectorSpec,
    strategy: AttackStrategy,
    geometry: &NetworkGeometry,
    model: &ShadowingModel,
    log_thresholds: &[f64],
    n_trials: usize,
    seed: u64,
) -> Result<Vec<McRecord>> {
    let mut records = Vec::with_capacity(2 * log_thresholds.len());
    let plans = [
        TrialPlan::h0(n_trials, seed),
        TrialPlan::h1(n_trials, seed.wrapping_add(0x9E37_79B9_7F4A_7C15), strategy),
    ];
    for plan in plans {
        let empirical = estimate_rates(&plan, spec, geometry, model, log_thresholds)?;
        for (&t, e) in log_thresholds.iter().zip(empirical) {
            let rp = spec.with_threshold(t).analytic_rates();
            records.push(McRecord {
                scenario: scenario.to_string(),
                mode: spec.mode(),
                ln_lambda: t,
                hypothesis: plan.hypothesis,
                n: e.n_trials,
                rate: e.rate,
                stderr: e.stderr,
                analytic: match plan.hypothesis {
                    Hypothesis::H0 => rp.alpha,
                    Hypothesis::H1 => rp.beta,
                },
            });
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{optimize_true_location, Objective, SearchConfig};

    fn fig2() -> (NetworkGeometry, ShadowingModel) {
        let g = NetworkGeometry::new(
            vec![
                Point::new(201.4, -9.0),
                Point::new(-161.7, 9.3),
                Point::new(-97.4, 1.2),
                Point::new(91.5, 2.4),
            ],
            Point::new(50.0, 5.0),
            -10.0,
            1.0,
            3.0,
        )
        .unwrap();
        let m = ShadowingModel::new(&g, 5.0, 50.0).unwrap();
        (g, m)
    }

    #[test]
    fn infinite_threshold_never_accepts_h1() {
        let (g, m) = fig2();
        let xt = Point::new(150.0, 5.0);
        let spec = DetectorSpec::drss(&g, &m, xt, f64::INFINITY).unwrap();
        let strategy = AttackStrategy::at_location(xt, &g, &m).unwrap();
        for plan in [TrialPlan::h0(2000, 1), TrialPlan::h1(2000, 2, strategy)] {
            assert_eq!(estimate_rate(&plan, &spec, &g, &m).unwrap().rate, 0.0);
        }
    }

    #[test]
    fn h1_without_strategy_is_inconsistent() {
        let (g, m) = fig2();
        let spec = DetectorSpec::drss(&g, &m, Point::new(150.0, 5.0), 0.0).unwrap();
        let plan = TrialPlan {
            n_trials: 10,
            seed: 0,
            hypothesis: Hypothesis::H1,
            strategy: None,
        };
        assert!(matches!(
            estimate_rate(&plan, &spec, &g, &m),
            Err(LvsError::InconsistentPlan(_))
        ));
    }

    #[test]
    fn mismatched_mode_dimension_is_inconsistent() {
        let (g, m) = fig2();
        let spec = DetectorSpec::drss(&g, &m, Point::new(150.0, 5.0), 0.0).unwrap();
        let other = NetworkGeometry::new(
            vec![Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(20.0, 0.0)],
            Point::new(5.0, 5.0),
            -10.0,
            1.0,
            3.0,
        )
        .unwrap();
        let other_model = ShadowingModel::new(&other, 5.0, 50.0).unwrap();
        assert!(estimate_rate(&TrialPlan::h0(10, 0), &spec, &other, &other_model).is_err());
    }

    #[test]
    fn h0_rate_matches_alpha_at_unit_threshold() {
        let (g, m) = fig2();
        let config = SearchConfig::default_for(&g, 100.0).unwrap();
        let attack = optimize_true_location(Objective::Drss, &config, &g, &m).unwrap();
        let spec = DetectorSpec::drss(&g, &m, attack.true_location, 0.0).unwrap();
        let rp = spec.analytic_rates();
        let h0 = estimate_rate(&TrialPlan::h0(100_000, 42), &spec, &g, &m).unwrap();
        assert!(h0.z_score(rp.alpha) < 3.0, "rate {} alpha {}", h0.rate, rp.alpha);
        let h1 = estimate_rate(&TrialPlan::h1(100_000, 43, attack), &spec, &g, &m).unwrap();
        assert!(h1.z_score(rp.beta) < 3.0, "rate {} beta {}", h1.rate, rp.beta);
    }

    #[test]
    fn results_are_reproducible() {
        let (g, m) = fig2();
        let spec = DetectorSpec::rss_optimal_boost(&g, &m, Point::new(150.0, 5.0), 0.0).unwrap();
        let a = sample_statistics(&TrialPlan::h0(5000, 9), &spec, &g, &m).unwrap();
        let b = sample_statistics(&TrialPlan::h0(5000, 9), &spec, &g, &m).unwrap();
        assert_eq!(a, b);
        let c = sample_statistics(&TrialPlan::h0(5000, 10), &spec, &g, &m).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn kl_estimate_at_claimed_location_is_zero() {
        let (g, m) = fig2();
        let est = estimate_kl(g.claimed_location(), 0.0, &g, &m, 1000, 5).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn kl_stderr_halves_when_samples_quadruple() {
        let (g, m) = fig2();
        let xt = Point::new(150.0, 5.0);
        let a = estimate_kl(xt, 1.0, &g, &m, 50_000, 5).unwrap();
        let b = estimate_kl(xt, 1.0, &g, &m, 200_000, 5).unwrap();
        let ratio = a.stderr / b.stderr;
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn stderr_follows_binomial_formula() {
        let e = EmpiricalRate::from_counts(250, 1000);
        assert!((e.stderr - (0.25f64 * 0.75 / 1000.0).sqrt()).abs() < 1e-15);
    }
}
