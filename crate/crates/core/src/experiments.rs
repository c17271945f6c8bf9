//! Monte Carlo harness: coverage, convergence across horizons, and the growth
//! condition on `U_N`.
//!
//! Every trial draws from its own ChaCha stream keyed by
//! `sha256(master_seed, horizon, trial)`, and results are merged in
//! `(horizon, trial)` order, so aggregates do not depend on the thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimation::{
    coin_interval, confidence_interval, corrected_interval, correction_k, finite_horizon_k,
    EpsilonRule, IntervalEstimate, Method,
};
use crate::families::{family, growth_exponent_fit, Growth, GrowthFit, RenewalFamily};
use crate::observation::{sample_coin_run, sample_l2_run, CoinModel, L2Model, Shape};
use crate::renewal::{RecurrenceKind, RenewalSampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl FamilySpec {
    pub fn resolve(&self) -> Result<RenewalFamily> {
        family(&self.name, &self.params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Coin {
        theta: f64,
    },
    L2 {
        mean: f64,
        delta: f64,
        sigma_w: f64,
        #[serde(default)]
        bounds: Option<(f64, f64)>,
        shape: Shape,
    },
}

/// A validated observation model.
#[derive(Debug, Clone, Copy)]
pub enum Model {
    Coin(CoinModel),
    L2(L2Model),
}

impl ModelSpec {
    pub fn resolve(&self) -> Result<Model> {
        Ok(match *self {
            ModelSpec::Coin { theta } => Model::Coin(CoinModel::new(theta)?),
            ModelSpec::L2 {
                mean,
                delta,
                sigma_w,
                bounds,
                shape,
            } => Model::L2(L2Model::new(mean, delta, sigma_w, bounds, shape)?),
        })
    }
}

impl Model {
    /// The unknown parameter; only the simulator and coverage scoring see it.
    pub fn truth(&self) -> f64 {
        match self {
            Model::Coin(m) => m.theta(),
            Model::L2(m) => m.delta(),
        }
    }

    /// `1/2` for the coin, `M` for the L2 model.
    pub fn baseline(&self) -> f64 {
        match self {
            Model::Coin(_) => 0.5,
            Model::L2(m) => m.known().mean,
        }
    }

    pub fn rule(&self, method: Method, gamma: f64) -> Result<EpsilonRule> {
        match self {
            Model::Coin(_) => EpsilonRule::coin(method, gamma),
            Model::L2(m) => EpsilonRule::l2(method, gamma, &m.known()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub method: Method,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    pub model: ModelSpec,
    pub rule: RuleSpec,
    pub horizons: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub apply_k: bool,
}

struct Prepared {
    family: RenewalFamily,
    model: Model,
    rule: EpsilonRule,
}

impl ExperimentConfig {
    fn prepare(&self) -> Result<Prepared> {
        if self.horizons.is_empty() {
            return Err(Error::InvalidConfig("no horizons".into()));
        }
        if self.horizons[0] == 0 {
            return Err(Error::InvalidConfig("horizons must be positive".into()));
        }
        if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "horizons must be strictly increasing".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        let family = self.family.resolve()?;
        let model = self.model.resolve()?;
        let rule = model.rule(self.rule.method, self.rule.gamma)?;
        Ok(Prepared {
            family,
            model,
            rule,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }
}

/// The sub-stream for one `(horizon, trial)` work unit.
pub fn trial_rng(master_seed: u64, horizon: usize, trial: usize) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update((horizon as u64).to_le_bytes());
    hasher.update((trial as u64).to_le_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub horizon: usize,
    pub trial: usize,
    pub sample_mean: f64,
    pub outcome: std::result::Result<IntervalEstimate, String>,
}

impl TrialRecord {
    pub fn covered(&self, truth: f64) -> Option<bool> {
        self.outcome.as_ref().ok().map(|e| e.contains(truth))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub horizon: usize,
    #[serde(rename = "U_N")]
    pub expected_renewals: f64,
    pub epsilon: f64,
    /// `eps N / U_N` at this horizon.
    pub k_finite: Option<f64>,
    pub trials: usize,
    pub failures: usize,
    pub coverage: Option<f64>,
    pub coverage_se: Option<f64>,
    pub mean_width: Option<f64>,
    pub mean_abs_error: Option<f64>,
    pub p90_abs_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Satisfied,
    ViolatedNullRecurrent,
    ViolatedTransient,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Satisfied => "satisfied",
            Verdict::ViolatedNullRecurrent => "violated-null-recurrent",
            Verdict::ViolatedTransient => "violated-transient",
        })
    }
}

/// Verdict on the growth condition from the family's closed-form record.
pub fn analytic_verdict(family: &RenewalFamily) -> Verdict {
    match (family.recurrence_kind(), family.growth()) {
        (RecurrenceKind::Transient, _) | (_, Growth::Bounded { .. }) => Verdict::ViolatedTransient,
        (_, Growth::Power { exponent, .. }) if exponent >= 0.5 - 1e-12 => Verdict::Satisfied,
        _ => Verdict::ViolatedNullRecurrent,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub truth: f64,
    pub verdict: Verdict,
    /// Limit of `eps N / U_N`; `None` when it diverges.
    pub k: Option<f64>,
    pub horizons: Vec<HorizonSummary>,
    pub trials: Vec<TrialRecord>,
}

impl ExperimentResult {
    pub fn summary(&self, horizon: usize) -> Option<&HorizonSummary> {
        self.horizons.iter().find(|h| h.horizon == horizon)
    }

    pub fn failures(&self) -> usize {
        self.horizons.iter().map(|h| h.failures).sum()
    }

    /// Per-trial rows: `horizon,trial,lower,upper,point,covered,width`.
    /// Failed trials leave the numeric fields empty.
    pub fn write_trials_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"horizon,trial,lower,upper,point,covered,width\n")?;
        for rec in &self.trials {
            match &rec.outcome {
                Ok(e) => writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    rec.horizon,
                    rec.trial,
                    e.lower,
                    e.upper,
                    e.point,
                    e.contains(self.truth) as u8,
                    e.width()
                )?,
                Err(_) => writeln!(w, "{},{},,,,,", rec.horizon, rec.trial)?,
            }
        }
        Ok(())
    }

    /// Aggregate document: resolved config, seed, per-horizon rows and verdict.
    pub fn aggregate_json(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "master_seed": self.config.master_seed,
            "truth": self.truth,
            "verdict": self.verdict,
            "k": self.k,
            "failures": self.failures(),
            "horizons": self.horizons,
        })
    }
}

fn run_trial(
    prep: &Prepared,
    sampler: &RenewalSampler,
    expected_renewals: f64,
    k: &std::result::Result<f64, String>,
    apply_k: bool,
    master_seed: u64,
    trial: usize,
) -> TrialRecord {
    let horizon = sampler.horizon();
    let mut rng = trial_rng(master_seed, horizon, trial);
    let delta = sampler.sample(&mut rng);
    let (sample_mean, estimate) = match &prep.model {
        Model::Coin(m) => {
            let run = sample_coin_run(&delta, m, &mut rng);
            (
                run.sample_mean,
                coin_interval(run.sample_mean, horizon, expected_renewals, &prep.rule),
            )
        }
        Model::L2(m) => {
            let run = sample_l2_run(&delta, m, &mut rng);
            let baseline = m.known().mean;
            (
                run.sample_mean,
                confidence_interval(
                    run.sample_mean,
                    horizon,
                    expected_renewals,
                    baseline,
                    &prep.rule,
                ),
            )
        }
    };
    let outcome = estimate.map_err(|e| e.to_string()).and_then(|est| {
        if apply_k {
            let k = k.clone()?;
            corrected_interval(&est, k).map_err(|e| e.to_string())
        } else {
            Ok(est)
        }
    });
    TrialRecord {
        horizon,
        trial,
        sample_mean,
        outcome,
    }
}

fn summarize(
    horizon: usize,
    expected_renewals: f64,
    rule: &EpsilonRule,
    truth: f64,
    records: &[TrialRecord],
) -> Result<HorizonSummary> {
    let ok: Vec<&IntervalEstimate> = records
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .collect();
    let count = ok.len();
    let mean_of = |f: &dyn Fn(&IntervalEstimate) -> f64| {
        (count > 0).then(|| ok.iter().map(|e| f(e)).sum::<f64>() / count as f64)
    };
    let coverage = mean_of(&|e| e.contains(truth) as u8 as f64);
    let coverage_se = coverage.map(|c| (c * (1.0 - c) / count as f64).sqrt());
    let mut abs_errors: Vec<f64> = ok.iter().map(|e| (e.point - truth).abs()).collect();
    abs_errors.sort_by(f64::total_cmp);
    let p90 = (count > 0).then(|| {
        let rank = ((0.9 * count as f64).ceil() as usize).clamp(1, count);
        abs_errors[rank - 1]
    });
    Ok(HorizonSummary {
        horizon,
        expected_renewals,
        epsilon: rule.epsilon(horizon)?,
        k_finite: finite_horizon_k(rule, horizon, expected_renewals).ok(),
        trials: records.len(),
        failures: records.len() - count,
        coverage,
        coverage_se,
        mean_width: mean_of(&|e| e.width()),
        mean_abs_error: mean_of(&|e| (e.point - truth).abs()),
        p90_abs_error: p90,
    })
}

fn run(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let prep = cfg.prepare()?;
    let n_max = *cfg.horizons.last().expect("validated");
    let u = prep.family.renewal_probabilities(n_max)?;
    let k = correction_k(&prep.family, &prep.rule).map_err(|e| e.to_string());
    let k_usable = k.clone().and_then(|k| {
        if k.is_finite() {
            Ok(k)
        } else {
            Err(Error::Divergent("correction constant is infinite".into()).to_string())
        }
    });
    let truth = prep.model.truth();

    let mut summaries = Vec::with_capacity(cfg.horizons.len());
    let mut trials = Vec::with_capacity(cfg.horizons.len() * cfg.trials);
    for &horizon in &cfg.horizons {
        let expected = u.expected_renewals(horizon);
        let sampler = RenewalSampler::new(prep.family.first_renewal(), horizon)?;
        let records: Vec<TrialRecord> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                run_trial(
                    &prep,
                    &sampler,
                    expected,
                    &k_usable,
                    cfg.apply_k,
                    cfg.master_seed,
                    t,
                )
            })
            .collect();
        summaries.push(summarize(horizon, expected, &prep.rule, truth, &records)?);
        trials.extend(records);
    }
    Ok(ExperimentResult {
        config: cfg.clone(),
        truth,
        verdict: analytic_verdict(&prep.family),
        k: k.ok().filter(|k| k.is_finite()),
        horizons: summaries,
        trials,
    })
}

/// Interval trajectories across increasing horizons.
pub fn run_convergence_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run(cfg)
}

/// Empirical coverage per horizon, with binomial standard errors.
pub fn run_coverage_study(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run(cfg)
}

/// Run `f` on a dedicated pool of `threads` workers (`None`: rayon's default).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub family: String,
    pub parameters: BTreeMap<String, f64>,
    pub class: RecurrenceKind,
    pub mu: Option<f64>,
    pub window: (usize, usize),
    pub fit: GrowthFit,
    pub beta_hat: f64,
    pub growth_condition_satisfied: bool,
    pub verdict: Verdict,
    /// Limit of `eps N / U_N`; `None` when it diverges.
    pub k: Option<f64>,
    pub k_trajectory: Vec<(usize, f64)>,
}

/// Band for the fitted exponent under which the growth condition holds.
pub const BETA_BAND: (f64, f64) = (0.45, 1.05);

/// Combine recurrence class, fitted growth exponent and the `k` trajectory into a
/// verdict on whether the interval converges.
///
/// The fit runs over `[n_max / 100, n_max]`.
pub fn run_condition_classifier(
    family: &RenewalFamily,
    horizons: &[usize],
    rule: &EpsilonRule,
) -> Result<ConditionReport> {
    let n_max = *horizons
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidConfig("no horizons".into()))?;
    let lo = (n_max / 100).max(1);
    let u = family.renewal_probabilities(n_max)?;
    let fit = growth_exponent_fit(u.cumulative(), lo..=n_max)?;
    let class = family.recurrence_kind();
    let satisfied = class.is_recurrent() && (BETA_BAND.0..=BETA_BAND.1).contains(&fit.beta_hat);
    let verdict = match (class, satisfied) {
        (RecurrenceKind::Transient, _) => Verdict::ViolatedTransient,
        (_, true) => Verdict::Satisfied,
        (_, false) => Verdict::ViolatedNullRecurrent,
    };
    let mut sorted = horizons.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let k_trajectory = sorted
        .iter()
        .filter_map(|&n| {
            finite_horizon_k(rule, n, u.expected_renewals(n))
                .ok()
                .map(|k| (n, k))
        })
        .collect();
    let mu = family.mean_recurrence_time();
    Ok(ConditionReport {
        family: family.name().to_string(),
        parameters: family.parameters().clone(),
        class,
        mu: mu.is_finite().then_some(mu),
        window: (lo, n_max),
        fit,
        beta_hat: fit.beta_hat,
        growth_condition_satisfied: satisfied,
        verdict,
        k: correction_k(family, rule).ok().filter(|k| k.is_finite()),
        k_trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn coin_cfg(name: &str, theta: f64, horizons: Vec<usize>, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            family: FamilySpec {
                name: name.into(),
                params: BTreeMap::new(),
            },
            model: ModelSpec::Coin { theta },
            rule: RuleSpec {
                method: Method::Hoeffding,
                gamma: 0.95,
            },
            horizons,
            trials,
            master_seed: 17,
            apply_k: false,
        }
    }

    #[test]
    fn config_validation() {
        assert!(coin_cfg("bernoulli", 0.3, vec![100, 1000], 5)
            .validate()
            .is_ok());
        assert!(coin_cfg("bernoulli", 0.3, vec![], 5).validate().is_err());
        assert!(coin_cfg("bernoulli", 0.3, vec![1000, 100], 5)
            .validate()
            .is_err());
        assert!(coin_cfg("bernoulli", 0.3, vec![100, 100], 5)
            .validate()
            .is_err());
        assert!(coin_cfg("bernoulli", 0.3, vec![100], 0).validate().is_err());
        assert!(coin_cfg("bernoulli", 0.7, vec![100], 5).validate().is_err());
        assert!(coin_cfg("nope", 0.3, vec![100], 5).validate().is_err());
        let mut cfg = coin_cfg("bernoulli", 0.3, vec![100], 5);
        cfg.model = ModelSpec::L2 {
            mean: 0.0,
            delta: 1.0,
            sigma_w: 1.0,
            bounds: None,
            shape: Shape::Gaussian,
        };
        assert!(matches!(cfg.validate(), Err(Error::UnsupportedRule(_))));
    }

    #[test]
    fn strict_config_parsing() {
        let good = r#"{"family":{"name":"bernoulli","params":{"p":0.5}},
            "model":{"kind":"coin","theta":0.3},
            "rule":{"method":"hoeffding","gamma":0.95},
            "horizons":[100],"trials":3,"master_seed":1}"#;
        let cfg: ExperimentConfig = serde_json::from_str(good).unwrap();
        assert!(!cfg.apply_k);
        let extra = good.replace("\"trials\":3", "\"trials\":3,\"bogus\":1");
        assert!(serde_json::from_str::<ExperimentConfig>(&extra).is_err());
        let extra_model = good.replace("\"theta\":0.3", "\"theta\":0.3,\"delta\":1");
        assert!(serde_json::from_str::<ExperimentConfig>(&extra_model).is_err());
    }

    #[test]
    fn sub_streams_are_distinct_and_stable() {
        let a: u64 = trial_rng(1, 100, 0).random();
        let b: u64 = trial_rng(1, 100, 1).random();
        let c: u64 = trial_rng(1, 101, 0).random();
        let d: u64 = trial_rng(2, 100, 0).random();
        assert!(a != b && a != c && a != d);
        assert_eq!(a, trial_rng(1, 100, 0).random::<u64>());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = coin_cfg("srw_z", 0.3, vec![500, 2000], 64);
        let one = with_threads(Some(1), || run_convergence_sweep(&cfg))
            .unwrap()
            .unwrap();
        let many = with_threads(Some(6), || run_convergence_sweep(&cfg))
            .unwrap()
            .unwrap();
        assert_eq!(one, many);
        assert_eq!(
            serde_json::to_string(&one.aggregate_json()).unwrap(),
            serde_json::to_string(&many.aggregate_json()).unwrap()
        );
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        // U_1 = 0 for the walk on Z: the first horizon is non-identifiable
        let cfg = coin_cfg("srw_z", 0.3, vec![1, 100], 10);
        let res = run_convergence_sweep(&cfg).unwrap();
        let first = res.summary(1).unwrap();
        assert_eq!(first.failures, 10);
        assert_eq!(first.coverage, None);
        assert_eq!(res.summary(100).unwrap().failures, 0);

        let mut cfg = coin_cfg("defective_geometric", 0.3, vec![100], 5);
        cfg.apply_k = true;
        let res = run_convergence_sweep(&cfg).unwrap();
        assert_eq!(res.failures(), 5);
        assert!(res.trials[0]
            .outcome
            .as_ref()
            .unwrap_err()
            .contains("transient"));
    }

    #[test]
    fn apply_k_shifts_by_the_limit() {
        let mut cfg = coin_cfg("srw_z", 0.3, vec![1000], 4);
        let raw = run_convergence_sweep(&cfg).unwrap();
        cfg.apply_k = true;
        let shifted = run_convergence_sweep(&cfg).unwrap();
        let k = shifted.k.unwrap();
        for (a, b) in raw.trials.iter().zip(&shifted.trials) {
            let (a, b) = (a.outcome.as_ref().unwrap(), b.outcome.as_ref().unwrap());
            assert!((a.lower - k - b.lower).abs() < 1e-12);
            assert!(b.corrected);
        }
    }

    #[test]
    fn csv_artifact_layout() {
        let res = run_convergence_sweep(&coin_cfg("srw_z", 0.3, vec![1, 10], 2)).unwrap();
        let mut buf = Vec::new();
        res.write_trials_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "horizon,trial,lower,upper,point,covered,width");
        assert_eq!(lines[1], "1,0,,,,,");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[3].split(',').count(), 7);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn classifier_verdicts() {
        let rule = EpsilonRule::coin(Method::Hoeffding, 0.95).unwrap();
        let check = |name: &str, expected: Verdict| {
            let fam = family(name, &BTreeMap::new()).unwrap();
            let rep = run_condition_classifier(&fam, &[1_000, 10_000, 100_000], &rule).unwrap();
            assert_eq!(rep.verdict, expected, "{name}: {rep:?}");
            rep
        };
        let bern = check("bernoulli", Verdict::Satisfied);
        assert!((bern.beta_hat - 1.0).abs() < 0.01);
        assert_eq!(bern.k, Some(0.0));
        let z = check("srw_z", Verdict::Satisfied);
        assert!((z.beta_hat - 0.5).abs() < 0.05);
        assert!(z.k.unwrap() > 0.0);
        let z2 = check("srw_z2", Verdict::ViolatedNullRecurrent);
        assert!(z2.beta_hat < 0.15);
        assert_eq!(z2.k, None);
        check("defective_geometric", Verdict::ViolatedTransient);
        check("srw_zd", Verdict::ViolatedTransient);
    }
}
