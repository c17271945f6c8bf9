//! Confidence intervals for the hidden bias `theta` (or the mean shift `delta`).
//!
//! With `E(mean) = theta U_N / N + baseline`, the deviation event
//! `|mean - E(mean)| < eps` rearranges to
//! `theta in [N/U_N (mean - baseline - eps), N/U_N (mean - baseline + eps)]`.
//! `eps` comes from one of three rules, each `O(N^-1/2)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{Growth, RenewalFamily};
use crate::observation::L2Known;
use crate::renewal::{RecurrenceKind, RenewalProbabilities};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Chebyshev,
    Hoeffding,
    Normal,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Chebyshev, Method::Hoeffding, Method::Normal];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Chebyshev => "chebyshev",
            Method::Hoeffding => "hoeffding",
            Method::Normal => "normal",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chebyshev" => Ok(Method::Chebyshev),
            "hoeffding" => Ok(Method::Hoeffding),
            "normal" => Ok(Method::Normal),
            other => Err(Error::UnsupportedRule(format!("unknown method `{other}`"))),
        }
    }
}

/// Half-width policy `eps(gamma, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRule {
    method: Method,
    gamma: f64,
    /// Standard deviation bound for chebyshev and normal (1/2 for the coin).
    sigma: f64,
    /// `b - a` for hoeffding (1 for the coin).
    range_width: Option<f64>,
}

impl EpsilonRule {
    pub fn new(method: Method, gamma: f64, sigma: f64, range_width: Option<f64>) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} must lie in (0, 1)"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma = {sigma} must be positive"
            )));
        }
        match range_width {
            Some(w) if !(w > 0.0 && w.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "range width {w} must be positive"
                )))
            }
            None if method == Method::Hoeffding => {
                return Err(Error::UnsupportedRule(
                    "hoeffding needs bounded observations".into(),
                ))
            }
            _ => {}
        }
        Ok(Self {
            method,
            gamma,
            sigma,
            range_width,
        })
    }

    /// Coin observations: variance bound `1/4`, range `[0, 1]`.
    pub fn coin(method: Method, gamma: f64) -> Result<Self> {
        Self::new(method, gamma, 0.5, Some(1.0))
    }

    /// L2 observations with known `sigma_w` and optional bounds.
    pub fn l2(method: Method, gamma: f64, known: &L2Known) -> Result<Self> {
        Self::new(method, gamma, known.sigma_w, known.range_width())
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `eps(gamma, N) * sqrt(N)`, which does not depend on `N`.
    pub fn scaled(&self) -> f64 {
        match self.method {
            // 1 - sigma^2 / (N eps^2) = gamma
            Method::Chebyshev => self.sigma / (1.0 - self.gamma).sqrt(),
            // 1 - 2 exp(-2 N eps^2 / width^2) = gamma
            Method::Hoeffding => {
                let width = self.range_width.expect("checked at construction");
                width * ((2.0 / (1.0 - self.gamma)).ln() / 2.0).sqrt()
            }
            Method::Normal => normal_quantile((1.0 + self.gamma) / 2.0) * self.sigma,
        }
    }

    pub fn epsilon(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        Ok(self.scaled() / (n as f64).sqrt())
    }
}

pub fn epsilon(rule: &EpsilonRule, n: usize) -> Result<f64> {
    rule.epsilon(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub gamma: f64,
    pub method: Method,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "U_N")]
    pub expected_renewals: f64,
    pub lower: f64,
    pub upper: f64,
    pub point: f64,
    pub epsilon: f64,
    pub k: f64,
    pub corrected: bool,
    /// An endpoint lies outside the feasible parameter range (advisory only).
    pub outside_feasible: bool,
}

impl IntervalEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    /// Set the advisory flag for endpoints outside `[lo, hi]`. Nothing is clamped.
    pub fn flag_feasible(mut self, lo: f64, hi: f64) -> Self {
        self.outside_feasible = self.lower < lo || self.upper > hi;
        self
    }

    /// Uncorrected endpoints. Once corrected, these must be re-derived.
    pub fn raw_bounds(&self) -> Result<(f64, f64)> {
        if self.corrected {
            return Err(Error::AlreadyCorrected);
        }
        Ok((self.lower, self.upper))
    }
}

/// `[N/U_N (mean - baseline - eps), N/U_N (mean - baseline + eps)]`.
///
/// `baseline` is 1/2 for the coin and `M` for the L2 model.
pub fn confidence_interval(
    sample_mean: f64,
    n: usize,
    expected_renewals: f64,
    baseline: f64,
    rule: &EpsilonRule,
) -> Result<IntervalEstimate> {
    if !sample_mean.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sample mean {sample_mean} is not finite"
        )));
    }
    if !(expected_renewals > 0.0) {
        return Err(Error::NonIdentifiable);
    }
    let eps = rule.epsilon(n)?;
    let scale = n as f64 / expected_renewals;
    let centred = sample_mean - baseline;
    Ok(IntervalEstimate {
        gamma: rule.gamma,
        method: rule.method,
        n,
        expected_renewals,
        lower: scale * (centred - eps),
        upper: scale * (centred + eps),
        point: scale * centred,
        epsilon: eps,
        k: 0.0,
        corrected: false,
        outside_feasible: false,
    })
}

/// Coin interval for `theta`, flagged when it leaves `[-1/2, 1/2]`.
pub fn coin_interval(
    sample_mean: f64,
    n: usize,
    expected_renewals: f64,
    rule: &EpsilonRule,
) -> Result<IntervalEstimate> {
    Ok(confidence_interval(sample_mean, n, expected_renewals, 0.5, rule)?.flag_feasible(-0.5, 0.5))
}

/// `eps(gamma, N) N / U_N`, the finite-horizon value whose limit is `k`.
pub fn finite_horizon_k(rule: &EpsilonRule, n: usize, expected_renewals: f64) -> Result<f64> {
    if !(expected_renewals > 0.0) {
        return Err(Error::NonIdentifiable);
    }
    Ok(rule.epsilon(n)? * n as f64 / expected_renewals)
}

/// `(N, eps N / U_N)` at each requested horizon.
pub fn k_trajectory(
    rule: &EpsilonRule,
    u: &RenewalProbabilities,
    horizons: &[usize],
) -> Result<Vec<(usize, f64)>> {
    horizons
        .iter()
        .map(|&n| {
            if n == 0 || n > u.horizon() {
                return Err(Error::InvalidParameter(format!(
                    "horizon {n} outside 1..={}",
                    u.horizon()
                )));
            }
            Ok((n, finite_horizon_k(rule, n, u.expected_renewals(n))?))
        })
        .collect()
}

const SQRT_EXPONENT_TOL: f64 = 1e-12;

/// `k = lim eps(gamma, N) N / U_N`, from the family's growth record.
///
/// Zero when `U_N` grows faster than `sqrt(N)`, `eps sqrt(N) / c` when
/// `U_N ~ c sqrt(N)`, and `+inf` for slower recurrent growth. Transient
/// families have bounded `U_N`, and the interval diverges.
pub fn correction_k(family: &RenewalFamily, rule: &EpsilonRule) -> Result<f64> {
    if family.recurrence_kind() == RecurrenceKind::Transient {
        return Err(Error::Divergent(format!(
            "`{}` is transient: U_N stays bounded and the interval widens like sqrt(N)",
            family.name()
        )));
    }
    Ok(match family.growth() {
        Growth::Power { exponent, constant } => {
            if (exponent - 0.5).abs() <= SQRT_EXPONENT_TOL {
                rule.scaled() / constant
            } else if exponent > 0.5 {
                0.0
            } else {
                f64::INFINITY
            }
        }
        Growth::Logarithmic { .. } => f64::INFINITY,
        Growth::Bounded { .. } => {
            return Err(Error::Divergent(format!(
                "`{}` has bounded U_N",
                family.name()
            )))
        }
    })
}

/// Shift both endpoints and the point by `-k`.
pub fn corrected_interval(est: &IntervalEstimate, k: f64) -> Result<IntervalEstimate> {
    if est.corrected {
        return Err(Error::AlreadyCorrected);
    }
    if !k.is_finite() {
        return Err(Error::Divergent(format!(
            "correction constant k = {k} is not finite"
        )));
    }
    Ok(IntervalEstimate {
        lower: est.lower - k,
        upper: est.upper - k,
        point: est.point - k,
        k,
        corrected: true,
        ..*est
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarrisKeane {
    /// `sum_{n <= N} u_n^2`.
    pub partial_sum_sq: f64,
    /// Running partial sums, one per `n`.
    pub trajectory: Vec<f64>,
}

/// Partial sums of `u_n^2`, whose divergence is the known-bias criterion.
pub fn harris_keane_diagnostic(u: &RenewalProbabilities) -> HarrisKeane {
    let trajectory: Vec<f64> = u
        .values()
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x * x;
            Some(*acc)
        })
        .collect();
    HarrisKeane {
        partial_sum_sq: *trajectory.last().unwrap_or(&0.0),
        trajectory,
    }
}

/// Standard normal quantile, by Acklam's rational approximation
/// (relative error below 1.2e-9 on (0, 1)).
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p.is_nan() || p <= 0.0 || p >= 1.0 {
        return match p {
            0.0 => f64::NEG_INFINITY,
            1.0 => f64::INFINITY,
            _ => f64::NAN,
        };
    }
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::family;
    use crate::observation::Shape;
    use approx::assert_abs_diff_eq;
    use statrs::distribution::{ContinuousCDF, Normal};
    use std::collections::BTreeMap;

    fn named(name: &str) -> RenewalFamily {
        family(name, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn epsilon_reference_values() {
        let n = 10_000;
        let c = EpsilonRule::coin(Method::Chebyshev, 0.95)
            .unwrap()
            .epsilon(n)
            .unwrap();
        assert_abs_diff_eq!(c, 1.0 / 2000f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c, 0.0223607, epsilon = 1e-6);
        let h = EpsilonRule::coin(Method::Hoeffding, 0.95)
            .unwrap()
            .epsilon(n)
            .unwrap();
        assert_abs_diff_eq!(h, (40f64.ln() / 20000.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(h, 0.0135810, epsilon = 1e-6);
        let a = EpsilonRule::coin(Method::Normal, 0.95)
            .unwrap()
            .epsilon(n)
            .unwrap();
        assert_abs_diff_eq!(a, 1.959964 / 200.0, epsilon = 1e-8);
        assert_abs_diff_eq!(a, 0.0097998, epsilon = 1e-6);
    }

    #[test]
    fn l2_rules_scale_with_sigma_and_width() {
        let known = L2Known {
            mean: 0.0,
            sigma_w: 2.0,
            bounds: Some((0.0, 3.0)),
            shape: Shape::UniformBounded,
        };
        let n = 400;
        let cheb = EpsilonRule::l2(Method::Chebyshev, 0.9, &known)
            .unwrap()
            .epsilon(n)
            .unwrap();
        assert_abs_diff_eq!(cheb, (4.0 / (400.0 * 0.1f64)).sqrt(), epsilon = 1e-14);
        let hoef = EpsilonRule::l2(Method::Hoeffding, 0.9, &known)
            .unwrap()
            .epsilon(n)
            .unwrap();
        assert_abs_diff_eq!(hoef, 3.0 * (20f64.ln() / 800.0).sqrt(), epsilon = 1e-14);
        let norm = EpsilonRule::l2(Method::Normal, 0.9, &known)
            .unwrap()
            .epsilon(n)
            .unwrap();
        assert_abs_diff_eq!(norm, 1.6448536269514722 * 2.0 / 20.0, epsilon = 1e-8);

        let unbounded = L2Known {
            bounds: None,
            shape: Shape::Gaussian,
            ..known
        };
        assert!(matches!(
            EpsilonRule::l2(Method::Hoeffding, 0.9, &unbounded),
            Err(Error::UnsupportedRule(_))
        ));
        assert!(EpsilonRule::l2(Method::Chebyshev, 0.9, &unbounded).is_ok());
    }

    #[test]
    fn invalid_gamma() {
        for g in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(EpsilonRule::coin(Method::Normal, g).is_err());
        }
    }

    #[test]
    fn normal_quantile_against_tables_and_statrs() {
        assert_abs_diff_eq!(normal_quantile(0.975), 1.959963984540054, epsilon = 1e-8);
        assert_abs_diff_eq!(normal_quantile(0.95), 1.6448536269514722, epsilon = 1e-8);
        assert_abs_diff_eq!(normal_quantile(0.995), 2.5758293035489004, epsilon = 1e-8);
        assert_abs_diff_eq!(normal_quantile(0.5), 0.0, epsilon = 1e-15);
        let std = Normal::new(0.0, 1.0).unwrap();
        for i in 1..2000 {
            let p = i as f64 / 2000.0;
            assert_abs_diff_eq!(normal_quantile(p), std.inverse_cdf(p), epsilon = 1e-8);
        }
        for p in [1e-10, 1e-6, 0.01, 0.99, 1.0 - 1e-6] {
            assert_abs_diff_eq!(normal_quantile(p), std.inverse_cdf(p), epsilon = 1e-8);
        }
    }

    #[test]
    fn interval_examples() {
        let rule = EpsilonRule::coin(Method::Hoeffding, 0.95).unwrap();
        let est = confidence_interval(0.5, 10_000, 5000.0, 0.5, &rule).unwrap();
        assert_eq!(est.point, 0.0);
        assert_abs_diff_eq!(est.lower, -est.upper, epsilon = 1e-15);

        let est = coin_interval(0.65, 10_000, 5000.0, &rule).unwrap();
        assert_abs_diff_eq!(est.lower, 0.2728380, epsilon = 1e-6);
        assert_abs_diff_eq!(est.upper, 0.3271620, epsilon = 1e-6);
        assert_abs_diff_eq!(est.point, 0.3, epsilon = 1e-12);
        assert!(!est.outside_feasible);

        // eps = 0.02 exactly: sigma / sqrt(N (1 - gamma)) with sigma = 0.02 * 100 * sqrt(0.75)
        let rule = EpsilonRule::new(Method::Chebyshev, 0.25, 2.0 * 0.75f64.sqrt(), None).unwrap();
        assert_abs_diff_eq!(rule.epsilon(10_000).unwrap(), 0.02, epsilon = 1e-15);
        let est = confidence_interval(10.5, 10_000, 2500.0, 10.0, &rule).unwrap();
        assert_abs_diff_eq!(est.lower, 1.92, epsilon = 1e-12);
        assert_abs_diff_eq!(est.upper, 2.08, epsilon = 1e-12);
        assert_abs_diff_eq!(est.point, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_renewal_mass_is_non_identifiable() {
        let rule = EpsilonRule::coin(Method::Normal, 0.95).unwrap();
        assert_eq!(
            confidence_interval(0.5, 10, 0.0, 0.5, &rule),
            Err(Error::NonIdentifiable)
        );
    }

    #[test]
    fn feasibility_flag_does_not_clamp() {
        let rule = EpsilonRule::coin(Method::Chebyshev, 0.95).unwrap();
        let est = coin_interval(0.52, 100, 1.0, &rule).unwrap();
        assert!(est.outside_feasible);
        assert!(est.upper > 0.5);
        assert_abs_diff_eq!(est.width(), 2.0 * est.epsilon * 100.0, epsilon = 1e-12);
    }

    #[test]
    fn k_examples() {
        for method in Method::ALL {
            let rule = EpsilonRule::coin(method, 0.95).unwrap();
            for p in [0.1, 0.5, 0.9] {
                let fam = family("bernoulli", &BTreeMap::from([("p".into(), p)])).unwrap();
                assert_eq!(correction_k(&fam, &rule).unwrap(), 0.0);
            }
            assert!(correction_k(&named("srw_z2"), &rule).unwrap().is_infinite());
            assert!(matches!(
                correction_k(&named("defective_geometric"), &rule),
                Err(Error::Divergent(_))
            ));
        }
        let rule = EpsilonRule::coin(Method::Hoeffding, 0.95).unwrap();
        let k = correction_k(&named("srw_z"), &rule).unwrap();
        assert_abs_diff_eq!(
            k,
            (std::f64::consts::PI * 40f64.ln() / 4.0).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(k, 1.702128, epsilon = 1e-6);
    }

    #[test]
    fn srw_z_trajectory_approaches_k() {
        let rule = EpsilonRule::coin(Method::Hoeffding, 0.95).unwrap();
        let fam = named("srw_z");
        let k = correction_k(&fam, &rule).unwrap();
        let u = fam.renewal_probabilities(1_000_000).unwrap();
        let traj = k_trajectory(&rule, &u, &[10_000, 100_000, 1_000_000]).unwrap();
        let errs: Vec<f64> = traj.iter().map(|(_, v)| (v - k).abs()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{traj:?}");
        assert!(errs[2] / k < 0.05);

        let z2 = named("srw_z2").renewal_probabilities(1_000_000).unwrap();
        let traj = k_trajectory(&rule, &z2, &[10_000, 100_000, 1_000_000]).unwrap();
        assert!(traj.windows(2).all(|w| w[1].1 > w[0].1), "{traj:?}");
    }

    #[test]
    fn correction_shifts_and_refuses_twice() {
        let rule = EpsilonRule::coin(Method::Hoeffding, 0.95).unwrap();
        let est = coin_interval(0.65, 10_000, 5000.0, &rule).unwrap();
        let same = corrected_interval(&est, 0.0).unwrap();
        assert_eq!(
            (same.lower, same.upper, same.point),
            (est.lower, est.upper, est.point)
        );
        assert!(same.corrected);

        let base = IntervalEstimate {
            lower: 0.27,
            upper: 0.33,
            point: 0.30,
            ..est
        };
        let shifted = corrected_interval(&base, 1.70215).unwrap();
        assert_abs_diff_eq!(shifted.lower, -1.43215, epsilon = 1e-12);
        assert_abs_diff_eq!(shifted.upper, -1.37215, epsilon = 1e-12);
        assert_eq!(shifted.k, 1.70215);

        assert_eq!(
            corrected_interval(&shifted, 0.1),
            Err(Error::AlreadyCorrected)
        );
        assert_eq!(shifted.raw_bounds(), Err(Error::AlreadyCorrected));
        assert_eq!(base.raw_bounds(), Ok((0.27, 0.33)));
        assert!(corrected_interval(&base, f64::INFINITY).is_err());
    }

    #[test]
    fn harris_keane_examples() {
        let bern = named("bernoulli").renewal_probabilities(100).unwrap();
        assert_abs_diff_eq!(
            harris_keane_diagnostic(&bern).partial_sum_sq,
            25.0,
            epsilon = 1e-12
        );
        let z = named("srw_z").renewal_probabilities(4).unwrap();
        assert_abs_diff_eq!(
            harris_keane_diagnostic(&z).partial_sum_sq,
            0.390625,
            epsilon = 1e-14
        );
        let z2 = named("srw_z2").renewal_probabilities(4).unwrap();
        let hk = harris_keane_diagnostic(&z2);
        assert_abs_diff_eq!(hk.partial_sum_sq, 0.0625 + 0.019775390625, epsilon = 1e-14);
        assert_eq!(hk.trajectory.len(), 4);
    }

    #[test]
    fn epsilon_ordering_for_high_confidence() {
        for g in [0.8, 0.85, 0.9, 0.95, 0.99, 0.999] {
            for n in [10, 100, 10_000, 1_000_000] {
                let e = |m| EpsilonRule::coin(m, g).unwrap().epsilon(n).unwrap();
                let (c, h, a) = (
                    e(Method::Chebyshev),
                    e(Method::Hoeffding),
                    e(Method::Normal),
                );
                assert!(a < h && h < c, "gamma {g} N {n}: {a} {h} {c}");
            }
        }
        // below ~0.78 hoeffding is wider than chebyshev
        let e = |m| EpsilonRule::coin(m, 0.5).unwrap().scaled();
        assert!(e(Method::Hoeffding) > e(Method::Chebyshev));
    }
}
