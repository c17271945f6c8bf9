//! Built-in renewal families with closed-form laws and known growth of `U_N`.
//!
//! | name                  | parameters      | class             | growth of `U_N`        |
//! |-----------------------|-----------------|-------------------|------------------------|
//! | `bernoulli`           | `p`             | positive recurrent| `p N`                  |
//! | `srw_z`               |                 | null recurrent    | `sqrt(2N/pi)`          |
//! | `srw_z2`              |                 | null recurrent    | `ln(N) / pi`           |
//! | `powerlaw_tail`       | `beta`          | null recurrent    | `c N^beta`             |
//! | `defective_geometric` | `p`, `mass`     | transient         | `mass / (1 - mass)`    |
//! | `srw_zd`              | `d` (3, 4, 5)   | transient         | Polya return mass      |

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::RangeInclusive;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::renewal::{
    classify, u_from_f, AnalyticTail, FirstRenewalDistribution, RecurrenceClass, RecurrenceKind,
    RenewalProbabilities,
};

/// Return probabilities of the simple random walk on `Z^d`, `d = 3, 4, 5`.
pub const POLYA_RETURN_MASS: [(u32, f64); 3] = [(3, 0.340537), (4, 0.193206), (5, 0.135178)];

/// Asymptotic growth of the expected renewal count `U_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Growth {
    /// `U_N ~ constant * N^exponent`.
    Power { exponent: f64, constant: f64 },
    /// `U_N ~ constant * ln N`.
    Logarithmic { constant: f64 },
    /// `U_N -> limit < infinity`.
    Bounded { limit: f64 },
}

type Rule = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct RenewalFamily {
    name: String,
    parameters: BTreeMap<String, f64>,
    f: FirstRenewalDistribution,
    u_rule: Option<Rule>,
    growth: Growth,
    kind: RecurrenceKind,
    mu: f64,
}

impl fmt::Debug for RenewalFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RenewalFamily")
            .field("name", &self.name)
            .field("parameters", &self.parameters)
            .field("growth", &self.growth)
            .field("kind", &self.kind)
            .finish()
    }
}

impl RenewalFamily {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn parameters(&self) -> &BTreeMap<String, f64> {
        &self.parameters
    }

    pub fn first_renewal(&self) -> &FirstRenewalDistribution {
        &self.f
    }

    pub fn growth(&self) -> Growth {
        self.growth
    }

    pub fn recurrence_kind(&self) -> RecurrenceKind {
        self.kind
    }

    pub fn mean_recurrence_time(&self) -> f64 {
        self.mu
    }

    pub fn has_closed_form_u(&self) -> bool {
        self.u_rule.is_some()
    }

    /// Closed-form `u_n`, if the family has one.
    pub fn u_closed_form(&self, n: usize) -> Option<f64> {
        self.u_rule
            .as_ref()
            .map(|r| if n == 0 { 1.0 } else { r(n) })
    }

    /// `f_n` for `n >= 1`.
    pub fn f_closed_form(&self, n: usize) -> Result<f64> {
        Ok(self.f.prefix(n)?[n - 1])
    }

    /// `u_1..u_N`, from the closed form when available and the recurrence otherwise.
    pub fn renewal_probabilities(&self, n: usize) -> Result<RenewalProbabilities> {
        match &self.u_rule {
            Some(rule) => {
                if n == 0 {
                    return Err(Error::InvalidParameter("horizon must be at least 1".into()));
                }
                RenewalProbabilities::from_values((1..=n).map(|k| rule(k)).collect())
            }
            None => u_from_f(&self.f, n),
        }
    }

    pub fn recurrence_class(&self, tail_horizon: usize) -> Result<RecurrenceClass> {
        classify(&self.f, tail_horizon)
    }
}

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn check_keys(name: &str, params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "family `{name}` has no parameter `{key}` (expected one of {allowed:?})"
            )));
        }
    }
    Ok(())
}

/// `C(2m, m) 4^-m`, the probability that the walk on `Z` is at the origin at time `2m`.
pub fn srw_z_return_probability(m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let m = m as f64;
    (ln_gamma(2.0 * m + 1.0) - 2.0 * ln_gamma(m + 1.0) - 2.0 * m * std::f64::consts::LN_2).exp()
}

/// Riemann zeta for real `s > 1`, by Euler-Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta diverges for s <= 1");
    const K: usize = 20;
    // B_2j / (2j)!
    const COEFFS: [f64; 5] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
    ];
    let k = K as f64;
    let mut sum: f64 = (1..K).map(|n| (n as f64).powf(-s)).sum();
    sum += k.powf(1.0 - s) / (s - 1.0) + 0.5 * k.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2)
    let mut rising = s;
    for (j, c) in COEFFS.iter().enumerate() {
        let order = 2 * j + 1;
        sum += c * rising * k.powf(-s - order as f64);
        rising *= (s + order as f64) * (s + order as f64 + 1.0);
    }
    sum
}

/// Geometric first-renewal law `f_n = mass * p (1-p)^(n-1)`; `mass < 1` is transient.
fn geometric(
    name: &str,
    p: f64,
    mass: f64,
    params: BTreeMap<String, f64>,
) -> Result<RenewalFamily> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "p = {p} must lie in (0, 1]"
        )));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "mass = {mass} must lie in (0, 1]"
        )));
    }
    let q = 1.0 - p;
    // r = 1 - p (1 - mass); u_n = mass p r^(n-1)
    let r = 1.0 - p * (1.0 - mass);
    let recurrent = mass >= 1.0;
    let mean = if recurrent { 1.0 / p } else { f64::INFINITY };
    let f = FirstRenewalDistribution::from_generator(
        move |n| mass * p * q.powi(n as i32 - 1),
        AnalyticTail {
            total_mass: mass,
            mean,
        },
    )?;
    let growth = if recurrent {
        Growth::Power {
            exponent: 1.0,
            constant: p,
        }
    } else {
        Growth::Bounded {
            limit: mass / (1.0 - mass),
        }
    };
    Ok(RenewalFamily {
        name: name.to_string(),
        parameters: params,
        f,
        u_rule: Some(Arc::new(move |n| mass * p * r.powi(n as i32 - 1))),
        growth,
        kind: RecurrenceKind::from_moments(mass, mean),
        mu: mean,
    })
}

fn srw_z() -> Result<RenewalFamily> {
    let u = |n: usize| {
        if n % 2 == 1 {
            0.0
        } else {
            srw_z_return_probability(n / 2)
        }
    };
    let f = FirstRenewalDistribution::from_generator(
        move |n| {
            if n % 2 == 1 {
                0.0
            } else {
                u(n) / (n as f64 - 1.0)
            }
        },
        AnalyticTail {
            total_mass: 1.0,
            mean: f64::INFINITY,
        },
    )?;
    Ok(RenewalFamily {
        name: "srw_z".into(),
        parameters: BTreeMap::new(),
        f,
        u_rule: Some(Arc::new(u)),
        growth: Growth::Power {
            exponent: 0.5,
            constant: (2.0 / PI).sqrt(),
        },
        kind: RecurrenceKind::NullRecurrent,
        mu: f64::INFINITY,
    })
}

fn srw_z2() -> Result<RenewalFamily> {
    let u = |n: usize| {
        if n % 2 == 1 {
            0.0
        } else {
            srw_z_return_probability(n / 2).powi(2)
        }
    };
    let f = FirstRenewalDistribution::from_renewal_rule(
        u,
        AnalyticTail {
            total_mass: 1.0,
            mean: f64::INFINITY,
        },
    )?;
    Ok(RenewalFamily {
        name: "srw_z2".into(),
        parameters: BTreeMap::new(),
        f,
        u_rule: Some(Arc::new(u)),
        growth: Growth::Logarithmic { constant: 1.0 / PI },
        kind: RecurrenceKind::NullRecurrent,
        mu: f64::INFINITY,
    })
}

/// `f_n = n^-(1+beta) / zeta(1+beta)`, `0 < beta < 1`.
fn powerlaw_tail(beta: f64, params: BTreeMap<String, f64>) -> Result<RenewalFamily> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta = {beta} must lie in (0, 1)"
        )));
    }
    let s = 1.0 + beta;
    let norm = zeta(s);
    let f = FirstRenewalDistribution::from_generator(
        move |n| (n as f64).powf(-s) / norm,
        AnalyticTail {
            total_mass: 1.0,
            mean: f64::INFINITY,
        },
    )?;
    // P(T > n) ~ n^-beta / (beta zeta), so U_N ~ N^beta zeta sin(pi beta) / pi
    let constant = norm * (PI * beta).sin() / PI;
    Ok(RenewalFamily {
        name: "powerlaw_tail".into(),
        parameters: params,
        f,
        u_rule: None,
        growth: Growth::Power {
            exponent: beta,
            constant,
        },
        kind: RecurrenceKind::NullRecurrent,
        mu: f64::INFINITY,
    })
}

/// Look up a family by name. Missing parameters take their catalog defaults;
/// unknown parameter names are rejected.
pub fn family(name: &str, params: &BTreeMap<String, f64>) -> Result<RenewalFamily> {
    let mut resolved = params.clone();
    match name {
        "bernoulli" => {
            check_keys(name, params, &["p"])?;
            let p = param(params, "p", 0.5);
            resolved.insert("p".into(), p);
            geometric(name, p, 1.0, resolved)
        }
        "defective_geometric" => {
            check_keys(name, params, &["p", "mass"])?;
            let p = param(params, "p", 0.5);
            let mass = param(params, "mass", 0.9);
            if mass >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "defective_geometric needs mass < 1, got {mass}"
                )));
            }
            resolved.insert("p".into(), p);
            resolved.insert("mass".into(), mass);
            geometric(name, p, mass, resolved)
        }
        "srw_zd" => {
            check_keys(name, params, &["d"])?;
            let d = param(params, "d", 3.0);
            let mass = POLYA_RETURN_MASS
                .iter()
                .find(|(dim, _)| *dim as f64 == d)
                .map(|&(_, m)| m)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!("srw_zd supports d in {{3, 4, 5}}, got {d}"))
                })?;
            resolved.insert("d".into(), d);
            geometric(name, 0.5, mass, resolved)
        }
        "srw_z" => {
            check_keys(name, params, &[])?;
            srw_z()
        }
        "srw_z2" => {
            check_keys(name, params, &[])?;
            srw_z2()
        }
        "powerlaw_tail" => {
            check_keys(name, params, &["beta"])?;
            let beta = param(params, "beta", 0.75);
            resolved.insert("beta".into(), beta);
            powerlaw_tail(beta, resolved)
        }
        other => Err(Error::UnknownFamily(other.to_string())),
    }
}

pub const FAMILY_NAMES: [&str; 6] = [
    "bernoulli",
    "srw_z",
    "srw_z2",
    "defective_geometric",
    "srw_zd",
    "powerlaw_tail",
];

/// Every built-in family at its default parameters.
pub fn family_catalog() -> Vec<RenewalFamily> {
    FAMILY_NAMES
        .iter()
        .map(|name| family(name, &BTreeMap::new()).expect("catalog defaults are valid"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// Fitted exponent of `U_N ~ c N^beta`.
    pub beta_hat: f64,
    pub c_hat: f64,
    pub r2: f64,
}

/// Least-squares fit of `ln U_N` against `ln N` for `N` in `window`.
///
/// `cumulative[i]` holds `U_{i+1}`. A window on which `U` is constant has no
/// defined slope and is reported as `beta_hat = 0` (the transient signature).
pub fn growth_exponent_fit(cumulative: &[f64], window: RangeInclusive<usize>) -> Result<GrowthFit> {
    let (lo, hi) = (*window.start(), *window.end());
    if lo == 0 || hi > cumulative.len() || hi < lo {
        return Err(Error::InvalidWindow(format!(
            "window {lo}..={hi} outside horizon 1..={}",
            cumulative.len()
        )));
    }
    if hi - lo + 1 < 10 {
        return Err(Error::InvalidWindow(format!(
            "window {lo}..={hi} has fewer than 10 points"
        )));
    }
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .map(|n| {
            let value = cumulative[n - 1];
            if value > 0.0 {
                Ok(((n as f64).ln(), value.ln()))
            } else {
                Err(Error::InvalidWindow(format!(
                    "U_{n} = {value} is not positive"
                )))
            }
        })
        .collect::<Result<_>>()?;
    let count = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / count;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pts {
        sxx += (x - mean_x).powi(2);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y).powi(2);
    }
    let scale = mean_y.abs().max(1.0);
    if syy <= (1e-24 * scale * scale) * count {
        return Ok(GrowthFit {
            beta_hat: 0.0,
            c_hat: mean_y.exp(),
            r2: 0.0,
        });
    }
    let beta_hat = sxy / sxx;
    let intercept = mean_y - beta_hat * mean_x;
    Ok(GrowthFit {
        beta_hat,
        c_hat: intercept.exp(),
        r2: sxy * sxy / (sxx * syy),
    })
}
