//! Discrete-time renewal processes.
//!
//! A renewal process on `{1, 2, ...}` is described either by the law `f` of the
//! first renewal time `T` or by the renewal probabilities `u_n = P(renewal at n)`.
//! The two are linked by the convolution recurrence
//! `u_n = sum_{k=1..n} f_k u_{n-k}` with `u_0 = 1`.
//!
//! All sequences are indexed from 1. `u_0 = 1` is implicit and never stored as a
//! user-visible element.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability constraints (negative mass, partial sums above one).
pub const PROB_TOL: f64 = 1e-12;

/// Truncated tail mass above which a numeric classification is left undecided.
pub const UNDECIDED_TAIL: f64 = 1e-9;

type Rule = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// Total mass and mean of a first-renewal law, known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticTail {
    pub total_mass: f64,
    /// `E(T)`; `f64::INFINITY` for null recurrent and transient laws.
    pub mean: f64,
}

#[derive(Clone)]
enum Source {
    /// Explicit `f_1..f_m`; zero beyond the prefix.
    Prefix(Arc<[f64]>),
    /// Closed-form `n -> f_n`.
    Generator(Rule),
    /// Closed-form `n -> u_n`; `f` is recovered by inverting the recurrence.
    RenewalRule(Rule),
}

/// The law `f` of the first renewal time, possibly defective.
#[derive(Clone)]
pub struct FirstRenewalDistribution {
    source: Source,
    tail: Option<AnalyticTail>,
}

impl fmt::Debug for FirstRenewalDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let source = match &self.source {
            Source::Prefix(p) => format!("Prefix(len = {})", p.len()),
            Source::Generator(_) => "Generator".to_string(),
            Source::RenewalRule(_) => "RenewalRule".to_string(),
        };
        f.debug_struct("FirstRenewalDistribution")
            .field("source", &source)
            .field("tail", &self.tail)
            .finish()
    }
}

impl FirstRenewalDistribution {
    /// A purely numeric law given by its first `probs.len()` terms.
    pub fn from_prefix(probs: Vec<f64>) -> Result<Self> {
        validate_f(&probs).map_err(Error::InvalidDistribution)?;
        Ok(Self {
            source: Source::Prefix(probs.into()),
            tail: None,
        })
    }

    /// A closed-form law `n -> f_n` with known total mass and mean.
    pub fn from_generator<G>(generator: G, tail: AnalyticTail) -> Result<Self>
    where
        G: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        check_tail(&tail)?;
        Ok(Self {
            source: Source::Generator(Arc::new(generator)),
            tail: Some(tail),
        })
    }

    /// A law defined through a closed-form renewal sequence `n -> u_n`.
    pub fn from_renewal_rule<G>(rule: G, tail: AnalyticTail) -> Result<Self>
    where
        G: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        check_tail(&tail)?;
        Ok(Self {
            source: Source::RenewalRule(Arc::new(rule)),
            tail: Some(tail),
        })
    }

    pub fn analytic_tail(&self) -> Option<AnalyticTail> {
        self.tail
    }

    /// `true` when the law carries no closed-form tail information.
    pub fn is_numeric(&self) -> bool {
        self.tail.is_none()
    }

    /// `sum f_n`, exact when analytic, otherwise the sum of the stored prefix.
    pub fn total_mass(&self) -> f64 {
        match (&self.tail, &self.source) {
            (Some(t), _) => t.total_mass,
            (None, Source::Prefix(p)) => p.iter().sum(),
            (None, _) => unreachable!("generators always carry an analytic tail"),
        }
    }

    /// `mu = sum n f_n`; infinite for defective laws.
    pub fn mean_recurrence_time(&self) -> f64 {
        match (&self.tail, &self.source) {
            (Some(t), _) => t.mean,
            (None, Source::Prefix(p)) => {
                if p.iter().sum::<f64>() < 1.0 - UNDECIDED_TAIL {
                    f64::INFINITY
                } else {
                    p.iter().enumerate().map(|(i, f)| (i + 1) as f64 * f).sum()
                }
            }
            (None, _) => unreachable!(),
        }
    }

    /// Materialise `f_1..f_n`, validating non-negativity and partial sums.
    pub fn prefix(&self, n: usize) -> Result<Vec<f64>> {
        let probs = match &self.source {
            Source::Prefix(p) => {
                let mut v = vec![0.0; n];
                let m = n.min(p.len());
                v[..m].copy_from_slice(&p[..m]);
                v
            }
            Source::Generator(g) => (1..=n).map(|k| g(k)).collect(),
            Source::RenewalRule(r) => {
                let u: Vec<f64> = (1..=n).map(|k| r(k)).collect();
                invert_recurrence(&u)
            }
        };
        validate_f(&probs).map_err(Error::InvalidDistribution)?;
        Ok(probs)
    }

    /// The closed-form renewal sequence this law was built from, if any.
    pub fn renewal_rule(&self) -> Option<&(dyn Fn(usize) -> f64 + Send + Sync)> {
        match &self.source {
            Source::RenewalRule(r) => Some(r.as_ref()),
            _ => None,
        }
    }
}

fn check_tail(tail: &AnalyticTail) -> Result<()> {
    if !(0.0..=1.0 + PROB_TOL).contains(&tail.total_mass) {
        return Err(Error::InvalidDistribution(format!(
            "total mass {} outside [0, 1]",
            tail.total_mass
        )));
    }
    if tail.mean.is_nan() || tail.mean < 1.0 && tail.total_mass > 0.0 {
        return Err(Error::InvalidDistribution(format!(
            "mean recurrence time {} must be at least 1",
            tail.mean
        )));
    }
    Ok(())
}

fn validate_f(probs: &[f64]) -> std::result::Result<(), String> {
    let mut partial = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < -PROB_TOL {
            return Err(format!("f_{} = {p} is negative or not finite", i + 1));
        }
        partial += p;
        if partial > 1.0 + PROB_TOL {
            return Err(format!("partial sum through f_{} is {partial} > 1", i + 1));
        }
    }
    Ok(())
}

/// The renewal probabilities `u_1..u_N` and expected renewal counts `U_1..U_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalProbabilities {
    u: Vec<f64>,
    cumulative: Vec<f64>,
}

impl RenewalProbabilities {
    /// Wrap `u_1..u_N`, checking `0 <= u_n <= 1`.
    pub fn from_values(u: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        for (i, &x) in u.iter().enumerate() {
            if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&x) {
                return Err(Error::InconsistentSequence(format!(
                    "u_{} = {x} outside [0, 1]",
                    i + 1
                )));
            }
        }
        let cumulative = u
            .iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        Ok(Self { u, cumulative })
    }

    pub fn horizon(&self) -> usize {
        self.u.len()
    }

    /// `u_n` for `1 <= n <= N`; `u_0 = 1`.
    pub fn u(&self, n: usize) -> f64 {
        if n == 0 {
            1.0
        } else {
            self.u[n - 1]
        }
    }

    /// `U_n = u_1 + ... + u_n`; `U_0 = 0`.
    pub fn expected_renewals(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.cumulative[n - 1]
        }
    }

    /// `U_N` at the full horizon.
    pub fn total_expected_renewals(&self) -> f64 {
        *self.cumulative.last().expect("non-empty")
    }

    /// `u_1..u_N`.
    pub fn values(&self) -> &[f64] {
        &self.u
    }

    /// `U_1..U_N`.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Restrict to the first `n` terms.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.horizon() {
            return Err(Error::InvalidParameter(format!(
                "cannot truncate horizon {} to {n}",
                self.horizon()
            )));
        }
        Ok(Self {
            u: self.u[..n].to_vec(),
            cumulative: self.cumulative[..n].to_vec(),
        })
    }
}

/// Dot product with four independent accumulators so the loop vectorises.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `u_n = sum_{k=1..n} f_k u_{n-k}` for `n = 1..f.len()`.
fn convolve_recurrence(f: &[f64]) -> Vec<f64> {
    let n_max = f.len();
    // f reversed so that both dot operands run forward:
    // f_{n-m} = rev[n_max - n + m].
    let rev: Vec<f64> = f.iter().rev().copied().collect();
    let mut u = Vec::with_capacity(n_max + 1);
    u.push(1.0);
    for n in 1..=n_max {
        let next = dot(&u[..n], &rev[n_max - n..]);
        u.push(next);
    }
    u.remove(0);
    u
}

/// `f_n = u_n - sum_{k=1..n-1} f_k u_{n-k}` for `n = 1..u.len()`.
fn invert_recurrence(u: &[f64]) -> Vec<f64> {
    let n_max = u.len();
    // rev[i] = u_{n_max - i}, with rev[n_max] = u_0 = 1.
    let mut rev: Vec<f64> = u.iter().rev().copied().collect();
    rev.push(1.0);
    let mut f: Vec<f64> = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let s = dot(&f[..n - 1], &rev[n_max - n + 1..n_max]);
        f.push(u[n - 1] - s);
    }
    f
}

/// Renewal probabilities up to horizon `n` from the first-renewal law.
///
/// This is the exact O(N^2) convolution recurrence; it is the reference semantics
/// for every other route to `u`.
pub fn u_from_f(f: &FirstRenewalDistribution, n: usize) -> Result<RenewalProbabilities> {
    if n == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let probs = f.prefix(n)?;
    RenewalProbabilities::from_values(convolve_recurrence(&probs))
}

/// Recover `f_1..f_N` from `u_1..u_N` by inverting the recurrence.
pub fn f_from_u(u: &RenewalProbabilities) -> Result<FirstRenewalDistribution> {
    let f = invert_recurrence(u.values());
    validate_f(&f).map_err(Error::InconsistentSequence)?;
    Ok(FirstRenewalDistribution {
        source: Source::Prefix(f.into()),
        tail: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecurrenceKind {
    PositiveRecurrent,
    NullRecurrent,
    Transient,
}

impl RecurrenceKind {
    /// Class implied by total mass and mean recurrence time.
    pub fn from_moments(total_mass: f64, mean: f64) -> Self {
        if total_mass < 1.0 - PROB_TOL {
            RecurrenceKind::Transient
        } else if mean.is_finite() {
            RecurrenceKind::PositiveRecurrent
        } else {
            RecurrenceKind::NullRecurrent
        }
    }

    pub fn is_recurrent(self) -> bool {
        self != RecurrenceKind::Transient
    }
}

impl fmt::Display for RecurrenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecurrenceKind::PositiveRecurrent => "positive-recurrent",
            RecurrenceKind::NullRecurrent => "null-recurrent",
            RecurrenceKind::Transient => "transient",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceEvidence {
    /// `1 - sum_{n <= H} f_n` at the tail horizon `H`.
    pub tail_mass_bound: f64,
    /// `(n, sum_{k <= n} k f_k)` at doubling checkpoints up to the tail horizon.
    pub mean_partial_sums: Vec<(usize, f64)>,
    /// Closed-form tail information was used.
    pub authoritative: bool,
    /// Numeric classification with tail mass above [`UNDECIDED_TAIL`].
    pub undecided: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceClass {
    pub kind: RecurrenceKind,
    pub mu: f64,
    pub evidence: RecurrenceEvidence,
}

/// Classify a renewal process as positive recurrent, null recurrent or transient.
///
/// Laws with closed-form tails are classified exactly. Numeric prefixes get a
/// best-effort class marked non-authoritative, and undecided when more than
/// [`UNDECIDED_TAIL`] of the mass lies beyond `tail_horizon`.
pub fn classify(f: &FirstRenewalDistribution, tail_horizon: usize) -> Result<RecurrenceClass> {
    if tail_horizon == 0 {
        return Err(Error::InvalidParameter(
            "tail horizon must be at least 1".into(),
        ));
    }
    let probs = f.prefix(tail_horizon)?;
    let mut mass = 0.0;
    let mut mean = 0.0;
    let mut checkpoints = Vec::new();
    let mut next_checkpoint = 1;
    for (i, p) in probs.iter().enumerate() {
        let n = i + 1;
        mass += p;
        mean += n as f64 * p;
        if n == next_checkpoint || n == tail_horizon {
            checkpoints.push((n, mean));
            next_checkpoint *= 2;
        }
    }
    let tail_mass_bound = (1.0 - mass).max(0.0);

    if let Some(tail) = f.analytic_tail() {
        return Ok(RecurrenceClass {
            kind: RecurrenceKind::from_moments(tail.total_mass, tail.mean),
            mu: tail.mean,
            evidence: RecurrenceEvidence {
                tail_mass_bound,
                mean_partial_sums: checkpoints,
                authoritative: true,
                undecided: false,
            },
        });
    }

    let undecided = tail_mass_bound > UNDECIDED_TAIL;
    let (kind, mu) = if undecided {
        (RecurrenceKind::Transient, f64::INFINITY)
    } else {
        (RecurrenceKind::PositiveRecurrent, mean)
    };
    Ok(RecurrenceClass {
        kind,
        mu,
        evidence: RecurrenceEvidence {
            tail_mass_bound,
            mean_partial_sums: checkpoints,
            authoritative: false,
            undecided,
        },
    })
}

/// Draws renewal indicator sequences on a fixed horizon.
///
/// Inter-arrival gaps are drawn i.i.d. from `f` by inversion of its cumulative
/// distribution, tabulated once up to the horizon. A draw beyond the remaining
/// horizon (which includes the defective event `T = infinity`) ends the path.
#[derive(Debug, Clone)]
pub struct RenewalSampler {
    cdf: Vec<f64>,
}

impl RenewalSampler {
    pub fn new(f: &FirstRenewalDistribution, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        let probs = f.prefix(horizon)?;
        let cdf = probs
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p.max(0.0);
                Some(*acc)
            })
            .collect();
        Ok(Self { cdf })
    }

    pub fn horizon(&self) -> usize {
        self.cdf.len()
    }

    /// Fill `delta` (length = horizon) with one sampled path.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, delta: &mut [bool]) {
        let horizon = self.cdf.len();
        assert_eq!(delta.len(), horizon, "delta buffer must match the horizon");
        delta.fill(false);
        let mut t = 0;
        loop {
            let x: f64 = rng.random();
            // gap - 1 = number of cdf entries <= x
            let gap = self.cdf.partition_point(|&c| c <= x) + 1;
            if gap > horizon - t {
                break;
            }
            t += gap;
            delta[t - 1] = true;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<bool> {
        let mut delta = vec![false; self.cdf.len()];
        self.sample_into(rng, &mut delta);
        delta
    }
}

/// One renewal indicator path `delta_1..delta_N`.
pub fn sample_renewals<R: Rng + ?Sized>(
    f: &FirstRenewalDistribution,
    n: usize,
    rng: &mut R,
) -> Result<Vec<bool>> {
    Ok(RenewalSampler::new(f, n)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geometric(p: f64, mass: f64) -> FirstRenewalDistribution {
        FirstRenewalDistribution::from_generator(
            move |n| mass * p * (1.0 - p).powi(n as i32 - 1),
            AnalyticTail {
                total_mass: mass,
                mean: if mass < 1.0 { f64::INFINITY } else { 1.0 / p },
            },
        )
        .unwrap()
    }

    /// First-return law of the simple random walk on Z, brute-forced over all paths.
    fn srw_first_return_by_enumeration(max_len: usize) -> Vec<f64> {
        let mut f = vec![0.0; max_len];
        for len in 1..=max_len {
            let mut hits = 0u64;
            for bits in 0u64..(1 << len) {
                let mut pos = 0i64;
                let mut first = None;
                for step in 0..len {
                    pos += if bits >> step & 1 == 1 { 1 } else { -1 };
                    if pos == 0 {
                        first = Some(step + 1);
                        break;
                    }
                }
                if first == Some(len) {
                    hits += 1;
                }
            }
            f[len - 1] = hits as f64 / (1u64 << len) as f64;
        }
        f
    }

    #[test]
    fn certain_renewal_every_step() {
        let f = FirstRenewalDistribution::from_prefix(vec![1.0]).unwrap();
        let u = u_from_f(&f, 5).unwrap();
        assert_eq!(u.values(), &[1.0; 5]);
        assert_eq!(u.total_expected_renewals(), 5.0);
    }

    #[test]
    fn geometric_is_a_fixed_point() {
        let u = u_from_f(&geometric(0.5, 1.0), 4).unwrap();
        for n in 1..=4 {
            assert_abs_diff_eq!(u.u(n), 0.5, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(u.total_expected_renewals(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn srw_first_return_from_enumeration() {
        let f_enum = srw_first_return_by_enumeration(4);
        assert_eq!(f_enum, vec![0.0, 0.5, 0.0, 0.125]);
        let u = u_from_f(&FirstRenewalDistribution::from_prefix(f_enum).unwrap(), 4).unwrap();
        assert_eq!(u.u(2), 0.5);
        assert_eq!(u.u(4), 0.375);
        assert_eq!(u.u(3), 0.0);
    }

    #[test]
    fn inversion_examples() {
        let ones = RenewalProbabilities::from_values(vec![1.0; 6]).unwrap();
        let f = f_from_u(&ones).unwrap().prefix(6).unwrap();
        assert_eq!(f, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let halves = RenewalProbabilities::from_values(vec![0.5; 4]).unwrap();
        let f = f_from_u(&halves).unwrap().prefix(4).unwrap();
        assert_eq!(f, vec![0.5, 0.25, 0.125, 0.0625]);

        let srw = RenewalProbabilities::from_values(vec![0.0, 0.5, 0.0, 0.375]).unwrap();
        let f = f_from_u(&srw).unwrap().prefix(4).unwrap();
        // C(2n,n) / ((2n-1) 4^n): n=1 -> 1/2, n=2 -> 1/8
        assert_abs_diff_eq!(f[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(f[3], 0.125, epsilon = 1e-15);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[2], 0.0);
    }

    #[test]
    fn rejects_invalid_laws() {
        assert!(matches!(
            FirstRenewalDistribution::from_prefix(vec![0.5, -0.1]),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(matches!(
            FirstRenewalDistribution::from_prefix(vec![0.7, 0.4]),
            Err(Error::InvalidDistribution(_))
        ));
        // within tolerance
        assert!(FirstRenewalDistribution::from_prefix(vec![0.5, 0.5 + 1e-13]).is_ok());
        let bad = FirstRenewalDistribution::from_generator(
            |_| 0.6,
            AnalyticTail {
                total_mass: 1.0,
                mean: 2.0,
            },
        )
        .unwrap();
        assert!(u_from_f(&bad, 3).is_err());
    }

    #[test]
    fn inconsistent_sequence_is_rejected() {
        // u_2 = 0 after u_1 = 1 forces f_2 = -1
        let u = RenewalProbabilities::from_values(vec![1.0, 0.0]).unwrap();
        assert!(matches!(f_from_u(&u), Err(Error::InconsistentSequence(_))));
        // f = (0.5, 0.65): partial sum above one
        let u = RenewalProbabilities::from_values(vec![0.5, 0.9]).unwrap();
        assert!(matches!(f_from_u(&u), Err(Error::InconsistentSequence(_))));
    }

    #[test]
    fn classify_examples() {
        let c = classify(&geometric(0.5, 1.0), 100).unwrap();
        assert_eq!(c.kind, RecurrenceKind::PositiveRecurrent);
        assert_eq!(c.mu, 2.0);
        assert!(c.evidence.authoritative);

        let c = classify(&geometric(0.5, 0.9), 100).unwrap();
        assert_eq!(c.kind, RecurrenceKind::Transient);

        // numeric prefixes are flagged
        let c = classify(
            &FirstRenewalDistribution::from_prefix(vec![0.25, 0.75]).unwrap(),
            10,
        )
        .unwrap();
        assert_eq!(c.kind, RecurrenceKind::PositiveRecurrent);
        assert_abs_diff_eq!(c.mu, 1.75, epsilon = 1e-15);
        assert!(!c.evidence.authoritative);
        assert!(!c.evidence.undecided);

        let c = classify(
            &FirstRenewalDistribution::from_prefix(vec![0.5, 0.25]).unwrap(),
            10,
        )
        .unwrap();
        assert!(c.evidence.undecided);
        assert_abs_diff_eq!(c.evidence.tail_mass_bound, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn sampling_certain_renewals() {
        let f = FirstRenewalDistribution::from_prefix(vec![1.0]).unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(sample_renewals(&f, 4, &mut rng).unwrap(), vec![true; 4]);
        }
    }

    #[test]
    fn sampled_count_matches_expected_renewals() {
        let f = geometric(0.5, 1.0);
        let n = 10_000;
        let sampler = RenewalSampler::new(&f, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let counts: Vec<f64> = (0..1000)
            .map(|_| sampler.sample(&mut rng).iter().filter(|&&d| d).count() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let var =
            counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
        let se = (var / counts.len() as f64).sqrt();
        let target = u_from_f(&f, n).unwrap().total_expected_renewals();
        assert_abs_diff_eq!(target, 5000.0, epsilon = 1e-9);
        assert!(
            (mean - target).abs() <= 3.0 * se,
            "mean {mean} target {target} se {se}"
        );
    }

    #[test]
    fn defective_total_renewals() {
        let f = geometric(0.5, 0.9);
        // P(any renewal after step 2000) is negligible at this mass
        let sampler = RenewalSampler::new(&f, 2000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 20_000;
        let counts: Vec<f64> = (0..trials)
            .map(|_| sampler.sample(&mut rng).iter().filter(|&&d| d).count() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / trials as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - 9.0).abs() <= 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn transient_expected_renewals_converge() {
        let u = u_from_f(&geometric(0.5, 0.9), 10_000).unwrap();
        assert_abs_diff_eq!(u.total_expected_renewals(), 9.0, epsilon = 1e-3);
    }

    #[test]
    fn empirical_renewal_frequency_per_time() {
        let f = FirstRenewalDistribution::from_prefix(vec![0.2, 0.5, 0.3]).unwrap();
        let n = 12;
        let u = u_from_f(&f, n).unwrap();
        let sampler = RenewalSampler::new(&f, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let paths = 20_000;
        let mut hits = vec![0usize; n];
        for _ in 0..paths {
            for (h, d) in hits.iter_mut().zip(sampler.sample(&mut rng)) {
                *h += d as usize;
            }
        }
        for k in 1..=n {
            let p = u.u(k);
            let freq = hits[k - 1] as f64 / paths as f64;
            let se = (p * (1.0 - p) / paths as f64).sqrt();
            assert!((freq - p).abs() <= 4.0 * se, "n={k} freq {freq} u {p}");
        }
    }

    #[test]
    fn cumulative_is_monotone_and_bounded() {
        let f = FirstRenewalDistribution::from_prefix(vec![0.1, 0.0, 0.6, 0.2]).unwrap();
        let u = u_from_f(&f, 200).unwrap();
        let c = u.cumulative();
        assert!(c.windows(2).all(|w| w[1] >= w[0]));
        assert!(c.iter().enumerate().all(|(i, &x)| x <= (i + 1) as f64));
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..37).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..37).map(|i| (i as f64 * 0.3).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert_abs_diff_eq!(dot(&a, &b), naive, epsilon = 1e-12);
    }
}
