//! Observed sequences: the merged coin tosses `Y` and the two-distribution
//! samples `V`, both switched by a renewal indicator sequence.
//!
//! Models hold the unknown parameter (`theta` or `delta`) for simulation only.
//! Estimators take [`L2Known`] or nothing at all, never the model itself.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Coin,
    L2,
}

/// Fair coin off-renewal, coin with head probability `1/2 + theta` at renewals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinModel {
    theta: f64,
}

impl CoinModel {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta.abs() <= 0.5) {
            return Err(Error::InvalidModel(format!(
                "theta = {theta} must lie in [-1/2, 1/2]"
            )));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Gaussian,
    /// Uniform on the bounds when the branch mean is centred, otherwise the
    /// scaled beta law on the same bounds with the requested mean and variance.
    UniformBounded,
    /// Two-point law on `{a, b}`.
    BernoulliScaled,
}

/// The parts of the L2 model an estimator is allowed to see.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Known {
    /// Base mean `M`.
    pub mean: f64,
    pub sigma_w: f64,
    pub bounds: Option<(f64, f64)>,
    pub shape: Shape,
}

impl L2Known {
    pub fn range_width(&self) -> Option<f64> {
        self.bounds.map(|(a, b)| b - a)
    }
}

/// `W` with mean `M` off-renewal, `W'` with mean `M + delta` at renewals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Model {
    known: L2Known,
    delta: f64,
}

#[derive(Debug, Clone, Copy)]
enum Branch {
    Gaussian { mean: f64 },
    Beta { a: f64, width: f64, law: Beta<f64> },
    TwoPoint { a: f64, width: f64, q: f64 },
}

impl L2Model {
    pub fn new(
        mean: f64,
        delta: f64,
        sigma_w: f64,
        bounds: Option<(f64, f64)>,
        shape: Shape,
    ) -> Result<Self> {
        if !mean.is_finite() || !delta.is_finite() {
            return Err(Error::InvalidModel("mean and delta must be finite".into()));
        }
        if !(sigma_w > 0.0 && sigma_w.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "sigma_w = {sigma_w} must be positive"
            )));
        }
        if let Some((a, b)) = bounds {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidModel(format!("bounds ({a}, {b}) need a < b")));
            }
        }
        let model = Self {
            known: L2Known {
                mean,
                sigma_w,
                bounds,
                shape,
            },
            delta,
        };
        model.branch(false)?;
        model.branch(true)?;
        Ok(model)
    }

    pub fn known(&self) -> L2Known {
        self.known
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn branch(&self, at_renewal: bool) -> Result<Branch> {
        let k = &self.known;
        let mean = k.mean + if at_renewal { self.delta } else { 0.0 };
        let which = if at_renewal { "W'" } else { "W" };
        match (k.shape, k.bounds) {
            (Shape::Gaussian, None) => Ok(Branch::Gaussian { mean }),
            (Shape::Gaussian, Some(_)) => Err(Error::InvalidModel(
                "gaussian shape is unbounded; drop the bounds".into(),
            )),
            (_, None) => Err(Error::InvalidModel(format!(
                "{:?} shape needs bounds",
                k.shape
            ))),
            (Shape::UniformBounded, Some((a, b))) => {
                let width = b - a;
                let m = (mean - a) / width;
                let v = (k.sigma_w / width).powi(2);
                if !(m > 0.0 && m < 1.0 && v < m * (1.0 - m)) {
                    return Err(Error::InvalidModel(format!(
                        "{which}: no law on [{a}, {b}] has mean {mean} and standard deviation {}",
                        k.sigma_w
                    )));
                }
                let nu = m * (1.0 - m) / v - 1.0;
                let law = Beta::new(m * nu, (1.0 - m) * nu)
                    .map_err(|e| Error::InvalidModel(format!("{which}: {e}")))?;
                Ok(Branch::Beta { a, width, law })
            }
            (Shape::BernoulliScaled, Some((a, b))) => {
                let width = b - a;
                let q = (mean - a) / width;
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::InvalidModel(format!(
                        "{which}: mean {mean} outside [{a}, {b}]"
                    )));
                }
                if !at_renewal {
                    let sd = width * (q * (1.0 - q)).sqrt();
                    if (sd - k.sigma_w).abs() > 1e-9 {
                        return Err(Error::InvalidModel(format!(
                            "two-point law on [{a}, {b}] with mean {mean} has standard deviation {sd}, not {}",
                            k.sigma_w
                        )));
                    }
                }
                Ok(Branch::TwoPoint { a, width, q })
            }
        }
    }
}

impl Branch {
    fn draw<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> f64 {
        match *self {
            Branch::Gaussian { mean } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sigma * z
            }
            Branch::Beta { a, width, law } => a + width * law.sample(rng),
            Branch::TwoPoint { a, width, q } => {
                if rng.random_bool(q) {
                    a + width
                } else {
                    a
                }
            }
        }
    }
}

/// One observed sequence together with the renewal path that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRun {
    pub values: Vec<f64>,
    /// Retained for oracle checks; estimators never read it.
    pub delta_seq: Vec<bool>,
    pub model_tag: ModelTag,
    pub sample_mean: f64,
}

impl ObservationRun {
    fn new(values: Vec<f64>, delta_seq: Vec<bool>, model_tag: ModelTag) -> Self {
        let sample_mean = mean(&values);
        Self {
            values,
            delta_seq,
            model_tag,
            sample_mean,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Write `n,value` rows, or `n,delta,value` when `oracle` is set.
    pub fn write_csv<W: Write>(&self, mut w: W, oracle: bool) -> std::io::Result<()> {
        if oracle {
            w.write_all(b"n,delta,value\n")?;
            for (i, (v, d)) in self.values.iter().zip(&self.delta_seq).enumerate() {
                writeln!(w, "{},{},{}", i + 1, *d as u8, v)?;
            }
        } else {
            w.write_all(b"n,value\n")?;
            for (i, v) in self.values.iter().enumerate() {
                writeln!(w, "{},{}", i + 1, v)?;
            }
        }
        Ok(())
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Read the `value` column of an observation CSV. Any `delta` column is ignored.
pub fn read_values_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Malformed(e.to_string()))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h == "value")
        .ok_or_else(|| Error::Malformed("missing `value` column".into()))?;
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Malformed(e.to_string()))?;
        let field = record
            .get(col)
            .ok_or_else(|| Error::Malformed(format!("row {} has no value field", i + 1)))?;
        let v: f64 = field
            .parse()
            .map_err(|_| Error::Malformed(format!("row {}: `{field}` is not a number", i + 1)))?;
        if !v.is_finite() {
            return Err(Error::Malformed(format!("row {}: non-finite value", i + 1)));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::Malformed("no observations".into()));
    }
    Ok(values)
}

/// `Y_n = X_n` (fair) if `delta_n = 0`, `X'_n` (head probability `1/2 + theta`) if `delta_n = 1`.
pub fn sample_coin_run<R: Rng + ?Sized>(
    delta_seq: &[bool],
    model: &CoinModel,
    rng: &mut R,
) -> ObservationRun {
    let biased = 0.5 + model.theta;
    let values = delta_seq
        .iter()
        .map(|&d| {
            let p = if d { biased } else { 0.5 };
            if rng.random_bool(p) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    ObservationRun::new(values, delta_seq.to_vec(), ModelTag::Coin)
}

/// `V_n = W_n` if `delta_n = 0`, `W'_n` if `delta_n = 1`.
pub fn sample_l2_run<R: Rng + ?Sized>(
    delta_seq: &[bool],
    model: &L2Model,
    rng: &mut R,
) -> ObservationRun {
    let base = model.branch(false).expect("validated at construction");
    let shifted = model.branch(true).expect("validated at construction");
    let sigma = model.known.sigma_w;
    let values = delta_seq
        .iter()
        .map(|&d| {
            if d {
                shifted.draw(sigma, rng)
            } else {
                base.draw(sigma, rng)
            }
        })
        .collect();
    ObservationRun::new(values, delta_seq.to_vec(), ModelTag::L2)
}

/// `E(mean) = theta U_N / N + 1/2` (coin) or `delta U_N / N + M` (L2).
pub fn theoretical_mean(
    tag: ModelTag,
    theta_or_delta: f64,
    expected_renewals: f64,
    n: usize,
    base_mean: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    if !(0.0..=n as f64).contains(&expected_renewals) {
        return Err(Error::InvalidParameter(format!(
            "U_N = {expected_renewals} outside [0, {n}]"
        )));
    }
    let fraction = expected_renewals / n as f64;
    Ok(match tag {
        ModelTag::Coin => theta_or_delta * fraction + 0.5,
        ModelTag::L2 => theta_or_delta * fraction + base_mean,
    })
}
