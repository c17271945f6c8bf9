use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use renewal_bias as core;
use renewal_bias::experiments::with_threads;
use renewal_bias::{EpsilonRule, ExperimentConfig, Method, RenewalFamily};

create_exception!(renewal_bias, RenewalBiasError, PyValueError);
create_exception!(renewal_bias, NonIdentifiableError, RenewalBiasError);
create_exception!(renewal_bias, DivergentError, RenewalBiasError);

fn to_py(err: core::Error) -> PyErr {
    match err {
        core::Error::NonIdentifiable => NonIdentifiableError::new_err(err.to_string()),
        core::Error::Divergent(_) => DivergentError::new_err(err.to_string()),
        _ => RenewalBiasError::new_err(err.to_string()),
    }
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn value_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text =
        serde_json::to_string(value).map_err(|e| RenewalBiasError::new_err(e.to_string()))?;
    json_to_py(py, &text)
}

fn rule(method: &str, gamma: f64) -> PyResult<EpsilonRule> {
    let method: Method = method.parse().map_err(to_py)?;
    EpsilonRule::coin(method, gamma).map_err(to_py)
}

/// A named renewal family, e.g. `Family("srw_z")` or `Family("bernoulli", p=0.3)`.
#[pyclass(frozen, name = "Family", module = "renewal_bias")]
pub struct Family {
    inner: RenewalFamily,
}

#[pymethods]
impl Family {
    #[new]
    #[pyo3(signature = (name, **params))]
    fn new(name: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let params: BTreeMap<String, f64> = match params {
            Some(d) => d.extract()?,
            None => BTreeMap::new(),
        };
        Ok(Self {
            inner: core::family(name, &params).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn parameters(&self) -> BTreeMap<String, f64> {
        self.inner.parameters().clone()
    }

    /// `"positive-recurrent"`, `"null-recurrent"` or `"transient"`.
    #[getter]
    fn kind(&self) -> String {
        self.inner.recurrence_kind().to_string()
    }

    #[getter]
    fn mean_recurrence_time(&self) -> f64 {
        self.inner.mean_recurrence_time()
    }

    #[getter]
    fn growth(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        value_to_py(py, &self.inner.growth())
    }

    /// `u_1..u_n`.
    fn u(&self, n: usize) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .renewal_probabilities(n)
            .map_err(to_py)?
            .values()
            .to_vec())
    }

    /// `U_1..U_n`.
    fn cumulative(&self, n: usize) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .renewal_probabilities(n)
            .map_err(to_py)?
            .cumulative()
            .to_vec())
    }

    /// `f_1..f_n`.
    fn f_prefix(&self, n: usize) -> PyResult<Vec<f64>> {
        self.inner.first_renewal().prefix(n).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Family({:?}, {:?})",
            self.inner.name(),
            self.inner.parameters()
        )
    }
}

#[pyclass(frozen, name = "IntervalEstimate", module = "renewal_bias")]
pub struct Interval {
    inner: core::IntervalEstimate,
}

#[pymethods]
impl Interval {
    #[getter]
    fn lower(&self) -> f64 {
        self.inner.lower
    }
    #[getter]
    fn upper(&self) -> f64 {
        self.inner.upper
    }
    #[getter]
    fn point(&self) -> f64 {
        self.inner.point
    }
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }
    #[getter]
    fn k(&self) -> f64 {
        self.inner.k
    }
    #[getter]
    fn corrected(&self) -> bool {
        self.inner.corrected
    }
    #[getter]
    fn expected_renewals(&self) -> f64 {
        self.inner.expected_renewals
    }
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }
    #[getter]
    fn outside_feasible(&self) -> bool {
        self.inner.outside_feasible
    }

    fn width(&self) -> f64 {
        self.inner.width()
    }

    fn __contains__(&self, value: f64) -> bool {
        self.inner.contains(value)
    }

    /// The flat record as a dict.
    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        value_to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "IntervalEstimate(lower={}, upper={}, point={}, method={}, N={})",
            self.inner.lower, self.inner.upper, self.inner.point, self.inner.method, self.inner.n
        )
    }
}

/// Renewal probabilities `u_1..u_N` from `f_1..f_N`.
#[pyfunction]
fn u_from_f(f: Vec<f64>) -> PyResult<Vec<f64>> {
    let n = f.len();
    let law = core::FirstRenewalDistribution::from_prefix(f).map_err(to_py)?;
    Ok(core::u_from_f(&law, n).map_err(to_py)?.values().to_vec())
}

/// First-renewal probabilities `f_1..f_N` from `u_1..u_N`.
#[pyfunction]
fn f_from_u(u: Vec<f64>) -> PyResult<Vec<f64>> {
    let n = u.len();
    let probs = core::RenewalProbabilities::from_values(u).map_err(to_py)?;
    core::f_from_u(&probs)
        .map_err(to_py)?
        .prefix(n)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (n, method = "hoeffding", gamma = 0.95, sigma = 0.5, range_width = Some(1.0)))]
fn epsilon(
    n: usize,
    method: &str,
    gamma: f64,
    sigma: f64,
    range_width: Option<f64>,
) -> PyResult<f64> {
    let method: Method = method.parse().map_err(to_py)?;
    let rule = EpsilonRule::new(method, gamma, sigma, range_width).map_err(to_py)?;
    rule.epsilon(n).map_err(to_py)
}

/// Interval for the hidden parameter. The defaults describe the coin model.
#[pyfunction]
#[pyo3(signature = (
    sample_mean, n, expected_renewals, baseline = 0.5, method = "hoeffding", gamma = 0.95,
    sigma = 0.5, range_width = Some(1.0)
))]
#[allow(clippy::too_many_arguments)]
fn confidence_interval(
    sample_mean: f64,
    n: usize,
    expected_renewals: f64,
    baseline: f64,
    method: &str,
    gamma: f64,
    sigma: f64,
    range_width: Option<f64>,
) -> PyResult<Interval> {
    let method: Method = method.parse().map_err(to_py)?;
    let rule = EpsilonRule::new(method, gamma, sigma, range_width).map_err(to_py)?;
    let inner = core::confidence_interval(sample_mean, n, expected_renewals, baseline, &rule)
        .map_err(to_py)?;
    Ok(Interval { inner })
}

#[pyfunction]
fn corrected_interval(estimate: &Interval, k: f64) -> PyResult<Interval> {
    Ok(Interval {
        inner: core::corrected_interval(&estimate.inner, k).map_err(to_py)?,
    })
}

/// Limit of `eps N / U_N` for the coin rule; `inf` when it diverges.
#[pyfunction]
#[pyo3(signature = (family, method = "hoeffding", gamma = 0.95))]
fn correction_k(family: &Family, method: &str, gamma: f64) -> PyResult<f64> {
    core::correction_k(&family.inner, &rule(method, gamma)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (family, n, seed = 0))]
fn sample_renewals(family: &Family, n: usize, seed: u64) -> PyResult<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    core::sample_renewals(family.inner.first_renewal(), n, &mut rng).map_err(to_py)
}

/// Coin observations along a renewal path. Returns `(values, sample_mean)`.
#[pyfunction]
#[pyo3(signature = (delta, theta, seed = 0))]
fn sample_coin_run(delta: Vec<bool>, theta: f64, seed: u64) -> PyResult<(Vec<f64>, f64)> {
    let model = core::CoinModel::new(theta).map_err(to_py)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run = core::sample_coin_run(&delta, &model, &mut rng);
    Ok((run.values, run.sample_mean))
}

/// Run an experiment from its JSON config and return the aggregate document.
#[pyfunction]
#[pyo3(signature = (config, threads = None))]
fn run_sweep(py: Python<'_>, config: &str, threads: Option<usize>) -> PyResult<Py<PyAny>> {
    let cfg: ExperimentConfig =
        serde_json::from_str(config).map_err(|e| RenewalBiasError::new_err(e.to_string()))?;
    let result = py
        .detach(|| with_threads(threads, || core::run_convergence_sweep(&cfg)))
        .map_err(to_py)?
        .map_err(to_py)?;
    value_to_py(py, &result.aggregate_json())
}

/// Recurrence class, growth fit and verdict over the decades up to `n_max`.
#[pyfunction]
#[pyo3(signature = (family, n_max = 100_000, method = "hoeffding", gamma = 0.95))]
fn classify(
    py: Python<'_>,
    family: &Family,
    n_max: usize,
    method: &str,
    gamma: f64,
) -> PyResult<Py<PyAny>> {
    let horizons: Vec<usize> = [n_max / 100, n_max / 10, n_max]
        .into_iter()
        .filter(|&n| n > 0)
        .collect();
    let rule = rule(method, gamma)?;
    let report = core::run_condition_classifier(&family.inner, &horizons, &rule).map_err(to_py)?;
    value_to_py(py, &report)
}

#[pymodule]
#[pyo3(name = "renewal_bias")]
pub fn renewal_bias_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("RenewalBiasError", py.get_type::<RenewalBiasError>())?;
    m.add(
        "NonIdentifiableError",
        py.get_type::<NonIdentifiableError>(),
    )?;
    m.add("DivergentError", py.get_type::<DivergentError>())?;
    m.add("FAMILY_NAMES", core::families::FAMILY_NAMES.to_vec())?;
    m.add_class::<Family>()?;
    m.add_class::<Interval>()?;
    m.add_function(wrap_pyfunction!(u_from_f, m)?)?;
    m.add_function(wrap_pyfunction!(f_from_u, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_interval, m)?)?;
    m.add_function(wrap_pyfunction!(corrected_interval, m)?)?;
    m.add_function(wrap_pyfunction!(correction_k, m)?)?;
    m.add_function(wrap_pyfunction!(sample_renewals, m)?)?;
    m.add_function(wrap_pyfunction!(sample_coin_run, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    Ok(())
}
