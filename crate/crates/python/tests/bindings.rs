use pyo3::ffi::c_str;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(renewal_bias_py::renewal_bias_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("rb", module).unwrap();
        f(py, &globals);
    });
}

#[test]
fn module_round_trips_and_intervals() {
    with_module(|py, globals| {
        py.run(
            c_str!(
                r#"
fam = rb.Family("bernoulli", p=0.5)
assert fam.kind == "positive-recurrent"
assert fam.cumulative(4) == [0.5, 1.0, 1.5, 2.0]
assert max(abs(a - b) for a, b in zip(rb.f_from_u(rb.u_from_f([0.5, 0.25])), [0.5, 0.25])) < 1e-15
est = rb.confidence_interval(0.65, 10000, 5000.0, method="chebyshev")
assert abs(est.point - 0.3) < 1e-12
assert est.to_dict()["N"] == 10000
fixed = rb.corrected_interval(est, 0.0)
assert fixed.corrected and fixed.k == 0.0
"#
            ),
            Some(globals),
            None,
        )
        .unwrap();
    });
}

#[test]
fn errors_map_to_python_exceptions() {
    with_module(|py, globals| {
        py.run(
            c_str!(
                r#"
for call, exc in [
    (lambda: rb.Family("nope"), rb.RenewalBiasError),
    (lambda: rb.Family("bernoulli", q=1.0), rb.RenewalBiasError),
    (lambda: rb.sample_coin_run([True], 0.7), rb.RenewalBiasError),
    (lambda: rb.confidence_interval(0.5, 10, 0.0), rb.NonIdentifiableError),
    (lambda: rb.correction_k(rb.Family("defective_geometric")), rb.DivergentError),
    (lambda: rb.epsilon(10, method="hoeffding", range_width=None), rb.RenewalBiasError),
]:
    try:
        call()
    except exc:
        pass
    else:
        raise AssertionError(call)
assert issubclass(rb.RenewalBiasError, ValueError)
"#
            ),
            Some(globals),
            None,
        )
        .unwrap();
    });
}
