//! Python bindings. Structured results are returned as JSON strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use galcoh::classifier::{classify_mod_p, classify_p_power, cross_check_with_cohomology};
use galcoh::cohomology::{h1, localization_kernel, GModule};
use galcoh::curves::{bundled_curve, count_points, CurveFacts, FpCurve};
use galcoh::matgroup::{closure_from_mats, Mat2, MatGroup};
use galcoh::modarith::RingSpec;
use galcoh::report::{summarize, table, TableOptions};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn group(p: u32, e: u32, generators: Vec<[i64; 4]>) -> PyResult<MatGroup> {
    let r = RingSpec::new(p, e).map_err(err)?;
    let gens: Vec<Mat2> = generators.iter().map(|g| g.map(|x| r.reduce(x))).collect();
    closure_from_mats(r, &gens).map_err(err)
}

/// Invariant factors of H^1(G, (Z/p^e)^2) for G generated by the given
/// matrices `[a, b, c, d]`.
#[pyfunction]
fn h1_invariants(p: u32, e: u32, generators: Vec<[i64; 4]>) -> PyResult<Vec<u64>> {
    let g = group(p, e, generators)?;
    Ok(h1(&g, GModule::natural(g.ring())).map_err(err)?.invariant_factors)
}

/// Invariant factors of the localization kernel.
#[pyfunction]
fn lker_invariants(p: u32, e: u32, generators: Vec<[i64; 4]>) -> PyResult<Vec<u64>> {
    let g = group(p, e, generators)?;
    Ok(localization_kernel(&g, GModule::natural(g.ring())).map_err(err)?.invariant_factors)
}

#[pyfunction]
fn group_order(p: u32, e: u32, generators: Vec<[i64; 4]>) -> PyResult<usize> {
    Ok(group(p, e, generators)?.order())
}

/// JSON `{"summary": ..., "rows": [...]}` for the level-2 table at `p`.
#[pyfunction]
#[pyo3(signature = (p, dim_m2=None, localization=false))]
fn table_json(py: Python<'_>, p: u32, dim_m2: Option<usize>, localization: bool) -> PyResult<String> {
    let opts = TableOptions { dim_m2, localization, ..Default::default() };
    let rows = py.detach(|| table(p, 2, &opts)).map_err(err)?;
    let summary = summarize(&rows);
    serde_json::to_string(&serde_json::json!({ "summary": summary, "rows": rows })).map_err(err)
}

/// `(N, a_ell, (n1, n2))` for a curve with integer a-invariants over F_ell.
#[pyfunction]
fn frobenius(a_invariants: [i64; 5], ell: u64) -> PyResult<(u64, i64, (u64, u64))> {
    let c = FpCurve::new(ell, a_invariants).map_err(err)?;
    let d = count_points(&c).map_err(err)?;
    Ok((d.n, d.a_ell, d.group_invariants))
}

fn facts(label_or_json: &str) -> PyResult<CurveFacts> {
    if label_or_json.trim_start().starts_with('{') {
        serde_json::from_str(label_or_json).map_err(err)
    } else {
        bundled_curve(label_or_json).ok_or_else(|| PyValueError::new_err(format!("unknown curve {label_or_json}")))
    }
}

/// Verdict JSON for a bundled label or a facts record given as JSON.
#[pyfunction]
#[pyo3(signature = (curve, p, level=1))]
fn classify(curve: &str, p: u64, level: u32) -> PyResult<String> {
    let f = facts(curve)?;
    let v = if level <= 1 { classify_mod_p(&f, p) } else { classify_p_power(&f, p) }.map_err(err)?;
    serde_json::to_string(&v).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (curve, p, level=1))]
fn cross_check(py: Python<'_>, curve: &str, p: u64, level: u32) -> PyResult<String> {
    let f = facts(curve)?;
    let c = py.detach(|| cross_check_with_cohomology(&f, p, level)).map_err(err)?;
    serde_json::to_string(&c).map_err(err)
}

#[pymodule]
fn galcoh_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(h1_invariants, m)?)?;
    m.add_function(wrap_pyfunction!(lker_invariants, m)?)?;
    m.add_function(wrap_pyfunction!(group_order, m)?)?;
    m.add_function(wrap_pyfunction!(table_json, m)?)?;
    m.add_function(wrap_pyfunction!(frobenius, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(cross_check, m)?)?;
    Ok(())
}
