//! Python bindings. Heavy calls release the GIL.

use std::collections::HashMap;
use std::path::PathBuf;

use esda_core::scoring::CompositeScoreConfig;
use esda_core::{
    bivariate_local_moran, build_contiguity, composite_score, global_bivariate_moran_inference,
    global_moran_inference, impute_missing, local_moran, parse_lattice, run_file, AttributeTable,
    ClusterClass, Contiguity, ErrorCategory, Inference, LisaOptions, LisaResult, MoranResult,
    RegionLattice, SpatialWeights,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(esda_engine, EngineError, PyException);
create_exception!(esda_engine, InputError, EngineError);
create_exception!(esda_engine, StatisticalError, EngineError);

fn to_py(e: esda_core::Error) -> PyErr {
    let msg = e.to_string();
    match e.category() {
        ErrorCategory::Input => InputError::new_err(msg),
        ErrorCategory::Statistical => StatisticalError::new_err(msg),
        ErrorCategory::Io => PyOSError::new_err(msg),
    }
}

fn inference(permutations: usize, seed: u64, exhaustive: bool) -> Inference {
    if exhaustive {
        Inference::Exhaustive
    } else {
        Inference::monte_carlo(permutations, seed)
    }
}

fn contiguity(rule: &str) -> PyResult<Contiguity> {
    match rule {
        "queen" => Ok(Contiguity::Queen),
        "rook" => Ok(Contiguity::Rook),
        other => Err(InputError::new_err(format!("unknown contiguity rule \"{other}\""))),
    }
}

/// Polygon regions parsed from a GeoJSON FeatureCollection.
#[pyclass(name = "Lattice", frozen)]
struct PyLattice {
    inner: RegionLattice,
}

#[pymethods]
impl PyLattice {
    #[staticmethod]
    #[pyo3(signature = (text, id_property = "region_id"))]
    fn from_geojson(text: &str, id_property: &str) -> PyResult<Self> {
        let inner = parse_lattice(text.as_bytes(), id_property).map_err(to_py)?;
        Ok(PyLattice { inner })
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Binary contiguity weights; call `row_standardize` before inference.
    #[pyo3(signature = (rule = "queen", snap_tolerance = 1e-7))]
    fn weights(&self, py: Python<'_>, rule: &str, snap_tolerance: f64) -> PyResult<PyWeights> {
        let rule = contiguity(rule)?;
        let inner = py
            .detach(|| build_contiguity(&self.inner, rule, snap_tolerance))
            .map_err(to_py)?;
        Ok(PyWeights { inner })
    }
}

#[pyclass(name = "Weights", frozen)]
struct PyWeights {
    inner: SpatialWeights,
}

#[pymethods]
impl PyWeights {
    #[staticmethod]
    fn from_edges(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        let inner = SpatialWeights::from_edge_list(n, &edges).map_err(to_py)?;
        Ok(PyWeights { inner })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        let inner = SpatialWeights::from_csv(text).map_err(to_py)?;
        Ok(PyWeights { inner })
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn row_standardize(&self) -> Self {
        PyWeights {
            inner: self.inner.row_standardize(),
        }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn s0(&self) -> f64 {
        self.inner.s0()
    }

    fn neighbors(&self, i: usize) -> PyResult<Vec<(usize, f64)>> {
        if i >= self.inner.n() {
            return Err(InputError::new_err(format!("region index {i} out of range")));
        }
        Ok(self.inner.neighbors(i).collect())
    }

    fn islands(&self) -> Vec<usize> {
        self.inner.islands()
    }
}

#[pyclass(name = "Moran", frozen, get_all)]
struct PyMoran {
    statistic: f64,
    expected: f64,
    pseudo_p: f64,
    z_sim: Option<f64>,
    permutations: usize,
    n_eff: usize,
}

impl From<MoranResult> for PyMoran {
    fn from(r: MoranResult) -> Self {
        PyMoran {
            statistic: r.statistic,
            expected: r.expected,
            pseudo_p: r.pseudo_p,
            z_sim: r.z_sim,
            permutations: r.permutations,
            n_eff: r.n_eff,
        }
    }
}

#[pymethods]
impl PyMoran {
    fn __repr__(&self) -> String {
        format!(
            "Moran(statistic={}, expected={}, pseudo_p={})",
            self.statistic, self.expected, self.pseudo_p
        )
    }
}

#[pyclass(name = "Lisa", frozen, get_all)]
struct PyLisa {
    local_i: Vec<Option<f64>>,
    pseudo_p: Vec<Option<f64>>,
    /// HH, LL, HL, LH, NS or UNDEF per region.
    clusters: Vec<String>,
    fdr_threshold: Option<f64>,
}

impl From<LisaResult> for PyLisa {
    fn from(r: LisaResult) -> Self {
        PyLisa {
            clusters: r.clusters.iter().map(|c| c.label().to_string()).collect(),
            local_i: r.local_i,
            pseudo_p: r.pseudo_p,
            fdr_threshold: r.fdr_threshold,
        }
    }
}

#[pymethods]
impl PyLisa {
    /// Regions per cluster label, every label present.
    fn counts<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        for class in ClusterClass::ALL {
            let n = self.clusters.iter().filter(|c| *c == class.label()).count();
            out.set_item(class.label(), n)?;
        }
        Ok(out)
    }
}

#[pyfunction]
#[pyo3(signature = (values, weights, permutations = 999, seed = 0, exhaustive = false))]
fn global_moran(
    py: Python<'_>,
    values: Vec<f64>,
    weights: &PyWeights,
    permutations: usize,
    seed: u64,
    exhaustive: bool,
) -> PyResult<PyMoran> {
    let inf = inference(permutations, seed, exhaustive);
    py.detach(|| global_moran_inference(&values, &weights.inner, inf))
        .map(PyMoran::from)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, y, weights, permutations = 999, seed = 0, exhaustive = false))]
fn global_bivariate_moran(
    py: Python<'_>,
    x: Vec<f64>,
    y: Vec<f64>,
    weights: &PyWeights,
    permutations: usize,
    seed: u64,
    exhaustive: bool,
) -> PyResult<PyMoran> {
    let inf = inference(permutations, seed, exhaustive);
    py.detach(|| global_bivariate_moran_inference(&x, &y, &weights.inner, inf))
        .map(PyMoran::from)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (values, weights, permutations = 999, seed = 0, alpha = 0.05, fdr = false, exhaustive = false))]
#[allow(clippy::too_many_arguments)]
fn lisa(
    py: Python<'_>,
    values: Vec<f64>,
    weights: &PyWeights,
    permutations: usize,
    seed: u64,
    alpha: f64,
    fdr: bool,
    exhaustive: bool,
) -> PyResult<PyLisa> {
    let mut options = LisaOptions::new(inference(permutations, seed, exhaustive), alpha);
    options.fdr = fdr;
    py.detach(|| local_moran(&values, &weights.inner, options))
        .map(PyLisa::from)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, y, weights, permutations = 999, seed = 0, alpha = 0.05, fdr = false, exhaustive = false))]
#[allow(clippy::too_many_arguments)]
fn bilisa(
    py: Python<'_>,
    x: Vec<f64>,
    y: Vec<f64>,
    weights: &PyWeights,
    permutations: usize,
    seed: u64,
    alpha: f64,
    fdr: bool,
    exhaustive: bool,
) -> PyResult<PyLisa> {
    let mut options = LisaOptions::new(inference(permutations, seed, exhaustive), alpha);
    options.fdr = fdr;
    py.detach(|| bivariate_local_moran(&x, &y, &weights.inner, options))
        .map(PyLisa::from)
        .map_err(to_py)
}

/// `(region, sweep, value, neighbors_used)`.
type AuditRow = (usize, usize, f64, usize);

/// Fills `None` entries with neighbor means. Returns the completed values
/// and `(region, sweep, value, neighbors_used)` for each filled entry.
#[pyfunction]
fn impute(
    values: Vec<Option<f64>>,
    weights: &PyWeights,
) -> PyResult<(Vec<f64>, Vec<AuditRow>)> {
    let result = impute_missing(&values, &weights.inner).map_err(to_py)?;
    let audit = result
        .imputed
        .iter()
        .map(|v| (v.region, v.sweep, v.value, v.neighbors_used))
        .collect();
    Ok((result.values, audit))
}

/// Composite score over the regions where `subset` is true (all when
/// omitted). Returns `(region_id, score, rank)` in rank order.
#[pyfunction]
#[pyo3(signature = (region_ids, columns, weights_text, subset = None))]
fn score(
    region_ids: Vec<String>,
    columns: HashMap<String, Vec<Option<f64>>>,
    weights_text: &str,
    subset: Option<Vec<bool>>,
) -> PyResult<Vec<(String, f64, usize)>> {
    let config = CompositeScoreConfig::parse(weights_text).map_err(to_py)?;
    let n = region_ids.len();
    let mut table = AttributeTable::new(region_ids);
    for entry in config.entries() {
        if let Some(column) = columns.get(&entry.feature) {
            table.insert(entry.feature.clone(), column.clone()).map_err(to_py)?;
        }
    }
    let subset = subset.unwrap_or_else(|| vec![true; n]);
    let report = composite_score(&table, &config, &subset).map_err(to_py)?;
    Ok(report
        .regions
        .into_iter()
        .map(|r| (r.region_id, r.score, r.rank))
        .collect())
}

/// Runs a TOML config and writes its artifacts. Returns the output
/// directory, written file names and config hash.
#[pyfunction]
fn run(py: Python<'_>, config_path: PathBuf) -> PyResult<(PathBuf, Vec<String>, String)> {
    let summary = py.detach(|| run_file(&config_path)).map_err(to_py)?;
    Ok((summary.output_dir, summary.files, summary.manifest.config_hash))
}

#[pymodule]
fn esda_engine(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("EngineError", py.get_type::<EngineError>())?;
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("StatisticalError", py.get_type::<StatisticalError>())?;
    m.add_class::<PyLattice>()?;
    m.add_class::<PyWeights>()?;
    m.add_class::<PyMoran>()?;
    m.add_class::<PyLisa>()?;
    m.add_function(wrap_pyfunction!(global_moran, m)?)?;
    m.add_function(wrap_pyfunction!(global_bivariate_moran, m)?)?;
    m.add_function(wrap_pyfunction!(lisa, m)?)?;
    m.add_function(wrap_pyfunction!(bilisa, m)?)?;
    m.add_function(wrap_pyfunction!(impute, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
