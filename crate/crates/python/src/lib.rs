//! Python bindings: graphs, MET matrices, centrality, point-pattern datasets and training.

use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pan_core::centrality::Measure;
use pan_core::cli::measure_values;
use pan_core::dataio::{self, Task};
use pan_core::graph::{CsrGraph, Label};
use pan_core::met::{self, NormMode, SeriesWeights};
use pan_core::pointpattern::{generate_dataset, GenerateConfig, PatternKind, SizeDistribution};
use pan_core::trainer::{run_experiment, ExperimentConfig};
use pan_core::PanError;

fn to_py(e: PanError) -> PyErr {
    match e {
        PanError::InvalidArgument(_)
        | PanError::Config(_)
        | PanError::ShapeMismatch { .. }
        | PanError::IndexOutOfRange { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Undirected graph with node features and a label.
#[pyclass(name = "Graph", module = "pan_py", from_py_object)]
#[derive(Clone)]
pub struct PyGraph {
    inner: CsrGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (edges, num_nodes, features=None, label=0))]
    fn new(edges: Vec<(usize, usize)>, num_nodes: usize, features: Option<Vec<Vec<f64>>>, label: usize) -> PyResult<Self> {
        let mut g = CsrGraph::from_pairs(&edges, num_nodes).map_err(to_py)?;
        if let Some(f) = features {
            let d = f.first().map_or(0, |r| r.len());
            if f.iter().any(|r| r.len() != d) {
                return Err(PyValueError::new_err("feature rows must have equal length"));
            }
            let x = Array2::from_shape_vec((f.len(), d), f.into_iter().flatten().collect())
                .map_err(|e| PyValueError::new_err(e.to_string()))?;
            g = g.with_features(x).map_err(to_py)?;
        }
        Ok(Self {
            inner: g.with_label(Label::Class(label)),
        })
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn label(&self) -> f64 {
        self.inner.label().value()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner
            .adj()
            .to_edge_list()
            .into_iter()
            .filter(|e| e.0 < e.1)
            .map(|e| (e.0, e.1))
            .collect()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        rows(self.inner.features())
    }

    fn __repr__(&self) -> String {
        format!("Graph(num_nodes={}, num_edges={})", self.num_nodes(), self.num_edges())
    }
}

/// MET matrix of `graph` for path weights `weights` (length L+1); returns `(M, Z, diag)`.
#[pyfunction]
#[pyo3(signature = (graph, weights, mode="sym"))]
fn met_matrix(graph: &PyGraph, weights: Vec<f64>, mode: &str) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    let w = SeriesWeights::from_weights(&weights).map_err(to_py)?;
    let mode = NormMode::parse(mode).map_err(to_py)?;
    let m = met::met_matrix(graph.inner.adj(), &w, mode).map_err(to_py)?;
    Ok((rows(&m.m), m.z.to_vec(), m.diag.to_vec()))
}

/// Number of length-`n` walks from `i` to `j`.
#[pyfunction]
fn path_count(graph: &PyGraph, i: usize, j: usize, n: usize) -> PyResult<u64> {
    met::path_count(graph.inner.adj(), i, j, n).map_err(|e| match e {
        PanError::IndexOutOfRange { .. } => PyIndexError::new_err(e.to_string()),
        other => to_py(other),
    })
}

/// Node values of a centrality measure (`dc`, `ec`, `sc`, `sc-exact`, `metdiag`, `metdiag-unnorm`).
#[pyfunction]
#[pyo3(signature = (graph, measure, cutoff=4, mode="sym"))]
fn centrality(graph: &PyGraph, measure: &str, cutoff: usize, mode: &str) -> PyResult<Vec<f64>> {
    let m = Measure::parse(measure).map_err(to_py)?;
    let mode = NormMode::parse(mode).map_err(to_py)?;
    measure_values(&graph.inner, m, &SeriesWeights::uniform(cutoff), mode, None).map_err(to_py)
}

/// A labeled graph collection, loadable from and savable to PANDS1 files.
#[pyclass(name = "Dataset", module = "pan_py")]
pub struct PyDataset {
    inner: dataio::Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: dataio::load_dataset(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dataio::save_dataset(&self.inner, &path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __getitem__(&self, i: isize) -> PyResult<PyGraph> {
        let n = self.inner.len() as isize;
        let k = if i < 0 { i + n } else { i };
        if k < 0 || k >= n {
            return Err(PyIndexError::new_err(format!("graph index {i} out of range")));
        }
        Ok(PyGraph {
            inner: self.inner.graphs[k as usize].clone(),
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn num_classes(&self) -> Option<usize> {
        match self.inner.task {
            Task::Classify(c) => Some(c),
            Task::Regress => None,
        }
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim
    }

    fn avg_nodes(&self) -> f64 {
        self.inner.avg_nodes()
    }

    fn avg_edges(&self) -> f64 {
        self.inner.avg_edges()
    }

    fn labels(&self) -> Vec<f64> {
        self.inner.graphs.iter().map(|g| g.label().value()).collect()
    }

    /// Point coordinates of graph `i`, if stored.
    fn positions(&self, i: usize) -> PyResult<Option<Vec<(f64, f64)>>> {
        match &self.inner.positions {
            None => Ok(None),
            Some(p) => p
                .get(i)
                .map(|pp| Some(pp.points.iter().map(|q| (q[0], q[1])).collect()))
                .ok_or_else(|| PyIndexError::new_err(format!("graph index {i} out of range"))),
        }
    }
}

/// Simulated HD / Poisson / RSA threshold-graph dataset, labels 0, 1, 2 in class-major order.
#[pyfunction]
#[pyo3(signature = (per_class, node_range=(100, 1000), phi_rsa=0.3, seed=0, sweeps=10_000, side_uniform=false))]
fn generate_pointpatterns(
    per_class: usize,
    node_range: (usize, usize),
    phi_rsa: f64,
    seed: u64,
    sweeps: usize,
    side_uniform: bool,
) -> PyResult<PyDataset> {
    let cfg = GenerateConfig {
        classes: vec![PatternKind::HardDisks, PatternKind::Poisson, PatternKind::Rsa],
        phi_rsa,
        graphs_per_class: per_class,
        node_range,
        seed,
        mc_sweeps: sweeps,
        size_distribution: if side_uniform {
            SizeDistribution::SideUniform
        } else {
            SizeDistribution::Uniform
        },
        ..Default::default()
    };
    let samples = generate_dataset(&cfg).map_err(to_py)?;
    let (graphs, patterns) = samples.into_iter().map(|s| (s.graph, s.pattern)).unzip();
    let ds = dataio::Dataset::new("pointpattern", graphs, Task::Classify(3))
        .and_then(|d| d.with_positions(patterns))
        .map_err(to_py)?;
    Ok(PyDataset { inner: ds })
}

/// Runs an experiment config file and returns the report as a JSON string.
#[pyfunction]
#[pyo3(signature = (config, overrides=Vec::new()))]
fn train(config: PathBuf, overrides: Vec<String>) -> PyResult<String> {
    let cfg = ExperimentConfig::from_file(&config, &overrides).map_err(to_py)?;
    let report = run_experiment(&cfg).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn pan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(met_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(path_count, m)?)?;
    m.add_function(wrap_pyfunction!(centrality, m)?)?;
    m.add_function(wrap_pyfunction!(generate_pointpatterns, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
