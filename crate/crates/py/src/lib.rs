use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use matfree::bench::{self, Backend, BenchConfig, Problem as BenchProblem};
use matfree::solver::{solve_with, DagOperator, EmptyOperator, LinearOperator};
use matfree::{ConvVariant, DenseMatrix, Shape, SolverOptions, Status, Wavelet};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn shape_of(dims: Vec<usize>) -> PyResult<Shape> {
    Shape::new(dims).map_err(err)
}

fn matrix_of(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    DenseMatrix::from_rows(&rows).map_err(err)
}

/// A linear map with forward and adjoint evaluation.
#[pyclass(name = "Fao", frozen)]
struct PyFao(matfree::Fao);

#[pymethods]
impl PyFao {
    /// `variant` is "column", "row" or "circular".
    #[staticmethod]
    #[pyo3(signature = (kernel, n, variant = "column"))]
    fn conv(kernel: Vec<f64>, n: usize, variant: &str) -> PyResult<Self> {
        let v: ConvVariant = serde_json::from_value(serde_json::json!(variant)).map_err(err)?;
        matfree::Fao::conv(v, &kernel, Shape::vector(n)).map(PyFao).map_err(err)
    }

    #[staticmethod]
    fn dft(dims: Vec<usize>) -> PyResult<Self> {
        matfree::Fao::dft(shape_of(dims)?).map(PyFao).map_err(err)
    }

    /// `wavelet` is "haar" or "db2".
    #[staticmethod]
    #[pyo3(signature = (dims, levels, wavelet = "haar"))]
    fn dwt(dims: Vec<usize>, levels: usize, wavelet: &str) -> PyResult<Self> {
        let w = match wavelet {
            "haar" => Wavelet::Haar,
            "db2" => Wavelet::Db2,
            _ => return Err(err(format!("unknown wavelet {wavelet}"))),
        };
        matfree::Fao::dwt(levels, w, shape_of(dims)?).map(PyFao).map_err(err)
    }

    /// Dense matrix given as a list of rows.
    #[staticmethod]
    fn dense(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyFao(matfree::Fao::dense(matrix_of(rows)?)))
    }

    /// `X ↦ A X B`, acting on column-major `X`.
    #[staticmethod]
    fn matrix_product(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyFao(matfree::Fao::matrix_product(matrix_of(a)?, matrix_of(b)?)))
    }

    #[getter]
    fn in_len(&self) -> usize {
        self.0.in_len()
    }

    #[getter]
    fn out_len(&self) -> usize {
        self.0.out_len()
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.0.forward(&[&x]).map_err(err)?.concat())
    }

    fn adjoint(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.0.adjoint(&[&y]).map_err(err)?.concat())
    }

    fn __repr__(&self) -> String {
        format!("Fao({})", self.0.name())
    }
}

/// A convex problem in expression-DAG form.
#[pyclass(name = "Problem", frozen)]
struct PyProblem(matfree::Opr);

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        matfree::Opr::from_json(text).map(PyProblem).map_err(err)
    }

    /// Nonnegative deconvolution benchmark instance.
    #[staticmethod]
    #[pyo3(signature = (n, seed = 0))]
    fn deconv(n: usize, seed: u64) -> PyResult<Self> {
        bench::gen_deconv(n, seed).map(PyProblem).map_err(err)
    }

    /// Sylvester LP benchmark instance with `X ∈ R^{5q×q}`.
    #[staticmethod]
    #[pyo3(signature = (q, seed = 0))]
    fn sylvester(q: usize, seed: u64) -> PyResult<Self> {
        bench::gen_sylvester(q, seed).map(PyProblem).map_err(err)
    }

    #[getter]
    fn variables(&self) -> Vec<(String, Vec<usize>)> {
        self.0
            .variables
            .iter()
            .map(|(n, s)| (n.clone(), s.dims().to_vec()))
            .collect()
    }

    fn canonicalize(&self) -> PyResult<ConeProgram> {
        matfree::canonicalize(&self.0).map(ConeProgram).map_err(err)
    }
}

/// `minimize cᵀx + d subject to Ax + b ∈ K` with `A` kept as an FAO DAG.
#[pyclass(frozen)]
struct ConeProgram(matfree::ConeProgram);

impl ConeProgram {
    fn operator(&self, sparse: bool) -> PyResult<Box<dyn LinearOperator>> {
        Ok(match (&self.0.g, sparse) {
            (None, _) => Box::new(EmptyOperator(self.0.n())),
            (Some(_), true) => Box::new(self.0.oracle_matrix().map_err(err)?),
            (Some(g), false) => Box::new(DagOperator::new(g).map_err(err)?),
        })
    }
}

#[pymethods]
impl ConeProgram {
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.0.m()
    }

    #[getter]
    fn c(&self) -> Vec<f64> {
        self.0.c.clone()
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.0.b.clone()
    }

    #[getter]
    fn d(&self) -> f64 {
        self.0.d
    }

    /// `(kind, size)` per cone block.
    #[getter]
    fn cones(&self) -> Vec<(String, usize)> {
        self.0
            .cones
            .iter()
            .map(|c| (c.kind.name().to_string(), c.size))
            .collect()
    }

    /// JSON summary: sizes, cones, node and edge counts, memory plan.
    fn manifest(&self) -> PyResult<String> {
        serde_json::to_string(&self.0.manifest()).map_err(err)
    }

    /// `Ax`, or with `sparse=True` the same product through the explicit matrix.
    #[pyo3(signature = (x, sparse = false))]
    fn forward(&self, x: Vec<f64>, sparse: bool) -> PyResult<Vec<f64>> {
        if x.len() != self.0.n() {
            return Err(err(format!("expected {} entries, got {}", self.0.n(), x.len())));
        }
        let mut y = vec![0.0; self.0.m()];
        self.operator(sparse)?.forward(&x, &mut y);
        Ok(y)
    }

    /// `Aᵀy`.
    #[pyo3(signature = (y, sparse = false))]
    fn adjoint(&self, y: Vec<f64>, sparse: bool) -> PyResult<Vec<f64>> {
        if y.len() != self.0.m() {
            return Err(err(format!("expected {} entries, got {}", self.0.m(), y.len())));
        }
        let mut x = vec![0.0; self.0.n()];
        self.operator(sparse)?.adjoint(&y, &mut x);
        Ok(x)
    }

    #[pyo3(signature = (eps_abs = 1e-4, eps_rel = 1e-3, max_iters = 10_000, sparse = false))]
    fn solve(&self, eps_abs: f64, eps_rel: f64, max_iters: usize, sparse: bool) -> PyResult<Solution> {
        let opts = SolverOptions {
            max_iters,
            ..SolverOptions::with_tolerance(eps_abs, eps_rel)
        };
        let mut op = self.operator(sparse)?;
        let s = solve_with(op.as_mut(), &self.0, &opts).map_err(err)?;
        let values = self
            .0
            .var_index
            .iter()
            .map(|slot| (slot.name.clone(), s.x[slot.range()].to_vec()))
            .collect();
        Ok(Solution {
            x: s.x,
            values,
            objective: s.objective,
            status: match s.status {
                Status::Solved => "solved",
                Status::MaxIters => "max-iters",
            }
            .to_string(),
            iterations: s.iterations,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
        })
    }
}

#[pyclass(get_all, frozen)]
struct Solution {
    x: Vec<f64>,
    values: Vec<(String, Vec<f64>)>,
    objective: f64,
    status: String,
    iterations: usize,
    primal_residual: f64,
    dual_residual: f64,
}

#[pymethods]
impl Solution {
    fn value(&self, name: &str) -> PyResult<Vec<f64>> {
        self.values
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| err(format!("no variable {name}")))
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(status={}, objective={:.6e}, iterations={})",
            self.status, self.objective, self.iterations
        )
    }
}

/// Least-squares slope of `log t` against `log n`.
#[pyfunction]
fn fit_slope(points: Vec<(f64, f64)>) -> PyResult<f64> {
    bench::fit_slope(&points).map_err(err)
}

/// Runs a benchmark and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (problem, sizes, seeds = 1, backend = "matfree", tol = 1e-3, solve = true))]
fn run_bench(problem: &str, sizes: Vec<usize>, seeds: u64, backend: &str, tol: f64, solve: bool) -> PyResult<String> {
    let problem: BenchProblem = problem.parse().map_err(err)?;
    let backend: Backend = backend.parse().map_err(err)?;
    let config = BenchConfig {
        solver: SolverOptions::with_tolerance(tol, tol),
        solve,
        ..BenchConfig::default()
    };
    let seeds: Vec<u64> = (0..seeds).collect();
    let report = bench::run_bench(problem, &sizes, &seeds, backend, &config);
    let mut out = Vec::new();
    bench::write_csv(&report.records, &mut out).map_err(err)?;
    String::from_utf8(out).map_err(err)
}

#[pymodule]
fn matfree_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFao>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<ConeProgram>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(fit_slope, m)?)?;
    m.add_function(wrap_pyfunction!(run_bench, m)?)?;
    Ok(())
}
