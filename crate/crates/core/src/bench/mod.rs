//! Scaling benchmarks: generate instances, canonicalize, time solves and
//! operator multiplies under either backend, and fit log-log slopes.
//!
//! Every measurement discards one warm-up run and reports the median of
//! three timed runs on the monotonic clock. Multiply timings repeat one
//! forward and one adjoint product until the batch is long enough to time.

mod gen;
#[cfg(test)]
mod tests;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::canon::{canonicalize, ConeProgram};
use crate::error::{Error, Result};
use crate::expr::Opr;
use crate::solver::{solve_with, DagOperator, EmptyOperator, LinearOperator, SolverOptions};

pub use gen::{
    deconv_data, deconv_spec, gaussian_kernel, gen_deconv, gen_sylvester, sylvester_data, sylvester_spec, DeconvData,
    SylvesterData, KERNEL_FLOOR, SPIKES, SYLVESTER_K,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Deconv,
    Sylvester,
}

impl Problem {
    /// The instance for size parameter `size` (`n` for deconvolution, `q`
    /// for Sylvester LPs).
    pub fn generate(self, size: usize, seed: u64) -> Result<Opr> {
        match self {
            Problem::Deconv => gen_deconv(size, seed),
            Problem::Sylvester => gen_sylvester(size, seed),
        }
    }

    /// Number of scalar variables for size parameter `size`.
    pub fn variable_size(self, size: usize) -> usize {
        match self {
            Problem::Deconv => size,
            Problem::Sylvester => SYLVESTER_K * size * size,
        }
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deconv" => Ok(Problem::Deconv),
            "sylvester" => Ok(Problem::Sylvester),
            _ => Err(Error::arg(format!("unknown problem {s}"))),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::Deconv => "deconv",
            Problem::Sylvester => "sylvester",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// The canonicalized FAO DAG.
    Matfree,
    /// The explicit sparse constraint matrix.
    SparseOracle,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matfree" => Ok(Backend::Matfree),
            "sparse" | "sparse-oracle" => Ok(Backend::SparseOracle),
            _ => Err(Error::arg(format!("unknown backend {s}"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Matfree => "matfree",
            Backend::SparseOracle => "sparse-oracle",
        })
    }
}

/// One CSV row: averages over seeds for one size. Solve columns are empty
/// when solving was skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub problem: Problem,
    pub n: usize,
    pub backend: Backend,
    pub solve_seconds: Option<f64>,
    pub multiply_seconds: f64,
    pub iterations: Option<usize>,
    pub objective: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchFailure {
    pub size: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub failures: Vec<BenchFailure>,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub solver: SolverOptions,
    /// Time full solves as well as multiplies.
    pub solve: bool,
    /// Shortest batch of multiplies worth timing.
    pub min_batch: Duration,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            solver: SolverOptions::with_tolerance(1e-3, 1e-3),
            solve: true,
            min_batch: Duration::from_millis(10),
        }
    }
}

/// Median of three timed runs after one discarded warm-up.
fn median_of_3<T>(mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    f()?;
    let mut times = [0.0; 3];
    let mut last = None;
    for t in &mut times {
        let start = Instant::now();
        let out = f()?;
        *t = start.elapsed().as_secs_f64();
        last = Some(out);
    }
    times.sort_by(f64::total_cmp);
    Ok((times[1], last.expect("three runs")))
}

/// Seconds for one forward plus one adjoint product.
pub fn time_multiply(op: &mut dyn LinearOperator, min_batch: Duration) -> Result<f64> {
    let x: Vec<f64> = (0..op.cols()).map(|i| ((i % 7) as f64 - 3.0) / 3.0).collect();
    let mut y = vec![0.0; op.rows()];
    let mut z = vec![0.0; op.cols()];
    let mut once = |op: &mut dyn LinearOperator| {
        op.forward(&x, &mut y);
        op.adjoint(&y, &mut z);
    };
    // Batch size that takes at least `min_batch`.
    let mut reps = 1usize;
    loop {
        let start = Instant::now();
        for _ in 0..reps {
            once(op);
        }
        if start.elapsed() >= min_batch || reps >= 1 << 24 {
            break;
        }
        reps *= 2;
    }
    let (t, _) = median_of_3(|| {
        for _ in 0..reps {
            once(op);
        }
        Ok(())
    })?;
    Ok(t / reps as f64)
}

struct Measurement {
    multiply: f64,
    solve: Option<(f64, usize, f64)>,
}

fn measure(cp: &ConeProgram, backend: Backend, config: &BenchConfig) -> Result<Measurement> {
    let mut op: Box<dyn LinearOperator> = match (backend, &cp.g) {
        (_, None) => Box::new(EmptyOperator(cp.n())),
        (Backend::Matfree, Some(g)) => {
            let mut op = DagOperator::new(g)?;
            op.set_threads(config.solver.threads);
            Box::new(op)
        }
        (Backend::SparseOracle, Some(_)) => Box::new(cp.oracle_matrix()?),
    };
    let multiply = time_multiply(op.as_mut(), config.min_batch)?;
    let solve = if config.solve {
        let (t, sol) = median_of_3(|| solve_with(op.as_mut(), cp, &config.solver))?;
        Some((t, sol.iterations, sol.objective))
    } else {
        None
    };
    Ok(Measurement { multiply, solve })
}

/// Runs `problem` at each size parameter, averaging over `seeds`. A failed
/// instance is reported in `failures`; a size with no successful seed gets
/// no record.
pub fn run_bench(
    problem: Problem,
    sizes: &[usize],
    seeds: &[u64],
    backend: Backend,
    config: &BenchConfig,
) -> BenchReport {
    let mut report = BenchReport::default();
    if seeds.is_empty() {
        return report;
    }
    for &size in sizes {
        let mut ok = Vec::new();
        for &seed in seeds {
            let m = problem
                .generate(size, seed)
                .and_then(|p| canonicalize(&p))
                .and_then(|cp| measure(&cp, backend, config));
            match m {
                Ok(m) => ok.push(m),
                Err(e) => report.failures.push(BenchFailure {
                    size,
                    seed,
                    message: e.to_string(),
                }),
            }
        }
        if ok.is_empty() {
            continue;
        }
        let k = ok.len() as f64;
        let solves: Vec<(f64, usize, f64)> = ok.iter().filter_map(|m| m.solve).collect();
        let (solve_seconds, iterations, objective) = if solves.is_empty() {
            (None, None, None)
        } else {
            let s = solves.len() as f64;
            (
                Some(solves.iter().map(|v| v.0).sum::<f64>() / s),
                Some((solves.iter().map(|v| v.1 as f64).sum::<f64>() / s).round() as usize),
                Some(solves.iter().map(|v| v.2).sum::<f64>() / s),
            )
        };
        report.records.push(BenchRecord {
            problem,
            n: problem.variable_size(size),
            backend,
            solve_seconds,
            multiply_seconds: ok.iter().map(|m| m.multiply).sum::<f64>() / k,
            iterations,
            objective,
        });
    }
    report
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::arg(format!(
            "slope fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::arg("slope fit needs positive sizes and times"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::arg("slope fit needs at least two distinct sizes"));
    }
    Ok(sxy / sxx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Timing {
    Solve,
    Multiply,
}

/// Slope of the chosen timing against `n`; records without that timing
/// are skipped.
pub fn records_slope(records: &[BenchRecord], timing: Timing) -> Result<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| {
            let t = match timing {
                Timing::Solve => r.solve_seconds?,
                Timing::Multiply => r.multiply_seconds,
            };
            Some((r.n as f64, t))
        })
        .collect();
    fit_slope(&pts)
}

pub fn write_csv(records: &[BenchRecord], out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(input: impl Read) -> Result<Vec<BenchRecord>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::Schema(format!("CSV header must be {}", CSV_HEADER.join(","))));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub const CSV_HEADER: [&str; 7] = [
    "problem",
    "n",
    "backend",
    "solve_seconds",
    "multiply_seconds",
    "iterations",
    "objective",
];
