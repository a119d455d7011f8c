use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use matfree::bench::{self, records_slope, run_bench, Backend, BenchConfig, Problem, Timing};
use matfree::{canonicalize, solve, Opr, SolverOptions};

#[derive(Parser)]
#[command(name = "matfree", version, about = "Matrix-free convex optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time solves and operator multiplies over a range of sizes.
    Bench {
        problem: Problem,
        /// Size parameters: n for deconv, q for sylvester.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Number of instances per size (seeds 0..k).
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value = "matfree")]
        backend: Backend,
        /// Absolute and relative solver tolerance.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        /// Time multiplies only.
        #[arg(long)]
        no_solve: bool,
        /// CSV destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a benchmark instance in the JSON problem schema.
    Gen {
        problem: Problem,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Canonicalize a JSON problem and print the cone program manifest.
    Canon { input: PathBuf },
    /// Solve a JSON problem and print the variable values.
    Solve {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        eps_abs: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps_rel: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        /// Write the iteration log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn read_problem(path: &PathBuf) -> Result<Opr> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Opr::from_json(&text)?)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Bench {
            problem,
            sizes,
            seeds,
            backend,
            tol,
            max_iters,
            no_solve,
            out,
        } => {
            if sizes.windows(2).any(|w| w[0] >= w[1]) {
                bail!("--sizes must be strictly ascending");
            }
            let config = BenchConfig {
                solver: SolverOptions {
                    max_iters,
                    ..SolverOptions::with_tolerance(tol, tol)
                },
                solve: !no_solve,
                ..BenchConfig::default()
            };
            let seeds: Vec<u64> = (0..seeds).collect();
            let report = run_bench(problem, &sizes, &seeds, backend, &config);
            for f in &report.failures {
                eprintln!("size {} seed {} failed: {}", f.size, f.seed, f.message);
            }
            bench::write_csv(&report.records, output(out.as_ref())?)?;
            for (label, timing) in [("solve", Timing::Solve), ("multiply", Timing::Multiply)] {
                if let Ok(s) = records_slope(&report.records, timing) {
                    eprintln!("{label} time slope: {s:.3}");
                }
            }
        }
        Command::Gen {
            problem,
            size,
            seed,
            out,
        } => {
            let spec = match problem {
                Problem::Deconv => bench::deconv_spec(size, seed)?,
                Problem::Sylvester => bench::sylvester_spec(size, seed)?,
            };
            let mut w = output(out.as_ref())?;
            writeln!(w, "{}", spec.to_json()?)?;
        }
        Command::Canon { input } => {
            let cp = canonicalize(&read_problem(&input)?)?;
            println!("{}", serde_json::to_string_pretty(&cp.manifest())?);
        }
        Command::Solve {
            input,
            eps_abs,
            eps_rel,
            max_iters,
            log,
        } => {
            let p = read_problem(&input)?;
            let cp = canonicalize(&p)?;
            let opts = SolverOptions {
                max_iters,
                ..SolverOptions::with_tolerance(eps_abs, eps_rel)
            };
            let sol = solve(&cp, &opts)?;
            if let Some(path) = log {
                sol.write_log(&mut output(Some(&path))?)?;
            }
            let values: serde_json::Map<String, serde_json::Value> = p
                .variables
                .iter()
                .map(|(name, _)| {
                    let v = cp.value(name, &sol.x).expect("variable of the problem");
                    (name.clone(), serde_json::json!(v))
                })
                .collect();
            let report = serde_json::json!({
                "status": sol.status,
                "objective": sol.objective,
                "iterations": sol.iterations,
                "primal_residual": sol.primal_residual,
                "dual_residual": sol.dual_residual,
                "variables": values,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}
