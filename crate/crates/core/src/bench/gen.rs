//! Benchmark problem families: nonnegative deconvolution and Sylvester LPs.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::error::{Error, Result};
use crate::expr::{ConstSpec, ConstraintSpec, ExprSpec, Generator, Opr, ProblemSpec, VarSpec};
use crate::linalg::DenseMatrix;
use crate::shape::Shape;
use crate::solver::ConeKind;

/// Entries of the kernel are raised to at least this value.
pub const KERNEL_FLOOR: f64 = 1e-6;
/// Number of spikes in the planted signal.
pub const SPIKES: usize = 5;

/// Data of one deconvolution instance.
#[derive(Clone, Debug, PartialEq)]
pub struct DeconvData {
    pub kernel: Vec<f64>,
    pub x_true: Vec<f64>,
    /// `kernel * x_true`, length `2n - 1`.
    pub signal: Vec<f64>,
    pub noise: Vec<f64>,
    pub b: Vec<f64>,
}

/// Unit-sum Gaussian of length `n` with standard deviation `n/10`, centred,
/// with small entries floored at [`KERNEL_FLOOR`].
pub fn gaussian_kernel(n: usize) -> Vec<f64> {
    let sigma = n as f64 / 10.0;
    let mid = (n as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..n)
        .map(|i| (-((i as f64 - mid) / sigma).powi(2) / 2.0).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| (v / total).max(KERNEL_FLOOR)).collect()
}

fn full_conv(c: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; c.len() + x.len() - 1];
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (i, &ci) in c.iter().enumerate() {
                out[i + j] += ci * xj;
            }
        }
    }
    out
}

pub fn deconv_data(n: usize, seed: u64) -> Result<DeconvData> {
    if n < 10 {
        return Err(Error::arg(format!("deconvolution needs n >= 10, got {n}")));
    }
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let kernel = gaussian_kernel(n);
    let mut x_true = vec![0.0; n];
    let top = n as f64 / 10.0;
    for i in sample(&mut r, n, SPIKES) {
        x_true[i] = r.random_range(0.0..=top);
    }
    // x_true is sparse, so the direct sum is cheap.
    let signal = full_conv(&kernel, &x_true);
    let m = signal.len();
    let var = signal.iter().map(|v| v * v).sum::<f64>() / (400.0 * m as f64);
    let normal = Normal::new(0.0, var.sqrt()).map_err(|e| Error::arg(e.to_string()))?;
    let noise: Vec<f64> = (0..m).map(|_| normal.sample(&mut r)).collect();
    let b = signal.iter().zip(&noise).map(|(s, v)| s + v).collect();
    Ok(DeconvData {
        kernel,
        x_true,
        signal,
        noise,
        b,
    })
}

/// `minimize ‖c * x − b‖² subject to x ≥ 0`.
pub fn deconv_spec(n: usize, seed: u64) -> Result<ProblemSpec> {
    let d = deconv_data(n, seed)?;
    let conv = ExprSpec::new(
        "conv",
        vec![ExprSpec::variable("x")],
        json!({"kernel": "c", "variant": "column"}),
    );
    let residual = ExprSpec::new("sub", vec![conv, ExprSpec::constant("b")], serde_json::Value::Null);
    Ok(ProblemSpec {
        sense: Some("minimize".into()),
        variables: vec![VarSpec {
            name: "x".into(),
            shape: Shape::vector(n),
        }],
        constants: vec![
            ConstSpec {
                name: "c".into(),
                shape: Shape::vector(n),
                values: Some(d.kernel),
                generator: None,
            },
            ConstSpec {
                name: "b".into(),
                shape: Shape::vector(2 * n - 1),
                values: Some(d.b),
                generator: None,
            },
        ],
        objective: ExprSpec::new("sum_squares", vec![residual], serde_json::Value::Null),
        constraints: vec![ConstraintSpec {
            expr: ExprSpec::variable("x"),
            cone: ConeKind::Nonneg,
        }],
    })
}

pub fn gen_deconv(n: usize, seed: u64) -> Result<Opr> {
    deconv_spec(n, seed)?.to_opr()
}

/// Data of one Sylvester LP, `X ∈ R^{p×q}` with `p = 5q`.
#[derive(Clone, Debug, PartialEq)]
pub struct SylvesterData {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    pub d: DenseMatrix,
}

/// Ratio `p / q` of the variable's dimensions.
pub const SYLVESTER_K: usize = 5;

fn sylvester_generators(seed: u64) -> [Generator; 3] {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let folded = |seed| Generator::FoldedNormal { seed, offset: 1e-6 };
    [
        folded(r.random()),
        folded(r.random()),
        Generator::Normal {
            seed: r.random(),
            mean: 0.0,
            std: 1.0,
        },
    ]
}

/// `minimize Tr(DᵀX) subject to AXB ≤ C, X ≥ 0` with `C = 11ᵀ`.
pub fn sylvester_spec(q: usize, seed: u64) -> Result<ProblemSpec> {
    if q < 2 {
        return Err(Error::arg(format!("Sylvester LP needs q >= 2, got {q}")));
    }
    let p = SYLVESTER_K * q;
    let [ga, gb, gd] = sylvester_generators(seed);
    let konst = |name: &str, shape: Shape, g: Generator| ConstSpec {
        name: name.into(),
        shape,
        values: None,
        generator: Some(g),
    };
    let axb = ExprSpec::new(
        "matrix_product",
        vec![ExprSpec::variable("X")],
        json!({"left": "A", "right": "B"}),
    );
    let slack = ExprSpec::new("sub", vec![ExprSpec::constant("C"), axb], serde_json::Value::Null);
    Ok(ProblemSpec {
        sense: Some("minimize".into()),
        variables: vec![VarSpec {
            name: "X".into(),
            shape: Shape::matrix(p, q),
        }],
        constants: vec![
            konst("A", Shape::matrix(p, p), ga),
            konst("B", Shape::matrix(q, q), gb),
            konst("C", Shape::matrix(p, q), Generator::Fill { value: 1.0 }),
            konst("D", Shape::matrix(p, q), gd),
        ],
        objective: ExprSpec::new("dot", vec![ExprSpec::variable("X")], json!("D")),
        constraints: vec![
            ConstraintSpec {
                expr: slack,
                cone: ConeKind::Nonneg,
            },
            ConstraintSpec {
                expr: ExprSpec::variable("X"),
                cone: ConeKind::Nonneg,
            },
        ],
    })
}

pub fn sylvester_data(q: usize, seed: u64) -> Result<SylvesterData> {
    let spec = sylvester_spec(q, seed)?;
    let mut mats = spec.constants.iter().map(|c| {
        let (r, k) = c.shape.rows_cols();
        let g = c.generator.as_ref().expect("sylvester constants are generated");
        DenseMatrix::from_col_major(r, k, g.generate(r * k)?)
    });
    let mut next = || mats.next().expect("four constants");
    Ok(SylvesterData {
        a: next()?,
        b: next()?,
        c: next()?,
        d: next()?,
    })
}

pub fn gen_sylvester(q: usize, seed: u64) -> Result<Opr> {
    sylvester_spec(q, seed)?.to_opr()
}
