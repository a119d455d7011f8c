//! JSON problem schema.
//!
//! ```json
//! {
//!   "variables": [{"name": "x", "shape": [8]}],
//!   "constants": [{"name": "b", "shape": [15], "values": [...]},
//!                 {"name": "c", "shape": [8], "generator": {"kind": "normal", "seed": 1}}],
//!   "objective": {"op": "sum_squares", "args": [
//!       {"op": "sub", "args": [
//!           {"op": "conv", "data": {"kernel": "c", "variant": "column"},
//!            "args": [{"op": "variable", "data": "x"}]},
//!           {"op": "constant", "data": "b"}]}]},
//!   "constraints": [{"expr": {"op": "variable", "data": "x"}, "cone": "nonneg"}]
//! }
//! ```

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fao::{ConvVariant, Wavelet};
use crate::linalg::DenseMatrix;
use crate::shape::Shape;
use crate::solver::ConeKind;

use super::{Expr, ExprBuilder, Opr};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarSpec {
    pub name: String,
    pub shape: Shape,
}

/// Seeded constant data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Normal {
        seed: u64,
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        std: f64,
    },
    Uniform {
        seed: u64,
        low: f64,
        high: f64,
    },
    /// `|N(0, 1)| + offset`.
    FoldedNormal {
        seed: u64,
        #[serde(default)]
        offset: f64,
    },
    Fill {
        value: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Generator {
    pub fn generate(&self, len: usize) -> Result<Vec<f64>> {
        let bad = |e: rand_distr::NormalError| Error::Schema(format!("bad generator: {e}"));
        Ok(match *self {
            Generator::Normal { seed, mean, std } => {
                let d = Normal::new(mean, std).map_err(bad)?;
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                (0..len).map(|_| d.sample(&mut r)).collect()
            }
            Generator::Uniform { seed, low, high } => {
                let d = Uniform::new(low, high).map_err(|e| Error::Schema(format!("bad generator: {e}")))?;
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                (0..len).map(|_| r.sample(d)).collect()
            }
            Generator::FoldedNormal { seed, offset } => {
                let d = Normal::<f64>::new(0.0, 1.0).map_err(bad)?;
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                (0..len).map(|_| d.sample(&mut r).abs() + offset).collect()
            }
            Generator::Fill { value } => vec![value; len],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstSpec {
    pub name: String,
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

/// One node of an expression tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExprSpec {
    pub op: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<ExprSpec>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub data: Value,
}

impl ExprSpec {
    pub fn new(op: &str, args: Vec<ExprSpec>, data: Value) -> Self {
        ExprSpec {
            op: op.into(),
            args,
            data,
        }
    }

    pub fn variable(name: &str) -> Self {
        ExprSpec::new("variable", vec![], Value::from(name))
    }

    pub fn constant(name: &str) -> Self {
        ExprSpec::new("constant", vec![], Value::from(name))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub expr: ExprSpec,
    pub cone: ConeKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Only `"minimize"` is accepted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense: Option<String>,
    pub variables: Vec<VarSpec>,
    #[serde(default)]
    pub constants: Vec<ConstSpec>,
    pub objective: ExprSpec,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
}

struct Ctx<'a> {
    b: ExprBuilder,
    consts: HashMap<&'a str, (Shape, Vec<f64>)>,
    vars: HashMap<&'a str, Shape>,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn field<'v>(data: &'v Value, key: &str, op: &str) -> Result<&'v Value> {
    data.get(key)
        .ok_or_else(|| schema(format!("{op}: data needs \"{key}\"")))
}

fn as_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64()
        .map(|k| k as usize)
        .ok_or_else(|| schema(format!("{what} must be a nonnegative integer")))
}

impl Ctx<'_> {
    fn constant(&self, name: &Value, op: &str) -> Result<(Shape, Vec<f64>)> {
        let name = name
            .as_str()
            .ok_or_else(|| schema(format!("{op}: constant reference must be a name")))?;
        self.consts
            .get(name)
            .cloned()
            .ok_or_else(|| schema(format!("{op}: unknown constant {name}")))
    }

    fn matrix(&self, name: &Value, op: &str) -> Result<DenseMatrix> {
        let (s, v) = self.constant(name, op)?;
        let (r, c) = s.rows_cols();
        DenseMatrix::from_col_major(r, c, v)
    }

    fn build(&mut self, e: &ExprSpec) -> Result<Expr> {
        let args = e.args.iter().map(|a| self.build(a)).collect::<Result<Vec<_>>>()?;
        let op = e.op.as_str();
        let arity = |k: usize| {
            if args.len() == k {
                Ok(())
            } else {
                Err(schema(format!("{op} takes {k} arguments, got {}", args.len())))
            }
        };
        let b = &mut self.b;
        match op {
            "variable" => {
                arity(0)?;
                let name = e.data.as_str().ok_or_else(|| schema("variable: data must be a name"))?;
                let shape = self
                    .vars
                    .get(name)
                    .ok_or_else(|| schema(format!("undeclared variable {name}")))?;
                b.variable(name, shape.clone())
            }
            "constant" => {
                arity(0)?;
                match &e.data {
                    Value::Number(n) => Ok(b.scalar(n.as_f64().unwrap_or(f64::NAN))),
                    Value::String(_) => {
                        let (s, v) = self.constant(&e.data, op)?;
                        self.b.constant(s, v)
                    }
                    Value::Object(_) => {
                        let shape: Shape = serde_json::from_value(field(&e.data, "shape", op)?.clone())?;
                        let values: Vec<f64> = serde_json::from_value(field(&e.data, "values", op)?.clone())?;
                        b.constant(shape, values)
                    }
                    _ => Err(schema("constant: data must be a number, a name or {shape, values}")),
                }
            }
            "add" | "sum" => b.sum(&args),
            "sub" => {
                arity(2)?;
                b.sub(args[0], args[1])
            }
            "neg" => {
                arity(1)?;
                Ok(b.neg(args[0]))
            }
            "scale" => {
                arity(1)?;
                let a = e.data.as_f64().ok_or_else(|| schema("scale: data must be a number"))?;
                Ok(b.scale(a, args[0]))
            }
            "matmul" => {
                arity(1)?;
                let a = self.matrix(&e.data, op)?;
                self.b.matmul(a, args[0])
            }
            "dot" => {
                arity(1)?;
                let (_, c) = self.constant(&e.data, op)?;
                self.b.dot(&c, args[0])
            }
            "conv" => {
                arity(1)?;
                let (ks, kv) = self.constant(field(&e.data, "kernel", op)?, op)?;
                let variant: ConvVariant = match e.data.get("variant") {
                    Some(v) => serde_json::from_value(v.clone())?,
                    None => ConvVariant::Column,
                };
                if ks.is_matrix() {
                    let (r, c) = ks.rows_cols();
                    self.b.conv2(variant, &DenseMatrix::from_col_major(r, c, kv)?, args[0])
                } else {
                    self.b.conv(variant, &kv, args[0])
                }
            }
            "dft" => {
                arity(1)?;
                b.dft(args[0])
            }
            "dwt" => {
                arity(1)?;
                let levels = as_usize(field(&e.data, "levels", op)?, "dwt levels")?;
                let wavelet = match e.data.get("wavelet").and_then(Value::as_str) {
                    None | Some("haar") => Wavelet::Haar,
                    Some("db2") => Wavelet::Db2,
                    Some(w) => return Err(schema(format!("unknown wavelet {w}"))),
                };
                b.dwt(levels, wavelet, args[0])
            }
            "matrix_product" => {
                arity(1)?;
                let left = self.matrix(field(&e.data, "left", op)?, op)?;
                let right = self.matrix(field(&e.data, "right", op)?, op)?;
                self.b.matrix_product(left, args[0], right)
            }
            "vec" => {
                arity(1)?;
                b.vec(args[0])
            }
            "mat" => {
                arity(1)?;
                let rows = as_usize(field(&e.data, "rows", op)?, "mat rows")?;
                let cols = as_usize(field(&e.data, "cols", op)?, "mat cols")?;
                b.mat(args[0], rows, cols)
            }
            "vstack" => b.vstack(&args),
            "split" => {
                arity(1)?;
                let sizes: Vec<usize> = serde_json::from_value(field(&e.data, "sizes", op)?.clone())?;
                let index = as_usize(field(&e.data, "index", op)?, "split index")?;
                let parts = b.split(args[0], &sizes)?;
                parts
                    .get(index)
                    .copied()
                    .ok_or_else(|| schema(format!("split index {index} out of range")))
            }
            "sum_entries" => {
                arity(1)?;
                Ok(b.sum_entries(args[0]))
            }
            "sum_squares" => {
                arity(1)?;
                Ok(b.sum_squares(args[0]))
            }
            "norm2" => {
                arity(1)?;
                Ok(b.norm2(args[0]))
            }
            "norm1" => {
                arity(1)?;
                Ok(b.norm1(args[0]))
            }
            "abs" => {
                arity(1)?;
                Ok(b.abs(args[0]))
            }
            other => Err(schema(format!("unknown atom {other}"))),
        }
    }
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<ProblemSpec> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_opr(&self) -> Result<Opr> {
        if let Some(s) = &self.sense {
            if s != "minimize" {
                return Err(schema(format!("objective sense {s} is not supported, only minimize")));
            }
        }
        let mut ctx = Ctx {
            b: ExprBuilder::new(),
            consts: HashMap::new(),
            vars: HashMap::new(),
        };
        for v in &self.variables {
            if ctx.vars.insert(&v.name, v.shape.clone()).is_some() {
                return Err(schema(format!("variable {} declared twice", v.name)));
            }
            ctx.b.variable(&v.name, v.shape.clone())?;
        }
        for c in &self.constants {
            let values = match (&c.values, &c.generator) {
                (Some(v), None) => v.clone(),
                (None, Some(g)) => g.generate(c.shape.total())?,
                _ => {
                    return Err(schema(format!(
                        "constant {} needs exactly one of values, generator",
                        c.name
                    )))
                }
            };
            if values.len() != c.shape.total() {
                return Err(schema(format!(
                    "constant {} has {} values for shape {}",
                    c.name,
                    values.len(),
                    c.shape
                )));
            }
            ctx.consts.insert(&c.name, (c.shape.clone(), values));
        }
        let obj = ctx.build(&self.objective)?;
        let cons = self
            .constraints
            .iter()
            .map(|c| Ok((ctx.build(&c.expr)?, c.cone)))
            .collect::<Result<Vec<_>>>()?;
        ctx.b.problem(obj, &cons)
    }
}

impl Opr {
    pub fn from_json(text: &str) -> Result<Opr> {
        ProblemSpec::from_json(text)?.to_opr()
    }
}
