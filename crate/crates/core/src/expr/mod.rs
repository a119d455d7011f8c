//! Expression DAGs describing optimization problems.
//!
//! An [`ExprBuilder`] is an arena shared by every expression of one problem;
//! [`Expr`] handles point into it. Variables are interned by name, so two
//! references to `x` always denote the same input. [`ExprBuilder::dag`]
//! extracts the sub-DAG below one expression as a standalone
//! [`ExpressionDag`] whose nodes are stored in topological order.

mod dcp;
mod json;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fao::{ConvVariant, Fao, FaoKind, Wavelet};
use crate::linalg::DenseMatrix;
use crate::shape::Shape;
use crate::solver::ConeKind;
use crate::sparse::SparseMatrix;

pub use dcp::{analyze, compose, curvature_of, validate_dcp, Curvature, DcpViolation, Monotonicity, Sign};
pub use json::{ConstSpec, ConstraintSpec, ExprSpec, Generator, ProblemSpec, VarSpec};

pub type ExprId = usize;

/// One output of one node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub node: ExprId,
    pub port: usize,
}

/// The function a node represents.
#[derive(Clone, Debug)]
pub enum Func {
    Variable(String),
    /// Column-major values.
    Constant(Arc<Vec<f64>>),
    Linear(Fao),
    SumSquares,
    Norm2,
    Norm1,
    Abs,
}

impl Func {
    pub fn name(&self) -> String {
        match self {
            Func::Variable(v) => v.clone(),
            Func::Constant(c) if c.len() == 1 => format!("{}", c[0]),
            Func::Constant(_) => "const".into(),
            Func::Linear(f) => f.name(),
            Func::SumSquares => "sum_squares".into(),
            Func::Norm2 => "norm2".into(),
            Func::Norm1 => "norm1".into(),
            Func::Abs => "abs".into(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Func::Linear(_))
    }

    pub fn is_start(&self) -> bool {
        matches!(self, Func::Variable(_) | Func::Constant(_))
    }
}

#[derive(Clone, Debug)]
pub struct ExprNode {
    pub func: Func,
    pub args: Vec<NodeRef>,
    /// One shape per output.
    pub shapes: Vec<Shape>,
}

/// Handle to an expression inside an [`ExprBuilder`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Expr(pub NodeRef);

/// A connected expression DAG with a single end output.
#[derive(Clone, Debug)]
pub struct ExpressionDag {
    nodes: Vec<ExprNode>,
    end: NodeRef,
    variables: Vec<(String, Shape)>,
}

impl ExpressionDag {
    pub fn nodes(&self) -> &[ExprNode] {
        &self.nodes
    }

    pub fn node(&self, id: ExprId) -> &ExprNode {
        &self.nodes[id]
    }

    pub fn end(&self) -> NodeRef {
        self.end
    }

    /// Variables appearing in the DAG, in node order.
    pub fn variables(&self) -> &[(String, Shape)] {
        &self.variables
    }

    pub fn shape(&self) -> &Shape {
        &self.nodes[self.end.node].shapes[self.end.port]
    }

    /// Edges as `(source output, destination node, argument index)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeRef, ExprId, usize)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(v, n)| n.args.iter().enumerate().map(move |(i, &a)| (a, v, i)))
    }

    /// Number of times each output is read, counting the end output once.
    pub fn readers(&self) -> HashMap<NodeRef, usize> {
        let mut r = HashMap::new();
        for (a, _, _) in self.edges() {
            *r.entry(a).or_insert(0) += 1;
        }
        *r.entry(self.end).or_insert(0) += 1;
        r
    }

    /// Every non-start node is linear.
    pub fn is_affine(&self) -> bool {
        self.nodes.iter().all(|n| n.func.is_start() || n.func.is_linear())
    }

    /// Affine with only variables as start nodes.
    pub fn is_linear(&self) -> bool {
        self.is_affine() && !self.nodes.iter().any(|n| matches!(n.func, Func::Constant(_)))
    }

    /// No variables.
    pub fn is_constant(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn count_kind(&self, kind: FaoKind) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(&n.func, Func::Linear(f) if f.kind() == kind))
            .count()
    }

    /// Evaluates the DAG with variable values from `value`, returning the
    /// end output (column-major).
    pub fn evaluate(&self, value: &dyn Fn(&str) -> Option<Vec<f64>>) -> Result<Vec<f64>> {
        let mut out: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let args: Vec<&[f64]> = node.args.iter().map(|a| out[a.node][a.port].as_slice()).collect();
            let vals = match &node.func {
                Func::Variable(v) => {
                    let x = value(v).ok_or_else(|| Error::arg(format!("no value for variable {v}")))?;
                    if x.len() != node.shapes[0].total() {
                        return Err(Error::dim(format!(
                            "value for {v} has length {}, expected {}",
                            x.len(),
                            node.shapes[0]
                        )));
                    }
                    vec![x]
                }
                Func::Constant(c) => vec![c.to_vec()],
                Func::Linear(f) => f.forward(&args)?,
                Func::SumSquares => vec![vec![args[0].iter().map(|x| x * x).sum()]],
                Func::Norm2 => vec![vec![args[0].iter().map(|x| x * x).sum::<f64>().sqrt()]],
                Func::Norm1 => vec![vec![args[0].iter().map(|x| x.abs()).sum()]],
                Func::Abs => vec![args[0].iter().map(|x| x.abs()).collect()],
            };
            out.push(vals);
        }
        Ok(std::mem::take(&mut out[self.end.node][self.end.port]))
    }

    /// Copy with `f` applied to every node; `f` may replace a start node by
    /// a small sub-DAG, given as nodes whose arguments index into the new
    /// node list.
    fn rebuild(&self, mut f: impl FnMut(&ExprNode, &mut Vec<ExprNode>) -> Option<NodeRef>) -> ExpressionDag {
        let mut nodes: Vec<ExprNode> = Vec::with_capacity(self.nodes.len());
        let mut map: Vec<usize> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            if let Some(r) = f(node, &mut nodes) {
                map.push(r.node);
                continue;
            }
            let mut n = node.clone();
            for a in &mut n.args {
                a.node = map[a.node];
            }
            nodes.push(n);
            map.push(nodes.len() - 1);
        }
        let end = NodeRef {
            node: map[self.end.node],
            port: self.end.port,
        };
        ExpressionDag::from_nodes(nodes, end)
    }

    fn from_nodes(nodes: Vec<ExprNode>, end: NodeRef) -> ExpressionDag {
        let mut variables: Vec<(String, Shape)> = Vec::new();
        for n in &nodes {
            if let Func::Variable(v) = &n.func {
                if !variables.iter().any(|(w, _)| w == v) {
                    variables.push((v.clone(), n.shapes[0].clone()));
                }
            }
        }
        ExpressionDag { nodes, end, variables }
    }

    /// Replaces every constant start node with `var` followed by a zero map.
    pub(crate) fn linear_part_over(&self, var: &(String, Shape)) -> ExpressionDag {
        let mut var_node = None;
        self.rebuild(|node, nodes| match &node.func {
            Func::Constant(_) => {
                let v = *var_node.get_or_insert_with(|| {
                    nodes.push(ExprNode {
                        func: Func::Variable(var.0.clone()),
                        args: vec![],
                        shapes: vec![var.1.clone()],
                    });
                    nodes.len() - 1
                });
                nodes.push(ExprNode {
                    func: Func::Linear(Fao::zero(var.1.clone(), node.shapes[0].clone())),
                    args: vec![NodeRef { node: v, port: 0 }],
                    shapes: node.shapes.clone(),
                });
                Some(NodeRef {
                    node: nodes.len() - 1,
                    port: 0,
                })
            }
            _ => None,
        })
    }

    /// The linear component: every constant start node replaced with a
    /// variable start node feeding a zero map of the constant's shape.
    pub fn linear_part(&self) -> Result<ExpressionDag> {
        if !self.is_affine() {
            return Err(Error::arg("linear part of a non-affine expression"));
        }
        let var = self
            .variables
            .first()
            .ok_or_else(|| Error::arg("a constant expression has no linear part"))?
            .clone();
        Ok(self.linear_part_over(&var))
    }

    /// The constant component: every variable start node replaced with a
    /// zero-valued constant of the same shape.
    pub fn constant_part(&self) -> Result<ExpressionDag> {
        if !self.is_affine() {
            return Err(Error::arg("constant part of a non-affine expression"));
        }
        Ok(self.rebuild(|node, nodes| match &node.func {
            Func::Variable(_) => {
                nodes.push(ExprNode {
                    func: Func::Constant(Arc::new(vec![0.0; node.shapes[0].total()])),
                    args: vec![],
                    shapes: node.shapes.clone(),
                });
                Some(NodeRef {
                    node: nodes.len() - 1,
                    port: 0,
                })
            }
            _ => None,
        }))
    }

    /// Value of a constant DAG (vectorized).
    pub fn evaluate_constant(&self) -> Result<Vec<f64>> {
        if let Some((v, _)) = self.variables.first() {
            return Err(Error::arg(format!("variable {v} in a constant expression")));
        }
        self.evaluate(&|_| None)
    }
}

impl fmt::Display for ExpressionDag {
    /// One line per node: `id: name(args) -> shapes`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.nodes.iter().enumerate() {
            let args: Vec<String> = n
                .args
                .iter()
                .map(|a| {
                    if a.port == 0 {
                        format!("{}", a.node)
                    } else {
                        format!("{}.{}", a.node, a.port)
                    }
                })
                .collect();
            let shapes: Vec<String> = n.shapes.iter().map(|s| s.to_string()).collect();
            writeln!(
                f,
                "{i}: {}({}) -> {}",
                n.func.name(),
                args.join(", "),
                shapes.join(", ")
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub expr: ExpressionDag,
    pub cone: ConeKind,
}

/// Optimization problem representation: minimize `objective` over all
/// `variables` subject to every constraint expression lying in its cone.
#[derive(Clone, Debug)]
pub struct Opr {
    pub variables: Vec<(String, Shape)>,
    pub objective: ExpressionDag,
    pub constraints: Vec<Constraint>,
}

impl Opr {
    /// Objective value, or `None` if some constraint is violated by more than `tol`.
    pub fn value_if_feasible(&self, value: &dyn Fn(&str) -> Option<Vec<f64>>, tol: f64) -> Result<Option<f64>> {
        for c in &self.constraints {
            let v = c.expr.evaluate(value)?;
            let cone = crate::solver::Cone::new(c.cone, v.len())?;
            if cone.distance(&v) > tol {
                return Ok(None);
            }
        }
        Ok(Some(self.objective.evaluate(value)?[0]))
    }
}

/// Arena for building expressions.
#[derive(Clone, Debug, Default)]
pub struct ExprBuilder {
    nodes: Vec<ExprNode>,
    vars: Vec<(String, Shape)>,
    var_node: HashMap<String, ExprId>,
}

impl ExprBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn shape(&self, e: Expr) -> &Shape {
        &self.nodes[e.0.node].shapes[e.0.port]
    }

    pub fn variables(&self) -> &[(String, Shape)] {
        &self.vars
    }

    fn push(&mut self, func: Func, args: Vec<NodeRef>, shapes: Vec<Shape>) -> ExprId {
        self.nodes.push(ExprNode { func, args, shapes });
        self.nodes.len() - 1
    }

    fn single(&mut self, func: Func, args: &[Expr], shape: Shape) -> Expr {
        let id = self.push(func, args.iter().map(|a| a.0).collect(), vec![shape]);
        Expr(NodeRef { node: id, port: 0 })
    }

    /// The variable `name`; repeated calls with the same name return the same node.
    pub fn variable(&mut self, name: &str, shape: Shape) -> Result<Expr> {
        if let Some(&id) = self.var_node.get(name) {
            if self.nodes[id].shapes[0] != shape {
                return Err(Error::dim(format!(
                    "variable {name} redeclared as {shape}, was {}",
                    self.nodes[id].shapes[0]
                )));
            }
            return Ok(Expr(NodeRef { node: id, port: 0 }));
        }
        let e = self.single(Func::Variable(name.into()), &[], shape.clone());
        self.var_node.insert(name.into(), e.0.node);
        self.vars.push((name.into(), shape));
        Ok(e)
    }

    /// A fresh variable whose name starts with `prefix` and does not clash
    /// with existing ones.
    pub fn fresh_variable(&mut self, prefix: &str, shape: Shape) -> Expr {
        let mut k = self.vars.len();
        loop {
            let name = format!("{prefix}{k}");
            if !self.var_node.contains_key(&name) {
                return self.variable(&name, shape).expect("new name");
            }
            k += 1;
        }
    }

    pub fn constant(&mut self, shape: Shape, values: Vec<f64>) -> Result<Expr> {
        if values.len() != shape.total() {
            return Err(Error::dim(format!(
                "constant of shape {shape} given {} values",
                values.len()
            )));
        }
        Ok(self.single(Func::Constant(Arc::new(values)), &[], shape))
    }

    pub fn scalar(&mut self, v: f64) -> Expr {
        self.single(Func::Constant(Arc::new(vec![v])), &[], Shape::vector(1))
    }

    /// Applies a linear oracle to `args`, one per oracle input.
    pub fn linear(&mut self, fao: Fao, args: &[Expr]) -> Result<Vec<Expr>> {
        if args.len() != fao.in_shapes().len() {
            return Err(Error::dim(format!(
                "{} takes {} arguments, got {}",
                fao.name(),
                fao.in_shapes().len(),
                args.len()
            )));
        }
        for (k, (a, s)) in args.iter().zip(fao.in_shapes()).enumerate() {
            if self.shape(*a) != s {
                return Err(Error::dim(format!(
                    "{} argument {k} has shape {}, expected {s}",
                    fao.name(),
                    self.shape(*a)
                )));
            }
        }
        let shapes = fao.out_shapes().to_vec();
        let k = shapes.len();
        let id = self.push(Func::Linear(fao), args.iter().map(|a| a.0).collect(), shapes);
        Ok((0..k).map(|port| Expr(NodeRef { node: id, port })).collect())
    }

    pub fn linear1(&mut self, fao: Fao, arg: Expr) -> Result<Expr> {
        Ok(self.linear(fao, &[arg])?[0])
    }

    fn broadcast_to(&mut self, e: Expr, shape: &Shape) -> Result<Expr> {
        let s = self.shape(e).clone();
        if &s == shape {
            Ok(e)
        } else if s.total() == 1 {
            self.linear1(Fao::sum_entries(shape.clone()).transposed(), e)
        } else {
            Err(Error::dim(format!("cannot add {s} and {shape}")))
        }
    }

    /// Elementwise sum; length-1 terms are broadcast.
    pub fn sum(&mut self, terms: &[Expr]) -> Result<Expr> {
        let shape = terms
            .iter()
            .map(|&t| self.shape(t).clone())
            .max_by_key(Shape::total)
            .ok_or_else(|| Error::arg("sum of no terms"))?;
        let args = terms
            .iter()
            .map(|&t| self.broadcast_to(t, &shape))
            .collect::<Result<Vec<_>>>()?;
        self.linear1_many(Fao::sum(args.len(), shape)?, &args)
    }

    fn linear1_many(&mut self, fao: Fao, args: &[Expr]) -> Result<Expr> {
        Ok(self.linear(fao, args)?[0])
    }

    pub fn add(&mut self, a: Expr, b: Expr) -> Result<Expr> {
        self.sum(&[a, b])
    }

    pub fn sub(&mut self, a: Expr, b: Expr) -> Result<Expr> {
        let nb = self.neg(b);
        self.sum(&[a, nb])
    }

    pub fn neg(&mut self, a: Expr) -> Expr {
        self.scale(-1.0, a)
    }

    pub fn scale(&mut self, alpha: f64, a: Expr) -> Expr {
        let s = self.shape(a).clone();
        self.linear1(Fao::scalar_mult(alpha, s), a)
            .expect("shape taken from argument")
    }

    /// `A x`, with `A` applied to each column of a matrix argument.
    pub fn matmul(&mut self, a: DenseMatrix, x: Expr) -> Result<Expr> {
        let s = self.shape(x).clone();
        self.linear1(Fao::dense_on(a, s)?, x)
    }

    pub fn sparse_mul(&mut self, a: SparseMatrix, x: Expr) -> Result<Expr> {
        let s = self.shape(x).clone();
        self.linear1(Fao::sparse_on(a, s)?, x)
    }

    /// `⟨c, x⟩` for a constant `c` of `x`'s shape.
    pub fn dot(&mut self, c: &[f64], x: Expr) -> Result<Expr> {
        let s = self.shape(x).clone();
        let x = if s.is_matrix() { self.vec(x)? } else { x };
        let row = DenseMatrix::from_col_major(1, c.len(), c.to_vec())?;
        self.linear1(Fao::dense_on(row, s.flat())?, x)
    }

    pub fn conv(&mut self, variant: ConvVariant, kernel: &[f64], x: Expr) -> Result<Expr> {
        let s = self.shape(x).clone();
        self.linear1(Fao::conv(variant, kernel, s)?, x)
    }

    pub fn conv2(&mut self, variant: ConvVariant, kernel: &DenseMatrix, x: Expr) -> Result<Expr> {
        let s = self.shape(x).clone();
        self.linear1(Fao::conv2(variant, kernel, s)?, x)
    }

    pub fn dft(&mut self, x: Expr) -> Result<Expr> {
        let s = self.shape(x).clone();
        self.linear1(Fao::dft(s)?, x)
    }

    pub fn dwt(&mut self, levels: usize, wavelet: Wavelet, x: Expr) -> Result<Expr> {
        let s = self.shape(x).clone();
        self.linear1(Fao::dwt(levels, wavelet, s)?, x)
    }

    /// `A X B`.
    pub fn matrix_product(&mut self, a: DenseMatrix, x: Expr, b: DenseMatrix) -> Result<Expr> {
        self.linear1(Fao::matrix_product(a, b), x)
    }

    pub fn vec(&mut self, x: Expr) -> Result<Expr> {
        let (p, q) = self.shape(x).rows_cols();
        if !self.shape(x).is_matrix() {
            return Ok(x);
        }
        self.linear1(Fao::vec(p, q), x)
    }

    pub fn mat(&mut self, x: Expr, rows: usize, cols: usize) -> Result<Expr> {
        self.linear1(Fao::mat(rows, cols), x)
    }

    pub fn vstack(&mut self, parts: &[Expr]) -> Result<Expr> {
        let shapes = parts.iter().map(|&p| self.shape(p).clone()).collect();
        self.linear1_many(Fao::vstack(shapes)?, parts)
    }

    /// Consecutive pieces of a vector.
    pub fn split(&mut self, x: Expr, sizes: &[usize]) -> Result<Vec<Expr>> {
        if sizes.contains(&0) {
            return Err(Error::arg("split piece of size 0"));
        }
        self.linear(Fao::split(sizes.iter().map(|&k| Shape::vector(k)).collect())?, &[x])
    }

    pub fn sum_entries(&mut self, x: Expr) -> Expr {
        let s = self.shape(x).clone();
        self.linear1(Fao::sum_entries(s), x).expect("shape taken from argument")
    }

    pub fn sum_squares(&mut self, x: Expr) -> Expr {
        self.single(Func::SumSquares, &[x], Shape::vector(1))
    }

    pub fn norm2(&mut self, x: Expr) -> Expr {
        self.single(Func::Norm2, &[x], Shape::vector(1))
    }

    pub fn norm1(&mut self, x: Expr) -> Expr {
        self.single(Func::Norm1, &[x], Shape::vector(1))
    }

    pub fn abs(&mut self, x: Expr) -> Expr {
        let s = self.shape(x).clone();
        self.single(Func::Abs, &[x], s)
    }

    /// The sub-DAG below `root`.
    pub fn dag(&self, root: Expr) -> ExpressionDag {
        self.dag_with(root, &HashMap::new())
    }

    /// The sub-DAG below `root` with outputs in `subst` replaced by other
    /// outputs (and the sub-DAGs below those).
    pub(crate) fn dag_with(&self, root: Expr, subst: &HashMap<NodeRef, NodeRef>) -> ExpressionDag {
        let resolve = |mut r: NodeRef| {
            while let Some(&s) = subst.get(&r) {
                r = s;
            }
            r
        };
        let mut map: HashMap<ExprId, ExprId> = HashMap::new();
        let mut nodes: Vec<ExprNode> = Vec::new();
        // Iterative post-order walk.
        let root = resolve(root.0);
        let mut stack = vec![(root.node, false)];
        while let Some((u, expanded)) = stack.pop() {
            if map.contains_key(&u) {
                continue;
            }
            if expanded {
                let mut n = self.nodes[u].clone();
                for a in &mut n.args {
                    let r = resolve(*a);
                    *a = NodeRef {
                        node: map[&r.node],
                        port: r.port,
                    };
                }
                nodes.push(n);
                map.insert(u, nodes.len() - 1);
            } else {
                stack.push((u, true));
                for a in self.nodes[u].args.iter().rev() {
                    let r = resolve(*a);
                    if !map.contains_key(&r.node) {
                        stack.push((r.node, false));
                    }
                }
            }
        }
        let end = NodeRef {
            node: map[&root.node],
            port: root.port,
        };
        ExpressionDag::from_nodes(nodes, end)
    }

    /// Copies a DAG into the arena (variables are shared by name) and
    /// returns its end output.
    pub fn import(&mut self, dag: &ExpressionDag) -> Result<Expr> {
        let mut map: Vec<ExprId> = Vec::with_capacity(dag.nodes.len());
        for n in &dag.nodes {
            let id = match &n.func {
                Func::Variable(v) => self.variable(v, n.shapes[0].clone())?.0.node,
                _ => {
                    let args = n
                        .args
                        .iter()
                        .map(|a| NodeRef {
                            node: map[a.node],
                            port: a.port,
                        })
                        .collect();
                    self.push(n.func.clone(), args, n.shapes.clone())
                }
            };
            map.push(id);
        }
        Ok(Expr(NodeRef {
            node: map[dag.end.node],
            port: dag.end.port,
        }))
    }

    /// Minimize `objective` over all declared variables subject to the
    /// given constraints.
    pub fn problem(&self, objective: Expr, constraints: &[(Expr, ConeKind)]) -> Result<Opr> {
        if self.shape(objective).total() != 1 {
            return Err(Error::dim(format!(
                "objective must be scalar, got {}",
                self.shape(objective)
            )));
        }
        Ok(Opr {
            variables: self.vars.clone(),
            objective: self.dag(objective),
            constraints: constraints
                .iter()
                .map(|&(e, cone)| Constraint {
                    expr: self.dag(e),
                    cone,
                })
                .collect(),
        })
    }
}
