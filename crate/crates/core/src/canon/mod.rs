//! Matrix-free canonicalization: a DCP problem becomes the cone program
//!
//! ```text
//! minimize    cᵀx + d
//! subject to  Ax + b ∈ K
//! ```
//!
//! where `A` is an [`FaoDag`] built from the problem's own linear functions.
//! Only the objective row is ever materialized.

mod conic;
mod graph;

use serde::{Deserialize, Serialize};

use crate::dag::{optimize, plan_memory, FaoDag};
use crate::error::{Error, Result};
use crate::expr::{validate_dcp, ExpressionDag, Opr};
use crate::linalg::dot;
use crate::shape::Shape;
use crate::solver::Cone;
use crate::sparse::{csr_to_dense, SparseMatrix};

pub use conic::conic_form;
pub use graph::{graph_repr, matrix_repr};

/// Position of one variable inside the stacked vector `x`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSlot {
    pub name: String,
    pub shape: Shape,
    pub offset: usize,
}

impl VarSlot {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.shape.total()
    }
}

#[derive(Clone, Debug)]
pub struct ConeProgram {
    pub c: Vec<f64>,
    pub d: f64,
    pub b: Vec<f64>,
    /// `x ↦ Ax`; `None` when there are no constraints.
    pub g: Option<FaoDag>,
    pub cones: Vec<Cone>,
    pub var_index: Vec<VarSlot>,
    /// Variables added by the graph implementations of nonlinear atoms.
    pub new_vars: Vec<String>,
    /// Linear parts of the constraints, kept for the sparse oracle.
    constraints: Vec<ExpressionDag>,
}

/// Summary of a cone program for tooling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub m: usize,
    pub cones: Vec<Cone>,
    pub variables: Vec<VarSlot>,
    pub new_vars: Vec<String>,
    pub nodes: usize,
    pub edges: usize,
    /// Global buffer size of the memory plan, in `f64` entries.
    pub memory_plan_entries: usize,
    pub naive_entries: usize,
}

impl ConeProgram {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x) + self.d
    }

    pub fn slot(&self, name: &str) -> Option<&VarSlot> {
        self.var_index.iter().find(|s| s.name == name)
    }

    /// The entries of `x` belonging to variable `name`.
    pub fn value<'a>(&self, name: &str, x: &'a [f64]) -> Option<&'a [f64]> {
        self.slot(name).map(|s| &x[s.range()])
    }

    /// `A` assembled explicitly from per-atom coefficients, independently
    /// of `g`.
    pub fn oracle_matrix(&self) -> Result<SparseMatrix> {
        if self.constraints.is_empty() {
            return SparseMatrix::from_triplets(0, self.n(), &[]);
        }
        let vars: Vec<(String, Shape)> = self
            .var_index
            .iter()
            .map(|s| (s.name.clone(), s.shape.clone()))
            .collect();
        Ok(SparseMatrix::from_csr(matrix_repr(&self.constraints, &vars)?))
    }

    pub fn manifest(&self) -> Manifest {
        let (nodes, edges, plan, naive) = match &self.g {
            Some(g) => {
                let plan = plan_memory(g);
                (g.nodes().len(), g.edges().len(), plan.global_size, plan.naive_size())
            }
            None => (0, 0, 0, 0),
        };
        Manifest {
            n: self.n(),
            m: self.m(),
            cones: self.cones.clone(),
            variables: self.var_index.clone(),
            new_vars: self.new_vars.clone(),
            nodes,
            edges,
            memory_plan_entries: plan,
            naive_entries: naive,
        }
    }

    /// Same data, cones, variables and structurally equal operator DAGs.
    pub fn same_as(&self, other: &ConeProgram) -> bool {
        let g_eq = match (&self.g, &other.g) {
            (Some(a), Some(b)) => a.structurally_equal(b),
            (None, None) => true,
            _ => false,
        };
        g_eq && self.c == other.c
            && self.d == other.d
            && self.b == other.b
            && self.cones == other.cones
            && self.var_index == other.var_index
            && self.new_vars == other.new_vars
    }
}

/// Compiles a DCP problem into a cone program. Variables are ordered by
/// declaration (new variables last) and constraints by declaration
/// (generated ones last).
pub fn canonicalize(p: &Opr) -> Result<ConeProgram> {
    validate_dcp(p)?;
    let (q, new_vars) = conic_form(p)?;
    let vars = q.variables.clone();
    let first = vars.first().ok_or_else(|| Error::arg("problem has no variables"))?;

    let mut offset = 0;
    let var_index = vars
        .iter()
        .map(|(name, shape)| {
            let s = VarSlot {
                name: name.clone(),
                shape: shape.clone(),
                offset,
            };
            offset += shape.total();
            s
        })
        .collect();

    let obj_lin = q.objective.linear_part_over(first);
    let c = csr_to_dense(&matrix_repr(&[obj_lin], &vars)?).as_slice().to_vec();
    let d = q.objective.constant_part()?.evaluate_constant()?[0];

    let mut b = Vec::new();
    let mut cones = Vec::with_capacity(q.constraints.len());
    let mut linear = Vec::with_capacity(q.constraints.len());
    for con in &q.constraints {
        b.extend(con.expr.constant_part()?.evaluate_constant()?);
        cones.push(Cone::new(con.cone, con.expr.shape().total())?);
        linear.push(con.expr.linear_part_over(first));
    }
    let g = if linear.is_empty() {
        None
    } else {
        Some(optimize(&graph_repr(&linear, &vars)?))
    };
    Ok(ConeProgram {
        c,
        d,
        b,
        g,
        cones,
        var_index,
        new_vars,
        constraints: linear,
    })
}
