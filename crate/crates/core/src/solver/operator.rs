//! The constraint operator as seen by the solver: products with `A` and `Aᵀ`.

use crate::dag::{Evaluator, FaoDag};
use crate::error::Result;
use crate::sparse::SparseMatrix;

pub trait LinearOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `y = A x`.
    fn forward(&mut self, x: &[f64], y: &mut [f64]);
    /// `x = Aᵀ y`.
    fn adjoint(&mut self, y: &[f64], x: &mut [f64]);
}

/// `A` given by an FAO DAG and its adjoint DAG, each with its own evaluator.
#[derive(Clone, Debug)]
pub struct DagOperator {
    fwd: Evaluator,
    adj: Evaluator,
}

impl DagOperator {
    pub fn new(dag: &FaoDag) -> Result<DagOperator> {
        Ok(DagOperator {
            fwd: Evaluator::new(dag)?,
            adj: Evaluator::new(&dag.adjoint())?,
        })
    }

    pub fn set_threads(&mut self, threads: usize) {
        self.fwd.set_threads(threads);
        self.adj.set_threads(threads);
    }
}

impl LinearOperator for DagOperator {
    fn rows(&self) -> usize {
        self.fwd.output_len()
    }

    fn cols(&self) -> usize {
        self.fwd.input_len()
    }

    fn forward(&mut self, x: &[f64], y: &mut [f64]) {
        self.fwd.apply_flat(x, y).expect("lengths checked by the solver");
    }

    fn adjoint(&mut self, y: &[f64], x: &mut [f64]) {
        self.adj.apply_flat(y, x).expect("lengths checked by the solver");
    }
}

impl LinearOperator for SparseMatrix {
    fn rows(&self) -> usize {
        SparseMatrix::rows(self)
    }

    fn cols(&self) -> usize {
        SparseMatrix::cols(self)
    }

    fn forward(&mut self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }

    fn adjoint(&mut self, y: &[f64], x: &mut [f64]) {
        self.matvec_t_into(y, x);
    }
}

/// The `0 × n` operator of an unconstrained problem.
#[derive(Clone, Copy, Debug)]
pub struct EmptyOperator(pub usize);

impl LinearOperator for EmptyOperator {
    fn rows(&self) -> usize {
        0
    }

    fn cols(&self) -> usize {
        self.0
    }

    fn forward(&mut self, _: &[f64], _: &mut [f64]) {}

    fn adjoint(&mut self, _: &[f64], x: &mut [f64]) {
        x.fill(0.0);
    }
}
