//! Forward-adjoint oracles.
//!
//! A [`Fao`] packages a linear function with algorithms for applying it and
//! its adjoint, along with its input/output shapes and the size of the
//! workspace those algorithms need. Atoms are immutable and reference counted,
//! so duplicated nodes share their parameter data.

mod coeff;
mod conv;
mod dft;
mod dwt;
pub(crate) mod prng;

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

pub use conv::{ConvMethod, ConvVariant};
pub use dwt::Wavelet;

use crate::error::{Error, Result};
use crate::linalg::{gemm_nn, gemm_nt, gemm_tn, DenseMatrix};
use crate::shape::Shape;
use crate::sparse::SparseMatrix;
use conv::ConvOp;
use dft::DftOp;
use dwt::DwtOp;

thread_local! {
    static MATERIALIZATIONS: Cell<usize> = const { Cell::new(0) };
}

/// Number of explicit matrix materializations performed on this thread.
///
/// Every call that turns an operator into stored coefficients (for example
/// [`Fao::matrix_coeff`] or [`crate::FaoDag::to_dense`]) bumps this counter.
pub fn materialization_count() -> usize {
    MATERIALIZATIONS.with(Cell::get)
}

pub(crate) fn note_materialization() {
    MATERIALIZATIONS.with(|c| c.set(c.get() + 1));
}

/// Which atom a [`Fao`] evaluates, seen from its current orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FaoKind {
    Identity,
    Reshape,
    Zero,
    ScalarMult,
    Dense,
    Sparse,
    LowRank,
    Dft,
    Conv,
    Dwt,
    MatrixProduct,
    Sum,
    Copy,
    VStack,
    Split,
    SumEntries,
    Broadcast,
    TriSolve,
    Prng,
}

/// How an atom's outputs relate to its input storage when evaluated in a
/// shared buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AliasKind {
    /// Outputs are computed.
    None,
    /// The single output holds exactly the input data.
    Reshape,
    /// Every output holds exactly the input data.
    Copy,
    /// Outputs are consecutive segments of the input.
    Split,
    /// The output is the concatenation of the inputs.
    VStack,
}

/// Sign pattern of all coefficients of a linear map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoeffSign {
    Nonneg,
    Nonpos,
    Mixed,
}

impl CoeffSign {
    fn of(values: impl IntoIterator<Item = f64>) -> CoeffSign {
        let (mut pos, mut neg) = (false, false);
        for v in values {
            pos |= v > 0.0;
            neg |= v < 0.0;
        }
        match (pos, neg) {
            (_, false) => CoeffSign::Nonneg,
            (false, true) => CoeffSign::Nonpos,
            (true, true) => CoeffSign::Mixed,
        }
    }

    fn compose(self, other: CoeffSign) -> CoeffSign {
        use CoeffSign::*;
        match (self, other) {
            (Mixed, _) | (_, Mixed) => Mixed,
            (a, b) if a == b => Nonneg,
            _ => Nonpos,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Atom {
    Identity,
    Reshape,
    Zero,
    ScalarMult(f64),
    /// Applied to each column of the input.
    Dense(DenseMatrix),
    /// Applied to each column of the input.
    Sparse(SparseMatrix),
    LowRank {
        b: DenseMatrix,
        c: DenseMatrix,
    },
    Dft(DftOp),
    Conv {
        variant: ConvVariant,
        kernel: Vec<f64>,
        kdims: (usize, usize),
        fwd: ConvOp,
        adj: ConvOp,
    },
    Dwt(DwtOp),
    MatrixProduct {
        a: DenseMatrix,
        b: DenseMatrix,
    },
    Sum,
    VStack,
    SumEntries,
    TriSolve {
        l: SparseMatrix,
        diag: Vec<f64>,
    },
    Prng {
        seed: u64,
    },
}

#[derive(Debug)]
pub(crate) struct Inner {
    pub(crate) atom: Atom,
    in_shapes: Vec<Shape>,
    out_shapes: Vec<Shape>,
    scratch: (usize, usize),
}

/// A linear function with forward and adjoint evaluation algorithms.
#[derive(Clone)]
pub struct Fao {
    inner: Arc<Inner>,
    adjoint: bool,
}

impl fmt::Debug for Fao {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fao({}: ", self.name())?;
        shapes_fmt(f, self.in_shapes())?;
        write!(f, " -> ")?;
        shapes_fmt(f, self.out_shapes())?;
        write!(f, ")")
    }
}

fn shapes_fmt(f: &mut fmt::Formatter<'_>, shapes: &[Shape]) -> fmt::Result {
    let parts: Vec<String> = shapes.iter().map(Shape::to_string).collect();
    write!(f, "[{}]", parts.join(", "))
}

impl Fao {
    fn build(atom: Atom, in_shapes: Vec<Shape>, out_shapes: Vec<Shape>, scratch: (usize, usize)) -> Fao {
        Fao {
            inner: Arc::new(Inner {
                atom,
                in_shapes,
                out_shapes,
                scratch,
            }),
            adjoint: false,
        }
    }

    pub fn identity(shape: Shape) -> Fao {
        Fao::build(Atom::Identity, vec![shape.clone()], vec![shape], (0, 0))
    }

    /// Reinterprets the input as a different shape with the same number of entries.
    pub fn reshape(from: Shape, to: Shape) -> Result<Fao> {
        if from.total() != to.total() {
            return Err(Error::dim(format!("cannot reshape {from} into {to}")));
        }
        Ok(Fao::build(Atom::Reshape, vec![from], vec![to], (0, 0)))
    }

    /// `vec`: stacks the columns of a `p × q` matrix.
    pub fn vec(p: usize, q: usize) -> Fao {
        Fao::build(
            Atom::Reshape,
            vec![Shape::matrix(p, q)],
            vec![Shape::vector(p * q)],
            (0, 0),
        )
    }

    /// `mat`: the adjoint of [`Fao::vec`].
    pub fn mat(p: usize, q: usize) -> Fao {
        Fao::vec(p, q).transposed()
    }

    /// The zero map between two shapes.
    pub fn zero(from: Shape, to: Shape) -> Fao {
        Fao::build(Atom::Zero, vec![from], vec![to], (0, 0))
    }

    pub fn scalar_mult(alpha: f64, shape: Shape) -> Fao {
        Fao::build(Atom::ScalarMult(alpha), vec![shape.clone()], vec![shape], (0, 0))
    }

    pub fn neg(shape: Shape) -> Fao {
        Fao::scalar_mult(-1.0, shape)
    }

    /// Multiplication by a dense `m × n` matrix on a length-`n` vector.
    pub fn dense(a: DenseMatrix) -> Fao {
        let (m, n) = (a.rows(), a.cols());
        Fao::build(Atom::Dense(a), vec![Shape::vector(n)], vec![Shape::vector(m)], (0, 0))
    }

    /// Multiplication by a dense matrix applied to the input's columns.
    pub fn dense_on(a: DenseMatrix, input: Shape) -> Result<Fao> {
        let out = columnwise_out(a.rows(), a.cols(), &input)?;
        Ok(Fao::build(Atom::Dense(a), vec![input], vec![out], (0, 0)))
    }

    /// Multiplication by a sparse matrix on a vector.
    pub fn sparse(a: SparseMatrix) -> Fao {
        let (m, n) = (a.rows(), a.cols());
        Fao::build(Atom::Sparse(a), vec![Shape::vector(n)], vec![Shape::vector(m)], (0, 0))
    }

    /// Multiplication by a sparse matrix applied to the input's columns.
    pub fn sparse_on(a: SparseMatrix, input: Shape) -> Result<Fao> {
        let out = columnwise_out(a.rows(), a.cols(), &input)?;
        Ok(Fao::build(Atom::Sparse(a), vec![input], vec![out], (0, 0)))
    }

    /// Multiplication by `A = B C` with `B` `m × k` and `C` `k × n`.
    pub fn low_rank(b: DenseMatrix, c: DenseMatrix) -> Result<Fao> {
        if b.cols() != c.rows() {
            return Err(Error::dim(format!(
                "low-rank factors {}x{} and {}x{} do not chain",
                b.rows(),
                b.cols(),
                c.rows(),
                c.cols()
            )));
        }
        let (m, k, n) = (b.rows(), b.cols(), c.cols());
        Ok(Fao::build(
            Atom::LowRank { b, c },
            vec![Shape::vector(n)],
            vec![Shape::vector(m)],
            (k, k),
        ))
    }

    /// Unitary DFT on a length-`2p` vector or a `2p × q` matrix (real parts in
    /// the top half). `p` and `q` must be powers of two.
    pub fn dft(shape: Shape) -> Result<Fao> {
        let (r, q) = shape.rows_cols();
        if r % 2 != 0 {
            return Err(Error::dim(format!("DFT input {shape} needs an even row count")));
        }
        let op = DftOp::new(r / 2, q)?;
        let s = op.scratch_len();
        Ok(Fao::build(Atom::Dft(op), vec![shape.clone()], vec![shape], (s, s)))
    }

    /// 1-D convolution with `kernel` on a vector input.
    pub fn conv(variant: ConvVariant, kernel: &[f64], input: Shape) -> Result<Fao> {
        if input.is_matrix() {
            return Err(Error::dim("1-D convolution needs a vector input"));
        }
        Fao::conv_with(
            variant,
            kernel,
            Shape::vector(kernel.len().max(1)),
            input,
            ConvMethod::Auto,
        )
    }

    /// 2-D convolution with a `p × q` kernel on a matrix input.
    pub fn conv2(variant: ConvVariant, kernel: &DenseMatrix, input: Shape) -> Result<Fao> {
        if !input.is_matrix() {
            return Err(Error::dim("2-D convolution needs a matrix input"));
        }
        Fao::conv_with(
            variant,
            kernel.as_slice(),
            Shape::matrix(kernel.rows(), kernel.cols()),
            input,
            ConvMethod::Auto,
        )
    }

    /// Convolution with an explicit evaluation method. Kernel entries are column-major.
    pub fn conv_with(
        variant: ConvVariant,
        kernel: &[f64],
        kshape: Shape,
        input: Shape,
        method: ConvMethod,
    ) -> Result<Fao> {
        if kshape.is_matrix() != input.is_matrix() {
            return Err(Error::dim(format!(
                "kernel {kshape} and input {input} differ in dimensionality"
            )));
        }
        let kdims = kshape.rows_cols();
        let idims = input.rows_cols();
        let method = method.resolve(kdims, idims);
        let fwd = ConvOp::new(variant, kernel.to_vec(), kdims, idims, method)?;
        let odims = fwd.out_dims();
        let adj = match variant {
            ConvVariant::Column => ConvOp::new(ConvVariant::Row, conv::reversed(kernel, kdims), kdims, odims, method)?,
            ConvVariant::Row => ConvOp::new(ConvVariant::Column, conv::reversed(kernel, kdims), kdims, odims, method)?,
            ConvVariant::Circular => ConvOp::new(
                ConvVariant::Circular,
                conv::rotated(kernel, kdims),
                kdims,
                idims,
                method,
            )?,
        };
        let out = if input.is_matrix() {
            Shape::matrix(odims.0, odims.1)
        } else {
            Shape::vector(odims.0)
        };
        let scratch = (fwd.scratch_len(), adj.scratch_len());
        Ok(Fao::build(
            Atom::Conv {
                variant,
                kernel: kernel.to_vec(),
                kdims,
                fwd,
                adj,
            },
            vec![input],
            vec![out],
            scratch,
        ))
    }

    /// Orthogonal DWT on a length-`2^p` vector or a `2^p × 2^p` matrix.
    pub fn dwt(levels: usize, wavelet: Wavelet, shape: Shape) -> Result<Fao> {
        let (r, c) = shape.rows_cols();
        let two_d = shape.is_matrix();
        if two_d && r != c {
            return Err(Error::dim(format!("2-D DWT needs a square input, got {shape}")));
        }
        let op = DwtOp::new(wavelet, r, levels, two_d)?;
        let s = op.scratch_len();
        Ok(Fao::build(Atom::Dwt(op), vec![shape.clone()], vec![shape], (s, s)))
    }

    /// `X ↦ A X B` with `A` `s × p` and `B` `q × t`.
    pub fn matrix_product(a: DenseMatrix, b: DenseMatrix) -> Fao {
        let (s, p) = (a.rows(), a.cols());
        let (q, t) = (b.rows(), b.cols());
        let scratch = (s * q).max(p * t);
        Fao::build(
            Atom::MatrixProduct { a, b },
            vec![Shape::matrix(p, q)],
            vec![Shape::matrix(s, t)],
            (scratch, scratch),
        )
    }

    /// Sum of `k` inputs of the same shape.
    pub fn sum(k: usize, shape: Shape) -> Result<Fao> {
        if k < 1 {
            return Err(Error::arg("sum needs at least one input"));
        }
        Ok(Fao::build(Atom::Sum, vec![shape.clone(); k], vec![shape], (0, 0)))
    }

    /// `k` copies of the input.
    pub fn copy(k: usize, shape: Shape) -> Result<Fao> {
        Ok(Fao::sum(k, shape)?.transposed())
    }

    /// Concatenation of the (vectorized) inputs.
    pub fn vstack(shapes: Vec<Shape>) -> Result<Fao> {
        if shapes.is_empty() {
            return Err(Error::arg("vstack needs at least one input"));
        }
        let total = shapes.iter().map(Shape::total).sum();
        Ok(Fao::build(Atom::VStack, shapes, vec![Shape::vector(total)], (0, 0)))
    }

    /// Splits a vector into consecutive pieces of the given shapes.
    pub fn split(shapes: Vec<Shape>) -> Result<Fao> {
        Ok(Fao::vstack(shapes)?.transposed())
    }

    /// Sum of all entries, giving a length-1 vector.
    pub fn sum_entries(shape: Shape) -> Fao {
        Fao::build(Atom::SumEntries, vec![shape], vec![Shape::vector(1)], (0, 0))
    }

    /// `x ↦ L⁻¹ x` for a sparse lower-triangular `L` with nonzero diagonal.
    pub fn tri_solve(l: SparseMatrix) -> Result<Fao> {
        let n = l.rows();
        if l.cols() != n {
            return Err(Error::dim("triangular solve needs a square matrix"));
        }
        let mut diag = vec![0.0; n];
        for (i, d) in diag.iter_mut().enumerate() {
            let (cols, vals) = l.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i && v != 0.0 {
                    return Err(Error::arg(format!("entry ({i}, {j}) above the diagonal")));
                }
                if j == i {
                    *d += v;
                }
            }
            if *d == 0.0 {
                return Err(Error::Singular(format!("zero diagonal entry at {i}")));
            }
        }
        Ok(Fao::build(
            Atom::TriSolve { l, diag },
            vec![Shape::vector(n)],
            vec![Shape::vector(n)],
            (0, 0),
        ))
    }

    /// Multiplication by an implicit `m × n` matrix whose column-major entries
    /// come from a seeded stream uniform on (-1, 1).
    pub fn prng(seed: u64, m: usize, n: usize) -> Fao {
        Fao::build(
            Atom::Prng { seed },
            vec![Shape::vector(n)],
            vec![Shape::vector(m)],
            (0, 0),
        )
    }

    /// The adjoint oracle: the map `f*` evaluated by `f`'s adjoint algorithm.
    pub fn transposed(&self) -> Fao {
        Fao {
            inner: Arc::clone(&self.inner),
            adjoint: !self.adjoint,
        }
    }

    pub fn is_transposed(&self) -> bool {
        self.adjoint
    }

    pub fn in_shapes(&self) -> &[Shape] {
        if self.adjoint {
            &self.inner.out_shapes
        } else {
            &self.inner.in_shapes
        }
    }

    pub fn out_shapes(&self) -> &[Shape] {
        if self.adjoint {
            &self.inner.in_shapes
        } else {
            &self.inner.out_shapes
        }
    }

    pub fn in_len(&self) -> usize {
        self.in_shapes().iter().map(Shape::total).sum()
    }

    pub fn out_len(&self) -> usize {
        self.out_shapes().iter().map(Shape::total).sum()
    }

    /// Workspace (in `f64` entries) needed by [`Fao::apply_forward`].
    pub fn scratch_len(&self) -> usize {
        if self.adjoint {
            self.inner.scratch.1
        } else {
            self.inner.scratch.0
        }
    }

    /// Workspace in bytes covering both directions.
    pub fn scratch_bytes(&self) -> usize {
        8 * self.inner.scratch.0.max(self.inner.scratch.1)
    }

    /// Whether two oracles share the same parameter storage.
    pub fn shares_data(&self, other: &Fao) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    pub fn kind(&self) -> FaoKind {
        use FaoKind as K;
        let t = self.adjoint;
        match &self.inner.atom {
            Atom::Identity => K::Identity,
            Atom::Reshape => K::Reshape,
            Atom::Zero => K::Zero,
            Atom::ScalarMult(_) => K::ScalarMult,
            Atom::Dense(_) => K::Dense,
            Atom::Sparse(_) => K::Sparse,
            Atom::LowRank { .. } => K::LowRank,
            Atom::Dft(_) => K::Dft,
            Atom::Conv { .. } => K::Conv,
            Atom::Dwt(_) => K::Dwt,
            Atom::MatrixProduct { .. } => K::MatrixProduct,
            Atom::Sum if t => K::Copy,
            Atom::Sum => K::Sum,
            Atom::VStack if t => K::Split,
            Atom::VStack => K::VStack,
            Atom::SumEntries if t => K::Broadcast,
            Atom::SumEntries => K::SumEntries,
            Atom::TriSolve { .. } => K::TriSolve,
            Atom::Prng { .. } => K::Prng,
        }
    }

    /// Short human-readable atom name.
    pub fn name(&self) -> String {
        let t = if self.adjoint { "^T" } else { "" };
        match &self.inner.atom {
            Atom::Identity => "identity".into(),
            Atom::Reshape => {
                let (i, o) = (&self.in_shapes()[0], &self.out_shapes()[0]);
                match (i.is_matrix(), o.is_matrix()) {
                    (true, false) => "vec".into(),
                    (false, true) => "mat".into(),
                    _ => "reshape".into(),
                }
            }
            Atom::Zero => "zero".into(),
            Atom::ScalarMult(a) => format!("scalar_mult({a})"),
            Atom::Dense(_) => format!("dense{t}"),
            Atom::Sparse(_) => format!("sparse{t}"),
            Atom::LowRank { .. } => format!("low_rank{t}"),
            Atom::Dft(_) => if self.adjoint { "idft" } else { "dft" }.into(),
            Atom::Conv { variant, kdims, .. } => {
                let d = if kdims.1 > 1 || self.inner.in_shapes[0].is_matrix() {
                    "conv2"
                } else {
                    "conv"
                };
                let v = match variant {
                    ConvVariant::Column => "column",
                    ConvVariant::Row => "row",
                    ConvVariant::Circular => "circular",
                };
                format!("{d}_{v}{t}")
            }
            Atom::Dwt(op) => {
                let base = if op.two_d() { "dwt2" } else { "dwt" };
                if self.adjoint {
                    format!("i{base}")
                } else {
                    base.into()
                }
            }
            Atom::MatrixProduct { .. } => format!("matrix_product{t}"),
            Atom::Sum => if self.adjoint { "copy" } else { "sum" }.into(),
            Atom::VStack => if self.adjoint { "split" } else { "vstack" }.into(),
            Atom::SumEntries => if self.adjoint { "broadcast" } else { "sum_entries" }.into(),
            Atom::TriSolve { .. } => format!("tri_solve{t}"),
            Atom::Prng { .. } => format!("prng{t}"),
        }
    }

    pub fn alias_kind(&self) -> AliasKind {
        match self.kind() {
            FaoKind::Identity | FaoKind::Reshape => AliasKind::Reshape,
            FaoKind::Copy => AliasKind::Copy,
            FaoKind::Split => AliasKind::Split,
            FaoKind::VStack => AliasKind::VStack,
            _ => AliasKind::None,
        }
    }

    /// Whether the output may occupy the same storage as the input.
    pub fn in_place_safe(&self) -> bool {
        matches!(self.kind(), FaoKind::ScalarMult | FaoKind::Identity | FaoKind::Reshape)
    }

    /// Sign pattern of the map's coefficients.
    pub fn coefficient_sign(&self) -> CoeffSign {
        match &self.inner.atom {
            Atom::Identity | Atom::Reshape | Atom::Zero | Atom::Sum | Atom::VStack | Atom::SumEntries => {
                CoeffSign::Nonneg
            }
            Atom::ScalarMult(a) => CoeffSign::of([*a]),
            Atom::Dense(a) => CoeffSign::of(a.as_slice().iter().copied()),
            Atom::Sparse(a) => CoeffSign::of(a.csr().data().iter().copied()),
            Atom::LowRank { b, c } => {
                CoeffSign::of(b.as_slice().iter().copied()).compose(CoeffSign::of(c.as_slice().iter().copied()))
            }
            Atom::Conv { kernel, .. } => CoeffSign::of(kernel.iter().copied()),
            Atom::MatrixProduct { a, b } => {
                CoeffSign::of(a.as_slice().iter().copied()).compose(CoeffSign::of(b.as_slice().iter().copied()))
            }
            Atom::Dft(_) | Atom::Dwt(_) | Atom::TriSolve { .. } | Atom::Prng { .. } => CoeffSign::Mixed,
        }
    }

    /// The scalar `α` of a scalar-multiplication atom.
    pub fn scalar(&self) -> Option<f64> {
        match self.inner.atom {
            Atom::ScalarMult(a) => Some(a),
            _ => None,
        }
    }

    /// The effective dense matrix of a dense atom acting on a vector.
    pub fn dense_matrix(&self) -> Option<DenseMatrix> {
        match &self.inner.atom {
            Atom::Dense(a) if !self.inner.in_shapes[0].is_matrix() => {
                Some(if self.adjoint { a.transpose() } else { a.clone() })
            }
            _ => None,
        }
    }

    /// Whether both oracles compute the same map from the same parameters.
    pub fn same_map(&self, other: &Fao) -> bool {
        if self.adjoint != other.adjoint {
            return false;
        }
        if self.shares_data(other) {
            return true;
        }
        let (a, b) = (&*self.inner, &*other.inner);
        if a.in_shapes != b.in_shapes || a.out_shapes != b.out_shapes {
            return false;
        }
        match (&a.atom, &b.atom) {
            (Atom::Identity, Atom::Identity)
            | (Atom::Reshape, Atom::Reshape)
            | (Atom::Zero, Atom::Zero)
            | (Atom::Sum, Atom::Sum)
            | (Atom::VStack, Atom::VStack)
            | (Atom::SumEntries, Atom::SumEntries) => true,
            (Atom::ScalarMult(x), Atom::ScalarMult(y)) => x == y,
            (Atom::Dense(x), Atom::Dense(y)) => x == y,
            (Atom::Sparse(x), Atom::Sparse(y)) => x == y,
            (Atom::LowRank { b: b1, c: c1 }, Atom::LowRank { b: b2, c: c2 }) => b1 == b2 && c1 == c2,
            (Atom::Dft(_), Atom::Dft(_)) => true,
            (
                Atom::Conv {
                    variant: v1,
                    kernel: k1,
                    kdims: d1,
                    ..
                },
                Atom::Conv {
                    variant: v2,
                    kernel: k2,
                    kdims: d2,
                    ..
                },
            ) => v1 == v2 && k1 == k2 && d1 == d2,
            (Atom::Dwt(x), Atom::Dwt(y)) => x.wavelet == y.wavelet && x.levels() == y.levels(),
            (Atom::MatrixProduct { a: a1, b: b1 }, Atom::MatrixProduct { a: a2, b: b2 }) => a1 == a2 && b1 == b2,
            (Atom::TriSolve { l: x, .. }, Atom::TriSolve { l: y, .. }) => x == y,
            (Atom::Prng { seed: x }, Atom::Prng { seed: y }) => x == y,
            _ => false,
        }
    }

    /// Whether the FFT path is used (convolutions only).
    pub fn uses_fft(&self) -> bool {
        match &self.inner.atom {
            Atom::Conv { fwd, .. } => fwd.uses_fft(),
            _ => false,
        }
    }

    /// Evaluates `f` without allocating. Inputs, outputs and scratch are
    /// checked against the declared shapes.
    pub fn apply_forward(&self, inputs: &[&[f64]], outputs: &mut [&mut [f64]], scratch: &mut [f64]) -> Result<()> {
        self.check(inputs, outputs, scratch.len(), self.scratch_len())?;
        self.run(inputs, outputs, scratch);
        Ok(())
    }

    /// Evaluates `f*` without allocating.
    pub fn apply_adjoint(&self, inputs: &[&[f64]], outputs: &mut [&mut [f64]], scratch: &mut [f64]) -> Result<()> {
        self.transposed().apply_forward(inputs, outputs, scratch)
    }

    /// Allocating convenience wrapper around [`Fao::apply_forward`].
    pub fn forward(&self, inputs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let mut outs: Vec<Vec<f64>> = self.out_shapes().iter().map(|s| vec![0.0; s.total()]).collect();
        let mut scratch = vec![0.0; self.scratch_len()];
        let mut refs: Vec<&mut [f64]> = outs.iter_mut().map(Vec::as_mut_slice).collect();
        self.apply_forward(inputs, &mut refs, &mut scratch)?;
        Ok(outs)
    }

    /// Allocating convenience wrapper around [`Fao::apply_adjoint`].
    pub fn adjoint(&self, inputs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        self.transposed().forward(inputs)
    }

    fn check(&self, inputs: &[&[f64]], outputs: &[&mut [f64]], have: usize, need: usize) -> Result<()> {
        let (is, os) = (self.in_shapes(), self.out_shapes());
        if inputs.len() != is.len() || outputs.len() != os.len() {
            return Err(Error::dim(format!(
                "{} expects {} inputs and {} outputs, got {} and {}",
                self.name(),
                is.len(),
                os.len(),
                inputs.len(),
                outputs.len()
            )));
        }
        for (k, (x, s)) in inputs.iter().zip(is).enumerate() {
            if x.len() != s.total() {
                return Err(Error::dim(format!(
                    "{} input {k} has length {}, expected {s}",
                    self.name(),
                    x.len()
                )));
            }
        }
        for (k, (y, s)) in outputs.iter().zip(os).enumerate() {
            if y.len() != s.total() {
                return Err(Error::dim(format!(
                    "{} output {k} has length {}, expected {s}",
                    self.name(),
                    y.len()
                )));
            }
        }
        if have < need {
            return Err(Error::dim(format!(
                "{} needs {need} scratch entries, got {have}",
                self.name()
            )));
        }
        Ok(())
    }

    /// Evaluates the oracle in its current orientation; lengths must already conform.
    pub(crate) fn run(&self, inputs: &[&[f64]], outputs: &mut [&mut [f64]], scratch: &mut [f64]) {
        let fwd = !self.adjoint;
        let inner = &*self.inner;
        match &inner.atom {
            Atom::Identity | Atom::Reshape => outputs[0].copy_from_slice(inputs[0]),
            Atom::Zero => outputs[0].fill(0.0),
            Atom::ScalarMult(a) => {
                for (y, x) in outputs[0].iter_mut().zip(inputs[0]) {
                    *y = a * x;
                }
            }
            Atom::Dense(a) => {
                let (m, n) = (a.rows(), a.cols());
                if fwd {
                    for (x, y) in inputs[0].chunks_exact(n).zip(outputs[0].chunks_exact_mut(m)) {
                        a.matvec_into(x, y);
                    }
                } else {
                    for (u, v) in inputs[0].chunks_exact(m).zip(outputs[0].chunks_exact_mut(n)) {
                        a.matvec_t_into(u, v);
                    }
                }
            }
            Atom::Sparse(a) => {
                let (m, n) = (a.rows(), a.cols());
                if fwd {
                    for (x, y) in inputs[0].chunks_exact(n).zip(outputs[0].chunks_exact_mut(m)) {
                        a.matvec_into(x, y);
                    }
                } else {
                    for (u, v) in inputs[0].chunks_exact(m).zip(outputs[0].chunks_exact_mut(n)) {
                        a.matvec_t_into(u, v);
                    }
                }
            }
            Atom::LowRank { b, c } => {
                let t = &mut scratch[..b.cols()];
                if fwd {
                    c.matvec_into(inputs[0], t);
                    b.matvec_into(t, outputs[0]);
                } else {
                    b.matvec_t_into(inputs[0], t);
                    c.matvec_t_into(t, outputs[0]);
                }
            }
            Atom::Dft(op) => op.apply(inputs[0], outputs[0], scratch, !fwd),
            Atom::Conv { fwd: f, adj, .. } => {
                if fwd {
                    f.apply(inputs[0], outputs[0], scratch);
                } else {
                    adj.apply(inputs[0], outputs[0], scratch);
                }
            }
            Atom::Dwt(op) => op.apply(inputs[0], outputs[0], scratch, !fwd),
            Atom::MatrixProduct { a, b } => {
                let (s, p) = (a.rows(), a.cols());
                let (q, t) = (b.rows(), b.cols());
                let inv = |v: usize| 1.0 / v as f64;
                let a_first = inv(t) + inv(p) < inv(s) + inv(q);
                let (x, y) = (inputs[0], &mut *outputs[0]);
                if fwd {
                    if a_first {
                        let w = &mut scratch[..s * q];
                        gemm_nn(a.as_slice(), s, p, x, q, w);
                        gemm_nn(w, s, q, b.as_slice(), t, y);
                    } else {
                        let w = &mut scratch[..p * t];
                        gemm_nn(x, p, q, b.as_slice(), t, w);
                        gemm_nn(a.as_slice(), s, p, w, t, y);
                    }
                } else if a_first {
                    // U Bᵀ first mirrors the cost of the A-first forward order
                    let w = &mut scratch[..s * q];
                    gemm_nt(x, s, t, b.as_slice(), q, w);
                    gemm_tn(a.as_slice(), s, p, w, q, y);
                } else {
                    let w = &mut scratch[..p * t];
                    gemm_tn(a.as_slice(), s, p, x, t, w);
                    gemm_nt(w, p, t, b.as_slice(), q, y);
                }
            }
            Atom::Sum => {
                if fwd {
                    let y = &mut *outputs[0];
                    y.copy_from_slice(inputs[0]);
                    for x in &inputs[1..] {
                        for (yi, xi) in y.iter_mut().zip(x.iter()) {
                            *yi += xi;
                        }
                    }
                } else {
                    for y in outputs.iter_mut() {
                        y.copy_from_slice(inputs[0]);
                    }
                }
            }
            Atom::VStack => {
                if fwd {
                    let mut off = 0;
                    for x in inputs {
                        outputs[0][off..off + x.len()].copy_from_slice(x);
                        off += x.len();
                    }
                } else {
                    let mut off = 0;
                    for y in outputs.iter_mut() {
                        let n = y.len();
                        y.copy_from_slice(&inputs[0][off..off + n]);
                        off += n;
                    }
                }
            }
            Atom::SumEntries => {
                if fwd {
                    outputs[0][0] = inputs[0].iter().sum();
                } else {
                    outputs[0].fill(inputs[0][0]);
                }
            }
            Atom::TriSolve { l, diag } => {
                let n = diag.len();
                let (x, y) = (inputs[0], &mut *outputs[0]);
                if fwd {
                    for i in 0..n {
                        let (cols, vals) = l.row(i);
                        let mut s = x[i];
                        for (&j, &v) in cols.iter().zip(vals) {
                            if j < i {
                                s -= v * y[j];
                            }
                        }
                        y[i] = s / diag[i];
                    }
                } else {
                    for i in (0..n).rev() {
                        let (rows, vals) = l.row_t(i);
                        let mut s = x[i];
                        for (&j, &v) in rows.iter().zip(vals) {
                            if j > i {
                                s -= v * y[j];
                            }
                        }
                        y[i] = s / diag[i];
                    }
                }
            }
            Atom::Prng { seed } => {
                let m = inner.out_shapes[0].total();
                if fwd {
                    prng::forward(*seed, m, inputs[0], outputs[0]);
                } else {
                    prng::adjoint(*seed, m, inputs[0], outputs[0]);
                }
            }
        }
    }
}

fn columnwise_out(m: usize, n: usize, input: &Shape) -> Result<Shape> {
    let (r, c) = input.rows_cols();
    if r != n {
        return Err(Error::dim(format!(
            "matrix with {n} columns cannot multiply input {input}"
        )));
    }
    Ok(if input.is_matrix() {
        Shape::matrix(m, c)
    } else {
        Shape::vector(m)
    })
}
