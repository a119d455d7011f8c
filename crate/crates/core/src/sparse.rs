//! Compressed sparse row matrices, backed by `sprs`.

use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub type Csr = CsMat<f64>;

/// A CSR matrix stored alongside its transpose so both products stream rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    a: Csr,
    at: Csr,
}

impl SparseMatrix {
    pub fn from_csr(a: Csr) -> Self {
        let a = if a.is_csr() { a } else { a.to_csr() };
        let at = a.transpose_view().to_csr();
        SparseMatrix { a, at }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::arg("matrix extents must be positive"));
        }
        let mut tri = TriMat::new((rows, cols));
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::dim(format!("triplet ({r}, {c}) outside a {rows}x{cols} matrix")));
            }
            tri.add_triplet(r, c, v);
        }
        Ok(Self::from_csr(tri.to_csr()))
    }

    pub fn from_dense(d: &DenseMatrix) -> Self {
        Self::from_csr(dense_to_csr(d))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_csr(CsMat::eye(n))
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    pub fn nnz(&self) -> usize {
        self.a.nnz()
    }

    pub fn csr(&self) -> &Csr {
        &self.a
    }

    pub fn transposed(&self) -> SparseMatrix {
        SparseMatrix {
            a: self.at.clone(),
            at: self.a.clone(),
        }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        csr_matvec_into(&self.a, x, y);
    }

    pub fn matvec_t_into(&self, y: &[f64], x: &mut [f64]) {
        csr_matvec_into(&self.at, y, x);
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.cols()];
        self.matvec_t_into(y, &mut x);
        x
    }

    pub fn to_dense(&self) -> DenseMatrix {
        csr_to_dense(&self.a)
    }

    /// Column indices and values stored in row `i`.
    pub(crate) fn row(&self, i: usize) -> (&[usize], &[f64]) {
        row_slices(&self.a, i)
    }

    /// Column indices and values stored in row `i` of the transpose.
    pub(crate) fn row_t(&self, i: usize) -> (&[usize], &[f64]) {
        row_slices(&self.at, i)
    }
}

/// `y = A x` for a CSR matrix.
pub fn csr_matvec_into(a: &Csr, x: &[f64], y: &mut [f64]) {
    debug_assert!(a.is_csr());
    debug_assert_eq!(x.len(), a.cols());
    debug_assert_eq!(y.len(), a.rows());
    let indptr = a.indptr();
    let ptr = indptr.raw_storage();
    let idx = a.indices();
    let val = a.data();
    for (i, yi) in y.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in ptr[i]..ptr[i + 1] {
            s += val[k] * x[idx[k]];
        }
        *yi = s;
    }
}

fn row_slices(a: &Csr, i: usize) -> (&[usize], &[f64]) {
    let ptr = a.indptr();
    let range = ptr.outer_inds_sz(i);
    (&a.indices()[range.clone()], &a.data()[range])
}

pub fn csr_to_dense(a: &Csr) -> DenseMatrix {
    let mut d = DenseMatrix::zeros(a.rows(), a.cols());
    for (&v, (i, j)) in a.iter() {
        d[(i, j)] += v;
    }
    d
}

pub fn dense_to_csr(d: &DenseMatrix) -> Csr {
    let mut tri = TriMat::new((d.rows(), d.cols()));
    for j in 0..d.cols() {
        for i in 0..d.rows() {
            let v = d[(i, j)];
            if v != 0.0 {
                tri.add_triplet(i, j, v);
            }
        }
    }
    tri.to_csr()
}

pub fn identity(n: usize) -> Csr {
    CsMat::eye(n)
}

/// An all-zero `rows × cols` CSR matrix.
pub fn zeros(rows: usize, cols: usize) -> Csr {
    CsMat::zero((rows, cols))
}

pub fn kron(a: &Csr, b: &Csr) -> Csr {
    sprs::kronecker_product(a.view(), b.view()).to_csr()
}

pub fn matmul(a: &Csr, b: &Csr) -> Result<Csr> {
    if a.cols() != b.rows() {
        return Err(Error::dim(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok((a * b).to_csr())
}

pub fn add(a: &Csr, b: &Csr) -> Result<Csr> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!("cannot add {:?} and {:?}", a.shape(), b.shape())));
    }
    Ok((a + b).to_csr())
}

pub fn scale(a: &Csr, alpha: f64) -> Csr {
    a.map(|v| alpha * v)
}

/// Stacks blocks vertically; all blocks need the same column count.
pub fn vstack(blocks: &[Csr]) -> Csr {
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    sprs::vstack(&views).to_csr()
}

/// Stacks blocks horizontally; all blocks need the same row count.
pub fn hstack(blocks: &[Csr]) -> Csr {
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    sprs::hstack(&views).to_csr()
}
