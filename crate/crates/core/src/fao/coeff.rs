//! Explicit sparse coefficients of each atom, assembled from the defining
//! formulas rather than from the fast algorithms.

use std::f64::consts::PI;

use sprs::{CsMat, TriMat};

use super::{note_materialization, prng, Atom, ConvVariant, Fao, Inner};
use crate::error::{Error, Result};
use crate::sparse::{self, dense_to_csr, Csr};

impl Fao {
    /// The sparse matrix `D` with `D vec(x_i) = vec(y_j)` for input `i` and
    /// output `j`, all other inputs held at zero.
    pub fn matrix_coeff(&self, input: usize, output: usize) -> Result<Csr> {
        let (ni, no) = (self.in_shapes().len(), self.out_shapes().len());
        if input >= ni || output >= no {
            return Err(Error::arg(format!(
                "{} has {ni} inputs and {no} outputs, asked for ({input}, {output})",
                self.name()
            )));
        }
        note_materialization();
        if self.adjoint {
            Ok(atom_coeff(&self.inner, output, input)?.transpose_view().to_csr())
        } else {
            atom_coeff(&self.inner, input, output)
        }
    }
}

fn atom_coeff(inner: &Inner, i: usize, j: usize) -> Result<Csr> {
    let n = inner.in_shapes[i].total();
    let m = inner.out_shapes[j].total();
    Ok(match &inner.atom {
        Atom::Identity | Atom::Reshape | Atom::Sum => CsMat::eye(n),
        Atom::Zero => sparse::zeros(m, n),
        Atom::ScalarMult(a) => sparse::scale(&CsMat::eye(n), *a),
        Atom::Dense(a) => {
            let cols = n / a.cols();
            sparse::kron(&CsMat::eye(cols), &dense_to_csr(a))
        }
        Atom::Sparse(a) => {
            let cols = n / a.cols();
            sparse::kron(&CsMat::eye(cols), a.csr())
        }
        Atom::LowRank { b, c } => dense_to_csr(&b.matmul(c)?),
        Atom::Dft(op) => dft_matrix(op.dims()),
        Atom::Conv {
            variant, kernel, kdims, ..
        } => conv_matrix(*variant, kernel, *kdims, inner.in_shapes[0].rows_cols()),
        Atom::Dwt(op) => {
            let (g, h) = op.filters();
            let mut acc: Csr = CsMat::eye(n);
            for l in 0..op.levels() {
                let len = op.n() >> l;
                let w = if op.two_d() {
                    dwt_level_2d(g, h, op.n(), len)
                } else {
                    dwt_level(g, h, op.n(), len)
                };
                acc = sparse::matmul(&w, &acc)?;
            }
            acc
        }
        Atom::MatrixProduct { a, b } => sparse::kron(&dense_to_csr(&b.transpose()), &dense_to_csr(a)),
        Atom::VStack => {
            let off: usize = inner.in_shapes[..i].iter().map(|s| s.total()).sum();
            let mut t = TriMat::new((m, n));
            for k in 0..n {
                t.add_triplet(off + k, k, 1.0);
            }
            t.to_csr()
        }
        Atom::SumEntries => {
            let mut t = TriMat::new((1, n));
            for k in 0..n {
                t.add_triplet(0, k, 1.0);
            }
            t.to_csr()
        }
        Atom::TriSolve { l, .. } => {
            let d = l.to_dense();
            let mut t = TriMat::new((n, n));
            for c in 0..n {
                let mut e = vec![0.0; n];
                e[c] = 1.0;
                for (r, v) in d.solve(&e)?.into_iter().enumerate() {
                    if v != 0.0 {
                        t.add_triplet(r, c, v);
                    }
                }
            }
            t.to_csr()
        }
        Atom::Prng { seed } => {
            let mut t = TriMat::new((m, n));
            for c in 0..n {
                for r in 0..m {
                    t.add_triplet(r, c, prng::entry(*seed, (r + c * m) as u64));
                }
            }
            t.to_csr()
        }
    })
}

/// The real-embedded unitary DFT on `2p × q` inputs from its defining sum.
fn dft_matrix((p, q): (usize, usize)) -> Csr {
    let rows = 2 * p;
    let idx = |r: usize, c: usize| r + c * rows;
    let scale = 1.0 / ((p * q) as f64).sqrt();
    let mut t = TriMat::new((rows * q, rows * q));
    for l in 0..q {
        for k in 0..p {
            for tt in 0..q {
                for s in 0..p {
                    let ang = -2.0 * PI * ((s * k) as f64 / p as f64 + (tt * l) as f64 / q as f64);
                    let (re, im) = (scale * ang.cos(), scale * ang.sin());
                    t.add_triplet(idx(k, l), idx(s, tt), re);
                    t.add_triplet(idx(k, l), idx(s + p, tt), -im);
                    t.add_triplet(idx(k + p, l), idx(s, tt), im);
                    t.add_triplet(idx(k + p, l), idx(s + p, tt), re);
                }
            }
        }
    }
    t.to_csr()
}

/// Toeplitz (column/row) or block-circulant coefficients of a convolution.
pub(crate) fn conv_matrix(variant: ConvVariant, kernel: &[f64], (p, q): (usize, usize), (s, t): (usize, usize)) -> Csr {
    let (m1, m2, o1, o2) = match variant {
        ConvVariant::Column => (s + p - 1, t + q - 1, 0, 0),
        ConvVariant::Row => (s - p + 1, t - q + 1, p - 1, q - 1),
        ConvVariant::Circular => (s, t, 0, 0),
    };
    let mut tri = TriMat::new((m1 * m2, s * t));
    for k2 in 0..m2 {
        for k1 in 0..m1 {
            for i2 in 0..q {
                for i1 in 0..p {
                    let c = kernel[i1 + i2 * p];
                    let (a1, a2) = ((k1 + o1) as isize - i1 as isize, (k2 + o2) as isize - i2 as isize);
                    let (j1, j2) = if variant == ConvVariant::Circular {
                        (a1.rem_euclid(s as isize), a2.rem_euclid(t as isize))
                    } else {
                        (a1, a2)
                    };
                    if (0..s as isize).contains(&j1) && (0..t as isize).contains(&j2) {
                        tri.add_triplet(k1 + k2 * m1, j1 as usize + j2 as usize * s, c);
                    }
                }
            }
        }
    }
    tri.to_csr()
}

/// One level `[D G; D H; I]` acting on the first `len` entries of a length-`n` vector.
fn dwt_block(g: &[f64], h: &[f64], len: usize) -> Vec<(usize, usize, f64)> {
    let half = len / 2;
    let mut out = Vec::new();
    for a in 0..half {
        // (D_k x)_a picks entry 2a+1 (0-based) of the circulant product
        for (k, (&gk, &hk)) in g.iter().zip(h).enumerate() {
            let col = (2 * a + 1 + len * g.len() - k) % len;
            out.push((a, col, gk));
            out.push((half + a, col, hk));
        }
    }
    out
}

fn dwt_level(g: &[f64], h: &[f64], n: usize, len: usize) -> Csr {
    let mut t = TriMat::new((n, n));
    for (r, c, v) in dwt_block(g, h, len) {
        t.add_triplet(r, c, v);
    }
    for k in len..n {
        t.add_triplet(k, k, 1.0);
    }
    t.to_csr()
}

fn dwt_level_2d(g: &[f64], h: &[f64], n: usize, len: usize) -> Csr {
    let block = dwt_block(g, h, len);
    let mut t = TriMat::new((n * n, n * n));
    for &(r2, c2, v2) in &block {
        for &(r1, c1, v1) in &block {
            t.add_triplet(r1 + r2 * n, c1 + c2 * n, v1 * v2);
        }
    }
    for j in 0..n {
        for i in 0..n {
            if i >= len || j >= len {
                t.add_triplet(i + j * n, i + j * n, 1.0);
            }
        }
    }
    t.to_csr()
}
