//! 1-D and 2-D convolution engines. A 1-D convolution is the 2-D case with
//! one column.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{fft_columns, fft_rows, next_pow2, FftPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvVariant {
    /// Full convolution, output `n + p - 1`.
    Column,
    /// Valid part only, output `n - p + 1`.
    Row,
    /// Periodic, kernel and input of equal size.
    Circular,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvMethod {
    /// Direct summation for small kernels, FFT otherwise.
    #[default]
    Auto,
    Direct,
    Fft,
}

impl ConvMethod {
    /// Resolves `Auto` for a kernel of `kdims` applied to an input of `idims`.
    pub fn resolve(self, kdims: (usize, usize), idims: (usize, usize)) -> ConvMethod {
        match self {
            ConvMethod::Auto => {
                let small = if kdims.1 == 1 && idims.1 == 1 {
                    let p = kdims.0;
                    let log2n = usize::BITS - 1 - idims.0.leading_zeros();
                    p <= 32 || p <= log2n as usize
                } else {
                    kdims.0 * kdims.1 <= 32
                };
                if small {
                    ConvMethod::Direct
                } else {
                    ConvMethod::Fft
                }
            }
            m => m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Extract {
    /// `y[k] = full[k + off]`.
    Crop(usize, usize),
    /// `y[k] = Σ full[k + a·n]`.
    Fold,
}

#[derive(Clone, Debug)]
struct Spectrum {
    n1: usize,
    n2: usize,
    plan1: FftPlan,
    plan2: FftPlan,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// One convolution of column-major blocks against a fixed kernel.
#[derive(Clone, Debug)]
pub(crate) struct ConvOp {
    kernel: Vec<f64>,
    kdims: (usize, usize),
    idims: (usize, usize),
    odims: (usize, usize),
    extract: Extract,
    fft: Option<Spectrum>,
}

impl ConvOp {
    pub(crate) fn new(
        variant: ConvVariant,
        kernel: Vec<f64>,
        kdims: (usize, usize),
        idims: (usize, usize),
        method: ConvMethod,
    ) -> Result<Self> {
        if kernel.len() != kdims.0 * kdims.1 || kernel.is_empty() {
            return Err(Error::dim("kernel length does not match its shape"));
        }
        let (odims, extract, grid) = match variant {
            ConvVariant::Column => {
                let o = (idims.0 + kdims.0 - 1, idims.1 + kdims.1 - 1);
                (o, Extract::Crop(0, 0), (next_pow2(o.0), next_pow2(o.1)))
            }
            ConvVariant::Row => {
                if idims.0 < kdims.0 || idims.1 < kdims.1 {
                    return Err(Error::dim(format!(
                        "row convolution kernel {kdims:?} is larger than the input {idims:?}"
                    )));
                }
                let o = (idims.0 - kdims.0 + 1, idims.1 - kdims.1 + 1);
                let full = (idims.0 + kdims.0 - 1, idims.1 + kdims.1 - 1);
                (
                    o,
                    Extract::Crop(kdims.0 - 1, kdims.1 - 1),
                    (next_pow2(full.0), next_pow2(full.1)),
                )
            }
            ConvVariant::Circular => {
                if kdims != idims {
                    return Err(Error::dim(format!(
                        "circular convolution kernel {kdims:?} must match the input {idims:?}"
                    )));
                }
                let g = |n: usize| if n.is_power_of_two() { n } else { next_pow2(2 * n - 1) };
                (idims, Extract::Fold, (g(idims.0), g(idims.1)))
            }
        };
        let mut op = ConvOp {
            kernel,
            kdims,
            idims,
            odims,
            extract,
            fft: None,
        };
        if method.resolve(kdims, idims) == ConvMethod::Fft {
            op.fft = Some(op.spectrum(grid)?);
        }
        Ok(op)
    }

    fn spectrum(&self, (n1, n2): (usize, usize)) -> Result<Spectrum> {
        let plan1 = FftPlan::new(n1)?;
        let plan2 = FftPlan::new(n2)?;
        let mut re = vec![0.0; n1 * n2];
        let mut im = vec![0.0; n1 * n2];
        for j in 0..self.kdims.1 {
            for i in 0..self.kdims.0 {
                re[i + j * n1] = self.kernel[i + j * self.kdims.0];
            }
        }
        let mut tmp = vec![0.0; 2 * n2];
        fft_columns(&plan1, &mut re, &mut im, false);
        if n2 > 1 {
            fft_rows(&plan2, n1, &mut re, &mut im, &mut tmp, false);
        }
        Ok(Spectrum {
            n1,
            n2,
            plan1,
            plan2,
            re,
            im,
        })
    }

    pub(crate) fn out_dims(&self) -> (usize, usize) {
        self.odims
    }

    pub(crate) fn uses_fft(&self) -> bool {
        self.fft.is_some()
    }

    pub(crate) fn scratch_len(&self) -> usize {
        self.fft.as_ref().map_or(0, |s| 2 * s.n1 * s.n2 + 2 * s.n2)
    }

    pub(crate) fn apply(&self, x: &[f64], y: &mut [f64], scratch: &mut [f64]) {
        match &self.fft {
            Some(s) => self.apply_fft(s, x, y, scratch),
            None => self.apply_direct(x, y),
        }
    }

    fn apply_direct(&self, x: &[f64], y: &mut [f64]) {
        let (s, t) = self.idims;
        let (p, q) = self.kdims;
        let (m1, m2) = self.odims;
        let c = &self.kernel;
        match self.extract {
            Extract::Crop(o1, o2) => {
                for k2 in 0..m2 {
                    for k1 in 0..m1 {
                        let (a1, a2) = (k1 + o1, k2 + o2);
                        // kernel indices with 0 <= a - i < input extent
                        let i1lo = (a1 + 1).saturating_sub(s);
                        let i1hi = p.min(a1 + 1);
                        let i2lo = (a2 + 1).saturating_sub(t);
                        let i2hi = q.min(a2 + 1);
                        let mut acc = 0.0;
                        for i2 in i2lo..i2hi {
                            let xc = &x[(a2 - i2) * s..];
                            let cc = &c[i2 * p..];
                            for i1 in i1lo..i1hi {
                                acc += cc[i1] * xc[a1 - i1];
                            }
                        }
                        y[k1 + k2 * m1] = acc;
                    }
                }
            }
            Extract::Fold => {
                for k2 in 0..m2 {
                    for k1 in 0..m1 {
                        let mut acc = 0.0;
                        for i2 in 0..q {
                            let j2 = (k2 + t - i2) % t;
                            for i1 in 0..p {
                                let j1 = (k1 + s - i1) % s;
                                acc += c[i1 + i2 * p] * x[j1 + j2 * s];
                            }
                        }
                        y[k1 + k2 * m1] = acc;
                    }
                }
            }
        }
    }

    fn apply_fft(&self, sp: &Spectrum, x: &[f64], y: &mut [f64], scratch: &mut [f64]) {
        let (n1, n2) = (sp.n1, sp.n2);
        let len = n1 * n2;
        let (re, rest) = scratch.split_at_mut(len);
        let (im, rest) = rest.split_at_mut(len);
        let tmp = &mut rest[..2 * n2];
        re.fill(0.0);
        im.fill(0.0);
        let (s, t) = self.idims;
        for j in 0..t {
            re[j * n1..j * n1 + s].copy_from_slice(&x[j * s..(j + 1) * s]);
        }
        fft_columns(&sp.plan1, re, im, false);
        if n2 > 1 {
            fft_rows(&sp.plan2, n1, re, im, tmp, false);
        }
        for k in 0..len {
            let (a, b) = (re[k], im[k]);
            let (c, d) = (sp.re[k], sp.im[k]);
            re[k] = a * c - b * d;
            im[k] = a * d + b * c;
        }
        fft_columns(&sp.plan1, re, im, true);
        if n2 > 1 {
            fft_rows(&sp.plan2, n1, re, im, tmp, true);
        }
        let scale = 1.0 / len as f64;
        let (m1, m2) = self.odims;
        match self.extract {
            Extract::Crop(o1, o2) => {
                for k2 in 0..m2 {
                    for k1 in 0..m1 {
                        y[k1 + k2 * m1] = re[k1 + o1 + (k2 + o2) * n1] * scale;
                    }
                }
            }
            Extract::Fold => {
                for k2 in 0..m2 {
                    for k1 in 0..m1 {
                        let mut acc = 0.0;
                        let mut g2 = k2;
                        while g2 < n2 {
                            let mut g1 = k1;
                            while g1 < n1 {
                                acc += re[g1 + g2 * n1];
                                g1 += m1;
                            }
                            g2 += m2;
                        }
                        y[k1 + k2 * m1] = acc * scale;
                    }
                }
            }
        }
    }
}

/// `rev(C)`: both axes reversed.
pub(crate) fn reversed(kernel: &[f64], (p, q): (usize, usize)) -> Vec<f64> {
    let mut r = vec![0.0; p * q];
    for j in 0..q {
        for i in 0..p {
            r[(p - 1 - i) + (q - 1 - j) * p] = kernel[i + j * p];
        }
    }
    r
}

/// The kernel whose circular convolution is the adjoint: `C̃[i, j] = C[-i mod s, -j mod t]`.
pub(crate) fn rotated(kernel: &[f64], (s, t): (usize, usize)) -> Vec<f64> {
    let mut r = vec![0.0; s * t];
    for j in 0..t {
        for i in 0..s {
            r[i + j * s] = kernel[(s - i) % s + ((t - j) % t) * s];
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(op: &ConvOp, x: &[f64]) -> Vec<f64> {
        let (m1, m2) = op.out_dims();
        let mut y = vec![0.0; m1 * m2];
        let mut s = vec![0.0; op.scratch_len()];
        op.apply(x, &mut y, &mut s);
        y
    }

    fn both(variant: ConvVariant, c: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let kd = (c.len(), 1);
        let id = (x.len(), 1);
        let d = ConvOp::new(variant, c.to_vec(), kd, id, ConvMethod::Direct).unwrap();
        let f = ConvOp::new(variant, c.to_vec(), kd, id, ConvMethod::Fft).unwrap();
        (run(&d, x), run(&f, x))
    }

    fn close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (u, v) in a.iter().zip(b) {
            assert!((u - v).abs() < 1e-10, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn column_example() {
        let (d, f) = both(ConvVariant::Column, &[1.0, 1.0], &[1.0, 2.0, 3.0]);
        assert_eq!(d, vec![1.0, 3.0, 5.0, 3.0]);
        close(&f, &d);
    }

    #[test]
    fn row_example() {
        let (d, f) = both(ConvVariant::Row, &[1.0, 1.0], &[1.0, 2.0, 3.0]);
        assert_eq!(d, vec![3.0, 5.0]);
        close(&f, &d);
    }

    #[test]
    fn circular_example() {
        let (d, f) = both(ConvVariant::Circular, &[0.0, 1.0, 0.0], &[1.0, 2.0, 3.0]);
        assert_eq!(d, vec![3.0, 1.0, 2.0]);
        close(&f, &d);
        let (d, f) = both(ConvVariant::Circular, &[0.0, 1.0, 0.0, 0.0], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(d, vec![4.0, 1.0, 2.0, 3.0]);
        close(&f, &d);
    }

    #[test]
    fn auto_threshold() {
        assert_eq!(ConvMethod::Auto.resolve((32, 1), (4096, 1)), ConvMethod::Direct);
        assert_eq!(ConvMethod::Auto.resolve((33, 1), (4096, 1)), ConvMethod::Fft);
        assert_eq!(ConvMethod::Auto.resolve((5, 5), (64, 64)), ConvMethod::Direct);
        assert_eq!(ConvMethod::Auto.resolve((6, 6), (64, 64)), ConvMethod::Fft);
    }

    #[test]
    fn row_rejects_long_kernel() {
        assert!(ConvOp::new(ConvVariant::Row, vec![1.0; 4], (4, 1), (3, 1), ConvMethod::Auto).is_err());
        assert!(ConvOp::new(ConvVariant::Circular, vec![1.0; 2], (2, 1), (3, 1), ConvMethod::Auto).is_err());
    }

    #[test]
    fn kernel_transforms() {
        assert_eq!(reversed(&[1.0, 2.0, 3.0, 4.0], (2, 2)), vec![4.0, 3.0, 2.0, 1.0]);
        assert_eq!(rotated(&[1.0, 2.0, 3.0], (3, 1)), vec![1.0, 3.0, 2.0]);
    }
}
