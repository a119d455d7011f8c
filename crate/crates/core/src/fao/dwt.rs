//! Orthogonal discrete wavelet transform with periodic boundary.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthonormal filter pair (low pass `g`, high pass `h`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wavelet {
    #[default]
    Haar,
    /// Daubechies with two vanishing moments (four taps).
    Db2,
    Custom {
        low: Vec<f64>,
        high: Vec<f64>,
    },
}

impl Wavelet {
    pub fn filters(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Wavelet::Haar => (vec![1.0 / SQRT_2, 1.0 / SQRT_2], vec![1.0 / SQRT_2, -1.0 / SQRT_2]),
            Wavelet::Db2 => {
                let s3 = 3f64.sqrt();
                let d = 4.0 * SQRT_2;
                let g = vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d];
                let q = g.len();
                let h = (0..q)
                    .map(|k| if k % 2 == 0 { g[q - 1 - k] } else { -g[q - 1 - k] })
                    .collect();
                (g, h)
            }
            Wavelet::Custom { low, high } => (low.clone(), high.clone()),
        }
    }
}

/// Checks that the even shifts of `g` and `h` form an orthonormal system.
fn check_orthonormal(g: &[f64], h: &[f64]) -> Result<()> {
    let q = g.len();
    if q == 0 || q % 2 != 0 || h.len() != q {
        return Err(Error::arg("wavelet filters must have equal, even, nonzero length"));
    }
    let corr = |a: &[f64], b: &[f64], shift: isize| -> f64 {
        (0..q as isize)
            .filter_map(|k| {
                let j = k + shift;
                (0..q as isize).contains(&j).then(|| a[k as usize] * b[j as usize])
            })
            .sum()
    };
    for m in -(q as isize / 2)..=(q as isize / 2) {
        let shift = 2 * m;
        let delta = if m == 0 { 1.0 } else { 0.0 };
        if (corr(g, g, shift) - delta).abs() > 1e-10
            || (corr(h, h, shift) - delta).abs() > 1e-10
            || corr(g, h, shift).abs() > 1e-10
        {
            return Err(Error::arg("wavelet filters are not orthonormal"));
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub(crate) struct DwtOp {
    pub(crate) wavelet: Wavelet,
    g: Vec<f64>,
    h: Vec<f64>,
    n: usize,
    levels: usize,
    two_d: bool,
}

impl DwtOp {
    pub(crate) fn new(wavelet: Wavelet, n: usize, levels: usize, two_d: bool) -> Result<Self> {
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::UnsupportedSize(format!(
                "DWT length {n} is not a power of two of at least 2"
            )));
        }
        let max = n.trailing_zeros() as usize;
        if levels == 0 || levels > max {
            return Err(Error::arg(format!("DWT levels must be in 1..={max}, got {levels}")));
        }
        let (g, h) = wavelet.filters();
        check_orthonormal(&g, &h)?;
        Ok(DwtOp {
            wavelet,
            g,
            h,
            n,
            levels,
            two_d,
        })
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn levels(&self) -> usize {
        self.levels
    }

    pub(crate) fn two_d(&self) -> bool {
        self.two_d
    }

    pub(crate) fn filters(&self) -> (&[f64], &[f64]) {
        (&self.g, &self.h)
    }

    pub(crate) fn scratch_len(&self) -> usize {
        if self.two_d {
            2 * self.n
        } else {
            self.n
        }
    }

    pub(crate) fn apply(&self, x: &[f64], y: &mut [f64], scratch: &mut [f64], inverse: bool) {
        y.copy_from_slice(x);
        for l in 0..self.levels {
            let len = if inverse {
                self.n >> (self.levels - 1 - l)
            } else {
                self.n >> l
            };
            if self.two_d {
                self.level_2d(y, len, scratch, inverse);
            } else {
                let tmp = &mut scratch[..len];
                self.step(&y[..len], tmp, inverse);
                y[..len].copy_from_slice(tmp);
            }
        }
    }

    fn level_2d(&self, y: &mut [f64], len: usize, scratch: &mut [f64], inverse: bool) {
        let n = self.n;
        let (gather, rest) = scratch.split_at_mut(n);
        let out = &mut rest[..len];
        for j in 0..len {
            let col = &mut y[j * n..j * n + len];
            self.step(col, out, inverse);
            col.copy_from_slice(out);
        }
        for i in 0..len {
            for j in 0..len {
                gather[j] = y[i + j * n];
            }
            self.step(&gather[..len], out, inverse);
            for j in 0..len {
                y[i + j * n] = out[j];
            }
        }
    }

    /// One analysis (or synthesis) level on a block of length `len`.
    fn step(&self, src: &[f64], dst: &mut [f64], inverse: bool) {
        let len = src.len();
        let half = len / 2;
        let idx = |a: usize, k: usize| (2 * a + 1 + len * self.g.len() - k) % len;
        if inverse {
            dst.fill(0.0);
            for a in 0..half {
                let (lo, hi) = (src[a], src[half + a]);
                for (k, (g, h)) in self.g.iter().zip(&self.h).enumerate() {
                    dst[idx(a, k)] += g * lo + h * hi;
                }
            }
        } else {
            for a in 0..half {
                let (mut lo, mut hi) = (0.0, 0.0);
                for (k, (g, h)) in self.g.iter().zip(&self.h).enumerate() {
                    let v = src[idx(a, k)];
                    lo += g * v;
                    hi += h * v;
                }
                dst[a] = lo;
                dst[half + a] = hi;
            }
        }
    }
}
