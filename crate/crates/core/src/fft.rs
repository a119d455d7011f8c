//! Iterative radix-2 FFT on split real/imaginary arrays.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Precomputed twiddles and bit-reversal permutation for one power-of-two length.
#[derive(Clone, Debug)]
pub struct FftPlan {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    rev: Vec<u32>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::UnsupportedSize(format!("FFT length {n} is not a power of two")));
        }
        let half = n / 2;
        let (cos, sin) = (0..half)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                (a.cos(), a.sin())
            })
            .unzip();
        let bits = n.trailing_zeros();
        let rev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Ok(FftPlan { n, cos, sin, rev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place transform with kernel `e^{-2πi jk/n}`.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        self.run(re, im, false);
    }

    /// In-place transform with kernel `e^{+2πi jk/n}`, not normalized.
    pub fn inverse(&self, re: &mut [f64], im: &mut [f64]) {
        self.run(re, im, true);
    }

    fn run(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        debug_assert!(re.len() == n && im.len() == n);
        for i in 0..n {
            let j = self.rev[i] as usize;
            if i < j {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let sign = if inverse { -1.0 } else { 1.0 };
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let wr = self.cos[k * stride];
                    let wi = sign * self.sin[k * stride];
                    let a = start + k;
                    let b = a + half;
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len <<= 1;
        }
    }
}

/// Smallest power of two that is at least `n`.
pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Applies `plan` to every column (contiguous, length `plan.len()`) of a column-major block.
pub(crate) fn fft_columns(plan: &FftPlan, re: &mut [f64], im: &mut [f64], inverse: bool) {
    let n = plan.len();
    for (cr, ci) in re.chunks_exact_mut(n).zip(im.chunks_exact_mut(n)) {
        plan.run(cr, ci, inverse);
    }
}

/// Applies `plan` to every row of a column-major `rows × plan.len()` block, using
/// `tmp` (length `2 * plan.len()`) as gather space.
pub(crate) fn fft_rows(plan: &FftPlan, rows: usize, re: &mut [f64], im: &mut [f64], tmp: &mut [f64], inverse: bool) {
    let n = plan.len();
    let (tr, ti) = tmp[..2 * n].split_at_mut(n);
    for r in 0..rows {
        for c in 0..n {
            tr[c] = re[r + c * rows];
            ti[c] = im[r + c * rows];
        }
        plan.run(tr, ti, inverse);
        for c in 0..n {
            re[r + c * rows] = tr[c];
            im[r + c * rows] = ti[c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(re: &[f64], im: &[f64], sign: f64) -> (Vec<f64>, Vec<f64>) {
        let n = re.len();
        let mut or = vec![0.0; n];
        let mut oi = vec![0.0; n];
        for k in 0..n {
            for j in 0..n {
                let a = sign * 2.0 * PI * (j * k) as f64 / n as f64;
                or[k] += re[j] * a.cos() - im[j] * a.sin();
                oi[k] += re[j] * a.sin() + im[j] * a.cos();
            }
        }
        (or, oi)
    }

    #[test]
    fn matches_direct_sum() {
        for n in [1, 2, 4, 8, 32] {
            let re: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
            let im: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
            let plan = FftPlan::new(n).unwrap();
            let (mut r, mut i) = (re.clone(), im.clone());
            plan.forward(&mut r, &mut i);
            let (er, ei) = naive(&re, &im, -1.0);
            for k in 0..n {
                assert!((r[k] - er[k]).abs() < 1e-10 && (i[k] - ei[k]).abs() < 1e-10);
            }
            plan.inverse(&mut r, &mut i);
            for k in 0..n {
                assert!((r[k] / n as f64 - re[k]).abs() < 1e-12);
                assert!((i[k] / n as f64 - im[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(FftPlan::new(6), Err(Error::UnsupportedSize(_))));
        assert_eq!(next_pow2(5), 8);
        assert_eq!(next_pow2(8), 8);
    }
}
