//! Unitary DFT on the real embedding `R^{2p}` (real parts, then imaginary parts).

use crate::error::{Error, Result};
use crate::fft::FftPlan;

#[derive(Clone, Debug)]
pub(crate) struct DftOp {
    p: usize,
    q: usize,
    plan_p: FftPlan,
    plan_q: FftPlan,
}

impl DftOp {
    /// `q == 1` gives the 1-D transform on `R^{2p}`; otherwise the input is `2p × q`.
    pub(crate) fn new(p: usize, q: usize) -> Result<Self> {
        let check = |n: usize| {
            if n.is_power_of_two() {
                FftPlan::new(n)
            } else {
                Err(Error::UnsupportedSize(format!("DFT length {n} is not a power of two")))
            }
        };
        Ok(DftOp {
            p,
            q,
            plan_p: check(p)?,
            plan_q: check(q)?,
        })
    }

    pub(crate) fn dims(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub(crate) fn scratch_len(&self) -> usize {
        if self.q > 1 {
            2 * self.q
        } else {
            0
        }
    }

    pub(crate) fn apply(&self, x: &[f64], y: &mut [f64], scratch: &mut [f64], inverse: bool) {
        let (p, q) = (self.p, self.q);
        y.copy_from_slice(x);
        for col in y.chunks_exact_mut(2 * p) {
            let (re, im) = col.split_at_mut(p);
            if inverse {
                self.plan_p.inverse(re, im);
            } else {
                self.plan_p.forward(re, im);
            }
        }
        if q > 1 {
            let (tr, ti) = scratch[..2 * q].split_at_mut(q);
            for r in 0..p {
                for c in 0..q {
                    tr[c] = y[r + c * 2 * p];
                    ti[c] = y[r + p + c * 2 * p];
                }
                if inverse {
                    self.plan_q.inverse(tr, ti);
                } else {
                    self.plan_q.forward(tr, ti);
                }
                for c in 0..q {
                    y[r + c * 2 * p] = tr[c];
                    y[r + p + c * 2 * p] = ti[c];
                }
            }
        }
        let scale = 1.0 / ((p * q) as f64).sqrt();
        y.iter_mut().for_each(|v| *v *= scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p1_is_identity() {
        let op = DftOp::new(1, 1).unwrap();
        let mut y = [0.0; 2];
        op.apply(&[3.0, -4.0], &mut y, &mut [], false);
        assert_eq!(y, [3.0, -4.0]);
    }

    #[test]
    fn p2_unit_impulse() {
        let op = DftOp::new(2, 1).unwrap();
        let mut y = [0.0; 4];
        op.apply(&[1.0, 0.0, 0.0, 0.0], &mut y, &mut [], false);
        let r = 1.0 / 2f64.sqrt();
        for (a, b) in y.iter().zip([r, r, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_odd_length() {
        assert!(matches!(DftOp::new(3, 1), Err(Error::UnsupportedSize(_))));
    }
}
