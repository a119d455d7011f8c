use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeKind {
    /// `{0}`.
    Zero,
    /// All of `Rⁿ`.
    Free,
    Nonneg,
    /// `{(x, t) : ‖x‖₂ ≤ t}` with `t` stored last.
    Soc,
}

impl ConeKind {
    pub fn name(self) -> &'static str {
        match self {
            ConeKind::Zero => "zero",
            ConeKind::Free => "free",
            ConeKind::Nonneg => "nonneg",
            ConeKind::Soc => "soc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cone {
    pub kind: ConeKind,
    pub size: usize,
}

impl Cone {
    pub fn new(kind: ConeKind, size: usize) -> Result<Cone> {
        if size == 0 {
            return Err(Error::arg(format!("{} cone of size 0", kind.name())));
        }
        Ok(Cone { kind, size })
    }

    /// Euclidean projection of `v` onto the cone, in place.
    pub fn project_in_place(&self, v: &mut [f64]) {
        match self.kind {
            ConeKind::Zero => v.fill(0.0),
            ConeKind::Free => {}
            ConeKind::Nonneg => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            ConeKind::Soc => {
                let (x, t) = v.split_at_mut(self.size - 1);
                let t = &mut t[0];
                let nx = norm2(x);
                if nx <= *t {
                    return;
                }
                if nx <= -*t {
                    x.fill(0.0);
                    *t = 0.0;
                    return;
                }
                let a = 0.5 * (nx + *t);
                let s = a / nx;
                x.iter_mut().for_each(|xi| *xi *= s);
                *t = a;
            }
        }
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.size {
            return Err(Error::dim(format!(
                "{} cone of size {} cannot project a length-{} vector",
                self.kind.name(),
                self.size,
                v.len()
            )));
        }
        let mut out = v.to_vec();
        self.project_in_place(&mut out);
        Ok(out)
    }

    /// Distance from `v` to the cone.
    pub fn distance(&self, v: &[f64]) -> f64 {
        let mut p = v.to_vec();
        self.project_in_place(&mut p);
        p.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Projects consecutive blocks of `v` onto the cones of `cones`.
pub fn project_product(cones: &[Cone], v: &mut [f64]) {
    let mut off = 0;
    for c in cones {
        c.project_in_place(&mut v[off..off + c.size]);
        off += c.size;
    }
}
