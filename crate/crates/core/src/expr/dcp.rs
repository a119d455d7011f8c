//! Curvature and sign analysis by the DCP composition rule.

use std::fmt;

use crate::fao::CoeffSign;
use crate::solver::ConeKind;

use super::{ExprId, ExpressionDag, Func, Opr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Curvature {
    Constant,
    Affine,
    Convex,
    Concave,
    Unknown,
}

impl Curvature {
    /// Least upper bound: constant ≤ affine ≤ {convex, concave} ≤ unknown.
    pub fn join(self, other: Curvature) -> Curvature {
        use Curvature::*;
        match (self, other) {
            (a, b) if a == b => a,
            (Constant, b) | (b, Constant) => b,
            (Affine, b) | (b, Affine) => b,
            _ => Unknown,
        }
    }

    pub fn negate(self) -> Curvature {
        match self {
            Curvature::Convex => Curvature::Concave,
            Curvature::Concave => Curvature::Convex,
            c => c,
        }
    }

    pub fn is_convex(self) -> bool {
        matches!(self, Curvature::Constant | Curvature::Affine | Curvature::Convex)
    }

    pub fn is_concave(self) -> bool {
        matches!(self, Curvature::Constant | Curvature::Affine | Curvature::Concave)
    }

    pub fn is_affine(self) -> bool {
        matches!(self, Curvature::Constant | Curvature::Affine)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Nonneg,
    Nonpos,
    Unknown,
}

impl Sign {
    fn of_values(v: &[f64]) -> Sign {
        if v.iter().all(|&x| x >= 0.0) {
            Sign::Nonneg
        } else if v.iter().all(|&x| x <= 0.0) {
            Sign::Nonpos
        } else {
            Sign::Unknown
        }
    }

    fn times(self, c: CoeffSign) -> Sign {
        match (self, c) {
            (_, CoeffSign::Mixed) | (Sign::Unknown, _) => Sign::Unknown,
            (s, CoeffSign::Nonneg) => s,
            (Sign::Nonneg, CoeffSign::Nonpos) => Sign::Nonpos,
            (Sign::Nonpos, CoeffSign::Nonpos) => Sign::Nonneg,
        }
    }

    fn plus(self, other: Sign) -> Sign {
        if self == other {
            self
        } else {
            Sign::Unknown
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    None,
}

/// Curvature of `f(g₁, …, gₖ)` from the curvature of `f` and, per argument,
/// the curvature of `gᵢ` and the monotonicity of `f` in that argument.
pub fn compose(atom: Curvature, args: &[(Curvature, Monotonicity)]) -> Curvature {
    use Curvature::*;
    if args.iter().all(|(c, _)| *c == Constant) {
        return if atom == Unknown { Unknown } else { Constant };
    }
    // Curvature each argument contributes through a monotone map.
    let through = |(c, m): (Curvature, Monotonicity)| match (c, m) {
        (Constant | Affine, _) => c,
        (Convex | Concave, Monotonicity::Increasing) => c,
        (Convex | Concave, Monotonicity::Decreasing) => c.negate(),
        _ => Unknown,
    };
    match atom {
        Constant | Affine => args.iter().fold(Constant, |acc, &a| acc.join(through(a))).join(Affine),
        Convex if args.iter().all(|&a| through(a).is_convex()) => Convex,
        Concave if args.iter().all(|&a| through(a).is_concave()) => Concave,
        _ => Unknown,
    }
}

fn monotonicity_on(sign: Sign) -> Monotonicity {
    match sign {
        Sign::Nonneg => Monotonicity::Increasing,
        Sign::Nonpos => Monotonicity::Decreasing,
        Sign::Unknown => Monotonicity::None,
    }
}

/// Curvature and sign of every node output (all outputs of a node share them).
pub fn analyze(dag: &ExpressionDag) -> Vec<(Curvature, Sign)> {
    let mut info: Vec<(Curvature, Sign)> = Vec::with_capacity(dag.nodes().len());
    for node in dag.nodes() {
        let args: Vec<(Curvature, Sign)> = node.args.iter().map(|a| info[a.node]).collect();
        let r = match &node.func {
            Func::Variable(_) => (Curvature::Affine, Sign::Unknown),
            Func::Constant(v) => (Curvature::Constant, Sign::of_values(v)),
            Func::Linear(f) => {
                let cs = f.coefficient_sign();
                let mono = match cs {
                    CoeffSign::Nonneg => Monotonicity::Increasing,
                    CoeffSign::Nonpos => Monotonicity::Decreasing,
                    CoeffSign::Mixed => Monotonicity::None,
                };
                let curv = compose(
                    Curvature::Affine,
                    &args.iter().map(|&(c, _)| (c, mono)).collect::<Vec<_>>(),
                );
                let sign = args
                    .iter()
                    .map(|&(_, s)| s.times(cs))
                    .reduce(Sign::plus)
                    .unwrap_or(Sign::Unknown);
                (curv, sign)
            }
            Func::SumSquares | Func::Norm2 | Func::Norm1 | Func::Abs => {
                let curv = compose(
                    Curvature::Convex,
                    &args.iter().map(|&(c, s)| (c, monotonicity_on(s))).collect::<Vec<_>>(),
                );
                (curv, Sign::Nonneg)
            }
        };
        info.push(r);
    }
    info
}

/// Curvature and sign of the DAG's end output.
pub fn curvature_of(dag: &ExpressionDag) -> (Curvature, Sign) {
    analyze(dag)[dag.end().node]
}

/// Where a DCP check failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DcpViolation {
    /// `None` for the objective, otherwise the constraint index.
    pub constraint: Option<usize>,
    pub node: ExprId,
    pub message: String,
}

impl fmt::Display for DcpViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constraint {
            None => write!(f, "objective, node {}: {}", self.node, self.message),
            Some(i) => write!(f, "constraint {i}, node {}: {}", self.node, self.message),
        }
    }
}

impl From<DcpViolation> for crate::error::Error {
    fn from(v: DcpViolation) -> Self {
        crate::error::Error::Dcp(v.to_string())
    }
}

/// The node to blame: the first whose curvature is unknown, else the end node.
fn culprit(dag: &ExpressionDag, info: &[(Curvature, Sign)]) -> ExprId {
    info.iter()
        .position(|(c, _)| *c == Curvature::Unknown)
        .unwrap_or(dag.end().node)
}

/// Checks that the objective is convex and scalar and that every constraint
/// is convex with respect to its cone.
pub fn validate_dcp(p: &Opr) -> Result<(), DcpViolation> {
    let info = analyze(&p.objective);
    let (curv, _) = info[p.objective.end().node];
    if p.objective.shape().total() != 1 {
        return Err(DcpViolation {
            constraint: None,
            node: p.objective.end().node,
            message: format!("objective has shape {}, expected a scalar", p.objective.shape()),
        });
    }
    if !curv.is_convex() {
        return Err(DcpViolation {
            constraint: None,
            node: culprit(&p.objective, &info),
            message: format!("objective is {curv:?}, not convex"),
        });
    }
    for (i, c) in p.constraints.iter().enumerate() {
        let info = analyze(&c.expr);
        let (curv, _) = info[c.expr.end().node];
        let ok = match c.cone {
            ConeKind::Zero | ConeKind::Free | ConeKind::Soc => curv.is_affine(),
            ConeKind::Nonneg => curv.is_concave(),
        };
        if !ok {
            return Err(DcpViolation {
                constraint: Some(i),
                node: culprit(&c.expr, &info),
                message: format!("{curv:?} expression in a {} cone", c.cone.name()),
            });
        }
    }
    Ok(())
}
