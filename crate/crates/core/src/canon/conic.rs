//! Replacement of nonlinear atoms by fresh variables and cone constraints.

use std::collections::HashMap;

use crate::error::Result;
use crate::expr::{Constraint, Expr, ExprBuilder, ExpressionDag, Func, NodeRef, Opr};
use crate::shape::Shape;
use crate::solver::ConeKind;

struct Lowering {
    b: ExprBuilder,
    extra: Vec<(Expr, ConeKind)>,
    new_vars: Vec<String>,
}

impl Lowering {
    fn fresh(&mut self, prefix: &str, shape: Shape) -> Expr {
        let e = self.b.fresh_variable(prefix, shape);
        self.new_vars
            .push(self.b.variables().last().expect("just added").0.clone());
        e
    }

    /// `s` with `vstack(s - z, s + z) ≥ 0`, as one constraint so that `z` is
    /// read by a single expression.
    fn abs_bound(&mut self, z: Expr) -> Result<Expr> {
        let s = self.fresh("_s", self.b.shape(z).clone());
        let lo = self.b.sub(s, z)?;
        let hi = self.b.add(s, z)?;
        let (lo, hi) = (self.b.vec(lo)?, self.b.vec(hi)?);
        let both = self.b.vstack(&[lo, hi])?;
        self.extra.push((both, ConeKind::Nonneg));
        Ok(s)
    }

    fn lower(&mut self, dag: &ExpressionDag) -> Result<Expr> {
        let mut map: HashMap<NodeRef, Expr> = HashMap::new();
        for (id, node) in dag.nodes().iter().enumerate() {
            let at = |port| NodeRef { node: id, port };
            let args: Vec<Expr> = node.args.iter().map(|a| map[a]).collect();
            let outs: Vec<Expr> = match &node.func {
                Func::Variable(v) => vec![self.b.variable(v, node.shapes[0].clone())?],
                Func::Constant(c) => vec![self.b.constant(node.shapes[0].clone(), c.to_vec())?],
                Func::Linear(f) => self.b.linear(f.clone(), &args)?,
                Func::Norm2 => {
                    let t = self.fresh("_t", Shape::vector(1));
                    let z = self.b.vec(args[0])?;
                    let cone = self.b.vstack(&[z, t])?;
                    self.extra.push((cone, ConeKind::Soc));
                    vec![t]
                }
                Func::SumSquares => {
                    // ‖(2z, t - 1)‖₂ ≤ t + 1  ⟺  ‖z‖² ≤ t
                    let t = self.fresh("_t", Shape::vector(1));
                    let z = self.b.vec(args[0])?;
                    let z2 = self.b.scale(2.0, z);
                    let one = self.b.scalar(1.0);
                    let tm = self.b.sub(t, one)?;
                    let one = self.b.scalar(1.0);
                    let tp = self.b.add(t, one)?;
                    let cone = self.b.vstack(&[z2, tm, tp])?;
                    self.extra.push((cone, ConeKind::Soc));
                    vec![t]
                }
                Func::Norm1 => {
                    let s = self.abs_bound(args[0])?;
                    vec![self.b.sum_entries(s)]
                }
                Func::Abs => vec![self.abs_bound(args[0])?],
            };
            for (port, e) in outs.into_iter().enumerate() {
                map.insert(at(port), e);
            }
        }
        Ok(map[&dag.end()])
    }
}

/// The problem with every nonlinear atom replaced by its graph
/// implementation, plus the names of the variables introduced.
///
/// Original variables keep their declaration order and the new ones follow.
/// Constraints keep their order, matrix-valued ones are vectorized, and the
/// constraints generated by the replacements are appended in creation order
/// (objective first).
pub fn conic_form(p: &Opr) -> Result<(Opr, Vec<String>)> {
    let mut l = Lowering {
        b: ExprBuilder::new(),
        extra: Vec::new(),
        new_vars: Vec::new(),
    };
    for (name, shape) in &p.variables {
        l.b.variable(name, shape.clone())?;
    }
    let obj = l.lower(&p.objective)?;
    let mut cons = Vec::with_capacity(p.constraints.len());
    for c in &p.constraints {
        let e = l.lower(&c.expr)?;
        let e = l.b.vec(e)?;
        cons.push((e, c.cone));
    }
    cons.append(&mut l.extra);
    let opr = Opr {
        variables: l.b.variables().to_vec(),
        objective: l.b.dag(obj),
        constraints: cons
            .into_iter()
            .map(|(e, cone)| Constraint { expr: l.b.dag(e), cone })
            .collect(),
    };
    Ok((opr, l.new_vars))
}
