//! Semantics-preserving rewrites of FAO DAGs.

use crate::fao::{Fao, FaoKind};
use crate::shape::Shape;

use super::{DagBuilder, FaoDag, Port};

/// Upper bound on rewrite passes.
pub const MAX_PASSES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Src {
    Ext(usize),
    Node(usize, usize),
}

#[derive(Clone, Debug)]
struct WNode {
    fao: Fao,
    ins: Vec<Src>,
    alive: bool,
}

/// Editable form: each input port names its source, and external outputs
/// are listed in order.
#[derive(Clone, Debug)]
struct Work {
    nodes: Vec<WNode>,
    outputs: Vec<Src>,
}

impl Work {
    fn from_dag(dag: &FaoDag) -> Work {
        let ext: Vec<_> = dag.input_edges().to_vec();
        let nodes = dag
            .nodes()
            .iter()
            .map(|n| WNode {
                fao: n.fao.clone(),
                ins: n
                    .inputs
                    .iter()
                    .map(|&e| match dag.edge(e).src {
                        Some(p) => Src::Node(p.node, p.index),
                        None => Src::Ext(ext.iter().position(|&x| x == e).expect("external input")),
                    })
                    .collect(),
                alive: true,
            })
            .collect();
        let outputs = dag
            .output_edges()
            .iter()
            .map(|&e| {
                let p = dag.edge(e).src.expect("output has a source");
                Src::Node(p.node, p.index)
            })
            .collect();
        Work { nodes, outputs }
    }

    /// Every place a source is read: `Some((node, port))` or `None` for an
    /// external output slot.
    fn readers(&self, src: Src) -> Vec<Option<(usize, usize)>> {
        let mut r = Vec::new();
        for (n, node) in self.nodes.iter().enumerate().filter(|(_, n)| n.alive) {
            for (i, &s) in node.ins.iter().enumerate() {
                if s == src {
                    r.push(Some((n, i)));
                }
            }
        }
        r.extend(self.outputs.iter().filter(|&&s| s == src).map(|_| None));
        r
    }

    fn sole_reader(&self, src: Src) -> Option<(usize, usize)> {
        match self.readers(src).as_slice() {
            [Some(r)] => Some(*r),
            _ => None,
        }
    }

    fn replace(&mut self, from: Src, to: Src) {
        for node in self.nodes.iter_mut().filter(|n| n.alive) {
            for s in &mut node.ins {
                if *s == from {
                    *s = to;
                }
            }
        }
        for s in &mut self.outputs {
            if *s == from {
                *s = to;
            }
        }
    }

    /// Drops output port `port` of node `n`, renumbering the later ports.
    fn remove_output_port(&mut self, n: usize, port: usize) {
        let shift = |s: &mut Src| {
            if let Src::Node(m, p) = *s {
                if m == n && p > port {
                    *s = Src::Node(m, p - 1);
                }
            }
        };
        for node in self.nodes.iter_mut().filter(|n| n.alive) {
            node.ins.iter_mut().for_each(shift);
        }
        self.outputs.iter_mut().for_each(shift);
    }

    fn unary(&self, n: usize) -> bool {
        let f = &self.nodes[n].fao;
        self.nodes[n].alive && f.in_shapes().len() == 1 && f.out_shapes().len() == 1
    }

    fn to_dag(&self) -> Option<FaoDag> {
        let mut b = DagBuilder::new();
        let mut id = vec![usize::MAX; self.nodes.len()];
        for (n, node) in self.nodes.iter().enumerate().filter(|(_, n)| n.alive) {
            id[n] = b.add(node.fao.clone());
        }
        let mut ext_at = Vec::new();
        for (n, node) in self.nodes.iter().enumerate().filter(|(_, n)| n.alive) {
            for (i, &s) in node.ins.iter().enumerate() {
                match s {
                    Src::Node(m, p) => {
                        b.connect(Port::new(id[m], p), Port::new(id[n], i));
                    }
                    Src::Ext(k) => ext_at.push((id[n], i, k)),
                }
            }
        }
        let dag = b.build().ok()?;
        ext_at.sort();
        let ext_ok = ext_at.iter().enumerate().all(|(j, &(_, _, k))| j == k);
        let out_ok = dag.output_edges().len() == self.outputs.len()
            && dag.output_edges().iter().zip(&self.outputs).all(|(&e, &s)| {
                let p = dag.edge(e).src.expect("output has a source");
                matches!(s, Src::Node(m, q) if id[m] == p.node && q == p.index)
            });
        (ext_ok && out_ok).then_some(dag)
    }

    /// ABx + ACx → A(Bx + Cx): sum inputs produced by copies of one map.
    fn factor_common(&mut self) -> bool {
        for s in 0..self.nodes.len() {
            if !self.nodes[s].alive || self.nodes[s].fao.kind() != FaoKind::Sum {
                continue;
            }
            let ins = self.nodes[s].ins.clone();
            let candidate = |w: &Work, src: Src| match src {
                Src::Node(a, 0)
                    if w.unary(a)
                        && w.sole_reader(src).is_some()
                        && !matches!(w.nodes[a].fao.kind(), FaoKind::Identity | FaoKind::Zero) =>
                {
                    Some(a)
                }
                _ => None,
            };
            for i in 0..ins.len() {
                let Some(a) = candidate(self, ins[i]) else { continue };
                let group: Vec<(usize, usize)> = (i..ins.len())
                    .filter_map(|j| candidate(self, ins[j]).map(|b| (j, b)))
                    .filter(|&(_, b)| self.nodes[b].fao.same_map(&self.nodes[a].fao))
                    .collect();
                if group.len() < 2 {
                    continue;
                }
                let shape = self.nodes[a].fao.in_shapes()[0].clone();
                let inner_ins: Vec<Src> = group.iter().map(|&(_, b)| self.nodes[b].ins[0]).collect();
                let new_sum = self.nodes.len();
                self.nodes.push(WNode {
                    fao: Fao::sum(group.len(), shape).expect("at least two terms"),
                    ins: inner_ins,
                    alive: true,
                });
                self.nodes[a].ins = vec![Src::Node(new_sum, 0)];
                for &(_, b) in &group[1..] {
                    self.nodes[b].alive = false;
                }
                let drop: Vec<usize> = group[1..].iter().map(|&(j, _)| j).collect();
                let kept: Vec<Src> = ins
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !drop.contains(j))
                    .map(|(_, &x)| x)
                    .collect();
                let out_shape = self.nodes[s].fao.out_shapes()[0].clone();
                self.nodes[s].fao = Fao::sum(kept.len(), out_shape).expect("nonempty");
                self.nodes[s].ins = kept;
                return true;
            }
        }
        false
    }

    /// Q ∘ P → one precomputed node, for adjacent constant atoms where that
    /// is no more expensive to apply.
    fn fold_constants(&mut self) -> bool {
        for q in 0..self.nodes.len() {
            if !self.unary(q) {
                continue;
            }
            let Src::Node(p, 0) = self.nodes[q].ins[0] else {
                continue;
            };
            if !self.unary(p) || self.sole_reader(Src::Node(p, 0)) != Some((q, 0)) {
                continue;
            }
            let (fp, fq) = (&self.nodes[p].fao, &self.nodes[q].fao);
            let folded = if fq.kind() == FaoKind::Zero {
                Some(Fao::zero(fp.in_shapes()[0].clone(), fq.out_shapes()[0].clone()))
            } else {
                fold_pair(fp, fq)
            };
            if let Some(f) = folded {
                self.nodes[q].fao = f;
                self.nodes[q].ins = self.nodes[p].ins.clone();
                self.nodes[p].alive = false;
                return true;
            }
        }
        false
    }

    /// A zero map read from a copy and fed into a sum contributes nothing;
    /// drop it along with the copy and sum ports it occupies.
    fn drop_zero_terms(&mut self) -> bool {
        for z in 0..self.nodes.len() {
            if !self.unary(z) || self.nodes[z].fao.kind() != FaoKind::Zero {
                continue;
            }
            let Src::Node(c, cp) = self.nodes[z].ins[0] else {
                continue;
            };
            if self.nodes[c].fao.kind() != FaoKind::Copy || self.nodes[c].fao.out_shapes().len() < 2 {
                continue;
            }
            let Some((s, sp)) = self.sole_reader(Src::Node(z, 0)) else {
                continue;
            };
            if self.nodes[s].fao.kind() != FaoKind::Sum || self.nodes[s].ins.len() < 2 {
                continue;
            }
            self.nodes[z].alive = false;
            self.nodes[s].ins.remove(sp);
            let ss = self.nodes[s].fao.out_shapes()[0].clone();
            self.nodes[s].fao = Fao::sum(self.nodes[s].ins.len(), ss).expect("nonempty");
            let k = self.nodes[c].fao.out_shapes().len() - 1;
            let cs = self.nodes[c].fao.in_shapes()[0].clone();
            self.nodes[c].fao = Fao::copy(k, cs).expect("nonempty");
            self.remove_output_port(c, cp);
            return true;
        }
        false
    }

    /// Removes nodes that compute the identity map.
    fn elide_identities(&mut self) -> bool {
        for n in 0..self.nodes.len() {
            if !self.unary(n) || !is_identity(&self.nodes[n].fao) {
                continue;
            }
            let src = self.nodes[n].ins[0];
            let out = Src::Node(n, 0);
            if matches!(src, Src::Ext(_)) && self.readers(out).contains(&None) {
                continue;
            }
            self.nodes[n].alive = false;
            self.replace(out, src);
            return true;
        }
        false
    }
}

fn is_identity(f: &Fao) -> bool {
    match f.kind() {
        FaoKind::Identity | FaoKind::Sum | FaoKind::Copy | FaoKind::VStack | FaoKind::Split => {
            f.in_shapes()[0] == f.out_shapes()[0]
        }
        FaoKind::ScalarMult => f.scalar() == Some(1.0),
        _ => false,
    }
}

fn fold_pair(p: &Fao, q: &Fao) -> Option<Fao> {
    use FaoKind::{Dense, ScalarMult};
    let as_result = |m: crate::linalg::DenseMatrix| {
        if m.rows() == 1 && m.cols() == 1 {
            Fao::scalar_mult(m[(0, 0)], Shape::vector(1))
        } else {
            Fao::dense(m)
        }
    };
    match (p.kind(), q.kind()) {
        (ScalarMult, ScalarMult) => Some(Fao::scalar_mult(p.scalar()? * q.scalar()?, p.in_shapes()[0].clone())),
        (ScalarMult, Dense) => Some(as_result(q.dense_matrix()?.scaled(p.scalar()?))),
        (Dense, ScalarMult) => Some(as_result(p.dense_matrix()?.scaled(q.scalar()?))),
        (Dense, Dense) => {
            let (a, b) = (p.dense_matrix()?, q.dense_matrix()?);
            let (m, k, n) = (b.rows(), b.cols(), a.cols());
            (m * n <= m * k + k * n).then(|| as_result(b.matmul(&a).expect("conforming")))
        }
        _ => None,
    }
}

/// Applies common-successor factoring, constant folding, zero pruning and
/// identity elision until nothing changes or [`MAX_PASSES`] is reached.
/// A DAG with no rewrite opportunity comes back unchanged.
pub fn optimize(dag: &FaoDag) -> FaoDag {
    let mut work = Work::from_dag(dag);
    let mut changed_any = false;
    for _ in 0..MAX_PASSES {
        let mut changed = false;
        while work.factor_common() {
            changed = true;
        }
        while work.fold_constants() {
            changed = true;
        }
        while work.drop_zero_terms() {
            changed = true;
        }
        while work.elide_identities() {
            changed = true;
        }
        if !changed {
            break;
        }
        changed_any = true;
    }
    if !changed_any {
        return dag.clone();
    }
    work.to_dag().unwrap_or_else(|| dag.clone())
}
