//! FAO DAGs: composition graphs of forward-adjoint oracles.
//!
//! Each edge carries one array. External input edges (no source node) feed
//! the start node and external output edges (no destination) leave the end
//! node, mirroring the argument and result arrays of the composed map.

mod eval;
mod memory;
mod optimize;

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fao::{note_materialization, Fao};
use crate::linalg::DenseMatrix;
use crate::shape::Shape;

pub use eval::{evaluate, Evaluator};
pub use memory::{conflict_pairs, plan_memory, MemoryPlan};
pub use optimize::{optimize, MAX_PASSES};

pub type NodeId = usize;
pub type EdgeId = usize;

/// A node and one of its input or output positions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Port {
    pub node: NodeId,
    pub index: usize,
}

impl Port {
    pub fn new(node: NodeId, index: usize) -> Port {
        Port { node, index }
    }
}

#[derive(Clone, Debug)]
pub struct FaoNode {
    pub fao: Fao,
    pub inputs: Vec<EdgeId>,
    pub outputs: Vec<EdgeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaoEdge {
    /// Producing node and output index; `None` for an external input.
    pub src: Option<Port>,
    /// Consuming node and input index; `None` for an external output.
    pub dst: Option<Port>,
    pub shape: Shape,
}

impl FaoEdge {
    pub fn len(&self) -> usize {
        self.shape.total()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub struct FaoDag {
    nodes: Vec<FaoNode>,
    edges: Vec<FaoEdge>,
    start: NodeId,
    end: NodeId,
    inputs: Vec<EdgeId>,
    outputs: Vec<EdgeId>,
}

/// Incrementally wires oracles together. Ports left unconnected become the
/// DAG's external inputs and outputs, ordered by node then port.
#[derive(Clone, Debug, Default)]
pub struct DagBuilder {
    nodes: Vec<Fao>,
    links: Vec<(Port, Port)>,
}

impl DagBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, fao: Fao) -> NodeId {
        self.nodes.push(fao);
        self.nodes.len() - 1
    }

    /// Routes output `src` into input `dst`.
    pub fn connect(&mut self, src: Port, dst: Port) -> &mut Self {
        self.links.push((src, dst));
        self
    }

    /// Connects output 0 of `a` to input 0 of `b`.
    pub fn chain(&mut self, a: NodeId, b: NodeId) -> &mut Self {
        self.connect(Port::new(a, 0), Port::new(b, 0))
    }

    pub fn build(&self) -> Result<FaoDag> {
        let dag = self.build_unchecked()?;
        dag.validate()?;
        Ok(dag)
    }

    /// Assembles the graph without checking acyclicity, start/end uniqueness
    /// or destination shapes. Port ranges are still checked.
    pub fn build_unchecked(&self) -> Result<FaoDag> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidDag("no nodes".into()));
        }
        let mut in_edge: Vec<Vec<Option<EdgeId>>> =
            self.nodes.iter().map(|f| vec![None; f.in_shapes().len()]).collect();
        let mut out_edge: Vec<Vec<Option<EdgeId>>> =
            self.nodes.iter().map(|f| vec![None; f.out_shapes().len()]).collect();
        let mut edges = Vec::new();
        for &(s, d) in &self.links {
            let slot_ok = |p: Port, outs: bool| {
                self.nodes.get(p.node).is_some_and(|f| {
                    p.index
                        < if outs {
                            f.out_shapes().len()
                        } else {
                            f.in_shapes().len()
                        }
                })
            };
            if !slot_ok(s, true) || !slot_ok(d, false) {
                return Err(Error::InvalidDag(format!("link {s:?} -> {d:?} names a missing port")));
            }
            if out_edge[s.node][s.index].is_some() || in_edge[d.node][d.index].is_some() {
                return Err(Error::InvalidDag(format!("port used twice in link {s:?} -> {d:?}")));
            }
            let id = edges.len();
            edges.push(FaoEdge {
                src: Some(s),
                dst: Some(d),
                shape: self.nodes[s.node].out_shapes()[s.index].clone(),
            });
            out_edge[s.node][s.index] = Some(id);
            in_edge[d.node][d.index] = Some(id);
        }
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (n, f) in self.nodes.iter().enumerate() {
            for (i, slot) in in_edge[n].iter_mut().enumerate() {
                if slot.is_none() {
                    *slot = Some(edges.len());
                    inputs.push(edges.len());
                    edges.push(FaoEdge {
                        src: None,
                        dst: Some(Port::new(n, i)),
                        shape: f.in_shapes()[i].clone(),
                    });
                }
            }
            for (j, slot) in out_edge[n].iter_mut().enumerate() {
                if slot.is_none() {
                    *slot = Some(edges.len());
                    outputs.push(edges.len());
                    edges.push(FaoEdge {
                        src: Some(Port::new(n, j)),
                        dst: None,
                        shape: f.out_shapes()[j].clone(),
                    });
                }
            }
        }
        let nodes: Vec<FaoNode> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(n, f)| FaoNode {
                fao: f.clone(),
                inputs: in_edge[n].iter().map(|e| e.expect("filled")).collect(),
                outputs: out_edge[n].iter().map(|e| e.expect("filled")).collect(),
            })
            .collect();
        let first_dst = |e: &EdgeId| edges[*e].dst.map(|p| p.node);
        let first_src = |e: &EdgeId| edges[*e].src.map(|p| p.node);
        let start = inputs.first().and_then(first_dst).unwrap_or(0);
        let end = outputs.first().and_then(first_src).unwrap_or(nodes.len() - 1);
        Ok(FaoDag {
            nodes,
            edges,
            start,
            end,
            inputs,
            outputs,
        })
    }
}

impl FaoDag {
    /// A DAG holding a single oracle.
    pub fn single(fao: Fao) -> FaoDag {
        let mut b = DagBuilder::new();
        b.add(fao);
        b.build().expect("a single node is a valid DAG")
    }

    /// `f = fₖ ∘ … ∘ f₁` for single-input, single-output oracles.
    pub fn chain(faos: Vec<Fao>) -> Result<FaoDag> {
        let mut b = DagBuilder::new();
        let mut prev = None;
        for f in faos {
            let id = b.add(f);
            if let Some(p) = prev {
                b.chain(p, id);
            }
            prev = Some(id);
        }
        b.build()
    }

    pub fn nodes(&self) -> &[FaoNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[FaoEdge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &FaoNode {
        &self.nodes[id]
    }

    pub fn edge(&self, id: EdgeId) -> &FaoEdge {
        &self.edges[id]
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn end(&self) -> NodeId {
        self.end
    }

    pub fn input_edges(&self) -> &[EdgeId] {
        &self.inputs
    }

    pub fn output_edges(&self) -> &[EdgeId] {
        &self.outputs
    }

    pub fn input_shapes(&self) -> Vec<Shape> {
        self.inputs.iter().map(|&e| self.edges[e].shape.clone()).collect()
    }

    pub fn output_shapes(&self) -> Vec<Shape> {
        self.outputs.iter().map(|&e| self.edges[e].shape.clone()).collect()
    }

    /// Total length of all inputs.
    pub fn input_len(&self) -> usize {
        self.inputs.iter().map(|&e| self.edges[e].len()).sum()
    }

    /// Total length of all outputs.
    pub fn output_len(&self) -> usize {
        self.outputs.iter().map(|&e| self.edges[e].len()).sum()
    }

    /// Checks acyclicity, a unique start and end node, external edge
    /// placement and shape agreement on every edge.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (id, e) in self.edges.iter().enumerate() {
            if let Some(s) = e.src {
                let want = &self.nodes[s.node].fao.out_shapes()[s.index];
                if *want != e.shape {
                    problems.push(format!(
                        "shape mismatch on edge {id}: source produces {want}, edge is {}",
                        e.shape
                    ));
                }
            }
            if let Some(d) = e.dst {
                let want = &self.nodes[d.node].fao.in_shapes()[d.index];
                if *want != e.shape {
                    problems.push(format!(
                        "shape mismatch on edge {id}: destination expects {want}, edge is {}",
                        e.shape
                    ));
                }
            }
        }
        let no_in: Vec<NodeId> = (0..self.nodes.len())
            .filter(|&n| self.nodes[n].inputs.iter().all(|&e| self.edges[e].src.is_none()))
            .collect();
        let no_out: Vec<NodeId> = (0..self.nodes.len())
            .filter(|&n| self.nodes[n].outputs.iter().all(|&e| self.edges[e].dst.is_none()))
            .collect();
        if no_in.len() != 1 {
            problems.push(format!("expected one start node, found {no_in:?}"));
        }
        if no_out.len() != 1 {
            problems.push(format!("expected one end node, found {no_out:?}"));
        }
        if let (Some(&s), Some(&t)) = (no_in.first(), no_out.first()) {
            if no_in.len() == 1 && self.start != s {
                problems.push(format!("start node is {s}, recorded as {}", self.start));
            }
            if no_out.len() == 1 && self.end != t {
                problems.push(format!("end node is {t}, recorded as {}", self.end));
            }
        }
        for &e in &self.inputs {
            if self.edges[e].dst.map(|p| p.node) != Some(self.start) {
                problems.push(format!("external input edge {e} does not feed the start node"));
            }
        }
        for &e in &self.outputs {
            if self.edges[e].src.map(|p| p.node) != Some(self.end) {
                problems.push(format!("external output edge {e} does not leave the end node"));
            }
        }
        if self.topological_order().is_none() {
            problems.push("cycle detected".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDag(problems.join("; ")))
        }
    }

    /// Internal successors of a node, one entry per outgoing edge.
    pub(crate) fn successors(&self, n: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes[n]
            .outputs
            .iter()
            .filter_map(|&e| self.edges[e].dst.map(|p| p.node))
    }

    fn topological_order(&self) -> Option<Vec<NodeId>> {
        let mut indeg: Vec<usize> = self
            .nodes
            .iter()
            .map(|n| n.inputs.iter().filter(|&&e| self.edges[e].src.is_some()).count())
            .collect();
        let mut q: VecDeque<NodeId> = (0..self.nodes.len()).filter(|&n| indeg[n] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(u) = q.pop_front() {
            order.push(u);
            for v in self.successors(u) {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    q.push_back(v);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    /// Node order produced by the ready queue: start from the start node and
    /// append a successor once all of its predecessors have been evaluated.
    pub fn fifo_order(&self) -> Vec<NodeId> {
        self.fifo_waves().concat()
    }

    /// The ready-queue contents at each step where the queue is drained as a batch.
    pub(crate) fn fifo_waves(&self) -> Vec<Vec<NodeId>> {
        let n = self.nodes.len();
        let mut done = vec![false; n];
        let mut queued = vec![false; n];
        let mut waves = Vec::new();
        let mut wave = vec![self.start];
        queued[self.start] = true;
        while !wave.is_empty() {
            let mut next = Vec::new();
            for &u in &wave {
                done[u] = true;
            }
            for &u in &wave {
                for v in self.successors(u) {
                    let ready = self.nodes[v]
                        .inputs
                        .iter()
                        .all(|&e| self.edges[e].src.is_none_or(|p| done[p.node]));
                    if ready && !queued[v] {
                        queued[v] = true;
                        next.push(v);
                    }
                }
            }
            waves.push(wave);
            wave = next;
        }
        waves
    }

    /// The DAG of the adjoint map: every oracle replaced by its adjoint,
    /// every edge reversed, inputs and outputs exchanged.
    pub fn adjoint(&self) -> FaoDag {
        FaoDag {
            nodes: self
                .nodes
                .iter()
                .map(|n| FaoNode {
                    fao: n.fao.transposed(),
                    inputs: n.outputs.clone(),
                    outputs: n.inputs.clone(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| FaoEdge {
                    src: e.dst,
                    dst: e.src,
                    shape: e.shape.clone(),
                })
                .collect(),
            start: self.end,
            end: self.start,
            inputs: self.outputs.clone(),
            outputs: self.inputs.clone(),
        }
    }

    /// Same nodes (by map and orientation), same edges, same wiring.
    pub fn structurally_equal(&self, other: &FaoDag) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.edges == other.edges
            && self.start == other.start
            && self.end == other.end
            && self.inputs == other.inputs
            && self.outputs == other.outputs
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs && a.fao.same_map(&b.fao))
    }

    pub fn count_kind(&self, kind: crate::fao::FaoKind) -> usize {
        self.nodes.iter().filter(|n| n.fao.kind() == kind).count()
    }

    /// Materializes the composed map by evaluating it on every unit vector.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        note_materialization();
        let mut ev = Evaluator::new(self)?;
        let (n, m) = (self.input_len(), self.output_len());
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; m];
        let mut cols = Vec::with_capacity(n * m);
        for j in 0..n {
            x.fill(0.0);
            x[j] = 1.0;
            ev.apply_flat(&x, &mut y)?;
            cols.extend_from_slice(&y);
        }
        DenseMatrix::from_col_major(m, n, cols)
    }

    /// Graphviz-style text rendering for inspection.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph fao_dag {\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "  n{i} [label=\"{}\"];", n.fao.name());
        }
        for (id, e) in self.edges.iter().enumerate() {
            let src = e.src.map_or(format!("in{id}"), |p| format!("n{}", p.node));
            let dst = e.dst.map_or(format!("out{id}"), |p| format!("n{}", p.node));
            let _ = writeln!(s, "  {src} -> {dst} [label=\"e{id}: {}\"];", e.shape);
        }
        s.push_str("}\n");
        s
    }
}

#[cfg(test)]
mod tests;
