//! Placement of edge arrays in one global buffer.
//!
//! Two edges may share storage when one is guaranteed dead before the other
//! is written: `e` is consumed by a node that precedes the producer of `f`
//! along a directed path, or both meet at an in-place-safe node. Alias nodes
//! (reshape, copy, split, vstack) additionally let arrays overlap by offset,
//! so those nodes usually cost nothing at evaluation time.

use crate::fao::{AliasKind, FaoKind};

use super::{EdgeId, FaoDag};

/// Symmetric relation over edge ids stored as a bit matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConflictSet {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl ConflictSet {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        ConflictSet {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    fn insert(&mut self, e: EdgeId, f: EdgeId) {
        self.bits[e * self.words + f / 64] |= 1 << (f % 64);
        self.bits[f * self.words + e / 64] |= 1 << (e % 64);
    }

    pub fn contains(&self, e: EdgeId, f: EdgeId) -> bool {
        e < self.n && f < self.n && self.bits[e * self.words + f / 64] >> (f % 64) & 1 == 1
    }

    /// Unordered pairs `(e, f)` with `e < f`.
    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, EdgeId)> + '_ {
        (0..self.n).flat_map(move |e| {
            (e + 1..self.n)
                .filter(move |&f| self.contains(e, f))
                .map(move |f| (e, f))
        })
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum::<usize>() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }
}

/// Offsets of every edge array in a shared buffer of `global_size` entries.
#[derive(Clone, Debug)]
pub struct MemoryPlan {
    /// `assignments[e]` is the offset `z_e` of edge `e`.
    pub assignments: Vec<usize>,
    /// Buffer length in `f64` entries.
    pub global_size: usize,
    /// Pairs that must not overlap. Edges aliased onto one array by
    /// reshape/copy/split/vstack nodes are excluded since they are meant to
    /// share storage.
    pub conflict_pairs: ConflictSet,
    pub(crate) lengths: Vec<usize>,
}

impl MemoryPlan {
    pub fn global_bytes(&self) -> usize {
        self.global_size * std::mem::size_of::<f64>()
    }

    /// The sum of all edge lengths: the size without any sharing.
    pub fn naive_size(&self) -> usize {
        self.lengths.iter().sum()
    }

    pub fn range(&self, e: EdgeId) -> std::ops::Range<usize> {
        self.assignments[e]..self.assignments[e] + self.lengths[e]
    }

    /// Whether the plan fits `dag` and honors every conflict pair.
    pub fn is_valid_for(&self, dag: &FaoDag) -> bool {
        let edges = dag.edges();
        edges.len() == self.assignments.len()
            && edges.iter().zip(&self.lengths).all(|(e, &l)| e.len() == l)
            && (0..edges.len()).all(|e| self.range(e).end <= self.global_size)
            && self.conflict_pairs.iter().all(|(e, f)| {
                let (a, b) = (self.range(e), self.range(f));
                a.end <= b.start || b.end <= a.start
            })
    }
}

/// `reach[u]` holds the nodes reachable from `u` by a path of length ≥ 1.
fn strict_reach(dag: &FaoDag) -> Vec<Vec<u64>> {
    let n = dag.nodes().len();
    let words = n.div_ceil(64);
    let mut reach = vec![vec![0u64; words]; n];
    for &u in dag.fifo_order().iter().rev() {
        let mut acc = vec![0u64; words];
        for v in dag.successors(u) {
            acc[v / 64] |= 1 << (v % 64);
            for (a, r) in acc.iter_mut().zip(&reach[v]) {
                *a |= r;
            }
        }
        reach[u] = acc;
    }
    reach
}

/// The set `U` of edge pairs that may be in use at the same time.
///
/// External inputs count as written before any node runs and external
/// outputs as read after every node has run. Edges meeting at one node
/// conflict unless that node is in-place-safe.
pub fn conflict_pairs(dag: &FaoDag) -> ConflictSet {
    let reach = strict_reach(dag);
    let in_place: Vec<bool> = dag.nodes().iter().map(|n| n.fao.in_place_safe()).collect();
    let edges = dag.edges();
    let ordered = |e: EdgeId, f: EdgeId| match (edges[e].dst, edges[f].src) {
        (Some(d), Some(s)) => {
            (reach[d.node][s.node / 64] >> (s.node % 64)) & 1 == 1 || (d.node == s.node && in_place[d.node])
        }
        _ => false,
    };
    let mut set = ConflictSet::new(edges.len());
    for e in 0..edges.len() {
        for f in e + 1..edges.len() {
            if !ordered(e, f) && !ordered(f, e) {
                set.insert(e, f);
            }
        }
    }
    set
}

/// Parent edge and offset for every edge stored inside another edge's array.
fn alias_forest(dag: &FaoDag) -> Vec<Option<(EdgeId, usize)>> {
    let edges = dag.edges();
    let mut parent: Vec<Option<(EdgeId, usize)>> = vec![None; edges.len()];
    for u in dag.fifo_order() {
        let node = dag.node(u);
        match node.fao.alias_kind() {
            AliasKind::None => {}
            AliasKind::Reshape => parent[node.outputs[0]] = Some((node.inputs[0], 0)),
            AliasKind::Copy => {
                for &o in &node.outputs {
                    // A consumer that scales in place needs its own array.
                    let writes = edges[o]
                        .dst
                        .is_some_and(|p| dag.node(p.node).fao.kind() == FaoKind::ScalarMult);
                    if !writes {
                        parent[o] = Some((node.inputs[0], 0));
                    }
                }
            }
            AliasKind::Split => {
                let mut off = 0;
                for &o in &node.outputs {
                    parent[o] = Some((node.inputs[0], off));
                    off += edges[o].len();
                }
            }
            AliasKind::VStack => {
                let mut off = 0;
                for &i in &node.inputs {
                    if parent[i].is_none() {
                        parent[i] = Some((node.outputs[0], off));
                    }
                    off += edges[i].len();
                }
            }
        }
    }
    parent
}

fn resolve(parent: &[Option<(EdgeId, usize)>], mut e: EdgeId) -> (EdgeId, usize) {
    let mut off = 0;
    while let Some((p, o)) = parent[e] {
        off += o;
        e = p;
    }
    (e, off)
}

/// Greedy coloring of the conflict graph over alias groups, largest degree
/// first, then colors laid out back to back.
pub fn plan_memory(dag: &FaoDag) -> MemoryPlan {
    let edges = dag.edges();
    let ne = edges.len();
    let lengths: Vec<usize> = edges.iter().map(|e| e.len()).collect();
    let u = conflict_pairs(dag);
    let parent = alias_forest(dag);
    let placed: Vec<(EdgeId, usize)> = (0..ne).map(|e| resolve(&parent, e)).collect();

    let roots: Vec<EdgeId> = (0..ne).filter(|&e| parent[e].is_none()).collect();
    let mut group_of = vec![0; ne];
    for (g, &r) in roots.iter().enumerate() {
        group_of[r] = g;
    }
    let group: Vec<usize> = placed.iter().map(|&(r, _)| group_of[r]).collect();
    let ng = roots.len();
    let mut adj = vec![vec![false; ng]; ng];
    let mut own = ConflictSet::new(ne);
    for (e, f) in u.iter() {
        let (ge, gf) = (group[e], group[f]);
        if ge != gf {
            adj[ge][gf] = true;
            adj[gf][ge] = true;
            own.insert(e, f);
        }
    }
    let degree: Vec<usize> = adj.iter().map(|row| row.iter().filter(|&&b| b).count()).collect();
    let mut order: Vec<usize> = (0..ng).collect();
    order.sort_by_key(|&g| (std::cmp::Reverse(degree[g]), roots[g]));

    let mut color = vec![usize::MAX; ng];
    let mut color_size: Vec<usize> = Vec::new();
    let mut taken = Vec::new();
    for &g in &order {
        taken.clear();
        taken.resize(color_size.len(), false);
        for h in 0..ng {
            if adj[g][h] && color[h] != usize::MAX {
                taken[color[h]] = true;
            }
        }
        let c = taken.iter().position(|&t| !t).unwrap_or(color_size.len());
        if c == color_size.len() {
            color_size.push(0);
        }
        color[g] = c;
        color_size[c] = color_size[c].max(lengths[roots[g]]);
    }
    let mut base = Vec::with_capacity(color_size.len());
    let mut total = 0;
    for &s in &color_size {
        base.push(total);
        total += s;
    }
    let assignments = placed.iter().map(|&(r, off)| base[color[group_of[r]]] + off).collect();
    MemoryPlan {
        assignments,
        global_size: total,
        conflict_pairs: own,
        lengths,
    }
}
