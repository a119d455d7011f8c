//! Evaluation of an FAO DAG over a planned global buffer.

use std::ops::Range;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::fao::{AliasKind, Fao, FaoKind};

use super::memory::{plan_memory, MemoryPlan};
use super::{FaoDag, NodeId};

#[derive(Clone, Debug)]
enum Step {
    /// Block moves within the buffer: `(src, dst, len)`.
    Move(Vec<(usize, usize, usize)>),
    Scale {
        src: usize,
        dst: usize,
        len: usize,
        alpha: f64,
    },
    Apply {
        inputs: Vec<Range<usize>>,
        outputs: Vec<Range<usize>>,
    },
}

/// Reusable evaluator: the buffer and scratch space are allocated once, so
/// repeated applications of the DAG do not allocate.
#[derive(Clone, Debug)]
pub struct Evaluator {
    faos: Vec<Fao>,
    steps: Vec<Step>,
    order: Vec<NodeId>,
    waves: Vec<Vec<NodeId>>,
    inputs: Vec<Range<usize>>,
    outputs: Vec<Range<usize>>,
    buffer: Vec<f64>,
    scratch: Vec<f64>,
    threads: usize,
    thread_scratch: Vec<Vec<f64>>,
    plan: MemoryPlan,
}

fn overlaps(a: &Range<usize>, b: &Range<usize>) -> bool {
    a.start < b.end && b.start < a.end
}

impl Evaluator {
    pub fn new(dag: &FaoDag) -> Result<Evaluator> {
        Self::with_plan(dag, plan_memory(dag))
    }

    pub fn with_plan(dag: &FaoDag, plan: MemoryPlan) -> Result<Evaluator> {
        dag.validate()?;
        if !plan.is_valid_for(dag) {
            return Err(Error::InvalidDag("memory plan does not fit this DAG".into()));
        }
        let z = |e: usize| plan.assignments[e];
        let mut steps = Vec::with_capacity(dag.nodes().len());
        for (id, node) in dag.nodes().iter().enumerate() {
            let ins: Vec<Range<usize>> = node.inputs.iter().map(|&e| plan.range(e)).collect();
            let outs: Vec<Range<usize>> = node.outputs.iter().map(|&e| plan.range(e)).collect();
            let step = match node.fao.alias_kind() {
                AliasKind::Reshape => Step::Move(vec![(z(node.inputs[0]), z(node.outputs[0]), ins[0].len())]),
                AliasKind::Copy => Step::Move(outs.iter().map(|o| (ins[0].start, o.start, o.len())).collect()),
                AliasKind::Split => {
                    let mut off = ins[0].start;
                    let mut moves = Vec::new();
                    for o in &outs {
                        moves.push((off, o.start, o.len()));
                        off += o.len();
                    }
                    Step::Move(moves)
                }
                AliasKind::VStack => {
                    let mut off = outs[0].start;
                    let mut moves = Vec::new();
                    for i in &ins {
                        moves.push((i.start, off, i.len()));
                        off += i.len();
                    }
                    Step::Move(moves)
                }
                AliasKind::None if node.fao.kind() == FaoKind::ScalarMult => Step::Scale {
                    src: ins[0].start,
                    dst: outs[0].start,
                    len: ins[0].len(),
                    alpha: node.fao.scalar().expect("scalar atom"),
                },
                AliasKind::None => {
                    for (k, o) in outs.iter().enumerate() {
                        if ins.iter().chain(&outs[..k]).any(|r| overlaps(r, o)) {
                            return Err(Error::InvalidDag(format!(
                                "memory plan overlaps an output of node {id} ({}) with another of its arrays",
                                node.fao.name()
                            )));
                        }
                    }
                    Step::Apply {
                        inputs: ins,
                        outputs: outs,
                    }
                }
            };
            let step = match step {
                Step::Move(m) => Step::Move(m.into_iter().filter(|&(s, d, _)| s != d).collect()),
                s => s,
            };
            steps.push(step);
        }
        let scratch_len = dag.nodes().iter().map(|n| n.fao.scratch_len()).max().unwrap_or(0);
        Ok(Evaluator {
            faos: dag.nodes().iter().map(|n| n.fao.clone()).collect(),
            steps,
            order: dag.fifo_order(),
            waves: dag.fifo_waves(),
            inputs: dag.input_edges().iter().map(|&e| plan.range(e)).collect(),
            outputs: dag.output_edges().iter().map(|&e| plan.range(e)).collect(),
            buffer: vec![0.0; plan.global_size],
            scratch: vec![0.0; scratch_len],
            threads: 1,
            thread_scratch: Vec::new(),
            plan,
        })
    }

    pub fn plan(&self) -> &MemoryPlan {
        &self.plan
    }

    /// Evaluates the nodes of each ready-queue wave on up to `threads`
    /// threads. Results are bitwise identical to serial evaluation.
    pub fn set_threads(&mut self, threads: usize) {
        self.threads = threads.max(1);
        let len = self.scratch.len();
        self.thread_scratch = (0..self.threads).map(|_| vec![0.0; len]).collect();
    }

    pub fn input_len(&self) -> usize {
        self.inputs.iter().map(|r| r.len()).sum()
    }

    pub fn output_len(&self) -> usize {
        self.outputs.iter().map(|r| r.len()).sum()
    }

    /// Applies the DAG to one array per external input.
    pub fn apply(&mut self, inputs: &[&[f64]], outputs: &mut [&mut [f64]]) -> Result<()> {
        if inputs.len() != self.inputs.len() || outputs.len() != self.outputs.len() {
            return Err(Error::dim(format!(
                "DAG has {} inputs and {} outputs, got {} and {}",
                self.inputs.len(),
                self.outputs.len(),
                inputs.len(),
                outputs.len()
            )));
        }
        for (k, (x, r)) in inputs.iter().zip(&self.inputs).enumerate() {
            if x.len() != r.len() {
                return Err(Error::dim(format!(
                    "input {k} has length {}, expected {}",
                    x.len(),
                    r.len()
                )));
            }
        }
        for (k, (y, r)) in outputs.iter().zip(&self.outputs).enumerate() {
            if y.len() != r.len() {
                return Err(Error::dim(format!(
                    "output {k} has length {}, expected {}",
                    y.len(),
                    r.len()
                )));
            }
        }
        for (x, r) in inputs.iter().zip(&self.inputs) {
            self.buffer[r.clone()].copy_from_slice(x);
        }
        self.run();
        for (y, r) in outputs.iter_mut().zip(&self.outputs) {
            y.copy_from_slice(&self.buffer[r.clone()]);
        }
        Ok(())
    }

    /// Applies the DAG to the concatenation of its inputs, writing the
    /// concatenation of its outputs.
    pub fn apply_flat(&mut self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.input_len() || y.len() != self.output_len() {
            return Err(Error::dim(format!(
                "DAG maps {} entries to {}, got {} and {}",
                self.input_len(),
                self.output_len(),
                x.len(),
                y.len()
            )));
        }
        let mut off = 0;
        for r in &self.inputs {
            self.buffer[r.clone()].copy_from_slice(&x[off..off + r.len()]);
            off += r.len();
        }
        self.run();
        let mut off = 0;
        for r in &self.outputs {
            y[off..off + r.len()].copy_from_slice(&self.buffer[r.clone()]);
            off += r.len();
        }
        Ok(())
    }

    fn run(&mut self) {
        let base = Shared(self.buffer.as_mut_ptr());
        if self.threads == 1 {
            for &u in &self.order {
                // SAFETY: `base` points at `self.buffer`, which is borrowed
                // mutably for the whole loop; the step only touches ranges
                // checked against the buffer length by the plan.
                unsafe { run_step(&self.faos[u], &self.steps[u], base, &mut self.scratch) };
            }
            return;
        }
        let threads = self.threads;
        for wave in &self.waves {
            if wave.len() == 1 {
                let u = wave[0];
                // SAFETY: as in the serial loop.
                unsafe { run_step(&self.faos[u], &self.steps[u], base, &mut self.scratch) };
                continue;
            }
            let (faos, steps) = (&self.faos, &self.steps);
            std::thread::scope(|s| {
                for (t, scratch) in self.thread_scratch.iter_mut().enumerate().take(wave.len().min(threads)) {
                    s.spawn(move || {
                        for &u in wave.iter().skip(t).step_by(threads) {
                            // SAFETY: nodes in one wave have no path between
                            // them, so every array one of them writes conflicts
                            // with every array another reads or writes, and the
                            // plan keeps those ranges disjoint.
                            unsafe { run_step(&faos[u], &steps[u], base, scratch) };
                        }
                    });
                }
            });
        }
    }
}

#[derive(Clone, Copy)]
struct Shared(*mut f64);

// SAFETY: the pointer is only dereferenced on disjoint ranges (see `run`).
unsafe impl Send for Shared {}
unsafe impl Sync for Shared {}

/// # Safety
///
/// Every range in `step` must lie inside the buffer behind `base`, and no
/// other thread may access the ranges this step writes while it runs.
unsafe fn run_step(fao: &Fao, step: &Step, base: Shared, scratch: &mut [f64]) {
    let p = base.0;
    match step {
        Step::Move(moves) => {
            for &(src, dst, len) in moves {
                std::ptr::copy(p.add(src), p.add(dst), len);
            }
        }
        Step::Scale { src, dst, len, alpha } => {
            std::ptr::copy(p.add(*src), p.add(*dst), *len);
            for v in std::slice::from_raw_parts_mut(p.add(*dst), *len) {
                *v *= alpha;
            }
        }
        Step::Apply { inputs, outputs } => {
            let ins: SmallVec<[&[f64]; 8]> = inputs
                .iter()
                .map(|r| std::slice::from_raw_parts(p.add(r.start) as *const f64, r.len()))
                .collect();
            let mut outs: SmallVec<[&mut [f64]; 8]> = outputs
                .iter()
                .map(|r| std::slice::from_raw_parts_mut(p.add(r.start), r.len()))
                .collect();
            fao.run(&ins, &mut outs, scratch);
        }
    }
}

/// Applies `dag` to `inputs` using `plan`, returning one array per output.
pub fn evaluate(dag: &FaoDag, inputs: &[&[f64]], plan: &MemoryPlan) -> Result<Vec<Vec<f64>>> {
    let mut ev = Evaluator::with_plan(dag, plan.clone())?;
    let mut outs: Vec<Vec<f64>> = dag.output_shapes().iter().map(|s| vec![0.0; s.total()]).collect();
    let mut refs: Vec<&mut [f64]> = outs.iter_mut().map(Vec::as_mut_slice).collect();
    ev.apply(inputs, &mut refs)?;
    Ok(outs)
}
