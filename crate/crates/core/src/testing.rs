//! Random instance generators shared by unit, property and acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dag::{DagBuilder, EdgeId, FaoDag, MemoryPlan, NodeId, Port};
use crate::expr::{ExprBuilder, Opr};
use crate::fao::{AliasKind, ConvMethod, ConvVariant, Fao, FaoKind, Wavelet};
use crate::linalg::DenseMatrix;
use crate::shape::Shape;
use crate::solver::ConeKind;
use crate::sparse::SparseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_dense(rng: &mut impl Rng, m: usize, n: usize) -> DenseMatrix {
    DenseMatrix::from_col_major(m, n, random_vec(rng, m * n)).expect("positive extents")
}

pub fn random_sparse(rng: &mut impl Rng, m: usize, n: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for j in 0..n {
        for i in 0..m {
            if rng.random_bool(density) {
                t.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(m, n, &t).expect("in-range triplets")
}

/// A well-conditioned sparse lower-triangular matrix.
pub fn random_lower(rng: &mut impl Rng, n: usize) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        let d = rng.random_range(1.0..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        t.push((i, i, d));
        for j in 0..i {
            if rng.random_bool(0.3) {
                t.push((i, j, rng.random_range(-0.3..0.3)));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("in-range triplets")
}

/// One instance of every atom family (both convolution paths, 1-D and 2-D),
/// with small random parameters.
pub fn atom_catalog(rng: &mut impl Rng) -> Vec<Fao> {
    let mut out = Vec::new();
    let n = rng.random_range(2..8);
    let m = rng.random_range(2..8);
    out.push(Fao::identity(Shape::vector(n)));
    out.push(Fao::scalar_mult(rng.random_range(-3.0..3.0), Shape::vector(n)));
    out.push(Fao::dense(random_dense(rng, m, n)));
    out.push(Fao::dense_on(random_dense(rng, m, n), Shape::matrix(n, 3)).unwrap());
    out.push(Fao::sparse(random_sparse(rng, m, n, 0.4)));
    let k = rng.random_range(1..4);
    out.push(Fao::low_rank(random_dense(rng, m, k), random_dense(rng, k, n)).unwrap());
    out.push(Fao::dft(Shape::vector(2 << rng.random_range(0..4))).unwrap());
    out.push(Fao::dft(Shape::matrix(2 << rng.random_range(0..3), 1 << rng.random_range(0..3))).unwrap());
    for variant in [ConvVariant::Column, ConvVariant::Row, ConvVariant::Circular] {
        for method in [ConvMethod::Direct, ConvMethod::Fft] {
            let len = rng.random_range(4..20);
            let p = if variant == ConvVariant::Circular {
                len
            } else {
                rng.random_range(1..5)
            };
            let c = random_vec(rng, p);
            out.push(Fao::conv_with(variant, &c, Shape::vector(p), Shape::vector(len), method).unwrap());
            let (s, t) = (rng.random_range(3..7), rng.random_range(3..7));
            let (p, q) = if variant == ConvVariant::Circular {
                (s, t)
            } else {
                (rng.random_range(1..4), rng.random_range(1..4))
            };
            let c = random_vec(rng, p * q);
            out.push(Fao::conv_with(variant, &c, Shape::matrix(p, q), Shape::matrix(s, t), method).unwrap());
        }
    }
    let lg = rng.random_range(1..5);
    out.push(Fao::dwt(rng.random_range(1..=lg), Wavelet::Haar, Shape::vector(1 << lg)).unwrap());
    out.push(Fao::dwt(lg.min(3), Wavelet::Db2, Shape::vector(1 << lg.max(2))).unwrap());
    out.push(Fao::dwt(rng.random_range(1..=lg), Wavelet::Haar, Shape::matrix(1 << lg, 1 << lg)).unwrap());
    out.push(Fao::vec(rng.random_range(1..5), rng.random_range(1..5)));
    out.push(Fao::mat(rng.random_range(1..5), rng.random_range(1..5)));
    let (s, p, q, t) = (
        rng.random_range(1..5),
        rng.random_range(1..5),
        rng.random_range(1..5),
        rng.random_range(1..5),
    );
    out.push(Fao::matrix_product(random_dense(rng, s, p), random_dense(rng, q, t)));
    out.push(Fao::sum(rng.random_range(1..4), Shape::vector(n)).unwrap());
    out.push(Fao::copy(rng.random_range(1..4), Shape::vector(n)).unwrap());
    let shapes = vec![Shape::vector(2), Shape::matrix(2, 3), Shape::vector(1)];
    out.push(Fao::vstack(shapes.clone()).unwrap());
    out.push(Fao::split(shapes).unwrap());
    out.push(Fao::sum_entries(Shape::matrix(2, 3)));
    out.push(Fao::tri_solve(random_lower(rng, n)).unwrap());
    out.push(Fao::prng(rng.random(), m, n));
    out.push(Fao::zero(Shape::vector(n), Shape::vector(m)));
    out
}

fn unary_for(rng: &mut impl Rng, shape: &Shape) -> Fao {
    let (r, c) = shape.rows_cols();
    let n = shape.total();
    let (k1, k2) = (rng.random_range(1..4), rng.random_range(1..4));
    let m = rng.random_range(1..6);
    if shape.is_matrix() {
        return match rng.random_range(0..5) {
            0 => Fao::vec(r, c),
            1 => Fao::matrix_product(random_dense(rng, k1, r), random_dense(rng, c, k2)),
            2 => {
                let k = random_dense(rng, k1.min(2), k2.min(2));
                Fao::conv2(ConvVariant::Column, &k, shape.clone()).unwrap()
            }
            3 => Fao::scalar_mult(rng.random_range(-2.0..2.0), shape.clone()),
            _ => Fao::dense_on(random_dense(rng, m, r), shape.clone()).unwrap(),
        };
    }
    match rng.random_range(0..12) {
        0 | 1 => Fao::scalar_mult(rng.random_range(-2.0..2.0), shape.clone()),
        2 | 3 => Fao::dense(random_dense(rng, m, n)),
        4 => Fao::sparse(random_sparse(rng, m, n, 0.5)),
        5 => {
            let variant = [ConvVariant::Column, ConvVariant::Row, ConvVariant::Circular][rng.random_range(0..3)];
            let p = match variant {
                ConvVariant::Circular => n,
                _ => rng.random_range(1..=n.min(3)),
            };
            Fao::conv(variant, &random_vec(rng, p), shape.clone()).unwrap()
        }
        6 if n.is_power_of_two() && n >= 2 => Fao::dft(shape.clone()).unwrap(),
        6 | 7 if n.is_power_of_two() && n >= 2 => Fao::dwt(1, Wavelet::Haar, shape.clone()).unwrap(),
        8 if n % 2 == 0 => Fao::mat(n / 2, 2),
        9 => Fao::tri_solve(random_lower(rng, n)).unwrap(),
        10 => Fao::prng(rng.random(), m, n),
        11 => Fao::identity(shape.clone()),
        _ => Fao::neg(shape.clone()),
    }
}

/// A random valid FAO DAG with at most `max_nodes` nodes (at least 2 allowed).
pub fn random_dag(rng: &mut impl Rng, max_nodes: usize) -> FaoDag {
    let mut b = DagBuilder::new();
    let mut open: Vec<(Port, Shape)> = Vec::new();
    let n0 = rng.random_range(2..7);
    let start = if rng.random_bool(0.4) {
        Fao::copy(2, Shape::vector(n0)).unwrap()
    } else {
        unary_for(rng, &Shape::vector(n0))
    };
    let s = b.add(start.clone());
    for (k, sh) in start.out_shapes().iter().enumerate() {
        open.push((Port::new(s, k), sh.clone()));
    }
    let mut count = 1;
    let budget = rng.random_range(1..=max_nodes.max(2));
    while count + 1 < budget {
        let pick = rng.random_range(0..open.len());
        let choice = rng.random_range(0..10);
        let same = (0..open.len()).find(|&j| j != pick && open[j].1 == open[pick].1);
        let fao = match choice {
            0 | 1 => Fao::copy(2, open[pick].1.clone()).unwrap(),
            2 | 3 if same.is_some() => Fao::sum(2, open[pick].1.clone()).unwrap(),
            4 if open.len() >= 2 => {
                let other = (pick + 1) % open.len();
                Fao::vstack(vec![open[pick].1.clone(), open[other].1.clone()]).unwrap()
            }
            5 if !open[pick].1.is_matrix() && open[pick].1.total() >= 2 => {
                let n = open[pick].1.total();
                let k = rng.random_range(1..n);
                Fao::split(vec![Shape::vector(k), Shape::vector(n - k)]).unwrap()
            }
            6 => Fao::zero(open[pick].1.clone(), Shape::vector(rng.random_range(1..4))),
            _ => unary_for(rng, &open[pick].1),
        };
        let srcs: Vec<usize> = match fao.in_shapes().len() {
            1 => vec![pick],
            _ if fao.kind() == FaoKind::Sum => vec![pick, same.unwrap()],
            _ => vec![pick, (pick + 1) % open.len()],
        };
        let id = b.add(fao.clone());
        for (i, &j) in srcs.iter().enumerate() {
            b.connect(open[j].0, Port::new(id, i));
        }
        let mut srcs = srcs;
        srcs.sort_unstable_by(|a, b| b.cmp(a));
        for j in srcs {
            open.remove(j);
        }
        for (k, sh) in fao.out_shapes().iter().enumerate() {
            open.push((Port::new(id, k), sh.clone()));
        }
        count += 1;
    }
    if open.len() > 1 {
        let id = b.add(Fao::vstack(open.iter().map(|(_, s)| s.clone()).collect()).unwrap());
        for (i, (p, _)) in open.iter().enumerate() {
            b.connect(*p, Port::new(id, i));
        }
    }
    b.build().expect("generated DAG is valid")
}

/// All topological orders of the DAG's nodes, stopping after `limit`.
pub fn topological_orders(dag: &FaoDag, limit: usize) -> Vec<Vec<NodeId>> {
    fn go(
        dag: &FaoDag,
        indeg: &mut Vec<usize>,
        cur: &mut Vec<NodeId>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<NodeId>>,
        limit: usize,
    ) {
        if out.len() >= limit {
            return;
        }
        if cur.len() == indeg.len() {
            out.push(cur.clone());
            return;
        }
        for u in 0..indeg.len() {
            if used[u] || indeg[u] != 0 {
                continue;
            }
            used[u] = true;
            cur.push(u);
            let succ: Vec<NodeId> = dag.successors(u).collect();
            for &v in &succ {
                indeg[v] -= 1;
            }
            go(dag, indeg, cur, used, out, limit);
            for &v in &succ {
                indeg[v] += 1;
            }
            cur.pop();
            used[u] = false;
        }
    }
    let mut indeg: Vec<usize> = dag
        .nodes()
        .iter()
        .map(|n| n.inputs.iter().filter(|&&e| dag.edge(e).src.is_some()).count())
        .collect();
    let mut out = Vec::new();
    let n = indeg.len();
    go(dag, &mut indeg, &mut Vec::new(), &mut vec![false; n], &mut out, limit);
    out
}

/// Replays an evaluation of `dag` under `plan` in the given node order,
/// tracking which value every buffer cell holds. Fails if a node reads an
/// array whose cells were overwritten, or if a node that cannot work in
/// place has an output overlapping one of its inputs.
pub fn simulate(dag: &FaoDag, plan: &MemoryPlan, order: &[NodeId]) -> std::result::Result<(), String> {
    let mut cells: Vec<u64> = vec![0; plan.global_size];
    let mut expect: Vec<Option<Vec<u64>>> = vec![None; dag.edges().len()];
    let mut fresh = 1u64;
    let mut write_fresh = |cells: &mut Vec<u64>, r: std::ops::Range<usize>| {
        let ids: Vec<u64> = (0..r.len() as u64).map(|k| fresh + k).collect();
        fresh += r.len() as u64;
        cells[r].copy_from_slice(&ids);
        ids
    };
    let read = |cells: &Vec<u64>, expect: &Vec<Option<Vec<u64>>>, e: EdgeId, who: &str| {
        let want = expect[e]
            .as_ref()
            .ok_or(format!("edge {e} read by {who} before it was written"))?;
        if &cells[plan.range(e)] != want.as_slice() {
            return Err(format!("edge {e} read by {who} after being clobbered"));
        }
        Ok(want.clone())
    };
    for &e in dag.input_edges() {
        expect[e] = Some(write_fresh(&mut cells, plan.range(e)));
    }
    for &e in dag.input_edges() {
        read(&cells, &expect, e, "input staging")?;
    }
    for &u in order {
        let node = dag.node(u);
        let who = format!("node {u} ({})", node.fao.name());
        let ins: Vec<Vec<u64>> = node
            .inputs
            .iter()
            .map(|&e| read(&cells, &expect, e, &who))
            .collect::<std::result::Result<_, _>>()?;
        let mut moves: Vec<(Vec<u64>, EdgeId, usize)> = Vec::new();
        match node.fao.alias_kind() {
            AliasKind::Reshape | AliasKind::Copy => {
                for &o in &node.outputs {
                    moves.push((ins[0].clone(), o, 0));
                }
            }
            AliasKind::Split => {
                let mut off = 0;
                for &o in &node.outputs {
                    let l = dag.edge(o).len();
                    moves.push((ins[0][off..off + l].to_vec(), o, 0));
                    off += l;
                }
            }
            AliasKind::VStack => {
                let mut off = 0;
                for (x, _) in ins.iter().zip(&node.inputs) {
                    moves.push((x.clone(), node.outputs[0], off));
                    off += x.len();
                }
            }
            AliasKind::None => {
                let in_place = node.fao.in_place_safe();
                for &o in &node.outputs {
                    let ro = plan.range(o);
                    for &i in &node.inputs {
                        let ri = plan.range(i);
                        if !in_place && ri.start < ro.end && ro.start < ri.end {
                            return Err(format!("{who} writes edge {o} over its input edge {i}"));
                        }
                    }
                }
                for &o in &node.outputs {
                    expect[o] = Some(write_fresh(&mut cells, plan.range(o)));
                }
                continue;
            }
        }
        // Pieces are copied one after another, with the source of each piece
        // read at the moment it is copied.
        let mut pieces: Vec<(usize, usize, usize)> = Vec::new();
        match node.fao.alias_kind() {
            AliasKind::VStack => {
                let mut off = 0;
                for &i in &node.inputs {
                    let l = dag.edge(i).len();
                    pieces.push((plan.assignments[i], plan.assignments[node.outputs[0]] + off, l));
                    off += l;
                }
            }
            AliasKind::Split => {
                let mut off = 0;
                for &o in &node.outputs {
                    let l = dag.edge(o).len();
                    pieces.push((plan.assignments[node.inputs[0]] + off, plan.assignments[o], l));
                    off += l;
                }
            }
            _ => {
                for &o in &node.outputs {
                    pieces.push((plan.assignments[node.inputs[0]], plan.assignments[o], dag.edge(o).len()));
                }
            }
        }
        for (src, dst, len) in pieces {
            cells.copy_within(src..src + len, dst);
        }
        for (ids, o, off) in moves {
            let slot = expect[o].get_or_insert_with(|| vec![0; dag.edge(o).len()]);
            slot[off..off + ids.len()].copy_from_slice(&ids);
        }
        for &o in &node.outputs {
            read(&cells, &expect, o, &format!("{who} (result check)"))?;
        }
    }
    for &e in dag.output_edges() {
        read(&cells, &expect, e, "output staging")?;
    }
    Ok(())
}

/// Small DCP problems exercising every atom, several constraint layouts and
/// matrix variables. Each is feasible and bounded below.
pub fn corpus() -> Vec<(&'static str, Opr)> {
    let mut out = Vec::new();
    let mut r = rng(2024);
    let v = |n| Shape::vector(n);

    // Nonnegative least squares through each convolution variant.
    for (name, variant, p) in [
        ("deconv_column", ConvVariant::Column, 3),
        ("deconv_row", ConvVariant::Row, 3),
        ("deconv_circular", ConvVariant::Circular, 8),
    ] {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(8)).unwrap();
        let cx = b.conv(variant, &random_vec(&mut r, p), x).unwrap();
        let m = b.shape(cx).total();
        let bv = b.constant(v(m), random_vec(&mut r, m)).unwrap();
        let res = b.sub(cx, bv).unwrap();
        let obj = b.sum_squares(res);
        out.push((name, b.problem(obj, &[(x, ConeKind::Nonneg)]).unwrap()));
    }

    // Lasso with a dense operator.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(6)).unwrap();
        let ax = b.matmul(random_dense(&mut r, 4, 6), x).unwrap();
        let bv = b.constant(v(4), random_vec(&mut r, 4)).unwrap();
        let res = b.sub(ax, bv).unwrap();
        let fit = b.sum_squares(res);
        let l1 = b.norm1(x);
        let reg = b.scale(0.3, l1);
        let obj = b.add(fit, reg).unwrap();
        out.push(("lasso", b.problem(obj, &[]).unwrap()));
    }

    // Least absolute deviations with a sparse operator.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(5)).unwrap();
        let ax = b.sparse_mul(random_sparse(&mut r, 9, 5, 0.5), x).unwrap();
        let bv = b.constant(v(9), random_vec(&mut r, 9)).unwrap();
        let res = b.sub(ax, bv).unwrap();
        let obj = b.norm1(res);
        out.push(("lad_sparse", b.problem(obj, &[]).unwrap()));
    }

    // Euclidean projection onto a box via abs.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(4)).unwrap();
        let a = b.constant(v(4), vec![2.0, -0.5, 0.3, -3.0]).unwrap();
        let d = b.sub(x, a).unwrap();
        let obj = b.norm2(d);
        let ax = b.abs(x);
        let one = b.constant(v(4), vec![1.0; 4]).unwrap();
        let slack = b.sub(one, ax).unwrap();
        out.push(("box_projection", b.problem(obj, &[(slack, ConeKind::Nonneg)]).unwrap()));
    }

    // Sparse spectrum fit: the DFT of x close to data, x in a norm ball.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(8)).unwrap();
        let fx = b.dft(x).unwrap();
        let m = b.shape(fx).total();
        let y = b.constant(v(m), random_vec(&mut r, m)).unwrap();
        let res = b.sub(fx, y).unwrap();
        let obj = b.sum_squares(res);
        let nx = b.norm2(x);
        let two = b.scalar(2.0);
        let ball = b.sub(two, nx).unwrap();
        out.push(("dft_fit", b.problem(obj, &[(ball, ConeKind::Nonneg)]).unwrap()));
    }

    // Wavelet-sparse denoising.
    for (name, wavelet) in [("dwt_haar", Wavelet::Haar), ("dwt_db2", Wavelet::Db2)] {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(16)).unwrap();
        let y = b.constant(v(16), random_vec(&mut r, 16)).unwrap();
        let res = b.sub(x, y).unwrap();
        let fit = b.sum_squares(res);
        let wx = b.dwt(2, wavelet, x).unwrap();
        let l1 = b.norm1(wx);
        let reg = b.scale(0.5, l1);
        let obj = b.add(fit, reg).unwrap();
        out.push((name, b.problem(obj, &[]).unwrap()));
    }

    // Small Sylvester LP.
    {
        let mut b = ExprBuilder::new();
        let (p, q) = (6, 3);
        let x = b.variable("X", Shape::matrix(p, q)).unwrap();
        let pos = |r: &mut ChaCha8Rng, m, n| {
            DenseMatrix::from_col_major(m, n, (0..m * n).map(|_| r.random_range(0.1..1.0)).collect()).unwrap()
        };
        let axb = b.matrix_product(pos(&mut r, p, p), x, pos(&mut r, q, q)).unwrap();
        let c = b.constant(Shape::matrix(p, q), vec![1.0; p * q]).unwrap();
        let slack = b.sub(c, axb).unwrap();
        let obj = b.dot(&random_vec(&mut r, p * q), x).unwrap();
        out.push((
            "sylvester",
            b.problem(obj, &[(slack, ConeKind::Nonneg), (x, ConeKind::Nonneg)])
                .unwrap(),
        ));
    }

    // 2-D deconvolution of an image variable.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("X", Shape::matrix(5, 4)).unwrap();
        let k = random_dense(&mut r, 2, 2);
        let kx = b.conv2(ConvVariant::Column, &k, x).unwrap();
        let y = b.constant(Shape::matrix(6, 5), random_vec(&mut r, 30)).unwrap();
        let res = b.sub(kx, y).unwrap();
        let obj = b.sum_squares(res);
        out.push(("deconv_2d", b.problem(obj, &[(x, ConeKind::Nonneg)]).unwrap()));
    }

    // Equality-constrained least norm.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(6)).unwrap();
        let ax = b.matmul(random_dense(&mut r, 2, 6), x).unwrap();
        let bv = b.constant(v(2), random_vec(&mut r, 2)).unwrap();
        let eq = b.sub(ax, bv).unwrap();
        let obj = b.norm2(x);
        out.push(("least_norm", b.problem(obj, &[(eq, ConeKind::Zero)]).unwrap()));
    }

    // Two variables, shared subexpressions, split and vstack.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(4)).unwrap();
        let y = b.variable("y", v(4)).unwrap();
        let s = b.add(x, y).unwrap();
        let a = random_dense(&mut r, 4, 4);
        let as_ = b.matmul(a, s).unwrap();
        let e = b.add(x, as_).unwrap();
        let parts = b.split(e, &[1, 3]).unwrap();
        let stacked = b.vstack(&[parts[1], y]).unwrap();
        let obj = b.sum_squares(stacked);
        let one = b.scalar(1.0);
        let lower = b.sub(parts[0], one).unwrap();
        out.push(("shared_split", b.problem(obj, &[(lower, ConeKind::Nonneg)]).unwrap()));
    }

    // A declared variable that no constraint mentions.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(3)).unwrap();
        let z = b.variable("z", v(2)).unwrap();
        let zs = b.sum_squares(z);
        let xs = b.sum_entries(x);
        let obj = b.add(zs, xs).unwrap();
        out.push(("unused_variable", b.problem(obj, &[(x, ConeKind::Nonneg)]).unwrap()));
    }

    // LP in inequality form with a free-cone row.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(3)).unwrap();
        let obj = b.dot(&[1.0, 2.0, 0.5], x).unwrap();
        let g = b.matmul(random_dense(&mut r, 2, 3), x).unwrap();
        out.push((
            "lp_free_row",
            b.problem(obj, &[(x, ConeKind::Nonneg), (g, ConeKind::Free)]).unwrap(),
        ));
    }

    // Chebyshev-style: minimize the largest-magnitude residual bound.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(3)).unwrap();
        let t = b.variable("t", v(1)).unwrap();
        let ax = b.matmul(random_dense(&mut r, 5, 3), x).unwrap();
        let bv = b.constant(v(5), random_vec(&mut r, 5)).unwrap();
        let res = b.sub(ax, bv).unwrap();
        let a = b.abs(res);
        let slack = b.sub(t, a).unwrap();
        out.push(("chebyshev", b.problem(t, &[(slack, ConeKind::Nonneg)]).unwrap()));
    }

    // Nested atoms: abs of a nonpositive concave expression.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(3)).unwrap();
        let a = b.constant(v(3), vec![1.0, 0.0, -1.0]).unwrap();
        let d = b.sub(x, a).unwrap();
        let n = b.norm2(d);
        let neg = b.neg(n);
        let obj = b.abs(neg);
        out.push(("nested_abs", b.problem(obj, &[]).unwrap()));
    }

    // Matrix variable with vec, mat and a column operator.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("X", Shape::matrix(3, 2)).unwrap();
        let ax = b.matmul(random_dense(&mut r, 4, 3), x).unwrap();
        let v6 = b.vec(x).unwrap();
        let back = b.mat(v6, 2, 3).unwrap();
        let bx = b.matmul(random_dense(&mut r, 2, 2), back).unwrap();
        let y = b.constant(Shape::matrix(4, 2), random_vec(&mut r, 8)).unwrap();
        let res = b.sub(ax, y).unwrap();
        let fit = b.sum_squares(res);
        let reg = b.norm1(bx);
        let obj = b.add(fit, reg).unwrap();
        out.push(("matrix_reshape", b.problem(obj, &[]).unwrap()));
    }

    // Affine objective, conic constraint given directly.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(3)).unwrap();
        let t = b.variable("t", v(1)).unwrap();
        let c = b.constant(v(3), vec![0.5, -0.2, 0.1]).unwrap();
        let xc = b.sub(x, c).unwrap();
        let soc = b.vstack(&[xc, t]).unwrap();
        out.push(("explicit_soc", b.problem(t, &[(soc, ConeKind::Soc)]).unwrap()));
    }

    // Scalar broadcasting and several nonneg blocks.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(5)).unwrap();
        let s = b.sum_entries(x);
        let one = b.scalar(1.0);
        let xm = b.sub(x, one).unwrap();
        let obj = b.sum_squares(xm);
        let budget = b.sub(one, s).unwrap();
        let sc = b.scale(0.1, x);
        let half = b.scalar(0.5);
        let upper = b.sub(half, sc).unwrap();
        out.push((
            "budget",
            b.problem(
                obj,
                &[
                    (budget, ConeKind::Nonneg),
                    (upper, ConeKind::Nonneg),
                    (x, ConeKind::Nonneg),
                ],
            )
            .unwrap(),
        ));
    }

    // Total-variation style denoising with a difference operator.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(10)).unwrap();
        let dx = b.conv(ConvVariant::Row, &[1.0, -1.0], x).unwrap();
        let y = b.constant(v(10), random_vec(&mut r, 10)).unwrap();
        let res = b.sub(x, y).unwrap();
        let fit = b.sum_squares(res);
        let tv = b.norm1(dx);
        let obj = b.add(fit, tv).unwrap();
        out.push(("total_variation", b.problem(obj, &[]).unwrap()));
    }

    // Only a constant objective.
    {
        let mut b = ExprBuilder::new();
        let x = b.variable("x", v(2)).unwrap();
        let obj = b.scalar(4.0);
        let one = b.scalar(1.0);
        let lo = b.sub(x, one).unwrap();
        out.push(("constant_objective", b.problem(obj, &[(lo, ConeKind::Nonneg)]).unwrap()));
    }

    out
}
