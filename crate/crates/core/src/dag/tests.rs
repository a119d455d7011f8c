use proptest::prelude::*;

use super::*;
use crate::fao::{materialization_count, FaoKind};
use crate::linalg::dot;
use crate::testing::{random_dag, random_dense, random_vec, rng, simulate, topological_orders};

/// copy → {A, B} → sum, the DAG of `x ↦ Ax + Bx`.
fn sum_of_two(a: Fao, b: Fao) -> FaoDag {
    let n = a.in_shapes()[0].clone();
    let m = a.out_shapes()[0].clone();
    let mut d = DagBuilder::new();
    let c = d.add(Fao::copy(2, n).unwrap());
    let ia = d.add(a);
    let ib = d.add(b);
    let s = d.add(Fao::sum(2, m).unwrap());
    d.connect(Port::new(c, 0), Port::new(ia, 0))
        .connect(Port::new(c, 1), Port::new(ib, 0))
        .connect(Port::new(ia, 0), Port::new(s, 0))
        .connect(Port::new(ib, 0), Port::new(s, 1));
    d.build().unwrap()
}

fn eval_flat(dag: &FaoDag, x: &[f64]) -> Vec<f64> {
    let mut ev = Evaluator::new(dag).unwrap();
    let mut y = vec![0.0; dag.output_len()];
    ev.apply_flat(x, &mut y).unwrap();
    y
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

#[test]
fn sum_of_two_validates_and_doubles() {
    let i = Fao::identity(Shape::vector(2));
    let dag = sum_of_two(i.clone(), i);
    dag.validate().unwrap();
    assert_eq!(eval_flat(&dag, &[1.0, 2.0]), vec![2.0, 4.0]);
}

#[test]
fn single_identity_is_valid() {
    FaoDag::single(Fao::identity(Shape::vector(3))).validate().unwrap();
}

#[test]
fn cycle_is_reported() {
    let mut c = DagBuilder::new();
    let a = c.add(Fao::sum(2, Shape::vector(2)).unwrap());
    let d = c.add(Fao::copy(2, Shape::vector(2)).unwrap());
    c.connect(Port::new(a, 0), Port::new(d, 0))
        .connect(Port::new(d, 0), Port::new(a, 1));
    let err = c.build().unwrap_err().to_string();
    assert!(err.contains("cycle"), "{err}");
}

#[test]
fn shape_mismatch_and_two_starts_are_reported() {
    let mut b = DagBuilder::new();
    let a = b.add(Fao::identity(Shape::vector(2)));
    let c = b.add(Fao::identity(Shape::vector(3)));
    b.chain(a, c);
    let err = b.build().unwrap_err().to_string();
    assert!(err.contains("shape mismatch"), "{err}");

    let mut b = DagBuilder::new();
    let a = b.add(Fao::identity(Shape::vector(2)));
    let c = b.add(Fao::identity(Shape::vector(2)));
    let s = b.add(Fao::sum(2, Shape::vector(2)).unwrap());
    b.connect(Port::new(a, 0), Port::new(s, 0))
        .connect(Port::new(c, 0), Port::new(s, 1));
    let err = b.build().unwrap_err().to_string();
    assert!(err.contains("start node"), "{err}");
}

#[test]
fn sum_of_two_matches_explicit_sum() {
    let mut r = rng(1);
    let (a, b) = (random_dense(&mut r, 8, 8), random_dense(&mut r, 8, 8));
    let dag = sum_of_two(Fao::dense(a.clone()), Fao::dense(b.clone()));
    let x = random_vec(&mut r, 8);
    let y = eval_flat(&dag, &x);
    let want: Vec<f64> = a.matvec(&x).iter().zip(b.matvec(&x)).map(|(p, q)| p + q).collect();
    assert!(rel_err(&y, &want) < 1e-12);
}

#[test]
fn chain_applies_in_sequence() {
    let mut r = rng(2);
    let (a, b) = (random_dense(&mut r, 5, 4), random_dense(&mut r, 3, 5));
    let dag = FaoDag::chain(vec![Fao::dense(a.clone()), Fao::dense(b.clone())]).unwrap();
    let x = random_vec(&mut r, 4);
    assert!(rel_err(&eval_flat(&dag, &x), &b.matvec(&a.matvec(&x))) < 1e-12);
}

#[test]
fn adjoint_of_sum_of_two_swaps_copy_and_sum() {
    let mut r = rng(3);
    let dag = sum_of_two(
        Fao::dense(random_dense(&mut r, 3, 4)),
        Fao::dense(random_dense(&mut r, 3, 4)),
    );
    let adj = dag.adjoint();
    adj.validate().unwrap();
    assert_eq!(adj.node(adj.start()).fao.kind(), FaoKind::Copy);
    assert_eq!(adj.node(adj.end()).fao.kind(), FaoKind::Sum);
    assert_eq!(adj.node(1).fao.name(), "dense^T");
    assert!(adj.adjoint().structurally_equal(&dag));
}

#[test]
fn conflicts_follow_paths() {
    let i = Fao::identity(Shape::vector(2));
    let dag = sum_of_two(
        Fao::dense(DenseMatrix::identity(2)),
        Fao::dense(DenseMatrix::identity(2)),
    );
    let u = conflict_pairs(&dag);
    let (ca, cb) = (dag.node(1).inputs[0], dag.node(2).inputs[0]);
    assert!(u.contains(ca, cb));

    let chain = FaoDag::chain(vec![
        Fao::dense(DenseMatrix::identity(2)),
        Fao::dense(DenseMatrix::identity(2)),
        Fao::dense(DenseMatrix::identity(2)),
    ])
    .unwrap();
    let a_in = chain.node(1).inputs[0];
    let b_out = chain.node(2).outputs[0];
    assert!(!conflict_pairs(&chain).contains(a_in, b_out));

    let single = FaoDag::single(i);
    assert!(conflict_pairs(&single).is_empty());
    let plan = plan_memory(&single);
    assert_eq!(plan.global_size, 2);
}

#[test]
fn sum_of_two_plan_with_in_place_atoms() {
    let n = 16;
    let dag = sum_of_two(
        Fao::scalar_mult(2.0, Shape::vector(n)),
        Fao::scalar_mult(-0.5, Shape::vector(n)),
    );
    let plan = plan_memory(&dag);
    assert!(plan.is_valid_for(&dag));
    let internal: std::collections::BTreeSet<usize> = (0..dag.edges().len())
        .filter(|&e| dag.edge(e).src.is_some() && dag.edge(e).dst.is_some())
        .flat_map(|e| plan.range(e))
        .collect();
    assert!(internal.len() <= 2 * n, "internal cells {}", internal.len());
    assert_eq!(plan.naive_size(), 6 * n);
    assert!(plan.global_size <= 3 * n);
    let x = random_vec(&mut rng(4), n);
    let y = eval_flat(&dag, &x);
    let want: Vec<f64> = x.iter().map(|v| 1.5 * v).collect();
    assert!(rel_err(&y, &want) < 1e-15);
}

#[test]
fn random_plans_survive_every_order() {
    let mut r = rng(5);
    for _ in 0..60 {
        let dag = random_dag(&mut r, 8);
        let plan = plan_memory(&dag);
        assert!(plan.is_valid_for(&dag));
        assert!(plan.global_size <= plan.naive_size());
        let mut orders = topological_orders(&dag, 2000);
        orders.push(dag.fifo_order());
        for o in &orders {
            simulate(&dag, &plan, o).unwrap_or_else(|e| panic!("{e}\n{}", dag.to_dot()));
        }
    }
}

#[test]
fn evaluation_matches_materialized_matrix() {
    let mut r = rng(6);
    for _ in 0..30 {
        let dag = random_dag(&mut r, 7);
        if dag.input_len() > 64 || dag.output_len() > 64 {
            continue;
        }
        let m = dag.to_dense().unwrap();
        let x = random_vec(&mut r, dag.input_len());
        assert!(rel_err(&eval_flat(&dag, &x), &m.matvec(&x)) < 1e-10);
    }
}

#[test]
fn parallel_is_bitwise_serial() {
    let mut r = rng(7);
    for _ in 0..30 {
        let dag = random_dag(&mut r, 8);
        let x = random_vec(&mut r, dag.input_len());
        let mut ev = Evaluator::new(&dag).unwrap();
        let mut serial = vec![0.0; dag.output_len()];
        ev.apply_flat(&x, &mut serial).unwrap();
        ev.set_threads(3);
        let mut par = vec![0.0; dag.output_len()];
        ev.apply_flat(&x, &mut par).unwrap();
        assert_eq!(
            serial.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            par.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn evaluate_rejects_bad_input_and_foreign_plan() {
    let dag = FaoDag::single(Fao::identity(Shape::vector(3)));
    let plan = plan_memory(&dag);
    assert!(evaluate(&dag, &[&[1.0, 2.0]], &plan).is_err());
    let other = FaoDag::chain(vec![Fao::neg(Shape::vector(3)), Fao::neg(Shape::vector(3))]).unwrap();
    assert!(evaluate(&other, &[&[1.0, 2.0, 3.0]], &plan).is_err());
    assert_eq!(
        evaluate(&dag, &[&[1.0, 2.0, 3.0]], &plan).unwrap(),
        vec![vec![1.0, 2.0, 3.0]]
    );
}

#[test]
fn to_dense_counts_materialization() {
    let before = materialization_count();
    FaoDag::single(Fao::identity(Shape::vector(2))).to_dense().unwrap();
    assert_eq!(materialization_count(), before + 1);
}

#[test]
fn dot_export_lists_nodes_and_edges() {
    let dag = sum_of_two(Fao::neg(Shape::vector(2)), Fao::neg(Shape::vector(2)));
    let dot = dag.to_dot();
    assert!(dot.contains("n0 [label=\"copy\"]"));
    assert!(dot.contains("n3 -> out"));
}

/// x → copy → {B, C} → {A, A} → sum, the DAG of `ABx + ACx`.
fn shared_left_factor(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> FaoDag {
    let mut d = DagBuilder::new();
    let cp = d.add(Fao::copy(2, Shape::vector(b.cols())).unwrap());
    let ib = d.add(Fao::dense(b.clone()));
    let ic = d.add(Fao::dense(c.clone()));
    let fa = Fao::dense(a.clone());
    let a1 = d.add(fa.clone());
    let a2 = d.add(fa);
    let s = d.add(Fao::sum(2, Shape::vector(a.rows())).unwrap());
    d.connect(Port::new(cp, 0), Port::new(ib, 0))
        .connect(Port::new(cp, 1), Port::new(ic, 0))
        .chain(ib, a1)
        .chain(ic, a2)
        .connect(Port::new(a1, 0), Port::new(s, 0))
        .connect(Port::new(a2, 0), Port::new(s, 1));
    d.build().unwrap()
}

#[test]
fn common_successor_is_factored() {
    let mut r = rng(8);
    let (a, b, c) = (
        random_dense(&mut r, 6, 5),
        random_dense(&mut r, 5, 4),
        random_dense(&mut r, 5, 4),
    );
    let dag = shared_left_factor(&a, &b, &c);
    let is_a = |d: &FaoDag| {
        d.nodes()
            .iter()
            .filter(|n| n.fao.dense_matrix().as_ref() == Some(&a))
            .count()
    };
    assert_eq!(is_a(&dag), 2);
    let opt = optimize(&dag);
    assert_eq!(is_a(&opt), 1);
    let x = random_vec(&mut r, 4);
    assert!(rel_err(&eval_flat(&opt, &x), &eval_flat(&dag, &x)) < 1e-12);
}

#[test]
fn shared_payload_counts_as_one_map() {
    let mut r = rng(9);
    let a = Fao::dense(random_dense(&mut r, 3, 3));
    assert!(a.shares_data(&a.clone()));
}

#[test]
fn nothing_to_rewrite_leaves_dag_unchanged() {
    let mut r = rng(10);
    let dag = FaoDag::chain(vec![
        Fao::dense(random_dense(&mut r, 2, 5)),
        Fao::dense(random_dense(&mut r, 6, 2)),
    ])
    .unwrap();
    assert!(optimize(&dag).structurally_equal(&dag));
    let one = FaoDag::single(Fao::identity(Shape::vector(3)));
    assert!(optimize(&one).structurally_equal(&one));
}

#[test]
fn constant_chain_folds_to_scalar() {
    let mut r = rng(11);
    let b = random_dense(&mut r, 1, 4);
    let c = random_dense(&mut r, 4, 1);
    let dag = FaoDag::chain(vec![
        Fao::dense(c.clone()),
        Fao::dense(b.clone()),
        Fao::neg(Shape::vector(1)),
    ])
    .unwrap();
    let opt = optimize(&dag);
    assert_eq!(opt.nodes().len(), 1);
    let alpha = -dot(b.as_slice(), c.as_slice());
    assert!((opt.node(0).fao.scalar().unwrap() - alpha).abs() < 1e-14);
}

#[test]
fn identities_are_elided() {
    let n = Shape::vector(3);
    let dag = FaoDag::chain(vec![
        Fao::identity(n.clone()),
        Fao::sum(1, n.clone()).unwrap(),
        Fao::scalar_mult(1.0, n.clone()),
        Fao::copy(1, n.clone()).unwrap(),
    ])
    .unwrap();
    let opt = optimize(&dag);
    assert_eq!(opt.nodes().len(), 1);
    assert_eq!(eval_flat(&opt, &[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
}

#[test]
fn zero_terms_are_pruned() {
    let n = Shape::vector(3);
    let mut r = rng(12);
    let mut d = DagBuilder::new();
    let c = d.add(Fao::copy(2, n.clone()).unwrap());
    let a = d.add(Fao::dense(random_dense(&mut r, 2, 3)));
    let p = d.add(Fao::dense(random_dense(&mut r, 4, 3)));
    let z = d.add(Fao::zero(Shape::vector(4), Shape::vector(2)));
    let s = d.add(Fao::sum(2, Shape::vector(2)).unwrap());
    d.connect(Port::new(c, 0), Port::new(a, 0))
        .connect(Port::new(c, 1), Port::new(p, 0))
        .chain(p, z)
        .connect(Port::new(a, 0), Port::new(s, 0))
        .connect(Port::new(z, 0), Port::new(s, 1));
    let dag = d.build().unwrap();
    let opt = optimize(&dag);
    assert_eq!(opt.nodes().len(), 1);
    let x = random_vec(&mut r, 3);
    assert!(rel_err(&eval_flat(&opt, &x), &eval_flat(&dag, &x)) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_dag_dot_test(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dag = random_dag(&mut r, 6);
        let adj = dag.adjoint();
        prop_assert!(adj.validate().is_ok());
        let x = random_vec(&mut r, dag.input_len());
        let y = random_vec(&mut r, dag.output_len());
        let fx = eval_flat(&dag, &x);
        let fty = eval_flat(&adj, &y);
        let lhs = dot(&fx, &y);
        let rhs = dot(&x, &fty);
        let scale = 1.0 + crate::linalg::norm2(&x) * crate::linalg::norm2(&y) * dag.to_dense().unwrap().frobenius();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn evaluation_is_linear(seed in any::<u64>(), alpha in -3.0..3.0f64, beta in -3.0..3.0f64) {
        let mut r = rng(seed);
        let dag = random_dag(&mut r, 7);
        let x = random_vec(&mut r, dag.input_len());
        let y = random_vec(&mut r, dag.input_len());
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = eval_flat(&dag, &mix);
        let (fx, fy) = (eval_flat(&dag, &x), eval_flat(&dag, &y));
        let rhs: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| alpha * a + beta * b).collect();
        let tol = 1e-10 * (1.0 + crate::linalg::norm2(&rhs) + alpha.abs() * crate::linalg::norm2(&fx) + beta.abs() * crate::linalg::norm2(&fy));
        prop_assert!(lhs.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= tol);
    }

    #[test]
    fn optimize_preserves_semantics(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dag = random_dag(&mut r, 8);
        let opt = optimize(&dag);
        prop_assert!(opt.validate().is_ok());
        prop_assert!(opt.nodes().len() <= dag.nodes().len() + 1);
        let x = random_vec(&mut r, dag.input_len());
        let (a, b) = (eval_flat(&opt, &x), eval_flat(&dag, &x));
        let err: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-12 * (1.0 + crate::linalg::norm2(&b)), "err {err}");
    }
}
