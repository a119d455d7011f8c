//! Linear expression DAGs to an FAO DAG, and to an explicit sparse matrix.

use std::collections::HashMap;

use crate::dag::{DagBuilder, FaoDag, NodeId, Port};
use crate::error::{Error, Result};
use crate::expr::{ExpressionDag, Func, NodeRef};
use crate::fao::Fao;
use crate::shape::Shape;
use crate::sparse::{self, Csr};

fn var_position(vars: &[(String, Shape)], name: &str) -> Result<usize> {
    vars.iter()
        .position(|(v, _)| v == name)
        .ok_or_else(|| Error::arg(format!("variable {name} missing from the variable ordering")))
}

fn check_exprs(exprs: &[ExpressionDag], vars: &[(String, Shape)]) -> Result<()> {
    if exprs.is_empty() {
        return Err(Error::arg("no expressions"));
    }
    for (k, e) in exprs.iter().enumerate() {
        if !e.is_linear() {
            return Err(Error::arg(format!("expression {k} is not linear")));
        }
        if e.shape().is_matrix() {
            return Err(Error::arg(format!(
                "expression {k} ends in a matrix, expected a vector"
            )));
        }
        for (v, s) in e.variables() {
            let i = var_position(vars, v)?;
            if &vars[i].1 != s {
                return Err(Error::dim(format!(
                    "variable {v} has shape {s}, ordering says {}",
                    vars[i].1
                )));
            }
        }
    }
    Ok(())
}

/// Where each output of each expression node is read: `(expr, node)` input
/// ports, or `None` for the expression's end.
type Readers = HashMap<(usize, NodeRef), Vec<Option<(usize, usize)>>>;

/// An FAO DAG mapping the stacked variables `vstack(x₁, …, x_k)` (in the
/// order of `vars`) to `vstack(e₁(x), …, e_ℓ(x))`.
///
/// A `split` start node feeds one `copy` per variable; each occurrence of a
/// variable becomes an identity node (a `mat` node for matrix variables).
/// Outputs read more than once go through a `copy` node. Outputs read by
/// nobody, such as variables no expression uses, are sent through zero maps
/// into a final sum so that the DAG keeps a single end node.
pub fn graph_repr(exprs: &[ExpressionDag], vars: &[(String, Shape)]) -> Result<FaoDag> {
    check_exprs(exprs, vars)?;
    let m: usize = exprs.iter().map(|e| e.shape().total()).sum();

    let mut readers: Readers = HashMap::new();
    for (k, e) in exprs.iter().enumerate() {
        for (src, dst, i) in e.edges() {
            readers.entry((k, src)).or_default().push(Some((dst, i)));
        }
        readers.entry((k, e.end())).or_default().push(None);
    }

    let mut db = DagBuilder::new();
    let split = db.add(Fao::split(
        vars.iter().map(|(_, s)| Shape::vector(s.total())).collect(),
    )?);

    // Occurrences of each variable: one per read of a variable node.
    let mut occurrences: Vec<Vec<(usize, NodeRef)>> = vec![Vec::new(); vars.len()];
    for (k, e) in exprs.iter().enumerate() {
        for (id, node) in e.nodes().iter().enumerate() {
            if let Func::Variable(v) = &node.func {
                let r = NodeRef { node: id, port: 0 };
                let reads = readers.get(&(k, r)).map_or(0, Vec::len);
                let i = var_position(vars, v)?;
                occurrences[i].extend(std::iter::repeat_n((k, r), reads));
            }
        }
    }

    let mut unused: Vec<(Port, Shape)> = Vec::new();
    // FAO node for each expression node; variable reads map to the identity
    // or mat node standing in for that one read.
    let mut fao_node: HashMap<(usize, usize), NodeId> = HashMap::new();
    let mut var_read: HashMap<(usize, NodeRef), Vec<NodeId>> = HashMap::new();
    for (i, (_, shape)) in vars.iter().enumerate() {
        let occ = &occurrences[i];
        let flat = Shape::vector(shape.total());
        if occ.is_empty() {
            unused.push((Port::new(split, i), flat));
            continue;
        }
        let copy = db.add(Fao::copy(occ.len(), flat.clone())?);
        db.connect(Port::new(split, i), Port::new(copy, 0));
        for (j, key) in occ.iter().enumerate() {
            let stand_in = if shape.is_matrix() {
                let (p, q) = shape.rows_cols();
                Fao::mat(p, q)
            } else {
                Fao::identity(flat.clone())
            };
            let id = db.add(stand_in);
            db.connect(Port::new(copy, j), Port::new(id, 0));
            var_read.entry(*key).or_default().push(id);
        }
    }

    for (k, e) in exprs.iter().enumerate() {
        for (id, node) in e.nodes().iter().enumerate() {
            if let Func::Linear(f) = &node.func {
                fao_node.insert((k, id), db.add(f.clone()));
            }
        }
    }

    let stack = db.add(Fao::vstack(exprs.iter().map(|e| e.shape().clone()).collect())?);

    // Wire every output to its readers.
    for (k, e) in exprs.iter().enumerate() {
        for (id, node) in e.nodes().iter().enumerate() {
            for port in 0..node.shapes.len() {
                let r = NodeRef { node: id, port };
                let dsts: Vec<Port> = readers
                    .get(&(k, r))
                    .map(|v| {
                        v.iter()
                            .map(|d| match *d {
                                Some((dst, i)) => Port::new(fao_node[&(k, dst)], i),
                                None => Port::new(stack, k),
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                let sources: Vec<Port> = match &node.func {
                    // Each read already has its own stand-in node.
                    Func::Variable(_) => var_read
                        .get(&(k, r))
                        .map(|ids| ids.iter().map(|&n| Port::new(n, 0)).collect())
                        .unwrap_or_default(),
                    Func::Linear(_) => {
                        let src = Port::new(fao_node[&(k, id)], port);
                        match dsts.len() {
                            0 => {
                                unused.push((src, node.shapes[port].clone()));
                                Vec::new()
                            }
                            1 => vec![src],
                            n => {
                                let copy = db.add(Fao::copy(n, node.shapes[port].clone())?);
                                db.connect(src, Port::new(copy, 0));
                                (0..n).map(|j| Port::new(copy, j)).collect()
                            }
                        }
                    }
                    _ => return Err(Error::arg(format!("expression {k} is not linear"))),
                };
                for (s, d) in sources.into_iter().zip(dsts) {
                    db.connect(s, d);
                }
            }
        }
    }

    if !unused.is_empty() {
        let total = db.add(Fao::sum(unused.len() + 1, Shape::vector(m))?);
        db.connect(Port::new(stack, 0), Port::new(total, 0));
        for (j, (port, shape)) in unused.into_iter().enumerate() {
            let z = db.add(Fao::zero(shape, Shape::vector(m)));
            db.connect(port, Port::new(z, 0));
            db.connect(Port::new(z, 0), Port::new(total, j + 1));
        }
    }
    db.build()
}

/// Coefficients of one expression output, per variable index.
type CoeffMap = Vec<Option<Csr>>;

fn add_into(acc: &mut Option<Csr>, term: Csr) -> Result<()> {
    *acc = Some(match acc.take() {
        Some(a) => sparse::add(&a, &term)?,
        None => term,
    });
    Ok(())
}

/// Sparse matrix of the map `vstack(x₁, …, x_k) ↦ vstack(e₁(x), …, e_ℓ(x))`,
/// built from per-atom coefficients. Constant start nodes contribute
/// nothing, so for affine expressions this is the matrix of the linear part.
pub fn matrix_repr(exprs: &[ExpressionDag], vars: &[(String, Shape)]) -> Result<Csr> {
    if exprs.is_empty() {
        return Err(Error::arg("no expressions"));
    }
    let mut rows = Vec::with_capacity(exprs.len());
    for (k, e) in exprs.iter().enumerate() {
        if !e.is_affine() {
            return Err(Error::arg(format!("expression {k} is not affine")));
        }
        let map = coeff_map(e, vars)?;
        let m = e.shape().total();
        let blocks: Vec<Csr> = map
            .into_iter()
            .zip(vars)
            .map(|(c, (_, s))| c.unwrap_or_else(|| sparse::zeros(m, s.total())))
            .collect();
        rows.push(sparse::hstack(&blocks));
    }
    Ok(sparse::vstack(&rows))
}

fn coeff_map(e: &ExpressionDag, vars: &[(String, Shape)]) -> Result<CoeffMap> {
    let mut maps: HashMap<NodeRef, CoeffMap> = HashMap::new();
    for (id, node) in e.nodes().iter().enumerate() {
        match &node.func {
            Func::Variable(v) => {
                let i = var_position(vars, v)?;
                let mut map = vec![None; vars.len()];
                map[i] = Some(sparse::identity(node.shapes[0].total()));
                maps.insert(NodeRef { node: id, port: 0 }, map);
            }
            Func::Constant(_) => {
                maps.insert(NodeRef { node: id, port: 0 }, vec![None; vars.len()]);
            }
            Func::Linear(f) => {
                for j in 0..node.shapes.len() {
                    let mut map: CoeffMap = vec![None; vars.len()];
                    for (i, a) in node.args.iter().enumerate() {
                        let arg = &maps[a];
                        if arg.iter().all(Option::is_none) {
                            continue;
                        }
                        let d = f.matrix_coeff(i, j)?;
                        for (slot, c) in map.iter_mut().zip(arg) {
                            if let Some(c) = c {
                                add_into(slot, sparse::matmul(&d, c)?)?;
                            }
                        }
                    }
                    maps.insert(NodeRef { node: id, port: j }, map);
                }
            }
            _ => return Err(Error::arg(format!("{} has no coefficient matrix", node.func.name()))),
        }
    }
    Ok(maps.remove(&e.end()).expect("end node evaluated"))
}
