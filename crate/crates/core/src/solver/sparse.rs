//! Block-sparse Cholesky for symmetric positive-definite systems with 3×3
//! blocks, one block per pose.
//!
//! A greedy minimum-degree ordering is computed once from the sparsity
//! pattern and reused across factorizations. All containers are ordered so
//! the factorization is deterministic.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, Vector3};

/// Symmetric block system `A x = b`. Only the diagonal and the blocks
/// `A[(a, b)]` with `a < b` are stored.
#[derive(Debug, Clone)]
pub(crate) struct BlockSystem {
    pub diag: Vec<Matrix3<f64>>,
    pub upper: BTreeMap<(usize, usize), Matrix3<f64>>,
    pub rhs: Vec<Vector3<f64>>,
}

impl BlockSystem {
    pub fn new(n: usize) -> Self {
        BlockSystem {
            diag: vec![Matrix3::zeros(); n],
            upper: BTreeMap::new(),
            rhs: vec![Vector3::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    /// Accumulates block `A[(a, b)]` (rows of `a`, columns of `b`).
    pub fn add_block(&mut self, a: usize, b: usize, block: &Matrix3<f64>) {
        if a == b {
            self.diag[a] += block;
        } else if a < b {
            *self.upper.entry((a, b)).or_insert_with(Matrix3::zeros) += block;
        } else {
            *self.upper.entry((b, a)).or_insert_with(Matrix3::zeros) += block.transpose();
        }
    }
}

/// Elimination order: `order[p]` is the variable eliminated at step `p`,
/// `position[v]` the step at which variable `v` is eliminated.
#[derive(Debug, Clone)]
pub(crate) struct EliminationOrder {
    order: Vec<usize>,
    position: Vec<usize>,
}

impl EliminationOrder {
    /// Greedy minimum degree; ties go to the lowest variable index.
    pub fn minimum_degree(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (a, b) in edges {
            if a != b {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
        let mut order = Vec::with_capacity(n);
        while let Some((_, v)) = queue.pop_first() {
            order.push(v);
            let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
            for &u in &nbrs {
                queue.remove(&(adj[u].len(), u));
                adj[u].remove(&v);
            }
            for (x, &u) in nbrs.iter().enumerate() {
                for &w in &nbrs[x + 1..] {
                    adj[u].insert(w);
                    adj[w].insert(u);
                }
            }
            for &u in &nbrs {
                queue.insert((adj[u].len(), u));
            }
        }
        let mut position = vec![0; n];
        for (p, &v) in order.iter().enumerate() {
            position[v] = p;
        }
        EliminationOrder { order, position }
    }

    #[cfg(test)]
    pub fn natural(n: usize) -> Self {
        EliminationOrder {
            order: (0..n).collect(),
            position: (0..n).collect(),
        }
    }
}

/// Lower-triangular block factor in elimination order.
struct Factor {
    diag: Vec<Matrix3<f64>>,
    cols: Vec<BTreeMap<usize, Matrix3<f64>>>,
}

fn chol3(m: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let sym = 0.5 * (m + m.transpose());
    sym.cholesky().map(|c| c.l())
}

fn lower_inverse(l: &Matrix3<f64>) -> Matrix3<f64> {
    let mut inv = Matrix3::identity();
    l.solve_lower_triangular_mut(&mut inv);
    inv
}

impl Factor {
    fn compute(system: &BlockSystem, order: &EliminationOrder) -> Option<Factor> {
        let n = system.len();
        let mut diag: Vec<Matrix3<f64>> = order.order.iter().map(|&v| system.diag[v]).collect();
        let mut cols: Vec<BTreeMap<usize, Matrix3<f64>>> = vec![BTreeMap::new(); n];
        for (&(a, b), block) in &system.upper {
            let (pa, pb) = (order.position[a], order.position[b]);
            // stored block has rows of a, columns of b
            if pa > pb {
                cols[pb].insert(pa, *block);
            } else {
                cols[pa].insert(pb, block.transpose());
            }
        }
        for p in 0..n {
            let l = chol3(&diag[p])?;
            let l_inv_t = lower_inverse(&l).transpose();
            diag[p] = l;
            let mut col = std::mem::take(&mut cols[p]);
            for block in col.values_mut() {
                *block *= l_inv_t;
            }
            let entries: Vec<(usize, Matrix3<f64>)> = col.iter().map(|(&r, b)| (r, *b)).collect();
            for (x, (i, li)) in entries.iter().enumerate() {
                diag[*i] -= li * li.transpose();
                for (j, lj) in &entries[..x] {
                    // i > j because entries are sorted by row
                    *cols[*j].entry(*i).or_insert_with(Matrix3::zeros) -= li * lj.transpose();
                }
            }
            cols[p] = col;
        }
        Some(Factor { diag, cols })
    }

    fn solve(&self, rhs: &[Vector3<f64>], order: &EliminationOrder) -> Vec<Vector3<f64>> {
        let n = self.diag.len();
        let mut y: Vec<Vector3<f64>> = order.order.iter().map(|&v| rhs[v]).collect();
        for p in 0..n {
            let yp = self.diag[p]
                .solve_lower_triangular(&y[p])
                .expect("factor diagonal is non-singular");
            for (&i, l) in &self.cols[p] {
                y[i] -= l * yp;
            }
            y[p] = yp;
        }
        for p in (0..n).rev() {
            let mut v = y[p];
            for (&i, l) in &self.cols[p] {
                v -= l.transpose() * y[i];
            }
            y[p] = self.diag[p]
                .tr_solve_lower_triangular(&v)
                .expect("factor diagonal is non-singular");
        }
        let mut x = vec![Vector3::zeros(); n];
        for (p, &v) in order.order.iter().enumerate() {
            x[v] = y[p];
        }
        x
    }
}

/// Solves `A x = b`; `None` when `A` is not numerically positive-definite.
pub(crate) fn solve(system: &BlockSystem, order: &EliminationOrder) -> Option<Vec<Vector3<f64>>> {
    let factor = Factor::compute(system, order)?;
    let x = factor.solve(&system.rhs, order);
    x.iter().all(|v| v.iter().all(|c| c.is_finite())).then_some(x)
}
