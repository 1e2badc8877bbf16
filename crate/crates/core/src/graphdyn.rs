//! Graphs, the random-walk Laplacian `L = W D^{-1} - I` and linear graph
//! diffusion `Σ_j w_j D^{α_j} X = L X`.
//!
//! `A = W D^{-1}` is column-stochastic: `A_ij = W_ij / d_j`, so it maps
//! probability vectors to probability vectors and `1ᵀ L = 0`.

use std::collections::HashSet;

use crate::error::{input, DragonError, Result};
use crate::measure::MultiTermSpec;
use crate::solvers::{Backend, Dynamics, FdeProblem, Trajectory};

/// Graphs with at most this many nodes get a dense transition matrix.
pub const DENSE_LIMIT: usize = 2_000;

/// Undirected weighted graph without self-loops. Each edge is stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

/// Largest accepted node count.
pub const MAX_NODES: usize = 1 << 24;

fn check_node_count(n: usize) -> Result<()> {
    if n == 0 {
        return input("graph has no nodes");
    }
    if n > MAX_NODES {
        return input(format!("graph has {n} nodes, limit is {MAX_NODES}"));
    }
    Ok(())
}

impl GraphSpec {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        check_node_count(n)?;
        let mut seen = HashSet::with_capacity(edges.len());
        for &(i, j, w) in &edges {
            if i >= n || j >= n {
                return input(format!("edge ({i}, {j}) references a node outside 0..{n}"));
            }
            if i == j {
                return input(format!("self-loop at node {i}"));
            }
            if !(w > 0.0) || !w.is_finite() {
                return input(format!("edge ({i}, {j}) has non-positive weight {w}"));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return input(format!("edge ({i}, {j}) is listed twice"));
            }
        }
        Ok(Self { n, edges })
    }

    /// Path `0 - 1 - ... - (n-1)` with unit weights.
    pub fn path(n: usize) -> Result<Self> {
        check_node_count(n)?;
        Self::new(n, (1..n).map(|i| (i - 1, i, 1.0)).collect())
    }

    /// Cycle on `n >= 3` nodes with unit weights.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return input("a cycle needs at least three nodes");
        }
        check_node_count(n)?;
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Weighted degrees `d_i = Σ_j W_ij`.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(i, j, w) in &self.edges {
            d[i] += w;
            d[j] += w;
        }
        d
    }

    /// Neighbour lists `(j, W_ij)` per node, in edge order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Transition {
    Dense(Vec<f64>),
    /// Row `i` holds `(j, A_ij)`.
    Sparse(Vec<Vec<(usize, f64)>>),
}

/// `A = W D^{-1}` and `L = A - I` for a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOperator {
    n: usize,
    degrees: Vec<f64>,
    a: Transition,
}

/// Builds the diffusion operator; fails on isolated nodes.
pub fn build_operator(g: &GraphSpec) -> Result<DiffusionOperator> {
    let degrees = g.degrees();
    if let Some(i) = degrees.iter().position(|&d| !(d > 0.0)) {
        return input(format!("node {i} is isolated (zero degree)"));
    }
    let n = g.n;
    let a = if n <= DENSE_LIMIT {
        let mut m = vec![0.0; n * n];
        for &(i, j, w) in &g.edges {
            m[i * n + j] += w / degrees[j];
            m[j * n + i] += w / degrees[i];
        }
        Transition::Dense(m)
    } else {
        let rows = g
            .adjacency()
            .into_iter()
            .map(|row| row.into_iter().map(|(j, w)| (j, w / degrees[j])).collect())
            .collect();
        Transition::Sparse(rows)
    };
    Ok(DiffusionOperator { n, degrees, a })
}

impl DiffusionOperator {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.a, Transition::Dense(_))
    }

    /// Dense copy of `A`, row-major.
    pub fn transition_matrix(&self) -> Vec<f64> {
        match &self.a {
            Transition::Dense(m) => m.clone(),
            Transition::Sparse(rows) => {
                let mut m = vec![0.0; self.n * self.n];
                for (i, row) in rows.iter().enumerate() {
                    for &(j, v) in row {
                        m[i * self.n + j] += v;
                    }
                }
                m
            }
        }
    }

    /// Dense copy of `L = A - I`, row-major.
    pub fn laplacian(&self) -> Vec<f64> {
        let mut m = self.transition_matrix();
        for i in 0..self.n {
            m[i * self.n + i] -= 1.0;
        }
        m
    }

    /// Stationary distribution of `A`, proportional to the degrees.
    pub fn stationary(&self) -> Vec<f64> {
        let total: f64 = self.degrees.iter().sum();
        self.degrees.iter().map(|d| d / total).collect()
    }

    /// `out = L X` for `X` stored row-major as `n × channels`.
    pub fn apply_laplacian(&self, x: &[f64], channels: usize, out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n * channels);
        match &self.a {
            Transition::Dense(m) => {
                for i in 0..n {
                    let row = &m[i * n..(i + 1) * n];
                    let o = &mut out[i * channels..(i + 1) * channels];
                    for (oc, xc) in o.iter_mut().zip(&x[i * channels..(i + 1) * channels]) {
                        *oc = -xc;
                    }
                    for (j, &aij) in row.iter().enumerate() {
                        if aij != 0.0 {
                            for (oc, xc) in o.iter_mut().zip(&x[j * channels..(j + 1) * channels]) {
                                *oc += aij * xc;
                            }
                        }
                    }
                }
            }
            Transition::Sparse(rows) => {
                for (i, row) in rows.iter().enumerate() {
                    let o = &mut out[i * channels..(i + 1) * channels];
                    for (oc, xc) in o.iter_mut().zip(&x[i * channels..(i + 1) * channels]) {
                        *oc = -xc;
                    }
                    for &(j, aij) in row {
                        for (oc, xc) in o.iter_mut().zip(&x[j * channels..(j + 1) * channels]) {
                            *oc += aij * xc;
                        }
                    }
                }
            }
        }
    }
}

/// Autonomous linear diffusion `F(t, X) = (A - I) X` on `channels` columns.
#[derive(Debug, Clone)]
pub struct DGrandRhs<'a> {
    op: &'a DiffusionOperator,
    channels: usize,
}

/// Right-hand side of linear diffusion with `A` fixed.
pub fn d_grand_rhs(op: &DiffusionOperator, channels: usize) -> Result<DGrandRhs<'_>> {
    if channels == 0 {
        return input("feature matrix needs at least one channel");
    }
    Ok(DGrandRhs { op, channels })
}

impl DGrandRhs<'_> {
    pub fn state_len(&self) -> usize {
        self.op.n * self.channels
    }

    /// `L X` with a shape check.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.state_len() {
            return input(format!(
                "state has {} entries, expected {} nodes × {} channels",
                x.len(),
                self.op.n,
                self.channels
            ));
        }
        let mut out = vec![0.0; x.len()];
        self.op.apply_laplacian(x, self.channels, &mut out);
        Ok(out)
    }
}

impl Dynamics for DGrandRhs<'_> {
    fn eval(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        self.op.apply_laplacian(x, self.channels, out)
    }
}

/// Solves `Σ_j w_j D^{α_j} X = L X` from `x0` (`n × channels`, row-major).
pub fn solve_dragon_diffusion(
    g: &GraphSpec,
    spec: &MultiTermSpec,
    x0: &[f64],
    channels: usize,
    t_end: f64,
    h: f64,
    backend: Backend,
) -> Result<Trajectory> {
    let op = build_operator(g)?;
    let rhs = d_grand_rhs(&op, channels)?;
    if x0.len() != rhs.state_len() {
        return Err(DragonError::Input(format!(
            "initial state has {} entries, expected {}",
            x0.len(),
            rhs.state_len()
        )));
    }
    FdeProblem::new(spec.clone(), rhs, x0.to_vec(), t_end, h)?.solve(backend)
}

/// Total-variation distance `½ Σ |p_i - q_i|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_count_is_capped() {
        assert!(GraphSpec::path(MAX_NODES + 1).is_err());
        assert!(GraphSpec::cycle(usize::MAX).is_err());
        assert!(GraphSpec::new(MAX_NODES + 1, vec![]).is_err());
    }
    use crate::fracfn::AlphaOrder;
    use crate::measure::dirac;

    #[test]
    fn two_node_laplacian() {
        let g = GraphSpec::new(2, vec![(0, 1, 1.0)]).unwrap();
        let op = build_operator(&g).unwrap();
        assert_eq!(op.laplacian(), vec![-1.0, 1.0, 1.0, -1.0]);
    }

    #[test]
    fn path_transition_columns() {
        let op = build_operator(&GraphSpec::path(3).unwrap()).unwrap();
        let a = op.transition_matrix();
        let col = |j: usize| [a[j], a[3 + j], a[6 + j]];
        assert_eq!(col(0), [0.0, 1.0, 0.0]);
        assert_eq!(col(1), [0.5, 0.0, 0.5]);
        assert_eq!(col(2), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn graph_validation() {
        assert!(GraphSpec::new(2, vec![(0, 0, 1.0)]).is_err());
        assert!(GraphSpec::new(2, vec![(0, 2, 1.0)]).is_err());
        assert!(GraphSpec::new(2, vec![(0, 1, 0.0)]).is_err());
        assert!(GraphSpec::new(2, vec![(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        let g = GraphSpec::new(3, vec![(0, 1, 1.0)]).unwrap();
        let err = build_operator(&g).unwrap_err();
        assert!(err.to_string().contains("node 2"));
    }

    #[test]
    fn rhs_examples() {
        let g = GraphSpec::new(2, vec![(0, 1, 1.0)]).unwrap();
        let op = build_operator(&g).unwrap();
        let f = d_grand_rhs(&op, 1).unwrap();
        assert_eq!(f.apply(&[1.0, 0.0]).unwrap(), vec![-1.0, 1.0]);
        assert!(f.apply(&[1.0, 0.0, 0.0]).is_err());
        let cyc = build_operator(&GraphSpec::cycle(5).unwrap()).unwrap();
        let f = d_grand_rhs(&cyc, 2).unwrap();
        assert!(f.apply(&[0.2; 10]).unwrap().iter().all(|v| v.abs() < 1e-16));
    }

    #[test]
    fn dense_and_sparse_agree() {
        let n = DENSE_LIMIT + 1;
        let g = GraphSpec::cycle(n).unwrap();
        let op = build_operator(&g).unwrap();
        assert!(!op.is_dense());
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut out = vec![0.0; n];
        op.apply_laplacian(&x, 1, &mut out);
        for i in 0..n {
            let expect = 0.5 * (x[(i + n - 1) % n] + x[(i + 1) % n]) - x[i];
            assert!((out[i] - expect).abs() < 1e-14);
        }
        assert!(out.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn first_order_two_node_step() {
        let g = GraphSpec::new(2, vec![(0, 1, 1.0)]).unwrap();
        let spec = dirac(AlphaOrder::new(1.0).unwrap());
        let tr =
            solve_dragon_diffusion(&g, &spec, &[1.0, 0.0], 1, 1.0, 0.125, Backend::Gl).unwrap();
        assert_eq!(tr.state(1), &[1.0 - 0.125, 0.125]);
    }

    #[test]
    fn uniform_on_regular_graph_is_stationary() {
        let g = GraphSpec::cycle(6).unwrap();
        let spec = MultiTermSpec::new(vec![(0.3, 0.5), (0.9, 1.0)]).unwrap();
        let x0 = vec![1.0 / 6.0; 6];
        for backend in [Backend::Gl, Backend::Strategy1] {
            let tr = solve_dragon_diffusion(&g, &spec, &x0, 1, 1.0, 0.05, backend).unwrap();
            for s in tr.states() {
                for v in s {
                    assert!((v - 1.0 / 6.0).abs() < 1e-15);
                }
            }
        }
    }
}
