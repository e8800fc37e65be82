//! Time-invariant subproblems: linear assignment and the asymmetric TSP.
//!
//! The ATSP solver is a best-first branch-and-bound on the assignment
//! relaxation. When the relaxed solution splits into subtours, the shortest
//! one is broken: child `l` forbids its `l`-th arc and forces the arcs before
//! it, so every tour lies in exactly one child.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::tdgraph::{Arc, Vertex};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AtspError {
    #[error("no feasible solution")]
    Infeasible,
    #[error("inconsistent constraints: {0}")]
    InvalidConstraints(String),
}

/// Square matrix of non-negative costs. The diagonal and forbidden entries
/// hold a sentinel larger than `n` times the largest finite cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
    forbidden: Vec<bool>,
    sentinel: f64,
}

impl CostMatrix {
    /// Builds a matrix from `cost(i, j)`; `None` marks a forbidden entry.
    /// The diagonal is always forbidden.
    pub fn from_fn(n: usize, cost: impl Fn(Vertex, Vertex) -> Option<f64>) -> Self {
        Self::build(n, cost, true)
    }

    /// A plain assignment matrix in which the diagonal is an ordinary entry.
    pub fn with_diagonal(rows: &[Vec<f64>]) -> Self {
        Self::build(rows.len(), |i, j| Some(rows[i][j]), false)
    }

    fn build(n: usize, cost: impl Fn(Vertex, Vertex) -> Option<f64>, forbid_diagonal: bool) -> Self {
        let mut data = vec![0.0; n * n];
        let mut forbidden = vec![true; n * n];
        let mut max_cost: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i == j && forbid_diagonal {
                    continue;
                }
                if let Some(c) = cost(i, j) {
                    assert!(c.is_finite() && c >= 0.0, "cost ({i}, {j}) = {c} must be finite and non-negative");
                    data[i * n + j] = c;
                    forbidden[i * n + j] = false;
                    max_cost = max_cost.max(c);
                }
            }
        }
        let sentinel = 1.0 + 2.0 * n as f64 * max_cost;
        for k in 0..n * n {
            if forbidden[k] {
                data[k] = sentinel;
            }
        }
        Self { n, data, forbidden, sentinel }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        Self::from_fn(rows.len(), |i, j| Some(rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sentinel(&self) -> f64 {
        self.sentinel
    }

    pub fn get(&self, i: Vertex, j: Vertex) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn is_forbidden(&self, i: Vertex, j: Vertex) -> bool {
        self.forbidden[i * self.n + j]
    }

    fn forbid(&mut self, i: Vertex, j: Vertex) {
        self.forbidden[i * self.n + j] = true;
        self.data[i * self.n + j] = self.sentinel;
    }

    /// Forces `(i, j)` by forbidding every other arc leaving `i` or entering
    /// `j`.
    fn force(&mut self, i: Vertex, j: Vertex) {
        for k in 0..self.n {
            if k != j {
                self.forbid(i, k);
            }
            if k != i {
                self.forbid(k, j);
            }
        }
    }

    /// Cost of a closed tour given by its vertex order.
    pub fn tour_cost(&self, order: &[Vertex]) -> f64 {
        (0..order.len()).map(|k| self.get(order[k], order[(k + 1) % order.len()])).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `perm[i]` is the column assigned to row `i`.
    pub perm: Vec<usize>,
    pub cost: f64,
}

/// Optimal linear assignment by the shortest augmenting path method with
/// potentials, O(n^3).
pub fn solve_assignment(c: &CostMatrix) -> Result<Assignment, AtspError> {
    let n = c.n;
    if n == 0 {
        return Ok(Assignment { perm: Vec::new(), cost: 0.0 });
    }
    // 1-based arrays; column 0 is a virtual column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = c.data[(i0 - 1) * n + j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    if (0..n).any(|i| c.is_forbidden(i, perm[i])) {
        return Err(AtspError::Infeasible);
    }
    let cost = (0..n).map(|i| c.get(i, perm[i])).sum();
    Ok(Assignment { perm, cost })
}

/// Cycles of a permutation, each starting at its smallest vertex, in order of
/// that vertex.
pub fn cycles(perm: &[usize]) -> Vec<Vec<Vertex>> {
    let mut seen = vec![false; perm.len()];
    let mut out = Vec::new();
    for s in 0..perm.len() {
        if seen[s] {
            continue;
        }
        let mut cyc = Vec::new();
        let mut v = s;
        while !seen[v] {
            seen[v] = true;
            cyc.push(v);
            v = perm[v];
        }
        out.push(cyc);
    }
    out
}

/// Branching constraints on the ATSP.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AtspConstraints {
    pub forced: BTreeSet<Arc>,
    pub forbidden: BTreeSet<Arc>,
}

impl AtspConstraints {
    /// Forced arcs must form vertex-disjoint simple paths (or one Hamiltonian
    /// cycle) and may not be forbidden.
    pub fn validate(&self, n: usize) -> Result<(), AtspError> {
        let bad = |m: String| Err(AtspError::InvalidConstraints(m));
        let mut succ = vec![usize::MAX; n];
        let mut pred = vec![usize::MAX; n];
        for &(i, j) in self.forced.iter().chain(&self.forbidden) {
            if i >= n || j >= n || i == j {
                return bad(format!("arc ({i}, {j}) is not an arc of a {n}-vertex instance"));
            }
        }
        for &(i, j) in &self.forced {
            if self.forbidden.contains(&(i, j)) {
                return bad(format!("arc ({i}, {j}) is both forced and forbidden"));
            }
            if succ[i] != usize::MAX || pred[j] != usize::MAX {
                return bad(format!("forced arc ({i}, {j}) shares an endpoint with another forced arc"));
            }
            succ[i] = j;
            pred[j] = i;
        }
        for cyc in cycles_of_partial(&succ) {
            if cyc < n {
                return bad("forced arcs close a subtour".into());
            }
        }
        Ok(())
    }
}

/// Lengths of the cycles formed by a partial successor map.
fn cycles_of_partial(succ: &[usize]) -> Vec<usize> {
    let n = succ.len();
    let mut out = Vec::new();
    let mut state = vec![0u8; n];
    for s in 0..n {
        if state[s] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = s;
        while v != usize::MAX && state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = succ[v];
        }
        if v != usize::MAX && state[v] == 1 {
            let pos = path.iter().position(|&x| x == v).unwrap();
            out.push(path.len() - pos);
        }
        for &x in &path {
            state[x] = 2;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    /// Visiting order, starting at vertex 0.
    pub order: Vec<Vertex>,
    pub cost: f64,
}

impl Tour {
    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        let n = self.order.len();
        (0..n).map(move |k| (self.order[k], self.order[(k + 1) % n]))
    }
}

fn order_from_perm(perm: &[usize]) -> Vec<Vertex> {
    let mut order = vec![0];
    let mut v = perm[0];
    while v != 0 {
        order.push(v);
        v = perm[v];
    }
    order
}

struct Node {
    lb: f64,
    seq: usize,
    forced: BTreeSet<Arc>,
    forbidden: BTreeSet<Arc>,
    perm: Vec<usize>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap on the reverse: smallest bound first, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other.lb.total_cmp(&self.lb).then(other.seq.cmp(&self.seq))
    }
}

fn relax(base: &CostMatrix, forced: &BTreeSet<Arc>, forbidden: &BTreeSet<Arc>) -> Option<Assignment> {
    let mut c = base.clone();
    for &(i, j) in forbidden {
        c.forbid(i, j);
    }
    for &(i, j) in forced {
        c.force(i, j);
    }
    solve_assignment(&c).ok()
}

/// Statistics of an ATSP search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AtspStats {
    pub nodes: usize,
}

/// Optimal tour respecting `k`. Ties between equally cheap tours found during
/// the search go to the lexicographically smaller visiting order.
pub fn solve_atsp(c: &CostMatrix, k: &AtspConstraints) -> Result<Tour, AtspError> {
    solve_atsp_with_stats(c, k).map(|r| r.0)
}

pub fn solve_atsp_with_stats(c: &CostMatrix, k: &AtspConstraints) -> Result<(Tour, AtspStats), AtspError> {
    let n = c.n;
    k.validate(n)?;
    let mut stats = AtspStats::default();
    if n == 1 {
        return Ok((Tour { order: vec![0], cost: 0.0 }, stats));
    }
    if n == 0 {
        return Err(AtspError::Infeasible);
    }
    let mut best: Option<Tour> = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    if let Some(a) = relax(c, &k.forced, &k.forbidden) {
        heap.push(Node { lb: a.cost, seq, forced: k.forced.clone(), forbidden: k.forbidden.clone(), perm: a.perm });
    }
    while let Some(node) = heap.pop() {
        if let Some(b) = &best {
            if node.lb >= b.cost - 1e-12 * b.cost.abs().max(1.0) {
                break;
            }
        }
        stats.nodes += 1;
        let cyc = cycles(&node.perm);
        if cyc.len() == 1 {
            let order = order_from_perm(&node.perm);
            let cost = c.tour_cost(&order);
            let better = match &best {
                None => true,
                Some(b) => cost < b.cost - 1e-12 * b.cost.abs().max(1.0) || (cost <= b.cost && order < b.order),
            };
            if better {
                best = Some(Tour { order, cost });
            }
            continue;
        }
        // the shortest subtour, ties to the one with the smallest vertex
        let sub = cyc.iter().min_by_key(|s| s.len()).unwrap();
        let arcs: Vec<Arc> = (0..sub.len()).map(|m| (sub[m], sub[(m + 1) % sub.len()])).collect();
        let mut forced = node.forced.clone();
        for &arc in &arcs {
            if !node.forced.contains(&arc) {
                let mut forbidden = node.forbidden.clone();
                forbidden.insert(arc);
                if let Some(a) = relax(c, &forced, &forbidden) {
                    seq += 1;
                    heap.push(Node { lb: a.cost.max(node.lb), seq, forced: forced.clone(), forbidden, perm: a.perm });
                }
            }
            forced.insert(arc);
        }
    }
    best.map(|t| (t, stats)).ok_or(AtspError::Infeasible)
}
