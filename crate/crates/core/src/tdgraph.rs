//! Time-dependent graphs, path durations and path dominance.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::pwl::{TravelTime, EPS_TIME};

pub type Vertex = usize;
pub type Arc = (Vertex, Vertex);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph needs at least one vertex")]
    NoVertices,
    #[error("vertex {0} out of range")]
    VertexOutOfRange(Vertex),
    #[error("self-loop on vertex {0}")]
    SelfLoop(Vertex),
    #[error("arc ({0}, {1}) given twice")]
    DuplicateArc(Vertex, Vertex),
    #[error("arc ({0}, {1}) does not exist")]
    MissingArc(Vertex, Vertex),
    #[error("graph is not connected")]
    NotConnected,
    #[error("horizon {0} must be positive and finite")]
    BadHorizon(f64),
    #[error("start time {0} must lie in [0, T]")]
    StartOutsideHorizon(f64),
    #[error("arc ({0}, {1}) has a breakpoint at {2}, outside [0, T]")]
    BreakpointOutsideHorizon(Vertex, Vertex, f64),
    #[error("not a permutation of the vertex set starting at the depot")]
    NotAPermutation,
    #[error("graph is not a complete TDTSP instance: {0}")]
    NotTdtsp(String),
}

/// Directed graph with one FIFO travel-time function per arc, a planning
/// horizon `[0, T]` and a departure time `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TdGraph {
    n: usize,
    arcs: Vec<Option<TravelTime>>,
    arc_list: Vec<Arc>,
    horizon: f64,
    start_time: f64,
    required_vertices: BTreeSet<Vertex>,
    required_arcs: BTreeSet<Arc>,
}

impl TdGraph {
    /// Builds a graph from its arcs. Required vertices default to all
    /// vertices and required arcs to none, which is the TDTSP setting.
    pub fn new(
        n: usize,
        horizon: f64,
        start_time: f64,
        arcs: impl IntoIterator<Item = (Arc, TravelTime)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::NoVertices);
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(GraphError::BadHorizon(horizon));
        }
        if !(0.0..=horizon).contains(&start_time) {
            return Err(GraphError::StartOutsideHorizon(start_time));
        }
        let mut table: Vec<Option<TravelTime>> = vec![None; n * n];
        for ((i, j), tt) in arcs {
            if i >= n {
                return Err(GraphError::VertexOutOfRange(i));
            }
            if j >= n {
                return Err(GraphError::VertexOutOfRange(j));
            }
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            for t in tt.function().breakpoint_times() {
                if t < -EPS_TIME || t > horizon + EPS_TIME {
                    return Err(GraphError::BreakpointOutsideHorizon(i, j, t));
                }
            }
            let slot = &mut table[i * n + j];
            if slot.is_some() {
                return Err(GraphError::DuplicateArc(i, j));
            }
            *slot = Some(tt);
        }
        let arc_list: Vec<Arc> = (0..n * n).filter(|&k| table[k].is_some()).map(|k| (k / n, k % n)).collect();
        let g = Self {
            n,
            arcs: table,
            arc_list,
            horizon,
            start_time,
            required_vertices: (0..n).collect(),
            required_arcs: BTreeSet::new(),
        };
        if !g.is_weakly_connected() {
            return Err(GraphError::NotConnected);
        }
        Ok(g)
    }

    pub fn with_requirements(mut self, vertices: BTreeSet<Vertex>, arcs: BTreeSet<Arc>) -> Result<Self, GraphError> {
        if let Some(&v) = vertices.iter().find(|&&v| v >= self.n) {
            return Err(GraphError::VertexOutOfRange(v));
        }
        if let Some(&(i, j)) = arcs.iter().find(|&&(i, j)| self.arc(i, j).is_none()) {
            return Err(GraphError::MissingArc(i, j));
        }
        self.required_vertices = vertices;
        self.required_arcs = arcs;
        Ok(self)
    }

    fn is_weakly_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in 0..self.n {
                if !seen[w] && (self.arcs[v * self.n + w].is_some() || self.arcs[w * self.n + v].is_some()) {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn required_vertices(&self) -> &BTreeSet<Vertex> {
        &self.required_vertices
    }

    pub fn required_arcs(&self) -> &BTreeSet<Arc> {
        &self.required_arcs
    }

    pub fn arc(&self, i: Vertex, j: Vertex) -> Option<&TravelTime> {
        if i >= self.n || j >= self.n {
            return None;
        }
        self.arcs[i * self.n + j].as_ref()
    }

    /// Arcs in lexicographic order.
    pub fn arcs(&self) -> &[Arc] {
        &self.arc_list
    }

    pub fn arc_index(&self, arc: Arc) -> Option<usize> {
        self.arc_list.binary_search(&arc).ok()
    }

    pub fn travel_times(&self) -> impl Iterator<Item = (Arc, &TravelTime)> + '_ {
        self.arc_list.iter().map(move |&(i, j)| ((i, j), self.arcs[i * self.n + j].as_ref().unwrap()))
    }

    /// Complete, loop-free, every vertex required and no required arcs.
    pub fn check_tdtsp(&self) -> Result<(), GraphError> {
        if self.arc_list.len() != self.n * (self.n - 1) {
            return Err(GraphError::NotTdtsp("arc set is not complete".into()));
        }
        if self.required_vertices.len() != self.n || !self.required_arcs.is_empty() {
            return Err(GraphError::NotTdtsp("requirements differ from V_R = V, A_R = {}".into()));
        }
        Ok(())
    }

    pub fn min_travel_time(&self) -> f64 {
        self.travel_times().map(|(_, tt)| tt.min_value()).fold(f64::INFINITY, f64::min)
    }

    /// Duration of `path` when leaving its first vertex at `t`.
    pub fn path_duration(&self, path: &[Vertex], t: f64) -> Result<f64, GraphError> {
        let mut now = t;
        for w in path.windows(2) {
            let tt = self.arc(w[0], w[1]).ok_or(GraphError::MissingArc(w[0], w[1]))?;
            now = tt.arrival(now);
        }
        Ok(now - t)
    }

    /// Duration of the closed tour that visits `perm` in order from `t0` and
    /// returns to `perm[0]`. `perm` must start at the depot (vertex 0).
    pub fn tour_duration(&self, perm: &[Vertex]) -> Result<f64, GraphError> {
        if perm.len() != self.n || perm.first() != Some(&0) {
            return Err(GraphError::NotAPermutation);
        }
        let mut seen = vec![false; self.n];
        for &v in perm {
            if v >= self.n || std::mem::replace(&mut seen[v], true) {
                return Err(GraphError::NotAPermutation);
            }
        }
        let mut closed = perm.to_vec();
        closed.push(perm[0]);
        self.path_duration(&closed, self.start_time)
    }

    /// Departure times in `[lo, hi]` at which the duration of `path` may change
    /// slope: every arc breakpoint pulled back to the departure at the first
    /// vertex.
    pub fn duration_breakpoints(&self, path: &[Vertex], lo: f64, hi: f64) -> Result<Vec<f64>, GraphError> {
        let mut out = Vec::new();
        for k in 0..path.len().saturating_sub(1) {
            let tt = self.arc(path[k], path[k + 1]).ok_or(GraphError::MissingArc(path[k], path[k + 1]))?;
            for s in tt.function().breakpoint_times() {
                // pull s back through arcs k-1, ..., 0
                let mut t = s;
                for m in (0..k).rev() {
                    t = self.arc(path[m], path[m + 1]).unwrap().arrival_inverse(t);
                }
                if (lo..=hi).contains(&t) {
                    out.push(t);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= EPS_TIME);
        Ok(out)
    }

    /// Whether `p1` dominates `p2` (`z(p1, t) >= z(p2, t)`) on `grid` and on
    /// the midpoints between consecutive grid instants.
    pub fn dominates(&self, p1: &[Vertex], p2: &[Vertex], grid: &[f64]) -> Result<bool, GraphError> {
        let mut samples: Vec<f64> = grid.to_vec();
        samples.extend(grid.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        for t in samples {
            if self.path_duration(p1, t)? < self.path_duration(p2, t)? - EPS_TIME {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Dominance over the whole horizon, using the merged breakpoint grid of
    /// both duration functions.
    pub fn dominates_on_horizon(&self, p1: &[Vertex], p2: &[Vertex]) -> Result<bool, GraphError> {
        let mut grid = vec![0.0, self.horizon];
        grid.extend(self.duration_breakpoints(p1, 0.0, self.horizon)?);
        grid.extend(self.duration_breakpoints(p2, 0.0, self.horizon)?);
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() <= EPS_TIME);
        self.dominates(p1, p2, &grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use proptest::prelude::*;

    fn tt(points: &[(f64, f64)]) -> TravelTime {
        TravelTime::from_points(points.to_vec()).unwrap()
    }

    fn desk() -> TravelTime {
        tt(&[(0.0, 2.0), (4.0, 2.0), (5.0, 3.0)])
    }

    fn constant_graph(n: usize, v: f64) -> TdGraph {
        let arcs = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|a| (a, TravelTime::constant(v).unwrap()));
        TdGraph::new(n, 10.0, 0.0, arcs).unwrap()
    }

    #[test]
    fn construction_errors() {
        let one = || TravelTime::constant(1.0).unwrap();
        assert_eq!(TdGraph::new(2, 5.0, 0.0, [((0, 0), one())]).unwrap_err(), GraphError::SelfLoop(0));
        assert_eq!(TdGraph::new(3, 5.0, 0.0, [((0, 1), one())]).unwrap_err(), GraphError::NotConnected);
        assert_eq!(TdGraph::new(2, 5.0, 6.0, [((0, 1), one())]).unwrap_err(), GraphError::StartOutsideHorizon(6.0));
        assert!(matches!(
            TdGraph::new(2, 4.0, 0.0, [((0, 1), desk())]).unwrap_err(),
            GraphError::BreakpointOutsideHorizon(0, 1, _)
        ));
        assert_eq!(
            TdGraph::new(2, 5.0, 0.0, [((0, 1), one()), ((0, 1), one())]).unwrap_err(),
            GraphError::DuplicateArc(0, 1)
        );
    }

    #[test]
    fn path_duration_examples() {
        let g = constant_graph(3, 2.0);
        assert_eq!(g.path_duration(&[0, 1, 2], 0.0).unwrap(), 4.0);
        assert_eq!(g.path_duration(&[0], 3.0).unwrap(), 0.0);
        assert_eq!(g.path_duration(&[], 3.0).unwrap(), 0.0);

        let g = TdGraph::new(3, 5.0, 0.0, [((0, 1), desk()), ((1, 2), TravelTime::constant(1.0).unwrap())]).unwrap();
        assert_eq!(g.path_duration(&[0, 1, 2], 3.0).unwrap(), 3.0);
        assert_eq!(g.path_duration(&[1, 0], 0.0).unwrap_err(), GraphError::MissingArc(1, 0));
    }

    #[test]
    fn tour_duration_examples() {
        let g = constant_graph(2, 1.0);
        assert_eq!(g.tour_duration(&[0, 1]).unwrap(), 2.0);
        let g = constant_graph(3, 1.0);
        for p in [[0, 1, 2], [0, 2, 1]] {
            assert_eq!(g.tour_duration(&p).unwrap(), 3.0);
        }
        assert_eq!(g.tour_duration(&[1, 0, 2]).unwrap_err(), GraphError::NotAPermutation);
        assert_eq!(g.tour_duration(&[0, 1, 1]).unwrap_err(), GraphError::NotAPermutation);
        assert_eq!(g.tour_duration(&[0, 1]).unwrap_err(), GraphError::NotAPermutation);
    }

    fn random_graph(n: usize, seed: u64) -> TdGraph {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_xoshiro::SplitMix64::seed_from_u64(seed);
        let arcs = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|a| {
                let mut t = 0.0;
                let mut v: f64 = rng.gen_range(1.0..4.0);
                let mut pts = vec![(t, v)];
                for _ in 0..3 {
                    t += rng.gen_range(1.0..3.0);
                    v = (v + rng.gen_range(-0.8..1.5) * 1.0).max(0.5);
                    pts.push((t, v));
                }
                (a, TravelTime::from_points(pts).unwrap())
            })
            .collect::<Vec<_>>();
        TdGraph::new(n, 10.0, 0.0, arcs).unwrap()
    }

    #[test]
    fn tour_duration_matches_explicit_recursion() {
        let g = random_graph(4, 11);
        for rest in (1..4).permutations(3) {
            let mut perm = vec![0];
            perm.extend(rest);
            // independent recursion written out arc by arc
            let mut z = 0.0;
            for k in 0..4 {
                let (i, j) = (perm[k], perm[(k + 1) % 4]);
                z += g.arc(i, j).unwrap().eval(g.start_time() + z);
            }
            assert!((g.tour_duration(&perm).unwrap() - z).abs() < 1e-12);
        }
    }

    #[test]
    fn dominance_examples() {
        let g = random_graph(4, 3);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        assert!(g.dominates(&[0, 1, 2], &[0, 1, 2], &grid).unwrap());
        assert!(g.dominates(&[0, 1, 2, 3], &[0, 1, 2], &grid).unwrap());

        // z(p1, 0) = 4 > z(p2, 0) = 3 but z(p1, 3) = 1.75 < z(p2, 3) = 3
        let cross = TdGraph::new(
            3,
            5.0,
            0.0,
            [((0, 1), tt(&[(0.0, 4.0), (4.0, 1.0)])), ((0, 2), TravelTime::constant(3.0).unwrap())],
        )
        .unwrap();
        assert!(!cross.dominates_on_horizon(&[0, 1], &[0, 2]).unwrap());
        assert!(!cross.dominates_on_horizon(&[0, 2], &[0, 1]).unwrap());
    }

    proptest! {
        #[test]
        fn arrival_through_paths_is_increasing(seed in 0u64..1000, t in 0.0f64..10.0, dt in 1e-6f64..3.0) {
            let g = random_graph(4, seed);
            let p = [0, 2, 1, 3, 0];
            let a1 = t + g.path_duration(&p, t).unwrap();
            let a2 = t + dt + g.path_duration(&p, t + dt).unwrap();
            prop_assert!(a2 > a1);
        }

        #[test]
        fn concatenation_is_nested_evaluation(seed in 0u64..1000, t in 0.0f64..10.0, split in 1usize..4) {
            let g = random_graph(4, seed);
            let p = [0, 2, 1, 3, 0];
            let whole = g.path_duration(&p, t).unwrap();
            let head = g.path_duration(&p[..=split], t).unwrap();
            let tail = g.path_duration(&p[split..], t + head).unwrap();
            prop_assert!((whole - head - tail).abs() < 1e-9);
        }

        #[test]
        fn breakpoint_grid_decides_dominance(seed in 0u64..500) {
            let g = random_graph(3, seed);
            let p1 = [0, 1, 2];
            let p2 = [0, 2];
            let dense: Vec<f64> = (0..=2000).map(|i| i as f64 * 0.005).collect();
            let brute = dense.iter().all(|&t| g.path_duration(&p1, t).unwrap() >= g.path_duration(&p2, t).unwrap() - EPS_TIME);
            // the breakpoint grid sees every extremum, so it can only be stricter
            if g.dominates_on_horizon(&p1, &p2).unwrap() {
                prop_assert!(brute);
            }
        }
    }
}
