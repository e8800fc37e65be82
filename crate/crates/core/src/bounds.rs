//! Lower approximation of travel times and the bound pair on the TDTSP.
//!
//! Fixing a unit-cost profile `b` and a constant cost `c_ij <= min_t
//! c_ij(t, b)` per arc yields the travel time `tau_low_ij(t)`: the time it
//! takes, starting at `t`, to accumulate cost `c_ij` under `b`. Such a graph is
//! path-ranking invariant and never slower than the original, so its quickest
//! tour gives a lower bound and the same tour evaluated on the original graph
//! gives an upper bound.

use std::fmt::Write as _;

use crate::atsp::{AtspError, CostMatrix, Tour};
use crate::ctcp::CtcpResult;
use crate::pwl::{StepFunction, TravelTime, EPS_TIME};
use crate::tdgraph::{Arc, TdGraph, Vertex};

/// Travel time that accumulates cost `c` under `b` from `t`: walk the pieces
/// of `b`, spending what each one allows until the remainder fits in the
/// current piece.
pub fn igp_travel_time(b: &StepFunction, c: f64, t: f64) -> f64 {
    b.advance(t, c) - t
}

/// Travel times `tau_low(b)` of a graph with constant arc costs.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerApproxGraph {
    n: usize,
    b: StepFunction,
    c_under: Vec<Option<f64>>,
    horizon: f64,
    start_time: f64,
}

impl LowerApproxGraph {
    pub fn new(g: &TdGraph, b: StepFunction, cost: impl Fn(Arc) -> f64) -> Self {
        let n = g.num_vertices();
        let mut c_under = vec![None; n * n];
        for &(i, j) in g.arcs() {
            c_under[i * n + j] = Some(cost((i, j)));
        }
        Self { n, b, c_under, horizon: g.horizon(), start_time: g.start_time() }
    }

    pub fn step_function(&self) -> &StepFunction {
        &self.b
    }

    pub fn c_under(&self, i: Vertex, j: Vertex) -> Option<f64> {
        self.c_under[i * self.n + j]
    }

    pub fn tau_under(&self, i: Vertex, j: Vertex, t: f64) -> f64 {
        igp_travel_time(&self.b, self.c_under(i, j).expect("arc exists"), t)
    }

    /// Duration of `path` under `tau_low` when leaving at `t`.
    pub fn path_duration(&self, path: &[Vertex], t: f64) -> f64 {
        path.windows(2).fold(t, |now, w| now + self.tau_under(w[0], w[1], now)) - t
    }

    /// Duration under `tau_low` of the closed tour `order` from the start time.
    pub fn tour_duration(&self, order: &[Vertex]) -> f64 {
        let mut closed = order.to_vec();
        closed.push(order[0]);
        self.path_duration(&closed, self.start_time)
    }

    /// Matrix of the constant costs, for the time-invariant ATSP.
    pub fn cost_matrix(&self) -> CostMatrix {
        CostMatrix::from_fn(self.n, |i, j| self.c_under(i, j))
    }

    /// `tau_low_ij` on `[0, T]` as an explicit function. Its breakpoints are
    /// the breakpoints of `b` and the departures arriving on them.
    pub fn materialize(&self, i: Vertex, j: Vertex) -> TravelTime {
        let c = self.c_under(i, j).expect("arc exists");
        materialize_igp(&self.b, c, self.horizon)
    }
}

fn materialize_igp(b: &StepFunction, c: f64, horizon: f64) -> TravelTime {
    let mut ts = vec![0.0, horizon];
    for &tb in b.times() {
        ts.push(tb);
        ts.push(b.retreat(tb, c));
    }
    ts.retain(|&t| (0.0..=horizon).contains(&t));
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() <= EPS_TIME);
    TravelTime::from_points(ts.into_iter().map(|t| (t, igp_travel_time(b, c, t))).collect())
        .expect("igp travel times are positive and FIFO")
}

/// The lower approximation for `b = y*`, with `c_low_ij` the exact minimum of
/// `c_ij(t, y*)` over all departures. On the exact grid this coincides with
/// the LP value `x_low*`.
pub fn lower_graph(g: &TdGraph, ctcp: &CtcpResult) -> LowerApproxGraph {
    LowerApproxGraph::new(g, ctcp.y_star.clone(), |arc| {
        let e = ctcp.arc_index(arc).expect("result belongs to this graph");
        ctcp.cost_funcs[e].min_value()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
    pub tour: Vec<Vertex>,
}

/// Solves the time-invariant ATSP on the constant costs of `la`, then bounds
/// the TDTSP optimum by the tour's duration under `tau_low` and under `tau`.
pub fn bound_pair(
    g: &TdGraph,
    la: &LowerApproxGraph,
    atsp_solve: impl FnOnce(&CostMatrix) -> Result<Tour, AtspError>,
) -> Result<BoundPair, AtspError> {
    let tour = atsp_solve(&la.cost_matrix())?;
    let lower = la.tour_duration(&tour.order);
    let upper = g.tour_duration(&tour.order).expect("ATSP tours are permutations");
    Ok(BoundPair { lower, upper, tour: tour.order })
}

/// A complete graph whose arc `(i, j)` takes exactly as long as needed to
/// accumulate cost `costs[i][j]` under `b`. Every such graph is path-ranking
/// invariant. `b` must not change after `horizon`.
pub fn generate_invariant(n: usize, b: &StepFunction, costs: &[Vec<f64>], horizon: f64) -> TdGraph {
    assert!(b.times().last().is_some_and(|&t| t <= horizon), "the step function must be constant after the horizon");
    let arcs = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| {
        assert!(costs[i][j] > 0.0, "arc costs must be positive");
        ((i, j), materialize_igp(b, costs[i][j], horizon))
    });
    TdGraph::new(n, horizon, 0.0, arcs).expect("complete graph is valid")
}

/// Per-arc samples `(t, tau, tau_low, c(t, y*))` as CSV, `samples` instants
/// per arc evenly spread over `[0, T]`.
pub fn plot_csv(g: &TdGraph, ctcp: &CtcpResult, la: &LowerApproxGraph, samples: usize) -> String {
    let mut out = String::from("i,j,t,tau,tau_low,cost\n");
    let horizon = g.horizon();
    for (e, (arc, tau)) in g.travel_times().enumerate() {
        for s in 0..samples {
            let t = if samples > 1 { horizon * s as f64 / (samples - 1) as f64 } else { 0.0 };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                arc.0,
                arc.1,
                t,
                tau.eval(t),
                la.tau_under(arc.0, arc.1, t),
                ctcp.cost_funcs[e].eval(t)
            );
        }
    }
    out
}
