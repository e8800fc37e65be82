//! Exact branch-and-bound for the time-dependent TSP.
//!
//! A node fixes a path `p_k` out of the depot and forbids a set of arcs. Its
//! lower bound comes from the constant-cost ATSP restricted to completions of
//! `p_k`: each arc cost is the smallest travel cost `c_ij(t, y*)` over the
//! departures still possible, `[t0 + z(p_k), t0 + UB]`, and the cheapest
//! completion cost `C` turns into a duration by accumulating `C` under `y*`
//! from the arrival at the end of the prefix. Because the travel cost of a
//! path under `y*` is the integral of `y*` over its traversal, no completion
//! can arrive earlier.
//!
//! The relaxation tour, evaluated on the true travel times, is a candidate
//! incumbent. Branching walks the tour from the end of the prefix while the
//! windowed costs match the true costs (index `k'`) and splits the node into
//! `k' - k + 1` disjoint children: child `c < k' - k` extends the prefix by
//! `c` tour arcs and forbids the next one, and the last child extends it by
//! all `k' - k` arcs.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::atsp::{solve_assignment, solve_atsp, AtspConstraints, AtspError, CostMatrix};
use crate::ctcp::{check, CtcpError, CtcpResult, GridPolicy};
use crate::pwl::{StepFunction, EPS_COST, EPS_TIME};
use crate::tdgraph::{Arc, GraphError, TdGraph, Vertex};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverConfig {
    pub grid: GridPolicy,
    pub rho: Option<f64>,
    pub time_limit: Option<Duration>,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ctcp(#[from] CtcpError),
    #[error(transparent)]
    Atsp(#[from] AtspError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbNode {
    /// `v_0 = 0, ..., v_k`.
    pub prefix: Vec<Vertex>,
    pub forbidden: BTreeSet<Arc>,
    pub lb: f64,
}

impl BnbNode {
    pub fn root() -> Self {
        Self { prefix: vec![0], forbidden: BTreeSet::new(), lb: 0.0 }
    }

    pub fn depth(&self) -> usize {
        self.prefix.len() - 1
    }

    /// Whether the closed tour `order` (from vertex 0) satisfies the node's
    /// constraints.
    pub fn admits(&self, order: &[Vertex]) -> bool {
        let n = order.len();
        order.starts_with(&self.prefix) && (0..n).all(|k| !self.forbidden.contains(&(order[k], order[(k + 1) % n])))
    }
}

/// Per-arc minimum of the exact travel cost over departures in
/// `[t_lo, t_hi]`.
pub fn node_costs(g: &TdGraph, ctcp: &CtcpResult, t_lo: f64, t_hi: f64) -> CostMatrix {
    assert!(t_lo <= t_hi, "empty window [{t_lo}, {t_hi}]");
    CostMatrix::from_fn(g.num_vertices(), |i, j| ctcp.arc_index((i, j)).map(|e| ctcp.cost_funcs[e].min_on(t_lo, t_hi)))
}

/// The children of `node` for the closed relaxation tour `tour` (vertex order
/// from 0, satisfying the node) and split index `k_prime` in `k+1..=n`.
/// Completions other than `tour` itself fall in exactly one child; the last
/// child is omitted when it would fix the whole tour.
pub fn branch(node: &BnbNode, tour: &[Vertex], k_prime: usize) -> Vec<BnbNode> {
    let n = tour.len();
    let k = node.depth();
    assert!(k < k_prime && k_prime <= n, "k' = {k_prime} outside {}..={n}", k + 1);
    let at = |m: usize| tour[m % n];
    let mut children = Vec::with_capacity(k_prime - k + 1);
    for c in 0..k_prime - k {
        let mut forbidden = node.forbidden.clone();
        forbidden.insert((at(k + c), at(k + c + 1)));
        let prefix = tour[..=k + c].to_vec();
        children.push(BnbNode { prefix, forbidden, lb: node.lb });
    }
    if k_prime < n {
        children.push(BnbNode { prefix: tour[..=k_prime].to_vec(), forbidden: node.forbidden.clone(), lb: node.lb });
    }
    children
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::TimeLimit => "gap",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Duration of `tour`; the optimum when `status` is optimal.
    pub upper: f64,
    pub lower: f64,
    pub tour: Vec<Vertex>,
    pub nodes: usize,
    pub elapsed: Duration,
    pub ub_initial: f64,
    pub lb_initial: f64,
    pub zeta_star: f64,
    pub invariant: bool,
}

fn gap(ub: f64, lb: f64) -> f64 {
    if lb > 0.0 {
        ((ub - lb) / lb * 100.0).max(0.0)
    } else {
        f64::INFINITY
    }
}

impl SolveReport {
    /// `(UB_I - LB_I) / LB_I` in percent.
    pub fn gap_initial(&self) -> f64 {
        gap(self.ub_initial, self.lb_initial)
    }

    pub fn gap_final(&self) -> f64 {
        match self.status {
            SolveStatus::Optimal => 0.0,
            SolveStatus::TimeLimit => gap(self.upper, self.lower),
        }
    }

    pub fn ub_ratio(&self) -> f64 {
        self.ub_initial / self.lower
    }

    pub fn to_key_value(&self, timing: bool) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "status={}", self.status.as_str());
        let _ = writeln!(out, "upper={}", self.upper);
        let _ = writeln!(out, "lower={}", self.lower);
        let tour: Vec<String> = self.tour.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "tour={}", tour.join("-"));
        let _ = writeln!(out, "nodes={}", self.nodes);
        let _ = writeln!(out, "ub_initial={}", self.ub_initial);
        let _ = writeln!(out, "lb_initial={}", self.lb_initial);
        let _ = writeln!(out, "gap_initial={}", self.gap_initial());
        let _ = writeln!(out, "gap_final={}", self.gap_final());
        let _ = writeln!(out, "zeta_star={}", self.zeta_star);
        let _ = writeln!(out, "invariant={}", if self.invariant { "yes" } else { "no" });
        if timing {
            let _ = writeln!(out, "time={:.3}", self.elapsed.as_secs_f64());
        }
        out
    }

    /// `OPT,UB_I/LB_F,GAP_I,GAP_F,NODES,TIME` values.
    pub fn csv_fields(&self, timing: bool) -> String {
        let time = if timing { format!("{:.3}", self.elapsed.as_secs_f64()) } else { String::new() };
        format!(
            "{},{:.6},{:.4},{:.4},{},{}",
            u8::from(self.status == SolveStatus::Optimal),
            self.ub_ratio(),
            self.gap_initial(),
            self.gap_final(),
            self.nodes,
            time
        )
    }
}

struct Queued {
    node: BnbNode,
    seq: usize,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // smallest bound first, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other.node.lb.total_cmp(&self.node.lb).then(other.seq.cmp(&self.seq))
    }
}

fn close(a: f64, b: f64, eps: f64) -> bool {
    (a - b).abs() <= eps * a.abs().max(b.abs()).max(1.0)
}

struct Search<'a> {
    g: &'a TdGraph,
    ctcp: &'a CtcpResult,
    b: &'a StepFunction,
    t0: f64,
}

/// Bound evaluation of one node.
enum Outcome {
    Fathomed,
    Bounded { lb: f64, tour: Vec<Vertex>, upper: f64, k_prime: usize },
}

impl Search<'_> {
    fn evaluate(&self, node: &BnbNode, ub: f64) -> Result<Outcome, SolveError> {
        let n = self.g.num_vertices();
        let z_prefix = self.g.path_duration(&node.prefix, self.t0)?;
        let t_k = self.t0 + z_prefix;
        if z_prefix >= ub - EPS_COST * ub.max(1.0) {
            return Ok(Outcome::Fathomed);
        }
        let t_hi = if ub.is_finite() { self.t0 + ub } else { f64::INFINITY };
        let window = node_costs(self.g, self.ctcp, t_k, t_hi.min(self.g.horizon().max(t_k)));
        // prefix arcs are fixed and already paid for
        let costs = CostMatrix::from_fn(n, |i, j| {
            if node.prefix.windows(2).any(|w| w[0] == i && w[1] == j) {
                Some(0.0)
            } else if window.is_forbidden(i, j) {
                None
            } else {
                Some(window.get(i, j))
            }
        });
        let constraints = AtspConstraints {
            forced: node.prefix.windows(2).map(|w| (w[0], w[1])).collect(),
            forbidden: node.forbidden.clone(),
        };
        let completion_lb = |cost: f64| z_prefix + self.b.advance(t_k, cost) - t_k;
        if ub.is_finite() {
            let relaxed = forbid_all(&costs, &constraints);
            match solve_assignment(&relaxed) {
                Ok(a) if a.cost < relaxed.sentinel() && completion_lb(a.cost) < ub - EPS_COST * ub.max(1.0) => {}
                _ => return Ok(Outcome::Fathomed),
            }
        }
        let tour = match solve_atsp(&costs, &constraints) {
            Ok(t) => t,
            Err(AtspError::Infeasible) => return Ok(Outcome::Fathomed),
            Err(e) => return Err(e.into()),
        };
        let lb = completion_lb(tour.cost).max(node.lb);
        let upper = self.g.tour_duration(&tour.order)?;

        // longest stretch past the prefix where windowed and true costs agree
        let mut closed = tour.order.clone();
        closed.push(0);
        let k = node.depth();
        let (mut t, mut cum) = (t_k, 0.0);
        let mut k_prime = k + 1;
        for m in k..n {
            let (i, j) = (closed[m], closed[m + 1]);
            let arrive = t + self.g.arc(i, j).expect("complete instance").eval(t);
            cum += costs.get(i, j);
            if !close(self.b.advance(t_k, cum), arrive, EPS_TIME) {
                break;
            }
            k_prime = m + 1;
            t = arrive;
        }
        Ok(Outcome::Bounded { lb, tour: tour.order, upper, k_prime })
    }
}

/// The matrix with every arc ruled out by `k` forbidden, for a quick
/// assignment bound.
fn forbid_all(c: &CostMatrix, k: &AtspConstraints) -> CostMatrix {
    let n = c.n();
    let mut succ = vec![None; n];
    let mut pred = vec![None; n];
    for &(i, j) in &k.forced {
        succ[i] = Some(j);
        pred[j] = Some(i);
    }
    CostMatrix::from_fn(n, |i, j| {
        let blocked = c.is_forbidden(i, j)
            || k.forbidden.contains(&(i, j))
            || succ[i].is_some_and(|s| s != j)
            || pred[j].is_some_and(|p| p != i);
        (!blocked).then(|| c.get(i, j))
    })
}

/// Solves the TDTSP on `g` from its start time.
pub fn solve_tdtsp(g: &TdGraph, config: &SolverConfig) -> Result<SolveReport, SolveError> {
    let started = Instant::now();
    let ctcp = check(g, config.rho, config.grid)?;
    solve_with_ctcp(g, &ctcp, config.time_limit, started)
}

/// Solves with a precomputed invariance result; `started` anchors the time
/// limit and the reported elapsed time.
pub fn solve_with_ctcp(
    g: &TdGraph,
    ctcp: &CtcpResult,
    time_limit: Option<Duration>,
    started: Instant,
) -> Result<SolveReport, SolveError> {
    g.check_tdtsp()?;
    let search = Search { g, ctcp, b: &ctcp.y_star, t0: g.start_time() };
    let root = BnbNode::root();

    // initial bounds: unrestricted window
    let (lb_initial, ub_initial, mut best) = match search.evaluate(&root, f64::INFINITY)? {
        Outcome::Bounded { lb, tour, upper, .. } => (lb, upper, tour),
        Outcome::Fathomed => return Err(AtspError::Infeasible.into()),
    };
    let mut ub = ub_initial;
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Queued { node: BnbNode { lb: lb_initial, ..root }, seq });
    let mut nodes = 0;
    let mut status = SolveStatus::Optimal;
    let mut lower = ub;
    while let Some(Queued { node, .. }) = heap.pop() {
        let tol = EPS_COST * ub.max(1.0);
        if node.lb >= ub - tol {
            break;
        }
        if time_limit.is_some_and(|lim| started.elapsed() >= lim) {
            status = SolveStatus::TimeLimit;
            lower = node.lb;
            break;
        }
        nodes += 1;
        let Outcome::Bounded { lb, tour, upper, k_prime } = search.evaluate(&node, ub)? else {
            continue;
        };
        if upper < ub - tol || (upper <= ub && tour < best) {
            ub = upper;
            best = tour.clone();
        }
        if lb >= ub - EPS_COST * ub.max(1.0) {
            continue;
        }
        for child in branch(&BnbNode { lb, ..node }, &tour, k_prime) {
            seq += 1;
            heap.push(Queued { node: child, seq });
        }
    }
    if status == SolveStatus::Optimal {
        lower = ub;
    }
    Ok(SolveReport {
        status,
        upper: ub,
        lower: lower.min(ub),
        tour: best,
        nodes: nodes.max(1),
        elapsed: started.elapsed(),
        ub_initial,
        lb_initial,
        zeta_star: ctcp.zeta_star,
        invariant: ctcp.is_invariant,
    })
}
