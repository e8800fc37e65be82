//! The constant traversal cost problem.
//!
//! Given a graph, find a positive step function `y` (unit cost per time) that
//! makes the travel cost `c_ij(t, y)` of every arc as flat as possible. The LP
//! minimizes `zeta`, the largest range of the sampled cost functions, under
//! `y >= rho`. An optimum of zero on the exact candidate grid certifies that
//! the graph is path-ranking invariant.
//!
//! [`CtcpModel::to_lp`] writes the model with all its variables. [`check`]
//! solves an equivalent condensed form instead: the sampled costs `x_ijk` are
//! substituted out and the dual of the remaining LP is handed to the simplex
//! solver. That dual has one row per `y_h`, `x_low`, `x_high` and `zeta`, and
//! one column per sampled cost, which suits a revised simplex far better than
//! the primal with its tens of thousands of rows.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::omega::{build_omega, DEFAULT_OMEGA_CAP};
use crate::pwl::{cost_function, PwlFunction, StepFunction, TravelTime, EPS_TIME};
use crate::simplex::{self, LpProblem, Relation, Status};
use crate::tdgraph::{Arc, TdGraph};

/// Default number of instants of the reduced grid.
pub const DEFAULT_REDUCED_K: usize = 75;
/// Relative threshold under which `zeta*` counts as zero.
pub const ZERO_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridPolicy {
    /// The candidate breakpoint set built from time sequences.
    Exact,
    /// `K` equally spaced instants `h T / K`, `h = 0..K`.
    Reduced(usize),
    /// Exact when the global candidate set has at most `cap` instants,
    /// otherwise reduced with `k` instants.
    Auto { cap: usize, k: usize },
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Reduced(DEFAULT_REDUCED_K)
    }
}

impl FromStr for GridPolicy {
    type Err = String;

    /// Accepts `exact`, `reduced`, `reduced:K`, `auto` and `auto:CAP`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let parse = |a: &str| a.parse::<usize>().map_err(|e| format!("bad grid size '{a}': {e}"));
        match (name, arg) {
            ("exact", None) => Ok(GridPolicy::Exact),
            ("reduced", None) => Ok(GridPolicy::Reduced(DEFAULT_REDUCED_K)),
            ("reduced", Some(a)) => {
                let k = parse(a)?;
                if k < 2 {
                    return Err("a reduced grid needs at least 2 instants".into());
                }
                Ok(GridPolicy::Reduced(k))
            }
            ("auto", None) => Ok(GridPolicy::Auto { cap: DEFAULT_OMEGA_CAP, k: DEFAULT_REDUCED_K }),
            ("auto", Some(a)) => Ok(GridPolicy::Auto { cap: parse(a)?, k: DEFAULT_REDUCED_K }),
            _ => Err(format!("unknown grid policy '{s}' (expected exact, reduced[:K] or auto[:CAP])")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Exact,
    Reduced,
}

impl GridKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GridKind::Exact => "exact",
            GridKind::Reduced => "reduced",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CtcpError {
    #[error("the time grid is empty")]
    EmptyGrid,
    #[error("rho must be positive and finite, got {0}")]
    BadRho(f64),
    #[error("the LP solver stopped with status {0:?}")]
    Solver(Status),
}

/// Time spent on an arc during grid interval `h` when departing at `s`: the
/// overlap of `[s, Gamma(s)]` with `[t_h, t_{h+1})`. The first interval
/// extends to minus infinity and the last one to plus infinity.
pub fn coefficient(tau: &TravelTime, grid: &[f64], s: f64, h: usize) -> f64 {
    let arrival = tau.arrival(s);
    let start = if h == 0 { f64::NEG_INFINITY } else { grid[h] };
    let end = grid.get(h + 1).copied().unwrap_or(f64::INFINITY);
    (arrival.min(end) - s.max(start)).max(0.0)
}

/// All nonzero coefficients of a departure at `s`, as `(h, a_h)` pairs.
fn coefficient_row(tau: &TravelTime, grid: &[f64], s: f64) -> Vec<(usize, f64)> {
    let arrival = tau.arrival(s);
    let mut h = grid.partition_point(|&t| t <= s).saturating_sub(1);
    let mut out = Vec::new();
    loop {
        let a = coefficient(tau, grid, s, h);
        if a > 0.0 {
            out.push((h, a));
        }
        if h + 1 >= grid.len() || grid[h + 1] >= arrival {
            return out;
        }
        h += 1;
    }
}

/// The LP of the constant traversal cost problem on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcpModel {
    pub kind: GridKind,
    pub arcs: Vec<Arc>,
    /// Left ends of the step intervals of `y`.
    pub grid: Vec<f64>,
    /// Sampled departure times per arc.
    pub starts: Vec<Vec<f64>>,
    /// Sparse coefficients `(h, a_ijkh)` per arc and start.
    pub coeffs: Vec<Vec<Vec<(usize, f64)>>>,
    pub rho: f64,
}

impl CtcpModel {
    pub fn num_y(&self) -> usize {
        self.grid.len()
    }

    pub fn var_zeta(&self) -> usize {
        0
    }

    pub fn var_y(&self, h: usize) -> usize {
        1 + h
    }

    fn arc_offset(&self, e: usize) -> usize {
        1 + self.num_y() + self.starts[..e].iter().map(|s| s.len() + 2).sum::<usize>()
    }

    pub fn var_x(&self, e: usize, k: usize) -> usize {
        self.arc_offset(e) + k
    }

    pub fn var_x_low(&self, e: usize) -> usize {
        self.arc_offset(e) + self.starts[e].len()
    }

    pub fn var_x_high(&self, e: usize) -> usize {
        self.arc_offset(e) + self.starts[e].len() + 1
    }

    pub fn num_vars(&self) -> usize {
        1 + self.num_y() + self.starts.iter().map(|s| s.len() + 2).sum::<usize>()
    }

    /// The full LP with variables `zeta`, `y_h`, `x_ijk`, `x_low_ij` and
    /// `x_high_ij`, and one row per constraint instance.
    pub fn to_lp(&self) -> LpProblem {
        let mut p = LpProblem::new(self.num_vars());
        p.set_objective(self.var_zeta(), 1.0);
        for (e, rows) in self.coeffs.iter().enumerate() {
            for (k, row) in rows.iter().enumerate() {
                let mut c = vec![(self.var_x(e, k), 1.0)];
                c.extend(row.iter().map(|&(h, a)| (self.var_y(h), -a)));
                p.add_row(c, Relation::Eq, 0.0);
            }
        }
        for e in 0..self.arcs.len() {
            p.add_row(
                vec![(self.var_zeta(), 1.0), (self.var_x_high(e), -1.0), (self.var_x_low(e), 1.0)],
                Relation::Ge,
                0.0,
            );
        }
        for e in 0..self.arcs.len() {
            for k in 0..self.starts[e].len() {
                p.add_row(vec![(self.var_x(e, k), 1.0), (self.var_x_low(e), -1.0)], Relation::Ge, 0.0);
            }
        }
        for e in 0..self.arcs.len() {
            for k in 0..self.starts[e].len() {
                p.add_row(vec![(self.var_x_high(e), 1.0), (self.var_x(e, k), -1.0)], Relation::Ge, 0.0);
            }
        }
        for h in 0..self.num_y() {
            p.add_row(vec![(self.var_y(h), 1.0)], Relation::Ge, self.rho);
        }
        p
    }

    /// Sampled costs of every arc under `y`.
    pub fn sampled_costs(&self, y: &[f64]) -> Vec<Vec<f64>> {
        self.coeffs
            .iter()
            .map(|rows| rows.iter().map(|row| row.iter().map(|&(h, a)| a * y[h]).sum()).collect())
            .collect()
    }

    /// Largest range of the sampled costs under `y`.
    pub fn zeta_of(&self, y: &[f64]) -> f64 {
        self.sampled_costs(y)
            .iter()
            .map(|xs| {
                let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Dual of the condensed LP, where `y = rho + y'` and the equalities
    /// defining `x_ijk` are substituted into the bounds on `x_low`/`x_high`.
    /// Row order: `zeta`, `y'_h`, `x_low_e`, `x_high_e`.
    fn condensed_dual(&self) -> LpProblem {
        let g = self.num_y();
        let na = self.arcs.len();
        let row_zeta = 0;
        let row_y = |h: usize| 1 + h;
        let row_low = |e: usize| 1 + g + e;
        let row_high = |e: usize| 1 + g + na + e;
        let nk: usize = self.starts.iter().map(|s| s.len()).sum();
        // columns: pi_e, then mu_ek and lambda_ek
        let mut p = LpProblem::new(na + 2 * nk);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 1 + g + 2 * na];
        let mut col = na;
        for e in 0..na {
            rows[row_zeta].push((e, 1.0));
            rows[row_low(e)].push((e, 1.0));
            rows[row_high(e)].push((e, -1.0));
            for row in &self.coeffs[e] {
                let total: f64 = row.iter().map(|c| c.1).sum();
                let (mu, lambda) = (col, col + 1);
                col += 2;
                p.set_objective(mu, -self.rho * total);
                p.set_objective(lambda, self.rho * total);
                for &(h, a) in row {
                    rows[row_y(h)].push((mu, -a));
                    rows[row_y(h)].push((lambda, a));
                }
                rows[row_high(e)].push((mu, 1.0));
                rows[row_low(e)].push((lambda, -1.0));
            }
        }
        for (i, r) in rows.into_iter().enumerate() {
            p.add_row(r, Relation::Le, if i == row_zeta { 1.0 } else { 0.0 });
        }
        p
    }
}

/// The instants of a reduced grid: `h T / K` for `h = 0..K`.
pub fn reduced_grid(horizon: f64, k: usize) -> Vec<f64> {
    (0..k).map(|h| h as f64 * horizon / k as f64).collect()
}

fn default_rho(grid: &[f64], horizon: f64) -> f64 {
    let min_gap = grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if min_gap.is_finite() {
        1.0 / min_gap
    } else {
        1.0 / horizon
    }
}

fn merge_times(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= EPS_TIME);
    v
}

/// Builds the model for `policy`. `rho` defaults to the inverse of the
/// shortest grid interval.
pub fn build_model(g: &TdGraph, policy: GridPolicy, rho: Option<f64>) -> Result<CtcpModel, CtcpError> {
    let horizon = g.horizon();
    let arcs: Vec<Arc> = g.arcs().to_vec();
    let (kind, grid, starts) = match policy {
        GridPolicy::Reduced(k) => {
            let grid = reduced_grid(horizon, k);
            let starts = vec![grid.clone(); arcs.len()];
            (GridKind::Reduced, grid, starts)
        }
        GridPolicy::Exact | GridPolicy::Auto { .. } => {
            let omega = build_omega(g);
            if let GridPolicy::Auto { cap, k } = policy {
                if omega.global.len() > cap {
                    return build_model(g, GridPolicy::Reduced(k), rho);
                }
            }
            let mut grid = omega.global.clone();
            grid.push(0.0);
            let grid = merge_times(grid);
            let starts = arcs
                .iter()
                .map(|a| {
                    let mut s = omega.per_arc[a].clone();
                    s.extend([0.0, horizon]);
                    merge_times(s)
                })
                .collect();
            (GridKind::Exact, grid, starts)
        }
    };
    if grid.is_empty() {
        return Err(CtcpError::EmptyGrid);
    }
    let rho = rho.unwrap_or_else(|| default_rho(&grid, horizon));
    if !(rho.is_finite() && rho > 0.0) {
        return Err(CtcpError::BadRho(rho));
    }
    let coeffs = arcs
        .iter()
        .zip(&starts)
        .map(|(&(i, j), ss)| {
            let tau = g.arc(i, j).unwrap();
            ss.iter().map(|&s| coefficient_row(tau, &grid, s)).collect()
        })
        .collect();
    Ok(CtcpModel { kind, arcs, grid, starts, coeffs, rho })
}

/// Outcome of the invariance check.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcpResult {
    pub kind: GridKind,
    pub arcs: Vec<Arc>,
    pub grid_size: usize,
    pub rho: f64,
    /// Largest cost range of the sampled costs under `y_star`.
    pub zeta_star: f64,
    /// Optimum reported by the LP solver, for cross-checking `zeta_star`.
    pub lp_objective: f64,
    pub epsilon_zero: f64,
    pub is_invariant: bool,
    pub y_star: StepFunction,
    /// Per arc, the smallest sampled cost `x_low*`.
    pub x_min: Vec<f64>,
    /// Per arc, the interpolation of the sampled costs.
    pub x_funcs: Vec<PwlFunction>,
    /// Per arc, the exact travel cost `c_ij(t, y*)` on `[0, T]`, constant
    /// beyond `T`.
    pub cost_funcs: Vec<PwlFunction>,
    pub iterations: usize,
}

impl CtcpResult {
    pub fn arc_index(&self, arc: Arc) -> Option<usize> {
        self.arcs.binary_search(&arc).ok()
    }

    /// `key=value` lines: summary fields followed by one `c_under_i_j` line
    /// per arc holding the minimum of its exact cost function.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "zeta_star={}", self.zeta_star);
        let _ = writeln!(out, "invariant={}", if self.is_invariant { "yes" } else { "no" });
        let _ = writeln!(out, "grid={}", self.kind.as_str());
        let _ = writeln!(out, "grid_size={}", self.grid_size);
        let _ = writeln!(out, "rho={}", self.rho);
        let _ = writeln!(out, "epsilon_zero={}", self.epsilon_zero);
        for (e, &(i, j)) in self.arcs.iter().enumerate() {
            let _ = writeln!(out, "c_under_{i}_{j}={}", self.cost_funcs[e].min_value());
        }
        out
    }
}

/// Solves a built model through its condensed dual.
pub fn solve_model(g: &TdGraph, model: &CtcpModel) -> Result<CtcpResult, CtcpError> {
    let dual = model.condensed_dual();
    let sol = simplex::solve(&dual);
    if sol.status != Status::Optimal {
        return Err(CtcpError::Solver(sol.status));
    }
    let y: Vec<f64> = (0..model.num_y()).map(|h| model.rho + (-sol.duals[1 + h]).max(0.0)).collect();
    finish(g, model, y, -sol.objective, sol.iterations)
}

/// Solves the full model with every variable, for cross-checking the
/// condensed route on small instances.
pub fn solve_model_full(g: &TdGraph, model: &CtcpModel) -> Result<CtcpResult, CtcpError> {
    let lp = model.to_lp();
    let sol = simplex::solve(&lp);
    if sol.status != Status::Optimal {
        return Err(CtcpError::Solver(sol.status));
    }
    let y: Vec<f64> = (0..model.num_y()).map(|h| sol.x[model.var_y(h)].max(model.rho)).collect();
    finish(g, model, y, sol.objective, sol.iterations)
}

fn finish(
    g: &TdGraph,
    model: &CtcpModel,
    y: Vec<f64>,
    lp_objective: f64,
    iterations: usize,
) -> Result<CtcpResult, CtcpError> {
    let y_star = StepFunction::new(model.grid.iter().copied().zip(y.iter().copied()).collect())
        .expect("grid is increasing and y >= rho > 0");
    let samples = model.sampled_costs(&y);
    let zeta_star = model.zeta_of(&y);
    let x_min: Vec<f64> = samples.iter().map(|xs| xs.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let x_funcs: Vec<PwlFunction> = model
        .starts
        .iter()
        .zip(&samples)
        .map(|(ts, xs)| PwlFunction::new(ts.iter().copied().zip(xs.iter().copied()).collect()).unwrap())
        .collect();
    let horizon = g.horizon();
    let cost_funcs: Vec<PwlFunction> =
        model.arcs.iter().map(|&(i, j)| cost_function(g.arc(i, j).unwrap(), &y_star, 0.0, horizon)).collect();
    let mean_duration = {
        let all: Vec<f64> =
            model.coeffs.iter().flat_map(|rows| rows.iter().map(|r| r.iter().map(|c| c.1).sum::<f64>())).collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    };
    let epsilon_zero = ZERO_REL * model.rho * mean_duration;
    Ok(CtcpResult {
        kind: model.kind,
        arcs: model.arcs.clone(),
        grid_size: model.grid.len(),
        rho: model.rho,
        zeta_star,
        lp_objective,
        epsilon_zero,
        is_invariant: zeta_star <= epsilon_zero,
        y_star,
        x_min,
        x_funcs,
        cost_funcs,
        iterations,
    })
}

/// Builds and solves the model for `policy`.
pub fn check(g: &TdGraph, rho: Option<f64>, policy: GridPolicy) -> Result<CtcpResult, CtcpError> {
    let model = build_model(g, policy, rho)?;
    solve_model(g, &model)
}
