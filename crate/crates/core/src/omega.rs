//! Breakpoint propagation along arcs.
//!
//! A time sequence on an arc is the chain of instants in `[0, T]` linked by
//! the arrival map: each element is the arrival time of its predecessor. Every
//! instant of the horizon belongs to exactly one such chain. The candidate
//! breakpoint set of an arc is the union of the chains through all travel-time
//! breakpoints of the graph, and the global candidate set is the intersection
//! of the per-arc sets.

use std::collections::BTreeMap;

use crate::pwl::{TravelTime, EPS_TIME};
use crate::tdgraph::{Arc, TdGraph};

/// Default bound on the size of the global candidate set before callers
/// should switch to a reduced grid.
pub const DEFAULT_OMEGA_CAP: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSequence {
    pub arc: Arc,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaSets {
    /// Per-arc candidate sets, sorted ascending.
    pub per_arc: BTreeMap<Arc, Vec<f64>>,
    /// Global candidate set, sorted ascending.
    pub global: Vec<f64>,
}

/// Bound on the number of iterations of either walk of [`time_sequence`].
pub fn iteration_bound(tau: &TravelTime, horizon: f64) -> usize {
    (horizon / tau.min_value()).ceil() as usize + 2
}

fn contains(sorted: &[f64], t: f64) -> bool {
    let i = sorted.partition_point(|&x| x < t - EPS_TIME);
    i < sorted.len() && (sorted[i] - t).abs() <= EPS_TIME
}

/// The time sequence through `t` on an arc with travel time `tau`: walk
/// forward through arrivals while they stay inside the horizon, then backward
/// through departures while they stay non-negative.
pub fn time_sequence(arc: Arc, tau: &TravelTime, horizon: f64, t: f64) -> TimeSequence {
    let limit = iteration_bound(tau, horizon);
    let mut times = vec![t];
    let mut cur = t;
    for _ in 0..limit {
        let next = tau.arrival(cur);
        if next > horizon + EPS_TIME || times.iter().any(|&x| (x - next).abs() <= EPS_TIME) {
            break;
        }
        times.push(next.min(horizon));
        cur = next;
    }
    cur = t;
    for _ in 0..limit {
        let prev = tau.arrival_inverse(cur);
        if prev < -EPS_TIME || times.iter().any(|&x| (x - prev).abs() <= EPS_TIME) {
            break;
        }
        times.push(prev.max(0.0));
        cur = prev;
    }
    times.sort_by(f64::total_cmp);
    TimeSequence { arc, times }
}

/// All travel-time breakpoints of the graph inside `[0, T]`, merged within
/// [`EPS_TIME`].
pub fn travel_time_breakpoints(g: &TdGraph) -> Vec<f64> {
    let mut all: Vec<f64> = g
        .travel_times()
        .flat_map(|(_, tt)| tt.function().breakpoint_times().collect::<Vec<_>>())
        .map(|t| t.clamp(0.0, g.horizon()))
        .collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() <= EPS_TIME);
    all
}

/// Candidate set of one arc: the union of the time sequences through each of
/// `seeds`.
pub fn arc_omega(arc: Arc, tau: &TravelTime, horizon: f64, seeds: &[f64]) -> Vec<f64> {
    let mut set: Vec<f64> = Vec::new();
    for &t in seeds {
        // each instant lies on exactly one sequence, so a seed already present
        // would regenerate a sequence we have
        if contains(&set, t) {
            continue;
        }
        for s in time_sequence(arc, tau, horizon, t).times {
            if !contains(&set, s) {
                let i = set.partition_point(|&x| x < s);
                set.insert(i, s);
            }
        }
    }
    set
}

/// Per-arc candidate sets and their intersection. Matching across arcs uses
/// [`EPS_TIME`] and keeps the value of the lexicographically first arc.
pub fn build_omega(g: &TdGraph) -> OmegaSets {
    let seeds = travel_time_breakpoints(g);
    let per_arc: BTreeMap<Arc, Vec<f64>> =
        g.travel_times().map(|(arc, tt)| (arc, arc_omega(arc, tt, g.horizon(), &seeds))).collect();
    let mut iter = per_arc.values();
    let mut global = iter.next().cloned().unwrap_or_default();
    for other in iter {
        global.retain(|&t| contains(other, t));
    }
    OmegaSets { per_arc, global }
}

/// Whether every per-arc set respects `|A| * |T| * T / tau_min`.
pub fn size_bound_check(g: &TdGraph, omega: &OmegaSets) -> bool {
    let bound = g.arcs().len() as f64 * travel_time_breakpoints(g).len() as f64 * (g.horizon() / g.min_travel_time());
    omega.per_arc.values().all(|s| s.len() as f64 <= bound) && omega.global.len() as f64 <= bound
}
