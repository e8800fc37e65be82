//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use tdroute::atsp::CostMatrix;
use tdroute::simplex::{LpProblem, Relation};
use tdroute::{StepFunction, TdGraph};

/// Optimal tour duration and a tour attaining it, over all `(n-1)!` orders.
pub fn brute_force_tour(g: &TdGraph) -> (f64, Vec<usize>) {
    let n = g.num_vertices();
    let mut best = (f64::INFINITY, Vec::new());
    for rest in (1..n).permutations(n - 1) {
        let mut order = vec![0];
        order.extend(rest);
        let z = g.tour_duration(&order).unwrap();
        if z < best.0 {
            best = (z, order);
        }
    }
    best
}

/// Cheapest Hamiltonian cycle cost with the given arcs forced and
/// forbidden, or `None` when no cycle qualifies.
pub fn brute_force_atsp(c: &[Vec<f64>], forced: &[(usize, usize)], forbidden: &[(usize, usize)]) -> Option<f64> {
    let n = c.len();
    let mut best: Option<f64> = None;
    for rest in (1..n).permutations(n - 1) {
        let mut order = vec![0];
        order.extend(rest);
        let arcs: Vec<(usize, usize)> = (0..n).map(|k| (order[k], order[(k + 1) % n])).collect();
        if forced.iter().any(|a| !arcs.contains(a)) || forbidden.iter().any(|a| arcs.contains(a)) {
            continue;
        }
        let cost: f64 = arcs.iter().map(|&(i, j)| c[i][j]).sum();
        if best.is_none_or(|b| cost < b) {
            best = Some(cost);
        }
    }
    best
}

/// Cheapest perfect assignment of a square matrix.
pub fn brute_force_assignment(c: &CostMatrix) -> f64 {
    let n = c.n();
    (0..n)
        .permutations(n)
        .filter(|p| p.iter().enumerate().all(|(i, &j)| !c.is_forbidden(i, j)))
        .map(|p| p.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Optimum of a bounded LP by enumerating every basic solution: each choice
/// of `n` constraints (rows or finite variable bounds) taken as equalities.
/// `None` when no vertex is feasible.
pub fn vertex_enumeration(p: &LpProblem) -> Option<f64> {
    let n = p.num_vars();
    // all constraints as (a, lo, hi) with lo <= a x <= hi
    let mut cons: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    for r in p.rows() {
        let mut a = vec![0.0; n];
        for &(j, v) in &r.coeffs {
            a[j] += v;
        }
        let (lo, hi) = match r.relation {
            Relation::Le => (f64::NEG_INFINITY, r.rhs),
            Relation::Ge => (r.rhs, f64::INFINITY),
            Relation::Eq => (r.rhs, r.rhs),
        };
        cons.push((a, lo, hi));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        cons.push((a, p.lower()[j], p.upper()[j]));
    }
    let mut best: Option<f64> = None;
    for pick in (0..cons.len()).combinations(n) {
        for sides in (0..n).map(|_| [false, true]).multi_cartesian_product() {
            let mut rhs = Vec::with_capacity(n);
            let mut ok = true;
            for (&k, &upper) in pick.iter().zip(&sides) {
                let v = if upper { cons[k].2 } else { cons[k].1 };
                if !v.is_finite() || (upper && cons[k].1 == cons[k].2) {
                    ok = false;
                    break;
                }
                rhs.push(v);
            }
            if !ok {
                continue;
            }
            let m = DMatrix::from_fn(n, n, |r, c| cons[pick[r]].0[c]);
            let Some(x) = m.lu().solve(&DVector::from_vec(rhs)) else { continue };
            let feasible = cons.iter().all(|(a, lo, hi)| {
                let v: f64 = a.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                let tol = 1e-7 * (1.0 + v.abs());
                v >= lo - tol && v <= hi + tol
            });
            if feasible {
                let obj = p.objective_value(x.as_slice());
                if best.is_none_or(|b| obj < b) {
                    best = Some(obj);
                }
            }
        }
    }
    best
}

/// Random bounded LP with up to `max_vars` variables: a box row keeps it
/// bounded, `>=` and `=` rows may make it infeasible.
pub fn random_lp(rng: &mut impl Rng, max_vars: usize) -> LpProblem {
    let n = rng.gen_range(1..=max_vars);
    let mut p = LpProblem::new(n);
    for j in 0..n {
        p.set_objective(j, rng.gen_range(-5.0..5.0));
        if rng.gen_bool(0.2) {
            p.set_bounds(j, 0.0, rng.gen_range(1.0..4.0));
        }
    }
    p.add_row((0..n).map(|j| (j, 1.0)).collect(), Relation::Le, rng.gen_range(5.0..15.0));
    for _ in 0..rng.gen_range(0..=3) {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                coeffs.push((j, rng.gen_range(-3.0..3.0)));
            }
        }
        let rel = match rng.gen_range(0..5) {
            0 => Relation::Ge,
            1 => Relation::Eq,
            _ => Relation::Le,
        };
        p.add_row(coeffs, rel, rng.gen_range(-2.0..6.0));
    }
    p
}

/// Positive step function with up to `max_pieces` pieces on `[0, horizon]`.
pub fn random_step(rng: &mut impl Rng, horizon: f64, max_pieces: usize) -> StepFunction {
    let k = rng.gen_range(1..=max_pieces);
    let mut times: Vec<f64> = (1..k).map(|_| (rng.gen_range(0.0..horizon) * 100.0).round() / 100.0).collect();
    times.push(0.0);
    times.sort_by(f64::total_cmp);
    times.dedup();
    StepFunction::new(times.into_iter().map(|t| (t, rng.gen_range(0.5..2.0))).collect()).unwrap()
}

/// All simple paths from `s` to `t`, `s != t`.
pub fn simple_paths(n: usize, s: usize, t: usize) -> Vec<Vec<usize>> {
    assert_ne!(s, t);
    let mut out = Vec::new();
    let mut path = vec![s];
    fn walk(n: usize, t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for w in 0..n {
            if path.contains(&w) {
                continue;
            }
            path.push(w);
            if w == t {
                out.push(path.clone());
            } else {
                walk(n, t, path, out);
            }
            path.pop();
        }
    }
    walk(n, t, &mut path, &mut out);
    out
}

/// Random LP with up to `max_vars` variables that is feasible by
/// construction: every row holds at a random point of the box.
pub fn random_feasible_lp(rng: &mut impl Rng, max_vars: usize) -> LpProblem {
    let n = rng.gen_range(1..=max_vars);
    let mut p = LpProblem::new(n);
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    for j in 0..n {
        p.set_objective(j, rng.gen_range(-5.0..5.0));
        if rng.gen_bool(0.3) {
            p.set_bounds(j, 0.0, x0[j] + rng.gen_range(0.0..2.0));
        }
    }
    p.add_row((0..n).map(|j| (j, 1.0)).collect(), Relation::Le, x0.iter().sum::<f64>() + rng.gen_range(0.0..5.0));
    for _ in 0..rng.gen_range(0..=4) {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                coeffs.push((j, rng.gen_range(-3.0..3.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        match rng.gen_range(0..5) {
            0 => p.add_row(coeffs, Relation::Ge, act - rng.gen_range(0.0..1.0)),
            1 => p.add_row(coeffs, Relation::Eq, act),
            _ => p.add_row(coeffs, Relation::Le, act + rng.gen_range(0.0..1.0)),
        };
    }
    p
}
