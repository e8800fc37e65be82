//! A small revised simplex solver for minimization LPs.
//!
//! Columns are stored sparsely and the basis inverse is kept as an explicit
//! dense matrix, refreshed by Gauss-Jordan reinversion at regular intervals.
//! Pricing is Dantzig's rule over segments of columns, falling back to Bland's rule after a run of
//! degenerate pivots, with a Harris ratio test. The main phase runs on a
//! slightly perturbed right-hand side; a dual simplex pass then restores
//! feasibility for the true one.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

/// Primal feasibility tolerance used during the solve.
pub const EPS_FEAS: f64 = 1e-8;
/// Tolerance of the optimality certificate.
pub const EPS_DUAL: f64 = 1e-7;
/// Smallest magnitude accepted as a pivot.
pub const EPS_PIVOT: f64 = 1e-10;

const EPS_REDUCED: f64 = 1e-9;
const DEGENERATE_RUN: usize = 50;
/// Relative size of the right-hand side shifts of the main phase.
const PERTURBATION: f64 = 1e-7;
const CLEANUP_ROUNDS: usize = 5;
/// Columns per partial-pricing segment.
const PRICING_SEGMENT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min c x` subject to linear rows and per-variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    objective: Vec<f64>,
    rows: Vec<Row>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Result of [`solve`]. Duals follow the convention of a minimization
/// Lagrangian: `>=` rows have non-negative duals, `<=` rows non-positive ones,
/// and reduced costs are `c - A^T y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: Status,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpProblem {
    /// A problem with `num_vars` variables, zero objective and bounds `[0, inf)`.
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn set_objective(&mut self, var: usize, c: f64) {
        self.objective[var] = c;
    }

    /// Sets bounds of `var`; use infinities for missing bounds.
    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        assert!(lower <= upper, "empty bound interval for variable {var}");
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    /// Appends a row and returns its index. Repeated variables are summed.
    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        let mut coeffs = coeffs;
        coeffs.sort_by_key(|c| c.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (j, a) in coeffs {
            assert!(j < self.num_vars(), "variable {j} out of range");
            assert!(a.is_finite(), "non-finite coefficient");
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|c| c.1 != 0.0);
        self.rows.push(Row { coeffs: merged, relation, rhs });
        self.rows.len() - 1
    }

    pub fn row_activity(&self, row: usize, x: &[f64]) -> f64 {
        self.rows[row].coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Fixed-column MPS text of the problem, with generated row and column
    /// names.
    pub fn to_mps(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NAME          {name}");
        let _ = writeln!(out, "ROWS");
        let _ = writeln!(out, " N  COST");
        for (i, r) in self.rows.iter().enumerate() {
            let tag = match r.relation {
                Relation::Le => 'L',
                Relation::Eq => 'E',
                Relation::Ge => 'G',
            };
            let _ = writeln!(out, " {tag}  R{i:07}");
        }
        let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_vars()];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, a) in &r.coeffs {
                by_col[j].push((i, a));
            }
        }
        let _ = writeln!(out, "COLUMNS");
        for (j, col) in by_col.iter().enumerate() {
            let cname = format!("C{j:07}");
            if self.objective[j] != 0.0 {
                let _ = writeln!(out, "    {cname:<8}  {:<8}  {:>12}", "COST", mps_number(self.objective[j]));
            }
            for &(i, a) in col {
                let _ = writeln!(out, "    {cname:<8}  {:<8}  {:>12}", format!("R{i:07}"), mps_number(a));
            }
        }
        let _ = writeln!(out, "RHS");
        for (i, r) in self.rows.iter().enumerate() {
            if r.rhs != 0.0 {
                let _ = writeln!(out, "    {:<8}  {:<8}  {:>12}", "RHS", format!("R{i:07}"), mps_number(r.rhs));
            }
        }
        let _ = writeln!(out, "BOUNDS");
        for j in 0..self.num_vars() {
            let cname = format!("C{j:07}");
            let (l, u) = (self.lower[j], self.upper[j]);
            if l == f64::NEG_INFINITY && u == f64::INFINITY {
                let _ = writeln!(out, " FR BND       {cname:<8}");
                continue;
            }
            if l == u {
                let _ = writeln!(out, " FX BND       {cname:<8}  {:>12}", mps_number(l));
                continue;
            }
            if l == f64::NEG_INFINITY {
                let _ = writeln!(out, " MI BND       {cname:<8}");
            } else if l != 0.0 {
                let _ = writeln!(out, " LO BND       {cname:<8}  {:>12}", mps_number(l));
            }
            if u.is_finite() {
                let _ = writeln!(out, " UP BND       {cname:<8}  {:>12}", mps_number(u));
            }
        }
        let _ = writeln!(out, "ENDATA");
        out
    }
}

/// Numbers in fixed MPS have at most 12 characters.
fn mps_number(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 12 {
        s
    } else {
        format!("{v:.5e}")
    }
}

/// How a column of the standard form maps back to an original variable:
/// `x[var] = offset + sign * x_std`.
#[derive(Debug, Clone, Copy)]
struct ColumnMap {
    var: usize,
    sign: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnKind {
    Structural,
    Slack,
    Artificial,
}

/// Standard form `min c x, A x = b, x >= 0, b >= 0` with sparse columns.
struct StandardForm {
    m: usize,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    cost: Vec<f64>,
    kind: Vec<ColumnKind>,
    b: Vec<f64>,
    /// Columns forming the initial basis, one per row.
    initial_basis: Vec<usize>,
    /// Row sign flips applied to make `b >= 0`.
    flipped: Vec<bool>,
    map: Vec<Option<ColumnMap>>,
    offset: Vec<f64>,
    original_rows: usize,
}

impl StandardForm {
    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_start[j]..self.col_start[j + 1];
        self.row_idx[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    fn num_cols(&self) -> usize {
        self.cost.len()
    }

    fn build(p: &LpProblem) -> Self {
        let nv = p.num_vars();
        // per original variable: offset and up to two standard columns
        let mut offset = vec![0.0; nv];
        let mut columns: Vec<ColumnMap> = Vec::new();
        let mut extra_rows: Vec<(usize, f64)> = Vec::new(); // (std column, bound)
        for j in 0..nv {
            let (l, u) = (p.lower[j], p.upper[j]);
            if l.is_finite() {
                offset[j] = l;
                columns.push(ColumnMap { var: j, sign: 1.0 });
                if u.is_finite() {
                    extra_rows.push((columns.len() - 1, u - l));
                }
            } else if u.is_finite() {
                offset[j] = u;
                columns.push(ColumnMap { var: j, sign: -1.0 });
            } else {
                columns.push(ColumnMap { var: j, sign: 1.0 });
                columns.push(ColumnMap { var: j, sign: -1.0 });
            }
        }
        let mut var_cols: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (c, cm) in columns.iter().enumerate() {
            var_cols[cm.var].push(c);
        }

        // rows as (coeffs over std columns, relation, rhs)
        let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = Vec::new();
        for r in &p.rows {
            let mut coeffs = Vec::with_capacity(r.coeffs.len());
            let mut rhs = r.rhs;
            for &(j, a) in &r.coeffs {
                rhs -= a * offset[j];
                for &c in &var_cols[j] {
                    coeffs.push((c, a * columns[c].sign));
                }
            }
            rows.push((coeffs, r.relation, rhs));
        }
        for &(c, bound) in &extra_rows {
            rows.push((vec![(c, 1.0)], Relation::Le, bound));
        }

        let m = rows.len();
        let mut flipped = vec![false; m];
        for (i, row) in rows.iter_mut().enumerate() {
            if row.2 < 0.0 {
                flipped[i] = true;
                row.2 = -row.2;
                for c in row.0.iter_mut() {
                    c.1 = -c.1;
                }
                row.1 = match row.1 {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }

        let n_struct = columns.len();
        let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct];
        for (i, row) in rows.iter().enumerate() {
            for &(c, a) in &row.0 {
                by_col[c].push((i, a));
            }
        }
        let mut cost: Vec<f64> = columns.iter().map(|cm| p.objective[cm.var] * cm.sign).collect();
        let mut kind = vec![ColumnKind::Structural; n_struct];
        let mut map: Vec<Option<ColumnMap>> = columns.iter().copied().map(Some).collect();
        let mut initial_basis = vec![usize::MAX; m];
        for (i, row) in rows.iter().enumerate() {
            match row.1 {
                Relation::Le => {
                    by_col.push(vec![(i, 1.0)]);
                    kind.push(ColumnKind::Slack);
                    initial_basis[i] = by_col.len() - 1;
                }
                Relation::Ge => {
                    by_col.push(vec![(i, -1.0)]);
                    kind.push(ColumnKind::Slack);
                    by_col.push(vec![(i, 1.0)]);
                    kind.push(ColumnKind::Artificial);
                    initial_basis[i] = by_col.len() - 1;
                }
                Relation::Eq => {
                    by_col.push(vec![(i, 1.0)]);
                    kind.push(ColumnKind::Artificial);
                    initial_basis[i] = by_col.len() - 1;
                }
            }
        }
        cost.resize(by_col.len(), 0.0);
        map.resize(by_col.len(), None);

        let mut col_start = Vec::with_capacity(by_col.len() + 1);
        let mut row_idx = Vec::new();
        let mut vals = Vec::new();
        col_start.push(0);
        for col in &by_col {
            for &(i, a) in col {
                row_idx.push(i);
                vals.push(a);
            }
            col_start.push(row_idx.len());
        }
        Self {
            m,
            col_start,
            row_idx,
            vals,
            cost,
            kind,
            b: rows.iter().map(|r| r.2).collect(),
            initial_basis,
            flipped,
            map,
            offset,
            original_rows: p.rows.len(),
        }
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Simplex<'a> {
    sf: &'a StandardForm,
    /// Working right-hand side, perturbed during the main phase.
    b: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(sf: &'a StandardForm) -> Self {
        let m = sf.m;
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let mut is_basic = vec![false; sf.num_cols()];
        for &c in &sf.initial_basis {
            is_basic[c] = true;
        }
        // every initial basic column is a unit vector e_i
        Self {
            sf,
            b: sf.b.clone(),
            basis: sf.initial_basis.clone(),
            is_basic,
            binv,
            xb: sf.b.clone(),
            iterations: 0,
            since_refactor: 0,
        }
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.sf.m;
        let mut y = vec![0.0; m];
        for (i, &c) in self.basis.iter().enumerate() {
            let cb = cost[c];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, &bk) in y.iter_mut().zip(row) {
                    *yk += cb * bk;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], j: usize) -> f64 {
        cost[j] - self.sf.column(j).map(|(r, a)| y[r] * a).sum::<f64>()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.sf.m;
        let mut alpha = vec![0.0; m];
        for (r, a) in self.sf.column(j) {
            for (i, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[i * m + r] * a;
            }
        }
        alpha
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.sf.m;
        let ar = alpha[r];
        let theta = self.xb[r] / ar;
        for i in 0..m {
            if i != r && alpha[i] != 0.0 {
                self.xb[i] -= theta * alpha[i];
            }
        }
        self.xb[r] = theta;
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for v in pivot_row.iter_mut() {
            *v /= ar;
        }
        for (i, row) in before.chunks_exact_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * p;
                }
            }
        }
        for (k, row) in after.chunks_exact_mut(m).enumerate() {
            let f = alpha[r + 1 + k];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * p;
                }
            }
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= m.max(100) {
            self.refactor();
        }
    }

    fn recompute_xb(&mut self) {
        let m = self.sf.m;
        self.xb = (0..m).map(|i| (0..m).map(|k| self.binv[i * m + k] * self.b[k]).sum()).collect();
    }

    /// Recomputes the basis inverse from scratch and the basic solution from it.
    fn refactor(&mut self) {
        let m = self.sf.m;
        let mut a = vec![0.0; m * m];
        for (k, &c) in self.basis.iter().enumerate() {
            for (r, v) in self.sf.column(c) {
                a[r * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut best = col;
            for r in col + 1..m {
                if a[r * m + col].abs() > a[best * m + col].abs() {
                    best = r;
                }
            }
            if a[best * m + col].abs() < 1e-14 {
                // numerically singular; keep the updated inverse
                self.since_refactor = 0;
                return;
            }
            if best != col {
                for k in 0..m {
                    a.swap(col * m + k, best * m + k);
                    inv.swap(col * m + k, best * m + k);
                }
            }
            let p = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        // inv is B^{-1} with rows indexed by basis position
        self.binv = inv;
        self.recompute_xb();
        self.since_refactor = 0;
    }

    /// Shifts every non-artificial basic value up by a small deterministic
    /// amount, which breaks the ties of a degenerate vertex.
    fn perturb(&mut self) {
        let mut rng = SplitMix64::seed_from_u64(0x5eed);
        let m = self.sf.m;
        let scale = self.sf.b.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
        for i in 0..m {
            let c = self.basis[i];
            if self.sf.kind[c] == ColumnKind::Artificial {
                continue;
            }
            let delta = PERTURBATION * scale * (1.0 + rng.gen::<f64>());
            for (r, a) in self.sf.column(c) {
                self.b[r] += delta * a;
            }
        }
        self.recompute_xb();
    }

    fn restore(&mut self) {
        self.b = self.sf.b.clone();
        self.refactor();
        self.recompute_xb();
    }

    /// Primal simplex from a primal feasible basis.
    fn run(&mut self, cost: &[f64], allow_artificial: bool, limit: usize) -> PhaseOutcome {
        let sf = self.sf;
        let mut degenerate = 0usize;
        let mut segment = 0usize;
        loop {
            if self.iterations >= limit {
                return PhaseOutcome::IterationLimit;
            }
            let y = self.duals(cost);
            let bland = degenerate >= DEGENERATE_RUN;
            let ncols = sf.num_cols();
            // partial pricing: whole segments, starting where the last search
            // succeeded; Bland's rule always scans from the first column
            let segments = if bland { 1 } else { (ncols / PRICING_SEGMENT).max(1) };
            let seg_len = ncols.div_ceil(segments);
            let mut entering: Option<(usize, f64)> = None;
            for step in 0..segments {
                let seg = (segment + step) % segments;
                for j in seg * seg_len..((seg + 1) * seg_len).min(ncols) {
                    if self.is_basic[j] || (!allow_artificial && sf.kind[j] == ColumnKind::Artificial) {
                        continue;
                    }
                    let d = self.reduced_cost(cost, &y, j);
                    if d < -EPS_REDUCED * (1.0 + cost[j].abs()) {
                        if bland {
                            entering = Some((j, d));
                            break;
                        }
                        if entering.is_none_or(|(_, best)| d < best) {
                            entering = Some((j, d));
                        }
                    }
                }
                if entering.is_some() {
                    if !bland {
                        segment = seg;
                    }
                    break;
                }
            }
            let Some((q, _)) = entering else {
                return PhaseOutcome::Optimal;
            };
            let alpha = self.ftran(q);
            // Harris: the largest pivot among rows within the relaxed bound
            let mut theta_max = f64::INFINITY;
            for (i, &a) in alpha.iter().enumerate() {
                if a > EPS_PIVOT {
                    theta_max = theta_max.min((self.xb[i].max(0.0) + EPS_FEAS) / a);
                }
            }
            if theta_max.is_infinite() {
                return PhaseOutcome::Unbounded;
            }
            let mut leave: Option<usize> = None;
            for (i, &a) in alpha.iter().enumerate() {
                if a > EPS_PIVOT && self.xb[i].max(0.0) / a <= theta_max {
                    let better = match leave {
                        None => true,
                        Some(r) if bland => self.basis[i] < self.basis[r],
                        Some(r) => a > alpha[r],
                    };
                    if better {
                        leave = Some(i);
                    }
                }
            }
            let r = leave.expect("the tightest row qualifies");
            if self.xb[r] <= EPS_FEAS {
                degenerate += 1;
                self.xb[r] = self.xb[r].max(0.0);
            } else {
                degenerate = 0;
            }
            self.pivot(r, q, &alpha);
        }
    }

    /// Dual simplex from a dual feasible basis, until the basic values are
    /// non-negative. Returns `false` when the rows admit no feasible point.
    fn run_dual(&mut self, cost: &[f64], limit: usize) -> Option<bool> {
        let sf = self.sf;
        let m = sf.m;
        loop {
            if self.iterations >= limit {
                return None;
            }
            let scale = 1.0 + self.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            let Some(r) =
                (0..m).filter(|&i| self.xb[i] < -EPS_FEAS * scale).min_by(|&a, &b| self.xb[a].total_cmp(&self.xb[b]))
            else {
                return Some(true);
            };
            let y = self.duals(cost);
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..sf.num_cols() {
                if self.is_basic[j] || sf.kind[j] == ColumnKind::Artificial {
                    continue;
                }
                let a: f64 = sf.column(j).map(|(i, v)| row[i] * v).sum();
                if a < -EPS_PIVOT {
                    let ratio = self.reduced_cost(cost, &y, j).max(0.0) / -a;
                    let better = match entering {
                        None => true,
                        Some((_, best, ab)) => ratio < best - 1e-12 || (ratio <= best + 1e-12 && -a > ab),
                    };
                    if better {
                        entering = Some((j, ratio, -a));
                    }
                }
            }
            let Some((q, _, _)) = entering else {
                return Some(false);
            };
            let alpha = self.ftran(q);
            self.pivot(r, q, &alpha);
        }
    }

    /// Pivots basic artificials (at level zero) out of the basis where a
    /// structural or slack column can replace them.
    fn expel_artificials(&mut self) {
        let sf = self.sf;
        let m = sf.m;
        for r in 0..m {
            if sf.kind[self.basis[r]] != ColumnKind::Artificial {
                continue;
            }
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let candidate = (0..sf.num_cols()).find(|&j| {
                !self.is_basic[j]
                    && sf.kind[j] != ColumnKind::Artificial
                    && sf.column(j).map(|(i, a)| row[i] * a).sum::<f64>().abs() > 1e-9
            });
            if let Some(q) = candidate {
                let alpha = self.ftran(q);
                self.pivot(r, q, &alpha);
            }
        }
    }
}

pub fn solve(p: &LpProblem) -> LpSolution {
    let sf = StandardForm::build(p);
    let m = sf.m;
    let limit = 50 * (m + sf.num_cols()) + 1000;
    let mut s = Simplex::new(&sf);
    let nv = p.num_vars();

    let fail = |status: Status, iterations: usize| LpSolution {
        status,
        x: vec![f64::NAN; nv],
        duals: vec![f64::NAN; p.num_rows()],
        objective: f64::NAN,
        iterations,
    };

    if sf.kind.contains(&ColumnKind::Artificial) {
        let phase1: Vec<f64> = sf.kind.iter().map(|&k| if k == ColumnKind::Artificial { 1.0 } else { 0.0 }).collect();
        match s.run(&phase1, true, limit) {
            PhaseOutcome::Optimal => {}
            PhaseOutcome::IterationLimit => return fail(Status::IterationLimit, s.iterations),
            PhaseOutcome::Unbounded => unreachable!("phase one is bounded below by zero"),
        }
        s.refactor();
        let infeasibility: f64 = s
            .basis
            .iter()
            .zip(&s.xb)
            .filter(|(&c, _)| sf.kind[c] == ColumnKind::Artificial)
            .map(|(_, &x)| x.max(0.0))
            .sum();
        let scale = 1.0 + sf.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if infeasibility > EPS_FEAS * scale {
            return fail(Status::Infeasible, s.iterations);
        }
        s.expel_artificials();
    }

    s.perturb();
    match s.run(&sf.cost, false, limit) {
        PhaseOutcome::Optimal => {}
        PhaseOutcome::Unbounded => return fail(Status::Unbounded, s.iterations),
        PhaseOutcome::IterationLimit => return fail(Status::IterationLimit, s.iterations),
    }
    // back to the true right-hand side: the basis stays dual feasible
    s.restore();
    for _ in 0..CLEANUP_ROUNDS {
        match s.run_dual(&sf.cost, limit) {
            Some(true) => {}
            Some(false) => return fail(Status::Infeasible, s.iterations),
            None => return fail(Status::IterationLimit, s.iterations),
        }
        let before = s.iterations;
        match s.run(&sf.cost, false, limit) {
            PhaseOutcome::Optimal => {}
            PhaseOutcome::Unbounded => return fail(Status::Unbounded, s.iterations),
            PhaseOutcome::IterationLimit => return fail(Status::IterationLimit, s.iterations),
        }
        s.refactor();
        if s.iterations == before {
            break;
        }
    }

    let mut xs = vec![0.0; sf.num_cols()];
    for (i, &c) in s.basis.iter().enumerate() {
        xs[c] = s.xb[i].max(0.0);
    }
    let mut x = sf.offset.clone();
    for (c, cm) in sf.map.iter().enumerate() {
        if let Some(cm) = cm {
            x[cm.var] += cm.sign * xs[c];
        }
    }
    let y = s.duals(&sf.cost);
    let duals: Vec<f64> = (0..sf.original_rows).map(|i| if sf.flipped[i] { -y[i] } else { y[i] }).collect();
    LpSolution { status: Status::Optimal, objective: p.objective_value(&x), x, duals, iterations: s.iterations }
}

/// Checks an optimal solution: primal feasibility, dual feasibility,
/// complementary slackness and equal primal and dual objectives, each within
/// [`EPS_DUAL`] relative to the magnitudes involved.
pub fn certify(p: &LpProblem, s: &LpSolution) -> bool {
    if s.status != Status::Optimal || s.x.len() != p.num_vars() || s.duals.len() != p.num_rows() {
        return false;
    }
    let tol = EPS_DUAL;
    for j in 0..p.num_vars() {
        let x = s.x[j];
        if !x.is_finite() || x < p.lower[j] - tol * (1.0 + p.lower[j].abs()) {
            return false;
        }
        if x > p.upper[j] + tol * (1.0 + p.upper[j].abs()) {
            return false;
        }
    }
    let mut dual_obj = 0.0;
    let mut reduced = p.objective.clone();
    for (i, r) in p.rows.iter().enumerate() {
        let y = s.duals[i];
        let act = p.row_activity(i, &s.x);
        let scale = 1.0 + r.rhs.abs().max(act.abs());
        let ok_primal = match r.relation {
            Relation::Le => act <= r.rhs + tol * scale,
            Relation::Ge => act >= r.rhs - tol * scale,
            Relation::Eq => (act - r.rhs).abs() <= tol * scale,
        };
        let ok_sign = match r.relation {
            Relation::Le => y <= tol,
            Relation::Ge => y >= -tol,
            Relation::Eq => true,
        };
        if !ok_primal || !ok_sign || (y * (act - r.rhs)).abs() > tol * scale * (1.0 + y.abs()) {
            return false;
        }
        dual_obj += y * r.rhs;
        for &(j, a) in &r.coeffs {
            reduced[j] -= y * a;
        }
    }
    for j in 0..p.num_vars() {
        let d = reduced[j];
        let zero = tol * (1.0 + p.objective[j].abs());
        if d > zero {
            if !p.lower[j].is_finite() || (s.x[j] - p.lower[j]).abs() > tol * (1.0 + p.lower[j].abs()) {
                return false;
            }
            dual_obj += d * p.lower[j];
        } else if d < -zero {
            if !p.upper[j].is_finite() || (s.x[j] - p.upper[j]).abs() > tol * (1.0 + p.upper[j].abs()) {
                return false;
            }
            dual_obj += d * p.upper[j];
        }
    }
    let primal_obj = p.objective_value(&s.x);
    (primal_obj - dual_obj).abs() <= tol * (1.0 + primal_obj.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_lower_bound_row() {
        let mut p = LpProblem::new(1);
        p.set_objective(0, 1.0);
        p.add_row(vec![(0, 1.0)], Relation::Ge, 3.0);
        let s = solve(&p);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
        assert!(certify(&p, &s));

        let mut perturbed = s.clone();
        perturbed.x[0] += 1e-3;
        perturbed.objective += 1e-3;
        assert!(!certify(&p, &perturbed));
    }

    #[test]
    fn equality_row() {
        let mut p = LpProblem::new(2);
        p.set_objective(0, 1.0);
        p.set_objective(1, 1.0);
        p.add_row(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 2.0);
        let s = solve(&p);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-12);
        assert!(certify(&p, &s));
        let mut perturbed = s.clone();
        perturbed.x[0] += 1e-3;
        assert!(!certify(&p, &perturbed));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = LpProblem::new(1);
        p.add_row(vec![(0, 1.0)], Relation::Le, -1.0);
        assert_eq!(solve(&p).status, Status::Infeasible);

        let mut q = LpProblem::new(2);
        q.set_objective(0, -1.0);
        q.add_row(vec![(0, 1.0), (1, -1.0)], Relation::Le, 1.0);
        assert_eq!(solve(&q).status, Status::Unbounded);
    }

    #[test]
    fn free_and_upper_bounded_variables() {
        // min x - y, x free with x >= -2 through a row, y <= 5 and y >= -inf
        let mut p = LpProblem::new(2);
        p.set_objective(0, 1.0);
        p.set_objective(1, -1.0);
        p.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        p.set_bounds(1, f64::NEG_INFINITY, 5.0);
        p.add_row(vec![(0, 1.0)], Relation::Ge, -2.0);
        let s = solve(&p);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.x[0] + 2.0).abs() < 1e-12);
        assert!((s.x[1] - 5.0).abs() < 1e-12);
        assert!(certify(&p, &s));
    }

    #[test]
    fn redundant_equalities() {
        let mut p = LpProblem::new(3);
        p.set_objective(0, 1.0);
        p.set_objective(1, 2.0);
        p.set_objective(2, 3.0);
        p.add_row(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Relation::Eq, 4.0);
        p.add_row(vec![(0, 2.0), (1, 2.0), (2, 2.0)], Relation::Eq, 8.0);
        p.add_row(vec![(1, 1.0)], Relation::Ge, 1.0);
        let s = solve(&p);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 5.0).abs() < 1e-10);
        assert!(certify(&p, &s));
    }

    #[test]
    fn mps_dump_lists_every_section() {
        let mut p = LpProblem::new(2);
        p.set_objective(0, 1.5);
        p.set_bounds(1, -1.0, 4.0);
        p.add_row(vec![(0, 1.0), (1, -2.0)], Relation::Ge, 0.25);
        let mps = p.to_mps("TEST");
        for section in ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(mps.contains(section), "{section} missing");
        }
        assert!(mps.contains(" G  R0000000"));
        assert!(mps.contains(" LO BND       C0000001"));
        assert!(mps.contains(" UP BND       C0000001"));
    }

    fn random_lp() -> impl Strategy<Value = LpProblem> {
        (2usize..7, 1usize..7).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(prop::collection::vec(-3.0f64..3.0, n), m),
                prop::collection::vec(0u8..3, m),
                prop::collection::vec(0.0f64..4.0, n),
                prop::collection::vec(0.0f64..2.0, m),
            )
                .prop_map(move |(c, a, rel, x0, slack)| {
                    let mut p = LpProblem::new(n);
                    for j in 0..n {
                        p.set_objective(j, c[j]);
                        p.set_bounds(j, 0.0, 5.0);
                    }
                    for i in 0..m {
                        let act: f64 = a[i].iter().zip(&x0).map(|(a, x)| a * x).sum();
                        let coeffs = a[i].iter().copied().enumerate().collect();
                        match rel[i] {
                            0 => p.add_row(coeffs, Relation::Le, act + slack[i]),
                            1 => p.add_row(coeffs, Relation::Ge, act - slack[i]),
                            _ => p.add_row(coeffs, Relation::Eq, act),
                        };
                    }
                    p
                })
        })
    }

    proptest! {
        #[test]
        fn random_feasible_lps_certify(p in random_lp()) {
            let s = solve(&p);
            prop_assert_eq!(s.status, Status::Optimal);
            prop_assert!(certify(&p, &s));
        }

        #[test]
        fn objective_scaling(p in random_lp(), alpha in 0.1f64..10.0) {
            let s = solve(&p);
            let mut q = p.clone();
            for j in 0..q.num_vars() {
                let c = q.objective()[j];
                q.set_objective(j, alpha * c);
            }
            let t = solve(&q);
            prop_assert_eq!(t.status, Status::Optimal);
            prop_assert!((t.objective - alpha * s.objective).abs() <= 1e-7 * (1.0 + t.objective.abs()));
            // the first optimum stays optimal for the scaled objective
            prop_assert!((q.objective_value(&s.x) - t.objective).abs() <= 1e-7 * (1.0 + t.objective.abs()));
        }

        #[test]
        fn solve_is_deterministic(p in random_lp()) {
            prop_assert_eq!(solve(&p), solve(&p));
        }
    }
}
