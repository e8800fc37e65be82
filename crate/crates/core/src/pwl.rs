//! Continuous piecewise-linear functions and right-continuous step functions of
//! time.
//!
//! Both kinds are clamped constant outside their breakpoint span. Travel-time
//! functions are wrapped in [`TravelTime`], which additionally enforces the
//! FIFO property (every segment slope strictly greater than -1), so that the
//! arrival map `t + tau(t)` is a strictly increasing bijection of the reals.

use thiserror::Error;

/// Absolute tolerance used when comparing instants.
pub const EPS_TIME: f64 = 1e-9;
/// Absolute tolerance used when comparing costs.
pub const EPS_COST: f64 = 1e-9;
/// Minimum slope jump that counts as a breakpoint of a cost function,
/// relative to the largest unit cost involved.
pub const EPS_SLOPE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PwlError {
    #[error("a function needs at least one breakpoint")]
    Empty,
    #[error("breakpoint {index} is not finite")]
    NonFinite { index: usize },
    #[error("breakpoint times must be strictly increasing (index {index})")]
    NotIncreasing { index: usize },
    #[error("value {value} at breakpoint {index} must be strictly positive")]
    NonPositive { index: usize, value: f64 },
    #[error("segment {index} has slope {slope}, which violates FIFO (must exceed -1)")]
    NotFifo { index: usize, slope: f64 },
}

fn check_points(points: &[(f64, f64)]) -> Result<(), PwlError> {
    if points.is_empty() {
        return Err(PwlError::Empty);
    }
    for (index, &(t, v)) in points.iter().enumerate() {
        if !t.is_finite() || !v.is_finite() {
            return Err(PwlError::NonFinite { index });
        }
        if index > 0 && t <= points[index - 1].0 {
            return Err(PwlError::NotIncreasing { index });
        }
    }
    Ok(())
}

/// Continuous piecewise-linear function given by its breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlFunction {
    points: Vec<(f64, f64)>,
}

impl PwlFunction {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, PwlError> {
        check_points(&points)?;
        Ok(Self { points })
    }

    pub fn constant(value: f64) -> Self {
        Self { points: vec![(0.0, value)] }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn breakpoint_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    pub fn first_time(&self) -> f64 {
        self.points[0].0
    }

    pub fn last_time(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// Index of the segment `[t_k, t_{k+1})` containing `t`, or `None` when `t`
    /// lies outside the breakpoint span.
    fn segment(&self, t: f64) -> Option<usize> {
        let n = self.points.len();
        if n < 2 || t < self.points[0].0 || t >= self.points[n - 1].0 {
            return None;
        }
        let k = self.points.partition_point(|p| p.0 <= t) - 1;
        Some(k.min(n - 2))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.points.len();
        if t <= self.points[0].0 {
            return self.points[0].1;
        }
        if t >= self.points[n - 1].0 {
            return self.points[n - 1].1;
        }
        let k = self.segment(t).expect("t inside span");
        let (t0, v0) = self.points[k];
        let (t1, v1) = self.points[k + 1];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    fn segment_slope(&self, k: usize) -> f64 {
        let (t0, v0) = self.points[k];
        let (t1, v1) = self.points[k + 1];
        (v1 - v0) / (t1 - t0)
    }

    /// Slope immediately left of `t`. Instants within [`EPS_TIME`] of a
    /// breakpoint are snapped onto it.
    pub fn slope_left(&self, t: f64) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return 0.0;
        }
        let t = self.snap(t);
        if t <= self.points[0].0 || t > self.points[n - 1].0 {
            return 0.0;
        }
        // last k with t_k < t
        let k = self.points.partition_point(|p| p.0 < t) - 1;
        self.segment_slope(k)
    }

    /// Slope immediately right of `t`, with the same snapping as
    /// [`Self::slope_left`].
    pub fn slope_right(&self, t: f64) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return 0.0;
        }
        let t = self.snap(t);
        if t < self.points[0].0 || t >= self.points[n - 1].0 {
            return 0.0;
        }
        let k = self.points.partition_point(|p| p.0 <= t) - 1;
        self.segment_slope(k)
    }

    fn snap(&self, t: f64) -> f64 {
        let i = self.points.partition_point(|p| p.0 < t);
        for j in [i.wrapping_sub(1), i] {
            if let Some(&(tj, _)) = self.points.get(j) {
                if (tj - t).abs() <= EPS_TIME {
                    return tj;
                }
            }
        }
        t
    }

    pub fn min_value(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Minimum over the closed window `[lo, hi]`.
    pub fn min_on(&self, lo: f64, hi: f64) -> f64 {
        let mut best = self.eval(lo).min(self.eval(hi));
        let start = self.points.partition_point(|p| p.0 <= lo);
        for &(t, v) in &self.points[start..] {
            if t >= hi {
                break;
            }
            best = best.min(v);
        }
        best
    }

    /// Merges breakpoints closer than [`EPS_TIME`] and drops middle points of
    /// collinear triples. `tol` is the largest vertical deviation tolerated
    /// when a point is dropped.
    pub fn simplified(&self, tol: f64) -> Self {
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.points.len());
        for &p in &self.points {
            match merged.last() {
                Some(&(t, _)) if p.0 - t <= EPS_TIME => {}
                _ => merged.push(p),
            }
        }
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(merged.len());
        for (i, &p) in merged.iter().enumerate() {
            if i + 1 < merged.len() && !out.is_empty() {
                let (ta, va) = *out.last().unwrap();
                let (tb, vb) = merged[i + 1];
                let interp = va + (vb - va) * (p.0 - ta) / (tb - ta);
                if (interp - p.1).abs() <= tol {
                    continue;
                }
            }
            out.push(p);
        }
        Self { points: out }
    }
}

/// A FIFO travel-time function: strictly positive with every slope above -1.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTime {
    f: PwlFunction,
}

impl TravelTime {
    pub fn new(f: PwlFunction) -> Result<Self, PwlError> {
        for (index, &(_, v)) in f.points.iter().enumerate() {
            if v <= 0.0 {
                return Err(PwlError::NonPositive { index, value: v });
            }
        }
        for index in 0..f.points.len().saturating_sub(1) {
            let slope = f.segment_slope(index);
            if slope <= -1.0 {
                return Err(PwlError::NotFifo { index, slope });
            }
        }
        Ok(Self { f })
    }

    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self, PwlError> {
        Self::new(PwlFunction::new(points)?)
    }

    pub fn constant(value: f64) -> Result<Self, PwlError> {
        Self::new(PwlFunction::constant(value))
    }

    pub fn function(&self) -> &PwlFunction {
        &self.f
    }

    pub fn points(&self) -> &[(f64, f64)] {
        self.f.points()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.f.eval(t)
    }

    /// Arrival time when departing at `t`.
    pub fn arrival(&self, t: f64) -> f64 {
        t + self.f.eval(t)
    }

    /// Departure time whose arrival is `a`.
    pub fn arrival_inverse(&self, a: f64) -> f64 {
        let pts = &self.f.points;
        let n = pts.len();
        let (t_first, v_first) = pts[0];
        if a <= t_first + v_first {
            return a - v_first;
        }
        let (t_last, v_last) = pts[n - 1];
        if a >= t_last + v_last {
            return a - v_last;
        }
        // first k with arrival(t_k) > a; the answer lies in [t_{k-1}, t_k)
        let k = pts.partition_point(|&(t, v)| t + v <= a);
        let (t0, v0) = pts[k - 1];
        let (t1, v1) = pts[k];
        let g0 = t0 + v0;
        let g1 = t1 + v1;
        t0 + (t1 - t0) * (a - g0) / (g1 - g0)
    }

    pub fn min_value(&self) -> f64 {
        self.f.min_value()
    }
}

/// Right-continuous positive step function: value `b_h` on `[t_h, t_{h+1})`,
/// `b_0` before `t_0` and the last value beyond the final breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(pieces: Vec<(f64, f64)>) -> Result<Self, PwlError> {
        check_points(&pieces)?;
        for (index, &(_, v)) in pieces.iter().enumerate() {
            if v <= 0.0 {
                return Err(PwlError::NonPositive { index, value: v });
            }
        }
        let (times, values) = pieces.into_iter().unzip();
        Ok(Self { times, values })
    }

    pub fn constant(value: f64) -> Result<Self, PwlError> {
        Self::new(vec![(0.0, value)])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the piece in force at `t`.
    pub fn piece(&self, t: f64) -> usize {
        self.times.partition_point(|&th| th <= t).saturating_sub(1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.values[self.piece(t)]
    }

    /// Values just left and just right of `t`; instants within [`EPS_TIME`]
    /// of a breakpoint are treated as lying on it.
    pub fn values_around(&self, t: f64) -> (f64, f64) {
        let i = self.times.partition_point(|&th| th < t);
        for j in [i.wrapping_sub(1), i] {
            if let Some(&tj) = self.times.get(j) {
                if (tj - t).abs() <= EPS_TIME {
                    let left = self.values[j.saturating_sub(1)];
                    return (left, self.values[j]);
                }
            }
        }
        let v = self.eval(t);
        (v, v)
    }

    /// Start of piece `h + 1`, or infinity for the last piece.
    fn piece_end(&self, h: usize) -> f64 {
        self.times.get(h + 1).copied().unwrap_or(f64::INFINITY)
    }

    /// Integral of the step function over `[a, b]` (negated when `b < a`).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integral(b, a);
        }
        let mut h = self.piece(a);
        let mut t = a;
        let mut total = 0.0;
        loop {
            let end = self.piece_end(h).min(b);
            total += self.values[h] * (end - t);
            if end >= b {
                return total;
            }
            t = end;
            h += 1;
        }
    }

    /// The instant `s >= t` with `integral(t, s) == amount`, walking forward
    /// piece by piece.
    pub fn advance(&self, t: f64, amount: f64) -> f64 {
        let mut k = self.piece(t);
        let mut t = t;
        let mut d = amount;
        let mut arrival = t + d / self.values[k];
        while arrival > self.piece_end(k) {
            d -= self.values[k] * (self.piece_end(k) - t);
            t = self.piece_end(k);
            k += 1;
            arrival = t + d / self.values[k];
        }
        arrival
    }

    /// The instant `s <= t` with `integral(s, t) == amount`, walking backward.
    pub fn retreat(&self, t: f64, amount: f64) -> f64 {
        // piece containing the instants just before t
        let mut k = self.times.partition_point(|&th| th < t).saturating_sub(1);
        let mut t = t;
        let mut d = amount;
        let piece_start = |k: usize| {
            if k == 0 {
                f64::NEG_INFINITY
            } else {
                self.times[k]
            }
        };
        let mut departure = t - d / self.values[k];
        while departure < piece_start(k) {
            d -= self.values[k] * (t - piece_start(k));
            t = piece_start(k);
            k -= 1;
            departure = t - d / self.values[k];
        }
        departure
    }
}

/// Travel cost of departing at `t`: the integral of `b` between departure and
/// arrival.
pub fn travel_cost(tau: &TravelTime, b: &StepFunction, t: f64) -> f64 {
    b.integral(t, tau.arrival(t))
}

/// Instants at which the travel cost may change slope inside `(lo, hi)`:
/// breakpoints of `b`, breakpoints of `tau`, and departures arriving on a
/// breakpoint of `b`. Sorted, merged within [`EPS_TIME`].
pub fn cost_candidates(tau: &TravelTime, b: &StepFunction, lo: f64, hi: f64) -> Vec<f64> {
    let mut cand: Vec<f64> = Vec::new();
    let mut push = |t: f64| {
        if t > lo + EPS_TIME && t < hi - EPS_TIME {
            cand.push(t);
        }
    };
    for &t in b.times() {
        push(t);
        push(tau.arrival_inverse(t));
    }
    for t in tau.function().breakpoint_times() {
        push(t);
    }
    cand.sort_by(f64::total_cmp);
    cand.dedup_by(|a, b| (*a - *b).abs() <= EPS_TIME);
    cand
}

/// One-sided slopes of the travel cost at `t`, computed from the pieces in
/// force rather than by differencing.
pub fn cost_slopes(tau: &TravelTime, b: &StepFunction, t: f64) -> (f64, f64) {
    let arrival = tau.arrival(t);
    let (dep_left, dep_right) = b.values_around(t);
    let (arr_left, arr_right) = b.values_around(arrival);
    let f = tau.function();
    let left = arr_left * (1.0 + f.slope_left(t)) - dep_left;
    let right = arr_right * (1.0 + f.slope_right(t)) - dep_right;
    (left, right)
}

/// Instants in `(lo, hi)` where the travel cost changes slope.
pub fn cost_breakpoints(tau: &TravelTime, b: &StepFunction, lo: f64, hi: f64) -> Vec<f64> {
    let threshold = EPS_SLOPE * b.max_value().max(1.0);
    cost_candidates(tau, b, lo, hi)
        .into_iter()
        .filter(|&t| {
            let (l, r) = cost_slopes(tau, b, t);
            (l - r).abs() > threshold
        })
        .collect()
}

/// The travel cost on `[lo, hi]` as an explicit piecewise-linear function.
/// Outside the window it is clamped like any [`PwlFunction`], which is exact
/// past `hi` whenever `hi` is beyond every breakpoint of `tau` and `b`.
pub fn cost_function(tau: &TravelTime, b: &StepFunction, lo: f64, hi: f64) -> PwlFunction {
    let mut points = vec![(lo, travel_cost(tau, b, lo))];
    for t in cost_candidates(tau, b, lo, hi) {
        points.push((t, travel_cost(tau, b, t)));
    }
    if hi > lo {
        points.push((hi, travel_cost(tau, b, hi)));
    }
    PwlFunction { points }
}
