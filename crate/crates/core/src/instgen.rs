//! Random TDTSP instances with two traffic scenarios, and the instance file
//! format.
//!
//! Vertices are drawn uniformly in the unit square; arc lengths are 100 times
//! the euclidean distance (at least 0.5). The horizon is split into `H` equal
//! periods and every arc has a constant speed per period,
//!
//! ```text
//! v_ijh = delta_ijh * f_h * u_ij
//! ```
//!
//! where `u_ij ~ U(0.8, 1.2)` is the free-flow speed, `f_h = 1 - d sin^2(pi
//! (h + 1/2) / H)` the best congestion factor of the period and `delta_ijh =
//! 1 - (1 - Delta) r_ijh` the arc's own degradation. Pattern A (`d = 0.2`)
//! congests only arcs crossing the central zone, with `r ~ U(0.5, 1)` in every
//! period. Pattern B (`d = 0.3`) gives crossing arcs `r ~ U(0.6, 1)` in peak
//! periods (`sin^2 >= 1/2`) and every other arc-period `r ~ U(0, 0.3)`. The
//! largest `r` is then set to 1, so that the smallest degradation is exactly
//! `Delta`, and the smallest `r` of every period to 0, so that some arc
//! reaches `f_h`.
//!
//! Draw order from a SplitMix64 stream seeded with `seed`: the `n` points
//! (x then y), then for each arc in row-major order `u_ij` followed by
//! `r_ij0 .. r_ij(H-1)`. Uniform draws are `lo + (hi - lo) * U[0, 1)` with
//! the 53-bit float conversion of `rand`.
//!
//! Travel times come from integrating the speed profile over the length,
//! rounded to 12 significant digits.

use std::fmt::{self, Write as _};
use std::io;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use thiserror::Error;

use crate::pwl::{PwlError, StepFunction, TravelTime};
use crate::tdgraph::{GraphError, TdGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    A,
    B,
}

impl Pattern {
    pub fn depth(self) -> f64 {
        match self {
            Pattern::A => 0.2,
            Pattern::B => 0.3,
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::A => "A",
            Pattern::B => "B",
        })
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "A" | "a" => Ok(Pattern::A),
            "B" | "b" => Ok(Pattern::B),
            _ => Err(format!("unknown pattern {s:?}, expected A or B")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("need at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("delta must lie in (0, 1], got {0}")]
    BadDelta(f64),
    #[error("need at least 2 periods, got {0}")]
    TooFewPeriods(usize),
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("congestion depth must lie in [0, 1), got {0}")]
    BadDepth(f64),
    #[error("central zone must satisfy 0 <= lo < hi <= 1, got [{0}, {1}]")]
    BadZone(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub n: usize,
    pub pattern: Pattern,
    pub delta: f64,
    pub periods: usize,
    pub horizon: f64,
    pub seed: u64,
    /// Overrides the pattern's congestion depth `d`.
    pub depth: Option<f64>,
    /// The central zone is `[lo, hi]^2`.
    pub zone: (f64, f64),
}

impl GenSpec {
    /// Five periods over `T = 50 n`, the central third as the zone.
    pub fn new(n: usize, pattern: Pattern, delta: f64, seed: u64) -> Self {
        Self {
            n,
            pattern,
            delta,
            periods: 5,
            horizon: 50.0 * n as f64,
            seed,
            depth: None,
            zone: (1.0 / 3.0, 2.0 / 3.0),
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.n < 2 {
            return Err(SpecError::TooFewVertices(self.n));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(SpecError::BadDelta(self.delta));
        }
        if self.periods < 2 {
            return Err(SpecError::TooFewPeriods(self.periods));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(SpecError::BadHorizon(self.horizon));
        }
        let d = self.congestion_depth();
        if !(0.0..1.0).contains(&d) {
            return Err(SpecError::BadDepth(d));
        }
        let (lo, hi) = self.zone;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(SpecError::BadZone(lo, hi));
        }
        Ok(())
    }

    pub fn congestion_depth(&self) -> f64 {
        self.depth.unwrap_or(self.pattern.depth())
    }

    pub fn period_length(&self) -> f64 {
        self.horizon / self.periods as f64
    }
}

/// The speed model behind a generated instance, indexed by arc position in
/// `arcs` (row-major, no loops).
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedDecomposition {
    pub arcs: Vec<(usize, usize)>,
    pub points: Vec<(f64, f64)>,
    pub lengths: Vec<f64>,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub delta: Vec<Vec<f64>>,
}

impl SpeedDecomposition {
    pub fn speed(&self, e: usize, h: usize) -> f64 {
        self.delta[e][h] * self.f[h] * self.u[e]
    }
}

fn round12(x: f64) -> f64 {
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn crosses_zone(p: (f64, f64), q: (f64, f64), (lo, hi): (f64, f64)) -> bool {
    // Liang-Barsky clipping of the segment against the square
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for (den, num) in [(-dx, p.0 - lo), (dx, hi - p.0), (-dy, p.1 - lo), (dy, hi - p.1)] {
        if den == 0.0 {
            if num < 0.0 {
                return false;
            }
        } else {
            let r = num / den;
            if den < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    t0 <= t1
}

/// Travel time over `length` under the step `speed`, as an explicit function
/// on `[0, horizon]`.
pub fn speed_travel_time(speed: &StepFunction, length: f64, horizon: f64) -> TravelTime {
    let mut ts = vec![0.0, horizon];
    for &tb in speed.times() {
        ts.push(tb);
        ts.push(speed.retreat(tb, length));
    }
    ts.retain(|&t| (0.0..=horizon).contains(&t));
    ts.sort_by(f64::total_cmp);
    // drop slivers that would not survive rounding
    ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-6 * horizon);
    let points = ts.into_iter().map(|t| (round12(t), round12(speed.advance(t, length) - t))).collect();
    TravelTime::from_points(points).expect("integrated speeds are FIFO")
}

pub fn generate(spec: &GenSpec) -> Result<TdGraph, SpecError> {
    generate_with_decomposition(spec).map(|(g, _)| g)
}

pub fn generate_with_decomposition(spec: &GenSpec) -> Result<(TdGraph, SpeedDecomposition), SpecError> {
    spec.validate()?;
    let mut rng = SplitMix64::seed_from_u64(spec.seed);
    let mut uniform = |lo: f64, hi: f64| lo + (hi - lo) * rng.gen::<f64>();
    let n = spec.n;
    let big_h = spec.periods;
    let points: Vec<(f64, f64)> = (0..n).map(|_| (uniform(0.0, 1.0), uniform(0.0, 1.0))).collect();
    let depth = spec.congestion_depth();
    let f: Vec<f64> = (0..big_h)
        .map(|h| 1.0 - depth * (std::f64::consts::PI * (h as f64 + 0.5) / big_h as f64).sin().powi(2))
        .collect();
    let peak: Vec<bool> =
        (0..big_h).map(|h| (std::f64::consts::PI * (h as f64 + 0.5) / big_h as f64).sin().powi(2) >= 0.5).collect();

    let arcs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).collect();
    let mut lengths = Vec::with_capacity(arcs.len());
    let mut u = Vec::with_capacity(arcs.len());
    let mut r: Vec<Vec<f64>> = Vec::with_capacity(arcs.len());
    for &(i, j) in &arcs {
        let (p, q) = (points[i], points[j]);
        lengths.push((100.0 * (q.0 - p.0).hypot(q.1 - p.1)).max(0.5));
        u.push(uniform(0.8, 1.2));
        let crossing = crosses_zone(p, q, spec.zone);
        r.push(
            (0..big_h)
                .map(|h| match (spec.pattern, crossing) {
                    (Pattern::A, true) => uniform(0.5, 1.0),
                    (Pattern::A, false) => {
                        uniform(0.0, 1.0);
                        0.0
                    }
                    (Pattern::B, true) if peak[h] => uniform(0.6, 1.0),
                    (Pattern::B, _) => uniform(0.0, 0.3),
                })
                .collect(),
        );
    }

    // pin the extremes
    let (mut e_max, mut h_max) = (0, 0);
    for (e, row) in r.iter().enumerate() {
        for (h, &x) in row.iter().enumerate() {
            if x > r[e_max][h_max] {
                (e_max, h_max) = (e, h);
            }
        }
    }
    r[e_max][h_max] = 1.0;
    for h in 0..big_h {
        let e_min = (0..arcs.len())
            .filter(|&e| (e, h) != (e_max, h_max))
            .min_by(|&a, &b| r[a][h].total_cmp(&r[b][h]))
            .expect("at least two arcs");
        r[e_min][h] = 0.0;
    }
    let delta: Vec<Vec<f64>> = r
        .iter()
        .map(|row| row.iter().map(|&x| if x == 1.0 { spec.delta } else { 1.0 - (1.0 - spec.delta) * x }).collect())
        .collect();

    let decomposition = SpeedDecomposition { arcs: arcs.clone(), points, lengths, u, f, delta };
    let period = spec.period_length();
    let travel_times = arcs.iter().enumerate().map(|(e, &arc)| {
        let speed = StepFunction::new((0..big_h).map(|h| (h as f64 * period, decomposition.speed(e, h))).collect())
            .expect("speeds are positive");
        (arc, speed_travel_time(&speed, decomposition.lengths[e], spec.horizon))
    });
    let g = TdGraph::new(n, spec.horizon, 0.0, travel_times).expect("complete graph is valid");
    Ok((g, decomposition))
}

/// Instance file text: a `TDTSP n T t0` header, then one
/// `arc i j K t_1 tau_1 ... t_K tau_K` line per arc.
pub fn write_instance(g: &TdGraph) -> String {
    let mut out = format!("TDTSP {} {} {}\n", g.num_vertices(), g.horizon(), g.start_time());
    for ((i, j), tau) in g.travel_times() {
        let _ = write!(out, "arc {i} {j} {}", tau.points().len());
        for &(t, v) in tau.points() {
            let _ = write!(out, " {t} {v}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    TravelTime { line: usize, source: PwlError },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn parse_err(line: usize, message: impl Into<String>) -> InstanceError {
    InstanceError::Parse { line, message: message.into() }
}

fn field<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, InstanceError> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("bad {what} {tok:?}")))
}

pub fn read_instance(text: &str) -> Result<TdGraph, InstanceError> {
    let mut header: Option<(usize, f64, f64)> = None;
    let mut arcs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        match (toks.next(), &header) {
            (Some("TDTSP"), None) => {
                header = Some((
                    field(toks.next(), line, "vertex count")?,
                    field(toks.next(), line, "horizon")?,
                    field(toks.next(), line, "start time")?,
                ));
            }
            (Some("TDTSP"), Some(_)) => return Err(parse_err(line, "duplicate header")),
            (Some("arc"), Some(_)) => {
                let i: usize = field(toks.next(), line, "tail")?;
                let j: usize = field(toks.next(), line, "head")?;
                let k: usize = field(toks.next(), line, "breakpoint count")?;
                let mut points = Vec::with_capacity(k);
                for _ in 0..k {
                    points.push((field(toks.next(), line, "time")?, field(toks.next(), line, "travel time")?));
                }
                if toks.next().is_some() {
                    return Err(parse_err(line, "trailing tokens"));
                }
                let tau =
                    TravelTime::from_points(points).map_err(|source| InstanceError::TravelTime { line, source })?;
                arcs.push(((i, j), tau));
            }
            (Some("arc"), None) => return Err(parse_err(line, "arc before the TDTSP header")),
            (Some(other), _) => return Err(parse_err(line, format!("unknown record {other:?}"))),
            (None, _) => unreachable!("blank lines are skipped"),
        }
    }
    let (n, horizon, t0) = header.ok_or_else(|| parse_err(1, "missing TDTSP header"))?;
    Ok(TdGraph::new(n, horizon, t0, arcs)?)
}

pub fn load_instance(path: &Path) -> Result<TdGraph, InstanceError> {
    read_instance(&std::fs::read_to_string(path)?)
}

pub const MANIFEST_HEADER: &str = "file,n,pattern,delta,periods,horizon,seed";

pub fn manifest_line(file: &str, spec: &GenSpec) -> String {
    format!("{file},{},{},{},{},{},{}", spec.n, spec.pattern, spec.delta, spec.periods, spec.horizon, spec.seed)
}
