//! Rate–cache curves: grid sweeps of every scheme, memory-sharing
//! convexification, the uncoded baseline, and numerical certificates of the
//! multiplicative gaps between the achievable rates and the lower bound.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    corner_points, high_cache_optimal, relaxed_lower_bound, uniform_lower_bound, CornerMode,
    LowerBoundEvaluator,
};
use crate::centralized::{greedy_path, IntegerAllocation};
use crate::decentralized::{kkt_optimize, mn_worst_case, FractionalAllocation};
use crate::error::{Error, Result};
use crate::numeric::{format_significant, neumaier_sum, pow_complement};
use crate::popularity::{coverage, PopularityProfile};

/// Where a curve point came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Closed-form expression or interpolation of one.
    Formula,
    /// Lower bound; `users_term` is the maximizing number of users.
    LowerBound { users_term: usize },
    Integer(IntegerAllocation),
    /// Memory sharing between two adjacent integer allocations.
    Shared {
        low: IntegerAllocation,
        high: IntegerAllocation,
        weight_high: f64,
    },
    Fractional(FractionalAllocation),
    /// Uncoded caching of the `files` most popular files.
    Uncoded { files: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub cache: f64,
    pub rate: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffCurve {
    pub label: String,
    pub points: Vec<CurvePoint>,
    pub convexified: bool,
}

impl TradeoffCurve {
    pub fn caches(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.cache).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rate).collect()
    }

    /// Linear interpolation between points; outside the span is an error.
    pub fn evaluate(&self, cache: f64) -> Result<f64> {
        let pts = &self.points;
        let (first, last) = (pts[0].cache, pts[pts.len() - 1].cache);
        if !(cache >= first - 1e-12 && cache <= last + 1e-12) {
            return Err(Error::invalid(format!(
                "cache size {cache} outside the curve span [{first}, {last}]"
            )));
        }
        let idx = pts.partition_point(|p| p.cache < cache);
        if idx == 0 {
            return Ok(pts[0].rate);
        }
        if idx == pts.len() {
            return Ok(pts[pts.len() - 1].rate);
        }
        let (a, b) = (&pts[idx - 1], &pts[idx]);
        if b.cache == cache {
            return Ok(b.rate);
        }
        let t = (cache - a.cache) / (b.cache - a.cache);
        Ok(a.rate + t * (b.rate - a.rate))
    }

    /// Lower convex hull of the points (memory sharing), keeping provenance.
    pub fn convexified(&self) -> Result<TradeoffCurve> {
        let raw: Vec<(f64, f64)> = self.points.iter().map(|p| (p.cache, p.rate)).collect();
        let keep = hull_indices(&raw)?;
        let mut points = Vec::with_capacity(keep.len());
        for (idx, rate) in keep {
            let mut p = self.points[idx].clone();
            p.rate = rate;
            points.push(p);
        }
        Ok(TradeoffCurve {
            label: self.label.clone(),
            points,
            convexified: true,
        })
    }

    /// CSV with header `r_c,r_u` and 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r_c,r_u\n");
        for p in &self.points {
            out.push_str(&format_significant(p.cache, 12));
            out.push(',');
            out.push_str(&format_significant(p.rate, 12));
            out.push('\n');
        }
        out
    }
}

/// Indices of the hull vertices (into the input) and their rates after the
/// running minimum. Duplicated abscissae keep the smallest rate.
fn hull_indices(points: &[(f64, f64)]) -> Result<Vec<(usize, f64)>> {
    if points.is_empty() {
        return Err(Error::invalid("cannot convexify an empty point set"));
    }
    if let Some(i) = points
        .iter()
        .position(|(x, y)| !x.is_finite() || !y.is_finite())
    {
        return Err(Error::InvalidInput {
            index: Some(i),
            reason: "point coordinates must be finite".into(),
        });
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
    });
    order.dedup_by(|b, a| points[*a].0 == points[*b].0);

    // Wasting cache is always allowed, so the rate never has to increase.
    let mut sorted: Vec<(usize, f64, f64)> = Vec::with_capacity(order.len());
    let mut floor = f64::INFINITY;
    for idx in order {
        floor = floor.min(points[idx].1);
        sorted.push((idx, points[idx].0, floor));
    }

    let mut hull: Vec<(usize, f64, f64)> = Vec::with_capacity(sorted.len());
    for p in sorted {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let (ax, ay, bx, by) = (a.1 - o.1, a.2 - o.2, p.1 - o.1, p.2 - o.2);
            let cross = ax * by - ay * bx;
            let scale = (ax.hypot(ay) * bx.hypot(by)).max(f64::MIN_POSITIVE);
            if cross <= 1e-12 * scale {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    Ok(hull.into_iter().map(|(i, _, y)| (i, y)).collect())
}

/// Lower convex, non-increasing hull of `(R_c, R_u)` points.
pub fn convexify(points: &[(f64, f64)]) -> Result<TradeoffCurve> {
    let keep = hull_indices(points)?;
    Ok(TradeoffCurve {
        label: "convexified".into(),
        points: keep
            .into_iter()
            .map(|(i, rate)| CurvePoint {
                cache: points[i].0,
                rate,
                provenance: Provenance::Formula,
            })
            .collect(),
        convexified: true,
    })
}

/// Uncoded baseline caching the `R_c` most popular files in full:
/// `Σ_{n > R_c} (1 - (1 - p_n)^L)`.
pub fn hpf_rate(profile: &PopularityProfile, users: usize, cache: f64) -> Result<f64> {
    let n_files = profile.n_files();
    let k = cache.round();
    if (cache - k).abs() > 1e-9 || k < 0.0 || k > n_files as f64 {
        return Err(Error::invalid(format!(
            "uncoded caching needs an integer cache size in [0, {n_files}], got {cache}"
        )));
    }
    Ok(neumaier_sum(
        profile.probs()[k as usize..]
            .iter()
            .map(|&p| coverage(p, users)),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Lower,
    Centralized,
    Decentralized,
    Hpf,
    MnCentralized,
    MnDecentralized,
    OptimalRegime,
    /// Straight line from `(0, R*(0))` to `(N, 0)`.
    MemorySharing,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::Lower,
        Scheme::Centralized,
        Scheme::Decentralized,
        Scheme::Hpf,
        Scheme::MnCentralized,
        Scheme::MnDecentralized,
        Scheme::OptimalRegime,
        Scheme::MemorySharing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Lower => "lower",
            Scheme::Centralized => "centralized",
            Scheme::Decentralized => "decentralized",
            Scheme::Hpf => "hpf",
            Scheme::MnCentralized => "mn_centralized",
            Scheme::MnDecentralized => "mn_decentralized",
            Scheme::OptimalRegime => "optimal_regime",
            Scheme::MemorySharing => "memory_sharing",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = Scheme::ALL.iter().map(|s| s.name()).collect();
                Error::invalid(format!(
                    "unknown scheme '{s}'; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// `0, step, 2·step, …` up to and including `N`.
pub fn cache_grid(n_files: usize, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("grid step must be positive, got {step}")));
    }
    let n = n_files as f64;
    let count = (n / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|k| (k as f64 * step).min(n)).collect();
    if n - grid[grid.len() - 1] > 1e-9 * n.max(1.0) {
        grid.push(n);
    } else {
        let last = grid.len() - 1;
        grid[last] = n;
    }
    Ok(grid)
}

/// Sweeps one scheme over a uniform cache grid.
///
/// Centralized and uncoded points between their native grids (`k/L` and
/// integers) are memory-shared between the two neighbours.
pub fn build_curve(
    scheme: Scheme,
    profile: &PopularityProfile,
    users: usize,
    grid_step: f64,
) -> Result<TradeoffCurve> {
    if users == 0 {
        return Err(Error::invalid("at least one user is required"));
    }
    let n_files = profile.n_files();
    let n = n_files as f64;
    let grid = cache_grid(n_files, grid_step)?;
    let formula = |cache: f64, rate: f64| CurvePoint {
        cache,
        rate,
        provenance: Provenance::Formula,
    };

    let points: Vec<CurvePoint> = match scheme {
        Scheme::Lower => {
            let eval = LowerBoundEvaluator::new(profile, users)?;
            grid.par_iter()
                .map(|&x| {
                    let b = eval.evaluate(x)?;
                    Ok(CurvePoint {
                        cache: x,
                        rate: b.rate,
                        provenance: Provenance::LowerBound {
                            users_term: b.argmax_users,
                        },
                    })
                })
                .collect::<Result<_>>()?
        }
        Scheme::Centralized => {
            let path = greedy_path(profile, users)?;
            let last = path.rates.len() - 1;
            grid.iter()
                .map(|&x| {
                    let scaled = x * users as f64;
                    let near = scaled.round();
                    if (scaled - near).abs() <= 1e-9 {
                        let s = (near as usize).min(last);
                        return CurvePoint {
                            cache: x,
                            rate: path.rates[s],
                            provenance: Provenance::Integer(path.allocation_at(s)),
                        };
                    }
                    let lo = (scaled.floor() as usize).min(last - 1);
                    let w = scaled - lo as f64;
                    CurvePoint {
                        cache: x,
                        rate: (1.0 - w) * path.rates[lo] + w * path.rates[lo + 1],
                        provenance: Provenance::Shared {
                            low: path.allocation_at(lo),
                            high: path.allocation_at(lo + 1),
                            weight_high: w,
                        },
                    }
                })
                .collect()
        }
        Scheme::Decentralized => grid
            .par_iter()
            .map(|&x| {
                let s = kkt_optimize(profile, users, x)?;
                Ok(CurvePoint {
                    cache: x,
                    rate: s.rate,
                    provenance: Provenance::Fractional(s.allocation),
                })
            })
            .collect::<Result<_>>()?,
        Scheme::Hpf => {
            let tail: Vec<f64> = {
                let cov: Vec<f64> = profile.probs().iter().map(|&p| coverage(p, users)).collect();
                let mut t = vec![0.0; n_files + 1];
                for k in (0..n_files).rev() {
                    t[k] = t[k + 1] + cov[k];
                }
                t
            };
            grid.iter()
                .map(|&x| {
                    let k = x.floor().min(n - 1.0).max(0.0) as usize;
                    let w = (x - k as f64).clamp(0.0, 1.0);
                    let (rate, files) = if w <= 1e-9 {
                        (tail[k], k)
                    } else if w >= 1.0 - 1e-9 {
                        (tail[k + 1], k + 1)
                    } else {
                        return formula(x, (1.0 - w) * tail[k] + w * tail[k + 1]);
                    };
                    CurvePoint {
                        cache: x,
                        rate,
                        provenance: Provenance::Uncoded { files },
                    }
                })
                .collect()
        }
        Scheme::MnCentralized => grid
            .iter()
            .map(|&x| formula(x, mn_centralized_rate(n_files, users, x)))
            .collect(),
        Scheme::MnDecentralized => grid
            .iter()
            .map(|&x| formula(x, mn_worst_case(n_files, users, x).rate))
            .collect(),
        Scheme::OptimalRegime => {
            let start = high_cache_optimal(profile, users, n)?.regime_start.max(0.0);
            let mut xs: Vec<f64> = grid.iter().copied().filter(|&x| x > start).collect();
            xs.insert(0, start);
            xs.iter()
                .map(|&x| Ok(formula(x, high_cache_optimal(profile, users, x)?.rate)))
                .collect::<Result<_>>()?
        }
        Scheme::MemorySharing => {
            let r0 = profile.expected_distinct(users);
            grid.iter().map(|&x| formula(x, r0 * (1.0 - x / n))).collect()
        }
    };

    Ok(TradeoffCurve {
        label: scheme.name().into(),
        points,
        convexified: false,
    })
}

/// Uniform-replication centralized rate `(L - t)/(1 + t)` with `t = L R_c / N`,
/// memory-shared between integer `t`.
pub fn mn_centralized_rate(n_files: usize, users: usize, cache: f64) -> f64 {
    let l = users as f64;
    let t = (l * cache / n_files as f64).clamp(0.0, l);
    let at = |k: f64| (l - k) / (1.0 + k);
    let lo = t.floor();
    if t - lo <= 1e-12 {
        return at(lo);
    }
    let w = t - lo;
    (1.0 - w) * at(lo) + w * at(lo + 1.0)
}

/// Result of a gap certificate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub n: usize,
    pub l: usize,
    pub max_ratio: f64,
    pub argmax_rc: f64,
    pub certified_bound: f64,
}

impl GapReport {
    /// Whether the sweep stays within the certified bound
    /// (`≤ 4` for the ergodic model, `< 4.7` for the static one).
    pub fn holds(&self) -> bool {
        if self.certified_bound == ERGODIC_GAP {
            self.max_ratio <= ERGODIC_GAP
        } else {
            self.max_ratio < self.certified_bound
        }
    }
}

pub const ERGODIC_GAP: f64 = 4.0;
pub const STATIC_GAP: f64 = 4.7;

/// Default number of uniform grid points per gap sweep.
pub const DEFAULT_GAP_GRID: usize = 10_000;

/// `{k N / points : 0 ≤ k < points}` merged with the given corner points.
fn gap_grid(n_files: usize, points: usize, corners: impl Iterator<Item = f64>) -> Vec<f64> {
    let n = n_files as f64;
    let points = points.max(1);
    let mut xs: Vec<f64> = (0..points).map(|k| n * k as f64 / points as f64).collect();
    xs.extend(corners.filter(|&w| (0.0..n).contains(&w)));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn max_ratio(xs: &[f64], upper: &[f64], lower: &[f64]) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for ((&x, &u), &l) in xs.iter().zip(upper).zip(lower) {
        if l <= 0.0 {
            continue;
        }
        let ratio = u / l;
        if ratio > best.0 {
            best = (ratio, x);
        }
    }
    best
}

/// Convex hull of `(0, R0)` and `h(x) = (N - x)/(1 + x(1 - 1/N))` on `[0, N]`.
#[derive(Debug, Clone, Copy)]
pub struct DecentralizedEnvelope {
    n: f64,
    r0: f64,
    tangent: f64,
    tangent_rate: f64,
}

impl DecentralizedEnvelope {
    pub fn new(n_files: usize, users: usize) -> Self {
        let n = n_files as f64;
        let r0 = n * (1.0 - pow_complement(1.0 / n, users));
        let c = 1.0 - 1.0 / n;
        let h = |x: f64| (n - x) / (1.0 + x * c);
        let dh = |x: f64| -(1.0 + n * c) / ((1.0 + x * c) * (1.0 + x * c));
        // `h - R0 - x h'` is decreasing because `h` is convex.
        let phi = |x: f64| h(x) - r0 - x * dh(x);
        let (tangent, tangent_rate) = if phi(n) >= 0.0 {
            (n, 0.0)
        } else {
            let (mut lo, mut hi) = (0.0f64, n);
            loop {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if phi(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (hi, h(hi))
        };
        Self {
            n,
            r0,
            tangent,
            tangent_rate,
        }
    }

    pub fn zero_cache_rate(&self) -> f64 {
        self.r0
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        if x < self.tangent {
            self.r0 + x * (self.tangent_rate - self.r0) / self.tangent
        } else {
            (self.n - x) / (1.0 + x * (1.0 - 1.0 / self.n))
        }
    }
}

/// Worst ratio of the decentralized envelope to the lower bound under
/// uniform popularity, over corner points plus `grid_points` uniform points
/// on `[0, N)`.
pub fn gap_ergodic(n_files: usize, users: usize, grid_points: usize) -> Result<GapReport> {
    let corners = corner_points(n_files, users, CornerMode::Ergodic)?;
    let xs = gap_grid(n_files, grid_points, corners.cache_values());
    let env = DecentralizedEnvelope::new(n_files, users);
    let upper: Vec<f64> = xs.iter().map(|&x| env.evaluate(x)).collect();
    let lower: Vec<f64> = xs
        .iter()
        .map(|&x| uniform_lower_bound(n_files, users, x))
        .collect::<Result<_>>()?;
    let (max_ratio, argmax_rc) = max_ratio(&xs, &upper, &lower);
    Ok(GapReport {
        n: n_files,
        l: users,
        max_ratio,
        argmax_rc,
        certified_bound: ERGODIC_GAP,
    })
}

/// One abscissa of the static bound chain `lower ≤ achievable ≤ upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainPoint {
    pub r_c: f64,
    pub lower: f64,
    pub achievable: f64,
    pub upper: f64,
}

fn upper_envelope_point(n_files: usize, users: usize, x: f64) -> f64 {
    let n = n_files as f64;
    if x <= 0.0 {
        return users.min(n_files) as f64;
    }
    (n - x) * (1.0 / x).min(1.0)
}

fn achievable_point(n_files: usize, users: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return users.min(n_files) as f64;
    }
    mn_worst_case(n_files, users, x).rate
}

/// Static bound chain on the given abscissae: relaxed lower bound, the
/// convexified symmetric decentralized worst case, and the convexified
/// simple upper envelope. Both upper curves are hulls of their samples on
/// `xs`, anchored at `min{L, N}` for zero cache.
pub fn static_bound_chain(n_files: usize, users: usize, xs: &[f64]) -> Result<Vec<ChainPoint>> {
    let mut xs = xs.to_vec();
    xs.push(0.0);
    xs.push(n_files as f64);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let hull_on = |f: &dyn Fn(f64) -> f64| -> Result<TradeoffCurve> {
        convexify(&xs.iter().map(|&x| (x, f(x))).collect::<Vec<_>>())
    };
    let achievable = hull_on(&|x| achievable_point(n_files, users, x))?;
    let upper = hull_on(&|x| upper_envelope_point(n_files, users, x))?;
    xs.iter()
        .map(|&x| {
            Ok(ChainPoint {
                r_c: x,
                lower: relaxed_lower_bound(n_files, users, x)?,
                achievable: achievable.evaluate(x)?,
                upper: upper.evaluate(x)?,
            })
        })
        .collect()
}

/// Static counterpart of [`gap_ergodic`]. Fails with an invariant violation
/// if the bound chain is out of order anywhere on the grid.
pub fn gap_static(n_files: usize, users: usize, grid_points: usize) -> Result<GapReport> {
    let corners = corner_points(n_files, users, CornerMode::Static)?;
    let xs = gap_grid(n_files, grid_points, corners.cache_values());
    let chain = static_bound_chain(n_files, users, &xs)?;
    for p in &chain {
        let slack = 1e-9 * p.upper.max(1.0);
        if p.lower > p.achievable + slack || p.achievable > p.upper + slack {
            return Err(Error::InvariantViolation(format!(
                "static bound chain out of order at R_c = {} (N = {n_files}, L = {users}): \
                 {} ≤ {} ≤ {} fails",
                p.r_c, p.lower, p.achievable, p.upper
            )));
        }
    }
    let xs: Vec<f64> = chain.iter().map(|p| p.r_c).collect();
    let upper: Vec<f64> = chain.iter().map(|p| p.achievable).collect();
    let lower: Vec<f64> = chain.iter().map(|p| p.lower).collect();
    let (max_ratio, argmax_rc) = max_ratio(&xs, &upper, &lower);
    Ok(GapReport {
        n: n_files,
        l: users,
        max_ratio,
        argmax_rc,
        certified_bound: STATIC_GAP,
    })
}

/// Scalar constants bounding the gap ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapConstants {
    /// `1/(1 - e^{-1})`: ergodic ratio at zero cache with `L > N`.
    pub zero_cache: f64,
    /// `1/(1 - e^{-1/4})`.
    pub quarter: f64,
    /// `ν^ν (1 + ν ln ν/(ν^ν - 1))²` at `ν = 5/4`.
    pub nu: f64,
}

pub fn nu_constant(nu: f64) -> f64 {
    let nn = nu.powf(nu);
    nn * (1.0 + nu * nu.ln() / (nn - 1.0)).powi(2)
}

pub fn gap_constants() -> GapConstants {
    GapConstants {
        zero_cache: 1.0 / (1.0 - (-1.0f64).exp()),
        quarter: 1.0 / (1.0 - (-0.25f64).exp()),
        nu: nu_constant(1.25),
    }
}

/// Ratio extremes on one segment between consecutive corner points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPeak {
    pub from: f64,
    pub to: f64,
    pub endpoint_max: f64,
    pub interior_max: f64,
}

/// Samples the ergodic gap ratio at `samples` interior points of every
/// corner segment, for checking that the maximum sits at an endpoint.
pub fn ergodic_segment_peaks(n_files: usize, users: usize, samples: usize) -> Result<Vec<SegmentPeak>> {
    let corners = corner_points(n_files, users, CornerMode::Ergodic)?;
    let env = DecentralizedEnvelope::new(n_files, users);
    let ratio = |x: f64| -> Result<Option<f64>> {
        let l = uniform_lower_bound(n_files, users, x)?;
        Ok((l > 0.0).then(|| env.evaluate(x) / l))
    };
    let mut ws: Vec<f64> = corners.cache_values().collect();
    ws.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for seg in ws.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let ends = [ratio(a)?, ratio(b)?];
        let endpoint_max = ends.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut interior_max = f64::NEG_INFINITY;
        for k in 1..=samples {
            let x = a + (b - a) * k as f64 / (samples + 1) as f64;
            if let Some(r) = ratio(x)? {
                interior_max = interior_max.max(r);
            }
        }
        out.push(SegmentPeak {
            from: a,
            to: b,
            endpoint_max,
            interior_max,
        });
    }
    Ok(out)
}
