//! Estimators for crossing probabilities, the characteristic length, the
//! one-arm probability, the two-point function and correlation lengths.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{round_to_lattice, Direction, LatticePoint};
use crate::graph::{BondConfig, BoundaryCondition, FiniteGraph, ModelParams};
use crate::growth::{merge_surveys, survey, SurveyResult, SurveySpec};
use crate::rng::stream;
use crate::sampler::{sample_chain, Algorithm, SamplerError, SamplerSpec};
use crate::stats::{mean, proportion, variance, weighted_least_squares};
use crate::unionfind::UnionFind;

/// Tallies with fewer successes are excluded from fits.
pub const MIN_SUCCESSES: u64 = 10;

#[derive(Debug, Error, PartialEq)]
pub enum ObservableError {
    #[error("standard error {stderr:.3e} exceeds the requested cap {cap:.3e}")]
    InsufficientSamples { stderr: f64, cap: f64 },
    #[error("fit needs at least {needed} usable points, found {found}")]
    IllConditioned { needed: usize, found: usize },
    #[error("delta must lie in (0, 1/2), got {0}")]
    InvalidDelta(f64),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// A Monte Carlo probability estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub successes: u64,
}

impl Estimate {
    pub fn from_counts(successes: u64, samples: u64) -> Estimate {
        let (value, stderr) = proportion(successes, samples);
        Estimate {
            value,
            stderr,
            samples,
            successes,
        }
    }

    pub fn exact(value: f64) -> Estimate {
        Estimate {
            value,
            stderr: 0.0,
            samples: 0,
            successes: 0,
        }
    }

    pub fn censored(&self) -> bool {
        self.samples > 0 && self.successes < MIN_SUCCESSES
    }
}

/// How chain-based estimates are produced for q > 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    pub algorithm: Algorithm,
    pub burn_in: u64,
    pub thinning: u64,
    pub samples: u64,
}

/// A length scale in lattice units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthEstimate {
    pub value: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub method: String,
    pub censored: bool,
}

fn left_right_crossed(g: &FiniteGraph, c: &BondConfig, width: u32, x0: i32, uf: &mut UnionFind) -> bool {
    let n = g.num_vertices();
    // Two virtual nodes for the left and right sides.
    uf.reset(n + 2);
    for (v, p) in g.vertices().iter().enumerate() {
        if p.x == x0 {
            uf.union(v, n);
        }
        if p.x == x0 + width as i32 - 1 {
            uf.union(v, n + 1);
        }
    }
    for e in c.iter_open() {
        let (a, b) = g.endpoints(e);
        uf.union(a, b);
    }
    uf.connected(n, n + 1)
}

/// Probability of an open left-right crossing of a `width x height` vertex
/// rectangle. For `q = 1` configurations are drawn exactly; otherwise they
/// come from a chain with boundary condition `bc`.
pub fn crossing_probability_rect(
    width: u32,
    height: u32,
    params: ModelParams,
    bc_wired: bool,
    samples: u64,
    seed: u64,
    chain: Option<&ChainSettings>,
) -> Result<Estimate, ObservableError> {
    if params.p >= 1.0 {
        return Ok(Estimate::exact(1.0));
    }
    let g = FiniteGraph::rectangle(0, 0, width, height);
    let mut uf = UnionFind::new(g.num_vertices() + 2);
    let mut hits = 0u64;
    match chain {
        Some(cs) if params.q != 1.0 => {
            let bc = if bc_wired {
                BoundaryCondition::wired(&g)
            } else {
                BoundaryCondition::free(&g)
            };
            let spec = SamplerSpec {
                algorithm: cs.algorithm,
                sweeps: samples,
                burn_in: cs.burn_in,
                thinning: cs.thinning,
                seed,
                params,
            };
            sample_chain(&g, &bc, &spec, 0, |c| {
                if left_right_crossed(&g, c, width, 0, &mut uf) {
                    hits += 1;
                }
            })?;
        }
        _ => {
            let mut rng = stream(seed, 0);
            let coin = crate::rng::Coin::new(params.p);
            let mut c = BondConfig::closed(g.num_edges());
            for _ in 0..samples {
                for e in 0..c.len() {
                    c.set(e, coin.flip(&mut rng));
                }
                if left_right_crossed(&g, &c, width, 0, &mut uf) {
                    hits += 1;
                }
            }
        }
    }
    Ok(Estimate::from_counts(hits, samples))
}

/// `phi[Cross(Lambda_n)]`: left-right crossing of the box `{-n..n}^2`.
pub fn crossing_probability(
    n: u32,
    params: ModelParams,
    bc_wired: bool,
    samples: u64,
    seed: u64,
    chain: Option<&ChainSettings>,
    stderr_cap: Option<f64>,
) -> Result<Estimate, ObservableError> {
    let est = crossing_probability_rect(2 * n + 1, 2 * n + 1, params, bc_wired, samples, seed, chain)?;
    if let Some(cap) = stderr_cap {
        if est.stderr > cap {
            return Err(ObservableError::InsufficientSamples {
                stderr: est.stderr,
                cap,
            });
        }
    }
    Ok(est)
}

/// Smallest `n` whose crossing probability leaves `[delta, 1 - delta]`,
/// found by doubling and then bisection. Scales above `n_max` are reported
/// as censored.
pub fn characteristic_length(
    params: ModelParams,
    delta: f64,
    n_max: u32,
    samples: u64,
    seed: u64,
    chain: Option<&ChainSettings>,
) -> Result<LengthEstimate, ObservableError> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(ObservableError::InvalidDelta(delta));
    }
    let outside = |n: u32| -> Result<bool, ObservableError> {
        let e = crossing_probability(n, params, false, samples, seed ^ n as u64, chain, None)?;
        Ok(e.value < delta || e.value > 1.0 - delta)
    };
    let mut lo = 0u32;
    let mut hi = 1u32;
    loop {
        if hi > n_max {
            return Ok(LengthEstimate {
                value: n_max as f64,
                stderr: 0.0,
                window: (lo as f64, n_max as f64),
                method: "crossing-doubling".into(),
                censored: true,
            });
        }
        if outside(hi)? {
            break;
        }
        lo = hi;
        hi *= 2;
    }
    // Invariant: lo is inside the window (or zero), hi is outside.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if outside(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(LengthEstimate {
        value: hi as f64,
        stderr: 0.0,
        window: (lo as f64, hi as f64),
        method: "crossing-bisection".into(),
        censored: false,
    })
}

/// `phi[0 <-> boundary of Lambda_R]` for independent percolation by cluster
/// growth.
pub fn one_arm(r: u32, p: f64, samples: u64, seed: u64) -> Estimate {
    if r == 0 {
        return Estimate::exact(1.0);
    }
    let res = survey(&SurveySpec {
        p,
        samples,
        radius: r as i32,
        seed,
        targets: vec![],
        directions: vec![],
        level_scale: vec![],
        chunk: 100_000,
    });
    // With window radius R, growth is truncated exactly when it reaches the
    // boundary of the window.
    Estimate::from_counts(res.truncated, res.samples)
}

/// `phi[0 <-> boundary of Lambda_R]` on `Lambda_{2R}` with boundary
/// condition `bc`, averaged over chain samples.
pub fn one_arm_chain(
    r: u32,
    params: ModelParams,
    bc_wired: bool,
    seed: u64,
    chain: &ChainSettings,
) -> Result<Estimate, ObservableError> {
    if r == 0 {
        return Ok(Estimate::exact(1.0));
    }
    let g = FiniteGraph::centered_box(2 * r);
    let bc = if bc_wired {
        BoundaryCondition::wired(&g)
    } else {
        BoundaryCondition::free(&g)
    };
    let origin = g.vertex_index(LatticePoint::ORIGIN).expect("origin");
    let ring: Vec<usize> = (0..g.num_vertices())
        .filter(|&v| g.vertices()[v].linf_norm() == r as i32)
        .collect();
    let spec = SamplerSpec {
        algorithm: chain.algorithm,
        sweeps: chain.samples,
        burn_in: chain.burn_in,
        thinning: chain.thinning,
        seed,
        params,
    };
    let mut uf = UnionFind::new(g.num_vertices());
    let mut hits = 0;
    sample_chain(&g, &bc, &spec, 0, |c| {
        uf.reset(g.num_vertices());
        for e in c.iter_open() {
            let (a, b) = g.endpoints(e);
            // Only paths inside Lambda_R count.
            if g.vertices()[a].linf_norm() <= r as i32 && g.vertices()[b].linf_norm() <= r as i32 {
                uf.union(a, b);
            }
        }
        if ring.iter().any(|&v| uf.connected(origin, v)) {
            hits += 1;
        }
    })?;
    Ok(Estimate::from_counts(hits, chain.samples))
}

/// Estimates of `G(round(n v))` along one direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPointCurve {
    pub direction: Direction,
    pub points: Vec<(u32, Estimate)>,
}

/// Lattice targets `round(n v)` for each `n`.
pub fn targets(v: &Direction, ns: &[u32]) -> Vec<LatticePoint> {
    let w = v.w();
    ns.iter()
        .map(|&n| round_to_lattice([n as f64 * w[0], n as f64 * w[1]]))
        .collect()
}

/// Two-point curve for independent percolation from a survey that tallied
/// `targets(v, ns)` starting at `offset` in its target list.
pub fn two_point_from_survey(v: &Direction, ns: &[u32], res: &SurveyResult, offset: usize) -> TwoPointCurve {
    TwoPointCurve {
        direction: *v,
        points: ns
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                if n == 0 {
                    (n, Estimate::exact(1.0))
                } else {
                    (n, Estimate::from_counts(res.target_hits[offset + i], res.samples))
                }
            })
            .collect(),
    }
}

/// Two-point curve for independent percolation by cluster growth.
pub fn two_point_curve_growth(v: &Direction, ns: &[u32], p: f64, samples: u64, seed: u64) -> TwoPointCurve {
    let tg = targets(v, ns);
    let radius = tg.iter().map(|t| t.linf_norm()).max().unwrap_or(1) * 2 + 2;
    let res = survey(&SurveySpec {
        p,
        samples,
        radius,
        seed,
        targets: tg,
        directions: vec![],
        level_scale: vec![],
        chunk: 100_000,
    });
    two_point_from_survey(v, ns, &res, 0)
}

/// Two-point curve from a chain on a `side x side` box, averaged over every
/// origin at distance at least `margin` from the box edge (targets included).
/// Standard errors come from batch means over chain samples.
pub fn two_point_curve_chain(
    v: &Direction,
    ns: &[u32],
    params: ModelParams,
    side: u32,
    margin: u32,
    bc_wired: bool,
    seed: u64,
    chain: &ChainSettings,
) -> Result<TwoPointCurve, ObservableError> {
    let g = FiniteGraph::rectangle(0, 0, side, side);
    let bc = if bc_wired {
        BoundaryCondition::wired(&g)
    } else {
        BoundaryCondition::free(&g)
    };
    let tg = targets(v, ns);
    let inside = |p: LatticePoint| {
        let m = margin as i32;
        p.x >= m && p.y >= m && p.x < side as i32 - m && p.y < side as i32 - m
    };
    // Pairs (origin, target index) with both ends in the interior region.
    let mut pairs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); ns.len()];
    for (v0, &o) in g.vertices().iter().enumerate() {
        if !inside(o) {
            continue;
        }
        for (k, t) in tg.iter().enumerate() {
            let x = LatticePoint::new(o.x + t.x, o.y + t.y);
            if inside(x) {
                pairs[k].push((v0, g.vertex_index(x).expect("inside box")));
            }
        }
    }
    let spec = SamplerSpec {
        algorithm: chain.algorithm,
        sweeps: chain.samples,
        burn_in: chain.burn_in,
        thinning: chain.thinning,
        seed,
        params,
    };
    let mut uf = UnionFind::new(g.num_vertices());
    let mut per_sample: Vec<Vec<f64>> = vec![Vec::with_capacity(chain.samples as usize); ns.len()];
    let mut totals = vec![0u64; ns.len()];
    sample_chain(&g, &bc, &spec, 0, |c| {
        uf.reset(g.num_vertices());
        for e in c.iter_open() {
            let (a, b) = g.endpoints(e);
            uf.union(a, b);
        }
        for (k, list) in pairs.iter().enumerate() {
            let hits = list.iter().filter(|&&(a, b)| uf.connected(a, b)).count() as u64;
            totals[k] += hits;
            per_sample[k].push(hits as f64 / list.len().max(1) as f64);
        }
    })?;
    let batches = 50.min(chain.samples as usize).max(2);
    let points = ns
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            if n == 0 {
                return (n, Estimate::exact(1.0));
            }
            let series = &per_sample[k];
            let size = series.len() / batches;
            let bm: Vec<f64> = series.chunks_exact(size.max(1)).take(batches).map(mean).collect();
            let stderr = (variance(&bm) / bm.len() as f64).sqrt();
            (
                n,
                Estimate {
                    value: mean(series),
                    stderr,
                    samples: chain.samples,
                    successes: totals[k],
                },
            )
        })
        .collect();
    Ok(TwoPointCurve {
        direction: *v,
        points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    /// `log G(n) = -n / xi + c`
    None,
    /// `log G(n) = -n / xi - log(n) / 2 + c`
    Oz,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FitWindow {
    /// `[2 xi0, 6 xi0]` around a preliminary uncorrected fit on all points.
    Auto,
    All,
    Range(f64, f64),
}

/// Correlation length fit with residual diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiFit {
    pub xi: LengthEstimate,
    pub intercept: f64,
    /// `log G(n) + n/xi + (1/2) log n - c` (or without the log term) per point.
    pub residuals: Vec<(u32, f64)>,
    /// `max - min` of the residuals over the window.
    pub residual_spread: f64,
    pub correction: Correction,
}

fn usable(curve: &TwoPointCurve) -> Vec<(u32, f64, f64)> {
    curve
        .points
        .iter()
        .filter(|(n, e)| *n > 0 && e.value > 0.0 && !e.censored() && e.stderr > 0.0)
        .map(|(n, e)| (*n, e.value.ln(), e.stderr / e.value))
        .collect()
}

fn fit_points(pts: &[(u32, f64, f64)], correction: Correction, window: (f64, f64)) -> Result<XiFit, ObservableError> {
    if pts.len() < 3 {
        return Err(ObservableError::IllConditioned {
            needed: 3,
            found: pts.len(),
        });
    }
    let design: Vec<Vec<f64>> = pts.iter().map(|&(n, _, _)| vec![1.0, n as f64]).collect();
    let y: Vec<f64> = pts
        .iter()
        .map(|&(n, lg, _)| match correction {
            Correction::None => lg,
            Correction::Oz => lg + 0.5 * (n as f64).ln(),
        })
        .collect();
    let w: Vec<f64> = pts.iter().map(|&(_, _, s)| 1.0 / (s * s)).collect();
    let fit = weighted_least_squares(&design, &y, &w, true).ok_or(ObservableError::IllConditioned {
        needed: 3,
        found: pts.len(),
    })?;
    let slope = fit.coef[1];
    let xi = -1.0 / slope;
    let xi_se = fit.stderr(1) / (slope * slope);
    let residuals: Vec<(u32, f64)> = pts.iter().zip(&fit.residuals).map(|(p, r)| (p.0, *r)).collect();
    let (lo, hi) = residuals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.1), b.max(r.1)));
    Ok(XiFit {
        xi: LengthEstimate {
            value: xi,
            stderr: xi_se,
            window,
            method: match correction {
                Correction::None => "two-point".into(),
                Correction::Oz => "two-point-oz".into(),
            },
            censored: false,
        },
        intercept: fit.coef[0],
        residuals,
        residual_spread: hi - lo,
        correction,
    })
}

/// Weighted least-squares fit of `log G(n)` against `-n/xi (+ -log(n)/2) + c`.
pub fn estimate_xi(curve: &TwoPointCurve, correction: Correction, window: FitWindow) -> Result<XiFit, ObservableError> {
    let pts = usable(curve);
    let (lo, hi) = match window {
        FitWindow::All => (0.0, f64::INFINITY),
        FitWindow::Range(a, b) => (a, b),
        FitWindow::Auto => {
            let pre = fit_points(&pts, Correction::None, (0.0, f64::INFINITY))?;
            (2.0 * pre.xi.value, 6.0 * pre.xi.value)
        }
    };
    let chosen: Vec<_> = pts
        .into_iter()
        .filter(|&(n, _, _)| n as f64 >= lo && n as f64 <= hi)
        .collect();
    fit_points(&chosen, correction, (lo, hi))
}

/// Half-space hitting probabilities `phi[0 <-> {<x, w> >= m L}]` for
/// `m = 0..=m_max`, read off a survey's reach histogram for direction `d`.
/// `thickness` counts histogram bins, which are lattice units unless the
/// survey set a level scale for `d`.
pub fn halfspace_hits(res: &SurveyResult, d: usize, thickness: u32, m_max: u32) -> Vec<Estimate> {
    (0..=m_max)
        .map(|m| {
            if m == 0 {
                Estimate::exact(1.0)
            } else {
                let h = (m * thickness) as usize;
                Estimate::from_counts(res.reach_at_least(d, h), res.samples)
            }
        })
        .collect()
}

/// `phi[0 <-> {<x, w> >= n L}]` by growing independent clusters.
pub fn halfspace_hit(w: &Direction, n: u32, thickness: u32, p: f64, samples: u64, seed: u64) -> Estimate {
    if n == 0 {
        return Estimate::exact(1.0);
    }
    let reach = (n * thickness) as i32;
    let res = survey(&SurveySpec {
        p,
        samples,
        radius: reach + 2,
        seed,
        targets: vec![],
        directions: vec![*w],
        level_scale: vec![],
        chunk: 100_000,
    });
    halfspace_hits(&res, 0, thickness, n)[n as usize]
}

/// Successive slab-survival ratio `r_m = hit(m) / hit(m-1)`. Given survival
/// to slab `m-1`, survival to `m` is a binomial trial, so the ratios of one
/// survey are conditionally independent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRatio {
    pub m: u32,
    pub ratio: f64,
    pub stderr: f64,
    pub trials: u64,
    pub successes: u64,
}

pub fn survival_ratios(hits: &[Estimate]) -> Vec<SurvivalRatio> {
    hits.windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (trials, successes) = if i == 0 {
                (w[1].samples, w[1].successes)
            } else {
                (w[0].successes, w[1].successes)
            };
            let (ratio, stderr) = proportion(successes, trials);
            SurvivalRatio {
                m: i as u32 + 1,
                ratio,
                stderr,
                trials,
                successes,
            }
        })
        .collect()
}

/// A ratio is resolvable when its relative standard error is at most this.
pub const RESOLVABLE_RELATIVE_ERROR: f64 = 0.01;

pub fn resolvable(r: &SurvivalRatio) -> bool {
    r.successes >= MIN_SUCCESSES && r.ratio > 0.0 && r.stderr / r.ratio <= RESOLVABLE_RELATIVE_ERROR
}

/// `zeta` from the survival ratios with index in `[m_lo, m_hi]`: the
/// inverse-variance weighted mean of `log r_m` is `-1/zeta`.
pub fn zeta_from_ratios(ratios: &[SurvivalRatio], m_lo: u32, m_hi: u32) -> Option<LengthEstimate> {
    let sel: Vec<_> = ratios
        .iter()
        .filter(|r| r.m >= m_lo && r.m <= m_hi && r.successes > 0 && r.ratio < 1.0)
        .collect();
    if sel.is_empty() {
        return None;
    }
    // Var(log r) = (1 - r) / (r * trials) for a binomial proportion.
    let (mut sw, mut swy) = (0.0, 0.0);
    for r in &sel {
        let var = (1.0 - r.ratio) / (r.ratio * r.trials as f64);
        sw += 1.0 / var;
        swy += r.ratio.ln() / var;
    }
    let lg = swy / sw;
    let lg_se = (1.0 / sw).sqrt();
    Some(LengthEstimate {
        value: -1.0 / lg,
        stderr: lg_se / (lg * lg),
        window: (m_lo as f64, m_hi as f64),
        method: "halfspace-ratio".into(),
        censored: false,
    })
}

/// Indices of the last (up to) three resolvable ratios among the
/// consecutive run of resolvable ratios starting at `m = 2`.
pub fn last_resolvable_window(ratios: &[SurvivalRatio]) -> Vec<u32> {
    let run: Vec<u32> = ratios
        .iter()
        .filter(|r| r.m >= 2)
        .take_while(|r| resolvable(r))
        .map(|r| r.m)
        .collect();
    run[run.len().saturating_sub(3)..].to_vec()
}

/// `(max - min) / mean` of the ratios with the given indices.
pub fn ratio_spread(ratios: &[SurvivalRatio], window: &[u32]) -> f64 {
    let v: Vec<f64> = ratios.iter().filter(|r| window.contains(&r.m)).map(|r| r.ratio).collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / crate::stats::mean(&v)
}

/// `zeta(p, w)` over the last resolvable window.
pub fn estimate_zeta(hits: &[Estimate]) -> Result<LengthEstimate, ObservableError> {
    let ratios = survival_ratios(hits);
    let window = last_resolvable_window(&ratios);
    match (window.first(), window.last()) {
        (Some(&a), Some(&b)) => Ok(zeta_from_ratios(&ratios, a, b).expect("non-empty selection")),
        _ => Err(ObservableError::IllConditioned { needed: 1, found: 0 }),
    }
}

/// Mean of `ln #{clusters with s max <x, w_d> >= u}` over the bin
/// thresholds `u` in `[h - half, h + half]` (lattice units).
fn smoothed_log_reach(res: &SurveyResult, d: usize, scale: f64, h: f64, half: f64) -> Option<f64> {
    let lo = ((h - half) * scale).ceil().max(0.0) as usize;
    let hi = ((h + half) * scale).floor() as usize;
    let mut acc = 0.0;
    for k in lo..=hi {
        let n = res.reach_at_least(d, k);
        if n < MIN_SUCCESSES {
            return None;
        }
        acc += (n as f64).ln();
    }
    Some(acc / (hi - lo + 1) as f64)
}

/// `zeta` from the two-slab survival ratio `hit(h + 2L) / hit(h)`, averaged
/// geometrically over thresholds `h` in `[h0 - half, h0 + half]`. Averaging
/// over threshold offsets removes the staircase that lattice granularity
/// puts into half-space hits along tilted directions. `parts` are
/// independent batches of one survey binned at `scale` bins per lattice
/// unit; the error is a delete-one-batch jackknife.
pub fn zeta_offset_averaged(
    parts: &[SurveyResult],
    d: usize,
    scale: f64,
    thickness: u32,
    h0: f64,
    half: f64,
) -> Result<LengthEstimate, ObservableError> {
    let l = thickness as f64;
    let zeta = |r: &SurveyResult| -> Option<f64> {
        let a = smoothed_log_reach(r, d, scale, h0, half)?;
        let b = smoothed_log_reach(r, d, scale, h0 + 2.0 * l, half)?;
        Some(2.0 / (a - b))
    };
    let total = merge_surveys(parts).ok_or(ObservableError::IllConditioned { needed: 2, found: 0 })?;
    let value = zeta(&total).ok_or(ObservableError::IllConditioned { needed: 1, found: 0 })?;
    let g = parts.len();
    if g < 2 {
        return Err(ObservableError::IllConditioned { needed: 2, found: g });
    }
    let mut leave_out = Vec::with_capacity(g);
    for i in 0..g {
        let rest: Vec<SurveyResult> = parts.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, r)| r.clone()).collect();
        let r = merge_surveys(&rest).expect("at least one part");
        leave_out.push(zeta(&r).ok_or(ObservableError::IllConditioned { needed: g, found: i })?);
    }
    let m = mean(&leave_out);
    let var = leave_out.iter().map(|z| (z - m).powi(2)).sum::<f64>() * (g as f64 - 1.0) / g as f64;
    Ok(LengthEstimate {
        value,
        stderr: var.sqrt(),
        window: (h0, h0 + 2.0 * l),
        method: "offset_averaged_ratio".into(),
        censored: false,
    })
}

/// One row of `two_point.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPointRow {
    pub run_id: String,
    pub direction: f64,
    pub n: u32,
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// One row of `lengths.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthRow {
    pub run_id: String,
    pub method: String,
    pub value: f64,
    pub stderr: f64,
    pub window: String,
}

impl LengthRow {
    pub fn new(run_id: &str, est: &LengthEstimate) -> LengthRow {
        LengthRow {
            run_id: run_id.to_string(),
            method: if est.censored {
                format!("{}-censored", est.method)
            } else {
                est.method.clone()
            },
            value: est.value,
            stderr: est.stderr,
            window: format!("{}:{}", est.window.0, est.window.1),
        }
    }
}

pub fn two_point_rows(run_id: &str, curve: &TwoPointCurve) -> Vec<TwoPointRow> {
    curve
        .points
        .iter()
        .map(|(n, e)| TwoPointRow {
            run_id: run_id.to_string(),
            direction: curve.direction.angle(),
            n: *n,
            estimate: e.value,
            stderr: e.stderr,
            samples: e.samples,
        })
        .collect()
}
