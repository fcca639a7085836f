//! Lazy bond sources and Leath-style growth of the origin's cluster.
//!
//! For independent percolation an edge is sampled the first time the
//! growth inspects it and memoized, so every edge is drawn at most once and
//! the explored cluster has exactly the law of the cluster of the origin.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Direction, LatticePoint};
use crate::graph::{BondConfig, FiniteGraph};
use crate::rng::{stream, Coin, StreamRng};

/// Source of edge states around the origin, queried by exploration code.
pub trait BondSource {
    /// Whether the edge between `a` and its neighbour `a + step` is open.
    /// `dir` indexes [`LatticePoint::neighbours`] (right, up, left, down).
    fn is_open(&mut self, a: LatticePoint, dir: usize) -> bool;
    /// State of an edge if it is already known, without drawing it.
    fn peek(&self, a: LatticePoint, dir: usize) -> Option<bool>;
    /// Whether `a` is a vertex of the domain that may be expanded.
    fn interior(&self, a: LatticePoint) -> bool;
}

/// Square window `[-radius, radius]^2` with stamp-based memo arrays, reused
/// across samples without clearing.
pub struct LazyBernoulli {
    radius: i32,
    side: usize,
    coin: Coin,
    rng: StreamRng,
    epoch: u32,
    // Per vertex: stamp of the last epoch its right / up edge was drawn.
    h_stamp: Vec<u32>,
    v_stamp: Vec<u32>,
    h_open: Vec<bool>,
    v_open: Vec<bool>,
}

impl LazyBernoulli {
    pub fn new(p: f64, radius: i32, rng: StreamRng) -> LazyBernoulli {
        let side = (2 * radius + 1) as usize;
        LazyBernoulli {
            radius,
            side,
            coin: Coin::new(p),
            rng,
            epoch: 1,
            h_stamp: vec![0; side * side],
            v_stamp: vec![0; side * side],
            h_open: vec![false; side * side],
            v_open: vec![false; side * side],
        }
    }

    /// Forget all sampled edges; the next queries draw fresh states.
    pub fn next_sample(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.h_stamp.fill(0);
            self.v_stamp.fill(0);
            self.epoch = 1;
        }
    }

    pub fn radius(&self) -> i32 {
        self.radius
    }

    #[inline]
    fn cell(&self, a: LatticePoint) -> usize {
        (a.y + self.radius) as usize * self.side + (a.x + self.radius) as usize
    }
}

impl BondSource for LazyBernoulli {
    #[inline]
    fn is_open(&mut self, a: LatticePoint, dir: usize) -> bool {
        // Canonicalize to the right/up edge of the lower-left endpoint.
        let (base, horizontal) = match dir {
            0 => (a, true),
            1 => (a, false),
            2 => (LatticePoint::new(a.x - 1, a.y), true),
            _ => (LatticePoint::new(a.x, a.y - 1), false),
        };
        let i = self.cell(base);
        let (stamp, open) = if horizontal {
            (&mut self.h_stamp, &mut self.h_open)
        } else {
            (&mut self.v_stamp, &mut self.v_open)
        };
        if stamp[i] != self.epoch {
            stamp[i] = self.epoch;
            open[i] = self.coin.flip(&mut self.rng);
        }
        open[i]
    }

    fn peek(&self, a: LatticePoint, dir: usize) -> Option<bool> {
        let (base, horizontal) = match dir {
            0 => (a, true),
            1 => (a, false),
            2 => (LatticePoint::new(a.x - 1, a.y), true),
            _ => (LatticePoint::new(a.x, a.y - 1), false),
        };
        if base.x.abs() > self.radius || base.y.abs() > self.radius {
            return None;
        }
        let i = self.cell(base);
        let (stamp, open) = if horizontal {
            (&self.h_stamp, &self.h_open)
        } else {
            (&self.v_stamp, &self.v_open)
        };
        (stamp[i] == self.epoch).then(|| open[i])
    }

    #[inline]
    fn interior(&self, a: LatticePoint) -> bool {
        a.x.abs() < self.radius && a.y.abs() < self.radius
    }
}

/// A fixed configuration on a finite graph, viewed as a bond source.
/// Vertices on the graph boundary are not expanded.
pub struct ConfigSource<'a> {
    graph: &'a FiniteGraph,
    config: &'a BondConfig,
    offset: LatticePoint,
    edge_at: HashMap<(LatticePoint, bool), usize>,
}

impl<'a> ConfigSource<'a> {
    /// `offset` is the graph vertex that plays the role of the origin.
    pub fn new(graph: &'a FiniteGraph, config: &'a BondConfig, offset: LatticePoint) -> Self {
        let edge_at = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(k, e)| {
                (
                    (e.endpoint, e.orientation == crate::geometry::Orientation::Horizontal),
                    k,
                )
            })
            .collect();
        ConfigSource {
            graph,
            config,
            offset,
            edge_at,
        }
    }
}

impl BondSource for ConfigSource<'_> {
    fn is_open(&mut self, a: LatticePoint, dir: usize) -> bool {
        self.peek(a, dir).unwrap_or(false)
    }

    fn peek(&self, a: LatticePoint, dir: usize) -> Option<bool> {
        let a = LatticePoint::new(a.x + self.offset.x, a.y + self.offset.y);
        let key = match dir {
            0 => (a, true),
            1 => (a, false),
            2 => (LatticePoint::new(a.x - 1, a.y), true),
            _ => (LatticePoint::new(a.x, a.y - 1), false),
        };
        Some(
            self.edge_at
                .get(&key)
                .map(|&k| self.config.get(k))
                .unwrap_or(false),
        )
    }

    fn interior(&self, a: LatticePoint) -> bool {
        let a = LatticePoint::new(a.x + self.offset.x, a.y + self.offset.y);
        self.graph
            .vertex_index(a)
            .map(|v| !self.graph.is_boundary(v))
            .unwrap_or(false)
    }
}

/// Cluster of the origin, grown breadth first. Returns the vertices in
/// discovery order and whether the growth hit the edge of the domain.
pub fn grow_cluster<S: BondSource>(src: &mut S, out: &mut Vec<LatticePoint>, seen: &mut VisitSet) -> bool {
    out.clear();
    seen.clear();
    out.push(LatticePoint::ORIGIN);
    seen.insert(LatticePoint::ORIGIN);
    let mut truncated = false;
    let mut head = 0;
    while head < out.len() {
        let v = out[head];
        head += 1;
        if !src.interior(v) {
            truncated = true;
            continue;
        }
        for (d, u) in v.neighbours().into_iter().enumerate() {
            if !seen.contains(u) && src.is_open(v, d) {
                seen.insert(u);
                out.push(u);
            }
        }
    }
    truncated
}

/// Visited-vertex set over a square window, cleared in O(1) by stamping.
pub struct VisitSet {
    radius: i32,
    side: usize,
    epoch: u32,
    stamp: Vec<u32>,
}

impl VisitSet {
    pub fn new(radius: i32) -> VisitSet {
        let side = (2 * radius + 1) as usize;
        VisitSet {
            radius,
            side,
            epoch: 1,
            stamp: vec![0; side * side],
        }
    }

    pub fn clear(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
    }

    #[inline]
    fn cell(&self, a: LatticePoint) -> Option<usize> {
        if a.x.abs() > self.radius || a.y.abs() > self.radius {
            return None;
        }
        Some((a.y + self.radius) as usize * self.side + (a.x + self.radius) as usize)
    }

    #[inline]
    pub fn contains(&self, a: LatticePoint) -> bool {
        self.cell(a).map(|i| self.stamp[i] == self.epoch).unwrap_or(false)
    }

    #[inline]
    pub fn insert(&mut self, a: LatticePoint) {
        let i = self.cell(a).expect("vertex inside the window");
        self.stamp[i] = self.epoch;
    }
}

/// What to record while growing many independent clusters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurveySpec {
    pub p: f64,
    pub samples: u64,
    pub radius: i32,
    pub seed: u64,
    /// Targets whose connection to the origin is tallied.
    pub targets: Vec<LatticePoint>,
    /// Directions for which `floor(s * max <x, w>)` over the cluster is
    /// binned, with `s` the matching entry of `level_scale` (1 if absent).
    pub directions: Vec<Direction>,
    #[serde(default)]
    pub level_scale: Vec<f64>,
    pub chunk: u64,
}

impl SurveySpec {
    pub fn scale(&self, d: usize) -> f64 {
        self.level_scale.get(d).copied().unwrap_or(1.0)
    }
}

/// Integer tallies from a survey; merging is exact and order independent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyResult {
    pub samples: u64,
    pub truncated: u64,
    pub target_hits: Vec<u64>,
    /// `reach[d][h]` counts clusters with `floor(s_d * max <x, w_d>) == h`.
    pub reach: Vec<Vec<u64>>,
    pub total_size: u64,
}

impl SurveyResult {
    fn empty(spec: &SurveySpec) -> SurveyResult {
        SurveyResult {
            samples: 0,
            truncated: 0,
            target_hits: vec![0; spec.targets.len()],
            reach: (0..spec.directions.len())
                .map(|d| vec![0; (2.0 * spec.radius as f64 * spec.scale(d)).ceil() as usize + 2])
                .collect(),
            total_size: 0,
        }
    }

    fn merge(mut self, other: SurveyResult) -> SurveyResult {
        self.samples += other.samples;
        self.truncated += other.truncated;
        self.total_size += other.total_size;
        for (a, b) in self.target_hits.iter_mut().zip(&other.target_hits) {
            *a += b;
        }
        for (ra, rb) in self.reach.iter_mut().zip(&other.reach) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
        self
    }

    /// Number of clusters with `s_d * max <x, w_d> >= h` for integer `h >= 0`.
    pub fn reach_at_least(&self, d: usize, h: usize) -> u64 {
        self.reach[d].iter().skip(h).sum()
    }
}

/// Grow `spec.samples` independent clusters at bond density `p`. Chunk `c`
/// uses random stream `c`, so the tallies do not depend on thread count.
pub fn survey(spec: &SurveySpec) -> SurveyResult {
    survey_chunks(spec, 0..spec.samples.div_ceil(spec.chunk))
}

fn survey_chunks(spec: &SurveySpec, chunks: std::ops::Range<u64>) -> SurveyResult {
    chunks
        .into_par_iter()
        .map(|c| {
            let n = spec.chunk.min(spec.samples - c * spec.chunk);
            survey_chunk(spec, c, n)
        })
        .reduce(|| SurveyResult::empty(spec), SurveyResult::merge)
}

/// The survey split into `batches` independent parts of consecutive chunks;
/// merging them gives `survey(spec)`.
pub fn survey_batches(spec: &SurveySpec, batches: u64) -> Vec<SurveyResult> {
    let chunks = spec.samples.div_ceil(spec.chunk);
    let batches = batches.clamp(1, chunks.max(1));
    (0..batches)
        .map(|b| survey_chunks(spec, b * chunks / batches..(b + 1) * chunks / batches))
        .collect()
}

/// Exact merge of survey parts.
pub fn merge_surveys(parts: &[SurveyResult]) -> Option<SurveyResult> {
    parts.iter().cloned().reduce(SurveyResult::merge)
}

fn survey_chunk(spec: &SurveySpec, chunk: u64, n: u64) -> SurveyResult {
    let mut res = SurveyResult::empty(spec);
    let mut src = LazyBernoulli::new(spec.p, spec.radius, stream(spec.seed, chunk));
    let mut seen = VisitSet::new(spec.radius);
    let mut cluster = Vec::new();
    let mut best = vec![f64::NEG_INFINITY; spec.directions.len()];
    let scale: Vec<f64> = (0..spec.directions.len()).map(|d| spec.scale(d)).collect();
    for _ in 0..n {
        src.next_sample();
        let truncated = grow_cluster(&mut src, &mut cluster, &mut seen);
        res.samples += 1;
        res.total_size += cluster.len() as u64;
        if truncated {
            res.truncated += 1;
        }
        for (hit, t) in res.target_hits.iter_mut().zip(&spec.targets) {
            if seen.contains(*t) {
                *hit += 1;
            }
        }
        best.fill(f64::NEG_INFINITY);
        for v in &cluster {
            for (b, d) in best.iter_mut().zip(&spec.directions) {
                let s = d.along(*v);
                if s > *b {
                    *b = s;
                }
            }
        }
        for ((r, b), s) in res.reach.iter_mut().zip(&best).zip(&scale) {
            // The origin gives max >= 0; guard rounding of tilted products.
            let h = (b * s + 1e-9).floor().max(0.0) as usize;
            let top = r.len() - 1;
            r[h.min(top)] += 1;
        }
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_densities() {
        let mut src = LazyBernoulli::new(0.0, 5, stream(0, 0));
        let mut seen = VisitSet::new(5);
        let mut out = Vec::new();
        assert!(!grow_cluster(&mut src, &mut out, &mut seen));
        assert_eq!(out, vec![LatticePoint::ORIGIN]);
        let mut src = LazyBernoulli::new(1.0, 5, stream(0, 0));
        assert!(grow_cluster(&mut src, &mut out, &mut seen));
        // Corners are only adjacent to unexpanded window-edge vertices.
        assert_eq!(out.len(), 121 - 4);
    }

    #[test]
    fn memo_is_symmetric() {
        let mut src = LazyBernoulli::new(0.5, 4, stream(1, 0));
        for x in -3..3 {
            for y in -3..3 {
                let a = LatticePoint::new(x, y);
                assert_eq!(src.is_open(a, 0), src.is_open(LatticePoint::new(x + 1, y), 2));
                assert_eq!(src.is_open(a, 1), src.is_open(LatticePoint::new(x, y + 1), 3));
            }
        }
    }

    #[test]
    fn survey_is_chunk_deterministic() {
        let spec = SurveySpec {
            p: 0.4,
            samples: 10_000,
            radius: 20,
            seed: 3,
            targets: vec![LatticePoint::new(1, 0), LatticePoint::new(3, 0)],
            directions: vec![Direction::e1()],
            level_scale: vec![],
            chunk: 1000,
        };
        let a = survey(&spec);
        let b = survey(&spec);
        assert_eq!(a, b);
        assert_eq!(a.reach[0].iter().sum::<u64>(), 10_000);
        // Neighbour connection probability is at least p.
        let (f, se) = crate::stats::proportion(a.target_hits[0], a.samples);
        assert!(f > 0.4 - 3.0 * se);
        assert!(a.target_hits[1] <= a.target_hits[0] + 200);
    }

    #[test]
    fn level_bins_refine_unit_bins() {
        let diag = Direction::from_angle(std::f64::consts::FRAC_PI_4);
        let spec = SurveySpec {
            p: 0.45,
            samples: 5_000,
            radius: 20,
            seed: 8,
            targets: vec![],
            directions: vec![diag, diag],
            level_scale: vec![1.0, 2f64.sqrt()],
            chunk: 500,
        };
        let r = survey(&spec);
        // max <x, w> >= h  <=>  max (x + y) >= ceil(h sqrt 2).
        for h in 0..12 {
            let k = (h as f64 * 2f64.sqrt()).ceil() as usize;
            assert_eq!(r.reach_at_least(0, h), r.reach_at_least(1, k), "h {h}");
        }
    }

    #[test]
    fn batches_merge_to_the_full_survey() {
        let spec = SurveySpec {
            p: 0.4,
            samples: 4_500,
            radius: 15,
            seed: 4,
            targets: vec![LatticePoint::new(2, 0)],
            directions: vec![Direction::from_angle(0.3)],
            level_scale: vec![20.0],
            chunk: 1000,
        };
        let parts = survey_batches(&spec, 3);
        assert_eq!(parts.len(), 3);
        assert_eq!(merge_surveys(&parts).unwrap(), survey(&spec));
    }
}
