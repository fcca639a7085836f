//! Slab-by-slab exploration of the origin's cluster along a direction.
//!
//! `C_{<=t}` is the cluster of the origin using only vertices of the
//! half-space `H_{<=t} = {<x, w> < tL + 1}`. It is grown incrementally:
//! open edges leading out of `H_{<=t}` are remembered and followed once the
//! half-space reaches their far endpoint.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{band_index, segment_index, slab_of, Direction, LatticePoint};
use crate::growth::{BondSource, LazyBernoulli, VisitSet};
use crate::kmrp::{Atom, StepLaw};
use crate::rng::stream;
use crate::stats::proportion;

#[derive(Debug, Error, PartialEq)]
pub enum ExploreError {
    #[error("sample budget of {budget} exhausted with {accepted} of {wanted} traces accepted")]
    BudgetExhausted { budget: u64, accepted: usize, wanted: usize },
    #[error("need at least {needed} interior pieces, found {found}")]
    InsufficientPieces { needed: usize, found: usize },
}

/// Per-slice record of one exploration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplorationTrace {
    pub direction: Direction,
    pub thickness: u32,
    /// `X_t` for `t = 0, 1, ...`; `None` is the cemetery state.
    pub x: Vec<Option<f64>>,
    /// Number of active segments `N_t`.
    pub n: Vec<u32>,
    /// Pre-renewal times `S_1 < S_2 < ...` (`S_0 = 0` is implicit).
    pub pre_renewals: Vec<i64>,
    pub death_time: Option<i64>,
    pub truncated: bool,
}

/// JSONL form of a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub w: [f64; 2],
    #[serde(rename = "L")]
    pub thickness: u32,
    #[serde(rename = "X")]
    pub x: Vec<Option<f64>>,
    #[serde(rename = "N")]
    pub n: Vec<u32>,
    #[serde(rename = "S")]
    pub s: Vec<i64>,
    pub death_time: Option<i64>,
    pub truncated: bool,
}

impl ExplorationTrace {
    pub fn record(&self) -> TraceRecord {
        TraceRecord {
            w: self.direction.w(),
            thickness: self.thickness,
            x: self.x.clone(),
            n: self.n.clone(),
            s: self.pre_renewals.clone(),
            death_time: self.death_time,
            truncated: self.truncated,
        }
    }

    /// Last slice index recorded.
    pub fn end(&self) -> i64 {
        self.x.len() as i64 - 1
    }

    pub fn alive_at(&self, t: i64) -> bool {
        t >= 0 && (t as usize) < self.x.len() && self.x[t as usize].is_some()
    }
}

/// `S_{k+1} = inf{t >= S_k + 2 : N_t = 1}` with `S_0 = 0`.
pub fn pre_renewal_times(n: &[u32]) -> Vec<i64> {
    let mut out = Vec::new();
    let mut last = 0i64;
    for (t, &nt) in n.iter().enumerate() {
        let t = t as i64;
        if t >= last + 2 && nt == 1 {
            out.push(t);
            last = t;
        }
    }
    out
}

/// A trace together with the explored cluster.
#[derive(Clone, Debug)]
pub struct Exploration {
    pub trace: ExplorationTrace,
    /// Explored vertices with the slab in which they joined.
    pub vertices: Vec<(LatticePoint, i64)>,
    /// Open edges inside the explored cluster, by slab of their later endpoint.
    pub edges_per_slab: Vec<u32>,
}

/// Reusable buffers for explorations over a window of given radius.
pub struct Explorer {
    visited: VisitSet,
    queue: Vec<LatticePoint>,
    pending: Vec<Vec<LatticePoint>>,
}

impl Explorer {
    pub fn new(radius: i32) -> Explorer {
        Explorer {
            visited: VisitSet::new(radius),
            queue: Vec::new(),
            pending: Vec::new(),
        }
    }

    /// Explore up to slice `t_max` (inclusive) or until death. Edge counts
    /// are left empty; see [`Explorer::count_edges`].
    pub fn explore<S: BondSource>(
        &mut self,
        src: &mut S,
        w: &Direction,
        thickness: u32,
        t_max: i64,
    ) -> Exploration {
        self.visited.clear();
        self.pending.iter_mut().for_each(Vec::clear);
        self.pending.resize((t_max + 1) as usize, Vec::new());
        let mut vertices: Vec<(LatticePoint, i64)> = Vec::new();
        let mut xs = Vec::new();
        let mut ns = Vec::new();
        let mut truncated = false;
        let mut death_time = None;
        let mut segs: Vec<i64> = Vec::new();
        for t in 0..=t_max {
            self.queue.clear();
            if t == 0 {
                self.queue.push(LatticePoint::ORIGIN);
            }
            let pend = std::mem::take(&mut self.pending[t as usize]);
            self.queue.extend(pend.iter().copied());
            self.pending[t as usize] = pend;
            let mut best: Option<f64> = None;
            segs.clear();
            let mut head = 0;
            // Seeds may repeat; dedup via the visited set.
            while head < self.queue.len() {
                let v = self.queue[head];
                head += 1;
                if self.visited.contains(v) {
                    continue;
                }
                self.visited.insert(v);
                vertices.push((v, t));
                if band_index(w, thickness, v) == Some(t) {
                    let a = w.across(v);
                    best = Some(best.map_or(a, |b: f64| b.max(a)));
                    segs.push(segment_index(w, thickness, v));
                }
                if !src.interior(v) {
                    truncated = true;
                    continue;
                }
                for (d, u) in v.neighbours().into_iter().enumerate() {
                    if self.visited.contains(u) || !src.is_open(v, d) {
                        continue;
                    }
                    let su = slab_of(w, thickness, u);
                    if su <= t {
                        self.queue.push(u);
                    } else if su <= t_max {
                        self.pending[su as usize].push(u);
                    }
                }
            }
            segs.sort_unstable();
            segs.dedup();
            xs.push(best);
            ns.push(segs.len() as u32);
            if best.is_none() {
                death_time = Some(t);
                break;
            }
        }
        let pre_renewals = pre_renewal_times(&ns);
        Exploration {
            trace: ExplorationTrace {
                direction: *w,
                thickness,
                x: xs,
                n: ns,
                pre_renewals,
                death_time,
                truncated,
            },
            vertices,
            edges_per_slab: Vec::new(),
        }
    }

    /// Fill in `edges_per_slab` for the exploration just made with `src`,
    /// before `src` moves on to another sample.
    pub fn count_edges<S: BondSource>(&self, src: &S, ex: &mut Exploration) {
        ex.edges_per_slab = count_edges(src, &ex.vertices, &self.visited, ex.trace.x.len());
    }

    /// Explore and count edges.
    pub fn explore_full<S: BondSource>(
        &mut self,
        src: &mut S,
        w: &Direction,
        thickness: u32,
        t_max: i64,
    ) -> Exploration {
        let mut ex = self.explore(src, w, thickness, t_max);
        self.count_edges(src, &mut ex);
        ex
    }
}

fn count_edges<S: BondSource>(
    src: &S,
    vertices: &[(LatticePoint, i64)],
    visited: &VisitSet,
    slabs: usize,
) -> Vec<u32> {
    let slab_at: std::collections::HashMap<LatticePoint, i64> = vertices.iter().copied().collect();
    let mut out = vec![0u32; slabs];
    for &(v, sv) in vertices {
        // Right and up edges only, so each edge is seen once.
        for d in 0..2 {
            let u = v.neighbours()[d];
            if visited.contains(u) && src.peek(v, d) == Some(true) {
                let s = sv.max(slab_at[&u]) as usize;
                if s < slabs {
                    out[s] += 1;
                }
            }
        }
    }
    out
}

/// One piece of the cluster between consecutive pre-renewal hyperplanes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceRecord {
    pub index: usize,
    pub start: i64,
    pub length: i64,
    /// `X` displacement over the piece, in units of `L`; `None` when the
    /// piece ends in death.
    pub displacement: Option<f64>,
    pub edges: u32,
    /// `(min x, min y, max x, max y)` of the piece's vertices.
    pub bbox: Option<(i32, i32, i32, i32)>,
    pub terminal: bool,
    pub killed: bool,
}

/// Split an exploration at its pre-renewal times. The final piece runs to
/// the death time, or to the last explored slice if still alive.
pub fn piece_decomposition(ex: &Exploration) -> Vec<PieceRecord> {
    let tr = &ex.trace;
    let mut cuts = vec![0i64];
    cuts.extend(tr.pre_renewals.iter().copied());
    let end = tr.death_time.unwrap_or(tr.end());
    let l = tr.thickness as f64;
    let mut out = Vec::with_capacity(cuts.len());
    for (k, &s) in cuts.iter().enumerate() {
        let (e, terminal) = match cuts.get(k + 1) {
            Some(&e) => (e, false),
            None => (end, true),
        };
        if terminal && e == s && k > 0 {
            // Alive exactly at the last pre-renewal: empty terminal piece.
            if tr.death_time.is_none() {
                break;
            }
        }
        let in_piece = |slab: i64| if k == 0 { slab <= e } else { slab > s && slab <= e };
        let mut bbox: Option<(i32, i32, i32, i32)> = None;
        for &(v, slab) in &ex.vertices {
            if in_piece(slab) {
                bbox = Some(match bbox {
                    None => (v.x, v.y, v.x, v.y),
                    Some((a, b, c, d)) => (a.min(v.x), b.min(v.y), c.max(v.x), d.max(v.y)),
                });
            }
        }
        let edges = ex
            .edges_per_slab
            .iter()
            .enumerate()
            .filter(|&(slab, _)| in_piece(slab as i64))
            .map(|(_, &c)| c)
            .sum();
        let killed = terminal && tr.death_time.is_some();
        let displacement = match (tr.x.get(s as usize).copied().flatten(), tr.x.get(e as usize).copied().flatten()) {
            (Some(a), Some(b)) if !killed => Some((b - a) / l),
            _ => None,
        };
        out.push(PieceRecord {
            index: k,
            start: s,
            length: e - s,
            displacement,
            edges,
            bbox,
            terminal,
            killed,
        });
    }
    out
}

/// Outcome of a rejection-sampled ensemble.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub explorations: Vec<Exploration>,
    pub attempts: u64,
    pub accepted: u64,
}

impl Ensemble {
    /// Acceptance rate with its binomial standard error.
    pub fn acceptance(&self) -> (f64, f64) {
        proportion(self.accepted, self.attempts)
    }

    pub fn traces(&self) -> impl Iterator<Item = &ExplorationTrace> {
        self.explorations.iter().map(|e| &e.trace)
    }
}

/// Parameters of a rejection-sampled exploration ensemble for independent
/// percolation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub p: f64,
    pub direction: Direction,
    pub thickness: u32,
    /// Condition on `X_{n_slices}` alive; 0 means unconditioned, in which
    /// case every exploration runs to death or `max_slices`.
    pub n_slices: u32,
    pub max_slices: u32,
    pub wanted: usize,
    pub budget: u64,
    pub radius: i32,
    pub seed: u64,
    pub chunk: u64,
}

/// Explorations of the origin's cluster conditioned on reaching slice
/// `n_slices`, by exact rejection. Attempts are made in chunks of `chunk`
/// with one random stream per chunk; the first `wanted` accepted traces in
/// chunk order are kept, so results do not depend on thread count.
pub fn conditioned_ensemble(spec: &EnsembleSpec) -> Result<Ensemble, ExploreError> {
    let t_max = if spec.n_slices == 0 { spec.max_slices } else { spec.n_slices } as i64;
    let mut explorations = Vec::with_capacity(spec.wanted);
    let mut attempts = 0u64;
    let mut accepted = 0u64;
    let chunks = spec.budget.div_ceil(spec.chunk);
    let batch = rayon::current_num_threads().max(1) as u64 * 4;
    let mut c0 = 0u64;
    while c0 < chunks && explorations.len() < spec.wanted {
        let c1 = (c0 + batch).min(chunks);
        let results: Vec<(u64, Vec<(u64, Exploration)>)> = (c0..c1)
            .into_par_iter()
            .map(|c| {
                let n = spec.chunk.min(spec.budget - c * spec.chunk);
                let mut src = LazyBernoulli::new(spec.p, spec.radius, stream(spec.seed, c));
                let mut ex = Explorer::new(spec.radius);
                let mut kept = Vec::new();
                for i in 0..n {
                    src.next_sample();
                    let mut e = ex.explore(&mut src, &spec.direction, spec.thickness, t_max);
                    if spec.n_slices == 0 || e.trace.alive_at(t_max) {
                        ex.count_edges(&src, &mut e);
                        kept.push((i, e));
                    }
                }
                (n, kept)
            })
            .collect();
        for (n, kept) in results {
            if explorations.len() >= spec.wanted {
                break;
            }
            let mut used = n;
            for (i, e) in kept {
                explorations.push(e);
                accepted += 1;
                if explorations.len() == spec.wanted {
                    used = i + 1;
                    break;
                }
            }
            attempts += used;
        }
        c0 = c1;
    }
    if explorations.len() < spec.wanted {
        return Err(ExploreError::BudgetExhausted {
            budget: spec.budget,
            accepted: explorations.len(),
            wanted: spec.wanted,
        });
    }
    Ok(Ensemble {
        explorations,
        attempts,
        accepted,
    })
}

/// Cone-exit probabilities: for each `k`, the fraction of explorations whose
/// cluster leaves the cone of aperture `alpha` with apex `-k L w`.
pub fn cone_stats(explorations: &[Exploration], alpha: f64, ks: &[u32]) -> Vec<(u32, u64, u64)> {
    // Smallest apex offset a with the whole cluster in the cone at -a w.
    let needed: Vec<f64> = explorations
        .iter()
        .map(|ex| {
            let w = ex.trace.direction;
            ex.vertices
                .iter()
                .map(|&(v, _)| w.across(v).abs() / alpha - w.along(v))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    ks.iter()
        .map(|&k| {
            let l = explorations.first().map(|e| e.trace.thickness).unwrap_or(1) as f64;
            let exits = needed.iter().filter(|&&a| a > k as f64 * l).count() as u64;
            (k, exits, explorations.len() as u64)
        })
        .collect()
}

/// Gap statistics between consecutive pre-renewals, as discrete-time
/// survival data: a gap either ends at a pre-renewal or is censored by the
/// end of the explored window.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GapData {
    /// `(length, observed)`; `observed = false` for censored gaps.
    pub gaps: Vec<(i64, bool)>,
}

/// Gaps `S_{k+1} - S_k` for `k >= 1` among pre-renewals up to `horizon`.
/// A trace alive at the horizon contributes its open interval after the
/// last pre-renewal as a censored gap.
pub fn gap_data<'a, I: IntoIterator<Item = &'a ExplorationTrace>>(traces: I, horizon: i64) -> GapData {
    let mut gaps = Vec::new();
    for tr in traces {
        let s: Vec<i64> = tr.pre_renewals.iter().copied().filter(|&t| t <= horizon).collect();
        for w in s.windows(2) {
            gaps.push((w[1] - w[0], true));
        }
        if let Some(&last) = s.last() {
            if tr.alive_at(horizon) && horizon > last {
                gaps.push((horizon - last, false));
            }
        }
    }
    GapData { gaps }
}

/// Constant-hazard (geometric tail) fit on gaps of length at least `r0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub r0: i64,
    /// Per-step hazard `P[gap = r | gap >= r]`.
    pub hazard: f64,
    pub hazard_stderr: f64,
    /// Exponential rate `-log(1 - hazard)`.
    pub rate: f64,
    pub rate_stderr: f64,
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    /// `(r, at risk, events)` rows used in the test.
    pub table: Vec<(i64, u64, u64)>,
}

/// Test that the hazard of the gap law is constant from `r0` on: under a
/// geometric tail the event counts at each `r`, given the number at risk,
/// are independent binomials with a common rate. Rows with fewer than
/// `min_expected` expected events or non-events are pooled into the last row.
pub fn tail_fit(data: &GapData, r0: i64, min_expected: f64) -> Option<TailFit> {
    let r_max = data.gaps.iter().map(|g| g.0).max()?;
    let mut rows: Vec<(i64, u64, u64)> = Vec::new();
    for r in r0..=r_max {
        let at_risk = data.gaps.iter().filter(|g| g.0 >= r).count() as u64;
        let events = data.gaps.iter().filter(|g| g.0 == r && g.1).count() as u64;
        if at_risk > 0 {
            rows.push((r, at_risk, events));
        }
    }
    let n: u64 = rows.iter().map(|r| r.1).sum();
    let d: u64 = rows.iter().map(|r| r.2).sum();
    if n == 0 || d == 0 {
        return None;
    }
    let h = d as f64 / n as f64;
    // Pool sparse rows at the end of the table.
    let mut cells: Vec<(u64, u64)> = Vec::new();
    let (mut na, mut da) = (0u64, 0u64);
    for &(_, nr, dr) in rows.iter() {
        na += nr;
        da += dr;
        let e = na as f64 * h;
        if e >= min_expected && na as f64 - e >= min_expected {
            cells.push((na, da));
            na = 0;
            da = 0;
        }
    }
    if na > 0 {
        match cells.last_mut() {
            Some(c) => {
                c.0 += na;
                c.1 += da;
            }
            None => cells.push((na, da)),
        }
    }
    let chi2: f64 = cells
        .iter()
        .map(|&(nr, dr)| {
            let e = nr as f64 * h;
            (dr as f64 - e).powi(2) / (e * (1.0 - h))
        })
        .sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 { 1.0 } else { crate::stats::chi_square_sf(chi2, dof as f64) };
    let hazard_stderr = (h * (1.0 - h) / n as f64).sqrt();
    Some(TailFit {
        r0,
        hazard: h,
        hazard_stderr,
        rate: -(1.0 - h).ln(),
        rate_stderr: hazard_stderr / (1.0 - h),
        chi2,
        dof,
        p_value,
        table: rows,
    })
}

/// Empirical single-step law from explorations. Interior pieces (those
/// starting at a pre-renewal `S_k`, `k >= 1`) give the step atoms; a piece
/// that ends in death counts as killed; pieces cut off by the end of the
/// window are dropped. First pieces give the initial law.
pub fn empirical_step_law(
    explorations: &[Exploration],
    x_lattice: f64,
    min_pieces: usize,
) -> Result<StepLaw, ExploreError> {
    use std::collections::BTreeMap;
    let bin = |x: f64| (x / x_lattice).round() as i64;
    let mut interior: BTreeMap<(i64, i64), u64> = BTreeMap::new();
    let mut initial: BTreeMap<(i64, i64), u64> = BTreeMap::new();
    let mut killed = 0u64;
    let mut finished = 0u64;
    let mut first_total = 0u64;
    let mut first_censored = 0u64;
    for ex in explorations {
        for piece in piece_decomposition(ex) {
            let complete = !piece.terminal;
            if piece.index == 0 {
                if complete {
                    let dx = piece.displacement.expect("complete piece has displacement");
                    *initial.entry((piece.length, bin(dx))).or_default() += 1;
                    first_total += 1;
                } else if piece.killed {
                    first_total += 1;
                } else {
                    first_censored += 1;
                }
                continue;
            }
            if complete {
                let dx = piece.displacement.expect("complete piece has displacement");
                *interior.entry((piece.length, bin(dx))).or_default() += 1;
                finished += 1;
            } else if piece.killed {
                killed += 1;
            }
        }
    }
    let _ = first_censored;
    let total = finished + killed;
    if (finished as usize) < min_pieces {
        return Err(ExploreError::InsufficientPieces {
            needed: min_pieces,
            found: finished as usize,
        });
    }
    let to_atoms = |m: &BTreeMap<(i64, i64), u64>, denom: u64| -> Vec<Atom> {
        m.iter()
            .map(|(&(tau, k), &c)| Atom {
                tau: tau as u32,
                x: k as f64 * x_lattice,
                prob: c as f64 / denom as f64,
            })
            .collect()
    };
    Ok(StepLaw {
        kappa: killed as f64 / total as f64,
        initial: to_atoms(&initial, first_total.max(1)),
        interior: to_atoms(&interior, total),
        tail_rate: None,
        x_lattice,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bond source with a fixed set of open edges and an unbounded domain.
    struct Fixed(std::collections::HashSet<(LatticePoint, usize)>);

    impl Fixed {
        fn path(points: &[LatticePoint]) -> Fixed {
            let mut s = std::collections::HashSet::new();
            for w in points.windows(2) {
                let (a, b) = (w[0], w[1]);
                let d = a.neighbours().iter().position(|&u| u == b).unwrap();
                s.insert((a, d));
                s.insert((b, (d + 2) % 4));
            }
            Fixed(s)
        }
    }

    impl BondSource for Fixed {
        fn is_open(&mut self, a: LatticePoint, dir: usize) -> bool {
            self.0.contains(&(a, dir))
        }
        fn peek(&self, a: LatticePoint, dir: usize) -> Option<bool> {
            Some(self.0.contains(&(a, dir)))
        }
        fn interior(&self, a: LatticePoint) -> bool {
            a.linf_norm() < 50
        }
    }

    #[test]
    fn closed_configuration_dies_at_one() {
        let mut src = Fixed(Default::default());
        let ex = Explorer::new(60).explore_full(&mut src, &Direction::e1(), 3, 10);
        assert_eq!(ex.trace.x, vec![Some(0.0), None]);
        assert_eq!(ex.trace.n, vec![1, 0]);
        assert_eq!(ex.trace.death_time, Some(1));
        assert!(ex.trace.pre_renewals.is_empty());
    }

    #[test]
    fn straight_path() {
        let l = 4;
        let pts: Vec<LatticePoint> = (0..=3 * l).map(|x| LatticePoint::new(x, 0)).collect();
        let mut src = Fixed::path(&pts);
        let ex = Explorer::new(60).explore_full(&mut src, &Direction::e1(), l as u32, 10);
        assert_eq!(&ex.trace.x[..4], &[Some(0.0); 4]);
        assert_eq!(&ex.trace.n[1..4], &[1, 1, 1]);
        assert_eq!(ex.trace.pre_renewals, vec![2]);
        assert_eq!(ex.trace.death_time, Some(4));
        let pieces = piece_decomposition(&ex);
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces.iter().map(|p| p.length).sum::<i64>(), 4);
        assert_eq!(pieces[0].edges + pieces[1].edges, 3 * l as u32);
    }

    #[test]
    fn detour_outside_halfspace_is_not_used_early() {
        // 0 -> (0,1) -> (1,1) -> (2,1) -> (2,0) -> (1,0): the vertex (1,0) is
        // reached only through x = 2, i.e. not inside H_{<=1} for L = 1.
        let pts = [
            LatticePoint::new(0, 0),
            LatticePoint::new(0, 1),
            LatticePoint::new(1, 1),
            LatticePoint::new(2, 1),
            LatticePoint::new(2, 0),
            LatticePoint::new(1, 0),
        ];
        let mut src = Fixed::path(&pts);
        let ex = Explorer::new(60).explore_full(&mut src, &Direction::e1(), 1, 5);
        assert_eq!(ex.trace.x[1], Some(1.0));
        assert_eq!(ex.trace.n[1], 1);
        let slab_of_10 = ex.vertices.iter().find(|v| v.0 == LatticePoint::new(1, 0)).unwrap().1;
        assert_eq!(slab_of_10, 2);
    }

    #[test]
    fn spacing_rule() {
        assert_eq!(pre_renewal_times(&[1, 1, 1, 1, 1, 1]), vec![2, 4]);
        assert_eq!(pre_renewal_times(&[1, 2, 1, 1, 3, 1]), vec![2, 5]);
        assert!(pre_renewal_times(&[1, 0]).is_empty());
    }

    #[test]
    fn constant_hazard_is_accepted() {
        // Geometric gaps with hazard 1/2 from r = 2 on, exact expected counts.
        let mut gaps = Vec::new();
        let mut at = 1u64 << 16;
        for r in 2..18 {
            let d = at / 2;
            for _ in 0..d {
                gaps.push((r, true));
            }
            at -= d;
        }
        let fit = tail_fit(&GapData { gaps }, 2, 5.0).unwrap();
        assert!((fit.hazard - 0.5).abs() < 1e-3);
        assert!(fit.p_value > 0.5);
    }
}
