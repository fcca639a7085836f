//! Exact random-cluster measures on small graphs by full enumeration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{EdgeId, LatticePoint};
use crate::graph::{BondConfig, BoundaryCondition, FiniteGraph, GraphError, ModelParams, Wiring};
use crate::stats::{compensated_sum, log_sum_exp};
use crate::unionfind::UnionFind;

/// Largest edge count accepted for enumeration (2^24 configurations).
pub const MAX_EDGES: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum ExactError {
    #[error("graph has {0} edges, enumeration is capped at {MAX_EDGES}")]
    TooManyEdges(usize),
    #[error("event `{0}` is not increasing")]
    NotIncreasing(String),
    #[error("conditioning event has probability zero")]
    ZeroProbability,
    #[error("conditioning must fix every edge outside the subgraph")]
    IncompleteConditioning,
    #[error("edge {0:?} is not an edge of the graph")]
    UnknownEdge(EdgeId),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// The full law of a random-cluster measure on a small graph.
#[derive(Clone, Debug)]
pub struct ExactMeasure {
    graph: FiniteGraph,
    params: ModelParams,
    bc: BoundaryCondition,
    log_z: f64,
    probs: Vec<f64>,
}

/// Log-weight `o(w) log(p/(1-p)) + k(w^eta) log q` of every configuration,
/// indexed by the bitmask of open edges.
fn log_weights(g: &FiniteGraph, params: ModelParams, wiring: &Wiring) -> Vec<f64> {
    let m = g.num_edges();
    let lp = (params.p / (1.0 - params.p)).ln();
    let lq = params.q.ln();
    let mut out = vec![0.0; 1usize << m];
    let chunk = 1usize << m.min(12);
    out.par_chunks_mut(chunk).enumerate().for_each(|(ci, slice)| {
        let mut base = UnionFind::new(wiring.num_nodes());
        wiring.apply(&mut base);
        let mut uf = base.clone();
        for (i, w) in slice.iter_mut().enumerate() {
            let mask = (ci * chunk + i) as u64;
            uf.clone_from(&base);
            let mut clusters = wiring.num_nodes() - wiring.wired_vertex_count();
            let mut bits = mask;
            while bits != 0 {
                let e = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let (a, b) = g.endpoints(e);
                if uf.union(a, b) {
                    clusters -= 1;
                }
            }
            *w = mask.count_ones() as f64 * lp + clusters as f64 * lq;
        }
    });
    out
}

/// `log Z` of the random-cluster measure with boundary condition `bc`.
pub fn partition_function(
    g: &FiniteGraph,
    params: ModelParams,
    bc: &BoundaryCondition,
) -> Result<f64, ExactError> {
    if g.num_edges() > MAX_EDGES {
        return Err(ExactError::TooManyEdges(g.num_edges()));
    }
    let wiring = Wiring::new(g, bc)?;
    Ok(log_sum_exp(&log_weights(g, params, &wiring)))
}

impl ExactMeasure {
    pub fn new(
        g: &FiniteGraph,
        params: ModelParams,
        bc: &BoundaryCondition,
    ) -> Result<ExactMeasure, ExactError> {
        if g.num_edges() > MAX_EDGES {
            return Err(ExactError::TooManyEdges(g.num_edges()));
        }
        let wiring = Wiring::new(g, bc)?;
        let mut lw = log_weights(g, params, &wiring);
        let log_z = log_sum_exp(&lw);
        lw.par_iter_mut().for_each(|x| *x = (*x - log_z).exp());
        Ok(ExactMeasure {
            graph: g.clone(),
            params,
            bc: bc.clone(),
            log_z,
            probs: lw,
        })
    }

    pub fn graph(&self) -> &FiniteGraph {
        &self.graph
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn boundary_condition(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn log_partition_function(&self) -> f64 {
        self.log_z
    }

    /// Probability of each configuration, indexed by open-edge bitmask.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability_of(&self, config: &BondConfig) -> f64 {
        self.probs[config.mask() as usize]
    }

    /// Probability of an event given as a predicate on the open-edge bitmask.
    pub fn mask_event_probability<F: Fn(u64) -> bool + Sync>(&self, event: F) -> f64 {
        compensated_sum(
            self.probs
                .iter()
                .enumerate()
                .filter(|&(m, _)| event(m as u64))
                .map(|(_, &p)| p),
        )
    }

    pub fn event_probability<F: Fn(&BondConfig) -> bool>(&self, event: F) -> f64 {
        let mut c = BondConfig::closed(self.graph.num_edges());
        let mut acc = crate::stats::NeumaierSum::new();
        for (m, &p) in self.probs.iter().enumerate() {
            c.set_mask(m as u64);
            if event(&c) {
                acc.add(p);
            }
        }
        acc.value()
    }

    /// Probability that each edge is open.
    pub fn edge_marginals(&self) -> Vec<f64> {
        (0..self.graph.num_edges())
            .map(|e| self.mask_event_probability(|m| m >> e & 1 == 1))
            .collect()
    }

    /// Law of the number of open edges.
    pub fn open_count_distribution(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.graph.num_edges() + 1];
        for (m, &p) in self.probs.iter().enumerate() {
            out[(m as u64).count_ones() as usize] += p;
        }
        out
    }

    /// `P[open | rest]` for edge `e` in configuration `config`, from the
    /// ratio of the two configuration weights.
    pub fn conditional_open(&self, e: usize, config: &BondConfig) -> f64 {
        let m = config.mask();
        let open = self.probs[(m | 1 << e) as usize];
        let closed = self.probs[(m & !(1 << e)) as usize];
        open / (open + closed)
    }
}

/// True when `event` is preserved by opening any single closed edge.
pub fn is_increasing<F: Fn(u64) -> bool>(num_edges: usize, event: F) -> bool {
    (0..1u64 << num_edges).all(|m| {
        !event(m) || (0..num_edges).all(|e| m >> e & 1 == 1 || event(m | 1 << e))
    })
}

/// `(phi[A and B], phi[A] phi[B])` for increasing events `A`, `B`.
pub fn fkg_check<A, B>(
    measure: &ExactMeasure,
    a: (&str, A),
    b: (&str, B),
) -> Result<(f64, f64), ExactError>
where
    A: Fn(u64) -> bool + Sync,
    B: Fn(u64) -> bool + Sync,
{
    let m = measure.graph.num_edges();
    if !is_increasing(m, &a.1) {
        return Err(ExactError::NotIncreasing(a.0.to_string()));
    }
    if !is_increasing(m, &b.1) {
        return Err(ExactError::NotIncreasing(b.0.to_string()));
    }
    let pa = measure.mask_event_probability(&a.1);
    let pb = measure.mask_event_probability(&b.1);
    let pab = measure.mask_event_probability(|x| a.1(x) && b.1(x));
    Ok((pab, pa * pb))
}

/// `(phi^fine[A], phi^coarse[A])` for an increasing event `A`. The second
/// value should dominate the first.
pub fn mon_check<A: Fn(u64) -> bool + Sync>(
    g: &FiniteGraph,
    params: ModelParams,
    fine: &BoundaryCondition,
    coarse: &BoundaryCondition,
    event: (&str, A),
) -> Result<(f64, f64), ExactError> {
    if !is_increasing(g.num_edges(), &event.1) {
        return Err(ExactError::NotIncreasing(event.0.to_string()));
    }
    let lo = ExactMeasure::new(g, params, fine)?.mask_event_probability(&event.1);
    let hi = ExactMeasure::new(g, params, coarse)?.mask_event_probability(&event.1);
    Ok((lo, hi))
}

/// Boundary condition induced on the subgraph spanned by `sub_edges` by the
/// outside configuration `outside` and the original boundary condition.
///
/// The subgraph boundary consists of its vertices that touch an edge outside
/// it or lie on the boundary of `g`; two such vertices share a block when
/// they are joined through open outside edges and the wiring of `bc`.
pub fn induced_boundary(
    g: &FiniteGraph,
    bc: &BoundaryCondition,
    sub_edges: &[EdgeId],
    outside: &[(EdgeId, bool)],
) -> Result<(FiniteGraph, BoundaryCondition), ExactError> {
    let wiring = Wiring::new(g, bc)?;
    let mut in_sub = vec![false; g.num_edges()];
    for e in sub_edges {
        in_sub[g.edge_index(*e).ok_or(ExactError::UnknownEdge(*e))?] = true;
    }
    let mut uf = UnionFind::new(wiring.num_nodes());
    wiring.apply(&mut uf);
    let mut touched = vec![false; g.num_vertices()];
    for k in 0..g.num_edges() {
        if !in_sub[k] {
            let (a, b) = g.endpoints(k);
            touched[a] = true;
            touched[b] = true;
        }
    }
    for (e, open) in outside {
        let k = g.edge_index(*e).ok_or(ExactError::UnknownEdge(*e))?;
        if *open && !in_sub[k] {
            let (a, b) = g.endpoints(k);
            uf.union(a, b);
        }
    }
    let mut verts: Vec<LatticePoint> = sub_edges
        .iter()
        .flat_map(|e| {
            let (a, b) = e.endpoints();
            [a, b]
        })
        .collect();
    verts.sort();
    verts.dedup();
    let boundary: Vec<LatticePoint> = verts
        .iter()
        .copied()
        .filter(|p| {
            let v = g.vertex_index(*p).expect("subgraph vertex");
            touched[v] || g.is_boundary(v)
        })
        .collect();
    let sub = FiniteGraph::with_boundary(&verts, sub_edges, &boundary)?;
    let mut groups: std::collections::BTreeMap<usize, Vec<LatticePoint>> = Default::default();
    for p in &boundary {
        let v = g.vertex_index(*p).expect("subgraph vertex");
        groups.entry(uf.find(v)).or_default().push(*p);
    }
    let induced = BoundaryCondition::from_blocks(&sub, groups.into_values().collect())?;
    Ok((sub, induced))
}

/// Domain Markov check: sup-norm distance between the law of the subgraph
/// edges conditioned on `outside`, and the measure on the subgraph with the
/// induced boundary condition. `outside` must fix every edge not in
/// `sub_edges`.
pub fn dmp_check(
    g: &FiniteGraph,
    params: ModelParams,
    bc: &BoundaryCondition,
    sub_edges: &[EdgeId],
    outside: &[(EdgeId, bool)],
) -> Result<f64, ExactError> {
    let full = ExactMeasure::new(g, params, bc)?;
    let sub_idx: Vec<usize> = sub_edges
        .iter()
        .map(|e| g.edge_index(*e).ok_or(ExactError::UnknownEdge(*e)))
        .collect::<Result<_, _>>()?;
    let mut fixed_mask = 0u64;
    let mut fixed_val = 0u64;
    for (e, open) in outside {
        let k = g.edge_index(*e).ok_or(ExactError::UnknownEdge(*e))?;
        fixed_mask |= 1 << k;
        if *open {
            fixed_val |= 1 << k;
        }
    }
    let sub_mask: u64 = sub_idx.iter().map(|&k| 1u64 << k).sum();
    let all = if g.num_edges() == 64 { u64::MAX } else { (1u64 << g.num_edges()) - 1 };
    if fixed_mask | sub_mask != all || fixed_mask & sub_mask != 0 {
        return Err(ExactError::IncompleteConditioning);
    }
    let cond = full.mask_event_probability(|m| m & fixed_mask == fixed_val);
    if cond <= 0.0 {
        return Err(ExactError::ZeroProbability);
    }
    let (sub, induced) = induced_boundary(g, bc, sub_edges, outside)?;
    let local = ExactMeasure::new(&sub, params, &induced)?;
    let mut worst: f64 = 0.0;
    for local_mask in 0..1u64 << sub_edges.len() {
        let mut m = fixed_val;
        for (i, &k) in sub_idx.iter().enumerate() {
            if local_mask >> i & 1 == 1 {
                m |= 1 << k;
            }
        }
        let lhs = full.probabilities()[m as usize] / cond;
        let rhs = local.probabilities()[local_mask as usize];
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// One pinned oracle value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub graph: Vec<EdgeId>,
    pub boundary: Vec<LatticePoint>,
    pub params: ModelParams,
    pub bc: String,
    pub event: String,
    pub probability: f64,
}

impl OracleRecord {
    pub fn new(measure: &ExactMeasure, event: &str, probability: f64) -> OracleRecord {
        let g = measure.graph();
        OracleRecord {
            graph: g.edges().to_vec(),
            boundary: g.boundary_vertices().into_iter().map(|v| g.vertices()[v]).collect(),
            params: measure.params(),
            bc: measure.boundary_condition().label(),
            event: event.to_string(),
            probability,
        }
    }

    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// True when vertices `a` and `b` are joined by open edges (boundary wiring
/// ignored). Increasing in the configuration.
pub fn connects(g: &FiniteGraph, mask: u64, a: usize, b: usize) -> bool {
    let mut uf = UnionFind::new(g.num_vertices());
    let mut bits = mask;
    while bits != 0 {
        let e = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let (x, y) = g.endpoints(e);
        uf.union(x, y);
    }
    uf.connected(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_edge() -> FiniteGraph {
        FiniteGraph::from_edges(&[EdgeId::horizontal(0, 0)]).unwrap()
    }

    #[test]
    fn single_edge_partition_functions() {
        let g = single_edge();
        let pq = ModelParams::new(0.5, 2.0).unwrap();
        let free = partition_function(&g, pq, &BoundaryCondition::free(&g)).unwrap();
        assert!((free - 6f64.ln()).abs() < 1e-14);
        let wired = partition_function(&g, pq, &BoundaryCondition::wired(&g)).unwrap();
        assert!((wired - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn isolated_vertices() {
        let pts: Vec<LatticePoint> = (0..3).map(|i| LatticePoint::new(3 * i, 0)).collect();
        let g = FiniteGraph::with_boundary(&pts, &[], &pts).unwrap();
        let pq = ModelParams::new(0.3, 2.5).unwrap();
        let z = partition_function(&g, pq, &BoundaryCondition::free(&g)).unwrap();
        assert!((z - 3.0 * 2.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn single_edge_open_probability() {
        let g = single_edge();
        let m = ExactMeasure::new(&g, ModelParams::new(0.5, 2.0).unwrap(), &BoundaryCondition::free(&g)).unwrap();
        assert!((m.edge_marginals()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.mask_event_probability(|_| true) - 1.0).abs() < 1e-15);
        for bc in [BoundaryCondition::free(&g), BoundaryCondition::wired(&g)] {
            let q1 = ExactMeasure::new(&g, ModelParams::new(0.37, 1.0).unwrap(), &bc).unwrap();
            assert!((q1.edge_marginals()[0] - 0.37).abs() < 1e-15);
        }
    }

    #[test]
    fn too_many_edges() {
        let g = FiniteGraph::rectangle(0, 0, 5, 5);
        assert_eq!(
            partition_function(&g, ModelParams::new(0.5, 2.0).unwrap(), &BoundaryCondition::free(&g)),
            Err(ExactError::TooManyEdges(40))
        );
    }

    #[test]
    fn increasing_detection() {
        assert!(is_increasing(3, |m| m & 1 == 1));
        assert!(!is_increasing(3, |m| m & 1 == 0));
        let g = single_edge();
        let m = ExactMeasure::new(&g, ModelParams::new(0.5, 2.0).unwrap(), &BoundaryCondition::free(&g)).unwrap();
        assert!(matches!(
            fkg_check(&m, ("closed", |x: u64| x == 0), ("open", |x: u64| x == 1)),
            Err(ExactError::NotIncreasing(_))
        ));
    }

    #[test]
    fn conditioning_on_nothing_is_trivial() {
        let g = FiniteGraph::rectangle(0, 0, 2, 2);
        let pq = ModelParams::new(0.5, 2.0).unwrap();
        let d = dmp_check(&g, pq, &BoundaryCondition::free(&g), g.edges(), &[]).unwrap();
        assert!(d < 1e-15);
    }
}
