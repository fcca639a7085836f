//! Markov chain samplers for the random-cluster model on finite graphs.

use std::io::{self, Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{BondConfig, BoundaryCondition, FiniteGraph, GraphError, ModelParams, Wiring};
use crate::rng::{stream, Coin, StreamRng};
use crate::stats::integrated_autocorrelation;
use crate::unionfind::UnionFind;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("bernoulli sampling requires q = 1, got q = {0}")]
    BernoulliNeedsQ1(f64),
    #[error("sweeps must be positive")]
    ZeroSweeps,
    #[error("thinning must be positive")]
    ZeroThinning,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Bernoulli,
    HeatBath,
    ClusterMove,
}

impl Algorithm {
    /// Bernoulli for independent percolation, cluster moves otherwise.
    pub fn default_for(q: f64) -> Algorithm {
        if q == 1.0 {
            Algorithm::Bernoulli
        } else {
            Algorithm::ClusterMove
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub algorithm: Algorithm,
    /// Number of recorded samples after burn-in; each costs `thinning` updates.
    pub sweeps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub seed: u64,
    pub params: ModelParams,
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.algorithm == Algorithm::Bernoulli && self.params.q != 1.0 {
            return Err(SamplerError::BernoulliNeedsQ1(self.params.q));
        }
        if self.sweeps == 0 {
            return Err(SamplerError::ZeroSweeps);
        }
        if self.thinning == 0 {
            return Err(SamplerError::ZeroThinning);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// Integrated autocorrelation times in units of recorded samples.
    pub tau_edge_density: f64,
    pub tau_largest_cluster: f64,
    /// Fraction of single-edge updates that changed the edge state
    /// (heat-bath), or of edges changed per move (cluster moves).
    pub flip_rate: f64,
    pub burn_in_ok: bool,
    pub warnings: Vec<String>,
}

/// Every edge open independently with probability `p`.
pub fn sample_bernoulli(g: &FiniteGraph, p: f64, seed: u64) -> BondConfig {
    let mut rng = stream(seed, 0);
    let mut c = BondConfig::closed(g.num_edges());
    bernoulli_fill(&mut c, p, &mut rng);
    c
}

fn bernoulli_fill(c: &mut BondConfig, p: f64, rng: &mut StreamRng) {
    let coin = Coin::new(p);
    for e in 0..c.len() {
        c.set(e, coin.flip(rng));
    }
}

/// A single Markov chain with its scratch buffers.
pub struct Chain<'g> {
    graph: &'g FiniteGraph,
    wiring: Wiring,
    params: ModelParams,
    config: BondConfig,
    rng: StreamRng,
    // BFS scratch: visit stamps over vertices and ghosts.
    stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<usize>,
    uf: UnionFind,
    active: Vec<u8>,
    changed: u64,
    updates: u64,
}

impl<'g> Chain<'g> {
    pub fn new(
        graph: &'g FiniteGraph,
        params: ModelParams,
        bc: &BoundaryCondition,
        seed: u64,
        stream_id: u64,
    ) -> Result<Chain<'g>, SamplerError> {
        let wiring = Wiring::new(graph, bc)?;
        let nodes = wiring.num_nodes();
        Ok(Chain {
            graph,
            wiring,
            params,
            config: BondConfig::closed(graph.num_edges()),
            rng: stream(seed, stream_id),
            stamp: vec![0; nodes],
            epoch: 0,
            queue: Vec::new(),
            uf: UnionFind::new(nodes),
            active: vec![0; nodes],
            changed: 0,
            updates: 0,
        })
    }

    pub fn config(&self) -> &BondConfig {
        &self.config
    }

    pub fn set_config(&mut self, c: BondConfig) {
        assert_eq!(c.len(), self.graph.num_edges());
        self.config = c;
    }

    pub fn wiring(&self) -> &Wiring {
        &self.wiring
    }

    /// Whether `a` and `b` are joined in the current configuration without
    /// using edge `skip`, with boundary wiring.
    pub fn connected_without(&mut self, a: usize, b: usize, skip: usize) -> bool {
        if a == b {
            return true;
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        let epoch = self.epoch;
        let n = self.graph.num_vertices();
        self.queue.clear();
        self.queue.push(a);
        self.stamp[a] = epoch;
        let mut head = 0;
        while head < self.queue.len() {
            let v = self.queue[head];
            head += 1;
            if v >= n {
                for &u in self.wiring.ghost_members(v) {
                    let u = u as usize;
                    if self.stamp[u] != epoch {
                        if u == b {
                            return true;
                        }
                        self.stamp[u] = epoch;
                        self.queue.push(u);
                    }
                }
                continue;
            }
            if let Some(gh) = self.wiring.ghost_of(v) {
                if self.stamp[gh] != epoch {
                    self.stamp[gh] = epoch;
                    self.queue.push(gh);
                }
            }
            for (u, e) in self.graph.neighbours(v) {
                if e == skip || !self.config.get(e) || self.stamp[u] == epoch {
                    continue;
                }
                if u == b {
                    return true;
                }
                self.stamp[u] = epoch;
                self.queue.push(u);
            }
        }
        false
    }

    /// Exact conditional probability that edge `e` is open given the rest.
    pub fn heat_bath_probability(&mut self, e: usize) -> f64 {
        if self.params.q == 1.0 {
            return self.params.p;
        }
        let (a, b) = self.graph.endpoints(e);
        if self.connected_without(a, b, e) {
            self.params.p
        } else {
            self.params.isolated_open_probability()
        }
    }

    /// One pass over the edges in index order. The uniform variable is drawn
    /// first; connectivity is only queried when it falls between the two
    /// possible conditional probabilities.
    pub fn heat_bath_sweep(&mut self) {
        let p = self.params.p;
        let lo = self.params.isolated_open_probability();
        for e in 0..self.graph.num_edges() {
            let u: f64 = self.rng.random();
            let open = if u < lo {
                true
            } else if u >= p {
                false
            } else {
                let (a, b) = self.graph.endpoints(e);
                self.connected_without(a, b, e)
            };
            if open != self.config.get(e) {
                self.changed += 1;
            }
            self.config.set(e, open);
        }
        self.updates += self.graph.num_edges() as u64;
    }

    /// Chayes-Machta move: activate each cluster with probability `1/q`,
    /// resample edges inside the active set, close active-inactive edges.
    pub fn cluster_move(&mut self) {
        let nodes = self.wiring.num_nodes();
        self.uf.reset(nodes);
        self.wiring.apply(&mut self.uf);
        for e in 0..self.graph.num_edges() {
            if self.config.get(e) {
                let (a, b) = self.graph.endpoints(e);
                self.uf.union(a, b);
            }
        }
        // 0 = undecided, 1 = inactive, 2 = active; decided at the root, in
        // vertex order, so the draw sequence is deterministic.
        self.active[..nodes].fill(0);
        let activate = Coin::new(1.0 / self.params.q);
        let always = self.params.q == 1.0;
        for v in 0..nodes {
            let r = self.uf.find(v);
            if self.active[r] == 0 {
                self.active[r] = if always || activate.flip(&mut self.rng) { 2 } else { 1 };
            }
            self.active[v] = self.active[r];
        }
        let coin = Coin::new(self.params.p);
        for e in 0..self.graph.num_edges() {
            let (a, b) = self.graph.endpoints(e);
            let new = match (self.active[a], self.active[b]) {
                (2, 2) => coin.flip(&mut self.rng),
                (1, 1) => continue,
                _ => false,
            };
            if new != self.config.get(e) {
                self.changed += 1;
            }
            self.config.set(e, new);
        }
        self.updates += self.graph.num_edges() as u64;
    }

    pub fn bernoulli_resample(&mut self) {
        let before = self.config.clone();
        bernoulli_fill(&mut self.config, self.params.p, &mut self.rng);
        self.changed += before
            .words()
            .iter()
            .zip(self.config.words())
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum::<u64>();
        self.updates += self.graph.num_edges() as u64;
    }

    pub fn step(&mut self, algorithm: Algorithm) {
        match algorithm {
            Algorithm::Bernoulli => self.bernoulli_resample(),
            Algorithm::HeatBath => self.heat_bath_sweep(),
            Algorithm::ClusterMove => self.cluster_move(),
        }
    }

    /// Size in real vertices of the largest cluster, with wiring.
    pub fn largest_cluster(&mut self) -> usize {
        crate::graph::largest_cluster(self.graph, &self.wiring, &self.config)
    }

    pub fn flip_rate(&self) -> f64 {
        if self.updates == 0 {
            0.0
        } else {
            self.changed as f64 / self.updates as f64
        }
    }
}

/// Run a chain from the all-closed configuration, calling `visit` on each
/// thinned sample after burn-in.
pub fn sample_chain<F: FnMut(&BondConfig)>(
    g: &FiniteGraph,
    bc: &BoundaryCondition,
    spec: &SamplerSpec,
    stream_id: u64,
    mut visit: F,
) -> Result<ChainDiagnostics, SamplerError> {
    spec.validate()?;
    let mut chain = Chain::new(g, spec.params, bc, spec.seed, stream_id)?;
    for _ in 0..spec.burn_in {
        chain.step(spec.algorithm);
    }
    let mut density = Vec::with_capacity(spec.sweeps as usize);
    // Largest-cluster sizes need a full labelling; a prefix of the run is
    // enough for the autocorrelation estimate.
    let largest_len = spec.sweeps.min(50_000) as usize;
    let mut largest = Vec::with_capacity(largest_len);
    for _ in 0..spec.sweeps {
        for _ in 0..spec.thinning {
            chain.step(spec.algorithm);
        }
        visit(chain.config());
        density.push(chain.config().count_open() as f64 / g.num_edges().max(1) as f64);
        if largest.len() < largest_len {
            largest.push(chain.largest_cluster() as f64);
        }
    }
    let tau_edge_density = integrated_autocorrelation(&density);
    let tau_largest_cluster = integrated_autocorrelation(&largest);
    let tau_updates = tau_edge_density.max(tau_largest_cluster) * spec.thinning as f64;
    let burn_in_ok = spec.algorithm == Algorithm::Bernoulli || spec.burn_in as f64 >= 20.0 * tau_updates;
    let mut warnings = Vec::new();
    if !burn_in_ok {
        warnings.push(format!(
            "burn-in of {} updates is below 20 autocorrelation times ({:.1} updates)",
            spec.burn_in, 20.0 * tau_updates
        ));
    }
    Ok(ChainDiagnostics {
        tau_edge_density,
        tau_largest_cluster,
        flip_rate: chain.flip_rate(),
        burn_in_ok,
        warnings,
    })
}

/// Header written before a raw configuration snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub width: u32,
    pub height: u32,
    pub bc: String,
    pub p: f64,
    pub q: f64,
    pub seed: u64,
    pub sweep_index: u64,
    pub edges: usize,
}

/// Write one JSON header line followed by the little-endian 64-bit words of
/// the configuration.
pub fn write_snapshot<W: Write>(w: &mut W, header: &SnapshotHeader, c: &BondConfig) -> io::Result<()> {
    assert_eq!(header.edges, c.len());
    serde_json::to_writer(&mut *w, header)?;
    w.write_all(b"\n")?;
    for word in c.words() {
        w.write_all(&word.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(r: &mut R) -> io::Result<(SnapshotHeader, BondConfig)> {
    let mut line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
    }
    let header: SnapshotHeader = serde_json::from_slice(&line)?;
    let mut words = vec![0u64; header.edges.div_ceil(64)];
    let mut buf = [0u8; 8];
    for w in words.iter_mut() {
        r.read_exact(&mut buf)?;
        *w = u64::from_le_bytes(buf);
    }
    Ok((header.clone(), BondConfig::from_words(header.edges, words)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactMeasure;

    #[test]
    fn bernoulli_extremes_and_monotone_coupling() {
        let g = FiniteGraph::rectangle(0, 0, 10, 10);
        assert_eq!(sample_bernoulli(&g, 0.0, 1).count_open(), 0);
        assert_eq!(sample_bernoulli(&g, 1.0, 1).count_open(), g.num_edges());
        let lo = sample_bernoulli(&g, 0.3, 9);
        let hi = sample_bernoulli(&g, 0.31, 9);
        assert!(lo.le(&hi));
    }

    #[test]
    fn spec_validation() {
        let spec = SamplerSpec {
            algorithm: Algorithm::Bernoulli,
            sweeps: 1,
            burn_in: 0,
            thinning: 1,
            seed: 0,
            params: ModelParams::new(0.5, 2.0).unwrap(),
        };
        assert_eq!(spec.validate(), Err(SamplerError::BernoulliNeedsQ1(2.0)));
        assert_eq!(
            SamplerSpec { sweeps: 0, algorithm: Algorithm::HeatBath, ..spec.clone() }.validate(),
            Err(SamplerError::ZeroSweeps)
        );
    }

    #[test]
    fn heat_bath_conditionals_match_exact() {
        let g = FiniteGraph::rectangle(0, 0, 3, 3);
        let pq = ModelParams::new(0.6, 2.0).unwrap();
        for bc in [BoundaryCondition::free(&g), BoundaryCondition::wired(&g)] {
            let exact = ExactMeasure::new(&g, pq, &bc).unwrap();
            let mut chain = Chain::new(&g, pq, &bc, 0, 0).unwrap();
            for mask in (0u64..1 << 12).step_by(37) {
                let c = BondConfig::from_mask(12, mask);
                chain.set_config(c.clone());
                for e in 0..12 {
                    let hb = chain.heat_bath_probability(e);
                    assert!((hb - exact.conditional_open(e, &c)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let g = FiniteGraph::rectangle(0, 0, 4, 4);
        let spec = SamplerSpec {
            algorithm: Algorithm::ClusterMove,
            sweeps: 50,
            burn_in: 10,
            thinning: 2,
            seed: 5,
            params: ModelParams::new(0.5, 2.0).unwrap(),
        };
        let bc = BoundaryCondition::wired(&g);
        let mut a = Vec::new();
        let mut b = Vec::new();
        sample_chain(&g, &bc, &spec, 0, |c| a.push(c.clone())).unwrap();
        sample_chain(&g, &bc, &spec, 0, |c| b.push(c.clone())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn q1_chain_is_iid() {
        let g = FiniteGraph::rectangle(0, 0, 6, 6);
        let spec = SamplerSpec {
            algorithm: Algorithm::ClusterMove,
            sweeps: 20_000,
            burn_in: 0,
            thinning: 1,
            seed: 1,
            params: ModelParams::new(0.4, 1.0).unwrap(),
        };
        let d = sample_chain(&g, &BoundaryCondition::free(&g), &spec, 0, |_| {}).unwrap();
        assert!((d.tau_edge_density - 0.5).abs() < 0.1, "{}", d.tau_edge_density);
        assert!(d.tau_edge_density >= 0.5);
    }

    #[test]
    fn snapshot_roundtrip() {
        let g = FiniteGraph::rectangle(0, 0, 9, 9);
        let c = sample_bernoulli(&g, 0.5, 3);
        let h = SnapshotHeader {
            width: 9,
            height: 9,
            bc: "free".into(),
            p: 0.5,
            q: 1.0,
            seed: 3,
            sweep_index: 0,
            edges: g.num_edges(),
        };
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &h, &c).unwrap();
        let (h2, c2) = read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(h, h2);
        assert_eq!(c, c2);
    }
}
