//! Finite subgraphs of Z^2, boundary conditions and model parameters.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{EdgeId, Lattice, LatticePoint};
use crate::unionfind::UnionFind;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge {0:?} is not a primal lattice edge")]
    NotPrimal(EdgeId),
    #[error("duplicate edge {0:?}")]
    DuplicateEdge(EdgeId),
    #[error("vertex ({x}, {y}) is not in the graph")]
    UnknownVertex { x: i32, y: i32 },
    #[error("boundary condition blocks overlap at vertex ({x}, {y})")]
    OverlappingBlocks { x: i32, y: i32 },
    #[error("boundary condition does not cover the boundary exactly")]
    BoundaryMismatch,
    #[error("p must lie in (0, 1), got {0}")]
    InvalidP(f64),
    #[error("q must be at least 1, got {0}")]
    InvalidQ(f64),
}

/// A finite subgraph of Z^2 with a designated boundary.
///
/// The default boundary is the lattice one: vertices incident to at least one
/// edge of Z^2 that is not in the graph.
#[derive(Clone, Debug)]
pub struct FiniteGraph {
    vertices: Vec<LatticePoint>,
    edges: Vec<EdgeId>,
    endpoints: Vec<(u32, u32)>,
    boundary: Vec<bool>,
    index: HashMap<LatticePoint, u32>,
    // CSR adjacency: (neighbour, edge index)
    adj_start: Vec<u32>,
    adj: Vec<(u32, u32)>,
}

impl FiniteGraph {
    /// Graph spanned by `edges`; vertices are their endpoints, ordered
    /// lexicographically.
    pub fn from_edges(edges: &[EdgeId]) -> Result<FiniteGraph, GraphError> {
        let mut verts: Vec<LatticePoint> = Vec::with_capacity(edges.len() * 2);
        for e in edges {
            if e.lattice != Lattice::Primal {
                return Err(GraphError::NotPrimal(*e));
            }
            let (a, b) = e.endpoints();
            verts.push(a);
            verts.push(b);
        }
        verts.sort();
        verts.dedup();
        Self::build(verts, edges.to_vec(), None)
    }

    /// Like [`FiniteGraph::from_edges`] but with extra isolated vertices and
    /// an explicit boundary set.
    pub fn with_boundary(
        vertices: &[LatticePoint],
        edges: &[EdgeId],
        boundary: &[LatticePoint],
    ) -> Result<FiniteGraph, GraphError> {
        let mut verts: Vec<LatticePoint> = vertices.to_vec();
        for e in edges {
            let (a, b) = e.endpoints();
            verts.push(a);
            verts.push(b);
        }
        verts.sort();
        verts.dedup();
        Self::build(verts, edges.to_vec(), Some(boundary))
    }

    /// Rectangle `[x0, x0+width) x [y0, y0+height)` of vertices with all
    /// nearest-neighbour edges. Edge order: horizontal edges row by row, then
    /// vertical edges row by row.
    pub fn rectangle(x0: i32, y0: i32, width: u32, height: u32) -> FiniteGraph {
        let (w, h) = (width as i32, height as i32);
        let mut edges = Vec::new();
        for y in y0..y0 + h {
            for x in x0..x0 + w - 1 {
                edges.push(EdgeId::horizontal(x, y));
            }
        }
        for y in y0..y0 + h - 1 {
            for x in x0..x0 + w {
                edges.push(EdgeId::vertical(x, y));
            }
        }
        let mut verts = Vec::with_capacity((width * height) as usize);
        for x in x0..x0 + w {
            for y in y0..y0 + h {
                verts.push(LatticePoint::new(x, y));
            }
        }
        Self::build(verts, edges, None).expect("rectangle is well formed")
    }

    /// The box `Lambda_n = {-n, ..., n}^2`.
    pub fn centered_box(n: u32) -> FiniteGraph {
        let side = 2 * n + 1;
        Self::rectangle(-(n as i32), -(n as i32), side, side)
    }

    fn build(
        vertices: Vec<LatticePoint>,
        edges: Vec<EdgeId>,
        boundary: Option<&[LatticePoint]>,
    ) -> Result<FiniteGraph, GraphError> {
        let index: HashMap<LatticePoint, u32> = vertices
            .iter()
            .enumerate()
            .map(|(i, p)| (*p, i as u32))
            .collect();
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        let mut endpoints = Vec::with_capacity(edges.len());
        let mut degree = vec![0u32; vertices.len()];
        for e in &edges {
            if e.lattice != Lattice::Primal {
                return Err(GraphError::NotPrimal(*e));
            }
            if !seen.insert(*e) {
                return Err(GraphError::DuplicateEdge(*e));
            }
            let (a, b) = e.endpoints();
            let ia = *index.get(&a).ok_or(GraphError::UnknownVertex { x: a.x, y: a.y })?;
            let ib = *index.get(&b).ok_or(GraphError::UnknownVertex { x: b.x, y: b.y })?;
            degree[ia as usize] += 1;
            degree[ib as usize] += 1;
            endpoints.push((ia, ib));
        }
        let boundary_mask = match boundary {
            None => degree.iter().map(|&d| d < 4).collect(),
            Some(b) => {
                let mut mask = vec![false; vertices.len()];
                for p in b {
                    let i = *index.get(p).ok_or(GraphError::UnknownVertex { x: p.x, y: p.y })?;
                    mask[i as usize] = true;
                }
                mask
            }
        };
        let mut adj_start = vec![0u32; vertices.len() + 1];
        for &(a, b) in &endpoints {
            adj_start[a as usize + 1] += 1;
            adj_start[b as usize + 1] += 1;
        }
        for i in 0..vertices.len() {
            adj_start[i + 1] += adj_start[i];
        }
        let mut fill = adj_start.clone();
        let mut adj = vec![(0u32, 0u32); 2 * endpoints.len()];
        for (k, &(a, b)) in endpoints.iter().enumerate() {
            adj[fill[a as usize] as usize] = (b, k as u32);
            fill[a as usize] += 1;
            adj[fill[b as usize] as usize] = (a, k as u32);
            fill[b as usize] += 1;
        }
        Ok(FiniteGraph {
            vertices,
            edges,
            endpoints,
            boundary: boundary_mask,
            index,
            adj_start,
            adj,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[LatticePoint] {
        &self.vertices
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        let (a, b) = self.endpoints[e];
        (a as usize, b as usize)
    }

    pub fn vertex_index(&self, p: LatticePoint) -> Option<usize> {
        self.index.get(&p).map(|&i| i as usize)
    }

    pub fn edge_index(&self, e: EdgeId) -> Option<usize> {
        let (a, b) = e.endpoints();
        let (ia, ib) = (self.vertex_index(a)?, self.vertex_index(b)?);
        self.neighbours(ia)
            .find(|&(n, _)| n == ib)
            .map(|(_, k)| k)
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.boundary[v]).collect()
    }

    /// `(neighbour, edge index)` pairs of vertex `v`.
    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (s, e) = (self.adj_start[v] as usize, self.adj_start[v + 1] as usize);
        self.adj[s..e].iter().map(|&(n, k)| (n as usize, k as usize))
    }
}

/// A partition of the boundary vertices; vertices in one block are wired.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    blocks: Vec<Vec<LatticePoint>>,
}

impl BoundaryCondition {
    pub fn free(g: &FiniteGraph) -> BoundaryCondition {
        BoundaryCondition {
            blocks: g
                .boundary_vertices()
                .into_iter()
                .map(|v| vec![g.vertices()[v]])
                .collect(),
        }
    }

    pub fn wired(g: &FiniteGraph) -> BoundaryCondition {
        let all: Vec<LatticePoint> = g
            .boundary_vertices()
            .into_iter()
            .map(|v| g.vertices()[v])
            .collect();
        BoundaryCondition {
            blocks: if all.is_empty() { vec![] } else { vec![all] },
        }
    }

    /// Validated partition: blocks must be disjoint and cover the boundary.
    pub fn from_blocks(
        g: &FiniteGraph,
        blocks: Vec<Vec<LatticePoint>>,
    ) -> Result<BoundaryCondition, GraphError> {
        let mut covered = vec![false; g.num_vertices()];
        for b in &blocks {
            for p in b {
                let v = g
                    .vertex_index(*p)
                    .ok_or(GraphError::UnknownVertex { x: p.x, y: p.y })?;
                if covered[v] {
                    return Err(GraphError::OverlappingBlocks { x: p.x, y: p.y });
                }
                covered[v] = true;
            }
        }
        if (0..g.num_vertices()).any(|v| covered[v] != g.is_boundary(v)) {
            return Err(GraphError::BoundaryMismatch);
        }
        let mut blocks: Vec<Vec<LatticePoint>> = blocks
            .into_iter()
            .filter(|b| !b.is_empty())
            .map(|mut b| {
                b.sort();
                b
            })
            .collect();
        blocks.sort();
        Ok(BoundaryCondition { blocks })
    }

    pub fn blocks(&self) -> &[Vec<LatticePoint>] {
        &self.blocks
    }

    pub fn is_free(&self) -> bool {
        self.blocks.iter().all(|b| b.len() <= 1)
    }

    /// True when every block of `self` lies inside a block of `finer`'s
    /// coarsening, i.e. `self` is at least as coarse as `finer`.
    pub fn is_coarser_than(&self, finer: &BoundaryCondition) -> bool {
        let mut owner = HashMap::new();
        for (i, b) in self.blocks.iter().enumerate() {
            for p in b {
                owner.insert(*p, i);
            }
        }
        finer.blocks.iter().all(|b| {
            let first = b.first().and_then(|p| owner.get(p));
            b.iter().all(|p| owner.get(p) == first)
        })
    }

    pub fn label(&self) -> String {
        if self.is_free() {
            "free".into()
        } else if self.blocks.len() == 1 {
            "wired".into()
        } else {
            format!("partition[{}]", self.blocks.len())
        }
    }
}

/// Boundary wiring compiled against a graph: each non-trivial block becomes a
/// ghost node `num_vertices + block` joined to its members by permanent links.
#[derive(Clone, Debug)]
pub struct Wiring {
    ghost_of: Vec<Option<u32>>,
    members: Vec<Vec<u32>>,
    n_vertices: usize,
}

impl Wiring {
    pub fn new(g: &FiniteGraph, bc: &BoundaryCondition) -> Result<Wiring, GraphError> {
        let mut ghost_of = vec![None; g.num_vertices()];
        let mut members = Vec::new();
        for b in bc.blocks() {
            if b.len() < 2 {
                continue;
            }
            let id = members.len() as u32;
            let mut m = Vec::with_capacity(b.len());
            for p in b {
                let v = g
                    .vertex_index(*p)
                    .ok_or(GraphError::UnknownVertex { x: p.x, y: p.y })?;
                ghost_of[v] = Some(id);
                m.push(v as u32);
            }
            members.push(m);
        }
        Ok(Wiring {
            ghost_of,
            members,
            n_vertices: g.num_vertices(),
        })
    }

    pub fn num_ghosts(&self) -> usize {
        self.members.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.n_vertices + self.members.len()
    }

    #[inline]
    pub fn ghost_of(&self, v: usize) -> Option<usize> {
        self.ghost_of[v].map(|g| self.n_vertices + g as usize)
    }

    /// Number of real vertices attached to some ghost.
    pub fn wired_vertex_count(&self) -> usize {
        self.members.iter().map(|m| m.len()).sum()
    }

    pub fn ghost_members(&self, ghost: usize) -> &[u32] {
        &self.members[ghost - self.n_vertices]
    }

    /// Union every wired vertex with its ghost.
    pub fn apply(&self, uf: &mut UnionFind) {
        for (v, g) in self.ghost_of.iter().enumerate() {
            if let Some(g) = g {
                uf.union(v, self.n_vertices + *g as usize);
            }
        }
    }
}

/// Random-cluster parameters: edge weight `p` and cluster weight `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: f64,
    pub q: f64,
}

impl ModelParams {
    pub fn new(p: f64, q: f64) -> Result<ModelParams, GraphError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(GraphError::InvalidP(p));
        }
        if !(q >= 1.0) || !q.is_finite() {
            return Err(GraphError::InvalidQ(q));
        }
        Ok(ModelParams { p, q })
    }

    /// Self-dual point `sqrt(q) / (1 + sqrt(q))`.
    pub fn p_critical(q: f64) -> f64 {
        q.sqrt() / (1.0 + q.sqrt())
    }

    pub fn is_subcritical(&self) -> bool {
        self.p < Self::p_critical(self.q)
    }

    /// Probability of opening an edge whose endpoints are not otherwise connected.
    pub fn isolated_open_probability(&self) -> f64 {
        self.p / (self.p + self.q * (1.0 - self.p))
    }
}

/// Dual parameter `p*` solving `p p* = q (1 - p)(1 - p*)`.
pub fn dual_parameter(params: ModelParams) -> f64 {
    let ModelParams { p, q } = params;
    q * (1.0 - p) / (p + q * (1.0 - p))
}

/// Open/closed state of every edge of a graph, packed 64 edges per word.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BondConfig {
    words: Vec<u64>,
    len: usize,
}

impl BondConfig {
    pub fn closed(len: usize) -> BondConfig {
        BondConfig {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn open(len: usize) -> BondConfig {
        let mut c = Self::closed(len);
        for e in 0..len {
            c.set(e, true);
        }
        c
    }

    /// Configuration whose edge `e` is open iff bit `e` of `mask` is set.
    pub fn from_mask(len: usize, mask: u64) -> BondConfig {
        assert!(len <= 64);
        let mut c = Self::closed(len);
        if len > 0 {
            c.words[0] = if len == 64 { mask } else { mask & ((1u64 << len) - 1) };
        }
        c
    }

    pub fn from_words(len: usize, words: Vec<u64>) -> BondConfig {
        assert_eq!(words.len(), len.div_ceil(64));
        let mut c = BondConfig { words, len };
        if len % 64 != 0 {
            let last = c.words.len() - 1;
            c.words[last] &= (1u64 << (len % 64)) - 1;
        }
        c
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, e: usize) -> bool {
        debug_assert!(e < self.len);
        self.words[e / 64] >> (e % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, e: usize, open: bool) {
        debug_assert!(e < self.len);
        let bit = 1u64 << (e % 64);
        if open {
            self.words[e / 64] |= bit;
        } else {
            self.words[e / 64] &= !bit;
        }
    }

    pub fn count_open(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Low 64 edges as a mask (for graphs with at most 64 edges).
    pub fn mask(&self) -> u64 {
        self.words.first().copied().unwrap_or(0)
    }

    pub(crate) fn set_mask(&mut self, mask: u64) {
        self.words[0] = mask;
    }

    pub fn iter_open(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&e| self.get(e))
    }

    /// Componentwise order `self <= other`.
    pub fn le(&self, other: &BondConfig) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }
}

/// Clusters of `config` with boundary wiring applied. Returns the union-find
/// over vertices and ghost nodes.
pub fn clusters(g: &FiniteGraph, wiring: &Wiring, config: &BondConfig) -> UnionFind {
    let mut uf = UnionFind::new(wiring.num_nodes());
    wiring.apply(&mut uf);
    for e in config.iter_open() {
        let (a, b) = g.endpoints(e);
        uf.union(a, b);
    }
    uf
}

/// Number of clusters `k(omega^eta)` after identifying wired vertices.
pub fn count_clusters(g: &FiniteGraph, wiring: &Wiring, config: &BondConfig) -> usize {
    clusters(g, wiring, config).count_sets()
}

/// Size (in real vertices) of the largest cluster.
pub fn largest_cluster(g: &FiniteGraph, wiring: &Wiring, config: &BondConfig) -> usize {
    let mut uf = clusters(g, wiring, config);
    let mut sizes = vec![0usize; wiring.num_nodes()];
    let mut best = 0;
    for v in 0..g.num_vertices() {
        let r = uf.find(v);
        sizes[r] += 1;
        best = best.max(sizes[r]);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dual_edge;

    #[test]
    fn box_shapes() {
        let g = FiniteGraph::rectangle(0, 0, 3, 3);
        assert_eq!(g.num_vertices(), 9);
        assert_eq!(g.num_edges(), 12);
        assert_eq!(g.boundary_vertices().len(), 8);
        let sq = FiniteGraph::rectangle(0, 0, 2, 2);
        assert_eq!(sq.num_edges(), 4);
        assert_eq!(sq.boundary_vertices().len(), 4);
        let b = FiniteGraph::centered_box(2);
        assert_eq!(b.num_vertices(), 25);
        assert_eq!(b.num_edges(), 40);
        let centre = b.vertex_index(LatticePoint::ORIGIN).unwrap();
        assert!(!b.is_boundary(centre));
    }

    #[test]
    fn boundary_conditions() {
        let g = FiniteGraph::rectangle(0, 0, 3, 3);
        let free = BoundaryCondition::free(&g);
        let wired = BoundaryCondition::wired(&g);
        assert!(free.is_free());
        assert!(wired.is_coarser_than(&free));
        assert!(!free.is_coarser_than(&wired));
        let bad = BoundaryCondition::from_blocks(&g, vec![vec![LatticePoint::new(1, 1)]]);
        assert_eq!(bad, Err(GraphError::BoundaryMismatch));
        let dup = BoundaryCondition::from_blocks(
            &g,
            vec![
                vec![LatticePoint::new(0, 0)],
                vec![LatticePoint::new(0, 0)],
            ],
        );
        assert!(matches!(dup, Err(GraphError::OverlappingBlocks { .. })));
    }

    #[test]
    fn cluster_counting_with_wiring() {
        let g = FiniteGraph::from_edges(&[EdgeId::horizontal(0, 0)]).unwrap();
        let free = Wiring::new(&g, &BoundaryCondition::free(&g)).unwrap();
        let wired = Wiring::new(&g, &BoundaryCondition::wired(&g)).unwrap();
        let closed = BondConfig::closed(1);
        let open = BondConfig::open(1);
        assert_eq!(count_clusters(&g, &free, &closed), 2);
        assert_eq!(count_clusters(&g, &free, &open), 1);
        assert_eq!(count_clusters(&g, &wired, &closed), 1);
        assert_eq!(count_clusters(&g, &wired, &open), 1);
    }

    #[test]
    fn params_validation_and_duality() {
        assert!(ModelParams::new(0.0, 1.0).is_err());
        assert!(ModelParams::new(0.5, 0.5).is_err());
        let q1 = ModelParams::new(0.4, 1.0).unwrap();
        assert!((dual_parameter(q1) - 0.6).abs() < 1e-15);
        let pc = ModelParams::p_critical(2.0);
        let sd = ModelParams::new(pc, 2.0).unwrap();
        assert!((dual_parameter(sd) - pc).abs() < 1e-15);
        let q4 = ModelParams::new(0.5, 4.0).unwrap();
        assert!((dual_parameter(q4) - 0.8).abs() < 1e-15);
        for &(p, q) in &[(0.1, 1.0), (0.3, 2.5), (0.77, 3.9), (0.999, 1.2)] {
            let pp = ModelParams::new(p, q).unwrap();
            let back = dual_parameter(ModelParams::new(dual_parameter(pp), q).unwrap());
            assert!((back - p).abs() < 1e-14);
        }
    }

    #[test]
    fn dual_edges_biject_box_interior() {
        let g = FiniteGraph::centered_box(3);
        let duals: std::collections::HashSet<_> = g.edges().iter().map(|&e| dual_edge(e)).collect();
        assert_eq!(duals.len(), g.num_edges());
        for e in g.edges() {
            assert_eq!(dual_edge(dual_edge(*e)), *e);
        }
    }

    #[test]
    fn bond_config_bits() {
        let mut c = BondConfig::closed(130);
        c.set(0, true);
        c.set(129, true);
        assert_eq!(c.count_open(), 2);
        assert_eq!(c.iter_open().collect::<Vec<_>>(), vec![0, 129]);
        let o = BondConfig::open(130);
        assert!(c.le(&o));
        assert!(!o.le(&c));
        assert_eq!(BondConfig::from_mask(4, 0xff).mask(), 0xf);
    }
}
