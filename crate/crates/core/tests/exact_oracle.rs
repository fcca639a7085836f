use ozlab_core::exact::{
    connects, dmp_check, fkg_check, induced_boundary, mon_check, partition_function, ExactMeasure,
    OracleRecord,
};
use ozlab_core::geometry::{EdgeId, LatticePoint};
use ozlab_core::graph::{dual_parameter, BoundaryCondition, FiniteGraph, ModelParams};
use proptest::prelude::*;

/// Independent partition function: product weights and DFS cluster counts
/// on a graph where wired blocks are glued by explicit extra adjacency.
fn brute_z(g: &FiniteGraph, p: f64, q: f64, bc: &BoundaryCondition) -> f64 {
    let n = g.num_vertices();
    let m = g.num_edges();
    let mut z = 0.0;
    for mask in 0u32..1 << m {
        let mut adj = vec![Vec::new(); n];
        for e in 0..m {
            if mask >> e & 1 == 1 {
                let (a, b) = g.endpoints(e);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for block in bc.blocks() {
            let ids: Vec<usize> = block.iter().map(|p| g.vertex_index(*p).unwrap()).collect();
            for w in ids.windows(2) {
                adj[w[0]].push(w[1]);
                adj[w[1]].push(w[0]);
            }
        }
        let mut seen = vec![false; n];
        let mut k = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            k += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                for &u in &adj[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        let o = mask.count_ones() as i32;
        z += p.powi(o) * (1.0 - p).powi(m as i32 - o) * q.powi(k);
    }
    // The enumerated measure uses (p/(1-p))^o; rescale by (1-p)^m.
    z / (1.0 - p).powi(m as i32)
}

#[test]
fn partition_function_matches_brute_force() {
    let g = FiniteGraph::rectangle(0, 0, 3, 3);
    for &(p, q) in &[(0.3, 1.0), (0.5, 2.0), (0.7, 3.0), (0.2, 1.5)] {
        let pq = ModelParams::new(p, q).unwrap();
        for bc in [BoundaryCondition::free(&g), BoundaryCondition::wired(&g)] {
            let lz = partition_function(&g, pq, &bc).unwrap();
            let bz = brute_z(&g, p, q, &bc).ln();
            assert!((lz - bz).abs() < 1e-12, "{lz} vs {bz}");
        }
    }
}

#[test]
fn small_p_stays_finite() {
    let g = FiniteGraph::rectangle(0, 0, 3, 3);
    let m = ExactMeasure::new(&g, ModelParams::new(1e-200, 2.0).unwrap(), &BoundaryCondition::free(&g)).unwrap();
    let total: f64 = m.probabilities().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!((m.probabilities()[0] - 1.0).abs() < 1e-12);
}

#[test]
fn fkg_on_square() {
    let g = FiniteGraph::rectangle(0, 0, 2, 2);
    let m = ExactMeasure::new(&g, ModelParams::new(0.5, 2.0).unwrap(), &BoundaryCondition::free(&g)).unwrap();
    let (lhs, rhs) = fkg_check(&m, ("e0", |x: u64| x & 1 == 1), ("e2", |x: u64| x & 4 != 0)).unwrap();
    assert!(lhs >= rhs - 1e-12);
    assert!(lhs > rhs + 1e-6, "positive association is strict for q > 1");
    let (lhs, rhs) = fkg_check(&m, ("e0", |x: u64| x & 1 == 1), ("e0", |x: u64| x & 1 == 1)).unwrap();
    assert!(lhs >= rhs);
    let q1 = ExactMeasure::new(&g, ModelParams::new(0.5, 1.0).unwrap(), &BoundaryCondition::free(&g)).unwrap();
    let (lhs, rhs) = fkg_check(&q1, ("e0", |x: u64| x & 1 == 1), ("e1", |x: u64| x & 2 != 0)).unwrap();
    assert!((lhs - rhs).abs() < 1e-15);
}

#[test]
fn monotone_in_boundary_condition() {
    let g = FiniteGraph::rectangle(0, 0, 3, 3);
    let pq = ModelParams::new(0.4, 2.5).unwrap();
    let free = BoundaryCondition::free(&g);
    let wired = BoundaryCondition::wired(&g);
    let a = g.vertex_index(LatticePoint::new(0, 0)).unwrap();
    let b = g.vertex_index(LatticePoint::new(1, 1)).unwrap();
    let (lo, hi) = mon_check(&g, pq, &free, &wired, ("0<->c", |m: u64| connects(&g, m, a, b))).unwrap();
    assert!(lo <= hi + 1e-12);
    assert!(hi > lo);
}

#[test]
fn dmp_path_middle_closed() {
    let edges = [EdgeId::horizontal(0, 0), EdgeId::horizontal(1, 0), EdgeId::horizontal(2, 0)];
    let g = FiniteGraph::from_edges(&edges).unwrap();
    let pq = ModelParams::new(0.5, 2.0).unwrap();
    let bc = BoundaryCondition::free(&g);
    let sub = [edges[0], edges[2]];
    let outside = [(edges[1], false)];
    assert!(dmp_check(&g, pq, &bc, &sub, &outside).unwrap() < 1e-12);
    // Independent closed form: the two outer edges are independent free edges.
    let full = ExactMeasure::new(&g, pq, &bc).unwrap();
    let cond = full.mask_event_probability(|m| m & 2 == 0);
    let both = full.mask_event_probability(|m| m == 0b101) / cond;
    let single = 0.5 / (0.5 + 2.0 * 0.5);
    assert!((both - single * single).abs() < 1e-14);
}

#[test]
fn dmp_square_one_edge_open() {
    let g = FiniteGraph::rectangle(0, 0, 2, 2);
    let pq = ModelParams::new(0.6, 2.0).unwrap();
    let bc = BoundaryCondition::free(&g);
    let open = g.edges()[0];
    let sub: Vec<EdgeId> = g.edges()[1..].to_vec();
    let (_, induced) = induced_boundary(&g, &bc, &sub, &[(open, true)]).unwrap();
    let (a, b) = open.endpoints();
    assert!(induced.blocks().iter().any(|blk| blk.contains(&a) && blk.contains(&b)));
    assert!(dmp_check(&g, pq, &bc, &sub, &[(open, true)]).unwrap() < 1e-12);
    assert!(dmp_check(&g, pq, &BoundaryCondition::wired(&g), &sub, &[(open, false)]).unwrap() < 1e-12);
}

#[test]
fn q1_duality_marginals() {
    let g = FiniteGraph::centered_box(1);
    let p = 0.3;
    let m = ExactMeasure::new(&g, ModelParams::new(p, 1.0).unwrap(), &BoundaryCondition::free(&g)).unwrap();
    // The dual edge is open exactly when the primal edge is closed.
    for pe in m.edge_marginals() {
        assert!((1.0 - pe - dual_parameter(ModelParams::new(p, 1.0).unwrap())).abs() < 1e-14);
    }
}

#[test]
fn oracle_record_roundtrip() {
    let g = FiniteGraph::from_edges(&[EdgeId::horizontal(0, 0)]).unwrap();
    let m = ExactMeasure::new(&g, ModelParams::new(0.5, 2.0).unwrap(), &BoundaryCondition::free(&g)).unwrap();
    let rec = OracleRecord::new(&m, "e0 open", m.edge_marginals()[0]);
    let line = rec.to_jsonl();
    let back: OracleRecord = serde_json::from_str(&line).unwrap();
    assert_eq!(back, rec);
    assert!(!line.contains('\n'));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn probabilities_sum_to_one(p in 0.01f64..0.99, q in 1.0f64..4.0, wired in any::<bool>(), w in 2u32..4, h in 1u32..3) {
        let g = FiniteGraph::rectangle(0, 0, w, h);
        let bc = if wired { BoundaryCondition::wired(&g) } else { BoundaryCondition::free(&g) };
        let m = ExactMeasure::new(&g, ModelParams::new(p, q).unwrap(), &bc).unwrap();
        let s: f64 = m.probabilities().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        prop_assert!(m.probabilities().iter().all(|&x| x > 0.0));
    }
}
