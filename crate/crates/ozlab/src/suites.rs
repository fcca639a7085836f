//! Verification suites against exact enumeration.

use anyhow::Context;
use ozlab_core::exact::{connects, dmp_check, is_increasing, ExactMeasure};
use ozlab_core::geometry::LatticePoint;
use ozlab_core::graph::{BoundaryCondition, FiniteGraph, ModelParams};
use ozlab_core::rng::derive_seed;
use ozlab_core::sampler::Algorithm;
use ozlab_core::validation::oracle_chi_square;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const QS: [f64; 4] = [1.0, 1.5, 2.0, 3.0];
pub const PS: [f64; 3] = [0.3, 0.5, 0.7];

/// The two test graphs: the 2x2 square (4 edges) and the 3x3 box (12 edges).
pub fn test_graphs() -> [FiniteGraph; 2] {
    [FiniteGraph::rectangle(0, 0, 2, 2), FiniteGraph::rectangle(0, 0, 3, 3)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub run_id: String,
    pub graph_edges: usize,
    pub bc: String,
    pub p: f64,
    pub q: f64,
    pub algorithm: Algorithm,
    pub samples: u64,
    pub thinning: u64,
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleSuite {
    pub rows: Vec<OracleRow>,
    pub level: f64,
    /// Per-test threshold after the Bonferroni correction.
    pub threshold: f64,
    pub min_p_value: f64,
    pub passed: bool,
}

/// Chi-square comparison of heat-bath and cluster-move chains with exact
/// enumeration over every graph, boundary condition and parameter pair.
/// The suite passes at family-wise `level`.
pub fn oracle_suite(run_id: &str, seed: u64, samples: u64, level: f64) -> anyhow::Result<OracleSuite> {
    let mut cases = Vec::new();
    for (gi, g) in test_graphs().iter().enumerate() {
        for wired in [false, true] {
            for q in QS {
                for p in PS {
                    for alg in [Algorithm::HeatBath, Algorithm::ClusterMove] {
                        let label = format!("oracle/{gi}/{wired}/{q}/{p}/{alg:?}");
                        cases.push((g.clone(), wired, q, p, alg, derive_seed(seed, &label)));
                    }
                }
            }
        }
    }
    let rows: Vec<OracleRow> = cases
        .par_iter()
        .map(|(g, wired, q, p, alg, s)| {
            let bc = if *wired { BoundaryCondition::wired(g) } else { BoundaryCondition::free(g) };
            let params = ModelParams::new(*p, *q)?;
            let c = oracle_chi_square(g, &bc, params, *alg, samples, *s)
                .with_context(|| format!("oracle check q={q} p={p} {alg:?}"))?;
            Ok(OracleRow {
                run_id: run_id.to_string(),
                graph_edges: c.graph_edges,
                bc: c.bc,
                p: c.p,
                q: c.q,
                algorithm: c.algorithm,
                samples: c.samples,
                thinning: c.thinning,
                chi2: c.chi2,
                dof: c.dof,
                p_value: c.p_value,
                seed: *s,
            })
        })
        .collect::<anyhow::Result<_>>()?;
    let threshold = level / rows.len() as f64;
    let min_p_value = rows.iter().map(|r| r.p_value).fold(1.0, f64::min);
    Ok(OracleSuite {
        passed: min_p_value >= threshold,
        rows,
        level,
        threshold,
        min_p_value,
    })
}

/// Outcome of the FKG / monotonicity / domain Markov suite.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ExactSuite {
    pub fkg_pairs: usize,
    /// Smallest `phi[A and B] - phi[A] phi[B]`.
    pub fkg_worst: f64,
    pub mon_pairs: usize,
    /// Smallest `phi^coarse[A] - phi^fine[A]`.
    pub mon_worst: f64,
    pub dmp_cases: usize,
    /// Largest sup-norm discrepancy.
    pub dmp_worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Every single-edge event, every two-edge intersection and union, and the
/// connection of the first and last vertex.
fn increasing_events(g: &FiniteGraph) -> Vec<Box<dyn Fn(u64) -> bool + Sync>> {
    let m = g.num_edges();
    let mut ev: Vec<Box<dyn Fn(u64) -> bool + Sync>> = Vec::new();
    for i in 0..m {
        ev.push(Box::new(move |x| x >> i & 1 == 1));
    }
    for i in 0..m {
        for j in i + 1..m {
            let both = 1u64 << i | 1 << j;
            ev.push(Box::new(move |x| x & both == both));
            ev.push(Box::new(move |x| x & both != 0));
        }
    }
    let (g2, last) = (g.clone(), g.num_vertices() - 1);
    ev.push(Box::new(move |x| connects(&g2, x, 0, last)));
    ev
}

/// Indicator table of each event over all configurations.
fn tables(g: &FiniteGraph) -> anyhow::Result<Vec<Vec<bool>>> {
    let m = g.num_edges();
    increasing_events(g)
        .iter()
        .enumerate()
        .map(|(k, e)| {
            anyhow::ensure!(is_increasing(m, e), "event {k} is not increasing");
            Ok((0..1u64 << m).map(|x| e(x)).collect())
        })
        .collect()
}

fn prob(probs: &[f64], t: &[bool]) -> f64 {
    probs.iter().zip(t).filter(|(_, &b)| b).map(|(p, _)| p).sum()
}

/// A chain of boundary partitions from free to wired, each coarser than the
/// one before.
fn partition_chain(g: &FiniteGraph) -> anyhow::Result<Vec<BoundaryCondition>> {
    let boundary: Vec<LatticePoint> = g.boundary_vertices().into_iter().map(|v| g.vertices()[v]).collect();
    let mut chain = vec![BoundaryCondition::free(g)];
    // Merge boundary vertices into the first block one at a time, skipping
    // steps that only rename the partition.
    let mut merged = vec![boundary[0]];
    for &b in &boundary[1..] {
        merged.push(b);
        let mut blocks = vec![merged.clone()];
        blocks.extend(boundary.iter().filter(|p| !merged.contains(p)).map(|&p| vec![p]));
        chain.push(BoundaryCondition::from_blocks(g, blocks)?);
    }
    for w in chain.windows(2) {
        anyhow::ensure!(w[1].is_coarser_than(&w[0]), "partition chain is not increasing");
    }
    Ok(chain)
}

pub fn exact_suite(tolerance: f64) -> anyhow::Result<ExactSuite> {
    let mut out = ExactSuite {
        fkg_worst: f64::INFINITY,
        mon_worst: f64::INFINITY,
        tolerance,
        ..Default::default()
    };
    for g in test_graphs() {
        let ev = tables(&g)?;
        let chain = partition_chain(&g)?;
        let params: Vec<ModelParams> = QS
            .iter()
            .flat_map(|&q| PS.iter().map(move |&p| ModelParams::new(p, q)))
            .collect::<Result<_, _>>()?;
        // FKG under free and wired conditions.
        let fkg: Vec<(usize, f64)> = params
            .par_iter()
            .flat_map_iter(|&pr| {
                [BoundaryCondition::free(&g), BoundaryCondition::wired(&g)]
                    .into_iter()
                    .map(move |bc| (pr, bc))
            })
            .map(|(pr, bc)| {
                let mu = ExactMeasure::new(&g, pr, &bc)?;
                let probs = mu.probabilities();
                let single: Vec<f64> = ev.iter().map(|t| prob(probs, t)).collect();
                let mut worst = f64::INFINITY;
                let mut n = 0;
                for a in 0..ev.len() {
                    for b in a..ev.len() {
                        let both: f64 = probs
                            .iter()
                            .zip(ev[a].iter().zip(&ev[b]))
                            .filter(|(_, (&x, &y))| x && y)
                            .map(|(p, _)| p)
                            .sum();
                        worst = worst.min(both - single[a] * single[b]);
                        n += 1;
                    }
                }
                Ok((n, worst))
            })
            .collect::<anyhow::Result<_>>()?;
        for (n, w) in fkg {
            out.fkg_pairs += n;
            out.fkg_worst = out.fkg_worst.min(w);
        }
        // Monotonicity along the partition chain.
        let mon: Vec<(usize, f64)> = params
            .par_iter()
            .map(|&pr| {
                let per_bc: Vec<Vec<f64>> = chain
                    .iter()
                    .map(|bc| {
                        let mu = ExactMeasure::new(&g, pr, bc)?;
                        Ok(ev.iter().map(|t| prob(mu.probabilities(), t)).collect())
                    })
                    .collect::<anyhow::Result<_>>()?;
                let mut worst = f64::INFINITY;
                let mut n = 0;
                for w in per_bc.windows(2) {
                    for (fine, coarse) in w[0].iter().zip(&w[1]) {
                        worst = worst.min(coarse - fine);
                        n += 1;
                    }
                }
                Ok((n, worst))
            })
            .collect::<anyhow::Result<_>>()?;
        for (n, w) in mon {
            out.mon_pairs += n;
            out.mon_worst = out.mon_worst.min(w);
        }
        // Domain Markov: condition on every configuration outside the edges
        // at the centre vertex (or at the origin for the square).
        let centre = g.vertex_index(LatticePoint::new(1, 1)).filter(|&v| !g.is_boundary(v)).unwrap_or(0);
        let sub: Vec<_> = g
            .edges()
            .iter()
            .copied()
            .filter(|e| {
                let (a, b) = e.endpoints();
                a == g.vertices()[centre] || b == g.vertices()[centre]
            })
            .collect();
        let rest: Vec<_> = g.edges().iter().copied().filter(|e| !sub.contains(e)).collect();
        let dmp: Vec<f64> = params
            .par_iter()
            .flat_map_iter(|&pr| {
                let rest = &rest;
                [false, true]
                    .into_iter()
                    .flat_map(move |wired| (0..1u64 << rest.len()).map(move |x| (pr, wired, x)))
            })
            .map(|(pr, wired, x)| {
                let bc = if wired { BoundaryCondition::wired(&g) } else { BoundaryCondition::free(&g) };
                let outside: Vec<_> = rest.iter().enumerate().map(|(i, &e)| (e, x >> i & 1 == 1)).collect();
                Ok(dmp_check(&g, pr, &bc, &sub, &outside)?)
            })
            .collect::<anyhow::Result<_>>()?;
        out.dmp_cases += dmp.len();
        out.dmp_worst = dmp.iter().fold(out.dmp_worst, |a, &b| a.max(b));
    }
    out.passed = out.fkg_worst >= -tolerance && out.mon_worst >= -tolerance && out.dmp_worst < tolerance;
    Ok(out)
}
