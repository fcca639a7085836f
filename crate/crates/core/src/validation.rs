//! Sampler validation against exact enumeration.

use serde::{Deserialize, Serialize};

use crate::exact::{ExactError, ExactMeasure};
use crate::graph::{BoundaryCondition, FiniteGraph, ModelParams};
use crate::sampler::{sample_chain, Algorithm, Chain, SamplerError, SamplerSpec};
use crate::stats::{chi_square_gof, integrated_autocorrelation};

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Outcome of one chain-versus-enumeration comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleCheck {
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
}

/// Updates between recorded samples so that successive samples are
/// effectively independent: a pilot run measures the autocorrelation of the
/// edge count and of the indicator of the most likely configuration, and the
/// gap is set to six times the larger of the two.
pub fn pilot_thinning(
    g: &FiniteGraph,
    bc: &BoundaryCondition,
    params: ModelParams,
    algorithm: Algorithm,
    seed: u64,
    pilot: usize,
) -> Result<u64, ValidationError> {
    if algorithm == Algorithm::Bernoulli || (params.q == 1.0 && algorithm == Algorithm::ClusterMove) {
        return Ok(1);
    }
    let exact = ExactMeasure::new(g, params, bc)?;
    let mode = exact
        .probabilities()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(m, _)| m as u64)
        .unwrap_or(0);
    let mut chain = Chain::new(g, params, bc, seed, u64::MAX)?;
    for _ in 0..200 {
        chain.step(algorithm);
    }
    let mut count = Vec::with_capacity(pilot);
    let mut at_mode = Vec::with_capacity(pilot);
    for _ in 0..pilot {
        chain.step(algorithm);
        count.push(chain.config().count_open() as f64);
        at_mode.push(if chain.config().mask() == mode { 1.0 } else { 0.0 });
    }
    let tau = integrated_autocorrelation(&count).max(integrated_autocorrelation(&at_mode));
    Ok((6.0 * tau).ceil() as u64)
}

/// Chi-square test of the full configuration histogram of a chain against
/// the exact measure.
pub fn oracle_chi_square(
    g: &FiniteGraph,
    bc: &BoundaryCondition,
    params: ModelParams,
    algorithm: Algorithm,
    samples: u64,
    seed: u64,
) -> Result<OracleCheck, ValidationError> {
    let exact = ExactMeasure::new(g, params, bc)?;
    let thinning = pilot_thinning(g, bc, params, algorithm, seed, 20_000)?;
    let spec = SamplerSpec {
        algorithm,
        sweeps: samples,
        burn_in: 200 * thinning,
        thinning,
        seed,
        params,
    };
    let mut hist = vec![0u64; 1 << g.num_edges()];
    sample_chain(g, bc, &spec, 0, |c| hist[c.mask() as usize] += 1)?;
    let r = chi_square_gof(&hist, exact.probabilities(), 0);
    Ok(OracleCheck {
        graph_edges: g.num_edges(),
        bc: bc.label(),
        p: params.p,
        q: params.q,
        algorithm,
        samples,
        thinning,
        chi2: r.statistic,
        dof: r.dof,
        p_value: r.p_value,
    })
}
