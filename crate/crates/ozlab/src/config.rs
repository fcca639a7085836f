//! Experiment configuration: parsing, defaults and validation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ozlab_core::graph::ModelParams;
use ozlab_core::sampler::Algorithm;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub model: Model,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_point: Option<TwoPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfspace: Option<Halfspace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploration: Option<Exploration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmrp: Option<Kmrp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wulff: Option<Wulff>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    Free,
    Wired,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    pub p: f64,
    #[serde(default = "one")]
    pub q: f64,
    /// Side of the square box used by Markov chain runs.
    #[serde(default = "d_box", rename = "box")]
    pub side: u32,
    #[serde(default = "d_bc")]
    pub bc: Bc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampler {
    #[serde(default = "d_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default = "d_burn_in")]
    pub burn_in: u64,
    #[serde(default = "one_u64")]
    pub thinning: u64,
    #[serde(default = "d_chain_samples")]
    pub samples: u64,
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler {
            algorithm: d_algorithm(),
            burn_in: d_burn_in(),
            thinning: 1,
            samples: d_chain_samples(),
        }
    }
}

/// Two-point function along one direction and the correlation-length fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPoint {
    #[serde(default)]
    pub angle_deg: f64,
    #[serde(default = "d_n_max")]
    pub n_max: u32,
    /// Cluster-growth samples (q = 1).
    #[serde(default = "d_growth_samples")]
    pub samples: u64,
    /// Distance kept between pair endpoints and the box edge (chain runs).
    #[serde(default = "d_margin")]
    pub margin: u32,
    #[serde(default = "d_radius")]
    pub radius: i32,
}

/// Half-space hitting probabilities and the survival rate `zeta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Halfspace {
    #[serde(default)]
    pub angle_deg: f64,
    /// Slab thickness; the characteristic length when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness: Option<u32>,
    #[serde(default = "d_m_max")]
    pub m_max: u32,
    #[serde(default = "d_growth_samples")]
    pub samples: u64,
    #[serde(default = "d_radius")]
    pub radius: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exploration {
    #[serde(default)]
    pub angle_deg: f64,
    /// Slab thickness; the characteristic length when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness: Option<u32>,
    #[serde(default = "d_n_slices")]
    pub n_slices: u32,
    #[serde(default = "d_wanted")]
    pub wanted: usize,
    #[serde(default = "d_budget")]
    pub budget: u64,
    #[serde(default = "d_radius")]
    pub radius: i32,
    /// Gaps are read up to this slice; `n_slices - 2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_horizon: Option<i64>,
    #[serde(default = "d_r0")]
    pub gap_r0: i64,
    #[serde(default = "d_alpha")]
    pub cone_alpha: f64,
    #[serde(default = "d_cone_k")]
    pub cone_k: Vec<u32>,
    #[serde(default = "yes")]
    pub write_traces: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kmrp {
    /// Path to a step-law JSON file, or `from-exploration`.
    #[serde(default = "d_law")]
    pub law: String,
    /// Unconditioned explorations used to build the law.
    #[serde(default = "d_law_traces")]
    pub law_traces: usize,
    #[serde(default = "d_law_max_slices")]
    pub law_max_slices: u32,
    #[serde(default = "one_u32")]
    pub law_thickness: u32,
    #[serde(default = "one")]
    pub x_lattice: f64,
    /// Run the local CLT and bridge checks after solving.
    #[serde(default = "yes")]
    pub check: bool,
    #[serde(default = "d_clt_n")]
    pub n: usize,
    #[serde(default = "d_trials")]
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wulff {
    #[serde(default = "d_per_quadrant")]
    pub per_quadrant: usize,
    #[serde(default = "d_wulff_samples")]
    pub survey_samples: u64,
    #[serde(default = "d_batches")]
    pub batches: u64,
    /// Slab thickness for `zeta`.
    #[serde(default = "d_wulff_thickness")]
    pub thickness: u32,
    /// Centre and half width of the threshold window, lattice units.
    #[serde(default = "d_offset_centre")]
    pub offset_centre: f64,
    #[serde(default = "d_offset_half")]
    pub offset_half: f64,
    #[serde(default = "d_wanted")]
    pub wanted: usize,
    #[serde(default = "d_wulff_slices")]
    pub n_slices: u32,
    #[serde(default = "d_budget")]
    pub budget: u64,
    #[serde(default = "d_radius")]
    pub radius: i32,
}

fn one() -> f64 {
    1.0
}
fn one_u32() -> u32 {
    1
}
fn one_u64() -> u64 {
    1
}
fn yes() -> bool {
    true
}
fn d_box() -> u32 {
    128
}
fn d_bc() -> Bc {
    Bc::Free
}
fn d_algorithm() -> Algorithm {
    Algorithm::ClusterMove
}
fn d_burn_in() -> u64 {
    500
}
fn d_chain_samples() -> u64 {
    20_000
}
fn d_n_max() -> u32 {
    30
}
fn d_growth_samples() -> u64 {
    10_000_000
}
fn d_margin() -> u32 {
    16
}
fn d_radius() -> i32 {
    64
}
fn d_m_max() -> u32 {
    8
}
fn d_n_slices() -> u32 {
    20
}
fn d_wanted() -> usize {
    10_000
}
fn d_budget() -> u64 {
    1_000_000_000
}
fn d_r0() -> i64 {
    4
}
fn d_alpha() -> f64 {
    4.0
}
fn d_cone_k() -> Vec<u32> {
    (0..=5).collect()
}
fn d_law() -> String {
    "from-exploration".into()
}
fn d_law_traces() -> usize {
    1_000_000
}
fn d_law_max_slices() -> u32 {
    60
}
fn d_clt_n() -> usize {
    2000
}
fn d_trials() -> usize {
    100_000
}
fn d_per_quadrant() -> usize {
    16
}
fn d_wulff_samples() -> u64 {
    20_000_000
}
fn d_batches() -> u64 {
    20
}
fn d_wulff_thickness() -> u32 {
    4
}
fn d_offset_centre() -> f64 {
    5.0
}
fn d_offset_half() -> f64 {
    2.0
}
fn d_wulff_slices() -> u32 {
    12
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        ExperimentConfig::parse(&text)
    }

    pub fn parse(text: &str) -> anyhow::Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configuration with only a model, for subcommands that add one stage.
    pub fn bare(p: f64, q: f64, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            seed,
            out: None,
            model: Model {
                p,
                q,
                side: d_box(),
                bc: d_bc(),
            },
            sampler: Sampler::default(),
            two_point: None,
            halfspace: None,
            exploration: None,
            kmrp: None,
            wulff: None,
        }
    }

    pub fn params(&self) -> anyhow::Result<ModelParams> {
        Ok(ModelParams::new(self.model.p, self.model.q)?)
    }

    /// Every default written out; this text defines the run id.
    pub fn resolved(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let params = self.params()?;
        let q1 = self.model.q == 1.0;
        if !params.is_subcritical() && (self.halfspace.is_some() || self.exploration.is_some() || self.wulff.is_some()) {
            bail!("model.p = {} is not below p_c = {:.6}", self.model.p, ModelParams::p_critical(self.model.q));
        }
        if !q1 {
            for (name, present) in [
                ("halfspace", self.halfspace.is_some()),
                ("exploration", self.exploration.is_some()),
                ("wulff", self.wulff.is_some()),
            ] {
                if present {
                    bail!("[{name}] grows independent clusters and needs model.q = 1");
                }
            }
            if self.kmrp.as_ref().is_some_and(|k| k.law == "from-exploration") {
                bail!("[kmrp] law = \"from-exploration\" needs model.q = 1");
            }
        }
        if self.sampler.samples == 0 || self.sampler.thinning == 0 {
            bail!("[sampler] samples and thinning must be positive");
        }
        if let Some(t) = &self.two_point {
            if t.n_max == 0 {
                bail!("[two_point] n_max must be positive");
            }
            if !q1 && 2 * (t.n_max + t.margin) >= self.model.side {
                bail!("[two_point] n_max + margin does not fit in the {}-box", self.model.side);
            }
            if q1 && t.n_max as i32 >= t.radius {
                bail!("[two_point] n_max must be below radius");
            }
        }
        if let Some(h) = &self.halfspace {
            if h.thickness == Some(0) || h.m_max == 0 || h.samples == 0 {
                bail!("[halfspace] thickness, m_max and samples must be positive");
            }
        }
        if let Some(e) = &self.exploration {
            if e.thickness == Some(0) || e.wanted == 0 {
                bail!("[exploration] thickness and wanted must be positive");
            }
            if e.cone_alpha <= 0.0 {
                bail!("[exploration] cone_alpha must be positive");
            }
        }
        if let Some(k) = &self.kmrp {
            if k.law_thickness == 0 || k.x_lattice <= 0.0 || k.n == 0 || k.trials == 0 {
                bail!("[kmrp] law_thickness, x_lattice, n and trials must be positive");
            }
        }
        if let Some(w) = &self.wulff {
            if w.per_quadrant < 2 || w.batches < 2 || w.thickness == 0 {
                bail!("[wulff] needs per_quadrant >= 2, batches >= 2 and a positive thickness");
            }
            if w.offset_half < 0.0 || w.offset_centre - w.offset_half < 0.0 {
                bail!("[wulff] threshold window must lie at non-negative distances");
            }
            if w.n_slices < 5 {
                bail!("[wulff] n_slices must be at least 5");
            }
        }
        Ok(())
    }
}
