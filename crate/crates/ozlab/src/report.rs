//! Plot staging: which tables feed which figure, and the column layout
//! every table is written with.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::output::{verify_digests, RunManifest};

/// Header of every CSV the CLI writes.
pub const SCHEMAS: &[(&str, &[&str])] = &[
    ("two_point.csv", &["run_id", "direction", "n", "estimate", "stderr", "samples"]),
    ("lengths.csv", &["run_id", "method", "value", "stderr", "window"]),
    (
        "xi_fits.csv",
        &["run_id", "correction", "xi", "xi_stderr", "intercept", "window_lo", "window_hi", "residual_spread"],
    ),
    ("fit_residuals.csv", &["run_id", "correction", "n", "residual"]),
    (
        "ratios.csv",
        &[
            "run_id", "direction", "thickness", "m", "hit", "hit_stderr", "ratio", "ratio_stderr", "trials",
            "resolvable",
        ],
    ),
    ("gaps.csv", &["run_id", "r", "at_risk", "events", "hazard", "expected"]),
    ("gap_lengths.csv", &["run_id", "length", "observed", "censored"]),
    ("cones.csv", &["run_id", "alpha", "k", "exits", "total", "probability", "stderr"]),
    (
        "pieces.csv",
        &["run_id", "trace", "index", "start", "length", "displacement", "edges", "terminal", "killed"],
    ),
    (
        "exploration.csv",
        &[
            "run_id",
            "thickness",
            "n_slices",
            "attempts",
            "accepted",
            "acceptance",
            "acceptance_stderr",
            "truncated",
            "gap_horizon",
            "gap_r0",
            "hazard",
            "hazard_stderr",
            "rate",
            "rate_stderr",
            "chi2",
            "dof",
            "p_value",
        ],
    ),
    (
        "rates.csv",
        &["run_id", "label", "r_p", "zeta", "amplitude", "mass_gap_margin", "kappa", "mu", "sigma"],
    ),
    ("clt_histogram.csv", &["run_id", "z", "empirical", "gaussian"]),
    (
        "clt_summary.csv",
        &[
            "run_id",
            "n",
            "trials",
            "mu",
            "sigma",
            "ks",
            "ks_p_value",
            "local_sup",
            "bridge_pinned_count",
            "bridge_max_rel_dev",
            "bridge_mid_rel_dev",
        ],
    ),
    ("bridge.csv", &["run_id", "t", "pinned", "free", "pinned_expected", "free_expected"]),
    (
        "wulff.csv",
        &[
            "run_id",
            "theta_w",
            "zeta",
            "mu",
            "sigma",
            "theta_v",
            "xi_star",
            "xi",
            "zeta_stderr",
            "mu_stderr",
            "sigma_stderr",
            "xi_star_stderr",
            "xi_stderr",
        ],
    ),
    (
        "wulff_raw.csv",
        &[
            "run_id",
            "theta_w",
            "zeta",
            "mu",
            "sigma",
            "theta_v",
            "xi_star",
            "xi",
            "zeta_stderr",
            "mu_stderr",
            "sigma_stderr",
            "xi_star_stderr",
            "xi_stderr",
        ],
    ),
    (
        "oracle.csv",
        &["run_id", "graph_edges", "bc", "p", "q", "algorithm", "samples", "thinning", "chi2", "dof", "p_value", "seed"],
    ),
];

/// One figure for the plotting component to render.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotJob {
    pub kind: String,
    pub inputs: Vec<String>,
    pub output: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotPlan {
    pub run_id: String,
    pub jobs: Vec<PlotJob>,
}

const KINDS: &[(&str, &[&str])] = &[
    ("oz_fit", &["two_point.csv", "xi_fits.csv"]),
    ("survival_ratios", &["ratios.csv"]),
    ("gap_histogram", &["gap_lengths.csv", "gaps.csv"]),
    ("clt_histogram", &["clt_histogram.csv", "clt_summary.csv"]),
    ("wulff", &["wulff.csv", "shapes.json", "duality.json"]),
];

/// Plot jobs whose inputs all exist in `dir`.
pub fn plot_jobs(dir: &Path) -> Vec<PlotJob> {
    KINDS
        .iter()
        .filter(|(_, inputs)| inputs.iter().all(|f| dir.join(f).is_file()))
        .map(|(kind, inputs)| PlotJob {
            kind: kind.to_string(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            output: format!("{kind}.svg"),
        })
        .collect()
}

/// Check the header of a CSV against its documented schema.
pub fn check_header(path: &Path) -> anyhow::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let Some((_, cols)) = SCHEMAS.iter().find(|(n, _)| *n == name) else {
        return Ok(());
    };
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let got: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if got != *cols {
        bail!("{name}: columns {got:?}, expected {cols:?}");
    }
    Ok(())
}

/// Verify a finished run directory and return its plot plan: the manifest
/// digests must match and every CSV must carry its documented header.
pub fn stage_plots(dir: &Path) -> anyhow::Result<PlotPlan> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    if manifest.status != "ok" {
        bail!("run {} did not finish: {}", manifest.run_id, manifest.error.unwrap_or_default());
    }
    let bad = verify_digests(dir, &manifest)?;
    if !bad.is_empty() {
        bail!("files changed since the run: {}", bad.join(", "));
    }
    for f in &manifest.files {
        if f.path.ends_with(".csv") {
            check_header(&dir.join(&f.path))?;
        }
    }
    Ok(PlotPlan {
        run_id: manifest.run_id,
        jobs: plot_jobs(dir),
    })
}
