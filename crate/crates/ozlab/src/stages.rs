//! Pipeline stages. Each stage reads the configuration, runs one module
//! entry point and writes its tables; stages share nothing but files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use ozlab_core::explore::{
    cone_stats, conditioned_ensemble, empirical_step_law, gap_data, piece_decomposition, tail_fit, Ensemble,
    EnsembleSpec, TraceRecord,
};
use ozlab_core::geometry::Direction;
use ozlab_core::growth::{survey_batches, SurveyResult, SurveySpec};
use ozlab_core::kmrp::{bridge_statistics, local_clt_check, solve_rate, tilted_law, RateRow, StepLaw};
use ozlab_core::observables::{
    characteristic_length, estimate_xi, halfspace_hits, last_resolvable_window, ratio_spread, resolvable,
    survival_ratios, targets, two_point_curve_chain, two_point_from_survey, two_point_rows, zeta_offset_averaged,
    ChainSettings, Correction, FitWindow, LengthEstimate, LengthRow, XiFit,
};
use ozlab_core::rng::derive_seed;
use ozlab_core::wulff::{
    angle_map, build_shapes, convexity_check, drift_from_traces, duality_check, quadrant_grid, symmetrize,
    ConvexityReport, DirectionProfile, DualityReport, WulffRow,
};
use serde::{Deserialize, Serialize};

use crate::config::{Bc, ExperimentConfig};
use crate::output::{run_id, Output, RunManifest};
use crate::report::{plot_jobs, PlotJob};

/// Growth chunk size; part of the random-stream layout, so fixed.
const CHUNK: u64 = 100_000;
/// Crossing-probability threshold defining the characteristic length.
pub const DELTA: f64 = 0.05;

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out: Output,
    seeds: BTreeMap<String, u64>,
    lengths: Vec<LengthRow>,
    plots: Vec<PlotJob>,
    /// Characteristic length, computed once when a stage needs it.
    char_length: Option<u32>,
}

impl Ctx<'_> {
    fn seed(&mut self, label: &str) -> u64 {
        let s = derive_seed(self.cfg.seed, label);
        self.seeds.insert(label.to_string(), s);
        s
    }

    fn run_id(&self) -> String {
        self.out.run_id().to_string()
    }

    fn length(&mut self, est: &LengthEstimate) {
        let row = LengthRow::new(self.out.run_id(), est);
        self.lengths.push(row);
    }

    fn characteristic_length(&mut self) -> anyhow::Result<u32> {
        if let Some(l) = self.char_length {
            return Ok(l);
        }
        let seed = self.seed("characteristic_length");
        let est = characteristic_length(self.cfg.params()?, DELTA, 256, 20_000, seed, None)?;
        self.length(&est);
        let l = (est.value.round() as u32).max(1);
        self.char_length = Some(l);
        Ok(l)
    }
}

/// Directory named by `OZLAB_CACHE`, if set.
fn cache_dir() -> Option<PathBuf> {
    std::env::var_os("OZLAB_CACHE").filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Survey split into `batches` parts, reused from `OZLAB_CACHE` when an
/// identical request was made before.
pub fn cached_survey(spec: &SurveySpec, batches: u64) -> anyhow::Result<Vec<SurveyResult>> {
    let Some(dir) = cache_dir() else {
        return Ok(survey_batches(spec, batches));
    };
    let key = crate::output::sha256_hex(serde_json::to_string(&(spec, batches))?.as_bytes());
    let path = dir.join(format!("survey-{}.json", &key[..24]));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(parts) = serde_json::from_str::<Vec<SurveyResult>>(&text) {
            return Ok(parts);
        }
    }
    let parts = survey_batches(spec, batches);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating cache {}", dir.display()))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, serde_json::to_string(&parts)?)?;
    std::fs::rename(&tmp, &path)?;
    Ok(parts)
}

fn direction(angle_deg: f64) -> Direction {
    if angle_deg == 0.0 {
        Direction::e1()
    } else {
        Direction::from_angle(angle_deg.to_radians())
    }
}

#[derive(Serialize)]
struct FitRow {
    run_id: String,
    correction: Correction,
    xi: f64,
    xi_stderr: f64,
    intercept: f64,
    window_lo: f64,
    window_hi: f64,
    residual_spread: f64,
}

#[derive(Serialize)]
struct ResidualRow {
    run_id: String,
    correction: Correction,
    n: u32,
    residual: f64,
}

fn two_point(ctx: &mut Ctx) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let t = cfg.two_point.as_ref().expect("stage requested");
    let v = direction(t.angle_deg);
    let ns: Vec<u32> = (0..=t.n_max).collect();
    let seed = ctx.seed("two_point");
    let curve = if cfg.model.q == 1.0 {
        let spec = SurveySpec {
            p: cfg.model.p,
            samples: t.samples,
            radius: t.radius,
            seed,
            targets: targets(&v, &ns),
            directions: vec![],
            level_scale: vec![],
            chunk: CHUNK,
        };
        let parts = cached_survey(&spec, 1)?;
        two_point_from_survey(&v, &ns, &parts[0], 0)
    } else {
        let chain = ChainSettings {
            algorithm: cfg.sampler.algorithm,
            burn_in: cfg.sampler.burn_in,
            thinning: cfg.sampler.thinning,
            samples: cfg.sampler.samples,
        };
        two_point_curve_chain(
            &v,
            &ns,
            cfg.params()?,
            cfg.model.side,
            t.margin,
            cfg.model.bc == Bc::Wired,
            seed,
            &chain,
        )?
    };
    let id = ctx.run_id();
    ctx.out.csv("two_point.csv", &two_point_rows(&id, &curve))?;
    let fits: Vec<XiFit> = [Correction::None, Correction::Oz]
        .into_iter()
        .map(|c| estimate_xi(&curve, c, FitWindow::Auto))
        .collect::<Result<_, _>>()?;
    let mut fit_rows = Vec::new();
    let mut residuals = Vec::new();
    for f in &fits {
        ctx.length(&f.xi);
        fit_rows.push(FitRow {
            run_id: id.clone(),
            correction: f.correction,
            xi: f.xi.value,
            xi_stderr: f.xi.stderr,
            intercept: f.intercept,
            window_lo: f.xi.window.0,
            window_hi: f.xi.window.1,
            residual_spread: f.residual_spread,
        });
        residuals.extend(f.residuals.iter().map(|&(n, r)| ResidualRow {
            run_id: id.clone(),
            correction: f.correction,
            n,
            residual: r,
        }));
    }
    ctx.out.csv("xi_fits.csv", &fit_rows)?;
    ctx.out.csv("fit_residuals.csv", &residuals)?;
    Ok(())
}

#[derive(Serialize)]
struct RatioRow {
    run_id: String,
    direction: f64,
    thickness: u32,
    m: u32,
    hit: f64,
    hit_stderr: f64,
    ratio: Option<f64>,
    ratio_stderr: Option<f64>,
    trials: Option<u64>,
    resolvable: bool,
}

/// Summary of the half-space stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HalfspaceSummary {
    pub run_id: String,
    pub thickness: u32,
    pub window: Vec<u32>,
    pub spread: f64,
    pub zeta: LengthEstimate,
    /// `zeta` from the two disjoint halves of the last resolvable window.
    pub halves: Option<(LengthEstimate, LengthEstimate)>,
    pub truncated: u64,
    pub samples: u64,
}

fn halfspace(ctx: &mut Ctx) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let h = cfg.halfspace.as_ref().expect("stage requested");
    let l = match h.thickness {
        Some(l) => l,
        None => ctx.characteristic_length()?,
    };
    let w = direction(h.angle_deg);
    let spec = SurveySpec {
        p: cfg.model.p,
        samples: h.samples,
        radius: h.radius,
        seed: ctx.seed("halfspace"),
        targets: vec![],
        directions: vec![w],
        level_scale: vec![],
        chunk: CHUNK,
    };
    let res = cached_survey(&spec, 1)?.remove(0);
    let hits = halfspace_hits(&res, 0, l, h.m_max);
    let ratios = survival_ratios(&hits);
    let id = ctx.run_id();
    let rows: Vec<RatioRow> = hits
        .iter()
        .enumerate()
        .map(|(m, e)| {
            let r = m.checked_sub(1).and_then(|i| ratios.get(i));
            RatioRow {
                run_id: id.clone(),
                direction: w.angle(),
                thickness: l,
                m: m as u32,
                hit: e.value,
                hit_stderr: e.stderr,
                ratio: r.map(|r| r.ratio),
                ratio_stderr: r.map(|r| r.stderr),
                trials: r.map(|r| r.trials),
                resolvable: r.is_some_and(resolvable),
            }
        })
        .collect();
    ctx.out.csv("ratios.csv", &rows)?;
    let window = last_resolvable_window(&ratios);
    let (&a, &b) = window
        .first()
        .zip(window.last())
        .ok_or_else(|| anyhow!("no resolvable survival ratio; raise samples"))?;
    let zeta = ozlab_core::observables::zeta_from_ratios(&ratios, a, b).expect("window is non-empty");
    ctx.length(&zeta);
    let halves = window.split_at(window.len() / 2);
    let halves = match (halves.0.first(), halves.0.last(), halves.1.first(), halves.1.last()) {
        (Some(&a0), Some(&a1), Some(&b0), Some(&b1)) => Some((
            ozlab_core::observables::zeta_from_ratios(&ratios, a0, a1).expect("non-empty"),
            ozlab_core::observables::zeta_from_ratios(&ratios, b0, b1).expect("non-empty"),
        )),
        _ => None,
    };
    let summary = HalfspaceSummary {
        run_id: id,
        thickness: l,
        spread: ratio_spread(&ratios, &window),
        window,
        zeta,
        halves,
        truncated: res.truncated,
        samples: res.samples,
    };
    ctx.out.json("halfspace.json", &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct TraceLine<'a> {
    run_id: &'a str,
    #[serde(flatten)]
    trace: TraceRecord,
}

#[derive(Serialize)]
struct GapRow {
    run_id: String,
    r: i64,
    at_risk: u64,
    events: u64,
    hazard: f64,
    expected: f64,
}

#[derive(Serialize)]
struct GapLengthRow {
    run_id: String,
    length: i64,
    observed: u64,
    censored: u64,
}

#[derive(Serialize)]
struct ConeRow {
    run_id: String,
    alpha: f64,
    k: u32,
    exits: u64,
    total: u64,
    probability: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct PieceRow {
    run_id: String,
    trace: usize,
    index: usize,
    start: i64,
    length: i64,
    displacement: Option<f64>,
    edges: u32,
    terminal: bool,
    killed: bool,
}

/// Summary of the exploration stage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExplorationSummary {
    pub run_id: String,
    pub thickness: u32,
    pub n_slices: u32,
    pub attempts: u64,
    pub accepted: u64,
    pub acceptance: f64,
    pub acceptance_stderr: f64,
    pub truncated: usize,
    pub gap_horizon: i64,
    pub gap_r0: i64,
    pub hazard: f64,
    pub hazard_stderr: f64,
    pub rate: f64,
    pub rate_stderr: f64,
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn exploration(ctx: &mut Ctx) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let e = cfg.exploration.as_ref().expect("stage requested");
    let l = match e.thickness {
        Some(l) => l,
        None => ctx.characteristic_length()?,
    };
    let spec = EnsembleSpec {
        p: cfg.model.p,
        direction: direction(e.angle_deg),
        thickness: l,
        n_slices: e.n_slices,
        max_slices: 0,
        wanted: e.wanted,
        budget: e.budget,
        radius: e.radius,
        seed: ctx.seed("exploration"),
        chunk: CHUNK,
    };
    let ens = conditioned_ensemble(&spec)?;
    let id = ctx.run_id();
    if e.write_traces {
        ctx.out.jsonl(
            "traces.jsonl",
            ens.traces().map(|t| TraceLine {
                run_id: &id,
                trace: t.record(),
            }),
        )?;
        let pieces: Vec<PieceRow> = ens
            .explorations
            .iter()
            .enumerate()
            .flat_map(|(i, ex)| {
                let id = &id;
                piece_decomposition(ex).into_iter().map(move |p| PieceRow {
                    run_id: id.clone(),
                    trace: i,
                    index: p.index,
                    start: p.start,
                    length: p.length,
                    displacement: p.displacement,
                    edges: p.edges,
                    terminal: p.terminal,
                    killed: p.killed,
                })
            })
            .collect();
        ctx.out.csv("pieces.csv", &pieces)?;
    }
    let horizon = e.gap_horizon.unwrap_or(e.n_slices as i64 - 2);
    let gd = gap_data(ens.traces(), horizon);
    let mut lengths: BTreeMap<i64, (u64, u64)> = BTreeMap::new();
    for &(r, observed) in &gd.gaps {
        let c = lengths.entry(r).or_default();
        if observed {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    ctx.out.csv(
        "gap_lengths.csv",
        &lengths
            .iter()
            .map(|(&length, &(observed, censored))| GapLengthRow {
                run_id: id.clone(),
                length,
                observed,
                censored,
            })
            .collect::<Vec<_>>(),
    )?;
    let fit = tail_fit(&gd, e.gap_r0, 5.0).ok_or_else(|| anyhow!("no gaps of length >= {}", e.gap_r0))?;
    ctx.out.csv(
        "gaps.csv",
        &fit.table
            .iter()
            .map(|&(r, at_risk, events)| GapRow {
                run_id: id.clone(),
                r,
                at_risk,
                events,
                hazard: events as f64 / at_risk as f64,
                expected: fit.hazard * at_risk as f64,
            })
            .collect::<Vec<_>>(),
    )?;
    let cones: Vec<ConeRow> = cone_stats(&ens.explorations, e.cone_alpha, &e.cone_k)
        .into_iter()
        .map(|(k, exits, total)| {
            let pr = exits as f64 / total as f64;
            ConeRow {
                run_id: id.clone(),
                alpha: e.cone_alpha,
                k,
                exits,
                total,
                probability: pr,
                stderr: (pr * (1.0 - pr) / total as f64).sqrt(),
            }
        })
        .collect();
    ctx.out.csv("cones.csv", &cones)?;
    let (acceptance, acceptance_stderr) = ens.acceptance();
    let summary = ExplorationSummary {
        run_id: id,
        thickness: l,
        n_slices: e.n_slices,
        attempts: ens.attempts,
        accepted: ens.accepted,
        acceptance,
        acceptance_stderr,
        truncated: ens.traces().filter(|t| t.truncated).count(),
        gap_horizon: horizon,
        gap_r0: e.gap_r0,
        hazard: fit.hazard,
        hazard_stderr: fit.hazard_stderr,
        rate: fit.rate,
        rate_stderr: fit.rate_stderr,
        chi2: fit.chi2,
        dof: fit.dof,
        p_value: fit.p_value,
    };
    ctx.out.csv("exploration.csv", &[summary])?;
    Ok(())
}

#[derive(Serialize)]
struct CltRow {
    run_id: String,
    z: f64,
    empirical: f64,
    gaussian: f64,
}

/// Local CLT and bridge summary for one law.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KmrpCheckRow {
    pub run_id: String,
    pub n: usize,
    pub trials: usize,
    pub mu: f64,
    pub sigma: f64,
    pub ks: f64,
    pub ks_p_value: f64,
    pub local_sup: f64,
    pub bridge_pinned_count: usize,
    pub bridge_max_rel_dev: f64,
    /// `pinned / (sigma^2 n t (1 - t)) - 1` at `t = 1/2`.
    pub bridge_mid_rel_dev: f64,
}

#[derive(Serialize)]
struct BridgeRow {
    run_id: String,
    t: f64,
    pinned: f64,
    free: f64,
    pinned_expected: f64,
    free_expected: f64,
}

#[derive(Serialize)]
struct LawFile<'a> {
    run_id: &'a str,
    #[serde(flatten)]
    law: &'a StepLaw,
}

/// Step law from unconditioned explorations.
fn law_from_exploration(ctx: &mut Ctx) -> anyhow::Result<StepLaw> {
    let cfg = ctx.cfg;
    let k = cfg.kmrp.as_ref().expect("stage requested");
    let angle = cfg.exploration.as_ref().map_or(0.0, |e| e.angle_deg);
    let spec = EnsembleSpec {
        p: cfg.model.p,
        direction: direction(angle),
        thickness: k.law_thickness,
        n_slices: 0,
        max_slices: k.law_max_slices,
        wanted: k.law_traces,
        budget: k.law_traces as u64,
        radius: cfg.exploration.as_ref().map_or(64, |e| e.radius),
        seed: ctx.seed("kmrp_law"),
        chunk: CHUNK,
    };
    let ens: Ensemble = conditioned_ensemble(&spec)?;
    Ok(empirical_step_law(&ens.explorations, k.x_lattice, 1000)?)
}

fn kmrp(ctx: &mut Ctx, base: &Path) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let k = cfg.kmrp.as_ref().expect("stage requested");
    let law = if k.law == "from-exploration" {
        law_from_exploration(ctx)?
    } else {
        let path = base.join(&k.law);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        StepLaw::from_json(&text)?
    };
    let id = ctx.run_id();
    ctx.out.json("law.json", &LawFile { run_id: &id, law: &law })?;
    let sol = solve_rate(&law)?;
    let (tilted, _, drift) = tilted_law(&law)?;
    ctx.out.csv("rates.csv", &[RateRow::new(&id, "law", &law, &sol, &drift)])?;
    if !k.check {
        return Ok(());
    }
    let clt = local_clt_check(&tilted, k.n, k.trials, ctx.seed("kmrp_clt"))?;
    let bridge = bridge_statistics(&tilted, k.n, k.trials, ctx.seed("kmrp_bridge"))?;
    ctx.out.csv(
        "clt_histogram.csv",
        &clt.histogram
            .iter()
            .map(|&(z, empirical, gaussian)| CltRow {
                run_id: id.clone(),
                z,
                empirical,
                gaussian,
            })
            .collect::<Vec<_>>(),
    )?;
    let var_n = bridge.sigma * bridge.sigma * bridge.n as f64;
    let rows: Vec<BridgeRow> = bridge
        .ts
        .iter()
        .zip(bridge.pinned.iter().zip(&bridge.free))
        .map(|(&t, (&pinned, &free))| BridgeRow {
            run_id: id.clone(),
            t,
            pinned,
            free,
            pinned_expected: var_n * t * (1.0 - t),
            free_expected: var_n * t,
        })
        .collect();
    let mid = rows
        .iter()
        .find(|r| (r.t - 0.5).abs() < 1e-9)
        .map_or(f64::NAN, |r| r.pinned / r.pinned_expected - 1.0);
    ctx.out.csv("bridge.csv", &rows)?;
    ctx.out.csv(
        "clt_summary.csv",
        &[KmrpCheckRow {
            run_id: id,
            n: clt.n,
            trials: clt.trials,
            mu: clt.mu,
            sigma: clt.sigma,
            ks: clt.ks,
            ks_p_value: clt.ks_p_value,
            local_sup: clt.local_sup,
            bridge_pinned_count: bridge.pinned_count,
            bridge_max_rel_dev: bridge.max_rel_dev,
            bridge_mid_rel_dev: mid,
        }],
    )?;
    Ok(())
}

/// Wulff-stage report written to `duality.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WulffSummary {
    pub run_id: String,
    /// Drift along `e1` as measured, before symmetrization.
    pub mu_e1: f64,
    pub mu_e1_stderr: f64,
    pub max_xi_star_asymmetry: f64,
    pub max_mu_asymmetry: f64,
    pub duality: DualityReport,
    pub max_argmax_angle_error_deg: f64,
    pub angle_map_monotone: bool,
    pub angle_map: Vec<f64>,
    pub convexity: ConvexityReport,
}

#[derive(Serialize)]
struct Shapes<'a> {
    run_id: &'a str,
    #[serde(flatten)]
    shapes: ozlab_core::wulff::ShapeApprox,
}

fn wulff(ctx: &mut Ctx) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let w = cfg.wulff.as_ref().expect("stage requested");
    let dirs = quadrant_grid(w.per_quadrant);
    let scale = 20.0;
    let spec = SurveySpec {
        p: cfg.model.p,
        samples: w.survey_samples,
        radius: w.radius,
        seed: ctx.seed("wulff_survey"),
        targets: vec![],
        directions: dirs.clone(),
        level_scale: vec![scale; dirs.len()],
        chunk: CHUNK,
    };
    let parts = cached_survey(&spec, w.batches)?;
    let ens_seed = ctx.seed("wulff_ensembles");
    let mut quadrant = Vec::with_capacity(dirs.len());
    for (j, d) in dirs.iter().enumerate() {
        let zeta = zeta_offset_averaged(&parts, j, scale, w.thickness, w.offset_centre, w.offset_half)?;
        let es = EnsembleSpec {
            p: cfg.model.p,
            direction: *d,
            thickness: 1,
            n_slices: w.n_slices,
            max_slices: 0,
            wanted: w.wanted,
            budget: w.budget,
            radius: w.radius,
            seed: derive_seed(ens_seed, &j.to_string()),
            chunk: CHUNK,
        };
        let ens = conditioned_ensemble(&es)?;
        let drift = drift_from_traces(ens.traces(), 2, w.n_slices as i64 - 2)?;
        quadrant.push(DirectionProfile::new(*d, zeta, w.thickness as f64, drift));
    }
    let id = ctx.run_id();
    ctx.out.csv(
        "wulff_raw.csv",
        &quadrant.iter().map(|p| WulffRow::new(&id, p)).collect::<Vec<_>>(),
    )?;
    let sym = symmetrize(&quadrant)?;
    ctx.out.csv(
        "wulff.csv",
        &sym.profiles.iter().map(|p| WulffRow::new(&id, p)).collect::<Vec<_>>(),
    )?;
    let shapes = build_shapes(&sym.profiles, cfg.model.p, cfg.model.q);
    let se: Vec<f64> = sym.profiles.iter().map(|p| p.xi_star_stderr).collect();
    let convexity = convexity_check(&shapes.w, &se, 2.0);
    ctx.out.json("shapes.json", &Shapes { run_id: &id, shapes })?;
    let duality = duality_check(&sym.profiles);
    let (angles, monotone) = angle_map(&sym.profiles);
    let summary = WulffSummary {
        run_id: id,
        mu_e1: quadrant[0].drift.mu,
        mu_e1_stderr: quadrant[0].drift.mu_stderr,
        max_xi_star_asymmetry: sym.max_xi_star_asymmetry,
        max_mu_asymmetry: sym.max_mu_asymmetry,
        max_argmax_angle_error_deg: duality
            .argmax_angle_error
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()))
            .to_degrees(),
        duality,
        angle_map_monotone: monotone,
        angle_map: angles,
        convexity,
    };
    ctx.out.json("duality.json", &summary)?;
    Ok(())
}

fn stages(ctx: &mut Ctx, base: &Path) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let t0 = Instant::now();
    let timed = |name: &str, r: anyhow::Result<()>| -> anyhow::Result<()> {
        r.with_context(|| format!("stage {name}"))?;
        eprintln!("ozlab: {name} done ({:.1} s)", t0.elapsed().as_secs_f64());
        Ok(())
    };
    if cfg.two_point.is_some() {
        let r = two_point(ctx);
        timed("two_point", r)?;
    }
    if cfg.halfspace.is_some() {
        let r = halfspace(ctx);
        timed("halfspace", r)?;
    }
    if cfg.exploration.is_some() {
        let r = exploration(ctx);
        timed("exploration", r)?;
    }
    if cfg.kmrp.is_some() {
        let r = kmrp(ctx, base);
        timed("kmrp", r)?;
    }
    if cfg.wulff.is_some() {
        let r = wulff(ctx);
        timed("wulff", r)?;
    }
    Ok(())
}

/// Run every stage the configuration requests, writing into `out_dir`.
/// Relative law paths resolve against `base`. A manifest is written even on
/// failure, with status `failed`; the error is returned after it.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path, base: &Path, threads: usize) -> (RunManifest, anyhow::Result<()>) {
    let start = Instant::now();
    let resolved = cfg.resolved();
    let id = run_id(&resolved);
    let mut manifest = RunManifest {
        run_id: id.clone(),
        status: "failed".into(),
        error: None,
        code_version: env!("CARGO_PKG_VERSION").into(),
        resolved_config: resolved.clone(),
        seeds: BTreeMap::new(),
        threads,
        wall_clock_seconds: 0.0,
        files: vec![],
    };
    let out = match Output::new(out_dir, &id) {
        Ok(o) => o,
        Err(e) => {
            manifest.error = Some(format!("{e:#}"));
            return (manifest, Err(e));
        }
    };
    let mut ctx = Ctx {
        cfg,
        out,
        seeds: BTreeMap::new(),
        lengths: Vec::new(),
        plots: Vec::new(),
        char_length: None,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
    let result = match pool {
        Ok(pool) => pool.install(|| {
            ctx.out.text("resolved_config.toml", &resolved)?;
            stages(&mut ctx, base)?;
            if !ctx.lengths.is_empty() {
                let rows = std::mem::take(&mut ctx.lengths);
                ctx.out.csv("lengths.csv", &rows)?;
            }
            ctx.plots = plot_jobs(ctx.out.dir());
            if !ctx.plots.is_empty() {
                let plots = std::mem::take(&mut ctx.plots);
                ctx.out.json("plots.json", &crate::report::PlotPlan { run_id: id.clone(), jobs: plots })?;
            }
            Ok(())
        }),
        Err(e) => Err(e.into()),
    };
    // Lengths measured before a failure are still worth keeping.
    if result.is_err() && !ctx.lengths.is_empty() {
        let rows = std::mem::take(&mut ctx.lengths);
        let _ = ctx.out.csv("lengths.csv", &rows);
    }
    manifest.seeds = ctx.seeds;
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    match &result {
        Ok(()) => manifest.status = "ok".into(),
        Err(e) => manifest.error = Some(format!("{e:#}")),
    }
    match ctx.out.digests() {
        Ok(files) => manifest.files = files,
        Err(e) if result.is_ok() => return (manifest, Err(e)),
        Err(_) => {}
    }
    let path = out_dir.join("manifest.json");
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(anyhow::Error::from)
        .and_then(|s| std::fs::write(&path, s + "\n").with_context(|| format!("writing {}", path.display())));
    let result = result.and(written);
    (manifest, result)
}
