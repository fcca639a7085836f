//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Statistical criteria run the `ozlab` binary on the configurations in
//! `configs/acceptance` with `--threads 1` and read the tables it writes.
//! Set `OZLAB_ACCEPTANCE=1,3,7` to run a subset.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use ozlab::stages::{ExplorationSummary, HalfspaceSummary, KmrpCheckRow, WulffSummary};
use ozlab::suites::{exact_suite, oracle_suite};
use ozlab_core::kmrp::{asymptotic_check, convolve_renewal, solve_rate, Atom, StepLaw};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Runs {
    root: tempfile::TempDir,
    done: HashMap<String, (PathBuf, f64)>,
}

impl Runs {
    fn configs() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance")
    }

    /// Output directory and wall-clock seconds of an acceptance run.
    fn get(&mut self, name: &str) -> Result<(PathBuf, f64), String> {
        if let Some(r) = self.done.get(name) {
            return Ok(r.clone());
        }
        let out = self.root.path().join(name);
        let cfg = Runs::configs().join(format!("{name}.toml"));
        let t = Instant::now();
        ozlab(&["--threads", "1", "run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])?;
        let r = (out, t.elapsed().as_secs_f64());
        self.done.insert(name.to_string(), r.clone());
        Ok(r)
    }
}

fn ozlab(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_ozlab"))
        .args(args)
        .env_remove("OZLAB_CACHE")
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("ozlab {args:?} exited with {}: {}", o.status, String::from_utf8_lossy(&o.stderr).trim()))
    }
}

fn rows(path: &Path) -> Result<Vec<HashMap<String, String>>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| e.to_string())
}

fn num(row: &HashMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap_or(f64::NAN)
}

fn json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn csv_one<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    r.deserialize().next().ok_or("empty table")?.map_err(|e| e.to_string())
}

fn c1() -> Result<Outcome, String> {
    let t = Instant::now();
    let s = oracle_suite("acceptance", 1, 1_000_000, 0.01).map_err(|e| format!("{e:#}"))?;
    let secs = t.elapsed().as_secs_f64();
    let thinned = s.rows.iter().filter(|r| r.thinning > 1).count();
    Ok(outcome(
        s.passed && secs < 300.0,
        format!(
            "{} chi-square tests ({} with thinning > 1), min p = {:.2e} vs Bonferroni {:.2e}, {secs:.0} s",
            s.rows.len(),
            thinned,
            s.min_p_value,
            s.threshold
        ),
    ))
}

fn c2() -> Result<Outcome, String> {
    let t = Instant::now();
    let s = exact_suite(1e-12).map_err(|e| format!("{e:#}"))?;
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        s.passed && secs < 60.0,
        format!(
            "FKG {} pairs worst {:.1e}, MON {} pairs worst {:.1e}, DMP {} cases worst {:.1e}, {secs:.1} s",
            s.fkg_pairs, s.fkg_worst, s.mon_pairs, s.mon_worst, s.dmp_cases, s.dmp_worst
        ),
    ))
}

/// Finite-support law with an atom at 1, from a seed.
fn random_law(seed: u64) -> StepLaw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa = rng.random_range(0.05..0.6);
    let support = rng.random_range(2..10u32);
    let mut atoms = vec![(1u32, 0.0, rng.random_range(0.1..1.0))];
    for tau in 1..=support {
        for dx in -2i32..=2 {
            if (tau, dx) != (1, 0) && rng.random_bool(0.5) {
                atoms.push((tau, dx as f64, rng.random_range(0.1..1.0)));
            }
        }
    }
    let total: f64 = atoms.iter().map(|a| a.2).sum();
    let interior: Vec<Atom> = atoms
        .into_iter()
        .map(|(tau, x, w)| Atom { tau, x, prob: w / total * (1.0 - kappa) })
        .collect();
    StepLaw {
        kappa: 1.0 - interior.iter().map(|a| a.prob).sum::<f64>(),
        initial: vec![Atom { tau: 1, x: 0.0, prob: 1.0 }],
        interior,
        tail_rate: None,
        x_lattice: 1.0,
    }
}

/// `p_n` by the plain renewal recursion.
fn naive_p(law: &StepLaw, n: usize) -> f64 {
    let a = law.lengths();
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    for m in 1..=n {
        for k in 1..=m.min(a.len() - 1) {
            p[m] += a[k] * p[m - k];
        }
    }
    p[n]
}

fn c3() -> Result<Outcome, String> {
    let t = Instant::now();
    let err = |e: ozlab_core::kmrp::KmrpError| e.to_string();
    let mut geo_dev: f64 = 0.0;
    for kappa in [0.1, 0.3, 0.5, 0.8] {
        let law = StepLaw::geometric(kappa);
        let sol = solve_rate(&law).map_err(err)?;
        geo_dev = geo_dev.max((sol.r_p * (1.0 - kappa) - 1.0).abs());
        geo_dev = geo_dev.max(asymptotic_check(&law, &sol, 300));
        let seq = convolve_renewal(&law, 50);
        geo_dev = geo_dev.max((seq.p[50] - (1.0 - kappa).powi(50)).abs() / (1.0 - kappa).powi(50));
    }
    let sol = solve_rate(&StepLaw::from_lengths(&[(1, 0.25), (2, 0.25)])).map_err(err)?;
    let quad = (sol.r_p - (-1.0 + 17f64.sqrt()) / 2.0).abs();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let law = random_law(seed);
        let sol = solve_rate(&law).map_err(err)?;
        let n = 300;
        let dev = (naive_p(&law, n) * sol.r_p.powi(n as i32) * sol.r_p * law.gen_prime(sol.r_p) - 1.0).abs();
        worst = worst.max(dev);
    }
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        geo_dev < 1e-12 && quad <= 1e-12 && worst <= 0.02 && secs < 1.0,
        format!("geometric deviation {geo_dev:.1e}, quadratic root error {quad:.1e}, random laws max {worst:.2e}, {secs:.3} s"),
    ))
}

fn c4(runs: &mut Runs) -> Result<Outcome, String> {
    let (dir, secs) = runs.get("q1_halfspace_oz")?;
    let h: HalfspaceSummary = json(&dir.join("halfspace.json"))?;
    let (a, b) = h.halves.ok_or("last resolvable window has a single ratio")?;
    let z = (a.value - b.value).abs() / a.stderr.hypot(b.stderr);
    Ok(outcome(
        h.spread <= 0.02 && z <= 3.0 && secs < 1800.0,
        format!(
            "L = {}, window m = {:?}, spread {:.2}%, zeta {:.4} vs {:.4} ({z:.2} sigma), run {secs:.0} s",
            h.thickness,
            h.window,
            100.0 * h.spread,
            a.value,
            b.value
        ),
    ))
}

fn spreads(dir: &Path) -> Result<(f64, f64, f64), String> {
    let fits = rows(&dir.join("xi_fits.csv"))?;
    let get = |c: &str| fits.iter().find(|r| r["correction"] == c).ok_or(format!("no {c} fit"));
    let oz = get("oz")?;
    Ok((num(oz, "residual_spread"), num(get("none")?, "residual_spread"), num(oz, "xi")))
}

fn c5(runs: &mut Runs) -> Result<Outcome, String> {
    let (d1, s1) = runs.get("q1_halfspace_oz")?;
    let (d2, s2) = runs.get("q2_oz")?;
    let (oz1, plain1, xi1) = spreads(&d1)?;
    let (oz2, plain2, xi2) = spreads(&d2)?;
    Ok(outcome(
        oz1 <= 0.15 && oz1 < plain1 && oz2 <= 0.25 && oz2 < plain2 && s1 + s2 < 3600.0,
        format!(
            "q=1: spread {oz1:.4} vs {plain1:.4} uncorrected (xi {xi1:.3}); q=2: {oz2:.4} vs {plain2:.4} (xi {xi2:.3}); runs {:.0} s",
            s1 + s2
        ),
    ))
}

fn c6(runs: &mut Runs) -> Result<Outcome, String> {
    let (dir, secs) = runs.get("exploration_kmrp")?;
    let e: ExplorationSummary = csv_one(&dir.join("exploration.csv"))?;
    let cones = rows(&dir.join("cones.csv"))?;
    let mut worst = f64::NEG_INFINITY;
    let probs: Vec<(f64, f64, f64)> = cones
        .iter()
        .filter(|r| (1.0..=5.0).contains(&num(r, "k")))
        .map(|r| (num(r, "k"), num(r, "probability"), num(r, "stderr")))
        .collect();
    for w in probs.windows(2) {
        worst = worst.max((w[1].1 - w[0].1) / w[0].2.hypot(w[1].2));
    }
    let monotone = probs.len() == 5 && worst <= 3.0;
    Ok(outcome(
        e.n_slices == 20 && e.accepted >= 10_000 && e.rate > 0.0 && e.p_value > 0.01 && monotone,
        format!(
            "{} traces (acceptance {:.2e}), gap rate {:.4} +- {:.4}, tail p = {:.3}, cone exits {:?} (largest rise {worst:.1} sigma), run {secs:.0} s",
            e.accepted,
            e.acceptance,
            e.rate,
            e.rate_stderr,
            e.p_value,
            probs.iter().map(|p| (p.1 * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    ))
}

fn c7(runs: &mut Runs) -> Result<Outcome, String> {
    let (dir, _) = runs.get("exploration_kmrp")?;
    let k: KmrpCheckRow = csv_one(&dir.join("clt_summary.csv"))?;
    Ok(outcome(
        k.n == 2000 && k.trials == 100_000 && k.ks <= 0.02 && k.bridge_mid_rel_dev.abs() <= 0.10,
        format!(
            "KS {:.4}, bridge variance at t = 1/2 off by {:.1}% ({} pinned paths)",
            k.ks,
            100.0 * k.bridge_mid_rel_dev,
            k.bridge_pinned_count
        ),
    ))
}

fn c8(runs: &mut Runs) -> Result<Outcome, String> {
    let (dir, secs) = runs.get("wulff")?;
    let w: WulffSummary = json(&dir.join("duality.json"))?;
    let n = rows(&dir.join("wulff.csv"))?.len();
    let mu_z = w.mu_e1.abs() / w.mu_e1_stderr;
    Ok(outcome(
        n == 64
            && w.duality.max_violation_sigma <= 2.0
            && w.max_argmax_angle_error_deg <= 6.0
            && mu_z <= 3.0
            && w.angle_map_monotone,
        format!(
            "max violation {:.2} sigma, argmax error {:.1} deg, mu(e1) = {:.4} +- {:.4}, angle map monotone: {}, run {secs:.0} s",
            w.duality.max_violation_sigma, w.max_argmax_angle_error_deg, w.mu_e1, w.mu_e1_stderr, w.angle_map_monotone
        ),
    ))
}

/// Tables a run wrote, by name.
fn tables(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = e.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.ends_with(".csv") || name.ends_with(".jsonl") {
            out.push((name, std::fs::read(&path).map_err(|e| e.to_string())?));
        }
    }
    out.sort();
    Ok(out)
}

fn c9(runs: &mut Runs) -> Result<Outcome, String> {
    let mut checked = Vec::new();
    for name in ["exploration_kmrp", "q2_oz"] {
        let (dir, _) = runs.get(name)?;
        let manifest: ozlab::output::RunManifest = json(&dir.join("manifest.json"))?;
        let cfg = runs.root.path().join(format!("{name}.replay.toml"));
        std::fs::write(&cfg, &manifest.resolved_config).map_err(|e| e.to_string())?;
        let again = runs.root.path().join(format!("{name}.replay"));
        ozlab(&["--threads", "1", "run", cfg.to_str().unwrap(), "--out", again.to_str().unwrap()])?;
        let replay: ozlab::output::RunManifest = json(&again.join("manifest.json"))?;
        let (a, b) = (tables(&dir)?, tables(&again)?);
        if replay.run_id != manifest.run_id || a.is_empty() || a != b {
            let differ: Vec<&str> = a
                .iter()
                .filter(|(n, bytes)| !b.iter().any(|(m, other)| m == n && other == bytes))
                .map(|(n, _)| n.as_str())
                .collect();
            return Ok(outcome(false, format!("{name}: replay differs in {differ:?}")));
        }
        checked.push(format!("{name} ({} tables)", a.len()));
    }
    Ok(outcome(true, format!("byte-identical replays: {}", checked.join(", "))))
}

fn main() {
    let wanted: Option<Vec<u32>> = std::env::var("OZLAB_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut runs = Runs {
        root: tempfile::tempdir().expect("temporary directory"),
        done: HashMap::new(),
    };
    let criteria: Vec<(u32, &str, Box<dyn Fn(&mut Runs) -> Result<Outcome, String>>)> = vec![
        (1, "exact-oracle sampler equivalence", Box::new(|_| c1())),
        (2, "FKG / MON / DMP exact suite", Box::new(|_| c2())),
        (3, "renewal rate solver vs convolution", Box::new(|_| c3())),
        (4, "pure exponential half-space decay", Box::new(c4)),
        (5, "Ornstein-Zernike functional form", Box::new(c5)),
        (6, "pre-renewal density and cone exits", Box::new(c6)),
        (7, "local CLT and bridge variance", Box::new(c7)),
        (8, "Wulff duality", Box::new(c8)),
        (9, "determinism under replay", Box::new(c9)),
    ];
    let mut failed = 0;
    for (k, name, f) in &criteria {
        if wanted.as_ref().is_some_and(|w| !w.contains(k)) {
            continue;
        }
        let t = Instant::now();
        let o = f(&mut runs).unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        failed += !o.pass as u32;
        println!(
            "C{k} {} {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
