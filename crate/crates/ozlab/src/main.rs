use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ozlab::config::{ExperimentConfig, Exploration, Kmrp, Wulff};
use ozlab::output::{run_id, Output};
use ozlab::report::stage_plots;
use ozlab::stages;
use ozlab::suites::{exact_suite, oracle_suite};

/// Random-cluster correlation-length experiments.
#[derive(Parser)]
#[command(name = "ozlab", version)]
struct Cli {
    /// Master seed; overrides the configuration's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Outputs are bit-exact for a fixed count; use 1 for
    /// the reference.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: ozlab-out/<run id>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the stages requested by a configuration file.
    Run {
        #[arg(value_name = "CONFIG")]
        path: Option<PathBuf>,
        #[arg(long = "config", value_name = "CONFIG", conflicts_with = "path")]
        config: Option<PathBuf>,
    },
    /// Renewal-process rate solver.
    #[command(subcommand)]
    Kmrp(KmrpCommand),
    /// Conditioned slice exploration for independent percolation.
    Explore(ExploreArgs),
    /// Direction-resolved profiles, Wulff shapes and the duality check.
    Wulff(WulffArgs),
    /// Verification suites against exact enumeration.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Check a finished run and write its plot plan.
    Report {
        #[arg(value_name = "RUN_DIR")]
        dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum KmrpCommand {
    /// Solve for R_p, zeta and the amplitude.
    Solve { law: PathBuf },
    /// Solve, then run the local CLT and bridge checks on the tilted law.
    Check {
        law: PathBuf,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
    },
}

#[derive(Args)]
struct ExploreArgs {
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    angle: f64,
    /// Slab thickness (default: the characteristic length).
    #[arg(long)]
    thickness: Option<u32>,
    #[arg(long, default_value_t = 20)]
    n_slices: u32,
    #[arg(long, default_value_t = 10_000)]
    wanted: usize,
    #[arg(long, default_value_t = 1_000_000_000)]
    budget: u64,
}

#[derive(Args)]
struct WulffArgs {
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 16)]
    per_quadrant: usize,
    #[arg(long, default_value_t = 20_000_000)]
    survey_samples: u64,
    #[arg(long, default_value_t = 10_000)]
    wanted: usize,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Chains against exact enumeration on the 4- and 12-edge graphs.
    Oracle {
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Family-wise significance level.
        #[arg(long, default_value_t = 0.01)]
        level: f64,
    },
    /// FKG, boundary monotonicity and the domain Markov property.
    Exact,
}

/// Usage-level failure (exit 2) as opposed to a failed run (exit 1).
struct Usage(anyhow::Error);

fn defaults<T: serde::de::DeserializeOwned>() -> T {
    toml::from_str("").expect("every field has a default")
}

fn threads(cli: &Cli) -> usize {
    cli.threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn execute(cli: &Cli, mut cfg: ExperimentConfig, base: &Path) -> Result<(), Usage> {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    // The output location is not part of the experiment.
    let out = cli.out.clone().or(cfg.out.take());
    cfg.validate().map_err(Usage)?;
    let out = out.unwrap_or_else(|| PathBuf::from("ozlab-out").join(run_id(&cfg.resolved())));
    let (manifest, result) = stages::run(&cfg, &out, base, threads(cli));
    match result {
        Ok(()) => {
            println!("run {} ok: {} files in {}", manifest.run_id, manifest.files.len(), out.display());
            Ok(())
        }
        Err(e) => {
            eprintln!("ozlab: run {} failed: {e:#}", manifest.run_id);
            eprintln!("ozlab: partial manifest in {}", out.join("manifest.json").display());
            std::process::exit(1);
        }
    }
}

fn kmrp_config(cli: &Cli, law: &Path, check: bool, n: usize, trials: usize) -> ExperimentConfig {
    // The model is not used when the law comes from a file.
    let mut cfg = ExperimentConfig::bare(0.5, 1.0, cli.seed.unwrap_or(0));
    let mut k: Kmrp = defaults();
    k.law = law.to_string_lossy().into_owned();
    k.check = check;
    k.n = n;
    k.trials = trials;
    cfg.kmrp = Some(k);
    cfg
}

fn suite_output(cli: &Cli, label: &str) -> anyhow::Result<Option<Output>> {
    let id = run_id(label);
    cli.out.as_ref().map(|d| Output::new(d, &id)).transpose()
}

fn dispatch(cli: &Cli) -> Result<bool, Usage> {
    let cwd = PathBuf::from(".");
    match &cli.command {
        Command::Run { path, config } => {
            let Some(path) = path.as_ref().or(config.as_ref()) else {
                return Err(Usage(anyhow::anyhow!("no configuration given (ozlab run <CONFIG>)")));
            };
            let cfg = ExperimentConfig::load(path).map_err(Usage)?;
            let base = path.parent().map_or(cwd, Path::to_path_buf);
            execute(cli, cfg, &base)?;
        }
        Command::Kmrp(KmrpCommand::Solve { law }) => {
            if !law.is_file() {
                return Err(Usage(anyhow::anyhow!("law file {} not found", law.display())));
            }
            execute(cli, kmrp_config(cli, law, false, 1, 1), &cwd)?;
        }
        Command::Kmrp(KmrpCommand::Check { law, n, trials }) => {
            if !law.is_file() {
                return Err(Usage(anyhow::anyhow!("law file {} not found", law.display())));
            }
            execute(cli, kmrp_config(cli, law, true, *n, *trials), &cwd)?;
        }
        Command::Explore(a) => {
            let mut cfg = ExperimentConfig::bare(a.p, 1.0, cli.seed.unwrap_or(0));
            let mut e: Exploration = defaults();
            e.angle_deg = a.angle;
            e.thickness = a.thickness;
            e.n_slices = a.n_slices;
            e.wanted = a.wanted;
            e.budget = a.budget;
            cfg.exploration = Some(e);
            execute(cli, cfg, &cwd)?;
        }
        Command::Wulff(a) => {
            let mut cfg = ExperimentConfig::bare(a.p, 1.0, cli.seed.unwrap_or(0));
            let mut w: Wulff = defaults();
            w.per_quadrant = a.per_quadrant;
            w.survey_samples = a.survey_samples;
            w.wanted = a.wanted;
            cfg.wulff = Some(w);
            execute(cli, cfg, &cwd)?;
        }
        Command::Verify(VerifyCommand::Oracle { samples, level }) => {
            let seed = cli.seed.unwrap_or(0);
            let label = format!("verify oracle seed={seed} samples={samples} level={level}");
            let mut out = suite_output(cli, &label).map_err(Usage)?;
            let id = run_id(&label);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads(cli))
                .build()
                .map_err(|e| Usage(e.into()))?;
            let suite = match pool.install(|| oracle_suite(&id, seed, *samples, *level)) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("ozlab: oracle suite failed: {e:#}");
                    return Ok(false);
                }
            };
            if let Some(o) = out.as_mut() {
                if let Err(e) = o.csv("oracle.csv", &suite.rows) {
                    eprintln!("ozlab: {e:#}");
                    return Ok(false);
                }
            }
            println!(
                "oracle suite: {} checks, min p-value {:.3e}, threshold {:.3e}: {}",
                suite.rows.len(),
                suite.min_p_value,
                suite.threshold,
                if suite.passed { "pass" } else { "FAIL" }
            );
            return Ok(suite.passed);
        }
        Command::Verify(VerifyCommand::Exact) => {
            let suite = match exact_suite(1e-12) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("ozlab: exact suite failed: {e:#}");
                    return Ok(false);
                }
            };
            println!(
                "exact suite: FKG {} pairs (worst {:.2e}), MON {} pairs (worst {:.2e}), DMP {} cases (worst {:.2e}): {}",
                suite.fkg_pairs,
                suite.fkg_worst,
                suite.mon_pairs,
                suite.mon_worst,
                suite.dmp_cases,
                suite.dmp_worst,
                if suite.passed { "pass" } else { "FAIL" }
            );
            return Ok(suite.passed);
        }
        Command::Report { dir } => {
            if !dir.join("manifest.json").is_file() {
                return Err(Usage(anyhow::anyhow!("{} has no manifest.json", dir.display())));
            }
            let plan = match stage_plots(dir) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("ozlab: {e:#}");
                    return Ok(false);
                }
            };
            let target = cli.out.clone().unwrap_or_else(|| dir.clone());
            let written = std::fs::create_dir_all(&target)
                .map_err(anyhow::Error::from)
                .and_then(|_| Ok(serde_json::to_string_pretty(&plan)?))
                .and_then(|s| Ok(std::fs::write(target.join("plots.json"), s + "\n")?));
            if let Err(e) = written {
                eprintln!("ozlab: {e:#}");
                return Ok(false);
            }
            for j in &plan.jobs {
                println!("{} <- {}", j.kind, j.inputs.join(" "));
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Usage(e)) => {
            eprintln!("ozlab: {e:#}");
            ExitCode::from(2)
        }
    }
}
