use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use serde::Deserialize;

use umaxent::experiment::{self, Check, PropertyConfig};
use umaxent::fugitive::{run_fugitive_experiment, FugitiveConfig, GridMap, IleRecord, NoiseSetting};
use umaxent::irl::IrlRegistry;
use umaxent::lab::{run_figure1, Figure1Config, LearnerRegistry, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Experiment {
    Figure1,
    Fugitive,
    Properties,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Setting {
    Low,
    High,
}

/// Runs the uncertain-MaxEnt experiments and writes their results as CSV.
#[derive(Debug, Parser)]
#[command(name = "umaxent", version)]
struct Cli {
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,

    /// Master seed; every trial seed is derived from it.
    #[arg(long)]
    seed: Option<u64>,

    /// Trials per grid point.
    #[arg(long)]
    trials: Option<usize>,

    /// Comma-separated data sizes (observations or trajectories).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,

    /// Restrict the fugitive run to one noise setting (default: both).
    #[arg(long, value_enum)]
    setting: Option<Setting>,

    /// Output directory.
    #[arg(long, env = "UMAXENT_OUT")]
    out: Option<PathBuf>,

    /// Worker threads (default: one per core).
    #[arg(long)]
    workers: Option<usize>,

    /// Fugitive map file.
    #[arg(long)]
    map: Option<PathBuf>,

    /// TOML file with any of the options above; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Exit nonzero when an ordering verdict fails.
    #[arg(long)]
    strict: bool,

    /// Instances per randomized property check.
    #[arg(long)]
    instances: Option<usize>,

    #[arg(long, hide = true, default_value_t = 0.0)]
    perturb_gradient: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    experiment: Option<Experiment>,
    seed: Option<u64>,
    trials: Option<usize>,
    grid: Option<Vec<usize>>,
    setting: Option<Setting>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    map: Option<PathBuf>,
    strict: Option<bool>,
    instances: Option<usize>,
}

struct Run {
    experiment: Experiment,
    seed: u64,
    trials: Option<usize>,
    grid: Option<Vec<usize>>,
    setting: Option<Setting>,
    out: PathBuf,
    workers: Option<usize>,
    map: Option<PathBuf>,
    strict: bool,
    instances: Option<usize>,
    perturb_gradient: f64,
}

impl Run {
    fn resolve(cli: Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        let Some(experiment) = cli.experiment.or(file.experiment) else {
            bail!("no experiment given; pass --experiment figure1|fugitive|properties");
        };
        let run = Run {
            experiment,
            seed: cli.seed.or(file.seed).unwrap_or(0),
            trials: cli.trials.or(file.trials),
            grid: cli.grid.or(file.grid),
            setting: cli.setting.or(file.setting),
            out: cli.out.or(file.out).unwrap_or_else(|| PathBuf::from("results")),
            workers: cli.workers.or(file.workers),
            map: cli.map.or(file.map),
            strict: cli.strict || file.strict.unwrap_or(false),
            instances: cli.instances.or(file.instances),
            perturb_gradient: cli.perturb_gradient,
        };
        run.check_applicable()?;
        Ok(run)
    }

    fn check_applicable(&self) -> Result<()> {
        let misplaced =
            |flag: &str, allowed: &str| -> Result<()> { bail!("{flag} only applies to the {allowed} experiment") };
        if self.experiment != Experiment::Fugitive {
            if self.setting.is_some() {
                misplaced("--setting", "fugitive")?;
            }
            if self.map.is_some() {
                misplaced("--map", "fugitive")?;
            }
        }
        if self.experiment == Experiment::Properties {
            if self.trials.is_some() || self.grid.is_some() {
                misplaced("--trials and --grid", "figure1 and fugitive")?;
            }
        } else if self.instances.is_some() || self.perturb_gradient != 0.0 {
            misplaced("--instances", "properties")?;
        }
        if self.trials == Some(0) {
            bail!("--trials must be at least 1");
        }
        if self.workers == Some(0) {
            bail!("--workers must be at least 1");
        }
        Ok(())
    }
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Prints the checks; true when all passed.
fn report(checks: &[Check]) -> bool {
    for c in checks {
        println!("{c}");
    }
    checks.iter().all(|c| c.passed)
}

fn verdict_exit(passed: bool, strict: bool) -> ExitCode {
    println!("verdict: {}", if passed { "PASS" } else { "FAIL" });
    if passed || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn figure1(run: &Run) -> Result<ExitCode> {
    let mut config = Figure1Config::default();
    config.spec.seed = run.seed;
    if let Some(t) = run.trials {
        config.trials = t;
    }
    if let Some(g) = &run.grid {
        config.grid = g.clone();
    }
    let started = Instant::now();
    let mut rows: Vec<TrialRecord> = Vec::new();
    let points = run_figure1(&config, &LearnerRegistry::standard(), |chunk| {
        if let Some(first) = chunk.first() {
            eprintln!("figure1: N={} done ({:.1?})", first.n_observations, started.elapsed());
        }
        rows.extend_from_slice(chunk);
        Ok(())
    })?;
    write_output(&run.out, "figure1.csv", &experiment::figure1_rows_csv(&rows))?;
    write_output(
        &run.out,
        "figure1_summary.csv",
        &experiment::figure1_summary_csv(&points),
    )?;
    let passed = report(&experiment::figure1_verdict(&points));
    Ok(verdict_exit(passed, run.strict))
}

fn fugitive(run: &Run) -> Result<ExitCode> {
    let mut config = FugitiveConfig {
        seed: run.seed,
        ..FugitiveConfig::default()
    };
    if let Some(path) = &run.map {
        config.map = GridMap::load(path)?;
    }
    if let Some(setting) = run.setting {
        config.settings = vec![match setting {
            Setting::Low => NoiseSetting::low(),
            Setting::High => NoiseSetting::high(),
        }];
    }
    if let Some(t) = run.trials {
        config.trials = t;
    }
    if let Some(g) = &run.grid {
        config.grid = g.clone();
    }
    let started = Instant::now();
    let mut rows: Vec<IleRecord> = Vec::new();
    let points = run_fugitive_experiment(&config, &IrlRegistry::standard(), |chunk| {
        if let Some(first) = chunk.first() {
            eprintln!("fugitive: {} setting done ({:.1?})", first.setting, started.elapsed());
        }
        rows.extend_from_slice(chunk);
        Ok(())
    })?;
    for setting in &config.settings {
        let name = &setting.name;
        let mine: Vec<IleRecord> = rows.iter().filter(|r| &r.setting == name).cloned().collect();
        let summary: Vec<_> = points.iter().filter(|p| &p.setting == name).cloned().collect();
        write_output(
            &run.out,
            &format!("fugitive_{name}.csv"),
            &experiment::fugitive_rows_csv(&mine),
        )?;
        write_output(
            &run.out,
            &format!("fugitive_{name}_summary.csv"),
            &experiment::fugitive_summary_csv(&summary),
        )?;
    }
    let passed = report(&experiment::fugitive_verdict(&points));
    Ok(verdict_exit(passed, run.strict))
}

fn properties(run: &Run) -> Result<ExitCode> {
    let mut config = PropertyConfig {
        seed: run.seed,
        perturb_gradient: run.perturb_gradient,
        ..PropertyConfig::default()
    };
    if let Some(k) = run.instances {
        config.instances = k;
    }
    let checks = experiment::run_properties(&config);
    write_output(&run.out, "properties.csv", &experiment::checks_csv(&checks))?;
    let passed = report(&checks);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if passed {
        println!("all {} properties hold", checks.len());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failed properties: {}", failed.join(", "));
        Ok(ExitCode::FAILURE)
    }
}

fn main() -> Result<ExitCode> {
    let run = Run::resolve(Cli::parse())?;
    if let Some(n) = run.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting worker pool")?;
    }
    fs::create_dir_all(&run.out).with_context(|| format!("creating {}", run.out.display()))?;
    match run.experiment {
        Experiment::Figure1 => figure1(&run),
        Experiment::Fugitive => fugitive(&run),
        Experiment::Properties => properties(&run),
    }
}
