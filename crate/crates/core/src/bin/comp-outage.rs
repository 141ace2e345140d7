use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use comp_outage::analytic::{evaluate_outage, Conditioning, OutageQuery};
use comp_outage::experiment::{
    self, CriterionMode, ExperimentConfig, ExperimentError, RunRecord, ValidateOptions,
};
use comp_outage::montecarlo::{empirical_outage, sample_sinr};
use comp_outage::Error;

const EXIT_INPUT: u8 = 1;
const EXIT_INVARIANT: u8 = 2;
const EXIT_FALLBACK: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "comp-outage",
    version,
    about = "CoMP downlink outage probability under Rayleigh fading"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form outage probability of one query.
    Outage(OutageArgs),
    /// Analytic vs empirical capacity CDFs of one user, per cooperating-set size.
    Fig1(RunArgs),
    /// Histogram of the best cooperating-set size over many users.
    Fig2(RunArgs),
    /// Run the invariant suites and emit a JSON summary.
    Validate(ValidateArgs),
    /// Emit or inspect a deployment JSON document.
    Deploy {
        #[command(subcommand)]
        action: DeployAction,
    },
}

#[derive(Args, Debug)]
struct OutageArgs {
    /// Serving powers, comma separated (linear).
    #[arg(long, value_delimiter = ',', required = true)]
    serving: Vec<f64>,
    /// Interferer powers, comma separated (linear).
    #[arg(long = "interf", value_delimiter = ',')]
    interferers: Vec<f64>,
    /// SINR threshold (linear).
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Also estimate the outage by Monte-Carlo.
    #[arg(long)]
    validate: bool,
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 2010)]
    seed: u64,
    /// Fail on near-equal serving powers instead of perturbing them.
    #[arg(long)]
    no_perturb: bool,
    /// Exit with code 3 if the oracle fallback was used.
    #[arg(long)]
    strict: bool,
    /// Print a JSON document instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_users: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    shadowing_db: Option<f64>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long, value_enum)]
    criterion: Option<CriterionMode>,
    #[arg(long, value_delimiter = ',')]
    outage_targets: Option<Vec<f64>>,
    /// Replay a deployment JSON file instead of generating one.
    #[arg(long)]
    deployment: Option<PathBuf>,
    #[arg(long)]
    no_perturb: bool,
    /// Worker threads (outputs do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, ExperimentError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.n_users {
            cfg.experiment.n_users = v;
        }
        if let Some(v) = self.n_max {
            cfg.experiment.n_max = v;
        }
        if let Some(v) = self.mc_samples {
            cfg.experiment.mc_samples = v;
        }
        if let Some(v) = self.noise {
            cfg.link.noise_power = v;
        }
        if let Some(v) = self.shadowing_db {
            cfg.propagation.shadowing_stddev_db = v;
        }
        if let Some(v) = self.density {
            cfg.deployment.density_per_km2 = v;
        }
        if let Some(v) = self.criterion {
            cfg.experiment.criterion = v;
        }
        if let Some(v) = &self.outage_targets {
            cfg.experiment.outage_targets = v.clone();
        }
        if let Some(v) = &self.deployment {
            cfg.deployment.file = Some(v.clone());
        }
        if self.no_perturb {
            cfg.conditioning.perturb = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Exit with code 3 if the oracle fallback was used.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Also write the JSON summary to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add a suite evaluating duplicated serving powers.
    #[arg(long)]
    inject_degenerate: bool,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum DeployAction {
    /// Generate a deployment from the configuration and write it as JSON.
    Emit {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load a deployment JSON file and print a summary.
    Show {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Invariant(String),
    Fallback(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Invariant(m)) => {
            eprintln!("invariant failure: {m}");
            ExitCode::from(EXIT_INVARIANT)
        }
        Err(Failure::Fallback(m)) => {
            eprintln!("conditioning fallback: {m}");
            ExitCode::from(EXIT_FALLBACK)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Outage(args) => cmd_outage(args),
        Command::Fig1(args) => with_threads(&args.config, || cmd_fig1(&args)),
        Command::Fig2(args) => with_threads(&args.config, || cmd_fig2(&args)),
        Command::Validate(args) => with_threads(&args.config, || cmd_validate(&args)),
        Command::Deploy { action } => cmd_deploy(action),
    }
}

fn with_threads<T: Send>(
    args: &ConfigArgs,
    f: impl FnOnce() -> Result<T, Failure> + Send,
) -> Result<T, Failure> {
    match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Input(e.to_string()))?
            .install(f),
        None => f(),
    }
}

#[derive(Serialize)]
struct OutageReport {
    p_out: f64,
    min_relative_gap: f64,
    perturbed: bool,
    fell_back_to_oracle: bool,
    cancellation_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_difference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

fn cmd_outage(args: OutageArgs) -> Result<(), Failure> {
    let query = OutageQuery::from_slices(&args.serving, &args.interferers, args.noise, args.gamma)?;
    let cond = Conditioning {
        perturb: !args.no_perturb,
        ..Conditioning::default()
    };
    let est = evaluate_outage(&query, &cond)?;
    let mc = if args.validate {
        if args.mc_samples == 0 {
            return Err(Failure::Input("--mc-samples must be positive".into()));
        }
        let samples = sample_sinr(&query.link, args.seed, args.mc_samples);
        Some(empirical_outage(&samples, args.gamma)?)
    } else {
        None
    };
    let report = OutageReport {
        p_out: est.probability,
        min_relative_gap: est.report.min_relative_gap,
        perturbed: est.report.perturbed,
        fell_back_to_oracle: est.report.fell_back_to_oracle,
        cancellation_ratio: est.report.cancellation_ratio,
        monte_carlo: mc,
        abs_difference: mc.map(|m| (m - est.probability).abs()),
        mc_samples: mc.map(|_| args.mc_samples),
        seed: mc.map(|_| args.seed),
    };
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(ExperimentError::from)?
        );
    } else {
        println!("p_out {:.10}", report.p_out);
        if let (Some(m), Some(d)) = (report.monte_carlo, report.abs_difference) {
            println!(
                "monte_carlo {m:.10} (samples {}, seed {})\nabs_difference {d:.3e}",
                args.mc_samples, args.seed
            );
        }
        println!(
            "conditioning min_relative_gap={:e} perturbed={} fell_back_to_oracle={} cancellation_ratio={:e}",
            report.min_relative_gap,
            report.perturbed,
            report.fell_back_to_oracle,
            report.cancellation_ratio
        );
    }
    if args.strict && est.report.fell_back_to_oracle {
        return Err(Failure::Fallback(
            "closed form replaced by the Monte-Carlo oracle".into(),
        ));
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Input(e.to_string()))
}

fn write_run_record(dir: &Path, command: &str, cfg: &ExperimentConfig) -> Result<(), Failure> {
    let record = RunRecord {
        command,
        config: cfg,
        seeds: cfg.seeds(),
    };
    write_file(&dir.join(format!("{command}_run.json")), &to_json(&record)?)
}

fn cmd_fig1(args: &RunArgs) -> Result<(), Failure> {
    let cfg = args.config.resolve()?;
    let out = experiment::run_fig1(&cfg)?;
    prepare_out(&args.out)?;
    write_file(&args.out.join("fig1.csv"), &out.csv)?;
    write_file(&args.out.join("fig1_summary.json"), &to_json(&out.summary)?)?;
    write_run_record(&args.out, "fig1", &cfg)?;
    let s = &out.summary;
    println!(
        "user at ({:.1}, {:.1}) m, {} stations, {} samples",
        s.user_position.x, s.user_position.y, s.station_count, s.mc_samples
    );
    for (k, (gap, fb)) in s.max_gap.iter().zip(&s.fallback).enumerate() {
        println!(
            "N={} max |analytic - empirical| = {gap:.5}{}",
            k + 1,
            if *fb { " (fallback)" } else { "" }
        );
    }
    println!(
        "tolerance {:.5}: {}",
        s.tolerance,
        if s.passed { "pass" } else { "FAIL" }
    );
    if !s.passed {
        return Err(Failure::Invariant(
            "capacity CDF gap above tolerance".into(),
        ));
    }
    if args.strict && s.fallback.iter().any(|&f| f) {
        return Err(Failure::Fallback(
            "some curves used the Monte-Carlo oracle".into(),
        ));
    }
    Ok(())
}

fn cmd_fig2(args: &RunArgs) -> Result<(), Failure> {
    let cfg = args.config.resolve()?;
    let out = experiment::run_fig2(&cfg)?;
    prepare_out(&args.out)?;
    write_file(&args.out.join("fig2.csv"), &out.histogram_csv)?;
    write_file(&args.out.join("fig2_users.csv"), &out.users_csv)?;
    write_file(&args.out.join("fig2_summary.json"), &to_json(&out.summary)?)?;
    write_run_record(&args.out, "fig2", &cfg)?;
    println!(
        "{} users ({} excluded)",
        out.summary.n_users, out.summary.failed_users
    );
    for c in &out.summary.criteria {
        let hist: Vec<String> = c.fraction.iter().map(|f| format!("{f:.3}")).collect();
        println!(
            "{:>8}: mean N* {:.3}  fractions [{}]",
            c.criterion,
            c.mean_n_star,
            hist.join(", ")
        );
    }
    if args.strict && out.any_fallback() {
        return Err(Failure::Fallback(
            "some users used the Monte-Carlo oracle".into(),
        ));
    }
    Ok(())
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), Failure> {
    let cfg = args.config.resolve()?;
    let report = experiment::run_validate(
        &cfg,
        ValidateOptions {
            inject_degenerate: args.inject_degenerate,
        },
    )?;
    let json = to_json(&report)?;
    if let Some(path) = &args.out {
        write_file(path, &json)?;
    }
    print!("{json}");
    if !report.passed {
        let failed: Vec<&str> = report
            .suites
            .iter()
            .filter(|s| !s.passed)
            .map(|s| s.name.as_str())
            .collect();
        return Err(Failure::Invariant(format!(
            "failed suites: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}

fn cmd_deploy(action: DeployAction) -> Result<(), Failure> {
    match action {
        DeployAction::Emit { config, out } => {
            let cfg = config.resolve()?;
            let d = cfg.deployment()?;
            write_file(&out, &to_json(&d)?)?;
            println!(
                "{} stations over {} x {} m (seed {})",
                d.base_stations.len(),
                d.area.width_m,
                d.area.height_m,
                d.seed
            );
        }
        DeployAction::Show { input } => {
            let d = experiment::load_deployment(&input)?;
            println!(
                "{} stations over {} x {} m, density {} BS/km2, {:?} count, seed {}",
                d.base_stations.len(),
                d.area.width_m,
                d.area.height_m,
                d.density_per_km2,
                d.count_mode,
                d.seed
            );
        }
    }
    Ok(())
}
