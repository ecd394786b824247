//! Command-line interface for the motif discovery pipeline.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use modisco::config::PipelineConfig;
use modisco::dataset::{load_dataset, save_dataset, save_results};
use modisco::pipeline::run_pipeline;
use modisco::synth::{generate_synthetic, SynthConfig};
use modisco::ModiscoError;

#[derive(Parser)]
#[command(name = "modisco", version, about = "Motif discovery from per-base importance scores")]
struct Cli {
    /// Worker thread count (default: MODISCO_WORKERS or all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the discovery pipeline on a dataset directory.
    Discover(DiscoverArgs),
    /// Generate a synthetic planted-motif dataset.
    Synth(SynthArgs),
    /// Validate a dataset directory and report problems.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct DiscoverArgs {
    #[arg(long, required_unless_present = "print_config")]
    input: Option<PathBuf>,
    #[arg(long, required_unless_present = "print_config")]
    output: Option<PathBuf>,
    /// TOML configuration file; defaults apply for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override one configuration key, e.g. --set target_fdr=0.05.
    /// Repeatable; applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Distinguish caller mistakes (exit 1) from bad data (exit 2).
enum CliError {
    Usage(String),
    Data(String),
}

impl From<ModiscoError> for CliError {
    fn from(e: ModiscoError) -> Self {
        match e {
            ModiscoError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn read_to_string(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_config(args: &DiscoverArgs) -> Result<PipelineConfig, CliError> {
    let mut table: toml::Table = match &args.config {
        Some(path) => read_to_string(path)?
            .parse()
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => toml::Table::new(),
    };
    for assignment in &args.set {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{assignment}`")))?;
        // parse the value with TOML semantics so numbers, booleans, and
        // arrays all work; fall back to a bare string
        let parsed: toml::Value = format!("v = {value}")
            .parse::<toml::Table>()
            .map(|mut t| t.remove("v").unwrap())
            .unwrap_or_else(|_| toml::Value::String(value.to_string()));
        table.insert(key.trim().to_string(), parsed);
    }
    if let Some(seed) = args.seed {
        table.insert("master_seed".into(), toml::Value::Integer(seed as i64));
    }
    let config: PipelineConfig = table
        .try_into()
        .map_err(|e| CliError::Usage(format!("bad configuration: {e}")))?;
    config.validate()?;
    Ok(config)
}

fn discover(args: DiscoverArgs) -> Result<(), CliError> {
    let config = load_config(&args)?;
    if args.print_config {
        let rendered = toml::to_string_pretty(&config)
            .map_err(|e| CliError::Usage(format!("cannot render configuration: {e}")))?;
        print!("{rendered}");
        return Ok(());
    }
    let input = args.input.expect("clap enforces --input");
    let output = args.output.expect("clap enforces --output");
    let dataset = load_dataset(&input)?;
    let results = run_pipeline(&dataset, &config)?;
    std::fs::create_dir_all(&output)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", output.display())))?;
    save_results(&results, &output)?;
    let total: usize = results.metaclusters.iter().map(|m| m.motifs.len()).sum();
    println!(
        "{} metaclusters, {} motifs written to {}",
        results.metaclusters.len(),
        total,
        output.display()
    );
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), CliError> {
    let cfg: SynthConfig = toml::from_str(&read_to_string(&args.config)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    let synthetic = generate_synthetic(&cfg, args.seed)?;
    std::fs::create_dir_all(&args.output)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", args.output.display())))?;
    save_dataset(&synthetic.dataset, &args.output)?;
    let plants = serde_json::to_string_pretty(&synthetic.plants)
        .expect("plants are plain serializable data");
    let plants_path = args.output.join("plants.json");
    std::fs::write(&plants_path, plants)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", plants_path.display())))?;
    println!(
        "{} sequences with {} plants written to {}",
        synthetic.dataset.sequences.len(),
        synthetic.plants.len(),
        args.output.display()
    );
    Ok(())
}

fn validate(input: PathBuf) -> Result<(), CliError> {
    let dataset = load_dataset(&input)?;
    dataset.validate()?;
    println!(
        "ok: {} sequences, {} tasks",
        dataset.sequences.len(),
        dataset.tasks.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are successes, not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let workers = cli.workers.or_else(|| {
        std::env::var("MODISCO_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(workers) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: cannot configure {workers} workers: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Discover(args) => discover(args),
        Command::Synth(args) => synth(args),
        Command::Validate { input } => validate(input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
