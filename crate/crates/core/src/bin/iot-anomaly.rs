use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iot_anomaly::cli::{self, CliError, EvalOptions};
use iot_anomaly::config::{ModelKind, RunConfig};

#[derive(Parser)]
#[command(name = "iot-anomaly", version, about = "KDD Cup 99 anomaly detection pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a dataset and print record counts per category and its checksum.
    Ingest {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Split, preprocess and fit a model; writes a bundle under --out.
    Train(RunArgs),
    /// Score the test split with a trained bundle and write eval_report.json.
    Evaluate {
        #[arg(long)]
        bundle: PathBuf,
        /// Evaluate even when the dataset checksum differs from the bundle's.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print one verdict line per record of --input.
    Score {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lenient_categories: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Dataset file (plain or .gz), or synthetic:<records>:<seed>.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stratified subsample fraction applied before the split.
    #[arg(long)]
    subsample: Option<f64>,
    /// 5% subsample, a 20,000-row KNN reference cap, lenient categories.
    #[arg(long)]
    desk_scale: bool,
    #[arg(long)]
    lenient_categories: bool,
    /// Anomaly threshold percentile for ae and gan.
    #[arg(long)]
    threshold_percentile: Option<f64>,
    /// GAN score mixing weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    /// Applies file then flags on top of `base` (CLI > file > base).
    fn resolve(&self, mut c: RunConfig) -> Result<RunConfig, CliError> {
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        if self.desk_scale {
            c.desk_scale();
        }
        if let Some(v) = &self.data {
            c.data = v.clone();
        }
        if let Some(v) = self.model {
            c.model = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if let Some(v) = self.subsample {
            c.set("subsample", &v.to_string())?;
        }
        if self.lenient_categories {
            c.lenient_categories = true;
        }
        if let Some(v) = self.threshold_percentile {
            c.set("ae.threshold_percentile", &v.to_string())?;
            c.set("gan.threshold_percentile", &v.to_string())?;
        }
        if let Some(v) = self.lambda {
            c.set("gan.lambda", &v.to_string())?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv}")))?;
            c.set(k.trim(), v)?;
        }
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { data } => {
            let path = data.unwrap_or_else(|| RunConfig::default().data);
            print!("{}", cli::cmd_ingest(&path)?);
        }
        Command::Train(args) => {
            let config = args.resolve(RunConfig::default())?;
            let outcome = cli::cmd_train(&config)?;
            println!(
                "trained {} on {} rows; bundle at {}",
                config.model,
                outcome.log.train_rows,
                outcome.bundle_dir.display()
            );
        }
        Command::Evaluate { bundle, force, run } => {
            // The bundle's own configuration reproduces its split by default.
            let mut base = cli::bundle_config(&bundle)?;
            // Reports land beside the bundle unless --out says otherwise.
            if let Some(parent) = bundle.parent() {
                base.out = parent.to_path_buf();
            }
            let config = run.resolve(base)?;
            let opts = EvalOptions {
                force,
                threshold_percentile: run.threshold_percentile,
                lambda: run.lambda,
            };
            let outcome = cli::cmd_evaluate(&bundle, &config, &opts)?;
            print!("{}", outcome.report);
            if let Some(tables) = outcome.reference_tables {
                print!("{tables}");
            }
            println!("report written to {}", outcome.report_path.display());
        }
        Command::Score {
            bundle,
            input,
            lenient_categories,
        } => {
            let out = cli::cmd_score(&bundle, &input, lenient_categories.then_some(true))?;
            match out.into_result() {
                Ok(lines) => lines.iter().for_each(|l| println!("{l}")),
                Err((lines, err)) => {
                    lines.iter().for_each(|l| println!("{l}"));
                    return Err(err);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
