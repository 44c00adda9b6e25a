use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use betaqual::io::RunConfig;
use betaqual::report::{cmd_compare, cmd_fit, cmd_simulate, summarize_draws_file, summary_table_csv};
use betaqual::Error;

#[derive(Parser)]
#[command(name = "betaqual", version, about = "Bayesian beta regression with simplex weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the joint model or the two separated period models.
    Fit(RunArgs),
    /// Fit both models and compare their DIC.
    Compare(RunArgs),
    /// Generate a survey CSV from a truth specification.
    Simulate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Summarize every column of a draws file.
    Summarize {
        #[arg(long)]
        draws: PathBuf,
        /// Write the table here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Flags mirror the configuration file keys; flags override the file.
#[derive(Args)]
struct RunArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "input_path")]
    input_path: Option<String>,
    /// joint or separated
    #[arg(long = "model_kind")]
    model_kind: Option<String>,
    #[arg(long)]
    iterations: Option<String>,
    #[arg(long)]
    burnin: Option<String>,
    #[arg(long)]
    thin: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "target_acceptance")]
    target_acceptance: Option<String>,
    #[arg(long = "target_acceptance_weights")]
    target_acceptance_weights: Option<String>,
    #[arg(long = "adapt_during_burnin")]
    adapt_during_burnin: Option<String>,
    /// endpoint or midpoint
    #[arg(long = "scale_mapping")]
    scale_mapping: Option<String>,
    /// drop or clamp(eps)
    #[arg(long = "boundary_policy")]
    boundary_policy: Option<String>,
    #[arg(long = "output_dir")]
    output_dir: Option<String>,
    #[arg(long = "emit_plots", num_args = 0..=1, default_missing_value = "true")]
    emit_plots: Option<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let overrides = [
            ("input_path", &self.input_path),
            ("model_kind", &self.model_kind),
            ("iterations", &self.iterations),
            ("burnin", &self.burnin),
            ("thin", &self.thin),
            ("seed", &self.seed),
            ("target_acceptance", &self.target_acceptance),
            ("target_acceptance_weights", &self.target_acceptance_weights),
            ("adapt_during_burnin", &self.adapt_during_burnin),
            ("scale_mapping", &self.scale_mapping),
            ("boundary_policy", &self.boundary_policy),
            ("output_dir", &self.output_dir),
            ("emit_plots", &self.emit_plots),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Fit(args) => {
            let config = args.resolve()?;
            let bundle = cmd_fit(&config)?;
            let dropped = bundle.ingestion.dropped();
            if dropped > 0 {
                eprintln!(
                    "dropped {dropped} boundary response rows: {:?}",
                    bundle.ingestion.dropped_rows
                );
            }
            println!(
                "DIC = {}  pD = {}  results in {}",
                bundle.dic.dic,
                bundle.dic.p_d,
                config.output_dir.display()
            );
        }
        Command::Compare(args) => {
            let config = args.resolve()?;
            let report = cmd_compare(&config)?;
            print!("{}", report.text());
        }
        Command::Simulate { truth, seed, output } => {
            let (data, _) = cmd_simulate(&truth, seed, &output)?;
            println!("wrote {} rows to {}", data.n(), output.display());
        }
        Command::Summarize { draws, output } => {
            let table = summary_table_csv(&summarize_draws_file(&draws)?);
            match output {
                Some(path) => {
                    std::fs::write(&path, table).map_err(|e| Error::Io { path, source: e })?
                }
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
