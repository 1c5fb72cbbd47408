use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kvgap_cli::commands::{self, Inputs};
use kvgap_cli::{CliError, Overrides, Report, RunConfig, WindowSpec};

#[derive(Parser, Debug)]
#[command(name = "kvgap", version, about = "Integrality-gap instances for balanced separators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    k: Option<u32>,
    #[arg(long, global = true)]
    eta: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Comma-separated noise rates for the BES sweep.
    #[arg(long, global = true, value_delimiter = ',')]
    epsilon_sweep: Option<Vec<f64>>,
    /// Odd outer tensor power.
    #[arg(long, global = true)]
    t: Option<u32>,
    /// Even inner tensor power.
    #[arg(long, global = true)]
    l_in: Option<u32>,
    /// `typical`, `disabled` or `lo..hi`.
    #[arg(long, global = true)]
    window: Option<WindowSpec>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    budget_triples: Option<u64>,
    #[arg(long, global = true)]
    budget_samples: Option<u64>,
    #[arg(long, global = true)]
    budget_restarts: Option<usize>,
    #[arg(long, global = true)]
    budget_exhaustive: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct Files {
    #[arg(long)]
    ug: Option<PathBuf>,
    #[arg(long)]
    basis: Option<PathBuf>,
    #[arg(long)]
    labeling: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the quotient UG instance and check its SDP solution.
    BuildUg {
        #[command(flatten)]
        common: Common,
    },
    /// Reduce to Balanced Edge-Separator and run the BES suites.
    BuildBes {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        files: Files,
    },
    /// Re-run the invariant suites on serialized artifacts.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        files: Files,
        /// The same instance with its labels renamed by `--label-map`.
        #[arg(long)]
        permuted_ug: Option<PathBuf>,
        #[arg(long)]
        label_map: Option<PathBuf>,
    },
    /// Acceptance probability and decoding of a proof.
    Pcp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        files: Files,
        #[arg(long)]
        proof: Option<PathBuf>,
    },
    /// Negative type and least l1 distortion of a metric.
    Distortion {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        metric: Option<PathBuf>,
    },
    /// Round sparse cuts into a balanced cut.
    Round {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            k: self.k,
            eta: self.eta,
            epsilon: self.epsilon,
            epsilon_sweep: self.epsilon_sweep.clone(),
            t: self.t,
            l_in: self.l_in,
            window: self.window,
            seed: self.seed,
            budget_triples: self.budget_triples,
            budget_samples: self.budget_samples,
            budget_restarts: self.budget_restarts,
            budget_exhaustive: self.budget_exhaustive,
            out: self.out.clone(),
        }
    }

    fn load(&self) -> Result<RunConfig, CliError> {
        RunConfig::load(self.config.as_deref(), &self.overrides())
    }
}

fn inputs(files: &Files) -> Inputs {
    Inputs { ug: files.ug.clone(), basis: files.basis.clone(), labeling: files.labeling.clone(), ..Inputs::default() }
}

fn run(command: &Command) -> Result<(Report, RunConfig), CliError> {
    match command {
        Command::BuildUg { common } => {
            let cfg = common.load()?;
            Ok((commands::build_ug(&cfg)?, cfg))
        }
        Command::BuildBes { common, files } => {
            let cfg = common.load()?;
            Ok((commands::build_bes(&cfg, &inputs(files))?, cfg))
        }
        Command::Verify { common, files, permuted_ug, label_map } => {
            let cfg = common.load()?;
            let inputs = Inputs { permuted_ug: permuted_ug.clone(), label_map: label_map.clone(), ..inputs(files) };
            Ok((commands::verify(&cfg, &inputs)?, cfg))
        }
        Command::Pcp { common, files, proof } => {
            let cfg = common.load()?;
            let inputs = Inputs { proof: proof.clone(), ..inputs(files) };
            Ok((commands::pcp(&cfg, &inputs)?, cfg))
        }
        Command::Distortion { common, metric } => {
            let cfg = common.load()?;
            Ok((commands::distortion(&cfg, &Inputs { metric: metric.clone(), ..Inputs::default() })?, cfg))
        }
        Command::Round { common, graph } => {
            let cfg = common.load()?;
            Ok((commands::round(&cfg, &Inputs { graph: graph.clone(), ..Inputs::default() })?, cfg))
        }
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::BuildUg { .. } => "build-ug",
        Command::BuildBes { .. } => "build-bes",
        Command::Verify { .. } => "verify",
        Command::Pcp { .. } => "pcp",
        Command::Distortion { .. } => "distortion",
        Command::Round { .. } => "round",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = command_name(&cli.command);
    let outcome = run(&cli.command).and_then(|(report, cfg)| {
        report.write(&cfg.out)?;
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            print!("{}", report.human_summary());
            for r in &report.records {
                eprintln!("{}", r.line(name));
            }
            if report.failed() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("FAIL\t{name}\terror\t{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
