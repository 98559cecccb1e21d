use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use elgeo::commands::{self, CmdError, ConfigSource, EvalFlags, Split, ToySource};
use elgeo::config::TieMode;

#[derive(Parser)]
#[command(name = "elgeo", version, about = "Ball embeddings of EL++ knowledge bases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled preset, e.g. relu-original or closure-filtering.
    #[arg(long)]
    preset: Option<String>,
    /// Override a config key, e.g. --set train.lr=0.001. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn source(&self) -> ConfigSource {
        ConfigSource {
            file: self.config.clone(),
            preset: self.preset.clone(),
            overrides: self.overrides.clone(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Optimistic,
    Average,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Test,
    Valid,
}

#[derive(Args)]
struct EvalArgs {
    /// Print filtered metrics instead of raw ones.
    #[arg(long)]
    filtered: bool,
    /// Also rank closure-derived GCI2 axioms; needs --closure.
    #[arg(long)]
    closure_positives: bool,
    /// Closure dump written by `elgeo closure`.
    #[arg(long)]
    closure: Option<PathBuf>,
    /// Named pool of candidate tails.
    #[arg(long)]
    pool: Option<String>,
    #[arg(long, value_enum)]
    tie_mode: Option<TieArg>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
}

impl EvalArgs {
    fn flags(&self) -> EvalFlags {
        EvalFlags {
            filtered: self.filtered,
            closure_positives: self.closure_positives,
            closure_dir: self.closure.clone(),
            pool: self.pool.clone(),
            tie_mode: self.tie_mode.map(|t| match t {
                TieArg::Optimistic => TieMode::Optimistic,
                TieArg::Average => TieMode::Average,
            }),
            split: match self.split {
                SplitArg::Test => Split::Test,
                SplitArg::Valid => Split::Valid,
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Normalize general axioms (s-expressions) into TSV normal forms.
    Normalize { input: PathBuf, output: PathBuf },
    /// Saturate the subsumption hierarchy of a dataset.
    Reason { dataset: PathBuf, out: PathBuf },
    /// Compute and dump the approximate deductive closure.
    Closure {
        dataset: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train an embedding model.
    Train {
        dataset: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Closure dump to filter negatives with; computed when absent.
        #[arg(long)]
        closure: Option<PathBuf>,
    },
    /// Hyperparameter grid search ranked by validation mean rank.
    Grid {
        dataset: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        closure: Option<PathBuf>,
    },
    /// Rank test axioms with a trained checkpoint.
    Evaluate {
        checkpoint: PathBuf,
        dataset: PathBuf,
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Rank test axioms with the tail-frequency baseline.
    Naive {
        dataset: PathBuf,
        out: PathBuf,
        /// Mirror every training pair whose ends lie in both pools.
        #[arg(long)]
        symmetric: bool,
        /// Named pool of heads; all named classes when absent.
        #[arg(long)]
        head_pool: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Write a toy dataset.
    GenToy {
        out: PathBuf,
        /// The bundled hand-built knowledge base.
        #[arg(long)]
        hand_built: bool,
        /// Generator preset: default, filtering or skewed.
        #[arg(long)]
        preset: Option<String>,
        /// Generator settings file (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a generator key, e.g. --set seed=3. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<String, CmdError> {
    commands::init_threads()?;
    match cli.command {
        Command::Normalize { input, output } => commands::cmd_normalize(&input, &output),
        Command::Reason { dataset, out } => commands::cmd_reason(&dataset, &out),
        Command::Closure { dataset, out, config } => commands::cmd_closure(&dataset, &out, &config.source()),
        Command::Train {
            dataset,
            out,
            config,
            closure,
        } => commands::cmd_train(&dataset, &config.source(), &out, closure.as_deref()),
        Command::Grid {
            dataset,
            out,
            config,
            closure,
        } => commands::cmd_grid(&dataset, &config.source(), &out, closure.as_deref()),
        Command::Evaluate {
            checkpoint,
            dataset,
            out,
            config,
            eval,
        } => commands::cmd_evaluate(&checkpoint, &dataset, &config.source(), &eval.flags(), &out),
        Command::Naive {
            dataset,
            out,
            symmetric,
            head_pool,
            config,
            eval,
        } => commands::cmd_naive(&dataset, &config.source(), &eval.flags(), symmetric, head_pool.as_deref(), &out),
        Command::GenToy {
            out,
            hand_built,
            preset,
            config,
            overrides,
        } => commands::cmd_gen_toy(
            &ToySource {
                hand_built,
                preset,
                file: config,
                overrides,
            },
            &out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
