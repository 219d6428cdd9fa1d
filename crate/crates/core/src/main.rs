use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tcnlab::commands::{self, RunRequest, EXIT_INCOMPLETE, EXIT_USAGE};
use tcnlab::config;
use tcnlab::verify::Suite;

#[derive(Parser, Debug)]
#[command(name = "tcnlab", version, about = "Temporal convolutional networks vs. recurrent baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one experiment from a preset or config file.
    Run {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// `section.key=value`, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Continue the run in this directory from its checkpoint.
        #[arg(long, conflicts_with_all = ["config", "preset", "seed"])]
        resume: Option<PathBuf>,
    },
    /// Receptive field of a TCN with kernel size k and n levels.
    Rf {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 2)]
        base: usize,
        /// Report the fewest levels covering this many steps.
        #[arg(long)]
        target: Option<usize>,
    },
    /// Run a property suite: gradcheck, causality or baselines.
    Verify {
        #[arg(long)]
        suite: String,
    },
    /// Tabulate the final results of several run directories.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the built-in presets.
    Presets,
}

fn fail(err: tcnlab::Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(commands::exit_code(&err) as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE as u8) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run {
            config,
            preset,
            seed,
            out,
            overrides,
            resume,
        } => {
            let req = RunRequest {
                config,
                preset,
                seed,
                out,
                overrides,
                resume,
            };
            match commands::run(&req) {
                Ok(o) => {
                    let r = &o.final_row;
                    println!(
                        "{}: {} steps, {} params, {} loss {:.6} {} {:.6}",
                        o.out_dir.display(),
                        o.steps,
                        o.param_count,
                        r.split,
                        r.loss,
                        r.metric_kind.name(),
                        r.metric
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Rf { k, n, base, target } => match commands::rf_report(k, n, base, target) {
            Ok(s) => {
                print!("{s}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Verify { suite } => {
            let Some(suite) = Suite::parse(&suite) else {
                eprintln!("error: unknown suite {suite:?} (gradcheck, causality, baselines)");
                return ExitCode::from(EXIT_USAGE as u8);
            };
            match commands::verify_report(suite) {
                Ok((report, ok)) => {
                    print!("{report}");
                    if ok { ExitCode::SUCCESS } else { ExitCode::from(EXIT_INCOMPLETE as u8) }
                }
                Err(e) => fail(e),
            }
        }
        Command::Compare { runs, out } => match commands::compare(&runs, &out) {
            Ok(rows) => {
                let failed = rows.iter().filter(|r| r.status != "ok").count();
                for r in &rows {
                    println!("{} {} {} {}", r.run, r.task, r.model, r.status);
                }
                if failed > 0 { ExitCode::from(EXIT_INCOMPLETE as u8) } else { ExitCode::SUCCESS }
            }
            Err(e) => fail(e),
        },
        Command::Presets => {
            for name in config::preset_names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}
