use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use pdao_cli::config::{self, Method, Overrides, RawScenario};
use pdao_cli::{catalog, run, CliError};

#[derive(Parser)]
#[command(
    name = "pdao",
    version,
    about = "Simulator for a pulsed, parametrically driven Kerr oscillator with loss"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a TOML config file
    Run {
        /// Path to the scenario config
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Built-in scenarios
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// List the built-in scenarios
    List,
    /// Run a built-in scenario by name
    Run {
        /// Entry name, as printed by `catalog list`
        name: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Args)]
struct OverrideArgs {
    /// Override the evolution method (master, qsd, both)
    #[arg(long)]
    method: Option<String>,
    /// Override the trajectory base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trajectory count
    #[arg(long)]
    trajectories: Option<usize>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OverrideArgs {
    fn into_overrides(self) -> Result<Overrides, CliError> {
        let method = match self.method {
            Some(text) => Some(Method::from_str(&text).map_err(CliError::Config)?),
            None => None,
        };
        Ok(Overrides {
            method,
            seed: self.seed,
            trajectories: self.trajectories,
            out: self.out,
        })
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let raw = config::load_config(&config)?;
            run_one(raw, None, overrides.into_overrides()?)
        }
        Command::Catalog {
            action: CatalogAction::List,
        } => {
            for entry in catalog::entries() {
                println!("{:<8} {}", entry.name, entry.summary);
            }
            Ok(())
        }
        Command::Catalog {
            action: CatalogAction::Run { name, overrides },
        } => {
            let entry = catalog::find(&name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown catalog entry '{name}'; see `pdao catalog list`"
                ))
            })?;
            let mut raw: RawScenario = config::parse_config(entry.config_toml)
                .map_err(|e| CliError::Config(format!("catalog entry '{name}': {e}")))?;
            if raw.output_dir.is_none() {
                raw.output_dir = Some(PathBuf::from(format!("out/{name}")));
            }
            run_one(raw, Some(&name), overrides.into_overrides()?)
        }
    }
}

fn run_one(raw: RawScenario, name: Option<&str>, overrides: Overrides) -> Result<(), CliError> {
    let scenario = config::resolve(raw, &overrides)?;
    match run::execute(&scenario) {
        Ok(artifacts) => {
            let checks = match name {
                Some(n) => catalog::evaluate_checks(n, &scenario, &artifacts),
                None => Vec::new(),
            };
            run::write_manifest(&scenario, name, Some(&artifacts), &checks, None)?;
            println!(
                "wrote {} files to {} in {:.1} s",
                artifacts.outputs.len() + 1,
                scenario.output_dir.display(),
                artifacts.wall_seconds
            );
            if let Some(report) = &artifacts.compare {
                println!(
                    "method agreement: {:.1}% of samples within 3 standard errors ({})",
                    100.0 * report.fraction_within,
                    if report.passed { "pass" } else { "fail" }
                );
            }
            for c in &checks {
                println!(
                    "check {:<24} {}  ({})",
                    c.name,
                    if c.passed { "pass" } else { "FAIL" },
                    c.detail
                );
            }
            Ok(())
        }
        Err(e) => {
            // Best effort: the manifest should record the failure even when
            // the run itself could not.
            let _ = run::write_manifest(&scenario, name, None, &[], Some(&e.to_string()));
            Err(e)
        }
    }
}
