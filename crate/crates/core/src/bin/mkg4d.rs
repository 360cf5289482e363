#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mkg4d::runner::{self, parse_override, snapshot, RunConfig, SuiteName};

#[derive(Parser)]
#[command(name = "mkg4d", version, about = "Maxwell-Klein-Gordon on the periodic 4-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration (or a previous run's manifest).
    Run {
        config: PathBuf,
        /// Override a config entry, e.g. `--set solver.dt=5e-4`. Logged in the manifest.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run a named verification suite.
    Suite {
        /// identities | elliptic | conservation | picard | scaling | bilinear
        name: String,
        /// Directory for the JSON report and CSV evidence.
        #[arg(long, default_value = "mkg4d-suites")]
        out: PathBuf,
    },
    /// Print the header and per-field statistics of a snapshot.
    Inspect { snapshot: PathBuf },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> mkg4d::Result<bool> {
    runner::configure_workers()?;
    match cli.command {
        Command::Run { config, set } => {
            let overrides = set.iter().map(|s| parse_override(s)).collect::<mkg4d::Result<Vec<_>>>()?;
            let cfg = RunConfig::load(&config)?;
            let outcome = runner::run(&cfg, &overrides)?;
            for check in &outcome.manifest.checks {
                println!("{}", check.line());
            }
            for note in &outcome.manifest.notes {
                println!("note: {note}");
            }
            if let Some(err) = &outcome.manifest.error {
                eprintln!("error: {}", err.message);
            }
            println!(
                "{:?}: manifest at {}",
                outcome.manifest.status,
                outcome.directory.join(runner::run::MANIFEST_FILE).display()
            );
            Ok(outcome.passed())
        }
        Command::Suite { name, out } => {
            let name: SuiteName = name.parse()?;
            let report = runner::suite(name);
            report.write(&out)?;
            for check in &report.checks {
                println!("{}", check.line());
            }
            println!(
                "suite {name}: {} in {:.1} s, report at {}",
                if report.passed { "PASS" } else { "FAIL" },
                report.seconds,
                out.join(format!("{name}.json")).display()
            );
            Ok(report.passed)
        }
        Command::Inspect { snapshot: path } => {
            let snap = snapshot::load(&path)?;
            let text = serde_json::to_string_pretty(&snap.summary())?;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(true),
            }
        }
    }
}
