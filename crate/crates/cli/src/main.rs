mod pipeline;
mod scenario;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use scenario::{Loaded, Overrides, BUNDLED, SCHEMA};

/// Exit status when every invariant holds.
const EXIT_OK: u8 = 0;
/// Exit status when at least one invariant is violated.
const EXIT_VIOLATION: u8 = 1;
/// Exit status for invalid input; nothing is written.
const EXIT_INVALID: u8 = 2;
/// Exit status when artifacts could not be written.
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "erps", version, about = "Phase-space estimation scenarios")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = "erps-out")]
    out: PathBuf,
    /// Override the Monte Carlo seed of every scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the grid size of every scenario.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenario files or bundled scenarios by name.
    Run {
        #[arg(required = true, value_name = "FILE|NAME")]
        scenarios: Vec<String>,
    },
    /// List bundled scenarios.
    List,
    /// Print a bundled scenario, or the file schema when no name is given.
    Describe { name: Option<String> },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::List => {
            for (name, src) in BUNDLED {
                let description = scenario::parse(src).map(|s| s.description).unwrap_or_default();
                println!("{name:<26} {description}");
            }
            EXIT_OK
        }
        Command::Describe { name: None } => {
            print!("{SCHEMA}");
            EXIT_OK
        }
        Command::Describe { name: Some(name) } => match scenario::bundled(name) {
            Some(src) => {
                print!("{src}");
                EXIT_OK
            }
            None => {
                eprintln!("error: no bundled scenario named `{name}`");
                EXIT_INVALID
            }
        },
        Command::Run { scenarios } => run(&cli, scenarios),
    };
    ExitCode::from(code)
}

fn resolve(arg: &str, overrides: Overrides) -> Result<Loaded, String> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{arg}: {e}"))?;
        let base = path.parent().unwrap_or(Path::new("."));
        scenario::load(&text, base, overrides).map_err(|e| format!("{arg}: {e}"))
    } else if let Some(src) = scenario::bundled(arg) {
        scenario::load(src, Path::new("."), overrides).map_err(|e| format!("{arg}: {e}"))
    } else {
        Err(format!("{arg}: no such file or bundled scenario"))
    }
}

fn run(cli: &Cli, args: &[String]) -> u8 {
    let overrides = Overrides {
        seed: cli.seed,
        grid_n: cli.grid_n,
    };
    let results: Vec<_> = args.par_iter().map(|a| resolve(a, overrides)).collect();
    let mut loaded = Vec::new();
    let mut invalid = false;
    for r in results {
        match r {
            Ok(l) => loaded.push(l),
            Err(e) => {
                eprintln!("error: {e}");
                invalid = true;
            }
        }
    }
    let mut names = BTreeSet::new();
    for l in &loaded {
        if !names.insert(l.scenario.name.as_str()) {
            eprintln!("error: scenario name `{}` appears more than once", l.scenario.name);
            invalid = true;
        }
    }
    if invalid {
        return EXIT_INVALID;
    }

    let outcomes: Vec<_> = loaded
        .par_iter()
        .map(|l| pipeline::execute(l, &cli.out))
        .collect();
    let mut code = EXIT_OK;
    for (l, outcome) in loaded.iter().zip(outcomes) {
        match outcome {
            Ok(o) if o.violations.is_empty() => println!("ok    {} -> {}", o.name, o.dir.display()),
            Ok(o) => {
                println!("FAIL  {} -> {}", o.name, o.dir.display());
                for v in &o.violations {
                    println!("      {v}");
                }
                code = code.max(EXIT_VIOLATION);
            }
            Err(e) => {
                eprintln!("error: writing {}: {e}", l.scenario.name);
                code = EXIT_IO;
            }
        }
    }
    code
}
