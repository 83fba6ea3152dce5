use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use surftrap::{run_to_dir, Category, CliError, Command, Loaded};

/// Surface-trap simulation scenarios.
#[derive(Parser, Debug)]
#[command(name = "surftrap", version, about)]
struct Cli {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory [default: scenario `out_dir`, else `out`].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Pseudopotential and rf field on a planar grid.
    PotentialMap,
    /// Rf null position and field versus height.
    NullScan,
    /// Secular modes at the shaped trap point.
    Modes,
    /// Rf amplitude for a target planar frequency versus height.
    RfPowerCurve,
    /// Dc electrode voltages for a field and curvature target.
    DcSolve,
    /// Modulation index while tuning the resonator trimmer.
    CircuitSweep,
    /// Modulation index of the network and sideband-ratio conversions.
    Beta,
    /// Full-field ion trajectory.
    Trajectory,
    /// Synthetic sideband scans and occupation estimates.
    Thermometry,
    /// Runs the checked-in scenario for a figure (1b, 1c, 2, 3b, 4).
    Figure { id: String },
}

fn command_of(c: &Cmd) -> Option<Command> {
    Some(match c {
        Cmd::PotentialMap => Command::PotentialMap,
        Cmd::NullScan => Command::NullScan,
        Cmd::Modes => Command::Modes,
        Cmd::RfPowerCurve => Command::RfPowerCurve,
        Cmd::DcSolve => Command::DcSolve,
        Cmd::CircuitSweep => Command::CircuitSweep,
        Cmd::Beta => Command::Beta,
        Cmd::Trajectory => Command::Trajectory,
        Cmd::Thermometry => Command::Thermometry,
        Cmd::Figure { .. } => return None,
    })
}

fn real_main(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let (command, loaded, sub) = match (&cli.command, command_of(&cli.command)) {
        (Cmd::Figure { id }, _) => {
            if cli.scenario.is_some() {
                return Err(CliError::config(
                    "figure runs use their checked-in scenario; drop --scenario",
                ));
            }
            let (c, l) = Loaded::figure(id)?;
            (c, l, Some(format!("fig{id}")))
        }
        (_, Some(c)) => {
            let l = match &cli.scenario {
                Some(p) => Loaded::from_file(p)?,
                None => Loaded::defaults(),
            };
            (c, l, None)
        }
        (_, None) => unreachable!(),
    };
    let mut out = cli
        .out
        .clone()
        .or_else(|| loaded.scenario.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Some(s) = sub {
        out.push(s);
    }
    run_to_dir(command, &loaded, cli.seed, cli.threads, &out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", CliError::config(e.to_string().trim_end()).to_json());
            return ExitCode::from(Category::Config.exit_code() as u8);
        }
    };
    match real_main(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.category.exit_code() as u8)
        }
    }
}
