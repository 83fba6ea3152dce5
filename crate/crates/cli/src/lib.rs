//! Scenario runner, file formats and command-line front end for
//! `surftrap-core`.
//!
//! A run resolves a [`Scenario`](scenario::Scenario), loads the electrode
//! layout and optional netlist it names, executes one command and writes
//! one delimited file per output table. Every file starts with a `#` header
//! recording the version, seed, layout hash and the fully resolved scenario,
//! so any file is enough to repeat its run.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod layout;
pub mod netlist;
pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};

use surftrap_core::efield::FieldBasis;

pub use commands::Command;
pub use error::{Category, CliError};
use output::{Metadata, Table};
use scenario::Scenario;

/// Checked-in figure scenarios: id, command, scenario text.
pub const FIGURES: [(&str, Command, &str); 5] = [
    (
        "1b",
        Command::PotentialMap,
        include_str!("../scenarios/fig1b.toml"),
    ),
    (
        "1c",
        Command::PotentialMap,
        include_str!("../scenarios/fig1c.toml"),
    ),
    (
        "2",
        Command::RfPowerCurve,
        include_str!("../scenarios/fig2.toml"),
    ),
    (
        "3b",
        Command::CircuitSweep,
        include_str!("../scenarios/fig3b.toml"),
    ),
    (
        "4",
        Command::Thermometry,
        include_str!("../scenarios/fig4.toml"),
    ),
];

/// Command and parsed scenario for a figure id.
pub fn figure(id: &str) -> Result<(Command, Scenario), CliError> {
    let (_, cmd, text) = FIGURES.iter().find(|(f, _, _)| *f == id).ok_or_else(|| {
        CliError::config(format!(
            "unknown figure `{id}`; expected one of 1b, 1c, 2, 3b, 4"
        ))
    })?;
    Ok((*cmd, Scenario::parse(text)?))
}

/// A scenario together with where it came from.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub scenario: Scenario,
    /// `defaults`, `builtin:fig<id>` or the file path.
    pub source: String,
    /// Directory relative paths inside the scenario resolve against.
    pub base_dir: Option<PathBuf>,
}

impl Loaded {
    pub fn defaults() -> Self {
        Self {
            scenario: Scenario::default(),
            source: "defaults".into(),
            base_dir: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        Ok(Self {
            scenario: Scenario::load(path)?,
            source: path.display().to_string(),
            base_dir: path.parent().map(Path::to_path_buf),
        })
    }

    pub fn figure(id: &str) -> Result<(Command, Self), CliError> {
        let (cmd, scenario) = figure(id)?;
        Ok((
            cmd,
            Self {
                scenario,
                source: format!("builtin:fig{id}"),
                base_dir: None,
            },
        ))
    }
}

/// Runs `command` in memory. `seed` overrides the scenario's seed.
pub fn run(
    command: Command,
    loaded: &Loaded,
    seed: Option<u64>,
) -> Result<(Vec<Table>, Metadata), CliError> {
    let s = &loaded.scenario;
    if let Some(c) = &s.command {
        if c != command.as_str() {
            return Err(CliError::config(format!(
                "scenario is for `{c}` but `{}` was invoked",
                command.as_str()
            )));
        }
    }
    let base = loaded.base_dir.as_deref();
    let layout = layout::load_layout(s.layout.as_deref(), base)?;
    let seed = seed.or(s.seed).unwrap_or(0);
    let netlist = match &s.netlist_file {
        Some(p) => {
            let path = Scenario::resolve_path(base, p);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::config(format!("netlist file {}: {e}", path.display())))?;
            netlist::parse_netlist(&text)?
        }
        None => s.netlist.clone(),
    };
    let ion = s.ion.build()?;
    let drive = s.drive.build(&layout.layout, ion)?;
    let ctx = commands::Context {
        basis: FieldBasis::new(layout.layout.clone()),
        ion,
        drive,
        network: netlist.build()?,
        wavevector: s.probe.wavevector()?,
        seed,
    };
    let tables = commands::execute(command, s, &ctx)?;
    let mut resolved = s.clone();
    resolved.command = Some(command.as_str().into());
    resolved.seed = Some(seed);
    let meta = Metadata {
        command: command.as_str().into(),
        seed,
        scenario_source: loaded.source.clone(),
        layout_source: layout.source,
        layout_sha256: layout.sha256,
        scenario: resolved.to_toml(),
    };
    Ok((tables, meta))
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global
/// pool when `None`.
pub fn with_threads<R: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> R + Send,
) -> Result<R, CliError> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::config("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs and writes the tables under `out`. Returns the written paths.
pub fn run_to_dir(
    command: Command,
    loaded: &Loaded,
    seed: Option<u64>,
    threads: Option<usize>,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let (tables, meta) = with_threads(threads, || run(command, loaded, seed))??;
    output::write_tables(out, &tables, &meta)
}
