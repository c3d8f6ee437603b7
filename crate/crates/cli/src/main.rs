use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ewave_cli::{emit_trace, load_config, run_experiment, ScenarioConfig, Setup};

/// Simulate SWIPT backscatter identification sessions.
#[derive(Debug, Parser)]
#[command(name = "ewave", version)]
struct Cli {
    /// Print the bench presets as config text and exit.
    #[arg(long)]
    list_presets: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario (and its sweep), writing one CSV row per point.
    Run {
        /// Config file. Omit to run a preset.
        config: Option<PathBuf>,
        /// Start from a preset (replaces the config's `setup`).
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the base configuration's envelope trace here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Write session event records here as JSON lines.
        #[arg(long)]
        log_out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Wired,
    Anechoic,
}

impl From<PresetArg> for Setup {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Wired => Setup::Wired,
            PresetArg::Anechoic => Setup::Anechoic,
        }
    }
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn load(config: Option<PathBuf>, preset: Option<PresetArg>, seed: Option<u64>) -> Result<ScenarioConfig, String> {
    let mut cfg = match (config, preset) {
        (Some(path), preset) => {
            let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            match preset {
                Some(p) => {
                    // The preset replaces whatever setup line the file has.
                    let body: String = text
                        .lines()
                        .filter(|l| l.split_once('=').is_none_or(|(k, _)| k.trim() != "setup"))
                        .map(|l| format!("{l}\n"))
                        .collect();
                    ewave_cli::parse_config(&format!("setup = {}\n{body}", Setup::from(p)))
                }
                None => load_config(&path),
            }
            .map_err(|e| format!("{}: {e}", path.display()))?
        }
        (None, Some(p)) => ScenarioConfig::preset(p.into()),
        (None, None) => return Err("give a config file or --preset".into()),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, String> {
    File::create(path).map(BufWriter::new).map_err(|e| format!("cannot create {}: {e}", path.display()))
}

fn run(cli: Cli) -> Result<bool, String> {
    if cli.list_presets {
        for setup in Setup::PRESETS {
            println!("# preset {setup}\n{}", ScenarioConfig::preset(setup).to_text());
        }
        return Ok(true);
    }
    let Some(Command::Run { config, preset, seed, out, trace_out, log_out }) = cli.command else {
        return Err("nothing to do; see --help".into());
    };
    let cfg = load(config, preset, seed)?;
    let output = run_experiment(&cfg);

    match &out {
        Some(path) => output.write_csv(create(path)?),
        None => output.write_csv(io::stdout().lock()),
    }
    .map_err(|e| format!("writing CSV: {e}"))?;

    if let Some(path) = &trace_out {
        let trace = emit_trace(&cfg).map_err(|e| e.to_string())?;
        trace.save(path).map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    if let Some(path) = &log_out {
        let mut w = create(path)?;
        w.write_all(output.session_json_lines().as_bytes())
            .and_then(|()| w.flush())
            .map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    for check in &output.checks {
        eprintln!("{check}");
    }
    Ok(output.all_passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
