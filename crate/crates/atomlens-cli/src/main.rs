//! `atomlens`: run, validate and inspect scenario configs from the shell.

use atomlens::scenario::{
    self, load_config, preset_names, preset_text, RunSummary, ScenarioConfig, Severity,
};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const THREADS_NOTE: &str = "Monte Carlo stages use every core by default; set \
RAYON_NUM_THREADS to pin the worker count. Output is deterministic for a given \
seed no matter how many threads run.";

#[derive(Parser)]
#[command(
    name = "atomlens",
    version,
    about = "Cold-atom cloud transits through a red-detuned Gaussian beam",
    after_long_help = THREADS_NOTE
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run a scenario and write its CSV
    #[command(after_long_help = THREADS_NOTE)]
    Run(RunArgs),
    /// Parse a config and report diagnostics without running it
    Validate {
        /// Scenario config file
        config: PathBuf,
    },
    /// Built-in scenario configs
    Presets {
        #[command(subcommand)]
        which: PresetsCmd,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config file (or use --preset)
    config: Option<PathBuf>,
    /// Run a built-in preset by name (see `atomlens presets list`)
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Override the random seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Override the particle count from the config
    #[arg(long)]
    particles: Option<usize>,
    /// Write the CSV here (overrides the config's [output] path);
    /// without either, CSV goes to stdout and the summary to stderr
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PresetsCmd {
    /// List preset names
    List,
    /// Print a preset's config file
    Show { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Commands::Run(args) => cmd_run(args),
        Commands::Validate { config } => cmd_validate(&config),
        Commands::Presets { which } => match which {
            PresetsCmd::List => {
                for name in preset_names() {
                    println!("{name}");
                }
                ExitCode::SUCCESS
            }
            PresetsCmd::Show { name } => match preset_text(&name) {
                Some(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                None => {
                    eprintln!("unknown preset '{name}'; run `atomlens presets list`");
                    ExitCode::from(1)
                }
            },
        },
    }
}

fn read_source(args: &RunArgs) -> Result<(String, String), ExitCode> {
    match (&args.config, &args.preset) {
        (Some(path), None) => match fs::read_to_string(path) {
            Ok(text) => Ok((text, path.display().to_string())),
            Err(e) => {
                eprintln!("cannot read {}: {e}", path.display());
                Err(ExitCode::from(1))
            }
        },
        (None, Some(name)) => match preset_text(name) {
            Some(text) => Ok((text.to_string(), format!("preset {name}"))),
            None => {
                eprintln!("unknown preset '{name}'; run `atomlens presets list`");
                Err(ExitCode::from(1))
            }
        },
        (None, None) => {
            eprintln!("give a config file or --preset NAME");
            Err(ExitCode::from(1))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    }
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let (text, origin) = match read_source(&args) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let (config, diags) = load_config(&text);
    for d in &diags {
        eprintln!("{origin}: {d}");
    }
    let Some(mut config) = config else {
        eprintln!("{origin}: configuration rejected");
        return ExitCode::from(1);
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.particles {
        if n < 2 {
            eprintln!("--particles: need at least 2");
            return ExitCode::from(1);
        }
        config.particles = n;
    }
    let out_path = args
        .out
        .clone()
        .or_else(|| config.output.clone().map(PathBuf::from));
    match out_path {
        Some(path) => run_to_file(&config, &path),
        None => run_to_stdout(&config),
    }
}

fn run_to_file(config: &ScenarioConfig, path: &Path) -> ExitCode {
    let file = match fs::File::create(path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let mut out = io::BufWriter::new(file);
    let summary = match write_all(config, &mut out) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Err(e) = out.flush() {
        eprintln!("cannot write {}: {e}", path.display());
        return ExitCode::from(2);
    }
    let mut stdout = io::stdout().lock();
    let _ = print_summary(&mut stdout, &summary, Some(path));
    ExitCode::SUCCESS
}

fn run_to_stdout(config: &ScenarioConfig) -> ExitCode {
    let stdout = io::stdout().lock();
    let mut out = io::BufWriter::new(stdout);
    let summary = match write_all(config, &mut out) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Err(e) = out.flush() {
        eprintln!("{e}");
        return ExitCode::from(2);
    }
    drop(out);
    let mut stderr = io::stderr().lock();
    let _ = print_summary(&mut stderr, &summary, None);
    ExitCode::SUCCESS
}

fn write_all(config: &ScenarioConfig, out: &mut dyn Write) -> Result<RunSummary, ExitCode> {
    if let Err(e) = scenario::write_metadata(config, out) {
        eprintln!("{e}");
        return Err(ExitCode::from(2));
    }
    scenario::run(config, out).map_err(|e| {
        eprintln!("run failed: {e}");
        ExitCode::from(2)
    })
}

fn print_summary(out: &mut dyn Write, summary: &RunSummary, path: Option<&Path>) -> io::Result<()> {
    match path {
        Some(p) => writeln!(out, "{}: {} rows -> {}", summary.kind, summary.rows, p.display())?,
        None => writeln!(out, "{}: {} rows", summary.kind, summary.rows)?,
    }
    for (name, value) in &summary.notes {
        writeln!(out, "  {name} = {value}")?;
    }
    Ok(())
}

fn cmd_validate(path: &Path) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", path.display());
            return ExitCode::from(1);
        }
    };
    let (config, diags) = load_config(&text);
    for d in &diags {
        println!("{d}");
    }
    match config {
        Some(c) => {
            println!("ok: {} ({} warnings)", c.kind, diags.len());
            ExitCode::SUCCESS
        }
        None => {
            let errors = diags
                .iter()
                .filter(|d| d.severity == Severity::Error)
                .count();
            println!("rejected: {errors} error(s)");
            ExitCode::from(1)
        }
    }
}
