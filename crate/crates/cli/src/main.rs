use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mottrack_cli::{load_config, run, CliError, ConfigErrors};

/// Multi-object tracking runs on MOT16-style data.
#[derive(Parser, Debug)]
#[command(name = "mottrack", version)]
struct Args {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// online, offline, evaluate, detection-pr or synth.
    #[arg(short, long)]
    mode: Option<String>,
    /// Output directory.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Overrides such as `online.tau_t=0.6` or `seed=3`.
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args) {
        Ok(stdout) => {
            print!("{stdout}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: Args) -> Result<String, CliError> {
    let text = match &args.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| {
            CliError::Config(ConfigErrors(vec![format!(
                "cannot read {}: {e}",
                p.display()
            )]))
        })?),
        None => None,
    };
    let mut overrides = Vec::new();
    if let Some(m) = args.mode {
        overrides.push(format!("mode=\"{m}\""));
    }
    if let Some(o) = args.output_dir {
        overrides.push(format!("output_dir={:?}", o.display().to_string()));
    }
    overrides.extend(args.overrides);
    let cfg = load_config(text.as_deref(), &overrides)?;
    Ok(run(&cfg)?.stdout)
}
