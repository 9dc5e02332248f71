use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use coherent_mb::config::{parse_document, Scenario, ScenarioConfig};
use coherent_mb::scenario::run_scenario;
use coherent_mb::Error;

/// Coherent pulse propagation through an inhomogeneously broadened
/// two-level absorber.
#[derive(Debug, Parser)]
#[command(name = "coherent-mb", version)]
struct Cli {
    /// propagate | area-curve | soliton-check | convergence-check
    scenario: Scenario,
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Input pulse area in units of π.
    #[arg(long, allow_negative_numbers = true)]
    area: Option<String>,
    #[arg(long = "alphaL")]
    alpha_l: Option<String>,
    /// Coherence lifetime in µs, or `inf`.
    #[arg(long)]
    t2: Option<String>,
    /// Rectangular pulse duration in µs.
    #[arg(long)]
    duration: Option<String>,
}

fn load(cli: &Cli) -> Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::Io(format!("{}: {e}", cli.config.display())))?;
    // validated once the command line overrides are applied
    let mut cfg = parse_document(&text)?;
    cfg.scenario = cli.scenario;
    let overrides = [
        ("pulse.area_pi_units", &cli.area),
        ("alphaL", &cli.alpha_l),
        ("t2_us", &cli.t2),
        ("pulse.duration_us", &cli.duration),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)
                .map_err(|m| Error::Validation(vec![format!("--{key}: {m}")]))?;
        }
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = load(&cli).and_then(|cfg| run_scenario(&cfg));
    match outcome {
        Ok(o) => {
            println!("{}", o.summary);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            if o.passed {
                println!("PASS");
                ExitCode::SUCCESS
            } else {
                println!("FAIL");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
