use fracwave_cli::{load_or_preset, run_config, scenarios, CliError, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
fracwave — pseudo-spectral experiments for anisotropic fractional dispersion

USAGE:
    fracwave run [SCENARIO] [--config PATH] [--preset smoke|paper]
                 [--seed N] [--out DIR]
    fracwave list
    fracwave validate --config PATH
    fracwave info

Flags may also come from the environment: FRACWAVE_SEED, FRACWAVE_OUT,
FRACWAVE_PRESET (flag beats environment beats config file).

Exit codes: 0 success, 2 invalid configuration, 3 numerical abort.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(args: &[String]) -> Result<(), CliError> {
    let mut it = args.iter();
    match it.next().map(|s| s.as_str()) {
        Some("run") => run(it.as_slice()),
        Some("list") => {
            print!("{}", scenarios::scenario_table());
            Ok(())
        }
        Some("validate") => validate(it.as_slice()),
        Some("info") => {
            println!(
                "fracwave {} ({} scenarios; deterministic for fixed config, seed and build)",
                env!("CARGO_PKG_VERSION"),
                scenarios::SCENARIOS.len()
            );
            Ok(())
        }
        Some("--help") | Some("-h") | None => {
            println!("{USAGE}");
            Ok(())
        }
        Some(other) => Err(CliError::Config(format!(
            "unknown command {other:?}\n{USAGE}"
        ))),
    }
}

struct Parsed {
    scenario: Option<String>,
    config: Option<PathBuf>,
    preset: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

fn parse_flags(args: &[String]) -> Result<Parsed, CliError> {
    let mut parsed = Parsed {
        scenario: None,
        config: None,
        preset: None,
        seed: None,
        out: None,
    };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut need = |name: &str| {
            it.next()
                .cloned()
                .ok_or_else(|| CliError::Config(format!("{name} needs a value")))
        };
        match arg.as_str() {
            "--config" => parsed.config = Some(PathBuf::from(need("--config")?)),
            "--preset" => parsed.preset = Some(need("--preset")?),
            "--seed" => {
                parsed.seed = Some(
                    need("--seed")?
                        .parse()
                        .map_err(|_| CliError::Config("--seed must be an integer".into()))?,
                )
            }
            "--out" => parsed.out = Some(PathBuf::from(need("--out")?)),
            other if !other.starts_with('-') && parsed.scenario.is_none() => {
                parsed.scenario = Some(other.to_string())
            }
            other => {
                return Err(CliError::Config(format!("unknown flag {other:?}\n{USAGE}")));
            }
        }
    }
    Ok(parsed)
}

fn run(args: &[String]) -> Result<(), CliError> {
    let parsed = parse_flags(args)?;
    let preset = parsed
        .preset
        .or_else(|| std::env::var("FRACWAVE_PRESET").ok())
        .unwrap_or_else(|| "smoke".into());
    let cfg = load_or_preset(
        parsed.config.as_deref(),
        parsed.scenario.as_deref(),
        &preset,
    )?;
    let overrides = Overrides {
        seed: parsed.seed,
        out_dir: parsed.out,
    }
    .with_env();
    let report = run_config(&cfg, &overrides)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "wrote {} files to {}",
        report.files.len(),
        report.out_dir.display()
    );
    if report.aborted {
        return Err(CliError::Numerical(
            "run ended in an abort; artifacts kept".into(),
        ));
    }
    Ok(())
}

fn validate(args: &[String]) -> Result<(), CliError> {
    let parsed = parse_flags(args)?;
    let path = parsed
        .config
        .ok_or_else(|| CliError::Config("validate needs --config PATH".into()))?;
    let cfg = fracwave_cli::config::load_config(&path).map_err(CliError::Config)?;
    if !scenarios::SCENARIOS.iter().any(|s| s.name == cfg.scenario) {
        return Err(CliError::Config(format!(
            "unknown scenario {:?}",
            cfg.scenario
        )));
    }
    println!("ok: {} ({})", path.display(), cfg.scenario);
    Ok(())
}
