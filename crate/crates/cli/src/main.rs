use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use esr_core::scenario::{
    run_scenario, run_self_test, ConfigError, OutputFormat, RunError, RunOverrides, ScenarioConfig, SelfTestOptions,
    EXIT_COMPUTATION, EXIT_CONFIG,
};

#[derive(Parser)]
#[command(name = "esr-sim", version, about = "Detection-conditioned measurement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and emit its report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the file's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the file's sample count.
        #[arg(long)]
        samples: Option<u64>,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run the built-in verification suites.
    SelfTest {
        #[arg(long)]
        seed: Option<u64>,
        /// Random instances in the fundamental-equation suite.
        #[arg(long, default_value_t = 1000)]
        instances: usize,
    },
    /// Check a scenario file without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::new(path.display().to_string(), format!("cannot read scenario: {e}")))?;
    Ok(ScenarioConfig::from_json(&text)?)
}

fn run(
    scenario: &Path,
    overrides: RunOverrides,
    output: Option<&Path>,
    format: OutputFormat,
) -> Result<(), RunError> {
    let config = load(scenario)?;
    let report = run_scenario(&config, overrides)?;
    let text = report.encode(format).map_err(RunError::Output)?;
    for d in &report.diagnostics {
        eprintln!("note: {d}");
    }
    match output {
        Some(path) => fs::write(path, text).map_err(|e| RunError::Output(format!("{}: {e}", path.display())))?,
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| RunError::Output(e.to_string()))?,
    }
    eprintln!(
        "{} finished in {:.3} s",
        report.scenario,
        report.wall_time.as_secs_f64()
    );
    Ok(())
}

fn self_test(seed: Option<u64>, instances: usize) -> Result<(), RunError> {
    let mut opts = SelfTestOptions {
        instances,
        ..SelfTestOptions::default()
    };
    if let Some(s) = seed {
        opts.seed = s;
    }
    let report = run_self_test(&opts)?;
    for s in &report.suites {
        println!(
            "{} {:<22} checks={:<6} max_deviation={:.3e}{}",
            if s.passed { "PASS" } else { "FAIL" },
            s.name,
            s.checks,
            s.max_deviation,
            if s.passed { String::new() } else { format!("  ({})", s.detail) }
        );
    }
    if report.passed() {
        Ok(())
    } else {
        Err(RunError::SelfTest("one or more suites failed".into()))
    }
}

fn validate(scenario: &Path) -> Result<(), RunError> {
    let config = load(scenario)?;
    config.validate()?;
    println!("ok: {} scenario", config.scenario_type);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            samples,
            output,
            format,
        } => run(&scenario, RunOverrides { seed, samples }, output.as_deref(), format.into()),
        Command::SelfTest { seed, instances } => self_test(seed, instances),
        Command::Validate { scenario } => validate(&scenario),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("esr-sim: {e}");
            let code = e.exit_code();
            debug_assert!(code == EXIT_CONFIG || code == EXIT_COMPUTATION);
            ExitCode::from(code as u8)
        }
    }
}
