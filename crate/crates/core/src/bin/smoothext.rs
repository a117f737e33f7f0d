use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use smoothext::config::Config;
use smoothext::run::{self, RunOptions, EXIT_ERROR};

/// Build a smooth extension from a JSON problem description and verify it.
///
/// Exit status: 0 when every check passes, 2 when any check fails,
/// 1 on configuration or construction errors.
#[derive(Debug, Parser)]
#[command(name = "smoothext", version)]
struct Cli {
    /// JSON configuration file.
    config: PathBuf,

    /// Omit `generated_at` so identical configs give byte-identical reports.
    #[arg(long)]
    no_timestamp: bool,

    /// Override `outputs.report_json`.
    #[arg(long, value_name = "PATH")]
    report_json: Option<PathBuf>,

    /// Override `outputs.samples_csv`.
    #[arg(long, value_name = "PATH")]
    samples_csv: Option<PathBuf>,

    /// Print the report to stdout when no report file is configured.
    #[arg(long)]
    print_report: bool,

    /// Suppress the per-check status lines on stderr.
    #[arg(short, long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}

fn execute(cli: &Cli) -> smoothext::Result<i32> {
    let mut config = Config::from_path(&cli.config)?;
    if cli.report_json.is_some() {
        config.outputs.report_json.clone_from(&cli.report_json);
    }
    if cli.samples_csv.is_some() {
        config.outputs.samples_csv.clone_from(&cli.samples_csv);
    }
    let (report, code) = run::run(
        &config,
        &RunOptions {
            timestamp: !cli.no_timestamp,
        },
    )?;
    if !cli.quiet {
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        for e in &report.checks {
            let margin = e
                .worst_margin
                .map_or("-".to_string(), |m| format!("{m:.3e}"));
            eprintln!(
                "{:<4} {:<26} margin={margin} {}",
                e.status.as_str(),
                e.check,
                e.params
            );
        }
        eprintln!("overall: {}", report.status.as_str());
    }
    if cli.print_report && config.outputs.report_json.is_none() {
        let text = serde_json::to_string_pretty(&report)?;
        let mut stdout = std::io::stdout().lock();
        if let Err(e) = writeln!(stdout, "{text}") {
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                return Err(e.into());
            }
        }
    }
    Ok(code)
}
