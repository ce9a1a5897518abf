mod commands;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use commands::{command_name, run, Failure, Outcome, Report};
use settings::{Cli, Settings};

fn write_outputs(command: &str, settings: &Settings, outcome: &Outcome) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Usage(e.to_string());
    if let Some(path) = &settings.out {
        let report = Report {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            settings,
            chart: outcome.chart.clone(),
            tolerances: &outcome.tolerances,
            status: if outcome.violation.is_some() { "violation" } else { "ok" },
            violation: outcome.violation.as_deref(),
            result: &outcome.result,
        };
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(path, text + "\n").map_err(io)?;
    }
    if let Some(path) = &settings.csv {
        let Some((header, rows)) = &outcome.csv else {
            return Err(Failure::Usage(format!("`{command}` has no CSV output")));
        };
        let mut w = csv::Writer::from_path(path).map_err(|e| Failure::Usage(e.to_string()))?;
        w.write_record(header).map_err(|e| Failure::Usage(e.to_string()))?;
        for row in rows {
            w.write_record(row.iter().map(|x| format!("{x:e}"))).map_err(|e| Failure::Usage(e.to_string()))?;
        }
        w.flush().map_err(io)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let base = match &cli.flags.config {
        Some(path) => match Settings::load(path) {
            Ok(s) => s,
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(1);
            }
        },
        None => Settings::default(),
    };
    let settings = base.merge(cli.flags.clone());
    let name = command_name(&cli.command);

    let result = run(&cli.command, &settings).and_then(|outcome| {
        write_outputs(&name, &settings, &outcome)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            if let Some(chart) = &outcome.chart {
                println!("{name}: {chart}");
            }
            for line in &outcome.summary {
                println!("{line}");
            }
            if let Some(path) = &settings.out {
                println!("report written to {}", path.display());
            }
            match outcome.violation {
                Some(v) => {
                    eprintln!("invariant violation: {v}");
                    ExitCode::from(3)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
