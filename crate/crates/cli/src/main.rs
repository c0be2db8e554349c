mod commands;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use serde_json::json;

use commands::{Registry, RunContext};
use qgsim_core::io::Provenance;
use qgsim_core::{parse_config_with, QgError};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

fn fail(command: &str, e: &QgError) -> ExitCode {
    let details = match e {
        QgError::Config(v) => v.clone(),
        _ => Vec::new(),
    };
    let record = json!({
        "status": "error",
        "command": command,
        "kind": e.kind(),
        "message": e.to_string(),
        "details": details,
    });
    eprintln!("{record}");
    ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_VALIDATION })
}

fn main() -> ExitCode {
    let registry = Registry::default();
    let matches = registry.cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let command = registry.get(name).expect("registered subcommand");

    let text = match sub.get_one::<String>("config") {
        Some(file) => match fs::read_to_string(file) {
            Ok(t) => t,
            Err(e) => return fail(name, &QgError::Io(e)),
        },
        None => String::new(),
    };
    let overrides: Vec<String> = sub
        .get_many::<String>("set")
        .map(|v| {
            v.map(|s| match s.split_once('=') {
                Some((k, val)) if !val.trim_start().starts_with('=') => format!("{} = {}", k.trim(), val.trim()),
                _ => s.clone(),
            })
            .collect()
        })
        .unwrap_or_default();
    let config = match parse_config_with(&text, &overrides) {
        Ok(c) => c,
        Err(e) => return fail(name, &e),
    };
    let out_dir = sub
        .get_one::<String>("out")
        .map(PathBuf::from)
        .unwrap_or_else(|| config.output_dir.clone());
    if let Err(e) = fs::create_dir_all(&out_dir) {
        return fail(name, &QgError::Io(e));
    }
    let provenance = Provenance::new(config.hash());
    let normalized = format!("# {}\n{}", provenance.csv_line().trim_start_matches("# "), config.normalize());
    if let Err(e) = fs::write(out_dir.join("config.toml"), normalized) {
        return fail(name, &QgError::Io(e));
    }
    let ctx = RunContext {
        config,
        out_dir,
        provenance,
    };
    match command.run(&ctx, sub) {
        Ok(outcome) => {
            let record = json!({
                "status": if outcome.passed { "ok" } else { "failed" },
                "command": name,
                "config_hash": ctx.provenance.config_hash,
                "version": ctx.provenance.version,
                "result": outcome.summary,
            });
            // A closed pipe on stdout is not a failure of the run.
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&record).expect("serializable"));
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VALIDATION)
            }
        }
        Err(e) => fail(name, &e),
    }
}
