//! Runs a bundled scenario end to end at reduced size and writes its report,
//! the same thing `hazard-lab run --config <name>` does.
//!
//! cargo run --release --example run_bundled_scenario -- [name] [paths] [out]

use hazard_lab::lab::{emit_report, execute, read_report};
use hazard_lab::scenario::{Scenario, BUNDLED};
use hazard_lab::LabError;
use std::path::PathBuf;

fn main() -> hazard_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "cox_unit".into());
    let paths = args.next().map(|p| p.parse().expect("paths must be an integer")).unwrap_or(5_000);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join(format!("hazard-lab-{name}")));

    println!("bundled: {}", BUNDLED.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "));
    let mut scenario = Scenario::bundled(&name)?;
    scenario.n_paths = paths;
    println!("{scenario}");

    let run = execute(&scenario)?;
    if out.exists() {
        std::fs::remove_dir_all(&out).map_err(|source| LabError::Io { path: out.clone(), source })?;
    }
    let artifact = emit_report(&run, &out)?;
    println!("{}", artifact.summary);
    println!("files: {}", artifact.files.join(", "));
    let back = read_report(&out)?;
    println!("re-read {} families, exit code {}", back.families.len(), back.exit_code());
    Ok(())
}
