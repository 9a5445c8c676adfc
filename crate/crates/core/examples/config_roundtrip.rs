//! Writes a builtin scenario to JSON, loads it back, runs it and persists
//! the run; persisting again is a no-op.
//!
//!     cargo run --example config_roundtrip -- [out_dir]

use collapse_lab::persist::{persist_run, PersistOutcome};
use collapse_lab::{builtin_scenario, load_config};

fn main() -> collapse_lab::Result<()> {
    let dir = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("collapse-lab-roundtrip"));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("beamsplitter.json");
    std::fs::write(&path, builtin_scenario("beamsplitter")?.to_json_pretty()?)?;
    let cfg = load_config(&path)?;
    println!("config hash {}", cfg.hash()?);
    let rec = cfg.build()?.run(Some(3))?;
    let run_dir = dir.join("run");
    for _ in 0..2 {
        match persist_run(&cfg, std::slice::from_ref(&rec), None, &run_dir)? {
            PersistOutcome::Written(m) => println!("wrote {:?}", m.files),
            PersistOutcome::Unchanged(_) => println!("unchanged, nothing written"),
        }
    }
    Ok(())
}
