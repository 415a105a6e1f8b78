//! Run the `regularity` experiment on `polaron2d.cfg` and print its summary.

use std::path::Path;

use grosslab::config::load_config;
use grosslab::experiments::{Experiment, RunOptions};

fn main() -> grosslab::error::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/polaron2d.cfg");
    let config = load_config(&path)?;
    let report = "regularity".parse::<Experiment>()?.run(&config, &RunOptions::default())?;
    println!("{}: {} records, verdict {}", report.name, report.records.len(), report.verdict);
    for (key, value) in &report.summary {
        println!("  {key} = {value:.6}");
    }
    for r in report.failures() {
        println!("  FAILED {} measured {:.4e} bound {:.4e}", r.sweep_key, r.measured, r.bound);
    }
    for note in &report.notes {
        println!("  note: {note}");
    }
    Ok(())
}
