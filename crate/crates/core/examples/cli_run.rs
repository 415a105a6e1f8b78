//! Drive the command-line front end in process.

use std::path::Path;

fn main() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/polaron2d.cfg");
    let out = std::env::temp_dir().join("grosslab-cli-example");
    let config = config.to_str().unwrap();
    let out = out.to_str().unwrap();
    let code = grosslab::cli::run(["grosslab", "validate", "--config", config]);
    println!("validate exit code {code}");
    let code = grosslab::cli::run([
        "grosslab", "run", "--config", config, "--exp", "regularity", "--s-list", "1.0,1.25,1.5,1.75", "--out", out,
    ]);
    println!("run exit code {code}, reports in {out}");
}
