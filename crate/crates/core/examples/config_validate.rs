//! Parse a config from text, check it, and print the predicted problem size.

use grosslab::cli::predicted_dimension;
use grosslab::config::{parse_config, render_config};

const TEXT: &str = "\
dimension = 1
torus_length = 6.283185307179586
sites_per_dim = 8
nmax = 4
form_factor = smooth_power
beta = 0.125
K = 1.0
lambda_list = 1.5, 2.5, 3.5
seed = 7
";

fn main() -> grosslab::error::Result<()> {
    let config = parse_config(TEXT)?;
    print!("{}", render_config(&config));
    let (sites, fock, total) = predicted_dimension(&config)?;
    println!("sites {sites}, fock {fock}, total {total}");

    // K must sit below every cutoff.
    let bad = TEXT.replace("K = 1.0", "K = 2.0");
    println!("K = 2.0 -> {}", parse_config(&bad).unwrap_err());
    Ok(())
}
