//! Plain-text `key = value` model configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{FormFactorSpec, ModelConfig};

const KEYS: [&str; 11] = [
    "dimension",
    "torus_length",
    "sites_per_dim",
    "nmax",
    "form_factor",
    "gamma",
    "beta",
    "coupling",
    "K",
    "lambda_list",
    "seed",
];

pub fn parse_config(text: &str) -> Result<ModelConfig> {
    let mut entries: BTreeMap<&str, &str> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
        }
        if entries.insert(key, value.trim()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
        }
    }

    let required = |key: &str| -> Result<&str> {
        entries
            .get(key)
            .copied()
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    };
    fn num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{s}`")))
    }

    let form_factor = match required("form_factor")? {
        "power_law" => FormFactorSpec::PowerLaw {
            gamma: num("gamma", required("gamma")?)?,
        },
        "polaron" => FormFactorSpec::Polaron,
        "smooth_power" => FormFactorSpec::SmoothPower {
            beta: num("beta", required("beta")?)?,
        },
        other => return Err(Error::Config(format!("unknown form_factor `{other}`"))),
    };

    let lambda_list = required("lambda_list")?
        .split(',')
        .map(|s| num::<f64>("lambda_list", s.trim()))
        .collect::<Result<Vec<_>>>()?;

    let config = ModelConfig {
        dimension: num("dimension", required("dimension")?)?,
        torus_length: num("torus_length", required("torus_length")?)?,
        sites_per_dim: num("sites_per_dim", required("sites_per_dim")?)?,
        nmax: num("nmax", required("nmax")?)?,
        form_factor,
        coupling: entries.get("coupling").map_or(Ok(1.0), |s| num("coupling", s))?,
        k_ir: num("K", required("K")?)?,
        lambda_list,
        seed: entries.get("seed").map_or(Ok(0), |s| num("seed", s))?,
    };
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ModelConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Renders a config in the same format `parse_config` accepts.
pub fn render_config(config: &ModelConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dimension = {}", config.dimension);
    let _ = writeln!(out, "torus_length = {}", config.torus_length);
    let _ = writeln!(out, "sites_per_dim = {}", config.sites_per_dim);
    let _ = writeln!(out, "nmax = {}", config.nmax);
    match &config.form_factor {
        FormFactorSpec::PowerLaw { gamma } => {
            let _ = writeln!(out, "form_factor = power_law\ngamma = {gamma}");
        }
        FormFactorSpec::Polaron => {
            let _ = writeln!(out, "form_factor = polaron");
        }
        FormFactorSpec::SmoothPower { beta } => {
            let _ = writeln!(out, "form_factor = smooth_power\nbeta = {beta}");
        }
        FormFactorSpec::Table { values } => {
            let _ = writeln!(out, "# form_factor = table ({} values, not expressible here)", values.len());
        }
    }
    let _ = writeln!(out, "coupling = {}", config.coupling);
    let _ = writeln!(out, "K = {}", config.k_ir);
    let list: Vec<String> = config.lambda_list.iter().map(|l| l.to_string()).collect();
    let _ = writeln!(out, "lambda_list = {}", list.join(","));
    let _ = writeln!(out, "seed = {}", config.seed);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# desk-scale polaron
dimension = 1
torus_length = 6.283185307179586
sites_per_dim = 8
nmax = 4
form_factor = smooth_power
beta = 0.125
K = 1.5
lambda_list = 2.5, 3.5
seed = 11
";

    #[test]
    fn parses_sample() {
        let c = parse_config(SAMPLE).unwrap();
        assert_eq!(c.dimension, 1);
        assert_eq!(c.form_factor, FormFactorSpec::SmoothPower { beta: 0.125 });
        assert_eq!(c.lambda_list, vec![2.5, 3.5]);
        assert_eq!(c.coupling, 1.0);
        assert_eq!(c.seed, 11);
    }

    #[test]
    fn render_round_trips() {
        let c = parse_config(SAMPLE).unwrap();
        assert_eq!(parse_config(&render_config(&c)).unwrap(), c);
    }

    #[test]
    fn unknown_and_missing_keys_are_errors() {
        let bad = format!("{SAMPLE}colour = blue\n");
        assert!(parse_config(&bad).unwrap_err().to_string().contains("unknown key"));
        let missing = SAMPLE.replace("nmax = 4\n", "");
        assert!(parse_config(&missing).unwrap_err().to_string().contains("missing key `nmax`"));
        let nobeta = SAMPLE.replace("beta = 0.125\n", "");
        assert!(parse_config(&nobeta).is_err());
        let dup = format!("{SAMPLE}seed = 3\n");
        assert!(parse_config(&dup).is_err());
    }
}
