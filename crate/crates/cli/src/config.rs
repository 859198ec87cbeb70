//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Command-line flags
//! override the file. Every key and its default is listed in [`KEYS`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fermiflow::dpp::ENUMERATION_CAP;
use fermiflow::w1_exact::{apply_config_keys, W1Config};

/// `(key, default, description)`
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "root seed; split per subcommand and per instance"),
    ("format", "json", "json or csv"),
    ("out", "", "output path; stdout when empty"),
    ("enumeration_cap", "1000000", "largest number of ordered tuples or configurations enumerated"),
    ("verify.space_size", "6", "points in the ground set"),
    ("verify.n", "2", "particles"),
    ("verify.seeds", "10", "Haar instances"),
    ("verify.samples", "20000", "sampler draws per instance for the chi-square test"),
    ("verify.tol", "1e-9", "tolerance on correlation minors"),
    ("bounds.space_size", "6", "points in the ground set"),
    ("bounds.kind", "projection", "projection or mixed"),
    ("bounds.n", "2", "rank for projection kernels, number of eigenpairs for mixed ones"),
    ("bounds.seeds", "100", "instances"),
    ("bounds.mode", "exact", "exact or empirical"),
    ("bounds.samples", "20000", "draws per process in empirical mode"),
    ("bounds.bootstrap", "1000", "bootstrap resamples in empirical mode"),
    ("bounds.identical", "false", "compare each instance with itself"),
    ("bounds.tol", "1e-9", "slack tolerance for exact distances"),
    ("rdm.dim", "4", "single-particle dimension"),
    ("rdm.n", "2", "particles"),
    ("rdm.seeds", "20", "Haar pairs"),
    ("rdm.identical", "false", "compare each state with itself"),
    ("rdm.tol", "1e-4", "solver tolerance; monotonicity is checked within twice this"),
    ("gap.n_max", "20", "largest particle number in the table"),
    ("gap.rule", "geometric", "geometric (eps_i = ratio^i) or power (eps_i = i^-exponent)"),
    ("gap.ratio", "0.5", "ratio of the geometric rule"),
    ("gap.exponent", "2", "exponent of the power rule"),
    ("selftest.criteria", "1,2,3,4,5,6,7,8,9", "comma-separated criterion numbers"),
    ("w1.rho_penalty", "1.0", "ADMM penalty"),
    ("w1.relaxation", "1.7", "ADMM over-relaxation, in (0, 2)"),
    ("w1.tol", "1e-8", "absolute stopping tolerance"),
    ("w1.rel_tol", "1e-6", "relative stopping tolerance"),
    ("w1.gap_tol", "1e-5", "stop once the certified gap is below this"),
    ("w1.max_iter", "50000", "iteration cap"),
    ("w1.adaptive_penalty", "true", "rebalance the penalty from the residuals"),
    ("w1.dim_cap", "64", "largest total dimension accepted"),
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(ConfigError(format!("format: expected json or csv, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub enumeration_cap: usize,
    pub w1: W1Config,
}

pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected key = value", no + 1)))?;
        let k = k.trim();
        if !KEYS.iter().any(|(key, _, _)| *key == k) {
            return Err(ConfigError(format!("line {}: unknown key {k:?}", no + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let values = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
                parse_pairs(&text)?
            }
            None => BTreeMap::new(),
        };
        Self::from_values(values)
    }

    pub fn from_values(values: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut cfg = Self {
            values,
            seed: 0,
            format: Format::Json,
            out: None,
            enumeration_cap: ENUMERATION_CAP,
            w1: W1Config::default(),
        };
        cfg.seed = cfg.get("seed")?;
        cfg.format = cfg.get("format")?;
        let out: String = cfg.get("out")?;
        cfg.out = (!out.is_empty()).then(|| PathBuf::from(out));
        cfg.enumeration_cap = cfg.positive("enumeration_cap")?;
        apply_config_keys(&mut cfg.w1, &cfg.values).map_err(|e| ConfigError(e.to_string()))?;
        Ok(cfg)
    }

    fn raw(&self, key: &str) -> String {
        match self.values.get(key) {
            Some(v) => v.clone(),
            None => KEYS
                .iter()
                .find(|(k, _, _)| *k == key)
                .map(|(_, d, _)| d.to_string())
                .unwrap_or_default(),
        }
    }

    pub fn get<V: FromStr>(&self, key: &str) -> Result<V, ConfigError> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| ConfigError(format!("{key}: cannot parse {raw:?}")))
    }

    /// An integer key that must be at least one.
    pub fn positive(&self, key: &str) -> Result<usize, ConfigError> {
        // caps may be written as 1e6
        let raw = self.raw(key);
        let v = raw
            .parse::<usize>()
            .ok()
            .or_else(|| raw.parse::<f64>().ok().filter(|x| x.fract() == 0.0 && *x >= 0.0).map(|x| x as usize))
            .ok_or_else(|| ConfigError(format!("{key}: expected a positive integer, got {raw:?}")))?;
        if v == 0 {
            return Err(ConfigError(format!("{key}: must be positive")));
        }
        Ok(v)
    }

    /// Re-validates with `pairs` layered on top; unknown keys are rejected.
    pub fn with_overrides(self, pairs: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        if let Some(k) = pairs.keys().find(|k| !KEYS.iter().any(|(key, _, _)| key == k)) {
            return Err(ConfigError(format!("unknown key {k:?}")));
        }
        let mut values = self.values;
        values.extend(pairs);
        Self::from_values(values)
    }

    /// Effective values of every key, for echoing into reports.
    pub fn effective(&self) -> BTreeMap<String, String> {
        KEYS.iter()
            .map(|(k, _, _)| (k.to_string(), self.raw(k)))
            .filter(|(k, _)| k != "out")
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let v = parse_pairs("# run\n\nseed = 7\n verify.n=3 \n").unwrap();
        assert_eq!(v["seed"], "7");
        assert_eq!(v["verify.n"], "3");
        let cfg = RunConfig::from_values(v).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.get::<usize>("verify.n").unwrap(), 3);
        assert_eq!(cfg.get::<usize>("verify.space_size").unwrap(), 6);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(parse_pairs("sede = 1").is_err());
        assert!(parse_pairs("seed 1").is_err());
        let bad = |k: &str, v: &str| RunConfig::from_values([(k.to_string(), v.to_string())].into()).is_err();
        assert!(bad("format", "xml"));
        assert!(bad("enumeration_cap", "0"));
        assert!(bad("w1.relaxation", "2.5"));
        assert!(!bad("enumeration_cap", "1e6"));
    }

    #[test]
    fn every_default_parses() {
        let cfg = RunConfig::from_values(BTreeMap::new()).unwrap();
        assert_eq!(cfg.format, Format::Json);
        assert_eq!(cfg.enumeration_cap, ENUMERATION_CAP);
        assert_eq!(cfg.w1, W1Config::default());
        assert!(!cfg.effective().contains_key("out"));
    }

    #[test]
    fn documented_defaults_match_library_defaults() {
        let all: BTreeMap<String, String> = KEYS
            .iter()
            .map(|(k, d, _)| (k.to_string(), d.to_string()))
            .collect();
        let cfg = RunConfig::from_values(all).unwrap();
        assert_eq!(cfg.w1, W1Config::default());
        assert_eq!(cfg.enumeration_cap, ENUMERATION_CAP);
    }
}
