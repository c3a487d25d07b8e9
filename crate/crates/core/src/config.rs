//! Experiment configuration files.
//!
//! The format is TOML. Every top-level key is optional except `scenario`
//! (which may instead come from the command line); omitted keys take the
//! scenario's desk-scale defaults. Parsing reports every problem it finds
//! rather than stopping at the first.
//!
//! ```toml
//! scenario = "mse_fb"
//! n = [500, 2000, 8000]
//! beta = 0.4                      # or q_n = 12
//! signal = { universal-multiple = 5.0 }   # or signal = 7.0
//! replicates = 20
//! seed = 1
//! prior = { name = "horseshoe" }  # or { name = "tpb", a = 1, b = 0.5 }
//! tau_prior = { kind = "truncated-half-cauchy" }
//! eb = { c1 = 2.0, c2 = 1.0 }
//!
//! [testing]
//! p = [0.01, 0.02]
//! c = [4.0]
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::experiments::{ExperimentConfig, Scenario, SignalRule};

/// Values that take precedence over the file (command-line flags, then
/// environment variables, resolved by the caller).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    /// Used when neither the overrides nor the file name a scenario.
    pub fallback_scenario: Option<Scenario>,
}

const KEYS: [&str; 15] = [
    "scenario",
    "n",
    "q_n",
    "beta",
    "signal",
    "replicates",
    "seed",
    "prior",
    "tau_prior",
    "eb",
    "fb",
    "quadrature",
    "radius_multipliers",
    "draws",
    "testing",
];

pub fn parse_config(path: &Path, overrides: &ConfigOverrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, overrides)
}

fn field<T: DeserializeOwned>(table: &Table, key: &str, errors: &mut Vec<String>) -> Option<T> {
    let value = table.get(key)?;
    match value.clone().try_into::<T>() {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{key}: {}", e.to_string().trim()));
            None
        }
    }
}

pub fn parse_config_str(text: &str, overrides: &ConfigOverrides) -> Result<ExperimentConfig> {
    // duplicate keys are a parse error in TOML, reported with their position
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string().trim().to_string()]))?;
    let mut errors = Vec::new();
    let mut unknown: Vec<&String> = table.keys().filter(|k| !KEYS.contains(&k.as_str())).collect();
    unknown.sort();
    for k in unknown {
        errors.push(format!("{k}: unknown key"));
    }

    let scenario = match overrides.scenario {
        Some(s) => Some(s),
        None => match table.get("scenario") {
            None if overrides.fallback_scenario.is_some() => overrides.fallback_scenario,
            None => {
                errors.push("scenario: missing required field".to_string());
                None
            }
            Some(Value::String(name)) => match Scenario::parse(name) {
                Some(s) => Some(s),
                None => {
                    let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                    errors.push(format!("scenario: unknown scenario `{name}` (expected one of {})", names.join(", ")));
                    None
                }
            },
            Some(_) => {
                errors.push("scenario: expected a string".to_string());
                None
            }
        },
    };
    let mut cfg = ExperimentConfig::new(scenario.unwrap_or(Scenario::MseEb));

    if let Some(v) = table.get("n") {
        match v {
            Value::Integer(_) => cfg.n = field::<usize>(&table, "n", &mut errors).map(|n| vec![n]).unwrap_or_default(),
            _ => {
                if let Some(n) = field(&table, "n", &mut errors) {
                    cfg.n = n;
                }
            }
        }
    }
    if table.contains_key("q_n") {
        cfg.q_n = field(&table, "q_n", &mut errors);
    }
    if let Some(v) = field(&table, "beta", &mut errors) {
        cfg.beta = v;
    }
    if let Some(v) = table.get("signal") {
        match v {
            Value::Float(f) => cfg.signal = SignalRule::Fixed(*f),
            Value::Integer(i) => cfg.signal = SignalRule::Fixed(*i as f64),
            _ => {
                if let Some(s) = field(&table, "signal", &mut errors) {
                    cfg.signal = s;
                }
            }
        }
    }
    if let Some(v) = field(&table, "replicates", &mut errors) {
        cfg.replicates = v;
    }
    if let Some(v) = field(&table, "seed", &mut errors) {
        cfg.seed = v;
    }
    if let Some(v) = field(&table, "prior", &mut errors) {
        cfg.prior = v;
    }
    if table.contains_key("tau_prior") {
        cfg.tau_prior = field(&table, "tau_prior", &mut errors);
    }
    if let Some(v) = field(&table, "eb", &mut errors) {
        cfg.eb = v;
    }
    if let Some(v) = field(&table, "fb", &mut errors) {
        cfg.fb = v;
    }
    if let Some(v) = field(&table, "quadrature", &mut errors) {
        cfg.quadrature = v;
    }
    if let Some(v) = field(&table, "radius_multipliers", &mut errors) {
        cfg.radius_multipliers = v;
    }
    if let Some(v) = field(&table, "draws", &mut errors) {
        cfg.draws = v;
    }
    if let Some(v) = field(&table, "testing", &mut errors) {
        cfg.testing = v;
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }

    if scenario.is_some() {
        errors.extend(cfg.violations());
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::PriorChoice;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config_str(text, &ConfigOverrides::default())
    }

    fn violations(text: &str) -> Vec<String> {
        match parse(text) {
            Err(Error::Config(v)) => v,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse("scenario = \"mse_eb\"").unwrap();
        assert_eq!(cfg.eb.c1, 2.0);
        assert_eq!(cfg.eb.c2, 1.0);
        assert_eq!(cfg.prior, PriorChoice::Horseshoe);
        assert_eq!(cfg.n, vec![500, 2000, 8000]);
        assert_eq!(cfg.replicates, 20);
    }

    #[test]
    fn full_config() {
        let cfg = parse(
            r#"
            scenario = "abos"
            n = 2000
            signal = 7.5
            seed = 99
            prior = { name = "tpb", a = 1.0, b = 0.5 }
            tau_prior = { kind = "truncated-uniform", hi = 0.01 }
            fb = { grid_nodes = 50, mode = "exact" }
            [testing]
            p = [0.05]
            c = [3.0]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.n, vec![2000]);
        assert_eq!(cfg.signal, SignalRule::Fixed(7.5));
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.prior, PriorChoice::Tpb { a: 1.0, b: 0.5 });
        assert_eq!(cfg.fb.grid_nodes, 50);
        assert_eq!(cfg.testing.p, vec![0.05]);
        assert_eq!(cfg.tau_prior_for(2000).unwrap().support(), (1.0 / 2000.0, 0.01));
    }

    #[test]
    fn c1_below_two_is_cited() {
        let v = violations("scenario = \"mse_eb\"\neb = { c1 = 1.5 }");
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("c1 >= 2"), "{v:?}");
    }

    #[test]
    fn all_violations_reported() {
        let v = violations(
            "scenario = \"mse_eb\"\nreplicates = 0\nbogus = 1\neb = { c1 = 1.0, c2 = 0.5 }\nbeta = 2.0\nwhatever = true",
        );
        assert!(v.iter().any(|m| m.starts_with("bogus: unknown")));
        assert!(v.iter().any(|m| m.starts_with("whatever: unknown")));
        assert!(v.iter().any(|m| m.starts_with("replicates")));
        assert!(v.iter().any(|m| m.starts_with("beta")));
        assert!(v.iter().any(|m| m.starts_with("eb")));
        assert!(v.len() >= 5, "{v:?}");
    }

    #[test]
    fn duplicate_key_rejected_deterministically() {
        let text = "scenario = \"mse_eb\"\nseed = 1\nseed = 2";
        let a = violations(text);
        let b = violations(text);
        assert_eq!(a, b);
        assert!(a[0].to_lowercase().contains("duplicate"), "{a:?}");
    }

    #[test]
    fn missing_and_unknown_scenario() {
        assert!(violations("seed = 1").iter().any(|m| m.contains("missing required")));
        assert!(violations("scenario = \"nope\"").iter().any(|m| m.contains("unknown scenario")));
        let cfg = parse_config_str(
            "seed = 1",
            &ConfigOverrides {
                scenario: Some(Scenario::Type1),
                seed: Some(7),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.scenario, Scenario::Type1);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.n, vec![10_000]);
    }

    #[test]
    fn nested_unknown_field_rejected() {
        let v = violations("scenario = \"mse_eb\"\neb = { c1 = 2.0, c3 = 1.0 }");
        assert!(v[0].starts_with("eb:") && v[0].contains("c3"), "{v:?}");
    }
}
