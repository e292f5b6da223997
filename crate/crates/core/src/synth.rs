//! Synthetic Interface-group datasets.
//!
//! Each class draws every variable independently from its own log-normal
//! distribution of counter deltas. Scenarios are TOML documents; the
//! bundled `default.scenario` models the eight traffic classes.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureSchema, MibRecord};
use crate::error::{Error, Result};

pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.scenario");

/// Parameters of ln(delta) ~ Normal(mu, sigma).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub mu: f64,
    pub sigma: f64,
}

impl Rate {
    pub fn mean(&self) -> f64 {
        (self.mu + self.sigma * self.sigma / 2.0).exp()
    }

    pub fn std_dev(&self) -> f64 {
        let s2 = self.sigma * self.sigma;
        ((s2.exp() - 1.0) * (2.0 * self.mu + s2).exp()).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassScenario {
    pub name: String,
    pub count: usize,
    /// One rate per scenario variable, in variable order.
    pub rates: Vec<Rate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub variables: Vec<String>,
    pub classes: Vec<ClassScenario>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    seed: u64,
    variables: Vec<String>,
    class: Vec<ClassFile>,
}

#[derive(Serialize, Deserialize)]
struct ClassFile {
    name: String,
    count: usize,
    rates: BTreeMap<String, Rate>,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        let mut classes = Vec::with_capacity(file.class.len());
        for c in file.class {
            let mut rates = Vec::with_capacity(file.variables.len());
            for v in &file.variables {
                let rate = c.rates.get(v).ok_or_else(|| {
                    Error::Scenario(format!("class {:?} has no rate for variable {v:?}", c.name))
                })?;
                rates.push(*rate);
            }
            if let Some(extra) = c.rates.keys().find(|k| !file.variables.contains(k)) {
                return Err(Error::Scenario(format!(
                    "class {:?} sets unknown variable {extra:?}",
                    c.name
                )));
            }
            classes.push(ClassScenario {
                name: c.name,
                count: c.count,
                rates,
            });
        }
        let spec = ScenarioSpec {
            variables: file.variables,
            classes,
            seed: file.seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        let file = ScenarioFile {
            seed: self.seed,
            variables: self.variables.clone(),
            class: self
                .classes
                .iter()
                .map(|c| ClassFile {
                    name: c.name.clone(),
                    count: c.count,
                    rates: self.variables.iter().cloned().zip(c.rates.iter().copied()).collect(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("scenario serializes")
    }

    pub fn total_records(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        FeatureSchema::new(self.variables.iter().cloned()).map_err(|e| Error::Scenario(e.to_string()))?;
        if self.variables.is_empty() {
            return Err(Error::Scenario("no variables".into()));
        }
        let mut names = HashSet::new();
        for c in &self.classes {
            if c.name.trim().is_empty() {
                return Err(Error::Scenario("class with empty name".into()));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::Scenario(format!("duplicate class {:?}", c.name)));
            }
            if c.rates.len() != self.variables.len() {
                return Err(Error::Scenario(format!(
                    "class {:?} has {} rates for {} variables",
                    c.name,
                    c.rates.len(),
                    self.variables.len()
                )));
            }
            for (v, r) in self.variables.iter().zip(&c.rates) {
                if !r.mu.is_finite() {
                    return Err(Error::Scenario(format!("class {:?}, variable {v:?}: mu must be finite", c.name)));
                }
                if !(r.sigma > 0.0 && r.sigma.is_finite()) {
                    return Err(Error::Scenario(format!(
                        "class {:?}, variable {v:?}: sigma must be positive, got {}",
                        c.name, r.sigma
                    )));
                }
            }
        }
        if self.classes.iter().filter(|c| c.count > 0).count() < 2 {
            return Err(Error::Scenario("need at least two classes with records".into()));
        }
        Ok(())
    }
}

/// The bundled eight-class, 4998-record Interface-group scenario.
pub fn default_scenario() -> ScenarioSpec {
    ScenarioSpec::from_toml(DEFAULT_SCENARIO).expect("bundled scenario is valid")
}

/// Draws every class's records, then shuffles them together. The class
/// catalog is the scenario's class order.
pub fn generate(spec: &ScenarioSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(spec.total_records());
    for (label, class) in spec.classes.iter().enumerate() {
        let dists: Vec<LogNormal<f64>> = class
            .rates
            .iter()
            .map(|r| LogNormal::new(r.mu, r.sigma).map_err(|e| Error::Scenario(e.to_string())))
            .collect::<Result<_>>()?;
        for _ in 0..class.count {
            let values = dists.iter().map(|d| d.sample(&mut rng)).collect();
            records.push(MibRecord { values, label });
        }
    }
    records.shuffle(&mut rng);
    Dataset::new(
        FeatureSchema::new(spec.variables.iter().cloned())?,
        spec.classes.iter().map(|c| c.name.clone()).collect(),
        records,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{read_csv, write_csv};
    use crate::features::INTERFACE_VARIABLES;

    #[test]
    fn default_scenario_shape() {
        let s = default_scenario();
        assert_eq!(s.total_records(), 4998);
        assert_eq!(s.variables, INTERFACE_VARIABLES);
        assert_eq!(s.classes.len(), 8);
        assert!(s.classes.iter().all(|c| c.count > 0));
        assert_eq!(s.seed, 42);
    }

    #[test]
    fn generation_is_deterministic_and_counts_match() {
        let s = default_scenario();
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a, b);
        let want: Vec<usize> = s.classes.iter().map(|c| c.count).collect();
        assert_eq!(a.class_counts(), want);
        assert!(a.records().iter().flat_map(|r| &r.values).all(|v| *v > 0.0));
    }

    #[test]
    fn output_survives_csv_round_trip() {
        let d = generate(&default_scenario()).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice(), None).unwrap().relabel(d.classes()), d);
    }

    #[test]
    fn toml_round_trip() {
        let s = default_scenario();
        assert_eq!(ScenarioSpec::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn zero_sigma_names_class_and_variable() {
        let text = DEFAULT_SCENARIO.replacen("ifOutDiscards = { mu = 1.0986, sigma = 0.5 }", "ifOutDiscards = { mu = 1.0986, sigma = 0.0 }", 1);
        assert_ne!(text, DEFAULT_SCENARIO);
        let msg = ScenarioSpec::from_toml(&text).unwrap_err().to_string();
        assert!(msg.contains("TCP-SYN") && msg.contains("ifOutDiscards"), "{msg}");
    }

    #[test]
    fn rejects_missing_rates_and_single_class() {
        let base = "seed = 1\nvariables = [\"a\", \"b\"]\n";
        let one = format!("{base}[[class]]\nname = \"X\"\ncount = 3\n[class.rates]\na = {{ mu = 0.0, sigma = 1.0 }}\nb = {{ mu = 0.0, sigma = 1.0 }}\n");
        assert!(ScenarioSpec::from_toml(&one).is_err());
        let missing = format!("{base}[[class]]\nname = \"X\"\ncount = 3\n[class.rates]\na = {{ mu = 0.0, sigma = 1.0 }}\n");
        assert!(ScenarioSpec::from_toml(&missing).unwrap_err().to_string().contains("\"b\""));
    }

    #[test]
    fn sample_means_match_log_normal_means() {
        let mut s = default_scenario();
        for c in &mut s.classes {
            c.count = 10_000;
        }
        s.seed = 7;
        let d = generate(&s).unwrap();
        for (label, class) in s.classes.iter().enumerate() {
            let n = class.count as f64;
            for (j, rate) in class.rates.iter().enumerate() {
                let mean = d
                    .records()
                    .iter()
                    .filter(|r| r.label == label)
                    .map(|r| r.values[j])
                    .sum::<f64>()
                    / n;
                let se = rate.std_dev() / n.sqrt();
                let z = (mean - rate.mean()).abs() / se;
                assert!(z < 5.0, "{} {}: z = {z}", class.name, s.variables[j]);
            }
        }
    }
}
