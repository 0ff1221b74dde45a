use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HoppingTable, LatticeSpec};
use crate::error::{Error, Result};
use crate::linalg::C64;

/// One `h_{δσσ'}` entry of a lattice file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoppingRecord {
    pub delta: Vec<i64>,
    pub sigma: usize,
    pub sigma_prime: usize,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// TOML lattice description:
///
/// ```toml
/// name = "chain"
/// d = 1
/// r = 2
/// strict = false
///
/// [[hopping]]
/// delta = [0]
/// sigma = 0
/// sigma_prime = 1
/// re = 1.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeFile {
    #[serde(default = "default_name")]
    pub name: String,
    pub d: usize,
    pub r: usize,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub hopping: Vec<HoppingRecord>,
}

fn default_name() -> String {
    "custom".into()
}

impl LatticeFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn into_spec(self) -> Result<LatticeSpec> {
        let mut t = HoppingTable::new();
        for h in &self.hopping {
            t.add(&h.delta, h.sigma, h.sigma_prime, C64::new(h.re, h.im));
        }
        LatticeSpec::new(self.name, self.d, self.r, t, self.strict)
    }

    pub fn from_spec(spec: &LatticeSpec) -> Self {
        LatticeFile {
            name: spec.name.clone(),
            d: spec.d,
            r: spec.r,
            strict: true,
            hopping: spec
                .hoppings()
                .iter()
                .map(|(k, v)| HoppingRecord {
                    delta: k.delta.clone(),
                    sigma: k.from,
                    sigma_prime: k.to,
                    re: v.re,
                    im: v.im,
                })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("lattice file serialises")
    }
}
