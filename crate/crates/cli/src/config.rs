//! Experiment configuration files.
//!
//! ```toml
//! [model]
//! name = "tasep"
//! params = { p = 0.5 }
//!
//! [lattice]
//! dim = 1
//! side = 256
//! boundary = "torus"      # or "open"
//! alphabet = 2
//!
//! [coupling]              # couple only
//! kind = "l_pairing"      # independent | synchronous | equal_pairing | l_pairing
//! distance = 8
//! shift_bound = 8
//!
//! [initial.x]             # exactly one of bernoulli, file, pattern
//! bernoulli = 0.5
//! [initial.y]
//! pattern = "alternating" # zeros | ones | alternating | origin | step
//!
//! [plan]
//! replicas = 32
//! horizon = 1000
//! seed = 1
//!
//! [record]
//! discrepancy_radius = 100
//! density_radii = [8, 16]
//! cylinders = ["0:1", "0:1,1:0"]
//! averaging = 1000        # cesaro only
//! z = 3.0
//!
//! [output]
//! csv = "out/run.csv"
//! json = "out/run.json"
//! trace = "out/pairing.jsonl"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use coupling_lab::coupling::CouplingKind;
use coupling_lab::estimators::{Initial, ReplicaPlan, DEFAULT_Z};
use coupling_lab::lattice::{Alphabet, Boundary, Configuration, Cylinder, Lattice};
use coupling_lab::systems::{dynamics_by_name, Dynamics};
use serde::{Deserialize, Serialize};

/// A config problem, prefixed by the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.key, self.message)
        }
    }
}

fn bad(key: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError {
        key: key.into(),
        message: message.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub lattice: LatticeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
    pub initial: InitialConfigs,
    pub plan: PlanConfig,
    #[serde(default)]
    pub record: RecordConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

fn one() -> usize {
    1
}

fn two() -> u16 {
    2
}

fn torus() -> Boundary {
    Boundary::Torus
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(default = "one")]
    pub dim: usize,
    pub side: usize,
    #[serde(default = "torus")]
    pub boundary: Boundary,
    #[serde(default = "two")]
    pub alphabet: u16,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub kind: String,
    #[serde(default)]
    pub distance: usize,
    #[serde(default)]
    pub shift_bound: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfigs {
    pub x: InitialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<InitialSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bernoulli: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    #[serde(default = "one")]
    pub replicas: usize,
    pub horizon: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrepancy_radius: Option<usize>,
    #[serde(default)]
    pub density_radii: Vec<usize>,
    #[serde(default)]
    pub cylinders: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaging: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
}

pub const PATTERNS: &[&str] = &["zeros", "ones", "alternating", "origin", "step"];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| bad("", e.message().trim()))
    }

    /// Reads a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut cfg.initial.x.file);
        if let Some(y) = cfg.initial.y.as_mut() {
            fix(&mut y.file);
        }
        fix(&mut cfg.output.csv);
        fix(&mut cfg.output.json);
        fix(&mut cfg.output.trace);
        Ok(cfg)
    }
}

/// A config checked against the models and turned into library objects.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub dynamics: Dynamics,
    pub lattice: Arc<Lattice>,
    pub alphabet: Alphabet,
    pub x: Initial,
    pub y: Option<Initial>,
    pub plan: ReplicaPlan,
    pub cylinders: Vec<Cylinder>,
    pub z: f64,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, ConfigError> {
        let dynamics = dynamics_by_name(&config.model.name, &config.model.params).map_err(|e| {
            let key = if MODEL_PARAM_HINT.iter().any(|h| e.to_string().contains(h)) {
                "model.params"
            } else {
                "model.name"
            };
            bad(key, e)
        })?;
        let lc = &config.lattice;
        let alphabet = Alphabet::new(lc.alphabet).map_err(|e| bad("lattice.alphabet", e))?;
        let lattice =
            Arc::new(Lattice::new(lc.dim, lc.side, lc.boundary).map_err(|e| bad("lattice", e))?);
        if let Some(b) = dynamics.natural_boundary() {
            if b != lc.boundary {
                return Err(bad(
                    "lattice.boundary",
                    format!(
                        "model {:?} runs on a {b} lattice, not {}",
                        config.model.name, lc.boundary
                    ),
                ));
            }
        }
        dynamics
            .check_compatible(&lattice, alphabet)
            .map_err(|e| bad("lattice", e))?;
        let x = initial(&config.initial.x, "initial.x", &lattice, alphabet)?;
        let y = config
            .initial
            .y
            .as_ref()
            .map(|s| initial(s, "initial.y", &lattice, alphabet))
            .transpose()?;
        let p = &config.plan;
        let plan =
            ReplicaPlan::new(p.replicas, p.horizon, p.seed).map_err(|e| bad("plan.replicas", e))?;
        let r = &config.record;
        if let Some(m) = r.discrepancy_radius {
            lattice
                .ball(m)
                .map_err(|e| bad("record.discrepancy_radius", e))?;
        }
        for &n in &r.density_radii {
            lattice
                .ball(n)
                .map_err(|e| bad("record.density_radii", e))?;
        }
        let cylinders = r
            .cylinders
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let key = format!("record.cylinders[{k}]");
                let c = parse_cylinder(s, lattice.dim()).map_err(|m| bad(&key, m))?;
                c.resolve(&lattice).map_err(|e| bad(&key, e))?;
                if c.base().iter().any(|(_, v)| *v > alphabet.max_value()) {
                    return Err(bad(&key, "value outside the alphabet"));
                }
                Ok(c)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let z = r.z.unwrap_or(DEFAULT_Z);
        if !(z > 0.0 && z.is_finite()) {
            return Err(bad("record.z", "must be a positive number"));
        }
        if r.averaging == Some(0) {
            return Err(bad("record.averaging", "must be positive"));
        }
        Ok(Experiment {
            config,
            dynamics,
            lattice,
            alphabet,
            x,
            y,
            plan,
            cylinders,
            z,
        })
    }

    pub fn coupling(&self) -> Result<(CouplingKind, usize, usize), ConfigError> {
        let c = self
            .config
            .coupling
            .as_ref()
            .ok_or_else(|| bad("coupling", "missing section"))?;
        let kind: CouplingKind = c.kind.parse().map_err(|e| bad("coupling.kind", e))?;
        if kind == CouplingKind::LPairing && c.distance == 0 {
            return Err(bad(
                "coupling.distance",
                "l_pairing needs a positive distance",
            ));
        }
        if kind == CouplingKind::LPairing && c.distance > self.lattice.max_radius() {
            return Err(bad(
                "coupling.distance",
                format!("exceeds the lattice radius {}", self.lattice.max_radius()),
            ));
        }
        if c.shift_bound > 0 && self.lattice.boundary() != Boundary::Torus {
            return Err(bad("coupling.shift_bound", "shifts need a torus"));
        }
        if c.shift_bound > 0 && 2 * c.shift_bound >= self.lattice.side() {
            return Err(bad(
                "coupling.shift_bound",
                "must be below half the lattice side",
            ));
        }
        Ok((kind, c.distance, c.shift_bound))
    }
}

const MODEL_PARAM_HINT: &[&str] = &["has no parameter", "outside [0, 1]"];

fn initial(
    spec: &InitialSpec,
    key: &str,
    lattice: &Arc<Lattice>,
    alphabet: Alphabet,
) -> Result<Initial, ConfigError> {
    let given = [
        spec.bernoulli.is_some(),
        spec.file.is_some(),
        spec.pattern.is_some(),
    ];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(bad(key, "give exactly one of bernoulli, file, pattern"));
    }
    if let Some(r) = spec.bernoulli {
        if !(0.0..=alphabet.max_value() as f64).contains(&r) {
            return Err(bad(
                format!("{key}.bernoulli"),
                format!("density {r} is out of range"),
            ));
        }
        return Ok(Initial::Bernoulli {
            lattice: lattice.clone(),
            alphabet,
            density: r,
        });
    }
    if let Some(path) = &spec.file {
        let text = std::fs::read_to_string(path).map_err(|e| {
            bad(
                format!("{key}.file"),
                format!("cannot read {}: {e}", path.display()),
            )
        })?;
        let digits: String = text.split_whitespace().collect();
        let x = Configuration::from_line(lattice.clone(), alphabet, &digits)
            .map_err(|e| bad(format!("{key}.file"), e))?;
        return Ok(Initial::Fixed(x));
    }
    let name = spec.pattern.as_deref().unwrap_or_default();
    let x = match name {
        "zeros" => Configuration::zeros(lattice.clone(), alphabet),
        "ones" => Configuration::filled(lattice.clone(), alphabet, 1)
            .map_err(|e| bad(format!("{key}.pattern"), e))?,
        "alternating" => Configuration::from_fn(lattice.clone(), alphabet, |c| {
            (c.iter().sum::<i64>().rem_euclid(2) == 0) as u8
        })
        .map_err(|e| bad(format!("{key}.pattern"), e))?,
        "origin" => Configuration::from_fn(lattice.clone(), alphabet, |c| {
            c.iter().all(|&v| v == 0) as u8
        })
        .map_err(|e| bad(format!("{key}.pattern"), e))?,
        "step" => Configuration::from_fn(lattice.clone(), alphabet, |c| (c[0] < 0) as u8)
            .map_err(|e| bad(format!("{key}.pattern"), e))?,
        other => {
            return Err(bad(
                format!("{key}.pattern"),
                format!("unknown pattern {other:?}; known: {}", PATTERNS.join(", ")),
            ))
        }
    };
    Ok(Initial::Fixed(x))
}

/// Parses `"0:1,1:0"` (one-dimensional) or `"0 1:1"` (coordinates separated
/// by spaces) into a cylinder.
pub fn parse_cylinder(s: &str, dim: usize) -> Result<Cylinder, String> {
    let base = s
        .split(',')
        .map(|part| {
            let (coords, value) = part
                .split_once(':')
                .ok_or_else(|| format!("{part:?} is not site:value"))?;
            let coords = coords
                .split_whitespace()
                .map(|c| {
                    c.parse::<i64>()
                        .map_err(|_| format!("bad coordinate {c:?}"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if coords.len() != dim {
                return Err(format!("site {coords:?} needs {dim} coordinates"));
            }
            let value = value
                .trim()
                .parse::<u8>()
                .map_err(|_| format!("bad value {value:?}"))?;
            Ok((coords, value))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Cylinder::new(base).map_err(|e| e.to_string())
}
