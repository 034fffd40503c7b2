//! Flat dotted-key configuration.
//!
//! Files use TOML syntax but are read as a flat list of dotted keys
//! (`task.features = 784`, or equivalently a `[task]` table). Every key must
//! be known; errors name the full key path.
//!
//! | key | type | default |
//! |-----|------|---------|
//! | `scenario.num_learners` | int | 20 |
//! | `scenario.radius_m` | float | 50 |
//! | `scenario.node_bandwidth_hz` | float | 5e6 |
//! | `scenario.system_bandwidth_hz` | float | 100e6 |
//! | `scenario.tx_power_dbm` | float | 23 |
//! | `scenario.noise_psd_dbm_hz` | float | -174 |
//! | `scenario.clock_pool_hz` | float list | [2.4e9, 7e8] |
//! | `scenario.clock_mix` | `"blocks"` / `"cycle"` | blocks |
//! | `scenario.cycle_budget_s` | float | 7.5 |
//! | `scenario.batch_lower` | int | 1 |
//! | `scenario.batch_upper` | int | dataset size |
//! | `scenario.mode` | `"PL"` / `"FL"` | PL |
//! | `scenario.seed` | int | 0 |
//! | `task.features` ... `task.dataset_size` | | MNIST profile |
//! | `problem.c2`, `problem.c1`, `problem.c0` | float lists | (explicit instance) |
//! | `problem.cycle_budget_s`, `problem.dataset_size` | | |
//! | `problem.batch_lower`, `problem.batch_upper` | int | 1, dataset size |
//! | `sweep.num_learners` | int list | [5, 10, 15, 20] |
//! | `sweep.cycle_budgets_s` | float list | [7.5, 15] |
//! | `sweep.num_seeds` | int | 1 |
//! | `sweep.schemes` | string list | HA-async, HU-async, HA-sync |
//! | `oracle.tau_cap` | int | 20 |
//! | `simulate.cycles` | int | 30 |
//! | `simulate.schemes` | string list | HA-async, HU-async, HA-sync |
//! | `simulate.dimension` | int | 8 |
//! | `simulate.heterogeneity` | float | 1.0 |
//! | `simulate.conditioning_noise` | float | 0.3 |
//! | `simulate.step_scale` | float | 0.1 |

use std::path::Path;

use toml::Value;

use super::{ClockMix, ScenarioSpec, Scheme};
use crate::allocator::AllocationProblem;
use crate::divergence::SyntheticConfig;
use crate::edge_model::{LearningMode, TimeCoefficients};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub learner_counts: Vec<usize>,
    pub cycle_budgets_s: Vec<f64>,
    pub num_seeds: u64,
    pub schemes: Vec<Scheme>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSettings {
    pub cycles: usize,
    pub schemes: Vec<Scheme>,
    pub synthetic: SyntheticConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: ScenarioSpec,
    /// Explicit instance; when set, `solve`, `oracle` use it instead of a
    /// generated scenario.
    pub problem: Option<AllocationProblem>,
    pub sweep: SweepSettings,
    pub oracle_tau_cap: u64,
    pub simulate: SimulateSettings,
}

impl Default for Config {
    fn default() -> Self {
        let schemes = vec![Scheme::HaAsync, Scheme::HuAsync, Scheme::HaSync];
        Config {
            scenario: ScenarioSpec::default(),
            problem: None,
            sweep: SweepSettings {
                learner_counts: vec![5, 10, 15, 20],
                cycle_budgets_s: vec![7.5, 15.0],
                num_seeds: 1,
                schemes: schemes.clone(),
            },
            oracle_tau_cap: 20,
            simulate: SimulateSettings {
                cycles: 30,
                schemes,
                synthetic: SyntheticConfig::default(),
            },
        }
    }
}

#[derive(Default)]
struct ProblemKeys {
    c2: Option<Vec<f64>>,
    c1: Option<Vec<f64>>,
    c0: Option<Vec<f64>>,
    cycle_budget_s: Option<f64>,
    dataset_size: Option<u64>,
    batch_lower: Option<u64>,
    batch_upper: Option<u64>,
}

impl ProblemKeys {
    fn any(&self) -> bool {
        self.c2.is_some()
            || self.c1.is_some()
            || self.c0.is_some()
            || self.cycle_budget_s.is_some()
            || self.dataset_size.is_some()
            || self.batch_lower.is_some()
            || self.batch_upper.is_some()
    }

    fn build(self) -> Result<AllocationProblem> {
        let c2 = self.c2.ok_or_else(|| Error::config("problem.c2", "required for an explicit instance"))?;
        let k = c2.len();
        let c1 = self.c1.unwrap_or_else(|| vec![0.0; k]);
        let c0 = self.c0.unwrap_or_else(|| vec![0.0; k]);
        for (key, v) in [("problem.c1", &c1), ("problem.c0", &c0)] {
            if v.len() != k {
                return Err(Error::config(key, format!("has {} entries, problem.c2 has {k}", v.len())));
            }
        }
        let budget = self
            .cycle_budget_s
            .ok_or_else(|| Error::config("problem.cycle_budget_s", "required for an explicit instance"))?;
        let d = self
            .dataset_size
            .ok_or_else(|| Error::config("problem.dataset_size", "required for an explicit instance"))?;
        let coefficients = (0..k)
            .map(|i| {
                TimeCoefficients::new(c2[i], c1[i], c0[i])
                    .map_err(|e| Error::config(format!("problem.c2[{i}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        AllocationProblem::new(
            coefficients,
            budget,
            d,
            self.batch_lower.unwrap_or(1),
            self.batch_upper.unwrap_or(d),
        )
        .map_err(|e| Error::config("problem", e.to_string()))
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.to_string().trim_end().to_string()))?;
        let mut flat = Vec::new();
        flatten("", &Value::Table(table), &mut flat);

        let mut cfg = Config::default();
        let mut problem = ProblemKeys::default();
        for (key, value) in &flat {
            cfg.apply(key, value, &mut problem)?;
        }
        if problem.any() {
            cfg.problem = Some(problem.build()?);
        }
        cfg.scenario.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, v: &Value, problem: &mut ProblemKeys) -> Result<()> {
        let s = &mut self.scenario;
        let t = &mut s.task;
        let syn = &mut self.simulate.synthetic;
        match key {
            "scenario.num_learners" => s.num_learners = as_usize(key, v)?,
            "scenario.radius_m" => s.radius_m = as_f64(key, v)?,
            "scenario.node_bandwidth_hz" => s.node_bandwidth_hz = as_f64(key, v)?,
            "scenario.system_bandwidth_hz" => s.system_bandwidth_hz = as_f64(key, v)?,
            "scenario.tx_power_dbm" => s.tx_power_dbm = as_f64(key, v)?,
            "scenario.noise_psd_dbm_hz" => s.noise_psd_dbm_hz = as_f64(key, v)?,
            "scenario.clock_pool_hz" => s.clock_pool_hz = as_list(key, v, as_f64)?,
            "scenario.clock_mix" => {
                s.clock_mix = match as_str(key, v)?.to_ascii_lowercase().as_str() {
                    "blocks" => ClockMix::Blocks,
                    "cycle" => ClockMix::Cycle,
                    other => return Err(Error::config(key, format!("expected \"blocks\" or \"cycle\", got \"{other}\""))),
                }
            }
            "scenario.cycle_budget_s" => s.cycle_budget_s = as_f64(key, v)?,
            "scenario.batch_lower" => s.batch_lower = as_u64(key, v)?,
            "scenario.batch_upper" => s.batch_upper = Some(as_u64(key, v)?),
            "scenario.mode" => {
                s.mode = match as_str(key, v)?.to_ascii_uppercase().as_str() {
                    "PL" => LearningMode::ParallelizedLearning,
                    "FL" => LearningMode::FederatedLearning,
                    other => return Err(Error::config(key, format!("expected \"PL\" or \"FL\", got \"{other}\""))),
                }
            }
            "scenario.seed" => s.seed = as_u64(key, v)?,
            "task.features" => t.features = as_u64(key, v)?,
            "task.data_precision_bits" => t.data_precision_bits = as_f64(key, v)?,
            "task.model_precision_bits" => t.model_precision_bits = as_f64(key, v)?,
            "task.model_size_slope" => t.model_size_slope = as_f64(key, v)?,
            "task.model_size_intercept" => t.model_size_intercept = as_f64(key, v)?,
            "task.complexity_cycles_per_sample" => t.complexity_cycles_per_sample = as_f64(key, v)?,
            "task.dataset_size" => t.dataset_size = as_u64(key, v)?,
            "problem.c2" => problem.c2 = Some(as_list(key, v, as_f64)?),
            "problem.c1" => problem.c1 = Some(as_list(key, v, as_f64)?),
            "problem.c0" => problem.c0 = Some(as_list(key, v, as_f64)?),
            "problem.cycle_budget_s" => problem.cycle_budget_s = Some(as_f64(key, v)?),
            "problem.dataset_size" => problem.dataset_size = Some(as_u64(key, v)?),
            "problem.batch_lower" => problem.batch_lower = Some(as_u64(key, v)?),
            "problem.batch_upper" => problem.batch_upper = Some(as_u64(key, v)?),
            "sweep.num_learners" => self.sweep.learner_counts = nonempty(key, as_list(key, v, as_usize)?)?,
            "sweep.cycle_budgets_s" => self.sweep.cycle_budgets_s = nonempty(key, as_list(key, v, as_f64)?)?,
            "sweep.num_seeds" => self.sweep.num_seeds = as_u64(key, v)?.max(1),
            "sweep.schemes" => self.sweep.schemes = nonempty(key, as_list(key, v, as_scheme)?)?,
            "oracle.tau_cap" => self.oracle_tau_cap = as_u64(key, v)?,
            "simulate.cycles" => self.simulate.cycles = as_usize(key, v)?,
            "simulate.schemes" => self.simulate.schemes = nonempty(key, as_list(key, v, as_scheme)?)?,
            "simulate.dimension" => syn.dimension = as_usize(key, v)?,
            "simulate.heterogeneity" => syn.heterogeneity = as_f64(key, v)?,
            "simulate.conditioning_noise" => syn.conditioning_noise = as_f64(key, v)?,
            "simulate.step_scale" => syn.step_scale = as_f64(key, v)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::config(key, format!("expected a number, got {}", v.type_str()))),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(Error::config(key, format!("expected a nonnegative integer, got {v}"))),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    as_u64(key, v).map(|x| x as usize)
}

fn as_str<'a>(key: &str, v: &'a Value) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::config(key, format!("expected a string, got {}", v.type_str())))
}

fn as_scheme(key: &str, v: &Value) -> Result<Scheme> {
    as_str(key, v)?.parse().map_err(|e: String| Error::config(key, e))
}

fn as_list<T>(key: &str, v: &Value, item: fn(&str, &Value) -> Result<T>) -> Result<Vec<T>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::config(key, format!("expected a list, got {}", v.type_str())))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| item(&format!("{key}[{i}]"), x))
        .collect()
}

fn nonempty<T>(key: &str, v: Vec<T>) -> Result<Vec<T>> {
    if v.is_empty() {
        Err(Error::config(key, "must not be empty"))
    } else {
        Ok(v)
    }
}
