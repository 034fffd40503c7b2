//! Scenarios, experiment sweeps and the command-line surface.

pub mod cli;
pub mod config;
pub mod output;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::allocator::{
    brute_force_oracle, hu_equal_allocation, integerize_sai, relaxed_solve, synchronous_baseline,
    AllocationProblem, IntegerAllocation, MAX_ORACLE_LEARNERS,
};
use crate::divergence::{divergence_trace, synthetic_learners, SyntheticConfig};
use crate::edge_model::{
    achievable_rate, dbm_to_watts, path_loss_gain, time_coefficients, ChannelParams, ComputeParams,
    LearnerProfile, LearningMode, TaskProfile, TimeCoefficients,
};
use crate::exec::Execution;
use crate::{Error, Result};

/// How the clock pool is spread over learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClockMix {
    /// Contiguous equal blocks: learner `k` gets `pool[k * P / K]`, so with
    /// two clocks the first `ceil(K / 2)` learners are fast.
    Blocks,
    /// Round robin: learner `k` gets `pool[k mod P]`.
    Cycle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub num_learners: usize,
    pub radius_m: f64,
    pub node_bandwidth_hz: f64,
    /// Informational; each learner gets its own `node_bandwidth_hz` channel.
    pub system_bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub clock_pool_hz: Vec<f64>,
    pub clock_mix: ClockMix,
    pub task: TaskProfile,
    pub cycle_budget_s: f64,
    pub batch_lower: u64,
    /// `None` means the whole dataset.
    pub batch_upper: Option<u64>,
    pub mode: LearningMode,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    /// The indoor 50 m MNIST setup.
    fn default() -> Self {
        ScenarioSpec {
            num_learners: 20,
            radius_m: 50.0,
            node_bandwidth_hz: 5e6,
            system_bandwidth_hz: 100e6,
            tx_power_dbm: 23.0,
            noise_psd_dbm_hz: -174.0,
            clock_pool_hz: vec![2.4e9, 700e6],
            clock_mix: ClockMix::Blocks,
            task: TaskProfile::mnist(),
            cycle_budget_s: 7.5,
            batch_lower: 1,
            batch_upper: None,
            mode: LearningMode::ParallelizedLearning,
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("scenario.radius_m", self.radius_m),
            ("scenario.node_bandwidth_hz", self.node_bandwidth_hz),
            ("scenario.system_bandwidth_hz", self.system_bandwidth_hz),
            ("scenario.cycle_budget_s", self.cycle_budget_s),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be finite and positive, got {v}")));
            }
        }
        for (key, v) in [
            ("scenario.tx_power_dbm", self.tx_power_dbm),
            ("scenario.noise_psd_dbm_hz", self.noise_psd_dbm_hz),
        ] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        if self.num_learners == 0 {
            return Err(Error::config("scenario.num_learners", "must be at least 1"));
        }
        if self.clock_pool_hz.is_empty() || self.clock_pool_hz.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::config(
                "scenario.clock_pool_hz",
                "must be a nonempty list of positive clock rates",
            ));
        }
        if self.batch_lower == 0 {
            return Err(Error::config("scenario.batch_lower", "must be at least 1"));
        }
        self.task
            .validate()
            .map_err(|e| Error::config("task", e.to_string()))?;
        Ok(())
    }

    pub fn clock_for(&self, k: usize) -> f64 {
        let p = self.clock_pool_hz.len();
        match self.clock_mix {
            ClockMix::Blocks => self.clock_pool_hz[k * p / self.num_learners],
            ClockMix::Cycle => self.clock_pool_hz[k % p],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub learners: Vec<LearnerProfile>,
    pub distances_m: Vec<f64>,
    pub rates_bps: Vec<f64>,
    pub task: TaskProfile,
    pub problem: AllocationProblem,
}

/// Builds learners and the allocation problem, deterministically from the seed.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tx = dbm_to_watts(spec.tx_power_dbm);
    let noise = dbm_to_watts(spec.noise_psd_dbm_hz);
    let mut learners = Vec::with_capacity(spec.num_learners);
    let mut distances = Vec::with_capacity(spec.num_learners);
    let mut rates = Vec::with_capacity(spec.num_learners);
    let mut coefficients: Vec<TimeCoefficients> = Vec::with_capacity(spec.num_learners);
    for k in 0..spec.num_learners {
        // (0, radius]
        let distance = spec.radius_m * (1.0 - rng.random::<f64>());
        let channel = ChannelParams::new(spec.node_bandwidth_hz, tx, path_loss_gain(distance)?, noise)?;
        let learner = LearnerProfile {
            id: k + 1,
            channel,
            compute: ComputeParams::new(spec.clock_for(k))?,
            mode: spec.mode,
        };
        rates.push(achievable_rate(&channel)?);
        coefficients.push(time_coefficients(&learner, &spec.task)?);
        distances.push(distance);
        learners.push(learner);
    }
    let d = spec.task.dataset_size;
    let problem = AllocationProblem::new(
        coefficients,
        spec.cycle_budget_s,
        d,
        spec.batch_lower,
        spec.batch_upper.unwrap_or(d),
    )?;
    Ok(Scenario {
        learners,
        distances_m: distances,
        rates_bps: rates,
        task: spec.task,
        problem,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    HaAsync,
    HaAsyncOracle,
    HuAsync,
    HaSync,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::HaAsync, Scheme::HaAsyncOracle, Scheme::HuAsync, Scheme::HaSync];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::HaAsync => "HA-async",
            Scheme::HaAsyncOracle => "HA-async-oracle",
            Scheme::HuAsync => "HU-async",
            Scheme::HaSync => "HA-sync",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                format!(
                    "unknown scheme `{s}`, expected one of {}",
                    Scheme::ALL.map(Scheme::name).join(", ")
                )
            })
    }
}

/// Runs one scheme and re-checks the result against the problem.
pub fn run_scheme(scheme: Scheme, problem: &AllocationProblem, oracle_tau_cap: u64) -> Result<IntegerAllocation> {
    let alloc = match scheme {
        Scheme::HaAsync => integerize_sai(&relaxed_solve(problem)?, problem)?,
        Scheme::HaAsyncOracle => brute_force_oracle(problem, oracle_tau_cap, Execution::Sequential)?,
        Scheme::HuAsync => hu_equal_allocation(problem),
        Scheme::HaSync => synchronous_baseline(problem)?,
    };
    alloc
        .check_feasible(problem)
        .map_err(|v| Error::InfeasibleProblem(format!("{scheme} produced an invalid allocation: {v}")))?;
    Ok(alloc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub base: ScenarioSpec,
    pub learner_counts: Vec<usize>,
    pub cycle_budgets_s: Vec<f64>,
    pub seeds: Vec<u64>,
    pub schemes: Vec<Scheme>,
    pub oracle_tau_cap: u64,
}

impl SweepGrid {
    /// `K in {5, 10, 15, 20}`, `T in {7.5, 15}`, HA-async / HU-async / HA-sync.
    pub fn staleness_grid(base: ScenarioSpec, seeds: Vec<u64>) -> Self {
        SweepGrid {
            base,
            learner_counts: vec![5, 10, 15, 20],
            cycle_budgets_s: vec![7.5, 15.0],
            seeds,
            schemes: vec![Scheme::HaAsync, Scheme::HuAsync, Scheme::HaSync],
            oracle_tau_cap: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub num_learners: usize,
    pub cycle_budget_s: f64,
    pub seed: u64,
    pub max_staleness: Option<f64>,
    pub avg_staleness: Option<f64>,
    pub taus: Vec<u64>,
    pub batches: Vec<u64>,
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Rows of one scheme, in grid order.
    pub fn for_scheme(&self, scheme: Scheme) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }
}

/// Evaluates every `(K, T, seed)` cell under every scheme. Cell failures
/// become row statuses; row order follows the grid regardless of `exec`.
pub fn run_sweep(grid: &SweepGrid, exec: Execution) -> SweepResult {
    let mut cells = Vec::new();
    for &k in &grid.learner_counts {
        for &t in &grid.cycle_budgets_s {
            for &seed in &grid.seeds {
                cells.push((k, t, seed));
            }
        }
    }
    let rows = exec.map(&cells, |&(k, t, seed)| {
        let spec = ScenarioSpec {
            num_learners: k,
            cycle_budget_s: t,
            seed,
            ..grid.base.clone()
        };
        let scenario = generate_scenario(&spec);
        grid.schemes
            .iter()
            .map(|&scheme| {
                let outcome = scenario.as_ref().map_err(Clone::clone).and_then(|s| {
                    if scheme == Scheme::HaAsyncOracle && k > MAX_ORACLE_LEARNERS {
                        Err(Error::EnumerationGuard(format!(
                            "skipped, oracle limited to {MAX_ORACLE_LEARNERS} learners"
                        )))
                    } else {
                        run_scheme(scheme, &s.problem, grid.oracle_tau_cap)
                    }
                });
                sweep_row(scheme, k, t, seed, outcome)
            })
            .collect::<Vec<_>>()
    });
    SweepResult {
        rows: rows.into_iter().flatten().collect(),
    }
}

fn sweep_row(scheme: Scheme, k: usize, t: f64, seed: u64, outcome: Result<IntegerAllocation>) -> SweepRow {
    let base = SweepRow {
        scheme,
        num_learners: k,
        cycle_budget_s: t,
        seed,
        max_staleness: None,
        avg_staleness: None,
        taus: Vec::new(),
        batches: Vec::new(),
        status: String::new(),
    };
    match outcome {
        Ok(a) => SweepRow {
            max_staleness: Some(a.report.max_staleness),
            avg_staleness: Some(a.report.avg_staleness),
            taus: a.taus,
            batches: a.batches,
            status: "ok".into(),
            ..base
        },
        Err(e) => {
            let kind = match &e {
                e if e.is_infeasible() => "infeasible",
                Error::EnumerationGuard(_) => "skipped",
                _ => "error",
            };
            SweepRow {
                status: format!("{kind}: {e}"),
                ..base
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceRow {
    pub scheme: Scheme,
    pub seed: u64,
    pub cycle: usize,
    pub divergence: f64,
    pub global_loss: f64,
    pub max_staleness: f64,
}

/// Replays each scheme's allocation on the same synthetic learners (same
/// seed, so matched data) and returns the traces in scheme order.
pub fn run_divergence_experiment(
    spec: &ScenarioSpec,
    schemes: &[Scheme],
    cycles: usize,
    synthetic: &SyntheticConfig,
    oracle_tau_cap: u64,
) -> Result<Vec<DivergenceRow>> {
    let scenario = generate_scenario(spec)?;
    let mut rows = Vec::new();
    for &scheme in schemes {
        let alloc = run_scheme(scheme, &scenario.problem, oracle_tau_cap)?;
        let learners = synthetic_learners(&alloc.batches, synthetic)?;
        let trace = divergence_trace(&alloc, &learners, cycles)?;
        rows.extend(trace.rows.iter().map(|r| DivergenceRow {
            scheme,
            seed: spec.seed,
            cycle: r.cycle,
            divergence: r.divergence,
            global_loss: r.global_loss,
            max_staleness: r.max_staleness,
        }));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_values() {
        let spec = ScenarioSpec::default();
        assert_eq!(spec.radius_m, 50.0);
        assert_eq!(spec.node_bandwidth_hz, 5e6);
        assert_eq!(spec.system_bandwidth_hz, 100e6);
        assert_eq!(spec.tx_power_dbm, 23.0);
        assert_eq!(spec.noise_psd_dbm_hz, -174.0);
        assert_eq!(spec.clock_pool_hz, vec![2.4e9, 7e8]);
        assert_eq!(spec.task.dataset_size, 60_000);
        assert_eq!(spec.task.features, 784);
    }

    #[test]
    fn twenty_learners_half_fast() {
        let s = generate_scenario(&ScenarioSpec::default()).unwrap();
        assert_eq!(s.learners.len(), 20);
        let fast = s.learners.iter().filter(|l| l.compute.clock_hz == 2.4e9).count();
        let slow = s.learners.iter().filter(|l| l.compute.clock_hz == 7e8).count();
        assert_eq!((fast, slow), (10, 10));
        assert!(s.distances_m.iter().all(|&d| d > 0.0 && d <= 50.0));
        let odd = ScenarioSpec { num_learners: 5, ..Default::default() };
        let fast = (0..5).filter(|&k| odd.clock_for(k) == 2.4e9).count();
        assert_eq!(fast, 3);
    }

    #[test]
    fn scenario_is_deterministic() {
        let spec = ScenarioSpec { seed: 42, ..Default::default() };
        let a = generate_scenario(&spec).unwrap();
        let b = generate_scenario(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario(&ScenarioSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a.distances_m, c.distances_m);
    }

    #[test]
    fn invalid_spec_names_field() {
        let spec = ScenarioSpec { radius_m: -1.0, ..Default::default() };
        match generate_scenario(&spec) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "scenario.radius_m"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("HA".parse::<Scheme>().is_err());
    }

    #[test]
    fn sweep_cardinality_and_order() {
        let grid = SweepGrid::staleness_grid(ScenarioSpec::default(), vec![1, 2]);
        let res = run_sweep(&grid, Execution::Parallel);
        assert_eq!(res.rows.len(), 4 * 2 * 2 * 3);
        assert_eq!(res, run_sweep(&grid, Execution::Sequential));
        for r in res.for_scheme(Scheme::HaSync).filter(|r| r.is_ok()) {
            assert_eq!(r.max_staleness, Some(0.0));
        }
    }

    #[test]
    fn oracle_rows_skipped_for_large_k() {
        let grid = SweepGrid {
            learner_counts: vec![10],
            cycle_budgets_s: vec![15.0],
            seeds: vec![0],
            schemes: vec![Scheme::HaAsyncOracle],
            ..SweepGrid::staleness_grid(ScenarioSpec::default(), vec![0])
        };
        let res = run_sweep(&grid, Execution::Sequential);
        assert!(res.rows[0].status.starts_with("skipped"));
    }

    #[test]
    fn divergence_experiment_shapes() {
        let spec = ScenarioSpec { num_learners: 10, cycle_budget_s: 15.0, ..Default::default() };
        let rows = run_divergence_experiment(
            &spec,
            &[Scheme::HaAsync, Scheme::HuAsync],
            12,
            &SyntheticConfig::default(),
            20,
        )
        .unwrap();
        assert_eq!(rows.len(), 24);
        let identical = SyntheticConfig { heterogeneity: 0.0, ..Default::default() };
        let rows = run_divergence_experiment(&spec, &[Scheme::HaSync], 12, &identical, 20).unwrap();
        assert!(rows.iter().all(|r| r.divergence <= 1e-12));
    }
}
