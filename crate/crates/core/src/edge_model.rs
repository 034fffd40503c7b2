//! Wireless and compute model of a single learner.
//!
//! Every learner's round time collapses to the compact law
//! `t = c2 * tau * d + c1 * d + c0`, where `tau` is the number of local
//! updates and `d` the batch size. The coefficients come from the
//! learner's Shannon rate (uplink and downlink share it within a cycle) and
//! its clock rate, with one clock cycle per floating point operation.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

/// Link parameters between a learner and the orchestrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub bandwidth_hz: f64,
    pub tx_power_watts: f64,
    /// Linear channel gain (not dB).
    pub channel_gain: f64,
    pub noise_psd_watts_per_hz: f64,
}

impl ChannelParams {
    pub fn new(
        bandwidth_hz: f64,
        tx_power_watts: f64,
        channel_gain: f64,
        noise_psd_watts_per_hz: f64,
    ) -> Result<Self> {
        let ch = ChannelParams {
            bandwidth_hz,
            tx_power_watts,
            channel_gain,
            noise_psd_watts_per_hz,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("tx_power_watts", self.tx_power_watts),
            ("channel_gain", self.channel_gain),
            ("noise_psd_watts_per_hz", self.noise_psd_watts_per_hz),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidChannel(format!(
                    "{name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        let snr = self.snr();
        if !(snr.is_finite() && snr > 0.0) {
            return Err(Error::InvalidChannel(format!("SNR {snr} is not finite and positive")));
        }
        Ok(())
    }

    /// Dimensionless SNR; the noise power is the PSD integrated over the band.
    pub fn snr(&self) -> f64 {
        self.tx_power_watts * self.channel_gain / (self.noise_psd_watts_per_hz * self.bandwidth_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputeParams {
    pub clock_hz: f64,
}

impl ComputeParams {
    pub fn new(clock_hz: f64) -> Result<Self> {
        if !(clock_hz.is_finite() && clock_hz > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "clock_hz must be finite and strictly positive, got {clock_hz}"
            )));
        }
        Ok(ComputeParams { clock_hz })
    }
}

/// Constants of the learning task shared by every learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    /// Features per sample.
    pub features: u64,
    pub data_precision_bits: f64,
    pub model_precision_bits: f64,
    /// Model parameters added per allocated sample.
    pub model_size_slope: f64,
    /// Model parameters independent of the batch.
    pub model_size_intercept: f64,
    /// Clock cycles for one forward/backward pass over one sample.
    pub complexity_cycles_per_sample: f64,
    pub dataset_size: u64,
}

impl TaskProfile {
    /// Weight count of a `[784, 300, 124, 60, 10]` dense network, biases excluded.
    pub const MNIST_PARAMETERS: f64 = 280_440.0;

    /// MNIST with the 784-300-124-60-10 network, 8-bit pixels and 32-bit weights.
    pub fn mnist() -> Self {
        TaskProfile {
            features: 784,
            data_precision_bits: 8.0,
            model_precision_bits: 32.0,
            model_size_slope: 0.0,
            model_size_intercept: Self::MNIST_PARAMETERS,
            complexity_cycles_per_sample: 1_123_736.0,
            dataset_size: 60_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("data_precision_bits", self.data_precision_bits),
            ("model_precision_bits", self.model_precision_bits),
            ("model_size_intercept", self.model_size_intercept),
            ("complexity_cycles_per_sample", self.complexity_cycles_per_sample),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "task.{name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        if !(self.model_size_slope.is_finite() && self.model_size_slope >= 0.0) {
            return Err(Error::InvalidScenario(format!(
                "task.model_size_slope must be finite and nonnegative, got {}",
                self.model_size_slope
            )));
        }
        if self.features == 0 {
            return Err(Error::InvalidScenario("task.features must be positive".into()));
        }
        if self.dataset_size == 0 {
            return Err(Error::InvalidScenario("task.dataset_size must be positive".into()));
        }
        Ok(())
    }

    /// Size in bits of the model that goes with a batch of `batch` samples.
    pub fn model_bits(&self, batch: f64) -> f64 {
        self.model_precision_bits * (batch * self.model_size_slope + self.model_size_intercept)
    }

    /// Bits needed to ship one raw sample.
    pub fn sample_bits(&self) -> f64 {
        self.features as f64 * self.data_precision_bits
    }
}

/// Parallelized learning ships the data; federated learning only moves models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LearningMode {
    ParallelizedLearning,
    FederatedLearning,
}

impl LearningMode {
    fn ships_data(self) -> bool {
        matches!(self, LearningMode::ParallelizedLearning)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerProfile {
    /// 1-based learner index.
    pub id: usize,
    pub channel: ChannelParams,
    pub compute: ComputeParams,
    pub mode: LearningMode,
}

/// Coefficients of `t = c2 * tau * d + c1 * d + c0`, all in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeCoefficients {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl TimeCoefficients {
    pub fn new(c2: f64, c1: f64, c0: f64) -> Result<Self> {
        if !(c2.is_finite() && c2 > 0.0) {
            return Err(Error::InvalidScenario(format!("c2 must be positive, got {c2}")));
        }
        if !(c1.is_finite() && c1 >= 0.0 && c0.is_finite() && c0 >= 0.0) {
            return Err(Error::InvalidScenario(format!(
                "c1 and c0 must be finite and nonnegative, got c1={c1}, c0={c0}"
            )));
        }
        Ok(TimeCoefficients { c2, c1, c0 })
    }

    /// Round time for `tau` updates over a batch of `batch` samples.
    pub fn cycle_time(&self, tau: f64, batch: f64) -> f64 {
        cycle_time(self, tau, batch)
    }
}

/// Shannon rate `W log2(1 + P h / (N0 W))` in bits per second.
pub fn achievable_rate(ch: &ChannelParams) -> Result<f64> {
    ch.validate()?;
    let rate = ch.bandwidth_hz * (1.0 + ch.snr()).log2();
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidChannel(format!("achievable rate {rate} is not finite and positive")));
    }
    Ok(rate)
}

/// Path loss in dB at `distance_m` meters under the `7 + 2.1 log10(R)` model.
pub fn path_loss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(Error::InvalidDistance(distance_m));
    }
    Ok(7.0 + 2.1 * distance_m.log10())
}

/// Linear channel gain at `distance_m` meters.
pub fn path_loss_gain(distance_m: f64) -> Result<f64> {
    Ok(10f64.powf(-path_loss_db(distance_m)? / 10.0))
}

pub fn time_coefficients(learner: &LearnerProfile, task: &TaskProfile) -> Result<TimeCoefficients> {
    let rate = achievable_rate(&learner.channel)?;
    let data_bits = if learner.mode.ships_data() {
        task.sample_bits()
    } else {
        0.0
    };
    let c2 = task.complexity_cycles_per_sample / learner.compute.clock_hz;
    let c1 = (data_bits + 2.0 * task.model_precision_bits * task.model_size_slope) / rate;
    let c0 = 2.0 * task.model_precision_bits * task.model_size_intercept / rate;
    Ok(TimeCoefficients { c2, c1, c0 })
}

pub fn cycle_time(coeff: &TimeCoefficients, tau: f64, batch: f64) -> f64 {
    coeff.c2 * tau * batch + coeff.c1 * batch + coeff.c0
}

/// Send, single-update compute and receive times of one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentTimes {
    pub send: f64,
    pub compute_per_update: f64,
    pub receive: f64,
}

impl ComponentTimes {
    /// `send + tau * compute_per_update + receive`.
    pub fn total(&self, tau: f64) -> f64 {
        self.send + tau * self.compute_per_update + self.receive
    }
}

/// Splits the round time into its send / compute / receive parts.
///
/// `compute_per_update` is the time of one pass over the batch; `tau`
/// multiplies it exactly once in [`ComponentTimes::total`].
pub fn component_times(
    learner: &LearnerProfile,
    task: &TaskProfile,
    batch: f64,
) -> Result<ComponentTimes> {
    let rate = achievable_rate(&learner.channel)?;
    let data_bits = if learner.mode.ships_data() {
        batch * task.sample_bits()
    } else {
        0.0
    };
    let model_bits = task.model_bits(batch);
    Ok(ComponentTimes {
        send: (data_bits + model_bits) / rate,
        compute_per_update: batch * task.complexity_cycles_per_sample / learner.compute.clock_hz,
        receive: model_bits / rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn table_channel(distance: f64) -> ChannelParams {
        ChannelParams::new(
            5e6,
            dbm_to_watts(23.0),
            path_loss_gain(distance).unwrap(),
            dbm_to_watts(-174.0),
        )
        .unwrap()
    }

    fn learner(mode: LearningMode, clock: f64, distance: f64) -> LearnerProfile {
        LearnerProfile {
            id: 1,
            channel: table_channel(distance),
            compute: ComputeParams::new(clock).unwrap(),
            mode,
        }
    }

    #[test]
    fn rate_at_fifty_meters() {
        let ch = table_channel(50.0);
        // Hand evaluation: SNR = 8.7952e11, rate = 1.983896e8 bit/s.
        assert!(rel(ch.snr(), 8.795_211_647e11) < 1e-8);
        assert!(rel(achievable_rate(&ch).unwrap(), 1.983_896_367e8) < 1e-8);
    }

    #[test]
    fn rate_equals_bandwidth_at_unit_snr() {
        // P h / (N0 W) = 1 -> log2(2) = 1.
        let ch = ChannelParams::new(2e6, 1.0, 1e-15, 5e-22).unwrap();
        assert!(rel(achievable_rate(&ch).unwrap(), 2e6) < 1e-12);
    }

    #[test]
    fn rate_is_sublinear_in_bandwidth() {
        let a = ChannelParams::new(5e6, 0.2, 0.08, 4e-21).unwrap();
        let b = ChannelParams { bandwidth_hz: 1e7, ..a };
        assert!(achievable_rate(&b).unwrap() < 2.0 * achievable_rate(&a).unwrap());
    }

    #[test]
    fn invalid_channels_rejected() {
        assert!(matches!(
            ChannelParams::new(0.0, 1.0, 1.0, 1.0),
            Err(Error::InvalidChannel(_))
        ));
        assert!(matches!(
            ChannelParams::new(1.0, f64::NAN, 1.0, 1.0),
            Err(Error::InvalidChannel(_))
        ));
        let overflow = ChannelParams {
            bandwidth_hz: 1e-300,
            tx_power_watts: 1e300,
            channel_gain: 1e300,
            noise_psd_watts_per_hz: 1e-300,
        };
        assert!(matches!(achievable_rate(&overflow), Err(Error::InvalidChannel(_))));
    }

    #[test]
    fn path_loss_examples() {
        assert!((path_loss_db(1.0).unwrap() - 7.0).abs() < 1e-12);
        assert!(rel(path_loss_gain(1.0).unwrap(), 0.199_526_231_5) < 1e-9);
        assert!((path_loss_db(10.0).unwrap() - 9.1).abs() < 1e-12);
        assert!((path_loss_db(50.0).unwrap() - 10.567_837).abs() < 1e-6);
        assert!(rel(path_loss_gain(50.0).unwrap(), 0.087_743_77) < 1e-6);
        assert_eq!(path_loss_gain(0.0), Err(Error::InvalidDistance(0.0)));
        assert_eq!(path_loss_gain(-3.0), Err(Error::InvalidDistance(-3.0)));
    }

    #[test]
    fn mnist_coefficients() {
        let task = TaskProfile::mnist();
        assert_eq!(task.model_bits(0.0), 8_974_080.0);
        let l = learner(LearningMode::ParallelizedLearning, 2.4e9, 50.0);
        let c = time_coefficients(&l, &task).unwrap();
        assert!(rel(c.c2, 4.682_233_333e-4) < 1e-9);
        let rate = achievable_rate(&l.channel).unwrap();
        assert!(rel(c.c0 * rate, 2.0 * 8_974_080.0) < 1e-12);
        assert!(rel(c.c1 * rate, 784.0 * 8.0) < 1e-12);
    }

    #[test]
    fn federated_mode_without_slope_has_no_linear_term() {
        let task = TaskProfile::mnist();
        let l = learner(LearningMode::FederatedLearning, 7e8, 20.0);
        assert_eq!(time_coefficients(&l, &task).unwrap().c1, 0.0);
    }

    #[test]
    fn federated_send_and_receive_match_without_slope() {
        let task = TaskProfile::mnist();
        let l = learner(LearningMode::FederatedLearning, 7e8, 20.0);
        let parts = component_times(&l, &task, 321.0).unwrap();
        assert_eq!(parts.send, parts.receive);
        assert_eq!(component_times(&l, &task, 0.0).unwrap().compute_per_update, 0.0);
    }

    #[test]
    fn cycle_time_examples() {
        let unit = TimeCoefficients::new(1.0, 0.0, 0.0).unwrap();
        assert_eq!(cycle_time(&unit, 2.0, 5.0), 10.0);
        let c = TimeCoefficients::new(0.001, 0.01, 0.5).unwrap();
        assert!((cycle_time(&c, 3.0, 100.0) - 1.8).abs() < 1e-12);
        assert_eq!(cycle_time(&c, 7.0, 0.0), 0.5);
    }

    #[test]
    fn doubling_clock_halves_c2_only() {
        let task = TaskProfile::mnist();
        let slow = time_coefficients(&learner(LearningMode::ParallelizedLearning, 7e8, 30.0), &task).unwrap();
        let fast = time_coefficients(&learner(LearningMode::ParallelizedLearning, 1.4e9, 30.0), &task).unwrap();
        assert_eq!(fast.c2 * 2.0, slow.c2);
        assert_eq!(fast.c1, slow.c1);
        assert_eq!(fast.c0, slow.c0);
    }

    proptest! {
        #[test]
        fn components_sum_to_cycle_time(
            distance in 0.5f64..200.0,
            clock in 1e8f64..5e9,
            tau in 0.0f64..50.0,
            batch in 0.0f64..1e5,
            slope in 0.0f64..10.0,
            federated in any::<bool>(),
        ) {
            let mode = if federated { LearningMode::FederatedLearning } else { LearningMode::ParallelizedLearning };
            let task = TaskProfile { model_size_slope: slope, ..TaskProfile::mnist() };
            let l = learner(mode, clock, distance);
            let coeff = time_coefficients(&l, &task).unwrap();
            let parts = component_times(&l, &task, batch).unwrap();
            let direct = cycle_time(&coeff, tau, batch);
            prop_assert!(rel(parts.total(tau), direct) <= 1e-12);
        }

        #[test]
        fn parallelized_linear_term_dominates(distance in 0.5f64..200.0, slope in 0.0f64..10.0) {
            let task = TaskProfile { model_size_slope: slope, ..TaskProfile::mnist() };
            let pl = time_coefficients(&learner(LearningMode::ParallelizedLearning, 1e9, distance), &task).unwrap();
            let fl = time_coefficients(&learner(LearningMode::FederatedLearning, 1e9, distance), &task).unwrap();
            prop_assert!(pl.c1 > fl.c1);
        }

        #[test]
        fn gain_decreases_and_rate_increases(d1 in 0.1f64..500.0, d2 in 0.1f64..500.0) {
            prop_assume!(d1 < d2);
            prop_assert!(path_loss_gain(d1).unwrap() > path_loss_gain(d2).unwrap());
            prop_assert!(achievable_rate(&table_channel(d1)).unwrap() > achievable_rate(&table_channel(d2)).unwrap());
        }
    }
}
