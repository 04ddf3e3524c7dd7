//! Episodes, Monte Carlo sweeps and figures of merit.
//!
//! Every run derives three independent random streams from `(seed, run)`:
//! channels, arrivals, and solver randomization. Channel and arrival draws
//! do not depend on the scheme, so different schemes and sweep values see
//! the same realizations for the same run index.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::aoi::{average_sum_aoi, delivery_predicate, sample_arrival, AoiError, AoiTrace, StreamState};
use crate::channel::{harvested_energy, sample_channel_set, snr, ChannelError, Geometry, Noise};
use crate::optimizer::{
    alternating_optimize, mrt_decision, required_power, round_schedule, Beams, OptimizerError, OptimizerSettings,
    SlotDecision, SlotProblem, SlotStatus,
};
use crate::star_ris::{RisMode, TarcProfile};
use crate::Side;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Aoi(#[from] AoiError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

/// Slot policy: one of the surface modes, or random phases without
/// optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    EnergySplitting,
    ModeSwitching,
    Conventional,
    RandomPhase,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::EnergySplitting, Scheme::ModeSwitching, Scheme::Conventional, Scheme::RandomPhase];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::EnergySplitting => "es",
            Scheme::ModeSwitching => "ms",
            Scheme::Conventional => "conv",
            Scheme::RandomPhase => "random",
        }
    }

    pub fn mode(self) -> RisMode {
        match self {
            Scheme::EnergySplitting | Scheme::RandomPhase => RisMode::EnergySplitting,
            Scheme::ModeSwitching => RisMode::ModeSwitching,
            Scheme::Conventional => RisMode::Conventional,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|m| m.label() == s.trim())
            .ok_or_else(|| format!("unknown mode `{s}` (expected es, ms, conv or random)"))
    }
}

/// Resolved simulation settings. All thresholds are linear.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub geometry: Geometry,
    pub noise: Noise,
    pub m: usize,
    pub n_t: usize,
    pub horizon: usize,
    pub lambda: [f64; 2],
    pub gamma_th: f64,
    pub power_budget: f64,
    pub energy_min: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub monte_carlo_runs: usize,
    pub optimizer: OptimizerSettings,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            noise: Noise::default(),
            m: 32,
            n_t: 4,
            horizon: 100,
            lambda: [0.6; 2],
            gamma_th: db_to_linear(3.0),
            power_budget: 3.0,
            energy_min: db_to_linear(-20.0),
            scheme: Scheme::EnergySplitting,
            seed: 0,
            monte_carlo_runs: 1,
            optimizer: OptimizerSettings::default(),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |field, reason: String| Err(SimError::Config { field, reason });
        if self.horizon == 0 {
            return err("horizon", "must be at least 1".into());
        }
        if self.monte_carlo_runs == 0 {
            return err("runs", "must be at least 1".into());
        }
        if self.m == 0 || (self.scheme == Scheme::Conventional && self.m < 2) {
            return err("m", format!("{} is too small for mode {}", self.m, self.scheme));
        }
        if self.n_t == 0 {
            return err("n_t", "must be at least 1".into());
        }
        for (field, l) in [("lambda_t", self.lambda[0]), ("lambda_r", self.lambda[1])] {
            if !(0.0..=1.0).contains(&l) {
                return err(field, format!("{l} is not a probability"));
            }
        }
        if !(self.gamma_th > 0.0 && self.gamma_th.is_finite()) {
            return err("gamma_th_db", format!("linear value {} must be positive and finite", self.gamma_th));
        }
        if !(self.power_budget > 0.0 && self.power_budget.is_finite()) {
            return err("power_budget", format!("{} must be positive", self.power_budget));
        }
        if !(self.energy_min >= 0.0 && self.energy_min.is_finite()) {
            return err("energy_min_db", format!("linear value {} must be finite", self.energy_min));
        }
        for (field, s) in [
            ("sigma2_info", self.noise.info[0]),
            ("sigma2_info", self.noise.info[1]),
            ("sigma2_energy", self.noise.energy[0]),
            ("sigma2_energy", self.noise.energy[1]),
        ] {
            if !(s > 0.0 && s.is_finite()) {
                return err(field, format!("{s} must be positive"));
            }
        }
        if let Err(e) = self.geometry.validate() {
            return err("geometry", e.to_string());
        }
        Ok(())
    }
}

const STREAM_CHANNEL: u64 = 0;
const STREAM_ARRIVAL: u64 = 1;
const STREAM_SOLVER: u64 = 2;

fn stream(seed: u64, run: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run * 4 + purpose);
    rng
}

#[derive(Debug, Clone)]
pub struct SlotRecord {
    /// Stream states at the start of the slot.
    pub states: [StreamState; 2],
    pub schedule: [bool; 2],
    pub delivered: [bool; 2],
    pub snr: [f64; 2],
    pub energy: [f64; 2],
    pub status: SlotStatus,
    pub objective: f64,
    pub ao_iterations: usize,
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeTrace {
    pub slots: Vec<SlotRecord>,
    pub aoi: AoiTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub avg_sum_aoi: f64,
    /// Smallest realized harvested energy over both EUs and all
    /// optimal-status slots; NaN if there are none.
    pub min_harvested_energy: f64,
    /// Delivered over scheduled slots per stream; zero if never scheduled.
    pub delivery_rate: [f64; 2],
    pub infeasible_slot_fraction: f64,
    pub mean_ao_iterations: f64,
}

impl EpisodeMetrics {
    pub fn from_trace(trace: &EpisodeTrace) -> Result<Self, SimError> {
        let n = trace.slots.len();
        let avg_sum_aoi = average_sum_aoi(&trace.aoi)?;
        let min_harvested_energy = trace
            .slots
            .iter()
            .filter(|s| s.status == SlotStatus::Optimal)
            .flat_map(|s| s.energy)
            .reduce(f64::min)
            .unwrap_or(f64::NAN);
        let delivery_rate = [0, 1].map(|k| {
            let sched = trace.slots.iter().filter(|s| s.schedule[k]).count();
            let ok = trace.slots.iter().filter(|s| s.delivered[k]).count();
            if sched == 0 {
                0.0
            } else {
                ok as f64 / sched as f64
            }
        });
        let infeasible = trace.slots.iter().filter(|s| s.status == SlotStatus::Infeasible).count();
        let iters: usize = trace.slots.iter().map(|s| s.ao_iterations).sum();
        Ok(Self {
            avg_sum_aoi,
            min_harvested_energy,
            delivery_rate,
            infeasible_slot_fraction: infeasible as f64 / n as f64,
            mean_ao_iterations: iters as f64 / n as f64,
        })
    }
}

/// Random phases on both sides, even amplitude split, matched-filter beams
/// and greedy scheduling by weight.
pub fn random_phase_decision<R: Rng + ?Sized>(slot: &SlotProblem, rng: &mut R) -> Result<SlotDecision, SimError> {
    let m = slot.channels.elements();
    let half = DVector::from_element(m, 0.5);
    let theta_t = DVector::from_fn(m, |_, _| rng.random::<f64>() * TAU);
    let theta_r = DVector::from_fn(m, |_, _| rng.random::<f64>() * TAU);
    let tarc = TarcProfile::new(RisMode::EnergySplitting, half.clone(), half, theta_t, theta_r)
        .map_err(OptimizerError::from)?;
    let fits = |s: [bool; 2]| {
        (0..2).all(|k| !s[k] || slot.weights[k] > 0.0)
            && required_power(slot, &tarc, s).is_some_and(|p| p <= slot.power_budget * (1.0 - 1e-9))
    };
    let schedule = round_schedule([1.0, 1.0], slot.weights, fits);
    let objective = (0..2).map(|k| slot.weights[k] * schedule[k] as u8 as f64).sum();
    Ok(match mrt_decision(slot, &tarc, schedule) {
        Some(beams) => SlotDecision {
            schedule,
            beams,
            tarc,
            status: SlotStatus::Optimal,
            objective,
            ao_iterations: 0,
            history: Vec::new(),
            relaxed_schedule: schedule.map(|b| b as u8 as f64),
        },
        None => SlotDecision {
            schedule: [false; 2],
            beams: Beams::zeros(slot.channels.antennas()),
            tarc,
            status: SlotStatus::Infeasible,
            objective: 0.0,
            ao_iterations: 0,
            history: Vec::new(),
            relaxed_schedule: [0.0; 2],
        },
    })
}

/// Runs one episode of `config.horizon` slots for Monte Carlo run `run`.
pub fn run_episode(config: &SimConfig, run: u64) -> Result<(EpisodeTrace, EpisodeMetrics), SimError> {
    config.validate()?;
    let mut channel_rng = stream(config.seed, run, STREAM_CHANNEL);
    let mut arrival_rng = stream(config.seed, run, STREAM_ARRIVAL);
    let mut solver_rng = stream(config.seed, run, STREAM_SOLVER);

    let mut states = [StreamState::initial(config.lambda[0], sample_arrival(config.lambda[0], &mut arrival_rng)?)?; 2];
    states[1] = StreamState::initial(config.lambda[1], sample_arrival(config.lambda[1], &mut arrival_rng)?)?;
    let mut trace = EpisodeTrace::default();
    for _ in 0..config.horizon {
        let current = states;
        let channels = sample_channel_set(&config.geometry, config.m, config.n_t, &config.noise, &mut channel_rng)?;
        let slot = SlotProblem {
            channels,
            weights: current.map(|s| s.reduction_weight()),
            available: current.map(|s| s.has_packet),
            gamma_th: config.gamma_th,
            energy_min: config.energy_min,
            power_budget: config.power_budget,
            mode: config.scheme.mode(),
        };
        let decision = match config.scheme {
            Scheme::RandomPhase => random_phase_decision(&slot, &mut solver_rng)?,
            _ => alternating_optimize(&slot, &config.optimizer, &mut solver_rng)?,
        };

        let ch = &slot.channels;
        let mut rec = SlotRecord {
            states: current,
            schedule: decision.schedule,
            delivered: [false; 2],
            snr: [0.0; 2],
            energy: [0.0; 2],
            status: decision.status,
            objective: decision.objective,
            ao_iterations: decision.ao_iterations,
        };
        for side in Side::BOTH {
            let k = side.index();
            let coef = decision.tarc.coefficients(side);
            rec.snr[k] = snr(ch.info(side), &coef, &ch.g, &decision.beams.info[k], ch.sigma2_info[k]);
            rec.energy[k] = harvested_energy(ch.energy(side), &coef, &ch.g, &decision.beams.energy[k]);
            rec.delivered[k] = delivery_predicate(rec.snr[k], rec.schedule[k], current[k].has_packet, config.gamma_th);
            trace.aoi.push(k, &current[k], rec.schedule[k], rec.delivered[k]);
        }
        for k in 0..2 {
            let arrival = sample_arrival(config.lambda[k], &mut arrival_rng)?;
            states[k] = current[k].step(rec.schedule[k], rec.delivered[k], arrival)?;
        }
        trace.slots.push(rec);
    }
    let metrics = EpisodeMetrics::from_trace(&trace)?;
    Ok((trace, metrics))
}

/// Quantity varied by a sweep. Threshold values are given in dB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParameter {
    GammaThDb,
    PowerBudget,
    NT,
    M,
    EnergyMinDb,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 5] = [
        SweepParameter::GammaThDb,
        SweepParameter::PowerBudget,
        SweepParameter::NT,
        SweepParameter::M,
        SweepParameter::EnergyMinDb,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SweepParameter::GammaThDb => "gamma_th_db",
            SweepParameter::PowerBudget => "power_budget",
            SweepParameter::NT => "n_t",
            SweepParameter::M => "m",
            SweepParameter::EnergyMinDb => "energy_min_db",
        }
    }

    /// Returns a copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig, SimError> {
        let mut c = base.clone();
        let count = |field: &'static str| {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(SimError::Config { field, reason: format!("{value} is not a positive integer") })
            }
        };
        match self {
            SweepParameter::GammaThDb => c.gamma_th = db_to_linear(value),
            SweepParameter::PowerBudget => c.power_budget = value,
            SweepParameter::NT => c.n_t = count("n_t")?,
            SweepParameter::M => c.m = count("m")?,
            SweepParameter::EnergyMinDb => c.energy_min = db_to_linear(value),
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SweepParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "gamma_th" {
            return Ok(SweepParameter::GammaThDb);
        }
        SweepParameter::ALL.into_iter().find(|p| p.label() == s).ok_or_else(|| {
            let names: Vec<_> = SweepParameter::ALL.iter().map(|p| p.label()).collect();
            format!("unknown sweep parameter `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub parameter: Option<SweepParameter>,
    pub value: f64,
    pub run: u64,
    pub metrics: EpisodeMetrics,
}

/// Runs every `(value, scheme, run)` combination. Rows come back ordered
/// by scheme, then value, then run. Without a sweep the base configuration
/// is run once per scheme with `value = NaN`.
pub fn run_sweep(base: &SimConfig, sweep: Option<&SweepSpec>, schemes: &[Scheme]) -> Result<Vec<SweepRow>, SimError> {
    if schemes.is_empty() {
        return Err(SimError::Config { field: "modes", reason: "no modes selected".into() });
    }
    let points: Vec<(Option<SweepParameter>, f64)> = match sweep {
        Some(s) if s.values.is_empty() => {
            return Err(SimError::Config { field: "sweep", reason: "no values".into() });
        }
        Some(s) => s.values.iter().map(|&v| (Some(s.parameter), v)).collect(),
        None => vec![(None, f64::NAN)],
    };
    let mut jobs = Vec::new();
    for &scheme in schemes {
        for &(param, value) in &points {
            let mut cfg = match param {
                Some(p) => p.apply(base, value)?,
                None => base.clone(),
            };
            cfg.scheme = scheme;
            cfg.validate()?;
            for run in 0..cfg.monte_carlo_runs as u64 {
                jobs.push((scheme, param, value, run, cfg.clone()));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(scheme, parameter, value, run, cfg)| {
            let (_, metrics) = run_episode(&cfg, run)?;
            Ok(SweepRow { scheme, parameter, value, run, metrics })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub parameter: Option<SweepParameter>,
    pub value: f64,
    pub runs: usize,
    pub mean_avg_sum_aoi: f64,
    pub stderr_avg_sum_aoi: f64,
}

/// Mean and standard error of `avg_sum_aoi` per `(scheme, value)`, in
/// first-appearance order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(Scheme, Option<SweepParameter>, f64, Vec<f64>)> = Vec::new();
    for r in rows {
        let same = |g: &&mut (Scheme, Option<SweepParameter>, f64, Vec<f64>)| {
            g.0 == r.scheme && g.1 == r.parameter && (g.2 == r.value || (g.2.is_nan() && r.value.is_nan()))
        };
        match groups.iter_mut().find(same) {
            Some(g) => g.3.push(r.metrics.avg_sum_aoi),
            None => groups.push((r.scheme, r.parameter, r.value, vec![r.metrics.avg_sum_aoi])),
        }
    }
    groups
        .into_iter()
        .map(|(scheme, parameter, value, xs)| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let stderr = if xs.len() > 1 {
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            SummaryRow { scheme, parameter, value, runs: xs.len(), mean_avg_sum_aoi: mean, stderr_avg_sum_aoi: stderr }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            m: 4,
            n_t: 2,
            horizon: 8,
            noise: Noise { info: [1e-2; 2], energy: [1.0; 2] },
            ..SimConfig::default()
        }
    }

    #[test]
    fn scheme_labels_roundtrip() {
        for s in Scheme::ALL {
            assert_eq!(s.label().parse::<Scheme>().unwrap(), s);
        }
        assert!("xx".parse::<Scheme>().is_err());
        assert_eq!("gamma_th".parse::<SweepParameter>().unwrap(), SweepParameter::GammaThDb);
        assert!("foo".parse::<SweepParameter>().unwrap_err().contains("energy_min_db"));
    }

    #[test]
    fn db_conversion() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((db_to_linear(-20.0) - 0.01).abs() < 1e-16);
        assert_eq!(db_to_linear(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn validation_names_field() {
        let mut c = small();
        c.horizon = 0;
        assert!(matches!(c.validate(), Err(SimError::Config { field: "horizon", .. })));
        let mut c = small();
        c.lambda[1] = 1.5;
        assert!(matches!(c.validate(), Err(SimError::Config { field: "lambda_r", .. })));
    }

    #[test]
    fn streams_are_independent_of_scheme() {
        let mut a = small();
        a.scheme = Scheme::RandomPhase;
        let mut b = small();
        b.scheme = Scheme::Conventional;
        let (ta, _) = run_episode(&a, 3).unwrap();
        let (tb, _) = run_episode(&b, 3).unwrap();
        // Same arrivals: packet availability only differs through deliveries,
        // so the first slot's states agree.
        assert_eq!(ta.slots[0].states, tb.slots[0].states);
    }

    #[test]
    fn zero_weight_random_baseline_is_energy_only() {
        let c = SimConfig { lambda: [0.0; 2], scheme: Scheme::RandomPhase, ..small() };
        let (trace, m) = run_episode(&c, 0).unwrap();
        assert!(trace.slots.iter().all(|s| s.schedule == [false, false]));
        assert_eq!(m.delivery_rate, [0.0, 0.0]);
        assert_eq!(m.avg_sum_aoi, (c.horizon as f64 + 1.0) / 2.0);
    }
}
