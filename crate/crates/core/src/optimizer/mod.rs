//! Per-slot joint scheduling, surface configuration and beamforming.
//!
//! The slot problem is solved by alternating between a lifted
//! scheduling/coefficient program ([`tarc`]) and successive convex
//! approximation over the BS beams ([`beamforming`]), then recovering a
//! rank-one surface profile and a binary schedule ([`alternating`]).

use std::time::Duration;

use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{ChannelError, ChannelSet};
use crate::star_ris::{RisMode, StarRisError, TarcProfile};
use crate::Side;

pub mod alternating;
pub mod beamforming;
pub mod conic;
pub mod lifted;
pub mod surrogate;
pub mod tarc;

pub use alternating::{alternating_optimize, required_power, round_schedule, mrt_decision};
pub use beamforming::{solve_beamforming_sca, BeamSolution};
pub use lifted::{build_lifted_forms, LiftedForms};
pub use tarc::{
    solve_tarc_scheduling, solve_tarc_scheduling_es, solve_tarc_scheduling_ms, Layout, MsOutcome,
    TarcSolution,
};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid slot problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Conic(#[from] conic::ConicError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    StarRis(#[from] StarRisError),
}

/// Everything the optimizer needs for one slot.
#[derive(Debug, Clone)]
pub struct SlotProblem {
    pub channels: ChannelSet,
    /// `(A - z) b` per stream.
    pub weights: [f64; 2],
    pub available: [bool; 2],
    pub gamma_th: f64,
    /// Linear scale.
    pub energy_min: f64,
    pub power_budget: f64,
    pub mode: RisMode,
}

impl SlotProblem {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |s: String| Err(OptimizerError::InvalidProblem(s));
        if !(self.gamma_th > 0.0 && self.gamma_th.is_finite()) {
            return bad(format!("gamma_th = {}", self.gamma_th));
        }
        if !(self.power_budget > 0.0 && self.power_budget.is_finite()) {
            return bad(format!("power_budget = {}", self.power_budget));
        }
        if !(self.energy_min >= 0.0 && self.energy_min.is_finite()) {
            return bad(format!("energy_min = {}", self.energy_min));
        }
        for k in 0..2 {
            let w = self.weights[k];
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("weight {k} = {w}"));
            }
            if w > 0.0 && !self.available[k] {
                return bad(format!("stream {k} has weight but no packet"));
            }
        }
        let ch = &self.channels;
        let m = ch.elements();
        if ch.f.iter().chain(&ch.u).any(|v| v.len() != m) {
            return bad("channel vectors disagree with surface size".into());
        }
        if self.mode == RisMode::Conventional && m < 2 {
            return bad("conventional layout needs at least two elements".into());
        }
        Ok(())
    }

    /// Streams that carry positive weight.
    pub fn active(&self, side: Side) -> bool {
        self.weights[side.index()] > 0.0
    }

    pub fn max_weight(&self) -> f64 {
        self.weights[0].max(self.weights[1])
    }
}

/// BS beams: one information beam per stream and one energy beam per EU.
#[derive(Debug, Clone, PartialEq)]
pub struct Beams {
    pub info: [DVector<Complex64>; 2],
    pub energy: [DVector<Complex64>; 2],
}

impl Beams {
    pub fn zeros(n_t: usize) -> Self {
        let z = DVector::zeros(n_t);
        Self { info: [z.clone(), z.clone()], energy: [z.clone(), z] }
    }

    pub fn total_power(&self) -> f64 {
        self.info.iter().chain(&self.energy).map(|b| b.norm_squared()).sum()
    }

    pub fn distance(&self, other: &Beams) -> f64 {
        self.info
            .iter()
            .chain(&self.energy)
            .zip(other.info.iter().chain(&other.energy))
            .map(|(a, b)| (a - b).norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SlotDecision {
    pub schedule: [bool; 2],
    pub beams: Beams,
    pub tarc: TarcProfile,
    pub status: SlotStatus,
    /// Final relaxed objective `sum_k weight_k s_k`.
    pub objective: f64,
    pub ao_iterations: usize,
    /// Relaxed objective after every subproblem, in solve order.
    pub history: Vec<f64>,
    pub relaxed_schedule: [f64; 2],
}

/// Iteration caps and tolerances.
#[derive(Debug, Clone)]
pub struct OptimizerSettings {
    pub max_ao_iters: usize,
    pub max_sca_iters: usize,
    /// Cap per stage of the mode-switching penalty loop.
    pub max_penalty_iters: usize,
    pub tolerance: f64,
    pub num_randomizations: usize,
    /// Penalty weight is `mu_scale * (max weight + 1)`.
    pub mu_scale: f64,
    pub deadline: Duration,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_ao_iters: 20,
            max_sca_iters: 30,
            max_penalty_iters: 10,
            tolerance: 1e-3,
            num_randomizations: 50,
            mu_scale: 1e3,
            deadline: Duration::from_secs(10),
        }
    }
}
