//! Beamforming subproblem for a fixed lifted surface profile.
//!
//! With `phi_k` fixed, the SNR and harvested energy are convex quadratics
//! `w^H Q_k w`. Their lower-bound targets are handled by linearizing at the
//! current beams. A first pass picks the relaxed schedule; the remaining
//! passes keep it and maximize the smallest normalized constraint slack.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::conic::{solve_conic, ConicProblem, ConicStatus, LinExpr, Relation, ScalarVar, Sense, SocVar};
use super::lifted::beam_gain;
use super::surrogate::quadratic;
use super::{Beams, OptimizerError, SlotProblem};
use crate::channel::cascade;
use crate::star_ris::LiftedProfile;
use crate::Side;

#[derive(Debug, Clone)]
pub struct BeamSolution {
    pub status: ConicStatus,
    pub beams: Beams,
    pub s: [f64; 2],
    /// `sum_k weight_k s_k` from the scheduling pass.
    pub objective: f64,
    pub iterations: usize,
    /// Smallest normalized slack at the true quadratics, one entry per
    /// accepted iterate (the scheduling pass first).
    pub slack_history: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Info,
    Energy,
}

struct Target {
    kind: Kind,
    side: Side,
    gain: DMatrix<Complex64>,
    /// Offset of this beam in the cone tail, in complex entries.
    offset: usize,
}

impl Target {
    fn beam<'a>(&self, beams: &'a Beams) -> &'a DVector<Complex64> {
        match self.kind {
            Kind::Info => &beams.info[self.side.index()],
            Kind::Energy => &beams.energy[self.side.index()],
        }
    }

    fn beam_mut<'a>(&self, beams: &'a mut Beams) -> &'a mut DVector<Complex64> {
        match self.kind {
            Kind::Info => &mut beams.info[self.side.index()],
            Kind::Energy => &mut beams.energy[self.side.index()],
        }
    }
}

struct Setup {
    targets: Vec<Target>,
    n_t: usize,
}

impl Setup {
    fn new(slot: &SlotProblem, phi: &LiftedProfile) -> Result<Self, OptimizerError> {
        let ch = &slot.channels;
        let mut targets = Vec::new();
        for side in Side::BOTH {
            let k = side.index();
            if slot.available[k] {
                let gain = beam_gain(&cascade(ch.info(side), &ch.g)?, phi.side(side)) / Complex64::new(ch.sigma2_info[k], 0.0);
                targets.push(Target { kind: Kind::Info, side, gain, offset: 0 });
            }
        }
        if slot.energy_min > 0.0 {
            for side in Side::BOTH {
                let gain = beam_gain(&cascade(ch.energy(side), &ch.g)?, phi.side(side));
                targets.push(Target { kind: Kind::Energy, side, gain, offset: 0 });
            }
        }
        let n_t = ch.antennas();
        for (i, t) in targets.iter_mut().enumerate() {
            t.offset = i * n_t;
        }
        Ok(Self { targets, n_t })
    }

    fn cone(&self, p: &mut ConicProblem, power: f64) -> SocVar {
        let c = p.add_soc(2 * self.n_t * self.targets.len());
        p.add_constraint(LinExpr::new().scalar(c.head(), 1.0), Relation::Le, power.sqrt());
        c
    }

    /// `2 Re{(Q w0)^H w}` and its constant `w0^H Q w0`.
    fn linearization(&self, t: &Target, cone: &SocVar, at: &Beams) -> (LinExpr, f64) {
        let w0 = t.beam(at);
        let a = &t.gain * w0;
        let c0 = w0.dotc(&a).re;
        (LinExpr::new().re_inner(cone, t.offset, &a, 2.0), c0)
    }

    /// Beams outside the target set are zero.
    fn read(&self, sol: &super::conic::ConicSolution, cone: &SocVar) -> Beams {
        let mut out = Beams::zeros(self.n_t);
        for t in &self.targets {
            let v = DVector::from_fn(self.n_t, |j, _| {
                let base = 2 * (t.offset + j);
                Complex64::new(sol.value(cone.tail(base)), sol.value(cone.tail(base + 1)))
            });
            *t.beam_mut(&mut out) = v;
        }
        out
    }

    fn min_slack(&self, slot: &SlotProblem, beams: &Beams, s: &[f64; 2]) -> f64 {
        self.targets
            .iter()
            .map(|t| {
                let v = quadratic(&t.gain, t.beam(beams));
                match t.kind {
                    Kind::Info => (v - slot.gamma_th * s[t.side.index()]) / slot.gamma_th,
                    Kind::Energy => (v - slot.energy_min) / slot.energy_min,
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn solve_beamforming_sca(
    slot: &SlotProblem,
    phi: &LiftedProfile,
    start: &Beams,
    max_sca_iters: usize,
    tolerance: f64,
) -> Result<BeamSolution, OptimizerError> {
    let setup = Setup::new(slot, phi)?;
    let mut out = BeamSolution {
        status: ConicStatus::Optimal,
        beams: start.clone(),
        s: [0.0; 2],
        objective: 0.0,
        iterations: 0,
        slack_history: Vec::new(),
    };
    if setup.targets.is_empty() {
        return Ok(out);
    }

    // Scheduling pass.
    let mut p = ConicProblem::new(Sense::Maximize);
    let cone = setup.cone(&mut p, slot.power_budget);
    let s_vars: [Option<ScalarVar>; 2] = [0, 1].map(|k| (slot.weights[k] > 0.0).then(|| p.add_nonneg(1)[0]));
    let mut obj = LinExpr::new();
    let mut sum = LinExpr::new();
    for k in 0..2 {
        if let Some(s) = s_vars[k] {
            obj = obj.scalar(s, slot.weights[k]);
            sum = sum.scalar(s, 1.0);
        }
    }
    p.set_objective(obj);
    if s_vars.iter().any(Option::is_some) {
        p.add_constraint(sum, Relation::Le, 1.0);
    }
    for t in &setup.targets {
        let (lin, c0) = setup.linearization(t, &cone, start);
        match t.kind {
            Kind::Info => {
                let Some(s) = s_vars[t.side.index()] else { continue };
                p.add_constraint(lin.scalar(s, -slot.gamma_th), Relation::Ge, c0);
            }
            Kind::Energy => p.add_constraint(lin, Relation::Ge, slot.energy_min + c0),
        }
    }
    let sol = solve_conic(&p)?;
    out.iterations = 1;
    if sol.status != ConicStatus::Optimal {
        out.status = sol.status;
        return Ok(out);
    }
    out.s = [0, 1].map(|k| s_vars[k].map_or(0.0, |v| sol.value(v).clamp(0.0, 1.0)));
    out.objective = (0..2).map(|k| slot.weights[k] * out.s[k]).sum();
    out.beams = setup.read(&sol, &cone);
    out.slack_history.push(setup.min_slack(slot, &out.beams, &out.s));

    // Slack-widening passes with the schedule held fixed.
    while out.iterations < max_sca_iters {
        let mut p = ConicProblem::new(Sense::Maximize);
        let cone = setup.cone(&mut p, slot.power_budget);
        let t_var = p.add_nonneg(1)[0];
        p.set_objective(LinExpr::new().scalar(t_var, 1.0));
        for t in &setup.targets {
            let (lin, c0) = setup.linearization(t, &cone, &out.beams);
            let (scale, target) = match t.kind {
                Kind::Info => (slot.gamma_th, slot.gamma_th * out.s[t.side.index()]),
                Kind::Energy => (slot.energy_min, slot.energy_min),
            };
            p.add_constraint(lin.scalar(t_var, -scale), Relation::Ge, c0 + target);
        }
        let sol = solve_conic(&p)?;
        out.iterations += 1;
        if sol.status != ConicStatus::Optimal {
            break;
        }
        let next = setup.read(&sol, &cone);
        let change = next.distance(&out.beams);
        out.beams = next;
        out.slack_history.push(setup.min_slack(slot, &out.beams, &out.s));
        if change < tolerance {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel_set, Geometry, Noise};
    use crate::optimizer::alternating::initial_beams;
    use crate::optimizer::tarc::solve_tarc_scheduling_es;
    use crate::star_ris::RisMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn slot(seed: u64, weights: [f64; 2]) -> SlotProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Noise { info: [1e-3; 2], energy: [1.0; 2] };
        let ch = sample_channel_set(&Geometry::default(), 6, 3, &noise, &mut rng).unwrap();
        SlotProblem {
            channels: ch,
            weights,
            available: weights.map(|w| w > 0.0),
            gamma_th: 2.0,
            energy_min: 0.01,
            power_budget: 3.0,
            mode: RisMode::EnergySplitting,
        }
    }

    #[test]
    fn slack_is_monotone_and_power_respected() {
        for seed in 0..5 {
            let slot = slot(seed, [4.0, 1.0]);
            let start = initial_beams(&slot.channels, slot.power_budget, slot.mode).unwrap();
            let tarc = solve_tarc_scheduling_es(&slot, &start).unwrap();
            let pt = tarc.point.unwrap();
            let sol = solve_beamforming_sca(&slot, &pt.lifted, &start, 30, 1e-3).unwrap();
            assert_eq!(sol.status, ConicStatus::Optimal);
            assert!(sol.objective >= pt.objective - 1e-6, "{} < {}", sol.objective, pt.objective);
            assert!(sol.beams.total_power() <= slot.power_budget + 1e-6);
            for w in sol.slack_history.windows(2) {
                assert!(w[1] >= w[0] - 1e-6, "{:?}", sol.slack_history);
            }
            assert!(sol.slack_history[0] >= -1e-6);
        }
    }

    #[test]
    fn no_targets_returns_start() {
        let mut s = slot(1, [0.0, 0.0]);
        s.energy_min = 0.0;
        let start = initial_beams(&s.channels, s.power_budget, s.mode).unwrap();
        let lifted = crate::star_ris::make_conventional(6).unwrap().lifted();
        let sol = solve_beamforming_sca(&s, &lifted, &start, 30, 1e-3).unwrap();
        assert_eq!(sol.beams, start);
        assert_eq!(sol.objective, 0.0);
    }
}
