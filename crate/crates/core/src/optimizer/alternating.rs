//! Alternating optimization over one slot and recovery of a physical
//! decision from the relaxed solution.

use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use super::beamforming::solve_beamforming_sca;
use super::conic::ConicStatus;
use super::tarc::{solve_tarc_scheduling_es, solve_tarc_scheduling_ms, Layout, TarcPoint};
use super::{Beams, OptimizerError, OptimizerSettings, SlotDecision, SlotProblem, SlotStatus};
use crate::channel::{cascade, ChannelSet};
use crate::star_ris::{make_conventional, rank_one_candidates, RisMode, TarcProfile};
use crate::Side;

/// Relative margin kept below the power budget so that realized targets
/// are met strictly after rounding.
const POWER_MARGIN: f64 = 1e-9;

fn neutral_profile(m: usize) -> TarcProfile {
    let half = DVector::from_element(m, 0.5);
    TarcProfile::new(RisMode::EnergySplitting, half.clone(), half, DVector::zeros(m), DVector::zeros(m))
        .expect("uniform split is a valid profile")
}

/// Starting profile for the given mode: an even split with zero phases,
/// or the conventional layout in conventional mode.
fn start_profile(mode: RisMode, m: usize) -> Result<TarcProfile, OptimizerError> {
    Ok(match mode {
        RisMode::Conventional => make_conventional(m)?,
        _ => neutral_profile(m),
    })
}

/// Matched-filter beams through the cascade under the starting profile,
/// a quarter of the budget each.
pub fn initial_beams(ch: &ChannelSet, power: f64, mode: RisMode) -> Result<Beams, OptimizerError> {
    let profile = start_profile(mode, ch.elements())?;
    let dir = |h: DVector<Complex64>| {
        let n = h.norm();
        if n > 0.0 {
            h * Complex64::new((power / 4.0).sqrt() / n, 0.0)
        } else {
            DVector::from_element(ch.antennas(), Complex64::new((power / 4.0 / ch.antennas() as f64).sqrt(), 0.0))
        }
    };
    let mut b = Beams::zeros(ch.antennas());
    for side in Side::BOTH {
        let l = profile.to_vector(side);
        b.info[side.index()] = dir(cascade(ch.info(side), &ch.g)?.adjoint() * &l);
        b.energy[side.index()] = dir(cascade(ch.energy(side), &ch.g)?.adjoint() * &l);
    }
    Ok(b)
}

/// Effective BS-side channels `(info, energy)` for one side under a profile.
fn effective(ch: &ChannelSet, profile: &TarcProfile, side: Side) -> (DVector<Complex64>, DVector<Complex64>) {
    let l = profile.to_vector(side);
    let d_info = cascade(ch.info(side), &ch.g).expect("validated dimensions");
    let d_energy = cascade(ch.energy(side), &ch.g).expect("validated dimensions");
    (d_info.adjoint() * &l, d_energy.adjoint() * l)
}

/// Per-beam powers `[info_t, info_r, energy_t, energy_r]` that matched
/// filtering needs to meet the targets exactly, or `None` if some target is
/// unreachable at any power.
fn requirements(slot: &SlotProblem, profile: &TarcProfile, schedule: [bool; 2]) -> Option<[f64; 4]> {
    let ch = &slot.channels;
    let mut req = [0.0; 4];
    for side in Side::BOTH {
        let k = side.index();
        let (h, g) = effective(ch, profile, side);
        if schedule[k] {
            let gain = h.norm_squared() / ch.sigma2_info[k];
            if !(gain > 0.0) {
                return None;
            }
            req[k] = slot.gamma_th / gain;
        }
        if slot.energy_min > 0.0 {
            let gain = g.norm_squared();
            if !(gain > 0.0) {
                return None;
            }
            req[2 + k] = slot.energy_min / gain;
        }
    }
    Some(req)
}

/// Smallest total transmit power that meets every target of `schedule`
/// under `profile`, using matched filtering (optimal for fixed
/// coefficients since every beam feeds a single receiver).
pub fn required_power(slot: &SlotProblem, profile: &TarcProfile, schedule: [bool; 2]) -> Option<f64> {
    requirements(slot, profile, schedule).map(|r| r.iter().sum())
}

/// Matched-filter beams meeting the targets of `schedule`, scaled up
/// uniformly to the full budget. `None` if the budget is insufficient.
pub fn mrt_decision(slot: &SlotProblem, profile: &TarcProfile, schedule: [bool; 2]) -> Option<Beams> {
    let req = requirements(slot, profile, schedule)?;
    let total: f64 = req.iter().sum();
    let budget = slot.power_budget * (1.0 - POWER_MARGIN);
    if total > budget {
        return None;
    }
    let ch = &slot.channels;
    let mut beams = Beams::zeros(ch.antennas());
    let powers = if total > 0.0 {
        req.map(|r| r * budget / total)
    } else {
        [0.0, 0.0, budget / 2.0, budget / 2.0]
    };
    for side in Side::BOTH {
        let k = side.index();
        let (h, g) = effective(ch, profile, side);
        for (dst, dir, p) in [(&mut beams.info[k], h, powers[k]), (&mut beams.energy[k], g, powers[2 + k])] {
            let n = dir.norm();
            if p > 0.0 && n > 0.0 {
                *dst = dir * Complex64::new(p.sqrt() / n, 0.0);
            }
        }
    }
    Some(beams)
}

/// Picks a binary schedule from relaxed values. Candidates in order: the
/// stream with the larger `weight * s` (transmit side on ties), the other
/// stream, nobody. Returns the first candidate accepted by `feasible`; the
/// empty schedule is returned without consulting it.
pub fn round_schedule<F>(s_relaxed: [f64; 2], weights: [f64; 2], mut feasible: F) -> [bool; 2]
where
    F: FnMut([bool; 2]) -> bool,
{
    let score = [0, 1].map(|k| weights[k] * s_relaxed[k]);
    let first = if score[1] > score[0] { 1 } else { 0 };
    for k in [first, 1 - first] {
        let mut cand = [false; 2];
        cand[k] = true;
        if feasible(cand) {
            return cand;
        }
    }
    [false; 2]
}

/// Rank-one profiles consistent with the mode, built from the relaxed point.
fn profile_candidates<R: Rng + ?Sized>(
    mode: RisMode,
    pt: &TarcPoint,
    num_randomizations: usize,
    rng: &mut R,
) -> Result<Vec<TarcProfile>, OptimizerError> {
    let m = pt.alpha[0].len();
    let phi = &pt.lifted.phi;
    let mut out = Vec::new();
    match &pt.layout {
        Layout::Split => {
            let ct = rank_one_candidates(&phi[0], num_randomizations, rng)?;
            let cr = rank_one_candidates(&phi[1], num_randomizations, rng)?;
            for (i, (lt, lr)) in ct.iter().zip(&cr).enumerate() {
                let theta_t = lt.map(|z| -z.arg());
                let theta_r = lr.map(|z| -z.arg());
                let renorm = DVector::from_fn(m, |j, _| {
                    let (a, b) = (lt[j].norm_sqr(), lr[j].norm_sqr());
                    if a + b > 1e-12 {
                        a / (a + b)
                    } else {
                        pt.alpha[0][j]
                    }
                });
                let mut amps = vec![renorm];
                if i == 0 {
                    amps.push(pt.alpha[0].clone());
                    amps.push(pt.alpha[0].map(|a| if a >= 0.5 { 1.0 } else { 0.0 }));
                }
                for a in amps {
                    out.push(TarcProfile::new(
                        RisMode::EnergySplitting,
                        a.clone(),
                        a.map(|x| 1.0 - x),
                        theta_t.clone(),
                        theta_r.clone(),
                    )?);
                }
            }
        }
        Layout::Partition(sides) => {
            let members: [Vec<usize>; 2] = Side::BOTH.map(|s| (0..m).filter(|&i| sides[i] == s).collect());
            let sub = |k: usize| {
                let idx = &members[k];
                nalgebra::DMatrix::from_fn(idx.len(), idx.len(), |a, b| phi[k][(idx[a], idx[b])])
            };
            let cands: Vec<Vec<DVector<Complex64>>> = (0..2)
                .map(|k| {
                    if members[k].is_empty() {
                        Ok(vec![DVector::zeros(0); num_randomizations + 1])
                    } else {
                        rank_one_candidates(&sub(k), num_randomizations, rng)
                    }
                })
                .collect::<Result<_, _>>()?;
            let alpha_t = pt.alpha[0].clone();
            let alpha_r = pt.alpha[1].clone();
            for i in 0..=num_randomizations {
                let mut theta = [DVector::zeros(m), DVector::zeros(m)];
                for k in 0..2 {
                    for (a, &j) in members[k].iter().enumerate() {
                        theta[k][j] = -cands[k][i][a].arg();
                    }
                }
                let [theta_t, theta_r] = theta;
                out.push(TarcProfile::new(mode, alpha_t.clone(), alpha_r.clone(), theta_t, theta_r)?);
            }
        }
    }
    Ok(out)
}

/// Fallback profile when no relaxed point exists.
fn fallback_profile(mode: RisMode, m: usize) -> Result<TarcProfile, OptimizerError> {
    Ok(match mode {
        RisMode::EnergySplitting => neutral_profile(m),
        RisMode::Conventional => make_conventional(m)?,
        RisMode::ModeSwitching => {
            let conv = make_conventional(m)?;
            TarcProfile::new(
                RisMode::ModeSwitching,
                conv.alpha(Side::Transmit).clone(),
                conv.alpha(Side::Reflect).clone(),
                DVector::zeros(m),
                DVector::zeros(m),
            )?
        }
    })
}

/// Runs the alternating loop for one slot and returns a decision whose
/// targets hold exactly for the returned coefficients and beams.
pub fn alternating_optimize<R: Rng + ?Sized>(
    slot: &SlotProblem,
    settings: &OptimizerSettings,
    rng: &mut R,
) -> Result<SlotDecision, OptimizerError> {
    slot.validate()?;
    let started = Instant::now();
    let ch = &slot.channels;
    let m = ch.elements();
    let upper = slot.max_weight();
    let mu = settings.mu_scale * (upper + 1.0);

    let mut beams = initial_beams(ch, slot.power_budget, slot.mode)?;
    let mut history = Vec::new();
    let mut current: Option<TarcPoint> = None;
    let mut layout: Option<Layout> = None;
    let mut last: Option<f64> = None;
    let mut converged = false;
    let mut retried = false;
    let mut iterations = 0;

    while iterations < settings.max_ao_iters {
        iterations += 1;
        let tarc = match slot.mode {
            RisMode::ModeSwitching => {
                solve_tarc_scheduling_ms(slot, &beams, mu, settings.max_penalty_iters, settings.tolerance, layout.as_ref())?
                    .solution
            }
            _ => solve_tarc_scheduling_es(slot, &beams)?,
        };
        let Some(pt) = tarc.point else {
            if current.is_none() && !retried {
                // Widen the beams under the starting profile, then retry once.
                retried = true;
                let start = start_profile(slot.mode, m)?.lifted();
                let sca = solve_beamforming_sca(slot, &start, &beams, settings.max_sca_iters, settings.tolerance)?;
                if sca.status == ConicStatus::Optimal {
                    beams = sca.beams;
                    continue;
                }
            }
            break;
        };
        history.push(pt.objective);
        layout = Some(pt.layout.clone());
        let sca = solve_beamforming_sca(slot, &pt.lifted, &beams, settings.max_sca_iters, settings.tolerance)?;
        current = Some(pt);
        if sca.status != ConicStatus::Optimal {
            break;
        }
        beams = sca.beams;
        history.push(sca.objective);
        let obj = sca.objective;
        if obj >= upper * (1.0 - 1e-9) || last.is_some_and(|prev| (obj - prev).abs() < settings.tolerance * upper) {
            converged = true;
            break;
        }
        last = Some(obj);
        if started.elapsed() > settings.deadline {
            break;
        }
    }

    let (candidates, relaxed_s, objective) = match &current {
        Some(pt) => (profile_candidates(slot.mode, pt, settings.num_randomizations, rng)?, pt.s, *history.last().unwrap()),
        None => (vec![fallback_profile(slot.mode, m)?], [0.0; 2], 0.0),
    };

    let best_for = |schedule: [bool; 2]| -> Option<(f64, &TarcProfile)> {
        if (0..2).any(|k| schedule[k] && !slot.active(Side::BOTH[k])) {
            return None;
        }
        candidates
            .iter()
            .filter_map(|c| required_power(slot, c, schedule).map(|p| (p, c)))
            .filter(|(p, _)| *p <= slot.power_budget * (1.0 - POWER_MARGIN))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    };
    let schedule = round_schedule(relaxed_s, slot.weights, |s| best_for(s).is_some());
    let status = if converged { SlotStatus::Optimal } else { SlotStatus::MaxIterations };
    let decision = best_for(schedule).and_then(|(_, profile)| {
        mrt_decision(slot, profile, schedule).map(|b| (b, profile.clone()))
    });
    Ok(match decision {
        Some((beams, tarc)) => SlotDecision {
            schedule,
            beams,
            tarc,
            status,
            objective,
            ao_iterations: iterations,
            history,
            relaxed_schedule: relaxed_s,
        },
        None => SlotDecision {
            schedule: [false; 2],
            beams: Beams::zeros(ch.antennas()),
            tarc: candidates[0].clone(),
            status: SlotStatus::Infeasible,
            objective,
            ao_iterations: iterations,
            history,
            relaxed_schedule: relaxed_s,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{harvested_energy, sample_channel_set, snr, Geometry, Noise};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rounding_order() {
        let all = |_: [bool; 2]| true;
        assert_eq!(round_schedule([0.7, 0.2], [1.0, 1.0], all), [true, false]);
        assert_eq!(round_schedule([0.0, 0.0], [1.0, 1.0], all), [true, false]);
        let mut tried = Vec::new();
        round_schedule([0.5, 0.5], [1.0, 3.0], |s| {
            tried.push(s);
            false
        });
        assert_eq!(tried, vec![[false, true], [true, false]]);
        assert_eq!(round_schedule([0.5, 0.5], [1.0, 1.0], |_| false), [false, false]);
        assert_eq!(round_schedule([0.5, 0.5], [2.0, 2.0], |s| s[1]), [false, true]);
    }

    fn slot(seed: u64, mode: RisMode, weights: [f64; 2]) -> SlotProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Noise { info: [1e-2; 2], energy: [1.0; 2] };
        let ch = sample_channel_set(&Geometry::default(), 8, 4, &noise, &mut rng).unwrap();
        SlotProblem {
            channels: ch,
            weights,
            available: weights.map(|w| w > 0.0),
            gamma_th: 2.0,
            energy_min: 0.01,
            power_budget: 3.0,
            mode,
        }
    }

    #[test]
    fn zero_weights_single_iteration() {
        let s = slot(1, RisMode::EnergySplitting, [0.0, 0.0]);
        let d = alternating_optimize(&s, &OptimizerSettings::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(d.schedule, [false, false]);
        assert_eq!(d.objective, 0.0);
        assert_eq!(d.ao_iterations, 1);
    }

    #[test]
    fn decisions_meet_targets() {
        for mode in [RisMode::EnergySplitting, RisMode::ModeSwitching, RisMode::Conventional] {
            for seed in 0..3 {
                let s = slot(seed, mode, [3.0, 1.0]);
                let d = alternating_optimize(&s, &OptimizerSettings::default(), &mut ChaCha8Rng::seed_from_u64(seed))
                    .unwrap();
                assert_eq!(d.tarc.mode(), mode);
                assert!(d.beams.total_power() <= s.power_budget + 1e-6);
                assert!(!(d.schedule[0] && d.schedule[1]));
                for w in d.history.windows(2) {
                    assert!(w[1] >= w[0] - 1e-6, "{:?}", d.history);
                }
                if d.status == SlotStatus::Infeasible {
                    continue;
                }
                for side in Side::BOTH {
                    let k = side.index();
                    let coef = d.tarc.coefficients(side);
                    let e = harvested_energy(s.channels.energy(side), &coef, &s.channels.g, &d.beams.energy[k]);
                    assert!(e >= s.energy_min - 1e-5);
                    if d.schedule[k] {
                        let v = snr(s.channels.info(side), &coef, &s.channels.g, &d.beams.info[k], s.channels.sigma2_info[k]);
                        assert!(v >= s.gamma_th, "{v}");
                    }
                }
            }
        }
    }
}
