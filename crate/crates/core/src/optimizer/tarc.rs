//! Scheduling and surface-coefficient subproblem for fixed beams.
//!
//! Maximizes `sum_k weight_k s_k` over relaxed schedules `s` and lifted
//! coefficient matrices `phi_t, phi_r`, subject to the SNR and energy targets
//! written as traces against the rank-one forms from [`super::lifted`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::conic::{solve_conic, ConicProblem, ConicStatus, HermitianVar, LinExpr, Relation, ScalarVar, Sense};
use super::lifted::{build_lifted_forms, LiftedForms};
use super::{Beams, OptimizerError, SlotProblem};
use crate::star_ris::{binarity_gap, conventional_side, LiftedProfile, RisMode};
use crate::Side;

/// How elements are shared between the two sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Layout {
    /// Every element splits its energy between both sides.
    Split,
    /// Every element serves exactly one side.
    Partition(Vec<Side>),
}

impl Layout {
    pub fn conventional(m: usize) -> Self {
        Layout::Partition((0..m).map(|i| conventional_side(m, i)).collect())
    }

    /// Element `i` goes to the transmit side iff `alpha_t[i] >= 0.5`.
    pub fn from_alpha(alpha_t: &DVector<f64>) -> Self {
        Layout::Partition(
            alpha_t.iter().map(|&a| if a >= 0.5 { Side::Transmit } else { Side::Reflect }).collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct TarcPoint {
    /// `sum_k weight_k s_k`, without any penalty term.
    pub objective: f64,
    pub s: [f64; 2],
    pub lifted: LiftedProfile,
    pub alpha: [DVector<f64>; 2],
    pub layout: Layout,
}

#[derive(Debug, Clone)]
pub struct TarcSolution {
    pub status: ConicStatus,
    /// Present iff `status` is optimal.
    pub point: Option<TarcPoint>,
}

impl TarcSolution {
    pub fn objective(&self) -> Option<f64> {
        self.point.as_ref().map(|p| p.objective)
    }

    fn failed(status: ConicStatus) -> Self {
        Self { status, point: None }
    }
}

/// Linear penalty `sum_k sum_m cost[k][m] alpha_k[m]` subtracted from the
/// objective.
struct Penalty {
    cost: [DVector<f64>; 2],
}

impl Penalty {
    /// `mu * sum_k g(a0_k, a_k)` with the constant dropped.
    fn quadratic(alpha0_t: &DVector<f64>, mu: f64) -> Self {
        Self { cost: [alpha0_t.map(|a| mu * (1.0 - 2.0 * a)), alpha0_t.map(|a| mu * (2.0 * a - 1.0))] }
    }

    /// Tangent of `sum_m ln(a_m + d) + ln(1 - a_m + d)`, scaled so the
    /// largest cost is `mu`.
    fn logarithmic(alpha0_t: &DVector<f64>, mu: f64) -> Self {
        let d = LOG_PENALTY_OFFSET;
        let slope = alpha0_t.map(|a| 1.0 / (a + d) - 1.0 / (1.0 - a + d));
        let scale = mu / slope.amax().max(1.0);
        Self { cost: [slope.map(|v| 0.5 * scale * v), slope.map(|v| -0.5 * scale * v)] }
    }
}

const LOG_PENALTY_OFFSET: f64 = 1e-3;

/// Solves the subproblem for the given layout.
pub fn solve_tarc_scheduling(
    slot: &SlotProblem,
    forms: &LiftedForms,
    layout: &Layout,
) -> Result<TarcSolution, OptimizerError> {
    solve_inner(slot, forms, layout, None)
}

/// Energy-splitting subproblem (or the conventional layout when the slot
/// is in conventional mode).
pub fn solve_tarc_scheduling_es(slot: &SlotProblem, beams: &Beams) -> Result<TarcSolution, OptimizerError> {
    slot.validate()?;
    let forms = build_lifted_forms(&slot.channels, beams)?;
    let layout = match slot.mode {
        RisMode::Conventional => Layout::conventional(slot.channels.elements()),
        _ => Layout::Split,
    };
    solve_inner(slot, &forms, &layout, None)
}

fn solve_inner(
    slot: &SlotProblem,
    forms: &LiftedForms,
    layout: &Layout,
    penalty: Option<Penalty>,
) -> Result<TarcSolution, OptimizerError> {
    let m = slot.channels.elements();
    let members: [Vec<usize>; 2] = match layout {
        Layout::Split => [(0..m).collect(), (0..m).collect()],
        Layout::Partition(sides) => {
            if sides.len() != m {
                return Err(OptimizerError::InvalidProblem("partition length differs from surface size".into()));
            }
            Side::BOTH.map(|side| (0..m).filter(|&i| sides[i] == side).collect())
        }
    };
    if slot.energy_min > 0.0 && members.iter().any(|v| v.is_empty()) {
        return Ok(TarcSolution::failed(ConicStatus::Infeasible));
    }

    let mut p = ConicProblem::new(Sense::Maximize);
    let blocks: [Option<HermitianVar>; 2] =
        [0, 1].map(|k| (!members[k].is_empty()).then(|| p.add_hermitian_psd(members[k].len())));
    let restrict = |v: &DVector<Complex64>, k: usize| DVector::from_iterator(members[k].len(), members[k].iter().map(|&i| v[i]));

    let mut s_vars: [Option<ScalarVar>; 2] = [None, None];
    for side in Side::BOTH {
        let k = side.index();
        if slot.active(side) && blocks[k].is_some() {
            s_vars[k] = Some(p.add_nonneg(1)[0]);
        }
    }

    let mut objective = LinExpr::new();
    for k in 0..2 {
        if let Some(s) = s_vars[k] {
            objective = objective.scalar(s, slot.weights[k]);
        }
    }
    if let Some(pen) = &penalty {
        let Layout::Split = layout else {
            return Err(OptimizerError::InvalidProblem("penalty needs a split layout".into()));
        };
        for i in 0..m {
            for k in 0..2 {
                let x = blocks[k].expect("split layout has both blocks");
                objective = objective.herm_diag(x, i, -pen.cost[k][i]);
            }
        }
    }
    p.set_objective(objective);

    match s_vars {
        [Some(a), Some(b)] => p.add_constraint(LinExpr::new().scalar(a, 1.0).scalar(b, 1.0), Relation::Le, 1.0),
        [Some(a), None] | [None, Some(a)] => p.add_constraint(LinExpr::new().scalar(a, 1.0), Relation::Le, 1.0),
        [None, None] => {}
    }

    for side in Side::BOTH {
        let k = side.index();
        let Some(x) = blocks[k] else { continue };
        if let Some(s) = s_vars[k] {
            let pv = restrict(&forms.info[k], k);
            let sigma2 = slot.channels.sigma2_info[k];
            p.add_constraint(
                LinExpr::new().herm_quad(x, 1.0 / sigma2, pv).scalar(s, -slot.gamma_th),
                Relation::Ge,
                0.0,
            );
        }
        if slot.energy_min > 0.0 {
            let qv = restrict(&forms.energy[k], k);
            p.add_constraint(LinExpr::new().herm_quad(x, 1.0, qv), Relation::Ge, slot.energy_min);
        }
    }

    match layout {
        Layout::Split => {
            let [Some(xt), Some(xr)] = blocks else { unreachable!() };
            for i in 0..m {
                p.add_constraint(LinExpr::new().herm_diag(xt, i, 1.0).herm_diag(xr, i, 1.0), Relation::Eq, 1.0);
            }
        }
        Layout::Partition(_) => {
            for k in 0..2 {
                if let Some(x) = blocks[k] {
                    for i in 0..members[k].len() {
                        p.add_constraint(LinExpr::new().herm_diag(x, i, 1.0), Relation::Eq, 1.0);
                    }
                }
            }
        }
    }

    let sol = solve_conic(&p)?;
    if sol.status != ConicStatus::Optimal {
        return Ok(TarcSolution::failed(sol.status));
    }

    let s = [0, 1].map(|k| s_vars[k].map_or(0.0, |v| sol.value(v).clamp(0.0, 1.0)));
    let phi = [0, 1].map(|k| {
        let mut full = DMatrix::zeros(m, m);
        if let Some(x) = blocks[k] {
            let h = sol.hermitian(x);
            for (a, &i) in members[k].iter().enumerate() {
                for (b, &j) in members[k].iter().enumerate() {
                    full[(i, j)] = h[(a, b)];
                }
            }
        }
        for i in 0..m {
            full[(i, i)] = Complex64::new(full[(i, i)].re, 0.0);
        }
        full
    });
    let alpha = match layout {
        Layout::Split => {
            let t = DVector::from_fn(m, |i, _| phi[0][(i, i)].re.clamp(0.0, 1.0));
            let r = t.map(|a| 1.0 - a);
            [t, r]
        }
        Layout::Partition(sides) => Side::BOTH.map(|side| DVector::from_fn(m, |i, _| (sides[i] == side) as u8 as f64)),
    };
    let objective = (0..2).map(|k| slot.weights[k] * s[k]).sum();
    Ok(TarcSolution {
        status: ConicStatus::Optimal,
        point: Some(TarcPoint { objective, s, lifted: LiftedProfile { phi }, alpha, layout: layout.clone() }),
    })
}

/// Result of the mode-switching penalty loop.
#[derive(Debug, Clone)]
pub struct MsOutcome {
    /// Best fixed-partition solution.
    pub solution: TarcSolution,
    /// Relaxed energy-splitting solution the penalty loop started from.
    pub relaxed: TarcSolution,
    pub penalty_iterations: usize,
    /// `max_m min(alpha_m, 1 - alpha_m)` when the penalty loop stopped.
    pub binarity_gap: f64,
    pub converged: bool,
}

/// Mode-switching subproblem.
///
/// Runs the penalty loop from the energy-splitting optimum, rounds the
/// amplitudes to a partition, and keeps the best of that partition, the
/// conventional partition and `previous`.
pub fn solve_tarc_scheduling_ms(
    slot: &SlotProblem,
    beams: &Beams,
    mu: f64,
    max_penalty_iters: usize,
    tolerance: f64,
    previous: Option<&Layout>,
) -> Result<MsOutcome, OptimizerError> {
    slot.validate()?;
    let forms = build_lifted_forms(&slot.channels, beams)?;
    let m = slot.channels.elements();
    let relaxed = solve_inner(slot, &forms, &Layout::Split, None)?;
    let Some(start) = &relaxed.point else {
        return Ok(MsOutcome {
            solution: TarcSolution::failed(relaxed.status),
            relaxed,
            penalty_iterations: 0,
            binarity_gap: f64::NAN,
            converged: false,
        });
    };

    let mut alpha = start.alpha[0].clone();
    let mut gap = binarity_gap(&alpha);
    let mut iters = 0;
    // Stage 0 is the quadratic surrogate with a growing weight. When an
    // energy floor binds it stalls with a thin share spread over many
    // elements; stage 1 gathers that share onto few elements and stage 2
    // relinearizes the leftovers around the opposite side.
    for stage in 0..3 {
        let mut stage_iters = 0;
        while gap > tolerance && stage_iters < max_penalty_iters {
            // Break exact ties toward the transmit side so the penalty has a slope.
            let mut a0 = alpha.map(|a| if (a - 0.5).abs() < 1e-6 { 0.5 + 1e-3 } else { a });
            if stage == 2 && stage_iters == 0 {
                a0 = a0.map(|a| if a.min(1.0 - a) > tolerance { 1.0 - a.round() } else { a });
            }
            let pen = match stage {
                0 => Penalty::quadratic(&a0, mu * 2f64.powi(stage_iters as i32)),
                1 => Penalty::logarithmic(&a0, mu),
                _ => Penalty::quadratic(&a0, mu),
            };
            let sol = solve_inner(slot, &forms, &Layout::Split, Some(pen))?;
            stage_iters += 1;
            let Some(pt) = sol.point else { break };
            let moved = (&pt.alpha[0] - &alpha).amax();
            alpha = pt.alpha[0].clone();
            gap = binarity_gap(&alpha);
            if moved < tolerance {
                break;
            }
        }
        iters += stage_iters;
    }

    let mut layouts: Vec<Layout> = Vec::new();
    for l in [Some(Layout::from_alpha(&alpha)), Some(Layout::conventional(m)), previous.cloned()].into_iter().flatten() {
        if matches!(l, Layout::Partition(_)) && !layouts.contains(&l) {
            layouts.push(l);
        }
    }
    let mut best: Option<TarcSolution> = None;
    let mut first_status = None;
    for layout in &layouts {
        let sol = solve_inner(slot, &forms, layout, None)?;
        first_status.get_or_insert(sol.status);
        let better = match (&best, sol.objective()) {
            (_, None) => false,
            (None, Some(_)) => true,
            (Some(b), Some(v)) => v > b.objective().unwrap() + 1e-9 * (1.0 + v.abs()),
        };
        if better {
            best = Some(sol);
        }
    }
    let solution = best.unwrap_or_else(|| TarcSolution::failed(first_status.unwrap_or(ConicStatus::Infeasible)));
    Ok(MsOutcome { solution, relaxed, penalty_iterations: iters, binarity_gap: gap, converged: gap <= tolerance })
}
