//! Quadratic forms of the link budgets in the lifted coefficient variable.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{Beams, OptimizerError};
use crate::channel::{cascade, ChannelSet};
use crate::Side;

/// Cascaded beam responses `p_k = diag(f_k^H) G w_k` and
/// `q_k = diag(u_k^H) G v_k`, so that `snr_k = l_k^H p_k p_k^H l_k / sigma^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedForms {
    pub info: [DVector<Complex64>; 2],
    pub energy: [DVector<Complex64>; 2],
}

impl LiftedForms {
    pub fn info_matrix(&self, side: Side) -> DMatrix<Complex64> {
        let p = &self.info[side.index()];
        p * p.adjoint()
    }

    pub fn energy_matrix(&self, side: Side) -> DMatrix<Complex64> {
        let q = &self.energy[side.index()];
        q * q.adjoint()
    }
}

pub fn build_lifted_forms(ch: &ChannelSet, beams: &Beams) -> Result<LiftedForms, OptimizerError> {
    let mut info = Vec::with_capacity(2);
    let mut energy = Vec::with_capacity(2);
    for side in Side::BOTH {
        let k = side.index();
        for b in [&beams.info[k], &beams.energy[k]] {
            if b.len() != ch.antennas() {
                return Err(OptimizerError::InvalidProblem("beam length differs from antenna count".into()));
            }
        }
        info.push(cascade(ch.info(side), &ch.g)? * &beams.info[k]);
        energy.push(cascade(ch.energy(side), &ch.g)? * &beams.energy[k]);
    }
    let [i_t, i_r]: [_; 2] = info.try_into().unwrap();
    let [e_t, e_r]: [_; 2] = energy.try_into().unwrap();
    Ok(LiftedForms { info: [i_t, i_r], energy: [e_t, e_r] })
}

/// `D^H phi D` for a cascade `D`, giving the beam-domain gain matrix.
pub fn beam_gain(d: &DMatrix<Complex64>, phi: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let g = d.adjoint() * phi * d;
    (&g + g.adjoint()).map(|z| z * 0.5)
}
