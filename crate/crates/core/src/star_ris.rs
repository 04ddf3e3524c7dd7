//! Transmission/reflection coefficient profiles and their lifted forms.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::Side;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StarRisError {
    #[error("surface needs at least {min} elements, got {got}")]
    TooFewElements { min: usize, got: usize },
    #[error("length mismatch: {0}")]
    Dimension(String),
    #[error("amplitude {value} at element {index} outside [0, 1]")]
    AmplitudeRange { index: usize, value: f64 },
    #[error("element {index}: amplitudes sum to {sum}, expected 1")]
    Conservation { index: usize, sum: f64 },
    #[error("element {index} is not binary in mode switching")]
    NotBinary { index: usize },
    #[error("element {index} does not follow the fixed conventional partition")]
    NotConventional { index: usize },
    #[error("matrix is not Hermitian PSD (min eigenvalue {0:e})")]
    NotPsd(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RisMode {
    EnergySplitting,
    ModeSwitching,
    Conventional,
}

/// Side owning element `index` in the conventional layout: the first
/// `ceil(m/2)` elements reflect, the rest transmit.
pub fn conventional_side(m: usize, index: usize) -> Side {
    if index < m.div_ceil(2) {
        Side::Reflect
    } else {
        Side::Transmit
    }
}

const CONSERVATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TarcProfile {
    mode: RisMode,
    alpha: [DVector<f64>; 2],
    theta: [DVector<f64>; 2],
}

fn wrap_phase(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl TarcProfile {
    pub fn new(
        mode: RisMode,
        alpha_t: DVector<f64>,
        alpha_r: DVector<f64>,
        theta_t: DVector<f64>,
        theta_r: DVector<f64>,
    ) -> Result<Self, StarRisError> {
        let m = alpha_t.len();
        if [alpha_r.len(), theta_t.len(), theta_r.len()].iter().any(|&n| n != m) {
            return Err(StarRisError::Dimension("all profile vectors need equal length".into()));
        }
        let p = Self {
            mode,
            alpha: [alpha_t, alpha_r],
            theta: [theta_t.map(wrap_phase), theta_r.map(wrap_phase)],
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds a profile from coefficient vectors in the [`Self::to_vector`]
    /// convention. Amplitudes are renormalized per element so both sides sum
    /// to one exactly.
    pub fn from_vectors(
        mode: RisMode,
        l_t: &DVector<Complex64>,
        l_r: &DVector<Complex64>,
    ) -> Result<Self, StarRisError> {
        if l_t.len() != l_r.len() {
            return Err(StarRisError::Dimension("sides differ in length".into()));
        }
        let m = l_t.len();
        let mut alpha_t = DVector::zeros(m);
        for i in 0..m {
            let (a, b) = (l_t[i].norm_sqr(), l_r[i].norm_sqr());
            if (a + b - 1.0).abs() > CONSERVATION_TOL {
                return Err(StarRisError::Conservation { index: i, sum: a + b });
            }
            alpha_t[i] = (a / (a + b)).clamp(0.0, 1.0);
        }
        let alpha_r = alpha_t.map(|a| 1.0 - a);
        let theta_t = l_t.map(|z| -z.arg());
        let theta_r = l_r.map(|z| -z.arg());
        Self::new(mode, alpha_t, alpha_r, theta_t, theta_r)
    }

    pub fn mode(&self) -> RisMode {
        self.mode
    }

    pub fn elements(&self) -> usize {
        self.alpha[0].len()
    }

    pub fn alpha(&self, side: Side) -> &DVector<f64> {
        &self.alpha[side.index()]
    }

    pub fn theta(&self, side: Side) -> &DVector<f64> {
        &self.theta[side.index()]
    }

    pub fn validate(&self) -> Result<(), StarRisError> {
        let m = self.elements();
        if self.mode == RisMode::Conventional && m < 2 {
            return Err(StarRisError::TooFewElements { min: 2, got: m });
        }
        for i in 0..m {
            let (a, b) = (self.alpha[0][i], self.alpha[1][i]);
            for v in [a, b] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(StarRisError::AmplitudeRange { index: i, value: v });
                }
            }
            if (a + b - 1.0).abs() > CONSERVATION_TOL {
                return Err(StarRisError::Conservation { index: i, sum: a + b });
            }
            match self.mode {
                RisMode::EnergySplitting => {}
                RisMode::ModeSwitching => {
                    if a != 0.0 && a != 1.0 {
                        return Err(StarRisError::NotBinary { index: i });
                    }
                }
                RisMode::Conventional => {
                    let owner = conventional_side(m, i);
                    if self.alpha[owner.index()][i] != 1.0 {
                        return Err(StarRisError::NotConventional { index: i });
                    }
                }
            }
        }
        Ok(())
    }

    /// `l` with entries `sqrt(alpha) * exp(-j theta)`.
    pub fn to_vector(&self, side: Side) -> DVector<Complex64> {
        let k = side.index();
        DVector::from_fn(self.elements(), |i, _| {
            Complex64::from_polar(self.alpha[k][i].sqrt(), -self.theta[k][i])
        })
    }

    /// Diagonal of the physical coefficient matrix, the conjugate of
    /// [`Self::to_vector`].
    pub fn coefficients(&self, side: Side) -> DVector<Complex64> {
        self.to_vector(side).map(|z| z.conj())
    }

    pub fn lifted(&self) -> LiftedProfile {
        LiftedProfile { phi: [lift(&self.to_vector(Side::Transmit)), lift(&self.to_vector(Side::Reflect))] }
    }
}

/// `max_m min(alpha_m, 1 - alpha_m)`; zero iff every element is binary.
pub fn binarity_gap(alpha: &DVector<f64>) -> f64 {
    alpha.iter().map(|&a| a.min(1.0 - a)).fold(0.0, f64::max)
}

/// Conventional profile with zero phases.
pub fn make_conventional(m: usize) -> Result<TarcProfile, StarRisError> {
    if m < 2 {
        return Err(StarRisError::TooFewElements { min: 2, got: m });
    }
    let alpha_t = DVector::from_fn(m, |i, _| (conventional_side(m, i) == Side::Transmit) as u8 as f64);
    let alpha_r = alpha_t.map(|a| 1.0 - a);
    TarcProfile::new(RisMode::Conventional, alpha_t, alpha_r, DVector::zeros(m), DVector::zeros(m))
}

pub fn lift(l: &DVector<Complex64>) -> DMatrix<Complex64> {
    l * l.adjoint()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedProfile {
    pub phi: [DMatrix<Complex64>; 2],
}

impl LiftedProfile {
    pub fn side(&self, side: Side) -> &DMatrix<Complex64> {
        &self.phi[side.index()]
    }

    pub fn validate(&self) -> Result<(), StarRisError> {
        let m = self.phi[0].nrows();
        for p in &self.phi {
            if p.shape() != (m, m) {
                return Err(StarRisError::Dimension("lifted blocks must be square and equal".into()));
            }
            check_psd(p, 1e-8)?;
            for i in 0..m {
                if p[(i, i)].im.abs() > 1e-12 {
                    return Err(StarRisError::NotPsd(f64::NAN));
                }
            }
        }
        for i in 0..m {
            let sum = self.phi[0][(i, i)].re + self.phi[1][(i, i)].re;
            if (sum - 1.0).abs() > 1e-6 {
                return Err(StarRisError::Conservation { index: i, sum });
            }
        }
        Ok(())
    }
}

fn check_psd(p: &DMatrix<Complex64>, tol: f64) -> Result<SymmetricEigen<Complex64, nalgebra::Dyn>, StarRisError> {
    if !p.is_square() {
        return Err(StarRisError::Dimension("matrix must be square".into()));
    }
    let herm = (p - p.adjoint()).norm();
    if herm > 1e-10 * p.norm().max(1.0) {
        return Err(StarRisError::NotPsd(f64::NAN));
    }
    let sym = (p + p.adjoint()).map(|z| z * 0.5);
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    if min < -tol * eig.eigenvalues.amax().max(1.0) {
        return Err(StarRisError::NotPsd(min));
    }
    Ok(eig)
}

/// Candidate vectors for rank-one recovery: the scaled principal
/// eigenvector, then `num_randomizations` Gaussian draws with covariance
/// `phi` whose magnitudes are reset to `sqrt(phi[i,i])`. Entry magnitudes
/// are clipped to 1.
pub fn rank_one_candidates<R: Rng + ?Sized>(
    phi: &DMatrix<Complex64>,
    num_randomizations: usize,
    rng: &mut R,
) -> Result<Vec<DVector<Complex64>>, StarRisError> {
    let eig = check_psd(phi, 1e-6)?;
    let m = phi.nrows();
    let clip = |z: Complex64| if z.norm() > 1.0 { z / z.norm() } else { z };
    let mut out = Vec::with_capacity(num_randomizations + 1);
    let top = eig.eigenvalues.imax();
    let lam = eig.eigenvalues[top].max(0.0);
    out.push(eig.eigenvectors.column(top).map(|z| clip(z * lam.sqrt())));

    let root = DVector::from_iterator(m, eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
    let amp = DVector::from_fn(m, |i, _| phi[(i, i)].re.clamp(0.0, 1.0).sqrt());
    for _ in 0..num_randomizations {
        let z = DVector::from_fn(m, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        });
        let scaled = z.zip_map(&root, |a, r| a * r);
        let xi = &eig.eigenvectors * scaled;
        out.push(DVector::from_fn(m, |i, _| {
            let a = xi[i].norm();
            if a > 0.0 {
                xi[i] / a * amp[i]
            } else {
                Complex64::new(amp[i], 0.0)
            }
        }));
    }
    Ok(out)
}

/// Best candidate from [`rank_one_candidates`] under `objective` (larger is
/// better; ties keep the earlier candidate).
pub fn extract_rank_one<R, F>(
    phi: &DMatrix<Complex64>,
    mut objective: F,
    num_randomizations: usize,
    rng: &mut R,
) -> Result<DVector<Complex64>, StarRisError>
where
    R: Rng + ?Sized,
    F: FnMut(&DVector<Complex64>) -> f64,
{
    let mut best: Option<(f64, DVector<Complex64>)> = None;
    for c in rank_one_candidates(phi, num_randomizations, rng)? {
        let v = objective(&c);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, c));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<Complex64> {
        DVector::from_fn(n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    /// Hermitian eigenvalues through the real embedding, independent of the
    /// complex eigen solver used above.
    fn embedded_eigenvalues(p: &DMatrix<Complex64>) -> Vec<f64> {
        let n = p.nrows();
        let r = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let z = p[(i % n, j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let mut ev: Vec<f64> = SymmetricEigen::new(r).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        // Each eigenvalue appears twice in the embedding.
        ev.into_iter().step_by(2).collect()
    }

    #[test]
    fn to_vector_examples() {
        let p = TarcProfile::new(
            RisMode::EnergySplitting,
            DVector::from_vec(vec![0.25, 1.0, 0.0]),
            DVector::from_vec(vec![0.75, 0.0, 1.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.3]),
            DVector::zeros(3),
        )
        .unwrap();
        let l = p.to_vector(Side::Transmit);
        assert!((l[0] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((l[1] - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(l[2].norm(), 0.0);
        let ones = TarcProfile::new(
            RisMode::ModeSwitching,
            DVector::from_element(4, 1.0),
            DVector::zeros(4),
            DVector::zeros(4),
            DVector::zeros(4),
        )
        .unwrap();
        assert_eq!(ones.to_vector(Side::Transmit), DVector::from_element(4, c(1.0, 0.0)));
    }

    #[test]
    fn phases_are_conjugated_and_wrapped() {
        let p = TarcProfile::new(
            RisMode::EnergySplitting,
            DVector::from_element(1, 0.5),
            DVector::from_element(1, 0.5),
            DVector::from_element(1, -0.5),
            DVector::from_element(1, 7.0),
        )
        .unwrap();
        assert!((p.theta(Side::Transmit)[0] - (TAU - 0.5)).abs() < 1e-12);
        assert!((p.theta(Side::Reflect)[0] - (7.0 - TAU)).abs() < 1e-12);
        let l = p.to_vector(Side::Reflect)[0];
        let coef = p.coefficients(Side::Reflect)[0];
        assert!((l - Complex64::from_polar(0.5f64.sqrt(), -7.0)).norm() < 1e-12);
        assert!((coef - l.conj()).norm() < 1e-15);
    }

    #[test]
    fn profile_validation() {
        let v = |x: &[f64]| DVector::from_vec(x.to_vec());
        let z = DVector::zeros(2);
        assert!(matches!(
            TarcProfile::new(RisMode::EnergySplitting, v(&[0.5, 0.2]), v(&[0.5, 0.5]), z.clone(), z.clone()),
            Err(StarRisError::Conservation { index: 1, .. })
        ));
        assert!(matches!(
            TarcProfile::new(RisMode::ModeSwitching, v(&[0.5, 1.0]), v(&[0.5, 0.0]), z.clone(), z.clone()),
            Err(StarRisError::NotBinary { index: 0 })
        ));
        assert!(matches!(
            TarcProfile::new(RisMode::Conventional, v(&[1.0, 0.0]), v(&[0.0, 1.0]), z.clone(), z.clone()),
            Err(StarRisError::NotConventional { index: 0 })
        ));
        assert!(TarcProfile::new(RisMode::EnergySplitting, v(&[1.2, -0.2]), v(&[-0.2, 1.2]), z.clone(), z).is_err());
    }

    #[test]
    fn conventional_layout() {
        let p = make_conventional(2).unwrap();
        assert_eq!(p.alpha(Side::Reflect), &DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(p.alpha(Side::Transmit), &DVector::from_vec(vec![0.0, 1.0]));
        let p = make_conventional(5).unwrap();
        assert_eq!(p.alpha(Side::Reflect).sum(), 3.0);
        assert_eq!(p.alpha(Side::Transmit).sum(), 2.0);
        for i in 0..5 {
            assert_eq!(p.alpha(Side::Transmit)[i] + p.alpha(Side::Reflect)[i], 1.0);
        }
        assert!(make_conventional(1).is_err());
    }

    #[test]
    fn from_vectors_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let m = 7;
            let a = DVector::from_fn(m, |_, _| rng.random::<f64>());
            let p = TarcProfile::new(
                RisMode::EnergySplitting,
                a.clone(),
                a.map(|x| 1.0 - x),
                DVector::from_fn(m, |_, _| rng.random::<f64>() * TAU),
                DVector::from_fn(m, |_, _| rng.random::<f64>() * TAU),
            )
            .unwrap();
            let q = TarcProfile::from_vectors(
                RisMode::EnergySplitting,
                &p.to_vector(Side::Transmit),
                &p.to_vector(Side::Reflect),
            )
            .unwrap();
            assert!((p.to_vector(Side::Transmit) - q.to_vector(Side::Transmit)).norm() < 1e-12);
            assert!((p.to_vector(Side::Reflect) - q.to_vector(Side::Reflect)).norm() < 1e-12);
            let total: f64 = (0..m).map(|i| q.alpha(Side::Transmit)[i] + q.alpha(Side::Reflect)[i]).sum();
            assert!((total - m as f64).abs() <= 1e-12 * m as f64);
            // Lifted diagonal equals the amplitudes.
            let lifted = q.lifted();
            lifted.validate().unwrap();
            for side in Side::BOTH {
                for i in 0..m {
                    assert!((lifted.side(side)[(i, i)].re - q.alpha(side)[i]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn binarity() {
        assert_eq!(binarity_gap(&DVector::from_vec(vec![0.0, 1.0, 1.0])), 0.0);
        assert!((binarity_gap(&DVector::from_vec(vec![0.0, 0.3, 0.9])) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn lift_examples() {
        let l = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let p = lift(&l);
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let l = rand_vec(&mut rng, 6);
            let p = lift(&l);
            let ev = embedded_eigenvalues(&p);
            assert!(ev[1].abs() <= 1e-10 * ev[0]);
            let tr: Complex64 = p.diagonal().sum();
            assert!((tr.re - l.norm_squared()).abs() <= 1e-12 * l.norm_squared());
        }
    }

    #[test]
    fn rank_one_input_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let l = rand_vec(&mut rng, 5);
            let phi = lift(&l);
            let obj = |x: &DVector<Complex64>| -(x - &l).norm();
            let got = extract_rank_one(&phi, obj, 50, &mut rng).unwrap();
            let overlap = got.dotc(&l).norm();
            assert!((overlap - l.norm_squared()).abs() <= 1e-8, "{overlap}");
            // Every candidate is a global rotation of l.
            for cand in rank_one_candidates(&phi, 10, &mut rng).unwrap() {
                assert!((cand.dotc(&l).norm() - l.norm_squared()).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn candidates_are_clipped() {
        let phi = DMatrix::<Complex64>::identity(2, 2) * c(0.5, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = extract_rank_one(&phi, |x| x[0].norm(), 50, &mut rng).unwrap();
        assert!(got[0].norm_sqr() <= 1.0);
        let big = DMatrix::<Complex64>::identity(2, 2) * c(9.0, 0.0);
        for cand in rank_one_candidates(&big, 20, &mut rng).unwrap() {
            assert!(cand.iter().all(|z| z.norm() <= 1.0 + 1e-15));
        }
    }

    #[test]
    fn best_of_set_dominates_principal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let a = rand_vec(&mut rng, 4);
            let b = rand_vec(&mut rng, 4);
            let phi = lift(&a) + lift(&b);
            let h = rand_vec(&mut rng, 4);
            let obj = |x: &DVector<Complex64>| h.dotc(x).norm_sqr();
            let principal = rank_one_candidates(&phi, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            let got = extract_rank_one(&phi, obj, 50, &mut rng).unwrap();
            assert!(obj(&got) >= obj(&principal[0]));
            let rot = Complex64::from_polar(1.0, 1.234);
            assert!((obj(&(&got * rot)) - obj(&got)).abs() <= 1e-10 * obj(&got).max(1.0));
        }
    }

    #[test]
    fn non_psd_is_rejected() {
        let p = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(rank_one_candidates(&p, 3, &mut rng), Err(StarRisError::NotPsd(_))));
    }
}
