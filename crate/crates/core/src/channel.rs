//! Geometry-driven channel sampling and link budgets.
//!
//! All links run through the surface: BS -> surface (`g`), then surface ->
//! each user. Entries have deterministic magnitude `sqrt((1/d)^alpha)` and a
//! uniform random phase.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::Side;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("pathloss exponent must be finite and non-negative, got {0}")]
    BadExponent(f64),
    #[error("{0} is not on the {1:?} side of the surface")]
    WrongHalfPlane(&'static str, Side),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("noise variance must be positive, got {0}")]
    BadNoise(f64),
}

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Node placement and pathloss exponents.
///
/// The surface lies on the line `y = ris.y`. Transmission-side users sit
/// above it (`y > ris.y`), reflection-side users below.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub bs: Position,
    pub ris: Position,
    pub eu_r: Position,
    pub iu_r: Position,
    pub eu_t: Position,
    pub iu_t: Position,
    pub exponent_info: f64,
    pub exponent_energy: f64,
    pub exponent_bs_ris: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            bs: Position::new(0.0, 0.0),
            ris: Position::new(8.0, 0.0),
            eu_r: Position::new(10.0, -2.0),
            iu_r: Position::new(12.0, -2.0),
            eu_t: Position::new(10.0, 2.0),
            iu_t: Position::new(12.0, 2.0),
            exponent_info: 2.2,
            exponent_energy: 2.0,
            exponent_bs_ris: 2.2,
        }
    }
}

impl Geometry {
    pub fn info_user(&self, side: Side) -> Position {
        match side {
            Side::Transmit => self.iu_t,
            Side::Reflect => self.iu_r,
        }
    }

    pub fn energy_user(&self, side: Side) -> Position {
        match side {
            Side::Transmit => self.eu_t,
            Side::Reflect => self.eu_r,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        for a in [self.exponent_info, self.exponent_energy, self.exponent_bs_ris] {
            if !(a.is_finite() && a >= 0.0) {
                return Err(ChannelError::BadExponent(a));
            }
        }
        let d = self.bs.distance(&self.ris);
        if !(d > 0.0) {
            return Err(ChannelError::NonPositiveDistance(d));
        }
        let users = [
            ("iu_t", self.iu_t, Side::Transmit),
            ("eu_t", self.eu_t, Side::Transmit),
            ("iu_r", self.iu_r, Side::Reflect),
            ("eu_r", self.eu_r, Side::Reflect),
        ];
        for (name, p, side) in users {
            let d = self.ris.distance(&p);
            if !(d > 0.0) {
                return Err(ChannelError::NonPositiveDistance(d));
            }
            let above = p.y > self.ris.y;
            let below = p.y < self.ris.y;
            let ok = match side {
                Side::Transmit => above,
                Side::Reflect => below,
            };
            if !ok {
                return Err(ChannelError::WrongHalfPlane(name, side));
            }
        }
        Ok(())
    }
}

/// Receiver noise variances, linear scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub info: [f64; 2],
    pub energy: [f64; 2],
}

impl Default for Noise {
    fn default() -> Self {
        Self { info: [1.0; 2], energy: [1.0; 2] }
    }
}

/// One slot's channels. Vectors are indexed by [`Side::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS -> surface, `M x N_t`.
    pub g: DMatrix<Complex64>,
    /// Surface -> information user.
    pub f: [DVector<Complex64>; 2],
    /// Surface -> energy user.
    pub u: [DVector<Complex64>; 2],
    pub sigma2_info: [f64; 2],
    /// Carried for completeness; harvested energy ignores noise.
    pub sigma2_energy: [f64; 2],
}

impl ChannelSet {
    pub fn elements(&self) -> usize {
        self.g.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.g.ncols()
    }

    pub fn info(&self, side: Side) -> &DVector<Complex64> {
        &self.f[side.index()]
    }

    pub fn energy(&self, side: Side) -> &DVector<Complex64> {
        &self.u[side.index()]
    }
}

pub fn path_loss(d: f64, alpha: f64) -> Result<f64, ChannelError> {
    if !(d > 0.0) {
        return Err(ChannelError::NonPositiveDistance(d));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(ChannelError::BadExponent(alpha));
    }
    Ok(d.recip().powf(alpha))
}

fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.random::<f64>() * TAU)
}

fn sample_link<R: Rng + ?Sized>(m: usize, gain: f64, rng: &mut R) -> DVector<Complex64> {
    let amp = gain.sqrt();
    DVector::from_iterator(m, (0..m).map(|_| random_phase(rng) * amp))
}

/// Draws one block-fading realization. Draw order is fixed: `g` row by row,
/// then `f_t`, `f_r`, `u_t`, `u_r`.
pub fn sample_channel_set<R: Rng + ?Sized>(
    geom: &Geometry,
    m: usize,
    n_t: usize,
    noise: &Noise,
    rng: &mut R,
) -> Result<ChannelSet, ChannelError> {
    if m == 0 || n_t == 0 {
        return Err(ChannelError::Dimension(format!("m = {m}, n_t = {n_t}")));
    }
    geom.validate()?;
    for s in noise.info.iter().chain(&noise.energy) {
        if !(*s > 0.0 && s.is_finite()) {
            return Err(ChannelError::BadNoise(*s));
        }
    }
    let g_amp = path_loss(geom.bs.distance(&geom.ris), geom.exponent_bs_ris)?.sqrt();
    let mut g = DMatrix::zeros(m, n_t);
    for i in 0..m {
        for j in 0..n_t {
            g[(i, j)] = random_phase(rng) * g_amp;
        }
    }
    let mut f = Vec::with_capacity(2);
    for side in Side::BOTH {
        let d = geom.ris.distance(&geom.info_user(side));
        f.push(sample_link(m, path_loss(d, geom.exponent_info)?, rng));
    }
    let mut u = Vec::with_capacity(2);
    for side in Side::BOTH {
        let d = geom.ris.distance(&geom.energy_user(side));
        u.push(sample_link(m, path_loss(d, geom.exponent_energy)?, rng));
    }
    let [f_t, f_r]: [_; 2] = f.try_into().unwrap();
    let [u_t, u_r]: [_; 2] = u.try_into().unwrap();
    Ok(ChannelSet {
        g,
        f: [f_t, f_r],
        u: [u_t, u_r],
        sigma2_info: noise.info,
        sigma2_energy: noise.energy,
    })
}

/// `diag(side_channel^H) * g`.
pub fn cascade(
    side_channel: &DVector<Complex64>,
    g: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>, ChannelError> {
    if side_channel.len() != g.nrows() {
        return Err(ChannelError::Dimension(format!(
            "side channel has {} entries, g has {} rows",
            side_channel.len(),
            g.nrows()
        )));
    }
    let mut out = g.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= side_channel[i].conj();
    }
    Ok(out)
}

/// `h^H diag(tarc) g x`.
pub fn effective_gain(
    h: &DVector<Complex64>,
    tarc: &DVector<Complex64>,
    g: &DMatrix<Complex64>,
    x: &DVector<Complex64>,
) -> Complex64 {
    assert_eq!(h.len(), g.nrows(), "channel length must equal surface size");
    assert_eq!(tarc.len(), g.nrows(), "coefficient length must equal surface size");
    assert_eq!(x.len(), g.ncols(), "beam length must equal antenna count");
    let gx = g * x;
    (0..h.len()).map(|m| h[m].conj() * tarc[m] * gx[m]).sum()
}

pub fn snr(
    f: &DVector<Complex64>,
    tarc: &DVector<Complex64>,
    g: &DMatrix<Complex64>,
    w: &DVector<Complex64>,
    sigma2: f64,
) -> f64 {
    assert!(sigma2 > 0.0, "noise variance must be positive");
    effective_gain(f, tarc, g, w).norm_sqr() / sigma2
}

pub fn harvested_energy(
    u: &DVector<Complex64>,
    tarc: &DVector<Complex64>,
    g: &DMatrix<Complex64>,
    v: &DVector<Complex64>,
) -> f64 {
    effective_gain(u, tarc, g, v).norm_sqr()
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

    #[test]
    fn path_loss_values() {
        assert_eq!(path_loss(1.0, 2.2).unwrap(), 1.0);
        assert!((path_loss(10.0, 2.0).unwrap() - 0.01).abs() < 1e-15);
        // Independent: exp(-alpha * ln d) with d = sqrt(20).
        let expect = (-2.2 * 20f64.sqrt().ln()).exp();
        assert!((path_loss(20f64.sqrt(), 2.2).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.03706).abs() < 1e-5);
        assert!(path_loss(0.0, 2.0).is_err());
        assert!(path_loss(-1.0, 2.0).is_err());
    }

    #[test]
    fn path_loss_decreasing() {
        let mut prev = f64::INFINITY;
        for k in 1..100 {
            let v = path_loss(k as f64 * 0.37, 2.2).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn default_geometry_is_valid() {
        Geometry::default().validate().unwrap();
        let mut g = Geometry::default();
        g.iu_t.y = -1.0;
        assert!(matches!(g.validate(), Err(ChannelError::WrongHalfPlane("iu_t", _))));
        let mut g = Geometry::default();
        g.bs = g.ris;
        assert!(g.validate().is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let geom = Geometry::default();
        let a = sample_channel_set(&geom, 8, 4, &Noise::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_channel_set(&geom, 8, 4, &Noise::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.g.shape(), (8, 4));
    }

    #[test]
    fn entry_magnitudes_follow_geometry() {
        let geom = Geometry::default();
        let ch = sample_channel_set(&geom, 16, 3, &Noise::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        // RIS (8,0) -> EU_t (10,2): d^2 = 8, alpha = 2 => |h| = 1/sqrt(8).
        let expect = 8f64.sqrt().recip();
        assert!((expect - 0.35355).abs() < 1e-5);
        for z in ch.energy(Side::Transmit).iter() {
            assert!((z.norm() - expect).abs() < 1e-12);
        }
        let g_expect = (8f64).powf(-2.2).sqrt();
        for z in ch.g.iter() {
            assert!((z.norm() - g_expect).abs() < 1e-12);
        }
        let iu_r = 20f64.powf(-1.1).sqrt();
        for z in ch.info(Side::Reflect).iter() {
            assert!((z.norm() - iu_r).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_phase_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| {
                let z = random_phase(&mut rng);
                z.im.atan2(z.re).rem_euclid(TAU)
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - std::f64::consts::PI).abs() < 0.1, "{mean}");
    }

    #[test]
    fn cascade_examples() {
        let g = DMatrix::from_element(1, 1, c(2.0, 0.0));
        let one = DVector::from_element(1, c(1.0, 0.0));
        assert_eq!(cascade(&one, &g).unwrap()[(0, 0)], c(2.0, 0.0));
        let f = DVector::from_element(1, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2));
        let out = cascade(&f, &g).unwrap()[(0, 0)];
        assert!((out - c(0.0, -2.0)).norm() < 1e-15);
        let eye = DMatrix::<Complex64>::identity(3, 3);
        let ones = DVector::from_element(3, c(1.0, 0.0));
        assert_eq!(cascade(&ones, &eye).unwrap(), eye);
        assert!(cascade(&ones, &DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn scalar_link_budgets() {
        let one = DVector::from_element(1, c(1.0, 0.0));
        let g = DMatrix::from_element(1, 1, c(1.0, 0.0));
        let w = DVector::from_element(1, c(3f64.sqrt(), 0.0));
        assert!((snr(&one, &one, &g, &w, 1.0) - 3.0).abs() < 1e-14);
        assert_eq!(snr(&one, &one, &g, &DVector::zeros(1), 1.0), 0.0);
        let v = DVector::from_element(1, c(2.0, 0.0));
        assert!((harvested_energy(&one, &one, &g, &v) - 4.0).abs() < 1e-14);
        assert_eq!(harvested_energy(&one, &DVector::zeros(1), &g, &v), 0.0);
    }

    #[test]
    fn budgets_ignore_global_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (m, n) = (6, 3);
            let u = rand_vec(&mut rng, m);
            let t = rand_vec(&mut rng, m);
            let g = DMatrix::from_fn(m, n, |_, _| c(rng.random::<f64>(), rng.random::<f64>()));
            let v = rand_vec(&mut rng, n);
            let rot = Complex64::from_polar(1.0, rng.random::<f64>() * TAU);
            let base = harvested_energy(&u, &t, &g, &v);
            let rv = harvested_energy(&u, &t, &g, &(&v * rot));
            assert!((rv - base).abs() <= 1e-12 * base);
            let ru = snr(&(&u * rot), &t, &g, &v, 0.5);
            assert!((ru - base / 0.5).abs() <= 1e-10 * base / 0.5);
        }
    }
}
