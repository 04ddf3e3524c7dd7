//! Cone algebra for the standard-form solver: the product of a nonnegative
//! orthant, second-order cones and real symmetric PSD cones, together with
//! Nesterov-Todd scaling and the Jordan-algebra operations the
//! predictor-corrector iteration needs.

use nalgebra::{DMatrix, DVector};

/// Layout of `K = R+^nonneg x Q^soc[0] x ... x S+^psd[0] x ...`.
///
/// The linear part of a [`Point`] stores the orthant first and then every
/// second-order cone back to back (head first).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct ConeSpec {
    pub nonneg: usize,
    pub soc: Vec<usize>,
    pub psd: Vec<usize>,
}

impl ConeSpec {
    pub fn lin_len(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree, the `nu` in `mu = <x, s> / nu`.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len() + self.psd.iter().sum::<usize>()
    }

    fn soc_ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let mut start = self.nonneg;
        self.soc.iter().map(move |&d| {
            let r = start..start + d;
            start += d;
            r
        })
    }
}

/// An element of the ambient space of [`ConeSpec`].
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Point {
    pub lin: DVector<f64>,
    pub psd: Vec<DMatrix<f64>>,
}

impl Point {
    pub fn zeros(spec: &ConeSpec) -> Self {
        Self {
            lin: DVector::zeros(spec.lin_len()),
            psd: spec.psd.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        }
    }

    /// The Jordan identity `e`.
    pub fn identity(spec: &ConeSpec) -> Self {
        let mut p = Self::zeros(spec);
        p.lin.rows_mut(0, spec.nonneg).fill(1.0);
        for r in spec.soc_ranges() {
            p.lin[r.start] = 1.0;
        }
        for m in &mut p.psd {
            m.fill_with_identity();
        }
        p
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.lin.dot(&other.lin)
            + self
                .psd
                .iter()
                .zip(&other.psd)
                .map(|(a, b)| a.dot(b))
                .sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.lin.axpy(a, &other.lin, 1.0);
        for (m, o) in self.psd.iter_mut().zip(&other.psd) {
            *m += o * a;
        }
    }

    /// Replaces each PSD block by its symmetric part.
    pub fn symmetrize(&mut self) {
        for m in &mut self.psd {
            let t = m.transpose();
            *m += t;
            *m *= 0.5;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            lin: &self.lin * a,
            psd: self.psd.iter().map(|m| m * a).collect(),
        }
    }
}

/// Nesterov-Todd scaling of one second-order cone: symmetric `w` with
/// `w x = w^{-1} s`.
#[derive(Debug, Clone)]
struct SocScaling {
    w: DMatrix<f64>,
    winv: DMatrix<f64>,
}

/// Nesterov-Todd scaling of one PSD block: `R^{-1} X R^{-T} = R^T S R = diag(lambda)`.
#[derive(Debug, Clone)]
struct PsdScaling {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    /// `R R^T`, so that `(W^T W)^{-1} Z = Q Z Q`.
    q: DMatrix<f64>,
}

/// Primal-dual scaling at an interior pair `(x, s)`.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    spec: ConeSpec,
    /// `sqrt(s / x)` on the orthant.
    lp: DVector<f64>,
    soc: Vec<SocScaling>,
    psd: Vec<PsdScaling>,
    /// Scaled point `W x = W^{-T} s`; PSD blocks are diagonal.
    pub lambda: Point,
}

fn soc_det(v: &[f64]) -> f64 {
    v[0] * v[0] - v[1..].iter().map(|t| t * t).sum::<f64>()
}

fn soc_scaling(x: &[f64], s: &[f64]) -> Option<SocScaling> {
    let n = x.len();
    let dx = soc_det(x);
    let ds = soc_det(s);
    if !(dx > 0.0 && ds > 0.0 && x[0] > 0.0 && s[0] > 0.0) {
        return None;
    }
    let (nx, ns) = (dx.sqrt(), ds.sqrt());
    let xb: Vec<f64> = x.iter().map(|v| v / nx).collect();
    let sb: Vec<f64> = s.iter().map(|v| v / ns).collect();
    let inner: f64 = xb.iter().zip(&sb).map(|(a, b)| a * b).sum();
    let gamma = ((1.0 + inner) / 2.0).sqrt();
    // wbar = (sbar + J xbar) / (2 gamma), J-norm one.
    let mut wb = vec![0.0; n];
    wb[0] = (sb[0] + xb[0]) / (2.0 * gamma);
    for i in 1..n {
        wb[i] = (sb[i] - xb[i]) / (2.0 * gamma);
    }
    let beta = (ds / dx).powf(0.25);
    let mut h = DMatrix::zeros(n, n);
    let mut hinv = DMatrix::zeros(n, n);
    h[(0, 0)] = wb[0];
    hinv[(0, 0)] = wb[0];
    let denom = 1.0 + wb[0];
    for i in 1..n {
        h[(0, i)] = wb[i];
        h[(i, 0)] = wb[i];
        hinv[(0, i)] = -wb[i];
        hinv[(i, 0)] = -wb[i];
        for j in 1..n {
            let v = wb[i] * wb[j] / denom + if i == j { 1.0 } else { 0.0 };
            h[(i, j)] = v;
            hinv[(i, j)] = v;
        }
    }
    Some(SocScaling {
        w: h * beta,
        winv: hinv / beta,
    })
}

fn psd_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<(PsdScaling, DVector<f64>)> {
    let lx = x.clone().cholesky()?.l();
    let ls = s.clone().cholesky()?.l();
    let svd = (ls.transpose() * &lx).svd(true, true);
    let u = svd.u?;
    let vt = svd.v_t?;
    let sv = svd.singular_values;
    if sv.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let inv_sqrt = sv.map(|v| 1.0 / v.sqrt());
    let mut r = lx * vt.transpose();
    for (j, mut col) in r.column_iter_mut().enumerate() {
        col *= inv_sqrt[j];
    }
    let mut rinv = u.transpose() * ls.transpose();
    for (i, mut row) in rinv.row_iter_mut().enumerate() {
        row *= inv_sqrt[i];
    }
    let q = &r * r.transpose();
    Some((PsdScaling { r, rinv, q }, sv))
}

impl Scaling {
    /// Returns `None` when `(x, s)` is not strictly interior (numerically).
    pub fn new(spec: &ConeSpec, x: &Point, s: &Point) -> Option<Self> {
        let mut lambda = Point::zeros(spec);
        let mut lp = DVector::zeros(spec.nonneg);
        for i in 0..spec.nonneg {
            let (xi, si) = (x.lin[i], s.lin[i]);
            if !(xi > 0.0 && si > 0.0) {
                return None;
            }
            lp[i] = (si / xi).sqrt();
            lambda.lin[i] = (xi * si).sqrt();
        }
        let mut soc = Vec::with_capacity(spec.soc.len());
        for r in spec.soc_ranges() {
            let sc = soc_scaling(
                x.lin.rows_range(r.clone()).as_slice(),
                s.lin.rows_range(r.clone()).as_slice(),
            )?;
            let l = &sc.w * x.lin.rows_range(r.clone());
            lambda.lin.rows_range_mut(r).copy_from(&l);
            soc.push(sc);
        }
        let mut psd = Vec::with_capacity(spec.psd.len());
        for (k, (xm, sm)) in x.psd.iter().zip(&s.psd).enumerate() {
            let (sc, sv) = psd_scaling(xm, sm)?;
            lambda.psd[k] = DMatrix::from_diagonal(&sv);
            psd.push(sc);
        }
        Some(Self {
            spec: spec.clone(),
            lp,
            soc,
            psd,
            lambda,
        })
    }

    /// `W dx`
    pub fn apply_w(&self, dx: &Point) -> Point {
        let mut out = Point::zeros(&self.spec);
        let n = self.spec.nonneg;
        for i in 0..n {
            out.lin[i] = self.lp[i] * dx.lin[i];
        }
        for (sc, r) in self.soc.iter().zip(self.spec.soc_ranges()) {
            let v = &sc.w * dx.lin.rows_range(r.clone());
            out.lin.rows_range_mut(r).copy_from(&v);
        }
        for (k, sc) in self.psd.iter().enumerate() {
            out.psd[k] = &sc.rinv * &dx.psd[k] * sc.rinv.transpose();
        }
        out
    }

    /// `W^{-T} ds`
    pub fn apply_winv_t(&self, ds: &Point) -> Point {
        let mut out = Point::zeros(&self.spec);
        for i in 0..self.spec.nonneg {
            out.lin[i] = ds.lin[i] / self.lp[i];
        }
        for (sc, r) in self.soc.iter().zip(self.spec.soc_ranges()) {
            let v = &sc.winv * ds.lin.rows_range(r.clone());
            out.lin.rows_range_mut(r).copy_from(&v);
        }
        for (k, sc) in self.psd.iter().enumerate() {
            out.psd[k] = sc.r.transpose() * &ds.psd[k] * &sc.r;
        }
        out
    }

    /// `W^{-1} xi`, mapping a scaled point back to the primal space.
    pub fn apply_winv(&self, xi: &Point) -> Point {
        let mut out = Point::zeros(&self.spec);
        for i in 0..self.spec.nonneg {
            out.lin[i] = xi.lin[i] / self.lp[i];
        }
        for (sc, r) in self.soc.iter().zip(self.spec.soc_ranges()) {
            let v = &sc.winv * xi.lin.rows_range(r.clone());
            out.lin.rows_range_mut(r).copy_from(&v);
        }
        for (k, sc) in self.psd.iter().enumerate() {
            out.psd[k] = &sc.r * &xi.psd[k] * sc.r.transpose();
        }
        out
    }

    /// `(W^T W)^{-1} z`
    pub fn apply_inv_wtw(&self, z: &Point) -> Point {
        let mut out = Point::zeros(&self.spec);
        for i in 0..self.spec.nonneg {
            out.lin[i] = z.lin[i] / (self.lp[i] * self.lp[i]);
        }
        for (sc, r) in self.soc.iter().zip(self.spec.soc_ranges()) {
            let v = &sc.winv * (&sc.winv * z.lin.rows_range(r.clone()));
            out.lin.rows_range_mut(r).copy_from(&v);
        }
        for (k, sc) in self.psd.iter().enumerate() {
            out.psd[k] = &sc.q * &z.psd[k] * &sc.q;
        }
        out
    }

    pub(crate) fn lp_inv_wtw(&self, i: usize) -> f64 {
        1.0 / (self.lp[i] * self.lp[i])
    }

    /// `W^{-2}` restricted to second-order cone `k`, with its range in the linear part.
    pub(crate) fn soc_inv_wtw(&self, k: usize) -> (std::ops::Range<usize>, DMatrix<f64>) {
        let r = self.spec.soc_ranges().nth(k).expect("soc index");
        (r, &self.soc[k].winv * &self.soc[k].winv)
    }

    pub(crate) fn psd_q(&self, k: usize) -> &DMatrix<f64> {
        &self.psd[k].q
    }
}

/// Jordan product `u o v`.
pub(crate) fn jordan_product(spec: &ConeSpec, u: &Point, v: &Point) -> Point {
    let mut out = Point::zeros(spec);
    for i in 0..spec.nonneg {
        out.lin[i] = u.lin[i] * v.lin[i];
    }
    for r in spec.soc_ranges() {
        let us = u.lin.rows_range(r.clone());
        let vs = v.lin.rows_range(r.clone());
        out.lin[r.start] = us.dot(&vs);
        for i in 1..r.len() {
            out.lin[r.start + i] = us[0] * vs[i] + vs[0] * us[i];
        }
    }
    for (k, (a, b)) in u.psd.iter().zip(&v.psd).enumerate() {
        let ab = a * b;
        out.psd[k] = (&ab + ab.transpose()) * 0.5;
    }
    out
}

/// Solves `lambda o xi = d` for `xi`, where `lambda` is a scaled point
/// (diagonal on PSD blocks).
pub(crate) fn jordan_solve(spec: &ConeSpec, lambda: &Point, d: &Point) -> Point {
    let mut out = Point::zeros(spec);
    for i in 0..spec.nonneg {
        out.lin[i] = d.lin[i] / lambda.lin[i];
    }
    for r in spec.soc_ranges() {
        let l = lambda.lin.rows_range(r.clone());
        let dd = d.lin.rows_range(r.clone());
        let det = soc_det(l.as_slice());
        let l1d1: f64 = (1..r.len()).map(|i| l[i] * dd[i]).sum();
        let x0 = (l[0] * dd[0] - l1d1) / det;
        out.lin[r.start] = x0;
        for i in 1..r.len() {
            out.lin[r.start + i] = (dd[i] - x0 * l[i]) / l[0];
        }
    }
    for (k, (lm, dm)) in lambda.psd.iter().zip(&d.psd).enumerate() {
        let n = lm.nrows();
        let o = &mut out.psd[k];
        for j in 0..n {
            for i in 0..n {
                o[(i, j)] = 2.0 * dm[(i, j)] / (lm[(i, i)] + lm[(j, j)]);
            }
        }
    }
    out
}

/// Strict interior test: positive orthant entries, positive SOC heads and
/// determinants, and Cholesky-factorizable PSD blocks.
pub(crate) fn is_interior(spec: &ConeSpec, p: &Point) -> bool {
    (0..spec.nonneg).all(|i| p.lin[i] > 0.0)
        && spec.soc_ranges().all(|r| {
            let v = p.lin.rows_range(r);
            v[0] > 0.0 && soc_det(v.as_slice()) > 0.0
        })
        && p.psd.iter().all(|m| m.iter().all(|v| v.is_finite()) && m.clone().cholesky().is_some())
}

/// Largest `alpha` with `lambda + alpha * delta` in the cone (may be infinite).
pub(crate) fn max_step(spec: &ConeSpec, lambda: &Point, delta: &Point) -> f64 {
    let mut alpha = f64::INFINITY;
    for i in 0..spec.nonneg {
        if delta.lin[i] < 0.0 {
            alpha = alpha.min(-lambda.lin[i] / delta.lin[i]);
        }
    }
    for r in spec.soc_ranges() {
        let l = lambda.lin.rows_range(r.clone());
        let d = delta.lin.rows_range(r.clone());
        alpha = alpha.min(soc_max_step(l.as_slice(), d.as_slice()));
    }
    for (lm, dm) in lambda.psd.iter().zip(&delta.psd) {
        let n = lm.nrows();
        let mut t = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                t[(i, j)] = dm[(i, j)] / (lm[(i, i)] * lm[(j, j)]).sqrt();
            }
        }
        let t = (&t + t.transpose()) * 0.5;
        let emin = t.symmetric_eigenvalues().min();
        if emin < 0.0 {
            alpha = alpha.min(-1.0 / emin);
        }
    }
    alpha
}

fn soc_max_step(l: &[f64], d: &[f64]) -> f64 {
    // f(a) = (l0 + a d0)^2 - |l1 + a d1|^2, f(0) > 0.
    let qa = soc_det(d);
    let qb = 2.0 * (l[0] * d[0] - l[1..].iter().zip(&d[1..]).map(|(x, y)| x * y).sum::<f64>());
    let qc = soc_det(l);
    let mut alpha = f64::INFINITY;
    if d[0] < 0.0 {
        alpha = -l[0] / d[0];
    }
    let roots: Vec<f64> = if qa.abs() < 1e-14 * (qb.abs() + qc.abs()) {
        if qb < 0.0 {
            vec![-qc / qb]
        } else {
            vec![]
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            vec![]
        } else {
            let sq = disc.sqrt();
            // Numerically stable pair.
            let t = -0.5 * (qb + qb.signum() * sq);
            let mut v = Vec::new();
            if t != 0.0 {
                v.push(qc / t);
            }
            if qa != 0.0 {
                v.push(t / qa);
            }
            v
        }
    };
    for r in roots {
        if r > 0.0 {
            alpha = alpha.min(r);
        }
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ConeSpec {
        ConeSpec {
            nonneg: 2,
            soc: vec![3],
            psd: vec![2],
        }
    }

    fn interior_pair() -> (Point, Point) {
        let spec = spec();
        let mut x = Point::zeros(&spec);
        let mut s = Point::zeros(&spec);
        x.lin = DVector::from_vec(vec![0.5, 2.0, 2.0, 0.3, -1.1]);
        s.lin = DVector::from_vec(vec![3.0, 0.1, 1.5, -0.7, 0.2]);
        x.psd[0] = DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.0]);
        s.psd[0] = DMatrix::from_row_slice(2, 2, &[0.7, -0.2, -0.2, 1.3]);
        (x, s)
    }

    #[test]
    fn nt_scaling_maps_both_sides_to_lambda() {
        let spec = spec();
        let (x, s) = interior_pair();
        let w = Scaling::new(&spec, &x, &s).unwrap();
        let a = w.apply_w(&x);
        let b = w.apply_winv_t(&s);
        let mut diff = a.clone();
        diff.axpy(-1.0, &b);
        assert!(diff.norm() < 1e-12, "{diff:?}");
        let mut diff = a;
        diff.axpy(-1.0, &w.lambda);
        assert!(diff.norm() < 1e-12);
        // <x, s> = <lambda, lambda>
        assert!((x.dot(&s) - w.lambda.dot(&w.lambda)).abs() < 1e-12);
    }

    #[test]
    fn scaling_inverses_are_consistent() {
        let spec = spec();
        let (x, s) = interior_pair();
        let w = Scaling::new(&spec, &x, &s).unwrap();
        let back = w.apply_winv(&w.apply_w(&x));
        let mut diff = back;
        diff.axpy(-1.0, &x);
        assert!(diff.norm() < 1e-12);
        // (W^T W)^{-1} s = x
        let mut diff = w.apply_inv_wtw(&s);
        diff.axpy(-1.0, &x);
        assert!(diff.norm() < 1e-11);
    }

    #[test]
    fn jordan_solve_inverts_product() {
        let spec = spec();
        let (x, s) = interior_pair();
        let w = Scaling::new(&spec, &x, &s).unwrap();
        let d = jordan_product(&spec, &w.lambda, &w.apply_w(&s));
        let xi = jordan_solve(&spec, &w.lambda, &d);
        let mut diff = xi;
        diff.axpy(-1.0, &w.apply_w(&s));
        assert!(diff.norm() < 1e-10);
    }

    #[test]
    fn step_to_boundary() {
        let spec = ConeSpec {
            nonneg: 0,
            soc: vec![2],
            psd: vec![],
        };
        let mut l = Point::zeros(&spec);
        l.lin = DVector::from_vec(vec![1.0, 0.0]);
        let mut d = Point::zeros(&spec);
        d.lin = DVector::from_vec(vec![0.0, 1.0]);
        assert!((max_step(&spec, &l, &d) - 1.0).abs() < 1e-12);
        let spec = ConeSpec {
            nonneg: 0,
            soc: vec![],
            psd: vec![2],
        };
        let mut l = Point::zeros(&spec);
        l.psd[0] = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let mut d = Point::zeros(&spec);
        d.psd[0] = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 1.0]));
        assert!((max_step(&spec, &l, &d) - 0.5).abs() < 1e-12);
    }
}
