//! Homogeneous self-dual primal-dual interior-point method for
//!
//! ```text
//! minimize c.x  subject to  A x = b,  x in K
//! ```
//!
//! with Nesterov-Todd scaling and Mehrotra predictor-corrector steps. The
//! Newton system is reduced to the `m x m` Schur complement
//! `A (W^T W)^{-1} A^T`, which keeps PSD blocks cheap when the number of
//! equality rows is small. PSD coefficients are held as sparse entries plus
//! symmetric low-rank terms so that the Schur complement never forms dense
//! `n^2 x n^2` operators.

use nalgebra::{DMatrix, DVector};

use super::cones::{is_interior, jordan_product, jordan_solve, max_step, ConeSpec, Point, Scaling};

/// Symmetric coefficient matrix `A = sum entries + sum_k w_k v_k v_k^T`.
///
/// An off-diagonal entry `(i, j, v)` sets both `A[i,j]` and `A[j,i]` to `v`.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct SymCoef {
    pub entries: Vec<(usize, usize, f64)>,
    pub low_rank: Vec<(f64, DVector<f64>)>,
}

impl SymCoef {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.low_rank.is_empty()
    }

    pub fn dot(&self, x: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.entries {
            acc += if i == j {
                v * x[(i, i)]
            } else {
                v * (x[(i, j)] + x[(j, i)])
            };
        }
        for (w, v) in &self.low_rank {
            acc += w * (x * v).dot(v);
        }
        acc
    }

    /// `out += a * A`
    pub fn add_to(&self, a: f64, out: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += a * v;
            if i != j {
                out[(j, i)] += a * v;
            }
        }
        for (w, v) in &self.low_rank {
            out.ger(a * w, v, v, 1.0);
        }
    }

    /// `Q A Q` for symmetric `Q`.
    pub fn congruence(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let n = q.nrows();
        let mut out = DMatrix::zeros(n, n);
        for &(i, j, v) in &self.entries {
            let qi = q.column(i);
            if i == j {
                out.ger(v, &qi, &qi, 1.0);
            } else {
                let qj = q.column(j);
                out.ger(v, &qi, &qj, 1.0);
                out.ger(v, &qj, &qi, 1.0);
            }
        }
        for (w, v) in &self.low_rank {
            let qv = q * v;
            out.ger(*w, &qv, &qv, 1.0);
        }
        out
    }

    fn scale(&mut self, a: f64) {
        for e in &mut self.entries {
            e.2 *= a;
        }
        for (w, _) in &mut self.low_rank {
            *w *= a;
        }
    }
}

/// One equality row `<A_i, x> = b_i`.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Row {
    pub lin: Vec<(usize, f64)>,
    pub psd: Vec<(usize, SymCoef)>,
}

impl Row {
    pub fn dot(&self, x: &Point) -> f64 {
        self.lin.iter().map(|&(i, v)| v * x.lin[i]).sum::<f64>()
            + self.psd.iter().map(|(k, c)| c.dot(&x.psd[*k])).sum::<f64>()
    }

    /// `out += a * A_i`
    pub fn add_to(&self, a: f64, out: &mut Point) {
        for &(i, v) in &self.lin {
            out.lin[i] += a * v;
        }
        for (k, c) in &self.psd {
            c.add_to(a, &mut out.psd[*k]);
        }
    }

    fn norm(&self, spec: &ConeSpec) -> f64 {
        let mut p = Point::zeros(spec);
        self.add_to(1.0, &mut p);
        p.norm()
    }

    fn scale(&mut self, a: f64) {
        for e in &mut self.lin {
            e.1 *= a;
        }
        for (_, c) in &mut self.psd {
            c.scale(a);
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct StdProblem {
    pub spec: ConeSpec,
    pub c: Point,
    pub rows: Vec<Row>,
    pub b: DVector<f64>,
}

impl StdProblem {
    fn apply_a(&self, x: &Point) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.dot(x)))
    }

    fn apply_at(&self, y: &DVector<f64>) -> Point {
        let mut out = Point::zeros(&self.spec);
        for (r, &yi) in self.rows.iter().zip(y.iter()) {
            if yi != 0.0 {
                r.add_to(yi, &mut out);
            }
        }
        out
    }

    /// `A (W^T W)^{-1} A^T`
    fn schur(&self, w: &Scaling) -> DMatrix<f64> {
        let m = self.rows.len();
        let socs: Vec<_> = (0..self.spec.soc.len()).map(|k| w.soc_inv_wtw(k)).collect();
        let cols: Vec<Point> = self
            .rows
            .iter()
            .map(|row| {
                let mut p = Point::zeros(&self.spec);
                for &(i, v) in &row.lin {
                    if i < self.spec.nonneg {
                        p.lin[i] += v * w.lp_inv_wtw(i);
                    }
                }
                for (range, winv2) in &socs {
                    let mut sub = DVector::zeros(range.len());
                    let mut any = false;
                    for &(i, v) in &row.lin {
                        if range.contains(&i) {
                            sub[i - range.start] += v;
                            any = true;
                        }
                    }
                    if any {
                        let t = winv2 * sub;
                        let mut dst = p.lin.rows_range_mut(range.clone());
                        dst += t;
                    }
                }
                for (k, c) in &row.psd {
                    p.psd[*k] += c.congruence(w.psd_q(*k));
                }
                p
            })
            .collect();
        let mut h = DMatrix::zeros(m, m);
        for j in 0..m {
            for i in j..m {
                let v = self.rows[i].dot(&cols[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StdStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub(crate) struct StdSolution {
    pub status: StdStatus,
    pub x: Point,
    pub iterations: usize,
    /// `||A x - b|| / (1 + ||b||)` on the unscaled data.
    pub primal_residual: f64,
    /// `||A^T y + s - c|| / (1 + ||c||)` on the unscaled data.
    pub dual_residual: f64,
    /// `|c.x - b.y| / (1 + |c.x| + |b.y|)`.
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Accepted as optimal when the iteration stalls.
    pub reduced_tolerance: f64,
    pub infeasibility_tolerance: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 120,
            tolerance: 1e-9,
            reduced_tolerance: 1e-7,
            infeasibility_tolerance: 1e-8,
        }
    }
}

struct Factor {
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl Factor {
    fn new(mut h: DMatrix<f64>) -> Option<Self> {
        let m = h.nrows();
        if m == 0 {
            return Some(Self { chol: None });
        }
        let scale = h.diagonal().iter().fold(0.0_f64, |a, &v| a.max(v.abs())).max(1e-300);
        let mut reg = 1e-14 * scale;
        for _ in 0..8 {
            if let Some(c) = h.clone().cholesky() {
                return Some(Self { chol: Some(c) });
            }
            for i in 0..m {
                h[(i, i)] += reg;
            }
            reg *= 100.0;
        }
        None
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match &self.chol {
            Some(c) => c.solve(rhs),
            None => rhs.clone(),
        }
    }
}

struct Direction {
    dx: Point,
    dy: DVector<f64>,
    ds: Point,
    dtau: f64,
    dkappa: f64,
}

struct Residuals {
    rp: DVector<f64>,
    rd: Point,
    rg: f64,
}

pub(crate) fn solve(problem: &StdProblem, settings: &IpmSettings) -> StdSolution {
    // Equilibrate rows and normalize data magnitudes.
    let mut scaled = problem.clone();
    let mut row_scale = vec![1.0; problem.rows.len()];
    for (i, row) in scaled.rows.iter_mut().enumerate() {
        let n = row.norm(&problem.spec);
        if n > 0.0 {
            row.scale(1.0 / n);
            scaled.b[i] /= n;
            row_scale[i] = n;
        }
    }
    let bscale = scaled.b.norm().max(1.0);
    scaled.b /= bscale;
    let cscale = scaled.c.norm().max(1.0);
    scaled.c = scaled.c.scaled(1.0 / cscale);

    let (status, x, y, s, iterations) = run(&scaled, settings);

    let x = x.scaled(bscale);
    let s = s.scaled(cscale);
    let mut y = y * cscale;
    for (yi, n) in y.iter_mut().zip(&row_scale) {
        *yi /= n;
    }
    let ax = problem.apply_a(&x);
    let primal_residual = (&ax - &problem.b).norm() / (1.0 + problem.b.norm());
    let mut rd = problem.apply_at(&y);
    rd.axpy(1.0, &s);
    rd.axpy(-1.0, &problem.c);
    let dual_residual = rd.norm() / (1.0 + problem.c.norm());
    let pobj = problem.c.dot(&x);
    let dobj = problem.b.dot(&y);
    let relative_gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    StdSolution {
        status,
        x,
        iterations,
        primal_residual,
        dual_residual,
        relative_gap,
    }
}

fn residuals(p: &StdProblem, x: &Point, y: &DVector<f64>, s: &Point, tau: f64, kappa: f64) -> Residuals {
    let rp = &p.b * tau - p.apply_a(x);
    let mut rd = p.c.scaled(tau);
    rd.axpy(-1.0, &p.apply_at(y));
    rd.axpy(-1.0, s);
    let rg = kappa + p.c.dot(x) - p.b.dot(y);
    Residuals { rp, rd, rg }
}

type RunOutput = (StdStatus, Point, DVector<f64>, Point, usize);

fn run(p: &StdProblem, settings: &IpmSettings) -> RunOutput {
    let spec = &p.spec;
    let m = p.rows.len();
    let nu = spec.degree() as f64;
    let mut x = Point::identity(spec);
    let mut s = Point::identity(spec);
    let mut y = DVector::zeros(m);
    let mut tau = 1.0_f64;
    let mut kappa = 1.0_f64;
    let e = Point::identity(spec);

    let bnorm = 1.0 + p.b.norm();
    let cnorm = 1.0 + p.c.norm();

    let mut best: Option<(f64, Point, DVector<f64>, Point)> = None;
    let mut iterations = 0;

    for iter in 0..settings.max_iterations {
        iterations = iter;
        let res = residuals(p, &x, &y, &s, tau, kappa);
        let pres = res.rp.norm() / tau / bnorm;
        let dres = res.rd.norm() / tau / cnorm;
        let pobj = p.c.dot(&x) / tau;
        let dobj = p.b.dot(&y) / tau;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let comp = x.dot(&s) / (tau * tau) / (1.0 + pobj.abs() + dobj.abs());
        let err = pres.max(dres).max(gap).max(comp);
        if err <= settings.tolerance {
            return (StdStatus::Optimal, x.scaled(1.0 / tau), &y / tau, s.scaled(1.0 / tau), iter);
        }
        if best.as_ref().is_none_or(|b| err < b.0) {
            best = Some((err, x.scaled(1.0 / tau), &y / tau, s.scaled(1.0 / tau)));
        }
        // Infeasibility certificates.
        let by = p.b.dot(&y);
        if by > 0.0 {
            let mut aty_s = p.apply_at(&y);
            aty_s.axpy(1.0, &s);
            if aty_s.norm() <= settings.infeasibility_tolerance * by {
                return (StdStatus::PrimalInfeasible, x, y, s, iter);
            }
        }
        let cx = p.c.dot(&x);
        if cx < 0.0 {
            let ax = p.apply_a(&x);
            if ax.norm() <= settings.infeasibility_tolerance * (-cx) {
                return (StdStatus::DualInfeasible, x, y, s, iter);
            }
        }

        let Some(w) = Scaling::new(spec, &x, &s) else {
            break;
        };
        let Some(factor) = Factor::new(p.schur(&w)) else {
            break;
        };
        let mu = (x.dot(&s) + tau * kappa) / (nu + 1.0);

        // Right-hand side of the tau-column, shared by both solves.
        let c_tilde = w.apply_inv_wtw(&p.c);
        let dy2 = factor.solve(&(&p.b + p.apply_a(&c_tilde)));
        let mut dx2 = w.apply_inv_wtw(&p.apply_at(&dy2));
        dx2.axpy(-1.0, &c_tilde);

        let newton = |eta: f64, d_s: &Point, d_k: f64| -> Direction {
            let xi = jordan_solve(spec, &w.lambda, d_s);
            let mut z1 = w.apply_winv(&xi);
            z1.axpy(-eta, &w.apply_inv_wtw(&res.rd));
            let dy1 = factor.solve(&(&res.rp * eta - p.apply_a(&z1)));
            let mut dx1 = w.apply_inv_wtw(&p.apply_at(&dy1));
            dx1.axpy(1.0, &z1);
            let num = -eta * res.rg - d_k / tau - p.c.dot(&dx1) + p.b.dot(&dy1);
            let den = p.c.dot(&dx2) - p.b.dot(&dy2) - kappa / tau;
            let dtau = num / den;
            let mut dx = dx1;
            dx.axpy(dtau, &dx2);
            dx.symmetrize();
            let dy = dy1 + &dy2 * dtau;
            let mut ds = res.rd.scaled(eta);
            ds.axpy(-1.0, &p.apply_at(&dy));
            ds.axpy(dtau, &p.c);
            ds.symmetrize();
            let dkappa = (d_k - kappa * dtau) / tau;
            Direction {
                dx,
                dy,
                ds,
                dtau,
                dkappa,
            }
        };
        let step_len = |d: &Direction| -> (f64, Point, Point) {
            let wdx = w.apply_w(&d.dx);
            let wds = w.apply_winv_t(&d.ds);
            let mut a = max_step(spec, &w.lambda, &wdx).min(max_step(spec, &w.lambda, &wds));
            if d.dtau < 0.0 {
                a = a.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-kappa / d.dkappa);
            }
            (a, wdx, wds)
        };

        // Predictor.
        let lam_sq = jordan_product(spec, &w.lambda, &w.lambda);
        let aff = newton(1.0, &lam_sq.scaled(-1.0), -tau * kappa);
        let (alpha_aff, wdx, wds) = step_len(&aff);
        let sigma = (1.0 - alpha_aff.min(1.0)).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let mut d_s = lam_sq.scaled(-1.0);
        d_s.axpy(-1.0, &jordan_product(spec, &wdx, &wds));
        d_s.axpy(sigma * mu, &e);
        let d_k = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        let dir = newton(1.0 - sigma, &d_s, d_k);
        let (alpha_max, _, _) = step_len(&dir);
        let mut alpha = (0.99 * alpha_max).min(1.0);
        // Rounding can push a long step out of the cone; back off until both
        // iterates are strictly interior.
        loop {
            if !alpha.is_finite() || alpha < 1e-12 {
                break;
            }
            let mut x_new = x.clone();
            x_new.axpy(alpha, &dir.dx);
            let mut s_new = s.clone();
            s_new.axpy(alpha, &dir.ds);
            if is_interior(spec, &x_new) && is_interior(spec, &s_new) {
                x = x_new;
                s = s_new;
                break;
            }
            alpha *= 0.5;
        }
        if !alpha.is_finite() || alpha < 1e-12 {
            break;
        }
        y += &dir.dy * alpha;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        if !(tau > 0.0 && kappa > 0.0) || !x.lin.iter().all(|v| v.is_finite()) {
            break;
        }
        // Keep the embedding normalized so that diverging certificates stay representable.
        let norm = (x.norm() + s.norm() + y.norm() + tau + kappa) / (2.0 * nu + 2.0);
        if norm > 1e8 {
            let f = 1.0 / norm;
            x = x.scaled(f);
            s = s.scaled(f);
            y *= f;
            tau *= f;
            kappa *= f;
        }
    }
    match best {
        Some((err, x, y, s)) if err <= settings.reduced_tolerance => {
            (StdStatus::Optimal, x, y, s, iterations)
        }
        _ => (
            StdStatus::NumericalFailure,
            x.scaled(1.0 / tau.max(1e-300)),
            &y / tau.max(1e-300),
            s.scaled(1.0 / tau.max(1e-300)),
            iterations,
        ),
    }
}
