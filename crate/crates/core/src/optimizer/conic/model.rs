//! Modeling layer over the standard-form interior-point solver.
//!
//! A [`ConicProblem`] declares variable blocks (nonnegative scalars,
//! second-order cones, real symmetric PSD blocks and complex Hermitian PSD
//! blocks), a linear objective and linear constraints with `=`, `<=` or `>=`.
//! Hermitian blocks are solved through the real embedding
//! `X = A + iB  ->  [[A, -B], [B, A]]`; inequality rows receive a slack.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::cones::{ConeSpec, Point};
use super::ipm::{self, IpmSettings, Row, StdProblem, StdStatus, SymCoef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum ScalarSlot {
    Nonneg(usize),
    Soc { cone: usize, index: usize },
}

/// A real scalar variable: either a nonnegative scalar or one coordinate of
/// a second-order cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScalarVar(ScalarSlot);

/// A second-order cone `{(t, u) : |u| <= t}` of dimension `1 + tail_len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocVar {
    cone: usize,
    dim: usize,
}

impl SocVar {
    pub fn head(&self) -> ScalarVar {
        ScalarVar(ScalarSlot::Soc {
            cone: self.cone,
            index: 0,
        })
    }

    pub fn tail(&self, i: usize) -> ScalarVar {
        assert!(i + 1 < self.dim, "cone tail index out of range");
        ScalarVar(ScalarSlot::Soc {
            cone: self.cone,
            index: i + 1,
        })
    }

    pub fn tail_len(&self) -> usize {
        self.dim - 1
    }
}

/// Real symmetric PSD matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymmetricVar {
    block: usize,
    n: usize,
}

/// Complex Hermitian PSD matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianVar {
    block: usize,
    n: usize,
}

impl HermitianVar {
    pub fn dim(&self) -> usize {
        self.n
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Term {
    Scalar(ScalarVar, f64),
    SymEntry(SymmetricVar, usize, usize, f64),
    HermDiag(HermitianVar, usize, f64),
    HermReEntry(HermitianVar, usize, usize, f64),
    HermQuad(HermitianVar, f64, DVector<Complex64>),
}

/// Affine expression over the variables of one problem.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    terms: Vec<Term>,
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scalar(mut self, v: ScalarVar, coef: f64) -> Self {
        self.terms.push(Term::Scalar(v, coef));
        self
    }

    /// `coef * X[i, j]` on a real symmetric block.
    pub fn sym_entry(mut self, x: SymmetricVar, i: usize, j: usize, coef: f64) -> Self {
        self.terms.push(Term::SymEntry(x, i, j, coef));
        self
    }

    /// `coef * X[i, i]` on a Hermitian block.
    pub fn herm_diag(mut self, x: HermitianVar, i: usize, coef: f64) -> Self {
        self.terms.push(Term::HermDiag(x, i, coef));
        self
    }

    /// `coef * Re X[i, j]` on a Hermitian block.
    pub fn herm_re_entry(mut self, x: HermitianVar, i: usize, j: usize, coef: f64) -> Self {
        self.terms.push(Term::HermReEntry(x, i, j, coef));
        self
    }

    /// `weight * v^H X v = weight * tr((v v^H) X)` on a Hermitian block.
    pub fn herm_quad(mut self, x: HermitianVar, weight: f64, v: DVector<Complex64>) -> Self {
        self.terms.push(Term::HermQuad(x, weight, v));
        self
    }

    /// `Re{a^H z}` where `z` is packed as `(re, im)` pairs in the tail of
    /// `cone`, starting at tail position `2 * offset`.
    pub fn re_inner(mut self, cone: &SocVar, offset: usize, a: &DVector<Complex64>, coef: f64) -> Self {
        for (k, ak) in a.iter().enumerate() {
            self.terms.push(Term::Scalar(cone.tail(2 * (offset + k)), coef * ak.re));
            self.terms.push(Term::Scalar(cone.tail(2 * (offset + k) + 1), coef * ak.im));
        }
        self
    }

    pub fn add(mut self, other: LinExpr) -> Self {
        self.terms.extend(other.terms);
        self.constant += other.constant;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Constraint {
    expr: LinExpr,
    relation: Relation,
    rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PsdKind {
    Symmetric(usize),
    Hermitian(usize),
}

impl PsdKind {
    fn real_dim(self) -> usize {
        match self {
            PsdKind::Symmetric(n) => n,
            PsdKind::Hermitian(n) => 2 * n,
        }
    }
}

/// A linear conic program in the modeling form described at module level.
///
/// Problems are plain data; solving never mutates them, so independent
/// instances may be solved from several threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    sense: Sense,
    nonneg: usize,
    socs: Vec<usize>,
    psd: Vec<PsdKind>,
    objective: LinExpr,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConicError {
    #[error("malformed conic problem: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Solver output. Variable values are only meaningful when the status is
/// [`ConicStatus::Optimal`].
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: ConicStatus,
    /// Objective value in the problem's own sense (including the constant).
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    nonneg: Vec<f64>,
    socs: Vec<Vec<f64>>,
    psd: Vec<DMatrix<f64>>,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == ConicStatus::Optimal
    }

    pub fn value(&self, v: ScalarVar) -> f64 {
        match v.0 {
            ScalarSlot::Nonneg(i) => self.nonneg[i],
            ScalarSlot::Soc { cone, index } => self.socs[cone][index],
        }
    }

    pub fn symmetric(&self, x: SymmetricVar) -> DMatrix<f64> {
        self.psd[x.block].clone()
    }

    /// Hermitian matrix recovered from the real embedding (its `J`-symmetric part).
    pub fn hermitian(&self, x: HermitianVar) -> DMatrix<Complex64> {
        let y = &self.psd[x.block];
        let n = x.n;
        DMatrix::from_fn(n, n, |i, j| {
            Complex64::new(
                0.5 * (y[(i, j)] + y[(n + i, n + j)]),
                0.5 * (y[(n + i, j)] - y[(i, n + j)]),
            )
        })
    }

    /// Evaluates an expression at the returned point.
    pub fn eval(&self, e: &LinExpr) -> f64 {
        let mut acc = e.constant;
        for t in &e.terms {
            acc += match t {
                Term::Scalar(v, c) => c * self.value(*v),
                Term::SymEntry(x, i, j, c) => c * self.psd[x.block][(*i, *j)],
                Term::HermDiag(x, i, c) => c * self.hermitian(*x)[(*i, *i)].re,
                Term::HermReEntry(x, i, j, c) => c * self.hermitian(*x)[(*i, *j)].re,
                Term::HermQuad(x, w, v) => {
                    let h = self.hermitian(*x);
                    w * (v.adjoint() * h * v)[(0, 0)].re
                }
            };
        }
        acc
    }
}

impl ConicProblem {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            nonneg: 0,
            socs: Vec::new(),
            psd: Vec::new(),
            objective: LinExpr::new(),
            constraints: Vec::new(),
        }
    }

    /// `count` nonnegative scalars.
    pub fn add_nonneg(&mut self, count: usize) -> Vec<ScalarVar> {
        let start = self.nonneg;
        self.nonneg += count;
        (start..self.nonneg).map(|i| ScalarVar(ScalarSlot::Nonneg(i))).collect()
    }

    /// Second-order cone with a head and `tail_len` tail coordinates.
    pub fn add_soc(&mut self, tail_len: usize) -> SocVar {
        self.socs.push(tail_len + 1);
        SocVar {
            cone: self.socs.len() - 1,
            dim: tail_len + 1,
        }
    }

    pub fn add_symmetric_psd(&mut self, n: usize) -> SymmetricVar {
        self.psd.push(PsdKind::Symmetric(n));
        SymmetricVar {
            block: self.psd.len() - 1,
            n,
        }
    }

    pub fn add_hermitian_psd(&mut self, n: usize) -> HermitianVar {
        self.psd.push(PsdKind::Hermitian(n));
        HermitianVar {
            block: self.psd.len() - 1,
            n,
        }
    }

    pub fn set_objective(&mut self, e: LinExpr) {
        self.objective = e;
    }

    pub fn add_constraint(&mut self, expr: LinExpr, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { expr, relation, rhs });
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    fn check_term(&self, t: &Term) -> Result<(), ConicError> {
        let bad = |m: &str| Err(ConicError::Malformed(m.to_string()));
        match t {
            Term::Scalar(ScalarVar(ScalarSlot::Nonneg(i)), c) => {
                if *i >= self.nonneg {
                    return bad("nonnegative variable out of range");
                }
                if !c.is_finite() {
                    return bad("non-finite coefficient");
                }
            }
            Term::Scalar(ScalarVar(ScalarSlot::Soc { cone, index }), c) => {
                if *cone >= self.socs.len() || *index >= self.socs[*cone] {
                    return bad("cone coordinate out of range");
                }
                if !c.is_finite() {
                    return bad("non-finite coefficient");
                }
            }
            Term::SymEntry(x, i, j, c) => {
                if self.psd.get(x.block) != Some(&PsdKind::Symmetric(x.n)) || *i >= x.n || *j >= x.n {
                    return bad("symmetric block reference out of range");
                }
                if !c.is_finite() {
                    return bad("non-finite coefficient");
                }
            }
            Term::HermDiag(x, i, c) | Term::HermReEntry(x, i, _, c) => {
                if self.psd.get(x.block) != Some(&PsdKind::Hermitian(x.n)) || *i >= x.n {
                    return bad("hermitian block reference out of range");
                }
                if let Term::HermReEntry(_, _, j, _) = t {
                    if *j >= x.n {
                        return bad("hermitian block reference out of range");
                    }
                }
                if !c.is_finite() {
                    return bad("non-finite coefficient");
                }
            }
            Term::HermQuad(x, w, v) => {
                if self.psd.get(x.block) != Some(&PsdKind::Hermitian(x.n)) {
                    return bad("hermitian block reference out of range");
                }
                if v.len() != x.n {
                    return bad("quadratic-form vector length does not match block dimension");
                }
                if !w.is_finite() || v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return bad("non-finite coefficient");
                }
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConicError> {
        for t in &self.objective.terms {
            self.check_term(t)?;
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() || !c.expr.constant.is_finite() {
                return Err(ConicError::Malformed("non-finite right-hand side".into()));
            }
            for t in &c.expr.terms {
                self.check_term(t)?;
            }
        }
        if self.socs.iter().any(|&d| d == 0) {
            return Err(ConicError::Malformed("empty second-order cone".into()));
        }
        Ok(())
    }

    fn compile(&self) -> StdProblem {
        let slacks = self
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let spec = ConeSpec {
            nonneg: self.nonneg + slacks,
            soc: self.socs.clone(),
            psd: self.psd.iter().map(|k| k.real_dim()).collect(),
        };
        let soc_offsets: Vec<usize> = self
            .socs
            .iter()
            .scan(spec.nonneg, |acc, &d| {
                let o = *acc;
                *acc += d;
                Some(o)
            })
            .collect();
        let lin_index = |v: &ScalarVar| match v.0 {
            ScalarSlot::Nonneg(i) => i,
            ScalarSlot::Soc { cone, index } => soc_offsets[cone] + index,
        };

        let to_row = |e: &LinExpr| -> Row {
            let mut row = Row::default();
            let mut psd: Vec<SymCoef> = vec![SymCoef::default(); self.psd.len()];
            for t in &e.terms {
                match t {
                    Term::Scalar(v, c) => row.lin.push((lin_index(v), *c)),
                    Term::SymEntry(x, i, j, c) => {
                        let v = if i == j { *c } else { 0.5 * c };
                        psd[x.block].entries.push((*i, *j, v));
                    }
                    Term::HermDiag(x, i, c) => {
                        let n = x.n;
                        psd[x.block].entries.push((*i, *i, 0.5 * c));
                        psd[x.block].entries.push((n + i, n + i, 0.5 * c));
                    }
                    Term::HermReEntry(x, i, j, c) => {
                        let n = x.n;
                        let v = if i == j { 0.5 * c } else { 0.25 * c };
                        psd[x.block].entries.push((*i, *j, v));
                        psd[x.block].entries.push((n + i, n + j, v));
                    }
                    Term::HermQuad(x, w, v) => {
                        let n = x.n;
                        let c1 = DVector::from_fn(2 * n, |k, _| if k < n { v[k].re } else { v[k - n].im });
                        let c2 = DVector::from_fn(2 * n, |k, _| if k < n { -v[k].im } else { v[k - n].re });
                        psd[x.block].low_rank.push((0.5 * w, c1));
                        psd[x.block].low_rank.push((0.5 * w, c2));
                    }
                }
            }
            row.psd = psd
                .into_iter()
                .enumerate()
                .filter(|(_, c)| !c.is_empty())
                .collect();
            row
        };

        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut c = Point::zeros(&spec);
        to_row(&self.objective).add_to(sign, &mut c);

        let mut rows = Vec::with_capacity(self.constraints.len());
        let mut b = DVector::zeros(self.constraints.len());
        let mut slack = self.nonneg;
        for (i, con) in self.constraints.iter().enumerate() {
            let mut row = to_row(&con.expr);
            match con.relation {
                Relation::Eq => {}
                Relation::Le => {
                    row.lin.push((slack, 1.0));
                    slack += 1;
                }
                Relation::Ge => {
                    row.lin.push((slack, -1.0));
                    slack += 1;
                }
            }
            b[i] = con.rhs - con.expr.constant;
            rows.push(row);
        }
        StdProblem { spec, c, rows, b }
    }
}

/// Solves a [`ConicProblem`] with the built-in interior-point method.
///
/// On [`ConicStatus::Optimal`] the relative primal residual, dual residual and
/// duality gap are all at most `1e-7` (normally `1e-9`).
pub fn solve_conic(problem: &ConicProblem) -> Result<ConicSolution, ConicError> {
    problem.validate()?;
    let std = problem.compile();
    let sol = ipm::solve(&std, &IpmSettings::default());
    let status = match sol.status {
        StdStatus::Optimal => ConicStatus::Optimal,
        StdStatus::PrimalInfeasible => ConicStatus::Infeasible,
        StdStatus::DualInfeasible => ConicStatus::Unbounded,
        StdStatus::NumericalFailure => ConicStatus::NumericalFailure,
    };
    let nonneg = sol.x.lin.as_slice()[..problem.nonneg].to_vec();
    let mut socs = Vec::with_capacity(problem.socs.len());
    let mut off = std.spec.nonneg;
    for &d in &problem.socs {
        socs.push(sol.x.lin.as_slice()[off..off + d].to_vec());
        off += d;
    }
    let psd: Vec<DMatrix<f64>> = sol
        .x
        .psd
        .iter()
        .map(|m| (m + m.transpose()) * 0.5)
        .collect();
    let mut out = ConicSolution {
        status,
        objective: f64::NAN,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        relative_gap: sol.relative_gap,
        nonneg,
        socs,
        psd,
    };
    if status == ConicStatus::Optimal {
        out.objective = out.eval(&problem.objective);
    }
    Ok(out)
}
