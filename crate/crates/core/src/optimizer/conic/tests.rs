use super::*;
use nalgebra::DVector;
use num_complex::Complex64;

fn assert_accurate(sol: &ConicSolution) {
    assert!(sol.is_optimal(), "status {:?}", sol.status);
    assert!(sol.primal_residual <= 1e-7, "pres {}", sol.primal_residual);
    assert!(sol.dual_residual <= 1e-7, "dres {}", sol.dual_residual);
    assert!(sol.relative_gap <= 1e-7, "gap {}", sol.relative_gap);
}

#[test]
fn scalar_lower_bound() {
    let mut p = ConicProblem::new(Sense::Minimize);
    let x = p.add_nonneg(1)[0];
    p.set_objective(LinExpr::new().scalar(x, 1.0));
    p.add_constraint(LinExpr::new().scalar(x, 1.0), Relation::Ge, 3.0);
    let sol = solve_conic(&p).unwrap();
    assert_accurate(&sol);
    assert!((sol.value(x) - 3.0).abs() < 1e-7);
    assert!((sol.objective - 3.0).abs() < 1e-7);
}

#[test]
fn contradictory_bounds_are_infeasible() {
    let mut p = ConicProblem::new(Sense::Minimize);
    let x = p.add_nonneg(1)[0];
    p.set_objective(LinExpr::new().scalar(x, 1.0));
    p.add_constraint(LinExpr::new().scalar(x, 1.0), Relation::Ge, 1.0);
    p.add_constraint(LinExpr::new().scalar(x, 1.0), Relation::Le, 0.0);
    let sol = solve_conic(&p).unwrap();
    assert_eq!(sol.status, ConicStatus::Infeasible);
}

#[test]
fn unbounded_direction_is_reported() {
    let mut p = ConicProblem::new(Sense::Maximize);
    let v = p.add_nonneg(2);
    p.set_objective(LinExpr::new().scalar(v[0], 1.0));
    p.add_constraint(LinExpr::new().scalar(v[0], 1.0).scalar(v[1], -1.0), Relation::Eq, 0.0);
    let sol = solve_conic(&p).unwrap();
    assert_eq!(sol.status, ConicStatus::Unbounded);
}

/// Brute force over 2x2 correlation matrices `[[1, r], [r, 1]]`, `r` in [-1, 1].
fn max_cut_2x2_oracle() -> f64 {
    (0..=2000)
        .map(|k| -1.0 + k as f64 * 1e-3)
        .map(|r| 2.0 * r)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn correlation_matrix_sdp() {
    let mut p = ConicProblem::new(Sense::Maximize);
    let x = p.add_symmetric_psd(2);
    // tr(C X) with C = [[0, 1], [1, 0]] is 2 X[0,1].
    p.set_objective(LinExpr::new().sym_entry(x, 0, 1, 2.0));
    p.add_constraint(LinExpr::new().sym_entry(x, 0, 0, 1.0), Relation::Eq, 1.0);
    p.add_constraint(LinExpr::new().sym_entry(x, 1, 1, 1.0), Relation::Eq, 1.0);
    let sol = solve_conic(&p).unwrap();
    assert_accurate(&sol);
    assert!((sol.objective - max_cut_2x2_oracle()).abs() < 1e-6);
}

#[test]
fn second_order_cone_norm() {
    // minimize t subject to |(u1, u2)| <= t, u1 = 3, u2 = 4.
    let mut p = ConicProblem::new(Sense::Minimize);
    let c = p.add_soc(2);
    p.set_objective(LinExpr::new().scalar(c.head(), 1.0));
    p.add_constraint(LinExpr::new().scalar(c.tail(0), 1.0), Relation::Eq, 3.0);
    p.add_constraint(LinExpr::new().scalar(c.tail(1), 1.0), Relation::Eq, 4.0);
    let sol = solve_conic(&p).unwrap();
    assert_accurate(&sol);
    assert!((sol.objective - 5.0).abs() < 1e-6);
}

#[test]
fn hermitian_rayleigh_quotient() {
    // max v^H X v s.t. tr X = 1 has value |v|^2 at X = v v^H / |v|^2.
    let v = DVector::from_vec(vec![
        Complex64::new(1.0, 2.0),
        Complex64::new(-0.5, 0.25),
        Complex64::new(0.0, -1.0),
    ]);
    let mut p = ConicProblem::new(Sense::Maximize);
    let x = p.add_hermitian_psd(3);
    p.set_objective(LinExpr::new().herm_quad(x, 1.0, v.clone()));
    let mut tr = LinExpr::new();
    for i in 0..3 {
        tr = tr.herm_diag(x, i, 1.0);
    }
    p.add_constraint(tr, Relation::Eq, 1.0);
    let sol = solve_conic(&p).unwrap();
    assert_accurate(&sol);
    assert!((sol.objective - v.norm_squared()).abs() < 1e-6);
    let h = sol.hermitian(x);
    let u = &v / Complex64::new(v.norm(), 0.0);
    let expect = &u * u.adjoint();
    assert!((h - expect).norm() < 1e-4);
}

#[test]
fn complex_phase_sdp_matches_real_embedding() {
    // max Re(X[0,1]) + Re(i X[1,0]... ) expressed as a quadratic form with
    // a complex vector; diag X = 1 forces |X[0,1]| <= 1, optimum 1 + 1 = 2
    // for v = (1, i): v^H X v = 2 + 2 Re(i X[0,1]).
    let v = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]);
    let mut p = ConicProblem::new(Sense::Maximize);
    let x = p.add_hermitian_psd(2);
    p.set_objective(LinExpr::new().herm_quad(x, 1.0, v.clone()));
    p.add_constraint(LinExpr::new().herm_diag(x, 0, 1.0), Relation::Eq, 1.0);
    p.add_constraint(LinExpr::new().herm_diag(x, 1, 1.0), Relation::Eq, 1.0);
    let sol = solve_conic(&p).unwrap();
    assert_accurate(&sol);
    assert!((sol.objective - 4.0).abs() < 1e-6);
    let h = sol.hermitian(x);
    assert!((sol.eval(&LinExpr::new().herm_quad(x, 1.0, v.clone())) - 4.0).abs() < 1e-6);
    // Optimal X = v v^H is rank one with X[0,1] = -i.
    assert!((h[(0, 1)] - Complex64::new(0.0, -1.0)).norm() < 1e-4);
}

#[test]
fn malformed_references_are_rejected() {
    let mut p = ConicProblem::new(Sense::Minimize);
    let x = p.add_hermitian_psd(2);
    p.set_objective(LinExpr::new().herm_quad(x, 1.0, DVector::from_element(3, Complex64::new(1.0, 0.0))));
    assert!(matches!(solve_conic(&p), Err(ConicError::Malformed(_))));

    let mut other = ConicProblem::new(Sense::Minimize);
    let y = other.add_nonneg(3);
    let mut p = ConicProblem::new(Sense::Minimize);
    p.add_nonneg(1);
    p.set_objective(LinExpr::new().scalar(y[2], 1.0));
    assert!(matches!(solve_conic(&p), Err(ConicError::Malformed(_))));
}

#[test]
fn mixed_cones_with_inequalities() {
    // maximize s0 + 2 s1 subject to s0 + s1 <= 1, |u| <= 1 with u = (s0, s1).
    // Optimum on the unit circle intersected with the simplex: s1 = 1, s0 = 0.
    let mut p = ConicProblem::new(Sense::Maximize);
    let s = p.add_nonneg(2);
    let c = p.add_soc(2);
    p.set_objective(LinExpr::new().scalar(s[0], 1.0).scalar(s[1], 2.0));
    p.add_constraint(LinExpr::new().scalar(s[0], 1.0).scalar(s[1], 1.0), Relation::Le, 1.0);
    p.add_constraint(LinExpr::new().scalar(c.head(), 1.0), Relation::Le, 1.0);
    p.add_constraint(LinExpr::new().scalar(c.tail(0), 1.0).scalar(s[0], -1.0), Relation::Eq, 0.0);
    p.add_constraint(LinExpr::new().scalar(c.tail(1), 1.0).scalar(s[1], -1.0), Relation::Eq, 0.0);
    let sol = solve_conic(&p).unwrap();
    assert_accurate(&sol);
    assert!((sol.objective - 2.0).abs() < 1e-6);
}
