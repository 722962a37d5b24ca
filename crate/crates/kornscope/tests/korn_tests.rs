//! Korn-constant estimates against dense eigendecomposition oracles, plus
//! the contracts the estimator and the counterexample construction promise.

mod common;

use common::{complement_basis, dense, rel_diff, smallest_pencil_eig};
use kornscope::distance::DistanceField;
use kornscope::domain::RasterDomain;
use kornscope::field::{
    lp_cellwise_max, symmetric_part, DiffRule, FieldSpace,
};
use kornscope::generate::{rasterize, DomainSpec};
use kornscope::grid::Cell;
use kornscope::john::{ball_end_cell_list, ball_end_cells, BallEnd};
use kornscope::korn::{
    build_counterexample_field, check_counterexample, default_interior_cube, estimate_korn,
    korn_lower_bound_from_end, KornMode,
};
use kornscope::report::Bound;

/// Dense smallest pencil eigenvalue of (E^T E, G^T G) on the complement of
/// the constants and the mean-rotation functional: the standard p = 2
/// quotient, so K_2 = lambda^{-1/2}.
fn dense_korn_p2(domain: &RasterDomain) -> f64 {
    let space = FieldSpace::full(domain);
    let e = dense(&space.strain_matrix(DiffRule::OneSided));
    let g = dense(&space.gradient_matrix(DiffRule::OneSided));
    let a = e.transpose() * &e;
    let b = g.transpose() * &g;
    let mut constraints = space.constant_fields();
    constraints.extend(space.rotation_constraints(DiffRule::OneSided));
    let basis = complement_basis(&constraints, space.ndofs());
    let lambda = smallest_pencil_eig(&a, &b, &basis);
    lambda.powf(-0.5)
}

#[test]
fn square_p2_matches_dense_oracle() {
    let domain = rasterize(&DomainSpec::Square, 16).unwrap();
    let oracle = dense_korn_p2(&domain);
    let est = estimate_korn(&domain, 2.0, KornMode::Standard, None, None, 0).unwrap();
    assert!(est.converged, "eigensolve did not converge");
    let rel = rel_diff(est.estimate.value, oracle);
    assert!(
        rel <= 1e-6,
        "square K_2 {} vs dense {} (rel {rel:.3e})",
        est.estimate.value,
        oracle
    );
}

#[test]
fn disk_p2_matches_dense_oracle() {
    let domain = rasterize(&DomainSpec::Disk, 16).unwrap();
    let oracle = dense_korn_p2(&domain);
    let est = estimate_korn(&domain, 2.0, KornMode::Standard, None, None, 0).unwrap();
    assert!(est.converged, "eigensolve did not converge");
    let rel = rel_diff(est.estimate.value, oracle);
    assert!(
        rel <= 1e-6,
        "disk K_2 {} vs dense {} (rel {rel:.3e})",
        est.estimate.value,
        oracle
    );
}

#[test]
fn fixed_cube_p2_matches_dense_oracle_on_square() {
    let domain = rasterize(&DomainSpec::Square, 12).unwrap();
    let dist = DistanceField::compute(&domain).unwrap();
    let cube = default_interior_cube(&domain, &dist).unwrap();

    let space = FieldSpace::full(&domain);
    let dim = space.dim();
    let e = dense(&space.strain_matrix(DiffRule::OneSided));
    let g = dense(&space.gradient_matrix(DiffRule::OneSided));
    // Rows of the gradient restricted to cube cells, densely.
    let mut gq = g.clone();
    let grid = space.grid().clone();
    for r in 0..gq.nrows() {
        let cell = grid.cell(space.dof_cells()[r / (dim * dim)] as usize);
        if !cube.contains(cell, dim) {
            gq.row_mut(r).fill(0.0);
        }
    }
    let a = e.transpose() * &e + gq.transpose() * &gq;
    let b = g.transpose() * &g;
    let basis = complement_basis(&space.constant_fields(), space.ndofs());
    let oracle = smallest_pencil_eig(&a, &b, &basis).powf(-0.5);

    let est = estimate_korn(&domain, 2.0, KornMode::FixedCube, Some(cube), None, 0).unwrap();
    assert!(est.converged, "eigensolve did not converge");
    let rel = rel_diff(est.estimate.value, oracle);
    assert!(
        rel <= 1e-6,
        "square K_hat_2 {} vs dense {} (rel {rel:.3e})",
        est.estimate.value,
        oracle
    );
}

#[test]
fn estimates_are_scale_invariant() {
    let domain = rasterize(&DomainSpec::LShape, 16).unwrap();
    let g = domain.grid();
    let scaled_grid = kornscope::grid::Grid::new2d(
        g.nx,
        g.ny,
        2.0 * g.h,
        [2.0 * g.origin[0], 2.0 * g.origin[1]],
    );
    let scaled = RasterDomain::new(scaled_grid, domain.mask().to_vec()).unwrap();

    // The quotient is dilation invariant; doubling h scales both operator
    // grams by the same exact power of two.
    let k1 = estimate_korn(&domain, 2.0, KornMode::Standard, None, None, 0).unwrap();
    let k2 = estimate_korn(&scaled, 2.0, KornMode::Standard, None, None, 0).unwrap();
    assert!(
        rel_diff(k1.estimate.value, k2.estimate.value) <= 1e-12,
        "p=2 scale drift: {} vs {}",
        k1.estimate.value,
        k2.estimate.value
    );

    let a1 = estimate_korn(&domain, 3.0, KornMode::Standard, None, None, 7).unwrap();
    let a2 = estimate_korn(&scaled, 3.0, KornMode::Standard, None, None, 7).unwrap();
    assert!(
        rel_diff(a1.estimate.value, a2.estimate.value) <= 1e-12,
        "p=3 scale drift: {} vs {}",
        a1.estimate.value,
        a2.estimate.value
    );
}

#[test]
fn p2_constants_are_at_least_one() {
    // |eps(u)|_F <= |Du|_F pointwise, so the quotient never drops below 1.
    for spec in [DomainSpec::Square, DomainSpec::Disk] {
        let domain = rasterize(&spec, 16).unwrap();
        let est = estimate_korn(&domain, 2.0, KornMode::Standard, None, None, 0).unwrap();
        assert!(
            est.estimate.value >= 1.0 - 1e-9,
            "{}: K_2 = {} below 1",
            spec.id(),
            est.estimate.value
        );
    }
}

#[test]
fn ascent_value_is_the_ratio_of_its_witness() {
    let domain = rasterize(&DomainSpec::Square, 16).unwrap();
    let p = 3.0;
    let sol = estimate_korn(&domain, p, KornMode::Standard, None, None, 0).unwrap();
    assert_eq!(sol.estimate.bound, Bound::Lower);

    // Recompute ||Du||_p / ||eps(u)||_p in the entrywise-max convention
    // from the returned field and the public differential operators.
    let space = FieldSpace::full(&domain);
    let dim = space.dim();
    let meas = space.cell_measure();
    let grad = space.gradient_entries(&sol.field, DiffRule::OneSided);
    let eps = symmetric_part(&grad, dim);
    let num = lp_cellwise_max(&grad, dim * dim, p, meas);
    let den = lp_cellwise_max(&eps, dim * dim, p, meas);
    let ratio = num / den;
    assert!(
        rel_diff(ratio, sol.estimate.value) <= 1e-12,
        "reported {} but witness ratio is {ratio}",
        sol.estimate.value
    );
}

/// Ball centered on the corridor midpoint at `neck_x`, radius twice the
/// local inradius, with its end cells.
fn neck_ball(domain: &RasterDomain, dist: &DistanceField, neck_x: f64) -> (BallEnd, Vec<usize>) {
    let g = domain.grid();
    let x0 = g.locate([0.5, 0.5, 0.0]).unwrap();
    let neck = g.locate([neck_x, 0.5, 0.0]).unwrap();
    let r = 2.0 * dist.rho_cell(neck);
    let ball = ball_end_cells(domain, neck, r, x0).unwrap();
    let list = ball_end_cell_list(domain, neck, r, x0).unwrap();
    (ball, list)
}

#[test]
fn counterexample_contract_holds_on_rooms() {
    let spec = DomainSpec::Rooms { neck: 0.125, count: 4 };
    let domain = rasterize(&spec, 96).unwrap();
    let dist = DistanceField::compute(&domain).unwrap();
    let (ball, list) = neck_ball(&domain, &dist, 4.25);
    let field = build_counterexample_field(&domain, &ball, &list).unwrap();
    assert!(field.sign_positive);
    assert!(field.lower_bound_certified(), "c_tilde = {}", field.c_tilde);

    let check = check_counterexample(&domain, &field);
    let h = domain.grid().h;
    assert!(
        check.max_dv <= check.dv_bound,
        "|Dv| = {} exceeds 3 + 5h/r = {}",
        check.max_dv,
        check.dv_bound
    );
    assert!(check.max_dv_off_end <= 1e-12, "Dv leaks off the end: {}", check.max_dv_off_end);
    // Far from the ball the cutoff is identically one and v is linear, so
    // the gradient equals the fixed rotation exactly.
    assert!(
        check.max_dv_minus_rotation_far <= 1e-12,
        "far-field gradient deviates: {}",
        check.max_dv_minus_rotation_far
    );
    assert!(
        check.kappa_sum_weighted.abs() <= 1e-10 * check.omega_measure,
        "mean rotation of u not cancelled: {}",
        check.kappa_sum_weighted
    );
    assert!(h > 0.0);
}

#[test]
fn end_lower_bound_stays_below_the_p2_estimate() {
    let spec = DomainSpec::Rooms { neck: 0.125, count: 4 };
    let domain = rasterize(&spec, 64).unwrap();
    let dist = DistanceField::compute(&domain).unwrap();
    let (ball, list) = neck_ball(&domain, &dist, 4.25);
    let field = build_counterexample_field(&domain, &ball, &list).unwrap();
    let lower = korn_lower_bound_from_end(&field, 2.0).unwrap();
    let est = estimate_korn(&domain, 2.0, KornMode::Standard, None, None, 0).unwrap();
    assert!(
        lower.value <= est.estimate.value,
        "lower bound {} above the two-sided estimate {}",
        lower.value,
        est.estimate.value
    );
}

#[test]
fn interior_cube_sits_inside_the_domain() {
    let domain = rasterize(&DomainSpec::LShape, 32).unwrap();
    let dist = DistanceField::compute(&domain).unwrap();
    let cube = default_interior_cube(&domain, &dist).unwrap();
    assert!(cube.side >= 1);
    let dim = domain.dim();
    for idx in 0..domain.grid().len() {
        let c: Cell = domain.grid().cell(idx);
        if cube.contains(c, dim) {
            assert!(domain.is_true(idx), "cube cell {c:?} outside the domain");
        }
    }
}
