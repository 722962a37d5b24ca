//! Divergence-equation and inf-sup solvers against dense oracles: SVD for
//! the inf-sup constant, a Cholesky-backed KKT solve for the p = 2
//! minimizer, and a nullspace count for the structural adjoint kernel.

mod common;

use common::{dense, inv_sqrt, rel_diff, sv_ascending};
use kornscope::diveq::{default_test_load, infsup_constant, solve_divergence, AdjointKernel};
use kornscope::domain::RasterDomain;
use kornscope::field::FieldSpace;
use kornscope::generate::{rasterize, DomainSpec};
use kornscope::report::Bound;
use nalgebra::{DMatrix, DVector};

/// Dense inf-sup constant: the smallest nonzero singular value of
/// S H^{-1/2}, with the zero block identified by the structural kernel.
fn dense_infsup(domain: &RasterDomain) -> f64 {
    let pressure = FieldSpace::full(domain);
    let velocity = FieldSpace::interior(domain);
    let s = pressure.divergence_from(&velocity);
    let kernel = AdjointKernel::from_adjoint(&s.transpose());
    let s_d = dense(&s);
    let g_d = dense(&pressure.gradient_from(&velocity));
    let h = g_d.transpose() * &g_d;
    let m = &s_d * inv_sqrt(&h);
    let sv = sv_ascending(&m);
    let k = kernel.components();
    let top = *sv.last().unwrap();
    assert!(
        sv[k - 1] <= 1e-10 * top,
        "structural kernel dimension {k} disagrees with the spectrum: sv[k-1] = {}",
        sv[k - 1]
    );
    assert!(
        sv[k] > 1e-8 * top,
        "no spectral gap after {k} kernel modes: sv[k] = {}",
        sv[k]
    );
    sv[k]
}

#[test]
fn infsup_square_matches_dense_svd() {
    let domain = rasterize(&DomainSpec::Square, 16).unwrap();
    let oracle = dense_infsup(&domain);
    let res = infsup_constant(&domain).unwrap();
    assert!(res.converged);
    assert_eq!(res.extra_kernel, 0);
    let rel = rel_diff(res.estimate.value, oracle);
    assert!(
        rel <= 1e-8,
        "square beta {} vs dense {} (rel {rel:.3e})",
        res.estimate.value,
        oracle
    );
}

#[test]
fn infsup_disk_matches_dense_svd() {
    let domain = rasterize(&DomainSpec::Disk, 12).unwrap();
    let oracle = dense_infsup(&domain);
    let res = infsup_constant(&domain).unwrap();
    assert!(res.converged);
    let rel = rel_diff(res.estimate.value, oracle);
    assert!(
        rel <= 1e-8,
        "disk beta {} vs dense {} (rel {rel:.3e})",
        res.estimate.value,
        oracle
    );
}

#[test]
fn p2_velocity_matches_dense_kkt_minimizer() {
    let domain = rasterize(&DomainSpec::Square, 12).unwrap();
    let f = default_test_load(&domain).unwrap();

    let pressure = FieldSpace::full(&domain);
    let velocity = FieldSpace::interior(&domain);
    let s = pressure.divergence_from(&velocity);
    let kernel = AdjointKernel::from_adjoint(&s.transpose());
    let s_d = dense(&s);
    let g_d = dense(&pressure.gradient_from(&velocity));
    let nv = velocity.ndofs();
    let w = DMatrix::identity(nv, nv) + g_d.transpose() * &g_d;
    let chol = w.cholesky().expect("W must be positive definite");

    // The default load is exact on the complement of the adjoint kernel.
    for b in kernel.basis() {
        let dot: f64 = b.iter().zip(&f).map(|(a, c)| a * c).sum();
        assert!(dot.abs() <= 1e-12, "load leaks onto the kernel: {dot}");
    }

    // Minimize v^T W v subject to S v = f: v = W^-1 S^T q with q from the
    // pseudo-inverted Schur complement, kernel modes zeroed.
    let schur = &s_d * chol.solve(&s_d.transpose());
    let sym = 0.5 * (&schur + schur.transpose());
    let eig = nalgebra::linalg::SymmetricEigen::new(sym);
    let lam_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let fq = DVector::from_column_slice(&f);
    let coeffs = eig.eigenvectors.transpose() * &fq;
    let mut inv = DVector::zeros(coeffs.len());
    for i in 0..coeffs.len() {
        if eig.eigenvalues[i] > 1e-10 * lam_max {
            inv[i] = coeffs[i] / eig.eigenvalues[i];
        }
    }
    let q = &eig.eigenvectors * inv;
    let v_star = chol.solve(&(s_d.transpose() * q));
    let defect = (&s_d * &v_star - &fq).amax();
    assert!(defect <= 1e-7, "dense KKT solve infeasible: {defect}");

    let sol = solve_divergence(&domain, &f, 2.0).unwrap();
    assert!(sol.residual <= 1e-8, "library residual {}", sol.residual);
    let scale = v_star.amax();
    let mut worst = 0.0f64;
    for i in 0..nv {
        worst = worst.max((sol.v[i] - v_star[i]).abs());
    }
    assert!(
        worst <= 1e-6 * scale,
        "velocity deviates from the dense minimizer by {worst} (scale {scale})"
    );
}

#[test]
fn adjoint_kernel_matches_dense_nullspace() {
    for (spec, res) in [(DomainSpec::Square, 10), (DomainSpec::Disk, 12)] {
        let domain = rasterize(&spec, res).unwrap();
        let pressure = FieldSpace::full(&domain);
        let velocity = FieldSpace::interior(&domain);
        let s = pressure.divergence_from(&velocity);
        let st = s.transpose();
        let kernel = AdjointKernel::from_adjoint(&st);

        let sv = sv_ascending(&dense(&s));
        let top = *sv.last().unwrap();
        let zero_dim = sv.iter().filter(|&&x| x <= 1e-10 * top).count();
        assert_eq!(
            kernel.components(),
            zero_dim,
            "{}: structural kernel {} vs dense nullspace {zero_dim}",
            spec.id(),
            kernel.components()
        );

        // Every basis vector annihilates the adjoint.
        let mut out = vec![0.0; st.nrows];
        for b in kernel.basis() {
            st.matvec(&b, &mut out);
            let leak = out.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            assert!(leak <= 1e-12, "{}: kernel vector leaks {leak}", spec.id());
        }
    }
}

#[test]
fn corridor_necks_throttle_the_infsup_constant() {
    let disk = rasterize(&DomainSpec::Disk, 48).unwrap();
    let rooms = rasterize(&DomainSpec::Rooms { neck: 0.125, count: 4 }, 48).unwrap();
    let beta_disk = infsup_constant(&disk).unwrap().estimate.value;
    let beta_rooms = infsup_constant(&rooms).unwrap().estimate.value;
    assert!(
        beta_rooms <= 0.5 * beta_disk,
        "rooms beta {beta_rooms} not well below disk beta {beta_disk}"
    );
}

#[test]
fn reweighted_solves_stay_feasible_away_from_two() {
    let domain = rasterize(&DomainSpec::Rooms { neck: 0.25, count: 2 }, 24).unwrap();
    let f = default_test_load(&domain).unwrap();
    for p in [1.5, 3.0] {
        let sol = solve_divergence(&domain, &f, p).unwrap();
        assert!(sol.residual <= 1e-6, "p={p}: residual {}", sol.residual);
        assert!(sol.estimate.value.is_finite() && sol.estimate.value > 0.0);
        assert_eq!(sol.estimate.bound, Bound::Upper);
        assert!(sol.norm_dv > 0.0);
    }
}
