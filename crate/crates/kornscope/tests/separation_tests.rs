//! Separation certificates on the analytic families: convex and corridor
//! domains certify at small constants, curves land inside the domain and
//! reach the base point, sampling is deterministic and depth-stratified,
//! and base-point transfers report sound bounds in both modes.

use kornscope::distance::DistanceField;
use kornscope::domain::RasterDomain;
use kornscope::generate::{rasterize, DomainSpec};
use kornscope::separation::{
    base_point_transfer, check_separation_property, find_separation_curve, sample_cells,
    TransferMode,
};

fn with_distance(spec: &DomainSpec, res: usize) -> (RasterDomain, DistanceField) {
    let domain = rasterize(spec, res).unwrap();
    let dist = DistanceField::compute(&domain).unwrap();
    (domain, dist)
}

#[test]
fn square_certifies_at_two() {
    let (domain, dist) = with_distance(&DomainSpec::Square, 32);
    let cert = check_separation_property(&domain, &dist, 2.0, None, 256).unwrap();
    assert!(cert.passed, "violations: {:?}", cert.violations.first());
    assert_eq!(cert.samples_checked, 256);
}

#[test]
fn rooms_certify_at_four() {
    let (domain, dist) = with_distance(&DomainSpec::Rooms { neck: 0.25, count: 4 }, 48);
    let cert = check_separation_property(&domain, &dist, 4.0, None, 256).unwrap();
    assert!(cert.passed, "violations: {:?}", cert.violations.first());
}

#[test]
fn power_cusp_certifies_at_four() {
    let (domain, dist) = with_distance(&DomainSpec::Cusp { alpha: 2.0 }, 64);
    let cert = check_separation_property(&domain, &dist, 4.0, None, 256).unwrap();
    assert!(cert.passed, "violations: {:?}", cert.violations.first());
}

#[test]
fn candidate_curves_stay_inside_and_reach_the_base() {
    let (domain, dist) = with_distance(&DomainSpec::LShape, 32);
    let grid = domain.grid();
    let base = grid.cell(dist.deepest_cell().0);
    for &start_idx in sample_cells(&domain, &dist, 32).iter() {
        let curve = find_separation_curve(&domain, &dist, grid.cell(start_idx), base).unwrap();
        let pts = curve.points();
        assert!(!pts.is_empty());
        for p in pts {
            let c = grid.locate(*p).expect("vertex off the grid");
            assert!(domain.is_true_cell(c), "vertex {p:?} outside the domain");
        }
        assert_eq!(grid.locate(pts[0]).unwrap(), grid.cell(start_idx));
        assert_eq!(grid.locate(*pts.last().unwrap()).unwrap(), base);
    }
}

#[test]
fn sampling_is_deterministic_and_spans_depths() {
    let (domain, dist) = with_distance(&DomainSpec::Rooms { neck: 0.25, count: 2 }, 32);
    let a = sample_cells(&domain, &dist, 100);
    let b = sample_cells(&domain, &dist, 100);
    assert_eq!(a, b);
    assert_eq!(a.len(), 100);
    // Extremes always present: the last sample is as deep as the deepest
    // cell (several cells tie by symmetry), the first as shallow as any.
    let deepest = dist.deepest_cell().0;
    assert_eq!(dist.d2(*a.last().unwrap()), dist.d2(deepest));
    let min_d2 = domain.true_cells().iter().map(|&i| dist.d2(i)).min().unwrap();
    assert_eq!(dist.d2(a[0]), min_d2);
    // Small budgets collapse to the full cell list when cells run out.
    let tiny = rasterize(&DomainSpec::Square, 8).unwrap();
    let tiny_dist = DistanceField::compute(&tiny).unwrap();
    let all = sample_cells(&tiny, &tiny_dist, 10_000);
    assert_eq!(all.len(), tiny.true_count());
}

#[test]
fn transfer_to_the_same_base_is_near_mode() {
    let (domain, dist) = with_distance(&DomainSpec::Square, 32);
    let cert = check_separation_property(&domain, &dist, 2.0, None, 64).unwrap();
    assert!(cert.passed);
    let report = base_point_transfer(&domain, &dist, &cert, cert.base_cell, 64).unwrap();
    assert_eq!(report.mode, TransferMode::Near);
    assert_eq!(report.chain_steps, 1);
    assert_eq!(report.cs_bound, Some(4.0));
    // The doubling search re-checks the identical certificate first.
    assert_eq!(report.verified_cs, Some(2.0));
}

#[test]
fn transfer_across_rooms_chains_and_verifies() {
    let (domain, dist) = with_distance(&DomainSpec::Rooms { neck: 0.25, count: 2 }, 32);
    let cert = check_separation_property(&domain, &dist, 4.0, None, 64).unwrap();
    assert!(cert.passed);
    // The certificate's base sits in one room; move to the other room's
    // center, far beyond the near-move radius.
    let grid = domain.grid();
    let other = if grid.center(cert.base_cell)[0] < 1.25 { 2.0 } else { 0.5 };
    let new_base = grid.locate([other, 0.5, 0.0]).unwrap();
    assert!(domain.is_true_cell(new_base));
    let report = base_point_transfer(&domain, &dist, &cert, new_base, 64).unwrap();
    assert_eq!(report.mode, TransferMode::Chained);
    assert!(report.chain_steps > 100, "steps {}", report.chain_steps);
    assert!((report.log2_cs_bound - (report.chain_steps as f64 + 2.0)).abs() <= 1e-12);
    // A chain this long overflows the representable constant, while the
    // domain's symmetry lets the doubling search verify the original one.
    assert_eq!(report.cs_bound, None);
    assert_eq!(report.verified_cs, Some(4.0));
}

#[test]
fn bad_parameters_are_rejected() {
    let (domain, dist) = with_distance(&DomainSpec::Square, 16);
    assert!(check_separation_property(&domain, &dist, 0.0, None, 16).is_err());
    assert!(check_separation_property(&domain, &dist, f64::NAN, None, 16).is_err());
    // A base cell outside the domain is refused up front.
    assert!(check_separation_property(&domain, &dist, 2.0, Some([0, 0, 0]), 16).is_err());
}
