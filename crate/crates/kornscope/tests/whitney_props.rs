//! Property tests for the Whitney machinery: random rectangle unions keep
//! every decomposition invariant, the distance transform agrees with a
//! brute-force recount, and the analytic families decompose cleanly at
//! small resolutions. The invariant checker itself is exercised by the
//! random masks far from any shape the generators produce.

use kornscope::distance::DistanceField;
use kornscope::domain::RasterDomain;
use kornscope::generate::{rasterize, DomainSpec};
use kornscope::grid::Grid;
use kornscope::whitney::{verify_whitney_invariants, whitney_decompose, NO_CUBE};
use proptest::prelude::*;

/// Union of axis-aligned cell rectangles on a 24 x 24 grid with a two-cell
/// false border. Every rectangle contains the cell (11, 11), so the union
/// is face-connected, and the first one is at least 5 x 5 so the domain
/// validator's minimum size holds.
fn rect_union_domain(rects: &[(usize, usize, usize, usize)]) -> RasterDomain {
    let grid = Grid::new2d(24, 24, 1.0 / 16.0, [0.0, 0.0]);
    let mut mask = vec![false; grid.len()];
    for &(x0, y0, x1, y1) in rects {
        for y in y0..=y1 {
            for x in x0..=x1 {
                mask[grid.idx([x, y, 0])] = true;
            }
        }
    }
    RasterDomain::new(grid, mask).unwrap()
}

fn rect_strategy() -> impl Strategy<Value = Vec<(usize, usize, usize, usize)>> {
    let first = (2usize..=9, 2usize..=9, 13usize..=21, 13usize..=21);
    let extra = (2usize..=11, 2usize..=11, 11usize..=21, 11usize..=21);
    (first, proptest::collection::vec(extra, 0..3))
        .prop_map(|(f, mut rest)| {
            rest.insert(0, f);
            rest
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_masks_decompose_without_violations(rects in rect_strategy()) {
        let domain = rect_union_domain(&rects);
        let dist = DistanceField::compute(&domain).unwrap();
        let dec = whitney_decompose(&domain, &dist);
        let report = verify_whitney_invariants(&domain, &dist, &dec);
        prop_assert!(report.violations.is_empty(), "{:?}", report.violations);
        prop_assert!(report.max_neighbor_ratio <= 4.0);
        let total: usize = dec.side_histogram().iter().map(|&(_, c)| c).sum();
        prop_assert_eq!(total, dec.cubes.len());
    }

    #[test]
    fn distance_transform_matches_brute_force(rects in rect_strategy()) {
        let domain = rect_union_domain(&rects);
        let dist = DistanceField::compute(&domain).unwrap();
        let grid = domain.grid();
        let false_cells: Vec<[usize; 3]> = (0..grid.len())
            .filter(|&i| !domain.is_true(i))
            .map(|i| grid.cell(i))
            .collect();
        for idx in 0..grid.len() {
            if !domain.is_true(idx) {
                continue;
            }
            let c = grid.cell(idx);
            let best = false_cells
                .iter()
                .map(|f| {
                    let dx = c[0] as i64 - f[0] as i64;
                    let dy = c[1] as i64 - f[1] as i64;
                    (dx * dx + dy * dy) as u32
                })
                .min()
                .unwrap();
            prop_assert_eq!(dist.d2(idx), best, "cell {:?}", c);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_boxes_decompose_without_violations_in_3d(
        boxes in (
            (2usize..=4, 2usize..=4, 2usize..=4, 7usize..=9, 7usize..=9, 7usize..=9),
            proptest::collection::vec(
                (2usize..=5, 2usize..=5, 2usize..=5, 5usize..=9, 5usize..=9, 5usize..=9),
                0..3,
            ),
        )
    ) {
        let grid = Grid::new3d(12, 12, 12, 0.125, [0.0, 0.0, 0.0]);
        let mut mask = vec![false; grid.len()];
        let (first, rest) = boxes;
        let mut all = vec![first];
        all.extend(rest);
        for &(x0, y0, z0, x1, y1, z1) in &all {
            for z in z0..=z1 {
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        mask[grid.idx([x, y, z])] = true;
                    }
                }
            }
        }
        let domain = RasterDomain::new(grid, mask).unwrap();
        let dist = DistanceField::compute(&domain).unwrap();
        let dec = whitney_decompose(&domain, &dist);
        let report = verify_whitney_invariants(&domain, &dist, &dec);
        prop_assert!(report.violations.is_empty(), "{:?}", report.violations);
    }
}

/// All analytic families, both resolutions used in quick runs: the
/// decomposition must carry zero violations and stay deterministic.
#[test]
fn every_family_decomposes_cleanly() {
    let specs = [
        DomainSpec::Square,
        DomainSpec::Disk,
        DomainSpec::LShape,
        DomainSpec::Cusp { alpha: 1.5 },
        DomainSpec::FlatCusp { alpha: 1.5 },
        DomainSpec::Rooms { neck: 0.25, count: 2 },
        DomainSpec::PuncturedDisk { levels: 2 },
        DomainSpec::PuncturedSlab { levels: 1 },
    ];
    for spec in &specs {
        for res in [16usize, 24] {
            let domain = rasterize(spec, res).unwrap();
            let dist = DistanceField::compute(&domain).unwrap();
            let dec = whitney_decompose(&domain, &dist);
            let report = verify_whitney_invariants(&domain, &dist, &dec);
            assert!(
                report.violations.is_empty(),
                "{} res {res}: {:?}",
                spec.id(),
                report.violations
            );
            assert!(report.cube_count > 0);
            let again = whitney_decompose(&domain, &dist);
            assert_eq!(again.cubes, dec.cubes, "{} res {res} not deterministic", spec.id());
            assert_eq!(again.cell_to_cube, dec.cell_to_cube);
        }
    }
}

/// Narrow corridors force saturated unit cells: they hug the boundary and
/// are the only cubes allowed below the distance lower bound.
#[test]
fn narrow_necks_produce_saturated_cells() {
    let domain = rasterize(&DomainSpec::Rooms { neck: 0.125, count: 2 }, 16).unwrap();
    let dist = DistanceField::compute(&domain).unwrap();
    let dec = whitney_decompose(&domain, &dist);
    let report = verify_whitney_invariants(&domain, &dist, &dec);
    assert!(report.violations.is_empty(), "{:?}", report.violations);
    assert!(report.saturated_count > 0);
    for cube in dec.cubes.iter().filter(|c| c.saturated) {
        assert_eq!(cube.side_cells, 1);
        assert!((cube.min_d2 as usize) < 2);
    }
}

/// The cell map and the cube list tell the same story.
#[test]
fn cell_map_agrees_with_cube_lookup() {
    let domain = rasterize(&DomainSpec::LShape, 16).unwrap();
    let dist = DistanceField::compute(&domain).unwrap();
    let dec = whitney_decompose(&domain, &dist);
    let grid = domain.grid();
    for idx in 0..grid.len() {
        match dec.cube_of_cell(idx) {
            Some(cube) => {
                assert!(domain.is_true(idx));
                let c = grid.cell(idx);
                for a in 0..2 {
                    assert!(c[a] >= cube.anchor[a] && c[a] < cube.anchor[a] + cube.side_cells);
                }
            }
            None => {
                assert!(!domain.is_true(idx));
                assert_eq!(dec.cell_to_cube[idx], NO_CUBE);
            }
        }
    }
}
