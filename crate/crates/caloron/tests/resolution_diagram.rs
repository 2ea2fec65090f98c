mod common;

use caloron::generate::{generate_random, plant_common_cokernel, plant_common_kernel};
use caloron::genericity::check_genericity;
use caloron::linalg::{c, cr, max_abs, C64, CMat};
use caloron::monad::MonadData;
use caloron::resolutions::{
    chain_residual, injective_for_all_x, krylov_chain_map, reducibility_scan,
    resolution_matrices, torsion_support, transported_coupling, twist_resolution,
    verify_intertwining, ReducibilityKind, ResolutionLabel,
};
use caloron::{Error, Tolerances};

fn assert_multiset_close(got: &[C64], want: &[C64], tol: f64, what: &str) {
    assert_eq!(got.len(), want.len(), "{what}: sizes {} vs {}", got.len(), want.len());
    let key = |z: &C64| (z.re, z.im);
    let mut g: Vec<C64> = got.to_vec();
    let mut w: Vec<C64> = want.to_vec();
    g.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    w.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    for (a, b) in g.iter().zip(w.iter()) {
        assert!((a - b).norm() <= tol, "{what}: {a} vs {b}");
    }
}

fn all_squares_commute(data: &MonadData) -> f64 {
    let (rows, maps) = resolution_matrices(data).unwrap();
    let squares = [
        (&rows.zero_side, &rows.big_torsion, &maps.zero_to_big),
        (&rows.infinity_side, &rows.big_torsion, &maps.infinity_to_big),
        (&rows.infinity_side, &rows.small_torsion, &maps.infinity_to_small),
        (&rows.zero_side, &rows.small_torsion, &maps.zero_to_small),
    ];
    squares
        .iter()
        .map(|(s, d, p)| chain_residual(s, d, p))
        .fold(0.0, f64::max)
}

#[test]
fn charge_one_pencils_are_frozen() {
    let data = common::charge_one();
    let (rows, _) = resolution_matrices(&data).unwrap();

    assert_eq!(rows.small_torsion.p0, CMat::from_element(1, 1, cr(-3.0)));
    assert_eq!(rows.small_torsion.p1, CMat::from_element(1, 1, cr(1.0)));
    assert_eq!(rows.small_torsion.label, ResolutionLabel::SmallTorsion);
    assert_eq!((rows.small_torsion.a_rank, rows.small_torsion.b_rank), (1, 1));

    assert_eq!(rows.infinity_side.p0, CMat::from_column_slice(2, 1, &[cr(-3.0), cr(-1.0)]));
    assert_eq!(rows.infinity_side.p1, CMat::from_column_slice(2, 1, &[cr(1.0), cr(0.0)]));
    assert_eq!((rows.infinity_side.a_rank, rows.infinity_side.b_rank), (1, 2));

    // D1 A^-1 = 1/2 for this example.
    assert_eq!(rows.zero_side.p0, CMat::from_column_slice(2, 1, &[cr(-3.0), cr(-0.5)]));
    assert_eq!(rows.zero_side.p1, CMat::from_column_slice(2, 1, &[cr(1.0), cr(0.0)]));

    // B - C1 D1 A^-1 = 3 - 1/2.
    assert_eq!(rows.big_torsion.p0, CMat::from_element(1, 1, cr(-2.5)));
    assert_eq!(rows.big_torsion.p1, CMat::from_element(1, 1, cr(1.0)));

    assert!(all_squares_commute(&data) <= 1e-14);
}

#[test]
fn charge_one_flagged_big_pencil_is_frozen() {
    let data = common::charge_one_flagged();
    let (rows, _) = resolution_matrices(&data).unwrap();
    // x - M for M = [[0, -1], [0, 0]].
    let p0 = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(0.0), cr(0.0)]);
    assert_eq!(rows.big_torsion.p0, p0);
    assert_eq!(rows.big_torsion.p1, CMat::identity(2, 2));
    assert_eq!((rows.big_torsion.a_rank, rows.big_torsion.b_rank), (2, 2));

    // Zero side carries the flag: (k+j+1) x (k+j).
    assert_eq!((rows.zero_side.a_rank, rows.zero_side.b_rank), (2, 3));
    assert!(all_squares_commute(&data) <= 1e-14);
}

#[test]
fn commutation_holds_exactly_on_generated_data() {
    for (k, j, seed) in [(1usize, 0usize, 2u64), (4, 0, 2), (2, 1, 2), (3, 2, 2), (4, 3, 2)] {
        let data = generate_random(k, j, seed).unwrap();
        let r = all_squares_commute(&data);
        assert!(r <= 1e-13, "commutation residual {r:.3e} at (k,j)=({k},{j})");
    }
}

#[test]
fn torsion_supports_are_frozen_and_sized() {
    let data = common::charge_one();
    let s = torsion_support(&data, ResolutionLabel::SmallTorsion).unwrap();
    assert_multiset_close(&s, &[cr(3.0)], 1e-10, "small support");
    let b = torsion_support(&data, ResolutionLabel::BigTorsion).unwrap();
    assert_multiset_close(&b, &[cr(2.5)], 1e-10, "big support");

    let flagged = common::charge_one_flagged();
    let b = torsion_support(&flagged, ResolutionLabel::BigTorsion).unwrap();
    assert!(b.len() == 2 && b.iter().all(|z| z.norm() < 1e-6), "{b:?}");

    for (k, j, seed) in [(2usize, 0usize, 6u64), (2, 2, 6), (3, 1, 6)] {
        let data = generate_random(k, j, seed).unwrap();
        assert_eq!(torsion_support(&data, ResolutionLabel::SmallTorsion).unwrap().len(), k);
        assert_eq!(torsion_support(&data, ResolutionLabel::BigTorsion).unwrap().len(), k + j);
    }

    // Side labels have no finite support multiset.
    assert!(torsion_support(&data, ResolutionLabel::ZeroSide).is_err());
    assert!(torsion_support(&data, ResolutionLabel::InfinitySide).is_err());
}

#[test]
fn torsion_supports_are_invariant_under_the_group_action() {
    let data = generate_random(3, 1, 77).unwrap();
    let g = CMat::from_row_slice(
        3,
        3,
        &[
            c(1.0, 0.2),
            c(0.3, -0.4),
            cr(0.0),
            cr(0.0),
            c(0.9, 0.0),
            c(-0.2, 0.6),
            c(0.1, 0.1),
            cr(0.0),
            c(1.4, -0.3),
        ],
    );
    let acted = data.gl_act(&g).unwrap();
    for label in [ResolutionLabel::SmallTorsion, ResolutionLabel::BigTorsion] {
        let s0 = torsion_support(&data, label).unwrap();
        let s1 = torsion_support(&acted, label).unwrap();
        assert_multiset_close(&s0, &s1, 1e-7, "support invariance");
    }
}

#[test]
fn twist_of_the_infinity_side_is_frozen() {
    let data = common::charge_one();
    let (rows, _) = resolution_matrices(&data).unwrap();

    let t0 = twist_resolution(&rows.infinity_side, 0).unwrap();
    assert_eq!(t0.p0, rows.infinity_side.p0);
    assert_eq!(t0.p1, rows.infinity_side.p1);

    let t1 = twist_resolution(&rows.infinity_side, 1).unwrap();
    assert_eq!((t1.a_rank, t1.b_rank), (2, 3));
    let p0 = CMat::from_row_slice(
        3,
        2,
        &[cr(-3.0), cr(0.0), cr(-1.0), cr(0.0), cr(0.0), cr(-1.0)],
    );
    let p1 = CMat::from_row_slice(
        3,
        2,
        &[cr(1.0), cr(0.0), cr(0.0), cr(1.0), cr(0.0), cr(0.0)],
    );
    assert_eq!(t1.p0, p0);
    assert_eq!(t1.p1, p1);

    // Section bookkeeping: one line bundle at infinity throughout, and the
    // module ranks grow with the twist.
    for ell in 0..4usize {
        let t = twist_resolution(&rows.zero_side, ell).unwrap();
        assert_eq!(t.b_rank - t.a_rank, 1);
        assert_eq!(t.a_rank, rows.zero_side.a_rank + ell);
    }

    assert!(matches!(
        twist_resolution(&rows.small_torsion, 1),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn krylov_chain_commutes_exactly_and_detects_broken_equations() {
    // No flag lines, no Krylov tail to map.
    assert!(krylov_chain_map(&common::charge_one()).is_err());

    for (k, j, seed) in [(1usize, 1usize, 3u64), (2, 1, 3), (2, 2, 3), (1, 3, 3)] {
        let data = generate_random(k, j, seed).unwrap();
        let (rows, _) = resolution_matrices(&data).unwrap();
        let (twisted, pair) = krylov_chain_map(&data).unwrap();
        assert_eq!(twisted.a_rank, k + j - 1);
        assert_eq!(twisted.b_rank, k + j);
        let r = chain_residual(&twisted, &rows.big_torsion, &pair);
        assert!(r <= 1e-12, "krylov square residual {r:.3e} at (k,j)=({k},{j})");
    }

    // Breaking the flag-chain equation must surface as a visible residual.
    let data = generate_random(2, 2, 3).unwrap();
    let mut ap = data.a_prime().clone();
    ap[(0, 0)] += cr(1e-3);
    let broken = MonadData::new(
        data.a().clone(),
        data.b().clone(),
        data.c().clone(),
        data.d().clone(),
        ap,
        data.b_prime().clone(),
        data.c_prime().clone(),
    )
    .unwrap();
    let (rows, _) = resolution_matrices(&broken).unwrap();
    let (twisted, pair) = krylov_chain_map(&broken).unwrap();
    let r = chain_residual(&twisted, &rows.big_torsion, &pair);
    assert!(
        (1e-5..1e-1).contains(&r),
        "perturbation should give a residual near 1e-3, got {r:.3e}"
    );
}

#[test]
fn intertwining_residual_vanishes_and_transforms_covariantly() {
    let flagged = common::charge_one_flagged();
    let r = verify_intertwining(&flagged).unwrap();
    assert!(r <= 1e-12, "flagged example residual {r:.3e}");

    for (k, j, seed) in [(2usize, 1usize, 8u64), (1, 2, 8), (2, 2, 8)] {
        let data = generate_random(k, j, seed).unwrap();
        let r = verify_intertwining(&data).unwrap();
        assert!(r <= 1e-10, "residual {r:.3e} at (k,j)=({k},{j})");

        let g = {
            let mut g = CMat::identity(k, k);
            g[(0, 0)] = c(0.8, 0.4);
            if k > 1 {
                g[(0, k - 1)] = c(-0.3, 0.25);
            }
            g
        };
        let acted = data.gl_act(&g).unwrap();
        let ra = verify_intertwining(&acted).unwrap();
        assert!(ra <= 1e-9, "residual after group action {ra:.3e}");
    }

    // j = 0 has no inserted flag row to intertwine.
    assert!(verify_intertwining(&common::charge_one()).is_err());
}

#[test]
fn intertwining_is_sensitive_to_a_broken_flag_equation() {
    let data = generate_random(2, 2, 8).unwrap();
    let mut ap = data.a_prime().clone();
    ap[(1, 1)] += cr(1e-3);
    let broken = MonadData::new(
        data.a().clone(),
        data.b().clone(),
        data.c().clone(),
        data.d().clone(),
        ap,
        data.b_prime().clone(),
        data.c_prime().clone(),
    )
    .unwrap();
    let r = verify_intertwining(&broken).unwrap();
    assert!(
        (1e-6..1e-1).contains(&r),
        "perturbation should be visible in the residual, got {r:.3e}"
    );
}

#[test]
fn transported_coupling_matches_the_defining_identity() {
    let data = generate_random(2, 2, 21).unwrap();
    let ct = transported_coupling(&data).unwrap();
    let (m, n) = data.mn();
    let cvec = {
        let mut v = CMat::zeros(4, 1);
        v.view_mut((0, 0), (2, 1)).copy_from(&data.c2());
        v.view_mut((2, 0), (2, 1)).copy_from(&data.c2_prime());
        v
    };
    // N ct = -M^j c with j = 2.
    let lhs = &n * &ct;
    let rhs = -(&m * &m * &cvec);
    assert!(max_abs(&(&lhs - &rhs)) <= 1e-10 * max_abs(&rhs).max(1.0));
}

#[test]
fn reducibility_scan_is_empty_exactly_for_generic_data() {
    let tol = Tolerances::default();
    for (k, j, seed) in [(1usize, 0usize, 31u64), (2, 1, 31), (3, 0, 31)] {
        let data = generate_random(k, j, seed).unwrap();
        let hits = reducibility_scan(&data, &tol).unwrap();
        assert!(hits.is_empty(), "(k,j)=({k},{j}): {hits:?}");
    }
}

#[test]
fn reducibility_scan_reports_the_degenerate_example_at_x_three() {
    let tol = Tolerances::default();
    let hits = reducibility_scan(&common::charge_one_degenerate(), &tol).unwrap();
    assert!(!hits.is_empty());
    let sub: Vec<_> = hits
        .iter()
        .filter(|(_, kind)| *kind == ReducibilityKind::SkyscraperSubsheaf)
        .collect();
    assert!(!sub.is_empty(), "expected a skyscraper hit: {hits:?}");
    assert!(
        sub.iter().any(|(x, _)| (x - cr(3.0)).norm() < 1e-8),
        "skyscraper hit should sit at x = 3: {sub:?}"
    );
    // With C = D = 0 the dual degeneration is present as well.
    assert!(hits.iter().any(|(_, kind)| *kind == ReducibilityKind::CorankOneQuotient));
}

#[test]
fn reducibility_scan_matches_planted_witnesses() {
    let tol = Tolerances::default();
    let (x0, y0) = (c(0.7, -0.3), c(-1.2, 0.4));
    let planted = plant_common_kernel(3, x0, y0, 13).unwrap();
    let hits = reducibility_scan(&planted, &tol).unwrap();
    assert!(hits
        .iter()
        .any(|(x, kind)| *kind == ReducibilityKind::SkyscraperSubsheaf
            && (x - x0).norm() < 1e-6));

    let (x1, y1) = (c(-0.4, 0.9), c(0.8, 0.6));
    let planted = plant_common_cokernel(3, x1, y1, 29).unwrap();
    let hits = reducibility_scan(&planted, &tol).unwrap();
    assert!(hits
        .iter()
        .any(|(x, kind)| *kind == ReducibilityKind::CorankOneQuotient
            && (x - x1).norm() < 1e-6));

    // Scan verdicts agree with the genericity report flags.
    for seed in 0..6u64 {
        let data = generate_random(2, 1, 100 + seed).unwrap();
        let rep = check_genericity(&data, &tol).unwrap();
        let hits = reducibility_scan(&data, &tol).unwrap();
        let has_sub = hits.iter().any(|(_, k)| *k == ReducibilityKind::SkyscraperSubsheaf);
        let has_quot = hits.iter().any(|(_, k)| *k == ReducibilityKind::CorankOneQuotient);
        assert_eq!(has_sub, !rep.point_injectivity.passed);
        assert_eq!(has_quot, !rep.point_surjectivity.passed);
    }
}

#[test]
fn side_pencils_are_injective_everywhere_and_torsion_pencils_degenerate_on_support() {
    let tol = Tolerances::default();
    let data = generate_random(2, 1, 55).unwrap();
    let (rows, _) = resolution_matrices(&data).unwrap();

    let out = injective_for_all_x(&rows.zero_side, data.scale(), &tol);
    assert!(out.passed, "zero side: {out:?}");
    let out = injective_for_all_x(&rows.infinity_side, data.scale(), &tol);
    assert!(out.passed, "infinity side: {out:?}");

    for label in [ResolutionLabel::SmallTorsion, ResolutionLabel::BigTorsion] {
        let res = match label {
            ResolutionLabel::SmallTorsion => &rows.small_torsion,
            _ => &rows.big_torsion,
        };
        let out = injective_for_all_x(res, data.scale(), &tol);
        assert!(!out.passed, "{label:?} should degenerate somewhere");
        let witness_x: Vec<C64> = out.witnesses.iter().filter_map(|w| w.x).collect();
        let support = torsion_support(&data, label).unwrap();
        assert_multiset_close(&witness_x, &support, 1e-6, "degeneration points vs support");
    }
}
