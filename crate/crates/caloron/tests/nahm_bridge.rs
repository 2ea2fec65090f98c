//! Translation between matrix data and Nahm complexes on the circle.
//!
//! Expected values for the two charge-one fixtures are frozen from hand
//! computation; everything else is pinned by structural identities
//! (exact gluing, residue ladders, quadratic decay of the discretization
//! error) rather than by reference output.

mod common;

use caloron::linalg::{c, cr, eigenvalues, max_abs, CMat};
use caloron::monad::MonadData;
use caloron::nahm::{
    from_nahm_complex, gauge_act, normal_form, to_nahm_complex, verify_nahm_complex, GaugePath,
    NahmExtra, PathSpec,
};
use caloron::resolutions::{torsion_support, transported_boundary_form, ResolutionLabel};
use caloron::{Error, Tolerances};
use common::{charge_one, charge_one_flagged};
use std::f64::consts::PI;

fn spec_with(samples: usize, pole: usize) -> PathSpec {
    PathSpec {
        samples_per_interval: samples,
        pole_tail_samples: pole,
        ..PathSpec::default()
    }
}

/// Entrywise max distance between two matrices.
fn dist(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

/// Max distance between two eigenvalue multisets (sorted lexicographically).
fn eig_dist(a: &CMat, b: &CMat) -> f64 {
    let mut ea = eigenvalues(a);
    let mut eb = eigenvalues(b);
    let key = |z: &caloron::linalg::C64| (z.re, z.im);
    ea.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
    eb.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
    ea.iter()
        .zip(&eb)
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Flagless charge one: every sample value is known in closed form.
// A = 2, B = 3, C = (1, -1), D = [1; 1]; the corrected endomorphism is
// B - C1 D1 A^{-1} = 2.5, both junction jumps equal 1/2, and the big-side
// connection is the constant -ln(2)/(2 pi).
// ---------------------------------------------------------------------------

#[test]
fn frozen_charge_one_bridge() {
    let data = charge_one();
    let ncd = to_nahm_complex(&data, &PathSpec::default()).unwrap();

    assert_eq!(ncd.rank_small, 1);
    assert_eq!(ncd.rank_big, 1);
    assert_eq!(ncd.flag_degree(), 0);
    assert_eq!(ncd.theta0, 0.0);
    assert_eq!(ncd.theta_inf, PI);
    assert_eq!(ncd.pole_gap, 0.0);
    assert_eq!(ncd.grid_small.len(), 513);
    assert_eq!(ncd.grid_big.len(), 513);
    assert_eq!(ncd.grid_small[0], 0.0);
    assert_eq!(*ncd.grid_small.last().unwrap(), PI);
    assert_eq!(ncd.grid_big[0], PI);
    assert!((ncd.grid_big.last().unwrap() - 2.0 * PI).abs() < 1e-12);

    // Small side: zero connection, constant -B.
    for (al, be) in ncd.alpha_small.iter().zip(&ncd.beta_small) {
        assert_eq!(max_abs(al), 0.0);
        assert!(dist(be, &CMat::from_row_slice(1, 1, &[cr(-3.0)])) < 1e-15);
    }

    // Big side: constant connection -ln(2)/(2 pi), constant -2.5 field
    // (scalar conjugation is trivial).
    let a_big = -0.5 * 2.0f64.ln() / PI;
    for (al, be) in ncd.alpha_big.iter().zip(&ncd.beta_big) {
        assert!(dist(al, &CMat::from_row_slice(1, 1, &[cr(a_big)])) < 1e-13);
        assert!(dist(be, &CMat::from_row_slice(1, 1, &[cr(-2.5)])) < 1e-12);
    }

    // Identity gluings, rank-one jumps 1/2 = u w at both junctions.
    let id1 = CMat::from_row_slice(1, 1, &[cr(1.0)]);
    assert_eq!(dist(&ncd.i0, &id1), 0.0);
    assert_eq!(dist(&ncd.pi0, &id1), 0.0);
    assert_eq!(dist(&ncd.i_inf, &id1), 0.0);
    assert_eq!(dist(&ncd.pi_inf, &id1), 0.0);

    match &ncd.extra {
        NahmExtra::Jump {
            u0,
            w0,
            u_inf,
            w_inf,
        } => {
            assert!(dist(u0, &CMat::from_row_slice(1, 1, &[cr(1.0)])) < 1e-14);
            assert!(dist(w0, &CMat::from_row_slice(1, 1, &[cr(0.5)])) < 1e-14);
            assert!(dist(u_inf, &CMat::from_row_slice(1, 1, &[cr(0.5)])) < 1e-14);
            assert!(dist(w_inf, &CMat::from_row_slice(1, 1, &[cr(1.0)])) < 1e-14);
        }
        other => panic!("flagless data must carry jump factors, got {other:?}"),
    }

    // The jump computed from the sampled fields agrees with the factors:
    // pi (beta_big at the junction) i - beta_small = 1/2 on both ends.
    let j_inf = &ncd.pi_inf * &ncd.beta_big[0] * &ncd.i_inf - ncd.beta_small.last().unwrap();
    let j_zero = &ncd.pi0 * ncd.beta_big.last().unwrap() * &ncd.i0 - &ncd.beta_small[0];
    assert!(dist(&j_inf, &CMat::from_row_slice(1, 1, &[cr(0.5)])) < 1e-12);
    assert!(dist(&j_zero, &CMat::from_row_slice(1, 1, &[cr(0.5)])) < 1e-12);
}

#[test]
fn charge_one_verification_is_clean() {
    let ncd = to_nahm_complex(&charge_one(), &PathSpec::default()).unwrap();
    let report = verify_nahm_complex(&ncd).unwrap();
    assert!(report.all_pass(), "items: {:?}", report.items);

    // Gluing is exact by construction, not merely small.
    assert_eq!(report.item("gluing at zero").unwrap().residual, 0.0);
    assert_eq!(report.item("gluing at infinity").unwrap().residual, 0.0);

    // Constant fields differentiate to machine zero.
    assert!(report.item("covariant constancy small").unwrap().residual < 1e-13);
    assert!(report.item("covariant constancy big").unwrap().residual < 1e-12);

    // Scalar jumps are exactly rank one.
    assert!(report.item("jump rank at zero").unwrap().passed);
    assert!(report.item("jump rank at infinity").unwrap().passed);
    assert!(report.item("jump factors at zero").unwrap().passed);
    assert!(report.item("jump factors at infinity").unwrap().passed);
}

// ---------------------------------------------------------------------------
// Flagged charge one (k = 1, j = 1): A = 1, B = 0, C = (1, 1), D = [1; -1],
// A' = 1, B' = 0, C' = (0, 0). Here M = [[0, -1], [0, 0]],
// N = [[1, 1], [1, 0]], the transported coupling vanishes, and the
// boundary forms are [[0, 0], [1, 0]] (infinity side) and -M (zero side).
// The weight matrix is 1x1 zero, so the big fields are constant across
// both pole tails.
// ---------------------------------------------------------------------------

#[test]
fn frozen_flagged_bridge() {
    let data = charge_one_flagged();
    let ncd = to_nahm_complex(&data, &PathSpec::default()).unwrap();

    assert_eq!(ncd.rank_small, 1);
    assert_eq!(ncd.rank_big, 2);
    assert_eq!(ncd.flag_degree(), 1);
    assert!((ncd.pole_gap - PI / 5.0).abs() < 1e-15);
    assert_eq!(ncd.grid_small.len(), 513);
    assert_eq!(ncd.grid_big.len(), 2 * 96 + 513);
    assert!((ncd.grid_big[0] - (PI + 1e-6)).abs() < 1e-12);
    assert!((ncd.grid_big.last().unwrap() - (2.0 * PI - 1e-6)).abs() < 1e-12);

    let beta_tilde = CMat::from_row_slice(2, 2, &[cr(0.0), cr(0.0), cr(1.0), cr(0.0)]);
    let minus_m = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(0.0), cr(0.0)]);
    assert!(dist(&transported_boundary_form(&data).unwrap(), &beta_tilde) < 1e-14);

    // Constant values across both tails; zero connection there (the single
    // flag weight is (2*1 - 1 - 1)/2 = 0).
    for idx in 0..96 {
        let right = ncd.grid_big.len() - 1 - idx;
        assert!(dist(&ncd.beta_big[idx], &beta_tilde) < 1e-12);
        assert!(dist(&ncd.beta_big[right], &minus_m) < 1e-12);
        assert!(max_abs(&ncd.alpha_big[idx]) < 1e-13);
        assert!(max_abs(&ncd.alpha_big[right]) < 1e-13);
    }

    // Residue data: both 1x1 zero matrices, stored exactly.
    assert_eq!(ncd.x_res.nrows(), 1);
    assert_eq!(ncd.s_res.nrows(), 1);
    assert_eq!(max_abs(&ncd.x_res), 0.0);
    assert_eq!(max_abs(&ncd.s_res), 0.0);

    // Standard gluings and the distinguished flag direction e_2.
    assert_eq!(
        dist(&ncd.i0, &CMat::from_row_slice(2, 1, &[cr(1.0), cr(0.0)])),
        0.0
    );
    assert_eq!(
        dist(&ncd.pi0, &CMat::from_row_slice(1, 2, &[cr(1.0), cr(0.0)])),
        0.0
    );
    match &ncd.extra {
        NahmExtra::Flag { v0, v_inf } => {
            let e2 = CMat::from_row_slice(2, 1, &[cr(0.0), cr(1.0)]);
            assert_eq!(dist(v0, &e2), 0.0);
            assert_eq!(dist(v_inf, &e2), 0.0);
        }
        other => panic!("flagged data must carry flag directions, got {other:?}"),
    }
}

#[test]
fn flagged_verification_is_clean() {
    let ncd = to_nahm_complex(&charge_one_flagged(), &PathSpec::default()).unwrap();
    let report = verify_nahm_complex(&ncd).unwrap();
    assert!(report.all_pass(), "items: {:?}", report.items);
    assert_eq!(report.item("gluing at zero").unwrap().residual, 0.0);
    assert_eq!(report.item("residue weights").unwrap().residual, 0.0);
    assert!(report.item("boundary match at zero").unwrap().residual < 1e-12);
    assert!(report.item("boundary match at infinity").unwrap().residual < 1e-12);
    assert!(report.item("residue extraction at zero").unwrap().passed);
    assert!(report.item("residue extraction at infinity").unwrap().passed);
    assert!(report.item("shift extraction at zero").unwrap().passed);
    assert!(report.item("shift extraction at infinity").unwrap().passed);
}

// ---------------------------------------------------------------------------
// Residue ladders for higher flag degrees.
// ---------------------------------------------------------------------------

#[test]
fn residue_weights_are_exact_quarter_integers() {
    for (k, j) in [(1usize, 2usize), (2, 2), (1, 3), (2, 3), (1, 4)] {
        let data = caloron::generate::generate_random(k, j, 41).unwrap();
        let ncd = to_nahm_complex(&data, &spec_with(128, 48)).unwrap();

        // Connection residue: diag((2a - j - 1)/4), exact dyadic entries.
        assert_eq!(ncd.x_res.nrows(), j);
        for a in 1..=j {
            let expected = (2.0 * a as f64 - j as f64 - 1.0) / 4.0;
            let got = ncd.x_res[(a - 1, a - 1)];
            assert_eq!(got.re, expected, "k={k} j={j} weight {a}");
            assert_eq!(got.im, 0.0);
        }
        let mut off = ncd.x_res.clone();
        for a in 0..j {
            off[(a, a)] = c(0.0, 0.0);
        }
        assert_eq!(max_abs(&off), 0.0);

        // Field residue: minus the lower shift, exactly.
        for r in 0..j {
            for col in 0..j {
                let expected = if r == col + 1 { -1.0 } else { 0.0 };
                assert_eq!(ncd.s_res[(r, col)].re, expected);
                assert_eq!(ncd.s_res[(r, col)].im, 0.0);
            }
        }

        let report = verify_nahm_complex(&ncd).unwrap();
        assert!(
            report.all_pass(),
            "k={k} j={j} items: {:?}",
            report
                .items
                .iter()
                .filter(|i| !i.passed)
                .collect::<Vec<_>>()
        );
    }
}

// ---------------------------------------------------------------------------
// The verifier's discretization error budget and its failure modes.
// ---------------------------------------------------------------------------

#[test]
fn constancy_residual_shrinks_quadratically() {
    let data = caloron::generate::generate_random(2, 1, 11).unwrap();
    let coarse = to_nahm_complex(&data, &spec_with(256, 64)).unwrap();
    let fine = to_nahm_complex(&data, &spec_with(512, 64)).unwrap();
    let rc = verify_nahm_complex(&coarse).unwrap();
    let rf = verify_nahm_complex(&fine).unwrap();
    assert!(rc.all_pass());
    assert!(rf.all_pass());
    let ratio = rc.item("covariant constancy big").unwrap().residual
        / rf.item("covariant constancy big").unwrap().residual;
    assert!(
        (3.0..5.3).contains(&ratio),
        "halving the step should quarter the residual, got ratio {ratio}"
    );
    assert!(rc.item("covariant constancy small").unwrap().residual < 1e-13);
}

#[test]
fn verification_flags_a_point_perturbation() {
    let data = caloron::generate::generate_random(2, 1, 11).unwrap();
    let mut ncd = to_nahm_complex(&data, &spec_with(256, 64)).unwrap();
    let mid = ncd.grid_big.len() / 2;
    ncd.beta_big[mid][(0, 0)] += cr(2e-3);
    let report = verify_nahm_complex(&ncd).unwrap();
    assert!(!report.all_pass());
    let h = (PI - 4.0 * PI / 10.0) / 256.0;
    let floor = 0.8 * 2e-3 / (2.0 * h);
    let got = report.item("covariant constancy big").unwrap().residual;
    assert!(
        got >= floor,
        "a lone bump must show at first-difference scale: {got} < {floor}"
    );
}

#[test]
fn verification_flags_tampered_residues() {
    let data = caloron::generate::generate_random(1, 2, 13).unwrap();
    let good = to_nahm_complex(&data, &spec_with(128, 48)).unwrap();

    let mut wrong_weight = good.clone();
    wrong_weight.x_res[(0, 0)] += cr(0.25);
    let report = verify_nahm_complex(&wrong_weight).unwrap();
    assert!(!report.item("residue weights").unwrap().passed);
    assert!(!report.all_pass());

    let mut wrong_shift = good.clone();
    wrong_shift.s_res = CMat::zeros(2, 2);
    let report = verify_nahm_complex(&wrong_shift).unwrap();
    assert!(!report.item("shift residue profile").unwrap().passed);
    assert!(!report.all_pass());
}

#[test]
fn gluing_is_exact_for_generated_data() {
    let data = caloron::generate::generate_random(2, 2, 29).unwrap();
    let ncd = to_nahm_complex(&data, &spec_with(128, 48)).unwrap();
    let pi_i = &ncd.pi0 * &ncd.i0 - caloron::linalg::eye(2);
    assert_eq!(max_abs(&pi_i), 0.0);
    let report = verify_nahm_complex(&ncd).unwrap();
    assert!(report.item("boundary match at zero").unwrap().residual < 1e-10);
    assert!(report.item("boundary match at infinity").unwrap().residual < 1e-10);
}

// ---------------------------------------------------------------------------
// Gauge action.
// ---------------------------------------------------------------------------

/// A smooth unitary path on `grid` that bumps around the center of
/// (lo, hi) and is the identity outside it.
fn bump_path(grid: &[f64], dim: usize, lo: f64, hi: f64, strength: f64) -> Vec<CMat> {
    let gen = {
        let mut g = CMat::zeros(dim, dim);
        for r in 0..dim {
            for col in 0..dim {
                if r < col {
                    g[(r, col)] = c(0.3 / (1.0 + (r + col) as f64), 0.7 - 0.1 * r as f64);
                } else if r == col {
                    g[(r, col)] = c(0.0, 0.4 + 0.2 * r as f64);
                }
            }
        }
        let minus_adj = -caloron::linalg::adjoint(&g);
        let mut anti = g;
        for r in 0..dim {
            for col in 0..=r {
                anti[(r, col)] = minus_adj[(r, col)];
            }
        }
        anti
    };
    grid.iter()
        .map(|&t| {
            if t <= lo || t >= hi {
                caloron::linalg::eye(dim)
            } else {
                let u = (t - lo) / (hi - lo);
                let window = (PI * u).sin().powi(4);
                caloron::linalg::expm(&(&gen * cr(strength * window)))
            }
        })
        .collect()
}

#[test]
fn identity_gauge_path_is_a_no_op() {
    let data = caloron::generate::generate_random(2, 1, 5).unwrap();
    let ncd = to_nahm_complex(&data, &spec_with(128, 48)).unwrap();
    let path = GaugePath {
        small: ncd.grid_small.iter().map(|_| caloron::linalg::eye(2)).collect(),
        big: ncd.grid_big.iter().map(|_| caloron::linalg::eye(3)).collect(),
    };
    let moved = gauge_act(&ncd, &path).unwrap();
    for (a, b) in ncd.beta_big.iter().zip(&moved.beta_big) {
        assert!(dist(a, b) < 1e-14);
    }
    for (a, b) in ncd.alpha_big.iter().zip(&moved.alpha_big) {
        assert!(dist(a, b) < 1e-14);
    }
    assert_eq!(dist(&ncd.x_res, &moved.x_res), 0.0);
}

#[test]
fn admissible_gauge_preserves_verification() {
    let data = caloron::generate::generate_random(2, 1, 5).unwrap();
    let ncd = to_nahm_complex(&data, &spec_with(256, 64)).unwrap();
    let gap = ncd.pole_gap;
    let (s0, s1) = (ncd.grid_small[0], *ncd.grid_small.last().unwrap());
    let path = GaugePath {
        small: bump_path(&ncd.grid_small, 2, s0 + 0.1, s1 - 0.1, 0.3),
        big: bump_path(&ncd.grid_big, 3, PI + gap + 0.05, 2.0 * PI - gap - 0.05, 0.3),
    };
    let moved = gauge_act(&ncd, &path).unwrap();
    let report = verify_nahm_complex(&moved).unwrap();
    assert!(
        report.all_pass(),
        "failing items: {:?}",
        report
            .items
            .iter()
            .filter(|i| !i.passed)
            .collect::<Vec<_>>()
    );
    assert_eq!(dist(&ncd.x_res, &moved.x_res), 0.0);
    assert_eq!(dist(&ncd.s_res, &moved.s_res), 0.0);

    // The moved complex still recovers the same matrix data invariants.
    let rec = from_nahm_complex(&moved).unwrap();
    assert!(eig_dist(rec.b(), data.b()) < 1e-6);
}

#[test]
fn pole_zone_gauge_is_rejected() {
    let data = caloron::generate::generate_random(1, 2, 17).unwrap();
    let ncd = to_nahm_complex(&data, &spec_with(128, 48)).unwrap();
    // A bump that is alive on the whole big interval, tails included.
    let path = GaugePath {
        small: ncd.grid_small.iter().map(|_| caloron::linalg::eye(1)).collect(),
        big: bump_path(
            &ncd.grid_big,
            3,
            ncd.grid_big[0] - 1.0,
            ncd.grid_big.last().unwrap() + 1.0,
            0.3,
        ),
    };
    match gauge_act(&ncd, &path) {
        Err(Error::Precondition(msg)) => assert!(msg.contains("pole"), "message: {msg}"),
        other => panic!("expected a precondition error, got {other:?}"),
    }
}

// ---------------------------------------------------------------------------
// Inversion: recovering matrix data from a complex.
// ---------------------------------------------------------------------------

#[test]
fn inversion_recovers_charge_one() {
    let data = charge_one();
    let ncd = to_nahm_complex(&data, &PathSpec::default()).unwrap();
    let rec = from_nahm_complex(&ncd).unwrap();

    // The transported average of a constant field is exact.
    assert!(dist(rec.b(), data.b()) < 1e-12);
    // Holonomy recovery of A, and the couplings through the jump factors.
    assert!(dist(rec.a(), data.a()) < 1e-8);
    assert!(dist(rec.c(), data.c()) < 1e-8);
    assert!(dist(rec.d(), data.d()) < 1e-8);
    let res = rec.residuals();
    assert!(res.max() < 1e-9, "recovered data must satisfy the equations");
}

#[test]
fn inversion_recovers_the_flagged_example() {
    let data = charge_one_flagged();
    let ncd = to_nahm_complex(&data, &PathSpec::default()).unwrap();
    let rec = from_nahm_complex(&ncd).unwrap();
    for (name, got, want) in [
        ("a", rec.a(), data.a()),
        ("b", rec.b(), data.b()),
        ("c", rec.c(), data.c()),
        ("d", rec.d(), data.d()),
        ("a_prime", rec.a_prime(), data.a_prime()),
        ("c_prime", rec.c_prime(), data.c_prime()),
    ] {
        assert!(dist(got, want) < 1e-6, "{name}: {got} vs {want}");
    }
    assert!(dist(rec.b_prime(), data.b_prime()) < 1e-6);
    assert!(rec.residuals().max() < 1e-7);
}

#[test]
fn round_trip_preserves_spectral_invariants() {
    for (k, j, seed) in [(2usize, 1usize, 3u64), (1, 2, 5), (2, 2, 9)] {
        let data = caloron::generate::generate_random(k, j, seed).unwrap();
        let ncd = to_nahm_complex(&data, &spec_with(256, 64)).unwrap();
        let rec = from_nahm_complex(&ncd).unwrap();

        assert!(eig_dist(rec.b(), data.b()) < 1e-6, "k={k} j={j}");
        assert!(
            eig_dist(&rec.m_matrix(), &data.m_matrix()) < 1e-6,
            "k={k} j={j}"
        );

        let tol = Tolerances::default();
        let before = caloron::genericity::check_genericity(&data, &tol).unwrap();
        let after = caloron::genericity::check_genericity(&rec, &tol).unwrap();
        assert_eq!(before.all_pass(), after.all_pass());

        for label in [ResolutionLabel::SmallTorsion, ResolutionLabel::BigTorsion] {
            let mut sa = torsion_support(&data, label).unwrap();
            let mut sb = torsion_support(&rec, label).unwrap();
            let key = |z: &caloron::linalg::C64| (z.re, z.im);
            sa.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
            sb.sort_by(|p, q| key(p).partial_cmp(&key(q)).unwrap());
            for (p, q) in sa.iter().zip(&sb) {
                assert!((p - q).norm() < 1e-6, "{label:?} support moved");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Boundary normal form.
// ---------------------------------------------------------------------------

#[test]
fn normal_form_extracts_the_boundary_blocks() {
    let data = caloron::generate::generate_random(2, 1, 7).unwrap();
    let ncd = to_nahm_complex(&data, &spec_with(256, 64)).unwrap();
    let nf = normal_form(&ncd).unwrap();
    let k = data.k();

    // Zero side blocks read off the long-arc matrix.
    assert!(dist(&nf.at_zero.p0, &(-data.b())) < 1e-8);
    assert!(dist(&nf.at_zero.q0, &data.c1()) < 1e-8);
    assert!(dist(&nf.at_zero.r0, &(-data.b_prime())) < 1e-8);
    assert!(dist(&nf.at_zero.s0, &data.c1_prime()) < 1e-8);

    // Infinity side blocks read off the transported form.
    let bt = transported_boundary_form(&data).unwrap();
    let j = data.j();
    let q_inf = bt.view((0, k + j - 1), (k, 1)).into_owned();
    assert!(dist(&nf.at_infinity.p0, &(-data.b())) < 1e-8);
    assert!(dist(&nf.at_infinity.q0, &q_inf) < 1e-8);
    assert!(dist(&nf.at_infinity.r0, &(-data.d2())) < 1e-8);

    // Assembling the infinity-side blocks reproduces the transported form,
    // and the zero side reproduces minus the long-arc matrix.
    assert!(dist(&nf.at_infinity.assemble(), &bt) < 1e-8);
    assert!(dist(&nf.at_zero.assemble(), &(-data.m_matrix())) < 1e-8);

    // The resynthesized complex verifies.
    let report = verify_nahm_complex(&nf.complex).unwrap();
    assert!(report.all_pass());

    // An admissible gauge move does not change the normal form.
    let gap = ncd.pole_gap;
    let path = GaugePath {
        small: bump_path(&ncd.grid_small, 2, 0.3, PI - 0.3, 0.3),
        big: bump_path(&ncd.grid_big, 3, PI + gap + 0.05, 2.0 * PI - gap - 0.05, 0.3),
    };
    let moved = gauge_act(&ncd, &path).unwrap();
    let nf2 = normal_form(&moved).unwrap();
    assert!(dist(&nf2.at_zero.assemble(), &nf.at_zero.assemble()) < 1e-6);
    assert!(dist(&nf2.at_infinity.assemble(), &nf.at_infinity.assemble()) < 1e-6);
}

#[test]
fn flagless_normal_form_carries_the_jump_factors() {
    let ncd = to_nahm_complex(&charge_one(), &PathSpec::default()).unwrap();
    let nf = normal_form(&ncd).unwrap();
    assert!(dist(&nf.at_zero.p0, &CMat::from_row_slice(1, 1, &[cr(-3.0)])) < 1e-10);
    assert!(dist(&nf.at_zero.q0, &CMat::from_row_slice(1, 1, &[cr(1.0)])) < 1e-10);
    assert!(dist(&nf.at_zero.r0, &CMat::from_row_slice(1, 1, &[cr(0.5)])) < 1e-10);
    assert_eq!(nf.at_zero.s0.nrows(), 0);
    assert!(dist(&nf.at_infinity.q0, &CMat::from_row_slice(1, 1, &[cr(0.5)])) < 1e-10);
    assert!(dist(&nf.at_infinity.r0, &CMat::from_row_slice(1, 1, &[cr(1.0)])) < 1e-10);
    let report = verify_nahm_complex(&nf.complex).unwrap();
    assert!(report.all_pass());
}

// ---------------------------------------------------------------------------
// Failure paths of the construction itself.
// ---------------------------------------------------------------------------

#[test]
fn construction_rejects_a_singular_holonomy() {
    // Valid flagless data with A = 0: the big side cannot be built.
    let a = CMat::from_row_slice(1, 1, &[cr(0.0)]);
    let b = CMat::from_row_slice(1, 1, &[cr(3.0)]);
    let cc = CMat::from_row_slice(1, 2, &[cr(1.0), cr(-1.0)]);
    let d = CMat::from_row_slice(2, 1, &[cr(1.0), cr(1.0)]);
    let data = MonadData::unflagged(a, b, cc, d).unwrap();
    match to_nahm_complex(&data, &PathSpec::default()) {
        Err(Error::Singular { .. }) => {}
        other => panic!("expected a singularity error, got {other:?}"),
    }
}

#[test]
fn construction_rejects_a_cramped_circle() {
    // theta_inf close to the wrap-around leaves no room for the pole
    // tails on the long arc.
    let data = caloron::generate::generate_random(1, 1, 3).unwrap();
    let path = PathSpec {
        theta0: 0.0,
        theta_inf: 6.0,
        ..PathSpec::default()
    };
    match to_nahm_complex(&data, &path) {
        Err(Error::Precondition(msg)) => assert!(msg.contains("arc"), "message: {msg}"),
        other => panic!("expected a precondition error, got {other:?}"),
    }
}
