//! Genericity verdicts on hand-checked instances, and generator contracts.

mod common;

use caloron::generate::{generate_random, plant_common_cokernel, plant_common_kernel};
use caloron::genericity::check_genericity;
use caloron::linalg::{c, cr, CMat};
use caloron::tol::Tolerances;
use common::{charge_one, charge_one_degenerate, charge_one_flagged};

#[test]
fn charge_one_is_generic() {
    let rep = check_genericity(&charge_one(), &Tolerances::default()).unwrap();
    assert!(rep.point_injectivity.passed, "{:?}", rep.point_injectivity);
    assert!(rep.point_surjectivity.passed);
    assert!(rep.flag_pencil.passed);
    assert!(rep.monodromy.passed);
    assert!(rep.all_pass());
}

#[test]
fn charge_one_flagged_is_generic() {
    let rep = check_genericity(&charge_one_flagged(), &Tolerances::default()).unwrap();
    assert!(rep.all_pass(), "{:?}", rep);
}

#[test]
fn zero_cd_fails_injectivity_with_known_witness() {
    let rep = check_genericity(&charge_one_degenerate(), &Tolerances::default()).unwrap();
    assert!(!rep.point_injectivity.passed);
    let w = rep
        .point_injectivity
        .witness
        .as_ref()
        .expect("failing condition carries a witness");
    assert!((w.x.unwrap() - cr(3.0)).norm() < 1e-9);
    assert!((w.y.unwrap() - cr(2.0)).norm() < 1e-9);
    assert!(w.residual < 1e-9);
    // With C = D = 0 the dual condition fails too.
    assert!(!rep.point_surjectivity.passed);
}

#[test]
fn generated_data_satisfies_equations() {
    for (k, j) in [(1, 0), (2, 0), (3, 1), (2, 2)] {
        let data = generate_random(k, j, 42).unwrap();
        let r = data.residuals();
        assert!(
            r.quadratic <= 1e-12 && r.flag_chain <= 1e-12 && r.first_row <= 1e-12,
            "k={k} j={j}: {r:?}"
        );
        assert_eq!(data.k(), k);
        assert_eq!(data.j(), j);
    }
}

#[test]
fn generated_data_is_generic() {
    for (k, j) in [(1, 0), (2, 1), (3, 2)] {
        let data = generate_random(k, j, 7).unwrap();
        let rep = check_genericity(&data, &Tolerances::default()).unwrap();
        assert!(rep.all_pass(), "k={k} j={j}: {rep:?}");
    }
}

#[test]
fn distinct_seeds_give_distinct_spectra() {
    let d1 = generate_random(2, 0, 1).unwrap();
    let d2 = generate_random(2, 0, 2).unwrap();
    let e1 = caloron::linalg::eigenvalues(d1.b());
    let e2 = caloron::linalg::eigenvalues(d2.b());
    let far = e1
        .iter()
        .zip(&e2)
        .any(|(a, b)| (a - b).norm() > 1e-6);
    assert!(far, "two seeds produced the same B spectrum");
}

#[test]
fn same_seed_reproduces_data() {
    let d1 = generate_random(3, 1, 99).unwrap();
    let d2 = generate_random(3, 1, 99).unwrap();
    assert_eq!(caloron::linalg::max_abs(&(d1.a() - d2.a())), 0.0);
    assert_eq!(caloron::linalg::max_abs(&(d1.c_prime() - d2.c_prime())), 0.0);
}

#[test]
fn genericity_flags_invariant_under_group_action() {
    let data = generate_random(2, 1, 5).unwrap();
    let g = CMat::from_row_slice(
        2,
        2,
        &[c(1.0, 0.5), cr(0.3), cr(-0.2), c(0.9, -0.1)],
    );
    let acted = data.gl_act(&g).unwrap();
    let tol = Tolerances::default();
    let r0 = check_genericity(&data, &tol).unwrap();
    let r1 = check_genericity(&acted, &tol).unwrap();
    assert_eq!(r0.point_injectivity.passed, r1.point_injectivity.passed);
    assert_eq!(r0.point_surjectivity.passed, r1.point_surjectivity.passed);
    assert_eq!(r0.flag_pencil.passed, r1.flag_pencil.passed);
    assert_eq!(r0.monodromy.passed, r1.monodromy.passed);
}

#[test]
fn planted_kernel_fails_injectivity_at_requested_point() {
    let (x0, y0) = (c(0.7, -0.3), c(-1.2, 0.4));
    let data = plant_common_kernel(3, x0, y0, 13).unwrap();
    assert!(data.residuals().within(1e-10));
    let rep = check_genericity(&data, &Tolerances::default()).unwrap();
    assert!(!rep.point_injectivity.passed);
    let w = rep.point_injectivity.witness.as_ref().unwrap();
    assert!((w.x.unwrap() - x0).norm() < 1e-7, "x witness {:?}", w.x);
    assert!((w.y.unwrap() - y0).norm() < 1e-7, "y witness {:?}", w.y);
}

#[test]
fn planted_cokernel_fails_surjectivity_at_requested_point() {
    let (x0, y0) = (c(-0.4, 0.9), c(0.8, 0.6));
    let data = plant_common_cokernel(3, x0, y0, 29).unwrap();
    assert!(data.residuals().within(1e-10));
    let rep = check_genericity(&data, &Tolerances::default()).unwrap();
    assert!(!rep.point_surjectivity.passed);
    let w = rep.point_surjectivity.witness.as_ref().unwrap();
    assert!((w.x.unwrap() - x0).norm() < 1e-7);
    assert!((w.y.unwrap() - y0).norm() < 1e-7);
}

#[test]
fn monodromy_condition_reduces_to_a_invertibility_when_unflagged() {
    let data = charge_one();
    let rep = check_genericity(&data, &Tolerances::default()).unwrap();
    // N = A = [2]: condition number 1, passes.
    assert!(rep.monodromy.passed);
    assert!(rep.monodromy.condition_number.unwrap() < 1.0 + 1e-12);
}

#[test]
fn krylov_full_rank_matches_pencil_hypothesis_on_small_random_instances() {
    use caloron::linalg::{eigenvalues, eye, nullspace};
    use caloron::monad::krylov_basis;
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for d in 2..=6usize {
        for _ in 0..8 {
            let t = CMat::from_fn(d, d, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let v = CMat::from_fn(1, d, |_, _| {
                if rng.gen_bool(0.3) {
                    cr(0.0)
                } else {
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                }
            });
            let kb = krylov_basis(&t, &v);
            // Hypothesis: [T - lambda; v] injective for all lambda. It can
            // only fail at eigenvalues of T, so test those exhaustively.
            let mut hypothesis = true;
            for lam in eigenvalues(&t) {
                let mut stacked = CMat::zeros(d + 1, d);
                stacked.rows_mut(0, d).copy_from(&(&t - eye(d) * lam));
                stacked.rows_mut(d, 1).copy_from(&v);
                if nullspace(&stacked, 1e-9).ncols() > 0 {
                    hypothesis = false;
                    break;
                }
            }
            assert_eq!(kb.full_rank, hypothesis, "d={d}");
        }
    }
}
