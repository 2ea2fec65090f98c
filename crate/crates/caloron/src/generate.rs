//! Seeded random construction of valid, generic monad data, plus planted
//! degenerate instances for exercising the failure paths.
//!
//! The constraints are solved exactly, in the order: eigenvalues of A, then
//! C and D in the eigenbasis (bilinear orthogonality per eigenvector), then
//! the off-diagonal of B from the quadratic equation, then A′ by a row
//! recurrence, then B′ from the remaining linear row. Residuals are at
//! round-off by construction; genericity is checked and non-generic draws
//! are retried a bounded number of times.

use crate::error::{Error, Result};
use crate::genericity::check_genericity;
use crate::linalg::{c, cr, eye, inverse, C64, CMat};
use crate::monad::MonadData;
use crate::tol::Tolerances;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const MAX_ATTEMPTS: usize = 32;

fn gaussian_c64(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * cr(std::f64::consts::FRAC_1_SQRT_2)
}

fn gaussian_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| gaussian_c64(rng))
}

/// Random unitary from the QR factorization of a Gaussian matrix.
fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let g = gaussian_mat(rng, n, n);
    g.qr().q()
}

/// Distinct eigenvalues with moduli in [0.5, 2] and pairwise separation
/// at least 0.3/n. `forced` entries are prepended verbatim.
fn distinct_eigenvalues(rng: &mut ChaCha8Rng, n: usize, forced: &[C64]) -> Vec<C64> {
    let min_sep = 0.3 / n.max(1) as f64;
    let mut out: Vec<C64> = forced.to_vec();
    let mut guard = 0;
    while out.len() < n {
        let r = rng.gen_range(0.5..2.0);
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let z = c(r * phi.cos(), r * phi.sin());
        if out.iter().all(|w| (w - z).norm() >= min_sep) {
            out.push(z);
        }
        guard += 1;
        assert!(guard < 10_000, "eigenvalue sampling stalled");
    }
    out
}

/// Core sampler: (A, B, C, D) with [A,B] + CD = 0 exactly, A having the
/// prescribed eigenvalues, expressed in a random unitary frame.
fn sample_quadruple(rng: &mut ChaCha8Rng, eigs: &[C64]) -> (CMat, CMat, CMat, CMat) {
    let k = eigs.len();
    let q = random_unitary(rng, k);
    let lambda = CMat::from_fn(k, k, |i, m| if i == m { eigs[i] } else { cr(0.0) });

    // In the eigenbasis of A: make the diagonal of CD vanish exactly by
    // pairing each row of C with an orthogonal column of D.
    let c_tilde = gaussian_mat(rng, k, 2);
    let mut d_tilde = CMat::zeros(2, k);
    for i in 0..k {
        let t = gaussian_c64(rng);
        d_tilde[(0, i)] = -t * c_tilde[(i, 1)];
        d_tilde[(1, i)] = t * c_tilde[(i, 0)];
    }
    let cd = &c_tilde * &d_tilde;
    let mut b_tilde = CMat::zeros(k, k);
    for i in 0..k {
        for m in 0..k {
            if i == m {
                b_tilde[(i, m)] = gaussian_c64(rng);
            } else {
                b_tilde[(i, m)] = -cd[(i, m)] / (eigs[i] - eigs[m]);
            }
        }
    }

    let qh = q.adjoint();
    let a = &q * &lambda * &qh;
    let b = &q * &b_tilde * &qh;
    let c_mat = &q * &c_tilde;
    let d_mat = &d_tilde * &qh;
    (a, b, c_mat, d_mat)
}

/// Extend a quadruple with flag data of degree `j`: A′ from the row
/// recurrence, B′ from the remaining row of the flag-chain equation.
/// Requires invertible A (see `extend_flag_singular` for the kernel case).
fn extend_flag(
    rng: &mut ChaCha8Rng,
    a: &CMat,
    b: &CMat,
    d: &CMat,
    j: usize,
) -> Result<(CMat, CMat, CMat)> {
    let k = a.nrows();
    if j == 0 {
        return Ok((CMat::zeros(0, k), CMat::zeros(0, k), CMat::zeros(0, 2)));
    }
    let c_prime = gaussian_mat(rng, j, 2);
    let a_prime = flag_rows_from_recurrence(b, d, &c_prime, j, k);
    // Remaining row: B′A = A′₁B + C′₁D.
    let rhs = a_prime.rows(0, 1).into_owned() * b + c_prime.rows(0, 1).into_owned() * d;
    let a_inv = inverse(a, "flag extension")?;
    let b_prime = rhs * a_inv;
    Ok((a_prime, b_prime, c_prime))
}

/// Rows of A′ from the bottom up: the last row equals D₁ and each row above
/// follows from the flag-chain equation.
fn flag_rows_from_recurrence(b: &CMat, d: &CMat, c_prime: &CMat, j: usize, k: usize) -> CMat {
    let mut rows: Vec<CMat> = vec![CMat::zeros(1, k); j];
    rows[j - 1] = d.rows(0, 1).into_owned();
    for i in (1..j).rev() {
        // Row index i is the equation "A′_{i} = A′_{i+1} B + C′_{i+1} D"
        // in one-based labels; compute row i-1 from row i.
        rows[i - 1] = &rows[i] * b + c_prime.rows(i, 1).into_owned() * d;
    }
    let mut a_prime = CMat::zeros(j, k);
    for (i, r) in rows.iter().enumerate() {
        a_prime.rows_mut(i, 1).copy_from(r);
    }
    a_prime
}

/// Generate valid generic data for the given charge and flag degree,
/// deterministically from the seed. Fails only if every retry produced
/// non-generic data, which does not happen in practice.
pub fn generate_random(k: usize, j: usize, seed: u64) -> Result<MonadData> {
    assert!(k >= 1, "charge must be positive");
    let tol = Tolerances::default();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed ^ (attempt as u64).wrapping_mul(0x9E3779B97F4A7C15));
        let eigs = distinct_eigenvalues(&mut rng, k, &[]);
        let (a, b, c_mat, d_mat) = sample_quadruple(&mut rng, &eigs);
        let (a_prime, b_prime, c_prime) = extend_flag(&mut rng, &a, &b, &d_mat, j)?;
        let data = MonadData::new(a, b, c_mat, d_mat, a_prime, b_prime, c_prime)?;
        if data.validate(&tol).is_err() {
            continue;
        }
        let report = check_genericity(&data, &tol)?;
        if report.all_pass() {
            return Ok(data);
        }
    }
    Err(Error::GeneratorExhausted {
        k,
        j,
        attempts: MAX_ATTEMPTS,
    })
}

/// Generate flagged data (j ≥ 1) whose A has a one-dimensional kernel:
/// the designed-splitting case for restriction tests. The remaining
/// genericity conditions are still required to hold.
pub fn generate_singular_a(k: usize, j: usize, seed: u64) -> Result<MonadData> {
    assert!(k >= 1 && j >= 1, "needs a flag and positive charge");
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(
            (seed ^ 0xA11CE).wrapping_add((attempt as u64).wrapping_mul(0x9E3779B97F4A7C15)),
        );
        let eigs = distinct_eigenvalues(&mut rng, k, &[cr(0.0)]);
        let (a, b, c_mat, d_mat) = sample_quadruple(&mut rng, &eigs);

        // A is singular, so the remaining flag row B′A = A′₁B + C′₁D is
        // solvable only when the right side annihilates ker A; the free
        // entries of the first row of C′ absorb that one scalar condition.
        let mut c_prime = gaussian_mat(&mut rng, j, 2);
        let a_prime = flag_rows_from_recurrence(&b, &d_mat, &c_prime, j, k);
        let u = kernel_vector(&a);
        let d1 = d_mat.rows(0, 1).into_owned();
        let d2 = d_mat.rows(1, 1).into_owned();
        let base = (a_prime.rows(0, 1).into_owned() * &b) * &u;
        let coef1 = (&d1 * &u)[(0, 0)];
        let coef2 = (&d2 * &u)[(0, 0)];
        if coef1.norm() < 1e-8 {
            continue;
        }
        let c12 = c_prime[(0, 1)];
        c_prime[(0, 0)] = -(base[(0, 0)] + c12 * coef2) / coef1;
        // Recompute A′ (its rows do not involve C′ row 1, but keep the flow
        // uniform), then solve for B′ on the row space of A.
        let a_prime = flag_rows_from_recurrence(&b, &d_mat, &c_prime, j, k);
        let rhs = a_prime.rows(0, 1).into_owned() * &b + c_prime.rows(0, 1).into_owned() * &d_mat;
        let b_prime = match solve_row_on_range(&a, &rhs) {
            Some(bp) => bp,
            None => continue,
        };
        let data = MonadData::new(a, b, c_mat, d_mat, a_prime, b_prime, c_prime)?;
        if !data.residuals().within(1e-10) {
            continue;
        }
        let report = check_genericity(&data, &Tolerances::default())?;
        if report.all_pass() {
            return Ok(data);
        }
    }
    Err(Error::GeneratorExhausted {
        k,
        j,
        attempts: MAX_ATTEMPTS,
    })
}

/// Unit kernel vector of a matrix known to have a one-dimensional kernel.
fn kernel_vector(a: &CMat) -> CMat {
    let v = crate::linalg::smallest_right_singular_vector(a);
    CMat::from_fn(a.ncols(), 1, |i, _| v[i])
}

/// Solve the row equation z·a = rhs when rhs lies in the row space of `a`
/// (rank k−1 case). Returns None if the consistency residual is large.
fn solve_row_on_range(a: &CMat, rhs: &CMat) -> Option<CMat> {
    // z a = rhs  ⇔  aᵀ zᵀ = rhsᵀ; solve by least squares via SVD.
    let at = a.transpose();
    let svd = at.svd(true, true);
    let zt = svd
        .solve(&rhs.transpose(), 1e-10)
        .ok()?;
    let z = zt.transpose();
    let res = crate::linalg::max_abs(&(&z * a - rhs));
    if res < 1e-8 * crate::linalg::max_abs(rhs).max(1.0) {
        Some(z)
    } else {
        None
    }
}

/// Flagless data with a planted common kernel: at the point (x0, y0) the
/// stacked pencil [A−y0; B−x0; D] kills the first basis vector. Requires
/// y0 away from zero so A stays invertible.
pub fn plant_common_kernel(k: usize, x0: C64, y0: C64, seed: u64) -> Result<MonadData> {
    if y0.norm() < 0.1 {
        return Err(Error::Precondition(
            "planted kernel requires |y0| >= 0.1 to keep A invertible".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    if k == 1 {
        // D = 0 makes (x0, y0) = (B, A) the degenerate point.
        return MonadData::unflagged(
            CMat::from_element(1, 1, y0),
            CMat::from_element(1, 1, x0),
            gaussian_mat(&mut rng, 1, 2),
            CMat::zeros(2, 1),
        );
    }
    let km = k - 1;
    // Lower block: an exact quadruple of size k−1 with eigenvalues away
    // from y0 (so the coupling row solve below is well posed).
    let eigs = loop {
        let e = distinct_eigenvalues(&mut rng, km, &[]);
        if e.iter().all(|z| (z - y0).norm() > 0.2) {
            break e;
        }
    };
    let (a2, b2, c_low, d2) = sample_quadruple(&mut rng, &eigs);

    let a_row = gaussian_mat(&mut rng, 1, km);
    let c_top = gaussian_mat(&mut rng, 1, 2);
    let r = &c_top * &d2;
    // Coupling row of B from the (1,2)-block of [A,B] + CD = 0.
    let shifted = eye(km) * y0 - &a2;
    let b_row = (&a_row * x0 - &a_row * &b2 - r) * inverse(&shifted, "planted kernel")?;

    let mut a = CMat::zeros(k, k);
    a[(0, 0)] = y0;
    a.view_mut((0, 1), (1, km)).copy_from(&a_row);
    a.view_mut((1, 1), (km, km)).copy_from(&a2);
    let mut b = CMat::zeros(k, k);
    b[(0, 0)] = x0;
    b.view_mut((0, 1), (1, km)).copy_from(&b_row);
    b.view_mut((1, 1), (km, km)).copy_from(&b2);
    let mut c_mat = CMat::zeros(k, 2);
    c_mat.view_mut((0, 0), (1, 2)).copy_from(&c_top);
    c_mat.view_mut((1, 0), (km, 2)).copy_from(&c_low);
    let mut d_mat = CMat::zeros(2, k);
    d_mat.view_mut((0, 1), (2, km)).copy_from(&d2);

    MonadData::unflagged(a, b, c_mat, d_mat)
}

/// Flagless data with a planted common cokernel at (x0, y0): the transpose
/// construction of `plant_common_kernel`.
pub fn plant_common_cokernel(k: usize, x0: C64, y0: C64, seed: u64) -> Result<MonadData> {
    let primal = plant_common_kernel(k, x0, y0, seed ^ 0xC0C0)?;
    // (A, B, C, D) -> (Aᵀ, Bᵀ, −Dᵀ, Cᵀ) flips the planted kernel to a
    // cokernel while preserving the quadratic equation.
    MonadData::unflagged(
        primal.a().transpose(),
        primal.b().transpose(),
        -primal.d().transpose(),
        primal.c().transpose(),
    )
}
