//! The four genericity conditions: pointwise injectivity and surjectivity of
//! the monad pencils, surjectivity of the flag pencil in x alone, and
//! invertibility of the monodromy matrix N.
//!
//! Failing conditions always carry a re-verified witness; borderline rank
//! decisions are reported as indeterminate rather than silently passed.

use crate::error::Result;
use crate::linalg::{
    c, eigenvalues, eye, intersect_subspaces, max_abs, nullspace, preimage_under,
    smallest_left_singular_vector, CMat, CVec, C64, RankDecision,
};
use crate::monad::{shift_pair, MonadData};
use crate::tol::Tolerances;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// A point (x, y) and vector at which a pencil condition degenerates.
/// `residual` is the re-verified size of the degeneracy (relative).
#[derive(Debug, Clone)]
pub struct Witness {
    pub x: Option<C64>,
    pub y: Option<C64>,
    pub vector: CVec,
    pub residual: f64,
}

/// Verdict for one genericity condition.
#[derive(Debug, Clone)]
pub struct ConditionOutcome {
    /// True when the condition holds determinately.
    pub passed: bool,
    /// True when some rank decision on the verdict path was borderline;
    /// `passed` is false in that case but no witness may exist.
    pub indeterminate: bool,
    /// First verified witness, when the condition fails.
    pub witness: Option<Witness>,
    /// All verified witnesses (distinct degeneration points).
    pub witnesses: Vec<Witness>,
    /// Condition number, for the invertibility condition.
    pub condition_number: Option<f64>,
}

impl ConditionOutcome {
    fn pass() -> Self {
        ConditionOutcome {
            passed: true,
            indeterminate: false,
            witness: None,
            witnesses: vec![],
            condition_number: None,
        }
    }

    fn fail(witnesses: Vec<Witness>) -> Self {
        ConditionOutcome {
            passed: false,
            indeterminate: false,
            witness: witnesses.first().cloned(),
            witnesses,
            condition_number: None,
        }
    }

    fn indeterminate() -> Self {
        ConditionOutcome {
            passed: false,
            indeterminate: true,
            witness: None,
            witnesses: vec![],
            condition_number: None,
        }
    }
}

/// Outcome of all four genericity conditions.
#[derive(Debug, Clone)]
pub struct GenericityReport {
    /// [A−y; B−x; D] injective for all (x, y).
    pub point_injectivity: ConditionOutcome,
    /// [x−B, A−y, C] surjective for all (x, y).
    pub point_surjectivity: ConditionOutcome,
    /// The flag pencil, linear in x alone, surjective for all x
    /// (vacuous at j = 0).
    pub flag_pencil: ConditionOutcome,
    /// The monodromy matrix N invertible.
    pub monodromy: ConditionOutcome,
    /// Tolerances every decision used.
    pub tol: Tolerances,
}

impl GenericityReport {
    pub fn all_pass(&self) -> bool {
        self.point_injectivity.passed
            && self.point_surjectivity.passed
            && self.flag_pencil.passed
            && self.monodromy.passed
    }

    pub fn any_indeterminate(&self) -> bool {
        self.point_injectivity.indeterminate
            || self.point_surjectivity.indeterminate
            || self.flag_pencil.indeterminate
            || self.monodromy.indeterminate
    }
}

/// Evaluate all four genericity conditions.
pub fn check_genericity(data: &MonadData, tol: &Tolerances) -> Result<GenericityReport> {
    let point_injectivity = common_kernel_condition(
        data.a(),
        data.b(),
        data.d(),
        data.scale(),
        tol,
    );
    // The dual condition: a row u with u(B−x) = 0, u(A−y) = 0, uC = 0 is a
    // common kernel vector of the plain transposes, with C promoted to the
    // constraint slot D occupies in the primal condition.
    let point_surjectivity = common_kernel_condition(
        &data.a().transpose(),
        &data.b().transpose(),
        &data.c().transpose(),
        data.scale(),
        tol,
    );
    let flag_pencil = flag_pencil_condition(data, tol);
    let monodromy = monodromy_condition(data, tol);
    Ok(GenericityReport {
        point_injectivity,
        point_surjectivity,
        flag_pencil,
        monodromy,
        tol: *tol,
    })
}

/// Does some (x, y) admit v ≠ 0 with (a−y)v = 0, (b−x)v = 0, dv = 0?
///
/// y must be an eigenvalue of `a`. For each eigenvalue cluster, the common
/// kernel S = ker(a−y) ∩ ker(d) is shrunk to its largest b-invariant
/// subspace by the preimage iteration; any surviving direction contains a
/// b-eigenvector, whose eigenvalue supplies x. Witnesses are re-verified
/// against the original matrices before they are reported.
fn common_kernel_condition(
    a: &CMat,
    b: &CMat,
    d: &CMat,
    scale: f64,
    tol: &Tolerances,
) -> ConditionOutcome {
    let k = a.nrows();
    let mut witnesses: Vec<Witness> = Vec::new();
    let mut saw_indeterminate = false;
    for y in cluster_representatives(&eigenvalues(a)) {
        let shifted = a - eye(k) * y;
        let rd = RankDecision::compute(&shifted, tol.rank_rel, tol.rank_gap);
        if rd.indeterminate {
            saw_indeterminate = true;
        }
        let ker_a = nullspace(&shifted, tol.rank_rel);
        if ker_a.ncols() == 0 {
            continue;
        }
        let ker_d = nullspace(d, tol.rank_rel);
        if ker_d.ncols() == 0 {
            continue;
        }
        let mut v = intersect_subspaces(&ker_a, &ker_d, tol.rank_rel);
        // Largest b-invariant subspace inside v.
        while v.ncols() > 0 {
            let pre = preimage_under(b, &v, tol.rank_rel);
            let next = intersect_subspaces(&v, &pre, tol.rank_rel);
            if next.ncols() == v.ncols() {
                break;
            }
            v = next;
        }
        if v.ncols() == 0 {
            continue;
        }
        // Restrict b to the invariant subspace and pick an eigenvector.
        let t_small = v.adjoint() * b * &v;
        for x in cluster_representatives(&eigenvalues(&t_small)) {
            let w = crate::linalg::eigenvector_for(&t_small, x);
            let mut vec: CVec = &v * w;
            let nrm = vec.norm();
            if nrm < 1e-14 {
                continue;
            }
            vec /= crate::linalg::cr(nrm);
            let r1 = ((a - eye(k) * y) * &vec).norm();
            let r2 = ((b - eye(k) * x) * &vec).norm();
            let r3 = (d * &vec).norm();
            let residual = r1.max(r2).max(r3) / scale;
            if residual <= 1e3 * tol.rank_rel {
                witnesses.push(Witness {
                    x: Some(x),
                    y: Some(y),
                    vector: vec,
                    residual,
                });
                break;
            }
            saw_indeterminate = true;
        }
    }
    if !witnesses.is_empty() {
        ConditionOutcome::fail(witnesses)
    } else if saw_indeterminate {
        ConditionOutcome::indeterminate()
    } else {
        ConditionOutcome::pass()
    }
}

/// Merge near-duplicate eigenvalues into cluster representatives.
fn cluster_representatives(eigs: &[C64]) -> Vec<C64> {
    let scale = eigs
        .iter()
        .map(|z| z.norm())
        .fold(1.0, f64::max);
    let tol = 1e-7 * scale;
    let mut reps: Vec<(C64, usize)> = Vec::new();
    for &e in eigs {
        match reps.iter_mut().find(|(r, _)| (*r - e).norm() < tol) {
            Some((r, n)) => {
                // Running mean keeps the representative centered.
                *r = (*r * crate::linalg::cr(*n as f64) + e)
                    / crate::linalg::cr((*n + 1) as f64);
                *n += 1;
            }
            None => reps.push((e, 1)),
        }
    }
    reps.into_iter().map(|(r, _)| r).collect()
}

/// The flag pencil R(x) = R₀ + xR₁ with block rows
/// [x−B, A, C, 0], [[−B′;0], A′, C′, x−s], [0, 0, (1 0), −e₊]
/// must be surjective for every x. Vacuous at j = 0.
fn flag_pencil_condition(data: &MonadData, tol: &Tolerances) -> ConditionOutcome {
    let (k, j) = (data.k(), data.j());
    if j == 0 {
        return ConditionOutcome::pass();
    }
    let rows = k + j + 1;
    let cols = 2 * k + 2 + j;
    let (s, eplus) = shift_pair(j);

    let mut r0 = CMat::zeros(rows, cols);
    r0.view_mut((0, 0), (k, k)).copy_from(&(-data.b()));
    r0.view_mut((0, k), (k, k)).copy_from(data.a());
    r0.view_mut((0, 2 * k), (k, 2)).copy_from(data.c());
    r0.view_mut((k, 0), (j, k))
        .copy_from(&(-data.b_prime_padded()));
    r0.view_mut((k, k), (j, k)).copy_from(data.a_prime());
    r0.view_mut((k, 2 * k), (j, 2)).copy_from(data.c_prime());
    r0.view_mut((k, 2 * k + 2), (j, j)).copy_from(&(-&s));
    r0[(k + j, 2 * k)] = crate::linalg::cr(1.0);
    r0.view_mut((k + j, 2 * k + 2), (1, j))
        .copy_from(&(-&eplus));

    let mut r1 = CMat::zeros(rows, cols);
    r1.view_mut((0, 0), (k, k)).copy_from(&eye(k));
    r1.view_mut((k, 2 * k + 2), (j, j)).copy_from(&eye(j));

    pencil_surjectivity(&r0, &r1, data.scale(), tol, 0xF1A6)
}

/// Surjectivity of the rectangular pencil r0 + x·r1 for all x, decided by
/// compressed-pencil candidate enumeration plus direct verification.
///
/// Candidates: for a random square compression Π and base point x₀ with
/// (r0 + x₀r1)Π invertible, every degeneration point solves
/// x = x₀ − 1/μ with μ a nonzero eigenvalue of ((r(x₀)Π)⁻¹ r1 Π).
/// Each candidate is confirmed or discarded by a singular-value rank test on
/// the uncompressed pencil. Two independent compressions guard against
/// candidate loss through an unlucky Π.
pub(crate) fn pencil_surjectivity(
    r0: &CMat,
    r1: &CMat,
    scale: f64,
    tol: &Tolerances,
    salt: u64,
) -> ConditionOutcome {
    let rows = r0.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE ^ salt);
    let mut candidates: Vec<C64> = Vec::new();
    let mut identically_deficient = false;

    for _compression in 0..2 {
        let pi = CMat::from_fn(r0.ncols(), rows, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let mut found_base = false;
        for _attempt in 0..6 {
            let x0 = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let rx0 = (r0 + r1 * x0) * &pi;
            let lu = rx0.clone().lu();
            let w = match lu.solve(&(r1 * &pi)) {
                Some(w) => w,
                None => continue,
            };
            // Guard against a nearly singular base point slipping past LU.
            let (mn, mx) = crate::linalg::extreme_singular_values(&rx0);
            if mn <= 1e-12 * mx {
                continue;
            }
            found_base = true;
            for mu in eigenvalues(&w) {
                if mu.norm() > 1e-8 {
                    candidates.push(x0 - mu.inv());
                }
            }
            break;
        }
        if !found_base {
            // The compressed pencil is singular at every probed base point:
            // treat the pencil as identically deficient and verify directly.
            identically_deficient = true;
        }
    }

    if identically_deficient {
        // Confirm at a few random points; any verified deficiency is a witness.
        for _ in 0..3 {
            let x = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if let Some(w) = verify_deficiency(r0, r1, x, scale, tol) {
                return ConditionOutcome::fail(vec![w]);
            }
        }
        return ConditionOutcome::indeterminate();
    }

    let mut witnesses: Vec<Witness> = Vec::new();
    let mut saw_indeterminate = false;
    for x in cluster_representatives(&candidates) {
        let rx = r0 + r1 * x;
        let rd = RankDecision::compute(&rx, tol.rank_rel, tol.rank_gap);
        if rd.indeterminate {
            saw_indeterminate = true;
            continue;
        }
        if rd.rank < rows {
            if let Some(w) = verify_deficiency(r0, r1, x, scale, tol) {
                if !witnesses
                    .iter()
                    .any(|e| (e.x.unwrap() - w.x.unwrap()).norm() < 1e-6)
                {
                    witnesses.push(w);
                }
            }
        }
    }
    if !witnesses.is_empty() {
        ConditionOutcome::fail(witnesses)
    } else if saw_indeterminate {
        ConditionOutcome::indeterminate()
    } else {
        ConditionOutcome::pass()
    }
}

/// Re-verify a claimed rank deficiency of r0 + x·r1 and package the witness.
fn verify_deficiency(
    r0: &CMat,
    r1: &CMat,
    x: C64,
    scale: f64,
    tol: &Tolerances,
) -> Option<Witness> {
    let rx = r0 + r1 * x;
    let u = smallest_left_singular_vector(&rx);
    let residual = max_abs(&(&u * &rx)) / scale;
    if residual <= 1e3 * tol.rank_rel {
        Some(Witness {
            x: Some(x),
            y: None,
            vector: CVec::from_fn(u.ncols(), |i, _| u[(0, i)]),
            residual,
        })
    } else {
        None
    }
}

/// Invertibility of N, with its condition number.
fn monodromy_condition(data: &MonadData, tol: &Tolerances) -> ConditionOutcome {
    let n = data.n_matrix();
    let dim = n.nrows();
    let rd = RankDecision::compute(&n, tol.rank_rel, tol.rank_gap);
    let (mn, mx) = crate::linalg::extreme_singular_values(&n);
    let cond = if mn > 0.0 { mx / mn } else { f64::INFINITY };
    let mut out = if rd.indeterminate {
        ConditionOutcome::indeterminate()
    } else if rd.rank == dim {
        ConditionOutcome::pass()
    } else {
        let u = smallest_left_singular_vector(&n);
        let residual = max_abs(&(&u * &n)) / data.scale();
        ConditionOutcome::fail(vec![Witness {
            x: None,
            y: None,
            vector: CVec::from_fn(u.ncols(), |i, _| u[(0, i)]),
            residual,
        }])
    };
    out.condition_number = Some(cond);
    out
}
