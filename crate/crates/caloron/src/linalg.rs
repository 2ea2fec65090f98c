//! Dense complex linear algebra underpinning the whole crate.
//!
//! Everything operates on dynamically sized `nalgebra` matrices over
//! `Complex<f64>`. Rank decisions are centralized here so that every module
//! applies the same relative threshold and the same indeterminate-gap rule.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Complex number from real and imaginary parts.
#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// Complex number from a real.
#[inline]
pub fn cr(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

/// Maximum absolute entry; zero for empty matrices.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Commutator [a, b] = ab - ba.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Conjugate-transpose shorthand used heavily by the flow module.
pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint()
}

/// Identity of the given size.
pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

// ---------------------------------------------------------------------------
// Rank decisions
// ---------------------------------------------------------------------------

/// Outcome of a singular-value rank decision.
#[derive(Debug, Clone)]
pub struct RankDecision {
    /// The decided rank (meaningful only when `indeterminate` is false).
    pub rank: usize,
    /// Singular values, descending.
    pub singular_values: Vec<f64>,
    /// Absolute cutoff that was applied (relative threshold times sigma_1).
    pub cutoff: f64,
    /// Ratio sigma_rank / sigma_{rank+1} (infinite when the tail is empty
    /// or exactly zero).
    pub gap: f64,
    /// True when the gap fell below the decision band: the caller must not
    /// treat `rank` as settled.
    pub indeterminate: bool,
}

impl RankDecision {
    /// Numerical rank of `m` with relative threshold `rel_tol` and decision
    /// band `gap_factor`. Empty matrices have rank zero, determinately.
    pub fn compute(m: &CMat, rel_tol: f64, gap_factor: f64) -> RankDecision {
        if m.nrows() == 0 || m.ncols() == 0 {
            return RankDecision {
                rank: 0,
                singular_values: vec![],
                cutoff: 0.0,
                gap: f64::INFINITY,
                indeterminate: false,
            };
        }
        let sv = m.clone().singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let smax = s[0];
        if smax == 0.0 {
            return RankDecision {
                rank: 0,
                singular_values: s,
                cutoff: 0.0,
                gap: f64::INFINITY,
                indeterminate: false,
            };
        }
        let cutoff = rel_tol * smax;
        let rank = s.iter().take_while(|&&x| x > cutoff).count();
        let gap = if rank == 0 {
            // everything rejected: gap between cutoff reference and sigma_1
            cutoff / s[0]
        } else if rank == s.len() || s[rank] == 0.0 {
            f64::INFINITY
        } else {
            s[rank - 1] / s[rank]
        };
        // Full rank with a healthy margin above the cutoff is determinate
        // even without a trailing singular value to compare against.
        let indeterminate = gap < gap_factor;
        RankDecision {
            rank,
            singular_values: s,
            cutoff,
            gap,
            indeterminate,
        }
    }

    /// True when the matrix has full column rank, determinately.
    pub fn full_column_rank(&self, ncols: usize) -> bool {
        !self.indeterminate && self.rank == ncols
    }
}

/// Orthonormal basis of the right kernel of `m`, as matrix columns.
/// Returns an n x 0 matrix when the kernel is trivial.
pub fn nullspace(m: &CMat, rel_tol: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return eye(n);
    }
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("svd with compute_v");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_tol * smax;
    // svd.v_t has min(nrows, ncols) rows; directions beyond that count are
    // automatically in the kernel but are not returned by the thin SVD, so
    // fall back to a full decomposition shape via the rank.
    let rank = svd
        .singular_values
        .iter()
        .take_while(|&&s| s > cutoff && smax > 0.0)
        .count();
    let thin = vt.nrows();
    let mut cols: Vec<CVec> = Vec::new();
    for r in rank..thin {
        cols.push(vt.row(r).adjoint());
    }
    // Directions orthogonal to all rows of v_t (when ncols > thin).
    if thin < n {
        // Complete the basis: project out span(v_t rows) from coordinate
        // vectors and orthonormalize.
        let mut basis: Vec<CVec> = (0..thin).map(|r| vt.row(r).adjoint()).collect();
        for i in 0..n {
            let mut v = CVec::zeros(n);
            v[i] = cr(1.0);
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
            let nrm = v.norm();
            if nrm > 1e-10 {
                v /= cr(nrm);
                basis.push(v.clone());
                cols.push(v);
            }
            if basis.len() == n {
                break;
            }
        }
    }
    let k = cols.len();
    CMat::from_fn(n, k, |i, j| cols[j][i])
}

/// Orthonormalize the columns of `m`, dropping numerically dependent ones.
pub fn orthonormal_cols(m: &CMat, rel_tol: f64) -> CMat {
    if m.ncols() == 0 {
        return m.clone();
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("svd with compute_u");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return CMat::zeros(m.nrows(), 0);
    }
    let cutoff = rel_tol * smax;
    let rank = svd
        .singular_values
        .iter()
        .take_while(|&&s| s > cutoff)
        .count();
    u.columns(0, rank).into_owned()
}

/// Intersection of two subspaces given by orthonormal column bases.
/// Returns an orthonormal basis of span(u) ∩ span(v).
pub fn intersect_subspaces(u: &CMat, v: &CMat, rel_tol: f64) -> CMat {
    let n = u.nrows();
    assert_eq!(n, v.nrows(), "ambient dimensions must agree");
    if u.ncols() == 0 || v.ncols() == 0 {
        return CMat::zeros(n, 0);
    }
    // x in span(u) ∩ span(v)  ⇔  x = u a = v b. Solve [u | -v] [a; b] = 0.
    let mut stacked = CMat::zeros(n, u.ncols() + v.ncols());
    stacked.columns_mut(0, u.ncols()).copy_from(u);
    stacked
        .columns_mut(u.ncols(), v.ncols())
        .copy_from(&(-v.clone()));
    let ker = nullspace(&stacked, rel_tol);
    if ker.ncols() == 0 {
        return CMat::zeros(n, 0);
    }
    let a_part = ker.rows(0, u.ncols()).into_owned();
    orthonormal_cols(&(u * a_part), rel_tol)
}

/// Preimage of span(v) under `b`: an orthonormal basis of
/// { x : b x ∈ span(v) } = ker((I - v v*) b).
pub fn preimage_under(b: &CMat, v: &CMat, rel_tol: f64) -> CMat {
    let n = b.nrows();
    let proj_out = eye(n) - v * v.adjoint();
    nullspace(&(proj_out * b), rel_tol)
}

// ---------------------------------------------------------------------------
// Eigenvalues and eigenvectors
// ---------------------------------------------------------------------------

/// Eigenvalues of a square complex matrix, via the complex Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigenvalues of a non-square matrix");
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    let schur = m.clone().schur();
    if let Some(ev) = schur.eigenvalues() {
        ev.iter().copied().collect()
    } else {
        // The complex Schur form is triangular; read the diagonal directly.
        let (_, t) = schur.unpack();
        (0..n).map(|i| t[(i, i)]).collect()
    }
}

/// A unit vector minimizing ‖(m - λI) v‖: the best available eigenvector
/// candidate for the (possibly perturbed) eigenvalue λ.
pub fn eigenvector_for(m: &CMat, lambda: C64) -> CVec {
    let n = m.nrows();
    let shifted = m - eye(n) * lambda;
    smallest_right_singular_vector(&shifted)
}

/// Right singular vector for the smallest singular value.
pub fn smallest_right_singular_vector(m: &CMat) -> CVec {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("svd with compute_v");
    // Singular values are sorted descending; the last row of v_t pairs with
    // the smallest singular value.
    let last = vt.nrows() - 1;
    vt.row(last).adjoint()
}

/// Left singular vector for the smallest singular value, returned as a
/// 1×nrows row u with u·m ≈ 0 when m is rank-deficient.
pub fn smallest_left_singular_vector(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("svd with compute_u");
    let last = u.ncols() - 1;
    u.columns(last, 1).adjoint()
}

/// All singular values, sorted descending.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    sv
}

/// Smallest and largest singular values (sigma_min, sigma_max).
pub fn extreme_singular_values(m: &CMat) -> (f64, f64) {
    if m.nrows() == 0 || m.ncols() == 0 {
        return (0.0, 0.0);
    }
    let sv = m.clone().singular_values();
    let mx = sv.iter().cloned().fold(f64::MIN, f64::max);
    let mn = sv.iter().cloned().fold(f64::MAX, f64::min);
    (mn, mx)
}

/// Solve m x = rhs for square m by LU, or report singularity.
pub fn solve(m: &CMat, rhs: &CMat, context: &'static str) -> Result<CMat> {
    let lu = m.clone().lu();
    match lu.solve(rhs) {
        Some(x) => Ok(x),
        None => {
            let (mn, mx) = extreme_singular_values(m);
            Err(Error::Singular {
                context,
                sigma_min: mn,
                sigma_max: mx,
            })
        }
    }
}

/// Inverse of a square matrix, or a singularity error.
pub fn inverse(m: &CMat, context: &'static str) -> Result<CMat> {
    solve(m, &eye(m.nrows()), context)
}

// ---------------------------------------------------------------------------
// Matrix exponential and logarithm
// ---------------------------------------------------------------------------

/// Matrix exponential (delegates to nalgebra's scaling-and-squaring).
pub fn expm(m: &CMat) -> CMat {
    if m.nrows() == 0 {
        return m.clone();
    }
    m.exp()
}

/// A matrix logarithm of an invertible matrix: returns L with exp(L) = m to
/// high accuracy. The branch is principal whenever no eigenvalue sits near
/// the negative real axis; otherwise the cut is rotated into the widest
/// angular gap of the spectrum, which still yields a genuine logarithm.
pub fn logm(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "logm of a non-square matrix");
    if n == 0 {
        return Ok(m.clone());
    }
    let eigs = eigenvalues(m);
    let (mn, mx) = extreme_singular_values(m);
    if mn <= 1e-14 * mx {
        return Err(Error::Singular {
            context: "matrix logarithm",
            sigma_min: mn,
            sigma_max: mx,
        });
    }
    // Rotate the spectrum so no eigenvalue is near the branch cut at angle pi.
    let phi = branch_rotation(&eigs)?;
    let rotated = m * c(phi.cos(), phi.sin());
    let mut log_rot = log_no_cut(&rotated)?;
    // log(e^{i phi} m) - i phi I is a logarithm of m.
    for i in 0..n {
        log_rot[(i, i)] -= c(0.0, phi);
    }
    // Verify the defining property.
    let back = expm(&log_rot);
    let err = max_abs(&(&back - m)) / max_abs(m).max(1.0);
    if err > 1e-8 {
        return Err(Error::LogBranch(format!(
            "exp(log m) mismatch {:.3e} after cut rotation {:.3}",
            err, phi
        )));
    }
    Ok(log_rot)
}

/// Angle phi such that every eigenvalue of e^{i phi} m stays away from the
/// negative real axis.
fn branch_rotation(eigs: &[C64]) -> Result<f64> {
    // Find the direction (angle) of the widest gap between eigenvalue phases,
    // then rotate that gap's midpoint onto the cut at angle pi.
    let mut phases: Vec<f64> = eigs.iter().map(|z| z.arg()).collect();
    phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = phases.len();
    let tau = std::f64::consts::TAU;
    let mut best_gap = -1.0;
    let mut best_mid = std::f64::consts::PI;
    for i in 0..m {
        let a = phases[i];
        let b = if i + 1 < m { phases[i + 1] } else { phases[0] + tau };
        let gap = b - a;
        if gap > best_gap {
            best_gap = gap;
            best_mid = 0.5 * (a + b);
        }
    }
    if best_gap <= 1e-9 {
        return Err(Error::LogBranch(
            "spectrum phases leave no angular gap for a branch cut".into(),
        ));
    }
    // Rotate so that best_mid maps to pi.
    let mut phi = std::f64::consts::PI - best_mid;
    // Normalize to (-pi, pi] for tidiness; any representative works.
    while phi > std::f64::consts::PI {
        phi -= tau;
    }
    while phi <= -std::f64::consts::PI {
        phi += tau;
    }
    Ok(phi)
}

/// Principal log of a matrix whose spectrum avoids the negative real axis:
/// inverse scaling and squaring with Denman-Beavers square roots, finished
/// by the Gregory series for log(I + x).
fn log_no_cut(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut squarings = 0usize;
    while max_abs(&(&a - eye(n))) > 0.25 {
        a = sqrtm_db(&a)?;
        squarings += 1;
        if squarings > 60 {
            return Err(Error::LogBranch(
                "square-root staircase did not contract toward the identity".into(),
            ));
        }
    }
    let x = &a - eye(n);
    // log(I + x) = sum_{t>=1} (-1)^{t+1} x^t / t, ‖x‖ ≤ 1/4 so 40 terms give
    // far below double-precision truncation.
    let mut term = x.clone();
    let mut acc = CMat::zeros(n, n);
    for t in 1..=40 {
        let sign = if t % 2 == 1 { 1.0 } else { -1.0 };
        acc += &term * cr(sign / t as f64);
        term = &term * &x;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    Ok(acc * cr((1u64 << squarings) as f64))
}

/// Matrix square root by the Denman-Beavers iteration. Quadratically
/// convergent when no eigenvalue lies on the closed negative real axis.
fn sqrtm_db(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let mut y = m.clone();
    let mut z = eye(n);
    for _ in 0..100 {
        let y_inv = inverse(&y, "square-root iteration")?;
        let z_inv = inverse(&z, "square-root iteration")?;
        let y_next = (&y + z_inv) * cr(0.5);
        let z_next = (&z + y_inv) * cr(0.5);
        let delta = max_abs(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if delta < 1e-15 * max_abs(&y).max(1.0) {
            return Ok(y);
        }
    }
    Err(Error::NoConvergence {
        what: "Denman-Beavers square root",
        steps: 100,
        last: f64::NAN,
    })
}

// ---------------------------------------------------------------------------
// Grids, finite differences, interpolation, transport
// ---------------------------------------------------------------------------

/// First-derivative weights at `x1` for samples at (x0, x1, x2), second-order
/// accurate on nonuniform spacing.
pub fn fd3_weights_mid(x0: f64, x1: f64, x2: f64) -> (f64, f64, f64) {
    let h1 = x1 - x0;
    let h2 = x2 - x1;
    let w0 = -h2 / (h1 * (h1 + h2));
    let w1 = (h2 - h1) / (h1 * h2);
    let w2 = h1 / (h2 * (h1 + h2));
    (w0, w1, w2)
}

/// One-sided first-derivative weights at `x0` for samples at (x0, x1, x2).
pub fn fd3_weights_left(x0: f64, x1: f64, x2: f64) -> (f64, f64, f64) {
    let h1 = x1 - x0;
    let h2 = x2 - x1;
    let w0 = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
    let w1 = (h1 + h2) / (h1 * h2);
    let w2 = -h1 / (h2 * (h1 + h2));
    (w0, w1, w2)
}

/// One-sided first-derivative weights at `x2` for samples at (x0, x1, x2).
pub fn fd3_weights_right(x0: f64, x1: f64, x2: f64) -> (f64, f64, f64) {
    let h1 = x1 - x0;
    let h2 = x2 - x1;
    let w0 = h2 / (h1 * (h1 + h2));
    let w1 = -(h1 + h2) / (h1 * h2);
    let w2 = (h1 + 2.0 * h2) / (h2 * (h1 + h2));
    (w0, w1, w2)
}

/// Piecewise-cubic Lagrange interpolation of matrix samples on a strictly
/// increasing grid. Fourth-order accurate in the local spacing.
pub fn interp_cubic(ts: &[f64], vals: &[CMat], t: f64) -> CMat {
    let n = ts.len();
    assert!(n >= 2, "need at least two samples");
    assert_eq!(n, vals.len());
    if n < 4 {
        // Linear fallback for very short grids.
        let i = locate(ts, t).min(n - 2);
        let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
        return &vals[i] * cr(1.0 - w) + &vals[i + 1] * cr(w);
    }
    let i = locate(ts, t);
    // Center a 4-point stencil around the interval containing t.
    let lo = i.saturating_sub(1).min(n - 4);
    let xs = &ts[lo..lo + 4];
    let mut acc = CMat::zeros(vals[0].nrows(), vals[0].ncols());
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (t - xs[b]) / (xs[a] - xs[b]);
            }
        }
        acc += &vals[lo + a] * cr(w);
    }
    acc
}

/// Index of the grid interval containing `t` (clamped).
pub fn locate(ts: &[f64], t: f64) -> usize {
    let n = ts.len();
    if t <= ts[0] {
        return 0;
    }
    if t >= ts[n - 1] {
        return n - 2;
    }
    match ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i - 1,
    }
}

/// Parallel transport for the linear ODE Psi' = F(t) Psi from `t0` to `t1`
/// with classical RK4 on `steps` uniform substeps. Returns Psi(t1) for
/// Psi(t0) = I.
pub fn rk4_transport<F>(f: F, t0: f64, t1: f64, steps: usize, dim: usize) -> CMat
where
    F: Fn(f64) -> CMat,
{
    let mut psi = eye(dim);
    let h = (t1 - t0) / steps as f64;
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t) * &psi;
        let k2 = f(t + 0.5 * h) * (&psi + &k1 * cr(0.5 * h));
        let k3 = f(t + 0.5 * h) * (&psi + &k2 * cr(0.5 * h));
        let k4 = f(t + h) * (&psi + &k3 * cr(h));
        psi += (k1 + k2 * cr(2.0) + k3 * cr(2.0) + k4) * cr(h / 6.0);
        t += h;
    }
    psi
}

/// Least-squares straight line y = slope * x + intercept.
pub fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    assert!(xs.len() == ys.len() && xs.len() >= 2);
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}
