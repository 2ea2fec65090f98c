//! Nahm complexes on the circle.
//!
//! A complex lives on two arcs of a circle of circumference 2π: a short
//! interval [θ₀, θ∞] carrying a rank-k pair (α, β) and a long arc
//! [θ∞, θ₀ + 2π] carrying a rank-(k+j) pair, glued at the two junctions.
//! For j ≥ 1 the long-arc fields have first-order poles at both ends with
//! prescribed residues; for j = 0 they extend to the ends and the gluing
//! defect of β is a rank-one jump with stored factors.
//!
//! Everything here is discretized: fields are sampled on explicit grids
//! and interpreted piecewise (cubic interpolation for transport, finite
//! differences for derivatives). The pair (α, β) is covariantly constant,
//! dβ/dθ + (1/c)[α, β] = 0, where c is the stored `gauge_factor`: the
//! coefficient in the gauge action α ↦ gαg⁻¹ − c·(dg/dθ)g⁻¹. With the
//! default c = 1/2 the connection residues sit at quarter-integer weights
//! (2a − j − 1)/4; setting c = 1 recovers the unit-speed convention in
//! which the covariant derivative is d/dθ + [α, ·].

use crate::error::{Error, Result};
use crate::linalg::{
    cr, expm, eye, fd3_weights_left, fd3_weights_mid, fd3_weights_right, frob, interp_cubic,
    inverse, line_fit, logm, max_abs, rk4_transport, singular_values, RankDecision, CMat,
};
use crate::monad::{shift_pair, MonadData};
use crate::resolutions::{big_endomorphism, transported_boundary_form};
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Sampling layout
// ---------------------------------------------------------------------------

/// Where and how densely the circle is sampled.
///
/// Both intervals get `samples_per_interval` uniform cells. When flag
/// lines are present the long arc additionally gets `pole_tail_samples`
/// geometrically spaced points inside each pole zone, starting at distance
/// `t_floor` from the end; the pole zones occupy a fifth of the short
/// interval's length on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    /// Junction carrying the zero-fiber data.
    pub theta0: f64,
    /// Junction carrying the infinity-fiber data; must exceed `theta0` by
    /// less than a full turn.
    pub theta_inf: f64,
    /// Uniform cells per interval (the middle region, for a flagged arc).
    pub samples_per_interval: usize,
    /// Geometric samples per pole tail (ignored when j = 0).
    pub pole_tail_samples: usize,
    /// Distance of the innermost tail sample from the pole.
    pub t_floor: f64,
    /// The coefficient c of the gauge action; see the module notes.
    pub gauge_factor: f64,
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec {
            theta0: 0.0,
            theta_inf: std::f64::consts::PI,
            samples_per_interval: 512,
            pole_tail_samples: 96,
            t_floor: 1e-6,
            gauge_factor: 0.5,
        }
    }
}

impl PathSpec {
    fn validate(&self) -> Result<()> {
        let span = self.theta_inf - self.theta0;
        if !(span > 0.0 && span < 2.0 * std::f64::consts::PI) {
            return Err(Error::Precondition(format!(
                "junctions must satisfy theta0 < theta_inf < theta0 + 2 pi, got {} and {}",
                self.theta0, self.theta_inf
            )));
        }
        if self.samples_per_interval < 16 {
            return Err(Error::Precondition(
                "need at least 16 cells per interval".into(),
            ));
        }
        if self.pole_tail_samples < 8 {
            return Err(Error::Precondition(
                "need at least 8 samples per pole tail".into(),
            ));
        }
        if !(self.t_floor > 0.0) {
            return Err(Error::Precondition("t_floor must be positive".into()));
        }
        if !(self.gauge_factor > 0.0 && self.gauge_factor.is_finite()) {
            return Err(Error::Precondition(
                "the gauge factor must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// The complex
// ---------------------------------------------------------------------------

/// Boundary decoration of the long arc.
#[derive(Debug, Clone)]
pub enum NahmExtra {
    /// Flagged case (j ≥ 1): the distinguished flag direction at each pole,
    /// a unit column in C^{k+j} supported in the flag block.
    Flag { v0: CMat, v_inf: CMat },
    /// Flagless case: rank-one factors of the β jump at each junction,
    /// with u a k×1 column and w a 1×k row so that the jump equals u·w.
    Jump {
        u0: CMat,
        w0: CMat,
        u_inf: CMat,
        w_inf: CMat,
    },
}

/// A sampled Nahm complex on the circle.
///
/// Grids are strictly increasing; `grid_small` covers [θ₀, θ∞] including
/// both ends, and `grid_big` covers the long arc up to θ₀ + 2π. For j ≥ 1
/// the long-arc endpoints themselves are excluded (the fields have poles
/// there) and `pole_gap` records the half-width of each pole zone; the
/// innermost samples start at the construction's `t_floor`. For j = 0 the
/// endpoints are included and `pole_gap` is zero.
///
/// Fields between samples are understood by piecewise interpolation; all
/// verification derivatives are second-order finite differences on the
/// stored samples.
#[derive(Debug, Clone)]
pub struct NahmComplexData {
    pub theta0: f64,
    pub theta_inf: f64,
    /// k: rank on the short interval.
    pub rank_small: usize,
    /// k + j: rank on the long arc.
    pub rank_big: usize,
    pub grid_small: Vec<f64>,
    pub alpha_small: Vec<CMat>,
    pub beta_small: Vec<CMat>,
    pub grid_big: Vec<f64>,
    pub alpha_big: Vec<CMat>,
    pub beta_big: Vec<CMat>,
    /// Gluing into the long arc at the zero junction, (k+j)×k.
    pub i0: CMat,
    /// Projection back at the zero junction, k×(k+j).
    pub pi0: CMat,
    pub i_inf: CMat,
    pub pi_inf: CMat,
    /// Residue of the connection at each pole in the inward coordinate,
    /// restricted to the flag block: diag(c·(2a − j − 1)/2), j×j.
    pub x_res: CMat,
    /// Residue of β at each pole, restricted to the flag block: minus the
    /// lower shift, j×j.
    pub s_res: CMat,
    pub extra: NahmExtra,
    /// The coefficient c of the gauge action used throughout.
    pub gauge_factor: f64,
    /// Half-width of each pole zone on the long arc (0 when j = 0).
    pub pole_gap: f64,
}

impl NahmComplexData {
    /// Number of flag lines j.
    pub fn flag_degree(&self) -> usize {
        self.rank_big - self.rank_small
    }

    /// Length of the long arc.
    pub fn big_length(&self) -> f64 {
        2.0 * std::f64::consts::PI - (self.theta_inf - self.theta0)
    }

    /// Right endpoint of the long arc (θ₀ plus a full turn).
    pub fn big_end(&self) -> f64 {
        self.theta_inf + self.big_length()
    }

    fn structural_check(&self) -> Result<()> {
        let k = self.rank_small;
        let kj = self.rank_big;
        let j = kj.checked_sub(k).ok_or_else(|| {
            Error::Precondition("the long-arc rank must be at least the short one".into())
        })?;
        if k == 0 {
            return Err(Error::Precondition("rank must be positive".into()));
        }
        for (name, grid, fields) in [
            ("alpha_small", &self.grid_small, &self.alpha_small),
            ("beta_small", &self.grid_small, &self.beta_small),
            ("alpha_big", &self.grid_big, &self.alpha_big),
            ("beta_big", &self.grid_big, &self.beta_big),
        ] {
            if grid.len() != fields.len() {
                return Err(Error::Precondition(format!(
                    "{name}: {} samples on a grid of {} points",
                    fields.len(),
                    grid.len()
                )));
            }
            if grid.len() < 3 {
                return Err(Error::Precondition(format!("{name}: need at least 3 samples")));
            }
            let dim = if name.ends_with("small") { k } else { kj };
            for m in fields.iter() {
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::Shape {
                        field: "field sample",
                        expected: format!("{dim}x{dim}"),
                        found: format!("{}x{}", m.nrows(), m.ncols()),
                    });
                }
            }
        }
        for grid in [&self.grid_small, &self.grid_big] {
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Precondition("grids must be strictly increasing".into()));
            }
        }
        let shapes = [
            ("i0", &self.i0, kj, k),
            ("pi0", &self.pi0, k, kj),
            ("i_inf", &self.i_inf, kj, k),
            ("pi_inf", &self.pi_inf, k, kj),
            ("x_res", &self.x_res, j, j),
            ("s_res", &self.s_res, j, j),
        ];
        for (field, m, r, c) in shapes {
            if m.nrows() != r || m.ncols() != c {
                return Err(Error::Shape {
                    field,
                    expected: format!("{r}x{c}"),
                    found: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
        }
        match (&self.extra, j) {
            (NahmExtra::Flag { .. }, 0) => {
                return Err(Error::Precondition(
                    "flag directions attached to a flagless complex".into(),
                ))
            }
            (NahmExtra::Jump { .. }, jj) if jj > 0 => {
                return Err(Error::Precondition(
                    "jump factors attached to a flagged complex".into(),
                ))
            }
            _ => {}
        }
        if !(self.gauge_factor > 0.0 && self.gauge_factor.is_finite()) {
            return Err(Error::Precondition("the gauge factor must be positive".into()));
        }
        if j > 0 {
            let t_first = self.grid_big[0] - self.theta_inf;
            let t_last = self.big_end() - self.grid_big.last().unwrap();
            if !(self.pole_gap > 0.0) {
                return Err(Error::Precondition(
                    "a flagged complex needs a positive pole gap".into(),
                ));
            }
            if t_first <= 0.0 || t_last <= 0.0 {
                return Err(Error::Precondition(
                    "long-arc samples must stay strictly inside the poles".into(),
                ));
            }
            let inside = |t: f64| t < self.pole_gap;
            let left_tail = self
                .grid_big
                .iter()
                .take_while(|&&th| inside(th - self.theta_inf))
                .count();
            let right_tail = self
                .grid_big
                .iter()
                .rev()
                .take_while(|&&th| inside(self.big_end() - th))
                .count();
            if left_tail < 2 || right_tail < 2 {
                return Err(Error::Precondition(
                    "need at least two samples inside each pole zone".into(),
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Zone geometry (internal)
// ---------------------------------------------------------------------------

/// Weight exponents: 0 on the first k coordinates, (2a − j − 1)/2 on the
/// a-th flag coordinate.
fn grading(k: usize, j: usize) -> Vec<f64> {
    let mut g = vec![0.0; k];
    for a in 1..=j {
        g.push((2.0 * a as f64 - j as f64 - 1.0) / 2.0);
    }
    g
}

/// Conjugate by the diagonal weight matrix at parameter tau > 0.
/// `stored` = true gives G⁻¹ X G (the sampled field); false gives G X G⁻¹
/// (the strip that undoes the pole profile).
fn weight_conjugate(x: &CMat, grading: &[f64], tau: f64, stored: bool) -> CMat {
    let sign = if stored { 1.0 } else { -1.0 };
    let mut out = x.clone();
    for r in 0..x.nrows() {
        for col in 0..x.ncols() {
            let e = sign * (grading[col] - grading[r]);
            if e != 0.0 {
                out[(r, col)] *= cr(tau.powf(e));
            }
        }
    }
    out
}

/// The radial reparameterization on a pole tail: identity up to eps, then
/// a monotone C¹ ramp reaching 1 with zero slope at 2·eps, then constant.
/// Returns (tau, dtau/dt).
fn tail_ramp(eps: f64, t: f64) -> (f64, f64) {
    if t <= eps {
        (t, 1.0)
    } else if t < 2.0 * eps {
        // Cubic Hermite on [0, 1] with value eps → 1 and slope eps → 0
        // (slope in u; dividing by eps makes dtau/dt equal 1 at the seam).
        let u = (t - eps) / eps;
        let h00 = 2.0 * u * u * u - 3.0 * u * u + 1.0;
        let h10 = u * u * u - 2.0 * u * u + u;
        let h01 = -2.0 * u * u * u + 3.0 * u * u;
        let d00 = 6.0 * u * u - 6.0 * u;
        let d10 = 3.0 * u * u - 4.0 * u + 1.0;
        let d01 = -6.0 * u * u + 6.0 * u;
        let tau = eps * h00 + eps * h10 + h01;
        let dtau = (eps * d00 + eps * d10 + d01) / eps;
        (tau, dtau)
    } else {
        (1.0, 0.0)
    }
}

/// Quintic smoothstep and its derivative on the clamped unit interval.
fn smoothstep(u: f64) -> (f64, f64) {
    let u = u.clamp(0.0, 1.0);
    let w = u * u * u * (6.0 * u * u - 15.0 * u + 10.0);
    let dw = 30.0 * u * u * (u - 1.0) * (u - 1.0);
    (w, dw)
}

/// Geometric tail distances t_floor · rho^i, i < count, ending just short
/// of `gap`.
fn tail_distances(t_floor: f64, gap: f64, count: usize) -> Vec<f64> {
    let rho = (gap / t_floor).powf(1.0 / count as f64);
    (0..count).map(|i| t_floor * rho.powi(i as i32)).collect()
}

fn standard_gluings(k: usize, j: usize) -> (CMat, CMat) {
    let mut inj = CMat::zeros(k + j, k);
    inj.view_mut((0, 0), (k, k)).copy_from(&eye(k));
    let mut proj = CMat::zeros(k, k + j);
    proj.view_mut((0, 0), (k, k)).copy_from(&eye(k));
    (inj, proj)
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

/// Build the Nahm complex of a matrix datum.
///
/// The short interval carries the constant pair (0, −B). For j = 0 the
/// long arc interpolates the holonomy A through a logarithmic ramp, the
/// field is the conjugated corrected endomorphism, and the junction jumps
/// factor through the couplings; A must be invertible. For j ≥ 1 the long
/// arc is a weight-conjugated picture of the constant long-arc matrix −M:
/// exact β̃ (the transported boundary form) across the infinity-side pole
/// zone, exact −M across the zero-side pole zone, and a smoothstep bridge
/// through the monodromy logarithm in between; the monodromy matrix N must
/// be invertible (its logarithm picks the branch cut inside the widest
/// spectral gap).
///
/// The matrix equations themselves are not checked here; feeding broken
/// data produces a complex whose verification reports the defect.
pub fn to_nahm_complex(data: &MonadData, path: &PathSpec) -> Result<NahmComplexData> {
    path.validate()?;
    let (k, j) = (data.k(), data.j());
    if j == 0 {
        let b_tilde = big_endomorphism(data)?;
        let a_inv = inverse(data.a(), "holonomy across the long arc")?;
        let log_a = logm(data.a())?;
        let u0 = data.c1();
        let w0 = data.d1() * &a_inv;
        let u_inf = -(&a_inv * data.c2());
        let w_inf = data.d2();
        Ok(synthesize_flagless(
            data.b(),
            &b_tilde,
            &log_a,
            u0,
            w0,
            u_inf,
            w_inf,
            path,
        ))
    } else {
        let beta_tilde = transported_boundary_form(data)?;
        let minus_m = -data.m_matrix();
        let log_n = logm(&data.n_matrix())?;
        synthesize_flagged(k, j, data.b(), &minus_m, &beta_tilde, &log_n, path)
    }
}

/// Shared synthesis for the flagless long arc.
#[allow(clippy::too_many_arguments)]
fn synthesize_flagless(
    b: &CMat,
    b_tilde: &CMat,
    log_a: &CMat,
    u0: CMat,
    w0: CMat,
    u_inf: CMat,
    w_inf: CMat,
    path: &PathSpec,
) -> NahmComplexData {
    let k = b.nrows();
    let n = path.samples_per_interval;
    let span = path.theta_inf - path.theta0;
    let t_total = 2.0 * std::f64::consts::PI - span;
    let c = path.gauge_factor;

    let grid_small: Vec<f64> = (0..=n)
        .map(|i| path.theta0 + i as f64 * (span / n as f64))
        .collect();
    let alpha_small = vec![CMat::zeros(k, k); n + 1];
    let beta_small: Vec<CMat> = (0..=n).map(|_| -b).collect();

    let grid_big: Vec<f64> = (0..=n)
        .map(|i| path.theta_inf + i as f64 * (t_total / n as f64))
        .collect();
    // The connection is the constant −c·log(A)/T; the field is the ramped
    // conjugate of the corrected endomorphism.
    let alpha_const = log_a * cr(-c / t_total);
    let mut alpha_big = Vec::with_capacity(n + 1);
    let mut beta_big = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let w = i as f64 / n as f64;
        let g = expm(&(log_a * cr(-(1.0 - w))));
        let g_inv = expm(&(log_a * cr(1.0 - w)));
        alpha_big.push(alpha_const.clone());
        beta_big.push(&g * (-b_tilde) * &g_inv);
    }

    NahmComplexData {
        theta0: path.theta0,
        theta_inf: path.theta_inf,
        rank_small: k,
        rank_big: k,
        grid_small,
        alpha_small,
        beta_small,
        grid_big,
        alpha_big,
        beta_big,
        i0: eye(k),
        pi0: eye(k),
        i_inf: eye(k),
        pi_inf: eye(k),
        x_res: CMat::zeros(0, 0),
        s_res: CMat::zeros(0, 0),
        extra: NahmExtra::Jump {
            u0,
            w0,
            u_inf,
            w_inf,
        },
        gauge_factor: c,
        pole_gap: 0.0,
    }
}

/// Shared synthesis for the flagged long arc.
fn synthesize_flagged(
    k: usize,
    j: usize,
    b: &CMat,
    minus_m: &CMat,
    beta_tilde: &CMat,
    log_n: &CMat,
    path: &PathSpec,
) -> Result<NahmComplexData> {
    let n = path.samples_per_interval;
    let tails = path.pole_tail_samples;
    let span = path.theta_inf - path.theta0;
    let t_total = 2.0 * std::f64::consts::PI - span;
    let eps = span / 10.0;
    let c = path.gauge_factor;
    if t_total <= 6.0 * eps {
        return Err(Error::Precondition(format!(
            "the long arc (length {t_total:.3}) is too short for pole tails of half-width {:.3}",
            2.0 * eps
        )));
    }
    if path.t_floor >= eps / 10.0 {
        return Err(Error::Precondition(
            "t_floor must sit well inside the identity zone of the pole tails".into(),
        ));
    }

    let grid_small: Vec<f64> = (0..=n)
        .map(|i| path.theta0 + i as f64 * (span / n as f64))
        .collect();
    let alpha_small = vec![CMat::zeros(k, k); n + 1];
    let beta_small: Vec<CMat> = (0..=n).map(|_| -b).collect();

    let grad = grading(k, j);
    let dhat = {
        let mut d = CMat::zeros(k + j, k + j);
        for (i, g) in grad.iter().enumerate() {
            d[(i, i)] = cr(*g);
        }
        d
    };

    let mut grid_t: Vec<f64> = Vec::with_capacity(2 * tails + n + 1);
    let tail = tail_distances(path.t_floor, 2.0 * eps, tails);
    grid_t.extend(tail.iter().cloned());
    let mid_len = t_total - 4.0 * eps;
    for i in 0..=n {
        grid_t.push(2.0 * eps + i as f64 * (mid_len / n as f64));
    }
    grid_t.extend(tail.iter().rev().map(|t| t_total - t));

    let mut alpha_big = Vec::with_capacity(grid_t.len());
    let mut beta_big = Vec::with_capacity(grid_t.len());
    for &t in &grid_t {
        if t < 2.0 * eps {
            // Infinity-side tail: exact weight conjugate of β̃.
            let (tau, dtau) = tail_ramp(eps, t);
            alpha_big.push(&dhat * cr(c * dtau / tau));
            beta_big.push(weight_conjugate(beta_tilde, &grad, tau, true));
        } else if t <= t_total - 2.0 * eps {
            // Middle: bridge through the monodromy logarithm.
            let u = (t - 2.0 * eps) / mid_len;
            let (w, dw) = smoothstep(u);
            let h = expm(&(log_n * cr(-(1.0 - w))));
            let h_inv = expm(&(log_n * cr(1.0 - w)));
            alpha_big.push(log_n * cr(-c * dw / mid_len));
            beta_big.push(&h * minus_m * &h_inv);
        } else {
            // Zero-side tail: exact weight conjugate of −M.
            let (tau, dtau) = tail_ramp(eps, t_total - t);
            alpha_big.push(&dhat * cr(-c * dtau / tau));
            beta_big.push(weight_conjugate(minus_m, &grad, tau, true));
        }
    }
    let grid_big: Vec<f64> = grid_t.iter().map(|t| path.theta_inf + t).collect();

    let (inj, proj) = standard_gluings(k, j);
    let x_res = {
        let mut x = CMat::zeros(j, j);
        for a in 1..=j {
            x[(a - 1, a - 1)] = cr(c * (2.0 * a as f64 - j as f64 - 1.0) / 2.0);
        }
        x
    };
    let (s, _) = shift_pair(j);
    let s_res = -s;
    let mut v = CMat::zeros(k + j, 1);
    v[(k, 0)] = cr(1.0);

    Ok(NahmComplexData {
        theta0: path.theta0,
        theta_inf: path.theta_inf,
        rank_small: k,
        rank_big: k + j,
        grid_small,
        alpha_small,
        beta_small,
        grid_big,
        alpha_big,
        beta_big,
        i0: inj.clone(),
        pi0: proj.clone(),
        i_inf: inj,
        pi_inf: proj,
        x_res,
        s_res,
        extra: NahmExtra::Flag {
            v0: v.clone(),
            v_inf: v,
        },
        gauge_factor: c,
        pole_gap: 2.0 * eps,
    })
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

/// Tolerances and bands used by the verifier.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NahmCheckConfig {
    /// Constant in the covariant-constancy budget coeff·h²·(1 + max‖β‖).
    pub constancy_coeff: f64,
    /// Tolerance for identities that hold exactly by construction.
    pub exact_tol: f64,
    /// Tolerance for residues extracted from the innermost samples.
    pub residue_tol: f64,
    /// Tolerance for boundary matching and factorization checks.
    pub match_tol: f64,
    /// Largest allowed σ₂/σ₁ for a rank-one jump.
    pub rank_ratio_tol: f64,
    /// Allowed deviation of a log-log vanishing-order fit.
    pub slope_band: f64,
}

impl Default for NahmCheckConfig {
    fn default() -> Self {
        NahmCheckConfig {
            constancy_coeff: 50.0,
            exact_tol: 1e-12,
            residue_tol: 1e-9,
            match_tol: 1e-8,
            rank_ratio_tol: 1e-9,
            slope_band: 0.1,
        }
    }
}

/// One named verification measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub passed: bool,
}

/// The full verification record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NahmVerifyReport {
    pub items: Vec<CheckItem>,
}

impl NahmVerifyReport {
    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

/// Verify a complex against the default configuration.
pub fn verify_nahm_complex(ncd: &NahmComplexData) -> Result<NahmVerifyReport> {
    verify_nahm_complex_with(ncd, &NahmCheckConfig::default())
}

/// Largest covariant-constancy defect over interior three-point stencils,
/// restricted to stencils whose support stays at distance > gap from both
/// interval ends. Returns (residual, max step, max field size) over the
/// included stencils.
fn constancy_residual(
    grid: &[f64],
    alpha: &[CMat],
    beta: &[CMat],
    c: f64,
    lo: f64,
    hi: f64,
    gap: f64,
) -> (f64, f64, f64) {
    let mut worst = 0.0f64;
    let mut hmax = 0.0f64;
    let mut bmax = 0.0f64;
    for i in 1..grid.len() - 1 {
        if grid[i - 1] < lo + gap - 1e-9 || grid[i + 1] > hi - gap + 1e-9 {
            continue;
        }
        let (w0, w1, w2) = fd3_weights_mid(grid[i - 1], grid[i], grid[i + 1]);
        let dbeta = &beta[i - 1] * cr(w0) + &beta[i] * cr(w1) + &beta[i + 1] * cr(w2);
        let comm = &alpha[i] * &beta[i] - &beta[i] * &alpha[i];
        let res = max_abs(&(dbeta + comm * cr(1.0 / c)));
        worst = worst.max(res);
        hmax = hmax.max((grid[i + 1] - grid[i - 1]) / 2.0);
        bmax = bmax.max(max_abs(&beta[i]));
    }
    (worst, hmax, bmax)
}

/// Two-point Richardson extrapolation to t = 0 of samples (t₀, v₀), (t₁, v₁).
fn richardson(t0: f64, v0: &CMat, t1: f64, v1: &CMat) -> CMat {
    (v0 * cr(t1) - v1 * cr(t0)) / cr(t1 - t0)
}

/// Verify a complex: covariant constancy away from the poles, exact
/// gluing, residues and vanishing orders at the poles (or jump structure
/// in the flagless case), and boundary matching. Structural nonsense
/// (mismatched shapes or grids) is an error; every measured defect comes
/// back as a failed item instead.
pub fn verify_nahm_complex_with(
    ncd: &NahmComplexData,
    cfg: &NahmCheckConfig,
) -> Result<NahmVerifyReport> {
    ncd.structural_check()?;
    let k = ncd.rank_small;
    let j = ncd.flag_degree();
    let c = ncd.gauge_factor;
    let mut items: Vec<CheckItem> = Vec::new();
    let mut push = |items: &mut Vec<CheckItem>, name: &str, residual: f64, tol: f64| {
        items.push(CheckItem {
            name: name.into(),
            residual,
            tol,
            passed: residual <= tol,
        });
    };

    // Covariant constancy on both intervals.
    let (rs, hs, bs) = constancy_residual(
        &ncd.grid_small,
        &ncd.alpha_small,
        &ncd.beta_small,
        c,
        ncd.theta0,
        ncd.theta_inf,
        0.0,
    );
    push(
        &mut items,
        "covariant constancy small",
        rs,
        cfg.constancy_coeff * hs * hs * (1.0 + bs),
    );
    let (rb, hb, bb) = constancy_residual(
        &ncd.grid_big,
        &ncd.alpha_big,
        &ncd.beta_big,
        c,
        ncd.theta_inf,
        ncd.big_end(),
        ncd.pole_gap,
    );
    push(
        &mut items,
        "covariant constancy big",
        rb,
        cfg.constancy_coeff * hb * hb * (1.0 + bb),
    );

    // Gluing composites.
    let gl_zero = max_abs(&(&ncd.pi0 * &ncd.i0 - eye(k)));
    let gl_inf = max_abs(&(&ncd.pi_inf * &ncd.i_inf - eye(k)));
    let (gl_zero, gl_inf) = if j == 0 {
        (
            gl_zero.max(max_abs(&(&ncd.i0 * &ncd.pi0 - eye(k)))),
            gl_inf.max(max_abs(&(&ncd.i_inf * &ncd.pi_inf - eye(k)))),
        )
    } else {
        (gl_zero, gl_inf)
    };
    push(&mut items, "gluing at zero", gl_zero, cfg.exact_tol);
    push(&mut items, "gluing at infinity", gl_inf, cfg.exact_tol);

    if j >= 1 {
        verify_flagged_boundaries(ncd, cfg, &mut items, &mut push);
    } else {
        verify_flagless_jumps(ncd, cfg, &mut items, &mut push);
    }

    Ok(NahmVerifyReport { items })
}

type Push = dyn FnMut(&mut Vec<CheckItem>, &str, f64, f64);

fn verify_flagged_boundaries(
    ncd: &NahmComplexData,
    cfg: &NahmCheckConfig,
    items: &mut Vec<CheckItem>,
    push: &mut Push,
) {
    let k = ncd.rank_small;
    let j = ncd.flag_degree();
    let c = ncd.gauge_factor;
    let grad = grading(k, j);
    let nbig = ncd.grid_big.len();
    let end = ncd.big_end();

    // Stored residue weights: the exact ladder.
    let mut weight_defect = 0.0f64;
    for a in 1..=j {
        let want = c * (2.0 * a as f64 - j as f64 - 1.0) / 2.0;
        weight_defect = weight_defect.max((ncd.x_res[(a - 1, a - 1)] - cr(want)).norm());
    }
    for r in 0..j {
        for col in 0..j {
            if r != col {
                weight_defect = weight_defect.max(ncd.x_res[(r, col)].norm());
            }
        }
    }
    push(items, "residue weights", weight_defect, cfg.exact_tol);

    // Stored shift residue: nilpotent with a single Jordan block.
    let mut profile = max_abs(&num_pow(&ncd.s_res, j)) / (1.0 + max_abs(&ncd.s_res)).powi(j as i32);
    for p in 1..j {
        let rank = RankDecision::compute(&num_pow(&ncd.s_res, p), 1e-9, 1e3).rank;
        profile += (rank as f64 - (j - p) as f64).abs();
    }
    push(items, "shift residue profile", profile, cfg.exact_tol);

    // Extractions from the innermost samples on each side.
    let scale_x = 1.0 + max_abs(&ncd.x_res);
    let scale_s = 1.0 + max_abs(&ncd.s_res);
    for (side, i0, i1) in [("infinity", 0usize, 1usize), ("zero", nbig - 1, nbig - 2)] {
        let (t0, t1, sgn) = if side == "infinity" {
            (
                ncd.grid_big[i0] - ncd.theta_inf,
                ncd.grid_big[i1] - ncd.theta_inf,
                1.0,
            )
        } else {
            (end - ncd.grid_big[i0], end - ncd.grid_big[i1], -1.0)
        };
        // Connection residue: r = (inward t)·α → diag(0, x_res).
        let r0 = &ncd.alpha_big[i0] * cr(sgn * t0);
        let r1 = &ncd.alpha_big[i1] * cr(sgn * t1);
        let r = richardson(t0, &r0, t1, &r1);
        let mut defect = max_abs(&(r.view((k, k), (j, j)).into_owned() - &ncd.x_res));
        defect = defect.max(max_abs(&r.view((0, 0), (k, k + j)).into_owned()));
        defect = defect.max(max_abs(&r.view((k, 0), (j, k)).into_owned()));
        push(
            items,
            &format!("residue extraction at {side}"),
            defect / scale_x,
            cfg.residue_tol,
        );

        // Field residue on the flag block: t·β → s_res.
        let v0 = ncd.beta_big[i0].view((k, k), (j, j)).into_owned() * cr(t0);
        let v1 = ncd.beta_big[i1].view((k, k), (j, j)).into_owned() * cr(t1);
        let v = richardson(t0, &v0, t1, &v1);
        push(
            items,
            &format!("shift extraction at {side}"),
            max_abs(&(v - &ncd.s_res)) / scale_s,
            cfg.residue_tol,
        );
    }

    // Vanishing orders of the off-diagonal blocks over the innermost decade.
    let bmax = ncd.beta_big.iter().map(max_abs).fold(0.0, f64::max);
    for side in ["infinity", "zero"] {
        let (ts, idxs): (Vec<f64>, Vec<usize>) = if side == "infinity" {
            let t_first = ncd.grid_big[0] - ncd.theta_inf;
            let ts: Vec<(f64, usize)> = ncd
                .grid_big
                .iter()
                .enumerate()
                .map(|(i, &th)| (th - ncd.theta_inf, i))
                .filter(|(t, _)| *t <= 10.0 * t_first)
                .collect();
            (ts.iter().map(|p| p.0).collect(), ts.iter().map(|p| p.1).collect())
        } else {
            let t_first = end - ncd.grid_big[nbig - 1];
            let ts: Vec<(f64, usize)> = ncd
                .grid_big
                .iter()
                .enumerate()
                .map(|(i, &th)| (end - th, i))
                .filter(|(t, _)| *t > 0.0 && *t <= 10.0 * t_first)
                .collect();
            (ts.iter().map(|p| p.0).collect(), ts.iter().map(|p| p.1).collect())
        };
        for (block, rr, cc, rows, cols) in [
            ("coupling order", 0usize, k, k, j),
            ("row order", k, 0usize, j, k),
        ] {
            let norms: Vec<f64> = idxs
                .iter()
                .map(|&i| max_abs(&ncd.beta_big[i].view((rr, cc), (rows, cols)).into_owned()))
                .collect();
            let biggest = norms.iter().cloned().fold(0.0, f64::max);
            let residual = if biggest < 1e-13 * (1.0 + bmax) || ts.len() < 3 {
                0.0
            } else {
                let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
                let ys: Vec<f64> = norms.iter().map(|v| v.max(1e-300).ln()).collect();
                let (slope, _) = line_fit(&xs, &ys);
                (slope - (j as f64 - 1.0) / 2.0).abs()
            };
            push(items, &format!("{block} at {side}"), residual, cfg.slope_band);
        }
    }

    // Boundary matching: the upper-left block of the long-arc fields meets
    // the short-interval fields across each junction.
    let small_scale = 1.0 + ncd.beta_small.iter().map(max_abs).fold(0.0, f64::max);
    let m_inf = max_abs(
        &(ncd.beta_big[0].view((0, 0), (k, k)).into_owned() - ncd.beta_small.last().unwrap()),
    )
    .max(max_abs(
        &(ncd.alpha_big[0].view((0, 0), (k, k)).into_owned() - ncd.alpha_small.last().unwrap()),
    ));
    push(
        items,
        "boundary match at infinity",
        m_inf / small_scale,
        cfg.match_tol,
    );
    let m_zero = max_abs(
        &(ncd.beta_big[nbig - 1].view((0, 0), (k, k)).into_owned() - &ncd.beta_small[0]),
    )
    .max(max_abs(
        &(ncd.alpha_big[nbig - 1].view((0, 0), (k, k)).into_owned() - &ncd.alpha_small[0]),
    ));
    push(
        items,
        "boundary match at zero",
        m_zero / small_scale,
        cfg.match_tol,
    );

    // Flag directions: unit, supported in the flag block, and aligned with
    // the lowest residue weight.
    if let NahmExtra::Flag { v0, v_inf } = &ncd.extra {
        let mu1 = c * (1.0 - j as f64) / 2.0;
        for (side, v) in [("zero", v0), ("infinity", v_inf)] {
            let top = max_abs(&v.view((0, 0), (k, 1)).into_owned());
            let flag = v.view((k, 0), (j, 1)).into_owned();
            let aligned =
                max_abs(&(&ncd.x_res * &flag - &flag * cr(mu1))) / (1.0 + max_abs(&ncd.x_res));
            let unit = (frob(v) - 1.0).abs();
            push(
                items,
                &format!("flag direction at {side}"),
                top.max(aligned).max(unit),
                cfg.match_tol,
            );
        }
    }

    // The boundary column is graded: the strip read at two depths agrees.
    let fit_count = |side_left: bool| -> (usize, usize) {
        if side_left {
            (0, idx_decade(&ncd.grid_big, ncd.theta_inf, true))
        } else {
            (nbig - 1, idx_decade(&ncd.grid_big, end, false))
        }
    };
    let mut grading_defect = 0.0f64;
    for side_left in [true, false] {
        let (inner, outer) = fit_count(side_left);
        let strip = |i: usize| -> CMat {
            let t = if side_left {
                ncd.grid_big[i] - ncd.theta_inf
            } else {
                end - ncd.grid_big[i]
            };
            weight_conjugate(&ncd.beta_big[i], &grad, t, false)
        };
        let si = strip(inner);
        let so = strip(outer);
        let col_i = si.view((0, k + j - 1), (k + j, 1)).into_owned();
        let col_o = so.view((0, k + j - 1), (k + j, 1)).into_owned();
        grading_defect = grading_defect
            .max(max_abs(&(col_i - col_o)) / (1.0 + max_abs(&si)));
    }
    push(items, "boundary column grading", grading_defect, cfg.match_tol);
}

fn verify_flagless_jumps(
    ncd: &NahmComplexData,
    cfg: &NahmCheckConfig,
    items: &mut Vec<CheckItem>,
    push: &mut Push,
) {
    let nbig = ncd.grid_big.len();
    let j_zero = &ncd.pi0 * &ncd.beta_big[nbig - 1] * &ncd.i0 - &ncd.beta_small[0];
    let j_inf = &ncd.pi_inf * &ncd.beta_big[0] * &ncd.i_inf - ncd.beta_small.last().unwrap();
    let bscale = 1.0
        + ncd
            .beta_small
            .iter()
            .chain(ncd.beta_big.iter())
            .map(max_abs)
            .fold(0.0, f64::max);

    let factors = match &ncd.extra {
        NahmExtra::Jump {
            u0,
            w0,
            u_inf,
            w_inf,
        } => [(u0, w0, &j_zero, "zero"), (u_inf, w_inf, &j_inf, "infinity")],
        NahmExtra::Flag { .. } => unreachable!("structural check matched extra to j"),
    };
    for (u, w, jump, side) in factors {
        let sv = singular_values(jump);
        let ratio = if sv.is_empty() || sv[0] < 1e-14 * bscale {
            0.0
        } else if sv.len() == 1 {
            0.0
        } else {
            sv[1] / sv[0]
        };
        push(items, &format!("jump rank at {side}"), ratio, cfg.rank_ratio_tol);
        let fact = max_abs(&(jump - u * w)) / (1.0 + max_abs(jump));
        push(items, &format!("jump factors at {side}"), fact, cfg.match_tol);
    }
}

/// Index of the sample roughly one decade away from the given end.
fn idx_decade(grid: &[f64], end_theta: f64, from_left: bool) -> usize {
    if from_left {
        let t_first = grid[0] - end_theta;
        let mut idx = 0;
        for (i, &th) in grid.iter().enumerate() {
            if th - end_theta <= 10.0 * t_first {
                idx = i;
            } else {
                break;
            }
        }
        idx
    } else {
        let n = grid.len();
        let t_first = end_theta - grid[n - 1];
        let mut idx = n - 1;
        for (i, &th) in grid.iter().enumerate().rev() {
            if end_theta - th <= 10.0 * t_first {
                idx = i;
            } else {
                break;
            }
        }
        idx
    }
}

fn num_pow(m: &CMat, p: usize) -> CMat {
    let mut out = eye(m.nrows());
    for _ in 0..p {
        out = &out * m;
    }
    out
}

// ---------------------------------------------------------------------------
// Gauge action
// ---------------------------------------------------------------------------

/// A sampled gauge transformation: one invertible matrix per grid point on
/// each interval.
#[derive(Debug, Clone)]
pub struct GaugePath {
    pub small: Vec<CMat>,
    pub big: Vec<CMat>,
}

/// Apply a gauge path: α ↦ gαg⁻¹ − c·(dg/dθ)g⁻¹ (the derivative taken by
/// second-order finite differences of the path samples), β ↦ gβg⁻¹, with
/// the gluings, jump factors and flag directions moved covariantly.
///
/// Admissibility: on a flagged complex the path must freeze to the
/// identity across both pole zones of the long arc and at the junction
/// samples of the short interval, so the pole profile and the stored
/// residues are untouched. On a flagless complex the path is free but
/// must agree across each junction.
pub fn gauge_act(ncd: &NahmComplexData, path: &GaugePath) -> Result<NahmComplexData> {
    ncd.structural_check()?;
    let k = ncd.rank_small;
    let j = ncd.flag_degree();
    if path.small.len() != ncd.grid_small.len() || path.big.len() != ncd.grid_big.len() {
        return Err(Error::Precondition(format!(
            "gauge path length mismatch: {} and {} samples for grids of {} and {}",
            path.small.len(),
            path.big.len(),
            ncd.grid_small.len(),
            ncd.grid_big.len()
        )));
    }
    for (g, dim) in path
        .small
        .iter()
        .map(|g| (g, k))
        .chain(path.big.iter().map(|g| (g, ncd.rank_big)))
    {
        if g.nrows() != dim || g.ncols() != dim {
            return Err(Error::Shape {
                field: "gauge sample",
                expected: format!("{dim}x{dim}"),
                found: format!("{}x{}", g.nrows(), g.ncols()),
            });
        }
    }

    if j >= 1 {
        let end = ncd.big_end();
        for (i, &th) in ncd.grid_big.iter().enumerate() {
            let in_zone =
                th - ncd.theta_inf <= ncd.pole_gap + 1e-9 || end - th <= ncd.pole_gap + 1e-9;
            if in_zone && max_abs(&(&path.big[i] - eye(ncd.rank_big))) > 1e-10 {
                return Err(Error::Precondition(
                    "the gauge path must freeze to the identity across the boundary pole zones"
                        .into(),
                ));
            }
        }
        for i in [0, ncd.grid_small.len() - 1] {
            if max_abs(&(&path.small[i] - eye(k))) > 1e-10 {
                return Err(Error::Precondition(
                    "the gauge path must be the identity at the junction samples of the short interval (the pole zones pin the long-arc side)"
                        .into(),
                ));
            }
        }
    } else {
        let nb = path.big.len();
        let at_inf = max_abs(&(&path.small[path.small.len() - 1] - &path.big[0]));
        let at_zero = max_abs(&(&path.small[0] - &path.big[nb - 1]));
        if at_inf > 1e-10 || at_zero > 1e-10 {
            return Err(Error::Precondition(
                "the gauge path must agree across both junctions".into(),
            ));
        }
    }

    let (alpha_small, beta_small) = gauge_transform(
        &ncd.grid_small,
        &path.small,
        &ncd.alpha_small,
        &ncd.beta_small,
        ncd.gauge_factor,
    )?;
    let (alpha_big, beta_big) = gauge_transform(
        &ncd.grid_big,
        &path.big,
        &ncd.alpha_big,
        &ncd.beta_big,
        ncd.gauge_factor,
    )?;

    let nb = path.big.len();
    let ns = path.small.len();
    let gb_zero = &path.big[nb - 1];
    let gb_inf = &path.big[0];
    let gs_zero = &path.small[0];
    let gs_inf = &path.small[ns - 1];
    let gs_zero_inv = inverse(gs_zero, "gauge at the zero junction")?;
    let gs_inf_inv = inverse(gs_inf, "gauge at the infinity junction")?;
    let gb_zero_inv = inverse(gb_zero, "gauge at the zero junction")?;
    let gb_inf_inv = inverse(gb_inf, "gauge at the infinity junction")?;

    let extra = match &ncd.extra {
        NahmExtra::Flag { v0, v_inf } => NahmExtra::Flag {
            v0: gb_zero * v0,
            v_inf: gb_inf * v_inf,
        },
        NahmExtra::Jump {
            u0,
            w0,
            u_inf,
            w_inf,
        } => NahmExtra::Jump {
            u0: gs_zero * u0,
            w0: w0 * &gs_zero_inv,
            u_inf: gs_inf * u_inf,
            w_inf: w_inf * &gs_inf_inv,
        },
    };

    Ok(NahmComplexData {
        theta0: ncd.theta0,
        theta_inf: ncd.theta_inf,
        rank_small: ncd.rank_small,
        rank_big: ncd.rank_big,
        grid_small: ncd.grid_small.clone(),
        alpha_small,
        beta_small,
        grid_big: ncd.grid_big.clone(),
        alpha_big,
        beta_big,
        i0: gb_zero * &ncd.i0 * &gs_zero_inv,
        pi0: gs_zero * &ncd.pi0 * &gb_zero_inv,
        i_inf: gb_inf * &ncd.i_inf * &gs_inf_inv,
        pi_inf: gs_inf * &ncd.pi_inf * &gb_inf_inv,
        x_res: ncd.x_res.clone(),
        s_res: ncd.s_res.clone(),
        extra,
        gauge_factor: ncd.gauge_factor,
        pole_gap: ncd.pole_gap,
    })
}

/// Second-order derivative of a sampled matrix path at index `i`, written
/// as weighted differences from the evaluation sample so that a locally
/// constant path differentiates to exactly zero (the raw stencil weights
/// grow like 1/h and their analytic zero sum cancels poorly on the
/// geometric tail grids).
pub(crate) fn fd3_of_path(grid: &[f64], gs: &[CMat], i: usize) -> CMat {
    let n = grid.len();
    if i == 0 {
        let (_, w1, w2) = fd3_weights_left(grid[0], grid[1], grid[2]);
        (&gs[1] - &gs[0]) * cr(w1) + (&gs[2] - &gs[0]) * cr(w2)
    } else if i == n - 1 {
        let (w0, w1, _) = fd3_weights_right(grid[n - 3], grid[n - 2], grid[n - 1]);
        (&gs[n - 3] - &gs[n - 1]) * cr(w0) + (&gs[n - 2] - &gs[n - 1]) * cr(w1)
    } else {
        let (w0, _, w2) = fd3_weights_mid(grid[i - 1], grid[i], grid[i + 1]);
        (&gs[i - 1] - &gs[i]) * cr(w0) + (&gs[i + 1] - &gs[i]) * cr(w2)
    }
}

/// One interval of the gauge action: α ↦ gαg⁻¹ − c·(dg/dθ)g⁻¹ and
/// β ↦ gβg⁻¹, with dg taken by second-order finite differences.
pub(crate) fn gauge_transform(
    grid: &[f64],
    gs: &[CMat],
    alpha: &[CMat],
    beta: &[CMat],
    c: f64,
) -> Result<(Vec<CMat>, Vec<CMat>)> {
    let n = grid.len();
    let mut out_a = Vec::with_capacity(n);
    let mut out_b = Vec::with_capacity(n);
    for i in 0..n {
        let dg = fd3_of_path(grid, gs, i);
        let g_inv = inverse(&gs[i], "gauge path sample")?;
        out_a.push(&gs[i] * &alpha[i] * &g_inv - (&dg * &g_inv) * cr(c));
        out_b.push(&gs[i] * &beta[i] * &g_inv);
    }
    Ok((out_a, out_b))
}

// ---------------------------------------------------------------------------
// Extraction (internal)
// ---------------------------------------------------------------------------

/// Parallel transport of the equation ψ' = −(1/c)·α·ψ from grid[from] to
/// grid[to], one fourth-order step per cell with cubic interpolation of α.
fn transport(
    grid: &[f64],
    alpha: &[CMat],
    from: usize,
    to: usize,
    c: f64,
    dim: usize,
) -> CMat {
    let f = |t: f64| interp_cubic(grid, alpha, t) * cr(-1.0 / c);
    rk4_transport(f, grid[from], grid[to], to.max(from) - to.min(from), dim)
}

/// Per-sample transport along a whole interval: ψ[0] = start, thereafter
/// one fourth-order step per cell.
fn transport_chain(grid: &[f64], alpha: &[CMat], c: f64, start: CMat) -> Vec<CMat> {
    let dim = start.nrows();
    let f = |t: f64| interp_cubic(grid, alpha, t) * cr(-1.0 / c);
    let mut out = Vec::with_capacity(grid.len());
    out.push(start);
    for i in 1..grid.len() {
        let step = rk4_transport(&f, grid[i - 1], grid[i], 1, dim);
        let prev = out.last().unwrap();
        out.push(&step * prev);
    }
    out
}

struct FlaggedConstants {
    minus_m: CMat,
    beta_tilde: CMat,
    monodromy: CMat,
}

/// Strip the weight profile at the innermost samples and transport across
/// the middle to recover the three constants behind a flagged long arc.
fn extract_flagged(ncd: &NahmComplexData) -> Result<FlaggedConstants> {
    let k = ncd.rank_small;
    let j = ncd.flag_degree();
    let grad = grading(k, j);
    let nbig = ncd.grid_big.len();
    let end = ncd.big_end();

    let t_left = ncd.grid_big[0] - ncd.theta_inf;
    let t_right = end - ncd.grid_big[nbig - 1];
    let beta_tilde = weight_conjugate(&ncd.beta_big[0], &grad, t_left, false);
    let minus_m = weight_conjugate(&ncd.beta_big[nbig - 1], &grad, t_right, false);

    // Anchors: the first and last samples clear of the pole zones.
    let ia = ncd
        .grid_big
        .iter()
        .position(|&th| th - ncd.theta_inf >= ncd.pole_gap - 1e-9)
        .ok_or_else(|| Error::Precondition("no samples clear of the pole zones".into()))?;
    let ib = nbig
        - 1
        - ncd
            .grid_big
            .iter()
            .rev()
            .position(|&th| end - th >= ncd.pole_gap - 1e-9)
            .ok_or_else(|| Error::Precondition("no samples clear of the pole zones".into()))?;
    if ib <= ia {
        return Err(Error::Precondition(
            "the pole zones overlap; no middle region to transport across".into(),
        ));
    }
    // Interpolate only over the middle slice: the connection has a kink
    // at each pole-zone seam, and a stencil reaching into the tail samples
    // would contaminate the transport.
    let monodromy = transport(
        &ncd.grid_big[ia..=ib],
        &ncd.alpha_big[ia..=ib],
        0,
        ib - ia,
        ncd.gauge_factor,
        k + j,
    );
    Ok(FlaggedConstants {
        minus_m,
        beta_tilde,
        monodromy,
    })
}

struct FlaglessConstants {
    b: CMat,
    a: CMat,
    u0: CMat,
    w0: CMat,
    u_inf: CMat,
    w_inf: CMat,
}

/// Transport both intervals to a single frame at θ₀ and average out the
/// short-interval field; works on any gauge image of a constructed
/// complex whose junction gauges agree (the flow preserves this).
fn extract_flagless(ncd: &NahmComplexData) -> Result<FlaglessConstants> {
    let k = ncd.rank_small;
    let c = ncd.gauge_factor;
    let id = eye(k);
    let tol = 1e-8;
    for (name, m, want) in [
        ("i0", &ncd.i0, &id),
        ("pi0", &ncd.pi0, &id),
        ("i_inf", &ncd.i_inf, &id),
        ("pi_inf", &ncd.pi_inf, &id),
    ] {
        if max_abs(&(m - want)) > tol {
            return Err(Error::Precondition(format!(
                "flagless extraction needs identity gluings, {name} differs by {:.3e}",
                max_abs(&(m - want))
            )));
        }
    }

    let psi_small = transport_chain(&ncd.grid_small, &ncd.alpha_small, c, eye(k));
    let mut avg = CMat::zeros(k, k);
    for (psi, beta) in psi_small.iter().zip(&ncd.beta_small) {
        let psi_inv = inverse(psi, "short-interval transport")?;
        avg += &psi_inv * beta * psi;
    }
    avg /= cr(ncd.beta_small.len() as f64);
    let b = -avg;

    let psi_inf = psi_small.last().unwrap().clone();
    let psi_big = transport_chain(&ncd.grid_big, &ncd.alpha_big, c, psi_inf.clone());
    let a = psi_big.last().unwrap().clone();

    let (u0, w0, u_inf, w_inf) = match &ncd.extra {
        NahmExtra::Jump {
            u0,
            w0,
            u_inf,
            w_inf,
        } => {
            let psi_inf_inv = inverse(&psi_inf, "junction transport")?;
            (
                u0.clone(),
                w0.clone(),
                &psi_inf_inv * u_inf,
                w_inf * &psi_inf,
            )
        }
        NahmExtra::Flag { .. } => {
            return Err(Error::Precondition(
                "flagless extraction on a flagged complex".into(),
            ))
        }
    };
    Ok(FlaglessConstants {
        b,
        a,
        u0,
        w0,
        u_inf,
        w_inf,
    })
}

// ---------------------------------------------------------------------------
// Boundary normal form
// ---------------------------------------------------------------------------

/// The constant boundary blocks of a complex at one junction: the
/// assembled matrix is [[P₀, q₀·e₊], [[r₀; 0], −s + s₀·e₊]], built from
/// the k×k block `p0`, the k×1 column `q0`, the 1×k row `r0` and the j×1
/// column `s0`.
#[derive(Debug, Clone)]
pub struct BoundaryNormalForm {
    pub p0: CMat,
    pub q0: CMat,
    pub r0: CMat,
    pub s0: CMat,
}

impl BoundaryNormalForm {
    /// Assemble the (k+j)×(k+j) boundary matrix from the blocks.
    pub fn assemble(&self) -> CMat {
        let k = self.p0.nrows();
        let j = self.s0.nrows();
        let mut out = CMat::zeros(k + j, k + j);
        out.view_mut((0, 0), (k, k)).copy_from(&self.p0);
        if j > 0 {
            out.view_mut((0, k + j - 1), (k, 1)).copy_from(&self.q0);
            out.view_mut((k, 0), (1, k)).copy_from(&self.r0);
            let (s, _) = shift_pair(j);
            out.view_mut((k, k), (j, j)).copy_from(&(-s));
            for r in 0..j {
                out[(k + r, k + j - 1)] += self.s0[(r, 0)];
            }
        }
        out
    }
}

/// A complex in normal form together with its boundary blocks.
#[derive(Debug, Clone)]
pub struct NormalFormOutput {
    pub complex: NahmComplexData,
    pub at_zero: BoundaryNormalForm,
    pub at_infinity: BoundaryNormalForm,
}

fn bnf_from_matrix(m: &CMat, k: usize, j: usize) -> BoundaryNormalForm {
    if j == 0 {
        return BoundaryNormalForm {
            p0: m.clone(),
            q0: CMat::zeros(k, 1),
            r0: CMat::zeros(1, k),
            s0: CMat::zeros(0, 1),
        };
    }
    BoundaryNormalForm {
        p0: m.view((0, 0), (k, k)).into_owned(),
        q0: m.view((0, k + j - 1), (k, 1)).into_owned(),
        r0: m.view((k, 0), (1, k)).into_owned(),
        s0: m.view((k, k + j - 1), (j, 1)).into_owned(),
    }
}

/// Rebuild a verifying complex in the canonical gauge and read off its
/// boundary blocks.
///
/// The input must verify; the output complex is the synthesized canonical
/// representative on the same sampling layout, so two gauge images of the
/// same complex normalize to the same output up to discretization error.
/// In the flagless case the boundary blocks carry the jump factors
/// (q₀ = u, r₀ = w) next to the constant field block P₀ = −B.
pub fn normal_form(ncd: &NahmComplexData) -> Result<NormalFormOutput> {
    let report = verify_nahm_complex(ncd)?;
    if !report.all_pass() {
        let failing: Vec<&str> = report
            .items
            .iter()
            .filter(|i| !i.passed)
            .map(|i| i.name.as_str())
            .collect();
        return Err(Error::Precondition(format!(
            "normal form needs a verifying complex; failing checks: {}",
            failing.join(", ")
        )));
    }
    let k = ncd.rank_small;
    let j = ncd.flag_degree();
    let path = path_of(ncd);

    if j == 0 {
        let fc = extract_flagless(ncd)?;
        let b_tilde = &fc.b - &fc.u0 * &fc.w0;
        let log_a = logm(&fc.a)?;
        let complex = synthesize_flagless(
            &fc.b,
            &b_tilde,
            &log_a,
            fc.u0.clone(),
            fc.w0.clone(),
            fc.u_inf.clone(),
            fc.w_inf.clone(),
            &path,
        );
        let at_zero = BoundaryNormalForm {
            p0: -&fc.b,
            q0: fc.u0,
            r0: fc.w0,
            s0: CMat::zeros(0, 1),
        };
        let at_infinity = BoundaryNormalForm {
            p0: -&fc.b,
            q0: fc.u_inf,
            r0: fc.w_inf,
            s0: CMat::zeros(0, 1),
        };
        return Ok(NormalFormOutput {
            complex,
            at_zero,
            at_infinity,
        });
    }

    let fc = extract_flagged(ncd)?;
    let log_n = logm(&fc.monodromy)?;
    let b = -fc.minus_m.view((0, 0), (k, k)).into_owned();
    let complex = synthesize_flagged(k, j, &b, &fc.minus_m, &fc.beta_tilde, &log_n, &path)?;
    Ok(NormalFormOutput {
        complex,
        at_zero: bnf_from_matrix(&fc.minus_m, k, j),
        at_infinity: bnf_from_matrix(&fc.beta_tilde, k, j),
    })
}

/// Recover the sampling layout of a constructed complex.
fn path_of(ncd: &NahmComplexData) -> PathSpec {
    let j = ncd.flag_degree();
    if j == 0 {
        PathSpec {
            theta0: ncd.theta0,
            theta_inf: ncd.theta_inf,
            samples_per_interval: ncd.grid_small.len().saturating_sub(1).max(16),
            gauge_factor: ncd.gauge_factor,
            ..PathSpec::default()
        }
    } else {
        let end = ncd.big_end();
        let tails = ncd
            .grid_big
            .iter()
            .take_while(|&&th| th - ncd.theta_inf < ncd.pole_gap)
            .count();
        let middle = ncd
            .grid_big
            .iter()
            .filter(|&&th| {
                th - ncd.theta_inf >= ncd.pole_gap - 1e-12 && end - th >= ncd.pole_gap - 1e-12
            })
            .count();
        PathSpec {
            theta0: ncd.theta0,
            theta_inf: ncd.theta_inf,
            samples_per_interval: middle.saturating_sub(1).max(16),
            pole_tail_samples: tails.max(8),
            t_floor: (ncd.grid_big[0] - ncd.theta_inf).max(1e-12),
            gauge_factor: ncd.gauge_factor,
        }
    }
}

// ---------------------------------------------------------------------------
// Inversion
// ---------------------------------------------------------------------------

/// Recover matrix data from a complex.
///
/// For j ≥ 1 the two pole strips give the long-arc matrix and the
/// transported boundary form, and transport across the middle gives the
/// monodromy matrix, whose block columns are A, A′ and the second
/// couplings; the first flag row condition then pins D₁. For j = 0 the
/// short interval averages to B, the long-arc holonomy gives A, and the
/// stored jump factors give the couplings; gluings must be the identity.
/// The result is canonical up to the usual basis action, with the
/// junction frame at θ₀ chosen as the gauge.
pub fn from_nahm_complex(ncd: &NahmComplexData) -> Result<MonadData> {
    ncd.structural_check()?;
    let k = ncd.rank_small;
    let j = ncd.flag_degree();

    if j == 0 {
        let fc = extract_flagless(ncd)?;
        let c1 = fc.u0.clone();
        let d1 = &fc.w0 * &fc.a;
        let c2 = -(&fc.a * &fc.u_inf);
        let d2 = fc.w_inf.clone();
        let mut cc = CMat::zeros(k, 2);
        cc.view_mut((0, 0), (k, 1)).copy_from(&c1);
        cc.view_mut((0, 1), (k, 1)).copy_from(&c2);
        let mut dd = CMat::zeros(2, k);
        dd.view_mut((0, 0), (1, k)).copy_from(&d1);
        dd.view_mut((1, 0), (1, k)).copy_from(&d2);
        return MonadData::unflagged(fc.a, fc.b, cc, dd);
    }

    let fc = extract_flagged(ncd)?;
    let m = -&fc.minus_m;
    let b = m.view((0, 0), (k, k)).into_owned();
    let c1 = -m.view((0, k + j - 1), (k, 1)).into_owned();
    let b_prime = -fc.minus_m.view((k, 0), (1, k)).into_owned();
    let c1_prime = fc.minus_m.view((k, k + j - 1), (j, 1)).into_owned();
    let d2 = -fc.beta_tilde.view((k, 0), (1, k)).into_owned();

    let a = fc.monodromy.view((0, 0), (k, k)).into_owned();
    let a_prime = fc.monodromy.view((k, 0), (j, k)).into_owned();
    let c2 = fc.monodromy.view((0, k), (k, 1)).into_owned();
    let c2_prime = fc.monodromy.view((k, k), (j, 1)).into_owned();
    let d1 = a_prime.view((j - 1, 0), (1, k)).into_owned();

    let mut cc = CMat::zeros(k, 2);
    cc.view_mut((0, 0), (k, 1)).copy_from(&c1);
    cc.view_mut((0, 1), (k, 1)).copy_from(&c2);
    let mut dd = CMat::zeros(2, k);
    dd.view_mut((0, 0), (1, k)).copy_from(&d1);
    dd.view_mut((1, 0), (1, k)).copy_from(&d2);
    let mut c_prime = CMat::zeros(j, 2);
    c_prime.view_mut((0, 0), (j, 1)).copy_from(&c1_prime);
    c_prime.view_mut((0, 1), (j, 1)).copy_from(&c2_prime);

    MonadData::new(a, b, cc, dd, a_prime, b_prime, c_prime)
}
