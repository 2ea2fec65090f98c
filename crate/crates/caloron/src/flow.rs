//! Gradient flow toward the real equation on flagless complexes.
//!
//! A flagless complex is gauge-equivalent to a solution of the pair of
//! equations (the complex one, dβ/dθ + (1/c)[α, β] = 0, and the real one,
//! d(α + α*)/dθ + (1/c)([α, α*] + [β, β*]) = 0), and the solution inside
//! the complex-gauge orbit is unique up to unitary gauge. The flow moves a
//! discretized state along hermitian gauge directions: the defect μ of the
//! real equation drives the flow, the energy is the integrated ‖μ‖², and
//! each accepted step applies g = exp(−ε·ν) truncated at second order,
//! where ν is the energy gradient represented in a metric whose quartic
//! frequency growth matches the energy's second variation (the bare defect
//! direction is the flat-metric gradient, but its stable step shrinks with
//! the squared grid spacing, while the metrized direction admits order-one
//! steps at any resolution). The complex equation is gauge-covariant, so
//! its residual rides along unchanged up to discretization error.
//!
//! All derivatives are finite differences written as weighted differences
//! from the evaluation sample (exact zero on constant data): central at
//! interior samples, one-sided at interval ends. Residuals are measured on
//! interior samples only, where the stencils are central. The defect μ that
//! drives the flow uses first-order end stencils, the pairing of central
//! interiors and first-order ends that satisfies summation by parts against
//! the trapezoid weights exactly; gauge transformation of the fields keeps
//! the second-order end stencils for accuracy. The two junction samples
//! share one averaged flow direction so the β jumps transform by an
//! unambiguous junction gauge and the stored rank-one factors stay exact
//! factorizations.

use crate::error::{Error, Result};
use crate::linalg::{
    adjoint, cr, eye, fd3_weights_left, fd3_weights_mid, fd3_weights_right, frob, inverse,
    max_abs, CMat,
};
use crate::nahm::{fd3_of_path, gauge_transform, NahmComplexData, NahmExtra};

/// A flagless complex stripped to what the flow needs: sampled fields on
/// both intervals, the rank-one jump factors, and the gauge factor c.
/// Gluings are the identity by convention.
#[derive(Debug, Clone)]
pub struct DiscretizedNahm {
    pub grid_small: Vec<f64>,
    pub alpha_small: Vec<CMat>,
    pub beta_small: Vec<CMat>,
    pub grid_big: Vec<f64>,
    pub alpha_big: Vec<CMat>,
    pub beta_big: Vec<CMat>,
    pub u0: CMat,
    pub w0: CMat,
    pub u_inf: CMat,
    pub w_inf: CMat,
    pub gauge_factor: f64,
}

impl DiscretizedNahm {
    /// Fiber rank k.
    pub fn rank(&self) -> usize {
        self.u0.nrows()
    }

    pub(crate) fn structural_check(&self) -> Result<()> {
        let k = self.rank();
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
            for m in fields.iter() {
                if m.nrows() != k || m.ncols() != k {
                    return Err(Error::Shape {
                        field: "field sample",
                        expected: format!("{k}x{k}"),
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
        for (field, m, r, c) in [
            ("u0", &self.u0, k, 1usize),
            ("w0", &self.w0, 1usize, k),
            ("u_inf", &self.u_inf, k, 1),
            ("w_inf", &self.w_inf, 1, k),
        ] {
            if m.nrows() != r || m.ncols() != c {
                return Err(Error::Shape {
                    field,
                    expected: format!("{r}x{c}"),
                    found: format!("{}x{}", m.nrows(), m.ncols()),
                });
            }
        }
        if !(self.gauge_factor > 0.0 && self.gauge_factor.is_finite()) {
            return Err(Error::Precondition("the gauge factor must be positive".into()));
        }
        Ok(())
    }

    /// Strip a flagless complex down to a flow state. The complex must
    /// have no flag lines and identity gluings.
    pub fn from_complex(ncd: &NahmComplexData) -> Result<Self> {
        let j = ncd.rank_big - ncd.rank_small.min(ncd.rank_big);
        if j != 0 {
            return Err(Error::Precondition(format!(
                "the flow handles flagless complexes only; this one carries {j} flag lines"
            )));
        }
        let k = ncd.rank_small;
        let id = eye(k);
        for (name, m) in [
            ("i0", &ncd.i0),
            ("pi0", &ncd.pi0),
            ("i_inf", &ncd.i_inf),
            ("pi_inf", &ncd.pi_inf),
        ] {
            if m.nrows() != k || m.ncols() != k || max_abs(&(m - &id)) > 1e-8 {
                return Err(Error::Precondition(format!(
                    "the flow needs identity gluings; {name} is not"
                )));
            }
        }
        let (u0, w0, u_inf, w_inf) = match &ncd.extra {
            NahmExtra::Jump {
                u0,
                w0,
                u_inf,
                w_inf,
            } => (u0.clone(), w0.clone(), u_inf.clone(), w_inf.clone()),
            NahmExtra::Flag { .. } => {
                return Err(Error::Precondition(
                    "flag directions attached to a flagless complex".into(),
                ))
            }
        };
        let d = DiscretizedNahm {
            grid_small: ncd.grid_small.clone(),
            alpha_small: ncd.alpha_small.clone(),
            beta_small: ncd.beta_small.clone(),
            grid_big: ncd.grid_big.clone(),
            alpha_big: ncd.alpha_big.clone(),
            beta_big: ncd.beta_big.clone(),
            u0,
            w0,
            u_inf,
            w_inf,
            gauge_factor: ncd.gauge_factor,
        };
        d.structural_check()?;
        Ok(d)
    }

    /// Repackage the state as a complex with identity gluings.
    pub fn to_complex(&self) -> NahmComplexData {
        let k = self.rank();
        NahmComplexData {
            theta0: self.grid_small[0],
            theta_inf: *self.grid_small.last().unwrap(),
            rank_small: k,
            rank_big: k,
            grid_small: self.grid_small.clone(),
            alpha_small: self.alpha_small.clone(),
            beta_small: self.beta_small.clone(),
            grid_big: self.grid_big.clone(),
            alpha_big: self.alpha_big.clone(),
            beta_big: self.beta_big.clone(),
            i0: eye(k),
            pi0: eye(k),
            i_inf: eye(k),
            pi_inf: eye(k),
            x_res: CMat::zeros(0, 0),
            s_res: CMat::zeros(0, 0),
            extra: NahmExtra::Jump {
                u0: self.u0.clone(),
                w0: self.w0.clone(),
                u_inf: self.u_inf.clone(),
                w_inf: self.w_inf.clone(),
            },
            gauge_factor: self.gauge_factor,
            pole_gap: 0.0,
        }
    }
}

// ---------------------------------------------------------------------------
// Residuals and the flow direction
// ---------------------------------------------------------------------------

fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Derivative of a sampled path, paired to the trapezoid quadrature:
/// central differences at interior samples and first-order one-sided
/// differences at the two ends. With trapezoid weights this pair obeys the
/// discrete integration-by-parts identity exactly (boundary terms only),
/// which keeps the flow direction a descent direction for the energy all
/// the way down; the second-order end stencils lose that identity by an
/// amount that does not shrink with the defect and freeze the flow at a
/// spurious plateau. Written as weighted differences from the evaluation
/// sample so constants differentiate to exact zero.
fn sbp_of_path(grid: &[f64], gs: &[CMat], i: usize) -> CMat {
    let n = grid.len();
    if i == 0 {
        (&gs[1] - &gs[0]) * cr(1.0 / (grid[1] - grid[0]))
    } else if i == n - 1 {
        (&gs[n - 1] - &gs[n - 2]) * cr(1.0 / (grid[n - 1] - grid[n - 2]))
    } else {
        (&gs[i + 1] - &gs[i - 1]) * cr(1.0 / (grid[i + 1] - grid[i - 1]))
    }
}

/// The real-equation defect at every sample of one interval:
/// μ = d(α+α*)/dθ + (1/c)([α, α*] + [β, β*]), one-sided at the ends.
fn mu_samples(grid: &[f64], alpha: &[CMat], beta: &[CMat], c: f64) -> Vec<CMat> {
    let re_alpha: Vec<CMat> = alpha.iter().map(|a| a + adjoint(a)).collect();
    (0..grid.len())
        .map(|i| {
            let d = sbp_of_path(grid, &re_alpha, i);
            let comm = commutator(&alpha[i], &adjoint(&alpha[i]))
                + commutator(&beta[i], &adjoint(&beta[i]));
            d + comm * cr(1.0 / c)
        })
        .collect()
}

fn interior_max(mus: &[CMat], mub: &[CMat]) -> f64 {
    let mut worst = 0.0f64;
    for m in &mus[1..mus.len() - 1] {
        worst = worst.max(max_abs(m));
    }
    for m in &mub[1..mub.len() - 1] {
        worst = worst.max(max_abs(m));
    }
    worst
}

/// Largest interior defect of the complex equation,
/// dβ/dθ + (1/c)[α, β], over both intervals.
pub fn complex_residual(d: &DiscretizedNahm) -> f64 {
    let c = d.gauge_factor;
    let mut worst = 0.0f64;
    for (grid, alpha, beta) in [
        (&d.grid_small, &d.alpha_small, &d.beta_small),
        (&d.grid_big, &d.alpha_big, &d.beta_big),
    ] {
        for i in 1..grid.len() - 1 {
            let res = fd3_of_path(grid, beta, i) + commutator(&alpha[i], &beta[i]) * cr(1.0 / c);
            worst = worst.max(max_abs(&res));
        }
    }
    worst
}

/// Largest interior defect of the real equation over both intervals.
pub fn real_residual(d: &DiscretizedNahm) -> f64 {
    let mus = mu_samples(&d.grid_small, &d.alpha_small, &d.beta_small, d.gauge_factor);
    let mub = mu_samples(&d.grid_big, &d.alpha_big, &d.beta_big, d.gauge_factor);
    interior_max(&mus, &mub)
}

/// The flow direction: the real-equation defect at every sample, with the
/// two samples at each junction replaced by their average so both sides of
/// a junction move by the same gauge.
pub fn flow_direction(d: &DiscretizedNahm) -> (Vec<CMat>, Vec<CMat>) {
    let mut mus = mu_samples(&d.grid_small, &d.alpha_small, &d.beta_small, d.gauge_factor);
    let mut mub = mu_samples(&d.grid_big, &d.alpha_big, &d.beta_big, d.gauge_factor);
    let nb = mub.len();
    let ns = mus.len();
    let at_inf = (&mus[ns - 1] + &mub[0]) * cr(0.5);
    mus[ns - 1] = at_inf.clone();
    mub[0] = at_inf;
    let at_zero = (&mus[0] + &mub[nb - 1]) * cr(0.5);
    mus[0] = at_zero.clone();
    mub[nb - 1] = at_zero;
    (mus, mub)
}

fn weighted_energy(grid: &[f64], mu: &[CMat]) -> f64 {
    energy_weights(grid)
        .iter()
        .zip(mu)
        .map(|(w, m)| {
            let f = frob(m);
            w * f * f
        })
        .sum()
}

fn energy_from(d: &DiscretizedNahm, mus: &[CMat], mub: &[CMat]) -> f64 {
    weighted_energy(&d.grid_small, mus) + weighted_energy(&d.grid_big, mub)
}

/// Integrated squared defect, ∫‖μ‖²_F dθ by trapezoid weights over the
/// interior samples of both intervals. The interval-end samples carry the
/// rank-one sources of the equation (the equation holds away from the two
/// junction points, not at them), so they contribute no energy; this keeps
/// energy = 0 exactly equivalent to a vanishing interior residual.
pub fn energy(d: &DiscretizedNahm) -> f64 {
    let (mus, mub) = flow_direction(d);
    energy_from(d, &mus, &mub)
}

// ---------------------------------------------------------------------------
// Exact energy gradient
// ---------------------------------------------------------------------------

/// Per-sample trapezoid quadrature weights over one interval.
fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    w[0] = 0.5 * (grid[1] - grid[0]);
    w[n - 1] = 0.5 * (grid[n - 1] - grid[n - 2]);
    for i in 1..n - 1 {
        w[i] = 0.5 * (grid[i + 1] - grid[i - 1]);
    }
    w
}

/// Quadrature weights of the energy: trapezoid weights with the interval-end
/// samples zeroed out, so the energy over one interval is exactly
/// Σ_i w_i ‖μ_i‖² supported on interior samples.
fn energy_weights(grid: &[f64]) -> Vec<f64> {
    let mut w = trapezoid_weights(grid);
    let n = w.len();
    w[0] = 0.0;
    w[n - 1] = 0.0;
    w
}

fn hermitian_part(m: &CMat) -> CMat {
    (m + adjoint(m)) * cr(0.5)
}

/// Transpose application of the flow derivative stencils (`sbp_of_path`):
/// given row outputs y, returns z with z_j = Σ_i D_{ij} y_i.
fn scatter_dual_flow_d(grid: &[f64], ys: &[CMat]) -> Vec<CMat> {
    let n = grid.len();
    let shape = (ys[0].nrows(), ys[0].ncols());
    let mut z = vec![CMat::zeros(shape.0, shape.1); n];
    let w = 1.0 / (grid[1] - grid[0]);
    z[0] -= &ys[0] * cr(w);
    z[1] += &ys[0] * cr(w);
    for i in 1..n - 1 {
        let w = 1.0 / (grid[i + 1] - grid[i - 1]);
        z[i - 1] -= &ys[i] * cr(w);
        z[i + 1] += &ys[i] * cr(w);
    }
    let w = 1.0 / (grid[n - 1] - grid[n - 2]);
    z[n - 2] -= &ys[n - 1] * cr(w);
    z[n - 1] += &ys[n - 1] * cr(w);
    z
}

/// Transpose application of the second-order stencils (`fd3_of_path`), used
/// where the gauge step differentiates the direction.
fn scatter_dual_fd3(grid: &[f64], ys: &[CMat]) -> Vec<CMat> {
    let n = grid.len();
    let shape = (ys[0].nrows(), ys[0].ncols());
    let mut z = vec![CMat::zeros(shape.0, shape.1); n];
    let (_, w1, w2) = fd3_weights_left(grid[0], grid[1], grid[2]);
    z[0] -= &ys[0] * cr(w1 + w2);
    z[1] += &ys[0] * cr(w1);
    z[2] += &ys[0] * cr(w2);
    for i in 1..n - 1 {
        let (w0, _, w2) = fd3_weights_mid(grid[i - 1], grid[i], grid[i + 1]);
        z[i - 1] += &ys[i] * cr(w0);
        z[i] -= &ys[i] * cr(w0 + w2);
        z[i + 1] += &ys[i] * cr(w2);
    }
    let (w0, w1, _) = fd3_weights_right(grid[n - 3], grid[n - 2], grid[n - 1]);
    z[n - 3] += &ys[n - 1] * cr(w0);
    z[n - 2] += &ys[n - 1] * cr(w1);
    z[n - 1] -= &ys[n - 1] * cr(w0 + w1);
    z
}

/// Per-slot differential of the discrete energy along hermitian gauge
/// directions: dE(ν) = Σ over every sample slot of ⟨F_slot, ν_slot⟩ (plain
/// Frobenius pairing, junction slots contributing once per interval side).
///
/// Derivation: with Y the energy-weighted defect (zero on the weightless
/// end samples), the energy derivative is 2Σ⟨Y, δμ⟩; moving the defect's
/// stencil and the commutators onto Y gives Q = Dᵀ(Y) + (1/c)[Y, α], and
/// moving the gauge step's δα = c·dν − [ν, α], δβ = −[ν, β] onto Q yields
/// per sample F = 4(c·dᵀ(Q) − [Q, α*] − (1/c)[[Y, β], β*]); only its
/// hermitian part pairs with hermitian ν.
fn gradient_slots(d: &DiscretizedNahm) -> (Vec<CMat>, Vec<CMat>) {
    let c = d.gauge_factor;
    let (mus, mub) = flow_direction(d);
    let ws = energy_weights(&d.grid_small);
    let wb = energy_weights(&d.grid_big);

    let ys: Vec<CMat> = mus.iter().zip(&ws).map(|(m, w)| m * cr(*w)).collect();
    let yb: Vec<CMat> = mub.iter().zip(&wb).map(|(m, w)| m * cr(*w)).collect();

    let per_interval = |grid: &[f64], alpha: &[CMat], beta: &[CMat], y: &[CMat]| -> Vec<CMat> {
        let n = grid.len();
        let z = scatter_dual_flow_d(grid, y);
        let q: Vec<CMat> = (0..n)
            .map(|i| &z[i] + commutator(&y[i], &alpha[i]) * cr(1.0 / c))
            .collect();
        let t = scatter_dual_fd3(grid, &q);
        (0..n)
            .map(|i| {
                let f = &t[i] * cr(c)
                    - commutator(&q[i], &adjoint(&alpha[i]))
                    - commutator(&commutator(&y[i], &beta[i]), &adjoint(&beta[i])) * cr(1.0 / c);
                hermitian_part(&(f * cr(4.0)))
            })
            .collect()
    };
    let fs = per_interval(&d.grid_small, &d.alpha_small, &d.beta_small, &ys);
    let fb = per_interval(&d.grid_big, &d.alpha_big, &d.beta_big, &yb);
    (fs, fb)
}

/// Index of a sample slot in the vector of shared gauge unknowns: interior
/// samples own one unknown each, and the two slots on each junction point
/// to a single unknown.
fn slot_index(ns: usize, nb: usize, interval: usize, i: usize) -> usize {
    if interval == 0 {
        i
    } else if i == nb - 1 {
        0
    } else if i == 0 {
        ns - 1
    } else {
        ns - 1 + i
    }
}

/// Solver for the descent direction: the energy gradient represented in the
/// metric γ⟨ν, φ⟩ + σ⟨dν, dφ⟩ + τ⟨d②ν, d②φ⟩-like quadrature form
/// M = γH + σK + τKH⁻¹K with K the stiffness form of the flow derivative.
///
/// The bare defect direction needs steps below the squared grid spacing to
/// keep the energy monotone, so its step count grows with resolution; the
/// energy's second variation along gauge directions grows with the fourth
/// power of the sample frequency, and this metric matches that growth, so
/// steps of order one stay stable at any resolution. The direction solves
/// M ν = −F with F the per-slot differential, hence dE(ν) = −⟨ν, Mν⟩ < 0:
/// every direction is a strict descent direction away from critical points.
struct DirectionSolver {
    factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    ns: usize,
    nb: usize,
}

impl DirectionSolver {
    fn new(d: &DiscretizedNahm) -> Result<Self> {
        let ns = d.grid_small.len();
        let nb = d.grid_big.len();
        let n = ns + nb - 2;
        let c = d.gauge_factor;
        let tau = 8.0 * c.powi(4);
        let field_scale: f64 = {
            let k2 = (d.rank() * d.rank()) as f64;
            let mean = |v: &[CMat]| -> f64 {
                v.iter().map(|m| frob(m).powi(2) / k2).sum::<f64>() / v.len() as f64
            };
            (8.0 * (mean(&d.alpha_small) + mean(&d.alpha_big))
                + 4.0 * (mean(&d.beta_small) + mean(&d.beta_big)))
                / 2.0
        };
        let gamma = (field_scale / (c * c)).max(tau);
        let sigma = 2.0 * (gamma * tau).sqrt();

        let mut mass = nalgebra::DVector::<f64>::zeros(n);
        let mut stiff = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (interval, grid) in [(0usize, &d.grid_small), (1usize, &d.grid_big)] {
            let w = trapezoid_weights(grid);
            let nn = grid.len();
            for i in 0..nn {
                mass[slot_index(ns, nb, interval, i)] += w[i];
            }
            for i in 0..nn {
                let (a, b, coef) = if i == 0 {
                    (0, 1, 1.0 / (grid[1] - grid[0]))
                } else if i == nn - 1 {
                    (nn - 2, nn - 1, 1.0 / (grid[nn - 1] - grid[nn - 2]))
                } else {
                    (i - 1, i + 1, 1.0 / (grid[i + 1] - grid[i - 1]))
                };
                let ua = slot_index(ns, nb, interval, a);
                let ub = slot_index(ns, nb, interval, b);
                let s = w[i] * coef * coef;
                stiff[(ua, ua)] += s;
                stiff[(ub, ub)] += s;
                stiff[(ua, ub)] -= s;
                stiff[(ub, ua)] -= s;
            }
        }
        let mass_inv = nalgebra::DMatrix::from_diagonal(&mass.map(|m| 1.0 / m));
        let mut metric = &stiff * &mass_inv * &stiff * tau + stiff * sigma;
        for i in 0..n {
            metric[(i, i)] += gamma * mass[i];
        }
        let factor = metric.cholesky().ok_or(Error::Precondition(
            "the descent metric is not positive definite".into(),
        ))?;
        Ok(DirectionSolver { factor, ns, nb })
    }

    fn direction(&self, d: &DiscretizedNahm) -> (Vec<CMat>, Vec<CMat>) {
        let (fs, fb) = gradient_slots(d);
        let k = d.rank();
        let n = self.ns + self.nb - 2;
        let mut rhs = nalgebra::DMatrix::<f64>::zeros(n, 2 * k * k);
        let mut add = |interval: usize, i: usize, f: &CMat| {
            let u = slot_index(self.ns, self.nb, interval, i);
            for p in 0..k {
                for q in 0..k {
                    let e = f[(p, q)];
                    rhs[(u, 2 * (p * k + q))] -= e.re;
                    rhs[(u, 2 * (p * k + q) + 1)] -= e.im;
                }
            }
        };
        for (i, f) in fs.iter().enumerate() {
            add(0, i, f);
        }
        for (i, f) in fb.iter().enumerate() {
            add(1, i, f);
        }
        let sol = self.factor.solve(&rhs);
        let at = |interval: usize, i: usize| -> CMat {
            let u = slot_index(self.ns, self.nb, interval, i);
            let m = CMat::from_fn(k, k, |p, q| {
                crate::linalg::c(sol[(u, 2 * (p * k + q))], sol[(u, 2 * (p * k + q) + 1)])
            });
            hermitian_part(&m)
        };
        let nus: Vec<CMat> = (0..self.ns).map(|i| at(0, i)).collect();
        let nub: Vec<CMat> = (0..self.nb).map(|i| at(1, i)).collect();
        (nus, nub)
    }
}

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

/// Apply the gauge step g = 1 − εν + ε²ν²/2 built samplewise from the
/// direction ν (both intervals), moving fields and jump factors. For
/// hermitian ν the step matrix has eigenvalues at least 1/2, so it is
/// always invertible.
pub fn apply_gauge_step(
    d: &DiscretizedNahm,
    nu_small: &[CMat],
    nu_big: &[CMat],
    eps: f64,
) -> Result<DiscretizedNahm> {
    if nu_small.len() != d.grid_small.len() || nu_big.len() != d.grid_big.len() {
        return Err(Error::Precondition(format!(
            "direction length mismatch: {} and {} samples for grids of {} and {}",
            nu_small.len(),
            nu_big.len(),
            d.grid_small.len(),
            d.grid_big.len()
        )));
    }
    let k = d.rank();
    let step = |nu: &CMat| -> CMat {
        eye(k) - nu * cr(eps) + (nu * nu) * cr(0.5 * eps * eps)
    };
    let gs: Vec<CMat> = nu_small.iter().map(&step).collect();
    let gb: Vec<CMat> = nu_big.iter().map(&step).collect();

    let (alpha_small, beta_small) = gauge_transform(
        &d.grid_small,
        &gs,
        &d.alpha_small,
        &d.beta_small,
        d.gauge_factor,
    )?;
    let (alpha_big, beta_big) =
        gauge_transform(&d.grid_big, &gb, &d.alpha_big, &d.beta_big, d.gauge_factor)?;

    let g_zero = &gs[0];
    let g_inf = &gs[gs.len() - 1];
    let g_zero_inv = inverse(g_zero, "flow step at the zero junction")?;
    let g_inf_inv = inverse(g_inf, "flow step at the infinity junction")?;

    Ok(DiscretizedNahm {
        grid_small: d.grid_small.clone(),
        alpha_small,
        beta_small,
        grid_big: d.grid_big.clone(),
        alpha_big,
        beta_big,
        u0: g_zero * &d.u0,
        w0: &d.w0 * &g_zero_inv,
        u_inf: g_inf * &d.u_inf,
        w_inf: &d.w_inf * &g_inf_inv,
        gauge_factor: d.gauge_factor,
    })
}

/// Exact derivative of the discrete energy along a hermitian direction ν,
/// matching a central finite difference of `energy` across
/// `apply_gauge_step(±ε)` to second order in ε.
pub fn energy_directional_derivative(
    d: &DiscretizedNahm,
    nu_small: &[CMat],
    nu_big: &[CMat],
) -> Result<f64> {
    if nu_small.len() != d.grid_small.len() || nu_big.len() != d.grid_big.len() {
        return Err(Error::Precondition(
            "direction length mismatch against the grids".into(),
        ));
    }
    let c = d.gauge_factor;
    let (mus, mub) = flow_direction(d);

    let delta_mu = |grid: &[f64], alpha: &[CMat], beta: &[CMat], nu: &[CMat]| -> Vec<CMat> {
        let n = grid.len();
        let mut dalpha = Vec::with_capacity(n);
        let mut dbeta = Vec::with_capacity(n);
        for i in 0..n {
            let nudot = fd3_of_path(grid, nu, i);
            dalpha.push(-commutator(&nu[i], &alpha[i]) + nudot * cr(c));
            dbeta.push(-commutator(&nu[i], &beta[i]));
        }
        let dre: Vec<CMat> = dalpha.iter().map(|m| m + adjoint(m)).collect();
        (0..n)
            .map(|i| {
                let fd = sbp_of_path(grid, &dre, i);
                let comm = commutator(&dalpha[i], &adjoint(&alpha[i]))
                    + commutator(&alpha[i], &adjoint(&dalpha[i]))
                    + commutator(&dbeta[i], &adjoint(&beta[i]))
                    + commutator(&beta[i], &adjoint(&dbeta[i]));
                fd + comm * cr(1.0 / c)
            })
            .collect()
    };
    let dmus = delta_mu(&d.grid_small, &d.alpha_small, &d.beta_small, nu_small);
    let dmub = delta_mu(&d.grid_big, &d.alpha_big, &d.beta_big, nu_big);

    let pairing = |grid: &[f64], mu: &[CMat], dmu: &[CMat]| -> f64 {
        energy_weights(grid)
            .iter()
            .enumerate()
            .map(|(i, w)| {
                2.0 * w
                    * mu[i]
                        .iter()
                        .zip(dmu[i].iter())
                        .map(|(m, dm)| (m.conj() * dm).re)
                        .sum::<f64>()
            })
            .sum::<f64>()
    };
    Ok(pairing(&d.grid_small, &mus, &dmus) + pairing(&d.grid_big, &mub, &dmub))
}

/// The result of a flow run.
#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub state: DiscretizedNahm,
    /// Energies of the accepted states, starting with the input.
    pub energies: Vec<f64>,
    /// Step attempts consumed (accepted and rejected).
    pub steps: usize,
    pub initial_complex_residual: f64,
    pub final_complex_residual: f64,
    pub final_real_residual: f64,
}

/// Run the gradient flow until the interior real-equation defect drops to
/// `tol`. Each step applies the gauge motion exp(-ε·ν) along the metrized
/// descent direction ν (the energy gradient under the quartic-growth
/// metric, which keeps order-one steps stable at any resolution). The step
/// size grows gently on accepted steps and halves when the energy would
/// increase, so the energy record is non-increasing. Runs out of steps or
/// of step size with `FlowStalled`, which carries the energy history.
pub fn flow_to_solution(
    d: &DiscretizedNahm,
    max_steps: usize,
    tol: f64,
) -> Result<FlowOutcome> {
    d.structural_check()?;
    if !(tol > 0.0) {
        return Err(Error::Precondition("the flow tolerance must be positive".into()));
    }
    let initial_complex_residual = complex_residual(d);
    let mut state = d.clone();
    let (mut mus, mut mub) = flow_direction(&state);
    let mut e_cur = energy_from(&state, &mus, &mub);
    let mut energies = vec![e_cur];
    let mut r = interior_max(&mus, &mub);

    let solver = DirectionSolver::new(&state)?;
    let mut eps = 1.0;
    let mut steps = 0usize;
    let mut dir: Option<(Vec<CMat>, Vec<CMat>)> = None;

    while r > tol {
        if steps >= max_steps {
            return Err(Error::FlowStalled {
                steps,
                last: r,
                trace: energies,
            });
        }
        let (nus, nub) = dir.get_or_insert_with(|| solver.direction(&state));
        let cand = apply_gauge_step(&state, nus, nub, eps)?;
        let (cmus, cmub) = flow_direction(&cand);
        let e_new = energy_from(&cand, &cmus, &cmub);
        steps += 1;
        if e_new <= e_cur {
            state = cand;
            mus = cmus;
            mub = cmub;
            e_cur = e_new;
            energies.push(e_new);
            r = interior_max(&mus, &mub);
            eps *= 1.2;
            dir = None;
        } else {
            eps *= 0.5;
            if eps < 1e-15 {
                return Err(Error::FlowStalled {
                    steps,
                    last: r,
                    trace: energies,
                });
            }
        }
    }

    let final_complex_residual = complex_residual(&state);
    Ok(FlowOutcome {
        state,
        energies,
        steps,
        initial_complex_residual,
        final_complex_residual,
        final_real_residual: r,
    })
}
