//! Fiberwise realization of the four bundles attached to monad data, and the
//! closed-form Chern classes, Euler characteristics, and h¹ formulas.
//!
//! Each bundle is the middle cohomology of a three-term complex of sums of
//! line bundles on P¹×P¹,
//!
//! ```text
//! O(-1,0)^a --alpha--> O(-1,1)^b ⊕ O^c --beta--> O(0,1)^d
//! ```
//!
//! whose maps have entries affine in the two affine coordinates (x, y). The
//! same coefficient triples feed both the pointwise evaluation here and the
//! lattice cohomology computation in [`crate::cech`].

use crate::error::Result;
use crate::linalg::{cr, eye, inverse, max_abs, C64, CMat, RankDecision};
use crate::monad::{shift_pair, MonadData};
use crate::tol::Tolerances;

/// Selector for the four bundles realized by one set of monad data.
///
/// `K0Inf1` selects the monad whose middle cohomology is the third bundle
/// twisted by (0,1); the reporting functions below always speak about the
/// untwisted family, and the lattice computation compensates internally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BundleTag {
    /// The caloron bundle itself.
    E,
    /// Kernel of the evaluation onto the quotient flag at the zero fiber.
    K0,
    /// Kernel at the infinity fiber.
    KInf,
    /// Kernel at both fibers, twisted by (0,1) to stay a monad of the
    /// standard shape.
    K0Inf1,
}

impl BundleTag {
    pub const ALL: [BundleTag; 4] = [
        BundleTag::E,
        BundleTag::K0,
        BundleTag::KInf,
        BundleTag::K0Inf1,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BundleTag::E => "E",
            BundleTag::K0 => "K0",
            BundleTag::KInf => "Kinf",
            BundleTag::K0Inf1 => "K0inf1",
        }
    }

    pub fn parse(s: &str) -> Option<BundleTag> {
        match s {
            "E" | "e" => Some(BundleTag::E),
            "K0" | "k0" => Some(BundleTag::K0),
            "Kinf" | "kinf" | "KInf" => Some(BundleTag::KInf),
            "K0inf1" | "k0inf1" | "K0Inf1" => Some(BundleTag::K0Inf1),
            _ => None,
        }
    }

    /// The lattice computation works with the monad of this tag, which for
    /// `K0Inf1` realizes the family twisted by (0,1): to report the family
    /// at twist (p, q), twist that monad by (p, q-1).
    pub fn internal_twist(&self) -> (i64, i64) {
        match self {
            BundleTag::K0Inf1 => (0, 1),
            _ => (0, 0),
        }
    }
}

impl std::fmt::Display for BundleTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Twist by O(pH₁ + qH₂).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TwistPair {
    pub p: i64,
    pub q: i64,
}

impl TwistPair {
    pub fn new(p: i64, q: i64) -> Self {
        TwistPair { p, q }
    }
}

/// Chern class coefficients in the basis (H₁, H₂, H₁H₂).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ChernClass {
    pub c1_h1: i64,
    pub c1_h2: i64,
    pub c2: i64,
}

/// A matrix whose entries are affine polynomials c0 + cx·x + cy·y.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMat {
    pub c0: CMat,
    pub cx: CMat,
    pub cy: CMat,
}

impl PolyMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        PolyMat {
            c0: CMat::zeros(rows, cols),
            cx: CMat::zeros(rows, cols),
            cy: CMat::zeros(rows, cols),
        }
    }

    pub fn nrows(&self) -> usize {
        self.c0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.c0.ncols()
    }

    /// Evaluate at an affine point.
    pub fn eval(&self, x: C64, y: C64) -> CMat {
        &self.c0 + &self.cx * x + &self.cy * y
    }

    fn set_block(&mut self, r: usize, c: usize, c0: &CMat, cx: &CMat, cy: &CMat) {
        let (h, w) = (c0.nrows(), c0.ncols());
        self.c0.view_mut((r, c), (h, w)).copy_from(c0);
        self.cx.view_mut((r, c), (h, w)).copy_from(cx);
        self.cy.view_mut((r, c), (h, w)).copy_from(cy);
    }

    /// Place a constant block.
    pub fn put_const(&mut self, r: usize, c: usize, m: &CMat) {
        let z = CMat::zeros(m.nrows(), m.ncols());
        self.set_block(r, c, m, &z, &z);
    }

    /// Place a block of the form m0 + mx·x.
    pub fn put_affine_x(&mut self, r: usize, c: usize, m0: &CMat, mx: &CMat) {
        let z = CMat::zeros(m0.nrows(), m0.ncols());
        self.set_block(r, c, m0, mx, &z);
    }

    /// Place a block of the form m0 + my·y.
    pub fn put_affine_y(&mut self, r: usize, c: usize, m0: &CMat, my: &CMat) {
        let z = CMat::zeros(m0.nrows(), m0.ncols());
        self.set_block(r, c, m0, &z, my);
    }
}

/// The three-term complex presenting one bundle: summand bidegrees of each
/// term plus the two coefficient matrices.
#[derive(Debug, Clone)]
pub struct BundleMonad {
    /// Bidegrees of the left term's line-bundle summands (all (-1,0)).
    pub deg_left: Vec<(i64, i64)>,
    /// Bidegrees of the middle term's summands ((-1,1) block then (0,0)).
    pub deg_mid: Vec<(i64, i64)>,
    /// Bidegrees of the right term's summands (all (0,1)).
    pub deg_right: Vec<(i64, i64)>,
    /// Left map, (b+c) × a.
    pub alpha: PolyMat,
    /// Right map, d × (b+c).
    pub beta: PolyMat,
}

impl BundleMonad {
    /// Check that every nonzero coefficient respects the degree gap between
    /// its source and target summands (a map O(u) → O(v) can only carry
    /// monomials of bidegree ≤ v − u componentwise). A violated gap would
    /// silently corrupt the lattice computation, so this is an assertion of
    /// internal consistency, not an input check.
    fn assert_degree_legal(&self) {
        let legal = |p: &PolyMat, src: &[(i64, i64)], dst: &[(i64, i64)]| {
            for r in 0..p.nrows() {
                for cidx in 0..p.ncols() {
                    let gap = (dst[r].0 - src[cidx].0, dst[r].1 - src[cidx].1);
                    if p.c0[(r, cidx)].norm() > 0.0 {
                        assert!(gap.0 >= 0 && gap.1 >= 0, "constant entry at degree gap {gap:?}");
                    }
                    if p.cx[(r, cidx)].norm() > 0.0 {
                        assert!(gap.0 >= 1 && gap.1 >= 0, "x entry at degree gap {gap:?}");
                    }
                    if p.cy[(r, cidx)].norm() > 0.0 {
                        assert!(gap.0 >= 0 && gap.1 >= 1, "y entry at degree gap {gap:?}");
                    }
                }
            }
        };
        legal(&self.alpha, &self.deg_left, &self.deg_mid);
        legal(&self.beta, &self.deg_mid, &self.deg_right);
    }

    /// Evaluate both maps at a point.
    pub fn eval(&self, x: C64, y: C64) -> (CMat, CMat) {
        (self.alpha.eval(x, y), self.beta.eval(x, y))
    }
}

fn degs(n: usize, d: (i64, i64)) -> Vec<(i64, i64)> {
    vec![d; n]
}

/// Build the three-term complex for the selected bundle. For flagless data
/// the zero- and both-fiber monads require invertible A.
pub fn bundle_monad(data: &MonadData, tag: BundleTag) -> Result<BundleMonad> {
    let (k, j) = (data.k(), data.j());
    let idk = eye(k);
    let idj = eye(j);
    let (s, eplus) = shift_pair(j);
    let monad = match tag {
        BundleTag::E => {
            let (a_r, b_r, c_r, d_r) = (k, k, k + 2, k);
            let mut alpha = PolyMat::zeros(b_r + c_r, a_r);
            alpha.put_affine_y(0, 0, data.a(), &(-&idk));
            alpha.put_affine_x(k, 0, data.b(), &(-&idk));
            alpha.put_const(2 * k, 0, data.d());
            let mut beta = PolyMat::zeros(d_r, b_r + c_r);
            beta.put_affine_x(0, 0, &(-data.b()), &idk);
            beta.put_affine_y(0, k, data.a(), &(-&idk));
            beta.put_const(0, 2 * k, data.c());
            BundleMonad {
                deg_left: degs(a_r, (-1, 0)),
                deg_mid: [degs(b_r, (-1, 1)), degs(c_r, (0, 0))].concat(),
                deg_right: degs(d_r, (0, 1)),
                alpha,
                beta,
            }
        }
        BundleTag::KInf => {
            let (a_r, b_r, c_r, d_r) = (k, k, k + 3, k + 1);
            let mut alpha = PolyMat::zeros(b_r + c_r, a_r);
            alpha.put_affine_y(0, 0, data.a(), &(-&idk));
            alpha.put_affine_x(k, 0, data.b(), &(-&idk));
            alpha.put_const(2 * k, 0, data.d());
            alpha.put_const(2 * k + 2, 0, &(data.d2() * data.a()));
            let mut beta = PolyMat::zeros(d_r, b_r + c_r);
            beta.put_affine_x(0, 0, &(-data.b()), &idk);
            beta.put_affine_y(0, k, data.a(), &(-&idk));
            beta.put_const(0, 2 * k, data.c());
            beta.put_const(k, 0, &(-data.d2()));
            // Row k over the (0,0) pair block: entries (0, -y).
            beta.put_affine_y(k, 2 * k + 1, &CMat::zeros(1, 1), &CMat::from_element(1, 1, cr(-1.0)));
            beta.put_const(k, 2 * k + 2, &CMat::from_element(1, 1, cr(1.0)));
            BundleMonad {
                deg_left: degs(a_r, (-1, 0)),
                deg_mid: [degs(b_r, (-1, 1)), degs(c_r, (0, 0))].concat(),
                deg_right: degs(d_r, (0, 1)),
                alpha,
                beta,
            }
        }
        BundleTag::K0 if j >= 1 => {
            let n = k + j;
            let (a_r, b_r, c_r, d_r) = (n, n, n + 3, n + 1);
            let mut alpha = PolyMat::zeros(b_r + c_r, a_r);
            alpha.put_affine_y(0, 0, data.a(), &(-&idk));
            alpha.put_const(k, 0, data.a_prime());
            alpha.put_affine_y(k, k, &CMat::zeros(j, j), &(-&idj));
            alpha.put_affine_x(n, 0, data.b(), &(-&idk));
            alpha.put_const(n + k, 0, &data.b_prime_padded());
            alpha.put_affine_x(n + k, k, &s, &(-&idj));
            alpha.put_const(2 * n, 0, data.d());
            alpha.put_const(2 * n + 2, k, &eplus);
            let mut beta = PolyMat::zeros(d_r, b_r + c_r);
            beta.put_affine_x(0, 0, &(-data.b()), &idk);
            beta.put_affine_y(0, n, data.a(), &(-&idk));
            beta.put_const(0, 2 * n, data.c());
            beta.put_const(k, 0, &(-data.b_prime_padded()));
            beta.put_affine_x(k, k, &(-&s), &idj);
            beta.put_const(k, n, data.a_prime());
            beta.put_affine_y(k, n + k, &CMat::zeros(j, j), &(-&idj));
            beta.put_const(k, 2 * n, data.c_prime());
            beta.put_const(n, k, &(-&eplus));
            beta.put_const(n, 2 * n, &CMat::from_row_slice(1, 2, &[cr(1.0), cr(0.0)]));
            beta.put_affine_y(n, 2 * n + 2, &CMat::zeros(1, 1), &CMat::from_element(1, 1, cr(-1.0)));
            BundleMonad {
                deg_left: degs(a_r, (-1, 0)),
                deg_mid: [degs(b_r, (-1, 1)), degs(c_r, (0, 0))].concat(),
                deg_right: degs(d_r, (0, 1)),
                alpha,
                beta,
            }
        }
        BundleTag::K0 => {
            // Flagless form, built with A⁻¹.
            let a_inv = inverse(data.a(), "flagless zero-fiber monad")?;
            let d1ainv = data.d1() * &a_inv;
            let (a_r, b_r, c_r, d_r) = (k, k, k + 3, k + 1);
            let mut alpha = PolyMat::zeros(b_r + c_r, a_r);
            alpha.put_affine_y(0, 0, data.a(), &(-&idk));
            alpha.put_affine_x(k, 0, data.b(), &(-&idk));
            alpha.put_const(2 * k, 0, data.d());
            alpha.put_const(2 * k + 2, 0, &d1ainv);
            let mut beta = PolyMat::zeros(d_r, b_r + c_r);
            beta.put_affine_x(0, 0, &(-data.b()), &idk);
            beta.put_affine_y(0, k, data.a(), &(-&idk));
            beta.put_const(0, 2 * k, data.c());
            beta.put_const(k, 0, &(-&d1ainv));
            beta.put_const(k, 2 * k, &CMat::from_row_slice(1, 2, &[cr(1.0), cr(0.0)]));
            beta.put_affine_y(k, 2 * k + 2, &CMat::zeros(1, 1), &CMat::from_element(1, 1, cr(-1.0)));
            BundleMonad {
                deg_left: degs(a_r, (-1, 0)),
                deg_mid: [degs(b_r, (-1, 1)), degs(c_r, (0, 0))].concat(),
                deg_right: degs(d_r, (0, 1)),
                alpha,
                beta,
            }
        }
        BundleTag::K0Inf1 if j >= 1 => {
            let n = k + j;
            let (a_r, b_r, c_r, d_r) = (n, n, n + 2, n);
            let c1e = data.c1() * &eplus;
            let c1pe = data.c1_prime() * &eplus;
            let mut alpha = PolyMat::zeros(b_r + c_r, a_r);
            alpha.put_affine_y(0, 0, data.a(), &(-&idk));
            alpha.put_const(k, 0, data.a_prime());
            alpha.put_affine_y(k, k, &CMat::zeros(j, j), &(-&idj));
            alpha.put_affine_x(n, 0, data.b(), &(-&idk));
            alpha.put_const(n, k, &(-&c1e));
            alpha.put_const(n + k, 0, &data.b_prime_padded());
            alpha.put_affine_x(n + k, k, &(&s - &c1pe), &(-&idj));
            alpha.put_const(2 * n, 0, &data.d2());
            alpha.put_const(2 * n + 1, k, &eplus);
            let mut beta = PolyMat::zeros(d_r, b_r + c_r);
            beta.put_affine_x(0, 0, &(-data.b()), &idk);
            beta.put_const(0, k, &c1e);
            beta.put_affine_y(0, n, data.a(), &(-&idk));
            beta.put_const(0, 2 * n, &data.c2());
            beta.put_const(0, 2 * n + 1, &(data.a() * data.c1()));
            beta.put_const(k, 0, &(-data.b_prime_padded()));
            beta.put_affine_x(k, k, &(&c1pe - &s), &idj);
            beta.put_const(k, n, data.a_prime());
            beta.put_affine_y(k, n + k, &CMat::zeros(j, j), &(-&idj));
            beta.put_const(k, 2 * n, &data.c2_prime());
            beta.put_const(k, 2 * n + 1, &(data.a_prime() * data.c1()));
            BundleMonad {
                deg_left: degs(a_r, (-1, 0)),
                deg_mid: [degs(b_r, (-1, 1)), degs(c_r, (0, 0))].concat(),
                deg_right: degs(d_r, (0, 1)),
                alpha,
                beta,
            }
        }
        BundleTag::K0Inf1 => {
            // Flagless form: the coupling through the flag collapses to the
            // rank-one correction C₁D₁A⁻¹ of B.
            let a_inv = inverse(data.a(), "flagless two-fiber monad")?;
            let d1ainv = data.d1() * &a_inv;
            let b_corr = data.b() - data.c1() * &d1ainv;
            let (a_r, b_r, c_r, d_r) = (k, k, k + 2, k);
            let mut alpha = PolyMat::zeros(b_r + c_r, a_r);
            alpha.put_affine_y(0, 0, data.a(), &(-&idk));
            alpha.put_affine_x(k, 0, &b_corr, &(-&idk));
            alpha.put_const(2 * k, 0, &data.d2());
            alpha.put_const(2 * k + 1, 0, &d1ainv);
            let mut beta = PolyMat::zeros(d_r, b_r + c_r);
            beta.put_affine_x(0, 0, &(-&b_corr), &idk);
            beta.put_affine_y(0, k, data.a(), &(-&idk));
            beta.put_const(0, 2 * k, &data.c2());
            beta.put_const(0, 2 * k + 1, &(data.a() * data.c1()));
            BundleMonad {
                deg_left: degs(a_r, (-1, 0)),
                deg_mid: [degs(b_r, (-1, 1)), degs(c_r, (0, 0))].concat(),
                deg_right: degs(d_r, (0, 1)),
                alpha,
                beta,
            }
        }
    };
    monad.assert_degree_legal();
    Ok(monad)
}

/// Evaluate the selected monad at an affine point (x, y).
pub fn monad_at_point(data: &MonadData, tag: BundleTag, x: C64, y: C64) -> Result<(CMat, CMat)> {
    let m = bundle_monad(data, tag)?;
    Ok(m.eval(x, y))
}

/// Composite residual ‖beta(x,y) · alpha(x,y)‖ at a point; identically zero
/// (to round-off) whenever the data satisfies the monad equations.
pub fn composite_residual(data: &MonadData, tag: BundleTag, x: C64, y: C64) -> Result<f64> {
    let (al, be) = monad_at_point(data, tag, x, y)?;
    Ok(max_abs(&(&be * &al)) / data.scale().powi(2).max(1.0))
}

/// Fiber dimension dim ker beta(x,y) − rank alpha(x,y); equals 2 at every
/// point exactly when the data is generic.
pub fn fiber_dim(data: &MonadData, tag: BundleTag, x: C64, y: C64) -> Result<usize> {
    let (al, be) = monad_at_point(data, tag, x, y)?;
    let tol = Tolerances::default();
    let r_al = RankDecision::compute(&al, tol.rank_rel, 1.0).rank;
    let r_be = RankDecision::compute(&be, tol.rank_rel, 1.0).rank;
    let mid = al.nrows();
    Ok(mid - r_be - r_al)
}

/// Closed-form Chern class and Euler characteristic of the selected family
/// twisted by O(pH₁ + qH₂).
///
/// For the two-fiber family the H₂ coefficient of c₁ is −2: this is the
/// unique value consistent, through Riemann-Roch, with the family's Euler
/// characteristic χ = −(k+j) + 2q(1+p), and it matches the defining exact
/// sequences (each fiber-supported quotient eats one H₂).
pub fn chern_euler(k: usize, j: usize, tag: BundleTag, twist: TwistPair) -> (ChernClass, i64) {
    let (k, j) = (k as i64, j as i64);
    let (p, q) = (twist.p, twist.q);
    let (chern, chi) = match tag {
        BundleTag::E => (
            ChernClass { c1_h1: 0, c1_h2: 0, c2: k },
            -k + 2 + 2 * (p + q) + 2 * p * q,
        ),
        BundleTag::K0 => (
            ChernClass { c1_h1: 0, c1_h2: -1, c2: k + j },
            -(k + j) + (1 + p) * (1 + 2 * q),
        ),
        BundleTag::KInf => (
            ChernClass { c1_h1: 0, c1_h2: -1, c2: k },
            -k + (1 + p) * (1 + 2 * q),
        ),
        BundleTag::K0Inf1 => (
            ChernClass { c1_h1: 0, c1_h2: -2, c2: k + j },
            -(k + j) + 2 * q * (1 + p),
        ),
    };
    (chern, chi)
}

/// Riemann-Roch for a rank-2 sheaf on P¹×P¹ with the given invariants:
/// χ(F(p,q)) for c₁ = aH₁ + bH₂ and second Chern number c2.
pub fn riemann_roch_rank2(c: &ChernClass, p: i64, q: i64) -> i64 {
    let (a, b) = (c.c1_h1, c.c1_h2);
    2 + a + b + 2 * p + 2 * q + 2 * p * q + a * q + b * p + a * b - c.c2
}

/// The exact h¹ inside the region where h⁰ and h² vanish, or None outside.
pub fn vanishing_h1(k: usize, j: usize, tag: BundleTag, twist: TwistPair) -> Option<i64> {
    let (k, j) = (k as i64, j as i64);
    let (p, q) = (twist.p, twist.q);
    match tag {
        BundleTag::E => {
            if (p <= -1 && q >= -1) || (p >= -1 && q <= -1) {
                Some(k - 2 * (1 + q) * (1 + p))
            } else {
                None
            }
        }
        BundleTag::K0 => {
            if (p <= -1 && q >= 0) || (p >= -1 && q <= -1) {
                Some((k + j) - (1 + 2 * q) * (1 + p))
            } else if j >= 1 && q == 0 && p <= j - 1 {
                // Extra reach along q = 0 provided by the flag.
                Some(k + j - 1 - p)
            } else {
                None
            }
        }
        BundleTag::KInf => {
            if (p <= -1 && q >= 0) || (p >= -1 && q <= -1) {
                Some(k - (1 + 2 * q) * (1 + p))
            } else {
                None
            }
        }
        BundleTag::K0Inf1 => {
            if (p <= -1 && q >= 0) || (p >= -1 && q <= 0) {
                Some((k + j) - 2 * q * (1 + p))
            } else {
                None
            }
        }
    }
}

/// Splitting data of the restriction to the horizontal line through y₀:
/// (splitting degree n = dim ker(A − y₀), dim coker(A − y₀)). The two agree
/// because A is square.
pub fn restriction_splitting(data: &MonadData, y0: C64) -> (usize, usize) {
    let n = data.splitting_degree(y0);
    (n, n)
}

/// Convenience: the expected summand counts (a, b, c, d) of each monad.
pub fn monad_ranks(k: usize, j: usize, tag: BundleTag) -> (usize, usize, usize, usize) {
    match tag {
        BundleTag::E => (k, k, k + 2, k),
        BundleTag::K0 => (k + j, k + j, k + j + 3, k + j + 1),
        BundleTag::KInf => (k, k, k + 3, k + 1),
        BundleTag::K0Inf1 => (k + j, k + j, k + j + 2, k + j),
    }
}

