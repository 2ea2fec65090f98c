//! The monad matrix data underlying a charge-(k, j) caloron, its algebraic
//! constraints, the Gl(k) action, and the derived matrices that drive both
//! the sheaf-level and the Nahm-side constructions.

use crate::error::{Error, Result};
use crate::linalg::{
    cr, eigenvalues, eye, inverse, max_abs, C64, CMat, RankDecision,
};
use crate::tol::Tolerances;

/// The lower shift matrix s (ones on the first subdiagonal) and the last-slot
/// selector row e_plus = (0, ..., 0, 1), both determined by `j`.
pub fn shift_pair(j: usize) -> (CMat, CMat) {
    let mut s = CMat::zeros(j, j);
    for i in 1..j {
        s[(i, i - 1)] = cr(1.0);
    }
    let mut eplus = CMat::zeros(1, j);
    if j > 0 {
        eplus[(0, j - 1)] = cr(1.0);
    }
    (s, eplus)
}

/// Residual norms of the three matrix equations a `MonadData` must satisfy,
/// reported relative to the largest data entry (clamped below at 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonadResiduals {
    /// ‖[A,B] + CD‖_max — the quadratic constraint.
    pub quadratic: f64,
    /// ‖[B′;0]A + sA′ − A′B − C′D‖_max — the flag-chain constraint
    /// (zero by convention when j = 0, where the matrices are empty).
    pub flag_chain: f64,
    /// ‖e₊A′ − D₁‖_max — the first-row match (zero by convention at j = 0).
    pub first_row: f64,
}

impl MonadResiduals {
    pub fn max(&self) -> f64 {
        self.quadratic.max(self.flag_chain).max(self.first_row)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Matrix data (A, B, C, D, A′, B′, C′) of a charge-(k, j) caloron monad.
///
/// Shapes: A, B are k×k; C is k×2; D is 2×k; A′ is j×k; B′ is 1×k (0×k when
/// j = 0, where it never enters any equation); C′ is j×2. Construction only
/// checks shapes; the algebraic constraints are evaluated by [`residuals`]
/// and enforced by [`validate`].
///
/// [`residuals`]: MonadData::residuals
/// [`validate`]: MonadData::validate
#[derive(Debug, Clone, PartialEq)]
pub struct MonadData {
    k: usize,
    j: usize,
    a: CMat,
    b: CMat,
    c: CMat,
    d: CMat,
    a_prime: CMat,
    b_prime: CMat,
    c_prime: CMat,
}

fn expect_shape(m: &CMat, rows: usize, cols: usize, field: &'static str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Shape {
            field,
            expected: format!("{rows}x{cols}"),
            found: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

impl MonadData {
    /// Assemble data with a flag of degree j = `a_prime.nrows()`.
    pub fn new(
        a: CMat,
        b: CMat,
        c: CMat,
        d: CMat,
        a_prime: CMat,
        b_prime: CMat,
        c_prime: CMat,
    ) -> Result<Self> {
        let k = a.nrows();
        let j = a_prime.nrows();
        expect_shape(&a, k, k, "a")?;
        expect_shape(&b, k, k, "b")?;
        expect_shape(&c, k, 2, "c")?;
        expect_shape(&d, 2, k, "d")?;
        expect_shape(&a_prime, j, k, "a_prime")?;
        let bp_rows = if j == 0 { 0 } else { 1 };
        expect_shape(&b_prime, bp_rows, k, "b_prime")?;
        expect_shape(&c_prime, j, 2, "c_prime")?;
        Ok(MonadData {
            k,
            j,
            a,
            b,
            c,
            d,
            a_prime,
            b_prime,
            c_prime,
        })
    }

    /// Assemble flagless (j = 0) data; the primed matrices are empty.
    pub fn unflagged(a: CMat, b: CMat, c: CMat, d: CMat) -> Result<Self> {
        let k = a.nrows();
        MonadData::new(
            a,
            b,
            c,
            d,
            CMat::zeros(0, k),
            CMat::zeros(0, k),
            CMat::zeros(0, 2),
        )
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn c(&self) -> &CMat {
        &self.c
    }

    pub fn d(&self) -> &CMat {
        &self.d
    }

    pub fn a_prime(&self) -> &CMat {
        &self.a_prime
    }

    pub fn b_prime(&self) -> &CMat {
        &self.b_prime
    }

    pub fn c_prime(&self) -> &CMat {
        &self.c_prime
    }

    /// First column of C, as a k×1 matrix.
    pub fn c1(&self) -> CMat {
        self.c.columns(0, 1).into_owned()
    }

    /// Second column of C.
    pub fn c2(&self) -> CMat {
        self.c.columns(1, 1).into_owned()
    }

    /// First row of D, as a 1×k matrix.
    pub fn d1(&self) -> CMat {
        self.d.rows(0, 1).into_owned()
    }

    /// Second row of D.
    pub fn d2(&self) -> CMat {
        self.d.rows(1, 1).into_owned()
    }

    /// First column of C′ (j×1).
    pub fn c1_prime(&self) -> CMat {
        self.c_prime.columns(0, 1).into_owned()
    }

    /// Second column of C′.
    pub fn c2_prime(&self) -> CMat {
        self.c_prime.columns(1, 1).into_owned()
    }

    /// Largest entry magnitude across all seven matrices, clamped at 1;
    /// the denominator for relative residuals.
    pub fn scale(&self) -> f64 {
        [
            &self.a,
            &self.b,
            &self.c,
            &self.d,
            &self.a_prime,
            &self.b_prime,
            &self.c_prime,
        ]
        .iter()
        .map(|m| max_abs(m))
        .fold(1.0, f64::max)
    }

    /// The `[B′;0]` block: B′ stacked over j−1 zero rows (j×k; empty at j=0).
    pub fn b_prime_padded(&self) -> CMat {
        let mut out = CMat::zeros(self.j, self.k);
        if self.j > 0 {
            out.rows_mut(0, 1).copy_from(&self.b_prime);
        }
        out
    }

    /// Residual norms of the three defining equations, relative to
    /// [`scale`](Self::scale).
    pub fn residuals(&self) -> MonadResiduals {
        let scale = self.scale();
        let quad = &self.a * &self.b - &self.b * &self.a + &self.c * &self.d;
        let quadratic = max_abs(&quad) / scale;
        if self.j == 0 {
            return MonadResiduals {
                quadratic,
                flag_chain: 0.0,
                first_row: 0.0,
            };
        }
        let (s, eplus) = shift_pair(self.j);
        let chain = self.b_prime_padded() * &self.a + &s * &self.a_prime
            - &self.a_prime * &self.b
            - &self.c_prime * &self.d;
        let flag_chain = max_abs(&chain) / scale;
        let row = &eplus * &self.a_prime - self.d1();
        let first_row = max_abs(&row) / scale;
        MonadResiduals {
            quadratic,
            flag_chain,
            first_row,
        }
    }

    /// Check the equations against `tol.residual` and, for j = 0, the
    /// invertibility of A.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let r = self.residuals();
        if !r.within(tol.residual) {
            return Err(Error::Precondition(format!(
                "monad equations violated: residuals {:?} exceed {:.1e}",
                r, tol.residual
            )));
        }
        if self.j == 0 {
            let rd = RankDecision::compute(&self.a, tol.rank_rel, tol.rank_gap);
            if rd.rank < self.k {
                return Err(Error::Singular {
                    context: "flagless data requires invertible A",
                    sigma_min: rd.singular_values.last().copied().unwrap_or(0.0),
                    sigma_max: rd.singular_values.first().copied().unwrap_or(0.0),
                });
            }
            if rd.indeterminate {
                return Err(Error::IndeterminateRank {
                    context: "invertibility of A",
                    gap: rd.gap,
                });
            }
        }
        Ok(())
    }

    /// Act by g ∈ Gl(k): (gAg⁻¹, gBg⁻¹, gC, Dg⁻¹, A′g⁻¹, B′g⁻¹, C′).
    pub fn gl_act(&self, g: &CMat) -> Result<MonadData> {
        expect_shape(g, self.k, self.k, "g")?;
        let g_inv = inverse(g, "group action")?;
        MonadData::new(
            g * &self.a * &g_inv,
            g * &self.b * &g_inv,
            g * &self.c,
            &self.d * &g_inv,
            &self.a_prime * &g_inv,
            &self.b_prime * &g_inv,
            self.c_prime.clone(),
        )
    }

    /// The long-arc endomorphism block matrix
    /// M = [[B, −C₁e₊], [[B′;0], s − C′₁e₊]], size (k+j)×(k+j).
    pub fn m_matrix(&self) -> CMat {
        let (k, j) = (self.k, self.j);
        let (s, eplus) = shift_pair(j);
        let mut m = CMat::zeros(k + j, k + j);
        m.view_mut((0, 0), (k, k)).copy_from(&self.b);
        if j > 0 {
            let top_right = -self.c1() * &eplus;
            m.view_mut((0, k), (k, j)).copy_from(&top_right);
            m.view_mut((k, 0), (j, k)).copy_from(&self.b_prime_padded());
            let bot_right = &s - self.c1_prime() * &eplus;
            m.view_mut((k, k), (j, j)).copy_from(&bot_right);
        }
        m
    }

    /// The monodromy matrix N = [ [A;A′] | c | Mc | ... | M^{j−1}c ],
    /// with c = [C₂;C′₂]; square of size k+j. For j = 0 this is A.
    pub fn n_matrix(&self) -> CMat {
        let (k, j) = (self.k, self.j);
        let m = self.m_matrix();
        let mut n = CMat::zeros(k + j, k + j);
        n.view_mut((0, 0), (k, k)).copy_from(&self.a);
        if j > 0 {
            n.view_mut((k, 0), (j, k)).copy_from(&self.a_prime);
            let mut col = CMat::zeros(k + j, 1);
            col.view_mut((0, 0), (k, 1)).copy_from(&self.c2());
            col.view_mut((k, 0), (j, 1)).copy_from(&self.c2_prime());
            for t in 0..j {
                n.view_mut((0, k + t), (k + j, 1)).copy_from(&col);
                if t + 1 < j {
                    col = &m * col;
                }
            }
        }
        n
    }

    /// Both derived matrices at once.
    pub fn mn(&self) -> (CMat, CMat) {
        (self.m_matrix(), self.n_matrix())
    }

    /// dim ker(A − y₀): the splitting degree of the restriction to the
    /// horizontal line through y₀.
    pub fn splitting_degree(&self, y0: C64) -> usize {
        let shifted = &self.a - eye(self.k) * y0;
        let rd = RankDecision::compute(&shifted, 1e-9, 1.0);
        self.k - rd.rank
    }

    /// Eigenvalues of A (the vertical positions where restriction can split).
    pub fn a_eigenvalues(&self) -> Vec<C64> {
        eigenvalues(&self.a)
    }
}

/// Result of stacking the Krylov rows (vT^{d−1}, ..., vT, v).
#[derive(Debug, Clone)]
pub struct KrylovBasis {
    /// The d×d stacked matrix, top row the highest power.
    pub matrix: CMat,
    /// Numerical rank.
    pub rank: usize,
    /// True when the rows span, i.e. v is cyclic for T.
    pub full_rank: bool,
}

/// Stack the Krylov rows of the row vector `v` under powers of `t` and
/// report their rank. Full rank is equivalent to [t − λ; v] being injective
/// for every λ.
pub fn krylov_basis(t: &CMat, v: &CMat) -> KrylovBasis {
    let d = t.nrows();
    assert_eq!(t.ncols(), d, "square matrix required");
    assert_eq!(v.nrows(), 1, "v must be a row vector");
    assert_eq!(v.ncols(), d, "v must have matching length");
    let mut rows: Vec<CMat> = Vec::with_capacity(d);
    let mut cur = v.clone();
    rows.push(cur.clone());
    for _ in 1..d {
        cur = &cur * t;
        rows.push(cur.clone());
    }
    let mut matrix = CMat::zeros(d, d);
    for (i, row) in rows.iter().rev().enumerate() {
        matrix.rows_mut(i, 1).copy_from(row);
    }
    let rd = RankDecision::compute(&matrix, 1e-9, 1e3);
    KrylovBasis {
        rank: rd.rank,
        full_rank: rd.rank == d && !rd.indeterminate,
        matrix,
    }
}
