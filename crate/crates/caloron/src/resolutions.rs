//! Pencil resolutions on the x-line and the chain maps between them.
//!
//! Every sheaf handled here is presented as the cokernel of an injective
//! matrix pencil P(x) = P₀ + xP₁ between free modules over the polynomial
//! ring in x. A monad datum induces four such presentations: two side
//! resolutions, each keeping one line-bundle section at infinity, and two
//! torsion quotients supported at finitely many points. The connecting maps
//! are pairs of constant matrices whose commutation with the pencils is
//! equivalent to the matrix equations, so commutation residuals double as
//! sensitive diagnostics.

use crate::error::{Error, Result};
use crate::genericity::{check_genericity, pencil_surjectivity, ConditionOutcome};
use crate::linalg::{eigenvalues, eye, inverse, max_abs, solve, CMat, C64};
use crate::monad::{shift_pair, MonadData};
use crate::tol::Tolerances;
use serde::{Deserialize, Serialize};

/// Which of the four standard presentations a [`SheafResolution`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolutionLabel {
    /// Sections adapted to the zero end of the arc; one section at infinity.
    ZeroSide,
    /// Sections adapted to the infinity end; one section at infinity.
    InfinitySide,
    /// Torsion quotient supported at the eigenvalues of the long-arc
    /// endomorphism, k + j points with multiplicity.
    BigTorsion,
    /// Torsion quotient supported at the eigenvalues of B, k points.
    SmallTorsion,
}

/// A two-term resolution 0 → R^a → R^b → (sheaf) → 0 over R = C[x], given by
/// the pencil P(x) = p0 + x·p1 of shape b × a.
#[derive(Debug, Clone)]
pub struct SheafResolution {
    pub label: ResolutionLabel,
    /// Rank of the source free module.
    pub a_rank: usize,
    /// Rank of the target free module.
    pub b_rank: usize,
    /// Constant coefficient.
    pub p0: CMat,
    /// Linear coefficient.
    pub p1: CMat,
}

impl SheafResolution {
    /// The pencil evaluated at a point.
    pub fn eval(&self, x: C64) -> CMat {
        &self.p0 + &self.p1 * x
    }

    /// Number of sections surviving at x = ∞: the corank of the pencil,
    /// 1 for the sides and 0 for the torsion quotients.
    pub fn infinity_rank(&self) -> usize {
        self.b_rank - self.a_rank
    }
}

/// A map of resolutions: one matrix between the source modules, one between
/// the targets. The square commutes when
/// dst(x) · on_sources = on_targets · src(x) identically in x.
#[derive(Debug, Clone)]
pub struct ChainPair {
    pub on_sources: CMat,
    pub on_targets: CMat,
}

/// The four standard resolutions of one monad datum.
#[derive(Debug, Clone)]
pub struct ResolutionSet {
    pub zero_side: SheafResolution,
    pub infinity_side: SheafResolution,
    pub big_torsion: SheafResolution,
    pub small_torsion: SheafResolution,
}

/// The four connecting chain maps. Each side surjects onto the torsion
/// quotient on its far end; the two short maps are coordinate projections.
#[derive(Debug, Clone)]
pub struct ChainMapSet {
    pub zero_to_big: ChainPair,
    pub infinity_to_big: ChainPair,
    pub infinity_to_small: ChainPair,
    pub zero_to_small: ChainPair,
}

/// The endomorphism resolving the big torsion quotient by x − (·): the
/// long-arc matrix M when flag lines are present, and the corrected matrix
/// B − C₁D₁A⁻¹ in the flagless case (A must be invertible there).
pub(crate) fn big_endomorphism(data: &MonadData) -> Result<CMat> {
    if data.j() >= 1 {
        return Ok(data.m_matrix());
    }
    let a_inv = inverse(data.a(), "flagless corrected endomorphism")?;
    Ok(data.b() - data.c1() * (data.d1() * a_inv))
}

/// Build all four resolutions and the chain maps between them.
///
/// The pencils are assembled directly from the matrix data; nothing is
/// validated here, so broken input shows up as nonzero commutation
/// residuals rather than as errors. The flagless case needs A invertible
/// for the zero side and the big torsion quotient.
pub fn resolution_matrices(data: &MonadData) -> Result<(ResolutionSet, ChainMapSet)> {
    let (k, j) = (data.k(), data.j());

    let small_torsion = SheafResolution {
        label: ResolutionLabel::SmallTorsion,
        a_rank: k,
        b_rank: k,
        p0: -data.b(),
        p1: eye(k),
    };

    let big_torsion = SheafResolution {
        label: ResolutionLabel::BigTorsion,
        a_rank: k + j,
        b_rank: k + j,
        p0: -big_endomorphism(data)?,
        p1: eye(k + j),
    };

    let infinity_side = {
        let mut p0 = CMat::zeros(k + 1, k);
        p0.view_mut((0, 0), (k, k)).copy_from(&(-data.b()));
        p0.view_mut((k, 0), (1, k)).copy_from(&(-data.d2()));
        let mut p1 = CMat::zeros(k + 1, k);
        p1.view_mut((0, 0), (k, k)).copy_from(&eye(k));
        SheafResolution {
            label: ResolutionLabel::InfinitySide,
            a_rank: k,
            b_rank: k + 1,
            p0,
            p1,
        }
    };

    let zero_side = if j == 0 {
        // [x − B; −D₁A⁻¹]: the bottom row records the residue of the
        // meromorphic frame at the zero end.
        let a_inv = inverse(data.a(), "zero-side resolution")?;
        let mut p0 = CMat::zeros(k + 1, k);
        p0.view_mut((0, 0), (k, k)).copy_from(&(-data.b()));
        p0.view_mut((k, 0), (1, k))
            .copy_from(&(-(data.d1() * a_inv)));
        let mut p1 = CMat::zeros(k + 1, k);
        p1.view_mut((0, 0), (k, k)).copy_from(&eye(k));
        SheafResolution {
            label: ResolutionLabel::ZeroSide,
            a_rank: k,
            b_rank: k + 1,
            p0,
            p1,
        }
    } else {
        // Block rows [x − B, 0], [−[B′;0], x − s], [0, −e₊].
        let (s, eplus) = shift_pair(j);
        let mut p0 = CMat::zeros(k + j + 1, k + j);
        p0.view_mut((0, 0), (k, k)).copy_from(&(-data.b()));
        p0.view_mut((k, 0), (j, k))
            .copy_from(&(-data.b_prime_padded()));
        p0.view_mut((k, k), (j, j)).copy_from(&(-&s));
        p0.view_mut((k + j, k), (1, j)).copy_from(&(-&eplus));
        let mut p1 = CMat::zeros(k + j + 1, k + j);
        p1.view_mut((0, 0), (k + j, k + j))
            .copy_from(&eye(k + j));
        SheafResolution {
            label: ResolutionLabel::ZeroSide,
            a_rank: k + j,
            b_rank: k + j + 1,
            p0,
            p1,
        }
    };

    // The chain maps are uniform in j; the flag blocks are simply absent
    // when j = 0.
    let zero_to_big = {
        let mut v = CMat::zeros(k + j, k + j + 1);
        v.view_mut((0, 0), (k + j, k + j)).copy_from(&eye(k + j));
        v.view_mut((0, k + j), (k, 1)).copy_from(&(-data.c1()));
        v.view_mut((k, k + j), (j, 1))
            .copy_from(&(-data.c1_prime()));
        ChainPair {
            on_sources: eye(k + j),
            on_targets: v,
        }
    };

    let infinity_to_big = {
        let mut u = CMat::zeros(k + j, k);
        u.view_mut((0, 0), (k, k)).copy_from(data.a());
        u.view_mut((k, 0), (j, k)).copy_from(data.a_prime());
        let mut v = CMat::zeros(k + j, k + 1);
        v.view_mut((0, 0), (k + j, k)).copy_from(&u);
        v.view_mut((0, k), (k, 1)).copy_from(&data.c2());
        v.view_mut((k, k), (j, 1)).copy_from(&data.c2_prime());
        ChainPair {
            on_sources: u,
            on_targets: v,
        }
    };

    let infinity_to_small = {
        let mut v = CMat::zeros(k, k + 1);
        v.view_mut((0, 0), (k, k)).copy_from(&eye(k));
        ChainPair {
            on_sources: eye(k),
            on_targets: v,
        }
    };

    let zero_to_small = {
        let mut u = CMat::zeros(k, k + j);
        u.view_mut((0, 0), (k, k)).copy_from(&eye(k));
        let mut v = CMat::zeros(k, k + j + 1);
        v.view_mut((0, 0), (k, k)).copy_from(&eye(k));
        ChainPair {
            on_sources: u,
            on_targets: v,
        }
    };

    Ok((
        ResolutionSet {
            zero_side,
            infinity_side,
            big_torsion,
            small_torsion,
        },
        ChainMapSet {
            zero_to_big,
            infinity_to_big,
            infinity_to_small,
            zero_to_small,
        },
    ))
}

/// Largest commutation defect of the square built from `pair`, checked
/// coefficientwise in x and normalized by the scale of the products
/// involved (clamped below at 1).
pub fn chain_residual(src: &SheafResolution, dst: &SheafResolution, pair: &ChainPair) -> f64 {
    let u = &pair.on_sources;
    let v = &pair.on_targets;
    assert_eq!(u.nrows(), dst.a_rank, "on_sources rows");
    assert_eq!(u.ncols(), src.a_rank, "on_sources columns");
    assert_eq!(v.nrows(), dst.b_rank, "on_targets rows");
    assert_eq!(v.ncols(), src.b_rank, "on_targets columns");
    let d0 = &dst.p0 * u - v * &src.p0;
    let d1 = &dst.p1 * u - v * &src.p1;
    let m_src = max_abs(&src.p0).max(max_abs(&src.p1));
    let m_dst = max_abs(&dst.p0).max(max_abs(&dst.p1));
    let denom = (m_dst * max_abs(u)).max(max_abs(v) * m_src).max(1.0);
    max_abs(&d0).max(max_abs(&d1)) / denom
}

/// The support multiset of a torsion quotient: the points where its pencil
/// degenerates, listed with multiplicity. Side labels are rejected since
/// their pencils carry no finite support.
pub fn torsion_support(data: &MonadData, label: ResolutionLabel) -> Result<Vec<C64>> {
    match label {
        ResolutionLabel::SmallTorsion => Ok(eigenvalues(data.b())),
        ResolutionLabel::BigTorsion => Ok(eigenvalues(&big_endomorphism(data)?)),
        ResolutionLabel::ZeroSide | ResolutionLabel::InfinitySide => Err(Error::Precondition(
            format!("{label:?} is a side resolution and has no finite support"),
        )),
    }
}

/// Twist a side resolution by ℓ at infinity.
///
/// The pencil grows by a shift-register tail: ℓ new sources and ℓ + 1 new
/// rows reusing the old bottom row as the coupling. Requires the standard
/// side shape, one section at infinity and linear coefficient [I; 0];
/// torsion quotients cannot be twisted this way.
pub fn twist_resolution(res: &SheafResolution, ell: usize) -> Result<SheafResolution> {
    if res.b_rank != res.a_rank + 1 {
        return Err(Error::Precondition(format!(
            "twisting needs one section at infinity, got module ranks {} to {}",
            res.a_rank, res.b_rank
        )));
    }
    let a = res.a_rank;
    let standard = {
        let mut p1 = CMat::zeros(a + 1, a);
        p1.view_mut((0, 0), (a, a)).copy_from(&eye(a));
        p1
    };
    if res.p1 != standard {
        return Err(Error::Precondition(
            "twisting needs a pencil with linear coefficient [I; 0]".into(),
        ));
    }
    if ell == 0 {
        return Ok(res.clone());
    }
    let alpha = res.p0.view((0, 0), (a, a)).into_owned();
    let beta = res.p0.view((a, 0), (1, a)).into_owned();
    let (s, eplus) = shift_pair(ell);
    let mut p0 = CMat::zeros(a + ell + 1, a + ell);
    p0.view_mut((0, 0), (a, a)).copy_from(&alpha);
    p0.view_mut((a, 0), (1, a)).copy_from(&beta);
    p0.view_mut((a, a), (ell, ell)).copy_from(&(-&s));
    p0.view_mut((a + ell, a), (1, ell)).copy_from(&(-&eplus));
    let mut p1 = CMat::zeros(a + ell + 1, a + ell);
    p1.view_mut((0, 0), (a + ell, a + ell))
        .copy_from(&eye(a + ell));
    Ok(SheafResolution {
        label: res.label,
        a_rank: a + ell,
        b_rank: a + ell + 1,
        p0,
        p1,
    })
}

/// The chain map from the (j − 1)-twisted infinity side into the big
/// torsion quotient. On sources it is the monodromy matrix N with its last
/// column dropped, on targets N itself; commutation of the square is
/// equivalent to the matrix equations, so its residual is a sharp
/// diagnostic for broken data. Needs j ≥ 1.
pub fn krylov_chain_map(data: &MonadData) -> Result<(SheafResolution, ChainPair)> {
    let j = data.j();
    if j == 0 {
        return Err(Error::Precondition(
            "the Krylov chain map needs at least one flag line".into(),
        ));
    }
    let (rows, _) = resolution_matrices(data)?;
    let twisted = twist_resolution(&rows.infinity_side, j - 1)?;
    let n = data.n_matrix();
    let dim = data.k() + j;
    let n_prime = n.view((0, 0), (dim, dim - 1)).into_owned();
    Ok((
        twisted,
        ChainPair {
            on_sources: n_prime,
            on_targets: n,
        },
    ))
}

/// The coupling column transported across the big torsion quotient: the
/// solution of N·C̃ = −M^j c, with c the stacked second coupling columns
/// [C₂; C′₂]. For j = 0 this reduces to −A⁻¹C₂.
pub fn transported_coupling(data: &MonadData) -> Result<CMat> {
    let (k, j) = (data.k(), data.j());
    let (m, n) = data.mn();
    let mut rhs = CMat::zeros(k + j, 1);
    rhs.view_mut((0, 0), (k, 1)).copy_from(&data.c2());
    rhs.view_mut((k, 0), (j, 1)).copy_from(&data.c2_prime());
    for _ in 0..j {
        rhs = &m * rhs;
    }
    Ok(-solve(&n, &rhs, "monodromy matrix in coupling transport")?)
}

/// The constant endomorphism living on the far side of the long arc: −B
/// and −D₂ in their fixed slots, with the transported coupling replacing
/// the original one. Conjugating −M by the monodromy matrix N lands on
/// this matrix. Needs j ≥ 1.
pub fn transported_boundary_form(data: &MonadData) -> Result<CMat> {
    let (k, j) = (data.k(), data.j());
    if j == 0 {
        return Err(Error::Precondition(
            "the transported boundary form needs at least one flag line".into(),
        ));
    }
    let ct = transported_coupling(data)?;
    let (s, eplus) = shift_pair(j);
    let ct_top = ct.view((0, 0), (k, 1)).into_owned();
    let ct_bottom = ct.view((k, 0), (j, 1)).into_owned();
    let mut beta = CMat::zeros(k + j, k + j);
    beta.view_mut((0, 0), (k, k)).copy_from(&(-data.b()));
    beta.view_mut((0, k), (k, j)).copy_from(&(&ct_top * &eplus));
    beta.view_mut((k, 0), (1, k)).copy_from(&(-data.d2()));
    beta.view_mut((k, k), (j, j))
        .copy_from(&(-&s + &ct_bottom * &eplus));
    Ok(beta)
}

/// Residual of the transport identity (−M)·N = N·β̃, where β̃ is the
/// transported boundary form. Needs j ≥ 1; the flagless case has no flag
/// rows to intertwine.
pub fn verify_intertwining(data: &MonadData) -> Result<f64> {
    let beta = transported_boundary_form(data)?;
    let (m, n) = data.mn();
    let defect = -(&m * &n) - &n * &beta;
    let denom = (max_abs(&m) * max_abs(&n))
        .max(max_abs(&n) * max_abs(&beta))
        .max(1.0);
    Ok(max_abs(&defect) / denom)
}

/// The structural defect a reducibility witness certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReducibilityKind {
    /// The point pencil drops injectivity: a skyscraper subsheaf splits off.
    SkyscraperSubsheaf,
    /// The point pencil drops surjectivity: a corank-one quotient appears.
    CorankOneQuotient,
}

/// Scan the datum for reducibility: every verified witness of a pointwise
/// genericity failure is reported with its x coordinate and the defect it
/// certifies. Generic data comes back empty; borderline rank decisions are
/// an error rather than a silent verdict.
pub fn reducibility_scan(
    data: &MonadData,
    tol: &Tolerances,
) -> Result<Vec<(C64, ReducibilityKind)>> {
    let report = check_genericity(data, tol)?;
    if report.point_injectivity.indeterminate || report.point_surjectivity.indeterminate {
        return Err(Error::Precondition(
            "reducibility scan inconclusive: a pointwise rank decision was borderline".into(),
        ));
    }
    let mut hits = Vec::new();
    for w in &report.point_injectivity.witnesses {
        if let Some(x) = w.x {
            hits.push((x, ReducibilityKind::SkyscraperSubsheaf));
        }
    }
    for w in &report.point_surjectivity.witnesses {
        if let Some(x) = w.x {
            hits.push((x, ReducibilityKind::CorankOneQuotient));
        }
    }
    Ok(hits)
}

/// Decide whether the pencil stays injective for every x, by testing its
/// plain transpose for surjectivity everywhere. On a torsion quotient the
/// witnesses reproduce the support points.
pub fn injective_for_all_x(
    res: &SheafResolution,
    scale: f64,
    tol: &Tolerances,
) -> ConditionOutcome {
    let salt = 0x5EAF ^ (res.label as u64);
    pencil_surjectivity(&res.p0.transpose(), &res.p1.transpose(), scale, tol, salt)
}
