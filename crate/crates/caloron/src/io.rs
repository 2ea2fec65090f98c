//! Self-describing textual data files and structured reports.
//!
//! One versioned JSON format carries every payload kind: monad matrix data,
//! sampled Nahm complexes, discretized flow states, and check reports.
//! Complex numbers are two-element arrays [re, im]; matrices are row-major
//! nested arrays with their dimensions spelled out so empty blocks keep
//! their shape. Serialization uses the shortest decimal that parses back to
//! the same float, so a round trip is the identity bit for bit on every
//! finite value. Tolerances ride along in the header of every file.

use crate::error::{Error, Result};
use crate::flow::DiscretizedNahm;
use crate::linalg::{c, CMat};
use crate::monad::MonadData;
use crate::nahm::{NahmComplexData, NahmExtra};
use crate::tol::Tolerances;
use serde::{Deserialize, Serialize};

/// Version stamp written into every file; parsing rejects others.
pub const FORMAT_VERSION: u32 = 1;

/// Row-major matrix of [re, im] entries with explicit dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRepr {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl MatrixRepr {
    pub fn from_matrix(m: &CMat) -> Self {
        MatrixRepr {
            rows: m.nrows(),
            cols: m.ncols(),
            entries: (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|s| [m[(r, s)].re, m[(r, s)].im]).collect())
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        if self.entries.len() != self.rows
            || self.entries.iter().any(|row| row.len() != self.cols)
        {
            return Err(Error::Format(format!(
                "matrix declared {}x{} but the entries disagree",
                self.rows, self.cols
            )));
        }
        Ok(CMat::from_fn(self.rows, self.cols, |r, s| {
            c(self.entries[r][s][0], self.entries[r][s][1])
        }))
    }
}

fn matrices(v: &[CMat]) -> Vec<MatrixRepr> {
    v.iter().map(MatrixRepr::from_matrix).collect()
}

fn unmatrices(v: &[MatrixRepr]) -> Result<Vec<CMat>> {
    v.iter().map(MatrixRepr::to_matrix).collect()
}

/// The generator that produced a file, so seeds fully determine content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrngStamp {
    /// Algorithm name; the library always writes "chacha8".
    pub algorithm: String,
    pub seed: u64,
}

impl PrngStamp {
    pub fn chacha8(seed: u64) -> Self {
        PrngStamp {
            algorithm: "chacha8".to_string(),
            seed,
        }
    }
}

/// One verified property inside a report: the measured value against the
/// tolerance it was held to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    /// Free-form witness (an offending index, eigenvalue, or file), present
    /// when a failure needs more than the number to locate.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<String>,
}

/// Machine-readable outcome of a CLI command; reports are themselves data
/// files, so they parse with the same reader.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub passed: bool,
    pub checks: Vec<CheckLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonadPayload {
    pub k: usize,
    pub j: usize,
    pub a: MatrixRepr,
    pub b: MatrixRepr,
    pub c: MatrixRepr,
    pub d: MatrixRepr,
    pub a_prime: MatrixRepr,
    pub b_prime: MatrixRepr,
    pub c_prime: MatrixRepr,
}

/// Boundary decoration in file form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ExtraRepr {
    Flag {
        v0: MatrixRepr,
        v_inf: MatrixRepr,
    },
    Jump {
        u0: MatrixRepr,
        w0: MatrixRepr,
        u_inf: MatrixRepr,
        w_inf: MatrixRepr,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NahmComplexPayload {
    pub theta0: f64,
    pub theta_inf: f64,
    pub rank_small: usize,
    pub rank_big: usize,
    pub grid_small: Vec<f64>,
    pub alpha_small: Vec<MatrixRepr>,
    pub beta_small: Vec<MatrixRepr>,
    pub grid_big: Vec<f64>,
    pub alpha_big: Vec<MatrixRepr>,
    pub beta_big: Vec<MatrixRepr>,
    pub i0: MatrixRepr,
    pub pi0: MatrixRepr,
    pub i_inf: MatrixRepr,
    pub pi_inf: MatrixRepr,
    pub x_res: MatrixRepr,
    pub s_res: MatrixRepr,
    pub extra: ExtraRepr,
    pub gauge_factor: f64,
    pub pole_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedNahmPayload {
    pub grid_small: Vec<f64>,
    pub alpha_small: Vec<MatrixRepr>,
    pub beta_small: Vec<MatrixRepr>,
    pub grid_big: Vec<f64>,
    pub alpha_big: Vec<MatrixRepr>,
    pub beta_big: Vec<MatrixRepr>,
    pub u0: MatrixRepr,
    pub w0: MatrixRepr,
    pub u_inf: MatrixRepr,
    pub w_inf: MatrixRepr,
    pub gauge_factor: f64,
}

/// Payload with its kind tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Monad(MonadPayload),
    NahmComplex(NahmComplexPayload),
    DiscretizedNahm(DiscretizedNahmPayload),
    Report(Report),
}

/// A complete data file: version, tolerances, optional generator stamp,
/// and one payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFile {
    pub format_version: u32,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prng: Option<PrngStamp>,
    #[serde(flatten)]
    pub payload: Payload,
}

impl DataFile {
    fn with(payload: Payload, tol: &Tolerances, prng: Option<PrngStamp>) -> Self {
        DataFile {
            format_version: FORMAT_VERSION,
            tolerances: tol.clone(),
            prng,
            payload,
        }
    }

    pub fn from_monad(m: &MonadData, tol: &Tolerances, prng: Option<PrngStamp>) -> Self {
        DataFile::with(
            Payload::Monad(MonadPayload {
                k: m.k(),
                j: m.j(),
                a: MatrixRepr::from_matrix(m.a()),
                b: MatrixRepr::from_matrix(m.b()),
                c: MatrixRepr::from_matrix(m.c()),
                d: MatrixRepr::from_matrix(m.d()),
                a_prime: MatrixRepr::from_matrix(m.a_prime()),
                b_prime: MatrixRepr::from_matrix(m.b_prime()),
                c_prime: MatrixRepr::from_matrix(m.c_prime()),
            }),
            tol,
            prng,
        )
    }

    pub fn from_nahm_complex(
        n: &NahmComplexData,
        tol: &Tolerances,
        prng: Option<PrngStamp>,
    ) -> Self {
        let extra = match &n.extra {
            NahmExtra::Flag { v0, v_inf } => ExtraRepr::Flag {
                v0: MatrixRepr::from_matrix(v0),
                v_inf: MatrixRepr::from_matrix(v_inf),
            },
            NahmExtra::Jump {
                u0,
                w0,
                u_inf,
                w_inf,
            } => ExtraRepr::Jump {
                u0: MatrixRepr::from_matrix(u0),
                w0: MatrixRepr::from_matrix(w0),
                u_inf: MatrixRepr::from_matrix(u_inf),
                w_inf: MatrixRepr::from_matrix(w_inf),
            },
        };
        DataFile::with(
            Payload::NahmComplex(NahmComplexPayload {
                theta0: n.theta0,
                theta_inf: n.theta_inf,
                rank_small: n.rank_small,
                rank_big: n.rank_big,
                grid_small: n.grid_small.clone(),
                alpha_small: matrices(&n.alpha_small),
                beta_small: matrices(&n.beta_small),
                grid_big: n.grid_big.clone(),
                alpha_big: matrices(&n.alpha_big),
                beta_big: matrices(&n.beta_big),
                i0: MatrixRepr::from_matrix(&n.i0),
                pi0: MatrixRepr::from_matrix(&n.pi0),
                i_inf: MatrixRepr::from_matrix(&n.i_inf),
                pi_inf: MatrixRepr::from_matrix(&n.pi_inf),
                x_res: MatrixRepr::from_matrix(&n.x_res),
                s_res: MatrixRepr::from_matrix(&n.s_res),
                extra,
                gauge_factor: n.gauge_factor,
                pole_gap: n.pole_gap,
            }),
            tol,
            prng,
        )
    }

    pub fn from_discretized(
        d: &DiscretizedNahm,
        tol: &Tolerances,
        prng: Option<PrngStamp>,
    ) -> Self {
        DataFile::with(
            Payload::DiscretizedNahm(DiscretizedNahmPayload {
                grid_small: d.grid_small.clone(),
                alpha_small: matrices(&d.alpha_small),
                beta_small: matrices(&d.beta_small),
                grid_big: d.grid_big.clone(),
                alpha_big: matrices(&d.alpha_big),
                beta_big: matrices(&d.beta_big),
                u0: MatrixRepr::from_matrix(&d.u0),
                w0: MatrixRepr::from_matrix(&d.w0),
                u_inf: MatrixRepr::from_matrix(&d.u_inf),
                w_inf: MatrixRepr::from_matrix(&d.w_inf),
                gauge_factor: d.gauge_factor,
            }),
            tol,
            prng,
        )
    }

    pub fn from_report(r: Report, tol: &Tolerances) -> Self {
        DataFile::with(Payload::Report(r), tol, None)
    }

    fn kind_name(&self) -> &'static str {
        match &self.payload {
            Payload::Monad(_) => "monad",
            Payload::NahmComplex(_) => "nahm_complex",
            Payload::DiscretizedNahm(_) => "discretized_nahm",
            Payload::Report(_) => "report",
        }
    }

    fn wrong_kind(&self, wanted: &str) -> Error {
        Error::Format(format!(
            "expected a {wanted} file, found kind {}",
            self.kind_name()
        ))
    }

    /// Rebuild monad data; shape checks run, equation residuals do not, so
    /// a perturbed file loads and then fails verification rather than
    /// failing to parse.
    pub fn to_monad(&self) -> Result<MonadData> {
        let p = match &self.payload {
            Payload::Monad(p) => p,
            _ => return Err(self.wrong_kind("monad")),
        };
        let m = MonadData::new(
            p.a.to_matrix()?,
            p.b.to_matrix()?,
            p.c.to_matrix()?,
            p.d.to_matrix()?,
            p.a_prime.to_matrix()?,
            p.b_prime.to_matrix()?,
            p.c_prime.to_matrix()?,
        )?;
        if m.k() != p.k || m.j() != p.j {
            return Err(Error::Format(format!(
                "declared charge ({}, {}) but the matrices give ({}, {})",
                p.k,
                p.j,
                m.k(),
                m.j()
            )));
        }
        Ok(m)
    }

    pub fn to_nahm_complex(&self) -> Result<NahmComplexData> {
        let p = match &self.payload {
            Payload::NahmComplex(p) => p,
            _ => return Err(self.wrong_kind("nahm_complex")),
        };
        let extra = match &p.extra {
            ExtraRepr::Flag { v0, v_inf } => NahmExtra::Flag {
                v0: v0.to_matrix()?,
                v_inf: v_inf.to_matrix()?,
            },
            ExtraRepr::Jump {
                u0,
                w0,
                u_inf,
                w_inf,
            } => NahmExtra::Jump {
                u0: u0.to_matrix()?,
                w0: w0.to_matrix()?,
                u_inf: u_inf.to_matrix()?,
                w_inf: w_inf.to_matrix()?,
            },
        };
        Ok(NahmComplexData {
            theta0: p.theta0,
            theta_inf: p.theta_inf,
            rank_small: p.rank_small,
            rank_big: p.rank_big,
            grid_small: p.grid_small.clone(),
            alpha_small: unmatrices(&p.alpha_small)?,
            beta_small: unmatrices(&p.beta_small)?,
            grid_big: p.grid_big.clone(),
            alpha_big: unmatrices(&p.alpha_big)?,
            beta_big: unmatrices(&p.beta_big)?,
            i0: p.i0.to_matrix()?,
            pi0: p.pi0.to_matrix()?,
            i_inf: p.i_inf.to_matrix()?,
            pi_inf: p.pi_inf.to_matrix()?,
            x_res: p.x_res.to_matrix()?,
            s_res: p.s_res.to_matrix()?,
            extra,
            gauge_factor: p.gauge_factor,
            pole_gap: p.pole_gap,
        })
    }

    pub fn to_discretized(&self) -> Result<DiscretizedNahm> {
        let p = match &self.payload {
            Payload::DiscretizedNahm(p) => p,
            _ => return Err(self.wrong_kind("discretized_nahm")),
        };
        Ok(DiscretizedNahm {
            grid_small: p.grid_small.clone(),
            alpha_small: unmatrices(&p.alpha_small)?,
            beta_small: unmatrices(&p.beta_small)?,
            grid_big: p.grid_big.clone(),
            alpha_big: unmatrices(&p.alpha_big)?,
            beta_big: unmatrices(&p.beta_big)?,
            u0: p.u0.to_matrix()?,
            w0: p.w0.to_matrix()?,
            u_inf: p.u_inf.to_matrix()?,
            w_inf: p.w_inf.to_matrix()?,
            gauge_factor: p.gauge_factor,
        })
    }

    pub fn to_report(&self) -> Result<&Report> {
        match &self.payload {
            Payload::Report(r) => Ok(r),
            _ => Err(self.wrong_kind("report")),
        }
    }
}

/// Serialize a file to its textual form.
pub fn to_string(file: &DataFile) -> Result<String> {
    Ok(serde_json::to_string_pretty(file)?)
}

/// Parse a file, rejecting unknown format versions.
pub fn from_str(s: &str) -> Result<DataFile> {
    let file: DataFile = serde_json::from_str(s)?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "format version {} is not supported (this build reads {})",
            file.format_version, FORMAT_VERSION
        )));
    }
    Ok(file)
}

pub fn write_file(path: &std::path::Path, file: &DataFile) -> Result<()> {
    let mut text = to_string(file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_file(path: &std::path::Path) -> Result<DataFile> {
    let text = std::fs::read_to_string(path)?;
    from_str(&text)
}
