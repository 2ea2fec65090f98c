//! Matrix-data toolkit for SU(2) calorons.
//!
//! The crate moves between three presentations of the same object:
//!
//! * **Monad data** — finite matrix tuples (A, B, C, D, A′, B′, C′) subject
//!   to three matrix equations and four genericity conditions
//!   ([`monad`], [`genericity`], [`generate`]).
//! * **Sheaf-level invariants** — the four associated bundles evaluated
//!   fiberwise, Chern/Euler closed forms, an independent Čech-style
//!   cohomology oracle, pencil resolutions of direct images, torsion
//!   supports, and a reducibility scan ([`cohomology`], [`cech`],
//!   [`resolutions`]).
//! * **Nahm complexes on the circle** — construction of (α, β) pairs with
//!   matching/pole boundary data from monad data and back, plus a gradient
//!   flow toward the real Nahm equation in the flagless smooth case
//!   ([`nahm`], [`flow`]).
//!
//! Serialization and the command-line surface live in [`io`].

pub mod cech;
pub mod cohomology;
pub mod error;
pub mod flow;
pub mod generate;
pub mod genericity;
pub mod io;
pub mod linalg;
pub mod monad;
pub mod nahm;
pub mod resolutions;
pub mod tol;

pub use error::{Error, Result};
pub use monad::{MonadData, MonadResiduals};
pub use tol::Tolerances;
