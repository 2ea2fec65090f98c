//! Shared fixtures: small hand-checked instances used across test targets.
#![allow(dead_code)]

use caloron::linalg::{cr, CMat};
use caloron::monad::MonadData;

/// Charge-one instance without flag: A=2, B=3, C=(1,-1), D=(1;1).
/// All residuals vanish identically and every genericity condition holds.
pub fn charge_one() -> MonadData {
    MonadData::unflagged(
        CMat::from_element(1, 1, cr(2.0)),
        CMat::from_element(1, 1, cr(3.0)),
        CMat::from_row_slice(1, 2, &[cr(1.0), cr(-1.0)]),
        CMat::from_row_slice(2, 1, &[cr(1.0), cr(1.0)]),
    )
    .expect("valid shapes")
}

/// Charge-one instance with a degree-one flag: A=1, B=0, C=(1,1), D=(1;-1),
/// A'=1, B'=0, C'=(0,0). Hand-checked: all residuals vanish, N=[[1,1],[1,0]].
pub fn charge_one_flagged() -> MonadData {
    MonadData::new(
        CMat::from_element(1, 1, cr(1.0)),
        CMat::from_element(1, 1, cr(0.0)),
        CMat::from_row_slice(1, 2, &[cr(1.0), cr(1.0)]),
        CMat::from_row_slice(2, 1, &[cr(1.0), cr(-1.0)]),
        CMat::from_element(1, 1, cr(1.0)),
        CMat::from_element(1, 1, cr(0.0)),
        CMat::from_row_slice(1, 2, &[cr(0.0), cr(0.0)]),
    )
    .expect("valid shapes")
}

/// Charge-one instance with C = D = 0: the point-injectivity condition fails
/// with witness (x, y) = (3, 2).
pub fn charge_one_degenerate() -> MonadData {
    MonadData::unflagged(
        CMat::from_element(1, 1, cr(2.0)),
        CMat::from_element(1, 1, cr(3.0)),
        CMat::zeros(1, 2),
        CMat::zeros(2, 1),
    )
    .expect("valid shapes")
}
