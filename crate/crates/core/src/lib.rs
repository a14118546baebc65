//! Normal numbers built by concatenating nested perfect necklaces over F_p.
//!
//! * [`ffmat`]: Lucas binomials, the shifted Pascal matrix and its identities.
//! * [`necklace`]: words, (nested) (semi-)perfect necklace checks, searches.
//! * [`construct`]: affine necklace blocks and the digit stream of the number.
//! * [`discrepancy`]: exact star discrepancy of `({p^n α})` and bound formulas.
//! * [`lowerbound`]: the interval-chain machinery behind the `(log N)^2` lower bound.

pub mod construct;
pub mod discrepancy;
pub mod error;
pub mod ffmat;
pub mod lowerbound;
pub mod necklace;

pub use error::{Error, Result};
pub use ffmat::Prime;
