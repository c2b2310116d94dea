//! Numerical verification toolkit for the failure of strong property (T) style
//! decay estimates in SL(3,R) and Sp(2,R).

pub mod certify;
pub mod error;
pub mod groups;
pub mod kak;
pub mod roots;
pub mod sinhsys;
pub mod spectra;
pub mod witness;

pub use error::{Error, Result};
