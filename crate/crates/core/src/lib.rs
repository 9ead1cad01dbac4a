pub mod error;
pub mod jointlaw;
pub mod mc;
pub mod model;
pub mod par;
pub mod pricing;
pub mod quadrature;
pub mod singlename;
pub mod specfun;

pub use error::{Error, Result};
