//! Weak values, higher-moment and product weak values, direct state tomography from
//! weak-value data, and a product-weak-value entanglement witness.

pub mod entanglement;
pub mod error;
pub mod hilbert;
pub mod moments;
pub mod oracle;
pub mod product;
pub mod robustness;
pub mod tomography;
pub mod vaidman;

pub use error::{Error, Result};
pub use hilbert::{DensityOperator, Observable, PureState, Tensor, Tolerances};
