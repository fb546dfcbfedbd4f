// `!(x > y)` comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod densitymat;
pub mod error;
pub mod jump;
pub mod model;
pub mod sde;
pub mod stats;

pub use densitymat::{
    fidelity, frobenius_inner, hermitian_sqrt, project_to_density, ComplexMatrix, DensityMatrix,
};
pub use error::{Error, Result};
