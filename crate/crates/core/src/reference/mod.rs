//! Reference-triangle bases and quadrature.

pub mod quadrature;
pub mod scalar;
pub mod tensor;

pub use quadrature::{edge_rule, triangle_rule, QuadratureRule};
pub use scalar::{dim_p, ScalarBasis};
pub use tensor::{Sym, SymTensorBasis};
