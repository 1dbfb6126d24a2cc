pub mod error;
pub mod mesh;
pub mod reference;

pub use error::{Error, Result};
pub mod dg;
pub mod linalg;
pub mod assembly;
pub mod bdm;
pub mod postprocess;
pub mod verification;
pub mod vtk;
