//! Manufactured solutions, error norms and convergence tables.

pub mod cases;
pub mod norms;
pub mod study;
pub mod table;

pub use cases::{KappaLayout, ManufacturedCase};
pub use norms::{error_components, error_norms, ErrorComponents, ErrorRecord, NormConvention};
pub use study::{convergence_study, BoundaryLayout, CaseKind, LevelResult, MeshFamily, StudyConfig};
pub use table::{rate, Column, ErrorTable, TableRow};
