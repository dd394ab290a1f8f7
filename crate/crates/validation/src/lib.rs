//! Validation of the rod model against closed-form results: the envelope of a
//! localized helical buckle and the critical twist of a closed ring.

pub mod buckling;
pub mod error;
pub mod michell;
pub mod report;

pub use buckling::{analytic_envelope, run_helical_buckling, BucklingConfig, EnvelopeResult, EnvelopeSample};
pub use error::{Result, ValidationError};
pub use michell::{michell_analytic, run_michell, MichellConfig, MichellResult};
