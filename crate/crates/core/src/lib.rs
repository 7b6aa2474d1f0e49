//! Black-box identification of frequency scans by vector fitting, balanced
//! reduction, composition with white-box models and modal analysis.

pub mod adaptive;
pub mod error;
mod linalg;
pub mod modal;
pub mod oracle;
pub mod pipeline;
pub mod ratfit;
pub mod realization;
pub mod reduction;
pub mod scalar;
pub mod scan_io;
pub mod system;

pub use error::{Error, Result};
pub use scalar::{Complex, Real};

pub type StateSpace = realization::StateSpaceModel<f64>;
pub type StateSpaceF32 = realization::StateSpaceModel<f32>;
pub type Scan = scan_io::FrequencyScan<f64>;
pub type ScanF32 = scan_io::FrequencyScan<f32>;
pub type Rational = ratfit::RationalModel<f64>;
pub type RationalF32 = ratfit::RationalModel<f32>;
