//! Fisher information for incoherent point emitters observed through arrays of
//! point collectors, and synthesis of interferometers that reach it.

pub mod cli;
pub mod error;
pub mod estimation;
pub mod fisher;
pub mod geometry;
pub mod interferometer;
pub mod linalg;
pub mod scenario_file;

pub use error::{Error, Result};
pub use fisher::{cfi, fisher_report, paraxial_qfi_matrix, qfi, FisherReport, QfiTarget};
pub use geometry::{
    build_amplitude_matrix, displace, AmplitudeMatrix, Collector, GeneralizedCoordinate, Mode,
    Parameter, Scenario, SourcePoint,
};
pub use interferometer::{synthesize_optimal, verify_saturation, Interferometer, SaturationReport};
