//! Time-tag analysis for three-detector photon correlation experiments:
//! stream formats, pulse-resolved coincidence counting, `g2`/`g3`
//! estimation, Jacobi histograms and a source simulator to test them on.

pub mod coincidence;
pub mod error;
pub mod jacobi;
pub mod source_sim;
pub mod stream;

pub use coincidence::{
    count_coincidences, count_coincidences_chunked, count_coincidences_serial, estimate_g2, estimate_g3,
    AnalysisConfig, CoincidenceSet, G2Estimate, G3Estimate,
};
pub use error::{Result, TimetagError};
pub use jacobi::{jacobi, jacobi_histogram, JacobiBinning, JacobiHistogram, JacobiPoint, TripleSelection};
pub use source_sim::{leakage_scenario, simulate, SourceConfig};
pub use stream::{parse_stream, write_stream, ClickRecord, ClickStream, Format};
