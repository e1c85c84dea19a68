//! Certification bounds on the witness statistic.

pub mod bounds;
pub mod report;
pub mod sdp;
pub mod seesaw;
pub mod verdict;

pub use bounds::{e_ppt, e_schmidt, max_ratio_bound, BoundError, StateSet, StateSpace};
pub use report::{bounds_report, BoundReport};
pub use sdp::{solve_sdp, SdpProblem, SdpSolution, SdpStatus};
pub use seesaw::{seesaw, seesaw_separable};
pub use verdict::{certify, certify_t, CertificationBounds, CertificationVerdict, CertifyError, Level, Provenance};
