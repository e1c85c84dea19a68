//! Simulation and entanglement certification for temporally multiplexed
//! storage of two photon pairs.

pub mod certify;
pub mod cli;
pub mod coincidence;
pub mod qstate;
pub mod simulate;
pub mod tol;
pub mod witness;
