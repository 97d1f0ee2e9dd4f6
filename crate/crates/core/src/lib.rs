//! Simulation and process tomography of a post-selected programmable
//! single-qubit phase gate built from two-photon interference on a
//! polarizing beam splitter.
//!
//! * [`optics`]: heralded two-photon scattering and the resulting Kraus operator
//! * [`tomo`]: 6 × 6 tomography protocol, Poisson counts, iterative MLE
//! * [`metrics`]: process/state fidelities and phase-offset calibration
//! * [`pipeline`]: sweeps over program settings, HOM scan, file-driven reconstruction
//!
//! Grid points are evaluated in parallel with rayon when the `parallel`
//! feature is on (default); see [`par::Execution`].

pub mod error;
pub mod metrics;
pub mod optics;
pub mod par;
pub mod pipeline;
pub mod qmath;
pub mod report;
pub mod tomo;

pub use error::{Error, Result};
pub use par::Execution;
