//! Asymptotics of random sesquilinear forms and spiked sample covariance
//! matrices, with a Monte Carlo harness that checks each limit at finite size.
//!
//! * [`mp_core`]: the Marčenko–Pastur law, the integrals `m0..m7` and their
//!   closed forms at outlier locations.
//! * [`sesquilinear`]: limiting covariances of groups of sesquilinear forms.
//! * [`spiked_theory`]: outlier eigenvalue and eigenvector limits.
//! * [`simulate`]: samplers, eigensolvers and the replicate engine.

pub mod error;
pub mod mp_core;
mod quadrature;
pub mod sesquilinear;
pub mod simulate;
pub mod spiked_theory;

pub use error::{Error, Result};
pub use mp_core::{AspectRatio, MpIntegrals, MpKind, Side, SpikeValue};
