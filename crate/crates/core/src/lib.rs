//! Spatially sparse hybrid precoding and combining for millimeter-wave MIMO.
//!
//! The crate samples clustered narrowband channels, designs hybrid
//! analog/digital precoders and combiners by orthogonal matching pursuit over
//! dictionaries of array responses, quantizes the precoder for limited
//! feedback, and evaluates spectral efficiency in Monte Carlo sweeps.

pub mod arrays;
pub mod channel;
pub mod combining;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod precoding;

pub use error::{Error, Result};
