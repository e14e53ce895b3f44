//! Rate allocation, channel scheduling and simulation for video streaming
//! over a fading multi-channel downlink.
//!
//! Users consume one frame per epoch with probability `p_i` and pause when
//! their buffer is empty. [`optimizer`] computes the rates that minimise the
//! total concave pause cost, [`allocator`] realises them epoch by epoch on
//! fading channels, [`learner`] estimates unknown `p_i` from one-bit
//! feedback, [`noback`] handles the case without any feedback, and
//! [`simulator`] runs the whole system.

pub mod allocator;
pub mod error;
pub mod format;
pub mod learner;
pub mod model;
pub mod noback;
pub mod optimizer;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{
    CostFunction, CostKind, GridProb, RateVector, Rational, SystemConfig, UserProfile,
};
