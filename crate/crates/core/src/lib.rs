//! Relay-aided opposite-directional interference alignment (ODIA) for
//! multi-cell MIMO networks.
//!
//! A relay with `N_R` antennas applies a linear beamformer `T` chosen so
//! that, at every receiver, the relayed copy of each interfering signal
//! cancels the direct one. The crate provides the linear-algebra kernel,
//! network model, beamformer solvers and a Monte-Carlo rate simulator.

pub mod linalg;
pub mod network;
pub mod solver;
pub mod sim;
