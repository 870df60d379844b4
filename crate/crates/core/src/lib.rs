//! Link travel-time distributions estimated from partial trajectory
//! observations with an online Monte Carlo EM.
//!
//! Each road link's travel time is modelled as an independent Gamma
//! variable. An observation records how long a vehicle took to cover a
//! known fraction of each link on its path; the E-step draws allocations of
//! that duration over the links from the Gammas conditioned on the total,
//! and the M-step refits each link's Gamma to the weighted draws.

pub mod decay;
pub mod em;
pub mod eval;
pub mod gamma;
pub mod io;
pub mod network;
pub mod prior;
pub mod seed;
pub mod special;

pub use decay::{decay_weight, DecayConfig};
pub use gamma::{GammaError, GammaParams, SeriesConfig};
pub use network::{activation_vector, DataError, Link, Observation, RoadNetwork, TrajectoryMeasurement};
pub use prior::{prior_params, PriorConfig, PriorMoments, PriorTable};
