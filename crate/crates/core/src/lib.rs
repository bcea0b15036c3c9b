//! Spectral toolkit for partially diffusive hyperbolic systems.
//!
//! Littlewood-Paley blocks and Besov norms on a periodic box, exact and
//! frozen-coefficient propagators, the Friedrichs-type iteration for systems
//! in normal form, and numerical checks of the functional inequalities the
//! existence theory relies on.

pub mod error;
pub mod par;
pub mod spectral;

pub use error::{Error, Result};
pub mod besov;
pub mod linalg;
pub mod propagators;
pub mod solver;
pub mod systems;
pub mod trajectory;
pub mod run;
pub mod verifier;

pub use besov::{besov_norm, chemin_lerner_norm, BesovIndex, Exponent, NormRecord};
pub use spectral::{BlockIndex, Field, FilterBank, Flavor, GridSpec};
pub use trajectory::Trajectory;
