//! relaxlim: a numerical laboratory for the small-inertia limit of the
//! damped wave map into the unit sphere.
//!
//! The crate simulates, on flat periodic tori, the eps-scaled damped wave
//! map, its parabolic limit (the harmonic-map heat flow), and the
//! initial-layer-corrected expansion connecting them; it extracts the
//! scaled remainder along solver trajectories and monitors the weighted
//! energies, the singular/regular forcing decomposition, and the resulting
//! closed-form envelope bounds at desk scale.

pub mod config;
pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod heat;
pub mod oracle;
pub mod rates;
pub mod remainder;
pub mod spectral;
pub mod study;
pub mod wave;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::SpectralGrid;
