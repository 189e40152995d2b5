//! Exact computation kit for equicharacteristic-0 valued fields realized
//! inside finitely presented Hahn-series universes.

pub mod cli;
pub mod error;
pub mod hahn_series;
pub mod morphisms;
pub mod ordered_groups;
pub mod presentations;
pub mod residue_algebra;
pub mod rv_sort;
pub mod sampling;
pub mod separated;

pub use error::{Error, Result};
