//! Spectra of Rydberg atoms driven by an amplitude-modulated ponderomotive
//! optical lattice, computed with three independent models: an exact
//! momentum-ladder TDSE, Bloch bands with Fermi's golden rule, and
//! semiclassical trajectories.

pub mod bands;
pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod fgr;
pub mod model;
pub mod output;
pub mod presets;
pub mod run;
pub mod semiclassical;
pub mod tdse;
pub mod units;

pub use error::{Error, Result};
