//! Link-level simulation and analysis of complex modulation over indoor
//! visible-light MIMO links: quad-LED (QCM), dual-LED (DCM) and
//! spatial-modulation dual-LED (SM-DCM) mappings, their OFDM variants,
//! ML / ZF / minimum-distance detection, union-bound BER analysis and
//! spatial SNR and rate maps.

pub mod analysis;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod link;
pub mod mappers;
pub mod montecarlo;
pub mod ofdm;

pub use error::{Error, Result};
