//! Link-level baseband simulator for a WiMAX-style OFDM chain.
//!
//! The transmit path builds MAC PDUs, spreads them with a PN sequence, maps
//! the chips to QPSK, packs data and pilot subcarriers, and synthesizes OFDM
//! symbols with a cyclic prefix. The channel is a WSSUS tapped-delay-line
//! multipath model with Jakes-spectrum fading and additive white Gaussian
//! noise. The receive path demodulates per subcarrier, estimates and
//! equalizes the channel from pilots, despreads, and re-parses the PDUs.
//! Measurement tooling (BER/EVM counters, Welch spectra, a binary I/Q capture
//! format) stands in for lab instruments.

pub mod capture;
pub mod chanest;
pub mod channel;
pub mod config;
pub mod dsp;
pub mod error;
pub mod link;
pub mod mac;
pub mod metrics;
pub mod ofdm;
pub mod par;
pub mod spreading;

pub use error::{Error, Result};
