//! Early jamming detection from constellation images.
//!
//! A BPSK link is simulated or read from disk ([`sim`], [`io`]), windows of
//! I-Q samples become 2-D histograms ([`imaging`]), and a sparse
//! autoencoder trained on clean images flags windows it reconstructs badly
//! ([`autoenc`]). [`eval`] and [`experiment`] score detectors with k-fold
//! cross-validation over declarative sweeps.
//!
//! ```
//! use bloodhound::imaging::{window_stream, ImageConfig, PlaneExtent};
//! use bloodhound::sim::{simulate_link, JammerConfig, LinkConfig};
//!
//! let rec = simulate_link(&LinkConfig { num_symbols: 4_000, ..LinkConfig::default() }, &JammerConfig::none())?;
//! let cfg = ImageConfig { n: 1_000, rows: 8, cols: 8, ..ImageConfig::default() };
//! let images = window_stream(&rec, &cfg, &PlaneExtent::symmetric(2.0)?)?;
//! assert_eq!(images.len(), 4);
//! # Ok::<(), bloodhound::error::Error>(())
//! ```

pub mod autoenc;
pub mod error;
pub mod experiment;
pub mod eval;
pub mod imaging;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod seed;
pub mod sim;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/images.md")]
    mod images {}
    #[doc = include_str!("../../../book/src/detector.md")]
    mod detector {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
