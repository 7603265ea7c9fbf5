//! Wireless corruption of machine-learning payloads, end to end.
//!
//! The crate simulates the transmission of images and speech spectrograms
//! through parametric mmWave and IEEE 802.11p vehicular channels, builds
//! clean/corrupted/mixed training datasets from the reconstructions, and
//! trains small CNN classifiers on them — demonstrating that a model trained
//! on channel-corrupted data classifies corrupted inputs accurately without
//! any channel estimation.
//!
//! Layering, bottom up:
//!
//! * [`channel`] — tapped-delay-line scenario profiles, random realizations,
//!   convolution and AWGN.
//! * [`phy`] — the OFDM transmit/receive chain: payload serialization,
//!   modulation, LS estimation, zero-forcing equalization, and the clean vs.
//!   corrupted reconstruction paths.
//! * [`nn`] — a minimal deterministic CNN engine (conv/pool/dense, Adam,
//!   verified gradients).
//! * [`data`] — source ingestion (IDX, WAV, bundled synthetic surrogates),
//!   spectrograms, and the D1/D2/D3 dataset builders with on-disk format.
//! * [`exp`] — config-driven experiment runner, caching, and report tables.
//!
//! Every random quantity is derived from explicit seeds; identical seeds give
//! bit-identical channels, datasets, and training runs.
//!
//! See `examples/` for one runnable program per capability and the `chanlearn`
//! binary for the subcommand interface.

pub mod channel;
pub mod data;
pub mod exp;
pub mod nn;
pub mod phy;
pub mod seed;
