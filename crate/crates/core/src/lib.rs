//! Data-over-voice (DoV) modem library.
//!
//! Binary data is carried over lossy voice channels (cellular calls, VoIP) as
//! a stream of short harmonic waveforms. Each waveform is an OFDM symbol whose
//! subcarriers are 4-PSK modulated, so a codebook of `M` symbols over `K`
//! harmonics is a set of `M` words over `Z4^K`. Squared Euclidean distance
//! between two symbols is proportional to the Lee distance between their
//! words, which turns waveform design into a combinatorial search.
//!
//! The crate is organized around that pipeline:
//!
//! * [`quatcode`] — quaternary codebooks with a certified minimum Lee distance
//! * [`modem`] — symbol synthesis, subband demultiplexing, channel estimation
//!   and maximum-likelihood / corrected demodulation
//! * [`channelsim`] — a parametric voice-channel distortion model plus
//!   time-domain impairments and an external-codec hook
//! * [`stats`] — distortion statistics (Mardia moments, SNR, correlations,
//!   estimator standard errors, error counters)
//! * [`framing`] — the secure-voice frame layer: Reed-Solomon with erasure
//!   retry, CRC-8, AES-256 counter-mode encryption, header synchronization
//!   and silence insertion
//! * [`audio_io`] — strict 8 kHz mono 16-bit WAV / raw PCM I/O
//! * [`bench`] — Monte Carlo symbol-error-rate sweeps

pub mod audio_io;
pub mod bench;
pub mod channelsim;
pub mod error;
pub mod framing;
pub mod modem;
pub mod quatcode;
pub mod stats;

pub use error::{Error, Result};

/// Complex sample type used throughout the PSK domain.
pub use num_complex::Complex64;
