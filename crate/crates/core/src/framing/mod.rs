//! Secure-voice frame layer: shortened Reed-Solomon with erasure retry,
//! CRC-8, AES-256 counter-mode encryption, header synchronization and
//! silence insertion.

pub mod cipher;
pub mod crc8;
mod frame;
pub(crate) mod gf64;
pub mod rs;

pub use cipher::{decrypt_frame, encrypt_frame, CipherSession};
pub use frame::{
    silence_schedule, DecodedFrame, DovFrame, FrameClass, FrameCodec, FrameConfig, FrameLoss,
    FrameMode, FrameOutcome, RxSymbol, SilenceDetector, StreamFrame, StreamReport, SyncResult,
    FRAME_BASE_HARMONIC, FRAME_HARMONICS, FRAME_SAMPLE_RATE, FRAME_SYMBOL_LEN,
};
