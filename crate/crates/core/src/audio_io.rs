//! Strict WAV / raw PCM I/O for the modem's 8 kHz mono paths.
//!
//! Only PCM mono 16-bit little-endian at 8000 Hz is accepted; anything else
//! is a typed error, never a silent conversion. Export quantizes with
//! round-half-away-from-zero and treats clipping as an error.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const DOV_SAMPLE_RATE: u32 = 8000;
const FULL_SCALE: f64 = 32767.0;

#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    rate: u32,
}

impl AudioBuffer {
    /// Samples must already be within [-1, 1]; out-of-range values are a
    /// clipping error at the point of creation.
    pub fn new(samples: Vec<f64>, rate: u32) -> Result<Self> {
        if rate == 0 {
            return Err(Error::InvalidArgument("zero sample rate".into()));
        }
        for (index, &value) in samples.iter().enumerate() {
            if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
                return Err(Error::Clipping { index, value });
            }
        }
        Ok(Self { samples, rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate(&self) -> u32 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.rate as f64
    }
}

fn quantize(samples: &[f64]) -> Result<Vec<u8>> {
    let mut pcm = Vec::with_capacity(samples.len() * 2);
    for (index, &value) in samples.iter().enumerate() {
        if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
            return Err(Error::Clipping { index, value });
        }
        // f64::round is round-half-away-from-zero.
        pcm.extend_from_slice(&(((value * FULL_SCALE).round()) as i16).to_le_bytes());
    }
    Ok(pcm)
}

fn dequantize(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(2)
        // -32768 maps a hair below -1; clamp keeps the buffer invariant at
        // the cost of at most one LSB.
        .map(|b| (i16::from_le_bytes([b[0], b[1]]) as f64 / FULL_SCALE).clamp(-1.0, 1.0))
        .collect()
}

/// Writes a PCM mono 16-bit WAV file.
pub fn write_wav(path: &Path, buffer: &AudioBuffer) -> Result<()> {
    let pcm = quantize(&buffer.samples)?;
    let mut out = Vec::with_capacity(44 + pcm.len());
    let data_len = pcm.len() as u32;
    let byte_rate = buffer.rate * 2;
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&buffer.rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    out.extend_from_slice(&pcm);
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a WAV file, rejecting anything but PCM mono 16-bit at 8000 Hz.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 12 || &bytes[..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedFile("not a RIFF/WAVE file".into()));
    }
    let mut pos = 12usize;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().expect("4 bytes")) as usize;
        let body_start = pos + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            return Err(Error::MalformedFile("truncated chunk".into()));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::MalformedFile("fmt chunk too short".into()));
                }
                let body = &bytes[body_start..body_end];
                format = Some((
                    u16::from_le_bytes(body[0..2].try_into().expect("2 bytes")),
                    u16::from_le_bytes(body[2..4].try_into().expect("2 bytes")),
                    u32::from_le_bytes(body[4..8].try_into().expect("4 bytes")),
                    u16::from_le_bytes(body[14..16].try_into().expect("2 bytes")),
                ));
            }
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {} // skip unknown chunks
        }
        pos = body_end + (size & 1); // chunks are word-aligned
    }
    let (audio_format, channels, rate, bits) =
        format.ok_or_else(|| Error::MalformedFile("missing fmt chunk".into()))?;
    if audio_format != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "audio format {audio_format}, only PCM supported"
        )));
    }
    if channels != 1 {
        return Err(Error::UnsupportedFormat(format!("{channels} channels, need mono")));
    }
    if bits != 16 {
        return Err(Error::UnsupportedFormat(format!("{bits}-bit samples, need 16")));
    }
    if rate != DOV_SAMPLE_RATE {
        return Err(Error::UnsupportedFormat(format!(
            "sample rate {rate}, need {DOV_SAMPLE_RATE}"
        )));
    }
    let data = data.ok_or_else(|| Error::MalformedFile("missing data chunk".into()))?;
    if data.len() % 2 != 0 {
        return Err(Error::MalformedFile("odd data chunk length".into()));
    }
    AudioBuffer::new(dequantize(data), rate)
}

/// Reads headerless mono 16-bit little-endian PCM at 8 kHz.
pub fn read_raw_pcm(reader: &mut impl Read) -> Result<AudioBuffer> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() % 2 != 0 {
        return Err(Error::MalformedFile("odd raw PCM length".into()));
    }
    AudioBuffer::new(dequantize(&bytes), DOV_SAMPLE_RATE)
}

/// Writes headerless mono 16-bit little-endian PCM.
pub fn write_raw_pcm(writer: &mut impl Write, buffer: &AudioBuffer) -> Result<()> {
    writer.write_all(&quantize(&buffer.samples)?)?;
    Ok(())
}
