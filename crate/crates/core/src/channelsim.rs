//! Parametric voice-channel distortion at desk scale.
//!
//! LPC voice coders leave each harmonic with a constant phase shift plus an
//! approximately Gaussian, memoryless variable part whose variance grows
//! with frequency. The simulator applies exactly that model in the PSK
//! domain, adds optional time-domain impairments (wideband noise, gain,
//! dropouts, delay), and offers a pass-through hook for piping audio through
//! a real external codec.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::process::{Command, Stdio};

use crate::error::{Error, Result};
use crate::modem::{estimate_channel, PskSequence, SymbolParams};
use crate::quatcode::QuaternaryWord;

/// Per-harmonic channel model: `out_k = g_k * exp(j*phi_k) * in_k + eta_k`,
/// with `eta_k` circular complex Gaussian of variance `noise_vars[k]`
/// (absolute, in the PSK domain, so relative to `A^2` for amplitude-A
/// signals), independent across harmonics and symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParametricChannelModel {
    pub gains: Vec<f64>,
    pub phases_rad: Vec<f64>,
    pub noise_vars: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impairments: Option<TimeImpairments>,
}

impl ParametricChannelModel {
    pub fn identity(harmonics: usize) -> Self {
        Self {
            gains: vec![1.0; harmonics],
            phases_rad: vec![0.0; harmonics],
            noise_vars: vec![0.0; harmonics],
            impairments: None,
        }
    }

    /// Synthetic preset shaped like a 12.2 kbps AMR channel: mild phase
    /// rotation, noise variance rising with frequency. Not calibrated to
    /// measurements; it reproduces the qualitative ordering only.
    pub fn amr_like(harmonics: usize) -> Self {
        let k = harmonics as f64;
        Self {
            gains: vec![1.0; harmonics],
            phases_rad: (0..harmonics).map(|i| 0.30 + 0.04 * i as f64).collect(),
            noise_vars: (0..harmonics)
                .map(|i| 0.005 + 0.035 * (i as f64 / (k - 1.0).max(1.0)))
                .collect(),
            impairments: None,
        }
    }

    /// Synthetic preset shaped like Opus-Silk: low harmonics well preserved,
    /// steeper variance growth towards high frequencies. Synthetic, not
    /// calibrated.
    pub fn silk_like(harmonics: usize) -> Self {
        let k = harmonics as f64;
        Self {
            gains: (0..harmonics)
                .map(|i| 1.0 - 0.15 * (i as f64 / (k - 1.0).max(1.0)))
                .collect(),
            phases_rad: (0..harmonics).map(|i| 0.50 - 0.03 * i as f64).collect(),
            noise_vars: (0..harmonics)
                .map(|i| {
                    let x = i as f64 / (k - 1.0).max(1.0);
                    0.002 + 0.12 * x * x
                })
                .collect(),
            impairments: None,
        }
    }

    pub fn harmonics(&self) -> usize {
        self.gains.len()
    }

    pub fn validate(&self, harmonics: usize) -> Result<()> {
        if self.gains.len() != harmonics
            || self.phases_rad.len() != harmonics
            || self.noise_vars.len() != harmonics
        {
            return Err(Error::InvalidArgument(format!(
                "channel model arrays must all have length {harmonics}"
            )));
        }
        if self.gains.iter().any(|&g| !(g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidArgument("gains must be >= 0".into()));
        }
        if self.noise_vars.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("noise variances must be >= 0".into()));
        }
        if let Some(imp) = &self.impairments {
            imp.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedFile(format!("channel model: {e}")))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Time-domain impairments, applied in order: delay (zero prefix), constant
/// gain, dropout spans (zeroed), additive wideband noise at a target SNR
/// measured against the post-gain signal power. Dropout spans are given in
/// symbols.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeImpairments {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    /// `(start symbol, length in symbols)` spans, non-overlapping.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropouts: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub delay_samples: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

impl TimeImpairments {
    pub fn validate(&self) -> Result<()> {
        let mut spans: Vec<(usize, usize)> = self.dropouts.clone();
        spans.sort_unstable();
        for pair in spans.windows(2) {
            let (s0, l0) = pair[0];
            let (s1, _) = pair[1];
            if s0 + l0 > s1 {
                return Err(Error::InvalidArgument(format!(
                    "dropout spans overlap: ({s0},{l0}) and ({s1},..)"
                )));
            }
        }
        Ok(())
    }
}

/// Applies the per-harmonic model to a PSK-domain symbol stream.
/// Deterministic per seed; different seeds draw independent noise.
pub fn apply_parametric(
    stream: &[PskSequence],
    model: &ParametricChannelModel,
    seed: u64,
) -> Result<Vec<PskSequence>> {
    let k = model.harmonics();
    if let Some(bad) = stream.iter().find(|p| p.len() != k) {
        return Err(Error::InvalidArgument(format!(
            "PSK sequence of length {} does not match model K={k}",
            bad.len()
        )));
    }
    model.validate(k)?;
    let rotations: Vec<Complex64> = model
        .gains
        .iter()
        .zip(&model.phases_rad)
        .map(|(&g, &phi)| Complex64::from_polar(g, phi))
        .collect();
    let noise_scale: Vec<f64> = model.noise_vars.iter().map(|&v| (v / 2.0).sqrt()).collect();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let out = stream
        .iter()
        .map(|psk| PskSequence {
            values: psk
                .values
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let mut v = c * rotations[i];
                    if noise_scale[i] > 0.0 {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        v += Complex64::new(re, im).scale(noise_scale[i]);
                    }
                    v
                })
                .collect(),
        })
        .collect();
    Ok(out)
}

/// Applies time-domain impairments to a sample stream. `symbol_len` maps
/// dropout spans (given in symbols) to sample ranges.
pub fn apply_time_impairments(
    samples: &[f64],
    spec: &TimeImpairments,
    symbol_len: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if symbol_len == 0 {
        return Err(Error::InvalidArgument("symbol length must be positive".into()));
    }
    let mut out = Vec::with_capacity(samples.len() + spec.delay_samples);
    out.extend(std::iter::repeat(0.0).take(spec.delay_samples));
    out.extend_from_slice(samples);

    if let Some(g) = spec.gain {
        for s in &mut out {
            *s *= g;
        }
    }

    for &(start, len) in &spec.dropouts {
        let a = (spec.delay_samples + start * symbol_len).min(out.len());
        let b = (a + len * symbol_len).min(out.len());
        out[a..b].iter_mut().for_each(|s| *s = 0.0);
    }

    if let Some(snr_db) = spec.snr_db {
        let power = out.iter().map(|s| s * s).sum::<f64>() / out.len().max(1) as f64;
        let noise_power = power * 10f64.powf(-snr_db / 10.0);
        if noise_power > 0.0 {
            let sigma = noise_power.sqrt();
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            for s in &mut out {
                let n: f64 = rng.sample(StandardNormal);
                *s += sigma * n;
            }
        }
    }
    Ok(out)
}

/// Inverts [`estimate_channel`] into a channel model: `g_k = |mu_k|/A`,
/// `phi_k = arg(mu_k)`, `sigma2_k` as estimated (floored when noiseless).
pub fn fit_model(
    received_training: &[PskSequence],
    sent_words: &[QuaternaryWord],
    params: &SymbolParams,
) -> Result<ParametricChannelModel> {
    let est = estimate_channel(received_training, sent_words, params)?;
    Ok(ParametricChannelModel {
        gains: (0..est.harmonics()).map(|k| est.gain(k) / params.amplitude).collect(),
        phases_rad: est.phase_shift.clone(),
        noise_vars: est.variance.clone(),
        impairments: None,
    })
}

/// Pipes samples through an external program as mono 16-bit little-endian
/// PCM at 8 kHz on stdin/stdout. The output must preserve the sample count
/// within `tolerance` samples; it is trimmed or zero-padded back to the
/// input length. Failures surface as errors, never as a silent identity.
pub fn external_codec_channel(
    samples: &[f64],
    command: &str,
    tolerance: usize,
) -> Result<Vec<f64>> {
    let mut pcm = Vec::with_capacity(samples.len() * 2);
    for (i, &s) in samples.iter().enumerate() {
        if !(-1.0..=1.0).contains(&s) {
            return Err(Error::Clipping { index: i, value: s });
        }
        pcm.extend_from_slice(&(((s * 32767.0).round()) as i16).to_le_bytes());
    }

    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::ExternalChannel(format!("spawn {command:?}: {e}")))?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let writer = std::thread::spawn(move || -> std::io::Result<()> {
        stdin.write_all(&pcm)?;
        Ok(())
    });

    let mut stdout_bytes = Vec::new();
    child
        .stdout
        .take()
        .expect("piped stdout")
        .read_to_end(&mut stdout_bytes)
        .map_err(|e| Error::ExternalChannel(format!("read stdout: {e}")))?;
    let mut stderr_text = String::new();
    if let Some(mut stderr) = child.stderr.take() {
        let _ = stderr.read_to_string(&mut stderr_text);
    }
    let status = child
        .wait()
        .map_err(|e| Error::ExternalChannel(format!("wait: {e}")))?;
    writer
        .join()
        .map_err(|_| Error::ExternalChannel("stdin writer panicked".into()))?
        .map_err(|e| Error::ExternalChannel(format!("write stdin: {e}")))?;

    if !status.success() {
        return Err(Error::ExternalChannel(format!(
            "{command:?} exited with {status}: {}",
            stderr_text.trim()
        )));
    }
    if stdout_bytes.len() % 2 != 0 {
        return Err(Error::ExternalChannel(format!(
            "{command:?} wrote {} bytes, not a whole number of 16-bit samples",
            stdout_bytes.len()
        )));
    }
    let got = stdout_bytes.len() / 2;
    if got.abs_diff(samples.len()) > tolerance {
        return Err(Error::ExternalChannel(format!(
            "{command:?} returned {got} samples for {} in (tolerance {tolerance})",
            samples.len()
        )));
    }

    let mut out: Vec<f64> = stdout_bytes
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32767.0)
        .collect();
    out.resize(samples.len(), 0.0);
    Ok(out)
}
