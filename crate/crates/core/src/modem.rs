//! DoV symbol synthesis, subband demultiplexing, channel estimation and
//! demodulation.
//!
//! A symbol is `N` samples of `K` orthogonal harmonics (integer DFT bins
//! `k0..k0+K`), each 4-PSK modulated by one digit of a quaternary word:
//!
//! ```text
//! s_m[n] = Real( sum_k A*exp(j*2*pi*phi_mk/4) * exp(j*(k+k0)*2*pi*n/N) )
//! ```
//!
//! Quarter-turn phasors and derotations are computed by component swaps and
//! negations rather than `cos`/`sin`, so PSK-domain round trips through a
//! noiseless channel are bit-exact. Estimator tests and the standard-error
//! harness rely on that.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quatcode::{QuaternaryCodebook, QuaternaryWord};

/// Variance floor, as a fraction of `A^2`. The corrected demodulation rule
/// divides by the estimated variance, which is 0 on a noiseless channel.
pub const VARIANCE_FLOOR_FACTOR: f64 = 1e-6;

/// Synthesis parameters of one DoV symbol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolParams {
    /// Sample rate in Hz; 8000 for every DoV path.
    pub sample_rate: u32,
    /// Samples per symbol N. The fundamental is fs/N, so every harmonic
    /// completes an integer number of cycles per symbol.
    pub samples_per_symbol: usize,
    /// Harmonic count K.
    pub harmonics: usize,
    /// Index of the lowest harmonic (subband offset), >= 1.
    pub base_harmonic: usize,
    /// Per-harmonic amplitude A, linear relative to digital full scale.
    pub amplitude: f64,
}

impl SymbolParams {
    pub const DEFAULT_SAMPLE_RATE: u32 = 8000;

    pub fn new(
        sample_rate: u32,
        samples_per_symbol: usize,
        harmonics: usize,
        base_harmonic: usize,
        amplitude: f64,
    ) -> Result<Self> {
        if sample_rate == 0 || samples_per_symbol == 0 || harmonics == 0 {
            return Err(Error::InvalidArgument(
                "sample rate, symbol length and harmonic count must be positive".into(),
            ));
        }
        if base_harmonic < 1 {
            return Err(Error::InvalidArgument("base harmonic must be >= 1".into()));
        }
        // All harmonics strictly below Nyquist.
        if 2 * (base_harmonic + harmonics - 1) >= samples_per_symbol {
            return Err(Error::InvalidArgument(format!(
                "harmonic {} reaches Nyquist for N={}",
                base_harmonic + harmonics - 1,
                samples_per_symbol
            )));
        }
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidArgument("amplitude must be positive".into()));
        }
        Ok(Self {
            sample_rate,
            samples_per_symbol,
            harmonics,
            base_harmonic,
            amplitude,
        })
    }

    /// Symbols per second, fs/N.
    pub fn baud(&self) -> f64 {
        self.sample_rate as f64 / self.samples_per_symbol as f64
    }

    /// Fundamental frequency in Hz (= fs/N, also the harmonic spacing).
    pub fn fundamental_hz(&self) -> f64 {
        self.baud()
    }

    /// Frequency of harmonic `k` (0-based within the subband).
    pub fn harmonic_hz(&self, k: usize) -> f64 {
        (self.base_harmonic + k) as f64 * self.fundamental_hz()
    }

    pub fn symbol_duration_secs(&self) -> f64 {
        self.samples_per_symbol as f64 / self.sample_rate as f64
    }

    /// Energy of every codebook waveform, `N*K*A^2/2`.
    pub fn symbol_energy(&self) -> f64 {
        self.samples_per_symbol as f64 * self.harmonics as f64 * self.amplitude * self.amplitude
            / 2.0
    }
}

/// One PSK value per harmonic (I/Q).
#[derive(Clone, Debug, PartialEq)]
pub struct PskSequence {
    pub values: Vec<Complex64>,
}

impl PskSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Unit phasor `exp(j*2*pi*digit/4)`, exact.
#[inline]
pub(crate) fn quarter_phasor(digit: u8) -> Complex64 {
    match digit & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// `z * exp(-j*2*pi*digit/4)` by component swaps and negations, exact.
#[inline]
pub(crate) fn derotate_quarter(z: Complex64, digit: u8) -> Complex64 {
    match digit & 3 {
        0 => z,
        1 => Complex64::new(z.im, -z.re),
        2 => Complex64::new(-z.re, -z.im),
        _ => Complex64::new(-z.im, z.re),
    }
}

/// Reference PSK sequence of a word at amplitude `a`: `a * exp(j*2*pi*d/4)`.
pub fn psk_sequence(word: &QuaternaryWord, a: f64) -> PskSequence {
    PskSequence {
        values: word.digits().iter().map(|&d| quarter_phasor(d).scale(a)).collect(),
    }
}

/// Evaluates the defining sum directly; `K*A` bounds the peak magnitude.
pub fn synthesize_symbol(params: &SymbolParams, word: &QuaternaryWord) -> Result<Vec<f64>> {
    if word.len() != params.harmonics {
        return Err(Error::InvalidArgument(format!(
            "word length {} does not match K={}",
            word.len(),
            params.harmonics
        )));
    }
    let n = params.samples_per_symbol;
    let mut samples = vec![0.0; n];
    for (k, &digit) in word.digits().iter().enumerate() {
        let bin = (params.base_harmonic + k) as f64;
        let phase0 = PI / 2.0 * digit as f64;
        for (i, s) in samples.iter_mut().enumerate() {
            *s += params.amplitude * (2.0 * PI * bin * i as f64 / n as f64 + phase0).cos();
        }
    }
    Ok(samples)
}

/// Re-synthesizes a symbol from arbitrary per-harmonic complex coefficients,
/// the inverse of [`demultiplex`] under the 2/N normalization. Used by the
/// channel simulator's combined path (demultiplex, distort, re-synthesize).
pub fn synthesize_from_psk(psk: &PskSequence, params: &SymbolParams) -> Result<Vec<f64>> {
    if psk.len() != params.harmonics {
        return Err(Error::InvalidArgument(format!(
            "PSK length {} does not match K={}",
            psk.len(),
            params.harmonics
        )));
    }
    let n = params.samples_per_symbol;
    let mut samples = vec![0.0; n];
    for (k, c) in psk.values.iter().enumerate() {
        let bin = (params.base_harmonic + k) as f64;
        for (i, s) in samples.iter_mut().enumerate() {
            let angle = 2.0 * PI * bin * i as f64 / n as f64;
            *s += c.re * angle.cos() - c.im * angle.sin();
        }
    }
    Ok(samples)
}

/// Subband demultiplexer: `C_k = (2/N) * sum_n r[n] * exp(-j*(k+k0)*2*pi*n/N)`.
/// The 2/N normalization makes a clean round trip return amplitude A exactly.
pub struct Demultiplexer {
    params: SymbolParams,
    /// `twiddles[k*N + n] = exp(-j*(k+k0)*2*pi*n/N) * 2/N`
    twiddles: Vec<Complex64>,
}

impl Demultiplexer {
    pub fn new(params: &SymbolParams) -> Self {
        let n = params.samples_per_symbol;
        let scale = 2.0 / n as f64;
        let mut twiddles = Vec::with_capacity(params.harmonics * n);
        for k in 0..params.harmonics {
            let bin = (params.base_harmonic + k) as f64;
            for i in 0..n {
                let angle = -2.0 * PI * bin * i as f64 / n as f64;
                twiddles.push(Complex64::from_polar(scale, angle));
            }
        }
        Self { params: *params, twiddles }
    }

    pub fn run(&self, samples: &[f64]) -> Result<PskSequence> {
        let n = self.params.samples_per_symbol;
        if samples.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                n,
                samples.len()
            )));
        }
        let values = (0..self.params.harmonics)
            .map(|k| {
                let row = &self.twiddles[k * n..(k + 1) * n];
                samples
                    .iter()
                    .zip(row)
                    .map(|(&s, &t)| t.scale(s))
                    .fold(Complex64::new(0.0, 0.0), |acc, z| acc + z)
            })
            .collect();
        Ok(PskSequence { values })
    }
}

/// One-shot subband demultiplexing of a single symbol.
pub fn demultiplex(samples: &[f64], params: &SymbolParams) -> Result<PskSequence> {
    Demultiplexer::new(params).run(samples)
}

/// Codebook of synthesized waveforms plus the exact reference constellation.
#[derive(Clone, Debug)]
pub struct WaveformCodebook {
    params: SymbolParams,
    quat: QuaternaryCodebook,
    waveforms: Vec<Vec<f64>>,
    peak: f64,
    reflection_paired: bool,
}

impl WaveformCodebook {
    pub fn new(params: SymbolParams, quat: QuaternaryCodebook) -> Result<Self> {
        if quat.word_len() != params.harmonics {
            return Err(Error::InvalidArgument(format!(
                "codebook word length {} does not match K={}",
                quat.word_len(),
                params.harmonics
            )));
        }
        let waveforms: Vec<Vec<f64>> = quat
            .words()
            .iter()
            .map(|w| synthesize_symbol(&params, w))
            .collect::<Result<_>>()?;
        let peak = waveforms
            .iter()
            .flat_map(|w| w.iter())
            .fold(0.0f64, |acc, &s| acc.max(s.abs()));
        let reflection_paired = quat.is_reflection_paired();
        Ok(Self {
            params,
            quat,
            waveforms,
            peak,
            reflection_paired,
        })
    }

    /// Builds the codebook with the amplitude scaled so that the loudest
    /// sample sits at `target_peak` of digital full scale.
    pub fn with_normalized_peak(
        sample_rate: u32,
        samples_per_symbol: usize,
        base_harmonic: usize,
        quat: QuaternaryCodebook,
        target_peak: f64,
    ) -> Result<Self> {
        if !(target_peak > 0.0 && target_peak <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target peak {target_peak} outside (0, 1]"
            )));
        }
        let probe = Self::new(
            SymbolParams::new(sample_rate, samples_per_symbol, quat.word_len(), base_harmonic, 1.0)?,
            quat,
        )?;
        let amplitude = target_peak / probe.peak;
        Self::new(
            SymbolParams { amplitude, ..probe.params },
            probe.quat,
        )
    }

    pub fn params(&self) -> &SymbolParams {
        &self.params
    }

    pub fn quat(&self) -> &QuaternaryCodebook {
        &self.quat
    }

    pub fn size(&self) -> usize {
        self.quat.size()
    }

    pub fn waveform(&self, m: usize) -> &[f64] {
        &self.waveforms[m]
    }

    /// Largest absolute sample over all waveforms.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn is_reflection_paired(&self) -> bool {
        self.reflection_paired
    }

    /// Diagnostic text export: one waveform per line, N decimal samples.
    pub fn export_text(&self, w: &mut impl std::io::Write) -> Result<()> {
        for wave in &self.waveforms {
            let line: Vec<String> = wave.iter().map(|s| format!("{s:.12}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Per-harmonic channel statistics learned from a training sequence.
#[derive(Clone, Debug)]
pub struct ChannelEstimate {
    /// Complex sample mean of the derotated training observations.
    pub mean: Vec<Complex64>,
    /// Phase shift per harmonic, `arg(mean)`.
    pub phase_shift: Vec<f64>,
    /// Distortion variance per harmonic, floored at
    /// `VARIANCE_FLOOR_FACTOR * A^2`.
    pub variance: Vec<f64>,
    /// True where the floor replaced a smaller (or zero) raw variance.
    pub floored: Vec<bool>,
    /// Training length L that produced the estimate.
    pub training_len: usize,
}

impl ChannelEstimate {
    /// Estimate of a perfectly clean channel: no phase shift, floor variance.
    pub fn identity(params: &SymbolParams) -> Self {
        let k = params.harmonics;
        let floor = VARIANCE_FLOOR_FACTOR * params.amplitude * params.amplitude;
        Self {
            mean: vec![Complex64::new(params.amplitude, 0.0); k],
            phase_shift: vec![0.0; k],
            variance: vec![floor; k],
            floored: vec![true; k],
            training_len: 0,
        }
    }

    /// Channel gain per harmonic, `|mean|`. Estimated for diagnostics; the
    /// decision rule compensates phase and variance only.
    pub fn gain(&self, k: usize) -> f64 {
        self.mean[k].norm()
    }

    pub fn harmonics(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean / sample variance estimators over a training sequence:
/// received PSK values are derotated by the known transmitted phases, then
/// averaged.
pub fn estimate_channel(
    received: &[PskSequence],
    sent_words: &[QuaternaryWord],
    params: &SymbolParams,
) -> Result<ChannelEstimate> {
    let l = received.len();
    if l < 2 {
        return Err(Error::InvalidArgument(
            "channel estimation needs at least 2 training symbols".into(),
        ));
    }
    if sent_words.len() != l {
        return Err(Error::InvalidArgument(
            "received and sent training sequences must align".into(),
        ));
    }
    let k = params.harmonics;
    if received.iter().any(|p| p.len() != k) || sent_words.iter().any(|w| w.len() != k) {
        return Err(Error::InvalidArgument(
            "training entries must have one value per harmonic".into(),
        ));
    }

    let mut mean = vec![Complex64::new(0.0, 0.0); k];
    for (psk, word) in received.iter().zip(sent_words) {
        for (slot, (&value, &digit)) in mean.iter_mut().zip(psk.values.iter().zip(word.digits())) {
            *slot += derotate_quarter(value, digit);
        }
    }
    for slot in &mut mean {
        *slot /= l as f64;
    }

    let mut variance = vec![0.0; k];
    for (psk, word) in received.iter().zip(sent_words) {
        for (i, (&value, &digit)) in psk.values.iter().zip(word.digits()).enumerate() {
            variance[i] += (derotate_quarter(value, digit) - mean[i]).norm_sqr();
        }
    }
    let floor = VARIANCE_FLOOR_FACTOR * params.amplitude * params.amplitude;
    let mut floored = vec![false; k];
    for (i, v) in variance.iter_mut().enumerate() {
        *v /= (l - 1) as f64;
        if *v < floor {
            *v = floor;
            floored[i] = true;
        }
    }

    Ok(ChannelEstimate {
        phase_shift: mean.iter().map(|m| m.arg()).collect(),
        mean,
        variance,
        floored,
        training_len: l,
    })
}

/// Maximum-likelihood detection over an AWGN channel: minimize the squared
/// Euclidean distance to the reference constellation. Ties break to the
/// smallest index.
pub fn demodulate_ml(psk: &PskSequence, cb: &WaveformCodebook) -> Result<usize> {
    let params = cb.params();
    if psk.len() != params.harmonics {
        return Err(Error::InvalidArgument(format!(
            "PSK length {} does not match K={}",
            psk.len(),
            params.harmonics
        )));
    }
    let a = params.amplitude;
    let mut best = f64::INFINITY;
    let mut best_idx = 0;
    for (m, word) in cb.quat().words().iter().enumerate() {
        let dist: f64 = psk
            .values
            .iter()
            .zip(word.digits())
            .map(|(&c, &d)| (c - quarter_phasor(d).scale(a)).norm_sqr())
            .sum();
        if dist < best {
            best = dist;
            best_idx = m;
        }
    }
    Ok(best_idx)
}

/// Phase-compensated, variance-weighted correlation rule:
///
/// ```text
/// argmax_m Real( sum_k C_k * (A/var_k) * exp(-j*2*pi*phi_mk/4 - j*phase_k) )
/// ```
///
/// For a reflection-paired codebook only even indices are correlated and the
/// sign of the score selects within the pair, halving the work. The returned
/// reliability is the best-to-second-best score margin normalized by the
/// best score, clamped to [0, 1].
pub fn demodulate_corrected(
    psk: &PskSequence,
    cb: &WaveformCodebook,
    est: &ChannelEstimate,
) -> Result<(usize, f64)> {
    let params = cb.params();
    if psk.len() != params.harmonics {
        return Err(Error::InvalidArgument(format!(
            "PSK length {} does not match K={}",
            psk.len(),
            params.harmonics
        )));
    }
    if est.harmonics() != params.harmonics {
        return Err(Error::InvalidArgument(
            "channel estimate does not match the codebook harmonics".into(),
        ));
    }

    // z_k = C_k * (A/var_k) * exp(-j*phase_k); per-word scores then need only
    // exact quarter-turn derotations of z_k.
    let weighted: Vec<Complex64> = psk
        .values
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let w = Complex64::from_polar(params.amplitude / est.variance[k], -est.phase_shift[k]);
            c * w
        })
        .collect();

    let score_of = |word: &QuaternaryWord| -> f64 {
        weighted
            .iter()
            .zip(word.digits())
            .map(|(&z, &d)| derotate_quarter(z, d).re)
            .sum()
    };

    let words = cb.quat().words();
    let mut best = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    let mut best_idx = 0;
    let mut consider = |score: f64, idx: usize| {
        if score > best {
            second = best;
            best = score;
            best_idx = idx;
        } else if score > second {
            second = score;
        }
    };
    if cb.is_reflection_paired() {
        for (pair, word) in words.chunks_exact(2).enumerate() {
            let s = score_of(&word[0]);
            consider(s, 2 * pair);
            consider(-s, 2 * pair + 1);
        }
    } else {
        for (m, word) in words.iter().enumerate() {
            consider(score_of(word), m);
        }
    }

    let reliability = if best > 0.0 {
        ((best - second) / best).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok((best_idx, reliability))
}

/// Concatenates codebook waveforms for a sequence of symbol indices.
pub fn modulate_stream(indices: &[usize], cb: &WaveformCodebook) -> Result<Vec<f64>> {
    let n = cb.params().samples_per_symbol;
    let mut samples = Vec::with_capacity(indices.len() * n);
    for &m in indices {
        if m >= cb.size() {
            return Err(Error::InvalidArgument(format!(
                "symbol index {m} outside codebook of size {}",
                cb.size()
            )));
        }
        samples.extend_from_slice(cb.waveform(m));
    }
    Ok(samples)
}

/// Result of demodulating a sample stream symbol by symbol.
#[derive(Clone, Debug)]
pub struct StreamDemod {
    /// `(symbol index, reliability)` per full symbol period.
    pub symbols: Vec<(usize, f64)>,
    /// Samples of a trailing partial symbol that were trimmed.
    pub trailing_samples: usize,
}

/// Symbol-by-symbol demodulation. Without an estimate the identity estimate
/// is used, which makes the decisions equal to plain maximum-likelihood
/// detection. Timing is assumed aligned; framing-level header sync
/// establishes it.
pub fn demodulate_stream(
    samples: &[f64],
    cb: &WaveformCodebook,
    est: Option<&ChannelEstimate>,
) -> Result<StreamDemod> {
    let n = cb.params().samples_per_symbol;
    let identity;
    let est = match est {
        Some(e) => e,
        None => {
            identity = ChannelEstimate::identity(cb.params());
            &identity
        }
    };
    let demux = Demultiplexer::new(cb.params());
    let mut symbols = Vec::with_capacity(samples.len() / n);
    for chunk in samples.chunks_exact(n) {
        let psk = demux.run(chunk)?;
        symbols.push(demodulate_corrected(&psk, cb, est)?);
    }
    Ok(StreamDemod {
        symbols,
        trailing_samples: samples.len() % n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quatcode::{codebook_search, lee_distance, SearchOptions};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn word(digits: &[u8]) -> QuaternaryWord {
        QuaternaryWord::new(digits.to_vec()).unwrap()
    }

    fn params(n: usize, k: usize, k0: usize, a: f64) -> SymbolParams {
        SymbolParams::new(8000, n, k, k0, a).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SymbolParams::new(8000, 20, 8, 1, 1.0).is_ok());
        // k0 + K - 1 = 10 = N/2 reaches Nyquist
        assert!(SymbolParams::new(8000, 20, 10, 1, 1.0).is_err());
        assert!(SymbolParams::new(8000, 20, 8, 0, 1.0).is_err());
        assert!(SymbolParams::new(8000, 20, 8, 1, 0.0).is_err());
        assert_eq!(params(20, 8, 1, 1.0).baud(), 400.0);
        assert_eq!(params(40, 8, 1, 1.0).baud(), 200.0);
    }

    #[test]
    fn synthesize_single_cosine() {
        let p = params(20, 1, 1, 1.0);
        let s = synthesize_symbol(&p, &word(&[0])).unwrap();
        assert_relative_eq!(s[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s[5], 0.0, epsilon = 1e-12);
        for (i, &v) in s.iter().enumerate() {
            assert_relative_eq!(v, (2.0 * PI * i as f64 / 20.0).cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn synthesize_zero_phase_peak() {
        let p = params(40, 5, 2, 0.7);
        let s = synthesize_symbol(&p, &word(&[0; 5])).unwrap();
        assert_relative_eq!(s[0], 5.0 * 0.7, epsilon = 1e-12);
        let peak = s.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(peak <= 5.0 * 0.7 + 1e-12);
    }

    #[test]
    fn fig8_style_harmonic_frequencies() {
        // 10 harmonics, 5 ms symbols at 8 kHz starting at 600 Hz.
        let p = params(40, 10, 3, 1.0);
        assert_relative_eq!(p.harmonic_hz(0), 600.0);
        assert_relative_eq!(p.harmonic_hz(9), 2400.0);
        assert_relative_eq!(p.fundamental_hz(), 200.0);
    }

    #[test]
    fn demultiplex_round_trip() {
        let p = params(20, 2, 1, 1.0);
        let s = synthesize_symbol(&p, &word(&[0, 2])).unwrap();
        let psk = demultiplex(&s, &p).unwrap();
        assert_relative_eq!(psk.values[0].re, 1.0, epsilon = 1e-9);
        assert_relative_eq!(psk.values[0].im, 0.0, epsilon = 1e-9);
        assert_relative_eq!(psk.values[1].re, -1.0, epsilon = 1e-9);
        assert_relative_eq!(psk.values[1].im, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn demultiplex_zero_and_out_of_band() {
        let p = params(20, 8, 1, 1.0);
        let psk = demultiplex(&vec![0.0; 20], &p).unwrap();
        assert!(psk.values.iter().all(|v| v.norm() == 0.0));

        // Pure tone on bin 9, outside [1, 9): orthogonal to every carrier.
        let tone: Vec<f64> = (0..20)
            .map(|i| (2.0 * PI * 9.0 * i as f64 / 20.0).cos())
            .collect();
        let psk = demultiplex(&tone, &p).unwrap();
        assert!(psk.values.iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn resynthesis_inverts_demultiplex() {
        let p = params(20, 8, 1, 0.4);
        let word5 = word(&[0, 1, 2, 3, 0, 2, 1, 3]);
        let original = synthesize_symbol(&p, &word5).unwrap();
        let psk = demultiplex(&original, &p).unwrap();
        let back = synthesize_from_psk(&psk, &p).unwrap();
        for (a, b) in original.iter().zip(&back) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn demultiplex_wrong_length() {
        let p = params(20, 8, 1, 1.0);
        assert!(demultiplex(&vec![0.0; 19], &p).is_err());
    }

    #[test]
    fn carrier_orthogonality_and_energy() {
        let p = params(20, 8, 1, 0.43);
        // Pairwise dot products of distinct harmonic carriers vanish.
        for k1 in 1..9usize {
            for k2 in (k1 + 1)..9usize {
                let dot: f64 = (0..20)
                    .map(|i| {
                        let t = 2.0 * PI * i as f64 / 20.0;
                        (k1 as f64 * t).cos() * (k2 as f64 * t).cos()
                    })
                    .sum();
                assert!(dot.abs() < 1e-9, "bins {k1},{k2} correlate: {dot}");
            }
        }
        // Every codebook waveform has energy N*K*A^2/2.
        let cb = codebook_search(8, 16, 1, &SearchOptions::default()).unwrap();
        let wcb = WaveformCodebook::new(p, cb).unwrap();
        let expected = p.symbol_energy();
        for m in 0..wcb.size() {
            let e: f64 = wcb.waveform(m).iter().map(|s| s * s).sum();
            assert_relative_eq!(e, expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn waveform_invariants() {
        let quat = codebook_search(8, 64, 2, &SearchOptions::default()).unwrap();
        let p = params(20, 8, 1, 0.1);
        let wcb = WaveformCodebook::new(p, quat).unwrap();
        // Direct evaluation matches within 1e-9.
        for m in [0usize, 7, 63] {
            let direct = synthesize_symbol(&p, wcb.quat().word(m)).unwrap();
            for (a, b) in wcb.waveform(m).iter().zip(&direct) {
                assert_relative_eq!(a, b, epsilon = 1e-9);
            }
        }
        // Reflection symmetry: waveform[2m+1] = -waveform[2m].
        for pair in 0..wcb.size() / 2 {
            for (a, b) in wcb.waveform(2 * pair).iter().zip(wcb.waveform(2 * pair + 1)) {
                assert_relative_eq!(*a, -*b, epsilon = 1e-12);
            }
        }
        assert!(wcb.peak() <= 8.0 * 0.1 + 1e-12);
    }

    #[test]
    fn normalized_peak() {
        let quat = codebook_search(8, 64, 2, &SearchOptions::default()).unwrap();
        let wcb = WaveformCodebook::with_normalized_peak(8000, 20, 1, quat, 0.9).unwrap();
        assert_relative_eq!(wcb.peak(), 0.9, max_relative = 1e-9);
    }

    #[test]
    fn isometry_bridge() {
        // Squared Euclidean distance between PSK sequences equals
        // 2*A^2*LeeDistance for random word pairs.
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let a = 0.73;
        for _ in 0..200 {
            let w1: Vec<u8> = (0..8).map(|_| rng.random_range(0..4)).collect();
            let w2: Vec<u8> = (0..8).map(|_| rng.random_range(0..4)).collect();
            let (w1, w2) = (word(&w1), word(&w2));
            let p1 = psk_sequence(&w1, a);
            let p2 = psk_sequence(&w2, a);
            let eucl_sq: f64 = p1
                .values
                .iter()
                .zip(&p2.values)
                .map(|(&x, &y)| (x - y).norm_sqr())
                .sum();
            let lee = lee_distance(&w1, &w2).unwrap() as f64;
            assert_relative_eq!(eucl_sq, 2.0 * a * a * lee, max_relative = 1e-9);
        }
    }

    #[test]
    fn estimate_identity_channel() {
        let p = params(20, 4, 1, 1.0);
        let words: Vec<QuaternaryWord> = [[0, 1, 2, 3], [3, 2, 1, 0], [1, 1, 2, 0], [2, 0, 3, 3]]
            .iter()
            .map(|d| word(d))
            .collect();
        let received: Vec<PskSequence> = words.iter().map(|w| psk_sequence(w, 1.0)).collect();
        let est = estimate_channel(&received, &words, &p).unwrap();
        let floor = VARIANCE_FLOOR_FACTOR;
        for k in 0..4 {
            assert_eq!(est.phase_shift[k], 0.0, "phase must be exactly zero");
            assert_relative_eq!(est.gain(k), 1.0, epsilon = 1e-12);
            assert_eq!(est.variance[k], floor);
            assert!(est.floored[k]);
        }
    }

    #[test]
    fn estimate_fixed_rotation() {
        let p = params(20, 3, 1, 1.0);
        let rot = Complex64::from_polar(1.0, 0.3);
        let words: Vec<QuaternaryWord> =
            [[0, 1, 2], [3, 0, 1], [2, 2, 0]].iter().map(|d| word(d)).collect();
        let received: Vec<PskSequence> = words
            .iter()
            .map(|w| PskSequence {
                values: psk_sequence(w, 1.0).values.iter().map(|&v| v * rot).collect(),
            })
            .collect();
        let est = estimate_channel(&received, &words, &p).unwrap();
        for k in 0..3 {
            assert_relative_eq!(est.phase_shift[k], 0.3, epsilon = 1e-9);
        }
    }

    #[test]
    fn estimate_requires_two_symbols() {
        let p = params(20, 2, 1, 1.0);
        let w = vec![word(&[0, 1])];
        let r = vec![psk_sequence(&w[0], 1.0)];
        assert!(estimate_channel(&r, &w, &p).is_err());
    }

    #[test]
    fn estimate_noise_variance_monte_carlo() {
        // Circular Gaussian noise of variance 0.01*A^2, L = 10^4: the sample
        // variance lands within 5%.
        let p = params(20, 2, 1, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let sigma2 = 0.01_f64;
        let l = 10_000;
        let mut words = Vec::with_capacity(l);
        let mut received = Vec::with_capacity(l);
        for _ in 0..l {
            let w: Vec<u8> = (0..2).map(|_| rng.random_range(0..4)).collect();
            let w = word(&w);
            let noisy: Vec<Complex64> = psk_sequence(&w, 1.0)
                .values
                .iter()
                .map(|&v| {
                    let n = Complex64::new(
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                    )
                    .scale((sigma2 / 2.0).sqrt());
                    v + n
                })
                .collect();
            words.push(w);
            received.push(PskSequence { values: noisy });
        }
        let est = estimate_channel(&received, &words, &p).unwrap();
        for k in 0..2 {
            assert!(
                (est.variance[k] - sigma2).abs() < 0.05 * sigma2,
                "variance {} vs {}",
                est.variance[k],
                sigma2
            );
        }
    }

    #[test]
    fn ml_decodes_exact_and_scaled() {
        let quat = codebook_search(8, 64, 3, &SearchOptions::default()).unwrap();
        let p = params(20, 8, 1, 1.0);
        let wcb = WaveformCodebook::new(p, quat).unwrap();
        for m in [0usize, 5, 33, 63] {
            let psk = psk_sequence(wcb.quat().word(m), 1.0);
            assert_eq!(demodulate_ml(&psk, &wcb).unwrap(), m);
            let half = PskSequence {
                values: psk.values.iter().map(|&v| v.scale(0.5)).collect(),
            };
            assert_eq!(demodulate_ml(&half, &wcb).unwrap(), m, "scaling must not flip argmin");
        }
    }

    #[test]
    fn ml_error_rate_bound_under_weak_noise() {
        // Noise variance far below (d_min_Euclid/2)^2 per harmonic: fewer
        // than 1e-4 errors over 10^5 trials.
        let quat = codebook_search(8, 64, 2, &SearchOptions::default()).unwrap();
        let p = params(20, 8, 1, 1.0);
        let wcb = WaveformCodebook::new(p, quat).unwrap();
        // d_min_E^2 = 2*6 = 12, so (d/2)^2 = 3; use variance 0.05.
        let sigma2 = 0.05_f64;
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let trials = 100_000;
        let mut errors = 0usize;
        for _ in 0..trials {
            let m = rng.random_range(0..wcb.size());
            let values: Vec<Complex64> = psk_sequence(wcb.quat().word(m), 1.0)
                .values
                .iter()
                .map(|&v| {
                    v + Complex64::new(
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                    )
                    .scale((sigma2 / 2.0).sqrt())
                })
                .collect();
            if demodulate_ml(&PskSequence { values }, &wcb).unwrap() != m {
                errors += 1;
            }
        }
        assert!(errors < 10, "error rate {} over {trials}", errors);
    }

    #[test]
    fn corrected_equals_ml_under_identity_estimate() {
        let quat = codebook_search(8, 64, 4, &SearchOptions::default()).unwrap();
        let p = params(20, 8, 1, 1.0);
        let wcb = WaveformCodebook::new(p, quat).unwrap();
        let est = ChannelEstimate::identity(&p);
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..10_000 {
            let values: Vec<Complex64> = (0..8)
                .map(|_| {
                    Complex64::new(
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                    )
                })
                .collect();
            let psk = PskSequence { values };
            let ml = demodulate_ml(&psk, &wcb).unwrap();
            let (cor, _) = demodulate_corrected(&psk, &wcb, &est).unwrap();
            assert_eq!(ml, cor);
        }
    }

    #[test]
    fn corrected_scale_invariance() {
        let quat = codebook_search(6, 16, 4, &SearchOptions::default()).unwrap();
        let p = params(20, 6, 1, 1.0);
        let wcb = WaveformCodebook::new(p, quat).unwrap();
        let est = ChannelEstimate::identity(&p);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..500 {
            let values: Vec<Complex64> = (0..6)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let psk = PskSequence { values: values.clone() };
            let scaled = PskSequence {
                values: values.iter().map(|&v| v.scale(3.7)).collect(),
            };
            let (a, _) = demodulate_corrected(&psk, &wcb, &est).unwrap();
            let (b, _) = demodulate_corrected(&scaled, &wcb, &est).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn boundary_rotation_full_code() {
        // Rotating every harmonic by exactly pi/4 puts each received value on
        // the 4-PSK decision boundary. Over the full code Z4^4 the ML rule
        // ties between the true word and every word reachable by adding 1 to
        // a digit subset, so the smallest-index tie-break misdecodes whenever
        // the word contains a 3: SER = 1 - (3/4)^4 ~ 0.68. The corrected rule
        // with a matching estimate undoes the rotation and never errs.
        let full = QuaternaryCodebook::full(4).unwrap();
        let p = params(20, 4, 1, 1.0);
        let wcb = WaveformCodebook::new(p, full).unwrap();
        let boundary = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2);

        // Train the corrected estimate through the same rotation.
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let train_words: Vec<QuaternaryWord> = (0..64)
            .map(|_| {
                let d: Vec<u8> = (0..4).map(|_| rng.random_range(0..4)).collect();
                word(&d)
            })
            .collect();
        let train_rx: Vec<PskSequence> = train_words
            .iter()
            .map(|w| PskSequence {
                values: psk_sequence(w, 1.0).values.iter().map(|&v| v * boundary).collect(),
            })
            .collect();
        let est = estimate_channel(&train_rx, &train_words, &p).unwrap();

        let trials = 10_000;
        let mut ml_errors = 0usize;
        let mut corrected_errors = 0usize;
        for _ in 0..trials {
            let m = rng.random_range(0..wcb.size());
            let rx = PskSequence {
                values: psk_sequence(wcb.quat().word(m), 1.0)
                    .values
                    .iter()
                    .map(|&v| v * boundary)
                    .collect(),
            };
            if demodulate_ml(&rx, &wcb).unwrap() != m {
                ml_errors += 1;
            }
            let (idx, _) = demodulate_corrected(&rx, &wcb, &est).unwrap();
            if idx != m {
                corrected_errors += 1;
            }
        }
        let ml_ser = ml_errors as f64 / trials as f64;
        assert!(ml_ser >= 0.5, "uncorrected SER {ml_ser} below 0.5");
        assert_eq!(corrected_errors, 0, "corrected rule must decode cleanly");
    }

    #[test]
    fn corrected_downweights_noisy_harmonic() {
        // Words differ by Lee >= 2 on the two low-variance harmonics; an
        // error injected on the high-variance harmonic must not flip the
        // decision.
        let quat = QuaternaryCodebook::new(
            vec![word(&[0, 0, 0]), word(&[2, 2, 0]), word(&[1, 3, 0]), word(&[3, 1, 0])],
            0,
        )
        .unwrap();
        let p = params(20, 3, 1, 1.0);
        let wcb = WaveformCodebook::new(p, quat).unwrap();
        let est = ChannelEstimate {
            mean: vec![Complex64::new(1.0, 0.0); 3],
            phase_shift: vec![0.0; 3],
            variance: vec![1e-4, 1e-4, 1e4],
            floored: vec![false; 3],
            training_len: 100,
        };
        for m in 0..wcb.size() {
            let mut values = psk_sequence(wcb.quat().word(m), 1.0).values;
            values[2] = -values[2]; // hard error on the noisy harmonic
            let (idx, _) = demodulate_corrected(&PskSequence { values }, &wcb, &est).unwrap();
            assert_eq!(idx, m, "noisy harmonic flipped the decision for {m}");
        }
    }

    #[test]
    fn reflection_shortcut_matches_full_search() {
        let quat = codebook_search(8, 64, 6, &SearchOptions::default()).unwrap();
        let p = params(20, 8, 1, 1.0);
        let wcb = WaveformCodebook::new(p, quat.clone()).unwrap();
        // Same codebook with pairing knocked out by reordering: words swapped
        // so chunks are no longer negation pairs, forcing the full scan.
        let mut shuffled = quat.words().to_vec();
        shuffled.swap(1, 2);
        let unpaired =
            WaveformCodebook::new(p, QuaternaryCodebook::new(shuffled.clone(), 0).unwrap()).unwrap();
        assert!(wcb.is_reflection_paired());
        assert!(!unpaired.is_reflection_paired());

        let est = ChannelEstimate::identity(&p);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..2_000 {
            let values: Vec<Complex64> = (0..8)
                .map(|_| Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)))
                .collect();
            let psk = PskSequence { values };
            let (fast_idx, fast_rel) = demodulate_corrected(&psk, &wcb, &est).unwrap();
            let (slow_idx, slow_rel) = demodulate_corrected(&psk, &unpaired, &est).unwrap();
            // Map through the reordering.
            let fast_word = wcb.quat().word(fast_idx);
            let slow_word = unpaired.quat().word(slow_idx);
            assert_eq!(fast_word, slow_word);
            assert_relative_eq!(fast_rel, slow_rel, epsilon = 1e-9);
        }
    }

    #[test]
    fn stream_round_trip() {
        let quat = codebook_search(8, 64, 8, &SearchOptions::default()).unwrap();
        let p = params(20, 8, 1, 0.5);
        let wcb = WaveformCodebook::new(p, quat).unwrap();
        let indices = [0usize, 1, 0, 63, 17];
        let samples = modulate_stream(&indices, &wcb).unwrap();
        assert_eq!(samples.len(), indices.len() * 20);
        let out = demodulate_stream(&samples, &wcb, None).unwrap();
        let decoded: Vec<usize> = out.symbols.iter().map(|&(m, _)| m).collect();
        assert_eq!(decoded, indices);
        assert_eq!(out.trailing_samples, 0);

        // Trailing partial symbol is trimmed and reported.
        let mut padded = samples.clone();
        padded.extend_from_slice(&[0.0; 7]);
        let out = demodulate_stream(&padded, &wcb, None).unwrap();
        assert_eq!(out.symbols.len(), indices.len());
        assert_eq!(out.trailing_samples, 7);
    }

    #[test]
    fn modulate_rejects_unknown_index() {
        let quat = codebook_search(4, 8, 8, &SearchOptions::default()).unwrap();
        let p = params(20, 4, 1, 0.5);
        let wcb = WaveformCodebook::new(p, quat).unwrap();
        assert!(modulate_stream(&[8], &wcb).is_err());
    }

    #[test]
    fn loopback_large_is_lossless() {
        let quat = codebook_search(8, 64, 12, &SearchOptions::default()).unwrap();
        let p = params(20, 8, 1, 0.9);
        let wcb = WaveformCodebook::new(p, quat).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let indices: Vec<usize> = (0..20_000).map(|_| rng.random_range(0..64)).collect();
        let samples = modulate_stream(&indices, &wcb).unwrap();
        let out = demodulate_stream(&samples, &wcb, None).unwrap();
        let errors = out
            .symbols
            .iter()
            .zip(&indices)
            .filter(|(&(m, _), &sent)| m != sent)
            .count();
        assert_eq!(errors, 0);
    }
}
