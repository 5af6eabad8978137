//! Secure-voice DoV frames: assembly, erasure-retry decoding, header
//! synchronization and silence insertion.
//!
//! A frame is `header | counter | encrypted speech | CRC | RS redundancy`
//! mapped onto DoV symbol indices. The constant 10 ms header (4 symbols)
//! carries no data and anchors synchronization; the counter keys the
//! keystream so every frame decrypts independently.

use std::collections::VecDeque;

use super::cipher::CipherSession;
use super::crc8::crc8;
use super::rs::RsCode;
use crate::error::{Error, Result};
use crate::modem::{
    demodulate_corrected, modulate_stream, ChannelEstimate, Demultiplexer, SymbolParams,
    WaveformCodebook,
};

/// Operating mode per the system parameter table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameMode {
    /// 3G profile: codebook 64, RS(28,20), 80 ms frames, 2400 bps.
    Low,
    /// VoIP profile: codebook 4096, RS(40,28), 60 ms frames, 4800 bps.
    High,
}

/// Frame-layer constants. Both modes run 400 baud (N=20) with 8 harmonics
/// at 400..3200 Hz.
#[derive(Clone, Debug)]
pub struct FrameConfig {
    pub mode: FrameMode,
    pub codebook_size: usize,
    pub bits_per_dov_symbol: usize,
    pub frame_symbols: usize,
    pub header_symbols: usize,
    pub payload_symbols: usize,
    pub rs: RsCode,
    pub speech_bits: usize,
    pub counter_bits: usize,
    pub crc_bits: usize,
    /// RS symbols carried by one payload DoV symbol (1 low, 2 high).
    pub rs_symbols_per_dov: usize,
    /// Erasure-guess reliability: weight of the demodulation margin.
    pub reliability_margin_weight: f64,
    /// Erasure-guess reliability: weight of the symbol-energy deviation.
    pub reliability_energy_weight: f64,
}

pub const FRAME_SAMPLE_RATE: u32 = 8000;
pub const FRAME_SYMBOL_LEN: usize = 20;
pub const FRAME_HARMONICS: usize = 8;
pub const FRAME_BASE_HARMONIC: usize = 1;

impl FrameConfig {
    pub fn low() -> Self {
        Self::build(FrameMode::Low)
    }

    pub fn high() -> Self {
        Self::build(FrameMode::High)
    }

    pub fn for_mode(mode: FrameMode) -> Self {
        Self::build(mode)
    }

    fn build(mode: FrameMode) -> Self {
        let config = match mode {
            FrameMode::Low => Self {
                mode,
                codebook_size: 64,
                bits_per_dov_symbol: 6,
                frame_symbols: 32,
                header_symbols: 4,
                payload_symbols: 28,
                rs: RsCode::low_mode(),
                speech_bits: 96,
                counter_bits: 16,
                crc_bits: 8,
                rs_symbols_per_dov: 1,
                reliability_margin_weight: 0.7,
                reliability_energy_weight: 0.3,
            },
            FrameMode::High => Self {
                mode,
                codebook_size: 4096,
                bits_per_dov_symbol: 12,
                frame_symbols: 24,
                header_symbols: 4,
                payload_symbols: 20,
                rs: RsCode::high_mode(),
                speech_bits: 144,
                counter_bits: 16,
                crc_bits: 8,
                rs_symbols_per_dov: 2,
                reliability_margin_weight: 0.7,
                reliability_energy_weight: 0.3,
            },
        };
        config.assert_budget();
        config
    }

    /// Bit-budget identities and the counter-span claim, checked at
    /// construction.
    fn assert_budget(&self) {
        assert_eq!(self.frame_symbols, self.header_symbols + self.payload_symbols);
        assert_eq!(1usize << self.bits_per_dov_symbol, self.codebook_size);
        assert_eq!(
            self.payload_symbols * self.bits_per_dov_symbol,
            self.rs.n() * 6,
            "payload bits must equal the RS codeword bits"
        );
        assert_eq!(
            self.rs.k() * 6,
            self.speech_bits + self.counter_bits + self.crc_bits,
            "RS message bits must equal speech + counter + CRC"
        );
        assert_eq!(self.rs_symbols_per_dov * 6, self.bits_per_dov_symbol);
        assert_eq!(self.header_duration_secs(), 0.010, "header is 10 ms");
        // 2^16 frames must span more than an hour of lost connection.
        assert!(self.counter_span_secs() > 3600.0);
    }

    pub fn frame_duration_secs(&self) -> f64 {
        self.frame_symbols as f64 * FRAME_SYMBOL_LEN as f64 / FRAME_SAMPLE_RATE as f64
    }

    pub fn header_duration_secs(&self) -> f64 {
        self.header_symbols as f64 * FRAME_SYMBOL_LEN as f64 / FRAME_SAMPLE_RATE as f64
    }

    /// Seconds covered by the full 16-bit counter range.
    pub fn counter_span_secs(&self) -> f64 {
        65536.0 * self.frame_duration_secs()
    }

    pub fn frame_samples(&self) -> usize {
        self.frame_symbols * FRAME_SYMBOL_LEN
    }

    /// Raw bit rate carried by the frame stream (header included).
    pub fn bitrate_bps(&self) -> f64 {
        (self.frame_symbols * self.bits_per_dov_symbol) as f64 / self.frame_duration_secs()
    }

    /// Symbol parameters with a caller-chosen amplitude.
    pub fn symbol_params(&self, amplitude: f64) -> Result<SymbolParams> {
        SymbolParams::new(
            FRAME_SAMPLE_RATE,
            FRAME_SYMBOL_LEN,
            FRAME_HARMONICS,
            FRAME_BASE_HARMONIC,
            amplitude,
        )
    }

    /// Highest count of payload DoV symbols the retry loop may erase.
    pub fn max_erasable_dov_symbols(&self) -> usize {
        self.rs.redundancy() / self.rs_symbols_per_dov
    }
}

/// One encoded frame.
#[derive(Clone, Debug, PartialEq)]
pub struct DovFrame {
    pub counter: u16,
    /// Encrypted speech bits as carried on the wire.
    pub speech_bits: Vec<u8>,
    pub crc: u8,
    /// RS redundancy bits.
    pub rs_redundancy: Vec<u8>,
    /// Full frame as DoV codebook indices, header included.
    pub symbol_indices: Vec<usize>,
}

/// A demodulated payload symbol with its erasure-guess reliability.
#[derive(Clone, Copy, Debug)]
pub struct RxSymbol {
    pub index: usize,
    pub reliability: f64,
}

/// Successful frame decode.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodedFrame {
    pub speech_bits: Vec<u8>,
    pub counter: u16,
    pub erasures_used: usize,
    pub attempts: usize,
}

/// Diagnostics of a failed frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameLoss {
    pub attempts: usize,
    /// Smallest Hamming distance between received and recomputed CRC over
    /// all attempts that produced an RS decode.
    pub best_crc_distance: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FrameOutcome {
    Decoded(DecodedFrame),
    Loss(FrameLoss),
}

/// Result of header synchronization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SyncResult {
    Found { offset: usize, confidence: f64 },
    NotFound,
}

/// Frame encoder/decoder bound to a waveform codebook.
pub struct FrameCodec {
    config: FrameConfig,
    codebook: WaveformCodebook,
    header_indices: Vec<usize>,
    header_samples: Vec<f64>,
    demux: Demultiplexer,
}

impl FrameCodec {
    pub fn new(config: FrameConfig, codebook: WaveformCodebook) -> Result<Self> {
        let params = codebook.params();
        if codebook.size() != config.codebook_size {
            return Err(Error::InvalidArgument(format!(
                "codebook size {} does not match mode requirement {}",
                codebook.size(),
                config.codebook_size
            )));
        }
        if params.sample_rate != FRAME_SAMPLE_RATE
            || params.samples_per_symbol != FRAME_SYMBOL_LEN
            || params.harmonics != FRAME_HARMONICS
            || params.base_harmonic != FRAME_BASE_HARMONIC
        {
            return Err(Error::InvalidArgument(
                "frame layer requires 400 baud symbols with 8 harmonics at 400..3200 Hz".into(),
            ));
        }

        // Header: the codebook pair at maximum mutual Euclidean distance
        // (equivalently Lee distance), pattern (a, b, a, b). Smallest index
        // pair wins ties.
        let words = codebook.quat().words();
        let (mut best_a, mut best_b, mut best_d) = (0usize, 1usize, 0u32);
        for i in 0..words.len() {
            for j in (i + 1)..words.len() {
                let d = crate::quatcode::lee_distance(&words[i], &words[j])?;
                if d > best_d {
                    best_d = d;
                    best_a = i;
                    best_b = j;
                }
            }
        }
        let header_indices = vec![best_a, best_b, best_a, best_b];
        let header_samples = modulate_stream(&header_indices, &codebook)?;
        let demux = Demultiplexer::new(params);
        Ok(Self {
            config,
            codebook,
            header_indices,
            header_samples,
            demux,
        })
    }

    pub fn config(&self) -> &FrameConfig {
        &self.config
    }

    pub fn codebook(&self) -> &WaveformCodebook {
        &self.codebook
    }

    pub fn header_indices(&self) -> &[usize] {
        &self.header_indices
    }

    /// Assembles one frame. The CRC covers the plaintext (speech || counter);
    /// speech travels encrypted; the RS message is counter || speech || CRC
    /// packed MSB-first into 6-bit symbols.
    pub fn encode_frame(
        &self,
        speech_bits: &[u8],
        counter: u16,
        session: &CipherSession,
    ) -> Result<DovFrame> {
        let cfg = &self.config;
        if speech_bits.len() != cfg.speech_bits {
            return Err(Error::InvalidArgument(format!(
                "speech payload must be {} bits, got {}",
                cfg.speech_bits,
                speech_bits.len()
            )));
        }
        if speech_bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("speech bits must be 0/1".into()));
        }

        let counter_bits = u16_to_bits(counter);
        let mut crc_input = speech_bits.to_vec();
        crc_input.extend_from_slice(&counter_bits);
        let crc = crc8(&crc_input);

        let encrypted = session.apply(speech_bits, counter);

        let mut message_bits = Vec::with_capacity(cfg.rs.k() * 6);
        message_bits.extend_from_slice(&counter_bits);
        message_bits.extend_from_slice(&encrypted);
        message_bits.extend((0..8).rev().map(|i| (crc >> i) & 1));

        let message_symbols = pack_6bit(&message_bits);
        debug_assert_eq!(message_symbols.len(), cfg.rs.k());
        let codeword = cfg.rs.encode(&message_symbols)?;

        let payload_indices = self.rs_to_payload(&codeword);
        let mut symbol_indices = self.header_indices.clone();
        symbol_indices.extend_from_slice(&payload_indices);

        let redundancy_bits: Vec<u8> = codeword[cfg.rs.k()..]
            .iter()
            .flat_map(|&s| (0..6).rev().map(move |i| (s >> i) & 1))
            .collect();

        Ok(DovFrame {
            counter,
            speech_bits: encrypted,
            crc,
            rs_redundancy: redundancy_bits,
            symbol_indices,
        })
    }

    /// Waveform of one frame.
    pub fn frame_to_samples(&self, frame: &DovFrame) -> Result<Vec<f64>> {
        modulate_stream(&frame.symbol_indices, &self.codebook)
    }

    fn rs_to_payload(&self, codeword: &[u8]) -> Vec<usize> {
        match self.config.rs_symbols_per_dov {
            1 => codeword.iter().map(|&s| s as usize).collect(),
            2 => codeword
                .chunks_exact(2)
                .map(|pair| ((pair[0] as usize) << 6) | pair[1] as usize)
                .collect(),
            other => unreachable!("unsupported packing {other}"),
        }
    }

    fn payload_to_rs(&self, indices: &[usize]) -> Vec<u8> {
        match self.config.rs_symbols_per_dov {
            1 => indices.iter().map(|&m| (m & 0x3f) as u8).collect(),
            2 => indices
                .iter()
                .flat_map(|&m| [((m >> 6) & 0x3f) as u8, (m & 0x3f) as u8])
                .collect(),
            other => unreachable!("unsupported packing {other}"),
        }
    }

    /// Erasure-retry decoding of an already-demodulated payload. Attempts
    /// f = 0, 2, 4, ... RS erasures (whole DoV symbols), erasing the least
    /// reliable payload symbols first, until the CRC over the decrypted
    /// plaintext matches.
    pub fn decode_symbols(&self, payload: &[RxSymbol], session: &CipherSession) -> Result<FrameOutcome> {
        let cfg = &self.config;
        if payload.len() != cfg.payload_symbols {
            return Err(Error::InvalidArgument(format!(
                "expected {} payload symbols, got {}",
                cfg.payload_symbols,
                payload.len()
            )));
        }
        if payload.iter().any(|s| s.index >= cfg.codebook_size) {
            return Err(Error::InvalidArgument("symbol index outside codebook".into()));
        }

        let received = self.payload_to_rs(&payload.iter().map(|s| s.index).collect::<Vec<_>>());

        // Payload positions ordered by ascending reliability.
        let mut order: Vec<usize> = (0..payload.len()).collect();
        order.sort_by(|&a, &b| {
            payload[a]
                .reliability
                .partial_cmp(&payload[b].reliability)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });

        let step = match cfg.rs_symbols_per_dov {
            1 => 2, // f advances by 2 RS erasures
            _ => 1, // one DoV symbol already carries 2 RS symbols
        };
        let mut attempts = 0;
        let mut best_crc_distance = u32::MAX;
        let mut erase_count = 0;
        while erase_count <= cfg.max_erasable_dov_symbols() {
            attempts += 1;
            let mut erasures = Vec::with_capacity(erase_count * cfg.rs_symbols_per_dov);
            for &pos in order.iter().take(erase_count) {
                for r in 0..cfg.rs_symbols_per_dov {
                    erasures.push(pos * cfg.rs_symbols_per_dov + r);
                }
            }
            if let Some(message) = cfg.rs.decode(&received, &erasures)? {
                let bits = unpack_6bit(&message);
                let counter_bits = &bits[..cfg.counter_bits];
                let encrypted = &bits[cfg.counter_bits..cfg.counter_bits + cfg.speech_bits];
                let crc_rx = bits[cfg.counter_bits + cfg.speech_bits..]
                    .iter()
                    .fold(0u8, |acc, &b| (acc << 1) | b);
                let counter = bits_to_u16(counter_bits);
                let plain = session.apply(encrypted, counter);
                let mut crc_input = plain.clone();
                crc_input.extend_from_slice(counter_bits);
                let crc_calc = crc8(&crc_input);
                if crc_calc == crc_rx {
                    return Ok(FrameOutcome::Decoded(DecodedFrame {
                        speech_bits: plain,
                        counter,
                        erasures_used: erasures.len(),
                        attempts,
                    }));
                }
                best_crc_distance = best_crc_distance.min((crc_calc ^ crc_rx).count_ones());
            }
            erase_count += step;
        }
        Ok(FrameOutcome::Loss(FrameLoss {
            attempts,
            best_crc_distance,
        }))
    }

    /// Demodulates one aligned frame (header included) and runs the erasure
    /// retry. Reliability blends the demodulation margin with the symbol
    /// energy deviation from the codebook's nominal energy.
    pub fn decode_frame_samples(
        &self,
        samples: &[f64],
        session: &CipherSession,
        est: &ChannelEstimate,
    ) -> Result<FrameOutcome> {
        let cfg = &self.config;
        let n = FRAME_SYMBOL_LEN;
        if samples.len() != cfg.frame_samples() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples per frame, got {}",
                cfg.frame_samples(),
                samples.len()
            )));
        }
        let expected_energy = self.codebook.params().symbol_energy();
        let payload_samples = &samples[cfg.header_symbols * n..];
        let mut payload = Vec::with_capacity(cfg.payload_symbols);
        for chunk in payload_samples.chunks_exact(n) {
            let psk = self.demux.run(chunk)?;
            let (index, margin) = demodulate_corrected(&psk, &self.codebook, est)?;
            let energy: f64 = chunk.iter().map(|s| s * s).sum();
            let energy_score =
                (1.0 - (energy - expected_energy).abs() / expected_energy).clamp(0.0, 1.0);
            let reliability = cfg.reliability_margin_weight * margin
                + cfg.reliability_energy_weight * energy_score;
            payload.push(RxSymbol { index, reliability });
        }
        self.decode_symbols(&payload, session)
    }

    /// Locates the 4-symbol header by maximizing normalized cross-correlation
    /// over integer sample lags. Returns the best lag when the normalized
    /// correlation reaches 0.5.
    pub fn header_sync(&self, samples: &[f64]) -> Result<SyncResult> {
        if samples.len() < self.config.frame_samples() {
            return Err(Error::InvalidArgument(format!(
                "sync window of {} samples is shorter than one frame ({})",
                samples.len(),
                self.config.frame_samples()
            )));
        }
        let h = &self.header_samples;
        let header_norm = h.iter().map(|s| s * s).sum::<f64>().sqrt();
        // Prefix sums of x^2 for O(1) window norms.
        let mut prefix = Vec::with_capacity(samples.len() + 1);
        prefix.push(0.0);
        for &s in samples {
            prefix.push(prefix.last().unwrap() + s * s);
        }
        let mut ncc = vec![f64::NEG_INFINITY; samples.len() - h.len() + 1];
        let mut best_ncc = f64::NEG_INFINITY;
        for (lag, slot) in ncc.iter_mut().enumerate() {
            let window_energy = prefix[lag + h.len()] - prefix[lag];
            if window_energy <= 0.0 {
                continue;
            }
            let dot: f64 = h.iter().zip(&samples[lag..]).map(|(a, b)| a * b).sum();
            *slot = dot / (header_norm * window_energy.sqrt());
            best_ncc = best_ncc.max(*slot);
        }
        // A periodic stream repeats the header at every frame start with
        // correlations equal up to rounding; take the earliest peak.
        if best_ncc >= 0.5 {
            let offset = ncc
                .iter()
                .position(|&v| v >= best_ncc - 1e-9)
                .expect("a peak exists");
            Ok(SyncResult::Found {
                offset,
                confidence: ncc[offset],
            })
        } else {
            Ok(SyncResult::NotFound)
        }
    }
}

fn u16_to_bits(value: u16) -> Vec<u8> {
    (0..16).rev().map(|i| ((value >> i) & 1) as u8).collect()
}

fn bits_to_u16(bits: &[u8]) -> u16 {
    bits.iter().fold(0u16, |acc, &b| (acc << 1) | b as u16)
}

/// Packs a bit sequence (length divisible by 6) into 6-bit symbols,
/// MSB first.
fn pack_6bit(bits: &[u8]) -> Vec<u8> {
    debug_assert_eq!(bits.len() % 6, 0);
    bits.chunks_exact(6)
        .map(|chunk| chunk.iter().fold(0u8, |acc, &b| (acc << 1) | b))
        .collect()
}

fn unpack_6bit(symbols: &[u8]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|&s| (0..6).rev().map(move |i| (s >> i) & 1))
        .collect()
}

/// Replaces every `period`-th frame (0-indexed: period-1, 2*period-1, ...)
/// with exact zeros, countering network voice-activity suppression.
pub fn silence_schedule(frames: &mut [Vec<f64>], period: usize) -> Result<()> {
    if period < 2 {
        return Err(Error::InvalidArgument("silence period must be >= 2".into()));
    }
    for (i, frame) in frames.iter_mut().enumerate() {
        if (i + 1) % period == 0 {
            frame.iter_mut().for_each(|s| *s = 0.0);
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameClass {
    Speech,
    Silent,
}

/// Energy-based silence detector: a frame is silent when its energy falls
/// below 0.01 of the running median energy of speech frames seen so far.
/// Exact-zero frames are always silent.
#[derive(Default)]
pub struct SilenceDetector {
    history: VecDeque<f64>,
}

impl SilenceDetector {
    const HISTORY: usize = 64;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn classify(&mut self, frame: &[f64]) -> FrameClass {
        let energy: f64 = frame.iter().map(|s| s * s).sum();
        if energy == 0.0 {
            return FrameClass::Silent;
        }
        if let Some(median) = self.median() {
            if energy < 0.01 * median {
                return FrameClass::Silent;
            }
        }
        self.history.push_back(energy);
        if self.history.len() > Self::HISTORY {
            self.history.pop_front();
        }
        FrameClass::Speech
    }

    fn median(&self) -> Option<f64> {
        if self.history.is_empty() {
            return None;
        }
        let mut sorted: Vec<f64> = self.history.iter().copied().collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite energies"));
        Some(sorted[sorted.len() / 2])
    }
}

/// Per-frame outcome of a stream decode.
#[derive(Clone, Debug, PartialEq)]
pub enum StreamFrame {
    Decoded(DecodedFrame),
    Lost(FrameLoss),
    /// Silent by design (or suppressed); concealed, not errored.
    Concealed,
    /// Header mismatch at the expected offset that re-sync could not fix.
    Desync,
}

/// Report of a full receive pipeline run.
#[derive(Clone, Debug, Default)]
pub struct StreamReport {
    pub sync_offset: usize,
    pub frames: Vec<StreamFrame>,
}

impl StreamReport {
    pub fn decoded(&self) -> usize {
        self.frames
            .iter()
            .filter(|f| matches!(f, StreamFrame::Decoded(_)))
            .count()
    }

    pub fn lost(&self) -> usize {
        self.frames
            .iter()
            .filter(|f| matches!(f, StreamFrame::Lost(_) | StreamFrame::Desync))
            .count()
    }

    pub fn concealed(&self) -> usize {
        self.frames
            .iter()
            .filter(|f| matches!(f, StreamFrame::Concealed))
            .count()
    }

    /// Frame error rate with concealed (silent-by-design) frames excluded
    /// from both numerator and denominator.
    pub fn effective_fer(&self) -> f64 {
        let counted = self.decoded() + self.lost();
        if counted == 0 {
            0.0
        } else {
            self.lost() as f64 / counted as f64
        }
    }
}

impl FrameCodec {
    /// Full receive pipeline: initial header sync, then frame-by-frame
    /// decoding at a fixed stride with silence classification and per-frame
    /// header verification (with one re-sync attempt on mismatch).
    pub fn decode_stream(
        &self,
        samples: &[f64],
        session: &CipherSession,
        est: &ChannelEstimate,
    ) -> Result<StreamReport> {
        let frame_len = self.config.frame_samples();
        let sync_offset = match self.header_sync(samples)? {
            SyncResult::Found { offset, .. } => offset,
            SyncResult::NotFound => {
                return Err(Error::Desynchronized("no header found in stream".into()))
            }
        };
        let mut report = StreamReport {
            sync_offset,
            frames: Vec::new(),
        };
        let mut detector = SilenceDetector::new();
        let mut pos = sync_offset;
        while pos + frame_len <= samples.len() {
            let frame = &samples[pos..pos + frame_len];
            if detector.classify(frame) == FrameClass::Silent {
                report.frames.push(StreamFrame::Concealed);
                pos += frame_len;
                continue;
            }
            // Verify the header at the expected position.
            let h = &self.header_samples;
            let dot: f64 = h.iter().zip(frame).map(|(a, b)| a * b).sum();
            let hn = h.iter().map(|s| s * s).sum::<f64>().sqrt();
            let wn = frame[..h.len()].iter().map(|s| s * s).sum::<f64>().sqrt();
            let ncc = if wn > 0.0 { dot / (hn * wn) } else { 0.0 };
            if ncc < 0.5 {
                // Try to re-acquire within the remaining window.
                match self.header_sync(&samples[pos..]) {
                    Ok(SyncResult::Found { offset, .. }) if offset > 0 => {
                        report.frames.push(StreamFrame::Desync);
                        pos += offset;
                        continue;
                    }
                    _ => {
                        report.frames.push(StreamFrame::Desync);
                        pos += frame_len;
                        continue;
                    }
                }
            }
            match self.decode_frame_samples(frame, session, est)? {
                FrameOutcome::Decoded(d) => report.frames.push(StreamFrame::Decoded(d)),
                FrameOutcome::Loss(l) => report.frames.push(StreamFrame::Lost(l)),
            }
            pos += frame_len;
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channelsim::{apply_time_impairments, TimeImpairments};
    use crate::framing::cipher::CipherSession;
    use crate::quatcode::{codebook_search, SearchOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::sync::OnceLock;

    fn low_codec() -> &'static FrameCodec {
        static CODEC: OnceLock<FrameCodec> = OnceLock::new();
        CODEC.get_or_init(|| {
            let quat = codebook_search(8, 64, 2, &SearchOptions::default()).unwrap();
            let wcb = WaveformCodebook::with_normalized_peak(8000, 20, 1, quat, 0.9).unwrap();
            FrameCodec::new(FrameConfig::low(), wcb).unwrap()
        })
    }

    fn session() -> CipherSession {
        CipherSession::new(&[7u8; 32], &[9u8; 13])
    }

    fn random_bits(rng: &mut ChaCha12Rng, len: usize) -> Vec<u8> {
        (0..len).map(|_| rng.random_range(0..2u8)).collect()
    }

    fn clean_payload(codec: &FrameCodec, frame: &DovFrame) -> Vec<RxSymbol> {
        frame.symbol_indices[codec.config().header_symbols..]
            .iter()
            .map(|&index| RxSymbol {
                index,
                reliability: 1.0,
            })
            .collect()
    }

    #[test]
    fn config_budgets() {
        let low = FrameConfig::low();
        assert_eq!(low.frame_duration_secs(), 0.080);
        assert_eq!(low.bitrate_bps(), 2400.0);
        assert_eq!(low.rs.redundancy(), 8);
        assert!(low.counter_span_secs() > 3600.0);

        let high = FrameConfig::high();
        assert_eq!(high.frame_duration_secs(), 0.060);
        assert_eq!(high.bitrate_bps(), 4800.0);
        assert_eq!(high.rs.redundancy(), 12);
        assert!(high.counter_span_secs() > 3600.0);
    }

    #[test]
    fn encode_decode_round_trip() {
        let codec = low_codec();
        let s = session();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for counter in [0u16, 1, 65535] {
            let speech = random_bits(&mut rng, 96);
            let frame = codec.encode_frame(&speech, counter, &s).unwrap();
            assert_eq!(frame.symbol_indices.len(), 32);
            assert_ne!(frame.speech_bits, speech, "wire speech must be encrypted");
            match codec.decode_symbols(&clean_payload(codec, &frame), &s).unwrap() {
                FrameOutcome::Decoded(d) => {
                    assert_eq!(d.speech_bits, speech);
                    assert_eq!(d.counter, counter);
                    assert_eq!(d.erasures_used, 0);
                    assert_eq!(d.attempts, 1);
                }
                other => panic!("clean frame failed: {other:?}"),
            }
        }
    }

    #[test]
    fn counter_wraps() {
        // 65535 then 0: both encode and decode independently.
        let codec = low_codec();
        let s = session();
        let speech = vec![1u8; 96];
        let last = codec.encode_frame(&speech, 65535, &s).unwrap();
        let next = codec.encode_frame(&speech, 65535u16.wrapping_add(1), &s).unwrap();
        assert_eq!(next.counter, 0);
        for frame in [last, next] {
            match codec.decode_symbols(&clean_payload(codec, &frame), &s).unwrap() {
                FrameOutcome::Decoded(d) => assert_eq!(d.speech_bits, speech),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn rejects_bad_speech_length() {
        let codec = low_codec();
        assert!(codec.encode_frame(&[0u8; 95], 0, &session()).is_err());
    }

    #[test]
    fn erasure_retry_recovers_marked_corruption() {
        // 6 corrupted payload symbols marked lowest-reliability: recovered
        // through erasure retry (6 <= 8).
        let codec = low_codec();
        let s = session();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..50 {
            let speech = random_bits(&mut rng, 96);
            let frame = codec.encode_frame(&speech, 77, &s).unwrap();
            let mut payload = clean_payload(codec, &frame);
            let mut positions: Vec<usize> = (0..payload.len()).collect();
            for i in 0..6 {
                let j = rng.random_range(i..positions.len());
                positions.swap(i, j);
            }
            for &p in &positions[..6] {
                let old = payload[p].index;
                let mut new = rng.random_range(0..64usize);
                while new == old {
                    new = rng.random_range(0..64usize);
                }
                payload[p] = RxSymbol {
                    index: new,
                    reliability: rng.random_range(0.0..0.2),
                };
            }
            match codec.decode_symbols(&payload, &s).unwrap() {
                FrameOutcome::Decoded(d) => {
                    assert_eq!(d.speech_bits, speech);
                    // With the 6 bad symbols ranked least reliable, f = 4
                    // already suffices (2 residual errors: 2*2 + 4 = 8), so
                    // the loop settles at attempt 3 with 4 or 6 erasures.
                    assert!(
                        d.erasures_used == 4 || d.erasures_used == 6,
                        "erasures used: {}",
                        d.erasures_used
                    );
                    assert!(d.attempts >= 2);
                }
                other => panic!("marked corruption not recovered: {other:?}"),
            }
        }
    }

    #[test]
    fn beyond_bound_reports_loss_or_identified_collision() {
        // 9 corrupted symbols exceed every (e, f) combination, so a correct
        // decode is impossible: at the final attempt (f = n-k) the erasure
        // decode is pure interpolation and always yields *a* codeword, which
        // only the CRC filters. An 8-bit CRC collides at ~2^-8 per such
        // attempt, so a few trials per 10^4 are accepted with a wrong
        // payload; known plaintext identifies every one of them. Nothing may
        // ever come back equal to the true payload.
        let codec = low_codec();
        let s = session();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let trials = 10_000;
        let mut losses = 0;
        let mut identified_collisions = 0;
        for _ in 0..trials {
            let speech = random_bits(&mut rng, 96);
            let frame = codec.encode_frame(&speech, 3, &s).unwrap();
            let mut payload = clean_payload(codec, &frame);
            let mut positions: Vec<usize> = (0..payload.len()).collect();
            for i in 0..9 {
                let j = rng.random_range(i..positions.len());
                positions.swap(i, j);
            }
            for &p in &positions[..9] {
                let old = payload[p].index;
                let mut new = rng.random_range(0..64usize);
                while new == old {
                    new = rng.random_range(0..64usize);
                }
                payload[p] = RxSymbol {
                    index: new,
                    reliability: rng.random_range(0.0..1.0),
                };
            }
            match codec.decode_symbols(&payload, &s).unwrap() {
                FrameOutcome::Loss(loss) => {
                    losses += 1;
                    assert!(loss.attempts >= 5);
                    assert!(loss.best_crc_distance >= 1);
                }
                FrameOutcome::Decoded(d) => {
                    assert_ne!(
                        d.speech_bits, speech,
                        "9 corruptions cannot decode to the true payload"
                    );
                    identified_collisions += 1;
                }
            }
        }
        assert_eq!(losses + identified_collisions, trials);
        // ~5 attempts x 2^-8 at the interpolation-limit retries.
        assert!(
            identified_collisions <= 150,
            "collision count {identified_collisions} far above the 2^-8 rate"
        );
    }

    #[test]
    fn header_sync_clean_and_delayed() {
        let codec = low_codec();
        let s = session();
        let speech = vec![0u8; 96];
        let frame = codec.encode_frame(&speech, 5, &s).unwrap();
        let samples = codec.frame_to_samples(&frame).unwrap();

        match codec.header_sync(&samples).unwrap() {
            SyncResult::Found { offset, confidence } => {
                assert_eq!(offset, 0);
                assert!(confidence >= 0.99);
            }
            SyncResult::NotFound => panic!("clean frame not found"),
        }

        let delayed = apply_time_impairments(
            &samples,
            &TimeImpairments {
                delay_samples: 37,
                ..Default::default()
            },
            20,
            0,
        )
        .unwrap();
        match codec.header_sync(&delayed).unwrap() {
            SyncResult::Found { offset, .. } => assert_eq!(offset, 37),
            SyncResult::NotFound => panic!("delayed frame not found"),
        }

        assert!(codec.header_sync(&samples[..100]).is_err());
        assert_eq!(
            codec.header_sync(&vec![0.0; 640]).unwrap(),
            SyncResult::NotFound
        );
    }

    #[test]
    fn header_sync_under_noise() {
        // 10 dB wideband SNR: correct offset in at least 99% of seeded trials.
        let codec = low_codec();
        let s = session();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let mut correct = 0;
        let trials = 1000;
        for t in 0..trials {
            let speech = random_bits(&mut rng, 96);
            let frame = codec.encode_frame(&speech, t as u16, &s).unwrap();
            let samples = codec.frame_to_samples(&frame).unwrap();
            let delay = rng.random_range(0..100usize);
            let spec = TimeImpairments {
                delay_samples: delay,
                snr_db: Some(10.0),
                ..Default::default()
            };
            let mut noisy = apply_time_impairments(&samples, &spec, 20, 1000 + t as u64).unwrap();
            noisy.extend(std::iter::repeat(0.0).take(100 - delay));
            if let SyncResult::Found { offset, .. } = codec.header_sync(&noisy).unwrap() {
                if offset == delay {
                    correct += 1;
                }
            }
        }
        assert!(correct >= 990, "sync success {correct}/{trials}");
    }

    #[test]
    fn silence_schedule_and_detector() {
        let mut frames: Vec<Vec<f64>> = (0..64).map(|_| vec![0.5; 640]).collect();
        silence_schedule(&mut frames, 16).unwrap();
        for (i, frame) in frames.iter().enumerate() {
            let silent = frame.iter().all(|&s| s == 0.0);
            assert_eq!(silent, [15, 31, 47, 63].contains(&i), "frame {i}");
        }
        assert!(silence_schedule(&mut frames, 1).is_err());

        let mut detector = SilenceDetector::new();
        assert_eq!(detector.classify(&vec![0.0; 640]), FrameClass::Silent);
        assert_eq!(detector.classify(&vec![0.5; 640]), FrameClass::Speech);
        // Well below 1% of the median energy.
        assert_eq!(detector.classify(&vec![0.01; 640]), FrameClass::Silent);
        assert_eq!(detector.classify(&vec![0.4; 640]), FrameClass::Speech);
    }

    #[test]
    fn stream_pipeline_with_silence_insertion() {
        let codec = low_codec();
        let s = session();
        let est = ChannelEstimate::identity(codec.codebook().params());
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let count = 48;
        let mut sent = Vec::new();
        let mut frames = Vec::new();
        for counter in 0..count {
            let speech = random_bits(&mut rng, 96);
            let frame = codec.encode_frame(&speech, counter, &s).unwrap();
            frames.push(codec.frame_to_samples(&frame).unwrap());
            sent.push(speech);
        }
        silence_schedule(&mut frames, 16).unwrap();
        let samples: Vec<f64> = frames.concat();

        let report = codec.decode_stream(&samples, &s, &est).unwrap();
        assert_eq!(report.sync_offset, 0);
        assert_eq!(report.frames.len(), count as usize);
        assert_eq!(report.concealed(), 3);
        assert_eq!(report.decoded(), count as usize - 3);
        assert_eq!(report.effective_fer(), 0.0);
        for (i, frame) in report.frames.iter().enumerate() {
            match frame {
                StreamFrame::Decoded(d) => {
                    assert_eq!(d.counter as usize, i);
                    assert_eq!(d.speech_bits, sent[i]);
                }
                StreamFrame::Concealed => assert_eq!((i + 1) % 16, 0),
                other => panic!("frame {i}: {other:?}"),
            }
        }
    }
}
