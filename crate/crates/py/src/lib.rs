//! Python bindings for the dov modem: codebook search, modulation,
//! demodulation, channel simulation and the secure-voice frame layer.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use dov_core::channelsim::{apply_parametric, apply_time_impairments, ParametricChannelModel};
use dov_core::framing::{
    crc8 as crc8_mod, silence_schedule, CipherSession, FrameCodec, FrameConfig, FrameMode,
    StreamFrame,
};
use dov_core::modem::{
    estimate_channel, modulate_stream, synthesize_from_psk, ChannelEstimate as CoreEstimate,
    Demultiplexer, PskSequence, SymbolParams, WaveformCodebook,
};
use dov_core::quatcode::{self, QuaternaryCodebook, QuaternaryWord, SearchOptions};
use dov_core::stats;

fn err<T>(result: dov_core::Result<T>) -> PyResult<T> {
    result.map_err(|e| PyValueError::new_err(format!("{}: {e}", e.category())))
}

/// A quaternary codebook with a certified minimum Lee distance.
#[pyclass(name = "Codebook", from_py_object)]
#[derive(Clone)]
struct PyCodebook {
    inner: QuaternaryCodebook,
}

#[pymethods]
impl PyCodebook {
    /// Greedy search for `m` words of length `n`, deterministic per seed.
    #[staticmethod]
    #[pyo3(signature = (n, m, seed=1))]
    fn search(n: usize, m: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: err(quatcode::codebook_search(n, m, seed, &SearchOptions::default()))?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: err(QuaternaryCodebook::load(std::path::Path::new(path)))?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        err(self.inner.save(std::path::Path::new(path)))
    }

    #[getter]
    fn min_lee_distance(&self) -> u32 {
        self.inner.min_lee_distance()
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn word_len(&self) -> usize {
        self.inner.word_len()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    fn words(&self) -> Vec<Vec<u8>> {
        self.inner
            .words()
            .iter()
            .map(|w| w.digits().to_vec())
            .collect()
    }

    fn is_reflection_paired(&self) -> bool {
        self.inner.is_reflection_paired()
    }

    fn __repr__(&self) -> String {
        format!(
            "Codebook(n={}, M={}, d={}, seed={})",
            self.inner.word_len(),
            self.inner.size(),
            self.inner.min_lee_distance(),
            self.inner.seed()
        )
    }
}

/// Lee distance between two quaternary words.
#[pyfunction]
fn lee_distance(a: Vec<u8>, b: Vec<u8>) -> PyResult<u32> {
    let wa = err(QuaternaryWord::new(a))?;
    let wb = err(QuaternaryWord::new(b))?;
    err(quatcode::lee_distance(&wa, &wb))
}

/// Per-harmonic channel estimate learned from training symbols.
#[pyclass(name = "ChannelEstimate", from_py_object)]
#[derive(Clone)]
struct PyEstimate {
    inner: CoreEstimate,
}

#[pymethods]
impl PyEstimate {
    #[getter]
    fn phase_shift(&self) -> Vec<f64> {
        self.inner.phase_shift.clone()
    }

    #[getter]
    fn variance(&self) -> Vec<f64> {
        self.inner.variance.clone()
    }

    #[getter]
    fn gains(&self) -> Vec<f64> {
        (0..self.inner.harmonics()).map(|k| self.inner.gain(k)).collect()
    }

    #[getter]
    fn training_len(&self) -> usize {
        self.inner.training_len
    }
}

/// OFDM-PSK modem over a waveform codebook.
#[pyclass(name = "Modem")]
struct PyModem {
    wcb: WaveformCodebook,
    demux: Demultiplexer,
}

#[pymethods]
impl PyModem {
    /// Builds waveforms for the codebook, peak-normalized to `peak` of full
    /// scale (8 kHz audio).
    #[new]
    #[pyo3(signature = (codebook, samples_per_symbol=20, base_harmonic=1, peak=0.9))]
    fn new(
        codebook: PyCodebook,
        samples_per_symbol: usize,
        base_harmonic: usize,
        peak: f64,
    ) -> PyResult<Self> {
        let wcb = err(WaveformCodebook::with_normalized_peak(
            8000,
            samples_per_symbol,
            base_harmonic,
            codebook.inner,
            peak,
        ))?;
        let demux = Demultiplexer::new(wcb.params());
        Ok(Self { wcb, demux })
    }

    #[getter]
    fn amplitude(&self) -> f64 {
        self.wcb.params().amplitude
    }

    #[getter]
    fn baud(&self) -> f64 {
        self.wcb.params().baud()
    }

    fn modulate(&self, indices: Vec<usize>) -> PyResult<Vec<f64>> {
        err(modulate_stream(&indices, &self.wcb))
    }

    /// Channel estimation from an aligned training stream.
    fn estimate(&self, samples: Vec<f64>, sent_indices: Vec<usize>) -> PyResult<PyEstimate> {
        let n = self.wcb.params().samples_per_symbol;
        if samples.len() < sent_indices.len() * n {
            return Err(PyValueError::new_err("training stream too short"));
        }
        let received: Vec<PskSequence> = samples[..sent_indices.len() * n]
            .chunks_exact(n)
            .map(|c| self.demux.run(c))
            .collect::<dov_core::Result<_>>()
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let words: Vec<QuaternaryWord> = sent_indices
            .iter()
            .map(|&i| self.wcb.quat().word(i).clone())
            .collect();
        Ok(PyEstimate {
            inner: err(estimate_channel(&received, &words, self.wcb.params()))?,
        })
    }

    /// Symbol-by-symbol demodulation; plain maximum likelihood without an
    /// estimate. Returns (index, reliability) pairs.
    #[pyo3(signature = (samples, estimate=None))]
    fn demodulate(
        &self,
        samples: Vec<f64>,
        estimate: Option<PyEstimate>,
    ) -> PyResult<Vec<(usize, f64)>> {
        let est = estimate
            .map(|e| e.inner)
            .unwrap_or_else(|| CoreEstimate::identity(self.wcb.params()));
        let out = err(dov_core::modem::demodulate_stream(
            &samples,
            &self.wcb,
            Some(&est),
        ))?;
        Ok(out.symbols)
    }
}

/// Parametric voice-channel model plus optional time impairments.
#[pyclass(name = "ChannelModel", from_py_object)]
#[derive(Clone)]
struct PyChannelModel {
    inner: ParametricChannelModel,
}

#[pymethods]
impl PyChannelModel {
    #[new]
    fn new(gains: Vec<f64>, phases_rad: Vec<f64>, noise_vars: Vec<f64>) -> Self {
        Self {
            inner: ParametricChannelModel {
                gains,
                phases_rad,
                noise_vars,
                impairments: None,
            },
        }
    }

    #[staticmethod]
    fn amr_like(harmonics: usize) -> Self {
        Self {
            inner: ParametricChannelModel::amr_like(harmonics),
        }
    }

    #[staticmethod]
    fn silk_like(harmonics: usize) -> Self {
        Self {
            inner: ParametricChannelModel::silk_like(harmonics),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: err(ParametricChannelModel::from_json(text))?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Combined path: demultiplex whole symbols, apply the per-harmonic
    /// model, re-synthesize, then apply time impairments if configured.
    /// A trailing partial symbol passes through unchanged.
    #[pyo3(signature = (samples, seed=0, samples_per_symbol=20, base_harmonic=1))]
    fn apply(
        &self,
        samples: Vec<f64>,
        seed: u64,
        samples_per_symbol: usize,
        base_harmonic: usize,
    ) -> PyResult<Vec<f64>> {
        let k = self.inner.harmonics();
        let params = err(SymbolParams::new(
            8000,
            samples_per_symbol,
            k,
            base_harmonic,
            1.0,
        ))?;
        let demux = Demultiplexer::new(&params);
        let psk: Vec<PskSequence> = samples
            .chunks_exact(samples_per_symbol)
            .map(|c| demux.run(c))
            .collect::<dov_core::Result<_>>()
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let distorted = err(apply_parametric(&psk, &self.inner, seed))?;
        let mut out = Vec::with_capacity(samples.len());
        for p in &distorted {
            out.extend(err(synthesize_from_psk(p, &params))?);
        }
        out.extend_from_slice(&samples[psk.len() * samples_per_symbol..]);
        if let Some(imp) = &self.inner.impairments {
            out = err(apply_time_impairments(
                &out,
                imp,
                samples_per_symbol,
                seed.wrapping_add(1),
            ))?;
        }
        Ok(out)
    }

}

/// Secure-voice frame layer bound to a mode, key and nonce.
#[pyclass(name = "FrameSession")]
struct PyFrameSession {
    codec: FrameCodec,
    session: CipherSession,
}

#[pymethods]
impl PyFrameSession {
    /// `mode` is "low" (3G, 2400 bps) or "high" (VoIP, 4800 bps). The
    /// codebook defaults to the deterministic built-in search (seed 2).
    #[new]
    #[pyo3(signature = (mode, key_hex, nonce_hex, codebook=None))]
    fn new(
        mode: &str,
        key_hex: &str,
        nonce_hex: &str,
        codebook: Option<PyCodebook>,
    ) -> PyResult<Self> {
        let frame_mode = match mode {
            "low" => FrameMode::Low,
            "high" => FrameMode::High,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown mode {other:?}, expected 'low' or 'high'"
                )))
            }
        };
        let config = FrameConfig::for_mode(frame_mode);
        let quat = match codebook {
            Some(cb) => cb.inner,
            None => err(quatcode::codebook_search(
                8,
                config.codebook_size,
                2,
                &SearchOptions::default(),
            ))?,
        };
        let wcb = err(WaveformCodebook::with_normalized_peak(8000, 20, 1, quat, 0.9))?;
        let codec = err(FrameCodec::new(config, wcb))?;
        let session = err(CipherSession::from_hex(key_hex, nonce_hex))?;
        Ok(Self { codec, session })
    }

    #[getter]
    fn speech_bits_per_frame(&self) -> usize {
        self.codec.config().speech_bits
    }

    #[getter]
    fn frame_duration_secs(&self) -> f64 {
        self.codec.config().frame_duration_secs()
    }

    /// Encodes speech bits (zero-padded to whole frames) into audio samples.
    /// `silence_period` >= 2 replaces every S-th frame with silence.
    #[pyo3(signature = (speech_bits, counter_start=0, silence_period=0))]
    fn encode(
        &self,
        speech_bits: Vec<u8>,
        counter_start: u16,
        silence_period: usize,
    ) -> PyResult<Vec<f64>> {
        let per_frame = self.codec.config().speech_bits;
        let frame_count = speech_bits.len().div_ceil(per_frame).max(1);
        let mut frames = Vec::with_capacity(frame_count);
        for i in 0..frame_count {
            let mut chunk: Vec<u8> = speech_bits
                .iter()
                .copied()
                .skip(i * per_frame)
                .take(per_frame)
                .collect();
            chunk.resize(per_frame, 0);
            let frame = err(self.codec.encode_frame(
                &chunk,
                counter_start.wrapping_add(i as u16),
                &self.session,
            ))?;
            frames.push(err(self.codec.frame_to_samples(&frame))?);
        }
        if silence_period >= 2 {
            err(silence_schedule(&mut frames, silence_period))?;
        }
        Ok(frames.concat())
    }

    /// Synchronizes and decodes a sample stream. Returns one
    /// `(status, counter, speech_bits)` tuple per frame slot, with status
    /// in {"decoded", "lost", "concealed", "desync"}.
    fn decode(&self, samples: Vec<f64>) -> PyResult<Vec<(String, Option<u16>, Option<Vec<u8>>)>> {
        let est = CoreEstimate::identity(self.codec.codebook().params());
        let report = err(self.codec.decode_stream(&samples, &self.session, &est))?;
        Ok(report
            .frames
            .into_iter()
            .map(|f| match f {
                StreamFrame::Decoded(d) => {
                    ("decoded".to_string(), Some(d.counter), Some(d.speech_bits))
                }
                StreamFrame::Lost(_) => ("lost".to_string(), None, None),
                StreamFrame::Concealed => ("concealed".to_string(), None, None),
                StreamFrame::Desync => ("desync".to_string(), None, None),
            })
            .collect())
    }
}

/// CRC-8 (poly 0x07, init 0) over a bit sequence.
#[pyfunction]
fn crc8(bits: Vec<u8>) -> u8 {
    crc8_mod::crc8(&bits)
}

/// Mardia skewness and kurtosis of (re, im) distortion points.
#[pyfunction]
fn mardia(points: Vec<(f64, f64)>) -> PyResult<(f64, f64)> {
    let sample = err(stats::BivariateSample::new(
        points.iter().map(|&(a, b)| [a, b]).collect(),
    ))?;
    Ok((
        err(stats::mardia_skewness(&sample))?,
        err(stats::mardia_kurtosis(&sample))?,
    ))
}

/// SNR in dB between a reference and a received sample stream.
#[pyfunction]
fn snr_db(reference: Vec<f64>, received: Vec<f64>) -> PyResult<f64> {
    err(stats::snr_db(&reference, &received))
}

#[pymodule]
fn dovpy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCodebook>()?;
    m.add_class::<PyModem>()?;
    m.add_class::<PyEstimate>()?;
    m.add_class::<PyChannelModel>()?;
    m.add_class::<PyFrameSession>()?;
    m.add_function(wrap_pyfunction!(lee_distance, m)?)?;
    m.add_function(wrap_pyfunction!(crc8, m)?)?;
    m.add_function(wrap_pyfunction!(mardia, m)?)?;
    m.add_function(wrap_pyfunction!(snr_db, m)?)?;
    Ok(())
}
