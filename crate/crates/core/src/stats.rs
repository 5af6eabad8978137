//! Distortion and performance statistics.
//!
//! Mardia's multivariate skewness and kurtosis check Gaussianity of the
//! per-harmonic distortion (a bivariate normal scores 0 and p(p+2) = 8),
//! correlation reports check the memoryless/independent findings, and the
//! standard-error harness measures channel-estimator convergence against
//! training duration.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::channelsim::{apply_parametric, ParametricChannelModel};
use crate::error::{Error, Result};
use crate::modem::{estimate_channel, psk_sequence, PskSequence, SymbolParams};
use crate::quatcode::QuaternaryCodebook;

/// SNR reported for identical signals (and cap for near-identical ones).
pub const SNR_CAP_DB: f64 = 200.0;

/// A bivariate sample of distortion values (real, imaginary).
#[derive(Clone, Debug)]
pub struct BivariateSample {
    points: Vec<[f64; 2]>,
}

impl BivariateSample {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidArgument(
                "moment statistics need at least 3 points".into(),
            ));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample point".into()));
        }
        Ok(Self { points })
    }

    pub fn from_complex(values: &[Complex64]) -> Result<Self> {
        Self::new(values.iter().map(|z| [z.re, z.im]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Whitens the sample: subtract the mean and apply the inverse Cholesky
    /// factor of the 1/n sample covariance, so that `y_k . y_l` equals the
    /// Mahalanobis form in Mardia's statistics.
    fn whitened(&self) -> Result<Vec<[f64; 2]>> {
        let n = self.points.len() as f64;
        let mean = self
            .points
            .iter()
            .fold([0.0; 2], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
        let mean = [mean[0] / n, mean[1] / n];
        let mut s = [0.0f64; 3]; // s11, s12, s22
        for p in &self.points {
            let d = [p[0] - mean[0], p[1] - mean[1]];
            s[0] += d[0] * d[0];
            s[1] += d[0] * d[1];
            s[2] += d[1] * d[1];
        }
        // Classical 1/n divisor, per Mardia's definition.
        let (s11, s12, s22) = (s[0] / n, s[1] / n, s[2] / n);
        let scale = s11.abs().max(s22.abs());
        if scale <= 0.0 {
            return Err(Error::DegenerateSample("zero covariance".into()));
        }
        let det = s11 * s22 - s12 * s12;
        if det <= 1e-12 * scale * scale {
            return Err(Error::DegenerateSample(format!(
                "sample covariance nearly singular (det {det:.3e})"
            )));
        }
        let l11 = s11.sqrt();
        let l21 = s12 / l11;
        let l22 = (s22 - l21 * l21).sqrt();
        Ok(self
            .points
            .iter()
            .map(|p| {
                let d = [p[0] - mean[0], p[1] - mean[1]];
                let a = d[0] / l11;
                let b = (d[1] - l21 * a) / l22;
                [a, b]
            })
            .collect())
    }
}

/// Mardia's multivariate skewness,
/// `(1/n^2) sum_k sum_l [(x_k - mean)' S^-1 (x_l - mean)]^3`.
///
/// Evaluated in O(n) through the whitened moments: with y = whitened x,
/// `sum_kl (y_k . y_l)^3` expands into squares of the third-order moment
/// sums `(sum a^3)^2 + 3 (sum a^2 b)^2 + 3 (sum a b^2)^2 + (sum b^3)^2`.
/// The tests check this against the literal double sum.
pub fn mardia_skewness(sample: &BivariateSample) -> Result<f64> {
    let y = sample.whitened()?;
    let n = y.len() as f64;
    let (mut a3, mut a2b, mut ab2, mut b3) = (0.0, 0.0, 0.0, 0.0);
    for p in &y {
        let (a, b) = (p[0], p[1]);
        a3 += a * a * a;
        a2b += a * a * b;
        ab2 += a * b * b;
        b3 += b * b * b;
    }
    Ok((a3 * a3 + 3.0 * a2b * a2b + 3.0 * ab2 * ab2 + b3 * b3) / (n * n))
}

/// Mardia's multivariate kurtosis,
/// `(1/n) sum_k [(x_k - mean)' S^-1 (x_k - mean)]^2`; 8 for bivariate normal.
pub fn mardia_kurtosis(sample: &BivariateSample) -> Result<f64> {
    let y = sample.whitened()?;
    let n = y.len() as f64;
    Ok(y.iter()
        .map(|p| {
            let q = p[0] * p[0] + p[1] * p[1];
            q * q
        })
        .sum::<f64>()
        / n)
}

/// `10*log10(sum ref^2 / sum (received - ref)^2)`, capped at [`SNR_CAP_DB`].
pub fn snr_db(reference: &[f64], received: &[f64]) -> Result<f64> {
    if reference.len() != received.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            reference.len(),
            received.len()
        )));
    }
    let signal: f64 = reference.iter().map(|s| s * s).sum();
    if signal == 0.0 {
        return Err(Error::InvalidArgument("all-zero reference".into()));
    }
    let noise: f64 = reference
        .iter()
        .zip(received)
        .map(|(r, x)| (x - r) * (x - r))
        .sum();
    if noise == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / noise).log10()).min(SNR_CAP_DB))
}

/// Inter-harmonic and lag-1 time correlations of a PSK distortion stream.
/// Complex values enter as concatenated real/imaginary parts; degenerate
/// (zero-variance) entries are reported as NaN.
#[derive(Clone, Debug)]
pub struct CorrelationReport {
    /// `inter_harmonic[i][j]`: Pearson correlation between harmonics i and j.
    pub inter_harmonic: Vec<Vec<f64>>,
    /// Lag-1 autocorrelation per harmonic.
    pub lag1: Vec<f64>,
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return f64::NAN;
    }
    (cov / (vx * vy).sqrt()).clamp(-1.0, 1.0)
}

pub fn correlation_report(stream: &[PskSequence]) -> Result<CorrelationReport> {
    if stream.len() < 100 {
        return Err(Error::InvalidArgument(
            "correlation report needs at least 100 symbols".into(),
        ));
    }
    let k = stream[0].len();
    if k == 0 || stream.iter().any(|p| p.len() != k) {
        return Err(Error::InvalidArgument("inconsistent harmonic count".into()));
    }
    let l = stream.len();
    // Column per harmonic: real parts then imaginary parts.
    let columns: Vec<Vec<f64>> = (0..k)
        .map(|h| {
            let mut col = Vec::with_capacity(2 * l);
            col.extend(stream.iter().map(|p| p.values[h].re));
            col.extend(stream.iter().map(|p| p.values[h].im));
            col
        })
        .collect();

    let inter_harmonic: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| pearson(&columns[i], &columns[j])).collect())
        .collect();

    let lag1 = (0..k)
        .map(|h| {
            let mut now = Vec::with_capacity(2 * (l - 1));
            let mut next = Vec::with_capacity(2 * (l - 1));
            now.extend(stream[..l - 1].iter().map(|p| p.values[h].re));
            next.extend(stream[1..].iter().map(|p| p.values[h].re));
            now.extend(stream[..l - 1].iter().map(|p| p.values[h].im));
            next.extend(stream[1..].iter().map(|p| p.values[h].im));
            pearson(&now, &next)
        })
        .collect();

    Ok(CorrelationReport { inter_harmonic, lag1 })
}

/// Exact error ratios between aligned sent/received symbol index sequences.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorCounts {
    pub symbols: usize,
    pub symbol_errors: usize,
    pub bits: usize,
    pub bit_errors: usize,
    pub frames: usize,
    pub frame_errors: usize,
}

impl ErrorCounts {
    pub fn ser(&self) -> f64 {
        if self.symbols == 0 {
            0.0
        } else {
            self.symbol_errors as f64 / self.symbols as f64
        }
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    pub fn fer(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.frame_errors as f64 / self.frames as f64
        }
    }
}

/// Counts symbol, bit and frame errors. Bits map MSB-first with
/// `bits_per_symbol` per index; frames are consecutive chunks of
/// `symbols_per_frame` (a trailing partial chunk counts as a frame).
pub fn error_counters(
    sent: &[usize],
    received: &[usize],
    bits_per_symbol: usize,
    symbols_per_frame: usize,
) -> Result<ErrorCounts> {
    if sent.len() != received.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} vs {}",
            sent.len(),
            received.len()
        )));
    }
    if bits_per_symbol == 0 || symbols_per_frame == 0 {
        return Err(Error::InvalidArgument(
            "bits per symbol and symbols per frame must be positive".into(),
        ));
    }
    let mut counts = ErrorCounts {
        symbols: sent.len(),
        bits: sent.len() * bits_per_symbol,
        ..Default::default()
    };
    for (chunk_s, chunk_r) in sent
        .chunks(symbols_per_frame)
        .zip(received.chunks(symbols_per_frame))
    {
        counts.frames += 1;
        let mut frame_bad = false;
        for (&s, &r) in chunk_s.iter().zip(chunk_r) {
            if s != r {
                counts.symbol_errors += 1;
                frame_bad = true;
                counts.bit_errors += ((s ^ r) & ((1 << bits_per_symbol) - 1)).count_ones() as usize;
            }
        }
        if frame_bad {
            counts.frame_errors += 1;
        }
    }
    Ok(counts)
}

/// Standard-error curves of the channel estimators against training
/// duration, max over harmonics, from Monte Carlo runs against reference
/// values taken from one long run.
#[derive(Clone, Debug)]
pub struct SeCurves {
    pub durations_secs: Vec<f64>,
    /// `max_k sqrt( (1/L) sum_l (phase_kl(t) - ref_phase_k)^2 )`
    pub phase_se: Vec<f64>,
    /// `max_k sqrt( (1/L) sum_l (var_kl(t) - ref_var_k)^2 / ref_var_k )`
    pub variance_se: Vec<f64>,
    pub reference_symbols: usize,
    pub mc_runs: usize,
    pub seed: u64,
}

/// Deterministic per-(seed, stream) sub-seed, splitmix64-style.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn estimator_standard_error(
    model: &ParametricChannelModel,
    params: &SymbolParams,
    codebook: &QuaternaryCodebook,
    durations_secs: &[f64],
    mc_runs: usize,
    reference_symbols: usize,
    seed: u64,
) -> Result<SeCurves> {
    if durations_secs.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument("durations must be positive".into()));
    }
    if mc_runs < 100 {
        return Err(Error::InvalidArgument("need at least 100 Monte Carlo runs".into()));
    }
    if reference_symbols < 2 {
        return Err(Error::InvalidArgument("reference run too short".into()));
    }
    model.validate(params.harmonics)?;
    if codebook.word_len() != params.harmonics {
        return Err(Error::InvalidArgument(
            "codebook word length does not match K".into(),
        ));
    }

    let k = params.harmonics;
    let baud = params.baud();

    let run_estimate = |symbols: usize, channel_seed: u64, word_seed: u64| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rng = ChaCha12Rng::seed_from_u64(word_seed);
        let words: Vec<_> = (0..symbols)
            .map(|_| codebook.word(rng.random_range(0..codebook.size())).clone())
            .collect();
        let clean: Vec<PskSequence> = words
            .iter()
            .map(|w| psk_sequence(w, params.amplitude))
            .collect();
        let received = apply_parametric(&clean, model, channel_seed)?;
        let est = estimate_channel(&received, &words, params)?;
        Ok((est.phase_shift, est.variance))
    };

    let (ref_phase, ref_var) = run_estimate(
        reference_symbols,
        derive_seed(seed, 0),
        derive_seed(seed, 1),
    )?;

    let mut phase_se = Vec::with_capacity(durations_secs.len());
    let mut variance_se = Vec::with_capacity(durations_secs.len());
    for (ti, &t) in durations_secs.iter().enumerate() {
        let symbols = ((t * baud).round() as usize).max(2);
        let mut phase_sq = vec![0.0f64; k];
        let mut var_sq = vec![0.0f64; k];
        for run in 0..mc_runs {
            let stream = 2 + (ti * mc_runs + run) as u64;
            let (phase, var) = run_estimate(
                symbols,
                derive_seed(seed, 2 * stream),
                derive_seed(seed, 2 * stream + 1),
            )?;
            for h in 0..k {
                let dp = phase[h] - ref_phase[h];
                phase_sq[h] += dp * dp;
                let dv = var[h] - ref_var[h];
                var_sq[h] += dv * dv / ref_var[h];
            }
        }
        let l = mc_runs as f64;
        phase_se.push(
            phase_sq
                .iter()
                .map(|&s| (s / l).sqrt())
                .fold(0.0f64, f64::max),
        );
        variance_se.push(
            var_sq
                .iter()
                .map(|&s| (s / l).sqrt())
                .fold(0.0f64, f64::max),
        );
    }

    Ok(SeCurves {
        durations_secs: durations_secs.to_vec(),
        phase_se,
        variance_se,
        reference_symbols,
        mc_runs,
        seed,
    })
}

/// Least-squares fit of `se(t) = c / sqrt(t)`; returns `(c, r_squared)`.
pub fn fit_inverse_sqrt(durations: &[f64], se: &[f64]) -> (f64, f64) {
    let num: f64 = durations
        .iter()
        .zip(se)
        .map(|(&t, &s)| s / t.sqrt())
        .sum();
    let den: f64 = durations.iter().map(|&t| 1.0 / t).sum();
    let c = num / den;
    let mean = se.iter().sum::<f64>() / se.len() as f64;
    let ss_tot: f64 = se.iter().map(|&s| (s - mean) * (s - mean)).sum();
    let ss_res: f64 = durations
        .iter()
        .zip(se)
        .map(|(&t, &s)| {
            let f = c / t.sqrt();
            (s - f) * (s - f)
        })
        .sum();
    if ss_tot == 0.0 {
        (c, 1.0)
    } else {
        (c, 1.0 - ss_res / ss_tot)
    }
}
