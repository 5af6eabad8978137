//! Monte Carlo symbol-error-rate sweeps over codebook sizes.
//!
//! Reproduces the staircase shape of SER against codebook size: the error
//! rate tracks the certified minimum Lee distance of each codebook, so it
//! jumps whenever the distance drops.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::channelsim::{apply_parametric, ParametricChannelModel};
use crate::error::{Error, Result};
use crate::modem::{
    demodulate_corrected, estimate_channel, psk_sequence, PskSequence, SymbolParams,
    WaveformCodebook,
};
use crate::quatcode::{codebook_search, SearchOptions};
use crate::stats::derive_seed;

/// One operating point of a SER sweep.
#[derive(Clone, Debug)]
pub struct SerSweepPoint {
    pub codebook_size: usize,
    pub min_lee_distance: u32,
    pub codebook_seed: u64,
    pub trials: usize,
    pub symbol_errors: usize,
    pub ser: f64,
}

/// Number of training symbols used to estimate the channel before each
/// measurement run (2 seconds at 400 baud).
pub const SWEEP_TRAINING_SYMBOLS: usize = 800;

/// Runs `trials` random symbols of each codebook size through the channel
/// model and counts corrected-demodulation errors. Codebooks are searched
/// fresh (word length `n`, seeds derived from `seed`), the channel is
/// estimated from a seeded training run, and every stage is deterministic
/// given `seed`.
pub fn ser_sweep(
    n: usize,
    sizes: &[usize],
    model: &ParametricChannelModel,
    trials: usize,
    seed: u64,
) -> Result<Vec<SerSweepPoint>> {
    if sizes.is_empty() || trials == 0 {
        return Err(Error::InvalidArgument("empty sweep".into()));
    }
    let params = SymbolParams::new(8000, 20, n, 1, 1.0)?;
    model.validate(n)?;

    let mut points = Vec::with_capacity(sizes.len());
    for (si, &m) in sizes.iter().enumerate() {
        let codebook_seed = derive_seed(seed, si as u64);
        let quat = codebook_search(n, m, codebook_seed, &SearchOptions::default())?;
        let min_lee_distance = quat.min_lee_distance();
        let wcb = WaveformCodebook::new(params, quat)?;

        // Training pass.
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 1000 + si as u64));
        let train_words: Vec<_> = (0..SWEEP_TRAINING_SYMBOLS)
            .map(|_| wcb.quat().word(rng.random_range(0..m)).clone())
            .collect();
        let train_clean: Vec<PskSequence> = train_words
            .iter()
            .map(|w| psk_sequence(w, params.amplitude))
            .collect();
        let train_rx = apply_parametric(&train_clean, model, derive_seed(seed, 2000 + si as u64))?;
        let est = estimate_channel(&train_rx, &train_words, &params)?;

        // Measurement pass.
        let indices: Vec<usize> = (0..trials).map(|_| rng.random_range(0..m)).collect();
        let clean: Vec<PskSequence> = indices
            .iter()
            .map(|&i| psk_sequence(wcb.quat().word(i), params.amplitude))
            .collect();
        let received = apply_parametric(&clean, model, derive_seed(seed, 3000 + si as u64))?;
        let mut symbol_errors = 0usize;
        for (psk, &sent) in received.iter().zip(&indices) {
            let (decoded, _) = demodulate_corrected(psk, &wcb, &est)?;
            if decoded != sent {
                symbol_errors += 1;
            }
        }
        points.push(SerSweepPoint {
            codebook_size: m,
            min_lee_distance,
            codebook_seed,
            trials,
            symbol_errors,
            ser: symbol_errors as f64 / trials as f64,
        });
    }
    Ok(points)
}
