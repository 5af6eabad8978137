//! Quaternary codebooks with a certified minimum Lee distance.
//!
//! A DoV symbol assigns one of four phases to each of `K` harmonics, so a
//! symbol is a word over `Z4^K` and a codebook is a set of such words. The
//! greedy search implemented by [`codebook_search`] grows the codebook in
//! negation-closed pairs `{c, -c}`, always picking a candidate that maximizes
//! the minimum Lee distance of the expanded set, with ties broken towards a
//! uniform per-position phase histogram.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// Per-digit Lee weight of a difference `(a - b) mod 4`.
const LEE_WEIGHT: [u32; 4] = [0, 1, 2, 1];

/// A word over `Z4`: one phase index in `{0,1,2,3}` per harmonic.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QuaternaryWord {
    digits: Vec<u8>,
}

impl QuaternaryWord {
    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if let Some(&d) = digits.iter().find(|&&d| d > 3) {
            return Err(Error::InvalidArgument(format!(
                "quaternary digit out of range: {d}"
            )));
        }
        Ok(Self { digits })
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// The word of the negated waveform: every phase rotated by pi, i.e.
    /// `c -> (c + 2) mod 4` digit-wise. Synthesizing the antipodal word gives
    /// the sample-wise negation of the original symbol, which is what the
    /// even-index/sign demodulation shortcut exploits.
    pub fn antipodal(&self) -> Self {
        Self {
            digits: self.digits.iter().map(|&d| (d + 2) & 3).collect(),
        }
    }
}

impl std::fmt::Display for QuaternaryWord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Lee distance between two equal-length words:
/// `sum_k min(|a_k - b_k|, 4 - |a_k - b_k|)`.
pub fn lee_distance(a: &QuaternaryWord, b: &QuaternaryWord) -> Result<u32> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "word length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(lee_raw(a.digits(), b.digits()))
}

#[inline]
pub(crate) fn lee_raw(a: &[u8], b: &[u8]) -> u32 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| LEE_WEIGHT[((x.wrapping_sub(y)) & 3) as usize])
        .sum()
}

/// Per-position digit counts: `histogram[k][d]` is the number of words with
/// digit `d` at position `k`.
pub type PhaseHistogram = Vec<[u64; 4]>;

/// Chi-square statistic of a histogram against the uniform distribution
/// `M/4` per digit per position.
pub fn phase_histogram_chi_square(hist: &PhaseHistogram, words: u64) -> f64 {
    let expected = words as f64 / 4.0;
    hist.iter()
        .flat_map(|counts| counts.iter())
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// A set of distinct equal-length quaternary words together with the
/// exhaustively computed minimum pairwise Lee distance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuaternaryCodebook {
    words: Vec<QuaternaryWord>,
    n: usize,
    min_lee_distance: u32,
    seed: u64,
}

impl QuaternaryCodebook {
    /// Builds a codebook from explicit words. The minimum Lee distance is
    /// recomputed exhaustively here, never trusted from the caller.
    pub fn new(words: Vec<QuaternaryWord>, seed: u64) -> Result<Self> {
        if words.len() < 2 {
            return Err(Error::InvalidArgument(
                "a codebook needs at least 2 words".into(),
            ));
        }
        let n = words[0].len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty words".into()));
        }
        if words.iter().any(|w| w.len() != n) {
            return Err(Error::InvalidArgument("words of mixed length".into()));
        }
        let distinct: HashSet<&QuaternaryWord> = words.iter().collect();
        if distinct.len() != words.len() {
            return Err(Error::InvalidArgument("duplicate words".into()));
        }
        let min_lee_distance = exhaustive_min_distance(&words);
        Ok(Self {
            words,
            n,
            min_lee_distance,
            seed,
        })
    }

    /// The full code `Z4^n`, in lexicographic order. Useful as a candidate
    /// pool and as the no-redundancy baseline (its minimum distance is 1).
    /// Capped at `n <= 6` to keep the exhaustive distance check cheap.
    pub fn full(n: usize) -> Result<Self> {
        if n == 0 || n > 6 {
            return Err(Error::InvalidArgument(format!(
                "full codebook supported for 1 <= n <= 6, got {n}"
            )));
        }
        let m = 4usize.pow(n as u32);
        let words = (0..m)
            .map(|v| QuaternaryWord {
                digits: (0..n)
                    .rev()
                    .map(|k| ((v >> (2 * k)) & 3) as u8)
                    .collect(),
            })
            .collect();
        Self::new(words, 0)
    }

    pub fn words(&self) -> &[QuaternaryWord] {
        &self.words
    }

    pub fn word(&self, m: usize) -> &QuaternaryWord {
        &self.words[m]
    }

    /// Word length (= harmonic count K).
    pub fn word_len(&self) -> usize {
        self.n
    }

    /// Codebook size M.
    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn min_lee_distance(&self) -> u32 {
        self.min_lee_distance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// True when `words[2m+1]` is the antipode of `words[2m]` for every
    /// pair, so `waveform[2m+1] = -waveform[2m]`. Search output always
    /// satisfies this; hand-built codebooks generally do not.
    pub fn is_reflection_paired(&self) -> bool {
        self.words.len() % 2 == 0
            && self
                .words
                .chunks_exact(2)
                .all(|pair| pair[1] == pair[0].antipodal())
    }

    /// `histogram[k][d]` = number of words with digit `d` at position `k`.
    pub fn phase_histogram(&self) -> PhaseHistogram {
        let mut hist = vec![[0u64; 4]; self.n];
        for w in &self.words {
            for (k, &d) in w.digits().iter().enumerate() {
                hist[k][d as usize] += 1;
            }
        }
        hist
    }

    /// Serializes to the `DOVQ4 v1` text format.
    pub fn to_writer(&self, w: &mut impl Write) -> Result<()> {
        let mut out = String::new();
        writeln!(
            out,
            "DOVQ4 v1 n={} M={} d={} seed={}",
            self.n,
            self.words.len(),
            self.min_lee_distance,
            self.seed
        )
        .expect("string write");
        for word in &self.words {
            writeln!(out, "{word}").expect("string write");
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Parses the `DOVQ4 v1` text format. Any digit outside `{0,1,2,3}` is
    /// rejected. The recorded distance is verified against an exhaustive
    /// recomputation.
    pub fn from_reader(r: &mut impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedFile("empty codebook file".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "DOVQ4" || fields[1] != "v1" {
            return Err(Error::MalformedFile(format!(
                "bad codebook header: {header:?}"
            )));
        }
        let parse = |field: &str, key: &str| -> Result<u64> {
            field
                .strip_prefix(&format!("{key}="))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::MalformedFile(format!("bad field {field:?}")))
        };
        let n = parse(fields[2], "n")? as usize;
        let m = parse(fields[3], "M")? as usize;
        let d = parse(fields[4], "d")? as u32;
        let seed = parse(fields[5], "seed")?;
        let mut words = Vec::with_capacity(m);
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let digits: Result<Vec<u8>> = line
                .chars()
                .map(|c| match c {
                    '0'..='3' => Ok(c as u8 - b'0'),
                    other => Err(Error::MalformedFile(format!(
                        "invalid codebook digit {other:?}"
                    ))),
                })
                .collect();
            let word = QuaternaryWord::new(digits?)?;
            if word.len() != n {
                return Err(Error::MalformedFile(format!(
                    "word length {} does not match n={n}",
                    word.len()
                )));
            }
            words.push(word);
        }
        if words.len() != m {
            return Err(Error::MalformedFile(format!(
                "expected {m} words, found {}",
                words.len()
            )));
        }
        let cb = Self::new(words, seed)?;
        if cb.min_lee_distance != d {
            return Err(Error::MalformedFile(format!(
                "recorded distance {d} but recomputed {}",
                cb.min_lee_distance
            )));
        }
        Ok(cb)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.to_writer(&mut f)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_reader(&mut std::io::BufReader::new(f))
    }
}

/// Exhaustive minimum pairwise Lee distance.
pub fn min_lee_distance(cb: &QuaternaryCodebook) -> Result<u32> {
    if cb.size() < 2 {
        return Err(Error::InvalidArgument(
            "minimum distance needs at least 2 words".into(),
        ));
    }
    Ok(cb.min_lee_distance())
}

fn exhaustive_min_distance(words: &[QuaternaryWord]) -> u32 {
    let mut min = u32::MAX;
    for (i, a) in words.iter().enumerate() {
        for b in &words[i + 1..] {
            let d = lee_raw(a.digits(), b.digits());
            if d < min {
                min = d;
                if min == 0 {
                    return 0;
                }
            }
        }
    }
    min
}

/// Full enumeration is used up to this word length; beyond it a seeded
/// random pool of [`RANDOM_POOL_SIZE`] words is drawn instead.
pub const FULL_POOL_MAX_N: usize = 10;
pub const RANDOM_POOL_SIZE: usize = 1 << 20;

/// Knobs for [`codebook_search`]. `Default` gives the plain combinatorial
/// search over the full (or capped random) pool.
#[derive(Default)]
pub struct SearchOptions<'a> {
    /// Explicit candidate pool; defaults to all of `Z4^n` (capped, see
    /// [`FULL_POOL_MAX_N`]).
    pub pool: Option<&'a [QuaternaryWord]>,
    /// Peak-amplitude post-filter: among distance-maximal, histogram-optimal
    /// candidates, prefer the word whose synthesized waveform has the
    /// smallest peak sample magnitude. Disabled (pure-combinatorial) when
    /// `None`.
    pub peak_metric: Option<&'a dyn Fn(&QuaternaryWord) -> f64>,
}

/// Greedy search for `m` words of length `n` maximizing the minimum Lee
/// distance, deterministic for a given `(n, m, seed)`.
///
/// Words are inserted as antipodal pairs `{c, c+2}` (the second word
/// synthesizes to the negated waveform of the first, and the two are always
/// at the maximal Lee distance `2n` from each other). The first word is
/// drawn uniformly from the pool; each following pair maximizes the minimum
/// Lee distance to the selected set. Ties prefer the candidate whose
/// post-insertion phase histogram is closest to uniform (chi-square), then
/// the smallest peak waveform amplitude when enabled, then the
/// lexicographically smallest word.
pub fn codebook_search(
    n: usize,
    m: usize,
    seed: u64,
    options: &SearchOptions,
) -> Result<QuaternaryCodebook> {
    if n == 0 || n > 31 {
        return Err(Error::InvalidArgument(format!("word length {n} out of range")));
    }
    let space = 4u64.saturating_pow(n as u32);
    if m % 2 != 0 || m < 2 || m as u64 > space {
        return Err(Error::InvalidArgument(format!(
            "codebook size {m} must be even and within [2, 4^{n}]"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // Flattened pool digits, row-major.
    let pool: Vec<u8> = match options.pool {
        Some(words) => {
            if words.iter().any(|w| w.len() != n) {
                return Err(Error::InvalidArgument(
                    "pool word length does not match n".into(),
                ));
            }
            words.iter().flat_map(|w| w.digits().iter().copied()).collect()
        }
        None if n <= FULL_POOL_MAX_N => {
            let mut digits = vec![0u8; space as usize * n];
            for v in 0..space as usize {
                for k in 0..n {
                    digits[v * n + k] = ((v >> (2 * (n - 1 - k))) & 3) as u8;
                }
            }
            digits
        }
        None => {
            let mut seen = HashSet::with_capacity(RANDOM_POOL_SIZE);
            let mut digits = Vec::with_capacity(RANDOM_POOL_SIZE * n);
            let mut word = vec![0u8; n];
            while seen.len() < RANDOM_POOL_SIZE {
                for d in word.iter_mut() {
                    *d = rng.random_range(0..4u8);
                }
                if seen.insert(word.clone()) {
                    digits.extend_from_slice(&word);
                }
            }
            digits
        }
    };
    let pool_len = pool.len() / n;
    if pool_len == 0 {
        return Err(Error::ConstructionFailure { requested: m, got: 0 });
    }
    let word_at = |i: usize| &pool[i * n..(i + 1) * n];

    let mut dist_to_cb = vec![u32::MAX; pool_len];
    let mut hist = vec![[0u64; 4]; n];
    let mut selected: Vec<QuaternaryWord> = Vec::with_capacity(m);

    let insert_pair = |word: &[u8],
                       selected: &mut Vec<QuaternaryWord>,
                       hist: &mut Vec<[u64; 4]>,
                       dist_to_cb: &mut Vec<u32>| {
        let anti: Vec<u8> = word.iter().map(|&d| (d + 2) & 3).collect();
        for (k, (&d, &ad)) in word.iter().zip(&anti).enumerate() {
            hist[k][d as usize] += 1;
            hist[k][ad as usize] += 1;
        }
        for i in 0..pool_len {
            let cand = &pool[i * n..(i + 1) * n];
            let d = lee_raw(cand, word).min(lee_raw(cand, &anti));
            if d < dist_to_cb[i] {
                dist_to_cb[i] = d;
            }
        }
        selected.push(QuaternaryWord { digits: word.to_vec() });
        selected.push(QuaternaryWord { digits: anti });
    };

    // First pair: seeded uniform draw from the pool. Antipodal pairs are
    // always at distance 2n from each other, so any word is a sound anchor.
    let first = rng.random_range(0..pool_len);
    insert_pair(
        &pool[first * n..(first + 1) * n].to_vec(),
        &mut selected,
        &mut hist,
        &mut dist_to_cb,
    );

    for _ in 1..m / 2 {
        let best_score = (0..pool_len).map(|i| dist_to_cb[i]).max().unwrap_or(0);
        if best_score == 0 {
            return Err(Error::ConstructionFailure {
                requested: m,
                got: selected.len(),
            });
        }
        let tied: Vec<usize> = (0..pool_len)
            .filter(|&i| dist_to_cb[i] == best_score)
            .collect();

        // Chi-square tie-break, reduced form. Inserting the pair {c, c+2}
        // adds one count to bins d and d+2 at each position; in an
        // antipodally closed set those bins hold equal counts, so the
        // statistic changes by a candidate-independent constant plus
        // 4*hist[k][d] per position. Minimizing the count sum minimizes the
        // full chi-square; the equivalence is checked against the direct
        // statistic in tests.
        let chi_delta = |i: usize| -> u64 {
            word_at(i)
                .iter()
                .enumerate()
                .map(|(k, &d)| hist[k][d as usize])
                .sum()
        };
        let mut winners = Vec::new();
        let mut best_delta = u64::MAX;
        for &i in &tied {
            let delta = chi_delta(i);
            if delta < best_delta {
                best_delta = delta;
                winners.clear();
                winners.push(i);
            } else if delta == best_delta {
                winners.push(i);
            }
        }

        if let Some(metric) = options.peak_metric {
            let mut kept = Vec::new();
            let mut best_peak = f64::INFINITY;
            for &i in &winners {
                let word = QuaternaryWord {
                    digits: word_at(i).to_vec(),
                };
                let peak = metric(&word);
                if peak < best_peak {
                    best_peak = peak;
                    kept.clear();
                    kept.push(i);
                } else if peak == best_peak {
                    kept.push(i);
                }
            }
            winners = kept;
        }

        let chosen = *winners
            .iter()
            .min_by_key(|&&i| word_at(i))
            .expect("non-empty winner set");
        insert_pair(
            &pool[chosen * n..(chosen + 1) * n].to_vec(),
            &mut selected,
            &mut hist,
            &mut dist_to_cb,
        );
    }

    QuaternaryCodebook::new(selected, seed)
}
