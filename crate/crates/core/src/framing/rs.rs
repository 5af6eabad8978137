//! Shortened systematic Reed-Solomon codes over GF(64) with
//! errors-and-erasures decoding.
//!
//! The generator is rooted at consecutive powers of alpha starting at
//! alpha^1. Decoding runs Berlekamp-Massey initialized with the erasure
//! locator, then a Chien search and Forney's formula; it succeeds whenever
//! `2e + f <= n - k`. Beyond that bound it returns a failure value (or may
//! miscorrect to a different codeword, which the CRC layer catches).

use super::gf64::{alpha_pow, div, inv, mul, poly_eval, poly_mul, ORDER};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RsCode {
    n: usize,
    k: usize,
    /// Generator polynomial, ascending degree, degree n-k.
    generator: Vec<u8>,
}

impl RsCode {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n > ORDER || k == 0 || k >= n {
            return Err(Error::InvalidArgument(format!(
                "invalid RS parameters ({n},{k}); need 0 < k < n <= {ORDER}"
            )));
        }
        let mut generator = vec![1u8];
        for i in 1..=(n - k) {
            generator = poly_mul(&generator, &[alpha_pow(i), 1]);
        }
        Ok(Self { n, k, generator })
    }

    /// RS(28, 20): 8 redundancy symbols, used by the low (3G) mode.
    pub fn low_mode() -> Self {
        Self::new(28, 20).expect("valid parameters")
    }

    /// RS(40, 28): 12 redundancy symbols, used by the high (VoIP) mode.
    pub fn high_mode() -> Self {
        Self::new(40, 28).expect("valid parameters")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Correction budget `n - k` (erasures count once, errors twice).
    pub fn redundancy(&self) -> usize {
        self.n - self.k
    }

    /// Systematic encoding: the message appears verbatim, parity appended.
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.k {
            return Err(Error::InvalidArgument(format!(
                "message length {} != k = {}",
                message.len(),
                self.k
            )));
        }
        if message.iter().any(|&s| s as usize >= 64) {
            return Err(Error::InvalidArgument("symbol outside GF(64)".into()));
        }
        // Remainder of message(x) * x^(n-k) modulo the generator, computed
        // by synthetic division. Codeword coefficients are ordered from
        // x^(n-1) down to x^0, i.e. codeword[0] is the leading coefficient.
        let parity_len = self.n - self.k;
        let mut remainder = vec![0u8; parity_len];
        for &m in message {
            let feedback = m ^ remainder[0];
            remainder.rotate_left(1);
            remainder[parity_len - 1] = 0;
            if feedback != 0 {
                // generator is monic; fold feedback * (generator - x^(n-k)).
                for (i, slot) in remainder.iter_mut().enumerate() {
                    *slot ^= mul(feedback, self.generator[parity_len - 1 - i]);
                }
            }
        }
        let mut codeword = Vec::with_capacity(self.n);
        codeword.extend_from_slice(message);
        codeword.extend_from_slice(&remainder);
        Ok(codeword)
    }

    /// Syndromes `S_j = r(alpha^j)` for j = 1..=n-k, with `received[i]` the
    /// coefficient of `x^(n-1-i)`.
    fn syndromes(&self, received: &[u8]) -> Vec<u8> {
        (1..=self.n - self.k)
            .map(|j| {
                let x = alpha_pow(j);
                received.iter().fold(0u8, |acc, &r| mul(acc, x) ^ r)
            })
            .collect()
    }

    /// Errors-and-erasures decoding. `erasures` are received-word indices.
    /// Returns `Ok(None)` on detected decode failure.
    pub fn decode(&self, received: &[u8], erasures: &[usize]) -> Result<Option<Vec<u8>>> {
        if received.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "received length {} != n = {}",
                received.len(),
                self.n
            )));
        }
        if received.iter().any(|&s| s as usize >= 64) {
            return Err(Error::InvalidArgument("symbol outside GF(64)".into()));
        }
        let two_t = self.n - self.k;
        if erasures.len() > two_t {
            return Ok(None);
        }
        let mut seen = [false; ORDER];
        for &idx in erasures {
            if idx >= self.n {
                return Err(Error::InvalidArgument(format!(
                    "erasure position {idx} outside the codeword"
                )));
            }
            if seen[idx] {
                return Err(Error::InvalidArgument(format!(
                    "duplicate erasure position {idx}"
                )));
            }
            seen[idx] = true;
        }

        let syndromes = self.syndromes(received);
        if syndromes.iter().all(|&s| s == 0) {
            return Ok(Some(received[..self.k].to_vec()));
        }

        // Erasure locator: product of (1 - X_i x) with X_i = alpha^(n-1-idx).
        let mut locator = vec![1u8];
        for &idx in erasures {
            locator = poly_mul(&locator, &[1, alpha_pow(self.n - 1 - idx)]);
        }

        // Berlekamp-Massey seeded with the erasure locator, iterating over
        // the remaining 2t - f syndromes (length-comparison variant).
        let f = erasures.len();
        let mut lambda = locator.clone();
        let mut old = locator;
        for r in f..two_t {
            let mut delta = 0u8;
            for (j, &c) in lambda.iter().enumerate() {
                if j > r {
                    break;
                }
                delta ^= mul(c, syndromes[r - j]);
            }
            old.insert(0, 0); // old *= x
            if delta != 0 {
                if old.len() > lambda.len() {
                    let promoted: Vec<u8> = old.iter().map(|&c| mul(c, delta)).collect();
                    let inv_delta = inv(delta);
                    old = lambda.iter().map(|&c| mul(c, inv_delta)).collect();
                    lambda = promoted;
                }
                for (slot, &c) in lambda.iter_mut().zip(&old) {
                    *slot ^= mul(c, delta);
                }
            }
        }
        while lambda.last() == Some(&0) && lambda.len() > 1 {
            lambda.pop();
        }
        let degree = lambda.len() - 1;
        if degree > two_t {
            return Ok(None);
        }

        // Chien search over codeword positions.
        let mut positions = Vec::with_capacity(degree);
        for idx in 0..self.n {
            let x_inv = inv(alpha_pow(self.n - 1 - idx));
            if poly_eval(&lambda, x_inv) == 0 {
                positions.push(idx);
            }
        }
        if positions.len() != degree {
            return Ok(None);
        }

        // Error evaluator Omega = (S * lambda) mod x^(2t), with
        // S(x) = S_1 + S_2 x + ...
        let mut omega = poly_mul(&syndromes, &lambda);
        omega.truncate(two_t);

        // Forney: e = Omega(X^-1) / lambda'(X^-1); the formal derivative in
        // characteristic 2 keeps odd-degree terms only.
        let lambda_deriv: Vec<u8> = lambda
            .iter()
            .enumerate()
            .skip(1)
            .step_by(2)
            .map(|(_, &c)| c)
            .collect();
        // lambda'(x) = sum over odd i of lambda_i x^(i-1); re-expand with
        // the even gaps zeroed.
        let mut deriv = vec![0u8; lambda.len().saturating_sub(1).max(1)];
        for (j, &c) in lambda_deriv.iter().enumerate() {
            deriv[2 * j] = c;
        }

        let mut corrected = received.to_vec();
        for &idx in &positions {
            let x = alpha_pow(self.n - 1 - idx);
            let x_inv = inv(x);
            let denom = poly_eval(&deriv, x_inv);
            if denom == 0 {
                return Ok(None);
            }
            let magnitude = div(poly_eval(&omega, x_inv), denom);
            corrected[idx] ^= magnitude;
        }

        if self.syndromes(&corrected).iter().any(|&s| s != 0) {
            return Ok(None);
        }
        Ok(Some(corrected[..self.k].to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_message(rng: &mut ChaCha12Rng, k: usize) -> Vec<u8> {
        (0..k).map(|_| rng.random_range(0..64u8)).collect()
    }

    /// Corrupts `errors` random positions (to different values) and declares
    /// `erasures` of them... no: erasures are separate positions.
    fn corrupt(
        rng: &mut ChaCha12Rng,
        codeword: &mut [u8],
        errors: usize,
        erasures: usize,
    ) -> Vec<usize> {
        let n = codeword.len();
        let mut positions: Vec<usize> = (0..n).collect();
        // Fisher-Yates prefix shuffle.
        for i in 0..(errors + erasures) {
            let j = rng.random_range(i..n);
            positions.swap(i, j);
        }
        for &p in &positions[..errors + erasures] {
            let old = codeword[p];
            let mut new = rng.random_range(0..64u8);
            while new == old {
                new = rng.random_range(0..64u8);
            }
            codeword[p] = new;
        }
        positions[errors..errors + erasures].to_vec()
    }

    #[test]
    fn parameters() {
        assert_eq!(RsCode::low_mode().redundancy(), 8);
        assert_eq!(RsCode::high_mode().redundancy(), 12);
        assert!(RsCode::new(64, 20).is_err());
        assert!(RsCode::new(20, 20).is_err());
        assert!(RsCode::new(20, 0).is_err());
    }

    #[test]
    fn all_zero_message_encodes_to_all_zero() {
        let code = RsCode::low_mode();
        let cw = code.encode(&[0u8; 20]).unwrap();
        assert_eq!(cw, vec![0u8; 28]);
    }

    #[test]
    fn encoding_is_systematic_and_valid() {
        let code = RsCode::low_mode();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..20 {
            let msg = random_message(&mut rng, 20);
            let cw = code.encode(&msg).unwrap();
            assert_eq!(&cw[..20], &msg[..]);
            assert!(code.syndromes(&cw).iter().all(|&s| s == 0));
            assert_eq!(code.decode(&cw, &[]).unwrap(), Some(msg));
        }
    }

    #[test]
    fn encode_rejects_bad_input() {
        let code = RsCode::low_mode();
        assert!(code.encode(&[0u8; 19]).is_err());
        let mut msg = [0u8; 20];
        msg[3] = 64;
        assert!(code.encode(&msg).is_err());
    }

    #[test]
    fn corrects_four_errors_low_mode() {
        let code = RsCode::low_mode();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..500 {
            let msg = random_message(&mut rng, 20);
            let mut cw = code.encode(&msg).unwrap();
            corrupt(&mut rng, &mut cw, 4, 0);
            assert_eq!(code.decode(&cw, &[]).unwrap(), Some(msg.clone()));
        }
    }

    #[test]
    fn corrects_eight_erasures_low_mode() {
        let code = RsCode::low_mode();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..500 {
            let msg = random_message(&mut rng, 20);
            let mut cw = code.encode(&msg).unwrap();
            let erasures = corrupt(&mut rng, &mut cw, 0, 8);
            assert_eq!(code.decode(&cw, &erasures).unwrap(), Some(msg.clone()));
        }
    }

    #[test]
    fn full_bound_grid_both_modes() {
        // Every (e, f) with 2e + f <= n - k decodes exactly.
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for code in [RsCode::low_mode(), RsCode::high_mode()] {
            let budget = code.redundancy();
            for e in 0..=budget / 2 {
                for f in 0..=(budget - 2 * e) {
                    for _ in 0..25 {
                        let msg = random_message(&mut rng, code.k());
                        let mut cw = code.encode(&msg).unwrap();
                        let erasures = corrupt(&mut rng, &mut cw, e, f);
                        assert_eq!(
                            code.decode(&cw, &erasures).unwrap(),
                            Some(msg.clone()),
                            "(e={e}, f={f}) failed for n={}",
                            code.n()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn beyond_bound_never_returns_the_original() {
        // With more corrupted positions than the budget the decoder can fail
        // or miscorrect, but it can never return the true message: the
        // received word is further than t from the original codeword.
        let code = RsCode::low_mode();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut failures = 0;
        for _ in 0..500 {
            let msg = random_message(&mut rng, 20);
            let mut cw = code.encode(&msg).unwrap();
            corrupt(&mut rng, &mut cw, 9, 0);
            match code.decode(&cw, &[]).unwrap() {
                None => failures += 1,
                Some(decoded) => assert_ne!(decoded, msg, "claimed to recover 9 errors"),
            }
        }
        assert!(failures > 400, "most beyond-bound trials should fail cleanly");
    }

    #[test]
    fn erasure_position_validation() {
        let code = RsCode::low_mode();
        let cw = code.encode(&[7u8; 20]).unwrap();
        assert!(code.decode(&cw, &[28]).is_err());
        assert!(code.decode(&cw, &[3, 3]).is_err());
        assert!(code.decode(&cw[..27], &[]).is_err());
    }
}
