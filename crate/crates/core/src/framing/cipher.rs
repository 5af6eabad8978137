//! AES-256 counter-mode enciphering of frame payloads.
//!
//! The 128-bit counter block is `nonce (104 bits) || frame counter
//! (16 bits, big-endian) || block index (8 bits)`, so any frame is
//! decryptable knowing only the key, the session nonce and its own counter.

use aes::cipher::{BlockCipherEncrypt, KeyInit};
use aes::Aes256;

use crate::error::{Error, Result};

pub const KEY_BYTES: usize = 32;
pub const NONCE_BYTES: usize = 13;

pub struct CipherSession {
    cipher: Aes256,
    nonce: [u8; NONCE_BYTES],
}

impl CipherSession {
    pub fn new(key: &[u8; KEY_BYTES], nonce: &[u8; NONCE_BYTES]) -> Self {
        Self {
            cipher: Aes256::new(key.into()),
            nonce: *nonce,
        }
    }

    pub fn from_hex(key_hex: &str, nonce_hex: &str) -> Result<Self> {
        let parse = |s: &str, len: usize, what: &str| -> Result<Vec<u8>> {
            if s.len() != 2 * len || !s.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(Error::InvalidArgument(format!(
                    "{what} must be {} hex digits",
                    2 * len
                )));
            }
            Ok((0..len)
                .map(|i| u8::from_str_radix(&s[2 * i..2 * i + 2], 16).expect("checked hex"))
                .collect())
        };
        let key = parse(key_hex, KEY_BYTES, "key")?;
        let nonce = parse(nonce_hex, NONCE_BYTES, "nonce")?;
        Ok(Self::new(
            key.as_slice().try_into().expect("checked length"),
            nonce.as_slice().try_into().expect("checked length"),
        ))
    }

    /// One 128-bit keystream block for (frame counter, block index).
    pub fn keystream_block(&self, counter: u16, block_index: u8) -> [u8; 16] {
        let mut block = [0u8; 16];
        block[..NONCE_BYTES].copy_from_slice(&self.nonce);
        block[NONCE_BYTES..NONCE_BYTES + 2].copy_from_slice(&counter.to_be_bytes());
        block[15] = block_index;
        self.cipher.encrypt_block((&mut block).into());
        block
    }

    /// XORs the keystream onto a bit sequence (MSB-first within keystream
    /// bytes). Applying it twice with the same counter is the identity, so
    /// this is both `encrypt_frame` and `decrypt_frame`.
    pub fn apply(&self, bits: &[u8], counter: u16) -> Vec<u8> {
        let mut out = Vec::with_capacity(bits.len());
        let mut block = [0u8; 16];
        for (i, &bit) in bits.iter().enumerate() {
            if i % 128 == 0 {
                block = self.keystream_block(counter, (i / 128) as u8);
            }
            let ks_bit = (block[(i % 128) / 8] >> (7 - (i % 8))) & 1;
            out.push((bit & 1) ^ ks_bit);
        }
        out
    }
}

/// Enciphers plaintext speech bits for one frame.
pub fn encrypt_frame(speech_bits: &[u8], counter: u16, session: &CipherSession) -> Vec<u8> {
    session.apply(speech_bits, counter)
}

/// Deciphers one frame's speech bits.
pub fn decrypt_frame(cipher_bits: &[u8], counter: u16, session: &CipherSession) -> Vec<u8> {
    session.apply(cipher_bits, counter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn session() -> CipherSession {
        CipherSession::new(&[0x42; KEY_BYTES], &[0x17; NONCE_BYTES])
    }

    #[test]
    fn aes256_known_answer() {
        // FIPS-197 appendix C.3: key 000102...1f, plaintext 00112233...ff.
        let key: [u8; 32] = std::array::from_fn(|i| i as u8);
        let cipher = Aes256::new((&key).into());
        let mut block: [u8; 16] = std::array::from_fn(|i| (i as u8) * 0x11);
        cipher.encrypt_block((&mut block).into());
        assert_eq!(
            block,
            [
                0x8e, 0xa2, 0xb7, 0xca, 0x51, 0x67, 0x45, 0xbf, 0xea, 0xfc, 0x49, 0x90, 0x4b,
                0x49, 0x60, 0x89
            ]
        );
    }

    #[test]
    fn round_trip_random_payloads() {
        let s = session();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let bits: Vec<u8> = (0..144).map(|_| rng.random_range(0..2u8)).collect();
            let counter = rng.random_range(0..=u16::MAX);
            let enc = encrypt_frame(&bits, counter, &s);
            assert_ne!(enc, bits, "keystream should not be all zero");
            assert_eq!(decrypt_frame(&enc, counter, &s), bits);
        }
    }

    #[test]
    fn keystream_depends_on_counter_and_block() {
        let s = session();
        assert_eq!(s.keystream_block(7, 0), s.keystream_block(7, 0));
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let a = rng.random_range(0..=u16::MAX);
            let b = rng.random_range(0..=u16::MAX);
            if a != b {
                assert_ne!(s.keystream_block(a, 0), s.keystream_block(b, 0));
            }
        }
        assert_ne!(s.keystream_block(7, 0), s.keystream_block(7, 1));
    }

    #[test]
    fn frames_decrypt_independently() {
        // Decrypting frame i needs only (key, nonce, counter), not other
        // frames: decrypt out of order.
        let s = session();
        let bits_a: Vec<u8> = (0..96).map(|i| (i % 2) as u8).collect();
        let bits_b: Vec<u8> = (0..96).map(|i| ((i / 3) % 2) as u8).collect();
        let enc_a = encrypt_frame(&bits_a, 100, &s);
        let enc_b = encrypt_frame(&bits_b, 101, &s);
        assert_eq!(decrypt_frame(&enc_b, 101, &s), bits_b);
        assert_eq!(decrypt_frame(&enc_a, 100, &s), bits_a);
    }

    #[test]
    fn hex_parsing() {
        let key = "00".repeat(32);
        let nonce = "ab".repeat(13);
        assert!(CipherSession::from_hex(&key, &nonce).is_ok());
        assert!(CipherSession::from_hex(&key[..62], &nonce).is_err());
        assert!(CipherSession::from_hex(&key, "zz".repeat(13).as_str()).is_err());
    }
}
