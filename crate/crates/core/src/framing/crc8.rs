//! CRC-8 over bit sequences: polynomial x^8 + x^2 + x + 1 (0x07), zero
//! initial value, no reflection, no final xor.

/// Bits are processed in the order given (MSB-first within any byte-derived
/// sequence). Empty input returns 0x00.
pub fn crc8(bits: &[u8]) -> u8 {
    let mut crc = 0u8;
    for &bit in bits {
        let feedback = (crc >> 7) ^ (bit & 1);
        crc <<= 1;
        if feedback == 1 {
            crc ^= 0x07;
        }
    }
    crc
}

/// Unpacks bytes into bits, MSB first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

/// Packs bits (MSB first) into bytes; the tail is zero-padded.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i)))
        })
        .collect()
}
