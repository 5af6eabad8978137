//! GF(64) arithmetic for 6-bit Reed-Solomon symbols.
//!
//! Field constructed with the primitive polynomial x^6 + x + 1; alpha = x.

pub(crate) const FIELD: usize = 64;
pub(crate) const ORDER: usize = 63;
const PRIM_POLY: u16 = 0b100_0011;

pub(crate) struct Tables {
    /// alpha^i for i in 0..126 (doubled to skip a modulo).
    pub exp: [u8; 2 * ORDER],
    /// log_alpha(v) for v in 1..64; log[0] is unused.
    pub log: [u8; FIELD],
}

const fn build_tables() -> Tables {
    let mut exp = [0u8; 2 * ORDER];
    let mut log = [0u8; FIELD];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < ORDER {
        exp[i] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0b100_0000 != 0 {
            x ^= PRIM_POLY;
        }
        i += 1;
    }
    let mut j = ORDER;
    while j < 2 * ORDER {
        exp[j] = exp[j - ORDER];
        j += 1;
    }
    Tables { exp, log }
}

pub(crate) static TABLES: Tables = build_tables();

#[inline]
pub(crate) fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    TABLES.exp[TABLES.log[a as usize] as usize + TABLES.log[b as usize] as usize]
}

#[inline]
pub(crate) fn inv(a: u8) -> u8 {
    debug_assert!(a != 0, "zero has no inverse");
    TABLES.exp[ORDER - TABLES.log[a as usize] as usize]
}

#[inline]
pub(crate) fn div(a: u8, b: u8) -> u8 {
    if a == 0 {
        return 0;
    }
    mul(a, inv(b))
}

/// alpha^power for any non-negative power.
#[inline]
pub(crate) fn alpha_pow(power: usize) -> u8 {
    TABLES.exp[power % ORDER]
}

/// Evaluates a polynomial (coefficients in ascending degree order) at x.
pub(crate) fn poly_eval(poly: &[u8], x: u8) -> u8 {
    let mut acc = 0u8;
    for &c in poly.iter().rev() {
        acc = mul(acc, x) ^ c;
    }
    acc
}

/// Product of two polynomials in ascending degree order.
pub(crate) fn poly_mul(a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] ^= mul(x, y);
        }
    }
    out
}
