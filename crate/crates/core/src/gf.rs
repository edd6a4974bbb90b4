//! Arithmetic over the binary extension fields GF(2^f), 1 <= f <= 16.
//!
//! A [`FieldSpec`] owns eagerly built log/exp tables for one field width.
//! Elements are plain integers ([`Symbol`]); callers pass the field context
//! explicitly to every operation. Addition is XOR in every binary extension
//! field. Multiplication goes through the tables, except for GF(2) where it
//! degenerates to logical AND and no tables are kept.
//!
//! Each width uses a fixed, well known primitive polynomial, so two
//! `FieldSpec`s with the same `f` are interchangeable.

use rand::Rng;
use thiserror::Error;

/// Field element. The value must stay below the field order `q = 2^f`;
/// operations debug-assert this rather than carrying a per-element tag.
pub type Symbol = u16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("unsupported field width f={0}, expected 1..=16")]
    UnsupportedWidth(u8),
    #[error("division by zero in GF(2^{0})")]
    DivisionByZero(u8),
    #[error("polynomial 0x{poly:x} is not primitive for f={f}")]
    NotPrimitive { f: u8, poly: u32 },
}

/// Primitive polynomials by width, including the leading x^f term.
/// Index 0 is unused. f=8 is the common 0x11D; the rest are the standard
/// minimum-weight choices found in coding theory tables.
const PRIMITIVE_POLY: [u32; 17] = [
    0,
    0x3,     // x + 1 (placeholder, GF(2) needs no reduction)
    0x7,     // x^2 + x + 1
    0xB,     // x^3 + x + 1
    0x13,    // x^4 + x + 1
    0x25,    // x^5 + x^2 + 1
    0x43,    // x^6 + x + 1
    0x89,    // x^7 + x^3 + 1
    0x11D,   // x^8 + x^4 + x^3 + x^2 + 1
    0x211,   // x^9 + x^4 + 1
    0x409,   // x^10 + x^3 + 1
    0x805,   // x^11 + x^2 + 1
    0x1053,  // x^12 + x^6 + x^4 + x + 1
    0x201B,  // x^13 + x^4 + x^3 + x + 1
    0x4443,  // x^14 + x^10 + x^6 + x + 1
    0x8003,  // x^15 + x + 1
    0x1100B, // x^16 + x^12 + x^3 + x + 1
];

/// One field context: width, order, reduction polynomial, lookup tables.
///
/// `exp` holds two mirrored cycles of alpha^i so products can index
/// `exp[log a + log b]` without a modulo. Both tables are empty for f=1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    f: u8,
    q: u32,
    poly: u32,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl FieldSpec {
    /// Builds the field context for GF(2^f), verifying that the generator
    /// alpha = x walks through every nonzero element before wrapping.
    pub fn new(f: u8) -> Result<FieldSpec, FieldError> {
        if f == 0 || f > 16 {
            return Err(FieldError::UnsupportedWidth(f));
        }
        let q: u32 = 1 << f;
        if f == 1 {
            return Ok(FieldSpec { f, q, poly: PRIMITIVE_POLY[1], exp: Vec::new(), log: Vec::new() });
        }
        let poly = PRIMITIVE_POLY[f as usize];
        let order = (q - 1) as usize;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; q as usize];
        let mut seen = vec![false; q as usize];
        let mut val: u32 = 1;
        for i in 0..order {
            if seen[val as usize] {
                return Err(FieldError::NotPrimitive { f, poly });
            }
            seen[val as usize] = true;
            exp[i] = val as u16;
            exp[i + order] = val as u16;
            log[val as usize] = i as u16;
            val <<= 1;
            if val & q != 0 {
                val ^= poly;
            }
        }
        if val != 1 {
            return Err(FieldError::NotPrimitive { f, poly });
        }
        Ok(FieldSpec { f, q, poly, exp, log })
    }

    #[inline]
    pub fn width(&self) -> u8 {
        self.f
    }

    /// Field order q = 2^f.
    #[inline]
    pub fn order(&self) -> u32 {
        self.q
    }

    #[inline]
    pub fn poly(&self) -> u32 {
        self.poly
    }

    /// Addition and subtraction coincide: carryless XOR.
    #[inline]
    pub fn add(&self, a: Symbol, b: Symbol) -> Symbol {
        debug_assert!((a as u32) < self.q && (b as u32) < self.q);
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: Symbol, b: Symbol) -> Symbol {
        debug_assert!((a as u32) < self.q && (b as u32) < self.q);
        if a == 0 || b == 0 {
            return 0;
        }
        if self.f == 1 {
            return a & b;
        }
        let idx = self.log[a as usize] as usize + self.log[b as usize] as usize;
        self.exp[idx]
    }

    /// Multiplicative inverse of a nonzero element.
    pub fn inv(&self, a: Symbol) -> Result<Symbol, FieldError> {
        debug_assert!((a as u32) < self.q);
        if a == 0 {
            return Err(FieldError::DivisionByZero(self.f));
        }
        if self.f == 1 {
            return Ok(1);
        }
        let order = (self.q - 1) as usize;
        Ok(self.exp[order - self.log[a as usize] as usize])
    }

    pub fn div(&self, a: Symbol, b: Symbol) -> Result<Symbol, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Uniform draw over all q elements.
    #[inline]
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Symbol {
        rng.gen_range(0..self.q) as Symbol
    }

    /// Uniform draw over the q-1 nonzero elements. In GF(2) this is
    /// always 1.
    #[inline]
    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Symbol {
        rng.gen_range(1..self.q) as Symbol
    }

    /// Whether payload bytes can be processed as whole symbols: the width
    /// must pack a byte exactly (1, 2, 4, 8) or span whole bytes (16).
    #[inline]
    pub fn byte_aligned(&self) -> bool {
        matches!(self.f, 1 | 2 | 4 | 8 | 16)
    }

    /// dst += c * src, symbol-wise over the field. Buffers carry packed
    /// symbols: one byte per symbol at f=8, 8/f symbols per byte below
    /// that (most significant lane first), big-endian byte pairs at f=16.
    ///
    /// Panics if the width is not byte aligned or the lengths differ;
    /// codec-level validation keeps both out of reach in normal use.
    pub fn addmul_bytes(&self, dst: &mut [u8], src: &[u8], c: Symbol) {
        assert!(self.byte_aligned(), "payload arithmetic needs byte-aligned f, got {}", self.f);
        assert_eq!(dst.len(), src.len());
        debug_assert!((c as u32) < self.q);
        if c == 0 {
            return;
        }
        match self.f {
            8 => {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d ^= self.mul(*s as Symbol, c) as u8;
                }
            }
            16 => {
                debug_assert!(src.len() % 2 == 0);
                for (d, s) in dst.chunks_exact_mut(2).zip(src.chunks_exact(2)) {
                    let sym = u16::from_be_bytes([s[0], s[1]]);
                    let prod = self.mul(sym, c);
                    let bytes = prod.to_be_bytes();
                    d[0] ^= bytes[0];
                    d[1] ^= bytes[1];
                }
            }
            1 => {
                // c is 1 here; the product is the source byte itself.
                for (d, s) in dst.iter_mut().zip(src) {
                    *d ^= s;
                }
            }
            f => {
                let f = f as u32;
                let mask = ((1u32 << f) - 1) as u16;
                let lanes = 8 / f;
                for (d, s) in dst.iter_mut().zip(src) {
                    let mut out = 0u8;
                    for lane in 0..lanes {
                        let shift = 8 - f * (lane + 1);
                        let sym = ((*s >> shift) as u16) & mask;
                        out |= (self.mul(sym, c) as u8) << shift;
                    }
                    *d ^= out;
                }
            }
        }
    }

    /// data *= c, symbol-wise. Same packing rules as [`Self::addmul_bytes`].
    pub fn scale_bytes(&self, data: &mut [u8], c: Symbol) {
        assert!(self.byte_aligned(), "payload arithmetic needs byte-aligned f, got {}", self.f);
        debug_assert!((c as u32) < self.q);
        if c == 1 {
            return;
        }
        if c == 0 {
            data.fill(0);
            return;
        }
        match self.f {
            8 => {
                for d in data.iter_mut() {
                    *d = self.mul(*d as Symbol, c) as u8;
                }
            }
            16 => {
                debug_assert!(data.len() % 2 == 0);
                for d in data.chunks_exact_mut(2) {
                    let sym = u16::from_be_bytes([d[0], d[1]]);
                    let bytes = self.mul(sym, c).to_be_bytes();
                    d[0] = bytes[0];
                    d[1] = bytes[1];
                }
            }
            f => {
                let f = f as u32;
                let mask = ((1u32 << f) - 1) as u16;
                let lanes = 8 / f;
                for d in data.iter_mut() {
                    let mut out = 0u8;
                    for lane in 0..lanes {
                        let shift = 8 - f * (lane + 1);
                        let sym = ((*d >> shift) as u16) & mask;
                        out |= (self.mul(sym, c) as u8) << shift;
                    }
                    *d = out;
                }
            }
        }
    }
}
