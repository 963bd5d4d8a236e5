//! Most-significant-bit-first bit packing.

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    pub fn write_bit(&mut self, bit: bool) {
        if self.bits.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> (self.bits % 8);
        }
        self.bits += 1;
    }

    /// Writes the low `width` bits of `value`, high bit first.
    pub fn write_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64 && (width == 64 || value >> width == 0));
        for k in (0..width).rev() {
            self.write_bit(value >> k & 1 == 1);
        }
    }

    /// Returns the bytes, zero-padded to a byte boundary.
    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
    end: u64,
}

impl<'a> BitReader<'a> {
    /// Reads the first `bit_len` bits of `bytes`.
    pub fn new(bytes: &'a [u8], bit_len: u64) -> Result<Self> {
        if bit_len > bytes.len() as u64 * 8 {
            return Err(Error::Corrupt {
                bit_offset: bytes.len() as u64 * 8,
                reason: format!("payload holds {} bits, {bit_len} expected", bytes.len() as u64 * 8),
            });
        }
        Ok(BitReader { bytes, pos: 0, end: bit_len })
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn seek(&mut self, pos: u64) {
        self.pos = pos;
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.end {
            return Err(Error::Corrupt { bit_offset: self.pos, reason: "payload ends early".into() });
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            v = v << 1 | self.read_bit()? as u64;
        }
        Ok(v)
    }
}

/// Bits needed to write any value below `n`, i.e. `ceil(log2 n)`; 0 for n <= 1.
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn msb_first_layout() {
        let mut w = BitWriter::new();
        w.write_bit(true);
        w.write_bits(0b0101, 4);
        assert_eq!(w.bit_len(), 5);
        assert_eq!(w.into_bytes(), vec![0b1010_1000]);
    }

    #[test]
    fn log2_values() {
        assert_eq!([1, 2, 3, 4, 5, 256, 257].map(ceil_log2), [0, 1, 2, 2, 3, 8, 9]);
    }

    #[test]
    fn reading_past_end_reports_offset() {
        let mut r = BitReader::new(&[0xff], 3).unwrap();
        assert_eq!(r.read_bits(3).unwrap(), 7);
        assert!(matches!(r.read_bit(), Err(Error::Corrupt { bit_offset: 3, .. })));
        assert!(BitReader::new(&[0], 9).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(values in proptest::collection::vec((any::<u64>(), 0u32..=64), 0..50)) {
            let mut w = BitWriter::new();
            let vals: Vec<(u64, u32)> = values
                .into_iter()
                .map(|(v, k)| (if k == 64 { v } else { v & ((1u64 << k) - 1) }, k))
                .collect();
            for &(v, k) in &vals {
                w.write_bits(v, k);
            }
            let n = w.bit_len();
            let bytes = w.into_bytes();
            let mut r = BitReader::new(&bytes, n).unwrap();
            for &(v, k) in &vals {
                prop_assert_eq!(r.read_bits(k).unwrap(), v);
            }
        }
    }
}
