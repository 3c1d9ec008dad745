use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Fixed-length bit vector backing one DRAM row.
///
/// Bits past `len` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitRow {
    len: usize,
    words: Vec<u64>,
}

impl BitRow {
    pub fn zeros(len: usize) -> Self {
        BitRow {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut row = BitRow {
            len,
            words: vec![!0; len.div_ceil(64)],
        };
        row.mask_tail();
        row
    }

    pub fn from_words(len: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != len.div_ceil(64) {
            return Err(Error::RowLength {
                expected: len.div_ceil(64) * 64,
                got: words.len() * 64,
            });
        }
        let mut row = BitRow { len, words };
        row.mask_tail();
        Ok(row)
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for bit in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if bit {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        BitRow { len, words }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let words = (0..len.div_ceil(64)).map(|_| rng.gen()).collect();
        let mut row = BitRow { len, words };
        row.mask_tail();
        row
    }

    /// Random row where each bit is set with probability `density`.
    pub fn random_with_density<R: Rng + ?Sized>(len: usize, density: f64, rng: &mut R) -> Self {
        BitRow::from_bits((0..len).map(|_| rng.gen_bool(density.clamp(0.0, 1.0))))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for row of {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for row of {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Indices of set bits in ascending order.
    pub fn ones_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (wi, &w) in self.words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                let tz = w.trailing_zeros() as usize;
                out.push(wi * 64 + tz);
                w &= w - 1;
            }
        }
        out
    }

    pub fn not(&self) -> BitRow {
        self.map(|w| !w)
    }

    pub fn map(&self, f: impl Fn(u64) -> u64) -> BitRow {
        let mut row = BitRow {
            len: self.len,
            words: self.words.iter().map(|&w| f(w)).collect(),
        };
        row.mask_tail();
        row
    }

    pub fn zip_with(&self, other: &BitRow, f: impl Fn(u64, u64) -> u64) -> BitRow {
        assert_eq!(self.len, other.len, "row length mismatch");
        let mut row = BitRow {
            len: self.len,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        };
        row.mask_tail();
        row
    }

    /// Copy of the first `len` bits.
    pub fn prefix(&self, len: usize) -> BitRow {
        assert!(len <= self.len);
        let mut row = BitRow {
            len,
            words: self.words[..len.div_ceil(64)].to_vec(),
        };
        row.mask_tail();
        row
    }

    /// Little-endian byte image of the row, as hex.
    pub fn to_hex(&self) -> String {
        let bytes: Vec<u8> = self
            .words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(self.len.div_ceil(8))
            .collect();
        hex::encode(bytes)
    }

    pub fn from_hex(len: usize, s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Json(format!("bad row hex: {e}")))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::RowLength {
                expected: len,
                got: bytes.len() * 8,
            });
        }
        let mut words = vec![0u64; len.div_ceil(64)];
        for (i, b) in bytes.into_iter().enumerate() {
            words[i / 8] |= u64::from(b) << (8 * (i % 8));
        }
        let mut row = BitRow { len, words };
        row.mask_tail();
        Ok(row)
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for BitRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shown: String = self
            .iter()
            .take(64)
            .map(|b| if b { '1' } else { '0' })
            .collect();
        let ellipsis = if self.len > 64 { "…" } else { "" };
        write!(f, "BitRow[{}]({shown}{ellipsis})", self.len)
    }
}
