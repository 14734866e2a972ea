//! Bit-packed binary codes, Hamming distance and brute-force retrieval.
//!
//! Bit `k` of a code lives in word `k / 64` at position `k % 64`
//! (least-significant bit first). Bits past `nbits` in the last word are
//! always zero, so two codes are equal exactly when their words are equal.

use std::fmt;

use crate::error::{mismatch, Error, Result};
use crate::records::RecordMeta;

/// A packed `nbits`-bit binary code.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    words: Vec<u64>,
    nbits: usize,
}

fn word_count(nbits: usize) -> usize {
    nbits.div_ceil(64)
}

fn tail_mask(nbits: usize) -> u64 {
    match nbits % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

impl BinaryCode {
    pub fn zeros(nbits: usize) -> Self {
        Self {
            words: vec![0; word_count(nbits)],
            nbits,
        }
    }

    /// Packs a bit sequence, bit `k` of the result being `bits[k]`.
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut code = Self::zeros(bits.len());
        for (k, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            code.words[k / 64] |= 1 << (k % 64);
        }
        code
    }

    /// Wraps raw words, rejecting a wrong word count or nonzero padding.
    pub fn from_words(words: Vec<u64>, nbits: usize) -> Result<Self> {
        if words.len() != word_count(nbits) {
            return Err(mismatch(
                "BinaryCode::from_words",
                format!("{nbits} bits"),
                format!("{} words", words.len()),
            ));
        }
        if let Some(&last) = words.last() {
            if last & !tail_mask(nbits) != 0 {
                return Err(Error::InvalidArgument(format!(
                    "padding bits beyond position {nbits} are not zero"
                )));
            }
        }
        Ok(Self { words, nbits })
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, k: usize) -> bool {
        assert!(k < self.nbits, "bit {k} out of range for {}-bit code", self.nbits);
        self.words[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn set(&mut self, k: usize, value: bool) {
        assert!(k < self.nbits, "bit {k} out of range for {}-bit code", self.nbits);
        let mask = 1u64 << (k % 64);
        if value {
            self.words[k / 64] |= mask;
        } else {
            self.words[k / 64] &= !mask;
        }
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.nbits).map(|k| self.get(k)).collect()
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Bitwise complement, keeping padding zero.
    pub fn complement(&self) -> Self {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(self.nbits);
        }
        Self {
            words,
            nbits: self.nbits,
        }
    }

    /// Number of differing bit positions (XOR + popcount per word).
    pub fn hamming(&self, other: &BinaryCode) -> Result<u32> {
        if self.nbits != other.nbits {
            return Err(mismatch(
                "hamming",
                format!("{} bits", self.nbits),
                format!("{} bits", other.nbits),
            ));
        }
        Ok(hamming_words(&self.words, &other.words))
    }

    /// Hex form of the little-endian byte serialization: byte `i` holds bits
    /// `8i..8i+8`, printed high nibble first.
    pub fn to_hex(&self) -> String {
        let nbytes = self.nbits.div_ceil(8);
        self.words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(nbytes)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn from_hex(hex: &str, nbits: usize) -> Result<Self> {
        let nbytes = nbits.div_ceil(8);
        if hex.len() != 2 * nbytes || !hex.is_ascii() {
            return Err(Error::InvalidArgument(format!(
                "expected {} hex digits for a {nbits}-bit code, got `{hex}`",
                2 * nbytes
            )));
        }
        let mut words = vec![0u64; word_count(nbits)];
        for i in 0..nbytes {
            let byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|_| Error::InvalidArgument(format!("invalid hex digits in `{hex}`")))?;
            words[i / 8] |= (byte as u64) << (8 * (i % 8));
        }
        Self::from_words(words, nbits)
    }

    /// Parses a `0`/`1` string, first character being bit 0.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidArgument(format!("invalid bit character `{c}` in `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bits(&bits))
    }
}

impl fmt::Display for BinaryCode {
    /// Bit string, bit 0 first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..self.nbits {
            f.write_str(if self.get(k) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

pub(crate) fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Free-function form of [`BinaryCode::from_bits`].
pub fn pack_bits(bits: &[bool]) -> BinaryCode {
    BinaryCode::from_bits(bits)
}

/// Free-function form of [`BinaryCode::hamming`].
pub fn hamming(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    a.hamming(b)
}

/// A searchable collection of codes of uniform width.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeIndex {
    nbits: usize,
    codes: Vec<BinaryCode>,
    meta: RecordMeta,
}

/// One retrieval hit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbor {
    /// Insertion position in the index.
    pub position: usize,
    pub id: String,
    pub distance: u32,
    /// 1-based rank.
    pub rank: usize,
}

impl CodeIndex {
    pub fn new(nbits: usize, codes: Vec<BinaryCode>, meta: RecordMeta) -> Result<Self> {
        if let Some(bad) = codes.iter().find(|c| c.nbits != nbits) {
            return Err(mismatch(
                "CodeIndex::new",
                format!("{nbits} bits"),
                format!("{} bits", bad.nbits),
            ));
        }
        // Re-validate lengths against the code count.
        let meta = RecordMeta::new(
            codes.len(),
            meta.ids().map(<[_]>::to_vec),
            meta.labels().map(<[_]>::to_vec),
        )?;
        Ok(Self { nbits, codes, meta })
    }

    pub fn unlabeled(nbits: usize, codes: Vec<BinaryCode>) -> Result<Self> {
        Self::new(nbits, codes, RecordMeta::default())
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[BinaryCode] {
        &self.codes
    }

    pub fn meta(&self) -> &RecordMeta {
        &self.meta
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.meta.labels()
    }

    pub fn select(&self, rows: &[usize]) -> CodeIndex {
        CodeIndex {
            nbits: self.nbits,
            codes: rows.iter().map(|&r| self.codes[r].clone()).collect(),
            meta: self.meta.select(rows),
        }
    }

    /// The `k` entries closest to `query`, ordered by distance and then by
    /// insertion position. Returns everything when the index holds fewer
    /// than `k` codes.
    pub fn knn_search(&self, query: &BinaryCode, k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if query.nbits != self.nbits {
            return Err(mismatch(
                "knn_search",
                format!("index of {} bits", self.nbits),
                format!("query of {} bits", query.nbits),
            ));
        }
        let mut scored: Vec<(u32, usize)> = self
            .codes
            .iter()
            .enumerate()
            .map(|(i, c)| (hamming_words(&c.words, &query.words), i))
            .collect();
        if k < scored.len() {
            scored.select_nth_unstable(k - 1);
            scored.truncate(k);
        }
        scored.sort_unstable();
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(r, (distance, position))| Neighbor {
                position,
                id: self.meta.id(position).into_owned(),
                distance,
                rank: r + 1,
            })
            .collect())
    }
}

/// Storage needed for `n` embeddings as `d` 32-bit floats versus `n`
/// codes of `bits` bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryReport {
    pub n: u64,
    pub original_bytes: u64,
    pub compressed_bytes: u64,
    pub ratio: f64,
}

pub fn memory_report(n: u64, d: u64, bits: u64) -> Result<MemoryReport> {
    if n == 0 || d == 0 || bits == 0 {
        return Err(Error::InvalidArgument("n, d and bits must all be positive".into()));
    }
    let original_bytes = n
        .checked_mul(d)
        .and_then(|x| x.checked_mul(4))
        .ok_or_else(|| Error::InvalidArgument("byte count overflows u64".into()))?;
    let compressed_bytes = n
        .checked_mul(bits.div_ceil(8))
        .ok_or_else(|| Error::InvalidArgument("byte count overflows u64".into()))?;
    Ok(MemoryReport {
        n,
        original_bytes,
        compressed_bytes,
        ratio: original_bytes as f64 / compressed_bytes as f64,
    })
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl MemoryReport {
    /// The compression ratio as a reduced fraction `original : compressed`.
    pub fn ratio_fraction(&self) -> (u64, u64) {
        let g = gcd(self.original_bytes, self.compressed_bytes);
        (self.original_bytes / g, self.compressed_bytes / g)
    }
}

/// Formats a byte count with decimal units (1 GB = 10⁹ bytes).
pub fn format_bytes(bytes: u64) -> String {
    const UNITS: [&str; 6] = ["B", "KB", "MB", "GB", "TB", "PB"];
    let mut unit = 0;
    let mut scale = 1u64;
    while unit + 1 < UNITS.len() && bytes >= scale * 1000 {
        scale *= 1000;
        unit += 1;
    }
    format!("{} {}", trim_decimal(bytes as f64 / scale as f64), UNITS[unit])
}

pub(crate) fn trim_decimal(x: f64) -> String {
    let s = format!("{x:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

impl fmt::Display for MemoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} → {} ({}:1)",
            format_bytes(self.original_bytes),
            format_bytes(self.compressed_bytes),
            trim_decimal(self.ratio)
        )
    }
}
