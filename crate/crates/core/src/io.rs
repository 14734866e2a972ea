//! On-disk formats.
//!
//! All binary formats are little-endian and start with a four-byte magic
//! followed by a `u32` version (currently 1). Strings are a `u32` byte
//! length followed by UTF-8.
//!
//! | file | header | payload |
//! |------|--------|---------|
//! | embeddings (`HVE1`) | `n: u32`, `d: u32` | `n·d` `f32`, row-major; record block |
//! | codes (`HVC1`) | `n: u32`, `nbits: u32` | `n·⌈nbits/64⌉` `u64` words, LSB-first bits; record block |
//! | model (`HVM1`) | `d: u32`, `b: u32`, `tau: f64` | `f64` tensors: encoder weights `b×d`, encoder bias `b`, logit weights `2b×b`, logit bias `2b`, codebook `d×2b`; metadata block |
//!
//! The record block is a `u8` flag (bit 0: ids present, bit 1: labels
//! present) followed by `n` strings for each present sequence, ids first.
//!
//! The model metadata block is a `u8` presence flag followed, when set, by
//! `learning_rate: f64`, `batch_size: u64`, `max_epochs: u64`,
//! `patience_window: u64`, `delta_tolerance: f64`, `tau: f64`,
//! `tau_final` (`u8` flag + `f64`), `seed: u64`, `epochs_run: u64`,
//! `stop_reason: u8` (0 converged, 1 max epochs), `final_loss: f64`.
//!
//! Readers consume the whole input and reject trailing bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::code::{BinaryCode, CodeIndex};
use crate::compressor::CompressorModel;
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::metrics::{ScoredPair, ScoredPairSet};
use crate::records::RecordMeta;
use crate::training::{StopReason, TrainConfig};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"HVE1";
pub const CODE_MAGIC: &[u8; 4] = b"HVC1";
pub const MODEL_MAGIC: &[u8; 4] = b"HVM1";
pub const FORMAT_VERSION: u32 = 1;

struct Reader<'a> {
    kind: &'static str,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(kind: &'static str, buf: &'a [u8]) -> Self {
        Self { kind, buf, pos: 0 }
    }

    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Format {
            kind: self.kind,
            reason: reason.into(),
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return self.fail(format!(
                "truncated: needed {n} bytes at offset {}, {} left",
                self.pos,
                self.buf.len() - self.pos
            ));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        match std::str::from_utf8(bytes) {
            Ok(s) => Ok(s.to_owned()),
            Err(_) => self.fail("string is not valid UTF-8"),
        }
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.array::<4>()?;
        if &got != magic {
            return self.fail(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&got),
                String::from_utf8_lossy(magic)
            ));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return self.fail(format!("unsupported version {version}"));
        }
        Ok(())
    }

    /// Checks that `count` items of `size` bytes fit before reading them.
    fn expect_payload(&self, count: usize, size: usize, what: &str) -> Result<()> {
        let need = count.checked_mul(size);
        match need {
            Some(need) if need <= self.buf.len() - self.pos => Ok(()),
            _ => self.fail(format!("declared {count} {what} but the payload is too short")),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return self.fail(format!("{} trailing bytes", self.buf.len() - self.pos));
        }
        Ok(())
    }

    fn records(&mut self, n: usize) -> Result<RecordMeta> {
        let flag = self.u8()?;
        if flag & !0b11 != 0 {
            return self.fail(format!("unknown record flag {flag:#x}"));
        }
        let mut seq = |present: bool| -> Result<Option<Vec<String>>> {
            if !present {
                return Ok(None);
            }
            self.expect_payload(n, 4, "strings")?;
            (0..n).map(|_| self.string()).collect::<Result<Vec<_>>>().map(Some)
        };
        let ids = seq(flag & 1 != 0)?;
        let labels = seq(flag & 2 != 0)?;
        RecordMeta::new(n, ids, labels)
    }
}

fn put_u32(out: &mut Vec<u8>, x: usize, what: &str) -> Result<()> {
    let x = u32::try_from(x).map_err(|_| Error::InvalidArgument(format!("{what} {x} does not fit in u32")))?;
    out.extend(x.to_le_bytes());
    Ok(())
}

fn put_string(out: &mut Vec<u8>, s: &str) -> Result<()> {
    put_u32(out, s.len(), "string length")?;
    out.extend(s.as_bytes());
    Ok(())
}

fn put_records(out: &mut Vec<u8>, meta: &RecordMeta) -> Result<()> {
    let flag = meta.ids().is_some() as u8 | (meta.labels().is_some() as u8) << 1;
    out.push(flag);
    for seq in [meta.ids(), meta.labels()].into_iter().flatten() {
        for s in seq {
            put_string(out, s)?;
        }
    }
    Ok(())
}

fn header(magic: &[u8; 4]) -> Vec<u8> {
    let mut out = magic.to_vec();
    out.extend(FORMAT_VERSION.to_le_bytes());
    out
}

/// Serializes embeddings, storing values as `f32`.
pub fn encode_embeddings(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let mut out = header(EMBEDDING_MAGIC);
    put_u32(&mut out, set.len(), "record count")?;
    put_u32(&mut out, set.dim(), "dimension")?;
    for &x in set.as_slice() {
        let f = x as f32;
        if !f.is_finite() {
            return Err(Error::NonFinite(format!("{x} is out of f32 range")));
        }
        out.extend(f.to_le_bytes());
    }
    put_records(&mut out, set.meta())?;
    Ok(out)
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut r = Reader::new("embedding", bytes);
    r.header(EMBEDDING_MAGIC)?;
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    if d == 0 && n > 0 {
        return r.fail("zero dimension with nonzero record count");
    }
    r.expect_payload(n.saturating_mul(d), 4, "values")?;
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        let x = f32::from_le_bytes(r.array()?);
        if !x.is_finite() {
            return r.fail(format!("non-finite value {x}"));
        }
        data.push(x as f64);
    }
    let meta = r.records(n)?;
    r.finish()?;
    EmbeddingSet::new(d, data, meta)
}

pub fn encode_codes(index: &CodeIndex) -> Result<Vec<u8>> {
    let mut out = header(CODE_MAGIC);
    put_u32(&mut out, index.len(), "record count")?;
    put_u32(&mut out, index.nbits(), "bit count")?;
    for code in index.codes() {
        for w in code.words() {
            out.extend(w.to_le_bytes());
        }
    }
    put_records(&mut out, index.meta())?;
    Ok(out)
}

pub fn decode_codes(bytes: &[u8]) -> Result<CodeIndex> {
    let mut r = Reader::new("code", bytes);
    r.header(CODE_MAGIC)?;
    let n = r.u32()? as usize;
    let nbits = r.u32()? as usize;
    let words = nbits.div_ceil(64);
    r.expect_payload(n.saturating_mul(words), 8, "code words")?;
    let mut codes = Vec::with_capacity(n);
    for i in 0..n {
        let ws = (0..words).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        match BinaryCode::from_words(ws, nbits) {
            Ok(c) => codes.push(c),
            Err(e) => return r.fail(format!("record {i}: {e}")),
        }
    }
    let meta = r.records(n)?;
    r.finish()?;
    CodeIndex::new(nbits, codes, meta)
}

/// Training settings and outcome stored alongside a model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMetadata {
    pub config: TrainConfig,
    pub epochs_run: usize,
    pub stop_reason: StopReason,
    pub final_loss: f64,
}

pub fn encode_model(model: &CompressorModel, meta: Option<&TrainingMetadata>) -> Result<Vec<u8>> {
    let mut out = header(MODEL_MAGIC);
    put_u32(&mut out, model.dim(), "dimension")?;
    put_u32(&mut out, model.bits(), "bit count")?;
    out.extend(model.tau().to_le_bytes());
    for x in model.to_flat() {
        out.extend(x.to_le_bytes());
    }
    match meta {
        None => out.push(0),
        Some(m) => {
            out.push(1);
            let c = &m.config;
            out.extend(c.learning_rate.to_le_bytes());
            out.extend((c.batch_size as u64).to_le_bytes());
            out.extend((c.max_epochs as u64).to_le_bytes());
            out.extend((c.patience_window as u64).to_le_bytes());
            out.extend(c.delta_tolerance.to_le_bytes());
            out.extend(c.tau.to_le_bytes());
            out.push(c.tau_final.is_some() as u8);
            out.extend(c.tau_final.unwrap_or(0.0).to_le_bytes());
            out.extend(c.seed.to_le_bytes());
            out.extend((m.epochs_run as u64).to_le_bytes());
            out.push(match m.stop_reason {
                StopReason::Converged => 0,
                StopReason::MaxEpochs => 1,
            });
            out.extend(m.final_loss.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<(CompressorModel, Option<TrainingMetadata>)> {
    let mut r = Reader::new("model", bytes);
    r.header(MODEL_MAGIC)?;
    let d = r.u32()? as usize;
    let b = r.u32()? as usize;
    let tau = r.f64()?;
    if d == 0 || b == 0 {
        return r.fail(format!("invalid shape d={d}, b={b}"));
    }
    let count = b * d + b + 2 * b * b + 2 * b + 2 * b * d;
    r.expect_payload(count, 8, "parameters")?;
    let flat = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let model = match CompressorModel::from_flat(d, b, tau, &flat) {
        Ok(m) => m,
        Err(e) => return r.fail(e.to_string()),
    };
    let meta = match r.u8()? {
        0 => None,
        1 => {
            let learning_rate = r.f64()?;
            let batch_size = r.u64()? as usize;
            let max_epochs = r.u64()? as usize;
            let patience_window = r.u64()? as usize;
            let delta_tolerance = r.f64()?;
            let tau = r.f64()?;
            let has_final = r.u8()?;
            let tau_final_raw = r.f64()?;
            let tau_final = match has_final {
                0 if tau_final_raw == 0.0 => None,
                1 => Some(tau_final_raw),
                _ => return r.fail("malformed tau_final field"),
            };
            let seed = r.u64()?;
            let epochs_run = r.u64()? as usize;
            let stop_reason = match r.u8()? {
                0 => StopReason::Converged,
                1 => StopReason::MaxEpochs,
                x => return r.fail(format!("unknown stop reason {x}")),
            };
            let final_loss = r.f64()?;
            Some(TrainingMetadata {
                config: TrainConfig {
                    learning_rate,
                    batch_size,
                    max_epochs,
                    patience_window,
                    delta_tolerance,
                    tau,
                    tau_final,
                    seed,
                },
                epochs_run,
                stop_reason,
                final_loss,
            })
        }
        x => return r.fail(format!("unknown metadata flag {x}")),
    };
    r.finish()?;
    Ok((model, meta))
}

/// Parses a tab-separated `id_a  id_b  score` pair list. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_pairs(text: &str) -> Result<ScoredPairSet> {
    let bad = |line: usize, reason: String| Error::Format {
        kind: "pair",
        reason: format!("line {line}: {reason}"),
    };
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad(
                i + 1,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let score: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| bad(i + 1, format!("score `{}` is not a number", fields[2])))?;
        if !score.is_finite() {
            return Err(bad(i + 1, format!("score `{}` is not finite", fields[2])));
        }
        pairs.push(ScoredPair {
            a: fields[0].to_string(),
            b: fields[1].to_string(),
            score,
        });
    }
    Ok(ScoredPairSet { pairs })
}

pub fn format_pairs(pairs: &ScoredPairSet) -> String {
    let mut out = String::new();
    for p in &pairs.pairs {
        let _ = writeln!(out, "{}\t{}\t{}", p.a, p.b, p.score);
    }
    out
}

/// Parses comma-separated embeddings, one per line. Lines starting with
/// `#` are comments.
pub fn parse_embedding_csv(text: &str) -> Result<EmbeddingSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format {
            kind: "csv",
            reason: e.to_string(),
        })?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Format {
                kind: "csv",
                reason: format!("record {}: non-numeric or non-finite field", i + 1),
            })?;
        rows.push(row);
    }
    EmbeddingSet::from_rows(&rows)
}

/// Plain (`P1`) portable bitmap with one row per code and one pixel per
/// bit; set bits are black.
pub fn pbm(codes: &[&BinaryCode], nbits: usize) -> String {
    let mut out = format!("P1\n{} {}\n", nbits, codes.len());
    for code in codes {
        let row: Vec<&str> = code.to_bits().iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Contents of a file identified by its magic.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Embeddings(EmbeddingSet),
    Codes(CodeIndex),
}

pub fn decode_payload(bytes: &[u8]) -> Result<Payload> {
    match bytes.get(..4) {
        Some(m) if m == EMBEDDING_MAGIC => decode_embeddings(bytes).map(Payload::Embeddings),
        Some(m) if m == CODE_MAGIC => decode_codes(bytes).map(Payload::Codes),
        _ => Err(Error::Format {
            kind: "input",
            reason: "neither an embedding nor a code file".into(),
        }),
    }
}

/// Reads embeddings from a binary file, or from CSV when the path ends in
/// `.csv`.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        parse_embedding_csv(&fs::read_to_string(path)?)
    } else {
        decode_embeddings(&fs::read(path)?)
    }
}

pub fn write_embeddings(path: &Path, set: &EmbeddingSet) -> Result<()> {
    Ok(fs::write(path, encode_embeddings(set)?)?)
}

pub fn read_codes(path: &Path) -> Result<CodeIndex> {
    decode_codes(&fs::read(path)?)
}

pub fn write_codes(path: &Path, index: &CodeIndex) -> Result<()> {
    Ok(fs::write(path, encode_codes(index)?)?)
}

pub fn read_model(path: &Path) -> Result<(CompressorModel, Option<TrainingMetadata>)> {
    decode_model(&fs::read(path)?)
}

pub fn write_model(path: &Path, model: &CompressorModel, meta: Option<&TrainingMetadata>) -> Result<()> {
    Ok(fs::write(path, encode_model(model, meta)?)?)
}

pub fn read_pairs(path: &Path) -> Result<ScoredPairSet> {
    parse_pairs(&fs::read_to_string(path)?)
}

pub fn read_payload(path: &Path) -> Result<Payload> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return read_embeddings(path).map(Payload::Embeddings);
    }
    decode_payload(&fs::read(path)?)
}
