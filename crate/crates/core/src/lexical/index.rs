//! Inverted index over one corpus field, with a versioned binary
//! serialization.
//!
//! # File format (version 1)
//!
//! All integers are unsigned LEB128 varints unless noted; multi-byte fixed
//! fields are little-endian.
//!
//! ```text
//! magic        4 bytes  "RFIX"
//! version      u32      1
//! field_source u8       0 = abstract, 1 = full_text
//! n_docs       u64
//! avg_doc_len  f64 bits
//! doc table    n_docs x { id_len varint, id bytes (UTF-8), doc_len varint }
//! n_terms      u64
//! terms        n_terms x {
//!     term_len varint, term bytes (UTF-8), n_postings varint,
//!     postings: first doc ordinal as varint, then ordinal deltas;
//!               each ordinal followed by its term count varint
//! }
//! ```
//!
//! Terms are written in ascending order, postings in ascending doc ordinal.
//! The magic and version are checked on load.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use super::tokenize::tokenize;
use super::LexicalError;
use crate::io::Doc;

const MAGIC: &[u8; 4] = b"RFIX";
const VERSION: u32 = 1;

/// Which document field an index was built over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSource {
    Abstract,
    FullText,
}

impl FieldSource {
    fn select<'d>(&self, doc: &'d Doc) -> &'d str {
        match self {
            FieldSource::Abstract => &doc.abstract_text,
            FieldSource::FullText => &doc.full_text,
        }
    }

    fn to_byte(self) -> u8 {
        match self {
            FieldSource::Abstract => 0,
            FieldSource::FullText => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self, LexicalError> {
        match b {
            0 => Ok(FieldSource::Abstract),
            1 => Ok(FieldSource::FullText),
            other => Err(LexicalError::Persist(format!(
                "unknown field_source byte {other}"
            ))),
        }
    }
}

impl std::fmt::Display for FieldSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldSource::Abstract => write!(f, "abstract"),
            FieldSource::FullText => write!(f, "full_text"),
        }
    }
}

/// One posting: a document ordinal and the term's count in that document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub count: u32,
}

/// Term postings with document lengths and frequencies: the BM25 substrate.
///
/// Immutable once built; concurrent reads need no synchronization.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    field_source: FieldSource,
    doc_ids: Vec<String>,
    doc_lens: Vec<u32>,
    avg_doc_len: f64,
    postings: BTreeMap<String, Vec<Posting>>,
    // Derived on construction/load.
    ordinals: HashMap<String, u32>,
    collection_len: u64,
}

impl InvertedIndex {
    /// Tokenize the selected field of every document and build the index.
    /// Documents keep their corpus order as ordinals 0..n.
    pub fn build(corpus: &[Doc], field_source: FieldSource) -> Result<Self, LexicalError> {
        if corpus.is_empty() {
            return Err(LexicalError::EmptyCorpus);
        }
        let mut doc_ids = Vec::with_capacity(corpus.len());
        let mut doc_lens = Vec::with_capacity(corpus.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();

        for (ordinal, doc) in corpus.iter().enumerate() {
            let tokens = tokenize(field_source.select(doc));
            doc_ids.push(doc.doc_id.clone());
            doc_lens.push(tokens.len() as u32);

            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for token in tokens {
                *counts.entry(token).or_insert(0) += 1;
            }
            for (term, count) in counts {
                postings.entry(term).or_default().push(Posting {
                    doc: ordinal as u32,
                    count,
                });
            }
        }

        Ok(Self::assemble(field_source, doc_ids, doc_lens, postings))
    }

    fn assemble(
        field_source: FieldSource,
        doc_ids: Vec<String>,
        doc_lens: Vec<u32>,
        postings: BTreeMap<String, Vec<Posting>>,
    ) -> Self {
        let collection_len: u64 = doc_lens.iter().map(|&l| l as u64).sum();
        let avg_doc_len = collection_len as f64 / doc_ids.len() as f64;
        let ordinals = doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        InvertedIndex {
            field_source,
            doc_ids,
            doc_lens,
            avg_doc_len,
            postings,
            ordinals,
            collection_len,
        }
    }

    pub fn field_source(&self) -> FieldSource {
        self.field_source
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    /// Total token count of the collection.
    pub fn collection_len(&self) -> u64 {
        self.collection_len
    }

    pub fn vocab_size(&self) -> usize {
        self.postings.len()
    }

    pub fn doc_id(&self, ordinal: u32) -> Option<&str> {
        self.doc_ids.get(ordinal as usize).map(String::as_str)
    }

    pub fn ordinal(&self, doc_id: &str) -> Option<u32> {
        self.ordinals.get(doc_id).copied()
    }

    pub fn doc_len(&self, ordinal: u32) -> Option<u32> {
        self.doc_lens.get(ordinal as usize).copied()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map(Vec::len).unwrap_or(0)
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(Vec::as_slice)
    }

    /// Iterate over `(term, postings)` in ascending term order.
    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.postings
            .iter()
            .map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    /// Total occurrences of `term` across the collection.
    pub fn collection_count(&self, term: &str) -> u64 {
        self.postings
            .get(term)
            .map(|ps| ps.iter().map(|p| p.count as u64).sum())
            .unwrap_or(0)
    }

    pub(crate) fn term_count_in(&self, term: &str, ordinal: u32) -> u32 {
        self.postings
            .get(term)
            .and_then(|ps| {
                ps.binary_search_by_key(&ordinal, |p| p.doc)
                    .ok()
                    .map(|i| ps[i].count)
            })
            .unwrap_or(0)
    }

    // ── Persistence ─────────────────────────────────────────────────────

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), LexicalError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.field_source.to_byte()])?;
        w.write_all(&(self.doc_ids.len() as u64).to_le_bytes())?;
        w.write_all(&self.avg_doc_len.to_le_bytes())?;
        for (id, &len) in self.doc_ids.iter().zip(&self.doc_lens) {
            write_varint(&mut w, id.len() as u64)?;
            w.write_all(id.as_bytes())?;
            write_varint(&mut w, len as u64)?;
        }
        w.write_all(&(self.postings.len() as u64).to_le_bytes())?;
        for (term, postings) in &self.postings {
            write_varint(&mut w, term.len() as u64)?;
            w.write_all(term.as_bytes())?;
            write_varint(&mut w, postings.len() as u64)?;
            let mut prev = 0u32;
            for (i, p) in postings.iter().enumerate() {
                let delta = if i == 0 { p.doc } else { p.doc - prev };
                write_varint(&mut w, delta as u64)?;
                write_varint(&mut w, p.count as u64)?;
                prev = p.doc;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, LexicalError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(LexicalError::Persist(
                "bad magic (not an index file)".into(),
            ));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(LexicalError::Persist(format!(
                "unsupported index version {version} (expected {VERSION})"
            )));
        }
        let mut field = [0u8; 1];
        r.read_exact(&mut field)?;
        let field_source = FieldSource::from_byte(field[0])?;
        let n_docs = read_u64(&mut r)? as usize;
        let stored_avg = read_f64(&mut r)?;

        let mut doc_ids = Vec::with_capacity(n_docs);
        let mut doc_lens = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            doc_ids.push(read_string(&mut r)?);
            doc_lens.push(read_varint(&mut r)? as u32);
        }

        let n_terms = read_u64(&mut r)? as usize;
        let mut postings = BTreeMap::new();
        for _ in 0..n_terms {
            let term = read_string(&mut r)?;
            let n = read_varint(&mut r)? as usize;
            let mut list = Vec::with_capacity(n);
            let mut doc = 0u32;
            for i in 0..n {
                let delta = read_varint(&mut r)? as u32;
                doc = if i == 0 { delta } else { doc + delta };
                let count = read_varint(&mut r)? as u32;
                if doc as usize >= n_docs {
                    return Err(LexicalError::Persist(format!(
                        "posting references ordinal {doc} beyond {n_docs} docs"
                    )));
                }
                list.push(Posting { doc, count });
            }
            postings.insert(term, list);
        }

        let index = Self::assemble(field_source, doc_ids, doc_lens, postings);
        let rel = (index.avg_doc_len - stored_avg).abs() / stored_avg.abs().max(1.0);
        if rel > 1e-9 {
            return Err(LexicalError::Persist(format!(
                "stored avg_doc_len {stored_avg} disagrees with doc table ({})",
                index.avg_doc_len
            )));
        }
        Ok(index)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LexicalError> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexicalError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn write_varint<W: Write>(w: &mut W, mut value: u64) -> std::io::Result<()> {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            return w.write_all(&[byte]);
        }
        w.write_all(&[byte | 0x80])?;
    }
}

fn read_varint<R: Read>(r: &mut R) -> Result<u64, LexicalError> {
    let mut value = 0u64;
    let mut shift = 0;
    loop {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        if shift >= 64 {
            return Err(LexicalError::Persist("varint overflow".into()));
        }
        value |= ((byte[0] & 0x7f) as u64) << shift;
        if byte[0] & 0x80 == 0 {
            return Ok(value);
        }
        shift += 7;
    }
}

fn read_string<R: Read>(r: &mut R) -> Result<String, LexicalError> {
    let len = read_varint(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| LexicalError::Persist("invalid UTF-8".into()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, LexicalError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, LexicalError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, LexicalError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
