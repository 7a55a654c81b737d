//! Immutable single-segment inverted index over encoded term bags.
//!
//! Postings are kept in their compressed form both in memory and on disk:
//! each list is a run of `(ordinal delta, frequency)` varint pairs. The
//! dictionary is sorted by term text and searched by binary search.

mod format;
pub mod varint;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::encoders::{EncoderConfig, TermBag};
use crate::error::{Error, Result};
use crate::vector::DenseVector;

pub use format::{dir_size, read_index, write_index, INDEX_FILE, MAGIC, MANIFEST_FILE};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub ordinal: u32,
    pub freq: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryEntry {
    pub term: String,
    pub df: u32,
    /// Byte offset of the list inside the postings block.
    pub offset: u64,
    /// Byte length of the list.
    pub len: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocTableEntry {
    pub id: String,
    pub token_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub encoder: EncoderConfig,
    pub num_docs: u64,
    pub dimension: u32,
    pub format_version: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexStats {
    pub distinct_terms: u64,
    pub total_postings: u64,
    pub total_tokens: u64,
    /// Size of the serialized index files, when the index has been written
    /// or loaded from disk.
    pub bytes_on_disk: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    meta: IndexMeta,
    dictionary: Vec<DictionaryEntry>,
    postings: Vec<u8>,
    docs: Vec<DocTableEntry>,
    disk_bytes: Option<u64>,
}

/// Decoding iterator over one postings list.
#[derive(Debug, Clone)]
pub struct PostingsIter<'a> {
    reader: varint::Reader<'a>,
    remaining: u32,
    last: u32,
    first: bool,
}

impl Iterator for PostingsIter<'_> {
    type Item = Posting;

    fn next(&mut self) -> Option<Posting> {
        if self.remaining == 0 {
            return None;
        }
        // Lists are validated at build/load time, so decoding cannot fail here.
        let delta = self.reader.u64()? as u32;
        let freq = self.reader.u64()? as u32;
        self.remaining -= 1;
        self.last = if self.first { delta } else { self.last + delta };
        self.first = false;
        Some(Posting {
            ordinal: self.last,
            freq,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining as usize, Some(self.remaining as usize))
    }
}

impl ExactSizeIterator for PostingsIter<'_> {}

impl InvertedIndex {
    pub fn meta(&self) -> &IndexMeta {
        &self.meta
    }

    pub fn encoder(&self) -> &EncoderConfig {
        &self.meta.encoder
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn dictionary(&self) -> &[DictionaryEntry] {
        &self.dictionary
    }

    pub fn docs(&self) -> &[DocTableEntry] {
        &self.docs
    }

    fn entry(&self, term: &str) -> Option<&DictionaryEntry> {
        self.dictionary
            .binary_search_by(|e| e.term.as_str().cmp(term))
            .ok()
            .map(|i| &self.dictionary[i])
    }

    /// Document frequency and postings of `term`, or `None` if unseen.
    pub fn lookup(&self, term: &str) -> Option<(u32, PostingsIter<'_>)> {
        self.entry(term).map(|e| (e.df, self.postings_of(e)))
    }

    pub fn postings_of(&self, entry: &DictionaryEntry) -> PostingsIter<'_> {
        let start = entry.offset as usize;
        let end = start + entry.len as usize;
        PostingsIter {
            reader: varint::Reader::new(&self.postings[start..end]),
            remaining: entry.df,
            last: 0,
            first: true,
        }
    }

    pub fn doc_info(&self, ordinal: usize) -> Result<&DocTableEntry> {
        self.docs.get(ordinal).ok_or(Error::OrdinalOutOfRange {
            ordinal,
            len: self.docs.len(),
        })
    }

    pub fn disk_bytes(&self) -> Option<u64> {
        self.disk_bytes
    }

    pub(crate) fn set_disk_bytes(&mut self, bytes: u64) {
        self.disk_bytes = Some(bytes);
    }
}

pub fn index_stats(index: &InvertedIndex) -> IndexStats {
    IndexStats {
        distinct_terms: index.dictionary.len() as u64,
        total_postings: index.dictionary.iter().map(|e| u64::from(e.df)).sum(),
        total_tokens: index.docs.iter().map(|d| d.token_count).sum(),
        bytes_on_disk: index.disk_bytes,
    }
}

/// Accumulates documents in ordinal order and inverts them on `finish`.
#[derive(Debug)]
pub struct IndexBuilder {
    encoder: EncoderConfig,
    dimension: u32,
    ids: HashSet<String>,
    docs: Vec<DocTableEntry>,
    inverted: BTreeMap<String, Vec<Posting>>,
}

impl IndexBuilder {
    pub fn new(encoder: EncoderConfig, dimension: usize) -> Result<Self> {
        encoder.validate()?;
        Ok(Self {
            encoder,
            dimension: dimension as u32,
            ids: HashSet::new(),
            docs: Vec::new(),
            inverted: BTreeMap::new(),
        })
    }

    pub fn add(&mut self, id: &str, bag: &TermBag) -> Result<()> {
        if !self.ids.insert(id.to_owned()) {
            return Err(Error::DuplicateDocId(id.to_owned()));
        }
        let ordinal = self.docs.len() as u32;
        for (term, freq) in bag.iter() {
            self.inverted
                .entry(term.as_str().to_owned())
                .or_default()
                .push(Posting { ordinal, freq });
        }
        self.docs.push(DocTableEntry {
            id: id.to_owned(),
            token_count: bag.token_count(),
        });
        Ok(())
    }

    /// Encodes `v` with the builder's encoder and adds it.
    pub fn add_vector(&mut self, v: &DenseVector) -> Result<()> {
        if v.dim() != self.dimension as usize {
            return Err(Error::dims(self.dimension as usize, v.dim()));
        }
        let bag = self.encoder.encode(v)?;
        self.add(&v.id, &bag)
    }

    pub fn finish(self) -> Result<InvertedIndex> {
        if self.docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut postings = Vec::new();
        let mut dictionary = Vec::with_capacity(self.inverted.len());
        for (term, list) in self.inverted {
            let offset = postings.len() as u64;
            let mut last = 0u32;
            for (i, p) in list.iter().enumerate() {
                let delta = if i == 0 { p.ordinal } else { p.ordinal - last };
                varint::write_u64(&mut postings, u64::from(delta));
                varint::write_u64(&mut postings, u64::from(p.freq));
                last = p.ordinal;
            }
            dictionary.push(DictionaryEntry {
                term,
                df: list.len() as u32,
                offset,
                len: postings.len() as u64 - offset,
            });
        }
        Ok(InvertedIndex {
            meta: IndexMeta {
                encoder: self.encoder,
                num_docs: self.docs.len() as u64,
                dimension: self.dimension,
                format_version: FORMAT_VERSION,
            },
            dictionary,
            postings,
            docs: self.docs,
            disk_bytes: None,
        })
    }
}

/// Encodes and inverts a stream of vectors. Ordinals follow input order.
pub fn build_index<I>(vectors: I, config: EncoderConfig) -> Result<InvertedIndex>
where
    I: IntoIterator<Item = Result<DenseVector>>,
{
    let mut builder: Option<IndexBuilder> = None;
    for v in vectors {
        let v = v?;
        let b = match &mut builder {
            Some(b) => b,
            None => builder.insert(IndexBuilder::new(config, v.dim())?),
        };
        b.add_vector(&v)?;
    }
    builder.ok_or(Error::EmptyCorpus)?.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::Term;

    fn bag(entries: &[(&str, u32)]) -> TermBag {
        entries
            .iter()
            .map(|&(t, f)| (Term::new(t).unwrap(), f))
            .collect()
    }

    fn small_index() -> InvertedIndex {
        let mut b = IndexBuilder::new(EncoderConfig::FakeWords { q: 10 }, 2).unwrap();
        b.add("d0", &bag(&[("a", 4), ("b", 1)])).unwrap();
        b.add("d1", &bag(&[("a", 2)])).unwrap();
        b.add("d2", &TermBag::new()).unwrap();
        b.add("d3", &bag(&[("a", 1), ("c", 7)])).unwrap();
        b.finish().unwrap()
    }

    #[test]
    fn shared_term_postings() {
        let idx = small_index();
        let (df, it) = idx.lookup("a").unwrap();
        assert_eq!(df, 3);
        let got: Vec<_> = it.map(|p| (p.ordinal, p.freq)).collect();
        assert_eq!(got, vec![(0, 4), (1, 2), (3, 1)]);
        assert!(idx.lookup("zzz").is_none());
    }

    #[test]
    fn empty_bag_document_is_counted() {
        let idx = small_index();
        assert_eq!(idx.num_docs(), 4);
        assert_eq!(idx.doc_info(2).unwrap().token_count, 0);
        assert!(matches!(
            idx.doc_info(4),
            Err(Error::OrdinalOutOfRange { ordinal: 4, len: 4 })
        ));
        let stats = index_stats(&idx);
        assert_eq!(stats.distinct_terms, 3);
        assert_eq!(stats.total_postings, 5);
        assert_eq!(stats.total_tokens, 15);
    }

    #[test]
    fn dictionary_is_sorted() {
        let idx = small_index();
        let terms: Vec<_> = idx.dictionary().iter().map(|e| e.term.as_str()).collect();
        assert_eq!(terms, vec!["a", "b", "c"]);
    }

    #[test]
    fn build_errors() {
        let cfg = EncoderConfig::FakeWords { q: 10 };
        assert!(matches!(build_index(Vec::new(), cfg), Err(Error::EmptyCorpus)));
        let dup = vec![
            Ok(DenseVector::new("x", vec![1.0, 0.0])),
            Ok(DenseVector::new("x", vec![0.0, 1.0])),
        ];
        assert!(matches!(build_index(dup, cfg), Err(Error::DuplicateDocId(_))));
        let dims = vec![
            Ok(DenseVector::new("x", vec![1.0, 0.0])),
            Ok(DenseVector::new("y", vec![1.0])),
        ];
        assert!(matches!(
            build_index(dims, cfg),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn all_zero_quantized_doc() {
        // 400 equal components are 0.05 each after normalization: floor(0.5) = 0.
        let v = DenseVector::new("flat", vec![1.0; 400]);
        let idx = build_index(vec![Ok(v)], EncoderConfig::FakeWords { q: 10 }).unwrap();
        assert_eq!(idx.doc_info(0).unwrap().token_count, 0);
        assert_eq!(index_stats(&idx).total_postings, 0);
        assert_eq!(index_stats(&idx).distinct_terms, 0);
    }
}
