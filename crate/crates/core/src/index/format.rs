//! On-disk layout.
//!
//! An index directory holds two files:
//!
//! * `manifest.json`: the [`IndexMeta`] as JSON, for inspection.
//! * `index.bin`: the binary index, all fixed-width integers little-endian.
//!
//! ```text
//! magic "DNDX" | version u32 | encoder kind u8 | p1 u32 | p2 u32 | p3 u32
//! | num_docs u64 | dimension u32
//! | dict_len u64 | postings_len u64 | docs_len u64
//! | dictionary block | postings block | doc table block
//! | xxh64 checksum u64 (over every preceding byte)
//! ```
//!
//! Encoder parameters are `(q, 0, 0)` for fake words (kind 0) and
//! `(d, n, b)` for lexical LSH (kind 1). The dictionary block is a varint
//! term count followed by `(len, bytes, df, offset, byte_len)` per term in
//! sorted order. The doc table is `(id len, id bytes, token_count)` per
//! document in ordinal order.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{varint, DictionaryEntry, DocTableEntry, IndexMeta, InvertedIndex, FORMAT_VERSION};
use crate::encoders::EncoderConfig;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DNDX";
pub const INDEX_FILE: &str = "index.bin";
pub const MANIFEST_FILE: &str = "manifest.json";

const HEADER_LEN: usize = 4 + 4 + 1 + 12 + 8 + 4 + 24;

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptIndex(msg.into())
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn serialize(index: &InvertedIndex) -> Vec<u8> {
    let mut dict = Vec::new();
    varint::write_u64(&mut dict, index.dictionary.len() as u64);
    for e in &index.dictionary {
        varint::write_u64(&mut dict, e.term.len() as u64);
        dict.extend_from_slice(e.term.as_bytes());
        varint::write_u64(&mut dict, u64::from(e.df));
        varint::write_u64(&mut dict, e.offset);
        varint::write_u64(&mut dict, e.len);
    }

    let mut docs = Vec::new();
    for d in &index.docs {
        varint::write_u64(&mut docs, d.id.len() as u64);
        docs.extend_from_slice(d.id.as_bytes());
        varint::write_u64(&mut docs, d.token_count);
    }

    let meta = &index.meta;
    let (kind, params) = match meta.encoder {
        EncoderConfig::FakeWords { q } => (0u8, [q, 0, 0]),
        EncoderConfig::LexicalLsh { d, n, b } => (1u8, [d, n, b]),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + dict.len() + index.postings.len() + docs.len() + 8);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, meta.format_version);
    out.push(kind);
    for p in params {
        put_u32(&mut out, p);
    }
    put_u64(&mut out, meta.num_docs);
    put_u32(&mut out, meta.dimension);
    put_u64(&mut out, dict.len() as u64);
    put_u64(&mut out, index.postings.len() as u64);
    put_u64(&mut out, docs.len() as u64);
    out.extend_from_slice(&dict);
    out.extend_from_slice(&index.postings);
    out.extend_from_slice(&docs);
    let checksum = xxhash_rust::xxh64::xxh64(&out, 0);
    put_u64(&mut out, checksum);
    out
}

struct Fixed<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Fixed<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let out = self
            .buf
            .get(self.pos..self.pos + n)
            .ok_or_else(|| corrupt("truncated header"))?;
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub(crate) fn deserialize(bytes: &[u8]) -> Result<InvertedIndex> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let mut hdr = Fixed { buf: bytes, pos: 4 };
    let version = hdr.u32()?;
    if version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported format version {version}")));
    }
    let kind = hdr.u8()?;
    let params = [hdr.u32()?, hdr.u32()?, hdr.u32()?];
    let encoder = match kind {
        0 => EncoderConfig::FakeWords { q: params[0] },
        1 => EncoderConfig::LexicalLsh {
            d: params[0],
            n: params[1],
            b: params[2],
        },
        k => return Err(corrupt(format!("unknown encoder kind {k}"))),
    };
    encoder
        .validate()
        .map_err(|e| corrupt(format!("invalid encoder parameters: {e}")))?;
    let num_docs = hdr.u64()?;
    let dimension = hdr.u32()?;
    let dict_len = hdr.u64()? as usize;
    let postings_len = hdr.u64()? as usize;
    let docs_len = hdr.u64()? as usize;

    let body_len = dict_len
        .checked_add(postings_len)
        .and_then(|x| x.checked_add(docs_len))
        .ok_or_else(|| corrupt("block lengths overflow"))?;
    if bytes.len() != HEADER_LEN + body_len + 8 {
        return Err(corrupt(format!(
            "file is {} bytes, header describes {}",
            bytes.len(),
            HEADER_LEN + body_len + 8
        )));
    }
    let (content, trailer) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(trailer.try_into().unwrap());
    if xxhash_rust::xxh64::xxh64(content, 0) != stored {
        return Err(corrupt("checksum mismatch"));
    }

    let dict_block = &content[HEADER_LEN..HEADER_LEN + dict_len];
    let postings = content[HEADER_LEN + dict_len..HEADER_LEN + dict_len + postings_len].to_vec();
    let docs_block = &content[HEADER_LEN + dict_len + postings_len..];

    let mut docs = Vec::new();
    let mut r = varint::Reader::new(docs_block);
    while !r.is_empty() {
        let len = r.u64().ok_or_else(|| corrupt("doc table"))? as usize;
        let id = r.bytes(len).ok_or_else(|| corrupt("doc table"))?;
        let id = String::from_utf8(id.to_vec()).map_err(|_| corrupt("doc id is not UTF-8"))?;
        let token_count = r.u64().ok_or_else(|| corrupt("doc table"))?;
        docs.push(DocTableEntry { id, token_count });
    }
    if docs.len() as u64 != num_docs {
        return Err(corrupt("document count disagrees with header"));
    }

    let mut dictionary = Vec::new();
    let mut r = varint::Reader::new(dict_block);
    let num_terms = r.u64().ok_or_else(|| corrupt("dictionary"))?;
    for _ in 0..num_terms {
        let len = r.u64().ok_or_else(|| corrupt("dictionary"))? as usize;
        let term = r.bytes(len).ok_or_else(|| corrupt("dictionary"))?;
        let term = String::from_utf8(term.to_vec()).map_err(|_| corrupt("term is not UTF-8"))?;
        let df = r.u64().ok_or_else(|| corrupt("dictionary"))?;
        let offset = r.u64().ok_or_else(|| corrupt("dictionary"))?;
        let len = r.u64().ok_or_else(|| corrupt("dictionary"))?;
        if dictionary
            .last()
            .is_some_and(|prev: &DictionaryEntry| prev.term >= term)
        {
            return Err(corrupt("dictionary is not sorted"));
        }
        dictionary.push(DictionaryEntry {
            term,
            df: u32::try_from(df).map_err(|_| corrupt("df overflow"))?,
            offset,
            len,
        });
    }
    if !r.is_empty() {
        return Err(corrupt("trailing bytes in dictionary"));
    }

    for e in &dictionary {
        check_postings(e, &postings, docs.len())?;
    }

    Ok(InvertedIndex {
        meta: IndexMeta {
            encoder,
            num_docs,
            dimension,
            format_version: version,
        },
        dictionary,
        postings,
        docs,
        disk_bytes: None,
    })
}

fn check_postings(e: &DictionaryEntry, postings: &[u8], num_docs: usize) -> Result<()> {
    let bad = || corrupt(format!("postings of `{}`", e.term));
    let end = e.offset.checked_add(e.len).ok_or_else(bad)?;
    let list = postings.get(e.offset as usize..end as usize).ok_or_else(bad)?;
    let mut r = varint::Reader::new(list);
    let mut last: Option<u64> = None;
    for _ in 0..e.df {
        let delta = r.u64().ok_or_else(bad)?;
        let freq = r.u64().ok_or_else(bad)?;
        let ord = match last {
            None => delta,
            Some(l) if delta > 0 => l + delta,
            Some(_) => return Err(bad()),
        };
        if ord as usize >= num_docs || freq == 0 || freq > u64::from(u32::MAX) {
            return Err(bad());
        }
        last = Some(ord);
    }
    if !r.is_empty() || e.df == 0 {
        return Err(bad());
    }
    Ok(())
}

/// Total size in bytes of the regular files directly inside `dir`.
pub fn dir_size(dir: &Path) -> Result<u64> {
    let mut total = 0;
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let md = entry.metadata().map_err(|e| Error::io(entry.path(), e))?;
        if md.is_file() {
            total += md.len();
        }
    }
    Ok(total)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

/// Writes `index` into `dir` and returns the bytes written.
///
/// Files are staged in a sibling temporary directory and renamed into place,
/// so a failed write never leaves a partial index behind. An existing `dir`
/// is replaced only if it is empty or already holds an index.
pub fn write_index(index: &InvertedIndex, dir: impl AsRef<Path>) -> Result<u64> {
    let dir = dir.as_ref();
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::env::current_dir().map_err(|e| Error::io(".", e))?,
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;

    let staging = tempfile::Builder::new()
        .prefix(".densedex-")
        .tempdir_in(&parent)
        .map_err(|e| Error::io(&parent, e))?;
    let bin = serialize(index);
    let mut manifest =
        serde_json::to_vec_pretty(&index.meta).expect("IndexMeta serializes infallibly");
    manifest.push(b'\n');
    write_file(&staging.path().join(INDEX_FILE), &bin)?;
    write_file(&staging.path().join(MANIFEST_FILE), &manifest)?;

    if dir.exists() {
        let replaceable = dir.join(MANIFEST_FILE).exists()
            || fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_none();
        if !replaceable {
            return Err(Error::io(
                dir,
                std::io::Error::new(
                    std::io::ErrorKind::AlreadyExists,
                    "output directory exists and does not contain an index",
                ),
            ));
        }
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let staged = staging.keep();
    fs::rename(&staged, dir).map_err(|e| {
        let _ = fs::remove_dir_all(&staged);
        Error::io(dir, e)
    })?;
    Ok((bin.len() + manifest.len()) as u64)
}

pub fn read_index(dir: impl AsRef<Path>) -> Result<InvertedIndex> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such index directory"),
        ));
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = fs::read(&manifest_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => corrupt(format!("missing {}", manifest_path.display())),
        _ => Error::io(&manifest_path, e),
    })?;
    let manifest: IndexMeta =
        serde_json::from_slice(&manifest).map_err(|e| corrupt(format!("manifest: {e}")))?;

    let bin_path = dir.join(INDEX_FILE);
    let bytes = fs::read(&bin_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => corrupt(format!("missing {}", bin_path.display())),
        _ => Error::io(&bin_path, e),
    })?;
    let mut index = deserialize(&bytes)?;
    if index.meta != manifest {
        return Err(corrupt("manifest disagrees with index header"));
    }
    index.set_disk_bytes(dir_size(dir)?);
    Ok(index)
}
