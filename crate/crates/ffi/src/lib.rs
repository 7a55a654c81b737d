//! C ABI over the densedex engine.
//!
//! Indexes and result sets are opaque handles owned by the caller and
//! released with their `*_free` function. Every fallible call returns a
//! [`DdxStatus`]; on failure, [`ddx_last_error`] returns a message for the
//! calling thread. Strings handed out by the library are borrowed and stay
//! valid until the owning handle is freed (or, for the error message, until
//! the next failing call on the same thread).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use densedex::{
    index_stats, read_index, DenseVector, EncoderConfig, Error, InvertedIndex, Searcher,
};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdxStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    CorruptIndex = 5,
    DimensionMismatch = 6,
    InvalidConfig = 7,
    DuplicateDocId = 8,
    EmptyCorpus = 9,
    OutOfRange = 10,
    Panic = 11,
    Other = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdxEncoding {
    FakeWords = 0,
    LexicalLsh = 1,
}

/// Encoder selection. `q` applies to fake words; `d`, `n` and `b` to
/// lexical LSH.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DdxEncoderConfig {
    pub encoding: DdxEncoding,
    pub q: u32,
    pub d: u32,
    pub n: u32,
    pub b: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DdxIndexStats {
    pub num_docs: u64,
    pub dimension: u32,
    pub distinct_terms: u64,
    pub total_postings: u64,
    pub total_tokens: u64,
    /// 0 when the index has not been read from disk.
    pub bytes_on_disk: u64,
}

/// Opaque loaded index.
pub struct DdxIndex {
    inner: InvertedIndex,
}

/// Opaque ranked result list.
pub struct DdxResults {
    ids: Vec<CString>,
    scores: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> DdxStatus {
    match err {
        Error::Io { .. } => DdxStatus::Io,
        Error::Parse { .. } => DdxStatus::Parse,
        Error::CorruptIndex(_) => DdxStatus::CorruptIndex,
        Error::DimensionMismatch { .. } => DdxStatus::DimensionMismatch,
        Error::InvalidConfig(_) | Error::EncoderMismatch { .. } => DdxStatus::InvalidConfig,
        Error::DuplicateDocId(_) => DdxStatus::DuplicateDocId,
        Error::EmptyCorpus => DdxStatus::EmptyCorpus,
        Error::OrdinalOutOfRange { .. } => DdxStatus::OutOfRange,
        Error::ZeroVector | Error::NonFinite | Error::EmptyInput => DdxStatus::InvalidArgument,
        _ => DdxStatus::Other,
    }
}

fn guard<F>(f: F) -> DdxStatus
where
    F: FnOnce() -> Result<(), DdxStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DdxStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            DdxStatus::Panic
        }
    }
}

fn fail(err: Error) -> DdxStatus {
    set_error(err.to_string());
    status_of(&err)
}

unsafe fn path_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, DdxStatus> {
    if p.is_null() {
        set_error(format!("`{name}` is null"));
        return Err(DdxStatus::NullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("`{name}` is not valid UTF-8"));
        DdxStatus::InvalidArgument
    })
}

fn encoder_of(c: &DdxEncoderConfig) -> Result<EncoderConfig, DdxStatus> {
    let config = match c.encoding {
        DdxEncoding::FakeWords => EncoderConfig::fake_words(c.q),
        DdxEncoding::LexicalLsh => EncoderConfig::lexical_lsh(c.d, c.n, c.b),
    };
    config.map_err(fail)
}

/// Message describing the last failure on this thread, or null.
#[no_mangle]
pub extern "C" fn ddx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Returns a default encoder configuration for `encoding`.
#[no_mangle]
pub extern "C" fn ddx_encoder_default(encoding: DdxEncoding) -> DdxEncoderConfig {
    DdxEncoderConfig {
        encoding,
        q: densedex::encoders::DEFAULT_FW_Q,
        d: densedex::encoders::DEFAULT_LSH_D,
        n: densedex::encoders::DEFAULT_LSH_N,
        b: densedex::encoders::DEFAULT_LSH_B,
    }
}

/// Builds an index from a JSON-lines vector file and writes it to `out_dir`.
///
/// # Safety
/// `vectors_path` and `out_dir` must be null or valid NUL-terminated strings;
/// `config` must be null or point to a valid `DdxEncoderConfig`.
#[no_mangle]
pub unsafe extern "C" fn ddx_index_build(
    vectors_path: *const c_char,
    config: *const DdxEncoderConfig,
    out_dir: *const c_char,
) -> DdxStatus {
    guard(|| {
        let input = path_arg(vectors_path, "vectors_path")?;
        let output = path_arg(out_dir, "out_dir")?;
        let config = config.as_ref().ok_or_else(|| {
            set_error("`config` is null");
            DdxStatus::NullArgument
        })?;
        let encoder = encoder_of(config)?;
        let reader = densedex::vector::read_vectors(input).map_err(fail)?;
        let index = densedex::build_index(reader, encoder).map_err(fail)?;
        densedex::write_index(&index, output).map_err(fail)?;
        Ok(())
    })
}

/// Loads an index directory. On success `*out` receives a handle to free
/// with [`ddx_index_free`].
///
/// # Safety
/// `dir` must be null or a valid NUL-terminated string; `out` must be null
/// or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn ddx_index_open(dir: *const c_char, out: *mut *mut DdxIndex) -> DdxStatus {
    guard(|| {
        if out.is_null() {
            set_error("`out` is null");
            return Err(DdxStatus::NullArgument);
        }
        *out = ptr::null_mut();
        let dir = path_arg(dir, "dir")?;
        let inner = read_index(dir).map_err(fail)?;
        *out = Box::into_raw(Box::new(DdxIndex { inner }));
        Ok(())
    })
}

/// # Safety
/// `index` must be null or a handle from [`ddx_index_open`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddx_index_free(index: *mut DdxIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// # Safety
/// `index` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn ddx_index_stats(index: *const DdxIndex, out: *mut DdxIndexStats) -> DdxStatus {
    guard(|| {
        let (Some(index), Some(out)) = (index.as_ref(), out.as_mut()) else {
            set_error("null argument");
            return Err(DdxStatus::NullArgument);
        };
        let s = index_stats(&index.inner);
        *out = DdxIndexStats {
            num_docs: index.inner.num_docs() as u64,
            dimension: index.inner.meta().dimension,
            distinct_terms: s.distinct_terms,
            total_postings: s.total_postings,
            total_tokens: s.total_tokens,
            bytes_on_disk: s.bytes_on_disk.unwrap_or(0),
        };
        Ok(())
    })
}

/// Top-`k` search for one query vector of `len` components. The query is
/// encoded with the index's own encoder. On success `*out` receives a result
/// handle to free with [`ddx_results_free`].
///
/// # Safety
/// `index` must be a live handle, `values` must point to `len` doubles, and
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn ddx_index_search(
    index: *const DdxIndex,
    values: *const f64,
    len: usize,
    k: usize,
    out: *mut *mut DdxResults,
) -> DdxStatus {
    guard(|| {
        if out.is_null() || index.is_null() || (values.is_null() && len > 0) {
            set_error("null argument");
            return Err(DdxStatus::NullArgument);
        }
        *out = ptr::null_mut();
        if k == 0 {
            set_error("k must be at least 1");
            return Err(DdxStatus::InvalidArgument);
        }
        let index = &(*index).inner;
        let values = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(values, len).to_vec()
        };
        let query = DenseVector::new("query", values);
        let list = Searcher::new(index).search_vector(&query, k).map_err(fail)?;
        let mut ids = Vec::with_capacity(list.hits.len());
        let mut scores = Vec::with_capacity(list.hits.len());
        for hit in list.hits {
            ids.push(CString::new(hit.id).map_err(|_| {
                set_error("document id contains NUL");
                DdxStatus::Other
            })?);
            scores.push(hit.score);
        }
        *out = Box::into_raw(Box::new(DdxResults { ids, scores }));
        Ok(())
    })
}

/// # Safety
/// `results` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ddx_results_len(results: *const DdxResults) -> usize {
    results.as_ref().map_or(0, |r| r.ids.len())
}

/// Document id at rank `i` (0-based), or null when out of range.
///
/// # Safety
/// `results` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ddx_results_id(results: *const DdxResults, i: usize) -> *const c_char {
    results
        .as_ref()
        .and_then(|r| r.ids.get(i))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Score at rank `i` (0-based), or NaN when out of range.
///
/// # Safety
/// `results` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn ddx_results_score(results: *const DdxResults, i: usize) -> f64 {
    results
        .as_ref()
        .and_then(|r| r.scores.get(i).copied())
        .unwrap_or(f64::NAN)
}

/// # Safety
/// `results` must be null or a handle from [`ddx_index_search`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddx_results_free(results: *mut DdxResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}
