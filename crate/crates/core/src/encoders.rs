//! Vector-to-term encoders.
//!
//! Two encodings turn a vector into a bag of index terms:
//!
//! * **Fake words**: dimension `i` becomes the term `f<i>p` (positive
//!   component) or `f<i>n` (negative component), repeated
//!   `floor(Q * |v_i|)` times, so term frequency tracks feature magnitude.
//! * **Lexical LSH**: each component is rounded to `d` decimals and tagged
//!   with its 1-based position (`3_0.7`), the tokens are shingled into
//!   `n`-grams, and the n-gram set is MinHashed into `b` buckets. Each
//!   bucket yields one `lsh_<bucket>_<hash>` term.
//!
//! Term text is load-bearing: an index built with one encoder can only be
//! queried with bags produced by the same encoder and parameters.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{self, DenseVector, UnitVector};

pub const DEFAULT_FW_Q: u32 = 40;
pub const DEFAULT_LSH_D: u32 = 1;
pub const DEFAULT_LSH_N: u32 = 2;
pub const DEFAULT_LSH_B: u32 = 400;

/// Largest supported rounding precision for lexical tokens.
pub const MAX_LSH_D: u32 = 15;

/// A single index vocabulary item.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term(String);

impl Term {
    /// Builds a term, rejecting empty text and text containing whitespace.
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!("invalid term text {text:?}")));
        }
        Ok(Term(text))
    }

    // Caller guarantees the encoder format never produces whitespace.
    fn from_encoder(text: String) -> Self {
        debug_assert!(!text.is_empty() && !text.contains(char::is_whitespace));
        Term(text)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Multiset of terms, iterated in term order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermBag {
    entries: BTreeMap<Term, u32>,
}

impl TermBag {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `freq` occurrences of `term`. Zero frequencies are ignored.
    pub fn add(&mut self, term: Term, freq: u32) {
        if freq > 0 {
            *self.entries.entry(term).or_insert(0) += freq;
        }
    }

    pub fn get(&self, term: &str) -> Option<u32> {
        self.entries.get(&Term(term.to_owned())).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Term, u32)> {
        self.entries.iter().map(|(t, &f)| (t, f))
    }

    /// Number of distinct terms.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of all frequencies.
    pub fn token_count(&self) -> u64 {
        self.entries.values().map(|&f| u64::from(f)).sum()
    }
}

impl FromIterator<(Term, u32)> for TermBag {
    fn from_iter<I: IntoIterator<Item = (Term, u32)>>(iter: I) -> Self {
        let mut bag = TermBag::new();
        for (t, f) in iter {
            bag.add(t, f);
        }
        bag
    }
}

/// Encoder selection and parameters. Persisted with every index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderConfig {
    FakeWords { q: u32 },
    LexicalLsh { d: u32, n: u32, b: u32 },
}

impl EncoderConfig {
    pub fn fake_words(q: u32) -> Result<Self> {
        let c = EncoderConfig::FakeWords { q };
        c.validate()?;
        Ok(c)
    }

    pub fn lexical_lsh(d: u32, n: u32, b: u32) -> Result<Self> {
        let c = EncoderConfig::LexicalLsh { d, n, b };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EncoderConfig::FakeWords { q } if q < 2 => Err(Error::InvalidConfig(format!(
                "quantization factor Q must be >= 2, got {q}"
            ))),
            EncoderConfig::LexicalLsh { d, .. } if !(1..=MAX_LSH_D).contains(&d) => Err(
                Error::InvalidConfig(format!("decimals d must be in 1..={MAX_LSH_D}, got {d}")),
            ),
            EncoderConfig::LexicalLsh { n, .. } if n < 1 => Err(Error::InvalidConfig(format!(
                "n-gram size n must be >= 1, got {n}"
            ))),
            EncoderConfig::LexicalLsh { b, .. } if b < 1 => Err(Error::InvalidConfig(format!(
                "bucket count b must be >= 1, got {b}"
            ))),
            _ => Ok(()),
        }
    }

    /// Encodes a raw vector. Fake words normalizes first; lexical LSH works
    /// on the raw components.
    pub fn encode(&self, v: &DenseVector) -> Result<TermBag> {
        match *self {
            EncoderConfig::FakeWords { q } => Ok(encode_fake_words(&vector::normalize(v)?, q)),
            EncoderConfig::LexicalLsh { d, n, b } => encode_lexical_lsh(v, d, n, b),
        }
    }
}

impl fmt::Display for EncoderConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EncoderConfig::FakeWords { q } => write!(f, "FW Q={q}"),
            EncoderConfig::LexicalLsh { d, n, b } => write!(f, "LexLSH b={b} d={d} n={n}"),
        }
    }
}

pub fn encode_fake_words(v: &UnitVector, q: u32) -> TermBag {
    let mut bag = TermBag::new();
    for (i, &x) in v.values().iter().enumerate() {
        let count = vector::quantize_component(x, q);
        if count != 0 {
            let sign = if count > 0 { 'p' } else { 'n' };
            bag.add(Term::from_encoder(format!("f{i}{sign}")), count.unsigned_abs());
        }
    }
    bag
}

/// Position-tagged decimal tokens, `<i+1>_<value>`, with the value rounded
/// half away from zero and rendered with exactly `d` decimals.
pub fn lex_tokens(v: &DenseVector, d: u32) -> Vec<String> {
    let scale = 10f64.powi(d as i32);
    let prec = d as usize;
    v.values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut r = (x * scale).round();
            if r == 0.0 {
                // drop the sign of negative zero
                r = 0.0;
            }
            format!("{}_{:.prec$}", i + 1, r / scale)
        })
        .collect()
}

/// Overlapping windows of `n` tokens joined by single spaces. Inputs shorter
/// than `n` yield one shingle holding every token.
pub fn shingle(tokens: &[String], n: usize) -> Vec<String> {
    debug_assert!(n >= 1);
    if tokens.is_empty() {
        return Vec::new();
    }
    if tokens.len() < n {
        return vec![tokens.join(" ")];
    }
    tokens.windows(n).map(|w| w.join(" ")).collect()
}

/// Seed for [`stable_hash64`].
pub const HASH_SEED: u64 = 0;

/// XXH64 with seed 0. Stable across runs, processes and platforms.
pub fn stable_hash64(bytes: &[u8]) -> u64 {
    xxhash_rust::xxh64::xxh64(bytes, HASH_SEED)
}

/// One-permutation MinHash over `b` equal ranges of the 64-bit hash space.
///
/// Each n-gram lands in bucket `floor(b * h / 2^64)`; a bucket keeps its
/// smallest hash. Empty buckets borrow the value of the next non-empty
/// bucket, wrapping around, so exactly `b` terms come out.
pub fn minhash_signature<S: AsRef<str>>(ngrams: &[S], b: u32) -> Result<Vec<Term>> {
    if ngrams.is_empty() {
        return Err(Error::EmptyInput);
    }
    if b == 0 {
        return Err(Error::InvalidConfig("bucket count b must be >= 1".into()));
    }
    let mut mins: Vec<Option<u64>> = vec![None; b as usize];
    for g in ngrams {
        let h = stable_hash64(g.as_ref().as_bytes());
        let bucket = ((u128::from(b) * u128::from(h)) >> 64) as usize;
        let slot = &mut mins[bucket];
        *slot = Some(slot.map_or(h, |m| m.min(h)));
    }

    let len = mins.len();
    let mut filled = vec![0u64; len];
    // Walk backwards twice around the ring so every empty bucket sees the
    // nearest non-empty successor.
    let mut carry = None;
    for step in 0..2 * len {
        let i = len - 1 - (step % len);
        if let Some(h) = mins[i] {
            carry = Some(h);
        }
        if let Some(h) = carry {
            filled[i] = h;
        }
    }

    Ok(filled
        .iter()
        .enumerate()
        .map(|(bucket, h)| Term::from_encoder(format!("lsh_{bucket}_{h:016x}")))
        .collect())
}

pub fn encode_lexical_lsh(v: &DenseVector, d: u32, n: u32, b: u32) -> Result<TermBag> {
    EncoderConfig::LexicalLsh { d, n, b }.validate()?;
    let grams = shingle(&lex_tokens(v, d), n as usize);
    Ok(minhash_signature(&grams, b)?
        .into_iter()
        .map(|t| (t, 1))
        .collect())
}
