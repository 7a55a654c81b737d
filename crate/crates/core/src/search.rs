//! Top-k retrieval.
//!
//! [`Searcher`] scores term bags against an [`InvertedIndex`] with a classic
//! tf-idf similarity, term at a time:
//!
//! ```text
//! score(q, d) = coord(q, d) * sum_{t in q ∩ d} qtf(t) * sqrt(f(t, d)) * idf(t)^2 / sqrt(len(d))
//! idf(t)      = 1 + ln(N / (df(t) + 1))
//! coord(q, d) = |distinct query terms found in d| / |distinct query terms|
//! ```
//!
//! [`ExactIndex`] is the brute-force cosine baseline used as ground truth.
//! Everything ranks by descending score, ties broken by ascending external id.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::io::{self, Write};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use serde::{Deserialize, Serialize};

use crate::encoders::{EncoderConfig, TermBag};
use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::vector::{self, DenseVector, UnitVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub hits: Vec<ScoredDoc>,
}

impl RankedList {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.id.as_str())
    }
}

pub fn idf(num_docs: u64, df: u64) -> f64 {
    1.0 + (num_docs as f64 / (df as f64 + 1.0)).ln()
}

/// Ranking order: higher score first, then smaller id.
pub fn rank_cmp(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

struct Candidate<'a> {
    score: f64,
    id: &'a str,
}

// `Greater` means "ranks worse", so the max-heap top is the weakest hit.
impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_cmp(self.score, self.id, other.score, other.id)
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

/// Bounded top-k selection.
pub(crate) struct TopK<'a> {
    k: usize,
    heap: BinaryHeap<Candidate<'a>>,
}

impl<'a> TopK<'a> {
    pub(crate) fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k.min(1 << 16) + 1),
        }
    }

    pub(crate) fn push(&mut self, score: f64, id: &'a str) {
        if self.k == 0 {
            return;
        }
        let c = Candidate { score, id };
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(worst) = self.heap.peek() {
            if c < *worst {
                self.heap.pop();
                self.heap.push(c);
            }
        }
    }

    pub(crate) fn into_hits(self) -> Vec<ScoredDoc> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| ScoredDoc {
                id: c.id.to_owned(),
                score: c.score,
            })
            .collect()
    }
}

/// Per-worker scoring state over a shared index.
pub struct Searcher<'a> {
    index: &'a InvertedIndex,
    acc: Vec<f64>,
    matched: Vec<u32>,
    touched: Vec<u32>,
}

impl<'a> Searcher<'a> {
    pub fn new(index: &'a InvertedIndex) -> Self {
        let n = index.num_docs();
        Self {
            index,
            acc: vec![0.0; n],
            matched: vec![0; n],
            touched: Vec::new(),
        }
    }

    /// Scores an already-encoded query bag.
    pub fn search_bag(&mut self, bag: &TermBag, k: usize) -> Vec<ScoredDoc> {
        let distinct = bag.len();
        if distinct == 0 || k == 0 {
            return Vec::new();
        }
        let n = self.index.num_docs() as u64;
        for (term, qtf) in bag.iter() {
            let Some((df, postings)) = self.index.lookup(term.as_str()) else {
                continue;
            };
            let w = f64::from(qtf) * idf(n, u64::from(df)).powi(2);
            for p in postings {
                let o = p.ordinal as usize;
                if self.matched[o] == 0 {
                    self.touched.push(p.ordinal);
                }
                self.matched[o] += 1;
                self.acc[o] += w * f64::from(p.freq).sqrt();
            }
        }

        let docs = self.index.docs();
        let mut top = TopK::new(k);
        for &o in &self.touched {
            let o = o as usize;
            let doc = &docs[o];
            if doc.token_count > 0 {
                let coord = f64::from(self.matched[o]) / distinct as f64;
                let score = coord * self.acc[o] / (doc.token_count as f64).sqrt();
                top.push(score, &doc.id);
            }
            self.acc[o] = 0.0;
            self.matched[o] = 0;
        }
        self.touched.clear();
        top.into_hits()
    }

    /// Encodes `query` with the index's encoder and scores it.
    pub fn search_vector(&mut self, query: &DenseVector, k: usize) -> Result<RankedList> {
        let bag = encode_query(self.index, query)?;
        Ok(RankedList {
            query_id: query.id.clone(),
            hits: self.search_bag(&bag, k),
        })
    }
}

/// Encodes a query exactly as documents of `index` were encoded.
pub fn encode_query(index: &InvertedIndex, query: &DenseVector) -> Result<TermBag> {
    let m = index.meta().dimension as usize;
    if query.dim() != m {
        return Err(Error::dims(m, query.dim()));
    }
    index.encoder().encode(query)
}

/// Scores one bag. `encoder` must be the configuration that produced `bag`.
pub fn score_query(
    index: &InvertedIndex,
    query_id: &str,
    bag: &TermBag,
    encoder: &EncoderConfig,
    k: usize,
) -> Result<RankedList> {
    if encoder != index.encoder() {
        return Err(Error::EncoderMismatch {
            query: encoder.to_string(),
            index: index.encoder().to_string(),
        });
    }
    Ok(RankedList {
        query_id: query_id.to_owned(),
        hits: Searcher::new(index).search_bag(bag, k),
    })
}

/// Applies `f` to every item on `workers` threads, each with its own state
/// from `init`. Results come back in input order; the first error in input
/// order wins.
pub(crate) fn parallel_ordered<T, S, R, I, F>(
    items: &[T],
    workers: usize,
    init: I,
    f: F,
) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &T) -> Result<R> + Sync,
{
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        let mut state = init();
        return items.iter().map(|it| f(&mut state, it)).collect();
    }
    let next = AtomicUsize::new(0);
    let mut parts: Vec<Vec<(usize, Result<R>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut state = init();
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, AtomicOrdering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        out.push((i, f(&mut state, item)));
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("query worker panicked"))
            .collect()
    });
    let mut slots: Vec<Option<Result<R>>> = (0..items.len()).map(|_| None).collect();
    for part in parts.drain(..) {
        for (i, r) in part {
            slots[i] = Some(r);
        }
    }
    slots
        .into_iter()
        .map(|s| s.expect("every query is processed"))
        .collect()
}

/// Runs every query against `index` on `workers` threads. Output order is
/// input order, independent of the worker count.
pub fn run_queries(
    index: &InvertedIndex,
    queries: &[DenseVector],
    k: usize,
    workers: usize,
) -> Result<Vec<RankedList>> {
    parallel_ordered(queries, workers, || Searcher::new(index), |s, q| s.search_vector(q, k))
}

/// Unit-normalized corpus held in memory for exhaustive dot-product search.
#[derive(Debug, Clone)]
pub struct ExactIndex {
    vectors: Vec<UnitVector>,
}

impl ExactIndex {
    pub fn from_vectors<I>(vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = Result<DenseVector>>,
    {
        let mut out: Vec<UnitVector> = Vec::new();
        let mut ids = HashSet::new();
        for v in vectors {
            let v = v?;
            if let Some(first) = out.first() {
                if first.dim() != v.dim() {
                    return Err(Error::dims(first.dim(), v.dim()));
                }
            }
            if !ids.insert(v.id.clone()) {
                return Err(Error::DuplicateDocId(v.id));
            }
            out.push(vector::normalize(&v)?);
        }
        Ok(Self { vectors: out })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.vectors.first().map(UnitVector::dim)
    }

    pub fn vectors(&self) -> &[UnitVector] {
        &self.vectors
    }

    /// In-memory size of the stored components.
    pub fn bytes(&self) -> u64 {
        self.vectors
            .iter()
            .map(|v| (v.dim() * std::mem::size_of::<f64>()) as u64)
            .sum()
    }

    /// Exact top-k by cosine similarity (the query is normalized first).
    pub fn search(&self, query: &DenseVector, k: usize) -> Result<RankedList> {
        let q = vector::normalize(query)?;
        let mut top = TopK::new(k);
        for v in &self.vectors {
            top.push(vector::dot(q.values(), v.values())?, v.id());
        }
        Ok(RankedList {
            query_id: query.id.clone(),
            hits: top.into_hits(),
        })
    }

    pub fn run(&self, queries: &[DenseVector], k: usize, workers: usize) -> Result<Vec<RankedList>> {
        parallel_ordered(queries, workers, || (), |_, q| self.search(q, k))
    }
}

pub fn exact_search<I>(vectors: I, query: &DenseVector, k: usize) -> Result<RankedList>
where
    I: IntoIterator<Item = Result<DenseVector>>,
{
    ExactIndex::from_vectors(vectors)?.search(query, k)
}

/// Writes TREC run lines: `<qid> Q0 <docid> <rank> <score> <tag>`.
pub fn write_run<W: Write>(mut out: W, lists: &[RankedList], tag: &str) -> io::Result<()> {
    for list in lists {
        for (rank, hit) in list.hits.iter().enumerate() {
            writeln!(
                out,
                "{} Q0 {} {} {:.6} {}",
                list.query_id,
                hit.id,
                rank + 1,
                hit.score,
                tag
            )?;
        }
    }
    out.flush()
}

pub fn run_to_string(lists: &[RankedList], tag: &str) -> String {
    let mut buf = Vec::new();
    write_run(&mut buf, lists, tag).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("run output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::Term;
    use crate::index::IndexBuilder;

    fn bag(entries: &[(&str, u32)]) -> TermBag {
        entries
            .iter()
            .map(|&(t, f)| (Term::new(t).unwrap(), f))
            .collect()
    }

    const FW: EncoderConfig = EncoderConfig::FakeWords { q: 10 };

    #[test]
    fn idf_examples() {
        assert!((idf(8, 3) - (1.0 + 2f64.ln())).abs() < 1e-12);
        assert!((idf(8, 3) - 1.6931).abs() < 1e-4);
        assert_eq!(idf(1, 0), 1.0);
        assert!((idf(2, 2) - 0.5945).abs() < 1e-4);
    }

    #[test]
    fn hand_computed_score() {
        let mut b = IndexBuilder::new(FW, 2).unwrap();
        b.add("doc0", &bag(&[("t", 4)])).unwrap();
        b.add("doc1", &bag(&[("u", 3)])).unwrap();
        let idx = b.finish().unwrap();
        let run = score_query(&idx, "q", &bag(&[("t", 2)]), &FW, 10).unwrap();
        assert_eq!(run.hits.len(), 1);
        assert_eq!(run.hits[0].id, "doc0");
        assert!((run.hits[0].score - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unmatched_query_is_empty() {
        let mut b = IndexBuilder::new(FW, 2).unwrap();
        b.add("doc0", &bag(&[("t", 4)])).unwrap();
        let idx = b.finish().unwrap();
        let run = score_query(&idx, "q", &bag(&[("zz", 1)]), &FW, 10).unwrap();
        assert!(run.hits.is_empty());
        let run = score_query(&idx, "q", &TermBag::new(), &FW, 10).unwrap();
        assert!(run.hits.is_empty());
    }

    #[test]
    fn coord_counts_unmatched_query_terms() {
        let mut b = IndexBuilder::new(FW, 2).unwrap();
        b.add("doc0", &bag(&[("t", 1)])).unwrap();
        let idx = b.finish().unwrap();
        let one = score_query(&idx, "q", &bag(&[("t", 1)]), &FW, 1).unwrap();
        let two = score_query(&idx, "q", &bag(&[("t", 1), ("zz", 1)]), &FW, 1).unwrap();
        assert!((two.hits[0].score - one.hits[0].score / 2.0).abs() < 1e-12);
    }

    #[test]
    fn encoder_mismatch() {
        let mut b = IndexBuilder::new(FW, 2).unwrap();
        b.add("doc0", &bag(&[("t", 1)])).unwrap();
        let idx = b.finish().unwrap();
        let other = EncoderConfig::FakeWords { q: 20 };
        assert!(matches!(
            score_query(&idx, "q", &bag(&[("t", 1)]), &other, 1),
            Err(Error::EncoderMismatch { .. })
        ));
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let mut b = IndexBuilder::new(FW, 2).unwrap();
        for id in ["c", "a", "b"] {
            b.add(id, &bag(&[("t", 1)])).unwrap();
        }
        let idx = b.finish().unwrap();
        let run = score_query(&idx, "q", &bag(&[("t", 1)]), &FW, 2).unwrap();
        let ids: Vec<_> = run.ids().collect();
        assert_eq!(ids, vec!["a", "b"]);
    }

    #[test]
    fn exact_search_examples() {
        let corpus = vec![
            DenseVector::new("x", vec![1.0, 0.0]),
            DenseVector::new("y", vec![0.0, 2.0]),
            DenseVector::new("z", vec![1.0, 1.0]),
        ];
        let q = DenseVector::new("q", vec![0.0, 5.0]);
        let run = exact_search(corpus.clone().into_iter().map(Ok), &q, 10).unwrap();
        let ids: Vec<_> = run.ids().collect();
        assert_eq!(ids, vec!["y", "z", "x"]);
        assert!((run.hits[0].score - 1.0).abs() < 1e-9);

        let bad = DenseVector::new("q", vec![1.0]);
        assert!(matches!(
            exact_search(corpus.into_iter().map(Ok), &bad, 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn run_format() {
        let lists = vec![RankedList {
            query_id: "q1".into(),
            hits: vec![
                ScoredDoc { id: "d1".into(), score: 1.5 },
                ScoredDoc { id: "d2".into(), score: 0.25 },
            ],
        }];
        assert_eq!(
            run_to_string(&lists, "tag"),
            "q1 Q0 d1 1 1.500000 tag\nq1 Q0 d2 2 0.250000 tag\n"
        );
    }

    #[test]
    fn empty_query_stream() {
        let mut b = IndexBuilder::new(FW, 2).unwrap();
        b.add("doc0", &bag(&[("t", 1)])).unwrap();
        let idx = b.finish().unwrap();
        assert!(run_queries(&idx, &[], 10, 4).unwrap().is_empty());
    }
}
