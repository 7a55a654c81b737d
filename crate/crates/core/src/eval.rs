//! TREC-style effectiveness evaluation.
//!
//! nDCG uses linear gain (`grade / log2(rank + 1)`), as trec_eval does.
//! Binarizing metrics take a relevance threshold (default 1). Queries are
//! evaluated only when they appear in both the run and the qrels, and each
//! metric skips queries for which it is undefined (no relevant documents, or
//! an ideal DCG of zero).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::search::RankedList;

/// Judgments for one query: doc id to grade.
pub type Judgments = BTreeMap<String, u32>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    queries: BTreeMap<String, Judgments>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: &str, doc: &str, grade: u32) -> Result<()> {
        let judged = self.queries.entry(query.to_owned()).or_default();
        if judged.insert(doc.to_owned(), grade).is_some() {
            return Err(Error::DuplicatePair {
                query: query.to_owned(),
                doc: doc.to_owned(),
            });
        }
        Ok(())
    }

    pub fn grade(&self, query: &str, doc: &str) -> Option<u32> {
        self.queries.get(query)?.get(doc).copied()
    }

    pub fn judgments(&self, query: &str) -> Option<&Judgments> {
        self.queries.get(query)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut qrels = Qrels::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Io {
                context: format!("qrels line {line_no}"),
                source: e,
            })?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let [query, _, doc, grade] = fields[..] else {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 4 columns, found {}", fields.len()),
                });
            };
            let grade: u32 = grade.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid relevance grade `{grade}`"),
            })?;
            qrels.insert(query, doc, grade)?;
        }
        Ok(qrels)
    }

    pub fn write_to<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for (q, judged) in &self.queries {
            for (d, g) in judged {
                writeln!(out, "{q} 0 {d} {g}")?;
            }
        }
        out.flush()
    }
}

pub fn parse_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Qrels::from_reader(BufReader::new(f))
}

/// Ranked doc ids per query.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Run {
    queries: BTreeMap<String, Vec<String>>,
}

impl Run {
    pub fn from_lists(lists: &[RankedList]) -> Self {
        let queries = lists
            .iter()
            .map(|l| (l.query_id.clone(), l.ids().map(str::to_owned).collect()))
            .collect();
        Self { queries }
    }

    pub fn ranking(&self, query: &str) -> Option<&[String]> {
        self.queries.get(query).map(Vec::as_slice)
    }

    pub fn queries(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.queries.iter().map(|(q, r)| (q.as_str(), r.as_slice()))
    }

    /// Parses TREC run lines `<qid> Q0 <docid> <rank> <score> <tag>`.
    /// Documents are ordered by the rank column; a repeated document within
    /// one query keeps its first occurrence.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut raw: BTreeMap<String, Vec<(u64, usize, String)>> = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Io {
                context: format!("run line {line_no}"),
                source: e,
            })?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let [query, _, doc, rank, score, _] = fields[..] else {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 6 columns, found {}", fields.len()),
                });
            };
            let rank: u64 = rank.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid rank `{rank}`"),
            })?;
            score.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid score `{score}`"),
            })?;
            raw.entry(query.to_owned())
                .or_default()
                .push((rank, line_no, doc.to_owned()));
        }
        let queries = raw
            .into_iter()
            .map(|(q, mut hits)| {
                hits.sort();
                let mut seen = HashSet::new();
                let docs = hits
                    .into_iter()
                    .filter_map(|(_, _, d)| seen.insert(d.clone()).then_some(d))
                    .collect();
                (q, docs)
            })
            .collect();
        Ok(Self { queries })
    }
}

pub fn parse_run(path: impl AsRef<Path>) -> Result<Run> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Run::from_reader(BufReader::new(f))
}

fn grade_of(judged: &Judgments, doc: &str) -> u32 {
    judged.get(doc).copied().unwrap_or(0)
}

/// Reciprocal rank of the first document graded at least `threshold` within
/// the top `k`, or 0.
pub fn rr_at_k<S: AsRef<str>>(ranking: &[S], judged: &Judgments, k: usize, threshold: u32) -> f64 {
    ranking
        .iter()
        .take(k)
        .position(|d| grade_of(judged, d.as_ref()) >= threshold)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// nDCG@k with linear gain, or `None` when the ideal DCG is zero.
pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], judged: &Judgments, k: usize) -> Option<f64> {
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| f64::from(grade_of(judged, d.as_ref())) / discount(i))
        .sum();
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| f64::from(g) / discount(i))
        .sum();
    (idcg > 0.0).then(|| dcg / idcg)
}

/// Fraction of documents graded at least `threshold` that appear in the top `k`.
pub fn recall_at_k<S: AsRef<str>>(
    ranking: &[S],
    judged: &Judgments,
    k: usize,
    threshold: u32,
) -> Result<f64> {
    let relevant = judged.values().filter(|&&g| g >= threshold).count();
    if relevant == 0 {
        return Err(Error::NoRelevantDocs);
    }
    let found = ranking
        .iter()
        .take(k)
        .filter(|d| grade_of(judged, d.as_ref()) >= threshold)
        .count();
    Ok(found as f64 / relevant as f64)
}

/// Fraction of the exact top-k recovered by an approximate top-k.
pub fn overlap_at_k(approx: &RankedList, exact: &RankedList, k: usize) -> f64 {
    let truth: HashSet<&str> = exact.ids().take(k).collect();
    if truth.is_empty() {
        return 0.0;
    }
    let hit = approx.ids().take(k).filter(|id| truth.contains(id)).count();
    hit as f64 / truth.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    ReciprocalRank { k: usize, threshold: u32 },
    Ndcg { k: usize },
    Recall { k: usize, threshold: u32 },
}

impl Metric {
    /// `None` when the metric is undefined for this query.
    pub fn compute<S: AsRef<str>>(&self, ranking: &[S], judged: &Judgments) -> Option<f64> {
        match *self {
            Metric::ReciprocalRank { k, threshold } => {
                judged
                    .values()
                    .any(|&g| g >= threshold)
                    .then(|| rr_at_k(ranking, judged, k, threshold))
            }
            Metric::Ndcg { k } => ndcg_at_k(ranking, judged, k),
            Metric::Recall { k, threshold } => recall_at_k(ranking, judged, k, threshold).ok(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, k, threshold) = match *self {
            Metric::ReciprocalRank { k, threshold } => ("rr", k, threshold),
            Metric::Ndcg { k } => ("ndcg", k, 1),
            Metric::Recall { k, threshold } => ("recall", k, threshold),
        };
        write!(f, "{name}@{k}")?;
        if threshold != 1 {
            write!(f, ":{threshold}")?;
        }
        Ok(())
    }
}

/// Parses `rr@10`, `ndcg@10`, `recall@1000`, with an optional `:<threshold>`
/// suffix on the binarizing metrics (`recall@1000:2`).
impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownMetric(s.to_owned());
        let lower = s.trim().to_ascii_lowercase();
        let (name, rest) = lower.split_once('@').ok_or_else(unknown)?;
        let (k, threshold) = match rest.split_once(':') {
            Some((k, t)) => (k, Some(t.parse::<u32>().map_err(|_| unknown())?)),
            None => (rest, None),
        };
        let k: usize = k.parse().map_err(|_| unknown())?;
        if k == 0 || threshold == Some(0) {
            return Err(unknown());
        }
        let t = threshold.unwrap_or(1);
        match name {
            "rr" | "mrr" => Ok(Metric::ReciprocalRank { k, threshold: t }),
            "ndcg" if threshold.is_none() => Ok(Metric::Ndcg { k }),
            "recall" | "r" => Ok(Metric::Recall { k, threshold: t }),
            _ => Err(unknown()),
        }
    }
}

pub fn parse_metrics(list: &str) -> Result<Vec<Metric>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Mean per metric over the queries where it is defined.
    pub aggregate: BTreeMap<String, f64>,
    /// Number of queries averaged per metric.
    pub num_queries: BTreeMap<String, usize>,
    pub per_query: BTreeMap<String, BTreeMap<String, f64>>,
}

pub fn evaluate(run: &Run, qrels: &Qrels, metrics: &[Metric]) -> EvalReport {
    let mut per_query: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut sums: BTreeMap<String, (f64, usize)> = metrics
        .iter()
        .map(|m| (m.to_string(), (0.0, 0)))
        .collect();
    for (query, ranking) in run.queries() {
        let Some(judged) = qrels.judgments(query) else {
            continue;
        };
        for m in metrics {
            if let Some(v) = m.compute(ranking, judged) {
                let name = m.to_string();
                per_query.entry(query.to_owned()).or_default().insert(name.clone(), v);
                let slot = sums.get_mut(&name).expect("metric registered");
                slot.0 += v;
                slot.1 += 1;
            }
        }
    }
    let aggregate = sums
        .iter()
        .map(|(name, &(sum, n))| (name.clone(), if n == 0 { 0.0 } else { sum / n as f64 }))
        .collect();
    let num_queries = sums.iter().map(|(name, &(_, n))| (name.clone(), n)).collect();
    EvalReport {
        aggregate,
        num_queries,
        per_query,
    }
}
