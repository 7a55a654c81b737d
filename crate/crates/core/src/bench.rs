//! Throughput measurement and parameter sweeps.
//!
//! Timed sections cover query encoding, scoring and top-k selection only.
//! Queries are already in memory and the index is already loaded. Each
//! measurement runs one untimed warm-up pass over the full query set.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::encoders::EncoderConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, overlap_at_k, Metric, Qrels, Run};
use crate::index::{build_index, dir_size, write_index, InvertedIndex};
use crate::search::{run_queries, ExactIndex, RankedList};
use crate::vector::{normalize, DenseVector};

pub const DEFAULT_SEED: u64 = 20231125;

/// Fixed-seed isotropic Gaussian corpus with planted-neighbor queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyntheticSpec {
    pub num_docs: usize,
    pub num_queries: usize,
    pub dim: usize,
    /// Per-component standard deviation of the query perturbation, relative
    /// to the per-component scale `1/sqrt(dim)` of a unit vector.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_docs: 10_000,
            num_queries: 100,
            dim: 128,
            noise: 0.5,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Vec<DenseVector>,
    pub queries: Vec<DenseVector>,
    /// Each query judges its source document with grade 1.
    pub qrels: Qrels,
}

fn gaussian_unit(rng: &mut ChaCha8Rng, id: String, dim: usize) -> DenseVector {
    loop {
        let values: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = normalize(&DenseVector::new(id.clone(), values)) {
            return u.into_dense();
        }
    }
}

pub fn synthetic(spec: &SyntheticSpec) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let corpus: Vec<DenseVector> = (0..spec.num_docs)
        .map(|i| gaussian_unit(&mut rng, format!("d{i}"), spec.dim))
        .collect();
    let sigma = spec.noise / (spec.dim as f64).sqrt();
    let mut queries = Vec::with_capacity(spec.num_queries);
    let mut qrels = Qrels::new();
    for j in 0..spec.num_queries {
        let source = &corpus[rng.random_range(0..corpus.len())];
        let id = format!("q{j}");
        let values: Vec<f64> = source
            .values
            .iter()
            .map(|x| x + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let q = normalize(&DenseVector::new(id.clone(), values))
            .map(|u| u.into_dense())
            .unwrap_or_else(|_| source.clone());
        qrels
            .insert(&id, &source.id, 1)
            .expect("query ids are unique");
        queries.push(DenseVector::new(id, q.values));
    }
    SyntheticData {
        corpus,
        queries,
        qrels,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub trials: Vec<f64>,
    pub mean_qps: f64,
    pub workers: usize,
    pub num_queries: usize,
    pub k: usize,
}

impl BenchResult {
    pub fn from_trials(trials: Vec<f64>, workers: usize, num_queries: usize, k: usize) -> Self {
        let mean_qps = trials.iter().sum::<f64>() / trials.len().max(1) as f64;
        Self {
            trials,
            mean_qps,
            workers,
            num_queries,
            k,
        }
    }
}

fn time_trials<F>(num_queries: usize, trials: usize, mut pass: F) -> Result<Vec<f64>>
where
    F: FnMut() -> Result<()>,
{
    pass()?;
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials.max(1) {
        let start = Instant::now();
        pass()?;
        let secs = start.elapsed().as_secs_f64().max(1e-9);
        out.push(num_queries as f64 / secs);
    }
    Ok(out)
}

pub fn measure_qps(
    index: &InvertedIndex,
    queries: &[DenseVector],
    k: usize,
    workers: usize,
    trials: usize,
) -> Result<BenchResult> {
    let qps = time_trials(queries.len(), trials, || {
        run_queries(index, queries, k, workers).map(drop)
    })?;
    Ok(BenchResult::from_trials(qps, workers, queries.len(), k))
}

pub fn measure_exact_qps(
    exact: &ExactIndex,
    queries: &[DenseVector],
    k: usize,
    workers: usize,
    trials: usize,
) -> Result<BenchResult> {
    let qps = time_trials(queries.len(), trials, || exact.run(queries, k, workers).map(drop))?;
    Ok(BenchResult::from_trials(qps, workers, queries.len(), k))
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Retrieval depth for every run.
    pub depth: usize,
    /// Cutoff for the overlap-with-exact column.
    pub oracle_k: usize,
    pub metrics: Vec<Metric>,
    pub workers: usize,
    pub trials: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            depth: 1000,
            oracle_k: 10,
            metrics: vec![
                Metric::ReciprocalRank { k: 10, threshold: 1 },
                Metric::Ndcg { k: 10 },
                Metric::Recall { k: 1000, threshold: 1 },
            ],
            workers: 16,
            trials: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub label: String,
    /// Effectiveness values keyed by column name, in column order.
    pub metrics: Vec<(String, f64)>,
    pub qps: f64,
    pub bytes: u64,
}

impl SweepRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }
}

fn effectiveness(
    runs: &[RankedList],
    exact: &[RankedList],
    qrels: &Qrels,
    opts: &SweepOptions,
) -> Vec<(String, f64)> {
    let report = evaluate(&Run::from_lists(runs), qrels, &opts.metrics);
    let mut cols: Vec<(String, f64)> = opts
        .metrics
        .iter()
        .map(|m| {
            let name = m.to_string();
            let v = report.aggregate.get(&name).copied().unwrap_or(0.0);
            (name, v)
        })
        .collect();
    let overlap = if runs.is_empty() {
        0.0
    } else {
        runs.iter()
            .zip(exact)
            .map(|(a, e)| overlap_at_k(a, e, opts.oracle_k))
            .sum::<f64>()
            / runs.len() as f64
    };
    cols.push((format!("oracle_recall@{}", opts.oracle_k), overlap));
    cols
}

fn sweep_one(
    config: &EncoderConfig,
    corpus: &[DenseVector],
    queries: &[DenseVector],
    qrels: &Qrels,
    exact_runs: &[RankedList],
    opts: &SweepOptions,
) -> Result<SweepRow> {
    let index = build_index(corpus.iter().cloned().map(Ok), *config)?;
    let staging = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let dir = staging.path().join("index");
    write_index(&index, &dir)?;
    let bytes = dir_size(&dir)?;
    let runs = run_queries(&index, queries, opts.depth, opts.workers)?;
    let metrics = effectiveness(&runs, exact_runs, qrels, opts);
    let bench = measure_qps(&index, queries, opts.depth, opts.workers, opts.trials)?;
    Ok(SweepRow {
        label: config.to_string(),
        metrics,
        qps: bench.mean_qps,
        bytes,
    })
}

/// One row per configuration, in order, followed by an `exact` row for the
/// brute-force baseline (its byte count is the raw f64 vector storage).
pub fn sweep(
    corpus: &[DenseVector],
    queries: &[DenseVector],
    qrels: &Qrels,
    configs: &[EncoderConfig],
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    if configs.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one configuration".into()));
    }
    let exact = ExactIndex::from_vectors(corpus.iter().cloned().map(Ok))?;
    let exact_runs = exact.run(queries, opts.depth, opts.workers)?;

    let mut rows = Vec::with_capacity(configs.len() + 1);
    for config in configs {
        let row = sweep_one(config, corpus, queries, qrels, &exact_runs, opts).map_err(|e| {
            Error::Sweep {
                label: config.to_string(),
                source: Box::new(e),
            }
        })?;
        rows.push(row);
    }
    let exact_bench = measure_exact_qps(&exact, queries, opts.depth, opts.workers, opts.trials)?;
    rows.push(SweepRow {
        label: "exact".into(),
        metrics: effectiveness(&exact_runs, &exact_runs, qrels, opts),
        qps: exact_bench.mean_qps,
        bytes: exact.bytes(),
    });
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> io::Result<()> {
    let Some(first) = rows.first() else {
        return Ok(());
    };
    let mut header = vec!["label".to_string()];
    header.extend(first.metrics.iter().map(|(n, _)| n.clone()));
    header.push("qps".into());
    header.push("bytes".into());
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let mut line = csv_field(&row.label);
        for (_, v) in &row.metrics {
            write!(line, ",{v:.6}").unwrap();
        }
        write!(line, ",{:.2},{}", row.qps, row.bytes).unwrap();
        writeln!(out, "{line}")?;
    }
    out.flush()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Aligned plain-text rendering of sweep rows.
pub fn format_table(rows: &[SweepRow]) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let mut header = vec!["label".to_string()];
    header.extend(first.metrics.iter().map(|(n, _)| n.clone()));
    header.push("QPS".into());
    header.push("bytes".into());
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.label.clone()];
            cells.extend(r.metrics.iter().map(|(_, v)| format!("{v:.4}")));
            cells.push(format!("{:.2}", r.qps));
            cells.push(r.bytes.to_string());
            cells
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            body.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&body) {
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                write!(out, "{cell:<w$}", w = widths[c]).unwrap();
            } else {
                write!(out, "  {cell:>w$}", w = widths[c]).unwrap();
            }
        }
        out.push('\n');
    }
    out
}
