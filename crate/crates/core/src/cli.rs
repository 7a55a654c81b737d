//! Command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bench::{self, SweepOptions, SyntheticSpec};
use crate::encoders::{self, EncoderConfig};
use crate::error::{Error, Result};
use crate::eval;
use crate::index::{self, read_index, write_index};
use crate::search::{self, ExactIndex};
use crate::vector::{self, load_vectors};

#[derive(Debug, Parser)]
#[command(name = "densedex", version, about = "Dense-vector retrieval with inverted indexes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a vector file and write an index directory.
    Index(IndexArgs),
    /// Search an index with a query vector file and write a TREC run.
    Search(SearchArgs),
    /// Exhaustive cosine search over a vector file (ground truth run).
    SearchExact(SearchExactArgs),
    /// Evaluate a TREC run against qrels.
    Eval(EvalArgs),
    /// Measure query throughput of an index.
    Bench(BenchArgs),
    /// Build, search, evaluate and time a list of encoder configurations.
    Sweep(SweepArgs),
    /// Generate a synthetic corpus, planted-neighbor queries and qrels.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Encoding {
    Fw,
    Lexlsh,
}

#[derive(Debug, Args)]
pub struct EncoderFlags {
    #[arg(long, value_enum, default_value = "fw")]
    pub encoding: Encoding,
    /// Fake-words quantization factor Q.
    #[arg(long = "fw-q", default_value_t = encoders::DEFAULT_FW_Q,
          value_parser = clap::value_parser!(u32).range(2..))]
    pub fw_q: u32,
    /// Lexical LSH rounding decimals d.
    #[arg(long = "lsh-d", default_value_t = encoders::DEFAULT_LSH_D,
          value_parser = clap::value_parser!(u32).range(1..=i64::from(encoders::MAX_LSH_D)))]
    pub lsh_d: u32,
    /// Lexical LSH n-gram size n.
    #[arg(long = "lsh-n", default_value_t = encoders::DEFAULT_LSH_N,
          value_parser = clap::value_parser!(u32).range(1..))]
    pub lsh_n: u32,
    /// Lexical LSH bucket count b.
    #[arg(long = "lsh-b", default_value_t = encoders::DEFAULT_LSH_B,
          value_parser = clap::value_parser!(u32).range(1..))]
    pub lsh_b: u32,
}

impl EncoderFlags {
    fn config(&self) -> EncoderConfig {
        match self.encoding {
            Encoding::Fw => EncoderConfig::FakeWords { q: self.fw_q },
            Encoding::Lexlsh => EncoderConfig::LexicalLsh {
                d: self.lsh_d,
                n: self.lsh_n,
                b: self.lsh_b,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub encoder: EncoderFlags,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
    /// Run file path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "densedex")]
    pub tag: String,
}

#[derive(Debug, Args)]
pub struct SearchExactArgs {
    /// Corpus vector file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "exact")]
    pub tag: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    /// Comma-separated metrics, e.g. `rr@10,ndcg@10,recall@1000:2`.
    #[arg(long, default_value = "rr@10,ndcg@10,recall@1000")]
    pub metrics: String,
    /// Include per-query values in the report.
    #[arg(long)]
    pub per_query: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SyntheticFlags {
    #[arg(long, default_value_t = 10_000)]
    pub docs: usize,
    #[arg(long = "num-queries", default_value_t = 100)]
    pub num_queries: usize,
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    #[arg(long, default_value_t = bench::DEFAULT_SEED)]
    pub seed: u64,
}

impl SyntheticFlags {
    fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            num_docs: self.docs,
            num_queries: self.num_queries,
            dim: self.dim as usize,
            noise: self.noise,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Corpus vector file (omit with --synthetic).
    #[arg(long, required_unless_present = "synthetic")]
    pub input: Option<PathBuf>,
    #[arg(long, required_unless_present = "synthetic")]
    pub queries: Option<PathBuf>,
    #[arg(long, required_unless_present = "synthetic")]
    pub qrels: Option<PathBuf>,
    /// Generate the corpus instead of reading files.
    #[arg(long, conflicts_with_all = ["input", "queries", "qrels"])]
    pub synthetic: bool,
    #[command(flatten)]
    pub data: SyntheticFlags,
    #[arg(long, value_enum, default_value = "fw")]
    pub encoding: Encoding,
    #[arg(long = "fw-q", value_delimiter = ',', default_value = "10,20,40",
          value_parser = clap::value_parser!(u32).range(2..))]
    pub fw_q: Vec<u32>,
    #[arg(long = "lsh-d", default_value_t = encoders::DEFAULT_LSH_D,
          value_parser = clap::value_parser!(u32).range(1..=i64::from(encoders::MAX_LSH_D)))]
    pub lsh_d: u32,
    #[arg(long = "lsh-n", default_value_t = encoders::DEFAULT_LSH_N,
          value_parser = clap::value_parser!(u32).range(1..))]
    pub lsh_n: u32,
    #[arg(long = "lsh-b", value_delimiter = ',', default_value = "100,200,400",
          value_parser = clap::value_parser!(u32).range(1..))]
    pub lsh_b: Vec<u32>,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value = "rr@10,ndcg@10,recall@1000")]
    pub metrics: String,
    /// CSV output path; the aligned table always goes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub data: SyntheticFlags,
    /// Directory receiving corpus.jsonl, queries.jsonl and qrels.txt.
    #[arg(long)]
    pub output: PathBuf,
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index(a) => cmd_index(a),
        Command::Search(a) => cmd_search(a),
        Command::SearchExact(a) => cmd_search_exact(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut out = open_output(path)?;
    let io_err = |e| Error::io(path.unwrap_or(Path::new("<stdout>")), e);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| io_err(e.into()))?;
    writeln!(out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn cmd_index(a: IndexArgs) -> Result<()> {
    let config = a.encoder.config();
    config.validate()?;
    let idx = index::build_index(vector::read_vectors(&a.input)?, config)?;
    let bytes = write_index(&idx, &a.output)?;
    let stats = index::index_stats(&idx);
    emit_json(
        None,
        &json!({
            "encoder": idx.encoder(),
            "num_docs": idx.num_docs(),
            "dimension": idx.meta().dimension,
            "distinct_terms": stats.distinct_terms,
            "total_postings": stats.total_postings,
            "total_tokens": stats.total_tokens,
            "bytes_on_disk": bytes,
        }),
    )
}

pub fn cmd_search(a: SearchArgs) -> Result<()> {
    let idx = read_index(&a.index)?;
    let queries = load_vectors(&a.queries)?;
    let runs = search::run_queries(&idx, &queries, a.k as usize, a.threads as usize)?;
    let out = open_output(a.output.as_deref())?;
    search::write_run(out, &runs, &a.tag)
        .map_err(|e| Error::io(a.output.unwrap_or_else(|| "<stdout>".into()), e))
}

pub fn cmd_search_exact(a: SearchExactArgs) -> Result<()> {
    let exact = ExactIndex::from_vectors(vector::read_vectors(&a.input)?)?;
    let queries = load_vectors(&a.queries)?;
    let runs = exact.run(&queries, a.k as usize, a.threads as usize)?;
    let out = open_output(a.output.as_deref())?;
    search::write_run(out, &runs, &a.tag)
        .map_err(|e| Error::io(a.output.unwrap_or_else(|| "<stdout>".into()), e))
}

pub fn cmd_eval(a: EvalArgs) -> Result<()> {
    let metrics = eval::parse_metrics(&a.metrics)?;
    let run = eval::parse_run(&a.run)?;
    let qrels = eval::parse_qrels(&a.qrels)?;
    let report = eval::evaluate(&run, &qrels, &metrics);
    let mut value = json!({
        "aggregate": report.aggregate,
        "num_queries": report.num_queries,
    });
    if a.per_query {
        value["per_query"] = json!(report.per_query);
    }
    emit_json(a.output.as_deref(), &value)
}

pub fn cmd_bench(a: BenchArgs) -> Result<()> {
    let idx = read_index(&a.index)?;
    let queries = load_vectors(&a.queries)?;
    let result = bench::measure_qps(
        &idx,
        &queries,
        a.k as usize,
        a.threads as usize,
        a.trials as usize,
    )?;
    emit_json(a.output.as_deref(), &json!(result))
}

pub fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let configs = match a.encoding {
        Encoding::Fw => a.fw_q.iter().map(|&q| EncoderConfig::fake_words(q)).collect::<Result<Vec<_>>>(),
        Encoding::Lexlsh => a
            .lsh_b
            .iter()
            .map(|&b| EncoderConfig::lexical_lsh(a.lsh_d, a.lsh_n, b))
            .collect::<Result<Vec<_>>>(),
    }?;
    let (corpus, queries, qrels) = if a.synthetic {
        let data = bench::synthetic(&a.data.spec());
        (data.corpus, data.queries, data.qrels)
    } else {
        let (Some(input), Some(queries), Some(qrels)) = (&a.input, &a.queries, &a.qrels) else {
            return Err(Error::InvalidConfig(
                "sweep needs --input, --queries and --qrels, or --synthetic".into(),
            ));
        };
        (load_vectors(input)?, load_vectors(queries)?, eval::parse_qrels(qrels)?)
    };
    let opts = SweepOptions {
        depth: a.k as usize,
        metrics: eval::parse_metrics(&a.metrics)?,
        workers: a.threads as usize,
        trials: a.trials as usize,
        ..SweepOptions::default()
    };
    let rows = bench::sweep(&corpus, &queries, &qrels, &configs, &opts)?;
    print!("{}", bench::format_table(&rows));
    if let Some(path) = &a.output {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        bench::write_sweep_csv(BufWriter::new(f), &rows).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn cmd_synth(a: SynthArgs) -> Result<()> {
    let data = bench::synthetic(&a.data.spec());
    std::fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
    let write = |name: &str, f: &dyn Fn(&mut dyn Write) -> io::Result<()>| -> Result<()> {
        let path = a.output.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).map_err(|e| Error::io(&path, e))
    };
    write("corpus.jsonl", &|w| vector::write_vectors(w, &data.corpus))?;
    write("queries.jsonl", &|w| vector::write_vectors(w, &data.queries))?;
    write("qrels.txt", &|w| data.qrels.write_to(w))?;
    Ok(())
}
