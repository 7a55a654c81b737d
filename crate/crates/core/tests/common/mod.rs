//! Reference implementations used as test oracles. Each one recomputes its
//! answer from the raw inputs without going through the index or the
//! scorers under test.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use densedex::{DenseVector, TermBag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut ChaCha8Rng, id: String, dim: usize) -> DenseVector {
    let raw: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    DenseVector::new(id, raw.into_iter().map(|x| x / norm).collect())
}

pub fn random_nonneg_unit(rng: &mut ChaCha8Rng, id: String, dim: usize) -> DenseVector {
    let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..1.0)).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    DenseVector::new(id, raw.into_iter().map(|x| x / norm).collect())
}

/// Random unit vectors whose pairwise dot products all stay below `max_dot`.
pub fn well_separated(rng: &mut ChaCha8Rng, n: usize, dim: usize, max_dot: f64) -> Vec<DenseVector> {
    let mut out: Vec<DenseVector> = Vec::with_capacity(n);
    while out.len() < n {
        let v = random_unit(rng, format!("w{}", out.len()), dim);
        let ok = out.iter().all(|u| {
            let d: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
            d < max_dot
        });
        if ok {
            out.push(v);
        }
    }
    out
}

fn by_rank(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0))
}

/// Scores every corpus vector against the query, sorts the full list, and
/// truncates to `k`.
pub fn quadratic_scan(corpus: &[DenseVector], query: &DenseVector, k: usize) -> Vec<(String, f64)> {
    let unit = |v: &DenseVector| {
        let n = v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.values.iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let q = unit(query);
    let mut all: Vec<(String, f64)> = corpus
        .iter()
        .map(|d| {
            let s = unit(d).iter().zip(&q).map(|(a, b)| a * b).sum();
            (d.id.clone(), s)
        })
        .collect();
    all.sort_by(by_rank);
    all.truncate(k);
    all
}

/// Document-at-a-time tf-idf over raw bags: no postings, no accumulators.
pub fn naive_tfidf(docs: &[(String, TermBag)], query: &TermBag, k: usize) -> Vec<(String, f64)> {
    let n = docs.len() as f64;
    let mut df: HashMap<&str, u64> = HashMap::new();
    for (_, bag) in docs {
        for (t, _) in bag.iter() {
            *df.entry(t.as_str()).or_default() += 1;
        }
    }
    let distinct = query.len() as f64;
    let mut scored: Vec<(String, f64)> = Vec::new();
    for (id, bag) in docs {
        let len = bag.token_count() as f64;
        if len == 0.0 {
            continue;
        }
        let mut sum = 0.0;
        let mut matched = 0usize;
        for (t, qtf) in query.iter() {
            if let Some(f) = bag.get(t.as_str()) {
                let idf = 1.0 + (n / (df[t.as_str()] as f64 + 1.0)).ln();
                sum += f64::from(qtf) * f64::from(f).sqrt() * idf * idf;
                matched += 1;
            }
        }
        if matched > 0 {
            let coord = matched as f64 / distinct;
            scored.push((id.clone(), coord * sum / len.sqrt()));
        }
    }
    scored.sort_by(by_rank);
    scored.truncate(k);
    scored
}

/// term -> [(ordinal, freq)] straight from the source bags.
pub fn brute_inversion(bags: &[TermBag]) -> BTreeMap<String, Vec<(u32, u32)>> {
    let mut inv: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
    for (ord, bag) in bags.iter().enumerate() {
        for (t, f) in bag.iter() {
            inv.entry(t.as_str().to_owned()).or_default().push((ord as u32, f));
        }
    }
    inv
}
