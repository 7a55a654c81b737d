//! Dense vector primitives: validation, unit normalization, inner products,
//! and the integer quantization that backs the fake-words encoding.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An embedding with its external identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseVector {
    pub id: String,
    #[serde(rename = "vector")]
    pub values: Vec<f64>,
}

impl DenseVector {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|x| x.abs()).sum()
    }

    fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }
}

/// A vector whose Euclidean norm is 1 (within 1e-9). Only constructible
/// through [`normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(DenseVector);

impl UnitVector {
    pub fn id(&self) -> &str {
        &self.0.id
    }

    pub fn values(&self) -> &[f64] {
        &self.0.values
    }

    pub fn dim(&self) -> usize {
        self.0.values.len()
    }

    pub fn as_dense(&self) -> &DenseVector {
        &self.0
    }

    pub fn into_dense(self) -> DenseVector {
        self.0
    }
}

/// Scales `v` to unit Euclidean length, keeping its id.
pub fn normalize(v: &DenseVector) -> Result<UnitVector> {
    v.check_finite()?;
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let values = v.values.iter().map(|x| x / norm).collect();
    Ok(UnitVector(DenseVector::new(v.id.clone(), values)))
}

/// Inner product accumulated in f64.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Per-dimension signed counts `sign(v_i) * floor(Q * |v_i|)`.
///
/// Requires `q >= 2`. Counts never exceed `q` because every component of a
/// unit vector has magnitude at most one.
pub fn quantize_fw(v: &UnitVector, q: u32) -> Vec<i32> {
    debug_assert!(q >= 2, "quantization factor must be at least 2");
    v.values().iter().map(|&x| quantize_component(x, q)).collect()
}

pub(crate) fn quantize_component(x: f64, q: u32) -> i32 {
    let count = (f64::from(q) * x.abs()).floor().min(f64::from(q)) as i32;
    if x < 0.0 {
        -count
    } else {
        count
    }
}

/// Inner product recovered from the quantized counts, scaled back by `1/Q²`.
/// Opposite-sign dimensions contribute nothing, exactly as opposite-sign
/// fake words never match in the index.
pub fn quantized_dot_estimate(a: &UnitVector, b: &UnitVector, q: u32) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::dims(a.dim(), b.dim()));
    }
    let qa = quantize_fw(a, q);
    let qb = quantize_fw(b, q);
    let sum: i64 = qa
        .iter()
        .zip(&qb)
        .map(|(&x, &y)| {
            let p = i64::from(x) * i64::from(y);
            p.max(0)
        })
        .sum();
    Ok(sum as f64 / (f64::from(q) * f64::from(q)))
}

#[derive(Deserialize)]
struct VectorRecord {
    id: String,
    vector: Vec<f64>,
}

/// Streams vectors from JSON lines (`{"id": ..., "vector": [...]}`).
///
/// The first record fixes the dimension. Blank lines are skipped. Duplicate
/// ids are rejected.
pub struct VectorReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    dim: Option<usize>,
    seen: HashSet<String>,
}

impl<R: BufRead> VectorReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            dim: None,
            seen: HashSet::new(),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    fn parse_line(&mut self, line: &str) -> Result<DenseVector> {
        let line_no = self.line_no;
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let rec: VectorRecord =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if rec.vector.is_empty() {
            return Err(parse_err("vector must have at least one component".into()));
        }
        let v = DenseVector::new(rec.id, rec.vector);
        v.check_finite().map_err(|_| parse_err("non-finite component".into()))?;
        match self.dim {
            None => self.dim = Some(v.dim()),
            Some(m) if m != v.dim() => {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: v.dim(),
                    line: Some(line_no),
                })
            }
            Some(_) => {}
        }
        if !self.seen.insert(v.id.clone()) {
            return Err(Error::DuplicateDocId(v.id));
        }
        Ok(v)
    }
}

impl<R: BufRead> Iterator for VectorReader<R> {
    type Item = Result<DenseVector>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    return Some(Err(Error::Io {
                        context: format!("line {}", self.line_no),
                        source: e,
                    }))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            return Some(self.parse_line(&line));
        }
    }
}

pub fn read_vectors(path: impl AsRef<Path>) -> Result<VectorReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(VectorReader::new(BufReader::new(file)))
}

/// Reads a whole vector file into memory.
pub fn load_vectors(path: impl AsRef<Path>) -> Result<Vec<DenseVector>> {
    read_vectors(path)?.collect()
}

/// Writes vectors as JSON lines.
pub fn write_vectors<W: std::io::Write>(mut out: W, vectors: &[DenseVector]) -> std::io::Result<()> {
    for v in vectors {
        serde_json::to_writer(&mut out, v)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(values: &[f64]) -> UnitVector {
        normalize(&DenseVector::new("v", values.to_vec())).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let u = unit(&[3.0, 4.0]);
        assert!((u.values()[0] - 0.6).abs() < 1e-15);
        assert!((u.values()[1] - 0.8).abs() < 1e-15);
        assert_eq!(unit(&[1.0]).values(), &[1.0]);
        assert!(matches!(
            normalize(&DenseVector::new("z", vec![0.0, 0.0])),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            normalize(&DenseVector::new("n", vec![f64::NAN, 1.0])),
            Err(Error::NonFinite)
        ));
        assert_eq!(unit(&[3.0, 4.0]).id(), "v");
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((dot(&[0.6, 0.8], &[0.6, 0.8]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            dot(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    // Neumaier-compensated summation as an independent reference.
    fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
        let mut sum = 0.0f64;
        let mut c = 0.0f64;
        for (x, y) in a.iter().zip(b) {
            let p = x * y;
            let t = sum + p;
            if sum.abs() >= p.abs() {
                c += (sum - t) + p;
            } else {
                c += (p - t) + sum;
            }
            sum = t;
        }
        sum + c
    }

    #[test]
    fn dot_matches_compensated_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..128).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!((dot(&a, &b).unwrap() - compensated_dot(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_fw(&unit(&[0.6, 0.8]), 10), vec![6, 8]);
        assert_eq!(quantize_fw(&unit(&[-0.6, 0.8]), 10), vec![-6, 8]);
        let v = unit(&[0.09, (1.0f64 - 0.09 * 0.09).sqrt()]);
        assert_eq!(quantize_fw(&v, 10)[0], 0);
    }

    #[test]
    fn quantized_estimate_examples() {
        let a = unit(&[0.6, 0.8]);
        let b = unit(&[-0.6, 0.8]);
        assert!((quantized_dot_estimate(&a, &a, 10).unwrap() - 1.0).abs() < 1e-12);
        assert!((quantized_dot_estimate(&a, &b, 10).unwrap() - 0.64).abs() < 1e-12);
    }

    #[test]
    fn read_vectors_examples() {
        let data = "{\"id\":\"d1\",\"vector\":[0.6,0.8]}\n";
        let got: Vec<_> = VectorReader::new(data.as_bytes())
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(got, vec![DenseVector::new("d1", vec![0.6, 0.8])]);

        assert_eq!(VectorReader::new("".as_bytes()).count(), 0);

        let bad = "{\"id\":\"a\",\"vector\":[1,2]}\n{\"id\":\"b\",\"vector\":[1,2,3]}\n";
        let res: Result<Vec<_>> = VectorReader::new(bad.as_bytes()).collect();
        assert!(matches!(
            res,
            Err(Error::DimensionMismatch { line: Some(2), .. })
        ));

        let dup = "{\"id\":\"a\",\"vector\":[1]}\n{\"id\":\"a\",\"vector\":[2]}\n";
        let res: Result<Vec<_>> = VectorReader::new(dup.as_bytes()).collect();
        assert!(matches!(res, Err(Error::DuplicateDocId(id)) if id == "a"));

        let garbage = "{\"id\":\"a\",\"vector\":[1]}\nnot json\n";
        let res: Result<Vec<_>> = VectorReader::new(garbage.as_bytes()).collect();
        assert!(matches!(res, Err(Error::Parse { line: 2, .. })));
    }

    fn nonzero_vec(max_dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 1..max_dim)
            .prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-6))
    }

    proptest! {
        #[test]
        fn normalize_is_unit_and_idempotent(values in nonzero_vec(64)) {
            let u = normalize(&DenseVector::new("p", values)).unwrap();
            prop_assert!((u.as_dense().norm() - 1.0).abs() <= 1e-9);
            let again = normalize(u.as_dense()).unwrap();
            for (x, y) in u.values().iter().zip(again.values()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn quantization_mass_grows_with_multiples(values in nonzero_vec(64), q in 2u32..50, mult in 2u32..5) {
            let u = normalize(&DenseVector::new("p", values)).unwrap();
            let mass = |q| quantize_fw(&u, q).iter().map(|c| c.unsigned_abs() as u64).sum::<u64>();
            prop_assert!(mass(q * mult) >= mass(q));
        }

        #[test]
        fn quantized_estimate_error_bound(
            a in prop::collection::vec(0.0f64..1.0, 16),
            b in prop::collection::vec(0.0f64..1.0, 16),
            q in 2u32..100,
        ) {
            prop_assume!(a.iter().any(|&x| x > 1e-6) && b.iter().any(|&x| x > 1e-6));
            let ua = normalize(&DenseVector::new("a", a)).unwrap();
            let ub = normalize(&DenseVector::new("b", b)).unwrap();
            let exact = dot(ua.values(), ub.values()).unwrap();
            let est = quantized_dot_estimate(&ua, &ub, q).unwrap();
            let qf = f64::from(q);
            let bound = (ua.as_dense().l1_norm() + ub.as_dense().l1_norm()) / qf + 16.0 / (qf * qf);
            prop_assert!((est - exact).abs() <= bound);
        }
    }
}
