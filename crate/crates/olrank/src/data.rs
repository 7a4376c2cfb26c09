//! Dataset loading and synthesis.
//!
//! Two sources feed the experiment loop:
//! - LETOR/SVMLight text files (`<label> qid:<id> <idx>:<val> ... # comment`),
//!   grouped into query sessions by contiguous `qid` blocks;
//! - seeded synthetic datasets with a known ground-truth scoring function,
//!   used for oracle-backed tests and desk-scale experiments.
//!
//! Feature vectors fed to the scoring network must satisfy the symmetric
//! unit-norm form produced by [`augment_symmetric`]: every vector `x'` has
//! `x'[j] == x'[j + d/2]` and unit L2 norm, which is what makes the
//! symmetric network initialization score every document exactly zero.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A query-document ranking feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    /// Builds a feature vector, rejecting NaN or infinite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite feature value {bad}"
            )));
        }
        Ok(FeatureVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// One query with its candidate documents and hidden relevance grades.
///
/// Labels are on the five-grade scale 0..=4. The online learner never sees
/// them; they only drive the click simulator and the evaluation metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySession {
    pub query_id: String,
    pub docs: Vec<FeatureVector>,
    pub labels: Vec<u8>,
}

impl QuerySession {
    pub fn new(query_id: String, docs: Vec<FeatureVector>, labels: Vec<u8>) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Validation(format!(
                "query {query_id} has no documents"
            )));
        }
        if docs.len() != labels.len() {
            return Err(Error::Validation(format!(
                "query {query_id}: {} docs but {} labels",
                docs.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 4) {
            return Err(Error::Validation(format!(
                "query {query_id}: label {bad} outside 0-4"
            )));
        }
        Ok(QuerySession {
            query_id,
            docs,
            labels,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }
}

/// An immutable collection of query sessions sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    sessions: Vec<QuerySession>,
    feature_dim: usize,
    augmented: bool,
}

impl Dataset {
    /// Builds a dataset from at least one session; all sessions must share
    /// the same feature dimension.
    pub fn new(sessions: Vec<QuerySession>, augmented: bool) -> Result<Self> {
        let first = sessions.first().ok_or(Error::EmptyDataset)?;
        let feature_dim = first.docs[0].dim();
        for session in &sessions {
            for doc in &session.docs {
                if doc.dim() != feature_dim {
                    return Err(Error::DimensionMismatch {
                        expected: feature_dim,
                        got: doc.dim(),
                    });
                }
            }
        }
        Ok(Dataset {
            sessions,
            feature_dim,
            augmented,
        })
    }

    pub fn sessions(&self) -> &[QuerySession] {
        &self.sessions
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }
}

/// Parses a LETOR/SVMLight file into query sessions.
///
/// Lines look like `2 qid:7 1:0.5 3:1.0 # comment`. Feature indices are
/// 1-based; indices absent from a line are filled with 0.0; the dataset
/// dimension is the maximum index seen anywhere in the file. Sessions keep
/// the first-appearance order of their qids, and a qid's lines must form one
/// contiguous block.
pub fn load_letor(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_letor(&text)
}

fn parse_letor(text: &str) -> Result<Dataset> {
    struct RawDoc {
        label: u8,
        features: Vec<(usize, f64)>,
    }

    let mut blocks: Vec<(String, Vec<RawDoc>)> = Vec::new();
    let mut closed: HashSet<String> = HashSet::new();
    let mut max_index = 0usize;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();

        let label_tok = tokens.next().expect("nonempty line has a first token");
        let label: u8 = label_tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad label token '{label_tok}'"),
        })?;
        if label > 4 {
            return Err(Error::Validation(format!(
                "line {line_no}: label {label} outside 0-4"
            )));
        }

        let qid_tok = tokens.next().ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "missing qid token".into(),
        })?;
        let qid = qid_tok
            .strip_prefix("qid:")
            .filter(|q| !q.is_empty())
            .ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected 'qid:<id>', got '{qid_tok}'"),
            })?
            .to_string();

        let mut features = Vec::new();
        let mut seen_idx = HashSet::new();
        for tok in tokens {
            let (idx_str, val_str) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected '<idx>:<val>', got '{tok}'"),
            })?;
            let f_idx: usize = idx_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature index '{idx_str}'"),
            })?;
            if f_idx == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "feature indices are 1-based".into(),
                });
            }
            let value: f64 = val_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature value '{val_str}'"),
            })?;
            if !value.is_finite() {
                return Err(Error::Validation(format!(
                    "line {line_no}: non-finite feature value"
                )));
            }
            if !seen_idx.insert(f_idx) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("duplicate feature index {f_idx}"),
                });
            }
            max_index = max_index.max(f_idx);
            features.push((f_idx, value));
        }

        let start_new_block = match blocks.last() {
            Some((current, _)) => current != &qid,
            None => true,
        };
        if start_new_block {
            if closed.contains(&qid) {
                return Err(Error::Validation(format!(
                    "line {line_no}: non-contiguous qid block '{qid}'"
                )));
            }
            if let Some((prev, _)) = blocks.last() {
                closed.insert(prev.clone());
            }
            blocks.push((qid, Vec::new()));
        }
        blocks
            .last_mut()
            .expect("block pushed above")
            .1
            .push(RawDoc { label, features });
    }

    let mut sessions = Vec::with_capacity(blocks.len());
    for (qid, docs) in blocks {
        let mut vectors = Vec::with_capacity(docs.len());
        let mut labels = Vec::with_capacity(docs.len());
        for doc in docs {
            let mut dense = vec![0.0; max_index];
            for (f_idx, value) in doc.features {
                dense[f_idx - 1] = value;
            }
            vectors.push(FeatureVector { values: dense });
            labels.push(doc.label);
        }
        sessions.push(QuerySession::new(qid, vectors, labels)?);
    }
    Dataset::new(sessions, false)
}

/// Writes a dataset back to LETOR text. Every feature index is written
/// explicitly so a reload reconstructs the exact same dimension and values.
pub fn save_letor(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for session in ds.sessions() {
        for (doc, &label) in session.docs.iter().zip(&session.labels) {
            out.push_str(&format!("{label} qid:{}", session.query_id));
            for (j, v) in doc.values.iter().enumerate() {
                out.push_str(&format!(" {}:{v}", j + 1));
            }
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Applies the symmetric augmentation `x -> [x; x] / (sqrt(2) * |x|)`.
///
/// The output doubles the dimension, has unit norm, and duplicates each
/// half exactly. Zero vectors map to the constant vector with entries
/// `1/sqrt(2d)` so the unit-norm invariant still holds.
pub fn augment_symmetric(ds: &Dataset) -> Result<Dataset> {
    if ds.is_augmented() {
        return Err(Error::Validation(
            "dataset is already augmented".into(),
        ));
    }
    let d = ds.feature_dim();
    let fill = 1.0 / ((2 * d) as f64).sqrt();
    let sessions = ds
        .sessions()
        .iter()
        .map(|session| {
            let docs = session
                .docs
                .iter()
                .map(|doc| {
                    let norm = doc.norm();
                    let mut values = Vec::with_capacity(2 * d);
                    if norm == 0.0 {
                        values.resize(2 * d, fill);
                    } else {
                        let scale = 1.0 / (std::f64::consts::SQRT_2 * norm);
                        values.extend(doc.values.iter().map(|v| v * scale));
                        values.extend_from_within(..);
                    }
                    FeatureVector { values }
                })
                .collect();
            QuerySession {
                query_id: session.query_id.clone(),
                docs,
                labels: session.labels.clone(),
            }
        })
        .collect();
    Dataset::new(sessions, true)
}

/// Difficulty of the hidden scoring function behind a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hardness {
    /// `h(x) = w . x`
    Linear,
    /// `h(x) = cos(w . x) + 0.5 * |x o m|` with a random binary mask `m`.
    Nonlinear,
}

impl fmt::Display for Hardness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hardness::Linear => write!(f, "linear"),
            Hardness::Nonlinear => write!(f, "nonlinear"),
        }
    }
}

impl FromStr for Hardness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Hardness::Linear),
            "nonlinear" => Ok(Hardness::Nonlinear),
            other => Err(Error::Config(format!("unknown hardness '{other}'"))),
        }
    }
}

/// Shape and seed of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    /// Feature dimension before augmentation.
    pub dim: usize,
    pub n_queries: usize,
    pub docs_per_query: usize,
    pub hardness: Hardness,
    pub seed: u64,
}

/// Generates a synthetic dataset and applies the symmetric augmentation.
///
/// Documents are unit-norm Gaussian directions, scored by a hidden function
/// drawn from the seeded generator, and labeled by quantizing the hidden
/// scores into five equal-probability bins over the whole generated pool
/// (so every grade occurs). Identical specs produce identical datasets.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    augment_symmetric(&generate_synthetic_unaugmented(spec)?)
}

/// The pre-augmentation form of [`generate_synthetic`], for serialization:
/// write this with [`save_letor`] and let the loading pipeline augment.
pub fn generate_synthetic_unaugmented(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.dim == 0 || spec.n_queries == 0 || spec.docs_per_query == 0 {
        return Err(Error::InvalidArgument(
            "synthetic dim and counts must be >= 1".into(),
        ));
    }
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Draw order is part of the determinism contract: weight vector first,
    // then the nonlinear mask (if any), then documents query by query.
    let w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mask: Vec<f64> = match spec.hardness {
        Hardness::Linear => Vec::new(),
        Hardness::Nonlinear => (0..d)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
            .collect(),
    };

    let n_docs = spec.n_queries * spec.docs_per_query;
    let mut docs: Vec<FeatureVector> = Vec::with_capacity(n_docs);
    let mut truth: Vec<f64> = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let x = loop {
            let raw: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break raw.iter().map(|v| v / norm).collect::<Vec<_>>();
            }
        };
        let dot: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
        let h = match spec.hardness {
            Hardness::Linear => dot,
            Hardness::Nonlinear => {
                let masked: f64 = x
                    .iter()
                    .zip(&mask)
                    .map(|(v, m)| (v * m) * (v * m))
                    .sum::<f64>()
                    .sqrt();
                dot.cos() + 0.5 * masked
            }
        };
        docs.push(FeatureVector { values: x });
        truth.push(h);
    }

    let labels = quantile_labels(&truth);

    let sessions = (0..spec.n_queries)
        .map(|q| {
            let lo = q * spec.docs_per_query;
            let hi = lo + spec.docs_per_query;
            QuerySession::new(
                q.to_string(),
                docs[lo..hi].to_vec(),
                labels[lo..hi].to_vec(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(sessions, false)
}

/// Quantizes scores into five equal-probability bins over the whole pool.
fn quantile_labels(scores: &[f64]) -> Vec<u8> {
    let n = scores.len();
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let thresholds: Vec<f64> = (1..5).map(|q| sorted[n * q / 5]).collect();
    scores
        .iter()
        .map(|&h| thresholds.iter().filter(|&&t| h >= t).count() as u8)
        .collect()
}

/// Uniformly samples one session, consuming exactly one range draw from the
/// shared experiment stream.
pub fn sample_query<'a, R: Rng>(ds: &'a Dataset, rng: &mut R) -> &'a QuerySession {
    let idx = rng.gen_range(0..ds.len());
    &ds.sessions()[idx]
}
