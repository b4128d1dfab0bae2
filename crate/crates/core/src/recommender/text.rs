//! Bag-of-words TF-IDF with smooth idf and cosine similarity.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::RecommendError;

/// Lowercased alphanumeric runs of at least two characters, minus stop words.
pub fn tokenize(text: &str, stop_words: &BTreeSet<String>) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .filter(|t| !stop_words.contains(t))
        .collect()
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector(pub Vec<(usize, f64)>);

impl SparseVector {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a.1 * b.1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn cosine(&self, other: &Self) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            (self.dot(other) / denom).clamp(-1.0, 1.0)
        }
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(i, v) in &self.0 {
            out[i] = v;
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }
}

/// Cosine similarity of dense vectors; 0 if either is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    /// Term to column index; indices follow lexicographic term order.
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    pub df: Vec<usize>,
    pub n_docs: usize,
    /// One L2-normalized vector per fitted document, in input order.
    pub doc_vectors: Vec<SparseVector>,
    pub stop_words: BTreeSet<String>,
}

impl TfIdfModel {
    /// Fits vocabulary and smooth idf `ln((1 + N) / (1 + df)) + 1`; document
    /// vectors are raw term counts times idf, L2-normalized.
    pub fn fit<S: AsRef<str>>(docs: &[S], stop_words: &BTreeSet<String>) -> Result<Self, RecommendError> {
        if docs.is_empty() {
            return Err(RecommendError::EmptyCorpus);
        }
        let tokenized: Vec<Vec<String>> = docs.iter().map(|d| tokenize(d.as_ref(), stop_words)).collect();

        let mut doc_freq: BTreeMap<&str, usize> = BTreeMap::new();
        for tokens in &tokenized {
            let unique: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
            for t in unique {
                *doc_freq.entry(t).or_insert(0) += 1;
            }
        }

        let n_docs = docs.len();
        let vocabulary: BTreeMap<String, usize> = doc_freq
            .keys()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i))
            .collect();
        let df: Vec<usize> = doc_freq.values().copied().collect();
        let idf: Vec<f64> = df
            .iter()
            .map(|&d| ((1.0 + n_docs as f64) / (1.0 + d as f64)).ln() + 1.0)
            .collect();

        let mut model = Self {
            vocabulary,
            idf,
            df,
            n_docs,
            doc_vectors: Vec::new(),
            stop_words: stop_words.clone(),
        };
        model.doc_vectors = tokenized.iter().map(|tokens| model.vectorize(tokens)).collect();
        Ok(model)
    }

    fn vectorize(&self, tokens: &[String]) -> SparseVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(&i) = self.vocabulary.get(t) {
                *counts.entry(i).or_insert(0.0) += 1.0;
            }
        }
        let mut v = SparseVector(counts.into_iter().map(|(i, tf)| (i, tf * self.idf[i])).collect());
        let norm = v.norm();
        if norm > 0.0 {
            for entry in &mut v.0 {
                entry.1 /= norm;
            }
        }
        v
    }

    /// Normalized vector for new text; terms outside the vocabulary are ignored.
    pub fn transform(&self, text: &str) -> SparseVector {
        self.vectorize(&tokenize(text, &self.stop_words))
    }

    /// Cosine similarity of `text` against every fitted document.
    pub fn similarities(&self, text: &str) -> Vec<f64> {
        let query = self.transform(text);
        self.doc_vectors.iter().map(|d| query.cosine(d)).collect()
    }

    pub fn term(&self, index: usize) -> Option<&str> {
        self.vocabulary.iter().find(|(_, &i)| i == index).map(|(t, _)| t.as_str())
    }
}
