//! Bag-of-words vectors, L1 scoring, and an inverted-index retrieval database.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::BinaryDescriptor;
use crate::error::Result;
use crate::vocabulary::Vocabulary;

/// Sparse word id -> weight map. Weights are positive and, unless empty, sum to 1.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BowVector {
    entries: BTreeMap<usize, f64>,
}

impl BowVector {
    /// Builds a vector from raw weights: non-positive weights are dropped and the rest
    /// L1-normalized.
    pub fn from_weights(weights: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut entries = BTreeMap::new();
        for (w, v) in weights {
            if v > 0.0 {
                *entries.entry(w).or_insert(0.0) += v;
            }
        }
        let mut v = Self { entries };
        v.normalize();
        v
    }

    /// L1-normalizes in place; an all-zero vector becomes empty.
    pub fn normalize(&mut self) {
        self.entries.retain(|_, v| *v > 0.0);
        let sum: f64 = self.entries.values().sum();
        if sum > 0.0 {
            for v in self.entries.values_mut() {
                *v /= sum;
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, word: usize) -> Option<f64> {
        self.entries.get(&word).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&w, &v)| (w, v))
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.values().sum()
    }
}

/// Converts one image's descriptors into a TF-IDF BoW vector.
pub fn transform(vocab: &Vocabulary, descs: &[BinaryDescriptor]) -> Result<BowVector> {
    if descs.is_empty() {
        return Ok(BowVector::default());
    }
    let hits: Vec<_> = descs
        .par_iter()
        .with_min_len(256)
        .map(|d| vocab.lookup_word(d))
        .collect::<Result<_>>()?;
    let mut counts: BTreeMap<usize, (u64, f64)> = BTreeMap::new();
    for h in hits {
        counts.entry(h.word_id).or_insert((0, h.weight)).0 += 1;
    }
    let total = descs.len() as f64;
    Ok(BowVector::from_weights(
        counts
            .into_iter()
            .map(|(w, (n, idf))| (w, n as f64 / total * idf)),
    ))
}

/// `1 - 0.5 * sum |a_i - b_i|`, clamped to `[0, 1]`. Empty vectors and vectors with no
/// common word score exactly 0.
pub fn score_l1(a: &BowVector, b: &BowVector) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut ia = a.entries.iter().peekable();
    let mut ib = b.entries.iter().peekable();
    let mut diff = 0.0;
    let mut shared = false;
    loop {
        match (ia.peek(), ib.peek()) {
            (Some((wa, va)), Some((wb, vb))) => {
                if wa == wb {
                    shared = true;
                    diff += (**va - **vb).abs();
                    ia.next();
                    ib.next();
                } else if wa < wb {
                    diff += **va;
                    ia.next();
                } else {
                    diff += **vb;
                    ib.next();
                }
            }
            (Some((_, va)), None) => {
                diff += **va;
                ia.next();
            }
            (None, Some((_, vb))) => {
                diff += **vb;
                ib.next();
            }
            (None, None) => break,
        }
    }
    if !shared {
        return 0.0;
    }
    (1.0 - 0.5 * diff).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posting {
    pub entry: usize,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub entry: usize,
    pub score: f64,
}

/// Ranked matches: scores non-increasing, ties by ascending entry id.
pub type QueryResult = Vec<Match>;

/// Inverted index over BoW vectors built from one vocabulary.
///
/// Adds take `&mut self` and queries `&self`, so the borrow checker enforces the
/// single-writer / many-readers contract.
#[derive(Clone, Debug)]
pub struct RetrievalDatabase<'v> {
    vocab: &'v Vocabulary,
    postings: Vec<Vec<Posting>>,
    entries: Vec<BowVector>,
}

impl<'v> RetrievalDatabase<'v> {
    pub fn new(vocab: &'v Vocabulary) -> Self {
        Self {
            vocab,
            postings: vec![Vec::new(); vocab.word_count()],
            entries: Vec::new(),
        }
    }

    pub fn vocabulary(&self) -> &'v Vocabulary {
        self.vocab
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, id: usize) -> &BowVector {
        &self.entries[id]
    }

    pub fn postings(&self, word: usize) -> &[Posting] {
        self.postings.get(word).map_or(&[], Vec::as_slice)
    }

    /// Stores `v` and returns its sequential entry id.
    pub fn add(&mut self, v: BowVector) -> usize {
        let id = self.entries.len();
        for (w, weight) in v.iter() {
            if w >= self.postings.len() {
                self.postings.resize(w + 1, Vec::new());
            }
            self.postings[w].push(Posting { entry: id, weight });
        }
        self.entries.push(v);
        id
    }

    pub fn add_descriptors(&mut self, descs: &[BinaryDescriptor]) -> Result<usize> {
        let v = transform(self.vocab, descs)?;
        Ok(self.add(v))
    }

    /// Scores every entry sharing a word with `v`, skipping `exclude`, and returns the
    /// best `max_results`.
    pub fn query(
        &self,
        v: &BowVector,
        max_results: usize,
        exclude: Option<&HashSet<usize>>,
    ) -> QueryResult {
        let mut candidates = vec![false; self.entries.len()];
        for (w, _) in v.iter() {
            for p in self.postings(w) {
                candidates[p.entry] = true;
            }
        }
        let mut out: Vec<Match> = candidates
            .iter()
            .enumerate()
            .filter(|(e, &c)| c && !exclude.is_some_and(|x| x.contains(e)))
            .map(|(e, _)| Match {
                entry: e,
                score: score_l1(v, &self.entries[e]),
            })
            .filter(|m| m.score > 0.0)
            .collect();
        rank(&mut out);
        out.truncate(max_results);
        out
    }

    /// Verifies that postings and entries describe each other exactly.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let mut seen = 0usize;
        for (w, list) in self.postings.iter().enumerate() {
            if list.windows(2).any(|p| p[0].entry >= p[1].entry) {
                return Err(format!("posting list {w} is not strictly sorted"));
            }
            for p in list {
                match self.entries.get(p.entry).and_then(|e| e.get(w)) {
                    Some(weight) if weight == p.weight => seen += 1,
                    _ => {
                        return Err(format!(
                            "posting ({}, {}) for word {w} has no matching entry",
                            p.entry, p.weight
                        ))
                    }
                }
            }
        }
        let support: usize = self.entries.iter().map(BowVector::len).sum();
        if seen != support {
            return Err(format!("{seen} postings for {support} entry weights"));
        }
        Ok(())
    }
}

/// Sorts by descending score, then ascending entry id.
pub fn rank(matches: &mut [Match]) {
    matches.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.entry.cmp(&b.entry)));
}
