//! Automatic metrics: sentence-level BLEU, Dist-1/2, and Novelty against
//! topic-similar training essays.
//!
//! The exact BLEU configuration (order 4, +1 smoothing on orders above 1)
//! and the bigram-overlap Novelty definition are this crate's canonical
//! choices; numbers are self-consistent but not comparable across toolkits.

use crate::data::TopicEssayPair;
use crate::{Result, TegkeError};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: f64,
    pub dist1: f64,
    pub dist2: f64,
    pub novelty: f64,
    pub sample_count: usize,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Sentence-level BLEU averaged over aligned candidate/reference pairs,
/// reported x100. Clipped modified n-gram precision, geometric mean over
/// orders 1..=max_n, +1 smoothing on orders above 1, brevity penalty. An
/// empty candidate contributes 0.
pub fn bleu(candidates: &[Vec<String>], references: &[Vec<String>], max_n: usize) -> Result<f64> {
    if candidates.len() != references.len() {
        return Err(TegkeError::Validation(
            "candidate and reference lists must be aligned".into(),
        ));
    }
    if max_n == 0 {
        return Err(TegkeError::Validation("max_n must be at least 1".into()));
    }
    if candidates.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (cand, re) in candidates.iter().zip(references.iter()) {
        total += sentence_bleu(cand, re, max_n);
    }
    Ok(100.0 * total / candidates.len() as f64)
}

fn sentence_bleu(cand: &[String], re: &[String], max_n: usize) -> f64 {
    if cand.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cc = ngram_counts(cand, n);
        let rc = ngram_counts(re, n);
        let total: usize = cc.values().sum();
        let matched: usize = cc
            .iter()
            .map(|(g, c)| (*c).min(rc.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if n == 1 {
            matched as f64 / total as f64
        } else {
            (matched as f64 + 1.0) / (total as f64 + 1.0)
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln() / max_n as f64;
    }
    let c = cand.len() as f64;
    let r = re.len() as f64;
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    bp * log_sum.exp()
}

/// Distinct n-grams over all n-grams across the whole candidate set, x100.
/// Returns 0 when no candidate is long enough to form an n-gram.
pub fn dist_n(candidates: &[Vec<String>], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(TegkeError::Validation("n must be at least 1".into()));
    }
    let mut seen: HashSet<&[String]> = HashSet::new();
    let mut total = 0usize;
    for cand in candidates {
        if cand.len() >= n {
            for w in cand.windows(n) {
                seen.insert(w);
                total += 1;
            }
        }
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(100.0 * seen.len() as f64 / total as f64)
}

/// TF-IDF index over training-sample topic words for Novelty retrieval.
pub struct TrainIndex {
    entries: Vec<TopicEssayPair>,
    idf: HashMap<String, f64>,
}

impl TrainIndex {
    pub fn build(pairs: &[TopicEssayPair]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(TegkeError::Validation(
                "novelty needs a non-empty training index".into(),
            ));
        }
        let n = pairs.len() as f64;
        let mut df: HashMap<String, usize> = HashMap::new();
        for p in pairs {
            let distinct: HashSet<&String> = p.topics.iter().collect();
            for t in distinct {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let idf = df
            .into_iter()
            .map(|(t, d)| (t, ((n + 1.0) / (d as f64 + 1.0)).ln() + 1.0))
            .collect();
        Ok(TrainIndex {
            entries: pairs.to_vec(),
            idf,
        })
    }

    fn weight_vector<'a>(&self, topics: &'a [String]) -> HashMap<&'a str, f64> {
        let mut tf: HashMap<&str, f64> = HashMap::new();
        for t in topics {
            *tf.entry(t.as_str()).or_insert(0.0) += 1.0;
        }
        tf.into_iter()
            .map(|(t, c)| {
                let idf = self.idf.get(t).copied().unwrap_or(1.0);
                (t, c * idf)
            })
            .collect()
    }

    fn cosine(a: &HashMap<&str, f64>, b: &HashMap<&str, f64>) -> f64 {
        let dot: f64 = a
            .iter()
            .map(|(t, w)| w * b.get(t).copied().unwrap_or(0.0))
            .sum();
        let na: f64 = a.values().map(|w| w * w).sum::<f64>().sqrt();
        let nb: f64 = b.values().map(|w| w * w).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }

    /// Indices of the k most topic-similar training samples (ties broken by
    /// index for determinism).
    pub fn retrieve(&self, topics: &[String], k: usize) -> Vec<usize> {
        let q = self.weight_vector(topics);
        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, p)| (i, Self::cosine(&q, &self.weight_vector(&p.topics))))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.into_iter().take(k).map(|(i, _)| i).collect()
    }

    pub fn essay(&self, i: usize) -> &[String] {
        &self.entries[i].essay
    }
}

fn bigram_set(tokens: &[String]) -> HashSet<&[String]> {
    let mut s = HashSet::new();
    if tokens.len() >= 2 {
        for w in tokens.windows(2) {
            s.insert(w);
        }
    }
    s
}

/// 100 * (1 - max bigram overlap with the k most topic-similar training
/// essays). Overlap is |distinct shared bigrams| / max(1, |candidate
/// bigrams|).
pub fn novelty(candidate: &TopicEssayPair, index: &TrainIndex, k: usize) -> Result<f64> {
    let cand_bi = bigram_set(&candidate.essay);
    let mut max_overlap = 0.0f64;
    for i in index.retrieve(&candidate.topics, k) {
        let ref_bi = bigram_set(index.essay(i));
        let shared = cand_bi.intersection(&ref_bi).count();
        let overlap = shared as f64 / cand_bi.len().max(1) as f64;
        max_overlap = max_overlap.max(overlap);
    }
    Ok(100.0 * (1.0 - max_overlap))
}

/// Full report over aligned candidate/reference pairs, with Novelty computed
/// against the training index.
pub fn evaluate(
    candidates: &[TopicEssayPair],
    references: &[Vec<String>],
    train: &[TopicEssayPair],
    max_n: usize,
    k: usize,
) -> Result<MetricReport> {
    let essays: Vec<Vec<String>> = candidates.iter().map(|c| c.essay.clone()).collect();
    let b = bleu(&essays, references, max_n)?;
    let d1 = dist_n(&essays, 1)?;
    let d2 = dist_n(&essays, 2)?;
    let index = TrainIndex::build(train)?;
    let mut nov = 0.0;
    for c in candidates {
        nov += novelty(c, &index, k)?;
    }
    if !candidates.is_empty() {
        nov /= candidates.len() as f64;
    }
    Ok(MetricReport {
        bleu: b,
        dist1: d1,
        dist2: d2,
        novelty: nov,
        sample_count: candidates.len(),
    })
}
