//! Corpus ingestion, vocabulary construction, embedding tables, and
//! deterministic batching.
//!
//! Corpus files are UTF-8 JSON-lines, one object per line:
//! `{"topics": ["t1", ...], "essay": "tok tok ..."}` with the essay already
//! whitespace-tokenized.

use crate::nn::derived_rng;
use crate::{Result, TegkeError};
use ndarray::{ArrayD, IxDyn};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const NUM_SPECIALS: usize = 4;
pub const SPECIAL_TOKENS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// One training unit: up to five topic words and a tokenized essay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicEssayPair {
    pub topics: Vec<String>,
    pub essay: Vec<String>,
}

impl TopicEssayPair {
    pub fn validate(&self) -> Result<()> {
        if self.topics.is_empty() || self.topics.len() > 5 {
            return Err(TegkeError::Validation(format!(
                "topic count must be 1..=5, got {}",
                self.topics.len()
            )));
        }
        if self.essay.is_empty() {
            return Err(TegkeError::Validation("essay must be non-empty".into()));
        }
        Ok(())
    }
}

/// Token ↔ id mapping with fixed special ids 0–3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    pub max_size: usize,
}

impl Vocabulary {
    /// Most frequent tokens kept (topics and essays pooled), frequency ties
    /// broken lexicographically. Specials are always present.
    pub fn build(corpus: &[TopicEssayPair], max_size: usize) -> Result<Self> {
        if max_size < NUM_SPECIALS {
            return Err(TegkeError::Validation(format!(
                "max_size must be at least {NUM_SPECIALS}, got {max_size}"
            )));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for pair in corpus {
            for t in pair.topics.iter().chain(pair.essay.iter()) {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|(t, _)| !SPECIAL_TOKENS.contains(t))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(max_size - NUM_SPECIALS);

        let mut id_to_token: Vec<String> =
            SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(ranked.iter().map(|(t, _)| t.to_string()));
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
            max_size,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        *self.token_to_id.get(token).unwrap_or(&UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.id_to_token
            .get(id)
            .map(|s| s.as_str())
            .unwrap_or(SPECIAL_TOKENS[UNK])
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// Rebuild from the full ordered token list (specials included), as stored
    /// in checkpoints.
    pub fn from_tokens(tokens: Vec<String>, max_size: usize) -> Result<Self> {
        if tokens.len() < NUM_SPECIALS
            || tokens[..NUM_SPECIALS] != SPECIAL_TOKENS.map(|s| s.to_string())
        {
            return Err(TegkeError::Validation(
                "vocabulary token list must start with the 4 specials".into(),
            ));
        }
        let token_to_id = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            token_to_id,
            id_to_token: tokens,
            max_size,
        })
    }

    /// SHA-256 over the ordered token list; checked when loading checkpoints.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.id_to_token {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        hex_string(&hasher.finalize())
    }

    /// One non-special token per line; line number == id − 4.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        for t in &self.id_to_token[NUM_SPECIALS..] {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path, max_size: usize) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| TegkeError::Ingestion {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            if !line.is_empty() {
                tokens.push(line);
            }
        }
        Self::from_tokens(tokens, max_size)
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Out-of-vocabulary tokens map to UNK. Errors on an empty topic list.
pub fn encode_pair(pair: &TopicEssayPair, vocab: &Vocabulary) -> Result<(Vec<usize>, Vec<usize>)> {
    if pair.topics.is_empty() {
        return Err(TegkeError::Validation("empty topics list".into()));
    }
    let topics = pair.topics.iter().map(|t| vocab.id(t)).collect();
    let essay = pair.essay.iter().map(|t| vocab.id(t)).collect();
    Ok((topics, essay))
}

/// Padded batch with BOS-shifted inputs and EOS-suffixed targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Original corpus indices of the samples in this batch.
    pub sample_indices: Vec<usize>,
    pub topic_ids: Vec<Vec<usize>>,
    pub topic_lengths: Vec<usize>,
    /// `[BOS, y_1 .. y_n]`, PAD-padded.
    pub essay_ids_in: Vec<Vec<usize>>,
    /// `[y_1 .. y_n, EOS]`, PAD-padded.
    pub essay_ids_out: Vec<Vec<usize>>,
    /// Length including the EOS target.
    pub essay_lengths: Vec<usize>,
    /// True at non-PAD positions of `essay_ids_out`.
    pub masks: Vec<Vec<bool>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.sample_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_indices.is_empty()
    }
}

/// BOS-shifted decoder input and EOS-suffixed target for one essay.
pub fn shift_essay(essay_ids: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut inp = vec![BOS];
    inp.extend_from_slice(essay_ids);
    let mut out = essay_ids.to_vec();
    out.push(EOS);
    (inp, out)
}

/// Deterministic shuffled batching; the shuffle is a pure function of `seed`.
/// The final partial batch is kept.
pub fn make_batches(
    pairs: &[TopicEssayPair],
    vocab: &Vocabulary,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(TegkeError::Validation("batch_size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = derived_rng(seed, "batch-shuffle", 0);
    order.shuffle(&mut rng);

    let mut batches = Vec::new();
    for chunk in order.chunks(batch_size) {
        let mut topic_ids = Vec::new();
        let mut topic_lengths = Vec::new();
        let mut ins = Vec::new();
        let mut outs = Vec::new();
        let mut essay_lengths = Vec::new();
        for &i in chunk {
            let (t, e) = encode_pair(&pairs[i], vocab)?;
            topic_lengths.push(t.len());
            topic_ids.push(t);
            let (inp, out) = shift_essay(&e);
            essay_lengths.push(out.len());
            ins.push(inp);
            outs.push(out);
        }
        let tmax = topic_lengths.iter().copied().max().unwrap_or(0);
        let emax = essay_lengths.iter().copied().max().unwrap_or(0);
        for t in &mut topic_ids {
            t.resize(tmax, PAD);
        }
        for (i, o) in ins.iter_mut().zip(outs.iter_mut()) {
            i.resize(emax, PAD);
            o.resize(emax, PAD);
        }
        let masks = outs
            .iter()
            .map(|o| o.iter().map(|&id| id != PAD).collect())
            .collect();
        batches.push(Batch {
            sample_indices: chunk.to_vec(),
            topic_ids,
            topic_lengths,
            essay_ids_in: ins,
            essay_ids_out: outs,
            essay_lengths,
            masks,
        });
    }
    Ok(batches)
}

/// Word and relation embedding tables. The word table is shared by topics,
/// essays, and initial graph-node states.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub word_vectors: ArrayD<f64>,
    pub relation_vectors: ArrayD<f64>,
}

impl EmbeddingTable {
    pub fn random(
        vocab_size: usize,
        relation_count: usize,
        d_emb: usize,
        seed: u64,
    ) -> EmbeddingTable {
        let mut rng = derived_rng(seed, "embedding-init", 0);
        let limit = (3.0 / d_emb as f64).sqrt();
        let mut draw = |n: usize| -> ArrayD<f64> {
            let data: Vec<f64> = (0..n * d_emb).map(|_| rng.gen_range(-limit..limit)).collect();
            ArrayD::from_shape_vec(IxDyn(&[n, d_emb]), data).unwrap()
        };
        EmbeddingTable {
            word_vectors: draw(vocab_size),
            relation_vectors: draw(relation_count),
        }
    }

    /// Optional pretrained-word hook. Plain text, one `token v1 .. v_d` line
    /// per word; tokens absent from the vocabulary are skipped. Returns the
    /// number of rows overwritten.
    pub fn load_pretrained_words(&mut self, path: &Path, vocab: &Vocabulary) -> Result<usize> {
        let d = self.word_vectors.shape()[1];
        let f = std::fs::File::open(path)?;
        let mut loaded = 0usize;
        for (lineno, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap();
            let values: std::result::Result<Vec<f64>, _> =
                parts.map(|p| p.parse::<f64>()).collect();
            let values = values.map_err(|e| TegkeError::Ingestion {
                path: path.display().to_string(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
            if values.len() != d {
                return Err(TegkeError::Ingestion {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("expected {d} values, got {}", values.len()),
                });
            }
            let id = vocab.id(token);
            if id != UNK || token == SPECIAL_TOKENS[UNK] {
                for (j, v) in values.iter().enumerate() {
                    self.word_vectors[[id, j]] = *v;
                }
                loaded += 1;
            }
        }
        Ok(loaded)
    }
}

#[derive(Deserialize, Serialize)]
struct CorpusLine {
    topics: Vec<String>,
    essay: String,
}

/// Read a JSON-lines corpus; errors carry the offending line number.
pub fn load_corpus(path: &Path) -> Result<Vec<TopicEssayPair>> {
    let f = std::fs::File::open(path).map_err(|e| TegkeError::Ingestion {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| TegkeError::Ingestion {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine = serde_json::from_str(&line).map_err(|e| TegkeError::Ingestion {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let pair = TopicEssayPair {
            topics: parsed.topics,
            essay: parsed.essay.split_whitespace().map(str::to_string).collect(),
        };
        pair.validate().map_err(|e| TegkeError::Ingestion {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn save_corpus(path: &Path, pairs: &[TopicEssayPair]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for p in pairs {
        let line = serde_json::to_string(&CorpusLine {
            topics: p.topics.clone(),
            essay: p.essay.join(" "),
        })?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

/// Warn-only check of the nominal 50–100 token essay-length band. Returns the
/// indices of out-of-band pairs.
pub fn out_of_band_lengths(pairs: &[TopicEssayPair], min: usize, max: usize) -> Vec<usize> {
    pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| p.essay.len() < min || p.essay.len() > max)
        .map(|(i, _)| i)
        .collect()
}
