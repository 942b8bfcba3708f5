//! Bidirectional GRU encoders for topics and essays.
//!
//! Each direction runs an independently parameterized GRU; the per-position
//! state is the concatenation of both directions and the sequence summary is
//! the arithmetic mean over true (unpadded) positions.

use crate::nn::{gru_cell, init_gru, ParamStore, ParamVars};
use crate::tape::{Tape, Var};
use crate::{Result, TegkeError};
use rand_chacha::ChaCha8Rng;

/// Selects one of the two independently parameterized encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderId {
    Topic,
    Essay,
}

impl EncoderId {
    pub fn prefix(self) -> &'static str {
        match self {
            EncoderId::Topic => "enc.topic",
            EncoderId::Essay => "enc.essay",
        }
    }
}

/// Per-position states (each `2 * d_dir`) and their mean-pooled summary.
pub struct EncoderOutput {
    pub states: Vec<Var>,
    pub pooled: Var,
}

pub fn init_seq_encoder(
    params: &mut ParamStore,
    which: EncoderId,
    d_emb: usize,
    d_dir: usize,
    rng: &mut ChaCha8Rng,
) {
    init_gru(params, &format!("{}.fwd", which.prefix()), d_emb, d_dir, rng);
    init_gru(params, &format!("{}.bwd", which.prefix()), d_emb, d_dir, rng);
}

/// Encode a sequence of embedding vectors. `d_dir` is the per-direction
/// hidden size; outputs have dimension `2 * d_dir`.
pub fn encode_embeddings(
    tape: &mut Tape,
    pv: &ParamVars,
    which: EncoderId,
    embeddings: &[Var],
    d_dir: usize,
) -> Result<EncoderOutput> {
    if embeddings.is_empty() {
        return Err(TegkeError::Shape("cannot encode an empty sequence".into()));
    }
    let prefix = which.prefix();
    let zero = tape.vector(&vec![0.0; d_dir]);

    let mut fwd = Vec::with_capacity(embeddings.len());
    let mut h = zero;
    for &x in embeddings {
        h = gru_cell(tape, pv, &format!("{prefix}.fwd"), x, h);
        fwd.push(h);
    }
    let mut bwd = vec![zero; embeddings.len()];
    let mut h = zero;
    for (i, &x) in embeddings.iter().enumerate().rev() {
        h = gru_cell(tape, pv, &format!("{prefix}.bwd"), x, h);
        bwd[i] = h;
    }

    let states: Vec<Var> = fwd
        .into_iter()
        .zip(bwd)
        .map(|(f, b)| tape.concat1(&[f, b]))
        .collect();
    let mut sum = states[0];
    for s in &states[1..] {
        sum = tape.add(sum, *s);
    }
    let pooled = tape.mul_const(sum, 1.0 / states.len() as f64);
    Ok(EncoderOutput { states, pooled })
}

/// Convenience: gather word-embedding rows for `ids` then encode.
pub fn encode_ids(
    tape: &mut Tape,
    pv: &ParamVars,
    which: EncoderId,
    word_emb: Var,
    ids: &[usize],
    d_dir: usize,
) -> Result<EncoderOutput> {
    let rows: Vec<Var> = ids.iter().map(|&id| {
        let r = tape.gather_rows(word_emb, &[id]);
        let d = tape.value(r).shape()[1];
        tape.reshape(r, &[d])
    }).collect();
    encode_embeddings(tape, pv, which, &rows, d_dir)
}
