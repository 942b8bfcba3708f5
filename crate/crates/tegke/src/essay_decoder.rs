//! Single-layer GRU decoder with dual attention over topic states and gated
//! graph nodes.
//!
//! The initial state is concat(x_enc, z1); every step consumes the previous
//! token embedding, z2, and the two attention contexts. Attention scores use
//! the *previous* state s_{t-1}.

use crate::data::{BOS, EOS, PAD};
use crate::nn::{affine, gru_cell, init_gru, ParamStore, ParamVars};
use crate::tape::{Tape, Var};
use crate::{Result, TegkeError};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Decoder hidden state s_t.
#[derive(Debug, Clone, Copy)]
pub struct DecoderState {
    pub s: Var,
}

/// Which attention branch: topic encoder states or graph nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionBranch {
    Topic,
    Graph,
}

impl AttentionBranch {
    fn prefix(self) -> &'static str {
        match self {
            AttentionBranch::Topic => "att.topic",
            AttentionBranch::Graph => "att.graph",
        }
    }
}

/// Per-step attention weight rows (plain values, each summing to 1).
#[derive(Debug, Clone, Default)]
pub struct AttentionRecord {
    pub topic_weights: Vec<Vec<f64>>,
    pub graph_weights: Vec<Vec<f64>>,
}

/// Everything one decoding pass produces.
pub struct DecoderTrace {
    /// One probability row per step, still on the tape (y_theta for the critic).
    pub prob_rows: Vec<Var>,
    /// Decoded (generation) or target (teacher-forced) token ids.
    pub token_ids: Vec<usize>,
    pub states: Vec<DecoderState>,
    pub attention: AttentionRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Sample,
}

pub fn init_decoder(
    params: &mut ParamStore,
    vocab_size: usize,
    d_emb: usize,
    d_enc: usize,
    d_g: usize,
    d_z: usize,
    d_dec: usize,
    rng: &mut ChaCha8Rng,
) {
    let d_in = d_emb + d_z + d_enc + d_g;
    init_gru(params, "dec", d_in, d_dec, rng);
    params.init_matrix("att.topic.w", d_enc, d_dec, rng);
    params.init_zeros_vec("att.topic.b", d_enc);
    params.init_matrix("att.graph.w", d_g, d_dec, rng);
    params.init_zeros_vec("att.graph.b", d_g);
    params.init_matrix("out.w", vocab_size, d_dec, rng);
    params.init_zeros_vec("out.b", vocab_size);
}

/// s_0 = concat(x_enc, z1).
pub fn init_state(tape: &mut Tape, x_enc: Var, z1: Var, d_dec: usize) -> Result<DecoderState> {
    let total = tape.value(x_enc).len() + tape.value(z1).len();
    if total != d_dec {
        return Err(TegkeError::Shape(format!(
            "init_state: |x_enc| + |z1| = {total} must equal d_dec = {d_dec}"
        )));
    }
    Ok(DecoderState {
        s: tape.concat1(&[x_enc, z1]),
    })
}

/// scores e_i = tanh(W s_{t-1} + b)^T k_i; weights = softmax(scores);
/// context = sum_i weights_i k_i.
pub fn attend(
    tape: &mut Tape,
    pv: &ParamVars,
    branch: AttentionBranch,
    s_prev: DecoderState,
    keys: Var,
) -> Result<(Var, Var)> {
    if tape.value(keys).shape()[0] == 0 {
        return Err(TegkeError::Shape("attention requires at least one key".into()));
    }
    let prefix = branch.prefix();
    let q_pre = affine(
        tape,
        pv.get(&format!("{prefix}.w")),
        s_prev.s,
        pv.get(&format!("{prefix}.b")),
    );
    let q = tape.tanh(q_pre);
    let scores = tape.matvec(keys, q);
    let weights = tape.softmax1(scores);
    let keys_t = tape.transpose(keys);
    let context = tape.matvec(keys_t, weights);
    Ok((weights, context))
}

/// One recurrent step; returns the new state and the probability row.
pub fn decode_step(
    tape: &mut Tape,
    pv: &ParamVars,
    s_prev: DecoderState,
    prev_emb: Var,
    z2: Var,
    c_x: Var,
    c_g: Var,
) -> (DecoderState, Var, Var) {
    let input = tape.concat1(&[prev_emb, z2, c_x, c_g]);
    let s = gru_cell(tape, pv, "dec", input, s_prev.s);
    let logits = affine(tape, pv.get("out.w"), s, pv.get("out.b"));
    let log_row = tape.log_softmax1(logits);
    let prob_row = tape.exp(log_row);
    (DecoderState { s }, prob_row, log_row)
}

fn embed(tape: &mut Tape, word_emb: Var, id: usize) -> Var {
    let r = tape.gather_rows(word_emb, &[id]);
    let d = tape.value(r).shape()[1];
    tape.reshape(r, &[d])
}

/// Teacher-forced pass over one (unpadded) target sequence. Returns the trace
/// and L_rec = sum_t -log p(y_t), a tape scalar.
#[allow(clippy::too_many_arguments)]
pub fn teacher_forced_pass(
    tape: &mut Tape,
    pv: &ParamVars,
    word_emb: Var,
    topic_keys: Var,
    graph_keys: Var,
    x_enc: Var,
    z1: Var,
    z2: Var,
    essay_in: &[usize],
    essay_out: &[usize],
    d_dec: usize,
) -> Result<(DecoderTrace, Var)> {
    if essay_in.len() != essay_out.len() || essay_in.is_empty() {
        return Err(TegkeError::Shape(
            "teacher forcing needs aligned, non-empty input/target sequences".into(),
        ));
    }
    let mut state = init_state(tape, x_enc, z1, d_dec)?;
    let mut trace = DecoderTrace {
        prob_rows: Vec::new(),
        token_ids: essay_out.to_vec(),
        states: Vec::new(),
        attention: AttentionRecord::default(),
    };
    let mut nll: Option<Var> = None;
    for (&prev, &target) in essay_in.iter().zip(essay_out.iter()) {
        let (w_x, c_x) = attend(tape, pv, AttentionBranch::Topic, state, topic_keys)?;
        let (w_g, c_g) = attend(tape, pv, AttentionBranch::Graph, state, graph_keys)?;
        let prev_emb = embed(tape, word_emb, prev);
        let (next, prob_row, log_row) = decode_step(tape, pv, state, prev_emb, z2, c_x, c_g);
        let picked = tape.slice1(log_row, target, 1);
        let picked = tape.sum_all(picked);
        let neg = tape.neg(picked);
        nll = Some(match nll {
            Some(acc) => tape.add(acc, neg),
            None => neg,
        });
        trace
            .attention
            .topic_weights
            .push(tape.value(w_x).iter().copied().collect());
        trace
            .attention
            .graph_weights
            .push(tape.value(w_g).iter().copied().collect());
        trace.prob_rows.push(prob_row);
        trace.states.push(next);
        state = next;
    }
    Ok((trace, nll.unwrap()))
}

/// Free-running generation from BOS. Stops at EOS (included in the trace) or
/// after `max_len` steps. Greedy mode breaks ties toward the lowest id; PAD
/// is never emitted.
#[allow(clippy::too_many_arguments)]
pub fn generate_tokens(
    tape: &mut Tape,
    pv: &ParamVars,
    word_emb: Var,
    topic_keys: Var,
    graph_keys: Var,
    x_enc: Var,
    z1: Var,
    z2: Var,
    mode: DecodeMode,
    max_len: usize,
    rng: &mut ChaCha8Rng,
    d_dec: usize,
) -> Result<DecoderTrace> {
    let mut state = init_state(tape, x_enc, z1, d_dec)?;
    let mut trace = DecoderTrace {
        prob_rows: Vec::new(),
        token_ids: Vec::new(),
        states: Vec::new(),
        attention: AttentionRecord::default(),
    };
    let mut prev = BOS;
    for _ in 0..max_len {
        let (w_x, c_x) = attend(tape, pv, AttentionBranch::Topic, state, topic_keys)?;
        let (w_g, c_g) = attend(tape, pv, AttentionBranch::Graph, state, graph_keys)?;
        let prev_emb = embed(tape, word_emb, prev);
        let (next, prob_row, _) = decode_step(tape, pv, state, prev_emb, z2, c_x, c_g);
        let probs = tape.value(prob_row);
        let token = match mode {
            DecodeMode::Greedy => {
                let mut best = usize::MAX;
                let mut best_p = f64::NEG_INFINITY;
                for (i, &p) in probs.iter().enumerate() {
                    if i != PAD && p > best_p {
                        best_p = p;
                        best = i;
                    }
                }
                best
            }
            DecodeMode::Sample => {
                let mut mass: f64 = probs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != PAD)
                    .map(|(_, p)| p)
                    .sum();
                if mass <= 0.0 {
                    mass = 1.0;
                }
                let draw: f64 = rng.gen_range(0.0..mass);
                let mut acc = 0.0;
                let mut chosen = EOS;
                for (i, &p) in probs.iter().enumerate() {
                    if i == PAD {
                        continue;
                    }
                    acc += p;
                    if draw < acc {
                        chosen = i;
                        break;
                    }
                }
                chosen
            }
        };
        trace
            .attention
            .topic_weights
            .push(tape.value(w_x).iter().copied().collect());
        trace
            .attention
            .graph_weights
            .push(tape.value(w_g).iter().copied().collect());
        trace.prob_rows.push(prob_row);
        trace.states.push(next);
        trace.token_ids.push(token);
        state = next;
        if token == EOS {
            break;
        }
        prev = token;
    }
    Ok(trace)
}

/// Serializable attention dump for one generated trace.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AttentionDump {
    pub tokens: Vec<String>,
    pub topic_attention: Vec<Vec<f64>>,
    pub graph_nodes: Vec<String>,
    pub graph_attention: Vec<Vec<f64>>,
}

pub fn export_attention(
    trace: &DecoderTrace,
    graph: &crate::kgraph::TopicGraph,
    vocab: &crate::data::Vocabulary,
) -> AttentionDump {
    AttentionDump {
        tokens: trace
            .token_ids
            .iter()
            .map(|&id| vocab.token(id).to_string())
            .collect(),
        topic_attention: trace.attention.topic_weights.clone(),
        graph_nodes: graph.nodes.iter().map(|n| n.token.clone()).collect(),
        graph_attention: trace.attention.graph_weights.clone(),
    }
}
