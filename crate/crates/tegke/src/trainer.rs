//! Two-stage training: stage 1 minimizes reconstruction plus latent transfer;
//! stage 2 adds the Wasserstein critic. Single-file checkpoints round-trip
//! bit-exactly, including optimizer moments, so a resumed run reproduces the
//! uninterrupted loss trajectory.
//!
//! All randomness (batch order, latent noise, interpolation factors) is drawn
//! from streams derived from `(seed, tag, counter)`, never from ambient
//! state, which makes resumption independent of RNG serialization.

use crate::critic::{critic_loss, critic_score, generator_adv_loss, one_hot_rows};
use crate::data::{make_batches, Batch, TopicEssayPair};
use crate::kgraph::TopicGraph;
use crate::model::{
    draw_eps, group_names, teacher_forward, Model, ParamGroup, RelationVocab, TrainConfig,
};
use crate::nn::{clip_global_norm, derived_rng, grad_values, Adam};
use crate::tape::Tape;
use crate::{Result, TegkeError};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const CKPT_MAGIC: &[u8; 8] = b"TEGKECKP";
pub const CKPT_VERSION: u32 = 1;

/// One log line per optimization step (JSON-lines serializable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub stage: u8,
    /// Mean per-token reconstruction loss over the batch.
    pub l_rec: f64,
    /// Mean per-sample transfer loss over the batch.
    pub l_trans: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_adv: Option<f64>,
}

/// Model plus everything needed to continue training exactly where it
/// stopped.
pub struct TrainState {
    pub model: Model,
    /// 1 while in the first stage, 2 once the adversarial stage has begun.
    pub stage: u8,
    pub step: u64,
    pub stage1_epochs_done: u64,
    pub stage2_epochs_done: u64,
    pub opt_main: Adam,
    pub opt_student: Adam,
    pub opt_critic: Adam,
}

impl TrainState {
    pub fn new(model: Model) -> Self {
        let lr1 = model.config.lr_stage1;
        let lr_c = model.config.lr_critic;
        TrainState {
            model,
            stage: 1,
            step: 0,
            stage1_epochs_done: 0,
            stage2_epochs_done: 0,
            opt_main: Adam::new(lr1),
            opt_student: Adam::new(lr1),
            opt_critic: Adam::new(lr_c),
        }
    }
}

fn check_finite(batch: usize, parts: &[(&str, f64)]) -> Result<()> {
    let bad: Vec<String> = parts
        .iter()
        .filter(|(_, v)| !v.is_finite())
        .map(|(n, v)| format!("{n}={v}"))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(TegkeError::NonFinite {
            batch,
            components: bad.join(", "),
        })
    }
}

fn batch_views<'a>(batch: &'a Batch) -> Vec<(usize, Vec<usize>, Vec<usize>, Vec<usize>)> {
    let mut out = Vec::with_capacity(batch.len());
    for s in 0..batch.len() {
        let t = batch.topic_ids[s][..batch.topic_lengths[s]].to_vec();
        let n = batch.essay_lengths[s];
        let inp = batch.essay_ids_in[s][..n].to_vec();
        let tgt = batch.essay_ids_out[s][..n].to_vec();
        out.push((batch.sample_indices[s], t, inp, tgt));
    }
    out
}

fn epoch_batches(
    corpus: &[TopicEssayPair],
    model: &Model,
    tag: &str,
    epoch: u64,
) -> Result<Vec<Batch>> {
    let mut r = derived_rng(model.config.seed, tag, epoch);
    let shuffle_seed: u64 = r.gen();
    make_batches(corpus, &model.vocab, model.config.batch, shuffle_seed)
}

/// Stage 1: minimize batch-mean `L_rec + L_trans` with teacher latents.
/// Runs `epochs` additional epochs on top of whatever the state has done.
pub fn train_stage1(
    state: &mut TrainState,
    corpus: &[TopicEssayPair],
    graphs: &[TopicGraph],
    epochs: u64,
) -> Result<Vec<StepLog>> {
    if state.stage != 1 {
        return Err(TegkeError::Validation(
            "stage 1 cannot continue after stage 2 has begun".into(),
        ));
    }
    if corpus.len() != graphs.len() {
        return Err(TegkeError::Validation(
            "corpus and graph list must be aligned".into(),
        ));
    }
    let main = group_names(&state.model.params, ParamGroup::Main);
    let student = group_names(&state.model.params, ParamGroup::Student);
    let mut logs = Vec::new();
    let first_epoch = state.stage1_epochs_done;
    for epoch in first_epoch..first_epoch + epochs {
        let batches = epoch_batches(corpus, &state.model, "s1-batches", epoch)?;
        for (bi, batch) in batches.iter().enumerate() {
            let cfg = state.model.config.clone();
            let mut eps_rng = derived_rng(cfg.seed, "s1-eps", state.step);
            let mut tape = Tape::new();
            let pv = state.model.params.vars(&mut tape);
            let mut l_rec_sum = None;
            let mut l_trans_sum = None;
            let mut tokens = 0usize;
            for (sample_idx, topics, inp, tgt) in batch_views(batch) {
                let eps1 = draw_eps(&mut eps_rng, cfg.d_z);
                let eps2 = draw_eps(&mut eps_rng, cfg.d_z);
                let f = teacher_forward(
                    &mut tape,
                    &pv,
                    &state.model,
                    &graphs[sample_idx],
                    &topics,
                    &inp,
                    &tgt,
                    &eps1,
                    &eps2,
                )?;
                tokens += f.target_len;
                l_rec_sum = Some(match l_rec_sum {
                    Some(a) => tape.add(a, f.l_rec),
                    None => f.l_rec,
                });
                l_trans_sum = Some(match l_trans_sum {
                    Some(a) => tape.add(a, f.l_trans),
                    None => f.l_trans,
                });
            }
            let (l_rec_sum, l_trans_sum) = (l_rec_sum.unwrap(), l_trans_sum.unwrap());
            let n = batch.len() as f64;
            let rec_mean = tape.mul_const(l_rec_sum, 1.0 / n);
            let trans_mean = tape.mul_const(l_trans_sum, 1.0 / n);
            let total = tape.add(rec_mean, trans_mean);
            let l_rec_tok = tape.scalar_value(l_rec_sum) / tokens as f64;
            let l_trans_mean = tape.scalar_value(trans_mean);
            check_finite(bi, &[("l_rec", l_rec_tok), ("l_trans", l_trans_mean)])?;
            let grads = tape.backward(total);
            let mut gv = grad_values(&tape, &pv, &grads);
            if let Some(c) = cfg.clip_norm {
                clip_global_norm(&mut gv, &main, c);
            }
            state.opt_main.step(&mut state.model.params, &gv, &main);
            state.opt_student.step(&mut state.model.params, &gv, &student);
            state.step += 1;
            logs.push(StepLog {
                step: state.step,
                stage: 1,
                l_rec: l_rec_tok,
                l_trans: l_trans_mean,
                l_d: None,
                l_adv: None,
            });
        }
        state.stage1_epochs_done += 1;
    }
    Ok(logs)
}

/// One critic update on a batch: generated rows are detached, so only the
/// critic group carries gradient. Returns the batch-mean critic loss.
fn critic_step(
    state: &mut TrainState,
    batch: &Batch,
    graphs: &[TopicGraph],
    batch_index: usize,
    draw_counter: u64,
) -> Result<f64> {
    let cfg = state.model.config.clone();
    let critic = group_names(&state.model.params, ParamGroup::Critic);
    let mut rng = derived_rng(cfg.seed, "s2-critic", draw_counter);
    let mut tape = Tape::new();
    let pv = state.model.params.vars(&mut tape);
    let mut loss_sum = None;
    for (sample_idx, topics, inp, tgt) in batch_views(batch) {
        let eps1 = draw_eps(&mut rng, cfg.d_z);
        let eps2 = draw_eps(&mut rng, cfg.d_z);
        let alpha: f64 = rng.gen_range(0.0..1.0);
        let f = teacher_forward(
            &mut tape,
            &pv,
            &state.model,
            &graphs[sample_idx],
            &topics,
            &inp,
            &tgt,
            &eps1,
            &eps2,
        )?;
        let detached: Vec<_> = f.trace.prob_rows.iter().map(|&r| tape.detach(r)).collect();
        let gen = tape.stack_rows(&detached);
        let real = one_hot_rows(&mut tape, &tgt, state.model.vocab.len())?;
        let ld = critic_loss(&mut tape, &pv, &topics, real, gen, alpha, cfg.lambda_gp)?;
        loss_sum = Some(match loss_sum {
            Some(a) => tape.add(a, ld),
            None => ld,
        });
    }
    let loss_sum = loss_sum.unwrap();
    let mean = tape.mul_const(loss_sum, 1.0 / batch.len() as f64);
    let value = tape.scalar_value(mean);
    check_finite(batch_index, &[("l_d", value)])?;
    let grads = tape.backward(mean);
    let gv = grad_values(&tape, &pv, &grads);
    state.opt_critic.step(&mut state.model.params, &gv, &critic);
    Ok(value)
}

/// Stage 2: per batch, `n_critic` critic updates (fresh noise each) then one
/// generator update on `L_adv + L_trans`.
pub fn train_stage2(
    state: &mut TrainState,
    corpus: &[TopicEssayPair],
    graphs: &[TopicGraph],
    epochs: u64,
) -> Result<Vec<StepLog>> {
    if corpus.len() != graphs.len() {
        return Err(TegkeError::Validation(
            "corpus and graph list must be aligned".into(),
        ));
    }
    if state.stage == 1 {
        state.stage = 2;
        state.opt_main = Adam::new(state.model.config.lr_stage2);
        state.opt_student = Adam::new(state.model.config.lr_stage2);
        state.opt_critic = Adam::new(state.model.config.lr_critic);
    }
    let main = group_names(&state.model.params, ParamGroup::Main);
    let student = group_names(&state.model.params, ParamGroup::Student);
    let mut logs = Vec::new();
    let first_epoch = state.stage2_epochs_done;
    for epoch in first_epoch..first_epoch + epochs {
        let batches = epoch_batches(corpus, &state.model, "s2-batches", epoch)?;
        for (bi, batch) in batches.iter().enumerate() {
            let cfg = state.model.config.clone();
            let mut last_ld = f64::NAN;
            for k in 0..cfg.n_critic {
                let counter = state.step * cfg.n_critic as u64 + k as u64;
                last_ld = critic_step(state, batch, graphs, bi, counter)?;
            }

            let mut rng = derived_rng(cfg.seed, "s2-gen", state.step);
            let mut tape = Tape::new();
            let pv = state.model.params.vars(&mut tape);
            let mut adv_sum = None;
            let mut trans_sum = None;
            let mut rec_value = 0.0;
            let mut tokens = 0usize;
            for (sample_idx, topics, inp, tgt) in batch_views(batch) {
                let eps1 = draw_eps(&mut rng, cfg.d_z);
                let eps2 = draw_eps(&mut rng, cfg.d_z);
                let f = teacher_forward(
                    &mut tape,
                    &pv,
                    &state.model,
                    &graphs[sample_idx],
                    &topics,
                    &inp,
                    &tgt,
                    &eps1,
                    &eps2,
                )?;
                let gen = tape.stack_rows(&f.trace.prob_rows);
                let score = critic_score(&mut tape, &pv, &topics, gen)?;
                let ll = tape.neg(f.l_rec);
                let l_adv = generator_adv_loss(&mut tape, score, ll, cfg.beta);
                rec_value += tape.scalar_value(f.l_rec);
                tokens += f.target_len;
                adv_sum = Some(match adv_sum {
                    Some(a) => tape.add(a, l_adv),
                    None => l_adv,
                });
                trans_sum = Some(match trans_sum {
                    Some(a) => tape.add(a, f.l_trans),
                    None => f.l_trans,
                });
            }
            let (adv_sum, trans_sum) = (adv_sum.unwrap(), trans_sum.unwrap());
            let n = batch.len() as f64;
            let adv_mean = tape.mul_const(adv_sum, 1.0 / n);
            let trans_mean = tape.mul_const(trans_sum, 1.0 / n);
            let total = tape.add(adv_mean, trans_mean);
            let l_adv_v = tape.scalar_value(adv_mean);
            let l_trans_v = tape.scalar_value(trans_mean);
            let l_rec_tok = rec_value / tokens as f64;
            check_finite(
                bi,
                &[
                    ("l_adv", l_adv_v),
                    ("l_trans", l_trans_v),
                    ("l_rec", l_rec_tok),
                    ("l_d", last_ld),
                ],
            )?;
            let grads = tape.backward(total);
            let mut gv = grad_values(&tape, &pv, &grads);
            if let Some(c) = cfg.clip_norm {
                clip_global_norm(&mut gv, &main, c);
            }
            state.opt_main.step(&mut state.model.params, &gv, &main);
            state.opt_student.step(&mut state.model.params, &gv, &student);
            state.step += 1;
            logs.push(StepLog {
                step: state.step,
                stage: 2,
                l_rec: l_rec_tok,
                l_trans: l_trans_v,
                l_d: Some(last_ld),
                l_adv: Some(l_adv_v),
            });
        }
        state.stage2_epochs_done += 1;
    }
    Ok(logs)
}

#[derive(Serialize, Deserialize)]
struct AdamHeader {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
}

impl AdamHeader {
    fn of(a: &Adam) -> Self {
        AdamHeader {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            t: a.t,
        }
    }

    fn restore(&self) -> Adam {
        let mut a = Adam::new(self.lr);
        a.beta1 = self.beta1;
        a.beta2 = self.beta2;
        a.eps = self.eps;
        a.t = self.t;
        a
    }
}

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    vocab: Vec<String>,
    relations: Vec<String>,
    vocab_digest: String,
    stage: u8,
    step: u64,
    stage1_epochs_done: u64,
    stage2_epochs_done: u64,
    adam_main: AdamHeader,
    adam_student: AdamHeader,
    adam_critic: AdamHeader,
    arrays: Vec<ArrayEntry>,
}

fn opt_arrays<'a>(
    state: &'a TrainState,
) -> Vec<(String, &'a ndarray::ArrayD<f64>)> {
    let mut out = Vec::new();
    for (name, value) in state.model.params.iter() {
        out.push((format!("p.{name}"), value));
    }
    for (tag, opt) in [
        ("main", &state.opt_main),
        ("student", &state.opt_student),
        ("critic", &state.opt_critic),
    ] {
        for (name, value) in opt.m.iter() {
            out.push((format!("m.{tag}.{name}"), value));
        }
        for (name, value) in opt.v.iter() {
            out.push((format!("v.{tag}.{name}"), value));
        }
    }
    out
}

/// Write the full training state to one file: magic, version, JSON header,
/// then raw little-endian `f64` data in header order.
pub fn save(state: &TrainState, path: &Path) -> Result<()> {
    let arrays = opt_arrays(state);
    let header = Header {
        config: state.model.config.clone(),
        vocab: state.model.vocab.tokens().to_vec(),
        relations: state.model.relations.names().to_vec(),
        vocab_digest: state.model.vocab.digest(),
        stage: state.stage,
        step: state.step,
        stage1_epochs_done: state.stage1_epochs_done,
        stage2_epochs_done: state.stage2_epochs_done,
        adam_main: AdamHeader::of(&state.opt_main),
        adam_student: AdamHeader::of(&state.opt_student),
        adam_critic: AdamHeader::of(&state.opt_critic),
        arrays: arrays
            .iter()
            .map(|(n, v)| ArrayEntry {
                name: n.clone(),
                shape: v.shape().to_vec(),
            })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(CKPT_MAGIC)?;
    f.write_all(&CKPT_VERSION.to_le_bytes())?;
    f.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    f.write_all(&header_bytes)?;
    for (_, v) in arrays {
        for x in v.iter() {
            f.write_all(&x.to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Load a checkpoint. Fails on a bad magic/version, on truncated data, or if
/// the stored vocabulary no longer matches its recorded digest.
pub fn load(path: &Path) -> Result<TrainState> {
    use crate::data::Vocabulary;
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic)?;
    if &magic != CKPT_MAGIC {
        return Err(TegkeError::Checkpoint("bad magic bytes".into()));
    }
    let mut v4 = [0u8; 4];
    f.read_exact(&mut v4)?;
    let version = u32::from_le_bytes(v4);
    if version != CKPT_VERSION {
        return Err(TegkeError::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {CKPT_VERSION})"
        )));
    }
    let mut l8 = [0u8; 8];
    f.read_exact(&mut l8)?;
    let hlen = u64::from_le_bytes(l8) as usize;
    let mut hbytes = vec![0u8; hlen];
    f.read_exact(&mut hbytes)?;
    let header: Header = serde_json::from_slice(&hbytes)?;
    header.config.validate()?;

    let vocab = Vocabulary::from_tokens(header.vocab.clone(), header.config.vocab_max)?;
    if vocab.digest() != header.vocab_digest {
        return Err(TegkeError::Checkpoint(
            "vocabulary digest mismatch: the stored token list does not match its digest".into(),
        ));
    }
    let relations = RelationVocab::from_names(header.relations.clone())?;

    let mut arrays: Vec<(String, ndarray::ArrayD<f64>)> = Vec::with_capacity(header.arrays.len());
    for e in &header.arrays {
        let count: usize = e.shape.iter().product();
        let mut buf = vec![0u8; count * 8];
        f.read_exact(&mut buf).map_err(|_| {
            TegkeError::Checkpoint(format!("truncated data for array {}", e.name))
        })?;
        let data: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let arr = ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(&e.shape), data)
            .map_err(|e| TegkeError::Checkpoint(format!("bad array shape: {e}")))?;
        arrays.push((e.name.clone(), arr));
    }

    let mut params = crate::nn::ParamStore::new();
    let mut opt_main = header.adam_main.restore();
    let mut opt_student = header.adam_student.restore();
    let mut opt_critic = header.adam_critic.restore();
    for (name, arr) in arrays {
        if let Some(p) = name.strip_prefix("p.") {
            params.insert(p, arr);
        } else if let Some(rest) = name.strip_prefix("m.") {
            route_moment(rest, arr, &mut opt_main, &mut opt_student, &mut opt_critic, true)?;
        } else if let Some(rest) = name.strip_prefix("v.") {
            route_moment(rest, arr, &mut opt_main, &mut opt_student, &mut opt_critic, false)?;
        } else {
            return Err(TegkeError::Checkpoint(format!("unknown array {name}")));
        }
    }
    let model = Model {
        config: header.config,
        vocab,
        relations,
        params,
    };
    Ok(TrainState {
        model,
        stage: header.stage,
        step: header.step,
        stage1_epochs_done: header.stage1_epochs_done,
        stage2_epochs_done: header.stage2_epochs_done,
        opt_main,
        opt_student,
        opt_critic,
    })
}

fn route_moment(
    rest: &str,
    arr: ndarray::ArrayD<f64>,
    main: &mut Adam,
    student: &mut Adam,
    critic: &mut Adam,
    first_moment: bool,
) -> Result<()> {
    let (tag, name) = rest
        .split_once('.')
        .ok_or_else(|| TegkeError::Checkpoint(format!("malformed moment key {rest}")))?;
    let opt = match tag {
        "main" => main,
        "student" => student,
        "critic" => critic,
        other => {
            return Err(TegkeError::Checkpoint(format!(
                "unknown optimizer group {other}"
            )))
        }
    };
    let slot = if first_moment { &mut opt.m } else { &mut opt.v };
    slot.insert(name.to_string(), arr);
    Ok(())
}

/// Serialize logs as JSON lines.
pub fn write_log<W: Write>(mut out: W, logs: &[StepLog]) -> Result<()> {
    for l in logs {
        serde_json::to_writer(&mut out, l)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
