//! Full model assembly: configuration, parameter registration, relation
//! vocabulary, and the sample-level forward passes that the trainer and the
//! CLI share.

use crate::critic::init_critic;
use crate::data::Vocabulary;
use crate::essay_decoder::{
    generate_tokens, init_decoder, teacher_forced_pass, DecodeMode, DecoderTrace,
};
use crate::graph_encoder::{encode_graph, init_graph_encoder};
use crate::kgraph::{TopicGraph, TripleStore};
use crate::latent_bridge::{
    init_latent_heads, sample, student_params, teacher_params, transfer_loss, LatentSlot,
    LatentSource,
};
use crate::nn::{derived_rng, ParamStore, ParamVars};
use crate::seq_encoders::{encode_ids, init_seq_encoder, EncoderId};
use crate::tape::{Tape, Var};
use crate::{Result, TegkeError};
use indexmap::IndexMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Flat training/model configuration. Unknown dims must satisfy
/// `d_enc + d_z == d_dec` (decoder init state) and `d_g == d_emb` (the gate
/// blends graph states with word embeddings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub d_emb: usize,
    pub d_enc: usize,
    pub d_dec: usize,
    pub d_z: usize,
    pub d_g: usize,
    pub gcn_layers: usize,
    pub vocab_max: usize,
    pub batch: usize,
    pub critic_filters: usize,
    pub lambda_gp: f64,
    pub beta: f64,
    pub lr_stage1: f64,
    pub lr_stage2: f64,
    pub lr_critic: f64,
    pub n_critic: usize,
    pub epochs_stage1: usize,
    pub epochs_stage2: usize,
    pub hops_max: usize,
    pub per_hop: usize,
    pub max_len: usize,
    pub seed: u64,
    /// Global-norm clip on generator gradients; `null` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d_emb: 200,
            d_enc: 512,
            d_dec: 1024,
            d_z: 512,
            d_g: 200,
            gcn_layers: 2,
            vocab_max: 50_000,
            batch: 32,
            critic_filters: 100,
            lambda_gp: 10.0,
            beta: 10.0,
            lr_stage1: 1e-3,
            lr_stage2: 1e-4,
            lr_critic: 1e-4,
            n_critic: 5,
            epochs_stage1: 20,
            epochs_stage2: 10,
            hops_max: 5,
            per_hop: 40,
            max_len: 100,
            seed: 0,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    /// A small configuration for unit tests and quick experiments.
    pub fn tiny(seed: u64) -> Self {
        Self {
            d_emb: 8,
            d_enc: 8,
            d_dec: 12,
            d_z: 4,
            d_g: 8,
            gcn_layers: 1,
            vocab_max: 200,
            batch: 8,
            critic_filters: 4,
            epochs_stage1: 1,
            epochs_stage2: 1,
            hops_max: 2,
            per_hop: 5,
            max_len: 24,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("d_emb", self.d_emb),
            ("d_enc", self.d_enc),
            ("d_dec", self.d_dec),
            ("d_z", self.d_z),
            ("d_g", self.d_g),
            ("batch", self.batch),
            ("critic_filters", self.critic_filters),
            ("n_critic", self.n_critic),
            ("hops_max", self.hops_max),
            ("per_hop", self.per_hop),
            ("max_len", self.max_len),
        ];
        for (name, v) in positives {
            if v == 0 {
                return Err(TegkeError::Validation(format!("{name} must be positive")));
            }
        }
        if self.vocab_max < 4 {
            return Err(TegkeError::Validation(
                "vocab_max must cover the four special tokens".into(),
            ));
        }
        if self.d_enc + self.d_z != self.d_dec {
            return Err(TegkeError::Validation(format!(
                "d_enc + d_z must equal d_dec ({} + {} != {})",
                self.d_enc, self.d_z, self.d_dec
            )));
        }
        if self.d_enc % 2 != 0 {
            return Err(TegkeError::Validation(
                "d_enc must be even (bidirectional encoder)".into(),
            ));
        }
        if self.d_g != self.d_emb {
            return Err(TegkeError::Validation(format!(
                "d_g must equal d_emb ({} != {}): the gate blends graph states with word embeddings",
                self.d_g, self.d_emb
            )));
        }
        for (name, v) in [
            ("lambda_gp", self.lambda_gp),
            ("beta", self.beta),
            ("lr_stage1", self.lr_stage1),
            ("lr_stage2", self.lr_stage2),
            ("lr_critic", self.lr_critic),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(TegkeError::Validation(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        if let Some(c) = self.clip_norm {
            if !c.is_finite() || c <= 0.0 {
                return Err(TegkeError::Validation(
                    "clip_norm must be finite and positive when set".into(),
                ));
            }
        }
        Ok(())
    }
}

pub const UNK_REL: &str = "<unk_rel>";

/// Global relation vocabulary: every relation a topic graph can mention,
/// including reversed (`{name}_r`) variants, with an unknown-relation slot at
/// index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationVocab {
    names: Vec<String>,
    index: IndexMap<String, usize>,
}

impl RelationVocab {
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        if names.first().map(String::as_str) != Some(UNK_REL) {
            return Err(TegkeError::Validation(format!(
                "relation list must start with {UNK_REL}"
            )));
        }
        let mut index = IndexMap::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(TegkeError::Validation(format!("duplicate relation {n}")));
            }
        }
        Ok(Self { names, index })
    }

    pub fn from_store(store: &TripleStore) -> Self {
        let mut base: Vec<&str> = store.triples().iter().map(|t| t.relation.as_str()).collect();
        base.sort_unstable();
        base.dedup();
        let mut names = vec![UNK_REL.to_string()];
        for r in base {
            names.push(r.to_string());
            names.push(format!("{r}_r"));
        }
        Self::from_names(names).expect("constructed list is duplicate-free")
    }

    pub fn id(&self, name: &str) -> usize {
        self.index.get(name).copied().unwrap_or(0)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Optimizer grouping by parameter-name prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Student,
    Critic,
    Main,
}

pub fn group_of(name: &str) -> ParamGroup {
    if name.starts_with("student.") {
        ParamGroup::Student
    } else if name.starts_with("critic.") {
        ParamGroup::Critic
    } else {
        ParamGroup::Main
    }
}

pub fn group_names(params: &ParamStore, group: ParamGroup) -> Vec<String> {
    params
        .names()
        .filter(|n| group_of(n) == group)
        .map(str::to_string)
        .collect()
}

pub struct Model {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub relations: RelationVocab,
    pub params: ParamStore,
}

impl Model {
    pub fn new(config: TrainConfig, vocab: Vocabulary, relations: RelationVocab) -> Result<Self> {
        config.validate()?;
        let mut rng = derived_rng(config.seed, "model-init", 0);
        let mut params = ParamStore::new();
        params.init_matrix("emb.word", vocab.len(), config.d_emb, &mut rng);
        params.init_matrix("emb.rel", relations.len(), config.d_emb, &mut rng);
        let d_dir = config.d_enc / 2;
        init_seq_encoder(&mut params, EncoderId::Topic, config.d_emb, d_dir, &mut rng);
        init_seq_encoder(&mut params, EncoderId::Essay, config.d_emb, d_dir, &mut rng);
        init_latent_heads(&mut params, config.d_enc, config.d_z, &mut rng);
        init_graph_encoder(&mut params, config.d_g, config.gcn_layers, &mut rng);
        init_decoder(
            &mut params,
            vocab.len(),
            config.d_emb,
            config.d_enc,
            config.d_g,
            config.d_z,
            config.d_dec,
            &mut rng,
        );
        init_critic(
            &mut params,
            vocab.len(),
            config.d_emb,
            config.critic_filters,
            &mut rng,
        );
        Ok(Self {
            config,
            vocab,
            relations,
            params,
        })
    }

    /// Graph node/relation indices into the shared embedding tables.
    pub fn graph_rows(&self, graph: &TopicGraph) -> (Vec<usize>, Vec<usize>) {
        let nodes = graph
            .nodes
            .iter()
            .map(|n| self.vocab.id(&n.token))
            .collect();
        let rels = graph
            .relations
            .iter()
            .map(|r| self.relations.id(r))
            .collect();
        (nodes, rels)
    }
}

/// Standard-normal noise of length `d` from a derived stream.
pub fn draw_eps(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Outputs of a teacher-conditioned training forward pass on one sample.
pub struct SampleForward {
    pub trace: DecoderTrace,
    pub l_rec: Var,
    pub l_trans: Var,
    /// Tokens in the teacher-forced target (the per-token divisor for L_rec).
    pub target_len: usize,
}

/// Teacher-forced forward pass: encode topics and the ground-truth essay,
/// draw teacher latents, encode the topic graph, decode with teacher forcing.
/// The transfer loss compares the student to the detached teacher.
#[allow(clippy::too_many_arguments)]
pub fn teacher_forward(
    tape: &mut Tape,
    pv: &ParamVars,
    model: &Model,
    graph: &TopicGraph,
    topic_ids: &[usize],
    essay_in: &[usize],
    essay_out: &[usize],
    eps1: &[f64],
    eps2: &[f64],
) -> Result<SampleForward> {
    let cfg = &model.config;
    let word_emb = pv.get("emb.word");
    let rel_emb = pv.get("emb.rel");
    let d_dir = cfg.d_enc / 2;

    let x_out = encode_ids(tape, pv, EncoderId::Topic, word_emb, topic_ids, d_dir)?;
    let y_out = encode_ids(tape, pv, EncoderId::Essay, word_emb, essay_out, d_dir)?;

    let teacher = teacher_params(tape, pv, x_out.pooled, y_out.pooled, cfg.d_z);
    // The student branch sees a detached encoding: the transfer loss trains
    // the student head alone, and the teacher side is detached inside
    // `transfer_loss`, so encoders and teacher carry no gradient from it.
    let x_for_student = tape.detach(x_out.pooled);
    let student = student_params(tape, pv, x_for_student, cfg.d_z);
    let l_trans = transfer_loss(tape, student, teacher);

    let e1 = tape.constant(ndarray::Array1::from(eps1.to_vec()).into_dyn());
    let e2 = tape.constant(ndarray::Array1::from(eps2.to_vec()).into_dyn());
    let z1 = sample(tape, teacher.0, e1, LatentSource::Teacher, LatentSlot::Z1)?;
    let z2 = sample(tape, teacher.1, e2, LatentSource::Teacher, LatentSlot::Z2)?;

    let topic_keys = tape.stack_rows(&x_out.states);
    let (node_rows, rel_rows) = model.graph_rows(graph);
    let g = encode_graph(
        tape,
        pv,
        graph,
        word_emb,
        rel_emb,
        &node_rows,
        &rel_rows,
        cfg.gcn_layers,
    )?;

    let (trace, l_rec) = teacher_forced_pass(
        tape,
        pv,
        word_emb,
        topic_keys,
        g.h,
        x_out.pooled,
        z1.z,
        z2.z,
        essay_in,
        essay_out,
        cfg.d_dec,
    )?;
    Ok(SampleForward {
        trace,
        l_rec,
        l_trans,
        target_len: essay_out.len(),
    })
}

/// Inference: encode topics, draw student latents with the supplied RNG,
/// encode the graph, and decode free-running.
pub fn student_generate(
    tape: &mut Tape,
    pv: &ParamVars,
    model: &Model,
    graph: &TopicGraph,
    topic_ids: &[usize],
    mode: DecodeMode,
    max_len: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DecoderTrace> {
    let cfg = &model.config;
    let word_emb = pv.get("emb.word");
    let rel_emb = pv.get("emb.rel");
    let d_dir = cfg.d_enc / 2;

    let x_out = encode_ids(tape, pv, EncoderId::Topic, word_emb, topic_ids, d_dir)?;
    let student = student_params(tape, pv, x_out.pooled, cfg.d_z);
    let eps1 = draw_eps(rng, cfg.d_z);
    let eps2 = draw_eps(rng, cfg.d_z);
    let e1 = tape.constant(ndarray::Array1::from(eps1).into_dyn());
    let e2 = tape.constant(ndarray::Array1::from(eps2).into_dyn());
    let z1 = sample(tape, student.0, e1, LatentSource::Student, LatentSlot::Z1)?;
    let z2 = sample(tape, student.1, e2, LatentSource::Student, LatentSlot::Z2)?;

    let topic_keys = tape.stack_rows(&x_out.states);
    let (node_rows, rel_rows) = model.graph_rows(graph);
    let g = encode_graph(
        tape,
        pv,
        graph,
        word_emb,
        rel_emb,
        &node_rows,
        &rel_rows,
        cfg.gcn_layers,
    )?;

    generate_tokens(
        tape,
        pv,
        word_emb,
        topic_keys,
        g.h,
        x_out.pooled,
        z1.z,
        z2.z,
        mode,
        max_len,
        rng,
        cfg.d_dec,
    )
}
