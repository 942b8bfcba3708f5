//! Two-stage training on a tiny synthetic corpus.
//!
//! Stage 1 trains the auto-encoder: reconstruction loss for the main
//! parameters and the KL transfer loss for the student heads. Stage 2 wraps
//! the decoder in Wasserstein adversarial training against a CNN critic.
//!
//! Run with: `cargo run --release --example end_to_end_training`

use tegke::data::{TopicEssayPair, Vocabulary};
use tegke::kgraph::{extract_topic_graph, TripleStore};
use tegke::model::{Model, RelationVocab, TrainConfig};
use tegke::trainer::{train_stage1, train_stage2, TrainState};

fn main() {
    // A handful of topic/essay pairs with overlapping vocabulary.
    let corpus: Vec<TopicEssayPair> = [
        (vec!["sun", "sea"], "the warm sun sets over the calm sea"),
        (vec!["moon", "star"], "a pale moon rises near a gold star"),
        (vec!["rain", "wind"], "cold rain falls and the wind blows fast"),
        (vec!["tree", "hill"], "a tall tree stands on the old hill"),
    ]
    .into_iter()
    .map(|(topics, essay)| TopicEssayPair {
        topics: topics.into_iter().map(str::to_string).collect(),
        essay: essay.split_whitespace().map(str::to_string).collect(),
    })
    .collect();

    // Commonsense-style triples linking the topics.
    let mut store = TripleStore::new();
    store.insert("sun", "relatedto", "warm", 1.0);
    store.insert("sea", "relatedto", "calm", 1.0);
    store.insert("moon", "relatedto", "pale", 1.0);
    store.insert("star", "isa", "sun", 1.0);
    store.insert("rain", "relatedto", "cold", 1.0);
    store.insert("wind", "relatedto", "fast", 1.0);
    store.insert("tree", "atlocation", "hill", 1.0);

    let mut cfg = TrainConfig::tiny(7);
    cfg.batch = 2;
    cfg.n_critic = 2;
    cfg.lr_stage1 = 3e-3;
    cfg.validate().unwrap();

    let vocab = Vocabulary::build(&corpus, cfg.vocab_max).unwrap();
    let relations = RelationVocab::from_store(&store);
    let graphs: Vec<_> = corpus
        .iter()
        .map(|p| extract_topic_graph(&store, &p.topics, cfg.hops_max, cfg.per_hop).unwrap())
        .collect();

    let model = Model::new(cfg, vocab, relations).unwrap();
    let mut state = TrainState::new(model);

    println!("stage 1: reconstruction + knowledge transfer");
    for epoch in 1..=80u64 {
        let logs = train_stage1(&mut state, &corpus, &graphs, 1).unwrap();
        let tail = logs.last().unwrap();
        if epoch % 10 == 0 {
            println!(
                "  epoch {epoch:2}  per-token L_rec {:7.4}  L_trans {:7.4}",
                tail.l_rec, tail.l_trans
            );
        }
    }

    println!("stage 2: Wasserstein adversarial fine-tuning");
    let logs = train_stage2(&mut state, &corpus, &graphs, 10).unwrap();
    for (i, log) in logs.iter().enumerate() {
        if (i + 1) % 2 == 0 {
            println!(
                "  step {:2}  L_D {:8.4}  L_adv {:8.4}  L_trans {:7.4}",
                i + 1,
                log.l_d.unwrap(),
                log.l_adv.unwrap(),
                log.l_trans
            );
        }
    }
    println!("done: {} total optimization steps", state.step);
}
