//! Checkpointing with bit-exact resume.
//!
//! Trains three epochs straight through, then repeats the run as one epoch +
//! save + load + two resumed epochs, and verifies that every logged loss is
//! bitwise identical between the two trajectories.
//!
//! Run with: `cargo run --release --example checkpoint_resume`

use tegke::data::{TopicEssayPair, Vocabulary};
use tegke::kgraph::{extract_topic_graph, TripleStore};
use tegke::model::{Model, RelationVocab, TrainConfig};
use tegke::trainer::{load, save, train_stage1, StepLog, TrainState};

fn build_world() -> (Vec<TopicEssayPair>, TripleStore, TrainConfig) {
    let topics = ["sun", "sea", "rain", "wind", "tree", "hill", "moon", "star"];
    let fillers = ["warm", "cold", "soft", "deep", "tall", "wide", "blue", "gold"];
    let corpus: Vec<TopicEssayPair> = (0..16)
        .map(|i| {
            let t1 = topics[i % 8];
            let t2 = topics[(i + 1) % 8];
            let essay: Vec<String> = (0..12)
                .map(|j| {
                    if j % 4 == 0 {
                        t1.to_string()
                    } else {
                        fillers[(i + j) % 8].to_string()
                    }
                })
                .collect();
            TopicEssayPair {
                topics: vec![t1.to_string(), t2.to_string()],
                essay,
            }
        })
        .collect();
    let mut store = TripleStore::new();
    for i in 0..8 {
        store.insert(topics[i], "relatedto", topics[(i + 1) % 8], 1.0);
    }
    let mut cfg = TrainConfig::tiny(21);
    cfg.batch = 4;
    cfg.validate().unwrap();
    (corpus, store, cfg)
}

fn main() {
    let (corpus, store, cfg) = build_world();
    let vocab = Vocabulary::build(&corpus, cfg.vocab_max).unwrap();
    let relations = RelationVocab::from_store(&store);
    let graphs: Vec<_> = corpus
        .iter()
        .map(|p| extract_topic_graph(&store, &p.topics, cfg.hops_max, cfg.per_hop).unwrap())
        .collect();

    // Straight-through run: 3 epochs.
    let model = Model::new(cfg.clone(), vocab.clone(), relations.clone()).unwrap();
    let mut state_a = TrainState::new(model);
    let mut logs_a: Vec<StepLog> = Vec::new();
    for _ in 0..3 {
        logs_a.extend(train_stage1(&mut state_a, &corpus, &graphs, 1).unwrap());
    }

    // Interrupted run: 1 epoch, save, load, 2 more epochs.
    let dir = std::env::temp_dir().join("tegke_checkpoint_example");
    std::fs::create_dir_all(&dir).unwrap();
    let ckpt = dir.join("after_epoch_1.ckpt");
    let model = Model::new(cfg.clone(), vocab, relations).unwrap();
    let mut state_b = TrainState::new(model);
    let mut logs_b = train_stage1(&mut state_b, &corpus, &graphs, 1).unwrap();
    save(&state_b, &ckpt).unwrap();
    println!(
        "saved checkpoint after step {} ({} bytes)",
        state_b.step,
        std::fs::metadata(&ckpt).unwrap().len()
    );
    let mut resumed = load(&ckpt).unwrap();
    logs_b.extend(train_stage1(&mut resumed, &corpus, &graphs, 2).unwrap());

    assert_eq!(logs_a.len(), logs_b.len());
    let bitwise = logs_a.iter().zip(&logs_b).all(|(a, b)| {
        a.l_rec.to_bits() == b.l_rec.to_bits() && a.l_trans.to_bits() == b.l_trans.to_bits()
    });
    println!(
        "{} logged steps, straight-through vs save/load/resume: {}",
        logs_a.len(),
        if bitwise { "bitwise identical" } else { "DIVERGED" }
    );
    assert!(bitwise);
    std::fs::remove_dir_all(&dir).ok();
}
