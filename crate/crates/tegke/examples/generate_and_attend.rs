//! Essay generation with attention inspection.
//!
//! Overfits one topic/essay pair, then generates from topics alone with the
//! student latents (greedy and sampled decoding) and prints the per-step
//! topic and graph attention weights.
//!
//! Run with: `cargo run --release --example generate_and_attend`

use tegke::data::{TopicEssayPair, Vocabulary};
use tegke::essay_decoder::{export_attention, DecodeMode};
use tegke::kgraph::{extract_topic_graph, TripleStore};
use tegke::model::{student_generate, Model, RelationVocab, TrainConfig};
use tegke::nn::derived_rng;
use tegke::tape::Tape;
use tegke::trainer::{train_stage1, TrainState};

fn main() {
    let pair = TopicEssayPair {
        topics: vec!["sun".into(), "sea".into()],
        essay: "the warm sun sets over the calm blue sea at dusk"
            .split_whitespace()
            .map(str::to_string)
            .collect(),
    };
    let corpus = vec![pair];

    let mut store = TripleStore::new();
    store.insert("sun", "relatedto", "warm", 1.0);
    store.insert("sun", "relatedto", "light", 0.5);
    store.insert("sea", "relatedto", "calm", 1.0);
    store.insert("sea", "hasproperty", "blue", 1.0);

    let mut cfg = TrainConfig::tiny(3);
    cfg.batch = 1;
    cfg.validate().unwrap();
    let vocab = Vocabulary::build(&corpus, cfg.vocab_max).unwrap();
    let relations = RelationVocab::from_store(&store);
    let graph = extract_topic_graph(&store, &corpus[0].topics, cfg.hops_max, cfg.per_hop).unwrap();
    let graphs = vec![graph.clone()];

    let model = Model::new(cfg.clone(), vocab.clone(), relations).unwrap();
    let mut state = TrainState::new(model);
    for epoch in 1..=300u64 {
        let logs = train_stage1(&mut state, &corpus, &graphs, 1).unwrap();
        if logs.last().unwrap().l_rec < 0.05 {
            println!("memorized the pair at epoch {epoch}");
            break;
        }
    }

    let (topic_ids, _) = tegke::data::encode_pair(&corpus[0], &vocab).unwrap();
    for (label, mode) in [
        ("greedy", DecodeMode::Greedy),
        ("sampled", DecodeMode::Sample),
    ] {
        let mut tape = Tape::new();
        let pv = state.model.params.vars(&mut tape);
        let mut rng = derived_rng(cfg.seed, "example-generate", 0);
        let trace = student_generate(
            &mut tape,
            &pv,
            &state.model,
            &graphs[0],
            &topic_ids,
            mode,
            cfg.max_len,
            &mut rng,
        )
        .unwrap();
        let words: Vec<&str> = trace
            .token_ids
            .iter()
            .map(|&id| vocab.token(id))
            .collect();
        println!("{label:>7}: {}", words.join(" "));

        if label == "greedy" {
            let dump = export_attention(&trace, &graphs[0], &vocab);
            println!("graph nodes: {:?}", dump.graph_nodes);
            println!("token -> strongest topic / strongest graph node:");
            for (t, tok) in dump.tokens.iter().enumerate() {
                let argmax = |w: &[f64]| {
                    w.iter()
                        .enumerate()
                        .max_by(|a, b| a.1.total_cmp(b.1))
                        .map(|(i, _)| i)
                        .unwrap()
                };
                let ti = argmax(&dump.topic_attention[t]);
                let gi = argmax(&dump.graph_attention[t]);
                println!(
                    "  {tok:8} -> {:8} ({:.2})  {:8} ({:.2})",
                    corpus[0].topics[ti],
                    dump.topic_attention[t][ti],
                    dump.graph_nodes[gi],
                    dump.graph_attention[t][gi]
                );
            }
        }
    }
}
