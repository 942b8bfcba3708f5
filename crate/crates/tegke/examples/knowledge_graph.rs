//! Multi-hop topic-graph extraction and encoding.
//!
//! Builds a small commonsense triple store, extracts a budgeted multi-hop
//! subgraph around a pair of topics (materializing reversed `_r` relations),
//! and runs the compositional graph encoder over it.
//!
//! Run with: `cargo run --release --example knowledge_graph`

use tegke::graph_encoder::{encode_graph, init_graph_encoder};
use tegke::kgraph::{extract_topic_graph, TripleStore};
use tegke::nn::{derived_rng, ParamStore};
use tegke::tape::Tape;

fn main() {
    let mut store = TripleStore::new();
    for (h, r, t) in [
        ("sun", "isa", "star"),
        ("sun", "relatedto", "light"),
        ("light", "relatedto", "day"),
        ("sea", "relatedto", "water"),
        ("water", "usedfor", "life"),
        ("fish", "atlocation", "sea"),
        ("day", "relatedto", "time"),
        ("life", "relatedto", "time"),
    ] {
        store.insert(h, r, t, 1.0);
    }

    // Budgeted breadth-first expansion: up to 2 hops, 3 nodes per hop.
    let topics = vec!["sun".to_string(), "sea".to_string()];
    let graph = extract_topic_graph(&store, &topics, 2, 3).unwrap();

    println!("nodes (token @ hop distance):");
    for node in &graph.nodes {
        println!("  {:8} @ hop {}", node.token, node.hop);
    }
    println!("relations: {:?}", graph.relations);
    println!("edges (head --relation--> tail), reversed copies included:");
    for (i, &(u, r, v)) in graph.edges.iter().enumerate() {
        println!(
            "  {} --{}--> {}{}",
            graph.nodes[u].token,
            graph.relations[r],
            graph.nodes[v].token,
            if graph.is_reversed_edge(i) { "  (reversed)" } else { "" }
        );
    }

    // Encode: random embeddings for nodes and relations, two conv layers,
    // then the gate that mixes each node's final state with its input state.
    let d_g = 8;
    let layers = 2;
    let mut rng = derived_rng(0, "example-graph", 0);
    let mut params = ParamStore::new();
    init_graph_encoder(&mut params, d_g, layers, &mut rng);
    params.init_matrix("emb.word", 64, d_g, &mut rng);
    params.init_matrix("emb.rel", graph.relations.len(), d_g, &mut rng);

    let mut tape = Tape::new();
    let pv = params.vars(&mut tape);
    let word = pv.get("emb.word");
    let rel = pv.get("emb.rel");
    // Toy row assignment: node i uses embedding row i, relation j row j.
    let node_rows: Vec<usize> = (0..graph.nodes.len()).collect();
    let rel_rows: Vec<usize> = (0..graph.relations.len()).collect();
    let out = encode_graph(&mut tape, &pv, &graph, word, rel, &node_rows, &rel_rows, layers)
        .unwrap();
    let h = tape.value(out.h);
    println!("encoded node states: {:?} (nodes x d_g)", h.shape());
    for (i, node) in graph.nodes.iter().enumerate() {
        let row: Vec<f64> = (0..d_g).map(|j| h[[i, j]]).collect();
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        println!("  |h[{}]| = {:.4}  ({})", i, norm, node.token);
    }
}
