//! ConceptNet-style triple store and per-sample multi-hop topic-graph
//! extraction with reversed-relation augmentation.
//!
//! Triples come in as UTF-8 TSV `head\trelation\ttail\tweight` (weight
//! optional, default 1.0). Extracted graphs are cached as JSON.

use crate::{Result, TegkeError};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub const GRAPH_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub weight: f64,
}

/// Deduplicated triple set with an incidence index. Immutable after load.
#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    triples: Vec<Triple>,
    /// node -> indices of incident triples (either endpoint).
    incidence: HashMap<String, Vec<usize>>,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Duplicate (head, relation, tail) keeps the maximum weight.
    pub fn insert(&mut self, head: &str, relation: &str, tail: &str, weight: f64) {
        for i in self.incidence.get(head).into_iter().flatten() {
            let t = &self.triples[*i];
            if t.head == head && t.relation == relation && t.tail == tail {
                let i = *i;
                if weight > self.triples[i].weight {
                    self.triples[i].weight = weight;
                }
                return;
            }
        }
        let idx = self.triples.len();
        self.triples.push(Triple {
            head: head.to_string(),
            relation: relation.to_string(),
            tail: tail.to_string(),
            weight,
        });
        self.incidence.entry(head.to_string()).or_default().push(idx);
        if head != tail {
            self.incidence.entry(tail.to_string()).or_default().push(idx);
        }
    }

    pub fn incident(&self, node: &str) -> &[usize] {
        self.incidence.get(node).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

pub fn load_triples(path: &Path) -> Result<TripleStore> {
    let f = std::fs::File::open(path).map_err(|e| TegkeError::Ingestion {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut store = TripleStore::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| TegkeError::Ingestion {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 || fields.len() > 4 || fields[..3].iter().any(|f| f.is_empty()) {
            return Err(TegkeError::Ingestion {
                path: path.display().to_string(),
                line: i + 1,
                message: format!("expected head\\trelation\\ttail[\\tweight], got {:?}", line),
            });
        }
        let weight = match fields.get(3) {
            Some(w) => w.parse::<f64>().map_err(|e| TegkeError::Ingestion {
                path: path.display().to_string(),
                line: i + 1,
                message: format!("bad weight: {e}"),
            })?,
            None => 1.0,
        };
        if weight < 0.0 {
            return Err(TegkeError::Ingestion {
                path: path.display().to_string(),
                line: i + 1,
                message: format!("negative weight {weight}"),
            });
        }
        store.insert(fields[0], fields[1], fields[2], weight);
    }
    Ok(store)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub token: String,
    pub hop: usize,
}

/// Per-sample multi-hop subgraph. Edges are stored original-first: the first
/// half of `edges` are store triples, and edge `i + edges.len()/2` is the
/// reversed copy of edge `i` (swapped endpoints, relation renamed `r_r`).
#[derive(Debug, Clone, PartialEq)]
pub struct TopicGraph {
    pub nodes: Vec<GraphNode>,
    pub relations: Vec<String>,
    /// (head_idx, relation_idx, tail_idx), reversed-augmented.
    pub edges: Vec<(usize, usize, usize)>,
    pub topic_node_indices: Vec<usize>,
}

impl TopicGraph {
    pub fn original_edge_count(&self) -> usize {
        self.edges.len() / 2
    }

    /// Whether edge `i` is a reversed-augmentation edge.
    pub fn is_reversed_edge(&self, i: usize) -> bool {
        i >= self.original_edge_count()
    }

    pub fn node_index(&self, token: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.token == token)
    }

    fn check(&self) -> Result<()> {
        for &(h, r, t) in &self.edges {
            if h >= self.nodes.len() || t >= self.nodes.len() || r >= self.relations.len() {
                return Err(TegkeError::Structure(format!(
                    "dangling edge ({h},{r},{t}) in graph with {} nodes / {} relations",
                    self.nodes.len(),
                    self.relations.len()
                )));
            }
        }
        if self.edges.len() % 2 != 0 {
            return Err(TegkeError::Structure(
                "edge list must pair originals with reversals".into(),
            ));
        }
        Ok(())
    }
}

/// Breadth-first expansion from the topic nodes. At each hop the candidate
/// frontier (nodes adjacent to the previous hop, not yet retained) is ranked
/// by (max weight of a triple linking it to the retained set, then
/// lexicographic) and truncated to `per_hop`. Edges kept are all store
/// triples whose endpoints are both retained, then reversed copies are
/// materialized. Topics absent from the store stay as isolated nodes.
pub fn extract_topic_graph(
    store: &TripleStore,
    topics: &[String],
    hops_max: usize,
    per_hop: usize,
) -> Result<TopicGraph> {
    if topics.is_empty() {
        return Err(TegkeError::Validation("empty topics list".into()));
    }
    if hops_max == 0 || per_hop == 0 {
        return Err(TegkeError::Validation(
            "hops_max and per_hop must be >= 1".into(),
        ));
    }

    // token -> (node index, hop)
    let mut retained: IndexMap<String, usize> = IndexMap::new();
    let mut hops: Vec<usize> = Vec::new();
    for t in topics {
        if !retained.contains_key(t) {
            retained.insert(t.clone(), retained.len());
            hops.push(0);
        }
    }
    let mut frontier: Vec<String> = retained.keys().cloned().collect();

    for hop in 1..=hops_max {
        // candidate -> max weight of a triple linking it to the frontier
        let mut candidates: BTreeMap<String, f64> = BTreeMap::new();
        for u in &frontier {
            for &ti in store.incident(u) {
                let t = &store.triples()[ti];
                let other = if &t.head == u { &t.tail } else { &t.head };
                if retained.contains_key(other) {
                    continue;
                }
                let w = candidates.entry(other.clone()).or_insert(f64::NEG_INFINITY);
                if t.weight > *w {
                    *w = t.weight;
                }
            }
        }
        let mut ranked: Vec<(String, f64)> = candidates.into_iter().collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        ranked.truncate(per_hop);
        frontier = ranked.iter().map(|(t, _)| t.clone()).collect();
        for (t, _) in ranked {
            retained.insert(t, retained.len());
            hops.push(hop);
        }
        if frontier.is_empty() {
            break;
        }
    }

    let nodes: Vec<GraphNode> = retained
        .keys()
        .zip(hops.iter())
        .map(|(token, &hop)| GraphNode {
            token: token.clone(),
            hop,
        })
        .collect();

    let mut relations: IndexMap<String, usize> = IndexMap::new();
    let mut original_edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut edge_rel_names: Vec<String> = Vec::new();
    for t in store.triples() {
        let (Some(&h), Some(&v)) = (retained.get(&t.head), retained.get(&t.tail)) else {
            continue;
        };
        let next = relations.len();
        let r = *relations.entry(t.relation.clone()).or_insert(next);
        original_edges.push((h, r, v));
        edge_rel_names.push(t.relation.clone());
    }

    // Reversed relations appended after the originals, in original order.
    let originals: Vec<String> = relations.keys().cloned().collect();
    for name in &originals {
        let next = relations.len();
        relations.entry(format!("{name}_r")).or_insert(next);
    }
    let mut edges = original_edges.clone();
    for (i, &(h, _, t)) in original_edges.iter().enumerate() {
        let rev_name = format!("{}_r", edge_rel_names[i]);
        let r = *relations.get(&rev_name).unwrap();
        edges.push((t, r, h));
    }

    let topic_node_indices = topics
        .iter()
        .filter_map(|t| retained.get(t).copied())
        .collect::<HashSet<_>>()
        .into_iter()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();

    let graph = TopicGraph {
        nodes,
        relations: relations.keys().cloned().collect(),
        edges,
        topic_node_indices,
    };
    graph.check()?;
    Ok(graph)
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    version: u32,
    nodes: Vec<GraphNode>,
    relations: Vec<String>,
    edges: Vec<[usize; 3]>,
    topic_indices: Vec<usize>,
}

pub fn graph_to_file(graph: &TopicGraph, path: &Path) -> Result<()> {
    let file = GraphFile {
        version: GRAPH_FILE_VERSION,
        nodes: graph.nodes.clone(),
        relations: graph.relations.clone(),
        edges: graph.edges.iter().map(|&(h, r, t)| [h, r, t]).collect(),
        topic_indices: graph.topic_node_indices.clone(),
    };
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{}", serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn file_to_graph(path: &Path) -> Result<TopicGraph> {
    let text = std::fs::read_to_string(path)?;
    let file: GraphFile = serde_json::from_str(&text)?;
    if file.version != GRAPH_FILE_VERSION {
        return Err(TegkeError::Validation(format!(
            "graph file version mismatch: expected {GRAPH_FILE_VERSION}, got {}",
            file.version
        )));
    }
    let graph = TopicGraph {
        nodes: file.nodes,
        relations: file.relations,
        edges: file.edges.iter().map(|e| (e[0], e[1], e[2])).collect(),
        topic_node_indices: file.topic_indices,
    };
    graph.check()?;
    Ok(graph)
}

pub mod oracle {
    //! Unbudgeted breadth-first reference used by the extraction tests.

    use super::TripleStore;
    use std::collections::{HashMap, VecDeque};

    /// Shortest hop distance from the topic set, ignoring budgets.
    pub fn bfs_distances(store: &TripleStore, topics: &[String]) -> HashMap<String, usize> {
        let mut dist: HashMap<String, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        for t in topics {
            if !dist.contains_key(t) {
                dist.insert(t.clone(), 0);
                queue.push_back(t.clone());
            }
        }
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            for &ti in store.incident(&u) {
                let t = &store.triples()[ti];
                for other in [&t.head, &t.tail] {
                    if !dist.contains_key(other.as_str()) {
                        dist.insert(other.clone(), d + 1);
                        queue.push_back(other.clone());
                    }
                }
            }
        }
        dist
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn empty_file_gives_empty_store() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tsv");
        std::fs::write(&p, "").unwrap();
        assert!(load_triples(&p).unwrap().is_empty());
    }

    #[test]
    fn three_rows_parse_and_default_weight() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tsv");
        std::fs::write(&p, "a\tisa\tb\t2.5\nb\tisa\tc\nc\trelated\ta\t0.5\n").unwrap();
        let s = load_triples(&p).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.triples()[1].weight, 1.0);
    }

    #[test]
    fn duplicates_keep_max_weight() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tsv");
        std::fs::write(&p, "a\tisa\tb\t1.0\na\tisa\tb\t2.0\n").unwrap();
        let s = load_triples(&p).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.triples()[0].weight, 2.0);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tsv");
        std::fs::write(&p, "a\tisa\tb\nbroken line\n").unwrap();
        match load_triples(&p) {
            Err(TegkeError::Ingestion { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn isolated_topics_when_store_has_no_match() {
        let store = TripleStore::new();
        let g = extract_topic_graph(&store, &strings(&["x", "y"]), 5, 40).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert!(g.edges.is_empty());
        assert_eq!(g.topic_node_indices, vec![0, 1]);
        assert!(g.nodes.iter().all(|n| n.hop == 0));
    }

    #[test]
    fn chain_extraction_matches_hand_bfs() {
        let mut store = TripleStore::new();
        store.insert("a", "isa", "b", 1.0);
        store.insert("b", "isa", "c", 1.0);
        store.insert("c", "isa", "d", 1.0);
        let g = extract_topic_graph(&store, &strings(&["a"]), 2, 1).unwrap();
        let tokens: Vec<&str> = g.nodes.iter().map(|n| n.token.as_str()).collect();
        assert_eq!(tokens, vec!["a", "b", "c"]);
        assert_eq!(g.nodes[1].hop, 1);
        assert_eq!(g.nodes[2].hop, 2);
        assert_eq!(g.original_edge_count(), 2);
        assert_eq!(g.edges.len(), 4);
        // Reversed edge swaps endpoints and uses the _r relation.
        let (h0, r0, t0) = g.edges[0];
        let (h2, r2, t2) = g.edges[2];
        assert_eq!((h2, t2), (t0, h0));
        assert_eq!(g.relations[r2], format!("{}_r", g.relations[r0]));
    }

    #[test]
    fn reversed_relation_naming_matches_convention() {
        let mut store = TripleStore::new();
        store.insert("worry", "isa", "emotion", 1.0);
        let g = extract_topic_graph(&store, &strings(&["worry"]), 1, 40).unwrap();
        assert!(g.relations.contains(&"isa".to_string()));
        assert!(g.relations.contains(&"isa_r".to_string()));
        let rev = g.edges[1];
        assert_eq!(g.nodes[rev.0].token, "emotion");
        assert_eq!(g.nodes[rev.2].token, "worry");
    }

    #[test]
    fn per_hop_budget_ranks_by_weight_then_name() {
        let mut store = TripleStore::new();
        store.insert("t", "r", "low", 1.0);
        store.insert("t", "r", "high", 5.0);
        store.insert("t", "r", "alpha", 1.0);
        let g = extract_topic_graph(&store, &strings(&["t"]), 1, 2).unwrap();
        let tokens: Vec<&str> = g.nodes.iter().map(|n| n.token.as_str()).collect();
        // "high" wins on weight; "alpha" beats "low" lexicographically.
        assert_eq!(tokens, vec!["t", "high", "alpha"]);
    }

    #[test]
    fn node_budget_bound_holds() {
        let mut store = TripleStore::new();
        // Dense star fan-out to stress the budget.
        for i in 0..120 {
            store.insert("t", "r", &format!("n{i:03}"), 1.0);
            store.insert(&format!("n{i:03}"), "r", &format!("m{i:03}"), 1.0);
        }
        let g = extract_topic_graph(&store, &strings(&["t"]), 5, 40).unwrap();
        assert!(g.nodes.len() <= 5 + 5 * 40);
        for hop in 1..=5 {
            let count = g.nodes.iter().filter(|n| n.hop == hop).count();
            assert!(count <= 40, "hop {hop} has {count} nodes");
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let mut rng = crate::nn::derived_rng(11, "kgraph-det", 0);
        let mut store = TripleStore::new();
        for _ in 0..60 {
            let a = format!("n{}", rng.gen_range(0..20));
            let b = format!("n{}", rng.gen_range(0..20));
            let r = format!("r{}", rng.gen_range(0..3));
            store.insert(&a, &r, &b, rng.gen_range(0.0..5.0));
        }
        let topics = strings(&["n0", "n7"]);
        let g1 = extract_topic_graph(&store, &topics, 3, 4).unwrap();
        let g2 = extract_topic_graph(&store, &topics, 3, 4).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn hop_distances_match_unbudgeted_bfs_when_budget_not_binding() {
        let mut rng = crate::nn::derived_rng(13, "kgraph-bfs", 0);
        for case in 0..30 {
            let mut store = TripleStore::new();
            for _ in 0..25 {
                let a = format!("n{}", rng.gen_range(0..12));
                let b = format!("n{}", rng.gen_range(0..12));
                let r = "rel";
                store.insert(&a, r, &b, rng.gen_range(0.1..2.0));
            }
            let topics = strings(&["n0"]);
            let g = extract_topic_graph(&store, &topics, 6, 1000).unwrap();
            let oracle = oracle::bfs_distances(&store, &topics);
            for n in &g.nodes {
                assert_eq!(
                    n.hop,
                    oracle[&n.token],
                    "case {case}: node {} hop mismatch",
                    n.token
                );
            }
        }
    }

    #[test]
    fn graph_file_roundtrip_and_version_guard() {
        let mut store = TripleStore::new();
        store.insert("a", "isa", "b", 1.0);
        store.insert("b", "isa", "c", 1.0);
        let g = extract_topic_graph(&store, &strings(&["a"]), 2, 40).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.json");
        graph_to_file(&g, &p).unwrap();
        assert_eq!(file_to_graph(&p).unwrap(), g);

        let empty = extract_topic_graph(&TripleStore::new(), &strings(&["z"]), 1, 1).unwrap();
        graph_to_file(&empty, &p).unwrap();
        assert_eq!(file_to_graph(&p).unwrap(), empty);

        let text = std::fs::read_to_string(&p).unwrap().replace(
            "\"version\":1",
            "\"version\":99",
        );
        std::fs::write(&p, text).unwrap();
        assert!(matches!(file_to_graph(&p), Err(TegkeError::Validation(_))));
    }
}
