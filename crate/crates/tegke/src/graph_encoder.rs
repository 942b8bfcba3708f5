//! Compositional relational graph convolution over the topic graph.
//!
//! Each layer aggregates, for every node, over the *incoming* edges of the
//! reversed-augmented edge list: original edges use W_in with the additive
//! composition h_u + h_r, reversed edges use W_out with the subtractive
//! composition h_u - h_r. Self-information enters only through W_loop.
//! After L layers a sigmoid gate blends the final states with the original
//! word embeddings.

use crate::kgraph::TopicGraph;
use crate::nn::{ParamStore, ParamVars};
use crate::tape::{Tape, Var};
use crate::{Result, TegkeError};
use rand_chacha::ChaCha8Rng;

/// Node and relation state matrices for one layer.
#[derive(Debug, Clone, Copy)]
pub struct GraphStates {
    /// |V| x d_g
    pub nodes: Var,
    /// |R| x d_g (graph-local relation indexing)
    pub relations: Var,
}

/// Gated blend of final-layer states and layer-0 word embeddings.
#[derive(Debug, Clone, Copy)]
pub struct GatedNodeOutput {
    /// |V| x d_g
    pub h: Var,
}

pub fn init_graph_encoder(
    params: &mut ParamStore,
    d_g: usize,
    layers: usize,
    rng: &mut ChaCha8Rng,
) {
    for l in 0..layers {
        for w in ["w_in", "w_out", "w_loop", "w_r"] {
            params.init_matrix(&format!("gcn.l{l}.{w}"), d_g, d_g, rng);
        }
    }
    // W_gate over concat(h_L, h_0), stored as its two d_g x d_g blocks.
    params.init_matrix("gcn.gate.wl", d_g, d_g, rng);
    params.init_matrix("gcn.gate.w0", d_g, d_g, rng);
}

/// One convolution layer. Returns the next-layer node and relation states.
pub fn gcn_layer(
    tape: &mut Tape,
    pv: &ParamVars,
    graph: &TopicGraph,
    states: GraphStates,
    layer: usize,
) -> Result<GraphStates> {
    let n = graph.nodes.len();
    for &(h, r, t) in &graph.edges {
        if h >= n || t >= n || r >= graph.relations.len() {
            return Err(TegkeError::Structure(format!(
                "dangling edge ({h},{r},{t})"
            )));
        }
    }
    let w_in = pv.get(&format!("gcn.l{layer}.w_in"));
    let w_out = pv.get(&format!("gcn.l{layer}.w_out"));
    let w_loop = pv.get(&format!("gcn.l{layer}.w_loop"));
    let w_r = pv.get(&format!("gcn.l{layer}.w_r"));
    let d_g = tape.value(states.nodes).shape()[1];

    // Incoming-edge degree per node over the augmented edge list.
    let mut degree = vec![0usize; n];
    for &(_, _, t) in &graph.edges {
        degree[t] += 1;
    }

    let half = graph.original_edge_count();
    let mut aggregated: Option<Var> = None;
    for (reversed, range) in [(false, 0..half), (true, half..graph.edges.len())] {
        if range.is_empty() {
            continue;
        }
        let heads: Vec<usize> = graph.edges[range.clone()].iter().map(|e| e.0).collect();
        let rels: Vec<usize> = graph.edges[range.clone()].iter().map(|e| e.1).collect();
        let tails: Vec<usize> = graph.edges[range.clone()].iter().map(|e| e.2).collect();
        let h_u = tape.gather_rows(states.nodes, &heads);
        let h_r = tape.gather_rows(states.relations, &rels);
        let phi = if reversed {
            tape.sub(h_u, h_r)
        } else {
            tape.add(h_u, h_r)
        };
        let w = if reversed { w_out } else { w_in };
        let wt = tape.transpose(w);
        let contrib = tape.matmul(phi, wt);
        let scattered = tape.scatter_rows(contrib, &tails, n);
        aggregated = Some(match aggregated {
            Some(acc) => tape.add(acc, scattered),
            None => scattered,
        });
    }

    // Mean over |N(v)|, with the empty-neighborhood mean defined as zero.
    let o = match aggregated {
        Some(acc) => {
            let mut inv = ndarray::Array2::<f64>::zeros((n, d_g));
            for v in 0..n {
                if degree[v] > 0 {
                    inv.row_mut(v).fill(1.0 / degree[v] as f64);
                }
            }
            let inv = tape.constant(inv.into_dyn());
            tape.mul(acc, inv)
        }
        None => tape.constant(ndarray::Array2::<f64>::zeros((n, d_g)).into_dyn()),
    };

    let wlt = tape.transpose(w_loop);
    let self_term = tape.matmul(states.nodes, wlt);
    let pre = tape.add(o, self_term);
    let next_nodes = tape.relu(pre);

    let wrt = tape.transpose(w_r);
    let next_relations = tape.matmul(states.relations, wrt);

    Ok(GraphStates {
        nodes: next_nodes,
        relations: next_relations,
    })
}

/// g = sigmoid(W_gate [h_L; h_0]); h = g ⊙ h_L + (1-g) ⊙ h_0.
pub fn gate_combine(tape: &mut Tape, pv: &ParamVars, h_l: Var, h_0: Var) -> GatedNodeOutput {
    let wl = pv.get("gcn.gate.wl");
    let w0 = pv.get("gcn.gate.w0");
    let wlt = tape.transpose(wl);
    let w0t = tape.transpose(w0);
    let a = tape.matmul(h_l, wlt);
    let b = tape.matmul(h_0, w0t);
    let pre = tape.add(a, b);
    let g = tape.sigmoid(pre);
    let take_l = tape.mul(g, h_l);
    let ng = tape.neg(g);
    let one_minus = tape.add_const(ng, 1.0);
    let take_0 = tape.mul(one_minus, h_0);
    GatedNodeOutput {
        h: tape.add(take_l, take_0),
    }
}

/// Run `layers` convolution layers from the embedding-initialized states,
/// then gate against the layer-0 word embeddings.
///
/// `node_word_rows` / `relation_rows` index the word and relation embedding
/// tables (unknown tokens resolve to the UNK row upstream).
pub fn encode_graph(
    tape: &mut Tape,
    pv: &ParamVars,
    graph: &TopicGraph,
    word_emb: Var,
    rel_emb: Var,
    node_word_rows: &[usize],
    relation_rows: &[usize],
    layers: usize,
) -> Result<GatedNodeOutput> {
    if node_word_rows.len() != graph.nodes.len() || relation_rows.len() != graph.relations.len() {
        return Err(TegkeError::Shape(
            "embedding row lists must match graph node/relation counts".into(),
        ));
    }
    let h0 = tape.gather_rows(word_emb, node_word_rows);
    let r0 = if relation_rows.is_empty() {
        let d = tape.value(rel_emb).shape()[1];
        tape.constant(ndarray::Array2::<f64>::zeros((0, d)).into_dyn())
    } else {
        tape.gather_rows(rel_emb, relation_rows)
    };
    let mut states = GraphStates {
        nodes: h0,
        relations: r0,
    };
    for l in 0..layers {
        states = gcn_layer(tape, pv, graph, states, l)?;
    }
    Ok(gate_combine(tape, pv, states.nodes, h0))
}

/// Plain-loop reference implementation used to cross-check the tape-based
/// encoder in tests.
pub mod reference {
    use crate::kgraph::TopicGraph;
    use crate::nn::ParamStore;
    use ndarray::Array2;

    /// Reference message passing: plain loops, no batching, no tape.
    pub fn brute_force_encode(
        graph: &TopicGraph,
        h0: &Array2<f64>,
        r0: &Array2<f64>,
        weights: &ParamStore,
        layers: usize,
    ) -> Array2<f64> {
        let n = graph.nodes.len();
        let d = h0.ncols();
        let as2 = |name: &str| {
            weights
                .get(name)
                .view()
                .into_dimensionality::<ndarray::Ix2>()
                .unwrap()
                .to_owned()
        };
        let mut h = h0.clone();
        let mut r = r0.clone();
        for l in 0..layers {
            let w_in = as2(&format!("gcn.l{l}.w_in"));
            let w_out = as2(&format!("gcn.l{l}.w_out"));
            let w_loop = as2(&format!("gcn.l{l}.w_loop"));
            let w_r = as2(&format!("gcn.l{l}.w_r"));
            let half = graph.original_edge_count();
            let mut agg = Array2::<f64>::zeros((n, d));
            let mut deg = vec![0usize; n];
            for (i, &(hd, rl, tl)) in graph.edges.iter().enumerate() {
                let hu = h.row(hd).to_owned();
                let hr = r.row(rl).to_owned();
                let (phi, w) = if i < half {
                    (&hu + &hr, &w_in)
                } else {
                    (&hu - &hr, &w_out)
                };
                let contrib = w.dot(&phi);
                let mut row = agg.row_mut(tl);
                row += &contrib;
                deg[tl] += 1;
            }
            let mut next = Array2::<f64>::zeros((n, d));
            for v in 0..n {
                let mean = if deg[v] > 0 {
                    agg.row(v).mapv(|x| x / deg[v] as f64)
                } else {
                    ndarray::Array1::zeros(d)
                };
                let own = w_loop.dot(&h.row(v).to_owned());
                let pre = &mean + &own;
                next.row_mut(v).assign(&pre.mapv(|x| x.max(0.0)));
            }
            h = next;
            let mut nr = Array2::<f64>::zeros(r.raw_dim());
            for i in 0..r.nrows() {
                nr.row_mut(i).assign(&w_r.dot(&r.row(i).to_owned()));
            }
            r = nr;
        }
        let wl = as2("gcn.gate.wl");
        let w0 = as2("gcn.gate.w0");
        let mut out = Array2::<f64>::zeros((n, d));
        for v in 0..n {
            let pre = wl.dot(&h.row(v).to_owned()) + w0.dot(&h0.row(v).to_owned());
            let g = pre.mapv(|x| 1.0 / (1.0 + (-x).exp()));
            let blended =
                &(&g * &h.row(v).to_owned()) + &((1.0 - &g) * &h0.row(v).to_owned());
            out.row_mut(v).assign(&blended);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::GraphNode;
    use crate::nn::derived_rng;
    use ndarray::{Array2, ArrayD};
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    fn identity_params(d: usize, layers: usize) -> ParamStore {
        let mut params = ParamStore::new();
        for l in 0..layers {
            for w in ["w_in", "w_out", "w_loop", "w_r"] {
                params.insert(&format!("gcn.l{l}.{w}"), Array2::<f64>::eye(d).into_dyn());
            }
        }
        params.insert("gcn.gate.wl", ArrayD::zeros(ndarray::IxDyn(&[d, d])));
        params.insert("gcn.gate.w0", ArrayD::zeros(ndarray::IxDyn(&[d, d])));
        params
    }

    fn two_node_graph() -> TopicGraph {
        TopicGraph {
            nodes: vec![
                GraphNode { token: "u".into(), hop: 0 },
                GraphNode { token: "v".into(), hop: 1 },
            ],
            relations: vec!["rel".into(), "rel_r".into()],
            edges: vec![(0, 0, 1), (1, 1, 0)],
            topic_node_indices: vec![0],
        }
    }

    use super::reference::brute_force_encode;

    #[test]
    fn identity_weight_hand_example() {
        let params = identity_params(2, 1);
        let graph = two_node_graph();
        let mut tape = Tape::new();
        let pv = params.vars(&mut tape);
        let nodes = tape.leaf(ndarray::arr2(&[[1.0, 0.0], [0.0, 0.0]]).into_dyn());
        let rels = tape.leaf(ndarray::arr2(&[[0.0, 1.0], [0.0, 1.0]]).into_dyn());
        let next = gcn_layer(
            &mut tape,
            &pv,
            &graph,
            GraphStates { nodes, relations: rels },
            0,
        )
        .unwrap();
        let h = tape.value(next.nodes);
        // v aggregates the single original edge: relu(h_u + h_r) = [1, 1].
        assert_eq!(h[[1, 0]], 1.0);
        assert_eq!(h[[1, 1]], 1.0);
        // u aggregates the reversed edge: relu(h_v - h_r + h_u) = relu([1,-1]).
        assert_eq!(h[[0, 0]], 1.0);
        assert_eq!(h[[0, 1]], 0.0);
        // Identity W_r leaves relation states unchanged.
        assert_eq!(
            tape.value(next.relations),
            tape.value(rels)
        );
    }

    #[test]
    fn isolated_node_sees_only_loop_term() {
        let params = identity_params(2, 1);
        let graph = TopicGraph {
            nodes: vec![GraphNode { token: "x".into(), hop: 0 }],
            relations: vec![],
            edges: vec![],
            topic_node_indices: vec![0],
        };
        let mut tape = Tape::new();
        let pv = params.vars(&mut tape);
        let nodes = tape.leaf(ndarray::arr2(&[[0.5, -0.7]]).into_dyn());
        let rels = tape.constant(Array2::<f64>::zeros((0, 2)).into_dyn());
        let next = gcn_layer(
            &mut tape,
            &pv,
            &graph,
            GraphStates { nodes, relations: rels },
            0,
        )
        .unwrap();
        let h = tape.value(next.nodes);
        assert_eq!(h[[0, 0]], 0.5);
        assert_eq!(h[[0, 1]], 0.0); // relu clips the negative entry
    }

    #[test]
    fn zero_gate_averages_inputs() {
        let params = identity_params(2, 1);
        let mut tape = Tape::new();
        let pv = params.vars(&mut tape);
        let hl = tape.leaf(ndarray::arr2(&[[2.0, 4.0]]).into_dyn());
        let h0 = tape.leaf(ndarray::arr2(&[[0.0, 2.0]]).into_dyn());
        let out = gate_combine(&mut tape, &pv, hl, h0);
        let h = tape.value(out.h);
        assert_eq!(h[[0, 0]], 1.0);
        assert_eq!(h[[0, 1]], 3.0);
    }

    #[test]
    fn equal_inputs_pass_through_gate_unchanged() {
        let mut rng = derived_rng(17, "gate-test", 0);
        let mut params = ParamStore::new();
        params.init_matrix("gcn.gate.wl", 3, 3, &mut rng);
        params.init_matrix("gcn.gate.w0", 3, 3, &mut rng);
        let mut tape = Tape::new();
        let pv = params.vars(&mut tape);
        let v = tape.leaf(ndarray::arr2(&[[0.3, -0.8, 1.2]]).into_dyn());
        let out = gate_combine(&mut tape, &pv, v, v);
        for (a, b) in tape.value(out.h).iter().zip(tape.value(v).iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gate_output_bounded_by_inputs() {
        let mut rng = derived_rng(19, "gate-bound", 0);
        let mut params = ParamStore::new();
        params.init_matrix("gcn.gate.wl", 4, 4, &mut rng);
        params.init_matrix("gcn.gate.w0", 4, 4, &mut rng);
        let mut tape = Tape::new();
        let pv = params.vars(&mut tape);
        let mk = |tape: &mut Tape, rng: &mut ChaCha8Rng| {
            let data: Vec<f64> = (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect();
            tape.leaf(ArrayD::from_shape_vec(ndarray::IxDyn(&[5, 4]), data).unwrap())
        };
        let hl = mk(&mut tape, &mut rng);
        let h0 = mk(&mut tape, &mut rng);
        let out = gate_combine(&mut tape, &pv, hl, h0);
        for ((o, a), b) in tape
            .value(out.h)
            .iter()
            .zip(tape.value(hl).iter())
            .zip(tape.value(h0).iter())
        {
            assert!(*o >= a.min(*b) - 1e-12 && *o <= a.max(*b) + 1e-12);
        }
    }

    fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize, max_edges: usize) -> TopicGraph {
        let n = rng.gen_range(1..=max_nodes);
        let n_orig = rng.gen_range(0..=max_edges);
        let n_rel = rng.gen_range(1..=3usize);
        let relations: Vec<String> = (0..n_rel)
            .map(|i| format!("r{i}"))
            .chain((0..n_rel).map(|i| format!("r{i}_r")))
            .collect();
        let mut edges = Vec::new();
        for _ in 0..n_orig {
            edges.push((rng.gen_range(0..n), rng.gen_range(0..n_rel), rng.gen_range(0..n)));
        }
        let rev: Vec<_> = edges
            .iter()
            .map(|&(h, r, t)| (t, r + n_rel, h))
            .collect();
        edges.extend(rev);
        TopicGraph {
            nodes: (0..n)
                .map(|i| GraphNode { token: format!("n{i}"), hop: 0 })
                .collect(),
            relations,
            edges,
            topic_node_indices: vec![0],
        }
    }

    #[test]
    fn encode_graph_matches_brute_force_reference() {
        let mut rng = derived_rng(23, "gcn-oracle", 0);
        for case in 0..40 {
            let d = 3;
            let layers = rng.gen_range(0..=3usize);
            let graph = random_graph(&mut rng, 6, 10);
            let mut params = ParamStore::new();
            init_graph_encoder(&mut params, d, layers.max(1), &mut rng);
            let n = graph.nodes.len();
            let nr = graph.relations.len();
            let h0: Array2<f64> =
                Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
            let r0: Array2<f64> =
                Array2::from_shape_fn((nr, d), |_| rng.gen_range(-1.0..1.0));

            let mut tape = Tape::new();
            let pv = params.vars(&mut tape);
            let word_emb = tape.leaf(h0.clone().into_dyn());
            let rel_emb = if nr > 0 {
                tape.leaf(r0.clone().into_dyn())
            } else {
                tape.constant(Array2::<f64>::zeros((0, d)).into_dyn())
            };
            let node_rows: Vec<usize> = (0..n).collect();
            let rel_rows: Vec<usize> = (0..nr).collect();
            let out = encode_graph(
                &mut tape, &pv, &graph, word_emb, rel_emb, &node_rows, &rel_rows, layers,
            )
            .unwrap();
            let reference = brute_force_encode(&graph, &h0, &r0, &params, layers);
            let got = tape.value(out.h);
            for (a, b) in got.iter().zip(reference.iter()) {
                assert!((a - b).abs() < 1e-6, "case {case}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_layers_returns_initial_embeddings() {
        let mut rng = derived_rng(29, "gcn-l0", 0);
        let mut params = ParamStore::new();
        init_graph_encoder(&mut params, 3, 1, &mut rng);
        let graph = two_node_graph();
        let mut tape = Tape::new();
        let pv = params.vars(&mut tape);
        let h0 = ndarray::arr2(&[[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]]);
        let word_emb = tape.leaf(h0.clone().into_dyn());
        let rel_emb = tape.leaf(Array2::<f64>::zeros((2, 3)).into_dyn());
        let out = encode_graph(&mut tape, &pv, &graph, word_emb, rel_emb, &[0, 1], &[0, 1], 0)
            .unwrap();
        for (a, b) in tape.value(out.h).iter().zip(h0.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn node_permutation_equivariance() {
        let mut rng = derived_rng(31, "gcn-perm", 0);
        let d = 3;
        let mut params = ParamStore::new();
        init_graph_encoder(&mut params, d, 2, &mut rng);
        let graph = random_graph(&mut rng, 5, 6);
        let n = graph.nodes.len();
        let h0: Array2<f64> = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        let r0: Array2<f64> =
            Array2::from_shape_fn((graph.relations.len(), d), |_| rng.gen_range(-1.0..1.0));

        // Reverse the node order as the permutation.
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut pgraph = graph.clone();
        pgraph.nodes = perm.iter().map(|&i| graph.nodes[i].clone()).collect();
        let inv: Vec<usize> = {
            let mut v = vec![0; n];
            for (new, &old) in perm.iter().enumerate() {
                v[old] = new;
            }
            v
        };
        pgraph.edges = graph
            .edges
            .iter()
            .map(|&(h, r, t)| (inv[h], r, inv[t]))
            .collect();
        let ph0: Array2<f64> = {
            let mut m = Array2::zeros((n, d));
            for (new, &old) in perm.iter().enumerate() {
                m.row_mut(new).assign(&h0.row(old));
            }
            m
        };

        let run = |graph: &TopicGraph, h0: &Array2<f64>| {
            let mut tape = Tape::new();
            let pv = params.vars(&mut tape);
            let word_emb = tape.leaf(h0.clone().into_dyn());
            let rel_emb = tape.leaf(r0.clone().into_dyn());
            let rows: Vec<usize> = (0..n).collect();
            let rel_rows: Vec<usize> = (0..graph.relations.len()).collect();
            let out =
                encode_graph(&mut tape, &pv, graph, word_emb, rel_emb, &rows, &rel_rows, 2)
                    .unwrap();
            tape.value(out.h)
                .clone()
                .into_dimensionality::<ndarray::Ix2>()
                .unwrap()
        };
        let base = run(&graph, &h0);
        let permuted = run(&pgraph, &ph0);
        for old in 0..n {
            for j in 0..d {
                assert!((base[[old, j]] - permuted[[inv[old], j]]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn adding_isolated_node_leaves_others_unchanged() {
        let mut rng = derived_rng(37, "gcn-isolated", 0);
        let d = 3;
        let mut params = ParamStore::new();
        init_graph_encoder(&mut params, d, 2, &mut rng);
        let graph = two_node_graph();
        let h0 = ndarray::arr2(&[[0.1, -0.2, 0.3], [0.4, 0.5, -0.6]]);
        let r0 = ndarray::arr2(&[[0.2, 0.1, 0.0], [0.0, -0.1, 0.2]]);

        let run = |graph: &TopicGraph, h0: Array2<f64>| {
            let n = graph.nodes.len();
            let mut tape = Tape::new();
            let pv = params.vars(&mut tape);
            let word_emb = tape.leaf(h0.into_dyn());
            let rel_emb = tape.leaf(r0.clone().into_dyn());
            let rows: Vec<usize> = (0..n).collect();
            let out = encode_graph(&mut tape, &pv, graph, word_emb, rel_emb, &rows, &[0, 1], 2)
                .unwrap();
            tape.value(out.h)
                .clone()
                .into_dimensionality::<ndarray::Ix2>()
                .unwrap()
        };
        let base = run(&graph, h0.clone());

        let mut bigger = graph.clone();
        bigger.nodes.push(GraphNode { token: "iso".into(), hop: 1 });
        let mut h0b = Array2::zeros((3, d));
        h0b.slice_mut(ndarray::s![..2, ..]).assign(&h0);
        h0b.row_mut(2).assign(&ndarray::arr1(&[0.9, 0.9, 0.9]));
        let extended = run(&bigger, h0b);
        for i in 0..2 {
            for j in 0..d {
                assert!((base[[i, j]] - extended[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn encode_graph_gradient_matches_central_differences() {
        let mut rng = derived_rng(41, "gcn-fd", 0);
        let d = 2;
        let mut params = ParamStore::new();
        init_graph_encoder(&mut params, d, 1, &mut rng);
        let graph = two_node_graph();
        let h0 = ndarray::arr2(&[[0.3, -0.4], [0.6, 0.2]]);
        let r0 = ndarray::arr2(&[[0.1, 0.5], [-0.2, 0.3]]);
        let run = |p: &ParamStore| {
            let mut tape = Tape::new();
            let pv = p.vars(&mut tape);
            let word_emb = tape.leaf(h0.clone().into_dyn());
            let rel_emb = tape.leaf(r0.clone().into_dyn());
            let out = encode_graph(&mut tape, &pv, &graph, word_emb, rel_emb, &[0, 1], &[0, 1], 1)
                .unwrap();
            let s = tape.sum_all(out.h);
            tape.scalar_value(s)
        };
        let mut tape = Tape::new();
        let pv = params.vars(&mut tape);
        let word_emb = tape.leaf(h0.clone().into_dyn());
        let rel_emb = tape.leaf(r0.clone().into_dyn());
        let out = encode_graph(&mut tape, &pv, &graph, word_emb, rel_emb, &[0, 1], &[0, 1], 1)
            .unwrap();
        let s = tape.sum_all(out.h);
        let grads = tape.backward(s);
        for name in ["gcn.l0.w_in", "gcn.l0.w_out", "gcn.l0.w_loop", "gcn.gate.wl"] {
            let g = grads.value(&tape, pv.get(name));
            for i in 0..g.len() {
                let fd = crate::nn::central_difference(&params, name, i, 1e-5, &run);
                let a = g.iter().copied().nth(i).unwrap();
                let denom = a.abs().max(fd.abs()).max(1e-6);
                assert!(((a - fd) / denom).abs() < 1e-4, "{name}[{i}]: {a} vs {fd}");
            }
        }
    }
}
