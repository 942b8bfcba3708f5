//! Generation metrics: BLEU, Dist-1/2, and Novelty.
//!
//! Shows the individual metric functions on hand-built essays, then the
//! combined `evaluate` report against a small training set.
//!
//! Run with: `cargo run --release --example evaluate_metrics`

use tegke::data::TopicEssayPair;
use tegke::evalx::{bleu, dist_n, evaluate, novelty, TrainIndex};

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn main() {
    // BLEU: candidate vs reference, x100 with brevity penalty.
    let cand = vec![toks("the warm sun sets over the sea")];
    let refs = vec![toks("the warm sun sets over the calm sea")];
    println!("BLEU-4 (close paraphrase): {:.2}", bleu(&cand, &refs, 4).unwrap());
    println!("BLEU-4 (identical):        {:.2}", bleu(&refs, &refs, 4).unwrap());

    // Dist-n: corpus-level distinct n-gram ratio, x100.
    let repetitive = vec![toks("good good good good")];
    let varied = vec![toks("cold rain falls on tall trees")];
    println!("Dist-1 repetitive: {:.2}", dist_n(&repetitive, 1).unwrap());
    println!("Dist-1 varied:     {:.2}", dist_n(&varied, 1).unwrap());

    // Novelty: 100 - max 1-gram overlap with the top-k topic-matched
    // training essays.
    let train = vec![
        TopicEssayPair {
            topics: vec!["sun".into(), "sea".into()],
            essay: toks("the warm sun sets over the calm sea"),
        },
        TopicEssayPair {
            topics: vec!["rain".into(), "wind".into()],
            essay: toks("cold rain falls and the wind blows"),
        },
    ];
    let index = TrainIndex::build(&train).unwrap();
    let memorized = TopicEssayPair {
        topics: vec!["sun".into(), "sea".into()],
        essay: toks("the warm sun sets over the calm sea"),
    };
    let fresh = TopicEssayPair {
        topics: vec!["sun".into(), "sea".into()],
        essay: toks("bright light dances across deep water"),
    };
    println!("Novelty memorized: {:.2}", novelty(&memorized, &index, 2).unwrap());
    println!("Novelty fresh:     {:.2}", novelty(&fresh, &index, 2).unwrap());

    // Combined report over aligned candidate/reference pairs.
    let candidates = vec![fresh.clone(), memorized.clone()];
    let references = vec![
        toks("the warm sun sets over the calm sea"),
        toks("the warm sun sets over the calm sea"),
    ];
    let report = evaluate(&candidates, &references, &train, 4, 2).unwrap();
    println!(
        "report over {} samples: BLEU {:.2}  Dist-1 {:.2}  Dist-2 {:.2}  Novelty {:.2}",
        report.sample_count, report.bleu, report.dist1, report.dist2, report.novelty
    );
}
