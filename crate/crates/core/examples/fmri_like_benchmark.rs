//! A 20-node surrogate of a fitted brain-region network. Candidates are
//! misclassified in a random half of the observations; the example compares
//! the error rate around the candidates before and after one EM refit.
//!
//! ```text
//! cargo run --release --example fmri_like_benchmark -- [replications] [out-dir]
//! ```

use std::path::PathBuf;

use isingmis::em::EmOptions;
use isingmis::ising::{RngSeed, SampleMethod};
use isingmis::networks::fmri_like_network;
use isingmis::rwl::Aggregation;
use isingmis::sim::{emit_outputs, run_scenario, CandidateRule, Estimator, LawScheme, OutputFormat, ScenarioConfig};

fn main() -> isingmis::Result<()> {
    let mut args = std::env::args().skip(1);
    let replications = args.next().map(|s| s.parse().expect("replication count")).unwrap_or(50);
    let net = fmri_like_network(20, 0.5, RngSeed(3))?;
    println!("{} edges, candidates {:?}", net.graph.edges().len(), net.candidates);
    let config = ScenarioConfig {
        name: "fmri-like".into(),
        graph: net.graph,
        n: 200,
        replications,
        first_replication: 0,
        law: LawScheme::HalfObservations { within_prob: 0.75, nodes: None },
        lambda_grid: None,
        estimators: vec![Estimator::Rwl, Estimator::RwlEm { iters: 1 }],
        candidate_rule: CandidateRule::Explicit(net.candidates.into_iter().collect()),
        seed: RngSeed(515),
        sampler: SampleMethod::Exact,
        aggregation: Aggregation::And,
        em: EmOptions::default(),
    };
    let started = std::time::Instant::now();
    let run = run_scenario(&config)?;
    let report = run.report()?;
    println!("{} replications in {:.1?}", report.replications_completed, started.elapsed());
    for s in &report.estimators {
        println!(
            "{:<8} candidate-neighborhood error: matched λ {:.4}, best λ {:.4}",
            s.estimator, s.matched_neighborhood_error, s.optimal_neighborhood_error
        );
    }
    if let Some(dir) = args.next() {
        let files = emit_outputs(&run, OutputFormat::Csv, &PathBuf::from(dir))?;
        println!("wrote {} files", files.len());
    }
    Ok(())
}
