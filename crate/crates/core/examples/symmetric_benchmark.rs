//! Three candidates embedded in a 12-node symmetric network, corrupted in half
//! of the observations. Compares plain neighborhood selection with one and
//! three EM refits.
//!
//! ```text
//! cargo run --release --example symmetric_benchmark -- [replications] [out-dir]
//! ```

use std::path::PathBuf;

use isingmis::em::EmOptions;
use isingmis::ising::{RngSeed, SampleMethod};
use isingmis::networks::symmetric_candidate_network;
use isingmis::rwl::Aggregation;
use isingmis::sim::{emit_outputs, run_scenario, CandidateRule, Estimator, LawScheme, NodeClass, OutputFormat, ScenarioConfig};

fn main() -> isingmis::Result<()> {
    let mut args = std::env::args().skip(1);
    let replications = args.next().map(|s| s.parse().expect("replication count")).unwrap_or(100);
    let net = symmetric_candidate_network();
    let config = ScenarioConfig {
        name: "symmetric".into(),
        graph: net.graph,
        n: 60,
        replications,
        first_replication: 0,
        law: LawScheme::HalfObservations { within_prob: 0.6, nodes: None },
        lambda_grid: None,
        estimators: vec![Estimator::Rwl, Estimator::RwlEm { iters: 1 }, Estimator::RwlEm { iters: 3 }],
        candidate_rule: CandidateRule::Explicit(net.candidates.into_iter().collect()),
        seed: RngSeed(2024),
        sampler: SampleMethod::Exact,
        aggregation: Aggregation::And,
        em: EmOptions::default(),
    };
    let started = std::time::Instant::now();
    let run = run_scenario(&config)?;
    let report = run.report()?;
    println!("{} replications in {:.1?}", report.replications_completed, started.elapsed());
    for s in &report.estimators {
        let c = s.class(NodeClass::Candidate);
        let p = s.class(NodeClass::Participant);
        println!(
            "{:<10} candidate AUC {:.4} (per-rep {:.4})  participant AUC {:.4} (per-rep {:.4})",
            s.estimator, c.auc, c.mean_replication_auc, p.auc, p.mean_replication_auc
        );
    }
    if let Some(dir) = args.next() {
        let files = emit_outputs(&run, OutputFormat::Csv, &PathBuf::from(dir))?;
        println!("wrote {} files", files.len());
    }
    Ok(())
}
