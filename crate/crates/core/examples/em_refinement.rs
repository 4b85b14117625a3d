//! One candidate node misclassified in half of the observations. The EM
//! refit treats its true state as latent and revisits the edges around it.

use isingmis::em::{em_update, EmOptions};
use isingmis::graph::{edge_metrics, update_partition, GraphSpec, NodeSet};
use isingmis::ising::{apply_misclassification_with, sample_ising_with, MisclassLaw, RngSeed, SampleMethod};
use isingmis::logreg::SolverOptions;
use isingmis::rwl::{rwl_fit, Aggregation};

fn main() -> isingmis::Result<()> {
    // hub 0 with four neighbors, plus a path among the neighbors
    let graph = GraphSpec::uniform(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (3, 4), (4, 5)], 0.5)?;
    let (n, lambda) = (300, 0.04);
    let candidates: NodeSet = [0].into_iter().collect();
    let hub: NodeSet = candidates.clone();

    let mut before = 0.0;
    let mut after = 0.0;
    let reps = 20;
    for rep in 0..reps {
        let mut rng = RngSeed(42).split(rep).rng();
        let clean = sample_ising_with(&graph, n, SampleMethod::Exact, &mut rng)?;
        let law = MisclassLaw::half_observations(n, 6, &[0], 0.7, &mut rng)?;
        let noisy = apply_misclassification_with(&clean, &law, &mut rng)?;

        let fit = rwl_fit(&noisy, lambda, Aggregation::And, None, &SolverOptions::default())?;
        if rep == 0 {
            let part = update_partition(&fit.edge_set, &candidates)?;
            println!("update set {:?}, participants {:?}", part.update_set, part.participants);
        }
        let em = em_update(&fit, &noisy, &law, &candidates, lambda, 1, &EmOptions::default())?;
        before += edge_metrics(&fit.edge_set, &graph, &hub)?.error_rate();
        after += edge_metrics(&em.edge_set, &graph, &hub)?.error_rate();
    }
    println!("error on pairs touching the candidate: RWL {:.3}, RWL+EM {:.3}", before / reps as f64, after / reps as f64);
    Ok(())
}
