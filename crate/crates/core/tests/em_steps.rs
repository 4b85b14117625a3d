mod common;

use isingmis::em::{em_mstep, em_update, estep_weights, expected_node_objective, EmOptions, EmState};
use isingmis::graph::{GraphSpec, NodeSet};
use isingmis::ising::{apply_misclassification, sample_ising, MisclassLaw, RngSeed, SampleMethod};
use isingmis::logreg::SolverOptions;
use isingmis::rwl::{rwl_fit, Aggregation};

fn setup(seed: u64, gamma: f64) -> (GraphSpec, isingmis::ising::SpinMatrix, MisclassLaw, NodeSet) {
    let g = GraphSpec::uniform(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4)], 0.6).unwrap();
    let clean = sample_ising(&g, 300, SampleMethod::Exact, RngSeed(seed)).unwrap();
    let gammas = vec![0.0, 0.0, gamma, 0.0, gamma, 0.0];
    let law = MisclassLaw::per_node(gammas).unwrap();
    let data = apply_misclassification(&clean, &law, RngSeed(seed + 1)).unwrap();
    (g, data, law, [2, 4].into_iter().collect())
}

#[test]
fn posterior_rows_are_distributions() {
    let (_, data, law, cands) = setup(91, 0.25);
    let fit = rwl_fit(&data, 0.05, Aggregation::And, None, &SolverOptions::default()).unwrap();
    let state = EmState::new(&fit, &cands, 0.05).unwrap();
    for k in 0..state.partition.components.len() {
        if state.partition.components[k].candidates.is_empty() {
            continue;
        }
        let table = estep_weights(&state, &data, &law, k, 10).unwrap();
        for i in 0..data.n() {
            let row = table.row(i);
            assert_eq!(row.len(), table.configurations());
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn mstep_minimizes_the_expected_objective() {
    let (_, data, law, cands) = setup(92, 0.3);
    let fit = rwl_fit(&data, 0.04, Aggregation::And, None, &SolverOptions::default()).unwrap();
    let state = EmState::new(&fit, &cands, 0.04).unwrap();
    let mut checked = 0;
    for (k, comp) in state.partition.components.iter().enumerate() {
        if comp.candidates.is_empty() {
            continue;
        }
        let table = estep_weights(&state, &data, &law, k, 10).unwrap();
        for &r in &comp.nodes {
            let (row, sol) = em_mstep(&state, &data, &table, r, &SolverOptions::default()).unwrap();
            let before = expected_node_objective(&state, &data, &table, r, &state.theta[r]);
            let after = expected_node_objective(&state, &data, &table, r, &row);
            assert!(after <= before + 1e-10, "node {r}: {after} > {before}");
            if let Some(sol) = sol {
                assert!((sol.objective - after).abs() < 1e-9, "node {r}: solver {} vs {after}", sol.objective);
            }
            // coefficients toward nodes outside the component are untouched
            for s in 0..data.p() {
                if !comp.nodes.contains(&s) {
                    assert_eq!(row[s], state.fixed[r][s]);
                }
            }
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn clean_law_reproduces_the_initial_fit() {
    let (_, data, _, cands) = setup(93, 0.0);
    let clean = MisclassLaw::clean(data.p());
    for lambda in [0.02, 0.06, 0.15] {
        let fit = rwl_fit(&data, lambda, Aggregation::And, None, &SolverOptions::default()).unwrap();
        let out = em_update(&fit, &data, &clean, &cands, lambda, 2, &EmOptions::default()).unwrap();
        assert_eq!(out.edge_set, fit.edge_set, "lambda {lambda}");
        let init = fit.coefficient_matrix();
        for (a, b) in out.state.theta.iter().flatten().zip(init.iter().flatten()) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}

#[test]
fn update_rejects_bad_arguments() {
    let (_, data, law, cands) = setup(94, 0.2);
    let fit = rwl_fit(&data, 0.05, Aggregation::And, None, &SolverOptions::default()).unwrap();
    assert!(em_update(&fit, &data, &law, &cands, 0.05, 0, &EmOptions::default()).is_err());
    assert!(em_update(&fit, &data, &law, &cands, -1.0, 1, &EmOptions::default()).is_err());
    let short = MisclassLaw::per_node(vec![0.1; 3]).unwrap();
    assert!(em_update(&fit, &data, &short, &cands, 0.05, 1, &EmOptions::default()).is_err());
}
