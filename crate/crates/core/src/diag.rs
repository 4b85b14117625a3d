//! Exact small-graph diagnostics for neighborhood selection under
//! misclassification: expected node score and information under the
//! misclassified law, the dependency / incoherence / misclassification
//! conditions, and the regularization lower bound they imply.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, GraphSpec, NodeId};
use crate::ising::{mising_prob_table, spin_of, MisclassLaw};
use crate::logreg::sigmoid;

fn per_node_gammas(law: &MisclassLaw) -> Result<&[f64]> {
    match law {
        MisclassLaw::PerNode(g) => Ok(g),
        MisclassLaw::PerCell { .. } => Err(Error::InvalidLaw("diagnostics need a per-node law".into())),
    }
}

/// Expectations for node `r` under the misclassified law, indexed by the
/// other nodes in ascending order.
struct NodeMoments {
    score: Vec<f64>,
    information: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

fn node_moments(graph: &GraphSpec, table: &[f64], r: NodeId) -> NodeMoments {
    let p = graph.p();
    let others: Vec<NodeId> = (0..p).filter(|&t| t != r).collect();
    let k = others.len();
    let theta: Vec<f64> = others.iter().map(|&t| graph.weight(r, t)).collect();
    let mut score = vec![0.0; k];
    let mut information = vec![vec![0.0; k]; k];
    let mut second_moment = vec![vec![0.0; k]; k];
    let mut x = vec![0.0; k];
    for (b, &q) in table.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        for (j, &t) in others.iter().enumerate() {
            x[j] = spin_of(b, t);
        }
        let eta = 2.0 * x.iter().zip(&theta).map(|(a, w)| a * w).sum::<f64>();
        let mu = sigmoid(eta);
        let y = if spin_of(b, r) > 0.0 { 1.0 } else { 0.0 };
        let curvature = 4.0 * mu * (1.0 - mu);
        for j in 0..k {
            score[j] += q * 2.0 * x[j] * (mu - y);
            for l in 0..k {
                information[j][l] += q * curvature * x[j] * x[l];
                second_moment[j][l] += q * x[j] * x[l];
            }
        }
    }
    NodeMoments { score, information, second_moment }
}

/// Expected logistic score of node `r` at the true parameters, taken over
/// the misclassified law. Entry `j` belongs to the `j`-th other node.
pub fn misclassified_score(graph: &GraphSpec, law: &MisclassLaw, r: NodeId) -> Result<Vec<f64>> {
    check_node(graph, r)?;
    let table = mising_prob_table(graph, per_node_gammas(law)?)?;
    Ok(node_moments(graph, &table, r).score)
}

/// Expected logistic Hessian of node `r` at the true parameters under the
/// misclassified law.
pub fn misclassified_information(graph: &GraphSpec, law: &MisclassLaw, r: NodeId) -> Result<Vec<Vec<f64>>> {
    check_node(graph, r)?;
    let table = mising_prob_table(graph, per_node_gammas(law)?)?;
    Ok(node_moments(graph, &table, r).information)
}

fn check_node(graph: &GraphSpec, r: NodeId) -> Result<()> {
    if r >= graph.p() {
        Err(Error::NodeOutOfRange { node: r, p: graph.p() })
    } else {
        Ok(())
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let k = rows.len();
    DMatrix::from_fn(k, k, |i, j| rows[i][j])
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(rows: &[Vec<f64>]) -> Vec<f64> {
    if rows.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(to_matrix(rows)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Max absolute row sum.
pub fn infinity_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeDiagnostics {
    pub node: NodeId,
    pub others: Vec<NodeId>,
    pub true_neighbors: Vec<NodeId>,
    pub expected_score: Vec<f64>,
    pub score_max_norm: f64,
    pub information: Vec<Vec<f64>>,
    /// Smallest eigenvalue of the information restricted to the true neighbors.
    pub c_min: Option<f64>,
    /// Largest eigenvalue of `E[X̃_{\r} X̃_{\r}ᵀ]`.
    pub d_max: f64,
    /// `‖Q_{S^c S} Q_{SS}^{-1}‖_∞`; `None` when `Q_{SS}` is singular.
    pub incoherence: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiagnosticsReport {
    pub p: usize,
    pub n: usize,
    pub max_degree: usize,
    pub per_node: Vec<NodeDiagnostics>,
    pub s_max: f64,
    pub c_min: Option<f64>,
    pub d_max: f64,
    pub alpha: Option<f64>,
    pub dependency_satisfied: bool,
    pub incoherence_satisfied: bool,
    /// Right-hand side of the misclassification condition.
    pub misclassification_bound: Option<f64>,
    pub a3_satisfied: bool,
    /// `16(2−α)/α · (√(log p / n) + S_max / 4)`.
    pub lambda_lower_bound: Option<f64>,
    /// `λ̃ = λ − lambda_tilde_shift`, with shift `4(2−α)/α · S_max`.
    pub lambda_tilde_shift: Option<f64>,
}

impl DiagnosticsReport {
    pub fn lambda_tilde(&self, lambda: f64) -> Option<f64> {
        self.lambda_tilde_shift.map(|shift| lambda - shift)
    }
}

/// `C²_min α² / (400 D_max d (2−α)²)`.
pub fn misclassification_bound(c_min: f64, d_max: f64, alpha: f64, d: usize) -> f64 {
    c_min.powi(2) * alpha.powi(2) / (400.0 * d_max * d as f64 * (2.0 - alpha).powi(2))
}

/// `16(2−α)/α · (√(log p / n) + S_max / 4)`.
pub fn lambda_lower_bound(alpha: f64, p: usize, n: usize, s_max: f64) -> f64 {
    16.0 * (2.0 - alpha) / alpha * (((p as f64).ln() / n as f64).sqrt() + s_max / 4.0)
}

pub fn lambda_tilde(lambda: f64, alpha: f64, s_max: f64) -> f64 {
    lambda - 4.0 * (2.0 - alpha) / alpha * s_max
}

fn diagnose_node(graph: &GraphSpec, table: &[f64], r: NodeId, adj: &[Vec<NodeId>]) -> NodeDiagnostics {
    let m = node_moments(graph, table, r);
    let others: Vec<NodeId> = (0..graph.p()).filter(|&t| t != r).collect();
    let support: Vec<usize> = (0..others.len()).filter(|&j| adj[r].contains(&others[j])).collect();
    let rest: Vec<usize> = (0..others.len()).filter(|j| !support.contains(j)).collect();
    let q = to_matrix(&m.information);

    let q_ss = q.select_rows(&support).select_columns(&support);
    let c_min = (!support.is_empty()).then(|| {
        let rows: Vec<Vec<f64>> = q_ss.row_iter().map(|r| r.iter().copied().collect()).collect();
        symmetric_eigenvalues(&rows)[0]
    });
    let incoherence = if support.is_empty() {
        Some(0.0)
    } else {
        q_ss.clone().try_inverse().filter(|_| c_min.is_some_and(|c| c > 1e-12)).map(|inv| {
            let q_cs = q.select_rows(&rest).select_columns(&support);
            if rest.is_empty() {
                0.0
            } else {
                infinity_norm(&(q_cs * inv))
            }
        })
    };
    let d_max = symmetric_eigenvalues(&m.second_moment).last().copied().unwrap_or(0.0);
    NodeDiagnostics {
        node: r,
        true_neighbors: support.iter().map(|&j| others[j]).collect(),
        score_max_norm: m.score.iter().map(|v| v.abs()).fold(0.0, f64::max),
        expected_score: m.score,
        information: m.information,
        others,
        c_min,
        d_max,
        alpha: incoherence.map(|v| 1.0 - v),
        incoherence,
    }
}

/// Computes every node's diagnostics and the global conditions.
/// `max_degree` defaults to the true graph's maximum degree.
pub fn check_assumptions(
    graph: &GraphSpec,
    law: &MisclassLaw,
    n: usize,
    max_degree: Option<usize>,
) -> Result<DiagnosticsReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let table = mising_prob_table(graph, per_node_gammas(law)?)?;
    let adj = graph.adjacency_lists();
    let per_node: Vec<NodeDiagnostics> = (0..graph.p()).map(|r| diagnose_node(graph, &table, r, &adj)).collect();
    let d = max_degree.unwrap_or_else(|| graph.max_degree());

    let s_max = per_node.iter().map(|nd| nd.score_max_norm).fold(0.0, f64::max);
    let d_max = per_node.iter().map(|nd| nd.d_max).fold(0.0, f64::max);
    let c_min = per_node.iter().filter_map(|nd| nd.c_min).reduce(f64::min);
    let alpha = per_node
        .iter()
        .map(|nd| nd.alpha)
        .try_fold(1.0f64, |acc, a| a.map(|a| acc.min(a)));

    let dependency_satisfied = c_min.is_none_or(|c| c > 0.0) && per_node.iter().all(|nd| nd.incoherence.is_some());
    let alpha_valid = alpha.filter(|&a| a > 0.0 && a <= 1.0);
    let incoherence_satisfied = alpha_valid.is_some();

    let misclassification_bound = match (alpha_valid, c_min) {
        _ if d == 0 => Some(f64::INFINITY),
        (Some(a), Some(c)) => Some(misclassification_bound(c, d_max, a, d)),
        _ => None,
    };
    let a3_satisfied = dependency_satisfied
        && incoherence_satisfied
        && misclassification_bound.is_some_and(|b| s_max <= b);

    Ok(DiagnosticsReport {
        p: graph.p(),
        n,
        max_degree: d,
        per_node,
        s_max,
        c_min,
        d_max,
        alpha,
        dependency_satisfied,
        incoherence_satisfied,
        misclassification_bound,
        a3_satisfied,
        lambda_lower_bound: alpha_valid.map(|a| lambda_lower_bound(a, graph.p(), n, s_max)),
        lambda_tilde_shift: alpha_valid.map(|a| 4.0 * (2.0 - a) / a * s_max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn chain3() -> GraphSpec {
        GraphSpec::uniform(3, &[(0, 1), (1, 2)], 0.5).unwrap()
    }

    #[test]
    fn clean_law_has_zero_score() {
        let g = chain3();
        for r in 0..3 {
            let s = misclassified_score(&g, &MisclassLaw::clean(3), r).unwrap();
            assert!(s.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn empty_graph_score_and_information() {
        let g = GraphSpec::empty(3);
        let law = MisclassLaw::per_node(vec![0.2, 0.4, 0.1]).unwrap();
        let s = misclassified_score(&g, &law, 1).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-12));
        let q = misclassified_information(&g, &MisclassLaw::clean(3), 0).unwrap();
        for (i, row) in q.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_abs_diff_eq!(v, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn information_symmetric_psd() {
        let g = chain3();
        let law = MisclassLaw::per_node(vec![0.1, 0.2, 0.0]).unwrap();
        for r in 0..3 {
            let q = misclassified_information(&g, &law, r).unwrap();
            for i in 0..q.len() {
                for j in 0..q.len() {
                    assert_abs_diff_eq!(q[i][j], q[j][i], epsilon = 1e-14);
                }
            }
            assert!(symmetric_eigenvalues(&q)[0] >= -1e-12);
        }
    }

    #[test]
    fn clean_law_satisfies_a3() {
        let report = check_assumptions(&chain3(), &MisclassLaw::clean(3), 500, None).unwrap();
        assert!(report.s_max < 1e-10);
        assert!(report.a3_satisfied);
        let a = report.alpha.unwrap();
        let expected = 16.0 * (2.0 - a) / a * ((3f64).ln() / 500.0).sqrt();
        assert_abs_diff_eq!(report.lambda_lower_bound.unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn per_cell_law_rejected() {
        let law = MisclassLaw::per_cell(&[vec![0.0; 3]]).unwrap();
        assert!(misclassified_score(&chain3(), &law, 0).is_err());
    }

    #[test]
    fn bound_formulas() {
        assert_abs_diff_eq!(misclassification_bound(0.5, 2.0, 0.5, 3), 0.25 * 0.25 / (400.0 * 2.0 * 3.0 * 2.25), epsilon = 1e-18);
        assert_abs_diff_eq!(lambda_tilde(1.0, 0.5, 0.01), 1.0 - 4.0 * 1.5 / 0.5 * 0.01, epsilon = 1e-15);
    }
}
