//! Neighborhood selection: one penalized logistic regression per node,
//! aggregated into an undirected edge set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeSet, NodeId};
use crate::ising::{MisclassLaw, SpinMatrix};
use crate::logreg::{fit_l1_logistic, LogRegProblem, LogRegSolution, SolverOptions};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Edge kept when both endpoint regressions select it.
    #[default]
    And,
    /// Edge kept when either endpoint regression selects it.
    Or,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "and" => Ok(Aggregation::And),
            "or" => Ok(Aggregation::Or),
            other => Err(Error::InvalidArgument(format!("unknown aggregation rule {other:?}"))),
        }
    }
}

/// Solver outcome for one node regression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverDiagnostics {
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&LogRegSolution> for SolverDiagnostics {
    fn from(s: &LogRegSolution) -> Self {
        SolverDiagnostics {
            objective: s.objective,
            kkt_residual: s.kkt_residual,
            iterations: s.iterations,
            converged: s.converged,
        }
    }
}

/// Fitted neighborhood of one node. `coefficients` has one entry per node
/// of the graph; the node's own entry is always zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NeighborhoodEstimate {
    pub node: NodeId,
    pub coefficients: Vec<f64>,
    pub solver: SolverDiagnostics,
}

impl NeighborhoodEstimate {
    pub fn support(&self) -> Vec<NodeId> {
        (0..self.coefficients.len()).filter(|&t| self.coefficients[t] != 0.0).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RwlFit {
    pub neighborhoods: Vec<NeighborhoodEstimate>,
    pub edge_set: EdgeSet,
    pub lambda: f64,
    pub aggregation: Aggregation,
}

impl RwlFit {
    /// Wraps a coefficient matrix (row `r` = node `r`) as a fit.
    pub fn from_coefficients(coefficients: Vec<Vec<f64>>, lambda: f64, aggregation: Aggregation) -> Result<Self> {
        let p = coefficients.len();
        if coefficients.iter().any(|row| row.len() != p) {
            return Err(Error::ShapeMismatch {
                expected: format!("{p}×{p} coefficients"),
                found: "ragged rows".into(),
            });
        }
        let edge_set = aggregate_edges(&coefficients, aggregation);
        let neighborhoods = coefficients
            .into_iter()
            .enumerate()
            .map(|(node, mut coefficients)| {
                coefficients[node] = 0.0;
                NeighborhoodEstimate {
                    node,
                    coefficients,
                    solver: SolverDiagnostics { objective: f64::NAN, kkt_residual: 0.0, iterations: 0, converged: true },
                }
            })
            .collect();
        Ok(RwlFit { neighborhoods, edge_set, lambda, aggregation })
    }

    /// Row `r` holds node `r`'s coefficients.
    pub fn coefficient_matrix(&self) -> Vec<Vec<f64>> {
        self.neighborhoods.iter().map(|nb| nb.coefficients.clone()).collect()
    }

    pub fn p(&self) -> usize {
        self.neighborhoods.len()
    }

    pub fn all_converged(&self) -> bool {
        self.neighborhoods.iter().all(|nb| nb.solver.converged)
    }
}

/// Combines per-node supports into an edge set.
pub fn aggregate_edges(coefficients: &[Vec<f64>], aggregation: Aggregation) -> EdgeSet {
    let p = coefficients.len();
    let mut pairs = Vec::new();
    for s in 0..p {
        for t in s + 1..p {
            let (a, b) = (coefficients[s][t] != 0.0, coefficients[t][s] != 0.0);
            let keep = match aggregation {
                Aggregation::And => a && b,
                Aggregation::Or => a || b,
            };
            if keep {
                pairs.push((s, t));
            }
        }
    }
    EdgeSet::new(p, pairs).expect("indices in range by construction")
}

/// Spin of candidate `j` in latent configuration `z` (bit set means `+1`).
#[inline]
pub(crate) fn config_spin(z: usize, j: usize) -> i8 {
    if z >> j & 1 == 1 {
        1
    } else {
        -1
    }
}

/// Misclassification-only weights over the `2^|C|` candidate configurations
/// of observation `row` (bit `j` of the index is candidate `candidates[j]`).
///
/// Configuration `z` gets `Π_s [γ_s if z_s ≠ x̃_s else 1 − γ_s]`.
pub fn prior_state_weights(
    law: &MisclassLaw,
    row: usize,
    observed: &[i8],
    candidates: &[NodeId],
) -> Result<Vec<f64>> {
    if let Some(&s) = candidates.iter().find(|&&s| s >= law.p() || s >= observed.len()) {
        return Err(Error::MissingGamma(s));
    }
    let c = candidates.len();
    Ok((0..1usize << c)
        .map(|z| {
            candidates
                .iter()
                .enumerate()
                .map(|(j, &s)| {
                    let g = law.gamma(row, s);
                    if config_spin(z, j) != observed[s] {
                        g
                    } else {
                        1.0 - g
                    }
                })
                .product()
        })
        .collect())
}

/// Observation weighting for [`rwl_fit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RowWeights {
    /// One weight per observation, shared by every node regression.
    PerRow(Vec<f64>),
    /// `weights[i][r]` weights observation `i` in node `r`'s regression.
    PerRowNode(Vec<Vec<f64>>),
    /// Expand each observation over candidate configurations weighted by
    /// [`prior_state_weights`].
    CandidatePrior { law: MisclassLaw, candidates: Vec<NodeId> },
}

/// Rows fed to the node regressions: spins, then one weight column per node.
struct WeightedRows {
    p: usize,
    spins: Vec<i8>,
    weights: Vec<f64>,
    per_node: bool,
}

impl WeightedRows {
    fn len(&self) -> usize {
        self.spins.len() / self.p
    }

    fn weight(&self, row: usize, node: NodeId) -> f64 {
        if self.per_node {
            self.weights[row * self.p + node]
        } else {
            self.weights[row]
        }
    }

    fn build(data: &SpinMatrix, weights: Option<&RowWeights>) -> Result<Self> {
        let (n, p) = (data.n(), data.p());
        let shape_err = |what: &str| Error::ShapeMismatch {
            expected: format!("weights for {n}×{p} data"),
            found: what.to_string(),
        };
        Ok(match weights {
            None => WeightedRows { p, spins: data.values().to_vec(), weights: vec![1.0; n], per_node: false },
            Some(RowWeights::PerRow(w)) => {
                if w.len() != n {
                    return Err(shape_err(&format!("{} row weights", w.len())));
                }
                WeightedRows { p, spins: data.values().to_vec(), weights: w.clone(), per_node: false }
            }
            Some(RowWeights::PerRowNode(w)) => {
                if w.len() != n || w.iter().any(|r| r.len() != p) {
                    return Err(shape_err("per-(row, node) weights of another shape"));
                }
                WeightedRows { p, spins: data.values().to_vec(), weights: w.concat(), per_node: true }
            }
            Some(RowWeights::CandidatePrior { law, candidates }) => {
                law.check_shape(n, p).or_else(|_| match law {
                    MisclassLaw::PerNode(g) if g.len() == p => Ok(()),
                    _ => Err(shape_err("misclassification law of another shape")),
                })?;
                let mut spins = Vec::new();
                let mut wts = Vec::new();
                for i in 0..n {
                    let row = data.row(i);
                    let prior = prior_state_weights(law, i, row, candidates)?;
                    for (z, &w) in prior.iter().enumerate() {
                        if w == 0.0 {
                            continue;
                        }
                        let mut expanded = row.to_vec();
                        for (j, &s) in candidates.iter().enumerate() {
                            expanded[s] = config_spin(z, j);
                        }
                        spins.extend(expanded);
                        wts.push(w);
                    }
                }
                WeightedRows { p, spins, weights: wts, per_node: false }
            }
        })
    }

    fn node_problem(&self, r: NodeId, lambda: f64) -> Result<LogRegProblem> {
        let m = self.len();
        let k = self.p - 1;
        let mut design = Vec::with_capacity(m * k);
        let mut response = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for i in 0..m {
            let row = &self.spins[i * self.p..(i + 1) * self.p];
            design.extend(row.iter().enumerate().filter(|&(s, _)| s != r).map(|(_, &v)| v as f64));
            response.push(row[r]);
            weights.push(self.weight(i, r));
        }
        LogRegProblem::new(design, k, response, weights, vec![0.0; m], lambda)
    }
}

fn embed(r: NodeId, p: usize, reduced: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; p];
    let mut it = reduced.iter();
    for (s, slot) in full.iter_mut().enumerate() {
        if s != r {
            *slot = *it.next().expect("p - 1 coefficients");
        }
    }
    full
}

fn check_inputs(data: &SpinMatrix, lambda: f64) -> Result<()> {
    if data.n() < 2 {
        return Err(Error::InvalidArgument("need at least two observations".into()));
    }
    if data.p() < 2 {
        return Err(Error::InvalidArgument("need at least two nodes".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// Fits every node regression at one `λ` and aggregates the supports.
pub fn rwl_fit(
    data: &SpinMatrix,
    lambda: f64,
    aggregation: Aggregation,
    weights: Option<&RowWeights>,
    options: &SolverOptions,
) -> Result<RwlFit> {
    Ok(rwl_path(data, &[lambda], aggregation, weights, options)?.remove(0))
}

/// Fits along a descending `λ` grid, warm-starting each node's path.
pub fn rwl_path(
    data: &SpinMatrix,
    grid: &[f64],
    aggregation: Aggregation,
    weights: Option<&RowWeights>,
    options: &SolverOptions,
) -> Result<Vec<RwlFit>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    for &l in grid {
        check_inputs(data, l)?;
    }
    if grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("lambda grid must be sorted descending".into()));
    }
    let p = data.p();
    let rows = WeightedRows::build(data, weights)?;
    let per_node: Vec<Vec<NeighborhoodEstimate>> = (0..p)
        .into_par_iter()
        .map(|r| {
            let base = rows.node_problem(r, grid[0])?;
            let mut warm: Option<Vec<f64>> = None;
            let mut out = Vec::with_capacity(grid.len());
            for &lambda in grid {
                let sol = fit_l1_logistic(&base.with_lambda(lambda), options, warm.as_deref())?;
                out.push(NeighborhoodEstimate {
                    node: r,
                    coefficients: embed(r, p, &sol.coefficients),
                    solver: SolverDiagnostics::from(&sol),
                });
                warm = Some(sol.coefficients);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(g, &lambda)| {
            let neighborhoods: Vec<NeighborhoodEstimate> = per_node.iter().map(|v| v[g].clone()).collect();
            let coefs: Vec<Vec<f64>> = neighborhoods.iter().map(|nb| nb.coefficients.clone()).collect();
            RwlFit { edge_set: aggregate_edges(&coefs, aggregation), neighborhoods, lambda, aggregation }
        })
        .collect())
}
