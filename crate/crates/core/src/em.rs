//! EM refinement of a neighborhood-selection fit when some nodes are
//! observed through a known misclassification channel.
//!
//! Candidate nodes (suspected misclassified) are treated as latent. Only
//! the update set `U = N(N(C))` of the initial edge estimate is refit, one
//! connected component of `U` at a time:
//!
//! * E-step: for every observation, a posterior over the `2^c` true
//!   configurations of the component's candidates. The unnormalized weight
//!   of configuration `z` is `exp(A(z, x̃_P)) · c(z, x̃_C)`, where `A` is the
//!   pairwise Ising potential inside the component under the current
//!   (symmetrized) coefficients and `c` is the flip/stay likelihood of the
//!   observed candidate states.
//! * M-step: each node of the component is refit by a weighted, offset
//!   penalized logistic regression on the data expanded over `z`; the
//!   coefficients toward nodes outside the component stay at the initial
//!   fit and enter as offsets.
//!
//! All nodes of an iteration consume the same weight table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{update_partition, EdgeSet, NodeId, NodePartition, NodeSet};
use crate::ising::{MisclassLaw, SpinMatrix};
use crate::logreg::{fit_l1_logistic, l1, nll, LogRegProblem, LogRegSolution, SolverOptions};
use crate::rwl::{aggregate_edges, config_spin, Aggregation, RwlFit, SolverDiagnostics};

/// Default cap on candidates inside one component.
pub const DEFAULT_MAX_CANDIDATES: usize = 20;

/// Largest weight table (observations × configurations) allowed.
pub const MAX_TABLE_ENTRIES: usize = 1 << 27;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EmOptions {
    pub solver: SolverOptions,
    pub max_candidates: usize,
    /// Record the penalized node likelihood before and after every iteration.
    pub audit: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { solver: SolverOptions::default(), max_candidates: DEFAULT_MAX_CANDIDATES, audit: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EmState {
    pub iteration: usize,
    pub lambda: f64,
    pub partition: NodePartition,
    /// Current coefficients, row `r` = node `r`. Entries toward nodes outside
    /// `r`'s component always equal `fixed`.
    pub theta: Vec<Vec<f64>>,
    /// Initial-fit coefficients; never modified.
    pub fixed: Vec<Vec<f64>>,
    initial_edges: EdgeSet,
}

impl EmState {
    pub fn new(initial: &RwlFit, candidates: &NodeSet, lambda: f64) -> Result<Self> {
        let partition = update_partition(&initial.edge_set, candidates)?;
        let theta = initial.coefficient_matrix();
        Ok(EmState {
            iteration: 0,
            lambda,
            partition,
            fixed: theta.clone(),
            theta,
            initial_edges: initial.edge_set.clone(),
        })
    }

    pub fn p(&self) -> usize {
        self.theta.len()
    }

    /// Nodes whose coefficients are refit for node `r` (its component minus `r`).
    pub fn free_nodes(&self, r: NodeId) -> Vec<NodeId> {
        match self.partition.component_of(r) {
            Some(k) => self.partition.components[k].nodes.iter().copied().filter(|&s| s != r).collect(),
            None => Vec::new(),
        }
    }

    /// Averaged pair coefficient used in the Ising potential.
    pub fn symmetric_weight(&self, s: NodeId, t: NodeId) -> f64 {
        0.5 * (self.theta[s][t] + self.theta[t][s])
    }

    /// AND rule on the current coefficients inside each component; the
    /// initial edge set everywhere else.
    pub fn edge_set(&self) -> EdgeSet {
        let refit = aggregate_edges(&self.theta, Aggregation::And);
        let p = self.p();
        let comp: Vec<Option<usize>> = (0..p).map(|v| self.partition.component_of(v)).collect();
        let pairs = (0..p).flat_map(|s| (s + 1..p).map(move |t| (s, t))).filter(|&(s, t)| {
            match (comp[s], comp[t]) {
                (Some(a), Some(b)) if a == b => refit.contains(s, t),
                _ => self.initial_edges.contains(s, t),
            }
        });
        EdgeSet::new(p, pairs.collect::<Vec<_>>()).expect("indices in range")
    }
}

/// Posterior weights over candidate configurations for one component.
/// Bit `j` of a configuration index is the spin of `candidates[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeightTable {
    pub component: usize,
    pub candidates: Vec<NodeId>,
    pub n: usize,
    weights: Vec<f64>,
}

impl WeightTable {
    pub fn configurations(&self) -> usize {
        1 << self.candidates.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.configurations();
        &self.weights[i * k..(i + 1) * k]
    }

    /// Observation `i` with the component's candidates set to configuration `z`.
    pub fn completed_row(&self, observed: &[i8], z: usize) -> Vec<i8> {
        let mut row = observed.to_vec();
        for (j, &s) in self.candidates.iter().enumerate() {
            row[s] = config_spin(z, j);
        }
        row
    }
}

fn check_law(law: &MisclassLaw, data: &SpinMatrix) -> Result<()> {
    match law {
        MisclassLaw::PerNode(g) if g.len() != data.p() => Err(Error::MissingGamma(g.len().min(data.p()))),
        MisclassLaw::PerNode(_) => Ok(()),
        MisclassLaw::PerCell { .. } => law.check_shape(data.n(), data.p()),
    }
}

/// E-step for one component of the update set.
pub fn estep_weights(
    state: &EmState,
    data: &SpinMatrix,
    law: &MisclassLaw,
    component: usize,
    max_candidates: usize,
) -> Result<WeightTable> {
    let comp = state
        .partition
        .components
        .get(component)
        .ok_or_else(|| Error::InvalidArgument(format!("no component {component}")))?;
    let c = comp.candidates.len();
    if c > max_candidates {
        return Err(Error::TooManyCandidates { count: c, limit: max_candidates });
    }
    if data.n().saturating_mul(1usize << c) > MAX_TABLE_ENTRIES {
        return Err(Error::InvalidArgument(format!(
            "weight table of {} × 2^{c} entries is too large",
            data.n()
        )));
    }
    check_law(law, data)?;
    if data.p() != state.p() {
        return Err(Error::NodeCountMismatch { left: data.p(), right: state.p() });
    }

    let cands = &comp.candidates;
    let others: Vec<NodeId> = comp.nodes.iter().copied().filter(|v| !cands.contains(v)).collect();
    // candidate-candidate couplings
    let pair_w: Vec<(usize, usize, f64)> = (0..c)
        .flat_map(|a| (a + 1..c).map(move |b| (a, b)))
        .map(|(a, b)| (a, b, state.symmetric_weight(cands[a], cands[b])))
        .filter(|&(_, _, w)| w != 0.0)
        .collect();
    let k = 1usize << c;
    let mut weights = Vec::with_capacity(data.n() * k);
    let mut logw = vec![0.0; k];
    for i in 0..data.n() {
        let row = data.row(i);
        // field on each candidate from the observed non-candidates
        let field: Vec<f64> = cands
            .iter()
            .map(|&s| others.iter().map(|&t| state.symmetric_weight(s, t) * row[t] as f64).sum())
            .collect();
        let log_keep: Vec<(f64, f64)> = cands
            .iter()
            .map(|&s| {
                let g = law.gamma(i, s);
                (g.ln(), (1.0 - g).ln())
            })
            .collect();
        for (z, lw) in logw.iter_mut().enumerate() {
            let mut a = 0.0;
            let mut misc = 0.0;
            for j in 0..c {
                let zj = config_spin(z, j);
                a += zj as f64 * field[j];
                misc += if zj != row[cands[j]] { log_keep[j].0 } else { log_keep[j].1 };
            }
            for &(ja, jb, w) in &pair_w {
                a += w * (config_spin(z, ja) * config_spin(z, jb)) as f64;
            }
            *lw = a + misc;
        }
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        weights.extend(unnorm.into_iter().map(|u| u / total));
    }
    Ok(WeightTable { component, candidates: cands.clone(), n: data.n(), weights })
}

/// Offset problem for node `r` on the data completed over the weight table.
fn mstep_problem(state: &EmState, data: &SpinMatrix, weights: &WeightTable, r: NodeId) -> Result<(LogRegProblem, Vec<NodeId>)> {
    let free = state.free_nodes(r);
    let p = state.p();
    let comp = &state.partition.components[weights.component];
    let outside: Vec<NodeId> = (0..p).filter(|&s| s != r && !comp.contains(s)).collect();
    let n = data.n() as f64;
    let mut design = Vec::new();
    let mut response = Vec::new();
    let mut row_weights = Vec::new();
    let mut offsets = Vec::new();
    for i in 0..data.n() {
        let obs = data.row(i);
        let offset: f64 = 2.0 * outside.iter().map(|&s| state.fixed[r][s] * obs[s] as f64).sum::<f64>();
        for (z, &w) in weights.row(i).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let full = weights.completed_row(obs, z);
            design.extend(free.iter().map(|&s| full[s] as f64));
            response.push(full[r]);
            row_weights.push(w / n);
            offsets.push(offset);
        }
    }
    let fixed_penalty = state.lambda * outside.iter().map(|&s| state.fixed[r][s].abs()).sum::<f64>();
    let prob = LogRegProblem::new(design, free.len(), response, row_weights, offsets, state.lambda)?
        .with_fixed_penalty(fixed_penalty);
    Ok((prob, free))
}

/// M-step for node `r`: returns its full updated coefficient row and the
/// solver record (`None` when `r` has nothing to refit).
pub fn em_mstep(
    state: &EmState,
    data: &SpinMatrix,
    weights: &WeightTable,
    r: NodeId,
    options: &SolverOptions,
) -> Result<(Vec<f64>, Option<LogRegSolution>)> {
    if state.partition.component_of(r) != Some(weights.component) {
        return Err(Error::InvalidArgument(format!(
            "node {r} is not in component {}",
            weights.component
        )));
    }
    let (prob, free) = mstep_problem(state, data, weights, r)?;
    if free.is_empty() {
        return Ok((state.theta[r].clone(), None));
    }
    let warm: Vec<f64> = free.iter().map(|&s| state.theta[r][s]).collect();
    let sol = fit_l1_logistic(&prob, options, Some(&warm))?;
    let mut row = state.theta[r].clone();
    for (&s, &v) in free.iter().zip(&sol.coefficients) {
        row[s] = v;
    }
    Ok((row, Some(sol)))
}

/// Minimization form of the expected conditional objective for node `r`
/// at coefficient row `coefficients`: `−(1/n) Σ_i Σ_z w_i(z) log P(x̃_r(z) | rest(z)) + λ‖θ̃‖₁`.
pub fn expected_node_objective(
    state: &EmState,
    data: &SpinMatrix,
    weights: &WeightTable,
    r: NodeId,
    coefficients: &[f64],
) -> f64 {
    let mut total = 0.0;
    for i in 0..data.n() {
        for (z, &w) in weights.row(i).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let full = weights.completed_row(data.row(i), z);
            total += w * node_nll(&full, r, coefficients);
        }
    }
    total / data.n() as f64 + state.lambda * l1(coefficients)
}

fn node_nll(row: &[i8], r: NodeId, coefficients: &[f64]) -> f64 {
    let eta: f64 = 2.0
        * row
            .iter()
            .zip(coefficients)
            .enumerate()
            .filter(|&(s, _)| s != r)
            .map(|(_, (&x, &t))| x as f64 * t)
            .sum::<f64>();
    nll(if row[r] == 1 { 1.0 } else { 0.0 }, eta)
}

/// `(1/n) Σ_i log P(x̃_r | x̃_{\r}) − λ‖θ̃_{\r}‖₁` with node `r`'s current
/// coefficients (refit and fixed alike) on the data as given.
pub fn penalized_node_likelihood(state: &EmState, data: &SpinMatrix, r: NodeId) -> f64 {
    let coefs = &state.theta[r];
    let ll: f64 = data.rows().map(|row| -node_nll(row, r, coefs)).sum::<f64>() / data.n() as f64;
    ll - state.lambda * l1(coefs)
}

/// Per-node record for one EM iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeStep {
    pub node: NodeId,
    pub solver: Option<SolverDiagnostics>,
    pub likelihood_before: Option<f64>,
    pub likelihood_after: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IterationRecord {
    pub iteration: usize,
    pub nodes: Vec<NodeStep>,
}

/// One E-step plus M-step over every component. Returns the new state.
pub fn em_iteration(
    state: &EmState,
    data: &SpinMatrix,
    law: &MisclassLaw,
    options: &EmOptions,
) -> Result<(EmState, IterationRecord)> {
    let mut next = state.clone();
    let mut steps = Vec::new();
    for (k, comp) in state.partition.components.iter().enumerate() {
        if comp.candidates.is_empty() {
            continue;
        }
        let table = estep_weights(state, data, law, k, options.max_candidates)?;
        let updates: Vec<(NodeId, Vec<f64>, Option<LogRegSolution>)> = comp
            .nodes
            .par_iter()
            .map(|&r| {
                let (row, sol) = em_mstep(state, data, &table, r, &options.solver)?;
                Ok((r, row, sol))
            })
            .collect::<Result<_>>()?;
        for (r, row, sol) in updates {
            next.theta[r] = row;
            steps.push(NodeStep {
                node: r,
                solver: sol.as_ref().map(SolverDiagnostics::from),
                likelihood_before: None,
                likelihood_after: None,
            });
        }
    }
    next.iteration += 1;
    if options.audit {
        for step in &mut steps {
            step.likelihood_before = Some(penalized_node_likelihood(state, data, step.node));
            step.likelihood_after = Some(penalized_node_likelihood(&next, data, step.node));
        }
    }
    steps.sort_by_key(|s| s.node);
    let record = IterationRecord { iteration: next.iteration, nodes: steps };
    Ok((next, record))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EmOutcome {
    pub state: EmState,
    pub edge_set: EdgeSet,
    pub history: Vec<IterationRecord>,
}

/// Runs `iterations` EM updates starting from an initial neighborhood fit.
pub fn em_update(
    initial: &RwlFit,
    data: &SpinMatrix,
    law: &MisclassLaw,
    candidates: &NodeSet,
    lambda: f64,
    iterations: usize,
    options: &EmOptions,
) -> Result<EmOutcome> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("at least one EM iteration is required".into()));
    }
    if initial.p() != data.p() {
        return Err(Error::NodeCountMismatch { left: initial.p(), right: data.p() });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let mut state = EmState::new(initial, candidates, lambda)?;
    let mut history = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let (next, record) = em_iteration(&state, data, law, options)?;
        state = next;
        history.push(record);
    }
    Ok(EmOutcome { edge_set: state.edge_set(), state, history })
}

/// `{s : mean γ_s > q}`.
pub fn select_candidates(law: &MisclassLaw, threshold: f64) -> NodeSet {
    law.node_means()
        .iter()
        .enumerate()
        .filter(|&(_, &g)| g > threshold)
        .map(|(s, _)| s)
        .collect()
}
