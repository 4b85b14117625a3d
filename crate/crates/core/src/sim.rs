//! Monte-Carlo scenarios comparing the estimators over a `λ` grid.
//!
//! A scenario samples clean Ising data from a known graph, corrupts it with
//! a misclassification scheme, fits every requested estimator along the grid
//! and scores the recovered edge sets against the truth. Replication `i`
//! draws everything from `seed.split(i)`, so a run can be split into slices
//! of replications and merged back without changing any aggregate.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::em::{em_iteration, EmOptions, EmState};
use crate::error::{Error, Result};
use crate::graph::{edge_metrics, edge_metrics_excluding, neighbors, EdgeMetrics, EdgeSet, GraphSpec, NodeId, NodeSet};
use crate::ising::{apply_misclassification_with, sample_ising_with, ExactSampler, MisclassLaw, RngSeed, SampleMethod, SpinMatrix, EXACT_LIMIT};
use crate::rwl::{rwl_path, Aggregation, RowWeights, RwlFit};

/// How observations are corrupted in each replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum LawScheme {
    /// Fixed flip probability per node, shared by all observations.
    PerNode { gammas: Vec<f64> },
    /// A fresh random half of the rows gets flip probability `within_prob`
    /// on `nodes` (the candidates when omitted); every other cell is clean.
    HalfObservations {
        within_prob: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nodes: Option<Vec<NodeId>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CandidateRule {
    Explicit(Vec<NodeId>),
    /// Nodes whose average flip probability exceeds the threshold.
    Threshold(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Estimator {
    Rwl,
    RwlWeighted,
    RwlEm { iters: usize },
    WeightedEm { iters: usize },
}

impl Estimator {
    pub fn label(&self) -> String {
        match self {
            Estimator::Rwl => "RWL".into(),
            Estimator::RwlWeighted => "RWL_WEIGHTED".into(),
            Estimator::RwlEm { iters } => format!("RWL_EM{iters}"),
            Estimator::WeightedEm { iters } => format!("WEIGHTED_EM{iters}"),
        }
    }

    fn weighted_base(&self) -> bool {
        matches!(self, Estimator::RwlWeighted | Estimator::WeightedEm { .. })
    }

    fn em_iters(&self) -> Option<usize> {
        match self {
            Estimator::RwlEm { iters } | Estimator::WeightedEm { iters } => Some(*iters),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub graph: GraphSpec,
    pub n: usize,
    pub replications: usize,
    /// Index of the first replication; lets a run be split into slices.
    #[serde(default)]
    pub first_replication: u64,
    pub law: LawScheme,
    /// Defaults to [`default_lambda_grid`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    pub estimators: Vec<Estimator>,
    pub candidate_rule: CandidateRule,
    pub seed: RngSeed,
    #[serde(default)]
    pub sampler: SampleMethod,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub em: EmOptions,
}

/// 30 log-spaced values from `1.5·√(log p / n)` down to `0.01·√(log p / n)`.
pub fn default_lambda_grid(p: usize, n: usize) -> Vec<f64> {
    let scale = ((p as f64).ln() / n as f64).sqrt();
    let (hi, lo) = (1.5f64.ln(), 0.01f64.ln());
    (0..30).map(|k| scale * (hi + (lo - hi) * k as f64 / 29.0).exp()).collect()
}

impl ScenarioConfig {
    /// The grid actually used, sorted descending.
    pub fn resolved_grid(&self) -> Vec<f64> {
        let mut grid = match &self.lambda_grid {
            Some(g) => g.clone(),
            None => default_lambda_grid(self.graph.p(), self.n),
        };
        grid.sort_by(|a, b| b.total_cmp(a));
        grid
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.graph.p();
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        if self.n < 2 || p < 2 {
            return bad(format!("need n >= 2 and p >= 2, got n = {}, p = {p}", self.n));
        }
        if let Some(g) = &self.lambda_grid {
            if g.is_empty() {
                return bad("empty lambda grid".into());
            }
            if let Some(l) = g.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
                return bad(format!("lambda grid entries must be positive and finite, got {l}"));
            }
        }
        if self.estimators.is_empty() {
            return bad("no estimators requested".into());
        }
        if self.estimators.iter().any(|e| e.em_iters() == Some(0)) {
            return bad("EM estimators need iters >= 1".into());
        }
        if matches!(self.sampler, SampleMethod::Exact) && p > EXACT_LIMIT {
            return Err(Error::ExactLimitExceeded { p, limit: EXACT_LIMIT });
        }
        match &self.law {
            LawScheme::PerNode { gammas } => {
                MisclassLaw::per_node(gammas.clone())?.check_shape(self.n, p)?;
            }
            LawScheme::HalfObservations { within_prob, nodes } => {
                if !(0.0..=1.0).contains(within_prob) {
                    return bad(format!("withinProb {within_prob} outside [0, 1]"));
                }
                if nodes.is_none() && !matches!(self.candidate_rule, CandidateRule::Explicit(_)) {
                    return bad("halfObservations without nodes needs an explicit candidate rule".into());
                }
                if let Some(&v) = nodes.iter().flatten().find(|&&v| v >= p) {
                    return Err(Error::NodeOutOfRange { node: v, p });
                }
            }
        }
        if let CandidateRule::Explicit(c) = &self.candidate_rule {
            if let Some(&v) = c.iter().find(|&&v| v >= p) {
                return Err(Error::NodeOutOfRange { node: v, p });
            }
        }
        Ok(())
    }

    /// Candidate set; threshold rules use the expected flip rate per node.
    pub fn candidates(&self) -> NodeSet {
        match &self.candidate_rule {
            CandidateRule::Explicit(c) => c.iter().copied().collect(),
            CandidateRule::Threshold(q) => {
                let p = self.graph.p();
                let means = match &self.law {
                    LawScheme::PerNode { gammas } => gammas.clone(),
                    LawScheme::HalfObservations { within_prob, nodes } => {
                        let share = (self.n / 2) as f64 / self.n as f64;
                        let mut m = vec![0.0; p];
                        for &v in nodes.iter().flatten() {
                            m[v] = within_prob * share;
                        }
                        m
                    }
                };
                (0..p).filter(|&s| means[s] > *q).collect()
            }
        }
    }

    fn flipped_nodes(&self, candidates: &NodeSet) -> Vec<NodeId> {
        match &self.law {
            LawScheme::HalfObservations { nodes: Some(v), .. } => v.clone(),
            _ => candidates.iter().copied().collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeClass {
    Candidate,
    Participant,
    Other,
}

impl NodeClass {
    pub const ALL: [NodeClass; 3] = [NodeClass::Candidate, NodeClass::Participant, NodeClass::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            NodeClass::Candidate => "candidate",
            NodeClass::Participant => "participant",
            NodeClass::Other => "other",
        }
    }
}

/// Node roles in the true graph. A pair belongs to the first class, in
/// candidate, participant, other order, that contains one of its endpoints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeRoles {
    pub candidates: NodeSet,
    pub participants: NodeSet,
    pub others: NodeSet,
    /// Candidates and their true neighbors.
    pub candidate_neighborhood: NodeSet,
}

impl NodeRoles {
    pub fn new(truth: &GraphSpec, candidates: &NodeSet) -> Result<Self> {
        let first = neighbors(truth, candidates)?;
        let update = neighbors(truth, &first)?;
        let participants = update.difference(candidates).copied().collect();
        let others = (0..truth.p()).filter(|v| !update.contains(v)).collect();
        Ok(NodeRoles { candidates: candidates.clone(), participants, others, candidate_neighborhood: first })
    }

    pub fn metrics(&self, estimate: &EdgeSet, truth: &GraphSpec, class: NodeClass) -> Result<EdgeMetrics> {
        match class {
            NodeClass::Candidate => edge_metrics(estimate, truth, &self.candidates),
            NodeClass::Participant => edge_metrics_excluding(estimate, truth, &self.participants, &self.candidates),
            NodeClass::Other => {
                let inner: NodeSet = self.candidates.union(&self.participants).copied().collect();
                edge_metrics_excluding(estimate, truth, &self.others, &inner)
            }
        }
    }
}

/// Estimated edge sets of one replication, indexed `[estimator][λ]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplicationOutcome {
    pub replication: u64,
    pub seed: RngSeed,
    /// Grid index each estimator is compared at: the Youden choice of its
    /// own path, or of its base path for EM estimators.
    pub matched_index: Vec<usize>,
    pub estimates: Vec<Vec<EdgeSet>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplicationFailure {
    pub replication: u64,
    pub seed: RngSeed,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub grid: Vec<f64>,
    pub roles: NodeRoles,
    pub outcomes: Vec<ReplicationOutcome>,
    pub failures: Vec<ReplicationFailure>,
}

/// Index maximizing TPR − FPR over all pairs; ties go to the larger `λ`.
pub fn youden_index(path: &[EdgeSet], truth: &GraphSpec) -> Result<usize> {
    let all: NodeSet = (0..truth.p()).collect();
    let mut best = (0, f64::NEG_INFINITY);
    for (k, est) in path.iter().enumerate() {
        let m = edge_metrics(est, truth, &all)?;
        let j = m.tpr() - m.fpr();
        if j > best.1 {
            best = (k, j);
        }
    }
    Ok(best.0)
}

struct Context<'a> {
    config: &'a ScenarioConfig,
    grid: &'a [f64],
    candidates: NodeSet,
    flipped: Vec<NodeId>,
    exact: Option<ExactSampler>,
}

impl Context<'_> {
    fn draw(&self, seed: RngSeed) -> Result<(SpinMatrix, MisclassLaw)> {
        let cfg = self.config;
        let mut rng = seed.rng();
        let clean = match &self.exact {
            Some(s) => s.draw(cfg.n, &mut rng),
            None => sample_ising_with(&cfg.graph, cfg.n, cfg.sampler, &mut rng)?,
        };
        let law = match &cfg.law {
            LawScheme::PerNode { gammas } => MisclassLaw::per_node(gammas.clone())?,
            LawScheme::HalfObservations { within_prob, .. } => {
                MisclassLaw::half_observations(cfg.n, cfg.graph.p(), &self.flipped, *within_prob, &mut rng)?
            }
        };
        let noisy = apply_misclassification_with(&clean, &law, &mut rng)?;
        Ok((noisy, law))
    }

    fn replicate(&self, replication: u64) -> Result<ReplicationOutcome> {
        let cfg = self.config;
        let seed = cfg.seed.split(replication);
        let (data, law) = self.draw(seed)?;
        let solver = &cfg.em.solver;

        let needs = |weighted: bool| cfg.estimators.iter().any(|e| e.weighted_base() == weighted);
        let plain = needs(false).then(|| rwl_path(&data, self.grid, cfg.aggregation, None, solver)).transpose()?;
        let weighted = if needs(true) {
            let w = RowWeights::CandidatePrior { law: law.clone(), candidates: self.candidates.iter().copied().collect() };
            Some(rwl_path(&data, self.grid, cfg.aggregation, Some(&w), solver)?)
        } else {
            None
        };
        let edges = |path: &[RwlFit]| path.iter().map(|f| f.edge_set.clone()).collect::<Vec<_>>();
        let plain_edges = plain.as_deref().map(edges);
        let weighted_edges = weighted.as_deref().map(edges);
        let youden = |e: &Option<Vec<EdgeSet>>| e.as_deref().map(|e| youden_index(e, &cfg.graph)).transpose();
        let plain_star = youden(&plain_edges)?;
        let weighted_star = youden(&weighted_edges)?;

        // One EM sweep per base path, snapshotting every requested depth.
        let mut em_paths: BTreeMap<(bool, usize), Vec<EdgeSet>> = BTreeMap::new();
        for w in [false, true] {
            let depths: Vec<usize> =
                cfg.estimators.iter().filter(|e| e.weighted_base() == w).filter_map(|e| e.em_iters()).collect();
            let Some(&deepest) = depths.iter().max() else { continue };
            let (path, star) = if w { (&weighted, weighted_star) } else { (&plain, plain_star) };
            let initial = &path.as_ref().expect("base path fitted")[star.expect("base path fitted")];
            let mut per_depth: BTreeMap<usize, Vec<EdgeSet>> = BTreeMap::new();
            for &lambda in self.grid {
                let mut state = EmState::new(initial, &self.candidates, lambda)?;
                for it in 1..=deepest {
                    state = em_iteration(&state, &data, &law, &cfg.em)?.0;
                    if depths.contains(&it) {
                        per_depth.entry(it).or_default().push(state.edge_set());
                    }
                }
            }
            for (it, edges) in per_depth {
                em_paths.insert((w, it), edges);
            }
        }

        let mut matched_index = Vec::with_capacity(cfg.estimators.len());
        let mut estimates = Vec::with_capacity(cfg.estimators.len());
        for e in &cfg.estimators {
            let w = e.weighted_base();
            let (base, star) = if w { (&weighted_edges, weighted_star) } else { (&plain_edges, plain_star) };
            matched_index.push(star.expect("base path fitted"));
            estimates.push(match e.em_iters() {
                None => base.clone().expect("base path fitted"),
                Some(it) => em_paths[&(w, it)].clone(),
            });
        }
        Ok(ReplicationOutcome { replication, seed, matched_index, estimates })
    }
}

/// Runs every replication of `config`, in parallel on the current rayon pool.
/// Failed replications are recorded with their seeds and skipped.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    config.validate()?;
    let grid = config.resolved_grid();
    let candidates = config.candidates();
    let roles = NodeRoles::new(&config.graph, &candidates)?;
    let exact = match config.sampler {
        SampleMethod::Exact => Some(ExactSampler::new(&config.graph)?),
        SampleMethod::Gibbs(_) => None,
    };
    let ctx = Context { config, grid: &grid, flipped: config.flipped_nodes(&candidates), candidates, exact };
    let first = config.first_replication;
    let results: Vec<(u64, Result<ReplicationOutcome>)> = (first..first + config.replications as u64)
        .into_par_iter()
        .map(|r| (r, ctx.replicate(r)))
        .collect();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (replication, res) in results {
        match res {
            Ok(o) => outcomes.push(o),
            Err(e) => failures.push(ReplicationFailure {
                replication,
                seed: config.seed.split(replication),
                message: e.to_string(),
            }),
        }
    }
    Ok(ScenarioRun { config: config.clone(), grid, roles, outcomes, failures })
}

impl ScenarioRun {
    /// Concatenates two slices of the same scenario, ordered by replication.
    pub fn merge(mut self, other: ScenarioRun) -> Result<ScenarioRun> {
        let mut a = self.config.clone();
        let mut b = other.config.clone();
        a.first_replication = 0;
        b.first_replication = 0;
        a.replications = 0;
        b.replications = 0;
        if a != b || self.grid != other.grid {
            return Err(Error::InvalidArgument("runs come from different scenarios".into()));
        }
        self.config.replications += other.config.replications;
        self.config.first_replication = self.config.first_replication.min(other.config.first_replication);
        self.outcomes.extend(other.outcomes);
        self.outcomes.sort_by_key(|o| o.replication);
        self.failures.extend(other.failures);
        self.failures.sort_by_key(|f| f.replication);
        Ok(self)
    }

    /// One record per replication, estimator, grid point and node class.
    pub fn records(&self) -> Result<Vec<MetricsRecord>> {
        let mut out = Vec::new();
        for o in &self.outcomes {
            for (e, path) in self.config.estimators.iter().zip(&o.estimates) {
                for (k, est) in path.iter().enumerate() {
                    for class in NodeClass::ALL {
                        let m = self.roles.metrics(est, &self.config.graph, class)?;
                        out.push(MetricsRecord::new(o.replication, e.label(), k, self.grid[k], class, m));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn report(&self) -> Result<ScenarioReport> {
        let truth = &self.config.graph;
        let p = truth.p();
        let reps = self.outcomes.len();
        let mut summaries = Vec::new();
        for (ei, e) in self.config.estimators.iter().enumerate() {
            let mut classes = Vec::new();
            for class in NodeClass::ALL {
                let mut fpr = vec![0.0; self.grid.len()];
                let mut tpr = vec![0.0; self.grid.len()];
                let mut rep_auc = 0.0;
                let mut matched_error = 0.0;
                for o in &self.outcomes {
                    let mut points = Vec::with_capacity(self.grid.len());
                    for (k, est) in o.estimates[ei].iter().enumerate() {
                        let m = self.roles.metrics(est, truth, class)?;
                        fpr[k] += m.fpr();
                        tpr[k] += m.tpr();
                        points.push((m.fpr(), m.tpr()));
                        if k == o.matched_index[ei] {
                            matched_error += m.error_rate();
                        }
                    }
                    rep_auc += roc_auc(&points);
                }
                let scale = 1.0 / reps.max(1) as f64;
                let roc: Vec<RocPoint> = self
                    .grid
                    .iter()
                    .enumerate()
                    .map(|(k, &lambda)| RocPoint { lambda, fpr: fpr[k] * scale, tpr: tpr[k] * scale })
                    .collect();
                let auc = roc_auc(&roc.iter().map(|r| (r.fpr, r.tpr)).collect::<Vec<_>>());
                classes.push(ClassSummary {
                    node_class: class,
                    auc,
                    mean_replication_auc: rep_auc * scale,
                    matched_error_rate: matched_error * scale,
                    roc,
                });
            }

            let mut hood_error = vec![0.0; self.grid.len()];
            let mut matched_hood = 0.0;
            let mut node_errors = vec![0.0; p];
            let mut selection = vec![vec![0.0; p]; p];
            for o in &self.outcomes {
                for (k, est) in o.estimates[ei].iter().enumerate() {
                    let err = edge_metrics(est, truth, &self.roles.candidate_neighborhood)?.error_rate();
                    hood_error[k] += err;
                    if k == o.matched_index[ei] {
                        matched_hood += err;
                    }
                }
                let est = &o.estimates[ei][o.matched_index[ei]];
                for r in 0..p {
                    let wrong = (0..p).filter(|&t| t != r && est.contains(r, t) != (truth.weight(r, t) != 0.0)).count();
                    node_errors[r] += wrong as f64 / (p - 1) as f64;
                }
                for (s, t) in est.iter() {
                    selection[s][t] += 1.0;
                    selection[t][s] += 1.0;
                }
            }
            let scale = 1.0 / reps.max(1) as f64;
            let hood_error: Vec<f64> = hood_error.iter().map(|v| v * scale).collect();
            let optimal_index = hood_error
                .iter()
                .enumerate()
                .fold(0, |best, (k, &v)| if v < hood_error[best] { k } else { best });
            summaries.push(EstimatorSummary {
                estimator: e.label(),
                classes,
                neighborhood_error_by_lambda: hood_error.clone(),
                matched_neighborhood_error: matched_hood * scale,
                optimal_lambda_index: optimal_index,
                optimal_neighborhood_error: hood_error.get(optimal_index).copied().unwrap_or(0.0),
                node_error_rates: node_errors.iter().map(|v| v * scale).collect(),
                selection_frequency: selection.iter().map(|row| row.iter().map(|v| v * scale).collect()).collect(),
            });
        }
        Ok(ScenarioReport {
            name: self.config.name.clone(),
            p,
            n: self.config.n,
            replications_requested: self.config.replications,
            replications_completed: reps,
            failures: self.failures.clone(),
            lambda_grid: self.grid.clone(),
            roles: self.roles.clone(),
            estimators: summaries,
        })
    }
}

/// Trapezoidal area under `(fpr, tpr)` points, with `(0,0)` and `(1,1)`
/// appended and the points sorted by FPR, then TPR.
pub fn roc_auc(points: &[(f64, f64)]) -> f64 {
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(points.len() + 2);
    pts.push((0.0, 0.0));
    pts.extend_from_slice(points);
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricsRecord {
    pub replication: u64,
    pub estimator: String,
    pub lambda_index: usize,
    pub lambda: f64,
    pub node_class: NodeClass,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub tnr: f64,
    pub fnr: f64,
}

impl MetricsRecord {
    fn new(replication: u64, estimator: String, lambda_index: usize, lambda: f64, node_class: NodeClass, m: EdgeMetrics) -> Self {
        let tnr = if m.negatives() == 0 { 0.0 } else { m.tn as f64 / m.negatives() as f64 };
        let fnr = if m.positives() == 0 { 0.0 } else { m.fn_ as f64 / m.positives() as f64 };
        MetricsRecord {
            replication,
            estimator,
            lambda_index,
            lambda,
            node_class,
            tp: m.tp,
            fp: m.fp,
            tn: m.tn,
            fn_: m.fn_,
            tpr: m.tpr(),
            fpr: m.fpr(),
            tnr,
            fnr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub lambda: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassSummary {
    pub node_class: NodeClass,
    /// Area under the replication-averaged ROC curve.
    pub auc: f64,
    pub mean_replication_auc: f64,
    pub matched_error_rate: f64,
    pub roc: Vec<RocPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EstimatorSummary {
    pub estimator: String,
    pub classes: Vec<ClassSummary>,
    /// Error rate over pairs touching a candidate or a true candidate neighbor.
    pub neighborhood_error_by_lambda: Vec<f64>,
    pub matched_neighborhood_error: f64,
    pub optimal_lambda_index: usize,
    pub optimal_neighborhood_error: f64,
    /// Per node, the share of its `p − 1` pairs misjudged at the matched `λ`.
    pub node_error_rates: Vec<f64>,
    /// Selection frequency of each pair at the matched `λ`.
    pub selection_frequency: Vec<Vec<f64>>,
}

impl EstimatorSummary {
    pub fn class(&self, class: NodeClass) -> &ClassSummary {
        self.classes.iter().find(|c| c.node_class == class).expect("every class is summarized")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioReport {
    pub name: String,
    pub p: usize,
    pub n: usize,
    pub replications_requested: usize,
    pub replications_completed: usize,
    pub failures: Vec<ReplicationFailure>,
    pub lambda_grid: Vec<f64>,
    pub roles: NodeRoles,
    pub estimators: Vec<EstimatorSummary>,
}

impl ScenarioReport {
    pub fn estimator(&self, label: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == label)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

/// Writes the run's tables into `dir`.
///
/// Always writes `report.json`. CSV output adds `records.csv`, `roc.csv`,
/// `auc.csv`, `node_error.csv` and one `selection_<estimator>.csv` matrix per
/// estimator; JSON output adds `records.json`. Returns the written paths.
pub fn emit_outputs(run: &ScenarioRun, format: OutputFormat, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    if run.grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let records = run.records()?;
    if records.is_empty() {
        return Err(Error::InvalidArgument("no completed replications to write".into()));
    }
    let report = run.report()?;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    written.push(write_json(&dir.join("report.json"), &report)?);
    match format {
        OutputFormat::Json => written.push(write_json(&dir.join("records.json"), &records)?),
        OutputFormat::Csv => {
            let mut csv_file = |name: String, rows: Vec<Vec<String>>| -> Result<()> {
                let path = dir.join(name);
                let mut w = csv::Writer::from_path(&path)?;
                for row in rows {
                    w.write_record(row)?;
                }
                w.flush()?;
                written.push(path);
                Ok(())
            };
            let mut w_records = vec![[
                "replication", "estimator", "lambdaIndex", "lambda", "nodeClass", "tp", "fp", "tn", "fn", "tpr", "fpr",
                "tnr", "fnr",
            ]
            .map(String::from)
            .to_vec()];
            for r in &records {
                w_records.push(vec![
                    r.replication.to_string(),
                    r.estimator.clone(),
                    r.lambda_index.to_string(),
                    r.lambda.to_string(),
                    r.node_class.as_str().into(),
                    r.tp.to_string(),
                    r.fp.to_string(),
                    r.tn.to_string(),
                    r.fn_.to_string(),
                    r.tpr.to_string(),
                    r.fpr.to_string(),
                    r.tnr.to_string(),
                    r.fnr.to_string(),
                ]);
            }
            csv_file("records.csv".into(), w_records)?;

            let mut roc = vec![["estimator", "nodeClass", "lambdaIndex", "lambda", "fpr", "tpr"].map(String::from).to_vec()];
            let mut auc = vec![["estimator", "nodeClass", "auc", "meanReplicationAuc", "matchedErrorRate"]
                .map(String::from)
                .to_vec()];
            let mut node_error = vec![["estimator", "node", "errorRate"].map(String::from).to_vec()];
            for s in &report.estimators {
                for c in &s.classes {
                    for (k, pt) in c.roc.iter().enumerate() {
                        roc.push(vec![
                            s.estimator.clone(),
                            c.node_class.as_str().into(),
                            k.to_string(),
                            pt.lambda.to_string(),
                            pt.fpr.to_string(),
                            pt.tpr.to_string(),
                        ]);
                    }
                    auc.push(vec![
                        s.estimator.clone(),
                        c.node_class.as_str().into(),
                        c.auc.to_string(),
                        c.mean_replication_auc.to_string(),
                        c.matched_error_rate.to_string(),
                    ]);
                }
                for (v, e) in s.node_error_rates.iter().enumerate() {
                    node_error.push(vec![s.estimator.clone(), v.to_string(), e.to_string()]);
                }
            }
            csv_file("roc.csv".into(), roc)?;
            csv_file("auc.csv".into(), auc)?;
            csv_file("node_error.csv".into(), node_error)?;
            for s in &report.estimators {
                let rows = s.selection_frequency.iter().map(|row| row.iter().map(|v| v.to_string()).collect()).collect();
                csv_file(format!("selection_{}.csv", s.estimator), rows)?;
            }
        }
    }
    Ok(written)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<std::path::PathBuf> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(path.to_path_buf())
}

/// Reads `records.json` back.
pub fn load_records_json(path: &Path) -> Result<Vec<MetricsRecord>> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}
