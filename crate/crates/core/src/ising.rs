//! Ising and misclassified-Ising distributions: exact pmfs by enumeration,
//! exact and Gibbs samplers, and the independent flip channel.
//!
//! State tables enumerate `{-1, +1}^p` with node 0 as the least significant
//! bit and spin `-1` encoded as bit `0`.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphSpec, NodeId};

/// Largest node count for which `2^p` state tables are built.
pub const EXACT_LIMIT: usize = 20;

/// Seed for every random operation. Replication `i` of a run seeded with `s`
/// uses `s ^ i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn split(self, index: u64) -> RngSeed {
        RngSeed(self.0 ^ index)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// `n × p` matrix of spins in `{-1, +1}`, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinMatrix {
    n: usize,
    p: usize,
    values: Vec<i8>,
}

impl SpinMatrix {
    pub fn new(n: usize, p: usize, values: Vec<i8>) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", n * p),
                found: format!("{} entries", values.len()),
            });
        }
        if let Some(bad) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::MalformedSpins(format!("entry {bad} is not -1 or +1")));
        }
        Ok(SpinMatrix { n, p, values })
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::MalformedSpins("ragged rows".into()));
        }
        Self::new(rows.len(), p, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn get(&self, i: usize, s: NodeId) -> i8 {
        self.values[i * self.p + s]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.values.chunks(self.p.max(1)).take(self.n)
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Column permutation: column `v` moves to `perm[v]`.
    pub fn permuted_columns(&self, perm: &[NodeId]) -> SpinMatrix {
        let mut values = vec![0; self.values.len()];
        for i in 0..self.n {
            for v in 0..self.p {
                values[i * self.p + perm[v]] = self.get(i, v);
            }
        }
        SpinMatrix { n: self.n, p: self.p, values }
    }

    pub fn default_names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    /// Reads a CSV with a header row of node names and `-1`/`1` entries.
    pub fn read_csv<R: Read>(reader: R) -> Result<(SpinMatrix, Vec<String>)> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let p = names.len();
        let mut values = Vec::new();
        let mut n = 0;
        for record in rdr.records() {
            let record = record?;
            if record.len() != p {
                return Err(Error::MalformedSpins(format!(
                    "row {} has {} fields, header has {p}",
                    n + 1,
                    record.len()
                )));
            }
            for field in record.iter() {
                let v: i8 = field.trim().parse().map_err(|_| {
                    Error::MalformedSpins(format!("cannot parse {field:?} as a spin"))
                })?;
                values.push(v);
            }
            n += 1;
        }
        Ok((SpinMatrix::new(n, p, values)?, names))
    }

    pub fn write_csv<W: Write>(&self, writer: W, names: &[String]) -> Result<()> {
        if names.len() != self.p {
            return Err(Error::ShapeMismatch {
                expected: format!("{} names", self.p),
                found: format!("{} names", names.len()),
            });
        }
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(names)?;
        for row in self.rows() {
            wtr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Flip probabilities, either one per node or one per observation cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLaw", into = "RawLaw")]
pub enum MisclassLaw {
    PerNode(Vec<f64>),
    PerCell { n: usize, p: usize, gammas: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "mode", content = "gammas", rename_all = "camelCase")]
enum RawLaw {
    PerNode(Vec<f64>),
    PerCell(Vec<Vec<f64>>),
}

impl TryFrom<RawLaw> for MisclassLaw {
    type Error = Error;

    fn try_from(raw: RawLaw) -> Result<Self> {
        match raw {
            RawLaw::PerNode(g) => MisclassLaw::per_node(g),
            RawLaw::PerCell(rows) => MisclassLaw::per_cell(&rows),
        }
    }
}

impl From<MisclassLaw> for RawLaw {
    fn from(law: MisclassLaw) -> Self {
        match law {
            MisclassLaw::PerNode(g) => RawLaw::PerNode(g),
            MisclassLaw::PerCell { p, gammas, .. } => {
                RawLaw::PerCell(gammas.chunks(p.max(1)).map(<[f64]>::to_vec).collect())
            }
        }
    }
}

fn check_gammas(g: &[f64]) -> Result<()> {
    match g.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(bad) => Err(Error::InvalidLaw(format!("probability {bad} outside [0, 1]"))),
        None => Ok(()),
    }
}

impl MisclassLaw {
    pub fn per_node(gammas: Vec<f64>) -> Result<Self> {
        check_gammas(&gammas)?;
        Ok(MisclassLaw::PerNode(gammas))
    }

    pub fn per_cell(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidLaw("ragged per-cell matrix".into()));
        }
        let gammas = rows.concat();
        check_gammas(&gammas)?;
        Ok(MisclassLaw::PerCell { n: rows.len(), p, gammas })
    }

    pub fn clean(p: usize) -> Self {
        MisclassLaw::PerNode(vec![0.0; p])
    }

    pub fn p(&self) -> usize {
        match self {
            MisclassLaw::PerNode(g) => g.len(),
            MisclassLaw::PerCell { p, .. } => *p,
        }
    }

    /// Flip probability for node `s` in observation `i`.
    pub fn gamma(&self, i: usize, s: NodeId) -> f64 {
        match self {
            MisclassLaw::PerNode(g) => g[s],
            MisclassLaw::PerCell { p, gammas, .. } => gammas[i * p + s],
        }
    }

    /// Average flip probability per node (the per-node law itself when per-node).
    pub fn node_means(&self) -> Vec<f64> {
        match self {
            MisclassLaw::PerNode(g) => g.clone(),
            MisclassLaw::PerCell { n, p, gammas } => (0..*p)
                .map(|s| {
                    let total: f64 = (0..*n).map(|i| gammas[i * p + s]).sum();
                    if *n == 0 {
                        0.0
                    } else {
                        total / *n as f64
                    }
                })
                .collect(),
        }
    }

    /// Checks the law can be applied to an `n × p` data matrix.
    pub fn check_shape(&self, n: usize, p: usize) -> Result<()> {
        let ok = match self {
            MisclassLaw::PerNode(g) => g.len() == p,
            MisclassLaw::PerCell { n: ln, p: lp, .. } => *ln == n && *lp == p,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: format!("law for {n}×{p} data"),
                found: match self {
                    MisclassLaw::PerNode(g) => format!("per-node law of length {}", g.len()),
                    MisclassLaw::PerCell { n, p, .. } => format!("per-cell law of shape {n}×{p}"),
                },
            })
        }
    }

    /// Per-cell law with probability `within_prob` on `nodes` for a uniformly
    /// chosen half of the rows, zero elsewhere.
    pub fn half_observations<R: Rng + ?Sized>(
        n: usize,
        p: usize,
        nodes: &[NodeId],
        within_prob: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_gammas(&[within_prob])?;
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(rng);
        let mut gammas = vec![0.0; n * p];
        for &i in &rows[..n / 2] {
            for &s in nodes {
                if s >= p {
                    return Err(Error::NodeOutOfRange { node: s, p });
                }
                gammas[i * p + s] = within_prob;
            }
        }
        Ok(MisclassLaw::PerCell { n, p, gammas })
    }
}

#[inline]
pub(crate) fn spin_of(state: usize, s: NodeId) -> f64 {
    if state >> s & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Table index of a spin vector.
pub fn state_index(x: &[i8]) -> Result<usize> {
    if x.len() > EXACT_LIMIT {
        return Err(Error::ExactLimitExceeded { p: x.len(), limit: EXACT_LIMIT });
    }
    x.iter().enumerate().try_fold(0usize, |acc, (s, &v)| match v {
        1 => Ok(acc | 1 << s),
        -1 => Ok(acc),
        other => Err(Error::MalformedSpins(format!("entry {other} is not -1 or +1"))),
    })
}

fn check_limit(p: usize) -> Result<()> {
    if p > EXACT_LIMIT {
        Err(Error::ExactLimitExceeded { p, limit: EXACT_LIMIT })
    } else {
        Ok(())
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-probabilities of all `2^p` states.
pub fn ising_log_table(graph: &GraphSpec) -> Result<Vec<f64>> {
    let p = graph.p();
    check_limit(p)?;
    let energies: Vec<f64> = (0..1usize << p)
        .map(|b| {
            graph
                .edges()
                .iter()
                .map(|&(s, t, w)| {
                    // x_s x_t = +1 exactly when the two bits agree
                    if (b >> s ^ b >> t) & 1 == 0 {
                        w
                    } else {
                        -w
                    }
                })
                .sum()
        })
        .collect();
    let log_z = log_sum_exp(&energies);
    Ok(energies.into_iter().map(|e| e - log_z).collect())
}

pub fn ising_prob_table(graph: &GraphSpec) -> Result<Vec<f64>> {
    Ok(ising_log_table(graph)?.into_iter().map(f64::exp).collect())
}

pub fn ising_logpmf(graph: &GraphSpec, x: &[i8]) -> Result<f64> {
    check_spin_len(graph.p(), x)?;
    let idx = state_index(x)?;
    Ok(ising_log_table(graph)?[idx])
}

fn check_spin_len(p: usize, x: &[i8]) -> Result<()> {
    if x.len() != p {
        return Err(Error::MalformedSpins(format!("expected {p} spins, found {}", x.len())));
    }
    Ok(())
}

/// Applies independent per-node flips to a probability table in place.
pub fn channel_transform(table: &mut [f64], gammas: &[f64]) {
    for (s, &g) in gammas.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let bit = 1usize << s;
        for b in 0..table.len() {
            if b & bit == 0 {
                let (lo, hi) = (table[b], table[b | bit]);
                table[b] = (1.0 - g) * lo + g * hi;
                table[b | bit] = g * lo + (1.0 - g) * hi;
            }
        }
    }
}

/// Probabilities of all `2^p` observed states under per-node flips.
pub fn mising_prob_table(graph: &GraphSpec, gammas: &[f64]) -> Result<Vec<f64>> {
    if gammas.len() != graph.p() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} probabilities", graph.p()),
            found: format!("{}", gammas.len()),
        });
    }
    check_gammas(gammas)?;
    let mut table = ising_prob_table(graph)?;
    channel_transform(&mut table, gammas);
    Ok(table)
}

pub fn mising_logpmf(graph: &GraphSpec, law: &MisclassLaw, x_tilde: &[i8]) -> Result<f64> {
    let gammas = match law {
        MisclassLaw::PerNode(g) => g,
        MisclassLaw::PerCell { .. } => {
            return Err(Error::InvalidLaw("the marginal pmf needs a per-node law".into()))
        }
    };
    check_spin_len(graph.p(), x_tilde)?;
    let idx = state_index(x_tilde)?;
    Ok(mising_prob_table(graph, gammas)?[idx].ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GibbsOptions {
    /// Full sweeps discarded before the first draw.
    pub burn_in: usize,
    /// Full sweeps between retained draws.
    pub thin: usize,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        GibbsOptions { burn_in: 1000, thin: 10 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SampleMethod {
    #[default]
    Exact,
    Gibbs(GibbsOptions),
}

/// Inverse-CDF sampler over the enumerated state table. Build once, draw many.
#[derive(Clone, Debug)]
pub struct ExactSampler {
    p: usize,
    cdf: Vec<f64>,
}

impl ExactSampler {
    pub fn new(graph: &GraphSpec) -> Result<Self> {
        let table = ising_prob_table(graph)?;
        let mut acc = 0.0;
        let cdf = table
            .iter()
            .map(|q| {
                acc += q;
                acc
            })
            .collect();
        Ok(ExactSampler { p: graph.p(), cdf })
    }

    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SpinMatrix {
        let total = *self.cdf.last().unwrap_or(&1.0);
        let mut values = Vec::with_capacity(n * self.p);
        for _ in 0..n {
            let u = rng.gen::<f64>() * total;
            let b = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
            values.extend((0..self.p).map(|s| spin_of(b, s) as i8));
        }
        SpinMatrix { n, p: self.p, values }
    }
}

fn gibbs_draw<R: Rng + ?Sized>(graph: &GraphSpec, n: usize, opts: GibbsOptions, rng: &mut R) -> Result<SpinMatrix> {
    if opts.thin == 0 {
        return Err(Error::InvalidArgument("Gibbs thinning must be at least 1".into()));
    }
    let p = graph.p();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p];
    for &(s, t, w) in graph.edges() {
        adj[s].push((t, w));
        adj[t].push((s, w));
    }
    let mut x: Vec<f64> = (0..p).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
    let sweep = |x: &mut [f64], rng: &mut R| {
        for s in 0..p {
            let field: f64 = adj[s].iter().map(|&(t, w)| w * x[t]).sum();
            let prob_up = 1.0 / (1.0 + (-2.0 * field).exp());
            x[s] = if rng.gen::<f64>() < prob_up { 1.0 } else { -1.0 };
        }
    };
    for _ in 0..opts.burn_in {
        sweep(&mut x, rng);
    }
    let mut values = Vec::with_capacity(n * p);
    for _ in 0..n {
        for _ in 0..opts.thin {
            sweep(&mut x, rng);
        }
        values.extend(x.iter().map(|&v| v as i8));
    }
    Ok(SpinMatrix { n, p, values })
}

pub fn sample_ising_with<R: Rng + ?Sized>(
    graph: &GraphSpec,
    n: usize,
    method: SampleMethod,
    rng: &mut R,
) -> Result<SpinMatrix> {
    match method {
        SampleMethod::Exact => Ok(ExactSampler::new(graph)?.draw(n, rng)),
        SampleMethod::Gibbs(opts) => gibbs_draw(graph, n, opts, rng),
    }
}

/// `n` draws from `Ising(graph)`, reproducible given `seed`.
pub fn sample_ising(graph: &GraphSpec, n: usize, method: SampleMethod, seed: RngSeed) -> Result<SpinMatrix> {
    sample_ising_with(graph, n, method, &mut seed.rng())
}

pub fn apply_misclassification_with<R: Rng + ?Sized>(
    data: &SpinMatrix,
    law: &MisclassLaw,
    rng: &mut R,
) -> Result<SpinMatrix> {
    law.check_shape(data.n, data.p)?;
    let mut out = data.clone();
    for i in 0..data.n {
        for s in 0..data.p {
            let g = law.gamma(i, s);
            // one uniform per cell keeps the stream layout independent of γ
            let u: f64 = rng.gen();
            if u < g {
                out.values[i * data.p + s] = -out.values[i * data.p + s];
            }
        }
    }
    Ok(out)
}

/// Flips each entry independently with its probability under `law`.
pub fn apply_misclassification(data: &SpinMatrix, law: &MisclassLaw, seed: RngSeed) -> Result<SpinMatrix> {
    apply_misclassification_with(data, law, &mut seed.rng())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphSpec;
    use approx::assert_abs_diff_eq;

    fn chain(p: usize, w: f64) -> GraphSpec {
        let pairs: Vec<_> = (0..p - 1).map(|s| (s, s + 1)).collect();
        GraphSpec::uniform(p, &pairs, w).unwrap()
    }

    #[test]
    fn single_node_uniform() {
        let g = GraphSpec::empty(1);
        assert_abs_diff_eq!(ising_logpmf(&g, &[1]).unwrap(), 0.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn two_node_hand_enumeration() {
        let g = GraphSpec::new(2, [(0, 1, 0.5)]).unwrap();
        let e = 0.5f64.exp();
        let expected = (e / (2.0 * e + 2.0 / e)).ln();
        assert_abs_diff_eq!(ising_logpmf(&g, &[1, 1]).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn chain_normalizes() {
        let total: f64 = ising_prob_table(&chain(3, 0.5)).unwrap().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bit_layout() {
        assert_eq!(state_index(&[1, -1, -1]).unwrap(), 1);
        assert_eq!(state_index(&[-1, -1, 1]).unwrap(), 4);
        assert!(state_index(&[0, 1]).is_err());
    }

    #[test]
    fn limit_enforced() {
        let g = GraphSpec::empty(21);
        assert!(matches!(ising_log_table(&g), Err(Error::ExactLimitExceeded { .. })));
    }

    #[test]
    fn identity_and_uniform_channel() {
        let g = chain(3, 0.5);
        let law = MisclassLaw::clean(3);
        let x = [1, -1, 1];
        assert_abs_diff_eq!(
            mising_logpmf(&g, &law, &x).unwrap(),
            ising_logpmf(&g, &x).unwrap(),
            epsilon = 1e-14
        );
        let half = MisclassLaw::per_node(vec![0.5; 3]).unwrap();
        assert_abs_diff_eq!(mising_logpmf(&g, &half, &x).unwrap(), (0.125f64).ln(), epsilon = 1e-14);
    }

    #[test]
    fn misclassification_extremes() {
        let data = sample_ising(&chain(4, 0.5), 50, SampleMethod::Exact, RngSeed(3)).unwrap();
        let same = apply_misclassification(&data, &MisclassLaw::clean(4), RngSeed(1)).unwrap();
        assert_eq!(same, data);
        let all = MisclassLaw::per_node(vec![1.0; 4]).unwrap();
        let neg = apply_misclassification(&data, &all, RngSeed(1)).unwrap();
        assert!(neg.values().iter().zip(data.values()).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn misclassification_shape_checked() {
        let data = SpinMatrix::new(2, 2, vec![1, 1, -1, 1]).unwrap();
        let law = MisclassLaw::clean(3);
        assert!(apply_misclassification(&data, &law, RngSeed(0)).is_err());
    }

    #[test]
    fn law_json() {
        let law: MisclassLaw = serde_json::from_str(r#"{"mode":"perNode","gammas":[0.1,0.0]}"#).unwrap();
        assert_eq!(law, MisclassLaw::PerNode(vec![0.1, 0.0]));
        let cell: MisclassLaw =
            serde_json::from_str(r#"{"mode":"perCell","gammas":[[0.1,0.0],[0.0,0.6]]}"#).unwrap();
        assert_eq!(cell.gamma(1, 1), 0.6);
        let back: MisclassLaw = serde_json::from_str(&serde_json::to_string(&cell).unwrap()).unwrap();
        assert_eq!(back, cell);
        assert!(serde_json::from_str::<MisclassLaw>(r#"{"mode":"perNode","gammas":[1.5]}"#).is_err());
    }

    #[test]
    fn spin_csv_roundtrip() {
        let m = SpinMatrix::from_rows(&[vec![1, -1], vec![-1, -1]]).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf, &["a".into(), "b".into()]).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "a,b\n1,-1\n-1,-1\n");
        let (back, names) = SpinMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(names, vec!["a", "b"]);
        assert!(SpinMatrix::read_csv("a\n0\n".as_bytes()).is_err());
    }

    #[test]
    fn half_observation_law_marks_half_the_rows() {
        let mut rng = RngSeed(9).rng();
        let law = MisclassLaw::half_observations(10, 3, &[1], 0.6, &mut rng).unwrap();
        let marked = (0..10).filter(|&i| law.gamma(i, 1) == 0.6).count();
        assert_eq!(marked, 5);
        assert!((0..10).all(|i| law.gamma(i, 0) == 0.0));
        assert_abs_diff_eq!(law.node_means()[1], 0.3, epsilon = 1e-15);
    }
}
