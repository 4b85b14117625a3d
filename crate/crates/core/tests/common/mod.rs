//! Reference computations that share no code with the library.
#![allow(dead_code)]

use isingmis::graph::GraphSpec;
use rand::Rng;

/// Every spin vector of length `p`, node 0 varying fastest.
pub fn all_states(p: usize) -> Vec<Vec<i8>> {
    (0..1usize << p)
        .map(|k| (0..p).map(|s| if k >> s & 1 == 1 { 1 } else { -1 }).collect())
        .collect()
}

pub fn energy(graph: &GraphSpec, x: &[i8]) -> f64 {
    graph.edges().iter().map(|&(s, t, w)| w * x[s] as f64 * x[t] as f64).sum()
}

/// `(state, probability)` pairs of the Ising model.
pub fn ising_pmf(graph: &GraphSpec) -> Vec<(Vec<i8>, f64)> {
    let states = all_states(graph.p());
    let weights: Vec<f64> = states.iter().map(|x| energy(graph, x).exp()).collect();
    let z: f64 = weights.iter().sum();
    states.into_iter().zip(weights).map(|(x, w)| (x, w / z)).collect()
}

pub fn channel(observed: i8, latent: i8, gamma: f64) -> f64 {
    if observed == latent {
        1.0 - gamma
    } else {
        gamma
    }
}

/// `log Σ_x P(x) Π_s P(x̃_s | x_s)` by summing over every latent vector.
pub fn mising_logpmf_bruteforce(graph: &GraphSpec, gammas: &[f64], observed: &[i8]) -> f64 {
    ising_pmf(graph)
        .iter()
        .map(|(x, px)| px * x.iter().zip(observed).zip(gammas).map(|((&l, &o), &g)| channel(o, l, g)).product::<f64>())
        .sum::<f64>()
        .ln()
}

/// `P(X_C = z | X̃ = x̃)` when only the candidates can be flipped, indexed by
/// `z` with bit `j` giving the spin of `candidates[j]`.
pub fn candidate_posterior(graph: &GraphSpec, gammas: &[f64], candidates: &[usize], observed: &[i8]) -> Vec<f64> {
    let mut post = vec![0.0; 1 << candidates.len()];
    for (x, px) in ising_pmf(graph) {
        let clean_match = (0..graph.p()).filter(|s| !candidates.contains(s)).all(|s| x[s] == observed[s]);
        if !clean_match {
            continue;
        }
        let mut z = 0;
        let mut like = px;
        for (j, &c) in candidates.iter().enumerate() {
            if x[c] == 1 {
                z |= 1 << j;
            }
            like *= channel(observed[c], x[c], gammas[c]);
        }
        post[z] += like;
    }
    let total: f64 = post.iter().sum();
    post.iter().map(|v| v / total).collect()
}

/// Random graph on `p` nodes with edge probability `density` and weights
/// uniform on `±[lo, hi]`.
pub fn random_graph<R: Rng>(p: usize, density: f64, lo: f64, hi: f64, rng: &mut R) -> GraphSpec {
    let mut edges = Vec::new();
    for s in 0..p {
        for t in s + 1..p {
            if rng.gen_bool(density) {
                let w = rng.gen_range(lo..hi) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                edges.push((s, t, w));
            }
        }
    }
    GraphSpec::new(p, edges).unwrap()
}

/// Raw data of a weighted ℓ1 logistic problem.
#[derive(Clone, Debug)]
pub struct RawProblem {
    pub design: Vec<f64>,
    pub cols: usize,
    pub response: Vec<i8>,
    pub weights: Vec<f64>,
    pub offsets: Vec<f64>,
    pub lambda: f64,
    pub intercept: bool,
}

impl RawProblem {
    pub fn rows(&self) -> usize {
        self.response.len()
    }

    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let rows = rng.gen_range(5..=40);
        let cols = rng.gen_range(1..=10);
        let design: Vec<f64> = (0..rows * cols)
            .map(|_| if rng.gen_bool(0.7) { if rng.gen_bool(0.5) { 1.0 } else { -1.0 } } else { rng.gen_range(-1.0..1.0) })
            .collect();
        let response = (0..rows).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
        let weights = (0..rows).map(|_| if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.1..2.0) }).collect();
        let offsets = (0..rows).map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
        RawProblem {
            design,
            cols,
            response,
            weights,
            offsets,
            lambda: rng.gen_range(0.01..0.3),
            intercept: rng.gen_bool(0.3),
        }
    }

    fn eta(&self, theta: &[f64], b: f64, i: usize) -> f64 {
        let row = &self.design[i * self.cols..(i + 1) * self.cols];
        self.offsets[i] + b + 2.0 * row.iter().zip(theta).map(|(x, t)| x * t).sum::<f64>()
    }

    /// `(1/W) Σ w nll + λ‖θ‖₁`.
    pub fn objective(&self, theta: &[f64], b: f64) -> f64 {
        let w_total: f64 = self.weights.iter().sum();
        let loss: f64 = (0..self.rows())
            .map(|i| {
                let e = self.eta(theta, b, i);
                let y = if self.response[i] == 1 { 1.0 } else { 0.0 };
                // log(1 + e^η) − yη, stable in both tails
                let sp = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
                self.weights[i] * (sp - y * e)
            })
            .sum();
        loss / w_total + self.lambda * theta.iter().map(|t| t.abs()).sum::<f64>()
    }

    fn gradient(&self, theta: &[f64], b: f64) -> (Vec<f64>, f64) {
        let w_total: f64 = self.weights.iter().sum();
        let mut g = vec![0.0; self.cols];
        let mut g0 = 0.0;
        for i in 0..self.rows() {
            let e = self.eta(theta, b, i);
            let y = if self.response[i] == 1 { 1.0 } else { 0.0 };
            let r = self.weights[i] * (1.0 / (1.0 + (-e).exp()) - y) / w_total;
            g0 += r;
            for j in 0..self.cols {
                g[j] += 2.0 * r * self.design[i * self.cols + j];
            }
        }
        (g, g0)
    }

    /// Accelerated proximal gradient with restarts, run to a fixed budget.
    pub fn proximal_gradient(&self, iterations: usize) -> (Vec<f64>, f64) {
        let w_total: f64 = self.weights.iter().sum();
        // loss curvature is at most (1/4)(1/W) Σ w ‖(2x, 1)‖²
        let lip: f64 = (0..self.rows())
            .map(|i| {
                let row = &self.design[i * self.cols..(i + 1) * self.cols];
                self.weights[i] * (4.0 * row.iter().map(|x| x * x).sum::<f64>() + if self.intercept { 1.0 } else { 0.0 })
            })
            .sum::<f64>()
            / w_total
            / 4.0;
        let step = 1.0 / lip.max(1e-12);
        let soft = |z: f64, g: f64| if z > g { z - g } else if z < -g { z + g } else { 0.0 };
        let mut x = vec![0.0; self.cols];
        let mut b = 0.0;
        let mut y = x.clone();
        let mut yb = 0.0;
        let mut t = 1.0f64;
        let mut last = self.objective(&x, b);
        for _ in 0..iterations {
            let (g, g0) = self.gradient(&y, yb);
            let nx: Vec<f64> = y.iter().zip(&g).map(|(v, gj)| soft(v - step * gj, step * self.lambda)).collect();
            let nb = if self.intercept { yb - step * g0 } else { 0.0 };
            let obj = self.objective(&nx, nb);
            let nt = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            if obj > last {
                // restart momentum
                t = 1.0;
                y = x.clone();
                yb = b;
                continue;
            }
            let mom = (t - 1.0) / nt;
            y = nx.iter().zip(&x).map(|(a, o)| a + mom * (a - o)).collect();
            yb = nb + mom * (nb - b);
            x = nx;
            b = nb;
            t = nt;
            last = obj;
        }
        (x, b)
    }
}
