//! Weighted, offset-aware l1-penalized logistic regression.
//!
//! The linear predictor for row `i` is `offset_i + b + 2 x_iᵀθ` (the intercept
//! `b` is off unless requested), with response `1(y_i = +1)`. The solver is a
//! proximal Newton method: each outer iteration minimizes the penalized
//! quadratic model by cyclic coordinate descent with soft-thresholding and
//! backtracks along the resulting direction. If the line search stalls, one
//! sweep on the quadratic majorizer (curvature bound `1/4` per unit weight)
//! is taken instead, so every iteration decreases the objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LogRegProblem {
    design: Vec<f64>,
    rows: usize,
    cols: usize,
    response: Vec<f64>,
    weights: Vec<f64>,
    offsets: Vec<f64>,
    total_weight: f64,
    pub lambda: f64,
    pub intercept: bool,
    /// Constant added to the reported objective (penalty on coefficients held fixed).
    pub fixed_penalty: f64,
}

impl LogRegProblem {
    /// `design` is row-major with `cols` columns; `response` entries are `±1`.
    pub fn new(
        design: Vec<f64>,
        cols: usize,
        response: Vec<i8>,
        weights: Vec<f64>,
        offsets: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let rows = response.len();
        if design.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows}×{cols} design"),
                found: format!("{} entries", design.len()),
            });
        }
        if weights.len() != rows || offsets.len() != rows {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows} weights and offsets"),
                found: format!("{} weights, {} offsets", weights.len(), offsets.len()),
            });
        }
        if response.iter().any(|&y| y != 1 && y != -1) {
            return Err(Error::MalformedSpins("response must be -1 or +1".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("sample weights must be finite and nonnegative".into()));
        }
        if offsets.iter().chain(&design).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("design and offsets must be finite".into()));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let total_weight: f64 = weights.iter().sum();
        if total_weight <= 0.0 {
            return Err(Error::DegenerateWeights);
        }
        Ok(LogRegProblem {
            design,
            rows,
            cols,
            response: response.iter().map(|&y| if y == 1 { 1.0 } else { 0.0 }).collect(),
            weights,
            offsets,
            total_weight,
            lambda,
            intercept: false,
            fixed_penalty: 0.0,
        })
    }

    /// Unit weights, zero offsets.
    pub fn unweighted(design: Vec<f64>, cols: usize, response: Vec<i8>, lambda: f64) -> Result<Self> {
        let m = response.len();
        Self::new(design, cols, response, vec![1.0; m], vec![0.0; m], lambda)
    }

    pub fn with_intercept(mut self, on: bool) -> Self {
        self.intercept = on;
        self
    }

    pub fn with_fixed_penalty(mut self, constant: f64) -> Self {
        self.fixed_penalty = constant;
        self
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut p = self.clone();
        p.lambda = lambda;
        p
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    fn x(&self, i: usize, j: usize) -> f64 {
        self.design[i * self.cols + j]
    }

    fn linear_predictor(&self, theta: &[f64], intercept: f64) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                let row = &self.design[i * self.cols..(i + 1) * self.cols];
                self.offsets[i] + intercept + 2.0 * row.iter().zip(theta).map(|(x, t)| x * t).sum::<f64>()
            })
            .collect()
    }

    /// Weighted mean negative log-likelihood (no penalty).
    pub fn loss(&self, theta: &[f64], intercept: f64) -> f64 {
        let eta = self.linear_predictor(theta, intercept);
        self.loss_from_eta(&eta)
    }

    fn loss_from_eta(&self, eta: &[f64]) -> f64 {
        eta.iter()
            .zip(&self.response)
            .zip(&self.weights)
            .map(|((&e, &y), &w)| if w == 0.0 { 0.0 } else { w * nll(y, e) })
            .sum::<f64>()
            / self.total_weight
    }

    /// Full objective: loss + `λ‖θ‖₁` + the fixed penalty constant.
    pub fn objective(&self, theta: &[f64], intercept: f64) -> f64 {
        self.loss(theta, intercept) + self.lambda * l1(theta) + self.fixed_penalty
    }

    /// Gradient of the loss with respect to `θ`.
    pub fn gradient(&self, theta: &[f64], intercept: f64) -> Vec<f64> {
        let eta = self.linear_predictor(theta, intercept);
        let resid: Vec<f64> = eta
            .iter()
            .zip(&self.response)
            .zip(&self.weights)
            .map(|((&e, &y), &w)| w * (sigmoid(e) - y))
            .collect();
        (0..self.cols)
            .map(|j| 2.0 * (0..self.rows).map(|i| resid[i] * self.x(i, j)).sum::<f64>() / self.total_weight)
            .collect()
    }

    /// Max-norm KKT violation of `(θ, b)`.
    pub fn kkt_residual(&self, theta: &[f64], intercept: f64) -> f64 {
        let grad = self.gradient(theta, intercept);
        let mut worst = kkt_violation(&grad, theta, self.lambda);
        if self.intercept {
            let eta = self.linear_predictor(theta, intercept);
            let g0 = eta
                .iter()
                .zip(&self.response)
                .zip(&self.weights)
                .map(|((&e, &y), &w)| w * (sigmoid(e) - y))
                .sum::<f64>()
                / self.total_weight;
            worst = worst.max(g0.abs());
        }
        worst
    }
}

fn kkt_violation(grad: &[f64], theta: &[f64], lambda: f64) -> f64 {
    grad.iter()
        .zip(theta)
        .map(|(&g, &t)| {
            if t != 0.0 {
                (g + lambda * t.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

#[inline]
pub(crate) fn sigmoid(e: f64) -> f64 {
    if e >= 0.0 {
        1.0 / (1.0 + (-e).exp())
    } else {
        let z = e.exp();
        z / (1.0 + z)
    }
}

/// `log(1 + e^η) - y η` for `y ∈ {0, 1}`.
#[inline]
pub(crate) fn nll(y: f64, eta: f64) -> f64 {
    softplus(eta) - y * eta
}

#[inline]
fn softplus(e: f64) -> f64 {
    if e > 0.0 {
        e + (-e).exp().ln_1p()
    } else {
        e.exp().ln_1p()
    }
}

pub(crate) fn l1(theta: &[f64]) -> f64 {
    theta.iter().map(|t| t.abs()).sum()
}

#[inline]
fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverOptions {
    /// KKT residual at which the fit is declared converged.
    pub tolerance: f64,
    /// Cap on outer Newton iterations.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tolerance: 1e-7, max_iter: 100_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogRegSolution {
    /// Coefficients on the θ scale (the predictor uses `2θ`).
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LogRegSolution {
    pub fn active_count(&self) -> usize {
        self.coefficients.iter().filter(|c| **c != 0.0).count()
    }
}

/// Iterate of the proximal Newton solver with cached row quantities.
struct NewtonState<'a> {
    prob: &'a LogRegProblem,
    theta: Vec<f64>,
    intercept: f64,
    eta: Vec<f64>,
    mu: Vec<f64>,
    loss: f64,
    // Σ w x² / W per column; the loss curvature along coordinate j is at most this
    col_scale: Vec<f64>,
}

impl<'a> NewtonState<'a> {
    fn new(prob: &'a LogRegProblem, theta: Vec<f64>, intercept: f64) -> Self {
        let eta = prob.linear_predictor(&theta, intercept);
        let col_scale = (0..prob.cols)
            .map(|j| {
                (0..prob.rows).map(|i| prob.weights[i] * prob.x(i, j).powi(2)).sum::<f64>() / prob.total_weight
            })
            .collect();
        let mut s = NewtonState { prob, theta, intercept, eta, mu: Vec::new(), loss: 0.0, col_scale };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        self.mu = self.eta.iter().map(|&e| sigmoid(e)).collect();
        self.loss = self.prob.loss_from_eta(&self.eta);
    }

    fn objective(&self) -> f64 {
        self.loss + self.prob.lambda * l1(&self.theta)
    }

    /// Weighted residuals `w (μ − y) / W`.
    fn residuals(&self) -> Vec<f64> {
        let p = self.prob;
        (0..p.rows).map(|i| p.weights[i] * (self.mu[i] - p.response[i]) / p.total_weight).collect()
    }

    fn gradient(&self) -> (Vec<f64>, f64) {
        let p = self.prob;
        let r = self.residuals();
        let mut g = vec![0.0; p.cols];
        for (i, ri) in r.iter().enumerate() {
            if *ri != 0.0 {
                for (j, gj) in g.iter_mut().enumerate() {
                    *gj += 2.0 * ri * p.x(i, j);
                }
            }
        }
        (g, r.iter().sum())
    }

    fn kkt(&self) -> f64 {
        let (g, g0) = self.gradient();
        let mut worst = kkt_violation(&g, &self.theta, self.prob.lambda);
        if self.prob.intercept {
            worst = worst.max(g0.abs());
        }
        worst
    }

    /// Minimizes the penalized second-order model around the current iterate
    /// by cyclic coordinate descent. Returns the direction `(δθ, δb)`.
    fn newton_direction(&self, grad: &[f64], g0: f64, tolerance: f64) -> (Vec<f64>, f64) {
        let p = self.prob;
        let k = p.cols;
        let h: Vec<f64> =
            (0..p.rows).map(|i| p.weights[i] * self.mu[i] * (1.0 - self.mu[i]) / p.total_weight).collect();
        let diag: Vec<f64> = (0..k)
            .map(|j| {
                let c = (0..p.rows).map(|i| h[i] * 4.0 * p.x(i, j).powi(2)).sum::<f64>();
                c.max(1e-10 * 4.0 * self.col_scale[j])
            })
            .collect();
        let h0 = h.iter().sum::<f64>().max(1e-10);
        let mut delta = vec![0.0; k];
        let mut delta0 = 0.0;
        // u_i = change of the linear predictor on row i
        let mut u = vec![0.0; p.rows];
        for _ in 0..1000 {
            let mut biggest = 0.0f64;
            if p.intercept {
                let g = g0 + h.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
                let step = -g / h0;
                if step != 0.0 {
                    delta0 += step;
                    u.iter_mut().for_each(|v| *v += step);
                    biggest = biggest.max(step.abs() * h0);
                }
            }
            for j in 0..k {
                if self.col_scale[j] == 0.0 {
                    continue;
                }
                let g = grad[j] + (0..p.rows).map(|i| h[i] * 2.0 * p.x(i, j) * u[i]).sum::<f64>();
                let old = self.theta[j] + delta[j];
                let new = soft_threshold(old - g / diag[j], p.lambda / diag[j]);
                let step = new - old;
                if step != 0.0 {
                    delta[j] += step;
                    for i in 0..p.rows {
                        u[i] += 2.0 * step * p.x(i, j);
                    }
                    biggest = biggest.max(step.abs() * diag[j]);
                }
            }
            if biggest <= tolerance {
                break;
            }
        }
        (delta, delta0)
    }

    fn moved(&self, delta: &[f64], delta0: f64, t: f64) -> (Vec<f64>, f64, Vec<f64>) {
        let p = self.prob;
        let theta: Vec<f64> = self.theta.iter().zip(delta).map(|(a, d)| a + t * d).collect();
        let intercept = self.intercept + t * delta0;
        let eta = p.linear_predictor(&theta, intercept);
        (theta, intercept, eta)
    }

    /// Backtracking line search along the Newton direction. Returns false
    /// when no sufficient decrease was found.
    fn newton_step(&mut self, grad: &[f64], g0: f64, tolerance: f64) -> bool {
        let p = self.prob;
        let (delta, delta0) = self.newton_direction(grad, g0, tolerance);
        if delta.iter().all(|d| *d == 0.0) && delta0 == 0.0 {
            return false;
        }
        let old_obj = self.objective();
        let l1_old = l1(&self.theta);
        let l1_new: f64 = self.theta.iter().zip(&delta).map(|(a, d)| (a + d).abs()).sum();
        let decrease = grad.iter().zip(&delta).map(|(g, d)| g * d).sum::<f64>()
            + g0 * delta0
            + p.lambda * (l1_new - l1_old);
        if decrease >= 0.0 {
            return false;
        }
        let mut t = 1.0;
        for _ in 0..40 {
            let (theta, intercept, eta) = self.moved(&delta, delta0, t);
            let obj = p.loss_from_eta(&eta) + p.lambda * l1(&theta);
            if obj <= old_obj + 1e-4 * t * decrease {
                self.theta = theta;
                self.intercept = intercept;
                self.eta = eta;
                self.refresh();
                return true;
            }
            t *= 0.5;
        }
        false
    }

    /// One cyclic sweep of majorize-minimize updates using the `1/4`
    /// curvature bound; never increases the objective.
    fn majorizer_sweep(&mut self) {
        let p = self.prob;
        if p.intercept {
            let g: f64 = self.residuals().iter().sum();
            let sw = p.weights.iter().sum::<f64>() / p.total_weight;
            let step = -4.0 * g / sw;
            self.eta.iter_mut().for_each(|e| *e += step);
            self.intercept += step;
            self.refresh();
        }
        for j in 0..p.cols {
            let bound = self.col_scale[j];
            if bound == 0.0 {
                self.theta[j] = 0.0;
                continue;
            }
            let g = 2.0 * self.residuals().iter().enumerate().map(|(i, r)| r * p.x(i, j)).sum::<f64>();
            let old = self.theta[j];
            let new = soft_threshold(old - g / bound, p.lambda / bound);
            if new != old {
                for i in 0..p.rows {
                    self.eta[i] += 2.0 * (new - old) * p.x(i, j);
                }
                self.theta[j] = new;
                self.refresh();
            }
        }
    }
}

/// Minimizes `(1/W) Σ w_i nll(y_i, offset_i + 2 x_iᵀθ) + λ‖θ‖₁`.
///
/// Proximal Newton: each iteration minimizes the penalized quadratic model by
/// coordinate descent and backtracks on the true objective, falling back to
/// a majorizer sweep if the line search stalls. Failure to reach the
/// tolerance within `max_iter` iterations is reported through
/// `converged = false`, not as an error.
pub fn fit_l1_logistic(
    problem: &LogRegProblem,
    options: &SolverOptions,
    warm_start: Option<&[f64]>,
) -> Result<LogRegSolution> {
    let k = problem.cols;
    let theta0 = match warm_start {
        Some(w) if w.len() == k => w.to_vec(),
        Some(w) => {
            return Err(Error::ShapeMismatch {
                expected: format!("{k} warm-start coefficients"),
                found: format!("{}", w.len()),
            })
        }
        None => vec![0.0; k],
    };
    // Exact zeros whenever the null model already satisfies the KKT conditions.
    if k > 0 {
        let (intercept, grad) = null_model(problem)?;
        if grad.iter().all(|g| g.abs() <= problem.lambda) {
            let state = NewtonState::new(problem, vec![0.0; k], intercept);
            let kkt = state.kkt();
            return Ok(LogRegSolution {
                converged: kkt <= options.tolerance,
                objective: state.objective() + problem.fixed_penalty,
                coefficients: state.theta,
                intercept,
                kkt_residual: kkt,
                iterations: 0,
            });
        }
    }
    let mut state = NewtonState::new(problem, theta0, 0.0);
    let mut iterations = 0;
    let mut kkt = state.kkt();
    while kkt > options.tolerance && iterations < options.max_iter {
        let (grad, g0) = state.gradient();
        let inner_tol = 0.1 * options.tolerance;
        if !state.newton_step(&grad, if problem.intercept { g0 } else { 0.0 }, inner_tol) {
            state.majorizer_sweep();
        }
        iterations += 1;
        kkt = state.kkt();
    }

    let objective = state.objective() + problem.fixed_penalty;
    Ok(LogRegSolution {
        converged: kkt <= options.tolerance,
        coefficients: state.theta,
        intercept: state.intercept,
        objective,
        kkt_residual: kkt,
        iterations,
    })
}

/// Smallest `λ` whose solution is identically zero.
pub fn lambda_max(problem: &LogRegProblem) -> Result<f64> {
    let (_, grad) = null_model(problem)?;
    Ok(grad.iter().map(|g| g.abs()).fold(0.0, f64::max))
}

/// Intercept of the coefficient-free fit and the coefficient gradient there.
fn null_model(problem: &LogRegProblem) -> Result<(f64, Vec<f64>)> {
    let intercept = if problem.intercept {
        let mut null = problem.with_lambda(0.0);
        null.cols = 0;
        null.design = Vec::new();
        fit_l1_logistic(&null, &SolverOptions { tolerance: 1e-12, max_iter: 10_000 }, None)?.intercept
    } else {
        0.0
    };
    Ok((intercept, problem.gradient(&vec![0.0; problem.cols], intercept)))
}

/// Solutions along a descending `λ` grid, optionally warm-started.
pub fn lambda_path(
    problem: &LogRegProblem,
    grid: &[f64],
    warm_starting: bool,
    options: &SolverOptions,
) -> Result<Vec<LogRegSolution>> {
    if grid.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("lambda grid must be sorted descending".into()));
    }
    let mut out: Vec<LogRegSolution> = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let prob = problem.with_lambda(lambda);
        let warm = if warm_starting { out.last().map(|s| s.coefficients.as_slice()) } else { None };
        out.push(fit_l1_logistic(&prob, options, warm)?);
    }
    Ok(out)
}
