//! The ℓ1-penalized logistic solver on a toy design: the critical λ above
//! which every coefficient vanishes, and a warm-started path below it.

use isingmis::logreg::{fit_l1_logistic, lambda_max, lambda_path, LogRegProblem, SolverOptions};
use rand::Rng;

fn main() -> isingmis::Result<()> {
    let mut rng = isingmis::ising::RngSeed(4).rng();
    let (rows, cols) = (200, 5);
    let truth = [0.8, -0.5, 0.0, 0.0, 0.3];
    let mut design = Vec::with_capacity(rows * cols);
    let mut response = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x: Vec<f64> = (0..cols).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let eta: f64 = 2.0 * x.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>();
        response.push(if rng.gen_bool(1.0 / (1.0 + (-eta).exp())) { 1 } else { -1 });
        design.extend(x);
    }
    let problem = LogRegProblem::unweighted(design, cols, response, 0.0)?;
    let lmax = lambda_max(&problem)?;
    let at_max = fit_l1_logistic(&problem.with_lambda(lmax), &SolverOptions::default(), None)?;
    println!("lambda_max = {lmax:.4}; coefficients there: {:?}", at_max.coefficients);

    let grid: Vec<f64> = (1..=6).map(|k| lmax / 2f64.powi(k)).collect();
    for (l, sol) in grid.iter().zip(lambda_path(&problem, &grid, true, &SolverOptions::default())?) {
        let c: Vec<String> = sol.coefficients.iter().map(|v| format!("{v:+.3}")).collect();
        println!("λ = {l:.4}  [{}]  kkt {:.1e}  iters {}", c.join(" "), sol.kkt_residual, sol.iterations);
    }
    Ok(())
}
