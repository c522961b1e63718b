//! Laplace approximation around the posterior mode, used to place starting
//! points and to seed the proposal covariance before adaptation.

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::condition::ArmijoCondition;
use argmin::solver::linesearch::BacktrackingLineSearch;
use argmin::solver::quasinewton::LBFGS;

use super::model::LogDensity;

/// Step for the central-difference gradient.
const GRAD_STEP: f64 = 1e-5;
/// Step for the second-difference Hessian.
const HESS_STEP: f64 = 1e-3;
/// Cost reported where the density cannot be evaluated.
const INFEASIBLE: f64 = 1e30;
/// Added to the Hessian diagonal; caps every Laplace sd at 2.
const RIDGE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct Laplace {
    pub mode: Vec<f64>,
    /// Row-major covariance, `dim * dim`.
    pub cov: Vec<f64>,
}

struct NegLogDensity<'a, T: ?Sized>(&'a T);

impl<T: LogDensity + ?Sized> NegLogDensity<'_, T> {
    fn eval(&self, x: &[f64]) -> f64 {
        let v = -self.0.log_density(x);
        if v.is_finite() {
            v
        } else {
            INFEASIBLE
        }
    }
}

impl<T: LogDensity + ?Sized> CostFunction for NegLogDensity<'_, T> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        Ok(self.eval(p))
    }
}

impl<T: LogDensity + ?Sized> Gradient for NegLogDensity<'_, T> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, p: &Vec<f64>) -> Result<Vec<f64>, argmin::core::Error> {
        let mut x = p.clone();
        let mut g = vec![0.0; p.len()];
        for j in 0..p.len() {
            x[j] = p[j] + GRAD_STEP;
            let up = self.eval(&x);
            x[j] = p[j] - GRAD_STEP;
            let down = self.eval(&x);
            x[j] = p[j];
            g[j] = (up - down) / (2.0 * GRAD_STEP);
        }
        Ok(g)
    }
}

/// Maximises `target` from `start` with L-BFGS. Returns `start` unchanged if
/// the optimiser fails or ends somewhere worse.
pub fn find_mode<T: LogDensity + ?Sized>(target: &T, start: &[f64], max_iters: u64) -> Vec<f64> {
    let problem = NegLogDensity(target);
    let solver = ArmijoCondition::new(1e-4)
        .and_then(|c| BacktrackingLineSearch::new(c).rho(0.5))
        .and_then(|ls| LBFGS::new(ls, 7).with_tolerance_grad(1e-6))
        .and_then(|s| s.with_tolerance_cost(1e-12));
    let Ok(solver) = solver else {
        return start.to_vec();
    };
    let run = Executor::new(problem, solver)
        .configure(|s| s.param(start.to_vec()).max_iters(max_iters))
        .run();
    match run {
        Ok(res) => {
            log::debug!("mode search: {:?} after {} iterations", res.state().get_termination_status(), res.state().get_iter());
            let best = res.state().get_best_param().cloned().unwrap_or_else(|| start.to_vec());
            if target.log_density(&best) >= target.log_density(start) {
                best
            } else {
                start.to_vec()
            }
        }
        Err(e) => {
            log::debug!("mode search failed: {e}");
            start.to_vec()
        }
    }
}

/// Negative Hessian of `target` at `x` by second differences, symmetrised.
fn neg_hessian<T: LogDensity + ?Sized>(target: &T, x: &[f64]) -> Vec<f64> {
    let dim = x.len();
    let f = NegLogDensity(target);
    let h = HESS_STEP;
    let f0 = f.eval(x);
    let mut p = x.to_vec();
    let mut plus = vec![0.0; dim];
    let mut minus = vec![0.0; dim];
    for j in 0..dim {
        p[j] = x[j] + h;
        plus[j] = f.eval(&p);
        p[j] = x[j] - h;
        minus[j] = f.eval(&p);
        p[j] = x[j];
    }
    let mut hess = vec![0.0; dim * dim];
    for i in 0..dim {
        hess[i * dim + i] = (plus[i] - 2.0 * f0 + minus[i]) / (h * h);
        for j in 0..i {
            p[i] = x[i] + h;
            p[j] = x[j] + h;
            let pp = f.eval(&p);
            p[i] = x[i] - h;
            p[j] = x[j] - h;
            let mm = f.eval(&p);
            p[i] = x[i];
            p[j] = x[j];
            // f(x+hi+hj) + f(x-hi-hj) - f(x+hi) - f(x-hi) - f(x+hj) - f(x-hj) + 2 f(x)
            let v = (pp + mm - plus[i] - minus[i] - plus[j] - minus[j] + 2.0 * f0) / (2.0 * h * h);
            hess[i * dim + j] = v;
            hess[j * dim + i] = v;
        }
    }
    hess
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
fn spd_inverse(a: &[f64], dim: usize) -> Option<Vec<f64>> {
    let l = super::sampler::cholesky(a, dim, 0.0)?;
    // Solve L L^T X = I column by column.
    let mut inv = vec![0.0; dim * dim];
    let mut y = vec![0.0; dim];
    for c in 0..dim {
        for i in 0..dim {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * dim + k] * y[k];
            }
            y[i] = s / l[i * dim + i];
        }
        for i in (0..dim).rev() {
            let mut s = y[i];
            for k in i + 1..dim {
                s -= l[k * dim + i] * inv[k * dim + c];
            }
            inv[i * dim + c] = s / l[i * dim + i];
        }
    }
    Some(inv)
}

/// Mode plus the inverse of the ridged negative Hessian there. Directions
/// where the Hessian is not positive get more ridge until it factors.
pub fn laplace<T: LogDensity + ?Sized>(target: &T, start: &[f64], max_iters: u64) -> Laplace {
    let dim = start.len();
    let mode = find_mode(target, start, max_iters);
    let mut hess = neg_hessian(target, &mode);
    if hess.iter().any(|v| !v.is_finite()) {
        hess = vec![0.0; dim * dim];
    }
    let mut ridge = RIDGE;
    loop {
        let mut a = hess.clone();
        for j in 0..dim {
            a[j * dim + j] += ridge;
        }
        if let Some(cov) = spd_inverse(&a, dim) {
            return Laplace { mode, cov };
        }
        ridge *= 4.0;
        if ridge > 1e12 {
            let mut cov = vec![0.0; dim * dim];
            for j in 0..dim {
                cov[j * dim + j] = 1.0 / RIDGE;
            }
            return Laplace { mode, cov };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::GaussianTarget;

    #[test]
    fn gaussian_mode_and_covariance_are_exact() {
        let t = GaussianTarget { mean: vec![1.0, -2.0, 0.5], sd: vec![0.5, 1.0, 0.2] };
        let lp = laplace(&t, &[0.0, 0.0, 0.0], 200);
        for j in 0..3 {
            assert!((lp.mode[j] - t.mean[j]).abs() < 1e-4, "{:?}", lp.mode);
            // 1 / (1/sd^2 + ridge)
            let expect = 1.0 / (1.0 / (t.sd[j] * t.sd[j]) + RIDGE);
            assert!((lp.cov[j * 3 + j] - expect).abs() < 1e-4 * expect);
        }
        assert!(lp.cov[1].abs() < 1e-6);
    }

    #[test]
    fn inverse_round_trips() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let inv = spd_inverse(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
