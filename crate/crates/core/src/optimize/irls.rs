//! Logistic regression by iteratively reweighted least squares.

use super::linalg::cholesky_solve;
use crate::scalar::{softplus, Real};

#[derive(Debug, Clone)]
pub struct LogisticOptions<T> {
    /// Convergence threshold on the largest absolute coefficient change.
    pub tol: T,
    pub max_iterations: usize,
    /// Coefficients are confined to `[-bound, bound]`.
    pub bound: T,
}

impl<T: Real> Default for LogisticOptions<T> {
    fn default() -> Self {
        LogisticOptions { tol: T::lit(1e-8), max_iterations: 200, bound: T::lit(30.0) }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFit<T> {
    pub coef: Vec<T>,
    pub log_likelihood: T,
    pub iterations: usize,
    pub converged: bool,
    /// Some coefficient hit the bound (separation or a degenerate response).
    pub clamped: bool,
}

/// Bernoulli log-likelihood of `y` under coefficients `beta`.
pub fn log_likelihood<T: Real>(x: &[T], ncols: usize, y: &[u8], beta: &[T]) -> T {
    let mut ll = T::zero();
    for (row, &yi) in x.chunks_exact(ncols).zip(y) {
        let eta = dot(row, beta);
        ll += if yi == 1 { eta } else { T::zero() } - softplus(eta);
    }
    ll
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

/// Fits `logit P(y = 1) = x·β` where `x` is row-major with `ncols`
/// columns, column 0 being the intercept. Coefficients with
/// `free[j] == false` are held at zero.
///
/// A response that is constant yields intercept `±bound` with every
/// slope at 0 and `clamped = true`.
pub fn fit_logistic<T: Real>(
    x: &[T],
    ncols: usize,
    y: &[u8],
    free: &[bool],
    opts: &LogisticOptions<T>,
) -> LogisticFit<T> {
    assert_eq!(x.len(), ncols * y.len(), "design shape");
    assert_eq!(free.len(), ncols);
    let ones = y.iter().filter(|&&v| v == 1).count();
    if y.is_empty() || ones == 0 || ones == y.len() {
        let mut coef = vec![T::zero(); ncols];
        coef[0] = if ones == 0 { -opts.bound } else { opts.bound };
        return LogisticFit {
            log_likelihood: log_likelihood(x, ncols, y, &coef),
            coef,
            iterations: 0,
            converged: true,
            clamped: true,
        };
    }

    // Columns that are identically zero carry no information.
    let active: Vec<usize> = (0..ncols)
        .filter(|&j| free[j] && x.chunks_exact(ncols).any(|r| r[j] != T::zero()))
        .collect();
    let k = active.len();
    let mut beta = vec![T::zero(); ncols];
    let mut ll = log_likelihood(x, ncols, y, &beta);
    let mut clamped = false;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut grad = vec![T::zero(); k];
        let mut hess = vec![T::zero(); k * k];
        for (row, &yi) in x.chunks_exact(ncols).zip(y) {
            let eta = dot(row, &beta);
            let p = T::one() / (T::one() + (-eta).exp());
            let w = p * (T::one() - p);
            let resid = T::from_u8(yi).unwrap() - p;
            for (a, &ja) in active.iter().enumerate() {
                grad[a] += row[ja] * resid;
                for (b, &jb) in active.iter().enumerate().take(a + 1) {
                    hess[a * k + b] += w * row[ja] * row[jb];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                hess[b * k + a] = hess[a * k + b];
            }
        }
        let step = match cholesky_solve(&hess, &grad, k) {
            Some(s) => s,
            None => {
                let scale = (0..k).map(|i| hess[i * k + i]).fold(T::zero(), T::max) + T::one();
                let mut ridged = hess.clone();
                for i in 0..k {
                    ridged[i * k + i] += T::lit(1e-8) * scale;
                }
                match cholesky_solve(&ridged, &grad, k) {
                    Some(s) => s,
                    None => break,
                }
            }
        };

        // Damped Newton: halve until the likelihood does not drop.
        let mut t = T::one();
        let mut candidate = beta.clone();
        let mut cand_ll = ll;
        for _ in 0..30 {
            candidate = beta.clone();
            for (a, &j) in active.iter().enumerate() {
                candidate[j] = (beta[j] + t * step[a]).max(-opts.bound).min(opts.bound);
            }
            cand_ll = log_likelihood(x, ncols, y, &candidate);
            if cand_ll >= ll - T::lit(1e-12) * ll.abs().max(T::one()) {
                break;
            }
            t *= T::lit(0.5);
        }
        let change = active
            .iter()
            .map(|&j| (candidate[j] - beta[j]).abs())
            .fold(T::zero(), T::max);
        beta = candidate;
        ll = cand_ll;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    for &j in &active {
        if beta[j].abs() >= opts.bound {
            clamped = true;
        }
    }
    LogisticFit { coef: beta, log_likelihood: ll, iterations, converged, clamped }
}
