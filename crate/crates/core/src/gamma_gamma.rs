//! Gamma–Gamma observation model.
//!
//! Given a cell's latent rate `λ`, each replicate is `Gamma(shape α, rate λ)`;
//! `λ` itself is `Gamma(shape α0, rate ν)`. An equally expressed cell shares
//! one `λ` across both conditions, a differentially expressed cell draws one
//! per condition. Integrating `λ` out gives closed-form log densities.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::optimize::nelder_mead::{minimize, NelderMeadOptions};
use crate::scalar::Real;
use crate::simulate::seeded_rng;
use crate::special::ln_gamma;
use crate::states::StateMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgParams<T> {
    /// Shape of each observation given its rate.
    pub alpha: T,
    /// Shape of the rate prior.
    pub alpha0: T,
    /// Rate of the rate prior.
    pub nu: T,
}

impl<T: Real> GgParams<T> {
    pub fn new(alpha: T, alpha0: T, nu: T) -> Result<Self> {
        let p = GgParams { alpha, alpha0, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("alpha0", self.alpha0), ("nu", self.nu)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.alpha, self.alpha0, self.nu]
    }
}

/// Positive observations indexed by (gene, time, sample). The first `m`
/// samples of a cell belong to condition 1, the next `n` to condition 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionData<T> {
    genes: usize,
    times: usize,
    m: usize,
    n: usize,
    values: Vec<T>,
}

impl<T: Real> ExpressionData<T> {
    /// `values` is laid out gene-major, then time, then sample.
    pub fn new(genes: usize, times: usize, m: usize, n: usize, values: Vec<T>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("both conditions need at least one sample".into()));
        }
        if values.len() != genes * times * (m + n) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for {genes}x{times}x{}, got {}",
                genes * times * (m + n),
                m + n,
                values.len()
            )));
        }
        let k = m + n;
        for (i, &v) in values.iter().enumerate() {
            if !(v > T::zero()) || !v.is_finite() {
                let cell = i / k;
                return Err(Error::NonPositive { gene: cell / times, time: cell % times, value: v.to_f64_lossy() });
            }
        }
        Ok(ExpressionData { genes, times, m, n, values })
    }

    pub fn genes(&self) -> usize {
        self.genes
    }
    pub fn times(&self) -> usize {
        self.times
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn cell(&self, g: usize, t: usize) -> &[T] {
        let k = self.m + self.n;
        let start = (g * self.times + t) * k;
        &self.values[start..start + k]
    }

    /// Sufficient statistics of every cell, gene-major.
    pub fn cell_stats(&self) -> Vec<CellStats<T>> {
        (0..self.genes)
            .flat_map(|g| (0..self.times).map(move |t| (g, t)))
            .map(|(g, t)| CellStats::of(self.cell(g, t), self.m))
            .collect()
    }
}

/// What the closed-form density needs from one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats<T> {
    pub sum_log: T,
    pub sum_first: T,
    pub sum_second: T,
}

impl<T: Real> CellStats<T> {
    pub fn of(y: &[T], m: usize) -> Self {
        let sum_log = y.iter().fold(T::zero(), |a, v| a + v.ln());
        let sum_first = y[..m].iter().fold(T::zero(), |a, v| a + *v);
        let sum_second = y[m..].iter().fold(T::zero(), |a, v| a + *v);
        CellStats { sum_log, sum_first, sum_second }
    }
}

/// Per-parameter constants of the closed form, reused across cells.
#[derive(Debug, Clone, Copy)]
pub struct GgEvaluator<T> {
    theta: GgParams<T>,
    m: T,
    n: T,
    ln_k_pooled: T,
    ln_k_split: T,
}

impl<T: Real> GgEvaluator<T> {
    pub fn new(theta: GgParams<T>, m: usize, n: usize) -> Self {
        let GgParams { alpha, alpha0, nu } = theta;
        let (mf, nf) = (T::from_usize_lossy(m), T::from_usize_lossy(n));
        let ln_nu = nu.ln();
        let lg_a = ln_gamma(alpha);
        let lg_a0 = ln_gamma(alpha0);
        let ln_k = |count: T| alpha0 * ln_nu + ln_gamma(count * alpha + alpha0) - count * lg_a - lg_a0;
        GgEvaluator {
            theta,
            m: mf,
            n: nf,
            ln_k_pooled: ln_k(mf + nf),
            ln_k_split: ln_k(mf) + ln_k(nf),
        }
    }

    #[inline]
    pub fn log_density(&self, s: &CellStats<T>, state: u8) -> T {
        let GgParams { alpha, alpha0, nu } = self.theta;
        let base = (alpha - T::one()) * s.sum_log;
        if state == 0 {
            self.ln_k_pooled + base - ((self.m + self.n) * alpha + alpha0) * (nu + s.sum_first + s.sum_second).ln()
        } else {
            self.ln_k_split + base
                - (self.m * alpha + alpha0) * (nu + s.sum_first).ln()
                - (self.n * alpha + alpha0) * (nu + s.sum_second).ln()
        }
    }
}

/// Log density of one cell's `m + n` observations given its state.
pub fn log_density<T: Real>(y: &[T], state: u8, theta: &GgParams<T>, m: usize, n: usize) -> Result<T> {
    theta.validate()?;
    if y.len() != m + n || m == 0 || n == 0 {
        return Err(Error::DimensionMismatch(format!("{} observations for m={m}, n={n}", y.len())));
    }
    if let Some(&bad) = y.iter().find(|v| !(**v > T::zero()) || !v.is_finite()) {
        return Err(Error::NonPositive { gene: 0, time: 0, value: bad.to_f64_lossy() });
    }
    Ok(GgEvaluator::new(*theta, m, n).log_density(&CellStats::of(y, m), state.min(1)))
}

/// `Σ_{g,t} log f(y_gt | X_gt; Θ)` over precomputed cell statistics
/// (gene-major, matching [`ExpressionData::cell_stats`]).
pub fn log_likelihood_stats<T: Real>(
    stats: &[CellStats<T>],
    states: &StateMatrix,
    theta: &GgParams<T>,
    m: usize,
    n: usize,
) -> T {
    let ev = GgEvaluator::new(*theta, m, n);
    let times = states.times();
    let mut acc = T::zero();
    for (i, s) in stats.iter().enumerate() {
        acc += ev.log_density(s, states.get(i / times, i % times));
    }
    acc
}

pub fn log_likelihood<T: Real>(data: &ExpressionData<T>, states: &StateMatrix, theta: &GgParams<T>) -> Result<T> {
    check_dims(data, states)?;
    Ok(log_likelihood_stats(&data.cell_stats(), states, theta, data.m, data.n))
}

fn check_dims<T: Real>(data: &ExpressionData<T>, states: &StateMatrix) -> Result<()> {
    if data.genes != states.genes() || data.times != states.times() {
        return Err(Error::DimensionMismatch(format!(
            "data is {}x{}, states are {}x{}",
            data.genes,
            data.times,
            states.genes(),
            states.times()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ThetaFit<T> {
    pub theta: GgParams<T>,
    pub log_likelihood: T,
    pub start: GgParams<T>,
    pub start_log_likelihood: T,
}

/// Method-of-moments starting point from pooled within-condition moments.
pub fn moment_start<T: Real>(data: &ExpressionData<T>) -> GgParams<T> {
    let mut inv_alpha_sum = 0.0f64;
    let mut inv_alpha_count = 0usize;
    let mut rates = Vec::new();
    for g in 0..data.genes {
        for t in 0..data.times {
            let y = data.cell(g, t);
            for block in [&y[..data.m], &y[data.m..]] {
                let k = block.len() as f64;
                let mean = block.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / k;
                if block.len() >= 2 {
                    let var = block.iter().map(|v| (v.to_f64_lossy() - mean).powi(2)).sum::<f64>() / (k - 1.0);
                    inv_alpha_sum += var / (mean * mean);
                    inv_alpha_count += 1;
                }
                rates.push(mean);
            }
        }
    }
    let fallback = |v: f64, lo: f64, hi: f64, default: f64| if v.is_finite() && v > 0.0 { v.clamp(lo, hi) } else { default };
    let alpha = fallback(inv_alpha_count as f64 / inv_alpha_sum, 1e-2, 1e4, 1.0);
    // λ ≈ α / mean; match its first two moments to Gamma(α0, rate ν).
    let lambdas: Vec<f64> = rates.iter().map(|mu| alpha / mu).collect();
    let k = lambdas.len() as f64;
    let lm = lambdas.iter().sum::<f64>() / k;
    let lv = lambdas.iter().map(|l| (l - lm).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    let alpha0 = fallback(lm * lm / lv, 1e-2, 1e4, 1.0);
    let nu = fallback(lm / lv, 1e-6, 1e6, 1.0);
    GgParams { alpha: T::lit(alpha), alpha0: T::lit(alpha0), nu: T::lit(nu) }
}

const LOG_BOX: f64 = 30.0;
const THETA_RESTART_SEED: u64 = 0x6761_6d6d_6167_616d;

/// Maximizes `Σ_{g,t} log f(y_gt | X_gt; Θ)` over Θ by Nelder–Mead in
/// `(ln α, ln α0, ln ν)`, from the moment start plus two seeded restarts.
pub fn fit_theta<T: Real>(data: &ExpressionData<T>, states: &StateMatrix) -> Result<ThetaFit<T>> {
    fit_theta_seeded(data, states, THETA_RESTART_SEED)
}

/// [`fit_theta`] with an explicit seed for the restart jitter.
pub fn fit_theta_seeded<T: Real>(data: &ExpressionData<T>, states: &StateMatrix, seed: u64) -> Result<ThetaFit<T>> {
    check_dims(data, states)?;
    let stats = data.cell_stats();
    fit_theta_stats(&stats, states, data.m, data.n, moment_start(data), 2, seed)
}

/// Core of the Θ fit over precomputed cell statistics, starting at
/// `start` with `restarts` jittered extra starts.
pub fn fit_theta_stats<T: Real>(
    stats: &[CellStats<T>],
    states: &StateMatrix,
    m: usize,
    n: usize,
    start: GgParams<T>,
    restarts: usize,
    seed: u64,
) -> Result<ThetaFit<T>> {
    let objective = |z: &[T]| -> T {
        if z.iter().any(|v| v.abs() > T::lit(LOG_BOX)) {
            return T::infinity();
        }
        let theta = GgParams { alpha: z[0].exp(), alpha0: z[1].exp(), nu: z[2].exp() };
        -log_likelihood_stats(stats, states, &theta, m, n)
    };

    let mut start = start;
    let mut z0 = [start.alpha.ln(), start.alpha0.ln(), start.nu.ln()];
    let mut f0 = objective(&z0);
    if !f0.is_finite() {
        start = GgParams { alpha: T::one(), alpha0: T::one(), nu: T::one() };
        z0 = [T::zero(); 3];
        f0 = objective(&z0);
        if !f0.is_finite() {
            return Err(Error::Fitting("Gamma-Gamma objective is not finite at the start point".into()));
        }
    }

    let opts = NelderMeadOptions { step: T::lit(0.5), diameter_tol: T::lit(1e-6), max_iterations: 4000 };
    let mut best = minimize(objective, &z0, &opts);
    let mut rng = seeded_rng(seed, 0);
    for _ in 0..restarts {
        let jittered: Vec<T> = z0.iter().map(|v| *v + T::lit(rng.random_range(-1.0..1.0))).collect();
        let r = minimize(objective, &jittered, &opts);
        if r.value < best.value {
            best = r;
        }
    }
    // Restart from the winner with a small simplex to confirm the optimum.
    let polished = minimize(objective, &best.x, &NelderMeadOptions { step: T::lit(0.05), ..opts });
    if polished.value < best.value {
        best = polished;
    }

    let (theta, ll) = if best.value <= f0 {
        (GgParams { alpha: best.x[0].exp(), alpha0: best.x[1].exp(), nu: best.x[2].exp() }, -best.value)
    } else {
        (start, -f0)
    };
    Ok(ThetaFit { theta, log_likelihood: ll, start, start_log_likelihood: -f0 })
}

/// Draws one cell's `m + n` observations given its state.
pub fn sample_gene_obs<T: Real, R: Rng + ?Sized>(
    state: u8,
    theta: &GgParams<T>,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    theta.validate()?;
    let rate_prior = Gamma::new(theta.alpha0.to_f64_lossy(), 1.0 / theta.nu.to_f64_lossy())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let alpha = theta.alpha.to_f64_lossy();
    let mut out = Vec::with_capacity(m + n);
    let draw_block = |count: usize, lambda: f64, rng: &mut R, out: &mut Vec<T>| {
        let obs = Gamma::new(alpha, 1.0 / lambda).expect("positive rate");
        for _ in 0..count {
            // Guard against underflow to exactly zero at extreme rates.
            let v: f64 = obs.sample(rng).max(f64::MIN_POSITIVE);
            out.push(T::lit(v));
        }
    };
    let lambda1 = rate_prior.sample(rng).max(f64::MIN_POSITIVE);
    if state == 0 {
        draw_block(m + n, lambda1, rng, &mut out);
    } else {
        let lambda2 = rate_prior.sample(rng).max(f64::MIN_POSITIVE);
        draw_block(m, lambda1, rng, &mut out);
        draw_block(n, lambda2, rng, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent route: integrate the hierarchy over λ numerically, in
    /// u = ln λ with a fine trapezoid rule.
    fn hierarchy_density(y: &[f64], state: u8, th: &GgParams<f64>, m: usize) -> f64 {
        let lg = |x: f64| statrs::function::gamma::ln_gamma(x);
        let log_prior = |lam: f64| th.alpha0 * th.nu.ln() + (th.alpha0 - 1.0) * lam.ln() - th.nu * lam - lg(th.alpha0);
        let log_obs = |v: f64, lam: f64| th.alpha * lam.ln() + (th.alpha - 1.0) * v.ln() - lam * v - lg(th.alpha);
        let block = |ys: &[f64]| -> f64 {
            let (lo, hi, steps) = (-60.0f64, 15.0f64, 150_000usize);
            let h = (hi - lo) / steps as f64;
            let mut acc = 0.0;
            for i in 0..=steps {
                let u = lo + h * i as f64;
                let lam = u.exp();
                let lw = log_prior(lam) + u + ys.iter().map(|&v| log_obs(v, lam)).sum::<f64>();
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                acc += w * lw.exp();
            }
            acc * h
        };
        if state == 0 { block(y) } else { block(&y[..m]) * block(&y[m..]) }
    }

    #[test]
    fn closed_form_matches_quadrature_of_the_hierarchy() {
        let th = GgParams::new(10.0_f64, 0.9, 0.5).unwrap();
        let y = [1.0, 1.0];
        let d0 = log_density(&y, 0, &th, 1, 1).unwrap();
        let d1 = log_density(&y, 1, &th, 1, 1).unwrap();
        assert!(d0.is_finite() && d1.is_finite());
        let q0 = hierarchy_density(&y, 0, &th, 1).ln();
        let q1 = hierarchy_density(&y, 1, &th, 1).ln();
        assert!((d0 - q0).abs() < 1e-6, "{d0} vs {q0}");
        assert!((d1 - q1).abs() < 1e-6, "{d1} vs {q1}");
        assert!(((d1 - d0) - (q1 - q0)).abs() < 1e-6);
    }

    #[test]
    fn closed_form_matches_quadrature_on_a_grid() {
        let settings = [GgParams::new(10.0, 0.9, 0.5).unwrap(), GgParams::new(2.0, 3.0, 1.5).unwrap()];
        for th in &settings {
            for i in 0..20 {
                let y1 = 0.05 + 0.37 * i as f64;
                let y2 = 0.1 + 0.21 * ((i * 7) % 20) as f64;
                let y = [y1, y2];
                for state in [0u8, 1] {
                    let d = log_density(&y, state, th, 1, 1).unwrap().exp();
                    let q = hierarchy_density(&y, state, th, 1);
                    assert!(((d - q) / q).abs() < 1e-6, "state {state} y {y:?}: {d} vs {q}");
                }
            }
        }
    }

    #[test]
    fn pooled_density_is_symmetric_in_the_blocks() {
        let th = GgParams::new(4.0_f64, 1.3, 0.7).unwrap();
        let y = [0.3, 1.2, 2.2, 4.0, 0.8, 1.1];
        let swapped = [4.0, 0.8, 1.1, 0.3, 1.2, 2.2];
        for state in [0u8, 1] {
            let a = log_density(&y, state, &th, 3, 3).unwrap();
            let b = log_density(&swapped, state, &th, 3, 3).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn log_density_is_deterministic_and_rejects_bad_input() {
        let th = GgParams::new(10.0_f64, 0.9, 0.5).unwrap();
        let y = [0.7, 1.9, 1.3, 2.6];
        let a = log_density(&y, 1, &th, 2, 2).unwrap();
        let b = log_density(&y, 1, &th, 2, 2).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(matches!(log_density(&[1.0, 0.0], 0, &th, 1, 1), Err(Error::NonPositive { .. })));
        assert!(matches!(log_density(&[1.0, -2.0], 1, &th, 1, 1), Err(Error::NonPositive { .. })));
        assert!(log_density(&[1.0, 2.0, 3.0], 1, &th, 1, 1).is_err());
        assert!(GgParams::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn huge_shape_stays_finite() {
        let th = GgParams::new(5e3_f64, 0.9, 0.5).unwrap();
        let v = log_density(&[1.0, 1.1, 0.9, 1.0], 0, &th, 2, 2).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn sampler_mean_matches_marginal_moment() {
        // E[y] = α E[1/λ] = α ν / (α0 − 1) for λ ~ Gamma(α0, rate ν).
        let th = GgParams::new(10.0, 3.5, 0.5).unwrap();
        let expected = th.alpha * th.nu / (th.alpha0 - 1.0);
        let mut rng = seeded_rng(11, 0);
        let reps = 100_000;
        let mut means = Vec::with_capacity(reps);
        for _ in 0..reps {
            let y: Vec<f64> = sample_gene_obs(0, &th, 3, 3, &mut rng).unwrap();
            assert!(y.iter().all(|v| *v > 0.0));
            means.push(y.iter().sum::<f64>() / 6.0);
        }
        let mu = means.iter().sum::<f64>() / reps as f64;
        let sd = (means.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
        let se = sd / (reps as f64).sqrt();
        assert!((mu - expected).abs() < 3.0 * se, "{mu} vs {expected} (se {se})");
    }

    #[test]
    fn de_draws_favor_the_de_density() {
        let th = GgParams::new(10.0, 0.9, 0.5).unwrap();
        let mut rng = seeded_rng(5, 0);
        let mut acc = 0.0;
        for _ in 0..10_000 {
            let y: Vec<f64> = sample_gene_obs(1, &th, 3, 3, &mut rng).unwrap();
            acc += log_density(&y, 1, &th, 3, 3).unwrap() - log_density(&y, 0, &th, 3, 3).unwrap();
        }
        assert!(acc / 10_000.0 > 0.0);
    }

    #[test]
    fn sampler_is_seed_deterministic() {
        let th = GgParams::new(10.0, 0.9, 0.5).unwrap();
        let a: Vec<f64> = sample_gene_obs(1, &th, 3, 3, &mut seeded_rng(42, 3)).unwrap();
        let b: Vec<f64> = sample_gene_obs(1, &th, 3, 3, &mut seeded_rng(42, 3)).unwrap();
        assert_eq!(a, b);
    }

    fn simulated(genes: usize, times: usize, th: &GgParams<f64>, seed: u64) -> (ExpressionData<f64>, StateMatrix) {
        let mut rng = seeded_rng(seed, 0);
        let mut states = StateMatrix::zeros(genes, times);
        let mut values = Vec::new();
        for g in 0..genes {
            for t in 0..times {
                let s = u8::from(rng.random::<f64>() < 0.25);
                states.set(g, t, s);
                values.extend(sample_gene_obs::<f64, _>(s, th, 3, 3, &mut rng).unwrap());
            }
        }
        (ExpressionData::new(genes, times, 3, 3, values).unwrap(), states)
    }

    #[test]
    fn fit_theta_improves_on_start_and_on_truth() {
        let th = GgParams::new(10.0, 0.9, 0.5).unwrap();
        let (data, states) = simulated(300, 6, &th, 17);
        let fit = fit_theta(&data, &states).unwrap();
        assert!(fit.log_likelihood >= fit.start_log_likelihood);
        let at_truth = log_likelihood(&data, &states, &th).unwrap();
        assert!(fit.log_likelihood >= at_truth - 1e-9);
        let rel = |a: f64, b: f64| (a - b).abs() / b;
        assert!(rel(fit.theta.alpha, 10.0) < 0.15, "{:?}", fit.theta);
        assert!(rel(fit.theta.alpha0, 0.9) < 0.25, "{:?}", fit.theta);
    }

    #[test]
    fn fit_theta_on_constant_data_terminates() {
        let data = ExpressionData::new(4, 2, 2, 2, vec![3.0_f64; 32]).unwrap();
        let states = StateMatrix::zeros(4, 2);
        let fit = fit_theta(&data, &states).unwrap();
        assert!(fit.log_likelihood.is_finite());
        assert!(fit.log_likelihood >= fit.start_log_likelihood);
    }

    #[test]
    fn expression_data_validation() {
        assert!(matches!(
            ExpressionData::new(1, 1, 1, 1, vec![1.0, 0.0]),
            Err(Error::NonPositive { .. })
        ));
        assert!(ExpressionData::new(1, 1, 1, 1, vec![1.0]).is_err());
        assert!(ExpressionData::<f64>::new(1, 1, 0, 2, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let th = GgParams::new(10.0f32, 0.9, 0.5).unwrap();
        let a = log_density(&[1.0f32, 1.2], 1, &th, 1, 1).unwrap();
        let b = log_density(&[1.0f64, 1.2], 1, &GgParams::new(10.0, 0.9, 0.5).unwrap(), 1, 1).unwrap();
        assert!((a as f64 - b).abs() < 1e-3);
    }
}
