//! Alternating estimation: t-test initialization, then cycles of
//! pseudolikelihood Φ fit, Gamma–Gamma Θ fit and one ICM sweep in which
//! each gene's whole time path is replaced by its Viterbi optimum given
//! the current states of every other gene.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::gamma_gamma::{fit_theta_stats, moment_start, CellStats, ExpressionData, GgEvaluator, GgParams};
use crate::mrf::{
    fit_phi_constrained, initial_field_from_sum, log_conditional_prob, log_pseudolikelihood, neighbor_spin_sum,
    transition_field_from_sum, MrfParams, PhiConstraints,
};
use crate::network::GeneNetwork;
use crate::scalar::Real;
use crate::states::StateMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitMode {
    /// Spatial and temporal coupling.
    Full,
    /// β0 = β1 = 0: independent per-gene hidden Markov chains.
    TemporalOnly,
    /// β2 = 0: time points decouple into network-only fields.
    SpatialOnly,
}

impl FitMode {
    pub fn constraints(self) -> PhiConstraints {
        match self {
            FitMode::Full => PhiConstraints::default(),
            FitMode::TemporalOnly => PhiConstraints { fix_beta0: true, fix_beta1: true, fix_beta2: false },
            FitMode::SpatialOnly => PhiConstraints { fix_beta0: false, fix_beta1: false, fix_beta2: true },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FitMode::Full => "full",
            FitMode::TemporalOnly => "temporal_only",
            FitMode::SpatialOnly => "spatial_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<T> {
    /// Stop once every parameter's relative change between cycles is below this.
    pub epsilon: T,
    pub max_cycles: usize,
    /// Two-sided level of the initializing t-tests.
    pub ttest_alpha: f64,
    pub mode: FitMode,
    /// Seeds the restart jitter of the Θ fit.
    pub seed: u64,
}

impl<T: Real> Default for FitConfig<T> {
    fn default() -> Self {
        FitConfig { epsilon: T::lit(0.01), max_cycles: 50, ttest_alpha: 0.05, mode: FitMode::Full, seed: 0 }
    }
}

impl<T: Real> FitConfig<T> {
    pub fn with_mode(mode: FitMode) -> Self {
        FitConfig { mode, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if !(self.ttest_alpha > 0.0 && self.ttest_alpha < 1.0) {
            return Err(Error::InvalidParameter("t-test level must lie in (0, 1)".into()));
        }
        if self.max_cycles == 0 {
            return Err(Error::InvalidParameter("max_cycles must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry<T> {
    pub cycle: usize,
    pub phi: MrfParams<T>,
    pub theta: GgParams<T>,
    /// Log pseudolikelihood of the states Φ was fit on, at the fitted Φ.
    pub pseudolikelihood: T,
    pub flips: usize,
    /// Largest relative parameter change against the previous cycle
    /// (infinite on the first cycle).
    pub max_rel_change: T,
    /// Smallest per-gene surrogate gain of the sweep.
    pub min_score_gain: T,
    pub phi_clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub states: StateMatrix,
    pub initial_states: StateMatrix,
    pub phi: MrfParams<T>,
    pub theta: GgParams<T>,
    pub trace: Vec<TraceEntry<T>>,
    pub converged: bool,
    pub cycles_used: usize,
}

impl<T: Real> FitResult<T> {
    pub fn min_score_gain(&self) -> T {
        self.trace.iter().map(|e| e.min_score_gain).fold(T::infinity(), T::min)
    }
}

/// Pooled-variance two-sample t-tests on log intensities, one per cell.
/// A cell is called DE when the two-sided p-value is below `alpha_level`.
/// With zero pooled variance the call is DE iff the group means differ.
pub fn init_states_ttest<T: Real>(data: &ExpressionData<T>, alpha_level: f64) -> Result<StateMatrix> {
    let (m, n) = (data.m(), data.n());
    if m < 2 || n < 2 {
        return Err(Error::InvalidParameter(format!("t-tests need two samples per condition, got m={m}, n={n}")));
    }
    let df = (m + n - 2) as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut states = StateMatrix::zeros(data.genes(), data.times());
    for g in 0..data.genes() {
        for t in 0..data.times() {
            let y = data.cell(g, t);
            let logs: Vec<f64> = y.iter().map(|v| v.to_f64_lossy().ln()).collect();
            let (a, b) = logs.split_at(m);
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let (ma, mb) = (mean(a), mean(b));
            let ss = |v: &[f64], mu: f64| v.iter().map(|x| (x - mu).powi(2)).sum::<f64>();
            let pooled = (ss(a, ma) + ss(b, mb)) / df;
            let call = if pooled <= 0.0 {
                ma != mb
            } else {
                let stat = (ma - mb) / (pooled * (1.0 / m as f64 + 1.0 / n as f64)).sqrt();
                let p = 2.0 * (1.0 - t_dist.cdf(stat.abs()));
                p < alpha_level
            };
            states.set(g, t, u8::from(call));
        }
    }
    Ok(states)
}

/// Per-cell `[log f(y | 0), log f(y | 1)]`, gene-major.
pub fn emission_table<T: Real>(stats: &[CellStats<T>], theta: &GgParams<T>, m: usize, n: usize) -> Vec<[T; 2]> {
    let ev = GgEvaluator::new(*theta, m, n);
    stats.iter().map(|s| [ev.log_density(s, 0), ev.log_density(s, 1)]).collect()
}

/// Neighbor spin sums of gene `g` at every time point under the current states.
fn spin_sums(g: usize, states: &StateMatrix, net: &GeneNetwork) -> Vec<i64> {
    (0..states.times()).map(|t| neighbor_spin_sum(net, states.column(t), g)).collect()
}

/// Surrogate log score of a time path for gene `g`: the emissions plus the
/// first-time-point conditional and the chained transition conditionals,
/// with the other genes held at their current states.
pub fn path_score<T: Real>(
    g: usize,
    path: &[u8],
    emissions: &[[T; 2]],
    states: &StateMatrix,
    net: &GeneNetwork,
    phi: &MrfParams<T>,
) -> T {
    let sums = spin_sums(g, states, net);
    score_with_sums(path, emissions, &sums, phi)
}

fn score_with_sums<T: Real>(path: &[u8], emissions: &[[T; 2]], sums: &[i64], phi: &MrfParams<T>) -> T {
    let mut acc = T::zero();
    for (t, &x) in path.iter().enumerate() {
        let field = if t == 0 {
            initial_field_from_sum(phi, sums[0])
        } else {
            transition_field_from_sum(phi, sums[t], path[t - 1])
        };
        acc += log_conditional_prob(field, x) + emissions[t][x as usize];
    }
    acc
}

/// Two-state max-sum recursion for one gene. `emissions` holds that
/// gene's rows. Ties go to state 0.
pub fn viterbi_path<T: Real>(emissions: &[[T; 2]], sums: &[i64], phi: &MrfParams<T>) -> (Vec<u8>, T) {
    let times = emissions.len();
    if times == 0 {
        return (Vec::new(), T::zero());
    }
    let f0 = initial_field_from_sum(phi, sums[0]);
    let mut delta = [
        log_conditional_prob(f0, 0) + emissions[0][0],
        log_conditional_prob(f0, 1) + emissions[0][1],
    ];
    let mut back: Vec<[u8; 2]> = Vec::with_capacity(times);
    back.push([0, 0]);
    for t in 1..times {
        let fields = [
            transition_field_from_sum(phi, sums[t], 0),
            transition_field_from_sum(phi, sums[t], 1),
        ];
        let mut next = [T::zero(); 2];
        let mut ptr = [0u8; 2];
        for x in 0..2u8 {
            let from0 = delta[0] + log_conditional_prob(fields[0], x);
            let from1 = delta[1] + log_conditional_prob(fields[1], x);
            let (best, arg) = if from1 > from0 { (from1, 1) } else { (from0, 0) };
            next[x as usize] = best + emissions[t][x as usize];
            ptr[x as usize] = arg;
        }
        delta = next;
        back.push(ptr);
    }
    let (mut state, score) = if delta[1] > delta[0] { (1u8, delta[1]) } else { (0u8, delta[0]) };
    let mut path = vec![0u8; times];
    for t in (0..times).rev() {
        path[t] = state;
        state = back[t][state as usize];
    }
    (path, score)
}

/// Replacement time path for gene `g` and its surrogate-score gain over
/// the current path.
pub fn viterbi_update_gene<T: Real>(
    g: usize,
    data: &ExpressionData<T>,
    states: &StateMatrix,
    net: &GeneNetwork,
    phi: &MrfParams<T>,
    theta: &GgParams<T>,
) -> Result<(Vec<u8>, T)> {
    check_dims(data, states, net)?;
    if g >= net.node_count() {
        return Err(Error::IndexOutOfRange { index: g, len: net.node_count() });
    }
    let ev = GgEvaluator::new(*theta, data.m(), data.n());
    let emissions: Vec<[T; 2]> = (0..data.times())
        .map(|t| {
            let s = CellStats::of(data.cell(g, t), data.m());
            [ev.log_density(&s, 0), ev.log_density(&s, 1)]
        })
        .collect();
    Ok(update_gene(g, &emissions, states, net, phi))
}

fn update_gene<T: Real>(
    g: usize,
    emissions: &[[T; 2]],
    states: &StateMatrix,
    net: &GeneNetwork,
    phi: &MrfParams<T>,
) -> (Vec<u8>, T) {
    let sums = spin_sums(g, states, net);
    let (path, best) = viterbi_path(emissions, &sums, phi);
    let old = score_with_sums(&states.row(g), emissions, &sums, phi);
    (path, best - old)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcmOutcome<T> {
    pub flips: usize,
    /// Surrogate gain of each gene's update, in visiting order.
    pub gains: Vec<T>,
}

/// One ICM cycle: genes in ascending order, each row replaced in place.
pub fn icm_cycle<T: Real>(
    data: &ExpressionData<T>,
    states: &mut StateMatrix,
    net: &GeneNetwork,
    phi: &MrfParams<T>,
    theta: &GgParams<T>,
) -> Result<IcmOutcome<T>> {
    check_dims(data, states, net)?;
    let table = emission_table(&data.cell_stats(), theta, data.m(), data.n());
    Ok(icm_sweep(&table, states, net, phi))
}

/// ICM cycle over a precomputed emission table (gene-major).
pub fn icm_sweep<T: Real>(
    table: &[[T; 2]],
    states: &mut StateMatrix,
    net: &GeneNetwork,
    phi: &MrfParams<T>,
) -> IcmOutcome<T> {
    let times = states.times();
    let mut flips = 0;
    let mut gains = Vec::with_capacity(states.genes());
    for g in 0..states.genes() {
        let rows = &table[g * times..(g + 1) * times];
        let (path, gain) = update_gene(g, rows, states, net, phi);
        for (t, &b) in path.iter().enumerate() {
            if states.get(g, t) != b {
                flips += 1;
                states.set(g, t, b);
            }
        }
        gains.push(gain);
    }
    IcmOutcome { flips, gains }
}

fn check_dims<T: Real>(data: &ExpressionData<T>, states: &StateMatrix, net: &GeneNetwork) -> Result<()> {
    if data.genes() != net.node_count() || states.genes() != net.node_count() || states.times() != data.times() {
        return Err(Error::DimensionMismatch(format!(
            "network {} genes, data {}x{}, states {}x{}",
            net.node_count(),
            data.genes(),
            data.times(),
            states.genes(),
            states.times()
        )));
    }
    Ok(())
}

fn param_vector<T: Real>(phi: &MrfParams<T>, theta: &GgParams<T>) -> [T; 8] {
    let [a, b, c, d, e] = phi.to_array();
    let [f, g, h] = theta.to_array();
    [a, b, c, d, e, f, g, h]
}

fn max_relative_change<T: Real>(old: &[T; 8], new: &[T; 8]) -> T {
    old.iter()
        .zip(new)
        .map(|(o, n)| (*n - *o).abs() / o.abs().max(T::lit(1e-8)))
        .fold(T::zero(), T::max)
}

/// Full estimation loop. Stops when the largest relative change of any
/// Φ or Θ component between consecutive cycles drops below
/// `config.epsilon`, or after `config.max_cycles` cycles.
pub fn fit<T: Real>(data: &ExpressionData<T>, net: &GeneNetwork, config: &FitConfig<T>) -> Result<FitResult<T>> {
    config.validate()?;
    let initial = init_states_ttest(data, config.ttest_alpha)?;
    fit_from(data, net, config, initial)
}

/// Estimation loop from a caller-supplied initial state matrix.
pub fn fit_from<T: Real>(
    data: &ExpressionData<T>,
    net: &GeneNetwork,
    config: &FitConfig<T>,
    initial: StateMatrix,
) -> Result<FitResult<T>> {
    config.validate()?;
    check_dims(data, &initial, net)?;
    let stats = data.cell_stats();
    let (m, n) = (data.m(), data.n());
    let start = moment_start(data);
    let constraints = config.mode.constraints();

    let mut states = initial.clone();
    let mut trace: Vec<TraceEntry<T>> = Vec::new();
    let mut previous: Option<[T; 8]> = None;
    let mut converged = false;

    for cycle in 1..=config.max_cycles {
        let phi_est = fit_phi_constrained::<T>(&states, net, constraints)?;
        let phi = phi_est.params;
        let pl = log_pseudolikelihood(&states, net, &phi)?;
        let theta = fit_theta_stats(&stats, &states, m, n, start, 2, config.seed)?.theta;

        let table = emission_table(&stats, &theta, m, n);
        let outcome = icm_sweep(&table, &mut states, net, &phi);
        let min_gain = outcome.gains.iter().copied().fold(T::infinity(), T::min);

        let current = param_vector(&phi, &theta);
        let change = previous.map_or(T::infinity(), |old| max_relative_change(&old, &current));
        previous = Some(current);
        trace.push(TraceEntry {
            cycle,
            phi,
            theta,
            pseudolikelihood: pl,
            flips: outcome.flips,
            max_rel_change: change,
            min_score_gain: min_gain,
            phi_clamped: phi_est.clamped,
        });
        if change < config.epsilon {
            converged = true;
            break;
        }
    }
    let last = trace.last().expect("max_cycles >= 1");
    Ok(FitResult {
        phi: last.phi,
        theta: last.theta,
        cycles_used: trace.len(),
        states,
        initial_states: initial,
        trace,
        converged,
    })
}
