//! Spatial-temporal auto-logistic prior on the state matrix.
//!
//! At the first time point each gene is logistic in
//! `F1 = γ0 + β0 Σ_{g'∈N_g} (2x_{g'0} − 1)`. Later columns follow a Markov
//! chain whose transition energy rewards agreement between neighbors
//! (`β1`) and with the gene's own previous state (`β2`); its gene-wise
//! conditional is logistic in
//! `F2 = γ + β1 Σ_{g'∈N_g} (2x_{g't} − 1) + β2 (2x_{g,t−1} − 1)`.

use crate::error::{Error, Result};
use crate::network::GeneNetwork;
use crate::optimize::irls::{fit_logistic, LogisticOptions};
use crate::scalar::{log_add_exp, softplus, Real};
use crate::states::StateMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MrfParams<T> {
    pub gamma0: T,
    pub beta0: T,
    pub gamma: T,
    pub beta1: T,
    pub beta2: T,
}

impl<T: Real> MrfParams<T> {
    pub fn new(gamma0: T, beta0: T, gamma: T, beta1: T, beta2: T) -> Result<Self> {
        let p = MrfParams { gamma0, beta0, gamma, beta1, beta2 };
        for (name, v) in [("beta0", beta0), ("beta1", beta1), ("beta2", beta2)] {
            if !(v >= T::zero()) {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !(gamma0.is_finite() && gamma.is_finite()) {
            return Err(Error::InvalidParameter("intercepts must be finite".into()));
        }
        Ok(p)
    }

    pub fn to_array(&self) -> [T; 5] {
        [self.gamma0, self.beta0, self.gamma, self.beta1, self.beta2]
    }

    pub const NAMES: [&'static str; 5] = ["gamma0", "beta0", "gamma", "beta1", "beta2"];
}

/// 1 iff the two bits agree.
#[inline]
pub fn xnor(a: u8, b: u8) -> u8 {
    u8::from(a == b)
}

/// `Σ_{g'∈N_g} (2x_{g'} − 1)` over a state column.
#[inline]
pub fn neighbor_spin_sum(net: &GeneNetwork, column: &[u8], g: usize) -> i64 {
    let nb = net.adj(g);
    let de: i64 = nb.iter().map(|&h| column[h] as i64).sum();
    2 * de - nb.len() as i64
}

fn check_column(net: &GeneNetwork, column: &[u8], g: usize) -> Result<()> {
    if column.len() != net.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "state column has {} entries for {} genes",
            column.len(),
            net.node_count()
        )));
    }
    if g >= net.node_count() {
        return Err(Error::IndexOutOfRange { index: g, len: net.node_count() });
    }
    Ok(())
}

/// Local field at the first time point.
pub fn field_initial<T: Real>(net: &GeneNetwork, x0: &[u8], g: usize, params: &MrfParams<T>) -> Result<T> {
    check_column(net, x0, g)?;
    Ok(initial_field_from_sum(params, neighbor_spin_sum(net, x0, g)))
}

/// Local field at a later time point given the current column and the
/// previous one.
pub fn field_transition<T: Real>(
    net: &GeneNetwork,
    xt: &[u8],
    xprev: &[u8],
    g: usize,
    params: &MrfParams<T>,
) -> Result<T> {
    check_column(net, xt, g)?;
    check_column(net, xprev, g)?;
    Ok(transition_field_from_sum(params, neighbor_spin_sum(net, xt, g), xprev[g]))
}

#[inline]
pub fn initial_field_from_sum<T: Real>(params: &MrfParams<T>, spin_sum: i64) -> T {
    params.gamma0 + params.beta0 * T::from_i64(spin_sum).unwrap()
}

#[inline]
pub fn transition_field_from_sum<T: Real>(params: &MrfParams<T>, spin_sum: i64, previous: u8) -> T {
    let own = if previous == 1 { T::one() } else { -T::one() };
    params.gamma + params.beta1 * T::from_i64(spin_sum).unwrap() + params.beta2 * own
}

/// `ln( e^{x·F} / (1 + e^F) )`, stable for any finite field.
#[inline]
pub fn log_conditional_prob<T: Real>(field: T, x: u8) -> T {
    if x == 1 {
        -softplus(-field)
    } else {
        -softplus(field)
    }
}

/// `e^{x·F} / (1 + e^F)`.
#[inline]
pub fn conditional_prob<T: Real>(field: T, x: u8) -> T {
    log_conditional_prob(field, x).exp()
}

/// Log pseudolikelihood: the sum of every cell's log conditional given
/// its neighbors (and, after the first column, its own previous state).
pub fn log_pseudolikelihood<T: Real>(states: &StateMatrix, net: &GeneNetwork, params: &MrfParams<T>) -> Result<T> {
    if states.genes() != net.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "states have {} genes, network has {}",
            states.genes(),
            net.node_count()
        )));
    }
    let mut acc = T::zero();
    if states.times() == 0 {
        return Ok(acc);
    }
    let x0 = states.column(0);
    for g in 0..states.genes() {
        acc += log_conditional_prob(initial_field_from_sum(params, neighbor_spin_sum(net, x0, g)), x0[g]);
    }
    for t in 1..states.times() {
        let (xt, xp) = (states.column(t), states.column(t - 1));
        for g in 0..states.genes() {
            let f = transition_field_from_sum(params, neighbor_spin_sum(net, xt, g), xp[g]);
            acc += log_conditional_prob(f, xt[g]);
        }
    }
    Ok(acc)
}

/// Which slopes are pinned at zero during estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PhiConstraints {
    pub fix_beta0: bool,
    pub fix_beta1: bool,
    pub fix_beta2: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiEstimate<T> {
    pub params: MrfParams<T>,
    /// A coefficient sits at the ±30 bound (separation or constant response).
    pub clamped: bool,
    /// Slopes that came out negative and were refit at zero.
    pub zeroed: Vec<&'static str>,
}

/// Design rows of the two logistic regressions whose likelihoods make up
/// the pseudolikelihood: `[1, s_g0]` for the first column and
/// `[1, s_gt, r_gt]` pooled over later columns.
pub fn phi_designs<T: Real>(states: &StateMatrix, net: &GeneNetwork) -> ((Vec<T>, Vec<u8>), (Vec<T>, Vec<u8>)) {
    let p = states.genes();
    let mut x_init = Vec::with_capacity(2 * p);
    let mut y_init = Vec::with_capacity(p);
    if states.times() > 0 {
        let x0 = states.column(0);
        for g in 0..p {
            x_init.extend([T::one(), T::from_i64(neighbor_spin_sum(net, x0, g)).unwrap()]);
            y_init.push(x0[g]);
        }
    }
    let rows = p * states.times().saturating_sub(1);
    let mut x_tr = Vec::with_capacity(3 * rows);
    let mut y_tr = Vec::with_capacity(rows);
    for t in 1..states.times() {
        let (xt, xp) = (states.column(t), states.column(t - 1));
        for g in 0..p {
            let r = if xp[g] == 1 { T::one() } else { -T::one() };
            x_tr.extend([T::one(), T::from_i64(neighbor_spin_sum(net, xt, g)).unwrap(), r]);
            y_tr.push(xt[g]);
        }
    }
    ((x_init, y_init), (x_tr, y_tr))
}

/// Maximizes the pseudolikelihood with two independent logistic
/// regressions fit by IRLS. A negative slope is pinned at zero and the
/// remaining coefficients of that regression refit.
pub fn fit_phi<T: Real>(states: &StateMatrix, net: &GeneNetwork) -> Result<PhiEstimate<T>> {
    fit_phi_constrained(states, net, PhiConstraints::default())
}

pub fn fit_phi_constrained<T: Real>(
    states: &StateMatrix,
    net: &GeneNetwork,
    constraints: PhiConstraints,
) -> Result<PhiEstimate<T>> {
    if states.genes() != net.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "states have {} genes, network has {}",
            states.genes(),
            net.node_count()
        )));
    }
    if states.times() == 0 || states.genes() == 0 {
        return Err(Error::EmptyInput("state matrix"));
    }
    let ((xi, yi), (xt, yt)) = phi_designs::<T>(states, net);
    let opts = LogisticOptions::default();
    let mut zeroed = Vec::new();
    let mut clamped = false;

    let init = nonneg_fit(&xi, 2, &yi, vec![true, !constraints.fix_beta0], &opts, &["beta0"], &mut zeroed);
    clamped |= init.1;
    let (gamma, beta1, beta2) = if yt.is_empty() {
        (T::zero(), T::zero(), T::zero())
    } else {
        let tr = nonneg_fit(
            &xt,
            3,
            &yt,
            vec![true, !constraints.fix_beta1, !constraints.fix_beta2],
            &opts,
            &["beta1", "beta2"],
            &mut zeroed,
        );
        clamped |= tr.1;
        (tr.0[0], tr.0[1], tr.0[2])
    };
    Ok(PhiEstimate {
        params: MrfParams { gamma0: init.0[0], beta0: init.0[1], gamma, beta1, beta2 },
        clamped,
        zeroed,
    })
}

fn nonneg_fit<T: Real>(
    x: &[T],
    ncols: usize,
    y: &[u8],
    mut free: Vec<bool>,
    opts: &LogisticOptions<T>,
    slope_names: &[&'static str],
    zeroed: &mut Vec<&'static str>,
) -> (Vec<T>, bool) {
    loop {
        let fit = fit_logistic(x, ncols, y, &free, opts);
        // Pin the most negative free slope, one at a time.
        let worst = (1..ncols)
            .filter(|&j| free[j] && fit.coef[j] < T::zero())
            .min_by(|&a, &b| fit.coef[a].partial_cmp(&fit.coef[b]).unwrap());
        match worst {
            Some(j) => {
                free[j] = false;
                zeroed.push(slope_names[j - 1]);
            }
            None => return (fit.coef, fit.clamped),
        }
    }
}

/// Unnormalized log transition weight of column `z` after `prev`.
fn transition_energy<T: Real>(edges: &[(usize, usize)], z: &[u8], prev: &[u8], params: &MrfParams<T>) -> T {
    let de: usize = z.iter().map(|&b| b as usize).sum();
    let agree_edges: usize = edges.iter().map(|&(a, b)| xnor(z[a], z[b]) as usize).sum();
    let agree_time: usize = z.iter().zip(prev).map(|(&a, &b)| xnor(a, b) as usize).sum();
    params.gamma * T::from_usize_lossy(de)
        + params.beta1 * T::from_usize_lossy(agree_edges)
        + params.beta2 * T::from_usize_lossy(agree_time)
}

pub const BRUTE_FORCE_MAX_GENES: usize = 16;

/// Exact `ln Pr(x_1, …, x_T | x_0)` under the transition model, with each
/// normalizing constant summed over all `2^p` columns. Oracle use only.
pub fn joint_log_prob_bruteforce<T: Real>(states: &StateMatrix, net: &GeneNetwork, params: &MrfParams<T>) -> Result<T> {
    let p = net.node_count();
    if p > BRUTE_FORCE_MAX_GENES {
        return Err(Error::OracleTooLarge(format!("{p} genes exceeds {BRUTE_FORCE_MAX_GENES}")));
    }
    if states.genes() != p {
        return Err(Error::DimensionMismatch("states vs network".into()));
    }
    let edges = net.edges();
    let mut acc = T::zero();
    let mut z = vec![0u8; p];
    for t in 1..states.times() {
        let prev = states.column(t - 1);
        let mut log_c = T::neg_infinity();
        for code in 0..(1u32 << p) {
            for (g, b) in z.iter_mut().enumerate() {
                *b = ((code >> g) & 1) as u8;
            }
            log_c = log_add_exp(log_c, transition_energy(&edges, &z, prev, params));
        }
        acc += transition_energy(&edges, states.column(t), prev, params) - log_c;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> GeneNetwork {
        GeneNetwork::from_index_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn star(leaves: usize) -> GeneNetwork {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        GeneNetwork::from_index_edges(leaves + 1, &edges).unwrap()
    }

    #[test]
    fn xnor_table() {
        assert_eq!(xnor(0, 0), 1);
        assert_eq!(xnor(1, 0), 0);
        assert_eq!(xnor(0, 1), 0);
        assert_eq!(xnor(1, 1), 1);
    }

    #[test]
    fn initial_field_examples() {
        let iso = GeneNetwork::from_index_edges(1, &[]).unwrap();
        let zero = MrfParams::<f64>::default();
        let f = field_initial(&iso, &[1], 0, &zero).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(conditional_prob(f, 1), 0.5);

        let phi = MrfParams::new(-2.0, 2.0, 0.0, 0.0, 0.0).unwrap();
        let s3 = star(3);
        assert_eq!(field_initial(&s3, &[0, 1, 1, 1], 0, &phi).unwrap(), 4.0);
        let s4 = star(4);
        assert_eq!(field_initial(&s4, &[0, 1, 0, 0, 0], 0, &phi).unwrap(), -6.0);
        assert!(field_initial(&s4, &[0, 1, 0, 0, 0], 9, &phi).is_err());
        assert!(field_initial(&s4, &[0, 1], 0, &phi).is_err());
    }

    #[test]
    fn transition_field_examples() {
        let phi = MrfParams::new(0.0_f64, 0.0, -0.71, 0.013, 2.14).unwrap();
        let s5 = star(5);
        let xt = [0, 1, 1, 0, 0, 0];
        let f_de = field_transition(&s5, &xt, &[1, 0, 0, 0, 0, 0], 0, &phi).unwrap();
        assert!((f_de - 1.417).abs() < 1e-12);
        let f_ee = field_transition(&s5, &xt, &[0; 6], 0, &phi).unwrap();
        let odds = (f_de - f_ee).exp();
        assert!((odds - 72.24).abs() < 0.01, "{odds}");

        let decoupled = MrfParams::new(0.0, 0.0, 0.3, 0.0, 0.0).unwrap();
        assert_eq!(field_transition(&s5, &[1; 6], &[1; 6], 0, &decoupled).unwrap(), 0.3);
        assert_eq!(field_transition(&s5, &[0; 6], &[0; 6], 0, &decoupled).unwrap(), 0.3);
    }

    #[test]
    fn logistic_values() {
        assert_eq!(conditional_prob(0.0_f64, 0), 0.5);
        assert_eq!(conditional_prob(0.0_f64, 1), 0.5);
        let p = conditional_prob(1.417_f64, 1);
        assert!((p - 1.0 / (1.0 + (-1.417f64).exp())).abs() < 1e-15);
        assert!((p - 0.8049).abs() < 1e-4);
        let mut last = 0.0;
        for k in 0..60 {
            let v = conditional_prob(k as f64, 1);
            assert!(v >= last);
            last = v;
        }
        assert!((conditional_prob(800.0_f64, 1) - 1.0).abs() < 1e-15);
        assert!(log_conditional_prob(-800.0_f64, 1).is_finite());
    }

    #[test]
    fn pseudolikelihood_examples() {
        let net = triangle();
        let states = StateMatrix::from_rows(&[vec![1, 0], vec![0, 0], vec![1, 1]]).unwrap();
        let v: f64 = log_pseudolikelihood(&states, &net, &MrfParams::default()).unwrap();
        assert!((v + 6.0 * 2f64.ln()).abs() < 1e-12);

        let iso = GeneNetwork::from_index_edges(1, &[]).unwrap();
        let one = StateMatrix::from_rows(&[vec![1]]).unwrap();
        let c = 0.7_f64;
        let phi = MrfParams::new(c, 0.0, 0.0, 0.0, 0.0).unwrap();
        let v = log_pseudolikelihood(&one, &iso, &phi).unwrap();
        assert!((v - (c.exp() / (1.0 + c.exp())).ln()).abs() < 1e-14);
    }

    #[test]
    fn all_zero_states_hit_clamp_convention() {
        let net = triangle();
        let states = StateMatrix::zeros(3, 4);
        let est = fit_phi::<f64>(&states, &net).unwrap();
        assert_eq!(est.params.gamma0, -30.0);
        assert_eq!(est.params.gamma, -30.0);
        assert_eq!(est.params.beta0, 0.0);
        assert_eq!(est.params.beta1, 0.0);
        assert_eq!(est.params.beta2, 0.0);
        assert!(est.clamped);
    }

    #[test]
    fn fitted_phi_beats_zero_parameters() {
        let net = GeneNetwork::from_index_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)]).unwrap();
        let rows = vec![
            vec![1, 1, 0, 0, 1],
            vec![1, 0, 0, 1, 1],
            vec![0, 0, 1, 1, 0],
            vec![0, 1, 1, 0, 0],
            vec![1, 1, 1, 0, 1],
            vec![0, 1, 0, 0, 0],
        ];
        let states = StateMatrix::from_rows(&rows).unwrap();
        let est = fit_phi::<f64>(&states, &net).unwrap();
        let fitted = log_pseudolikelihood(&states, &net, &est.params).unwrap();
        let zero = log_pseudolikelihood(&states, &net, &MrfParams::default()).unwrap();
        assert!(fitted >= zero);
        let p = est.params;
        assert!(p.beta0 >= 0.0 && p.beta1 >= 0.0 && p.beta2 >= 0.0);
    }

    #[test]
    fn brute_force_single_gene() {
        let iso = GeneNetwork::from_index_edges(1, &[]).unwrap();
        for x1 in [0u8, 1] {
            let s = StateMatrix::from_rows(&[vec![0, x1]]).unwrap();
            let v = joint_log_prob_bruteforce(&s, &iso, &MrfParams::<f64>::default()).unwrap();
            assert!((v - 0.5f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn brute_force_refuses_large_graphs() {
        let net = GeneNetwork::from_index_edges(17, &[]).unwrap();
        let s = StateMatrix::zeros(17, 2);
        assert!(matches!(
            joint_log_prob_bruteforce(&s, &net, &MrfParams::<f64>::default()),
            Err(Error::OracleTooLarge(_))
        ));
    }

    #[test]
    fn brute_force_trajectories_normalize() {
        let net = triangle();
        let phi = MrfParams::new(0.0_f64, 0.0, -0.4, 0.8, 1.3).unwrap();
        let x0 = vec![1u8, 0, 1];
        let mut total = 0.0f64;
        for code in 0..(1u32 << 6) {
            let c1: Vec<u8> = (0..3).map(|g| ((code >> g) & 1) as u8).collect();
            let c2: Vec<u8> = (0..3).map(|g| ((code >> (g + 3)) & 1) as u8).collect();
            let s = StateMatrix::from_columns(&[x0.clone(), c1, c2]).unwrap();
            total += joint_log_prob_bruteforce(&s, &net, &phi).unwrap().exp();
        }
        assert!((total - 1.0).abs() < 1e-12, "{total}");
    }
}
