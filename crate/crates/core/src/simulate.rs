//! Labelled synthetic datasets for the three dependency scenarios, plus a
//! sampler from the prior itself.
//!
//! Every generator draws from a ChaCha stream derived from `(seed, stream)`
//! so replicates are independent and bit-reproducible.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gamma_gamma::{sample_gene_obs, ExpressionData, GgParams};
use crate::mrf::{
    conditional_prob, initial_field_from_sum, neighbor_spin_sum, transition_field_from_sum, MrfParams,
};
use crate::network::GeneNetwork;
use crate::scalar::Real;
use crate::states::StateMatrix;

/// Deterministic generator for replicate `stream` of a run seeded `seed`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Independent per-gene Markov chains over time.
    Temporal,
    /// Pathway-seeded Gibbs samples, independent across time.
    Spatial,
    /// Pathway-level Markov chain, then Gibbs smoothing per time point.
    Spatiotemporal,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Temporal => "temporal",
            Scenario::Spatial => "spatial",
            Scenario::Spatiotemporal => "spatiotemporal",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(Scenario::Temporal),
            "spatial" => Ok(Scenario::Spatial),
            "spatiotemporal" => Ok(Scenario::Spatiotemporal),
            other => Err(Error::InvalidParameter(format!("unknown scenario {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec<T> {
    pub scenario: Scenario,
    pub time_points: usize,
    pub replicates_per_condition: usize,
    pub theta: GgParams<T>,
    pub p_init_de: f64,
    pub p_de_given_de: f64,
    pub p_de_given_ee: f64,
    pub gamma0: f64,
    pub beta0: f64,
    pub gibbs_sweeps: usize,
    pub pathways_initially_de: usize,
    pub p_path_de_given_ee: f64,
    pub p_path_de_given_de: f64,
    pub seed: u64,
}

impl<T: Real> ScenarioSpec<T> {
    /// Six time points, three replicates per condition, Θ = (10, 0.9, 0.5),
    /// chain probabilities 0.1 / 0.7 / 0.1, Gibbs field (−2, 2) with five
    /// sweeps; nine seed pathways for the spatial scenario, eight for the
    /// spatial-temporal one.
    pub fn defaults(scenario: Scenario) -> Self {
        ScenarioSpec {
            scenario,
            time_points: 6,
            replicates_per_condition: 3,
            theta: GgParams { alpha: T::lit(10.0), alpha0: T::lit(0.9), nu: T::lit(0.5) },
            p_init_de: 0.1,
            p_de_given_de: 0.7,
            p_de_given_ee: 0.1,
            gamma0: -2.0,
            beta0: 2.0,
            gibbs_sweeps: 5,
            pathways_initially_de: if scenario == Scenario::Spatial { 9 } else { 8 },
            p_path_de_given_ee: 0.1,
            p_path_de_given_de: 0.7,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.theta.validate()?;
        let probs = [
            ("p_init_de", self.p_init_de),
            ("p_de_given_de", self.p_de_given_de),
            ("p_de_given_ee", self.p_de_given_ee),
            ("p_path_de_given_ee", self.p_path_de_given_ee),
            ("p_path_de_given_de", self.p_path_de_given_de),
        ];
        for (name, v) in probs {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} is not a probability")));
            }
        }
        if self.time_points == 0 || self.replicates_per_condition == 0 {
            return Err(Error::InvalidParameter("time points and replicates must be positive".into()));
        }
        Ok(())
    }

    /// Key/value pairs describing the run, full precision.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let th = self.theta;
        vec![
            ("scenario".into(), self.scenario.name().into()),
            ("seed".into(), self.seed.to_string()),
            ("time_points".into(), self.time_points.to_string()),
            ("replicates_per_condition".into(), self.replicates_per_condition.to_string()),
            ("alpha".into(), th.alpha.to_string()),
            ("alpha0".into(), th.alpha0.to_string()),
            ("nu".into(), th.nu.to_string()),
            ("p_init_de".into(), self.p_init_de.to_string()),
            ("p_de_given_de".into(), self.p_de_given_de.to_string()),
            ("p_de_given_ee".into(), self.p_de_given_ee.to_string()),
            ("gamma0".into(), self.gamma0.to_string()),
            ("beta0".into(), self.beta0.to_string()),
            ("gibbs_sweeps".into(), self.gibbs_sweeps.to_string()),
            ("gibbs_update".into(), "sequential".into()),
            ("pathways_initially_de".into(), self.pathways_initially_de.to_string()),
            ("p_path_de_given_ee".into(), self.p_path_de_given_ee.to_string()),
            ("p_path_de_given_de".into(), self.p_path_de_given_de.to_string()),
        ]
    }
}

/// Draws observations for every cell of `states`, gene-major.
pub fn observe<T: Real, R: Rng + ?Sized>(
    states: &StateMatrix,
    theta: &GgParams<T>,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<ExpressionData<T>> {
    let mut values = Vec::with_capacity(states.genes() * states.times() * (m + n));
    for g in 0..states.genes() {
        for t in 0..states.times() {
            values.extend(sample_gene_obs(states.get(g, t), theta, m, n, rng)?);
        }
    }
    ExpressionData::new(states.genes(), states.times(), m, n, values)
}

fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u8 {
    u8::from(rng.random::<f64>() < p)
}

pub fn simulate_temporal<T: Real, R: Rng + ?Sized>(
    spec: &ScenarioSpec<T>,
    genes: usize,
    rng: &mut R,
) -> Result<(ExpressionData<T>, StateMatrix)> {
    spec.validate()?;
    let mut states = StateMatrix::zeros(genes, spec.time_points);
    for g in 0..genes {
        let mut x = bernoulli(spec.p_init_de, rng);
        states.set(g, 0, x);
        for t in 1..spec.time_points {
            let p = if x == 1 { spec.p_de_given_de } else { spec.p_de_given_ee };
            x = bernoulli(p, rng);
            states.set(g, t, x);
        }
    }
    let k = spec.replicates_per_condition;
    Ok((observe(&states, &spec.theta, k, k, rng)?, states))
}

/// One sequential Gibbs sweep over the first-time-point auto-logistic
/// model, updating `x` in place in ascending gene order.
pub fn gibbs_sweep<R: Rng + ?Sized>(net: &GeneNetwork, x: &mut [u8], gamma0: f64, beta0: f64, rng: &mut R) {
    let params = MrfParams { gamma0, beta0, ..Default::default() };
    for g in 0..x.len() {
        let f = initial_field_from_sum(&params, neighbor_spin_sum(net, x, g));
        x[g] = bernoulli(conditional_prob(f, 1), rng);
    }
}

fn pathway_list(net: &GeneNetwork, needed: usize) -> Result<Vec<&BTreeSet<usize>>> {
    let pw = net
        .pathways()
        .ok_or_else(|| Error::InvalidParameter("network carries no pathway membership".into()))?;
    if pw.len() < needed {
        return Err(Error::InvalidParameter(format!("need {needed} pathways, network has {}", pw.len())));
    }
    Ok(pw.values().collect())
}

fn seeded_column(pathways: &[&BTreeSet<usize>], active: impl Iterator<Item = usize>, genes: usize) -> Vec<u8> {
    let mut col = vec![0u8; genes];
    for i in active {
        for &g in pathways[i] {
            col[g] = 1;
        }
    }
    col
}

pub fn simulate_spatial<T: Real, R: Rng + ?Sized>(
    spec: &ScenarioSpec<T>,
    net: &GeneNetwork,
    rng: &mut R,
) -> Result<(ExpressionData<T>, StateMatrix)> {
    spec.validate()?;
    let pathways = pathway_list(net, spec.pathways_initially_de)?;
    let p = net.node_count();
    let mut columns = Vec::with_capacity(spec.time_points);
    for _ in 0..spec.time_points {
        let chosen = index::sample(rng, pathways.len(), spec.pathways_initially_de);
        let mut col = seeded_column(&pathways, chosen.into_iter(), p);
        for _ in 0..spec.gibbs_sweeps {
            gibbs_sweep(net, &mut col, spec.gamma0, spec.beta0, rng);
        }
        columns.push(col);
    }
    let states = StateMatrix::from_columns(&columns)?;
    let k = spec.replicates_per_condition;
    Ok((observe(&states, &spec.theta, k, k, rng)?, states))
}

/// Pathway-level DE indicators over time: exactly
/// `pathways_initially_de` active at the first time point, then each
/// pathway follows its own two-state chain.
pub fn pathway_chain<T: Real, R: Rng + ?Sized>(
    spec: &ScenarioSpec<T>,
    pathway_count: usize,
    rng: &mut R,
) -> Result<Vec<Vec<bool>>> {
    if pathway_count < spec.pathways_initially_de {
        return Err(Error::InvalidParameter(format!(
            "need {} pathways, network has {pathway_count}",
            spec.pathways_initially_de
        )));
    }
    let mut first = vec![false; pathway_count];
    for i in index::sample(rng, pathway_count, spec.pathways_initially_de) {
        first[i] = true;
    }
    let mut out = vec![first];
    for _ in 1..spec.time_points {
        let prev = out.last().unwrap();
        let next = prev
            .iter()
            .map(|&de| {
                let p = if de { spec.p_path_de_given_de } else { spec.p_path_de_given_ee };
                rng.random::<f64>() < p
            })
            .collect();
        out.push(next);
    }
    Ok(out)
}

pub fn simulate_spatiotemporal<T: Real, R: Rng + ?Sized>(
    spec: &ScenarioSpec<T>,
    net: &GeneNetwork,
    rng: &mut R,
) -> Result<(ExpressionData<T>, StateMatrix)> {
    spec.validate()?;
    let pathways = pathway_list(net, spec.pathways_initially_de)?;
    let chain = pathway_chain(spec, pathways.len(), rng)?;
    let p = net.node_count();
    let mut columns = Vec::with_capacity(spec.time_points);
    for active in &chain {
        let on = active.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i);
        let mut col = seeded_column(&pathways, on, p);
        for _ in 0..spec.gibbs_sweeps {
            gibbs_sweep(net, &mut col, spec.gamma0, spec.beta0, rng);
        }
        columns.push(col);
    }
    let states = StateMatrix::from_columns(&columns)?;
    let k = spec.replicates_per_condition;
    Ok((observe(&states, &spec.theta, k, k, rng)?, states))
}

/// Dispatches on `spec.scenario`; `genes` is only used by the temporal
/// scenario, the others take the network's node count.
pub fn simulate<T: Real, R: Rng + ?Sized>(
    spec: &ScenarioSpec<T>,
    net: &GeneNetwork,
    rng: &mut R,
) -> Result<(ExpressionData<T>, StateMatrix)> {
    match spec.scenario {
        Scenario::Temporal => simulate_temporal(spec, net.node_count(), rng),
        Scenario::Spatial => simulate_spatial(spec, net, rng),
        Scenario::Spatiotemporal => simulate_spatiotemporal(spec, net, rng),
    }
}

/// Approximate draw of a state matrix from the prior: the first column by
/// `sweeps` Gibbs sweeps of the auto-logistic model from an i.i.d.
/// start, each later column by `sweeps` Gibbs sweeps of the transition
/// model started from the previous column.
pub fn sample_prior<T: Real, R: Rng + ?Sized>(
    net: &GeneNetwork,
    phi: &MrfParams<T>,
    times: usize,
    sweeps: usize,
    rng: &mut R,
) -> StateMatrix {
    let start = conditional_prob(phi.gamma0, 1).to_f64_lossy();
    let col: Vec<u8> = (0..net.node_count()).map(|_| bernoulli(start, rng)).collect();
    sample_prior_from(net, phi, col, times, sweeps, rng)
}

/// As [`sample_prior`], but the first column's sweeps start from `start`
/// (e.g. a pathway-membership indicator).
pub fn sample_prior_from<T: Real, R: Rng + ?Sized>(
    net: &GeneNetwork,
    phi: &MrfParams<T>,
    start: Vec<u8>,
    times: usize,
    sweeps: usize,
    rng: &mut R,
) -> StateMatrix {
    let p = net.node_count();
    assert_eq!(start.len(), p, "start column length must equal node count");
    let mut states = StateMatrix::zeros(p, times);
    if times == 0 {
        return states;
    }
    let mut col = start;
    for _ in 0..sweeps {
        for g in 0..p {
            let f = initial_field_from_sum(phi, neighbor_spin_sum(net, &col, g));
            col[g] = bernoulli(conditional_prob(f, 1).to_f64_lossy(), rng);
        }
    }
    states.column_mut(0).copy_from_slice(&col);
    for t in 1..times {
        let prev = col.clone();
        for _ in 0..sweeps {
            for g in 0..p {
                let f = transition_field_from_sum(phi, neighbor_spin_sum(net, &col, g), prev[g]);
                col[g] = bernoulli(conditional_prob(f, 1).to_f64_lossy(), rng);
            }
        }
        states.column_mut(t).copy_from_slice(&col);
    }
    states
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{synthetic_pathway_network, SyntheticNetworkSpec};

    fn spec(s: Scenario) -> ScenarioSpec<f64> {
        ScenarioSpec::defaults(s)
    }

    #[test]
    fn temporal_marginals_follow_the_chain() {
        let sp = spec(Scenario::Temporal);
        let (genes, reps) = (1668, 20);
        let mut frac = vec![0.0; 6];
        for r in 0..reps {
            let (data, states) = simulate_temporal(&sp, genes, &mut seeded_rng(3, r)).unwrap();
            assert_eq!(data.genes(), genes);
            for (t, f) in frac.iter_mut().enumerate() {
                *f += states.count_de_at(t) as f64 / (genes * reps as usize) as f64;
            }
        }
        // π_t = 0.1 + 0.6 π_{t−1}, π_0 = 0.1, stationary 0.25.
        let mut pi = 0.1;
        let n = (genes * reps as usize) as f64;
        for t in 0..6 {
            let se = (pi * (1.0 - pi) / n).sqrt();
            assert!((frac[t] - pi).abs() < 3.0 * se + 1e-12, "t={t}: {} vs {pi}", frac[t]);
            assert!(pi <= 0.25);
            pi = 0.1 + 0.6 * pi;
        }
    }

    #[test]
    fn absorbing_ee_chain() {
        let mut sp = spec(Scenario::Temporal);
        sp.p_init_de = 0.0;
        sp.p_de_given_de = 0.0;
        sp.p_de_given_ee = 0.0;
        let (_, states) = simulate_temporal(&sp, 50, &mut seeded_rng(1, 0)).unwrap();
        assert_eq!(states.count_de(), 0);
    }

    #[test]
    fn generators_are_seed_deterministic() {
        let net = synthetic_pathway_network(&SyntheticNetworkSpec { nodes: 200, edges: 800, ..Default::default() }).unwrap();
        for sc in [Scenario::Temporal, Scenario::Spatial, Scenario::Spatiotemporal] {
            let sp = spec(sc);
            let a = simulate(&sp, &net, &mut seeded_rng(9, 2)).unwrap();
            let b = simulate(&sp, &net, &mut seeded_rng(9, 2)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.0.genes(), a.1.genes());
            assert_eq!(a.0.times(), a.1.times());
            assert!(a.0.values().iter().all(|v| *v > 0.0));
            let c = simulate(&sp, &net, &mut seeded_rng(9, 3)).unwrap();
            assert_ne!(a.1, c.1);
        }
    }

    #[test]
    fn decoupled_gibbs_is_a_fair_coin() {
        let net = GeneNetwork::from_index_edges(10_000, &[]).unwrap();
        let mut x = vec![0u8; 10_000];
        gibbs_sweep(&net, &mut x, 0.0, 0.0, &mut seeded_rng(2, 0));
        let de = x.iter().map(|&b| b as f64).sum::<f64>() / 1e4;
        assert!((de - 0.5).abs() < 3.0 * (0.25f64 / 1e4).sqrt());
    }

    #[test]
    fn empty_graph_gibbs_rate_is_logistic_of_intercept() {
        let net = GeneNetwork::from_index_edges(10_000, &[]).unwrap();
        let mut x = vec![1u8; 10_000];
        gibbs_sweep(&net, &mut x, -2.0, 2.0, &mut seeded_rng(4, 0));
        let want = 1.0 / (1.0 + 2f64.exp());
        let de = x.iter().map(|&b| b as f64).sum::<f64>() / 1e4;
        assert!((de - want).abs() < 3.0 * (want * (1.0 - want) / 1e4).sqrt(), "{de} vs {want}");
    }

    #[test]
    fn dense_clique_stays_de() {
        let edges: Vec<_> = (0..5).flat_map(|a| (a + 1..5).map(move |b| (a, b))).collect();
        let net = GeneNetwork::from_index_edges(5, &edges).unwrap();
        let want = 1.0 / (1.0 + (-6.0f64).exp());
        let mut rng = seeded_rng(8, 0);
        let mut kept = 0usize;
        let sweeps = 10_000;
        for _ in 0..sweeps {
            let mut x = vec![1u8; 5];
            // probability for gene 0 with four DE neighbors is logistic(6)
            let f = initial_field_from_sum(&MrfParams { gamma0: -2.0, beta0: 2.0, ..Default::default() }, neighbor_spin_sum(&net, &x, 0));
            assert!((conditional_prob(f, 1) - want).abs() < 1e-15);
            gibbs_sweep(&net, &mut x, -2.0, 2.0, &mut rng);
            kept += x[0] as usize;
        }
        let rate = kept as f64 / sweeps as f64;
        assert!((rate - want).abs() < 3.0 * (want * (1.0 - want) / sweeps as f64).sqrt() + 1e-3);
    }

    #[test]
    fn zero_sweeps_give_pathway_indicator() {
        let net = synthetic_pathway_network(&SyntheticNetworkSpec { nodes: 300, edges: 1000, ..Default::default() }).unwrap();
        let mut sp = spec(Scenario::Spatial);
        sp.gibbs_sweeps = 0;
        let (_, states) = simulate_spatial(&sp, &net, &mut seeded_rng(1, 0)).unwrap();
        let pw: Vec<_> = net.pathways().unwrap().values().collect();
        for t in 0..states.times() {
            let de: BTreeSet<usize> = (0..300).filter(|&g| states.get(g, t) == 1).collect();
            // the DE set is a union of exactly nine pathways
            let inside: Vec<_> = pw.iter().filter(|m| m.is_subset(&de)).collect();
            let union: BTreeSet<usize> = inside.iter().flat_map(|m| m.iter().copied()).collect();
            assert_eq!(union, de);
            assert!(inside.len() >= 9);
        }
    }

    #[test]
    fn too_few_pathways_is_an_error() {
        let net = synthetic_pathway_network(&SyntheticNetworkSpec { nodes: 40, edges: 60, pathways: 5, ..Default::default() }).unwrap();
        assert!(simulate_spatial(&spec(Scenario::Spatial), &net, &mut seeded_rng(1, 0)).is_err());
        let bare = GeneNetwork::from_index_edges(10, &[(0, 1)]).unwrap();
        assert!(simulate_spatiotemporal(&spec(Scenario::Spatiotemporal), &bare, &mut seeded_rng(1, 0)).is_err());
    }

    #[test]
    fn pathway_chain_starts_with_eight_and_drifts_to_stationary() {
        let sp = spec(Scenario::Spatiotemporal);
        let reps = 200;
        let mut mean_last = 0.0;
        for r in 0..reps {
            let chain = pathway_chain(&sp, 33, &mut seeded_rng(6, r)).unwrap();
            assert_eq!(chain[0].iter().filter(|&&b| b).count(), 8);
            mean_last += chain[5].iter().filter(|&&b| b).count() as f64 / reps as f64;
        }
        // E[count_t] = 33 π_t with π_0 = 8/33, π_t = 0.1 + 0.6 π_{t−1}
        let mut pi: f64 = 8.0 / 33.0;
        for _ in 0..5 {
            pi = 0.1 + 0.6 * pi;
        }
        let expected: f64 = 33.0 * pi;
        assert!((expected - 8.25).abs() < 0.05);
        // binomial-ish spread of the count is ≤ sqrt(33 · 0.25) per replicate
        assert!((mean_last - expected).abs() < 3.0 * (33.0f64 * 0.25).sqrt() / (reps as f64).sqrt());
    }

    #[test]
    fn absorbing_spatiotemporal() {
        let net = synthetic_pathway_network(&SyntheticNetworkSpec { nodes: 200, edges: 800, ..Default::default() }).unwrap();
        let mut sp = spec(Scenario::Spatiotemporal);
        sp.pathways_initially_de = 0;
        sp.p_path_de_given_de = 0.0;
        sp.p_path_de_given_ee = 0.0;
        sp.gibbs_sweeps = 0;
        let (_, states) = simulate_spatiotemporal(&sp, &net, &mut seeded_rng(1, 0)).unwrap();
        assert_eq!(states.count_de(), 0);
    }

    #[test]
    fn spatial_columns_are_clustered_and_time_independent() {
        let net = synthetic_pathway_network(&SyntheticNetworkSpec::default()).unwrap();
        let sp = spec(Scenario::Spatial);
        let (mut de_nb, mut ee_nb) = (0.0, 0.0);
        let (mut agree, mut chance) = (0.0, 0.0);
        let reps = 20;
        for r in 0..reps {
            let (_, s) = simulate_spatial(&sp, &net, &mut seeded_rng(12, r)).unwrap();
            let (mut a, mut na, mut b, mut nb) = (0.0, 0.0, 0.0, 0.0);
            for t in 0..s.times() {
                let col = s.column(t);
                for g in 0..col.len() {
                    let d = net.degree(g);
                    if d == 0 {
                        continue;
                    }
                    let frac = net.adj(g).iter().filter(|&&h| col[h] == 1).count() as f64 / d as f64;
                    if col[g] == 1 {
                        a += frac;
                        na += 1.0;
                    } else {
                        b += frac;
                        nb += 1.0;
                    }
                }
            }
            de_nb += a / na / reps as f64;
            ee_nb += b / nb / reps as f64;
            for t in 1..s.times() {
                let (c, p) = (s.column(t), s.column(t - 1));
                let n = c.len() as f64;
                let q1 = c.iter().map(|&v| v as f64).sum::<f64>() / n;
                let q0 = p.iter().map(|&v| v as f64).sum::<f64>() / n;
                agree += c.iter().zip(p).filter(|(x, y)| x == y).count() as f64 / n;
                chance += q1 * q0 + (1.0 - q1) * (1.0 - q0);
            }
        }
        assert!(de_nb > ee_nb, "{de_nb} vs {ee_nb}");
        let lags = (reps * 5) as f64;
        assert!(((agree - chance) / lags).abs() < 0.05, "{} vs {}", agree / lags, chance / lags);
    }
}
