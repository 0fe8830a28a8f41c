use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use stmrf_core::evaluate::aggregate_replicates;
use stmrf_core::inference::fit as fit_states;
use stmrf_core::io::{
    align_states, fmt_sig, read_expression, read_states, write_aggregate, write_expression, write_key_values,
    write_metrics, write_states, write_trace,
};
use stmrf_core::network::{synthetic_pathway_network, SyntheticNetworkSpec};
use stmrf_core::simulate::{seeded_rng, simulate as simulate_dataset};
use stmrf_core::{confusion_metrics, FitConfig, FitMode, GeneNetwork, GgParams, Scenario, ScenarioSpec};

use crate::manifest::{Manifest, FILE_NAME as MANIFEST};
use crate::{EvalArgs, FitArgs, ModeArg, PerturbArgs, ScenarioArg, SimulateArgs, SynthArgs};

pub type CmdError = Box<dyn std::error::Error + Send + Sync>;
pub type CmdResult = Result<u8, CmdError>;

const NON_CONVERGED: u8 = 3;

fn read(path: &Path) -> Result<Vec<u8>, CmdError> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn read_text(path: &Path) -> Result<(String, Vec<u8>), CmdError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| format!("{}: not valid UTF-8", path.display()))?;
    Ok((text, bytes))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CmdError> {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn create_dir(path: &Path) -> Result<(), CmdError> {
    fs::create_dir_all(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn replicate_dir(root: &Path, r: usize) -> PathBuf {
    root.join(format!("rep{:03}", r + 1))
}

fn load_network(
    network: &Path,
    nodes: Option<&Path>,
    pathways: Option<&Path>,
    manifest: &mut Manifest,
) -> Result<GeneNetwork, CmdError> {
    let (text, bytes) = read_text(network)?;
    manifest.input(network, &bytes);
    let mut net = GeneNetwork::load_edge_list(&text).map_err(|e| format!("{}: {e}", network.display()))?;
    if let Some(path) = nodes {
        let (text, bytes) = read_text(path)?;
        manifest.input(path, &bytes);
        net.add_node_list(&text);
    }
    if let Some(path) = pathways {
        let (text, bytes) = read_text(path)?;
        manifest.input(path, &bytes);
        net.load_pathways(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(net)
}

fn thread_pool(jobs: u64) -> Result<rayon::ThreadPool, CmdError> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs as usize).build()?)
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let scenario = match a.scenario {
        ScenarioArg::Temporal => Scenario::Temporal,
        ScenarioArg::Spatial => Scenario::Spatial,
        ScenarioArg::Spatiotemporal => Scenario::Spatiotemporal,
    };
    let mut base = Manifest::new("simulate", Some(a.seed));
    let net = load_network(&a.network, a.nodes.as_deref(), a.pathways.as_deref(), &mut base)?;

    let mut spec = ScenarioSpec::<f64>::defaults(scenario);
    spec.time_points = a.timepoints as usize;
    spec.replicates_per_condition = a.reps as usize;
    spec.theta = GgParams::new(a.theta[0], a.theta[1], a.theta[2])?;
    spec.p_init_de = a.p_init_de;
    spec.p_de_given_de = a.p_de_given_de;
    spec.p_de_given_ee = a.p_de_given_ee;
    spec.gamma0 = a.gamma0;
    spec.beta0 = a.beta0;
    spec.gibbs_sweeps = a.gibbs_sweeps;
    if let Some(k) = a.pathways_de {
        spec.pathways_initially_de = k;
    }
    spec.p_path_de_given_ee = a.p_path_de_given_ee;
    spec.p_path_de_given_de = a.p_path_de_given_de;
    spec.seed = a.seed;
    spec.validate()?;

    for (k, v) in spec.metadata() {
        base.config(&k, v);
    }
    base.config("replicates", a.replicates).config("jobs", a.jobs);
    for (name, v) in ["alpha", "alpha0", "nu"].iter().zip(a.theta) {
        base.parameter(name, v);
    }
    base.parameter("gamma0", a.gamma0).parameter("beta0", a.beta0);

    create_dir(&a.out)?;
    let one = |r: usize, dir: &Path| -> Result<(), CmdError> {
        create_dir(dir)?;
        let (data, truth) = simulate_dataset(&spec, &net, &mut seeded_rng(a.seed, r as u64))?;
        write(&dir.join("expression.tsv"), write_expression(net.labels(), &data)?)?;
        write(&dir.join("truth.tsv"), write_states(net.labels(), &truth)?)?;
        let mut meta = spec.metadata();
        meta.push(("rng_stream".into(), r.to_string()));
        write(&dir.join("metadata.tsv"), write_key_values(meta.iter().map(|(k, v)| (k.as_str(), v.clone()))))?;
        let mut manifest = Manifest::new("simulate", Some(a.seed));
        manifest.config("replicate", r + 1);
        manifest.config("rng_stream", r);
        manifest.merge(&base);
        manifest.write(&dir.join(MANIFEST))?;
        Ok(())
    };
    if a.replicates == 1 {
        one(0, &a.out)?;
    } else {
        thread_pool(a.jobs)?
            .install(|| (0..a.replicates as usize).into_par_iter().try_for_each(|r| one(r, &replicate_dir(&a.out, r))))?;
        base.write(&a.out.join(MANIFEST))?;
    }
    Ok(0)
}

pub fn fit(a: &FitArgs) -> CmdResult {
    let mut base = Manifest::new("fit", Some(a.seed));
    let net = load_network(&a.network, a.nodes.as_deref(), None, &mut base)?;
    let mode = match a.mode {
        ModeArg::Full => FitMode::Full,
        ModeArg::Hmm => FitMode::TemporalOnly,
        ModeArg::Hmrf => FitMode::SpatialOnly,
    };
    let config = FitConfig::<f64> {
        epsilon: a.epsilon,
        max_cycles: a.max_cycles as usize,
        ttest_alpha: a.ttest_alpha,
        mode,
        seed: a.seed,
    };
    base.config("mode", mode.name())
        .config("epsilon", a.epsilon)
        .config("max_cycles", a.max_cycles)
        .config("ttest_alpha", a.ttest_alpha);

    let one = |expr: &Path, out: &Path| -> CmdResult {
        create_dir(out)?;
        let mut manifest = Manifest::new("fit", Some(a.seed));
        manifest.merge(&base);
        let (text, bytes) = read_text(expr)?;
        manifest.input(expr, &bytes);
        let (labels, data) = read_expression::<f64>(&text).map_err(|e| format!("{}: {e}", expr.display()))?;
        let local = match_genes(&net, &labels)?;
        let result = fit_states(&data, &local, &config)?;

        write(&out.join("states.tsv"), write_states(&labels, &result.states)?)?;
        write(&out.join("initial_states.tsv"), write_states(&labels, &result.initial_states)?)?;
        write(&out.join("trace.tsv"), write_trace(&result.trace))?;
        let names = ["gamma0", "beta0", "gamma", "beta1", "beta2", "alpha", "alpha0", "nu"];
        let values: Vec<f64> = result.phi.to_array().into_iter().chain(result.theta.to_array()).collect();
        let mut rows: Vec<(&str, String)> = names.iter().zip(&values).map(|(n, &v)| (*n, fmt_sig(v))).collect();
        rows.push(("cycles", result.cycles_used.to_string()));
        rows.push(("converged", u8::from(result.converged).to_string()));
        write(&out.join("params.tsv"), write_key_values(rows))?;
        for (n, &v) in names.iter().zip(&values) {
            manifest.parameter(n, v);
        }
        manifest.config("converged", result.converged).config("cycles", result.cycles_used);
        manifest.write(&out.join(MANIFEST))?;
        if result.converged {
            Ok(0)
        } else {
            eprintln!("warning: {}: stopped after {} cycles without converging", expr.display(), result.cycles_used);
            Ok(NON_CONVERGED)
        }
    };

    create_dir(&a.out)?;
    match a.replicates {
        None => one(&a.expr, &a.out),
        Some(reps) => {
            let codes = thread_pool(a.jobs)?.install(|| {
                (0..reps as usize)
                    .into_par_iter()
                    .map(|r| one(&replicate_dir(&a.expr, r).join("expression.tsv"), &replicate_dir(&a.out, r)))
                    .collect::<Result<Vec<u8>, CmdError>>()
            })?;
            base.config("replicates", reps).config("jobs", a.jobs);
            base.write(&a.out.join(MANIFEST))?;
            Ok(codes.into_iter().max().unwrap_or(0))
        }
    }
}

/// Network reordered to the expression genes. Expression genes missing from
/// the network join as isolated nodes; network genes without data are an error.
fn match_genes(net: &GeneNetwork, labels: &[String]) -> Result<GeneNetwork, CmdError> {
    let expressed: HashSet<&str> = labels.iter().map(String::as_str).collect();
    let unmatched: Vec<&str> = net.labels().iter().map(String::as_str).filter(|l| !expressed.contains(l)).collect();
    let shared = net.node_count() - unmatched.len();
    if shared == 0 {
        return Err("network and expression data share no genes".into());
    }
    if !unmatched.is_empty() {
        let shown: Vec<&str> = unmatched.iter().take(20).copied().collect();
        return Err(format!(
            "{} network genes have no expression data: {}{}",
            unmatched.len(),
            shown.join(", "),
            if unmatched.len() > shown.len() { ", ..." } else { "" }
        )
        .into());
    }
    let isolated = labels.len() - shared;
    if isolated > 0 {
        eprintln!("warning: {isolated} expressed genes are not in the network; added as isolated nodes");
    }
    Ok(net.reordered(labels)?)
}

pub fn eval(a: &EvalArgs) -> CmdResult {
    if a.est.len() != a.truth.len() {
        return Err(format!("{} --est files but {} --truth files", a.est.len(), a.truth.len()).into());
    }
    let mut manifest = Manifest::new("eval", None);
    manifest.config("method", a.method.as_str()).config("scenario", a.scenario.as_str());
    let mut rows = Vec::with_capacity(a.est.len());
    for (r, (est_path, truth_path)) in a.est.iter().zip(&a.truth).enumerate() {
        let (est_text, est_bytes) = read_text(est_path)?;
        let (truth_text, truth_bytes) = read_text(truth_path)?;
        manifest.input(est_path, &est_bytes).input(truth_path, &truth_bytes);
        let (est_labels, est) = read_states(&est_text).map_err(|e| format!("{}: {e}", est_path.display()))?;
        let (truth_labels, truth) = read_states(&truth_text).map_err(|e| format!("{}: {e}", truth_path.display()))?;
        let truth = align_states(&truth, &truth_labels, &est_labels)?;
        rows.push((r + 1, confusion_metrics(&est, &truth)?));
    }
    create_dir(&a.out)?;
    write(&a.out.join("metrics.tsv"), write_metrics(&rows))?;
    let per_rep: Vec<_> = rows.into_iter().map(|(_, m)| m).collect();
    let summary = aggregate_replicates(&per_rep)?;
    write(&a.out.join("aggregate.tsv"), write_aggregate(&[(a.method.as_str(), a.scenario.as_str(), summary)]))?;
    manifest.write(&a.out.join(MANIFEST))?;
    Ok(0)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn perturb(a: &PerturbArgs) -> CmdResult {
    let mut manifest = Manifest::new("perturb", Some(a.seed));
    let net = load_network(&a.network, a.nodes.as_deref(), None, &mut manifest)?;
    let out = net.perturb(a.del_frac, a.add_count, a.seed)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write(&a.out, out.to_edge_list())?;
    write(&sibling(&a.out, ".nodes"), out.to_node_list())?;
    manifest
        .config("del_frac", a.del_frac)
        .config("add_count", a.add_count)
        .config("edges_in", net.edge_count())
        .config("edges_out", out.edge_count());
    manifest.write(&sibling(&a.out, ".manifest.json"))?;
    Ok(0)
}

pub fn synth_network(a: &SynthArgs) -> CmdResult {
    let spec = SyntheticNetworkSpec { seed: a.seed, ..Default::default() };
    let net = synthetic_pathway_network(&spec)?;
    create_dir(&a.out)?;
    write(&a.out.join("network.tsv"), net.to_edge_list())?;
    write(&a.out.join("nodes.tsv"), net.to_node_list())?;
    write(&a.out.join("pathways.tsv"), net.to_pathway_list())?;
    let mut manifest = Manifest::new("synth-network", Some(a.seed));
    manifest
        .config("nodes", spec.nodes)
        .config("edges", spec.edges)
        .config("pathways", spec.pathways)
        .config("overlap", spec.overlap)
        .config("max_family", spec.max_family);
    manifest.write(&a.out.join(MANIFEST))?;
    Ok(0)
}
