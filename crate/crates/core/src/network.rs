//! Undirected gene network with string labels at the boundary and dense
//! indices inside.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::simulate::seeded_rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneNetwork {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<BTreeSet<usize>>,
    edge_count: usize,
    pathways: Option<BTreeMap<String, BTreeSet<usize>>>,
}

impl GeneNetwork {
    /// Empty graph over the given labels. Labels must be unique.
    pub fn with_nodes<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut net = GeneNetwork {
            labels: Vec::new(),
            index: HashMap::new(),
            adjacency: Vec::new(),
            edge_count: 0,
            pathways: None,
        };
        for label in labels {
            let label = label.into();
            if net.index.contains_key(&label) {
                return Err(Error::InvalidParameter(format!("duplicate node label {label}")));
            }
            net.add_node(label);
        }
        Ok(net)
    }

    /// Graph on nodes `0..p` labelled by their index, with the given edges.
    pub fn from_index_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut net = Self::with_nodes((0..p).map(|i| i.to_string()))?;
        for &(a, b) in edges {
            net.check(a)?;
            net.check(b)?;
            net.insert_edge(a, b);
        }
        Ok(net)
    }

    /// Parses a tab-separated edge list. `#` lines and blank lines are
    /// skipped; self-loops are dropped; duplicate and reversed edges
    /// collapse into one undirected edge.
    pub fn load_edge_list(text: &str) -> Result<Self> {
        let mut net = Self::with_nodes(Vec::<String>::new())?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 || fields.iter().any(|f| f.trim().is_empty()) {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected two tab-separated identifiers, got {:?}", line),
                });
            }
            let a = net.intern(fields[0].trim());
            let b = net.intern(fields[1].trim());
            net.insert_edge(a, b);
        }
        if net.labels.is_empty() {
            return Err(Error::EmptyInput("edge list has no edges"));
        }
        Ok(net)
    }

    /// Declares additional (possibly isolated) nodes, one identifier per line.
    pub fn add_node_list(&mut self, text: &str) {
        for line in text.lines() {
            let id = line.trim();
            if !id.is_empty() && !id.starts_with('#') {
                self.intern(id);
            }
        }
    }

    /// Reads `pathway_id<TAB>gene_id` lines. Genes must already be nodes.
    pub fn load_pathways(&mut self, text: &str) -> Result<()> {
        let mut map: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "expected pathway_id<TAB>gene_id".into(),
                });
            }
            let gene = fields[1].trim();
            let idx = self.index_of(gene).ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: format!("gene {gene} is not in the network"),
            })?;
            map.entry(fields[0].trim().to_string()).or_default().insert(idx);
        }
        self.pathways = Some(map);
        Ok(())
    }

    pub fn set_pathways(&mut self, pathways: BTreeMap<String, BTreeSet<usize>>) -> Result<()> {
        for members in pathways.values() {
            for &g in members {
                self.check(g)?;
            }
        }
        self.pathways = Some(pathways);
        Ok(())
    }

    /// Adds `label` as an isolated node if it is not present; returns its index.
    pub fn intern(&mut self, label: &str) -> usize {
        match self.index.get(label) {
            Some(&i) => i,
            None => self.add_node(label.to_string()),
        }
    }

    fn add_node(&mut self, label: String) -> usize {
        let i = self.labels.len();
        self.index.insert(label.clone(), i);
        self.labels.push(label);
        self.adjacency.push(BTreeSet::new());
        i
    }

    fn insert_edge(&mut self, a: usize, b: usize) -> bool {
        if a == b || self.adjacency[a].contains(&b) {
            return false;
        }
        self.adjacency[a].insert(b);
        self.adjacency[b].insert(a);
        self.edge_count += 1;
        true
    }

    fn remove_edge(&mut self, a: usize, b: usize) -> bool {
        if self.adjacency[a].remove(&b) {
            self.adjacency[b].remove(&a);
            self.edge_count -= 1;
            true
        } else {
            false
        }
    }

    fn check(&self, g: usize) -> Result<()> {
        if g < self.labels.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: g, len: self.labels.len() })
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, g: usize) -> &str {
        &self.labels[g]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn neighbors(&self, g: usize) -> Result<&BTreeSet<usize>> {
        self.check(g)?;
        Ok(&self.adjacency[g])
    }

    /// Unchecked neighbor access for hot loops.
    #[inline]
    pub(crate) fn adj(&self, g: usize) -> &BTreeSet<usize> {
        &self.adjacency[g]
    }

    pub fn degree(&self, g: usize) -> usize {
        self.adjacency[g].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency.get(a).is_some_and(|s| s.contains(&b))
    }

    /// Edges as `(lo, hi)` index pairs in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (a, nb) in self.adjacency.iter().enumerate() {
            out.extend(nb.range(a + 1..).map(|&b| (a, b)));
        }
        out
    }

    pub fn pathways(&self) -> Option<&BTreeMap<String, BTreeSet<usize>>> {
        self.pathways.as_ref()
    }

    /// Tab-separated edge list; isolated nodes are not representable here
    /// (see [`GeneNetwork::to_node_list`]).
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (a, b) in self.edges() {
            let _ = writeln!(s, "{}\t{}", self.labels[a], self.labels[b]);
        }
        s
    }

    pub fn to_node_list(&self) -> String {
        let mut s = String::new();
        for l in &self.labels {
            let _ = writeln!(s, "{l}");
        }
        s
    }

    pub fn to_pathway_list(&self) -> String {
        let mut s = String::new();
        if let Some(p) = &self.pathways {
            for (id, members) in p {
                for &g in members {
                    let _ = writeln!(s, "{id}\t{}", self.labels[g]);
                }
            }
        }
        s
    }

    /// Copy whose node order is `labels`. Labels unknown to this graph become
    /// isolated nodes; nodes not listed are dropped with their edges, as are
    /// pathways.
    pub fn reordered(&self, labels: &[String]) -> Result<Self> {
        let mut net = Self::with_nodes(labels.iter().cloned())?;
        for (a, b) in self.edges() {
            if let (Some(x), Some(y)) = (net.index_of(&self.labels[a]), net.index_of(&self.labels[b])) {
                net.insert_edge(x, y);
            }
        }
        Ok(net)
    }

    /// Number of unordered non-adjacent node pairs.
    pub fn absent_pair_count(&self) -> usize {
        let p = self.labels.len();
        p * p.saturating_sub(1) / 2 - self.edge_count
    }

    /// Deletes `floor(delete_fraction · |E|)` uniformly chosen edges, then
    /// adds exactly `add_count` uniformly chosen pairs that are not edges
    /// of the current graph. Node set and pathways are kept.
    pub fn perturb(&self, delete_fraction: f64, add_count: usize, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delete_fraction) {
            return Err(Error::InvalidParameter(format!(
                "delete fraction {delete_fraction} outside [0, 1]"
            )));
        }
        let mut rng = seeded_rng(seed, 0);
        let mut out = self.clone();
        let edges = self.edges();
        let n_del = (delete_fraction * edges.len() as f64 + 1e-9).floor() as usize;
        let n_del = n_del.min(edges.len());
        let mut doomed = index::sample(&mut rng, edges.len(), n_del).into_vec();
        doomed.sort_unstable();
        for i in doomed {
            let (a, b) = edges[i];
            out.remove_edge(a, b);
        }
        if add_count > out.absent_pair_count() {
            return Err(Error::InvalidParameter(format!(
                "cannot add {add_count} edges: only {} absent pairs",
                out.absent_pair_count()
            )));
        }
        let p = out.node_count();
        let mut added = 0;
        while added < add_count {
            let a = rng.random_range(0..p);
            let b = rng.random_range(0..p);
            if out.insert_edge(a, b) {
                added += 1;
            }
        }
        Ok(out)
    }
}

/// Knobs for [`synthetic_pathway_network`].
#[derive(Debug, Clone)]
pub struct SyntheticNetworkSpec {
    pub nodes: usize,
    pub edges: usize,
    pub pathways: usize,
    /// Ratio of summed pathway sizes to node count (> 1 means overlap).
    pub overlap: f64,
    /// Largest gene family; relations between families expand to all
    /// member pairs. 1 gives plain gene-to-gene wiring.
    pub max_family: usize,
    pub seed: u64,
}

impl Default for SyntheticNetworkSpec {
    fn default() -> Self {
        SyntheticNetworkSpec { nodes: 1668, edges: 8011, pathways: 33, overlap: 1.25, max_family: 4, seed: 2008 }
    }
}

/// Builds a union-of-pathways network with exactly the requested node and
/// edge counts. Every node has a home pathway; pathways then recruit extra
/// members from elsewhere until their summed size reaches
/// `overlap · nodes`. Pathway members are grouped into families of 1 to
/// `max_family` genes; each pathway is wired by a random spanning tree over
/// its families, then extra family relations are placed in pathways chosen
/// proportionally to size. A relation links every member of one family to
/// every member of the other, so all edges are intra-pathway. Once a whole
/// relation no longer fits, single member pairs fill the remaining count.
pub fn synthetic_pathway_network(spec: &SyntheticNetworkSpec) -> Result<GeneNetwork> {
    let SyntheticNetworkSpec { nodes, edges, pathways: k, overlap, max_family, seed } = *spec;
    if k == 0 || nodes < 2 * k || overlap < 1.0 || max_family == 0 {
        return Err(Error::InvalidParameter(
            "synthetic network needs nodes >= 2 * pathways, overlap >= 1 and max_family >= 1".into(),
        ));
    }
    let mut rng = seeded_rng(seed, 0);
    let width = (k as f64).log10().floor() as usize + 1;
    let node_width = (nodes as f64).log10().floor() as usize + 1;
    let mut net = GeneNetwork::with_nodes((0..nodes).map(|i| format!("G{:0w$}", i + 1, w = node_width)))?;

    // Log-normal-ish relative sizes.
    let weights: Vec<f64> = (0..k)
        .map(|_| {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            (0.6 * z).exp()
        })
        .collect();
    let wsum: f64 = weights.iter().sum();
    let min_home = 2usize;
    let mut home_sizes: Vec<usize> = weights
        .iter()
        .map(|w| ((w / wsum) * nodes as f64).floor().max(min_home as f64) as usize)
        .collect();
    // Fix rounding so home sizes partition the node set exactly.
    let mut total: usize = home_sizes.iter().sum();
    let mut i = 0;
    while total != nodes {
        let j = i % k;
        if total < nodes {
            home_sizes[j] += 1;
            total += 1;
        } else if home_sizes[j] > min_home {
            home_sizes[j] -= 1;
            total -= 1;
        }
        i += 1;
    }

    let mut order: Vec<usize> = (0..nodes).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut cursor = 0;
    for &sz in &home_sizes {
        members.push(order[cursor..cursor + sz].to_vec());
        cursor += sz;
    }

    let target_total = (overlap * nodes as f64).round() as usize;
    let extra = target_total.saturating_sub(nodes);
    for _ in 0..extra {
        let pw = weighted_pick(&weights, wsum, &mut rng);
        // A few attempts to find a node not already a member.
        for _ in 0..16 {
            let g = rng.random_range(0..nodes);
            if !members[pw].contains(&g) {
                members[pw].push(g);
                break;
            }
        }
    }

    let sizes: Vec<f64> = members.iter().map(|m| m.len() as f64).collect();
    let capacity: usize = members.iter().map(|m| m.len() * (m.len() - 1) / 2).sum();
    if capacity < edges {
        return Err(Error::InvalidParameter("pathways too small for the requested edge count".into()));
    }

    let families: Vec<Vec<&[usize]>> = members
        .iter()
        .map(|m| {
            let mut out = Vec::new();
            let mut rest = m.as_slice();
            while !rest.is_empty() {
                let size = rng.random_range(1..=max_family).min(rest.len());
                let (head, tail) = rest.split_at(size);
                out.push(head);
                rest = tail;
            }
            out
        })
        .collect();

    // Links every member of `a` to every member of `b` if that fits the
    // budget, else a single random pair.
    let relate = |net: &mut GeneNetwork, a: &[usize], b: &[usize], rng: &mut ChaCha8Rng| {
        let same = std::ptr::eq(a, b);
        let fresh = a
            .iter()
            .flat_map(|&x| b.iter().map(move |&y| (x, y)))
            .filter(|&(x, y)| if same { x < y } else { x != y } && !net.has_edge(x, y))
            .count();
        if net.edge_count() + fresh <= edges {
            for &x in a {
                for &y in b {
                    net.insert_edge(x, y);
                }
            }
        } else {
            let x = a[rng.random_range(0..a.len())];
            let y = b[rng.random_range(0..b.len())];
            net.insert_edge(x, y);
        }
    };

    // Spanning tree over each pathway's families.
    for fams in &families {
        for pos in 1..fams.len() {
            if net.edge_count() == edges {
                break;
            }
            let parent = fams[rng.random_range(0..pos)];
            relate(&mut net, fams[pos], parent, &mut rng);
        }
    }
    let ssum: f64 = sizes.iter().sum();
    while net.edge_count() < edges {
        let fams = &families[weighted_pick(&sizes, ssum, &mut rng)];
        let a = fams[rng.random_range(0..fams.len())];
        let b = fams[rng.random_range(0..fams.len())];
        // Picking the same family twice links its members pairwise.
        relate(&mut net, a, b, &mut rng);
    }

    let map = members
        .into_iter()
        .enumerate()
        .map(|(i, m)| (format!("P{:0w$}", i + 1, w = width), m.into_iter().collect()))
        .collect();
    net.pathways = Some(map);
    Ok(net)
}

fn weighted_pick<R: Rng>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_invariants(net: &GeneNetwork) {
        let mut half = 0;
        for g in 0..net.node_count() {
            let nb = net.neighbors(g).unwrap();
            assert!(!nb.contains(&g), "self-loop at {g}");
            for &h in nb {
                assert!(h < net.node_count());
                assert!(net.neighbors(h).unwrap().contains(&g), "asymmetric {g}-{h}");
            }
            half += nb.len();
        }
        assert_eq!(half, 2 * net.edge_count());
    }

    #[test]
    fn parses_path() {
        let net = GeneNetwork::load_edge_list("A\tB\nB\tC").unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.edge_count(), 2);
        let b = net.index_of("B").unwrap();
        let nb: Vec<&str> = net.neighbors(b).unwrap().iter().map(|&i| net.label(i)).collect();
        assert_eq!(nb, vec!["A", "C"]);
        assert_invariants(&net);
    }

    #[test]
    fn drops_self_loops_and_duplicates() {
        let net = GeneNetwork::load_edge_list("A\tA").unwrap();
        assert_eq!(net.node_count(), 1);
        assert_eq!(net.edge_count(), 0);
        let net = GeneNetwork::load_edge_list("# header\nA\tB\nB\tA\n\nA\tB\n").unwrap();
        assert_eq!(net.edge_count(), 1);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        match GeneNetwork::load_edge_list("A\tB\nA B C\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(GeneNetwork::load_edge_list("X\tY\tZ"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(GeneNetwork::load_edge_list("# only comments\n\n"), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn neighbor_queries() {
        let tri = GeneNetwork::from_index_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(tri.neighbors(0).unwrap().iter().copied().collect::<Vec<_>>(), vec![1, 2]);
        let mut iso = GeneNetwork::load_edge_list("A\tB").unwrap();
        let c = iso.intern("C");
        assert!(iso.neighbors(c).unwrap().is_empty());
        assert!(matches!(iso.neighbors(7), Err(Error::IndexOutOfRange { index: 7, len: 3 })));
    }

    #[test]
    fn node_list_adds_isolated_nodes() {
        let mut net = GeneNetwork::load_edge_list("A\tB").unwrap();
        net.add_node_list("A\nZ\n\n# c\nY\n");
        assert_eq!(net.node_count(), 4);
        assert_eq!(net.edge_count(), 1);
    }

    #[test]
    fn pathway_file_requires_known_genes() {
        let mut net = GeneNetwork::load_edge_list("A\tB\nB\tC").unwrap();
        net.load_pathways("P1\tA\nP1\tB\nP2\tC\n").unwrap();
        assert_eq!(net.pathways().unwrap().len(), 2);
        assert!(net.load_pathways("P1\tQ\n").is_err());
    }

    #[test]
    fn serialization_round_trips_edges() {
        let net = GeneNetwork::load_edge_list("A\tB\nC\tB\nD\tA\n").unwrap();
        let again = GeneNetwork::load_edge_list(&net.to_edge_list()).unwrap();
        let named = |n: &GeneNetwork| {
            let mut v: Vec<(String, String)> = n
                .edges()
                .into_iter()
                .map(|(a, b)| {
                    let (x, y) = (n.label(a).to_string(), n.label(b).to_string());
                    if x < y { (x, y) } else { (y, x) }
                })
                .collect();
            v.sort();
            v
        };
        assert_eq!(named(&net), named(&again));
    }

    #[test]
    fn identity_perturbation() {
        let net = GeneNetwork::from_index_edges(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let same = net.perturb(0.0, 0, 9).unwrap();
        assert_eq!(same.edges(), net.edges());
    }

    #[test]
    fn delete_half_add_five_on_ten_edges() {
        let edges: Vec<(usize, usize)> = (0..10).map(|i| (i, i + 1)).collect();
        let net = GeneNetwork::from_index_edges(11, &edges).unwrap();
        let out = net.perturb(0.5, 5, 3).unwrap();
        assert_eq!(out.edge_count(), 10);
        let kept = out.edges().iter().filter(|e| net.has_edge(e.0, e.1)).count();
        assert_eq!(kept, 5);
        assert_invariants(&out);
    }

    #[test]
    fn perturbation_errors() {
        let net = GeneNetwork::from_index_edges(3, &[(0, 1)]).unwrap();
        assert!(net.perturb(1.5, 0, 0).is_err());
        assert!(net.perturb(-0.1, 0, 0).is_err());
        // three pairs in total; after deleting nothing, two are absent
        assert!(net.perturb(0.0, 3, 0).is_err());
        assert_eq!(net.perturb(0.0, 2, 0).unwrap().edge_count(), 3);
    }

    #[test]
    fn synthetic_network_has_requested_shape() {
        let net = synthetic_pathway_network(&SyntheticNetworkSpec::default()).unwrap();
        assert_eq!(net.node_count(), 1668);
        assert_eq!(net.edge_count(), 8011);
        assert_eq!(net.pathways().unwrap().len(), 33);
        assert_invariants(&net);
        let covered: BTreeSet<usize> = net.pathways().unwrap().values().flatten().copied().collect();
        assert_eq!(covered.len(), 1668);
        for (a, b) in net.edges() {
            assert!(net.pathways().unwrap().values().any(|m| m.contains(&a) && m.contains(&b)));
        }
        let again = synthetic_pathway_network(&SyntheticNetworkSpec::default()).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn paper_scale_deletions() {
        let net = synthetic_pathway_network(&SyntheticNetworkSpec::default()).unwrap();
        assert_eq!(net.perturb(0.10, 0, 1).unwrap().edge_count(), 7210);
        assert_eq!(net.perturb(0.30, 0, 1).unwrap().edge_count(), 8011 - 2403);
        assert_eq!(net.perturb(0.50, 0, 1).unwrap().edge_count(), 8011 - 4005);
        assert_eq!(net.perturb(0.30, 2403, 1).unwrap().edge_count(), 8011);
    }

    #[test]
    fn reordering_keeps_edges_by_label() {
        let net = GeneNetwork::load_edge_list("A\tB\nB\tC\n").unwrap();
        let order: Vec<String> = ["C", "B", "X"].iter().map(|s| s.to_string()).collect();
        let r = net.reordered(&order).unwrap();
        assert_eq!(r.node_count(), 3);
        assert_eq!(r.edge_count(), 1);
        assert!(r.has_edge(0, 1));
        assert_eq!(r.degree(2), 0);
    }
}
