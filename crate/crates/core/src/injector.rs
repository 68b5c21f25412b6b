//! Planting ground-truth anomalies into a clean graph.
//!
//! Topology anomalies are disjoint groups of randomly chosen nodes wired into
//! cliques, optionally with a fraction of the new clique edges removed again.
//! Attribute anomalies copy the attribute row of the most distant node among
//! a random candidate set.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    #[default]
    None,
    Topology,
    Attribute,
}

impl AnomalyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyKind::None => "none",
            AnomalyKind::Topology => "topology",
            AnomalyKind::Attribute => "attribute",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(AnomalyKind::None),
            "topology" => Some(AnomalyKind::Topology),
            "attribute" => Some(AnomalyKind::Attribute),
            _ => None,
        }
    }
}

/// Per-node anomaly tags. A node is anomalous iff its kind is not `None`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    kinds: Vec<AnomalyKind>,
}

impl GroundTruth {
    pub fn clean(n: usize) -> Self {
        GroundTruth {
            kinds: vec![AnomalyKind::None; n],
        }
    }

    pub fn from_kinds(kinds: Vec<AnomalyKind>) -> Self {
        GroundTruth { kinds }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kinds(&self) -> &[AnomalyKind] {
        &self.kinds
    }

    pub fn kind(&self, node: usize) -> AnomalyKind {
        self.kinds[node]
    }

    pub fn labels(&self) -> Vec<bool> {
        self.kinds.iter().map(|k| *k != AnomalyKind::None).collect()
    }

    pub fn count(&self, kind: AnomalyKind) -> usize {
        self.kinds.iter().filter(|&&k| k == kind).count()
    }

    pub fn anomaly_count(&self) -> usize {
        self.len() - self.count(AnomalyKind::None)
    }

    fn unlabeled(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&v| self.kinds[v] == AnomalyKind::None)
            .collect()
    }

    /// CSV `node_id,label,kind` with a header row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node_id,label,kind")?;
        for (i, k) in self.kinds.iter().enumerate() {
            writeln!(w, "{i},{},{}", u8::from(*k != AnomalyKind::None), k.as_str())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut kinds = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() || (line_no == 1 && line.starts_with("node_id")) {
                continue;
            }
            let bad = |message: String| Error::Parse { line: line_no, message };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, got {}", fields.len())));
            }
            let id: usize = fields[0]
                .parse()
                .map_err(|_| bad(format!("bad node id {:?}", fields[0])))?;
            if id != kinds.len() {
                return Err(bad(format!("expected node id {}, got {id}", kinds.len())));
            }
            let kind = AnomalyKind::parse(fields[2]).ok_or_else(|| bad(format!("unknown kind {:?}", fields[2])))?;
            let label = fields[1] == "1";
            if label != (kind != AnomalyKind::None) {
                return Err(bad("label disagrees with kind".into()));
            }
            kinds.push(kind);
        }
        Ok(GroundTruth { kinds })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InjectionConfig {
    /// Nodes per injected clique.
    pub clique_size: usize,
    pub clique_count: usize,
    /// Fraction of each clique's new edges removed after wiring.
    pub edge_drop_ratio: f64,
    pub attr_anomaly_count: usize,
    /// Candidates examined per attribute anomaly.
    pub candidate_set_size: usize,
    pub seed: u64,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        InjectionConfig {
            clique_size: 15,
            clique_count: 5,
            edge_drop_ratio: 0.0,
            attr_anomaly_count: 75,
            candidate_set_size: 50,
            seed: 0,
        }
    }
}

impl InjectionConfig {
    pub fn topology_anomaly_count(&self) -> usize {
        self.clique_size * self.clique_count
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.edge_drop_ratio) {
            return Err(Error::Config(format!(
                "edge_drop_ratio must lie in [0, 1), got {}",
                self.edge_drop_ratio
            )));
        }
        let topo = self.topology_anomaly_count();
        if topo + self.attr_anomaly_count > n {
            return Err(Error::Capacity(format!(
                "{topo} topology + {} attribute anomalies exceed {n} nodes",
                self.attr_anomaly_count
            )));
        }
        if self.attr_anomaly_count > 0 && (self.candidate_set_size == 0 || self.candidate_set_size > n - 1) {
            return Err(Error::Capacity(format!(
                "candidate set size {} must lie in [1, {}]",
                self.candidate_set_size,
                n - 1
            )));
        }
        Ok(())
    }
}

/// Where anomalies were planted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InjectionLog {
    /// Members of each clique, sorted.
    pub cliques: Vec<Vec<usize>>,
    /// Clique edges dropped after wiring, all cliques together.
    pub removed_edges: Vec<(usize, usize)>,
    /// `(target, source)`: the target received the source's attribute row.
    pub attribute_copies: Vec<(usize, usize)>,
}

/// Number of new clique edges removed per clique: `floor(r * C(m, 2))`.
pub fn dropped_edges_per_clique(clique_size: usize, ratio: f64) -> usize {
    let pairs = clique_size * clique_size.saturating_sub(1) / 2;
    (ratio * pairs as f64).floor() as usize
}

/// Wires `clique_count` disjoint groups of `clique_size` unlabeled nodes into
/// cliques and tags them as topology anomalies.
pub fn inject_topology_anomalies<T: Scalar, R: Rng + ?Sized>(
    graph: &AttributedGraph<T>,
    truth: &GroundTruth,
    config: &InjectionConfig,
    rng: &mut R,
) -> Result<(AttributedGraph<T>, GroundTruth)> {
    inject_topology_logged(graph, truth, config, rng, &mut InjectionLog::default())
}

fn inject_topology_logged<T: Scalar, R: Rng + ?Sized>(
    graph: &AttributedGraph<T>,
    truth: &GroundTruth,
    config: &InjectionConfig,
    rng: &mut R,
    log: &mut InjectionLog,
) -> Result<(AttributedGraph<T>, GroundTruth)> {
    let n = graph.node_count();
    if truth.len() != n {
        return Err(Error::Shape(format!(
            "ground truth has {} nodes, graph {n}",
            truth.len()
        )));
    }
    if !(0.0..1.0).contains(&config.edge_drop_ratio) {
        return Err(Error::Config(format!(
            "edge_drop_ratio must lie in [0, 1), got {}",
            config.edge_drop_ratio
        )));
    }
    let mut pool = truth.unlabeled();
    if config.topology_anomaly_count() > pool.len() {
        return Err(Error::Capacity(format!(
            "{} clique members requested, {} unlabeled nodes available",
            config.topology_anomaly_count(),
            pool.len()
        )));
    }

    let mut edges: BTreeSet<(usize, usize)> = graph.edges().iter().copied().collect();
    let mut kinds = truth.kinds.clone();
    let drop = dropped_edges_per_clique(config.clique_size, config.edge_drop_ratio);

    for _ in 0..config.clique_count {
        let picks = index::sample(rng, pool.len(), config.clique_size).into_vec();
        let mut members: Vec<usize> = picks.iter().map(|&i| pool[i]).collect();
        let mut taken = picks;
        taken.sort_unstable_by(|a, b| b.cmp(a));
        for i in taken {
            pool.swap_remove(i);
        }
        // swap_remove perturbs pool order; restore it so later rounds do not
        // depend on removal order
        pool.sort_unstable();
        members.sort_unstable();

        let mut added = Vec::new();
        for (a, &u) in members.iter().enumerate() {
            for &v in &members[a + 1..] {
                if edges.insert((u, v)) {
                    added.push((u, v));
                }
            }
        }
        let remove = drop.min(added.len());
        if remove > 0 {
            let mut gone: Vec<(usize, usize)> = index::sample(rng, added.len(), remove)
                .into_iter()
                .map(|i| added[i])
                .collect();
            gone.sort_unstable();
            for e in &gone {
                edges.remove(e);
            }
            log.removed_edges.extend(gone);
        }
        for &v in &members {
            kinds[v] = AnomalyKind::Topology;
        }
        log.cliques.push(members);
    }

    Ok((graph.with_edges(edges)?, GroundTruth { kinds }))
}

/// Replaces the attributes of `attr_anomaly_count` unlabeled nodes with the
/// row of the most distant of `candidate_set_size` random other nodes.
/// Distance ties go to the lowest candidate id.
pub fn inject_attribute_anomalies<T: Scalar, R: Rng + ?Sized>(
    graph: &AttributedGraph<T>,
    truth: &GroundTruth,
    config: &InjectionConfig,
    rng: &mut R,
) -> Result<(AttributedGraph<T>, GroundTruth)> {
    inject_attribute_logged(graph, truth, config, rng, &mut InjectionLog::default())
}

fn inject_attribute_logged<T: Scalar, R: Rng + ?Sized>(
    graph: &AttributedGraph<T>,
    truth: &GroundTruth,
    config: &InjectionConfig,
    rng: &mut R,
    log: &mut InjectionLog,
) -> Result<(AttributedGraph<T>, GroundTruth)> {
    let n = graph.node_count();
    if truth.len() != n {
        return Err(Error::Shape(format!(
            "ground truth has {} nodes, graph {n}",
            truth.len()
        )));
    }
    let mut pool = truth.unlabeled();
    if config.attr_anomaly_count > pool.len() {
        return Err(Error::Capacity(format!(
            "{} attribute anomalies requested, {} unlabeled nodes available",
            config.attr_anomaly_count,
            pool.len()
        )));
    }
    if config.attr_anomaly_count > 0 && (config.candidate_set_size == 0 || config.candidate_set_size > n - 1) {
        return Err(Error::Capacity(format!(
            "candidate set size {} must lie in [1, {}]",
            config.candidate_set_size,
            n - 1
        )));
    }

    let mut attributes = graph.attributes().clone();
    let mut kinds = truth.kinds.clone();
    for _ in 0..config.attr_anomaly_count {
        let target = pool.remove(rng.gen_range(0..pool.len()));
        // candidates drawn from all nodes except the target
        let mut candidates: Vec<usize> = index::sample(rng, n - 1, config.candidate_set_size)
            .into_iter()
            .map(|c| if c >= target { c + 1 } else { c })
            .collect();
        candidates.sort_unstable();

        let row = attributes.row(target);
        let mut best = candidates[0];
        let mut best_dist = T::neg_infinity();
        for &c in &candidates {
            let dist: T = row
                .iter()
                .zip(attributes.row(c))
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            if dist > best_dist {
                best_dist = dist;
                best = c;
            }
        }
        let replacement = attributes.row(best).to_owned();
        attributes.row_mut(target).assign(&replacement);
        kinds[target] = AnomalyKind::Attribute;
        log.attribute_copies.push((target, best));
    }

    Ok((graph.with_attributes(attributes)?, GroundTruth { kinds }))
}

/// Topology injection followed by attribute injection on the same rng.
pub fn inject<T: Scalar, R: Rng + ?Sized>(
    graph: &AttributedGraph<T>,
    config: &InjectionConfig,
    rng: &mut R,
) -> Result<(AttributedGraph<T>, GroundTruth)> {
    inject_logged(graph, config, rng).map(|(g, truth, _)| (g, truth))
}

/// [`inject`], also returning what was planted where.
pub fn inject_logged<T: Scalar, R: Rng + ?Sized>(
    graph: &AttributedGraph<T>,
    config: &InjectionConfig,
    rng: &mut R,
) -> Result<(AttributedGraph<T>, GroundTruth, InjectionLog)> {
    config.validate(graph.node_count())?;
    let mut log = InjectionLog::default();
    let clean = GroundTruth::clean(graph.node_count());
    let (g, truth) = inject_topology_logged(graph, &clean, config, rng, &mut log)?;
    let (g, truth) = inject_attribute_logged(&g, &truth, config, rng, &mut log)?;
    Ok((g, truth, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn empty_graph(n: usize, d: usize) -> AttributedGraph<f64> {
        let attrs = Array2::from_shape_fn((n, d), |(i, j)| ((i * 31 + j * 7) % 11) as f64);
        AttributedGraph::new(Vec::new(), attrs).unwrap()
    }

    fn induced_edges(g: &AttributedGraph<f64>, members: &[usize]) -> usize {
        let mut count = 0;
        for (a, &u) in members.iter().enumerate() {
            for &v in &members[a + 1..] {
                count += usize::from(g.has_edge(u, v));
            }
        }
        count
    }

    fn cliques(truth: &GroundTruth) -> Vec<usize> {
        (0..truth.len())
            .filter(|&v| truth.kind(v) == AnomalyKind::Topology)
            .collect()
    }

    #[test]
    fn complete_cliques_without_drop() {
        let g = empty_graph(100, 3);
        let cfg = InjectionConfig {
            clique_size: 6,
            clique_count: 3,
            attr_anomaly_count: 0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (out, truth) = inject_topology_anomalies(&g, &GroundTruth::clean(100), &cfg, &mut rng).unwrap();
        assert_eq!(truth.count(AnomalyKind::Topology), 18);
        assert_eq!(out.edge_count(), 3 * 15);
        // every member has exactly 5 neighbours, all inside its clique
        for v in cliques(&truth) {
            assert_eq!(out.degree(v), 5);
        }
        assert_eq!(out.attributes(), g.attributes());
    }

    #[test]
    fn drop_ratio_removes_floor_of_new_edges() {
        assert_eq!(dropped_edges_per_clique(15, 0.1), 10);
        assert_eq!(dropped_edges_per_clique(15, 0.0), 0);
        let g = empty_graph(200, 2);
        let cfg = InjectionConfig {
            clique_count: 2,
            edge_drop_ratio: 0.1,
            attr_anomaly_count: 0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (out, truth) = inject_topology_anomalies(&g, &GroundTruth::clean(200), &cfg, &mut rng).unwrap();
        assert_eq!(out.edge_count(), 2 * (105 - 10));
        assert_eq!(truth.count(AnomalyKind::Topology), 30);
    }

    #[test]
    fn existing_edges_kept_and_never_dropped() {
        // complete graph on 15 nodes: nothing new to add, nothing to drop
        let mut edges = Vec::new();
        for u in 0..15 {
            for v in u + 1..15 {
                edges.push((u, v));
            }
        }
        let g = AttributedGraph::new(edges, Array2::<f64>::zeros((15, 1))).unwrap();
        let cfg = InjectionConfig {
            clique_count: 1,
            edge_drop_ratio: 0.5,
            attr_anomaly_count: 0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (out, _) = inject_topology_anomalies(&g, &GroundTruth::clean(15), &cfg, &mut rng).unwrap();
        assert_eq!(out.edges(), g.edges());
        assert_eq!(induced_edges(&out, &(0..15).collect::<Vec<_>>()), 105);
    }

    #[test]
    fn unique_farthest_candidate_is_copied() {
        // node 0 differs from everyone; all other rows identical
        let mut attrs = Array2::<f64>::zeros((6, 2));
        attrs[[0, 0]] = 5.0;
        let g = AttributedGraph::new(vec![(1, 2)], attrs).unwrap();
        let mut truth = GroundTruth::clean(6);
        truth.kinds[0] = AnomalyKind::Topology;
        let cfg = InjectionConfig {
            clique_count: 0,
            attr_anomaly_count: 1,
            candidate_set_size: 5,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, t) = inject_attribute_anomalies(&g, &truth, &cfg, &mut rng).unwrap();
        let target = (0..6).find(|&v| t.kind(v) == AnomalyKind::Attribute).unwrap();
        assert_ne!(target, 0);
        assert_eq!(out.attribute_row(target)[0], 5.0);
        assert_eq!(out.edges(), g.edges());
    }

    #[test]
    fn attribute_rows_copied_from_pre_injection_rows() {
        let g = empty_graph(120, 4);
        let cfg = InjectionConfig {
            clique_size: 5,
            clique_count: 4,
            attr_anomaly_count: 20,
            candidate_set_size: 30,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (out, truth) = inject(&g, &cfg, &mut rng).unwrap();
        assert_eq!(truth.count(AnomalyKind::Topology), 20);
        assert_eq!(truth.count(AnomalyKind::Attribute), 20);
        for v in 0..120 {
            if truth.kind(v) == AnomalyKind::Attribute {
                let row = out.attribute_row(v);
                assert!((0..120).any(|j| g.attribute_row(j) == row));
            } else {
                assert_eq!(out.attribute_row(v), g.attribute_row(v));
            }
        }
    }

    #[test]
    fn capacity_and_config_errors() {
        let g = empty_graph(20, 2);
        let cfg = InjectionConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(inject(&g, &cfg, &mut rng), Err(Error::Capacity(_))));
        let bad = InjectionConfig {
            clique_size: 3,
            clique_count: 1,
            attr_anomaly_count: 1,
            candidate_set_size: 20,
            ..Default::default()
        };
        assert!(matches!(inject(&g, &bad, &mut rng), Err(Error::Capacity(_))));
        let ratio = InjectionConfig {
            edge_drop_ratio: 1.0,
            ..bad
        };
        assert!(matches!(inject(&g, &ratio, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn same_seed_same_output() {
        let g = empty_graph(150, 3);
        let cfg = InjectionConfig {
            clique_size: 8,
            clique_count: 3,
            edge_drop_ratio: 0.2,
            attr_anomaly_count: 10,
            candidate_set_size: 20,
            seed: 5,
        };
        let run = || inject(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
        assert_eq!(run(), run());
    }

    #[test]
    fn log_matches_planted_anomalies() {
        let g = empty_graph(120, 4);
        let cfg = InjectionConfig {
            clique_size: 8,
            clique_count: 2,
            edge_drop_ratio: 0.25,
            attr_anomaly_count: 10,
            candidate_set_size: 20,
            seed: 0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (out, truth, log) = inject_logged(&g, &cfg, &mut rng).unwrap();
        assert_eq!(log.cliques.len(), 2);
        assert_eq!(log.removed_edges.len(), 2 * 7);
        for clique in &log.cliques {
            assert!(clique.iter().all(|&v| truth.kind(v) == AnomalyKind::Topology));
            assert_eq!(induced_edges(&out, clique), 28 - 7);
        }
        assert!(log.removed_edges.iter().all(|&(u, v)| !out.has_edge(u, v)));
        assert_eq!(log.attribute_copies.len(), 10);
        for &(target, _) in &log.attribute_copies {
            assert_eq!(truth.kind(target), AnomalyKind::Attribute);
        }
        let mut again = ChaCha8Rng::seed_from_u64(4);
        let (plain, plain_truth) = inject(&g, &cfg, &mut again).unwrap();
        assert_eq!((plain, plain_truth), (out, truth));
    }

    #[test]
    fn ground_truth_csv_roundtrip() {
        let t = GroundTruth::from_kinds(vec![AnomalyKind::None, AnomalyKind::Topology, AnomalyKind::Attribute]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "node_id,label,kind\n0,0,none\n1,1,topology\n2,1,attribute\n"
        );
        assert_eq!(GroundTruth::read_csv(buf.as_slice()).unwrap(), t);
        assert!(GroundTruth::read_csv("node_id,label,kind\n0,1,none\n".as_bytes()).is_err());
    }
}
