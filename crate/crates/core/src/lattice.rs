use crate::error::{CdroError, Result};
use crate::path::DiscretePath;
use serde::Deserialize;
use std::collections::HashMap;

/// Hard cap on the number of enumerated scenario paths.
pub const MAX_LEAVES: usize = 1 << 20;

/// One node of a non-recombining scenario tree.
#[derive(Clone, Debug)]
pub struct LatticeNode {
    pub time: usize,
    pub state: Vec<f64>,
    /// `(child index, transition probability)`; empty at the horizon.
    pub children: Vec<(usize, f64)>,
}

/// A finite reference model: a non-recombining tree with one-step transition
/// probabilities. Nodes are indexed into a flat arena with the root at 0, so
/// a node at depth `n` is exactly one history of length `n`.
#[derive(Clone, Debug)]
pub struct LatticeModel {
    nodes: Vec<LatticeNode>,
    n_steps: usize,
    dim: usize,
    is_martingale: bool,
}

/// Result of a martingale audit: worst componentwise drift over all nodes.
#[derive(Clone, Copy, Debug)]
pub struct MartingaleCheck {
    pub ok: bool,
    pub worst_violation: f64,
}

/// Exhaustive scenario list of a lattice: path values, probabilities and the
/// node visited at each time index (the history identifier used by exact
/// conditional expectations).
#[derive(Clone, Debug)]
pub struct EnumeratedPaths {
    pub paths: Vec<DiscretePath>,
    pub probs: Vec<f64>,
    /// `nodes[i][k]` = arena index of the node path `i` occupies at time `k`.
    pub nodes: Vec<Vec<usize>>,
    pub n_steps: usize,
    pub dim: usize,
}

#[derive(Deserialize)]
struct NodeConfig {
    id: u64,
    time: usize,
    state: Vec<f64>,
    #[serde(default)]
    children: Vec<(u64, f64)>,
}

#[derive(Deserialize)]
struct LatticeConfig {
    #[serde(default)]
    is_martingale: bool,
    nodes: Vec<NodeConfig>,
}

impl LatticeModel {
    /// Validates and builds a tree from an arena. Node 0 must be the root at
    /// time 0 with zero state; every interior node's child probabilities must
    /// sum to 1 within 1e-12; every leaf must sit at the common horizon.
    pub fn new(nodes: Vec<LatticeNode>, is_martingale: bool) -> Result<Self> {
        if nodes.is_empty() {
            return Err(CdroError::InvalidModel("empty lattice".into()));
        }
        let dim = nodes[0].state.len();
        if dim == 0 {
            return Err(CdroError::InvalidModel("zero-dimensional states".into()));
        }
        if nodes[0].time != 0 || nodes[0].state.iter().any(|&v| v != 0.0) {
            return Err(CdroError::InvalidModel(
                "root must sit at time 0 with zero state".into(),
            ));
        }
        let n_steps = nodes
            .iter()
            .filter(|n| n.children.is_empty())
            .map(|n| n.time)
            .max()
            .ok_or_else(|| CdroError::InvalidModel("tree has no leaves".into()))?;
        if n_steps == 0 {
            return Err(CdroError::InvalidModel("horizon must be >= 1".into()));
        }
        let mut seen_child = vec![false; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if node.state.len() != dim {
                return Err(CdroError::InvalidModel(format!(
                    "node {i}: state dimension {} != {dim}",
                    node.state.len()
                )));
            }
            if node.children.is_empty() {
                if node.time != n_steps {
                    return Err(CdroError::InvalidModel(format!(
                        "leaf {i} at time {} != horizon {n_steps}",
                        node.time
                    )));
                }
                continue;
            }
            let mut total = 0.0;
            for &(c, p) in &node.children {
                if c >= nodes.len() {
                    return Err(CdroError::InvalidModel(format!(
                        "node {i}: child index {c} out of range"
                    )));
                }
                if seen_child[c] {
                    return Err(CdroError::InvalidModel(format!(
                        "node {c} has two parents; not a tree"
                    )));
                }
                seen_child[c] = true;
                if nodes[c].time != node.time + 1 {
                    return Err(CdroError::InvalidModel(format!(
                        "node {i} (t={}) -> child {c} (t={})",
                        node.time, nodes[c].time
                    )));
                }
                if !(p > 0.0) {
                    return Err(CdroError::InvalidModel(format!(
                        "node {i}: nonpositive transition probability {p}"
                    )));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(CdroError::InvalidModel(format!(
                    "node {i}: child probabilities sum to {total}, off by {:.3e}",
                    (total - 1.0).abs()
                )));
            }
        }
        for (i, was_seen) in seen_child.iter().enumerate().skip(1) {
            if !was_seen {
                return Err(CdroError::InvalidModel(format!("node {i} unreachable")));
            }
        }
        Ok(Self {
            nodes,
            n_steps,
            dim,
            is_martingale,
        })
    }

    /// A binary walk with up/down state moves and up-probability `p_up`.
    pub fn binary_walk(n_steps: usize, up: f64, down: f64, p_up: f64) -> Result<Self> {
        if n_steps == 0 || n_steps > 20 {
            return Err(CdroError::InvalidParameter(format!(
                "binary walk horizon {n_steps} out of range 1..=20"
            )));
        }
        if !(p_up > 0.0 && p_up < 1.0) {
            return Err(CdroError::InvalidParameter(format!(
                "p_up {p_up} not in (0, 1)"
            )));
        }
        let mut nodes = vec![LatticeNode {
            time: 0,
            state: vec![0.0],
            children: vec![],
        }];
        let mut frontier = vec![0usize];
        for t in 0..n_steps {
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for &idx in &frontier {
                let s = nodes[idx].state[0];
                for (mv, pr) in [(up, p_up), (down, 1.0 - p_up)] {
                    let child = nodes.len();
                    nodes.push(LatticeNode {
                        time: t + 1,
                        state: vec![s + mv],
                        children: vec![],
                    });
                    nodes[idx].children.push((child, pr));
                    next.push(child);
                }
            }
            frontier = next;
        }
        let is_mart = (p_up * up + (1.0 - p_up) * down).abs() < 1e-10;
        Self::new(nodes, is_mart)
    }

    /// The simple symmetric walk with jump size `jump` (a martingale).
    pub fn symmetric_walk(n_steps: usize, jump: f64) -> Result<Self> {
        Self::binary_walk(n_steps, jump, -jump, 0.5)
    }

    /// Symmetric walk whose increments have variance `T / N`, the discrete
    /// surrogate of a Brownian reference on `[0, T]`.
    pub fn brownian_increment_walk(n_steps: usize, horizon: f64) -> Result<Self> {
        Self::symmetric_walk(n_steps, (horizon / n_steps as f64).sqrt())
    }

    /// Loads a tree from the documented JSON schema:
    ///
    /// ```json
    /// { "is_martingale": true,
    ///   "nodes": [ { "id": 0, "time": 0, "state": [0.0],
    ///                "children": [[1, 0.5], [2, 0.5]] }, ... ] }
    /// ```
    ///
    /// Ids are arbitrary; the node with `time = 0` is the root.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: LatticeConfig =
            serde_json::from_str(text).map_err(|e| CdroError::Config(e.to_string()))?;
        let mut order: Vec<usize> = (0..cfg.nodes.len()).collect();
        // Root first, then stable by (time, id) so arena indices are deterministic.
        order.sort_by_key(|&i| (cfg.nodes[i].time, cfg.nodes[i].id));
        let mut index_of: HashMap<u64, usize> = HashMap::new();
        for (slot, &i) in order.iter().enumerate() {
            if index_of.insert(cfg.nodes[i].id, slot).is_some() {
                return Err(CdroError::Config(format!(
                    "duplicate node id {}",
                    cfg.nodes[i].id
                )));
            }
        }
        let mut nodes = Vec::with_capacity(cfg.nodes.len());
        for &i in &order {
            let n = &cfg.nodes[i];
            let mut children = Vec::with_capacity(n.children.len());
            for &(cid, p) in &n.children {
                let slot = *index_of
                    .get(&cid)
                    .ok_or_else(|| CdroError::Config(format!("unknown child id {cid}")))?;
                children.push((slot, p));
            }
            nodes.push(LatticeNode {
                time: n.time,
                state: n.state.clone(),
                children,
            });
        }
        Self::new(nodes, cfg.is_martingale)
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn node(&self, idx: usize) -> &LatticeNode {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[LatticeNode] {
        &self.nodes
    }

    #[inline]
    pub fn claims_martingale(&self) -> bool {
        self.is_martingale
    }

    /// Returns a copy with every node state replaced by `new_state(index)`.
    pub fn with_states(&self, mut new_state: impl FnMut(usize) -> Vec<f64>) -> Result<Self> {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| LatticeNode {
                time: n.time,
                state: new_state(i),
                children: n.children.clone(),
            })
            .collect();
        Self::new(nodes, self.is_martingale)
    }

    pub fn count_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_empty()).count()
    }

    /// Exhaustive enumeration of all root-to-leaf scenarios, guarded at
    /// [`MAX_LEAVES`]. Per-path probability is the product of edge
    /// probabilities along the way.
    pub fn enumerate(&self) -> Result<EnumeratedPaths> {
        let leaves = self.count_leaves();
        if leaves > MAX_LEAVES {
            return Err(CdroError::SizeGuard {
                leaves,
                max: MAX_LEAVES,
            });
        }
        let mut paths = Vec::with_capacity(leaves);
        let mut probs = Vec::with_capacity(leaves);
        let mut node_trails = Vec::with_capacity(leaves);
        let mut trail: Vec<usize> = vec![0];
        let mut prob_trail: Vec<f64> = vec![1.0];
        // Iterative DFS with explicit child cursors keeps path order stable.
        let mut cursor: Vec<usize> = vec![0];
        while let Some(&node_idx) = trail.last() {
            let node = &self.nodes[node_idx];
            if node.children.is_empty() {
                let mut flat = Vec::with_capacity((self.n_steps + 1) * self.dim);
                for &idx in &trail {
                    flat.extend_from_slice(&self.nodes[idx].state);
                }
                paths.push(DiscretePath::from_flat(flat, self.n_steps, self.dim)?);
                probs.push(*prob_trail.last().unwrap());
                node_trails.push(trail.clone());
            }
            // advance: descend into the next unvisited child, else backtrack
            loop {
                let c = *cursor.last().unwrap();
                let node = &self.nodes[*trail.last().unwrap()];
                if c < node.children.len() {
                    let (child, p) = node.children[c];
                    *cursor.last_mut().unwrap() += 1;
                    trail.push(child);
                    prob_trail.push(prob_trail.last().unwrap() * p);
                    cursor.push(0);
                    break;
                } else {
                    trail.pop();
                    prob_trail.pop();
                    cursor.pop();
                    if trail.is_empty() {
                        break;
                    }
                }
            }
        }
        Ok(EnumeratedPaths {
            paths,
            probs,
            nodes: node_trails,
            n_steps: self.n_steps,
            dim: self.dim,
        })
    }

    /// Largest componentwise one-step drift `|sum_i p_i (state_i - state)|`
    /// over all interior nodes.
    pub fn check_martingale(&self, tol: f64) -> MartingaleCheck {
        let mut worst = 0.0_f64;
        for node in &self.nodes {
            if node.children.is_empty() {
                continue;
            }
            for comp in 0..self.dim {
                let drift: f64 = node
                    .children
                    .iter()
                    .map(|&(c, p)| p * (self.nodes[c].state[comp] - node.state[comp]))
                    .sum();
                worst = worst.max(drift.abs());
            }
        }
        MartingaleCheck {
            ok: worst <= tol,
            worst_violation: worst,
        }
    }
}

impl EnumeratedPaths {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Groups path indices by the node occupied at `time`; pairs each group
    /// key (the node index) with the member paths. Deterministic order.
    pub fn groups_at(&self, time: usize) -> Vec<(usize, Vec<usize>)> {
        let mut by_node: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, trail) in self.nodes.iter().enumerate() {
            by_node.entry(trail[time]).or_default().push(i);
        }
        let mut groups: Vec<(usize, Vec<usize>)> = by_node.into_iter().collect();
        groups.sort_by_key(|(node, _)| *node);
        groups
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_step_binary_enumeration() {
        let m = LatticeModel::symmetric_walk(1, 1.0).unwrap();
        let e = m.enumerate().unwrap();
        assert_eq!(e.len(), 2);
        let mut seen: Vec<(f64, f64)> = e
            .paths
            .iter()
            .zip(&e.probs)
            .map(|(p, &w)| (p.point(1)[0], w))
            .collect();
        seen.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert_eq!(seen, vec![(-1.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn ten_step_walk_has_1024_uniform_paths() {
        let m = LatticeModel::symmetric_walk(10, 1.0).unwrap();
        let e = m.enumerate().unwrap();
        assert_eq!(e.len(), 1024);
        for &p in &e.probs {
            assert_relative_eq!(p, 2f64.powi(-10), epsilon = 1e-15);
        }
        assert!((e.total_probability() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn martingale_checks() {
        let sym = LatticeModel::symmetric_walk(3, 1.0).unwrap();
        let chk = sym.check_martingale(1e-10);
        assert!(chk.ok);
        assert_eq!(chk.worst_violation, 0.0);

        let drift = LatticeModel::binary_walk(3, 1.0, -1.0, 0.6).unwrap();
        let chk = drift.check_martingale(1e-10);
        assert!(!chk.ok);
        assert_relative_eq!(chk.worst_violation, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn json_roundtrip() {
        let text = r#"{
            "is_martingale": true,
            "nodes": [
                {"id": 10, "time": 0, "state": [0.0], "children": [[11, 0.5], [12, 0.5]]},
                {"id": 11, "time": 1, "state": [1.0]},
                {"id": 12, "time": 1, "state": [-1.0]}
            ]
        }"#;
        let m = LatticeModel::from_json_str(text).unwrap();
        assert_eq!(m.n_steps(), 1);
        assert_eq!(m.count_leaves(), 2);
        assert!(m.check_martingale(1e-10).ok);
    }

    #[test]
    fn bad_probabilities_rejected() {
        let text = r#"{ "nodes": [
            {"id": 0, "time": 0, "state": [0.0], "children": [[1, 0.6], [2, 0.5]]},
            {"id": 1, "time": 1, "state": [1.0]},
            {"id": 2, "time": 1, "state": [-1.0]}
        ]}"#;
        assert!(LatticeModel::from_json_str(text).is_err());
    }

    #[test]
    fn per_path_probability_is_edge_product() {
        let m = LatticeModel::binary_walk(4, 1.0, -0.5, 0.3).unwrap();
        let e = m.enumerate().unwrap();
        assert!((e.total_probability() - 1.0).abs() <= 1e-10);
        for (path, &w) in e.paths.iter().zip(&e.probs) {
            let mut expect = 1.0;
            for k in 1..=4 {
                let up = path.point(k)[0] > path.point(k - 1)[0];
                expect *= if up { 0.3 } else { 0.7 };
            }
            assert_relative_eq!(w, expect, epsilon = 1e-14);
        }
    }
}
