//! Causal DAG over latent nodes, intervention patterns, graph mutilation,
//! and a desk-scale conditional-independence signature checker.
//!
//! The model distinguishes `d` latent state variables from their `d` observed
//! readouts. Each observed variable has exactly one parent (its latent twin);
//! that measurement edge is implicit in [`Dag`] and only materializes in the
//! extended 2d-node graph returned by [`Dag::mutilate`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest node count for which the CI-signature ops will enumerate
/// conditioning sets. The checker exists for desk-scale validation, not
/// production use.
pub const DESK_SCALE_LIMIT: usize = 8;

/// Directed acyclic graph over `d` latent nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl Dag {
    /// Builds a DAG, rejecting self-loops, out-of-range indices, duplicate
    /// edges and cycles.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (p, c) in edges {
            if p >= node_count || c >= node_count {
                return Err(Error::Graph(format!(
                    "edge ({p}, {c}) out of range for {node_count} nodes"
                )));
            }
            if p == c {
                return Err(Error::Graph(format!("self-loop at node {p}")));
            }
            if !set.insert((p, c)) {
                return Err(Error::Graph(format!("duplicate edge ({p}, {c})")));
            }
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut parents = vec![Vec::new(); node_count];
        let mut children = vec![Vec::new(); node_count];
        for &(p, c) in &edges {
            parents[c].push(p);
            children[p].push(c);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        let topo = toposort(node_count, &parents, &children)?;
        Ok(Self {
            node_count,
            edges,
            parents,
            children,
            topo,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Edges sorted by (parent, child).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Parents of `j`, ascending. Panics if `j` is out of range.
    pub fn parents(&self, j: usize) -> &[usize] {
        &self.parents[j]
    }

    /// Children of `j`, ascending. Panics if `j` is out of range.
    pub fn children(&self, j: usize) -> &[usize] {
        &self.children[j]
    }

    /// True when `j` has no children among the latent nodes.
    pub fn is_sink(&self, j: usize) -> bool {
        self.children[j].is_empty()
    }

    /// Topological order with ties broken by ascending index; every parent
    /// precedes its children. Cached at construction, so this is O(1).
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// All strict descendants of `j`, ascending.
    pub fn descendants(&self, j: usize) -> Vec<usize> {
        let mut seen = vec![false; self.node_count];
        let mut stack: Vec<usize> = self.children[j].to_vec();
        while let Some(u) = stack.pop() {
            if !seen[u] {
                seen[u] = true;
                stack.extend_from_slice(&self.children[u]);
            }
        }
        (0..self.node_count).filter(|&u| seen[u]).collect()
    }

    /// Extended 2d-node graph (latent + observed) under hard interventions:
    /// `mech[j]` removes every edge into latent `j`, `meas[j]` removes the
    /// measurement edge from latent `j` to observed `j`.
    pub fn mutilate(&self, pattern: &InterventionPattern) -> Result<MutilatedGraph> {
        pattern.check_len(self.node_count)?;
        let d = self.node_count;
        let mut parents = vec![Vec::new(); 2 * d];
        let mut children = vec![Vec::new(); 2 * d];
        for &(p, c) in &self.edges {
            if !pattern.mech[c] {
                parents[c].push(p);
                children[p].push(c);
            }
        }
        for j in 0..d {
            if !pattern.meas[j] {
                parents[d + j].push(j);
                children[j].push(d + j);
            }
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        Ok(MutilatedGraph {
            d,
            parents,
            children,
        })
    }

    /// Canonical set of conditional-independence statements implied among the
    /// observed variables by the mutilated graph. Desk-scale only (d ≤ 8):
    /// conditioning sets range over all subsets of the remaining observed
    /// nodes.
    pub fn observed_ci_signature(&self, pattern: &InterventionPattern) -> Result<CiSignature> {
        if self.node_count > DESK_SCALE_LIMIT {
            return Err(Error::DeskScale(format!(
                "CI signatures enumerate conditioning sets; d = {} exceeds the limit of {}",
                self.node_count, DESK_SCALE_LIMIT
            )));
        }
        let graph = self.mutilate(pattern)?;
        let d = self.node_count;
        let mut statements = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                let rest: Vec<usize> = (0..d).filter(|&k| k != i && k != j).collect();
                for mask in 0u32..(1u32 << rest.len()) {
                    let cond: Vec<usize> = rest
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| mask >> b & 1 == 1)
                        .map(|(_, &k)| k)
                        .collect();
                    if graph.d_separated_observed(i, j, &cond) {
                        statements.push((i, j, cond));
                    }
                }
            }
        }
        statements.sort();
        Ok(CiSignature(statements))
    }

    /// Partition of `patterns` by equal observed CI signature. Classes are
    /// listed by their smallest member index, members ascending.
    pub fn equivalence_classes(&self, patterns: &[InterventionPattern]) -> Result<Vec<Vec<usize>>> {
        let mut by_sig: Vec<(CiSignature, Vec<usize>)> = Vec::new();
        for (idx, pattern) in patterns.iter().enumerate() {
            let sig = self.observed_ci_signature(pattern)?;
            match by_sig.iter_mut().find(|(s, _)| *s == sig) {
                Some((_, members)) => members.push(idx),
                None => by_sig.push((sig, vec![idx])),
            }
        }
        let mut classes: Vec<Vec<usize>> = by_sig.into_iter().map(|(_, m)| m).collect();
        classes.sort_by_key(|c| c[0]);
        Ok(classes)
    }

    /// Canonical plain-text form: `nodes <d>` header, then one `parent child`
    /// pair per line, sorted.
    pub fn to_text(&self) -> String {
        let mut out = format!("nodes {}\n", self.node_count);
        for &(p, c) in &self.edges {
            out.push_str(&format!("{p} {c}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty DAG file".into()))?;
        let node_count = header
            .trim()
            .strip_prefix("nodes")
            .and_then(|rest| rest.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("expected `nodes <d>` header, got `{header}`")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let (p, c) = match (it.next(), it.next(), it.next()) {
                (Some(p), Some(c), None) => (p, c),
                _ => return Err(Error::Parse(format!("bad edge line `{line}`"))),
            };
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad node index `{s}`")))
            };
            edges.push((parse(p)?, parse(c)?));
        }
        Dag::new(node_count, edges)
    }

    /// JSON form `{"nodes": d, "edges": [[p, c], ...]}` with edges sorted.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&DagFile {
            nodes: self.node_count,
            edges: self.edges.clone(),
        })
        .expect("dag serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DagFile = serde_json::from_str(text)?;
        Dag::new(file.nodes, file.edges)
    }

    /// Parses either accepted format, sniffing JSON by a leading `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_text(text)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DagFile {
    nodes: usize,
    edges: Vec<(usize, usize)>,
}

fn toposort(n: usize, parents: &[Vec<usize>], children: &[Vec<usize>]) -> Result<Vec<usize>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&j| indegree[j] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(j)) = ready.pop() {
        order.push(j);
        for &c in &children[j] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() != n {
        return Err(Error::Graph("cycle detected".into()));
    }
    Ok(order)
}

/// One outlier configuration: `mech[j]` marks a hard intervention on latent
/// node `j`, `meas[j]` one on its observed readout.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InterventionPattern {
    pub mech: Vec<bool>,
    pub meas: Vec<bool>,
}

impl InterventionPattern {
    pub fn clean(d: usize) -> Self {
        Self {
            mech: vec![false; d],
            meas: vec![false; d],
        }
    }

    pub fn new(mech: Vec<bool>, meas: Vec<bool>) -> Result<Self> {
        if mech.len() != meas.len() {
            return Err(Error::Input(format!(
                "pattern vectors disagree in length: {} vs {}",
                mech.len(),
                meas.len()
            )));
        }
        Ok(Self { mech, meas })
    }

    pub fn len(&self) -> usize {
        self.mech.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mech.len() == 0
    }

    pub fn is_clean(&self) -> bool {
        !self.mech.iter().chain(self.meas.iter()).any(|&b| b)
    }

    fn check_len(&self, d: usize) -> Result<()> {
        if self.mech.len() != d {
            return Err(Error::Input(format!(
                "pattern length {} does not match node count {d}",
                self.mech.len()
            )));
        }
        Ok(())
    }

    /// Compact `zw`-bit rendering, e.g. `01 00` for d = 2.
    pub fn render(&self) -> String {
        let bits =
            |v: &[bool]| -> String { v.iter().map(|&b| if b { '1' } else { '0' }).collect() };
        format!("{} {}", bits(&self.mech), bits(&self.meas))
    }

    /// Parses the [`render`](Self::render) format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut it = text.split_whitespace();
        let (z, w) = match (it.next(), it.next(), it.next()) {
            (Some(z), Some(w), None) => (z, w),
            _ => {
                return Err(Error::Parse(format!(
                    "expected `<mech-bits> <meas-bits>`, got `{text}`"
                )))
            }
        };
        let bits = |s: &str| -> Result<Vec<bool>> {
            s.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::Parse(format!("bad pattern bit `{other}`"))),
                })
                .collect()
        };
        Self::new(bits(z)?, bits(w)?)
    }
}

/// The 2d-node graph induced by an intervention pattern. Node `j < d` is the
/// latent variable, node `d + j` its observed readout.
#[derive(Debug, Clone)]
pub struct MutilatedGraph {
    d: usize,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl MutilatedGraph {
    pub fn latent_count(&self) -> usize {
        self.d
    }

    pub fn observed(&self, j: usize) -> usize {
        self.d + j
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    /// d-separation between observed readouts `i` and `j` given observed
    /// readouts `cond` (all given as feature indices in `0..d`).
    pub fn d_separated_observed(&self, i: usize, j: usize, cond: &[usize]) -> bool {
        let evidence: Vec<usize> = cond.iter().map(|&k| self.observed(k)).collect();
        self.d_separated(self.observed(i), self.observed(j), &evidence)
    }

    /// Reachability form of d-separation: `y` is d-separated from `x` given
    /// `evidence` iff no active trail reaches it.
    pub fn d_separated(&self, x: usize, y: usize, evidence: &[usize]) -> bool {
        let n = 2 * self.d;
        let mut in_evidence = vec![false; n];
        for &e in evidence {
            in_evidence[e] = true;
        }

        // Ancestors of the evidence set, used to open colliders.
        let mut anc = in_evidence.clone();
        let mut stack: Vec<usize> = evidence.to_vec();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if !anc[p] {
                    anc[p] = true;
                    stack.push(p);
                }
            }
        }

        // Trail states: (node, arrived-from-child?). Arriving "up" means the
        // previous hop was along an edge pointing away from the node.
        const UP: usize = 0;
        const DOWN: usize = 1;
        let mut visited = vec![[false; 2]; n];
        let mut queue = vec![(x, UP)];
        while let Some((v, dir)) = queue.pop() {
            if visited[v][dir] {
                continue;
            }
            visited[v][dir] = true;
            if v == y && !in_evidence[v] {
                return false;
            }
            if dir == UP && !in_evidence[v] {
                for &p in &self.parents[v] {
                    queue.push((p, UP));
                }
                for &c in &self.children[v] {
                    queue.push((c, DOWN));
                }
            } else if dir == DOWN {
                if !in_evidence[v] {
                    for &c in &self.children[v] {
                        queue.push((c, DOWN));
                    }
                }
                if anc[v] {
                    for &p in &self.parents[v] {
                        queue.push((p, UP));
                    }
                }
            }
        }
        true
    }
}

/// Sorted conditional-independence statements `(i, j, conditioning set)`
/// among observed variables. Two patterns are observationally equivalent
/// iff their signatures are equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CiSignature(pub Vec<(usize, usize, Vec<usize>)>);

impl CiSignature {
    pub fn statements(&self) -> &[(usize, usize, Vec<usize>)] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain3() -> Dag {
        Dag::new(3, [(0, 1), (1, 2)]).unwrap()
    }

    fn pat(d: usize, mech: &[usize], meas: &[usize]) -> InterventionPattern {
        let mut p = InterventionPattern::clean(d);
        for &j in mech {
            p.mech[j] = true;
        }
        for &j in meas {
            p.meas[j] = true;
        }
        p
    }

    #[test]
    fn topo_order_empty_graph() {
        let dag = Dag::new(0, []).unwrap();
        assert!(dag.topo_order().is_empty());
    }

    #[test]
    fn topo_order_chain() {
        assert_eq!(chain3().topo_order(), &[0, 1, 2]);
    }

    #[test]
    fn construction_rejects_cycles_and_self_loops() {
        assert!(Dag::new(2, [(0, 1), (1, 0)]).is_err());
        assert!(Dag::new(2, [(1, 1)]).is_err());
        assert!(Dag::new(2, [(0, 3)]).is_err());
    }

    #[test]
    fn adjacency_queries() {
        let dag = chain3();
        assert_eq!(dag.children(1), &[2]);
        assert_eq!(dag.parents(0), &[] as &[usize]);
        let collider = Dag::new(3, [(0, 2), (1, 2)]).unwrap();
        assert_eq!(collider.children(0), &[2]);
        assert_eq!(collider.parents(2), &[0, 1]);
    }

    #[test]
    fn mutilate_clean_keeps_all_edges() {
        let dag = chain3();
        let g = dag.mutilate(&InterventionPattern::clean(3)).unwrap();
        // 2 latent edges + 3 measurement edges over 6 nodes.
        assert_eq!(g.edge_count(), 5);
        assert_eq!(g.parents(g.observed(1)), &[1]);
    }

    #[test]
    fn mutilate_mech_removes_incoming_latent_edges() {
        let dag = chain3();
        let g = dag.mutilate(&pat(3, &[1], &[])).unwrap();
        assert_eq!(g.parents(1), &[] as &[usize]);
        assert_eq!(g.children(1), &[2, g.observed(1)]);
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn mutilate_meas_removes_measurement_edge() {
        let dag = chain3();
        let g = dag.mutilate(&pat(3, &[], &[1])).unwrap();
        assert_eq!(g.parents(g.observed(1)), &[] as &[usize]);
        assert_eq!(g.children(1), &[2]);
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn bivariate_signatures_match_known_classes() {
        let dag = Dag::new(2, [(0, 1)]).unwrap();
        let sig = |mech: &[usize], meas: &[usize]| {
            dag.observed_ci_signature(&pat(2, mech, meas)).unwrap()
        };
        // Severing latent 1's mechanism or observed 1's measurement both cut
        // the observed dependency.
        assert_eq!(sig(&[1], &[]), sig(&[], &[1]));
        // A mechanistic intervention on the root changes nothing observable.
        assert_eq!(sig(&[0], &[]), sig(&[], &[]));
        // Measurement at node 0 severs the pair; mechanism at node 0 does not.
        assert_ne!(sig(&[], &[0]), sig(&[0], &[]));
    }

    #[test]
    fn bivariate_enumeration_gives_two_classes() {
        let dag = Dag::new(2, [(0, 1)]).unwrap();
        let mut patterns = Vec::new();
        for bits in 0u32..16 {
            patterns.push(pat(
                2,
                &[0, 1]
                    .iter()
                    .copied()
                    .filter(|&j| bits >> j & 1 == 1)
                    .collect::<Vec<_>>(),
                &[0, 1]
                    .iter()
                    .copied()
                    .filter(|&j| bits >> (j + 2) & 1 == 1)
                    .collect::<Vec<_>>(),
            ));
        }
        let classes = dag.equivalence_classes(&patterns).unwrap();
        assert_eq!(classes.len(), 2);
        // Dependent class: clean and mech-at-root only.
        let dependent: Vec<usize> = patterns
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.mech[1] && !p.meas[0] && !p.meas[1])
            .map(|(i, _)| i)
            .collect();
        assert!(classes.contains(&dependent));
    }

    #[test]
    fn single_node_mech_and_meas_are_equivalent() {
        let dag = Dag::new(1, []).unwrap();
        let classes = dag
            .equivalence_classes(&[pat(1, &[0], &[]), pat(1, &[], &[0])])
            .unwrap();
        assert_eq!(classes, vec![vec![0, 1]]);
    }

    #[test]
    fn empty_pattern_list_gives_empty_partition() {
        let dag = chain3();
        assert!(dag.equivalence_classes(&[]).unwrap().is_empty());
    }

    #[test]
    fn desk_scale_cap_is_enforced() {
        let dag = Dag::new(9, []).unwrap();
        let err = dag.observed_ci_signature(&InterventionPattern::clean(9));
        assert!(matches!(err, Err(Error::DeskScale(_))));
    }

    #[test]
    fn sink_node_mech_meas_signatures_agree() {
        // Collider 0 -> 2 <- 1 plus isolated 3; sinks are 2 and 3.
        let dag = Dag::new(4, [(0, 2), (1, 2)]).unwrap();
        for sink in [2usize, 3] {
            assert!(dag.is_sink(sink));
            let a = dag.observed_ci_signature(&pat(4, &[sink], &[])).unwrap();
            let b = dag.observed_ci_signature(&pat(4, &[], &[sink])).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let dag = Dag::new(4, [(0, 2), (1, 2), (2, 3)]).unwrap();
        let text = dag.to_text();
        let reparsed = Dag::from_text(&text).unwrap();
        assert_eq!(reparsed, dag);
        assert_eq!(reparsed.to_text(), text);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let dag = Dag::new(3, [(0, 1), (1, 2)]).unwrap();
        let json = dag.to_json();
        let reparsed = Dag::parse(&json).unwrap();
        assert_eq!(reparsed, dag);
        assert_eq!(reparsed.to_json(), json);
    }

    #[test]
    fn pattern_render_parse_round_trip() {
        let p = pat(3, &[1], &[0, 2]);
        assert_eq!(p.render(), "010 101");
        assert_eq!(InterventionPattern::parse(&p.render()).unwrap(), p);
    }
}
