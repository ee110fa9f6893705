//! PVT-attribute and PVT-dependency graphs, and balanced min-cut bisection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tabular::Dataset;
use crate::transforms::{derive_seed, PvtTriplet};

/// Bipartite graph between triplets and the attributes their profiles mention.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PvtAttributeGraph {
    pvts: BTreeMap<String, BTreeSet<String>>,
    attributes: BTreeMap<String, BTreeSet<String>>,
}

pub fn build_pvt_attribute_graph(xs: &[PvtTriplet], d: &Dataset) -> Result<PvtAttributeGraph> {
    let mut g = PvtAttributeGraph::default();
    for a in d.attribute_names() {
        g.attributes.insert(a.to_string(), BTreeSet::new());
    }
    for x in xs {
        let attrs = x.attributes();
        for a in &attrs {
            if !g.attributes.contains_key(a) {
                return Err(Error::Schema(format!(
                    "triplet {} mentions unknown attribute `{a}`",
                    x.id
                )));
            }
        }
        for a in &attrs {
            g.attributes.get_mut(a).expect("checked").insert(x.id.clone());
        }
        g.pvts.insert(x.id.clone(), attrs.into_iter().collect());
    }
    Ok(g)
}

impl PvtAttributeGraph {
    pub fn pvt_ids(&self) -> impl Iterator<Item = &str> {
        self.pvts.keys().map(String::as_str)
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.keys().map(String::as_str)
    }

    pub fn pvt_count(&self) -> usize {
        self.pvts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.pvts.values().map(BTreeSet::len).sum()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.pvts.contains_key(id)
    }

    pub fn degree(&self, attribute: &str) -> usize {
        self.attributes.get(attribute).map_or(0, BTreeSet::len)
    }

    pub fn attributes_of(&self, id: &str) -> Option<&BTreeSet<String>> {
        self.pvts.get(id)
    }

    pub fn pvts_of(&self, attribute: &str) -> Option<&BTreeSet<String>> {
        self.attributes.get(attribute)
    }

    pub fn degrees(&self) -> BTreeMap<String, usize> {
        self.attributes.iter().map(|(a, s)| (a.clone(), s.len())).collect()
    }

    pub fn remove_pvt(&mut self, id: &str) -> bool {
        match self.pvts.remove(id) {
            None => false,
            Some(attrs) => {
                for a in attrs {
                    if let Some(s) = self.attributes.get_mut(&a) {
                        s.remove(id);
                    }
                }
                true
            }
        }
    }

    /// Attributes of maximum positive degree, in name order.
    pub fn max_degree_attributes(&self) -> Vec<&str> {
        let max = self.attributes.values().map(BTreeSet::len).max().unwrap_or(0);
        if max == 0 {
            return Vec::new();
        }
        self.attributes
            .iter()
            .filter(|(_, s)| s.len() == max)
            .map(|(a, _)| a.as_str())
            .collect()
    }

    /// Triplet ids sharing at least one attribute with `id`, excluding itself.
    pub fn neighbours(&self, id: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        if let Some(attrs) = self.pvts.get(id) {
            for a in attrs {
                out.extend(self.attributes[a].iter().cloned());
            }
        }
        out.remove(id);
        out
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph pvt_attribute {\n  node [shape=box];\n");
        for a in self.attributes.keys() {
            let _ = writeln!(s, "  \"attr:{}\" [shape=ellipse, label=\"{}\"];", esc(a), esc(a));
        }
        for (id, attrs) in &self.pvts {
            let _ = writeln!(s, "  \"{}\";", esc(id));
            for a in attrs {
                let _ = writeln!(s, "  \"{}\" -- \"attr:{}\";", esc(id), esc(a));
            }
        }
        s.push_str("}\n");
        s
    }
}

fn esc(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Triplets joined when they share an attribute.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PvtDependencyGraph {
    adjacency: BTreeMap<String, BTreeSet<String>>,
}

pub fn build_dependency_graph(g: &PvtAttributeGraph) -> PvtDependencyGraph {
    let adjacency = g.pvt_ids().map(|id| (id.to_string(), g.neighbours(id))).collect();
    PvtDependencyGraph { adjacency }
}

impl PvtDependencyGraph {
    pub fn from_edges<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Self {
        let mut adjacency: BTreeMap<String, BTreeSet<String>> = nodes
            .iter()
            .map(|n| (n.as_ref().to_string(), BTreeSet::new()))
            .collect();
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            if a == b {
                continue;
            }
            adjacency.entry(a.to_string()).or_default().insert(b.to_string());
            adjacency.entry(b.to_string()).or_default().insert(a.to_string());
        }
        PvtDependencyGraph { adjacency }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.adjacency.get(a).is_some_and(|s| s.contains(b))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.adjacency.keys().map(String::as_str)
    }

    /// Edges crossing between two node sets.
    pub fn cut_size<S: AsRef<str>>(&self, half1: &[S], half2: &[S]) -> usize {
        let right: BTreeSet<&str> = half2.iter().map(AsRef::as_ref).collect();
        half1
            .iter()
            .map(|a| {
                self.adjacency
                    .get(a.as_ref())
                    .map_or(0, |s| s.iter().filter(|b| right.contains(b.as_str())).count())
            })
            .sum()
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph pvt_dependency {\n");
        for (a, ns) in &self.adjacency {
            let _ = writeln!(s, "  \"{}\";", esc(a));
            for b in ns.iter().filter(|b| a < *b) {
                let _ = writeln!(s, "  \"{}\" -- \"{}\";", esc(a), esc(b));
            }
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bisection {
    /// The larger half when the node count is odd.
    pub half1: Vec<String>,
    pub half2: Vec<String>,
    pub cut: usize,
    /// Cut size after the initial split and after every accepted swap, per restart.
    pub traces: Vec<Vec<usize>>,
}

pub const DEFAULT_RESTARTS: usize = 3;

pub fn get_min_bisection(g: &PvtDependencyGraph, xs: &[String], seed: u64) -> Result<Bisection> {
    min_bisection_with(g, xs, seed, DEFAULT_RESTARTS)
}

fn initial_split(n: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut side = vec![false; n];
    for &i in &order[..n.div_ceil(2)] {
        side[i] = true;
    }
    side
}

fn check_size(xs: &[String]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::Size(format!(
            "bisection needs at least 2 nodes, got {}",
            xs.len()
        )));
    }
    Ok(())
}

fn halves(xs: &[String], side: &[bool]) -> (Vec<String>, Vec<String>) {
    let mut h1 = Vec::new();
    let mut h2 = Vec::new();
    for (x, &s) in xs.iter().zip(side) {
        if s {
            h1.push(x.clone());
        } else {
            h2.push(x.clone());
        }
    }
    (h1, h2)
}

/// Seeded random balanced split without any optimization.
pub fn random_bisection(g: &PvtDependencyGraph, xs: &[String], seed: u64) -> Result<Bisection> {
    check_size(xs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = initial_split(xs.len(), &mut rng);
    let (half1, half2) = halves(xs, &side);
    let cut = g.cut_size(&half1, &half2);
    Ok(Bisection {
        half1,
        half2,
        cut,
        traces: vec![vec![cut]],
    })
}

/// Swap-based local search from `restarts` random balanced splits; the lowest cut wins.
pub fn min_bisection_with(g: &PvtDependencyGraph, xs: &[String], seed: u64, restarts: usize) -> Result<Bisection> {
    check_size(xs)?;
    let n = xs.len();
    let mut w = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            w[i][j] = i != j && g.has_edge(&xs[i], &xs[j]);
        }
    }
    let cap = 10 * n * n;
    let mut best: Option<(usize, Vec<bool>)> = None;
    let mut traces = Vec::new();
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("bisection-{r}")));
        let mut side = initial_split(n, &mut rng);
        let cut_of = |side: &[bool]| -> usize {
            (0..n)
                .filter(|&i| side[i])
                .map(|i| (0..n).filter(|&j| !side[j] && w[i][j]).count())
                .sum()
        };
        // external minus internal degree
        let gains = |side: &[bool]| -> Vec<i64> {
            (0..n)
                .map(|i| {
                    (0..n)
                        .filter(|&j| w[i][j])
                        .map(|j| if side[j] != side[i] { 1 } else { -1 })
                        .sum()
                })
                .collect()
        };
        let mut cut = cut_of(&side);
        let mut trace = vec![cut];
        let mut dv = gains(&side);
        let mut swaps = 0;
        'search: while swaps < cap {
            for a in (0..n).filter(|&a| side[a]) {
                for b in (0..n).filter(|&b| !side[b]) {
                    let gain = dv[a] + dv[b] - 2 * i64::from(w[a][b]);
                    if gain > 0 {
                        side[a] = false;
                        side[b] = true;
                        cut = (cut as i64 - gain) as usize;
                        trace.push(cut);
                        dv = gains(&side);
                        swaps += 1;
                        continue 'search;
                    }
                }
            }
            // stuck on single swaps: try a Kernighan-Lin pass of locked swaps
            let Some((next, gain, used)) = kl_pass(&w, &side) else {
                break;
            };
            side = next;
            cut = (cut as i64 - gain) as usize;
            trace.push(cut);
            dv = gains(&side);
            swaps += used;
        }
        debug_assert_eq!(cut, cut_of(&side));
        traces.push(trace);
        if best.as_ref().is_none_or(|(c, _)| cut < *c) {
            best = Some((cut, side));
        }
    }
    let (cut, side) = best.expect("at least one restart");
    let (half1, half2) = halves(xs, &side);
    Ok(Bisection {
        half1,
        half2,
        cut,
        traces,
    })
}

/// One pass of best swaps with locking, negative gains allowed. Returns the
/// split after the best improving prefix, its gain and the swaps it took.
fn kl_pass(w: &[Vec<bool>], side: &[bool]) -> Option<(Vec<bool>, i64, usize)> {
    let n = side.len();
    let mut cur = side.to_vec();
    let mut locked = vec![false; n];
    let mut moves = Vec::new();
    let mut total = 0i64;
    let mut best = (0i64, 0usize);
    loop {
        let dv: Vec<i64> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| w[i][j])
                    .map(|j| if cur[j] != cur[i] { 1 } else { -1 })
                    .sum()
            })
            .collect();
        let mut pick: Option<(i64, usize, usize)> = None;
        for a in (0..n).filter(|&a| cur[a] && !locked[a]) {
            for b in (0..n).filter(|&b| !cur[b] && !locked[b]) {
                let gain = dv[a] + dv[b] - 2 * i64::from(w[a][b]);
                if pick.is_none_or(|(g, _, _)| gain > g) {
                    pick = Some((gain, a, b));
                }
            }
        }
        let Some((gain, a, b)) = pick else {
            break;
        };
        cur[a] = false;
        cur[b] = true;
        locked[a] = true;
        locked[b] = true;
        total += gain;
        moves.push((a, b));
        if total > best.0 {
            best = (total, moves.len());
        }
    }
    if best.0 <= 0 {
        return None;
    }
    let mut out = side.to_vec();
    for &(a, b) in &moves[..best.1] {
        out[a] = false;
        out[b] = true;
    }
    Some((out, best.0, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::Profile;
    use crate::tabular::fixtures::*;
    use crate::tabular::{Predicate, Term};
    use crate::transforms::TransformKind;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn people_triplets() -> Vec<PvtTriplet> {
        let profiles = [
            Profile::Missing {
                attribute: "zip_code".into(),
                theta: 0.11,
            },
            Profile::Selectivity {
                predicate: Predicate::new(vec![Term::eq("gender", "F"), Term::eq("high_expenditure", "yes")]).unwrap(),
                theta: 0.44,
            },
            Profile::IndepChi2 {
                attribute_j: "high_expenditure".into(),
                attribute_k: "race".into(),
                alpha: 1.29,
            },
            Profile::Outlier {
                attribute: "age".into(),
                k: 1.5,
                theta: 0.0,
            },
        ];
        profiles.iter().flat_map(PvtTriplet::for_profile).collect()
    }

    #[test]
    fn people_graph_degrees() {
        let xs = people_triplets();
        let g = build_pvt_attribute_graph(&xs, &people_fail()).unwrap();
        assert_eq!(g.degree("high_expenditure"), 2);
        assert_eq!(g.max_degree_attributes(), vec!["high_expenditure"]);
        assert_eq!(g.edge_count(), 1 + 2 + 2 + 1);
        let dep = build_dependency_graph(&g);
        assert_eq!(dep.edge_count(), 1);
    }

    #[test]
    fn empty_and_pairwise_graphs() {
        let g = build_pvt_attribute_graph(&[], &people_fail()).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.attribute_names().count(), 7);
        let x = PvtTriplet::new(
            Profile::IndepChi2 {
                attribute_j: "gender".into(),
                attribute_k: "race".into(),
                alpha: 0.0,
            },
            TransformKind::ShuffleDependence,
        )
        .unwrap();
        let g = build_pvt_attribute_graph(&[x], &people_fail()).unwrap();
        assert_eq!(g.edge_count(), 2);
        let bad = PvtTriplet::new(
            Profile::Missing {
                attribute: "nope".into(),
                theta: 0.0,
            },
            TransformKind::ImputeMissing,
        )
        .unwrap();
        assert!(matches!(
            build_pvt_attribute_graph(&[bad], &people_fail()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn star_becomes_clique() {
        let xs: Vec<PvtTriplet> = (0..4)
            .map(|i| {
                PvtTriplet::new(
                    Profile::Missing {
                        attribute: "age".into(),
                        theta: i as f64 / 10.0,
                    },
                    TransformKind::ImputeMissing,
                )
                .unwrap()
            })
            .collect();
        let g = build_pvt_attribute_graph(&xs, &people_fail()).unwrap();
        let dep = build_dependency_graph(&g);
        assert_eq!(dep.edge_count(), 6);
    }

    #[test]
    fn two_cliques_split_cleanly() {
        let nodes = names(&["x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8"]);
        let mut edges = Vec::new();
        for group in [&nodes[..4], &nodes[4..]] {
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.push((group[i].clone(), group[j].clone()));
                }
            }
        }
        let g = PvtDependencyGraph::from_edges(&nodes, &edges);
        for seed in 0..10 {
            let b = get_min_bisection(&g, &nodes, seed).unwrap();
            assert_eq!(b.cut, 0);
            let mut h: Vec<String> = b.half1.clone();
            h.sort();
            assert!(h == nodes[..4] || h == nodes[4..]);
        }
    }

    #[test]
    fn path_of_four() {
        let nodes = names(&["a", "b", "c", "d"]);
        let edges = vec![
            ("a".to_string(), "b".to_string()),
            ("b".to_string(), "c".to_string()),
            ("c".to_string(), "d".to_string()),
        ];
        let g = PvtDependencyGraph::from_edges(&nodes, &edges);
        for seed in 0..10 {
            let b = get_min_bisection(&g, &nodes, seed).unwrap();
            assert_eq!(b.cut, 1);
        }
    }

    #[test]
    fn odd_sizes_put_extra_node_first() {
        let nodes = names(&["a", "b", "c", "d", "e"]);
        let g = PvtDependencyGraph::from_edges::<String>(&nodes, &[]);
        let b = get_min_bisection(&g, &nodes, 1).unwrap();
        assert_eq!((b.half1.len(), b.half2.len()), (3, 2));
        assert_eq!(b.cut, 0);
        assert!(matches!(get_min_bisection(&g, &nodes[..1], 0), Err(Error::Size(_))));
    }

    #[test]
    fn dot_export_mentions_every_node() {
        let xs = people_triplets();
        let g = build_pvt_attribute_graph(&xs, &people_fail()).unwrap();
        let dot = g.to_dot();
        for x in &xs {
            assert!(dot.contains(&x.id));
        }
        assert!(build_dependency_graph(&g).to_dot().starts_with("graph"));
    }
}
