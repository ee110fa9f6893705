use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::Oracle;
use crate::profiles::violation;
use crate::tabular::Dataset;
use crate::transforms::PvtTriplet;

use super::{
    baseline, benefit_score, discriminative_pvts, finish, Algorithm, EngineConfig, Explanation, Phase, Session,
};

pub const MAX_TREE_DEPTH: usize = 8;

/// A dataset with the user's pass/fail verdict.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub dataset: Dataset,
    pub passing: bool,
}

impl LabeledDataset {
    pub fn pass(dataset: Dataset) -> Self {
        LabeledDataset { dataset, passing: true }
    }

    pub fn fail(dataset: Dataset) -> Self {
        LabeledDataset {
            dataset,
            passing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        passing: bool,
        pure: bool,
        samples: usize,
    },
    Split {
        feature: usize,
        /// Subtree for samples where the feature holds.
        holds: Box<Node>,
        fails: Box<Node>,
    },
}

/// Binary classification tree over boolean features, grown by Gini impurity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: Node,
    pub max_depth: usize,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

impl DecisionTree {
    /// Fit on rows of features with labels (`true` = passing). Splits take
    /// the lowest weighted Gini impurity; ties go to the lower feature index.
    pub fn fit(features: &[Vec<bool>], labels: &[bool], max_depth: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Validation(format!(
                "{} feature rows for {} labels",
                features.len(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::Validation("no training points".into()));
        }
        let width = features[0].len();
        if features.iter().any(|r| r.len() != width) {
            return Err(Error::Validation("feature rows differ in width".into()));
        }
        let rows: Vec<usize> = (0..labels.len()).collect();
        Ok(DecisionTree {
            root: grow(features, labels, &rows, 0, max_depth, width),
            max_depth,
        })
    }

    pub fn predict(&self, row: &[bool]) -> bool {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { passing, .. } => return *passing,
                Node::Split { feature, holds, fails } => node = if row[*feature] { holds } else { fails },
            }
        }
    }

    /// Root-to-leaf paths ending in pure passing leaves, as (feature, holds) conditions.
    pub fn passing_paths(&self) -> Vec<Vec<(usize, bool)>> {
        let mut out = Vec::new();
        collect_paths(&self.root, &mut Vec::new(), &mut out);
        out
    }

    pub fn depth(&self) -> usize {
        fn depth(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { holds, fails, .. } => 1 + depth(holds).max(depth(fails)),
            }
        }
        depth(&self.root)
    }
}

fn grow(features: &[Vec<bool>], labels: &[bool], rows: &[usize], depth: usize, max_depth: usize, width: usize) -> Node {
    let pos = rows.iter().filter(|&&r| labels[r]).count();
    let n = rows.len();
    let leaf = Node::Leaf {
        passing: 2 * pos > n,
        pure: pos == 0 || pos == n,
        samples: n,
    };
    if pos == 0 || pos == n || depth >= max_depth {
        return leaf;
    }
    let mut best: Option<(f64, usize)> = None;
    for f in 0..width {
        let (yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| features[r][f]);
        if yes.is_empty() || no.is_empty() {
            continue;
        }
        let py = yes.iter().filter(|&&r| labels[r]).count();
        let pn = pos - py;
        let imp = (yes.len() as f64 * gini(py, yes.len()) + no.len() as f64 * gini(pn, no.len())) / n as f64;
        if best.is_none_or(|(b, _)| imp < b) {
            best = Some((imp, f));
        }
    }
    let Some((_, f)) = best else {
        return leaf;
    };
    let (yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| features[r][f]);
    Node::Split {
        feature: f,
        holds: Box::new(grow(features, labels, &yes, depth + 1, max_depth, width)),
        fails: Box::new(grow(features, labels, &no, depth + 1, max_depth, width)),
    }
}

fn collect_paths(node: &Node, path: &mut Vec<(usize, bool)>, out: &mut Vec<Vec<(usize, bool)>>) {
    match node {
        Node::Leaf { passing, pure, .. } => {
            if *passing && *pure {
                out.push(path.clone());
            }
        }
        Node::Split { feature, holds, fails } => {
            path.push((*feature, true));
            collect_paths(holds, path, out);
            path.pop();
            path.push((*feature, false));
            collect_paths(fails, path, out);
            path.pop();
        }
    }
}

fn satisfaction(d: &Dataset, xs: &[PvtTriplet]) -> Vec<bool> {
    xs.iter()
        .map(|x| violation(d, &x.profile).is_ok_and(|v| v == 0.0))
        .collect()
}

/// Learn which triplet conjunctions separate passing from failing datasets,
/// then test the candidate conjunctions on `d_fail`, refitting after each miss.
pub fn decision_tree_explain(
    labeled: &[LabeledDataset],
    d_fail: &Dataset,
    oracle: &mut Oracle,
    cfg: &EngineConfig,
) -> Result<Explanation> {
    let passes: Vec<&Dataset> = labeled.iter().filter(|l| l.passing).map(|l| &l.dataset).collect();
    if passes.is_empty() || labeled.iter().all(|l| l.passing) || labeled.len() < 2 {
        return Err(Error::Validation(
            "need at least one passing and one failing labeled dataset".into(),
        ));
    }
    for l in labeled {
        if l.dataset.schema() != d_fail.schema() {
            return Err(Error::Schema("labeled datasets differ in schema".into()));
        }
    }
    let base = baseline(oracle, passes[0], d_fail, cfg)?;

    let mut xs: Vec<PvtTriplet> = Vec::new();
    let mut seen = BTreeSet::new();
    for p in &passes {
        for x in discriminative_pvts(p, d_fail, cfg)? {
            if seen.insert(x.id.clone()) {
                xs.push(x);
            }
        }
    }
    let mut session = Session::new(oracle, cfg);
    if xs.is_empty() {
        return Err(session.no_explanation("no discriminative triplets"));
    }
    let benefit: Vec<f64> = xs
        .iter()
        .map(|x| benefit_score(x, d_fail, cfg.seed, &cfg.transform).unwrap_or(0.0))
        .collect();

    let mut features: Vec<Vec<bool>> = labeled.iter().map(|l| satisfaction(&l.dataset, &xs)).collect();
    let mut labels: Vec<bool> = labeled.iter().map(|l| l.passing).collect();
    let mut tried: BTreeSet<Vec<usize>> = BTreeSet::new();

    for _ in 0..=cfg.max_refits {
        let tree = DecisionTree::fit(&features, &labels, MAX_TREE_DEPTH)?;
        let mut candidates: Vec<Vec<usize>> = tree
            .passing_paths()
            .into_iter()
            .map(|path| {
                let mut c: Vec<usize> = path.into_iter().filter(|&(_, h)| h).map(|(f, _)| f).collect();
                c.sort_unstable();
                c.dedup();
                c
            })
            .filter(|c| !c.is_empty() && !tried.contains(c))
            .collect();
        candidates.sort_by(|a, b| {
            let sa: f64 = a.iter().map(|&i| benefit[i]).sum();
            let sb: f64 = b.iter().map(|&i| benefit[i]).sum();
            sb.total_cmp(&sa).then_with(|| a.cmp(b))
        });
        candidates.dedup();
        if candidates.is_empty() {
            break;
        }
        for c in candidates {
            tried.insert(c.clone());
            let refs: Vec<&PvtTriplet> = c.iter().map(|&i| &xs[i]).collect();
            let (d_t, warnings) = session.compose(d_fail, &refs);
            let score = session.evaluate(&d_t, Phase::Tree, &refs, base.fail_score, warnings)?;
            if score <= cfg.tau {
                let x_star: Vec<PvtTriplet> = refs.into_iter().cloned().collect();
                return finish(&mut session, Algorithm::DecisionTree, x_star, d_fail, &base, xs.len());
            }
            features.push(satisfaction(&d_t, &xs));
            labels.push(false);
        }
    }
    Err(session.no_explanation("decision tree exhausted its candidate conjunctions"))
}
