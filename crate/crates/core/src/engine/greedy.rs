use std::collections::{BTreeMap, BTreeSet};

use crate::error::Result;
use crate::graph::build_pvt_attribute_graph;
use crate::oracle::Oracle;
use crate::profiles::violation;
use crate::tabular::Dataset;
use crate::transforms::PvtTriplet;

use super::{baseline, discriminative_pvts, finish, Algorithm, EngineConfig, Explanation, Phase, Session};

/// One intervention per step on the highest-benefit triplet touching a
/// maximum-degree attribute; improvements are kept, then minimized.
pub fn explain_greedy(
    d_pass: &Dataset,
    d_fail: &Dataset,
    oracle: &mut Oracle,
    cfg: &EngineConfig,
) -> Result<Explanation> {
    let base = baseline(oracle, d_pass, d_fail, cfg)?;
    let xs = discriminative_pvts(d_pass, d_fail, cfg)?;
    let mut session = Session::new(oracle, cfg);
    let x_star = search(&mut session, &xs, d_fail, base.fail_score, &BTreeSet::new())?;
    finish(&mut session, Algorithm::Greedy, x_star, d_fail, &base, xs.len())
}

/// The greedy loop. Triplets in `suspect` were pruned earlier by group
/// testing; accepting one of them is recorded as an assumption violation.
pub(crate) fn search(
    session: &mut Session<'_>,
    xs: &[PvtTriplet],
    d_fail: &Dataset,
    fail_score: f64,
    suspect: &BTreeSet<String>,
) -> Result<Vec<PvtTriplet>> {
    let cfg = session.cfg;
    let by_id: BTreeMap<&str, &PvtTriplet> = xs.iter().map(|x| (x.id.as_str(), x)).collect();
    let mut graph = build_pvt_attribute_graph(xs, d_fail)?;
    let mut d = d_fail.clone();
    let mut m = fail_score;
    let mut benefit: BTreeMap<String, f64> = BTreeMap::new();
    for x in xs {
        benefit.insert(x.id.clone(), benefit_on(session, &d, x));
    }
    let mut x_star: Vec<PvtTriplet> = Vec::new();

    while m > cfg.tau {
        let mut cands: BTreeSet<&str> = BTreeSet::new();
        for a in graph.max_degree_attributes() {
            if let Some(ids) = graph.pvts_of(a) {
                cands.extend(ids.iter().map(String::as_str));
            }
        }
        let Some(best) = cands.iter().map(|id| by_id[id]).max_by(|a, b| {
            let (ba, bb) = (benefit[&a.id], benefit[&b.id]);
            ba.total_cmp(&bb).then_with(|| b.order_key().cmp(&a.order_key()))
        }) else {
            return Err(session.no_explanation("candidate triplets exhausted"));
        };
        let neighbours = graph.neighbours(&best.id);
        graph.remove_pvt(&best.id);

        let next = match session.apply(&d, best) {
            Ok(next) => next,
            Err(v) => {
                session.log.warn(format!(
                    "skipped {}: transform failed (best violation {v:.3e})",
                    best.id
                ));
                continue;
            }
        };
        let score = session.evaluate(&next, Phase::Greedy, &[best], m, Vec::new())?;
        if m - score > 0.0 {
            if suspect.contains(&best.id) {
                session.log.warn(format!(
                    "assumption A3 violated: {} reduces the score alone but its group did not",
                    best.id
                ));
            }
            for earlier in &x_star {
                if violation(&next, &earlier.profile).is_ok_and(|v| v > 0.0) {
                    session.log.warn(format!("{} re-violated {}", best.id, earlier.id));
                }
            }
            d = next;
            m = score;
            x_star.push(best.clone());
            let remaining: Vec<String> = graph.pvt_ids().map(str::to_string).collect();
            for id in remaining {
                if violation(&d, &by_id[id.as_str()].profile).map_or(true, |v| v == 0.0) {
                    graph.remove_pvt(&id);
                }
            }
            for id in neighbours {
                if graph.contains(&id) {
                    let b = benefit_on(session, &d, by_id[id.as_str()]);
                    benefit.insert(id, b);
                }
            }
        }
    }
    Ok(x_star)
}

fn benefit_on(session: &mut Session<'_>, d: &Dataset, x: &PvtTriplet) -> f64 {
    let v = violation(d, &x.profile).unwrap_or(0.0);
    if v == 0.0 || d.row_count() == 0 {
        return 0.0;
    }
    match session.apply(d, x) {
        Ok(out) => {
            let changed = if out.row_count() != d.row_count() {
                d.row_count() - out.row_count()
            } else {
                d.changed_rows(&out).unwrap_or(0)
            };
            v * changed as f64 / d.row_count() as f64
        }
        Err(_) => 0.0,
    }
}
