use crate::error::Result;
use crate::oracle::Oracle;
use crate::tabular::Dataset;
use crate::transforms::PvtTriplet;

use super::{EngineConfig, Phase, Session};

/// Drop members one at a time, in insertion order, while the remainder still
/// passes; restart the scan after every successful drop.
pub fn make_minimal(
    x_star: Vec<PvtTriplet>,
    d_fail: &Dataset,
    oracle: &mut Oracle,
    cfg: &EngineConfig,
) -> Result<Vec<PvtTriplet>> {
    let fail_score = oracle.evaluate_baseline(d_fail)?;
    let mut session = Session::new(oracle, cfg);
    minimize(&mut session, x_star, d_fail, fail_score)
}

pub(crate) fn minimize(
    session: &mut Session<'_>,
    x_star: Vec<PvtTriplet>,
    d_fail: &Dataset,
    fail_score: f64,
) -> Result<Vec<PvtTriplet>> {
    let mut current = x_star;
    'scan: loop {
        for i in 0..current.len() {
            let rest: Vec<&PvtTriplet> = current
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, x)| x)
                .collect();
            let score = if rest.is_empty() {
                fail_score
            } else {
                let (d, warnings) = session.compose(d_fail, &rest);
                session.evaluate(&d, Phase::Minimal, &rest, fail_score, warnings)?
            };
            if score <= session.cfg.tau {
                current.remove(i);
                continue 'scan;
            }
        }
        return Ok(current);
    }
}
