//! Intervention search: find a minimal set of triplets whose transformations
//! turn the failing dataset into a passing one.

mod dtree;
mod greedy;
mod log;
mod minimal;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use dtree::{decision_tree_explain, DecisionTree, LabeledDataset, Node, MAX_TREE_DEPTH};
pub use greedy::explain_greedy;
pub use group_test::{explain_group_testing, group_test};
pub use log::{InterventionLog, LogEntry, Phase};
pub use minimal::make_minimal;

use crate::error::{Error, Result};
use crate::graph::build_pvt_attribute_graph;
use crate::oracle::Oracle;
use crate::profiles::{
    discover_profiles, enumerate_selectivity_predicates, violation, DiscoveryConfig, Profile, SelectivityConfig,
    DEFAULT_OUTLIER_K,
};
use crate::stats;
use crate::tabular::Dataset;
use crate::transforms::{coverage_with, transform_with, PvtTriplet, TransformConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Greedy,
    #[serde(rename = "gt")]
    GroupTest,
    #[serde(rename = "gt-random")]
    GroupTestRandom,
    #[serde(rename = "dtree")]
    DecisionTree,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::GroupTest => "gt",
            Algorithm::GroupTestRandom => "gt-random",
            Algorithm::DecisionTree => "dtree",
        }
    }
}

/// What group testing does when the group-monotonicity assumption breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum A3Mode {
    /// Keep going and record warnings.
    #[default]
    Warn,
    /// Abandon group testing and fall back to the greedy search.
    Strict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EngineConfig {
    pub tau: f64,
    pub seed: u64,
    pub max_interventions: usize,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub a3: A3Mode,
    pub outlier_k: f64,
    pub selectivity: SelectivityConfig,
    pub transform: TransformConfig,
    /// Significance level gating dependence profiles on the failing side.
    pub p_value: f64,
    pub bisection_restarts: usize,
    pub max_refits: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            tau: 0.1,
            seed: 0,
            max_interventions: 1000,
            algorithm: Algorithm::Greedy,
            a3: A3Mode::Warn,
            outlier_k: DEFAULT_OUTLIER_K,
            selectivity: SelectivityConfig::default(),
            transform: TransformConfig::default(),
            p_value: 0.05,
            bisection_restarts: crate::graph::DEFAULT_RESTARTS,
            max_refits: 10,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Validation(format!("tau {} is outside [0, 1]", self.tau)));
        }
        if self.max_interventions == 0 {
            return Err(Error::Validation("max_interventions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Explanation {
    pub algorithm: Algorithm,
    pub triplets: Vec<PvtTriplet>,
    pub pass_score: f64,
    pub initial_score: f64,
    pub final_score: f64,
    pub interventions: usize,
    pub candidates: usize,
    pub repaired_fingerprint: String,
    pub log: InterventionLog,
    #[serde(skip)]
    pub repaired: Dataset,
}

/// Discriminative triplets with the data needed to rank them.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub triplet: PvtTriplet,
    pub violation: f64,
    pub coverage: f64,
    pub benefit: f64,
}

fn discovery_config(cfg: &EngineConfig, d_pass: &Dataset, d_fail: &Dataset) -> DiscoveryConfig {
    DiscoveryConfig {
        outlier_k: cfg.outlier_k,
        selectivity_predicates: enumerate_selectivity_predicates(d_pass, d_fail, &cfg.selectivity),
    }
}

fn significant_on(d: &Dataset, p: &Profile, level: f64) -> bool {
    let pv = match p {
        Profile::IndepChi2 {
            attribute_j,
            attribute_k,
            ..
        } => stats::chi_square_test(d, attribute_j, attribute_k).map(|t| t.1),
        Profile::IndepPcc {
            attribute_j,
            attribute_k,
            ..
        } => stats::pearson_test(d, attribute_j, attribute_k).map(|t| t.1),
        _ => return true,
    };
    pv.is_ok_and(|pv| pv <= level)
}

/// Profiles that hold on the passing dataset, differ from every profile of the
/// failing one, and are violated by it.
pub fn discriminative_profiles(d_pass: &Dataset, d_fail: &Dataset, cfg: &EngineConfig) -> Result<Vec<Profile>> {
    if d_pass.schema() != d_fail.schema() {
        return Err(Error::Schema("passing and failing datasets differ in schema".into()));
    }
    if d_fail.row_count() == 0 {
        return Ok(Vec::new());
    }
    let dc = discovery_config(cfg, d_pass, d_fail);
    let pass = discover_profiles(d_pass, &dc);
    let fail = discover_profiles(d_fail, &dc);
    Ok(pass
        .into_iter()
        .filter(|p| !fail.iter().any(|q| p.approx_eq(q, 1e-9)))
        .filter(|p| violation(d_fail, p).is_ok_and(|v| v > 0.0))
        .filter(|p| !p.kind().is_indep() || significant_on(d_fail, p, cfg.p_value))
        .collect())
}

/// Discriminative profiles expanded into one triplet per registered transformation.
/// Dependence-breaking triplets alter the endpoint of higher degree.
pub fn discriminative_pvts(d_pass: &Dataset, d_fail: &Dataset, cfg: &EngineConfig) -> Result<Vec<PvtTriplet>> {
    let profiles = discriminative_profiles(d_pass, d_fail, cfg)?;
    let xs: Vec<PvtTriplet> = profiles.iter().flat_map(PvtTriplet::for_profile).collect();
    let g = build_pvt_attribute_graph(&xs, d_fail)?;
    xs.into_iter()
        .map(|x| {
            let (aj, ak) = match &x.profile {
                Profile::IndepChi2 {
                    attribute_j,
                    attribute_k,
                    ..
                }
                | Profile::IndepPcc {
                    attribute_j,
                    attribute_k,
                    ..
                } => (attribute_j.clone(), attribute_k.clone()),
                _ => return Ok(x),
            };
            let target = if g.degree(&aj) > g.degree(&ak) { aj } else { ak };
            x.with_target(&target)
        })
        .collect()
}

pub fn benefit_score(x: &PvtTriplet, d: &Dataset, seed: u64, tcfg: &TransformConfig) -> Result<f64> {
    let v = violation(d, &x.profile)?;
    if v == 0.0 {
        return Ok(0.0);
    }
    Ok(v * coverage_with(d, x, seed, tcfg)?)
}

/// Shared state of one engine run: oracle access, transform cache and log.
pub(crate) struct Session<'a> {
    pub oracle: &'a mut Oracle,
    pub cfg: &'a EngineConfig,
    pub log: InterventionLog,
    cache: HashMap<(String, String), std::result::Result<Dataset, f64>>,
}

impl<'a> Session<'a> {
    pub fn new(oracle: &'a mut Oracle, cfg: &'a EngineConfig) -> Self {
        Session {
            oracle,
            cfg,
            log: InterventionLog::default(),
            cache: HashMap::new(),
        }
    }

    /// Transform with memoization; a failure is reported as its best violation.
    pub fn apply(&mut self, d: &Dataset, x: &PvtTriplet) -> std::result::Result<Dataset, f64> {
        let key = (d.fingerprint().to_string(), x.id.clone());
        if let Some(r) = self.cache.get(&key) {
            return r.clone();
        }
        let r = match transform_with(d, x, self.cfg.seed, &self.cfg.transform) {
            Ok(out) => Ok(out),
            Err(Error::TransformFailure { best_violation, .. }) => Err(best_violation),
            Err(e) => {
                self.log.warn(format!("transform {} is not applicable: {e}", x.id));
                Err(1.0)
            }
        };
        self.cache.insert(key, r.clone());
        r
    }

    /// Apply triplets in order, skipping any whose transformation fails.
    pub fn compose(&mut self, d: &Dataset, xs: &[&PvtTriplet]) -> (Dataset, Vec<String>) {
        let mut cur = d.clone();
        let mut warnings = Vec::new();
        let mut applied: Vec<&PvtTriplet> = Vec::new();
        for x in xs {
            match self.apply(&cur, x) {
                Ok(next) => {
                    cur = next;
                    for earlier in &applied {
                        if cur.row_count() > 0 && violation(&cur, &earlier.profile).is_ok_and(|v| v > 0.0) {
                            warnings.push(format!("{} re-violated {}", x.id, earlier.id));
                        }
                    }
                    applied.push(x);
                }
                Err(best) => {
                    let w = format!("skipped {}: transform failed (best violation {best:.3e})", x.id);
                    self.log.warn(w.clone());
                    warnings.push(w);
                }
            }
        }
        (cur, warnings)
    }

    /// Score a dataset, logging it when it costs a fresh intervention.
    pub fn evaluate(
        &mut self,
        d: &Dataset,
        phase: Phase,
        triplets: &[&PvtTriplet],
        pre_score: f64,
        warnings: Vec<String>,
    ) -> Result<f64> {
        if !self.oracle.is_intervened(d) && self.oracle.intervention_count() >= self.cfg.max_interventions {
            return Err(self.no_explanation("intervention budget exhausted"));
        }
        let (score, fresh) = match self.oracle.evaluate_tracked(d) {
            Ok(r) => r,
            Err(e) => {
                self.log.warn(format!("oracle error: {e}"));
                return Err(e);
            }
        };
        if fresh {
            let accepted = match phase {
                Phase::Minimal | Phase::Tree | Phase::Verify => score <= self.cfg.tau,
                Phase::Greedy | Phase::GroupTest => score < pre_score,
            };
            self.log.entries.push(LogEntry {
                step: self.log.entries.len() + 1,
                phase,
                triplets: triplets.iter().map(|x| x.id.clone()).collect(),
                pre_score,
                post_score: score,
                accepted,
                warnings,
            });
        }
        Ok(score)
    }

    pub fn no_explanation(&self, reason: &str) -> Error {
        Error::NoExplanation {
            reason: reason.to_string(),
            log: Box::new(self.log.clone()),
        }
    }
}

pub(crate) struct Baseline {
    pub pass_score: f64,
    pub fail_score: f64,
}

/// Score both inputs and check that there is something to explain.
pub(crate) fn baseline(
    oracle: &mut Oracle,
    d_pass: &Dataset,
    d_fail: &Dataset,
    cfg: &EngineConfig,
) -> Result<Baseline> {
    cfg.validate()?;
    if d_pass.schema() != d_fail.schema() {
        return Err(Error::Schema("passing and failing datasets differ in schema".into()));
    }
    let pass_score = oracle.evaluate_baseline(d_pass)?;
    let fail_score = oracle.evaluate_baseline(d_fail)?;
    if pass_score > cfg.tau {
        return Err(Error::Validation(format!(
            "passing dataset scores {pass_score}, above tau {}",
            cfg.tau
        )));
    }
    if fail_score <= cfg.tau {
        return Err(Error::Validation(format!(
            "failing dataset scores {fail_score}, within tau {}; nothing to explain",
            cfg.tau
        )));
    }
    Ok(Baseline { pass_score, fail_score })
}

/// Minimize, re-verify and package an explanation.
pub(crate) fn finish(
    session: &mut Session<'_>,
    algorithm: Algorithm,
    x_star: Vec<PvtTriplet>,
    d_fail: &Dataset,
    base: &Baseline,
    candidates: usize,
) -> Result<Explanation> {
    let minimal = minimal::minimize(session, x_star, d_fail, base.fail_score)?;
    let refs: Vec<&PvtTriplet> = minimal.iter().collect();
    let (repaired, warnings) = session.compose(d_fail, &refs);
    let final_score = session.evaluate(&repaired, Phase::Verify, &refs, base.fail_score, warnings)?;
    if final_score > session.cfg.tau {
        return Err(session.no_explanation("composed explanation does not pass on re-verification"));
    }
    Ok(Explanation {
        algorithm,
        triplets: minimal,
        pass_score: base.pass_score,
        initial_score: base.fail_score,
        final_score,
        interventions: session.oracle.intervention_count(),
        candidates,
        repaired_fingerprint: repaired.fingerprint().to_string(),
        log: session.log.clone(),
        repaired,
    })
}

/// Run the configured algorithm.
pub fn explain(d_pass: &Dataset, d_fail: &Dataset, oracle: &mut Oracle, cfg: &EngineConfig) -> Result<Explanation> {
    match cfg.algorithm {
        Algorithm::Greedy => explain_greedy(d_pass, d_fail, oracle, cfg),
        Algorithm::GroupTest | Algorithm::GroupTestRandom => explain_group_testing(d_pass, d_fail, oracle, cfg),
        Algorithm::DecisionTree => {
            let labeled = [
                LabeledDataset::pass(d_pass.clone()),
                LabeledDataset::fail(d_fail.clone()),
            ];
            decision_tree_explain(&labeled, d_fail, oracle, cfg)
        }
    }
}

/// Candidates with their violation, coverage and benefit on `d`, in discovery order.
pub fn rank_candidates(xs: &[PvtTriplet], d: &Dataset, cfg: &EngineConfig) -> Vec<Candidate> {
    xs.iter()
        .map(|x| {
            let v = violation(d, &x.profile).unwrap_or(0.0);
            let c = if v == 0.0 {
                0.0
            } else {
                coverage_with(d, x, cfg.seed, &cfg.transform).unwrap_or(0.0)
            };
            Candidate {
                triplet: x.clone(),
                violation: v,
                coverage: c,
                benefit: v * c,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::ProfileKind;
    use crate::tabular::fixtures::*;

    #[test]
    fn people_discriminative_profiles() {
        let cfg = EngineConfig::default();
        let ps = discriminative_profiles(&people_pass(), &people_fail(), &cfg).unwrap();
        let has = |kind: ProfileKind, attr: &str| {
            ps.iter()
                .any(|p| p.kind() == kind && p.attributes().iter().any(|a| a == attr))
        };
        assert!(has(ProfileKind::Missing, "zip_code"));
        assert!(has(ProfileKind::IndepChi2, "race"));
        for p in &ps {
            assert_eq!(violation(&people_pass(), p).unwrap(), 0.0);
            assert!(violation(&people_fail(), p).unwrap() > 0.0);
        }
    }

    #[test]
    fn identical_inputs_have_no_candidates() {
        let cfg = EngineConfig::default();
        let d = people_fail();
        assert!(discriminative_pvts(&d, &d, &cfg).unwrap().is_empty());
    }

    #[test]
    fn indep_target_is_the_busier_attribute() {
        let cfg = EngineConfig::default();
        let xs = discriminative_pvts(&people_pass(), &people_fail(), &cfg).unwrap();
        let indep = xs
            .iter()
            .find(|x| x.profile.kind() == ProfileKind::IndepChi2 && x.attributes().contains(&"race".to_string()))
            .unwrap();
        let g = build_pvt_attribute_graph(&xs, &people_fail()).unwrap();
        let target = indep.target.as_deref().unwrap();
        let other = if target == "race" { "high_expenditure" } else { "race" };
        assert!(g.degree(target) >= g.degree(other));
        assert!(g.degree("race") > g.degree("high_expenditure"));
        assert_eq!(target, "race");
    }

    #[test]
    fn benefit_of_missing_zip() {
        let x = PvtTriplet::new(
            Profile::Missing {
                attribute: "zip_code".into(),
                theta: 1.0 / 9.0,
            },
            crate::transforms::TransformKind::ImputeMissing,
        )
        .unwrap();
        let b = benefit_score(&x, &people_fail(), 0, &TransformConfig::default()).unwrap();
        assert!((b - 0.1 * 0.2).abs() < 1e-12);
        assert_eq!(
            benefit_score(&x, &people_pass(), 0, &TransformConfig::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn schema_mismatch() {
        let cfg = EngineConfig::default();
        let other = people_fail().take_rows(&[0]);
        let narrowed = crate::tabular::Dataset::new(other.columns()[..2].to_vec()).unwrap();
        assert!(matches!(
            discriminative_pvts(&people_pass(), &narrowed, &cfg),
            Err(Error::Schema(_))
        ));
    }
}
