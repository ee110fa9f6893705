//! Synthetic pass/fail pairs with planted causes and matching closed-form oracles.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{EngineConfig, LabeledDataset};
use crate::error::{Error, Result};
use crate::oracle::{BuiltinOracle, Check, Logic};
use crate::profiles::{ProfileKind, DEFAULT_OUTLIER_K};
use crate::tabular::{Column, ColumnData, Dataset, Predicate, Term};
use crate::transforms::{PvtTriplet, TransformKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleFamily {
    /// Labels arrive in an encoding the system does not expect.
    DomainRemap,
    /// A label depends on a sensitive attribute; scored by the parity gap.
    DependenceBias,
    /// Slowdowns triggered by skewed, missing or extreme values.
    SkewTimeoutAnalog,
    /// Two causes that only help when fixed together.
    InteractionPair,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CauseLogic {
    #[default]
    Conjunctive,
    Disjunctive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauseSpec {
    pub kind: ProfileKind,
    /// Column name for the cause; generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
}

impl CauseSpec {
    pub fn new(kind: ProfileKind) -> Self {
        CauseSpec { kind, attribute: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Total column count; 0 means as many as the scenario needs. Filler
    /// columns pad up to this count.
    #[serde(default)]
    pub n_attributes: usize,
    #[serde(default = "default_rows")]
    pub n_rows: usize,
    #[serde(default)]
    pub seed: u64,
    /// Empty means the family's default causes.
    #[serde(default)]
    pub planted_causes: Vec<CauseSpec>,
    #[serde(default)]
    pub cause_logic: CauseLogic,
    pub oracle_family: OracleFamily,
    /// Inert discriminative triplets planted on text columns.
    #[serde(default)]
    pub decoys: usize,
    #[serde(default = "default_decoys_per_attribute")]
    pub decoys_per_attribute: usize,
    /// Cells perturbed by each decoy.
    #[serde(default = "default_decoy_cells")]
    pub decoy_cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

fn default_rows() -> usize {
    200
}

fn default_decoys_per_attribute() -> usize {
    2
}

fn default_decoy_cells() -> usize {
    3
}

impl ScenarioSpec {
    pub fn new(family: OracleFamily) -> Self {
        ScenarioSpec {
            n_attributes: 0,
            n_rows: default_rows(),
            seed: 0,
            planted_causes: Vec::new(),
            cause_logic: CauseLogic::Conjunctive,
            oracle_family: family,
            decoys: 0,
            decoys_per_attribute: default_decoys_per_attribute(),
            decoy_cells: default_decoy_cells(),
            tau: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or(match self.oracle_family {
            OracleFamily::DependenceBias => 0.2,
            _ => 0.1,
        })
    }

    /// Planted causes with the family defaults filled in.
    pub fn causes(&self) -> Vec<CauseSpec> {
        if !self.planted_causes.is_empty() {
            return self.planted_causes.clone();
        }
        let kinds: &[ProfileKind] = match self.oracle_family {
            OracleFamily::DomainRemap => &[ProfileKind::DomainCategorical],
            OracleFamily::DependenceBias => &[ProfileKind::IndepChi2],
            OracleFamily::SkewTimeoutAnalog => &[ProfileKind::Selectivity],
            OracleFamily::InteractionPair => &[ProfileKind::Missing, ProfileKind::Selectivity],
        };
        kinds.iter().map(|&k| CauseSpec::new(k)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.n_rows < 40 {
            return bad(format!("n_rows {} is below the minimum of 40", self.n_rows));
        }
        if !(1..=2).contains(&self.decoys_per_attribute) {
            return bad("decoys_per_attribute must be 1 or 2".into());
        }
        if self.decoy_cells == 0 || self.decoy_cells > self.n_rows / 10 {
            return bad(format!("decoy_cells must lie in 1..={}", self.n_rows / 10));
        }
        let tau = self.tau();
        if !(0.0..1.0).contains(&tau) {
            return bad(format!("tau {tau} must lie in [0, 1)"));
        }
        let causes = self.causes();
        let kinds: Vec<ProfileKind> = causes.iter().map(|c| c.kind).collect();
        use ProfileKind::*;
        match self.oracle_family {
            OracleFamily::DomainRemap if kinds != [DomainCategorical] => {
                return bad("DomainRemap plants exactly one DomainCategorical cause".into());
            }
            OracleFamily::DependenceBias if kinds != [IndepChi2] => {
                return bad("DependenceBias plants exactly one IndepChi2 cause".into());
            }
            OracleFamily::SkewTimeoutAnalog
                if kinds.is_empty()
                    || kinds.len() > 3
                    || kinds.iter().any(|k| !matches!(k, Selectivity | Missing | Outlier)) =>
            {
                return bad("SkewTimeoutAnalog plants 1 to 3 Selectivity, Missing or Outlier causes".into());
            }
            OracleFamily::InteractionPair
                if kinds.len() != 2 || kinds.iter().any(|k| !matches!(k, Selectivity | Missing | Outlier)) =>
            {
                return bad("InteractionPair plants exactly two Selectivity, Missing or Outlier causes".into());
            }
            _ => {}
        }
        if self.oracle_family == OracleFamily::InteractionPair && self.cause_logic == CauseLogic::Disjunctive {
            return bad("InteractionPair causes are conjunctive by construction".into());
        }
        let names = self.layout()?;
        if self.n_attributes != 0 && names.len() > self.n_attributes {
            return bad(format!(
                "scenario needs {} attributes but n_attributes is {}",
                names.len(),
                self.n_attributes
            ));
        }
        Ok(())
    }

    fn cause_attribute(&self, i: usize, c: &CauseSpec) -> String {
        if let Some(a) = &c.attribute {
            return a.clone();
        }
        match c.kind {
            ProfileKind::DomainCategorical | ProfileKind::IndepChi2 => "target".into(),
            ProfileKind::Selectivity => format!("plate_{i}"),
            ProfileKind::Outlier => format!("latency_{i}"),
            _ => format!("field_{i}"),
        }
    }

    fn decoy_columns(&self) -> usize {
        self.decoys.div_ceil(self.decoys_per_attribute)
    }

    /// Structural column names (without filler), checked for clashes.
    fn layout(&self) -> Result<Vec<String>> {
        let mut names = Vec::new();
        match self.oracle_family {
            OracleFamily::DomainRemap => names.push("polarity".to_string()),
            OracleFamily::DependenceBias => names.push("sex".to_string()),
            _ => {}
        }
        for (i, c) in self.causes().iter().enumerate() {
            names.push(self.cause_attribute(i, c));
        }
        for k in 0..self.decoy_columns() {
            names.push(format!("text_{k}"));
        }
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() || names.iter().any(|n| n.is_empty()) {
            return Err(Error::Validation("planted cause attributes clash".into()));
        }
        Ok(names)
    }
}

/// A cause planted by the generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedCause {
    pub kind: ProfileKind,
    pub attributes: Vec<String>,
    pub transform: TransformKind,
}

impl PlantedCause {
    pub fn label(&self) -> String {
        format!("{}({})", self.kind, self.attributes.join(","))
    }

    pub fn matches(&self, x: &PvtTriplet) -> bool {
        x.profile.kind() == self.kind
            && x.transform == self.transform
            && self.attributes.iter().all(|a| x.attributes().contains(a))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub family: OracleFamily,
    pub logic: CauseLogic,
    pub tau: f64,
    pub causes: Vec<PlantedCause>,
    /// Minimal explanations the oracle accepts, as cause labels.
    pub admissible: Vec<Vec<String>>,
}

impl GroundTruth {
    /// Whether a set of triplets is one of the admissible explanations.
    pub fn is_admissible(&self, xs: &[PvtTriplet]) -> bool {
        let labels: BTreeSet<String> = xs
            .iter()
            .filter_map(|x| self.causes.iter().find(|c| c.matches(x)).map(PlantedCause::label))
            .collect();
        labels.len() == xs.len()
            && self
                .admissible
                .iter()
                .any(|a| a.iter().cloned().collect::<BTreeSet<_>>() == labels)
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub pass: Dataset,
    pub fail: Dataset,
    pub oracle: BuiltinOracle,
    pub truth: GroundTruth,
    /// Passing and failing datasets for the decision-tree search; the
    /// interaction family adds one failing dataset per single cause.
    pub labeled: Vec<LabeledDataset>,
}

impl Scenario {
    pub fn tau(&self) -> f64 {
        self.truth.tau
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            tau: self.truth.tau,
            seed: self.spec.seed,
            ..Default::default()
        }
    }
}

// ---------------------------------------------------------------------------

enum Perturb {
    Blank {
        col: usize,
        rows: Vec<usize>,
    },
    SetNum {
        col: usize,
        rows: Vec<usize>,
        values: Vec<f64>,
    },
    SetStr {
        col: usize,
        rows: Vec<usize>,
        values: Vec<String>,
    },
}

fn apply(base: &[Column], perturbs: &[&Perturb], n: usize) -> Result<Dataset> {
    let mut cols = base.to_vec();
    for p in perturbs {
        match p {
            Perturb::Blank { col, rows } => match &mut cols[*col].data {
                ColumnData::Numerical(v) => rows.iter().for_each(|&r| v[r] = None),
                ColumnData::Categorical(v) | ColumnData::Text(v) => rows.iter().for_each(|&r| v[r] = None),
            },
            Perturb::SetNum { col, rows, values } => {
                if let ColumnData::Numerical(v) = &mut cols[*col].data {
                    for (&r, &x) in rows.iter().zip(values) {
                        v[r] = Some(x);
                    }
                }
            }
            Perturb::SetStr { col, rows, values } => match &mut cols[*col].data {
                ColumnData::Categorical(v) | ColumnData::Text(v) => {
                    for (&r, x) in rows.iter().zip(values) {
                        v[r] = Some(x.clone());
                    }
                }
                ColumnData::Numerical(_) => {}
            },
        }
    }
    Dataset::with_row_count(cols, n)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Values 50 ± U(4, 6): every point sits near one standard deviation from
/// the mean, so none is an outlier.
/// Two bands either side of 50, alternating by row so that dropping whole
/// row pairs keeps them balanced and free of k-stddev outliers.
fn banded_numbers(rng: &mut ChaCha8Rng, n: usize) -> Vec<Option<f64>> {
    (0..n)
        .map(|r| {
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            Some(round2(50.0 + sign * rng.gen_range(4.0..6.0)))
        })
        .collect()
}

fn word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

fn words(rng: &mut ChaCha8Rng, n: usize) -> Vec<Option<String>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = rng.gen_range(6..=10);
        let w = word(rng, len);
        if seen.insert(w.clone()) {
            out.push(Some(w));
        }
    }
    out
}

fn pick_rows(rng: &mut ChaCha8Rng, pool: &[usize], k: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = pool.choose_multiple(rng, k).copied().collect();
    rows.sort_unstable();
    rows
}

/// Labels with exactly `count_a` copies of `a` and the rest `b`, shuffled.
fn two_labels(rng: &mut ChaCha8Rng, n: usize, count_a: usize, a: &str, b: &str) -> Vec<String> {
    let mut v: Vec<String> = (0..n).map(|i| if i < count_a { a } else { b }.to_string()).collect();
    v.shuffle(rng);
    v
}

struct Planted {
    check: Check,
    cause: PlantedCause,
    perturbs: Vec<Perturb>,
}

/// Generate the pass/fail pair, oracle and ground truth for a spec.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let n = spec.n_rows;
    let all: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut base: Vec<Column> = Vec::new();
    let mut planted: Vec<Planted> = Vec::new();

    match spec.oracle_family {
        OracleFamily::DomainRemap => {
            let neg = (n * 11).div_ceil(20);
            let labels = two_labels(&mut rng, n, neg, "-1", "1");
            let polarity: Vec<Option<f64>> = labels
                .iter()
                .map(|l| Some(if l == "-1" { -1.0 } else { 1.0 }))
                .collect();
            base.push(Column::numerical("polarity", polarity));
            let target = spec.cause_attribute(0, &spec.causes()[0]);
            let col = base.len();
            base.push(Column::categorical(
                &target,
                labels.iter().map(|l| Some(l.clone())).collect(),
            ));
            let values: Vec<String> = labels
                .iter()
                .map(|l| if l == "-1" { "0" } else { "4" }.to_string())
                .collect();
            let expected = BTreeMap::from([("-1".to_string(), "-1".to_string()), ("1".to_string(), "1".to_string())]);
            planted.push(Planted {
                check: Check::LabelAgreement {
                    label: target.clone(),
                    reference: "polarity".into(),
                    expected,
                },
                cause: PlantedCause {
                    kind: ProfileKind::DomainCategorical,
                    attributes: vec![target],
                    transform: TransformKind::CategoricalRemap,
                },
                perturbs: vec![Perturb::SetStr {
                    col,
                    rows: all.clone(),
                    values,
                }],
            });
        }
        OracleFamily::DependenceBias => {
            let males = n / 2;
            let sex = two_labels(&mut rng, n, males, "M", "F");
            base.push(Column::categorical(
                "sex",
                sex.iter().map(|s| Some(s.clone())).collect(),
            ));
            let target = spec.cause_attribute(0, &spec.causes()[0]);
            let m_rows: Vec<usize> = all.iter().copied().filter(|&r| sex[r] == "M").collect();
            let f_rows: Vec<usize> = all.iter().copied().filter(|&r| sex[r] == "F").collect();
            let mut pass_t = vec!["<=50K".to_string(); n];
            for rows in [&m_rows, &f_rows] {
                let k = (rows.len() as f64 * 0.3).round() as usize;
                for &r in &pick_rows(&mut rng, rows, k) {
                    pass_t[r] = ">50K".into();
                }
            }
            let col = base.len();
            base.push(Column::categorical(
                &target,
                pass_t.iter().map(|s| Some(s.clone())).collect(),
            ));
            let mut fail_t = vec!["<=50K".to_string(); n];
            let m_pos = (m_rows.len() as f64 * 0.55).round() as usize;
            let f_pos = (f_rows.len() as f64 * 0.05).round() as usize;
            for &r in pick_rows(&mut rng, &m_rows, m_pos)
                .iter()
                .chain(&pick_rows(&mut rng, &f_rows, f_pos))
            {
                fail_t[r] = ">50K".into();
            }
            // unrecorded incomes, balanced so the sex/income table can still be made independent
            let mut unrecorded = Vec::new();
            for rows in [&m_rows, &f_rows] {
                let low: Vec<usize> = rows.iter().copied().filter(|&r| fail_t[r] == "<=50K").collect();
                unrecorded.extend(pick_rows(&mut rng, &low, (n / 100).max(1)));
            }
            planted.push(Planted {
                check: Check::ParityGap {
                    target: target.clone(),
                    positive: ">50K".into(),
                    group: "sex".into(),
                    scale: 1.0,
                },
                cause: PlantedCause {
                    kind: ProfileKind::IndepChi2,
                    attributes: vec!["sex".into(), target],
                    transform: TransformKind::ShuffleDependence,
                },
                perturbs: vec![
                    Perturb::SetStr {
                        col,
                        rows: all.clone(),
                        values: fail_t,
                    },
                    Perturb::Blank { col, rows: unrecorded },
                ],
            });
        }
        OracleFamily::SkewTimeoutAnalog | OracleFamily::InteractionPair => {
            for (i, c) in spec.causes().iter().enumerate() {
                let attr = spec.cause_attribute(i, c);
                let col = base.len();
                let p = match c.kind {
                    ProfileKind::Missing => {
                        base.push(Column::numerical(&attr, banded_numbers(&mut rng, n)));
                        Planted {
                            check: Check::MissingExcess {
                                attribute: attr.clone(),
                                threshold: 0.05,
                                scale: 0.1,
                            },
                            cause: PlantedCause {
                                kind: ProfileKind::Missing,
                                attributes: vec![attr],
                                transform: TransformKind::ImputeMissing,
                            },
                            perturbs: vec![Perturb::Blank {
                                col,
                                rows: pick_rows(&mut rng, &all, n / 5),
                            }],
                        }
                    }
                    ProfileKind::Outlier => {
                        base.push(Column::numerical(&attr, banded_numbers(&mut rng, n)));
                        let rows = pick_rows(&mut rng, &all, n / 10);
                        let values = rows.iter().map(|_| round2(200.0 + rng.gen_range(0.0..10.0))).collect();
                        Planted {
                            check: Check::OutlierExcess {
                                attribute: attr.clone(),
                                k: DEFAULT_OUTLIER_K,
                                threshold: 0.02,
                                scale: 0.05,
                            },
                            cause: PlantedCause {
                                kind: ProfileKind::Outlier,
                                attributes: vec![attr],
                                transform: TransformKind::OutlierToMean,
                            },
                            perturbs: vec![Perturb::SetNum { col, rows, values }],
                        }
                    }
                    _ => {
                        // license-plate colours; black is rare in the passing data
                        // colours come in row pairs, matching the bands of banded_numbers
                        let pairs = n / 2;
                        let black = n / 20;
                        let mut pair_colours: Vec<&str> = (0..pairs)
                            .map(|p| {
                                if p < black {
                                    "black"
                                } else {
                                    ["white", "silver", "blue"][p % 3]
                                }
                            })
                            .collect();
                        pair_colours.shuffle(&mut rng);
                        let colours: Vec<String> = (0..n)
                            .map(|r| pair_colours.get(r / 2).copied().unwrap_or("white").to_string())
                            .collect();
                        let others: Vec<usize> = (0..pairs).filter(|&p| pair_colours[p] != "black").collect();
                        let rows: Vec<usize> = pick_rows(&mut rng, &others, 3 * n / 20)
                            .into_iter()
                            .flat_map(|p| [2 * p, 2 * p + 1])
                            .collect();
                        let values = vec!["black".to_string(); rows.len()];
                        base.push(Column::categorical(&attr, colours.into_iter().map(Some).collect()));
                        let predicate = Predicate::new(vec![Term::eq(&attr, "black")])?;
                        Planted {
                            check: Check::PredicateExcess {
                                predicate,
                                threshold: 0.15,
                                scale: 0.15,
                            },
                            cause: PlantedCause {
                                kind: ProfileKind::Selectivity,
                                attributes: vec![attr],
                                transform: TransformKind::Subsample,
                            },
                            perturbs: vec![Perturb::SetStr { col, rows, values }],
                        }
                    }
                };
                planted.push(p);
            }
        }
    }

    // decoys: overlong values and blanks on otherwise identical text columns
    let mut decoys: Vec<Perturb> = Vec::new();
    let mut left = spec.decoys;
    for k in 0..spec.decoy_columns() {
        let col = base.len();
        base.push(Column::text(format!("text_{k}"), words(&mut rng, n)));
        let here = left.min(spec.decoys_per_attribute);
        left -= here;
        let rows = pick_rows(&mut rng, &all, spec.decoy_cells * here);
        let (first, second) = rows.split_at(spec.decoy_cells);
        let values = first.iter().map(|_| word(&mut rng, 16)).collect();
        decoys.push(Perturb::SetStr {
            col,
            rows: first.to_vec(),
            values,
        });
        if here == 2 {
            decoys.push(Perturb::Blank {
                col,
                rows: second.to_vec(),
            });
        }
    }
    let mut j = 0;
    while base.len() < spec.n_attributes {
        if j % 2 == 0 {
            base.push(Column::numerical(format!("x_{}", j / 2), banded_numbers(&mut rng, n)));
        } else {
            base.push(Column::text(format!("note_{}", j / 2), words(&mut rng, n)));
        }
        j += 1;
    }

    let pass = Dataset::with_row_count(base.clone(), n)?;
    let with = |causes: &[usize]| -> Result<Dataset> {
        let ps: Vec<&Perturb> = causes
            .iter()
            .flat_map(|&i| planted[i].perturbs.iter())
            .chain(decoys.iter())
            .collect();
        apply(&base, &ps, n)
    };
    let every: Vec<usize> = (0..planted.len()).collect();
    let fail = with(&every)?;

    let mut labeled = vec![LabeledDataset::pass(pass.clone())];
    if spec.oracle_family == OracleFamily::InteractionPair {
        labeled.push(LabeledDataset::fail(with(&[0])?));
        labeled.push(LabeledDataset::fail(with(&[1])?));
    }
    labeled.push(LabeledDataset::fail(fail.clone()));

    let logic = match (spec.oracle_family, spec.cause_logic) {
        (OracleFamily::InteractionPair, _) => Logic::InteractionPair,
        (_, CauseLogic::Conjunctive) => Logic::Conjunctive,
        (_, CauseLogic::Disjunctive) => Logic::Disjunctive,
    };
    let causes: Vec<PlantedCause> = planted.iter().map(|p| p.cause.clone()).collect();
    let labels: Vec<String> = causes.iter().map(PlantedCause::label).collect();
    let admissible = match logic {
        Logic::Disjunctive => labels.iter().map(|l| vec![l.clone()]).collect(),
        _ => vec![labels],
    };
    let oracle = BuiltinOracle {
        name: format!("{:?}", spec.oracle_family),
        logic,
        checks: planted.into_iter().map(|p| p.check).collect(),
    };
    Ok(Scenario {
        spec: spec.clone(),
        pass,
        fail,
        oracle,
        truth: GroundTruth {
            family: spec.oracle_family,
            logic: spec.cause_logic,
            tau: spec.tau(),
            causes,
            admissible,
        },
        labeled,
    })
}

/// Number of decoys in the adversarial scenario ranked above the true cause.
pub const ADVERSARIAL_STRONG_DECOYS: usize = 53;
pub const ADVERSARIAL_WEAK_DECOYS: usize = 6;

/// A scenario whose true cause has a low benefit score: a couple of blanked
/// keys, ranked behind many stronger but inert decoys. Every column carries a
/// single triplet, so the greedy search walks the benefit order.
pub fn adversarial_rank_scenario(seed: u64) -> Scenario {
    let n = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ad5e);
    let all: Vec<usize> = (0..n).collect();
    let mut base = vec![Column::text(
        "key_field",
        (0..n).map(|r| Some(format!("k{:05}", 10_000 + r))).collect(),
    )];
    let mut perturbs = vec![Perturb::Blank {
        col: 0,
        rows: pick_rows(&mut rng, &all, 2),
    }];
    let total = ADVERSARIAL_STRONG_DECOYS + ADVERSARIAL_WEAK_DECOYS;
    let mut strengths: Vec<usize> = (0..total)
        .map(|i| if i < ADVERSARIAL_STRONG_DECOYS { 3 } else { 1 })
        .collect();
    strengths.shuffle(&mut rng);
    for (k, cells) in strengths.into_iter().enumerate() {
        let col = base.len();
        base.push(Column::text(format!("text_{k:02}"), words(&mut rng, n)));
        let rows = pick_rows(&mut rng, &all, cells);
        if rng.gen_bool(0.5) {
            perturbs.push(Perturb::Blank { col, rows });
        } else {
            let values = rows.iter().map(|_| word(&mut rng, 16)).collect();
            perturbs.push(Perturb::SetStr { col, rows, values });
        }
    }
    let pass = Dataset::with_row_count(base.clone(), n).expect("generated columns are consistent");
    let refs: Vec<&Perturb> = perturbs.iter().collect();
    let fail = apply(&base, &refs, n).expect("generated columns are consistent");
    let cause = PlantedCause {
        kind: ProfileKind::Missing,
        attributes: vec!["key_field".into()],
        transform: TransformKind::ImputeMissing,
    };
    let mut spec = ScenarioSpec::new(OracleFamily::SkewTimeoutAnalog);
    spec.n_rows = n;
    spec.seed = seed;
    spec.n_attributes = base.len();
    spec.decoys = total;
    spec.decoys_per_attribute = 1;
    spec.planted_causes = vec![CauseSpec {
        kind: ProfileKind::Missing,
        attribute: Some("key_field".into()),
    }];
    Scenario {
        spec,
        labeled: vec![LabeledDataset::pass(pass.clone()), LabeledDataset::fail(fail.clone())],
        pass,
        fail,
        oracle: BuiltinOracle {
            name: "AdversarialRank".into(),
            logic: Logic::Conjunctive,
            checks: vec![Check::MissingExcess {
                attribute: "key_field".into(),
                threshold: 0.0,
                scale: 0.01,
            }],
        },
        truth: GroundTruth {
            family: OracleFamily::SkewTimeoutAnalog,
            logic: CauseLogic::Conjunctive,
            tau: 0.1,
            admissible: vec![vec![cause.label()]],
            causes: vec![cause],
        },
    }
}
