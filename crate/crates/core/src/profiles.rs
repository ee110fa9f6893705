//! Data profiles: discovery over a dataset and violation scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::tabular::{ColumnData, ColumnType, Dataset, Predicate, Term};

pub const DEFAULT_OUTLIER_K: f64 = 1.5;

/// Character class of a run inside a text value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Token {
    Digits,
    Letters,
    Symbol(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Digits => f.write_str("\\d+"),
            Token::Letters => f.write_str("\\a+"),
            Token::Symbol(c) => write!(f, "{c}"),
        }
    }
}

/// Generalize a value to its sequence of digit runs, letter runs and single symbols.
pub fn tokenize(s: &str) -> Vec<Token> {
    let mut out: Vec<Token> = Vec::new();
    for c in s.chars() {
        let t = if c.is_ascii_digit() {
            Token::Digits
        } else if c.is_alphabetic() {
            Token::Letters
        } else {
            Token::Symbol(c)
        };
        let merge = matches!(
            (out.last(), &t),
            (Some(Token::Digits), Token::Digits) | (Some(Token::Letters), Token::Letters)
        );
        if !merge {
            out.push(t);
        }
    }
    out
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProfileKind {
    DomainCategorical,
    DomainNumerical,
    DomainText,
    Outlier,
    Missing,
    Selectivity,
    IndepChi2,
    #[serde(rename = "IndepPCC")]
    IndepPcc,
}

impl ProfileKind {
    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::DomainCategorical => "DomainCategorical",
            ProfileKind::DomainNumerical => "DomainNumerical",
            ProfileKind::DomainText => "DomainText",
            ProfileKind::Outlier => "Outlier",
            ProfileKind::Missing => "Missing",
            ProfileKind::Selectivity => "Selectivity",
            ProfileKind::IndepChi2 => "IndepChi2",
            ProfileKind::IndepPcc => "IndepPCC",
        }
    }

    pub fn is_domain(self) -> bool {
        matches!(
            self,
            ProfileKind::DomainCategorical | ProfileKind::DomainNumerical | ProfileKind::DomainText
        )
    }

    pub fn is_indep(self) -> bool {
        matches!(self, ProfileKind::IndepChi2 | ProfileKind::IndepPcc)
    }

    pub const ALL: [ProfileKind; 8] = [
        ProfileKind::DomainCategorical,
        ProfileKind::DomainNumerical,
        ProfileKind::DomainText,
        ProfileKind::Outlier,
        ProfileKind::Missing,
        ProfileKind::Selectivity,
        ProfileKind::IndepChi2,
        ProfileKind::IndepPcc,
    ];
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum Profile {
    DomainCategorical {
        attribute: String,
        values: BTreeSet<String>,
    },
    DomainNumerical {
        attribute: String,
        lb: f64,
        ub: f64,
    },
    DomainText {
        attribute: String,
        /// `None` when the observed values share no common shape.
        pattern: Option<Vec<Token>>,
        min_len: usize,
        max_len: usize,
    },
    Outlier {
        attribute: String,
        k: f64,
        theta: f64,
    },
    Missing {
        attribute: String,
        theta: f64,
    },
    Selectivity {
        predicate: Predicate,
        theta: f64,
    },
    IndepChi2 {
        attribute_j: String,
        attribute_k: String,
        alpha: f64,
    },
    #[serde(rename = "IndepPCC")]
    IndepPcc {
        attribute_j: String,
        attribute_k: String,
        alpha: f64,
    },
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

impl Profile {
    pub fn kind(&self) -> ProfileKind {
        match self {
            Profile::DomainCategorical { .. } => ProfileKind::DomainCategorical,
            Profile::DomainNumerical { .. } => ProfileKind::DomainNumerical,
            Profile::DomainText { .. } => ProfileKind::DomainText,
            Profile::Outlier { .. } => ProfileKind::Outlier,
            Profile::Missing { .. } => ProfileKind::Missing,
            Profile::Selectivity { .. } => ProfileKind::Selectivity,
            Profile::IndepChi2 { .. } => ProfileKind::IndepChi2,
            Profile::IndepPcc { .. } => ProfileKind::IndepPcc,
        }
    }

    /// Attributes the profile mentions, sorted and deduplicated.
    pub fn attributes(&self) -> Vec<String> {
        let mut out: Vec<String> = match self {
            Profile::DomainCategorical { attribute, .. }
            | Profile::DomainNumerical { attribute, .. }
            | Profile::DomainText { attribute, .. }
            | Profile::Outlier { attribute, .. }
            | Profile::Missing { attribute, .. } => vec![attribute.clone()],
            Profile::Selectivity { predicate, .. } => predicate.attributes().into_iter().map(String::from).collect(),
            Profile::IndepChi2 {
                attribute_j,
                attribute_k,
                ..
            }
            | Profile::IndepPcc {
                attribute_j,
                attribute_k,
                ..
            } => vec![attribute_j.clone(), attribute_k.clone()],
        };
        out.sort();
        out.dedup();
        out
    }

    /// First attribute in lexicographic order; used for tie-breaking.
    pub fn primary_attribute(&self) -> String {
        self.attributes().into_iter().next().unwrap_or_default()
    }

    /// Canonical JSON: kind tag plus params with sorted keys.
    pub fn canonical_json(&self) -> String {
        let v = serde_json::to_value(self).expect("profiles serialize");
        serde_json::to_string(&v).expect("values serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let theta_ok = |t: f64| (0.0..=1.0).contains(&t);
        let ok = match self {
            Profile::DomainCategorical { values, .. } => !values.is_empty(),
            Profile::DomainNumerical { lb, ub, .. } => lb.is_finite() && ub.is_finite() && lb <= ub,
            Profile::DomainText { min_len, max_len, .. } => min_len <= max_len,
            Profile::Outlier { k, theta, .. } => *k >= 0.0 && theta_ok(*theta),
            Profile::Missing { theta, .. } | Profile::Selectivity { theta, .. } => theta_ok(*theta),
            Profile::IndepChi2 {
                attribute_j,
                attribute_k,
                alpha,
            } => attribute_j != attribute_k && *alpha >= 0.0,
            Profile::IndepPcc {
                attribute_j,
                attribute_k,
                alpha,
            } => attribute_j != attribute_k && (-1.0..=1.0).contains(alpha),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("malformed profile {self}")))
        }
    }

    /// Same kind and parameters, reals compared within `tol`.
    pub fn approx_eq(&self, other: &Profile, tol: f64) -> bool {
        use Profile::*;
        match (self, other) {
            (
                DomainCategorical {
                    attribute: a,
                    values: v,
                },
                DomainCategorical {
                    attribute: b,
                    values: w,
                },
            ) => a == b && v == w,
            (
                DomainNumerical {
                    attribute: a,
                    lb: l1,
                    ub: u1,
                },
                DomainNumerical {
                    attribute: b,
                    lb: l2,
                    ub: u2,
                },
            ) => a == b && close(*l1, *l2, tol) && close(*u1, *u2, tol),
            (DomainText { .. }, DomainText { .. }) => self == other,
            (
                Outlier {
                    attribute: a,
                    k: k1,
                    theta: t1,
                },
                Outlier {
                    attribute: b,
                    k: k2,
                    theta: t2,
                },
            ) => a == b && close(*k1, *k2, tol) && close(*t1, *t2, tol),
            (
                Missing {
                    attribute: a,
                    theta: t1,
                },
                Missing {
                    attribute: b,
                    theta: t2,
                },
            ) => a == b && close(*t1, *t2, tol),
            (
                Selectivity {
                    predicate: p,
                    theta: t1,
                },
                Selectivity {
                    predicate: q,
                    theta: t2,
                },
            ) => p == q && close(*t1, *t2, tol),
            (
                IndepChi2 {
                    attribute_j: a,
                    attribute_k: b,
                    alpha: x,
                },
                IndepChi2 {
                    attribute_j: c,
                    attribute_k: d,
                    alpha: y,
                },
            )
            | (
                IndepPcc {
                    attribute_j: a,
                    attribute_k: b,
                    alpha: x,
                },
                IndepPcc {
                    attribute_j: c,
                    attribute_k: d,
                    alpha: y,
                },
            ) => a == c && b == d && close(*x, *y, tol),
            _ => false,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::DomainCategorical { attribute, values } => {
                let vs: Vec<&str> = values.iter().map(String::as_str).collect();
                write!(f, "⟨Domain, {attribute}, {{{}}}⟩", vs.join(", "))
            }
            Profile::DomainNumerical { attribute, lb, ub } => {
                write!(f, "⟨Domain, {attribute}, [{lb}, {ub}]⟩")
            }
            Profile::DomainText {
                attribute,
                pattern,
                min_len,
                max_len,
            } => {
                let pat = match pattern {
                    Some(p) => p.iter().map(ToString::to_string).collect::<String>(),
                    None => "*".to_string(),
                };
                write!(f, "⟨Domain, {attribute}, {pat}, len [{min_len}, {max_len}]⟩")
            }
            Profile::Outlier { attribute, k, theta } => {
                write!(f, "⟨Outlier, {attribute}, k={k}, {theta:.4}⟩")
            }
            Profile::Missing { attribute, theta } => write!(f, "⟨Missing, {attribute}, {theta:.4}⟩"),
            Profile::Selectivity { predicate, theta } => {
                write!(f, "⟨Selectivity, {predicate}, {theta:.4}⟩")
            }
            Profile::IndepChi2 {
                attribute_j,
                attribute_k,
                alpha,
            } => write!(f, "⟨Indep, {attribute_j}, {attribute_k}, χ²={alpha:.4}⟩"),
            Profile::IndepPcc {
                attribute_j,
                attribute_k,
                alpha,
            } => write!(f, "⟨Indep, {attribute_j}, {attribute_k}, PCC={alpha:.4}⟩"),
        }
    }
}

// ---------------------------------------------------------------------------
// Violation

/// max(0, (count − θ·n) / (n·(1 − θ))), written as a difference of fractions
/// so that a profile discovered from the same counts scores exactly zero.
pub fn thresholded_violation(count: usize, n: usize, theta: f64) -> f64 {
    if n == 0 || theta >= 1.0 {
        return 0.0;
    }
    let frac = count as f64 / n as f64;
    ((frac - theta) / (1.0 - theta)).clamp(0.0, 1.0)
}

fn outlier_flags(values: &[Option<f64>], k: f64) -> Vec<bool> {
    match crate::tabular::mean_and_stddev(values) {
        None => vec![false; values.len()],
        Some((mean, sd)) => values
            .iter()
            .map(|v| v.is_some_and(|v| (v - mean).abs() > k * sd))
            .collect(),
    }
}

/// Rows holding an outlier under the k-stddev rule, with mean and stddev
/// taken over the present values.
pub fn outlier_rows(values: &[Option<f64>], k: f64) -> Vec<usize> {
    outlier_flags(values, k)
        .into_iter()
        .enumerate()
        .filter_map(|(i, f)| f.then_some(i))
        .collect()
}

/// Whether a present cell lies outside a domain profile.
pub fn text_violates(value: &str, pattern: &Option<Vec<Token>>, min_len: usize, max_len: usize) -> bool {
    let len = char_len(value);
    if len < min_len || len > max_len {
        return true;
    }
    match pattern {
        Some(p) => &tokenize(value) != p,
        None => false,
    }
}

fn check_type(d: &Dataset, attribute: &str, allowed: &[ColumnType]) -> Result<()> {
    let ty = d.column_type(attribute)?;
    if allowed.contains(&ty) {
        Ok(())
    } else {
        Err(Error::Type(format!(
            "profile does not apply to {ty} attribute `{attribute}`"
        )))
    }
}

fn fraction_outside(present: usize, outside: usize) -> f64 {
    if present == 0 {
        0.0
    } else {
        outside as f64 / present as f64
    }
}

/// Rows of `d` that violate a row-level profile (Domain, Outlier, Missing, Selectivity).
pub fn offending_rows(d: &Dataset, p: &Profile) -> Result<Vec<usize>> {
    let rows: Vec<usize> = match p {
        Profile::DomainCategorical { attribute, values } => {
            check_type(d, attribute, &[ColumnType::Categorical])?;
            let col = d.strings(attribute)?;
            (0..d.row_count())
                .filter(|&r| col[r].as_ref().is_some_and(|v| !values.contains(v)))
                .collect()
        }
        Profile::DomainNumerical { attribute, lb, ub } => {
            let col = d.numbers(attribute)?;
            (0..d.row_count())
                .filter(|&r| col[r].is_some_and(|v| v < *lb || v > *ub))
                .collect()
        }
        Profile::DomainText {
            attribute,
            pattern,
            min_len,
            max_len,
        } => {
            check_type(d, attribute, &[ColumnType::Text])?;
            let col = d.strings(attribute)?;
            (0..d.row_count())
                .filter(|&r| {
                    col[r]
                        .as_ref()
                        .is_some_and(|v| text_violates(v, pattern, *min_len, *max_len))
                })
                .collect()
        }
        Profile::Outlier { attribute, k, .. } => outlier_rows(d.numbers(attribute)?, *k),
        Profile::Missing { attribute, .. } => {
            let col = &d.column(attribute)?.data;
            (0..d.row_count()).filter(|&r| col.is_missing(r)).collect()
        }
        Profile::Selectivity { predicate, .. } => crate::tabular::select_where(d, predicate)?,
        Profile::IndepChi2 { .. } | Profile::IndepPcc { .. } => {
            return Err(Error::Type(format!("{} has no row-level offenders", p.kind())))
        }
    };
    Ok(rows)
}

/// Degree to which `d` violates `p`, in [0, 1].
pub fn violation(d: &Dataset, p: &Profile) -> Result<f64> {
    if d.row_count() == 0 {
        return Err(Error::Degenerate("violation over an empty dataset".into()));
    }
    let n = d.row_count();
    let v = match p {
        Profile::DomainCategorical { attribute, .. }
        | Profile::DomainNumerical { attribute, .. }
        | Profile::DomainText { attribute, .. } => {
            let present = n - d.column(attribute)?.data.missing_count();
            fraction_outside(present, offending_rows(d, p)?.len())
        }
        Profile::Outlier { theta, .. } | Profile::Missing { theta, .. } | Profile::Selectivity { theta, .. } => {
            thresholded_violation(offending_rows(d, p)?.len(), n, *theta)
        }
        Profile::IndepChi2 {
            attribute_j,
            attribute_k,
            alpha,
        } => {
            let chi2 = stats::chi_square_statistic(d, attribute_j, attribute_k)?;
            indep_chi2_violation(chi2, *alpha)
        }
        Profile::IndepPcc {
            attribute_j,
            attribute_k,
            alpha,
        } => {
            let r = match stats::pearson_correlation(d, attribute_j, attribute_k) {
                Ok(r) => r,
                Err(Error::Degenerate(_)) => 0.0,
                Err(e) => return Err(e),
            };
            indep_pcc_violation(r, *alpha)
        }
    };
    Ok(v.clamp(0.0, 1.0))
}

pub fn indep_chi2_violation(chi2: f64, alpha: f64) -> f64 {
    1.0 - (-(chi2 - alpha).max(0.0)).exp()
}

pub fn indep_pcc_violation(r: f64, alpha: f64) -> f64 {
    let a = alpha.abs();
    if a >= 1.0 {
        return 0.0;
    }
    ((r.abs() - a) / (1.0 - a)).clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Discovery

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub outlier_k: f64,
    /// Predicates for which a Selectivity profile is concretized.
    #[serde(default)]
    pub selectivity_predicates: Vec<Predicate>,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            outlier_k: DEFAULT_OUTLIER_K,
            selectivity_predicates: Vec::new(),
        }
    }
}

fn text_profile(attribute: &str, values: &[Option<String>]) -> Option<Profile> {
    let present: Vec<&str> = values.iter().flatten().map(String::as_str).collect();
    let first = present.first()?;
    let mut pattern = Some(tokenize(first));
    let (mut lo, mut hi) = (usize::MAX, 0);
    for v in &present {
        let len = char_len(v);
        lo = lo.min(len);
        hi = hi.max(len);
        if pattern.as_ref().is_some_and(|p| *p != tokenize(v)) {
            pattern = None;
        }
    }
    Some(Profile::DomainText {
        attribute: attribute.to_string(),
        pattern,
        min_len: lo,
        max_len: hi,
    })
}

/// Minimal concretized profiles satisfied by `d`, in a deterministic order:
/// per-attribute kinds in schema order, then pairs, then selectivities.
pub fn discover_profiles(d: &Dataset, cfg: &DiscoveryConfig) -> Vec<Profile> {
    let n = d.row_count();
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    for col in d.columns() {
        let name = col.name.clone();
        match &col.data {
            ColumnData::Numerical(v) => {
                let present: Vec<f64> = v.iter().flatten().copied().collect();
                if !present.is_empty() {
                    let lb = present.iter().copied().fold(f64::INFINITY, f64::min);
                    let ub = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    out.push(Profile::DomainNumerical {
                        attribute: name.clone(),
                        lb,
                        ub,
                    });
                    let c = outlier_rows(v, cfg.outlier_k).len();
                    out.push(Profile::Outlier {
                        attribute: name.clone(),
                        k: cfg.outlier_k,
                        theta: c as f64 / n as f64,
                    });
                }
            }
            ColumnData::Categorical(v) => {
                let values: BTreeSet<String> = v.iter().flatten().cloned().collect();
                if !values.is_empty() {
                    out.push(Profile::DomainCategorical {
                        attribute: name.clone(),
                        values,
                    });
                }
            }
            ColumnData::Text(v) => {
                if let Some(p) = text_profile(&name, v) {
                    out.push(p);
                }
            }
        }
        out.push(Profile::Missing {
            attribute: name,
            theta: col.data.missing_count() as f64 / n as f64,
        });
    }

    let mut cats: Vec<&str> = Vec::new();
    let mut nums: Vec<&str> = Vec::new();
    for col in d.columns() {
        match col.column_type() {
            ColumnType::Categorical => cats.push(&col.name),
            ColumnType::Numerical => nums.push(&col.name),
            ColumnType::Text => {}
        }
    }
    cats.sort_unstable();
    nums.sort_unstable();
    for (i, a) in cats.iter().enumerate() {
        for b in &cats[i + 1..] {
            if let Ok(chi2) = stats::chi_square_statistic(d, a, b) {
                out.push(Profile::IndepChi2 {
                    attribute_j: a.to_string(),
                    attribute_k: b.to_string(),
                    alpha: chi2,
                });
            }
        }
    }
    for (i, a) in nums.iter().enumerate() {
        for b in &nums[i + 1..] {
            if let Ok(r) = stats::pearson_correlation(d, a, b) {
                out.push(Profile::IndepPcc {
                    attribute_j: a.to_string(),
                    attribute_k: b.to_string(),
                    alpha: r,
                });
            }
        }
    }
    for predicate in &cfg.selectivity_predicates {
        if let Ok(theta) = predicate.fraction(d) {
            out.push(Profile::Selectivity {
                predicate: predicate.clone(),
                theta,
            });
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelectivityConfig {
    pub min_support: f64,
    pub sel_gap: f64,
}

impl Default for SelectivityConfig {
    fn default() -> Self {
        SelectivityConfig {
            min_support: 0.05,
            sel_gap: 0.1,
        }
    }
}

fn value_fractions(d: &Dataset, attribute: &str) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    if let Ok(col) = d.strings(attribute) {
        for v in col.iter().flatten() {
            *counts.entry(v.clone()).or_default() += 1;
        }
    }
    let n = d.row_count().max(1) as f64;
    counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect()
}

/// Equality conjunctions (one or two terms) over shared categorical attributes
/// whose satisfying fraction differs between the datasets by at least `sel_gap`.
pub fn enumerate_selectivity_predicates(d_pass: &Dataset, d_fail: &Dataset, cfg: &SelectivityConfig) -> Vec<Predicate> {
    if d_pass.row_count() == 0 || d_fail.row_count() == 0 {
        return Vec::new();
    }
    let mut attrs: Vec<&str> = d_pass
        .columns()
        .iter()
        .filter(|c| c.column_type() == ColumnType::Categorical)
        .filter(|c| d_fail.column_type(&c.name).ok() == Some(ColumnType::Categorical))
        .map(|c| c.name.as_str())
        .collect();
    attrs.sort_unstable();

    // values frequent enough in at least one of the two datasets
    let frequent: Vec<Vec<String>> = attrs
        .iter()
        .map(|a| {
            let fp = value_fractions(d_pass, a);
            let ff = value_fractions(d_fail, a);
            let keys: BTreeSet<&String> = fp.keys().chain(ff.keys()).collect();
            keys.into_iter()
                .filter(|k| {
                    fp.get(*k).copied().unwrap_or(0.0) >= cfg.min_support
                        || ff.get(*k).copied().unwrap_or(0.0) >= cfg.min_support
                })
                .cloned()
                .collect()
        })
        .collect();

    let gap = |p: &Predicate| -> Option<(f64, f64)> {
        let a = p.fraction(d_pass).ok()?;
        let b = p.fraction(d_fail).ok()?;
        Some((a, b))
    };
    let mut out = Vec::new();
    for (i, a) in attrs.iter().enumerate() {
        for v in &frequent[i] {
            let p = Predicate {
                terms: vec![Term::eq(*a, v.clone())],
            };
            if let Some((x, y)) = gap(&p) {
                if (x - y).abs() >= cfg.sel_gap {
                    out.push(p);
                }
            }
        }
    }
    for (i, a) in attrs.iter().enumerate() {
        for (j, b) in attrs.iter().enumerate().skip(i + 1) {
            for v in &frequent[i] {
                for w in &frequent[j] {
                    let p = Predicate {
                        terms: vec![Term::eq(*a, v.clone()), Term::eq(*b, w.clone())],
                    };
                    if let Some((x, y)) = gap(&p) {
                        if x.max(y) >= cfg.min_support && (x - y).abs() >= cfg.sel_gap {
                            out.push(p);
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::fixtures::*;
    use crate::tabular::{read_csv, Column, CsvOptions};

    fn find<'a>(ps: &'a [Profile], kind: ProfileKind, attr: &str) -> &'a Profile {
        ps.iter()
            .find(|p| p.kind() == kind && p.attributes().iter().any(|a| a == attr))
            .unwrap_or_else(|| panic!("no {kind} on {attr}"))
    }

    #[test]
    fn people_fail_discovery() {
        let d = people_fail();
        let ps = discover_profiles(&d, &DiscoveryConfig::default());
        let gender = find(&ps, ProfileKind::DomainCategorical, "gender");
        assert_eq!(
            gender,
            &Profile::DomainCategorical {
                attribute: "gender".into(),
                values: ["F", "M"].iter().map(|s| s.to_string()).collect()
            }
        );
        match find(&ps, ProfileKind::Outlier, "age") {
            Profile::Outlier { theta, k, .. } => {
                assert_eq!(*k, 1.5);
                assert!((theta - 0.1).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
        assert_eq!(outlier_rows(d.numbers("age").unwrap(), 1.5), vec![2]);
        for p in &ps {
            assert_eq!(violation(&d, p).unwrap(), 0.0, "{p}");
        }
    }

    #[test]
    fn people_pass_missing_zip() {
        let d = people_pass();
        let ps = discover_profiles(&d, &DiscoveryConfig::default());
        match find(&ps, ProfileKind::Missing, "zip_code") {
            Profile::Missing { theta, .. } => assert!((theta - 0.11).abs() < 0.005),
            _ => unreachable!(),
        }
    }

    #[test]
    fn missing_violation_hand_value() {
        let p = Profile::Missing {
            attribute: "zip_code".into(),
            theta: 0.11,
        };
        let v = violation(&people_fail(), &p).unwrap();
        let expected = (2.0 - 0.11 * 10.0) / (10.0 * 0.89);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.1011).abs() < 1e-4);
    }

    #[test]
    fn thresholded_conventions() {
        assert_eq!(thresholded_violation(10, 10, 1.0), 0.0);
        assert_eq!(thresholded_violation(10, 10, 0.0), 1.0);
        assert_eq!(thresholded_violation(1, 10, 0.5), 0.0);
        assert_eq!(indep_pcc_violation(1.0, 0.0), 1.0);
        assert_eq!(indep_pcc_violation(0.3, 1.0), 0.0);
        assert_eq!(indep_pcc_violation(0.3, -0.5), 0.0);
        assert_eq!(indep_chi2_violation(2.0, 3.0), 0.0);
    }

    #[test]
    fn identical_columns_fully_violate_zero_pcc() {
        let xs: Vec<Option<f64>> = (0..10).map(|i| Some(i as f64)).collect();
        let d = Dataset::new(vec![Column::numerical("a", xs.clone()), Column::numerical("b", xs)]).unwrap();
        let p = Profile::IndepPcc {
            attribute_j: "a".into(),
            attribute_k: "b".into(),
            alpha: 0.0,
        };
        assert_eq!(violation(&d, &p).unwrap(), 1.0);
    }

    #[test]
    fn domain_ignores_missing() {
        let d = Dataset::new(vec![Column::categorical(
            "c",
            vec![Some("a"), None, Some("z"), Some("a")],
        )])
        .unwrap();
        let p = Profile::DomainCategorical {
            attribute: "c".into(),
            values: ["a".to_string()].into_iter().collect(),
        };
        assert!((violation(&d, &p).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn violation_errors() {
        let d = people_fail();
        let p = Profile::DomainNumerical {
            attribute: "gender".into(),
            lb: 0.0,
            ub: 1.0,
        };
        assert!(matches!(violation(&d, &p), Err(Error::Type(_))));
        let empty = read_csv("gender\n".as_bytes(), &CsvOptions::default()).unwrap();
        let q = Profile::Missing {
            attribute: "gender".into(),
            theta: 0.0,
        };
        assert!(matches!(violation(&empty, &q), Err(Error::Degenerate(_))));
    }

    #[test]
    fn text_tokens_and_profile() {
        assert_eq!(
            tokenize("ab-12x"),
            vec![Token::Letters, Token::Symbol('-'), Token::Digits, Token::Letters]
        );
        let col: Vec<Option<String>> = ["AB-12", "CD-345", "X-1"].iter().map(|s| Some(s.to_string())).collect();
        match text_profile("t", &col).unwrap() {
            Profile::DomainText {
                pattern,
                min_len,
                max_len,
                ..
            } => {
                assert_eq!(pattern, Some(vec![Token::Letters, Token::Symbol('-'), Token::Digits]));
                assert_eq!((min_len, max_len), (3, 6));
            }
            _ => unreachable!(),
        }
        assert!(text_violates(
            "12-AB",
            &Some(vec![Token::Letters, Token::Symbol('-'), Token::Digits]),
            3,
            6
        ));
    }

    #[test]
    fn profile_json_is_tagged_and_sorted() {
        let p = Profile::Missing {
            attribute: "zip_code".into(),
            theta: 0.2,
        };
        assert_eq!(
            p.canonical_json(),
            r#"{"kind":"Missing","params":{"attribute":"zip_code","theta":0.2}}"#
        );
        let back: Profile = serde_json::from_str(&p.canonical_json()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn selectivity_enumeration_people() {
        let preds = enumerate_selectivity_predicates(&people_pass(), &people_fail(), &SelectivityConfig::default());
        let target = Predicate {
            terms: vec![Term::eq("gender", "F"), Term::eq("high_expenditure", "yes")],
        };
        assert!(preds.contains(&target));
        let same = enumerate_selectivity_predicates(&people_fail(), &people_fail(), &SelectivityConfig::default());
        assert!(same.is_empty());
    }

    #[test]
    fn selectivity_enumeration_disjoint_values() {
        let a = Dataset::new(vec![Column::categorical(
            "x",
            vec![Some("a"), Some("b"), Some("a"), Some("b")],
        )])
        .unwrap();
        let b = Dataset::new(vec![Column::categorical(
            "x",
            vec![Some("c"), Some("d"), Some("c"), Some("d")],
        )])
        .unwrap();
        let preds = enumerate_selectivity_predicates(&a, &b, &SelectivityConfig::default());
        let values: Vec<String> = preds
            .iter()
            .map(|p| match &p.terms[0].value {
                crate::tabular::Constant::Text(s) => s.clone(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(values, vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn people_discriminating_chi2() {
        let pass = people_pass();
        let fail = people_fail();
        let ps = discover_profiles(&pass, &DiscoveryConfig::default());
        let indep = ps
            .iter()
            .find(|p| {
                matches!(p, Profile::IndepChi2 { attribute_j, attribute_k, .. }
                    if attribute_j == "high_expenditure" && attribute_k == "race")
            })
            .unwrap();
        assert!(violation(&fail, indep).unwrap() > 0.99);
    }
}
