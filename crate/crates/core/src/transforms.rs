//! Profile-altering transformations bound to profiles as PVT triplets.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::profiles::{
    self, char_len, offending_rows, outlier_rows, thresholded_violation, tokenize, violation, Profile, ProfileKind,
    Token,
};
use crate::stats;
use crate::tabular::{mean_and_stddev, ColumnData, Dataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    CategoricalRemap,
    LinearRescale,
    Winsorize,
    TextFit,
    OutlierToMean,
    ImputeMissing,
    Subsample,
    ShuffleDependence,
    AddNoise,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::CategoricalRemap => "remap",
            TransformKind::LinearRescale => "linear",
            TransformKind::Winsorize => "winsorize",
            TransformKind::TextFit => "fit",
            TransformKind::OutlierToMean => "to_mean",
            TransformKind::ImputeMissing => "impute",
            TransformKind::Subsample => "subsample",
            TransformKind::ShuffleDependence => "shuffle",
            TransformKind::AddNoise => "noise",
        }
    }

    /// The single profile kind this transformation serves.
    pub fn profile_kind(self) -> ProfileKind {
        match self {
            TransformKind::CategoricalRemap => ProfileKind::DomainCategorical,
            TransformKind::LinearRescale | TransformKind::Winsorize => ProfileKind::DomainNumerical,
            TransformKind::TextFit => ProfileKind::DomainText,
            TransformKind::OutlierToMean => ProfileKind::Outlier,
            TransformKind::ImputeMissing => ProfileKind::Missing,
            TransformKind::Subsample => ProfileKind::Selectivity,
            TransformKind::ShuffleDependence => ProfileKind::IndepChi2,
            TransformKind::AddNoise => ProfileKind::IndepPcc,
        }
    }

    /// Registered variants for a profile kind, in preference order.
    pub fn variants(kind: ProfileKind) -> &'static [TransformKind] {
        match kind {
            ProfileKind::DomainCategorical => &[TransformKind::CategoricalRemap],
            ProfileKind::DomainNumerical => &[TransformKind::LinearRescale, TransformKind::Winsorize],
            ProfileKind::DomainText => &[TransformKind::TextFit],
            ProfileKind::Outlier => &[TransformKind::OutlierToMean],
            ProfileKind::Missing => &[TransformKind::ImputeMissing],
            ProfileKind::Selectivity => &[TransformKind::Subsample],
            ProfileKind::IndepChi2 => &[TransformKind::ShuffleDependence],
            ProfileKind::IndepPcc => &[TransformKind::AddNoise],
        }
    }

    pub fn is_seeded(self) -> bool {
        matches!(
            self,
            TransformKind::Subsample | TransformKind::ShuffleDependence | TransformKind::AddNoise
        )
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A profile bound to one transformation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvtTriplet {
    pub id: String,
    pub profile: Profile,
    pub transform: TransformKind,
    /// Attribute altered by dependence-breaking transforms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// User-supplied value mapping that overrides rank alignment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<BTreeMap<String, String>>,
}

impl PvtTriplet {
    pub fn new(profile: Profile, transform: TransformKind) -> Result<Self> {
        if transform.profile_kind() != profile.kind() {
            return Err(Error::Validation(format!(
                "transform `{transform}` cannot serve a {} profile",
                profile.kind()
            )));
        }
        profile.validate()?;
        let target = match &profile {
            Profile::IndepChi2 { attribute_k, .. } | Profile::IndepPcc { attribute_k, .. } => Some(attribute_k.clone()),
            _ => None,
        };
        let mut x = PvtTriplet {
            id: String::new(),
            profile,
            transform,
            target,
            mapping: None,
        };
        x.id = x.compute_id();
        Ok(x)
    }

    /// All registered triplets for a profile.
    pub fn for_profile(profile: &Profile) -> Vec<PvtTriplet> {
        TransformKind::variants(profile.kind())
            .iter()
            .filter_map(|&t| PvtTriplet::new(profile.clone(), t).ok())
            .collect()
    }

    /// Choose which attribute of a pairwise profile is altered.
    pub fn with_target(mut self, target: &str) -> Result<Self> {
        if !self.profile.kind().is_indep() || !self.profile.attributes().iter().any(|a| a == target) {
            return Err(Error::Validation(format!(
                "`{target}` is not a target of {}",
                self.profile
            )));
        }
        self.target = Some(target.to_string());
        self.id = self.compute_id();
        Ok(self)
    }

    pub fn with_mapping(mut self, mapping: BTreeMap<String, String>) -> Self {
        self.mapping = Some(mapping);
        self.id = self.compute_id();
        self
    }

    fn compute_id(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.profile.canonical_json().as_bytes());
        h.update([0]);
        h.update(self.transform.name().as_bytes());
        if let Some(t) = &self.target {
            h.update([1]);
            h.update(t.as_bytes());
        }
        if let Some(m) = &self.mapping {
            h.update([2]);
            h.update(serde_json::to_string(m).unwrap_or_default().as_bytes());
        }
        let digest = hex::encode(h.finalize());
        format!(
            "{}:{}:{}:{}",
            self.profile.kind(),
            self.profile.attributes().join("+"),
            self.transform,
            &digest[..8]
        )
    }

    pub fn attributes(&self) -> Vec<String> {
        self.profile.attributes()
    }

    /// Sort key for deterministic tie-breaking.
    pub fn order_key(&self) -> (String, &'static str, &str) {
        (self.profile.primary_attribute(), self.profile.kind().name(), &self.id)
    }
}

impl fmt::Display for PvtTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} via {}", self.profile, self.transform)?;
        if let Some(t) = &self.target {
            write!(f, " on {t}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransformConfig {
    /// Cap on noise-variance or shuffle-size doublings.
    pub max_iterations: usize,
    /// Initial noise half-width as a multiple of the column stddev.
    pub noise_scale: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            max_iterations: 40,
            noise_scale: 0.1,
        }
    }
}

/// Per-triplet seed derived from a run seed.
pub fn derive_seed(seed: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn failure(x: &PvtTriplet, best_violation: f64) -> Error {
    Error::TransformFailure {
        triplet: x.id.clone(),
        best_violation,
    }
}

pub fn transform(d: &Dataset, x: &PvtTriplet, seed: u64) -> Result<Dataset> {
    transform_with(d, x, seed, &TransformConfig::default())
}

/// Apply `x` to `d`. The result has zero violation of `x.profile` or an error is returned.
pub fn transform_with(d: &Dataset, x: &PvtTriplet, seed: u64, cfg: &TransformConfig) -> Result<Dataset> {
    if x.transform.profile_kind() != x.profile.kind() {
        return Err(Error::Validation(format!("triplet {} is malformed", x.id)));
    }
    if violation(d, &x.profile)? == 0.0 {
        return Ok(d.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &x.id));
    let out = match (&x.profile, x.transform) {
        (Profile::DomainCategorical { attribute, values }, TransformKind::CategoricalRemap) => {
            remap_categorical(d, attribute, values, x.mapping.as_ref())?
        }
        (Profile::DomainNumerical { attribute, lb, ub }, TransformKind::LinearRescale) => {
            linear_rescale(d, attribute, *lb, *ub)?
        }
        (Profile::DomainNumerical { attribute, lb, ub }, TransformKind::Winsorize) => {
            let v = d.numbers(attribute)?;
            let clipped = v.iter().map(|c| c.map(|v| v.clamp(*lb, *ub))).collect();
            d.with_column(attribute, ColumnData::Numerical(clipped))?
        }
        (
            Profile::DomainText {
                attribute,
                pattern,
                min_len,
                max_len,
            },
            TransformKind::TextFit,
        ) => fit_text(d, x, attribute, pattern, *min_len, *max_len)?,
        (Profile::Outlier { attribute, k, theta }, TransformKind::OutlierToMean) => {
            outliers_to_mean(d, x, attribute, *k, *theta, cfg)?
        }
        (Profile::Missing { attribute, .. }, TransformKind::ImputeMissing) => impute(d, attribute)?,
        (Profile::Selectivity { theta, .. }, TransformKind::Subsample) => subsample(d, x, *theta, &mut rng)?,
        (Profile::IndepChi2 { .. }, TransformKind::ShuffleDependence) => shuffle_dependence(d, x, cfg, &mut rng)?,
        (Profile::IndepPcc { .. }, TransformKind::AddNoise) => add_noise(d, x, cfg, &mut rng)?,
        _ => unreachable!("kind checked above"),
    };
    let v = violation(&out, &x.profile)?;
    if v > 1e-9 {
        return Err(failure(x, v));
    }
    Ok(out)
}

fn frequency_order(values: impl Iterator<Item = String>, counts: &HashMap<String, usize>) -> Vec<String> {
    let mut vs: Vec<String> = values.collect();
    vs.sort_by(|a, b| {
        let ca = counts.get(a).copied().unwrap_or(0);
        let cb = counts.get(b).copied().unwrap_or(0);
        cb.cmp(&ca).then_with(|| a.cmp(b))
    });
    vs.dedup();
    vs
}

fn remap_categorical(
    d: &Dataset,
    attribute: &str,
    legal: &std::collections::BTreeSet<String>,
    user: Option<&BTreeMap<String, String>>,
) -> Result<Dataset> {
    let col = d.strings(attribute)?;
    let mut counts: HashMap<String, usize> = HashMap::new();
    for v in col.iter().flatten() {
        *counts.entry(v.clone()).or_default() += 1;
    }
    let illegal = frequency_order(counts.keys().filter(|v| !legal.contains(*v)).cloned(), &counts);
    let targets = frequency_order(legal.iter().cloned(), &counts);
    let mut map: HashMap<&str, &str> = HashMap::new();
    for (i, v) in illegal.iter().enumerate() {
        let auto = targets[i % targets.len()].as_str();
        let chosen = user
            .and_then(|m| m.get(v))
            .filter(|t| legal.contains(*t))
            .map_or(auto, String::as_str);
        map.insert(v.as_str(), chosen);
    }
    let new: Vec<Option<String>> = col
        .iter()
        .map(|c| {
            c.as_ref()
                .map(|v| map.get(v.as_str()).map_or_else(|| v.clone(), |t| t.to_string()))
        })
        .collect();
    let data = match d.column(attribute)?.data {
        ColumnData::Categorical(_) => ColumnData::Categorical(new),
        _ => ColumnData::Text(new),
    };
    d.with_column(attribute, data)
}

fn linear_rescale(d: &Dataset, attribute: &str, lb: f64, ub: f64) -> Result<Dataset> {
    let v = d.numbers(attribute)?;
    let present: Vec<f64> = v.iter().flatten().copied().collect();
    let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mapped = v
        .iter()
        .map(|c| {
            c.map(|x| {
                if hi > lo {
                    (lb + (x - lo) * (ub - lb) / (hi - lo)).clamp(lb, ub)
                } else {
                    lb + (ub - lb) / 2.0
                }
            })
        })
        .collect();
    d.with_column(attribute, ColumnData::Numerical(mapped))
}

fn pad_char(t: &Token) -> Option<char> {
    match t {
        Token::Digits => Some('0'),
        Token::Letters => Some('a'),
        Token::Symbol(_) => None,
    }
}

/// Split a value into runs aligned with its token sequence.
fn runs(value: &str) -> Vec<(Token, String)> {
    let tokens = tokenize(value);
    let mut out: Vec<(Token, String)> = tokens.into_iter().map(|t| (t, String::new())).collect();
    let mut i = 0;
    let mut prev: Option<Token> = None;
    for c in value.chars() {
        let cls = if c.is_ascii_digit() {
            Token::Digits
        } else if c.is_alphabetic() {
            Token::Letters
        } else {
            Token::Symbol(c)
        };
        let same_run = matches!(
            (&prev, &cls),
            (Some(Token::Digits), Token::Digits) | (Some(Token::Letters), Token::Letters)
        );
        if prev.is_some() && !same_run {
            i += 1;
        }
        out[i].1.push(c);
        prev = Some(cls);
    }
    out
}

/// Resize a value to fit the length bounds while keeping its shape.
pub fn fit_value(value: &str, pattern: &Option<Vec<Token>>, min_len: usize, max_len: usize) -> Option<String> {
    let Some(pattern) = pattern else {
        let mut s: String = value.chars().take(max_len).collect();
        while char_len(&s) < min_len {
            s.push('0');
        }
        return Some(s);
    };
    let mut parts: Vec<(Token, String)> = if &tokenize(value) == pattern {
        runs(value)
    } else {
        pattern
            .iter()
            .map(|t| {
                let s = match t {
                    Token::Symbol(c) => c.to_string(),
                    other => pad_char(other).expect("run token").to_string(),
                };
                (t.clone(), s)
            })
            .collect()
    };
    let mut len: usize = parts.iter().map(|p| char_len(&p.1)).sum();
    while len < min_len {
        let (t, s) = parts.iter_mut().rev().find(|p| pad_char(&p.0).is_some())?;
        s.push(pad_char(t).expect("run token"));
        len += 1;
    }
    while len > max_len {
        let (_, s) = parts
            .iter_mut()
            .rev()
            .find(|p| pad_char(&p.0).is_some() && char_len(&p.1) > 1)?;
        s.pop();
        len -= 1;
    }
    Some(parts.into_iter().map(|p| p.1).collect())
}

fn fit_text(
    d: &Dataset,
    x: &PvtTriplet,
    attribute: &str,
    pattern: &Option<Vec<Token>>,
    min_len: usize,
    max_len: usize,
) -> Result<Dataset> {
    let col = d.strings(attribute)?;
    let mut new = Vec::with_capacity(col.len());
    for cell in col {
        new.push(match cell {
            Some(v) if profiles::text_violates(v, pattern, min_len, max_len) => {
                Some(fit_value(v, pattern, min_len, max_len).ok_or_else(|| failure(x, 1.0))?)
            }
            other => other.clone(),
        });
    }
    let data = match d.column(attribute)?.data {
        ColumnData::Text(_) => ColumnData::Text(new),
        _ => ColumnData::Categorical(new),
    };
    d.with_column(attribute, data)
}

fn outliers_to_mean(
    d: &Dataset,
    x: &PvtTriplet,
    attribute: &str,
    k: f64,
    theta: f64,
    cfg: &TransformConfig,
) -> Result<Dataset> {
    let n = d.row_count();
    let mut v: Vec<Option<f64>> = d.numbers(attribute)?.to_vec();
    for _ in 0..cfg.max_iterations {
        let rows = outlier_rows(&v, k);
        if thresholded_violation(rows.len(), n, theta) == 0.0 {
            return d.with_column(attribute, ColumnData::Numerical(v));
        }
        let (mean, _) = mean_and_stddev(&v).expect("outliers imply present values");
        for r in rows {
            v[r] = Some(mean);
        }
    }
    let best = thresholded_violation(outlier_rows(&v, k).len(), n, theta);
    if best == 0.0 {
        return d.with_column(attribute, ColumnData::Numerical(v));
    }
    Err(failure(x, best))
}

fn mode(values: &[Option<String>]) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values.iter().flatten() {
        *counts.entry(v).or_default() += 1;
    }
    // BTreeMap iterates lexicographically, so the first maximum wins ties
    let mut best: Option<(&str, usize)> = None;
    for (v, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v.to_string())
}

fn impute(d: &Dataset, attribute: &str) -> Result<Dataset> {
    let data = match &d.column(attribute)?.data {
        ColumnData::Numerical(v) => {
            let fill = mean_and_stddev(v).map_or(0.0, |(m, _)| m);
            ColumnData::Numerical(v.iter().map(|c| Some(c.unwrap_or(fill))).collect())
        }
        ColumnData::Categorical(v) => {
            let fill = mode(v).unwrap_or_default();
            ColumnData::Categorical(
                v.iter()
                    .map(|c| Some(c.clone().unwrap_or_else(|| fill.clone())))
                    .collect(),
            )
        }
        ColumnData::Text(v) => {
            let fill = mode(v).unwrap_or_default();
            ColumnData::Text(
                v.iter()
                    .map(|c| Some(c.clone().unwrap_or_else(|| fill.clone())))
                    .collect(),
            )
        }
    };
    d.with_column(attribute, data)
}

fn subsample(d: &Dataset, x: &PvtTriplet, theta: f64, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let hits = offending_rows(d, &x.profile)?;
    let rest = d.row_count() - hits.len();
    // largest k with k / (k + rest) ≤ θ
    let mut k = ((theta * rest as f64) / (1.0 - theta)).floor().min(hits.len() as f64) as usize;
    while k > 0 && thresholded_violation(k, k + rest, theta) > 0.0 {
        k -= 1;
    }
    if k + rest == 0 {
        return Err(failure(x, 1.0));
    }
    let mut keep = vec![true; d.row_count()];
    for &r in &hits {
        keep[r] = false;
    }
    for i in sample(rng, hits.len(), k).into_iter() {
        keep[hits[i]] = true;
    }
    let rows: Vec<usize> = (0..d.row_count()).filter(|&r| keep[r]).collect();
    Ok(d.take_rows(&rows))
}

fn pair_of(x: &PvtTriplet) -> (String, String, String) {
    match &x.profile {
        Profile::IndepChi2 {
            attribute_j,
            attribute_k,
            ..
        }
        | Profile::IndepPcc {
            attribute_j,
            attribute_k,
            ..
        } => {
            let target = x.target.clone().unwrap_or_else(|| attribute_k.clone());
            let other = if &target == attribute_j {
                attribute_k.clone()
            } else {
                attribute_j.clone()
            };
            (attribute_j.clone(), attribute_k.clone(), other)
        }
        _ => unreachable!("pairwise profiles only"),
    }
}

fn shuffle_dependence(d: &Dataset, x: &PvtTriplet, cfg: &TransformConfig, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let (aj, ak, other) = pair_of(x);
    let target = x.target.clone().unwrap_or_else(|| ak.clone());
    let alpha = match x.profile {
        Profile::IndepChi2 { alpha, .. } => alpha,
        _ => unreachable!(),
    };
    let base = d.strings(&target)?.to_vec();
    let other_col = d.strings(&other)?;
    // missing target cells move with the shuffle, which frees the margins
    let rows: Vec<usize> = (0..d.row_count()).filter(|&r| other_col[r].is_some()).collect();
    let rebuild = |vals: Vec<Option<String>>| -> Result<Dataset> {
        let data = match d.column(&target)?.data {
            ColumnData::Categorical(_) => ColumnData::Categorical(vals),
            _ => ColumnData::Text(vals),
        };
        d.with_column(&target, data)
    };
    let chi2_of = |ds: &Dataset| stats::chi_square_statistic(ds, &aj, &ak);

    let mut best: Option<(f64, Vec<Option<String>>)> = None;
    let mut m = 2usize.min(rows.len());
    let mut full_tries = 0;
    for _ in 0..cfg.max_iterations {
        if rows.len() < 2 {
            break;
        }
        let chosen: Vec<usize> = sample(rng, rows.len(), m).into_iter().map(|i| rows[i]).collect();
        let mut vals: Vec<Option<String>> = chosen.iter().map(|&r| base[r].clone()).collect();
        vals.shuffle(rng);
        let mut col = base.clone();
        for (&r, v) in chosen.iter().zip(vals) {
            col[r] = v;
        }
        let candidate = rebuild(col.clone())?;
        let chi2 = chi2_of(&candidate)?;
        if chi2 <= alpha {
            return Ok(candidate);
        }
        if best.as_ref().is_none_or(|(b, _)| chi2 < *b) {
            best = Some((chi2, col));
        }
        if m == rows.len() {
            full_tries += 1;
            if full_tries >= 4 {
                break;
            }
        }
        m = (m * 2).min(rows.len());
    }

    // swap descent on the contingency table, preserving both margins
    let mut col = best.map_or(base.clone(), |(_, c)| c);
    loop {
        let current = rebuild(col.clone())?;
        let chi2 = chi2_of(&current)?;
        if chi2 <= alpha {
            return Ok(current);
        }
        match best_swap(&col, other_col, &rows, chi2, aj == target)? {
            Some((a, b)) => col.swap(a, b),
            None => return Err(failure(x, profiles::indep_chi2_violation(chi2, alpha))),
        }
    }
}

/// Most χ²-reducing exchange of target values between two rows, if any.
fn best_swap(
    target: &[Option<String>],
    other: &[Option<String>],
    rows: &[usize],
    current: f64,
    target_is_row_axis: bool,
) -> Result<Option<(usize, usize)>> {
    // None sorts first and stands for a missing target cell
    let mut t_labels: Vec<Option<&str>> = rows.iter().map(|&r| target[r].as_deref()).collect();
    t_labels.sort_unstable();
    t_labels.dedup();
    let mut o_labels: Vec<&str> = rows.iter().filter_map(|&r| other[r].as_deref()).collect();
    o_labels.sort_unstable();
    o_labels.dedup();
    let ti = |s: Option<&str>| t_labels.binary_search(&s).expect("label present");
    let oi = |s: &str| o_labels.binary_search(&s).expect("label present");
    let mut table = vec![vec![0u64; t_labels.len()]; o_labels.len()];
    let mut witness: HashMap<(usize, usize), usize> = HashMap::new();
    for &r in rows {
        let (o, t) = (oi(other[r].as_deref().expect("complete")), ti(target[r].as_deref()));
        table[o][t] += 1;
        witness.entry((o, t)).or_insert(r);
    }
    let present: Vec<usize> = (0..t_labels.len()).filter(|&t| t_labels[t].is_some()).collect();
    let orient = |tab: &Vec<Vec<u64>>| -> Vec<Vec<u64>> {
        if target_is_row_axis {
            present
                .iter()
                .map(|&t| (0..o_labels.len()).map(|o| tab[o][t]).collect())
                .collect()
        } else {
            tab.iter()
                .map(|row| present.iter().map(|&t| row[t]).collect())
                .collect()
        }
    };
    let mut best: Option<(f64, (usize, usize))> = None;
    for o1 in 0..o_labels.len() {
        for o2 in (o1 + 1)..o_labels.len() {
            for t1 in 0..t_labels.len() {
                for t2 in 0..t_labels.len() {
                    if t1 == t2 || table[o1][t1] == 0 || table[o2][t2] == 0 {
                        continue;
                    }
                    let mut tab = table.clone();
                    tab[o1][t1] -= 1;
                    tab[o2][t2] -= 1;
                    tab[o1][t2] += 1;
                    tab[o2][t1] += 1;
                    let chi2 = stats::chi_square_from_table(&orient(&tab));
                    if chi2 < current - 1e-12 && best.is_none_or(|(b, _)| chi2 < b) {
                        best = Some((chi2, (witness[&(o1, t1)], witness[&(o2, t2)])));
                    }
                }
            }
        }
    }
    Ok(best.map(|(_, pair)| pair))
}

fn add_noise(d: &Dataset, x: &PvtTriplet, cfg: &TransformConfig, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let (aj, ak, other) = pair_of(x);
    let target = x.target.clone().unwrap_or_else(|| ak.clone());
    let alpha = match x.profile {
        Profile::IndepPcc { alpha, .. } => alpha,
        _ => unreachable!(),
    };
    let y = d.numbers(&target)?.to_vec();
    let xo = d.numbers(&other)?;
    let rows: Vec<usize> = (0..d.row_count())
        .filter(|&r| y[r].is_some() && xo[r].is_some())
        .collect();
    let n = rows.len();
    let xs: Vec<f64> = rows.iter().map(|&r| xo[r].expect("complete")).collect();
    let ys: Vec<f64> = rows.iter().map(|&r| y[r].expect("complete")).collect();
    let sd = mean_and_stddev(&y).map_or(0.0, |(_, s)| s);

    let center = |v: &[f64]| -> Vec<f64> {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|a| a - m).collect()
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in [center(&xs), center(&ys)] {
        let mut u = v;
        for b in &basis {
            let c = dot(&u, b);
            u.iter_mut().zip(b).for_each(|(p, q)| *p -= c * q);
        }
        let norm = dot(&u, &u).sqrt();
        if norm > 1e-12 {
            basis.push(u.into_iter().map(|p| p / norm).collect());
        }
    }

    let build = |noise: &[f64]| -> Result<Dataset> {
        let mut col = y.clone();
        for (i, &r) in rows.iter().enumerate() {
            col[r] = Some(ys[i] + noise[i]);
        }
        d.with_column(&target, ColumnData::Numerical(col))
    };
    let pcc_violation = |ds: &Dataset| -> Result<f64> {
        let r = stats::pearson_correlation(ds, &aj, &ak).unwrap_or(0.0);
        Ok(profiles::indep_pcc_violation(r, alpha))
    };

    let mut s = cfg.noise_scale * if sd > 0.0 { sd } else { 1.0 };
    let mut best = 1.0;
    for _ in 0..cfg.max_iterations {
        let mut e: Vec<f64> = (0..n).map(|_| rng.gen_range(-s..=s)).collect();
        e = center(&e);
        for b in &basis {
            let c = dot(&e, b);
            e.iter_mut().zip(b).for_each(|(p, q)| *p -= c * q);
        }
        let candidate = build(&e)?;
        let v = pcc_violation(&candidate)?;
        if v == 0.0 {
            return Ok(candidate);
        }
        best = f64::min(best, v);
        s *= std::f64::consts::SQRT_2;
    }

    // residualize the target on the other attribute when noise cannot get there
    let xc = center(&xs);
    let yc = center(&ys);
    let sxx = dot(&xc, &xc);
    if sxx > 0.0 {
        let beta = dot(&xc, &yc) / sxx;
        let e: Vec<f64> = xc.iter().map(|v| -beta * v).collect();
        let candidate = build(&e)?;
        let v = pcc_violation(&candidate)?;
        if v <= 1e-9 {
            return Ok(candidate);
        }
        best = f64::min(best, v);
    }
    Err(failure(x, best))
}

/// Fraction of rows changed (or removed) by the transformation.
pub fn coverage(d: &Dataset, x: &PvtTriplet, seed: u64) -> Result<f64> {
    coverage_with(d, x, seed, &TransformConfig::default())
}

pub fn coverage_with(d: &Dataset, x: &PvtTriplet, seed: u64, cfg: &TransformConfig) -> Result<f64> {
    let n = d.row_count();
    if n == 0 {
        return Err(Error::Degenerate("coverage over an empty dataset".into()));
    }
    if violation(d, &x.profile)? == 0.0 {
        return Ok(0.0);
    }
    let out = transform_with(d, x, seed, cfg)?;
    let changed = if out.row_count() != n {
        n - out.row_count()
    } else {
        d.changed_rows(&out)?
    };
    Ok(changed as f64 / n as f64)
}

/// Result of applying several triplets in order.
#[derive(Clone, Debug)]
pub struct Composition {
    pub dataset: Dataset,
    /// Earlier profiles whose violation became positive after a later step.
    pub warnings: Vec<String>,
}

/// Apply triplets in order, each with its own derived seed.
pub fn compose(d: &Dataset, xs: &[&PvtTriplet], seed: u64, cfg: &TransformConfig) -> Result<Composition> {
    let mut cur = d.clone();
    let mut warnings = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        cur = transform_with(&cur, x, seed, cfg)?;
        for earlier in &xs[..i] {
            if cur.row_count() > 0 && violation(&cur, &earlier.profile)? > 0.0 {
                warnings.push(format!("applying {} re-violated {}", x.id, earlier.id));
            }
        }
    }
    Ok(Composition { dataset: cur, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::fixtures::*;
    use crate::tabular::{Column, Predicate, Term};

    fn numbers(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().map(|&x| Some(x)).collect()
    }

    #[test]
    fn sentiment_style_remap() {
        let target: Vec<Option<&str>> = ["0", "4", "0", "4", "0", "4"].iter().map(|s| Some(*s)).collect();
        let d = Dataset::new(vec![Column::categorical("target", target)]).unwrap();
        let p = Profile::DomainCategorical {
            attribute: "target".into(),
            values: ["-1", "1"].iter().map(|s| s.to_string()).collect(),
        };
        let x = PvtTriplet::new(p.clone(), TransformKind::CategoricalRemap).unwrap();
        let out = transform(&d, &x, 0).unwrap();
        let col = out.strings("target").unwrap();
        assert_eq!(col[0].as_deref(), Some("-1"));
        assert_eq!(col[1].as_deref(), Some("1"));
        assert_eq!(violation(&out, &p).unwrap(), 0.0);
    }

    #[test]
    fn user_mapping_overrides() {
        let d = Dataset::new(vec![Column::categorical("t", vec![Some("0"), Some("4")])]).unwrap();
        let p = Profile::DomainCategorical {
            attribute: "t".into(),
            values: ["-1", "1"].iter().map(|s| s.to_string()).collect(),
        };
        let map: BTreeMap<String, String> = [("0".to_string(), "1".to_string())].into_iter().collect();
        let x = PvtTriplet::new(p, TransformKind::CategoricalRemap)
            .unwrap()
            .with_mapping(map);
        let out = transform(&d, &x, 0).unwrap();
        assert_eq!(out.strings("t").unwrap()[0].as_deref(), Some("1"));
    }

    #[test]
    fn outlier_replaced_by_mean() {
        let d = Dataset::new(vec![Column::numerical("v", numbers(&[10.0, 20.0, 30.0, 100.0]))]).unwrap();
        let p = Profile::Outlier {
            attribute: "v".into(),
            k: 1.5,
            theta: 0.0,
        };
        let x = PvtTriplet::new(p, TransformKind::OutlierToMean).unwrap();
        let out = transform(&d, &x, 0).unwrap();
        assert_eq!(out.numbers("v").unwrap(), &numbers(&[10.0, 20.0, 30.0, 40.0])[..]);
    }

    #[test]
    fn satisfied_profile_is_identity() {
        let d = people_fail();
        for p in profiles::discover_profiles(&d, &Default::default()) {
            for x in PvtTriplet::for_profile(&p) {
                let out = transform(&d, &x, 7).unwrap();
                assert_eq!(out.fingerprint(), d.fingerprint());
                assert_eq!(coverage(&d, &x, 7).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn missing_coverage_people() {
        let p = Profile::Missing {
            attribute: "zip_code".into(),
            theta: 0.11,
        };
        let x = PvtTriplet::new(p.clone(), TransformKind::ImputeMissing).unwrap();
        let d = people_fail();
        assert!((coverage(&d, &x, 0).unwrap() - 0.2).abs() < 1e-12);
        let out = transform(&d, &x, 0).unwrap();
        assert_eq!(violation(&out, &p).unwrap(), 0.0);
        assert_eq!(out.strings("zip_code").unwrap()[5].as_deref(), Some("01101"));
    }

    #[test]
    fn linear_map_covers_everything() {
        let d = Dataset::new(vec![Column::numerical("v", numbers(&[2.0, 5.0, 10.0]))]).unwrap();
        let p = Profile::DomainNumerical {
            attribute: "v".into(),
            lb: 0.0,
            ub: 1.0,
        };
        let lin = PvtTriplet::new(p.clone(), TransformKind::LinearRescale).unwrap();
        assert_eq!(coverage(&d, &lin, 0).unwrap(), 1.0);
        let out = transform(&d, &lin, 0).unwrap();
        assert_eq!(out.numbers("v").unwrap(), &numbers(&[0.0, 0.375, 1.0])[..]);
        let win = PvtTriplet::new(p, TransformKind::Winsorize).unwrap();
        let out = transform(&d, &win, 0).unwrap();
        assert_eq!(out.numbers("v").unwrap(), &numbers(&[1.0, 1.0, 1.0])[..]);
        assert_ne!(lin.id, win.id);
    }

    #[test]
    fn selectivity_subsamples_to_theta() {
        let d = people_pass();
        let pred = Predicate::new(vec![Term::eq("gender", "F"), Term::eq("high_expenditure", "yes")]).unwrap();
        let p = Profile::Selectivity {
            predicate: pred.clone(),
            theta: 0.1,
        };
        let x = PvtTriplet::new(p.clone(), TransformKind::Subsample).unwrap();
        let out = transform(&d, &x, 3).unwrap();
        assert_eq!(violation(&out, &p).unwrap(), 0.0);
        // 5 other rows allow floor(0.1 * 5 / 0.9) = 0 satisfying rows
        assert_eq!(out.row_count(), 5);
        assert!((coverage(&d, &x, 3).unwrap() - 4.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn chi2_shuffle_reaches_alpha() {
        let pass = people_pass();
        let fail = people_fail();
        let alpha = stats::chi_square_statistic(&pass, "high_expenditure", "race").unwrap();
        let p = Profile::IndepChi2 {
            attribute_j: "high_expenditure".into(),
            attribute_k: "race".into(),
            alpha,
        };
        let x = PvtTriplet::new(p.clone(), TransformKind::ShuffleDependence)
            .unwrap()
            .with_target("high_expenditure")
            .unwrap();
        let out = transform(&fail, &x, 11).unwrap();
        assert_eq!(violation(&out, &p).unwrap(), 0.0);
        // the untouched attribute keeps its values
        assert_eq!(out.strings("race").unwrap(), fail.strings("race").unwrap());
        let again = transform(&fail, &x, 11).unwrap();
        assert_eq!(out.fingerprint(), again.fingerprint());
    }

    #[test]
    fn chi2_swap_descent_hits_exact_independence() {
        let a: Vec<Option<&str>> = ["x", "x", "y", "y"].iter().cycle().take(40).map(|s| Some(*s)).collect();
        let b: Vec<Option<&str>> = ["p", "p", "q", "q"].iter().cycle().take(40).map(|s| Some(*s)).collect();
        let d = Dataset::new(vec![Column::categorical("a", a), Column::categorical("b", b)]).unwrap();
        let p = Profile::IndepChi2 {
            attribute_j: "a".into(),
            attribute_k: "b".into(),
            alpha: 0.0,
        };
        let x = PvtTriplet::new(p.clone(), TransformKind::ShuffleDependence).unwrap();
        let out = transform(&d, &x, 5).unwrap();
        assert_eq!(violation(&out, &p).unwrap(), 0.0);
    }

    #[test]
    fn pcc_noise_reduces_correlation() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let d = Dataset::new(vec![
            Column::numerical("a", numbers(&xs)),
            Column::numerical("b", numbers(&ys)),
        ])
        .unwrap();
        let p = Profile::IndepPcc {
            attribute_j: "a".into(),
            attribute_k: "b".into(),
            alpha: 0.2,
        };
        let x = PvtTriplet::new(p.clone(), TransformKind::AddNoise).unwrap();
        let out = transform(&d, &x, 1).unwrap();
        assert_eq!(violation(&out, &p).unwrap(), 0.0);
        assert_eq!(out.numbers("a").unwrap(), d.numbers("a").unwrap());
    }

    #[test]
    fn text_fit_with_and_without_pattern() {
        assert_eq!(fit_value("ab", &None, 4, 6).unwrap(), "ab00");
        assert_eq!(fit_value("abcdefgh", &None, 4, 6).unwrap(), "abcdef");
        let pat = Some(vec![Token::Letters, Token::Symbol('-'), Token::Digits]);
        assert_eq!(fit_value("AB-1", &pat, 5, 6).unwrap(), "AB-10");
        assert_eq!(fit_value("AB-12345", &pat, 3, 6).unwrap(), "AB-123");
        let fitted = fit_value("?!", &pat, 3, 4).unwrap();
        assert_eq!(tokenize(&fitted), pat.clone().unwrap());
    }

    #[test]
    fn compose_disjoint_profiles() {
        let d = people_fail();
        let miss = Profile::Missing {
            attribute: "phone".into(),
            theta: 0.0,
        };
        let dom = Profile::DomainNumerical {
            attribute: "age".into(),
            lb: 22.0,
            ub: 51.0,
        };
        let a = PvtTriplet::new(miss.clone(), TransformKind::ImputeMissing).unwrap();
        let b = PvtTriplet::new(dom.clone(), TransformKind::Winsorize).unwrap();
        let c = compose(&d, &[&a, &b], 0, &TransformConfig::default()).unwrap();
        assert_eq!(violation(&c.dataset, &miss).unwrap(), 0.0);
        assert_eq!(violation(&c.dataset, &dom).unwrap(), 0.0);
        assert!(c.warnings.is_empty());
        let empty = compose(&d, &[], 0, &TransformConfig::default()).unwrap();
        assert_eq!(empty.dataset.fingerprint(), d.fingerprint());
    }

    #[test]
    fn triplet_kind_must_match() {
        let p = Profile::Missing {
            attribute: "a".into(),
            theta: 0.0,
        };
        assert!(PvtTriplet::new(p, TransformKind::Winsorize).is_err());
    }
}
