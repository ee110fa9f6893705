//! Malfunction oracles: the system under test seen as a scorer in [0, 1].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::profiles::outlier_rows;
use crate::tabular::{save_csv, Dataset, Predicate};

pub const SEED_ENV: &str = "DATAEXPOSER_SEED";
pub const PLACEHOLDER: &str = "{}";

/// Anything that maps a dataset to a malfunction score.
pub trait Scorer {
    fn score(&mut self, d: &Dataset) -> Result<f64>;

    fn describe(&self) -> String {
        "scorer".to_string()
    }
}

impl<F: FnMut(&Dataset) -> Result<f64>> Scorer for F {
    fn score(&mut self, d: &Dataset) -> Result<f64> {
        self(d)
    }
}

fn check_range(v: f64) -> Result<f64> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::OracleProtocol(format!("score {v} is outside [0, 1]")))
    }
}

/// Caching front for a scorer. Each distinct dataset is scored at most once.
pub struct Oracle {
    scorer: Box<dyn Scorer>,
    cache: HashMap<String, f64>,
    intervened: HashSet<String>,
    calls: usize,
}

impl Oracle {
    pub fn new(scorer: impl Scorer + 'static) -> Self {
        Oracle {
            scorer: Box::new(scorer),
            cache: HashMap::new(),
            intervened: HashSet::new(),
            calls: 0,
        }
    }

    pub fn describe(&self) -> String {
        self.scorer.describe()
    }

    fn lookup(&mut self, d: &Dataset) -> Result<(f64, bool)> {
        if let Some(&v) = self.cache.get(d.fingerprint()) {
            return Ok((v, false));
        }
        self.calls += 1;
        let v = check_range(self.scorer.score(d)?)?;
        self.cache.insert(d.fingerprint().to_string(), v);
        Ok((v, true))
    }

    pub fn is_cached(&self, d: &Dataset) -> bool {
        self.cache.contains_key(d.fingerprint())
    }

    /// Whether `d` has already been counted as an intervention.
    pub fn is_intervened(&self, d: &Dataset) -> bool {
        self.intervened.contains(d.fingerprint())
    }

    /// Score an intervention; novel datasets count towards the intervention total.
    pub fn evaluate(&mut self, d: &Dataset) -> Result<f64> {
        Ok(self.evaluate_tracked(d)?.0)
    }

    /// Like [`Oracle::evaluate`], also reporting whether this is a new
    /// intervention. A dataset already scored as a baseline still counts once.
    pub fn evaluate_tracked(&mut self, d: &Dataset) -> Result<(f64, bool)> {
        let (v, _) = self.lookup(d)?;
        Ok((v, self.intervened.insert(d.fingerprint().to_string())))
    }

    /// Score one of the input datasets without counting an intervention.
    pub fn evaluate_baseline(&mut self, d: &Dataset) -> Result<f64> {
        Ok(self.lookup(d)?.0)
    }

    pub fn intervention_count(&self) -> usize {
        self.intervened.len()
    }

    /// Number of times the underlying scorer ran.
    pub fn call_count(&self) -> usize {
        self.calls
    }
}

// ---------------------------------------------------------------------------
// Subprocess realization

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExternalOracleSpec {
    pub program: String,
    /// Arguments; exactly one holds the dataset path placeholder `{}`.
    pub args: Vec<String>,
    pub timeout_secs: f64,
    #[serde(default)]
    pub working_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl ExternalOracleSpec {
    /// Parse a shell-style command line. A missing placeholder is appended.
    pub fn parse(command: &str, timeout_secs: f64) -> Result<Self> {
        let mut words = shlex::split(command)
            .ok_or_else(|| Error::Validation(format!("cannot parse oracle command `{command}`")))?;
        if words.is_empty() {
            return Err(Error::Validation("empty oracle command".into()));
        }
        let program = words.remove(0);
        let holes = words.iter().filter(|w| w.contains(PLACEHOLDER)).count();
        match holes {
            0 => words.push(PLACEHOLDER.to_string()),
            1 => {}
            _ => {
                return Err(Error::Validation(
                    "oracle command holds more than one `{}` placeholder".into(),
                ))
            }
        }
        if timeout_secs.is_nan() || timeout_secs <= 0.0 {
            return Err(Error::Validation("oracle timeout must be positive".into()));
        }
        Ok(ExternalOracleSpec {
            program,
            args: words,
            timeout_secs,
            working_dir: None,
            seed: 0,
        })
    }
}

/// Runs a command on a temporary CSV and reads the score from its stdout.
pub struct ExternalOracle {
    spec: ExternalOracleSpec,
}

impl ExternalOracle {
    pub fn new(spec: ExternalOracleSpec) -> Self {
        ExternalOracle { spec }
    }
}

/// Last non-empty stdout line as a score.
pub fn parse_score(stdout: &str) -> Result<f64> {
    let line = stdout
        .lines()
        .map(str::trim)
        .rfind(|l| !l.is_empty())
        .ok_or_else(|| Error::OracleProtocol("oracle printed nothing".into()))?;
    let v: f64 = line
        .parse()
        .map_err(|_| Error::OracleProtocol(format!("`{line}` is not a decimal score")))?;
    check_range(v)
}

impl Scorer for ExternalOracle {
    fn score(&mut self, d: &Dataset) -> Result<f64> {
        let file = tempfile::Builder::new().prefix("pvtx-").suffix(".csv").tempfile()?;
        save_csv(d, file.path())?;
        let path = file.path().to_string_lossy().into_owned();
        let args: Vec<String> = self.spec.args.iter().map(|a| a.replace(PLACEHOLDER, &path)).collect();
        let mut cmd = Command::new(&self.spec.program);
        cmd.args(&args)
            .env(SEED_ENV, self.spec.seed.to_string())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(dir) = &self.spec.working_dir {
            cmd.current_dir(dir);
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| Error::OracleFailure(format!("cannot start `{}`: {e}", self.spec.program)))?;
        let mut out = child.stdout.take().expect("piped");
        let mut err = child.stderr.take().expect("piped");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = out.read_to_string(&mut s);
            s
        });
        let err_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = err.read_to_string(&mut s);
            s
        });
        let timeout = Duration::from_secs_f64(self.spec.timeout_secs);
        let status = match child.wait_timeout(timeout)? {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::OracleTimeout {
                    seconds: self.spec.timeout_secs,
                });
            }
        };
        let stdout = reader.join().unwrap_or_default();
        let stderr = err_reader.join().unwrap_or_default();
        if !status.success() {
            let tail: String = stderr.lines().last().unwrap_or("").to_string();
            return Err(Error::OracleFailure(format!("oracle exited with {status}: {tail}")));
        }
        parse_score(&stdout)
    }

    fn describe(&self) -> String {
        format!("external:{} {}", self.spec.program, self.spec.args.join(" "))
    }
}

// ---------------------------------------------------------------------------
// Built-in closed-form scorers

/// One closed-form measurement; each yields a component in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Check {
    /// Fraction of rows whose label differs from the one implied by a reference column.
    LabelAgreement {
        label: String,
        reference: String,
        expected: BTreeMap<String, String>,
    },
    /// Largest difference in positive-label rate between groups, divided by `scale`.
    ParityGap {
        target: String,
        positive: String,
        group: String,
        scale: f64,
    },
    /// Excess of the satisfying fraction over `threshold`, divided by `scale`.
    PredicateExcess {
        predicate: Predicate,
        threshold: f64,
        scale: f64,
    },
    MissingExcess {
        attribute: String,
        threshold: f64,
        scale: f64,
    },
    /// Fraction of present values outside [lb, ub].
    RangeViolation { attribute: String, lb: f64, ub: f64 },
    OutlierExcess {
        attribute: String,
        k: f64,
        threshold: f64,
        scale: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Logic {
    /// Mean of components: every cause must be fixed.
    Conjunctive,
    /// Minimum of components: fixing any cause suffices.
    Disjunctive,
    /// 1 while any component is positive: causes only help together.
    InteractionPair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuiltinOracle {
    pub name: String,
    pub logic: Logic,
    pub checks: Vec<Check>,
}

fn excess(frac: f64, threshold: f64, scale: f64) -> f64 {
    if scale <= 0.0 {
        return if frac > threshold { 1.0 } else { 0.0 };
    }
    ((frac - threshold).max(0.0) / scale).min(1.0)
}

impl Check {
    pub fn component(&self, d: &Dataset) -> Result<f64> {
        let n = d.row_count();
        if n == 0 {
            return Ok(0.0);
        }
        let v = match self {
            Check::LabelAgreement {
                label,
                reference,
                expected,
            } => {
                let lab = d.column(label)?;
                let refs = d.column(reference)?;
                let mut seen = 0usize;
                let mut wrong = 0usize;
                for r in 0..n {
                    let Some(want) = refs.data.cell_string(r).and_then(|v| expected.get(&v)) else {
                        continue;
                    };
                    seen += 1;
                    if lab.data.cell_string(r).as_ref() != Some(want) {
                        wrong += 1;
                    }
                }
                if seen == 0 {
                    0.0
                } else {
                    wrong as f64 / seen as f64
                }
            }
            Check::ParityGap {
                target,
                positive,
                group,
                scale,
            } => {
                let t = d.column(target)?;
                let g = d.column(group)?;
                let mut rates: BTreeMap<String, (usize, usize)> = BTreeMap::new();
                for r in 0..n {
                    if let (Some(tv), Some(gv)) = (t.data.cell_string(r), g.data.cell_string(r)) {
                        let e = rates.entry(gv).or_default();
                        e.1 += 1;
                        if &tv == positive {
                            e.0 += 1;
                        }
                    }
                }
                let rs: Vec<f64> = rates.values().map(|(p, c)| *p as f64 / *c as f64).collect();
                let gap = if rs.len() < 2 {
                    0.0
                } else {
                    rs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                        - rs.iter().copied().fold(f64::INFINITY, f64::min)
                };
                excess(gap, 0.0, *scale)
            }
            Check::PredicateExcess {
                predicate,
                threshold,
                scale,
            } => excess(predicate.fraction(d)?, *threshold, *scale),
            Check::MissingExcess {
                attribute,
                threshold,
                scale,
            } => {
                let frac = d.column(attribute)?.data.missing_count() as f64 / n as f64;
                excess(frac, *threshold, *scale)
            }
            Check::RangeViolation { attribute, lb, ub } => {
                let v = d.numbers(attribute)?;
                let present = v.iter().flatten().count();
                let out = v.iter().flatten().filter(|x| **x < *lb || **x > *ub).count();
                if present == 0 {
                    0.0
                } else {
                    out as f64 / present as f64
                }
            }
            Check::OutlierExcess {
                attribute,
                k,
                threshold,
                scale,
            } => {
                let frac = outlier_rows(d.numbers(attribute)?, *k).len() as f64 / n as f64;
                excess(frac, *threshold, *scale)
            }
        };
        Ok(v.clamp(0.0, 1.0))
    }
}

impl BuiltinOracle {
    pub fn evaluate(&self, d: &Dataset) -> Result<f64> {
        if self.checks.is_empty() {
            return Ok(0.0);
        }
        let cs: Vec<f64> = self.checks.iter().map(|c| c.component(d)).collect::<Result<_>>()?;
        Ok(match self.logic {
            Logic::Conjunctive => cs.iter().sum::<f64>() / cs.len() as f64,
            Logic::Disjunctive => cs.iter().copied().fold(f64::INFINITY, f64::min),
            Logic::InteractionPair => {
                if cs.iter().any(|&c| c > 0.0) {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Scorer for BuiltinOracle {
    fn score(&mut self, d: &Dataset) -> Result<f64> {
        self.evaluate(d)
    }

    fn describe(&self) -> String {
        format!("builtin:{}", self.name)
    }
}
