//! The JSON report written by every subcommand.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use pvtx_core::engine::{Candidate, InterventionLog};
use pvtx_core::{Error, Explanation};
use serde::Serialize;

use crate::{EXIT_INVALID, EXIT_IO, EXIT_NO_EXPLANATION, EXIT_OK, EXIT_ORACLE};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Outcome {
    pub exit_code: u8,
    pub outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Outcome {
    pub fn ok(message: impl Into<String>) -> Self {
        Outcome {
            exit_code: EXIT_OK,
            outcome: "ok",
            message: Some(message.into()),
        }
    }

    pub fn error(code: u8, e: &Error) -> Self {
        let outcome = match code {
            EXIT_NO_EXPLANATION => "no_explanation",
            EXIT_ORACLE => "oracle_error",
            EXIT_IO => "io_error",
            EXIT_INVALID => "invalid_input",
            _ => "error",
        };
        Outcome {
            exit_code: code,
            outcome,
            message: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DiffRow {
    pub id: String,
    pub profile: serde_json::Value,
    pub transform: String,
    pub attributes: Vec<String>,
    pub violation: f64,
    pub coverage: f64,
    pub benefit: f64,
}

impl From<Candidate> for DiffRow {
    fn from(c: Candidate) -> Self {
        DiffRow {
            id: c.triplet.id.clone(),
            profile: serde_json::from_str(&c.triplet.profile.canonical_json()).unwrap_or(serde_json::Value::Null),
            transform: c.triplet.transform.to_string(),
            attributes: c.triplet.attributes(),
            violation: c.violation,
            coverage: c.coverage,
            benefit: c.benefit,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: &'static str,
    pub argv: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub status: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explanation: Option<Explanation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repaired_csv: Option<String>,
    /// Intervention log of a run that ended without an explanation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<InterventionLog>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profiles: Option<Vec<serde_json::Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discriminative: Option<Vec<DiffRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degrees: Option<BTreeMap<String, usize>>,
    pub timing: Timing,
}

impl Report {
    pub fn new(command: &'static str, argv: Vec<String>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command,
            argv,
            config: None,
            status: Outcome {
                exit_code: EXIT_OK,
                outcome: "ok",
                message: None,
            },
            explanation: None,
            repaired_csv: None,
            log: None,
            profiles: None,
            discriminative: None,
            degrees: None,
            timing: Timing { elapsed_ms: 0.0 },
        }
    }

    pub fn set_elapsed(&mut self, d: Duration) {
        self.timing.elapsed_ms = d.as_secs_f64() * 1000.0;
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render_human(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}: {}", self.command, self.status.outcome);
        if let Some(msg) = &self.status.message {
            let _ = writeln!(out, "  {msg}");
        }
        if let Some(e) = &self.explanation {
            let _ = writeln!(
                out,
                "\nscore {:.4} -> {:.4} (pass {:.4}), {} interventions over {} candidates, {}",
                e.initial_score,
                e.final_score,
                e.pass_score,
                e.interventions,
                e.candidates,
                e.algorithm.name()
            );
            let width = e.triplets.iter().map(|x| x.id.len()).max().unwrap_or(2).max(2);
            let _ = writeln!(out, "\n{:<width$}  {:<14}  profile", "id", "transform");
            for x in &e.triplets {
                let _ = writeln!(out, "{:<width$}  {:<14}  {}", x.id, x.transform.to_string(), x.profile);
            }
            for w in &e.log.warnings {
                let _ = writeln!(out, "warning: {w}");
            }
        }
        if let Some(rows) = &self.discriminative {
            let width = rows.iter().map(|r| r.id.len()).max().unwrap_or(2).max(2);
            let _ = writeln!(
                out,
                "\n{:<width$}  {:>9}  {:>9}  {:>9}",
                "id", "violation", "coverage", "benefit"
            );
            for r in rows {
                let _ = writeln!(
                    out,
                    "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}",
                    r.id, r.violation, r.coverage, r.benefit
                );
            }
        }
        if let Some(deg) = &self.degrees {
            let _ = writeln!(out, "\nattribute degrees:");
            for (a, d) in deg {
                let _ = writeln!(out, "  {a}: {d}");
            }
        }
        if let Some(ps) = &self.profiles {
            for p in ps {
                let _ = writeln!(out, "{p}");
            }
        }
        out
    }
}
