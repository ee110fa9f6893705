use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const PEOPLE_FAIL: &str = "\
name,gender,age,race,zip_code,phone,high_expenditure
Shanice Johnson,F,45,A,01004,2088556597,no
DeShawn Bad,M,40,A,01004,2085374523,no
Malik Ayer,M,60,A,01005,2766465009,no
Dustin Jenner,M,22,W,01009,7874891021,yes
Julietta Brown,F,41,W,01009,,yes
Molly Beasley,F,32,W,,7872899033,no
Jake Bloom,M,25,W,01101,4047747803,yes
Luke Stonewald,M,35,W,01101,4042127741,yes
Scott Nossenson,M,25,W,01101,,yes
Gabe Erwin,M,20,W,,4048421581,yes
";

const PEOPLE_PASS: &str = "\
name,gender,age,race,zip_code,phone,high_expenditure
Darin Brust,M,25,W,01004,2088556597,no
Rosalie Bad,F,22,W,01005,,no
Kristine Hilyard,F,50,W,01004,2766465009,yes
Chloe Ayer,F,22,A,,7874891021,yes
Julietta Mchugh,F,51,W,01009,9042899033,yes
Doria Ely,F,32,A,01101,,yes
Kristan Whidden,F,25,W,01101,4047747803,no
Rene Strelow,M,35,W,01101,6162127741,yes
Arial Brent,M,45,W,01102,4089065769,yes
";

const PEOPLE_SCHEMA: &str = r#"{"name": "text", "zip_code": "categorical", "phone": "text"}"#;

fn pvtx() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pvtx"));
    c.env_remove("DATAEXPOSER_SEED");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    pvtx().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn schema() -> Value {
    read_json(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json"))
}

/// Required keys and enumerated values of the published report schema.
fn conforms(report: &Value) {
    let s = schema();
    for key in s["required"].as_array().unwrap() {
        assert!(report.get(key.as_str().unwrap()).is_some(), "missing {key}");
    }
    let allowed: Vec<&str> = s["properties"]
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    for key in report.as_object().unwrap().keys() {
        assert!(allowed.contains(&key.as_str()), "unexpected key {key}");
    }
    assert_eq!(report["schema_version"], s["properties"]["schema_version"]["const"]);
    let st = &s["properties"]["status"]["properties"];
    assert!(st["exit_code"]["enum"]
        .as_array()
        .unwrap()
        .contains(&report["status"]["exit_code"]));
    assert!(st["outcome"]["enum"]
        .as_array()
        .unwrap()
        .contains(&report["status"]["outcome"]));
    if let Some(e) = report.get("explanation") {
        for key in s["definitions"]["explanation"]["required"].as_array().unwrap() {
            assert!(e.get(key.as_str().unwrap()).is_some(), "explanation lacks {key}");
        }
    }
}

fn synth(dir: &Path, spec: &str, out: &str) -> PathBuf {
    fs::write(dir.join("spec.json"), spec).unwrap();
    let o = run(dir, &["synth", "--spec", "spec.json", "--out-dir", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join(out)
}

fn explain(dir: &Path, extra: &[&str]) -> (Output, Value) {
    let mut args = vec!["explain"];
    for (flag, default) in [
        ("--pass", "pass.csv"),
        ("--fail", "fail.csv"),
        ("--oracle", "builtin:oracle.json"),
        ("--tau", "0.1"),
        ("--schema", "schema.json"),
    ] {
        if !extra.contains(&flag) {
            args.extend([flag, default]);
        }
    }
    args.extend(["--report", "report.json"]);
    args.extend_from_slice(extra);
    let o = run(dir, &args);
    let report = read_json(dir.join("report.json"));
    conforms(&report);
    (o, report)
}

#[test]
fn sentiment_fixture_names_the_target_domain() {
    let t = TempDir::new().unwrap();
    let s = synth(t.path(), r#"{"oracle_family": "DomainRemap", "seed": 2}"#, "s");
    for f in [
        "pass.csv",
        "fail.csv",
        "oracle.json",
        "ground-truth.json",
        "schema.json",
    ] {
        assert!(s.join(f).exists(), "{f}");
    }
    let (o, r) = explain(&s, &["--out-repaired", "repaired.csv"]);
    assert_eq!(code(&o), 0);
    let xs = r["explanation"]["triplets"].as_array().unwrap();
    assert_eq!(xs.len(), 1);
    assert_eq!(xs[0]["profile"]["kind"], "DomainCategorical");
    assert_eq!(xs[0]["profile"]["params"]["attribute"], "target");
    let repaired = fs::read_to_string(s.join("repaired.csv")).unwrap();
    assert!(!repaired.lines().skip(1).any(|l| l.ends_with(",0") || l.ends_with(",4")));
}

#[test]
fn synth_round_trip_recovers_the_planted_cause() {
    let t = TempDir::new().unwrap();
    let s = synth(
        t.path(),
        r#"{"oracle_family": "SkewTimeoutAnalog", "seed": 5, "decoys": 6,
            "planted_causes": [{"kind": "Missing"}]}"#,
        "s",
    );
    let truth = read_json(s.join("ground-truth.json"));
    let want = truth["causes"][0]["attributes"][0].as_str().unwrap().to_string();
    for algorithm in ["greedy", "gt", "gt-random"] {
        let (o, r) = explain(&s, &["--algorithm", algorithm]);
        assert_eq!(code(&o), 0, "{algorithm}");
        let xs = r["explanation"]["triplets"].as_array().unwrap();
        assert_eq!(xs.len(), 1, "{algorithm}");
        assert_eq!(xs[0]["profile"]["kind"], "Missing");
        assert_eq!(xs[0]["profile"]["params"]["attribute"], want.as_str());
        assert!(r["explanation"]["interventions"].as_u64().unwrap() >= 1);
    }
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let t = TempDir::new().unwrap();
    let spec = r#"{"oracle_family": "DependenceBias", "seed": 9}"#;
    let a = synth(t.path(), spec, "a");
    let b = synth(t.path(), spec, "b");
    for f in ["pass.csv", "fail.csv", "oracle.json", "ground-truth.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn disjunctive_truth_lists_each_cause() {
    let t = TempDir::new().unwrap();
    let s = synth(
        t.path(),
        r#"{"oracle_family": "SkewTimeoutAnalog", "cause_logic": "Disjunctive",
            "planted_causes": [{"kind": "Missing"}, {"kind": "Outlier"}]}"#,
        "s",
    );
    let truth = read_json(s.join("ground-truth.json"));
    let admissible = truth["admissible"].as_array().unwrap();
    assert_eq!(admissible.len(), 2);
    assert!(admissible.iter().all(|a| a.as_array().unwrap().len() == 1));
}

#[test]
fn invalid_spec_exits_65() {
    let t = TempDir::new().unwrap();
    fs::write(
        t.path().join("spec.json"),
        r#"{"oracle_family": "DomainRemap", "n_rows": 3}"#,
    )
    .unwrap();
    let o = run(t.path(), &["synth", "--spec", "spec.json", "--out-dir", "s"]);
    assert_eq!(code(&o), 65);
    fs::write(t.path().join("spec.json"), "{not json").unwrap();
    assert_eq!(
        code(&run(t.path(), &["synth", "--spec", "spec.json", "--out-dir", "s"])),
        65
    );
}

#[test]
fn tau_below_the_pass_score_is_rejected_before_intervening() {
    let t = TempDir::new().unwrap();
    let s = synth(t.path(), r#"{"oracle_family": "DomainRemap"}"#, "s");
    fs::write(s.join("half.sh"), "echo 0.5\n").unwrap();
    let args = [
        "explain",
        "--pass",
        "pass.csv",
        "--fail",
        "fail.csv",
        "--oracle",
        "sh half.sh",
        "--tau",
        "0.1",
        "--report",
        "report.json",
    ];
    let o = run(&s, &args);
    assert_eq!(code(&o), 65);
    let r = read_json(s.join("report.json"));
    conforms(&r);
    assert_eq!(r["status"]["outcome"], "invalid_input");
    assert!(r.get("explanation").is_none() && r.get("log").is_none());
}

#[test]
fn exit_codes_follow_the_contract() {
    let t = TempDir::new().unwrap();
    let s = synth(t.path(), r#"{"oracle_family": "DomainRemap"}"#, "s");

    let o = run(&s, &["explain", "--pass", "pass.csv"]);
    assert_eq!(code(&o), 64);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(code(&run(&s, &["frobnicate"])), 64);
    assert_eq!(code(&run(&s, &["--help"])), 0);

    // oracle that prints garbage
    let (o, r) = explain(&s, &["--oracle", "echo not-a-number"]);
    assert_eq!(code(&o), 3);
    assert_eq!(r["status"]["outcome"], "oracle_error");

    // only the exact pass file satisfies this oracle, and no repair rebuilds it
    let p = t.path().join("people");
    fs::create_dir(&p).unwrap();
    fs::write(p.join("pass.csv"), PEOPLE_PASS).unwrap();
    fs::write(p.join("fail.csv"), PEOPLE_FAIL).unwrap();
    fs::write(p.join("schema.json"), PEOPLE_SCHEMA).unwrap();
    fs::write(
        p.join("stubborn.sh"),
        "if cmp -s \"$1\" pass.csv; then echo 0; else echo 1; fi\n",
    )
    .unwrap();
    let (o, r) = explain(&p, &["--oracle", "sh stubborn.sh"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(r["status"]["outcome"], "no_explanation");
    assert!(!r["log"]["entries"].as_array().unwrap().is_empty());

    let (o, r) = explain(&s, &["--fail", "missing.csv"]);
    assert_eq!(code(&o), 66);
    assert_eq!(r["status"]["outcome"], "io_error");
}

#[test]
fn external_oracle_matches_builtin() {
    let t = TempDir::new().unwrap();
    let s = synth(t.path(), r#"{"oracle_family": "DomainRemap", "seed": 4}"#, "s");
    let bin = env!("CARGO_BIN_EXE_pvtx");
    let cmd = format!("{bin} score --config oracle.json --schema schema.json");
    let (o, ext) = explain(&s, &["--oracle", &cmd, "--algorithm", "gt"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, inner) = explain(&s, &["--algorithm", "gt"]);
    assert_eq!(ext["explanation"]["triplets"], inner["explanation"]["triplets"]);
    assert_eq!(
        ext["explanation"]["interventions"],
        inner["explanation"]["interventions"]
    );
}

#[test]
fn seed_comes_from_the_environment() {
    let t = TempDir::new().unwrap();
    let s = synth(t.path(), r#"{"oracle_family": "DomainRemap"}"#, "s");
    let o = pvtx()
        .current_dir(&s)
        .env("DATAEXPOSER_SEED", "77")
        .args([
            "explain",
            "--pass",
            "pass.csv",
            "--fail",
            "fail.csv",
            "--oracle",
            "builtin:oracle.json",
            "--tau",
            "0.1",
            "--schema",
            "schema.json",
            "--report",
            "report.json",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(read_json(s.join("report.json"))["config"]["engine"]["seed"], 77);
    fs::write(s.join("echo-seed.sh"), "echo 0.$DATAEXPOSER_SEED\n").unwrap();
    let (_, r) = explain(&s, &["--oracle", "sh echo-seed.sh", "--seed", "3"]);
    assert!(r["status"]["message"].as_str().unwrap().contains("0.3"), "{r}");
}

#[test]
fn reports_are_reproducible_apart_from_timing() {
    let t = TempDir::new().unwrap();
    let s = synth(
        t.path(),
        r#"{"oracle_family": "SkewTimeoutAnalog", "seed": 1, "decoys": 5}"#,
        "s",
    );
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("timing");
        serde_json::to_string(&v).unwrap()
    };
    for algorithm in ["greedy", "gt", "gt-random"] {
        let (_, a) = explain(&s, &["--algorithm", algorithm, "--seed", "11"]);
        let (_, b) = explain(&s, &["--algorithm", algorithm, "--seed", "11"]);
        assert_eq!(strip(a), strip(b), "{algorithm}");
    }
}

#[test]
fn decision_tree_uses_extra_labeled_datasets() {
    let t = TempDir::new().unwrap();
    let s = synth(t.path(), r#"{"oracle_family": "InteractionPair", "seed": 3}"#, "s");
    assert!(s.join("fail-extra-1.csv").exists() && s.join("fail-extra-2.csv").exists());
    let (o, r) = explain(
        &s,
        &[
            "--algorithm",
            "dtree",
            "--also-fail",
            "fail-extra-1.csv",
            "--also-fail",
            "fail-extra-2.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(r["explanation"]["algorithm"], "dtree");
    assert_eq!(r["explanation"]["triplets"].as_array().unwrap().len(), 2);
}

#[test]
fn people_diff_lists_the_discriminative_profiles() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    fs::write(d.join("pass.csv"), PEOPLE_PASS).unwrap();
    fs::write(d.join("fail.csv"), PEOPLE_FAIL).unwrap();
    fs::write(d.join("schema.json"), PEOPLE_SCHEMA).unwrap();
    let o = run(
        d,
        &[
            "diff",
            "--pass",
            "pass.csv",
            "--fail",
            "fail.csv",
            "--schema",
            "schema.json",
            "--report",
            "diff.json",
            "--graph",
            "g.dot",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(d.join("diff.json"));
    conforms(&r);
    let rows = r["discriminative"].as_array().unwrap();
    let has = |kind: &str, attrs: &[&str]| {
        rows.iter().any(|x| {
            x["profile"]["kind"] == kind
                && attrs
                    .iter()
                    .all(|a| x["attributes"].as_array().unwrap().iter().any(|v| v == a))
        })
    };
    assert!(has("Missing", &["zip_code"]));
    assert!(has("IndepChi2", &["race", "high_expenditure"]));
    for x in rows {
        let b = x["benefit"].as_f64().unwrap();
        let want = x["violation"].as_f64().unwrap() * x["coverage"].as_f64().unwrap();
        assert!((b - want).abs() < 1e-12);
    }
    assert!(r["degrees"]["zip_code"].as_u64().unwrap() >= 1);
    let dot = fs::read_to_string(d.join("g.dot")).unwrap();
    assert!(dot.starts_with("graph ") && dot.contains("attr:zip_code"));
}

#[test]
fn diff_against_itself_is_empty() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    fs::write(d.join("pass.csv"), PEOPLE_PASS).unwrap();
    let o = run(
        d,
        &[
            "diff",
            "--pass",
            "pass.csv",
            "--fail",
            "pass.csv",
            "--report",
            "diff.json",
        ],
    );
    assert_eq!(code(&o), 0);
    let r = read_json(d.join("diff.json"));
    assert!(r["discriminative"].as_array().unwrap().is_empty());
}

#[test]
fn profile_lists_canonical_json() {
    let t = TempDir::new().unwrap();
    let d = t.path();
    fs::write(d.join("empty.csv"), "a,b,c\n").unwrap();
    let o = run(d, &["profile", "--data", "empty.csv"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    conforms(&r);
    assert!(r["profiles"].as_array().unwrap().is_empty());

    fs::write(d.join("people.csv"), PEOPLE_PASS).unwrap();
    fs::write(d.join("schema.json"), PEOPLE_SCHEMA).unwrap();
    let o = run(
        d,
        &[
            "profile",
            "--data",
            "people.csv",
            "--schema",
            "schema.json",
            "--graph",
            "p.dot",
        ],
    );
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let ps = r["profiles"].as_array().unwrap();
    assert!(ps
        .iter()
        .any(|p| p["kind"] == "Missing" && p["params"]["attribute"] == "zip_code"));
    for p in ps {
        let keys: Vec<&String> = p["params"].as_object().unwrap().keys().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
    assert!(fs::read_to_string(d.join("p.dot")).unwrap().contains("attr:age"));

    assert_eq!(code(&run(d, &["profile", "--data", "nope.csv"])), 66);
    fs::write(d.join("ragged.csv"), "a,b\n1\n").unwrap();
    assert_eq!(code(&run(d, &["profile", "--data", "ragged.csv"])), 65);
}

#[test]
fn human_flag_renders_a_table() {
    let t = TempDir::new().unwrap();
    let s = synth(t.path(), r#"{"oracle_family": "DomainRemap"}"#, "s");
    let (o, _) = explain(&s, &["--human"]);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("explain: ok"));
    assert!(out.contains("DomainCategorical:target"));
}
