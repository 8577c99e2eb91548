use std::fs;
use std::path::{Path, PathBuf};

use assert_cmd::Command;
use predicates::prelude::*;
use tempfile::TempDir;

const LOOKBACK: &str = r#"{"u": 1.2, "d": 0.8, "v": 10, "r": 0.03, "p": 0.5, "horizon": 2}"#;
const INVIABLE: &str = r#"{"u": 1.2, "d": 0.8, "v": 10, "r": 0.25, "p": 0.5, "horizon": 2}"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: TempDir::new().unwrap(),
        }
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, contents).unwrap();
        path
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn crr() -> Command {
    Command::cargo_bin("crr").unwrap()
}

fn stdout_of(cmd: &mut Command) -> String {
    String::from_utf8(cmd.output().unwrap().stdout).unwrap()
}

fn number(text: &str) -> f64 {
    text.trim().parse().unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|line| line.split(',').map(str::to_string).collect())
        .collect()
}

fn quantity(csv: &str, time: &str, prefix: &str, asset: &str) -> f64 {
    rows(csv)
        .into_iter()
        .find(|r| r[0] == time && r[1] == prefix && r[2] == asset)
        .map(|r| number(&r[3]))
        .unwrap_or_else(|| panic!("no row {time},{prefix},{asset}"))
}

fn price_args<'a>(cmd: &'a mut Command, config: &Path, payoff: &str) -> &'a mut Command {
    cmd.arg("price")
        .arg("--config")
        .arg(config)
        .args(["--payoff", payoff])
}

#[test]
fn prices_the_lookback() {
    let ws = Workspace::new();
    let config = ws.file("market.json", LOOKBACK);
    let tree = ws.path("tree.csv");
    let out = stdout_of(
        price_args(&mut crr(), &config, "lookback")
            .args(["--maturity", "2"])
            .arg("--tree")
            .arg(&tree),
    );
    assert!((number(&out) - 1.2579).abs() < 5e-4, "{out}");
    assert_eq!(out.trim().len(), "1.25789".len());

    let tree = fs::read_to_string(tree).unwrap();
    assert!(tree.starts_with("time,prefix,value\n0,-,"));
    let value = |prefix: &str| {
        rows(&tree)
            .into_iter()
            .find(|r| r[1] == prefix)
            .map(|r| number(&r[2]))
            .unwrap()
    };
    assert!((value("U") - 0.9903).abs() < 5e-4);
    assert!((value("D") - 1.7087).abs() < 5e-4);
    assert_eq!(rows(&tree).len(), 7);
}

#[test]
fn prices_forward_and_constant() {
    let ws = Workspace::new();
    let config = ws.file(
        "m.json",
        r#"{"u": 1.1, "d": 0.95, "v": 95, "r": 0.02, "p": 0.4, "horizon": 2}"#,
    );
    let out = stdout_of(price_args(&mut crr(), &config, "forward(98)"));
    assert!((number(&out) - 0.805459).abs() < 1e-6, "{out}");
    assert_eq!(format!("{:.2}", number(&out)), "0.81");

    let flat = ws.file(
        "flat.json",
        r#"{"u": 1.1, "d": 0.9, "v": 1, "r": 0, "p": 0.5, "horizon": 1}"#,
    );
    price_args(&mut crr(), &flat, "1")
        .args(["--maturity", "1"])
        .assert()
        .success()
        .stdout("1.00000\n");
}

#[test]
fn prices_from_a_path_table() {
    let ws = Workspace::new();
    let config = ws.file("m.json", LOOKBACK);
    let table = ws.file("kappa.csv", "prefix,value\nUU,0\nUD,2.4\nDU,0.4\nDD,3.6\n");
    let from_table = stdout_of(
        crr()
            .arg("price")
            .arg("--config")
            .arg(&config)
            .arg("--path-table")
            .arg(&table),
    );
    let from_expr = stdout_of(price_args(&mut crr(), &config, "lookback"));
    assert_eq!(from_table, from_expr);

    let short = ws.file("short.csv", "prefix,value\nUU,0\n");
    crr()
        .arg("price")
        .arg("--config")
        .arg(&config)
        .arg("--path-table")
        .arg(&short)
        .assert()
        .code(3);
}

#[test]
fn price_errors() {
    let ws = Workspace::new();
    let inviable = ws.file("bad.json", INVIABLE);
    price_args(&mut crr(), &inviable, "lookback")
        .assert()
        .code(2)
        .stderr(predicate::str::contains(
            "market not viable: requires d < 1+r < u",
        ));

    let config = ws.file("m.json", LOOKBACK);
    price_args(&mut crr(), &config, "S[1")
        .assert()
        .code(3)
        .stderr(predicate::str::contains("offset 3"));
    price_args(&mut crr(), &config, "S[3]").assert().code(3);
    price_args(&mut crr(), &config, "lookback")
        .args(["--maturity", "3"])
        .assert()
        .code(3);

    let broken = ws.file("broken.json", r#"{"u": 1.2, "d": 0.8}"#);
    price_args(&mut crr(), &broken, "lookback").assert().code(3);
    let unordered = ws.file(
        "unordered.json",
        r#"{"u": 0.8, "d": 1.2, "v": 10, "r": 0, "p": 0.5, "horizon": 2}"#,
    );
    price_args(&mut crr(), &unordered, "lookback")
        .assert()
        .code(3);
    crr()
        .args(["price", "--payoff", "lookback"])
        .assert()
        .code(3);
}

#[test]
fn replicates_the_lookback() {
    let ws = Workspace::new();
    let config = ws.file("m.json", LOOKBACK);
    let out = ws.path("pf.csv");
    let assert = crr()
        .arg("replicate")
        .arg("--config")
        .arg(&config)
        .args(["--payoff", "lookback", "--maturity", "2"])
        .arg("--out")
        .arg(&out)
        .assert()
        .success()
        .stderr(predicate::str::contains("replicating: yes"));
    let report = String::from_utf8(assert.get_output().stderr.clone()).unwrap();

    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("time,prefix,asset,quantity\n"));
    assert!((quantity(&csv, "0", "-", "S") + 0.1796).abs() < 5e-4);
    assert!((quantity(&csv, "0", "-", "R") - 3.0539).abs() < 5e-4);
    assert!((quantity(&csv, "1", "U", "S") + 0.5).abs() < 5e-4);
    assert!((quantity(&csv, "1", "D", "S") + 1.0).abs() < 5e-4);

    let exact = exact_init_value(&report);
    let market = crr_core::crr::MarketConfig::from_json(LOOKBACK)
        .unwrap()
        .market()
        .unwrap();
    let price =
        crr_core::pricing::fair_price(&market, &crr_core::payoff::PayoffExpr::lookback(), 2)
            .unwrap();
    assert!((exact - price).abs() < 1e-9);
}

#[test]
fn asset_payoff_holds_one_share() {
    let ws = Workspace::new();
    let config = ws.file("m.json", LOOKBACK);
    let csv = stdout_of(
        crr()
            .arg("replicate")
            .arg("--config")
            .arg(&config)
            .args(["--payoff", "S_T"]),
    );
    for row in rows(&csv) {
        let expected = if row[2] == "S" { 1.0 } else { 0.0 };
        assert!((number(&row[3]) - expected).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn replicate_errors() {
    let ws = Workspace::new();
    let inviable = ws.file("bad.json", INVIABLE);
    crr()
        .arg("replicate")
        .arg("--config")
        .arg(&inviable)
        .args(["--payoff", "lookback"])
        .assert()
        .code(2);
}

#[test]
fn verify_round_trip_and_failures() {
    let ws = Workspace::new();
    let config = ws.file("m.json", LOOKBACK);
    let pf = ws.path("pf.csv");
    crr()
        .arg("replicate")
        .arg("--config")
        .arg(&config)
        .args(["--payoff", "lookback"])
        .arg("--out")
        .arg(&pf)
        .assert()
        .success();
    let verify = |portfolio: &Path| {
        let mut cmd = crr();
        cmd.arg("verify")
            .arg("--config")
            .arg(&config)
            .args(["--payoff", "lookback"])
            .arg("--portfolio")
            .arg(portfolio);
        cmd
    };
    verify(&pf)
        .assert()
        .success()
        .stdout(predicate::str::contains("replicating: yes"));

    let empty = ws.file("empty.csv", "time,prefix,asset,quantity\n");
    verify(&empty)
        .assert()
        .code(4)
        .stdout(predicate::str::contains(
            "terminal-value: FAIL (max error 3.6",
        ));

    let peeking = ws.file(
        "peek.csv",
        "time,prefix,asset,quantity\n0,U,S,1\n0,D,S,-1\n",
    );
    verify(&peeking)
        .assert()
        .code(4)
        .stdout(predicate::str::contains("trading-strategy: FAIL"));

    let slot = ws.file("slot.csv", "time,prefix,asset,quantity\n0,-,X,1\n");
    verify(&slot)
        .assert()
        .code(4)
        .stdout(predicate::str::contains("stock-only: FAIL"));

    let malformed = ws.file("bad.csv", "time,prefix,asset,quantity\n0,-,S,many\n");
    verify(&malformed).assert().code(3);
    let unknown = ws.file("unknown.csv", "time,prefix,asset,quantity\n0,-,GOLD,1\n");
    verify(&unknown).assert().code(3);
}

#[test]
fn check_reports_viability() {
    let ws = Workspace::new();
    let config = ws.file("m.json", LOOKBACK);
    crr()
        .arg("check")
        .arg("--config")
        .arg(&config)
        .assert()
        .success()
        .stdout(predicate::str::starts_with("viable; q = 0.575"));

    let inviable = ws.file("bad.json", INVIABLE);
    crr()
        .arg("check")
        .arg("--config")
        .arg(&inviable)
        .assert()
        .code(5)
        .stdout(predicate::str::contains("not viable"))
        .stdout(predicate::str::contains("S,-1\nR,10\n"))
        .stdout(predicate::str::contains("witness time: 1"));

    let boundary = ws.file(
        "edge.json",
        r#"{"u": 1.2, "d": 1.05, "v": 10, "r": 0.05, "p": 0.5, "horizon": 3}"#,
    );
    crr()
        .arg("check")
        .arg("--config")
        .arg(&boundary)
        .assert()
        .code(5);

    let broken = ws.file("broken.json", "{not json");
    crr()
        .arg("check")
        .arg("--config")
        .arg(&broken)
        .assert()
        .code(3);
}

#[test]
fn output_is_deterministic() {
    let ws = Workspace::new();
    let config = ws.file(
        "m.json",
        r#"{"u": 1.15, "d": 0.9, "v": 50, "r": 0.01, "p": 0.5, "horizon": 5}"#,
    );
    let run = || {
        stdout_of(
            crr()
                .arg("replicate")
                .arg("--config")
                .arg(&config)
                .args(["--payoff", "avg(S) + pos(S[2] - 50)"]),
        )
    };
    assert_eq!(run(), run());
}

fn exact_init_value(report: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix("init value: "))
        .and_then(|l| l.split_once('('))
        .map(|(_, rest)| number(rest.trim_end_matches(')')))
        .expect("report has an init value line")
}

#[test]
fn price_and_replicate_agree() {
    use rand::{Rng, SeedableRng};

    let ws = Workspace::new();
    let mut rng = rand::rngs::StdRng::seed_from_u64(17);
    let payoffs = [
        "lookback",
        "pos(S_T - 10)",
        "pos(12 - S_T)",
        "avg(S)",
        "max(S[1], S_T) - min(S)",
        "forward(9)",
    ];
    for case in 0..12 {
        let d: f64 = rng.gen_range(0.7..0.98);
        let u: f64 = rng.gen_range(1.02..1.3);
        let r = rng.gen_range(d..u) - 1.0;
        let horizon = rng.gen_range(1..=6);
        let text =
            format!(r#"{{"u": {u}, "d": {d}, "v": 10, "r": {r}, "p": 0.5, "horizon": {horizon}}}"#);
        let config = ws.file(&format!("m{case}.json"), &text);
        let payoff = payoffs[case % payoffs.len()];

        let printed = stdout_of(price_args(&mut crr(), &config, payoff));
        let output = crr()
            .arg("replicate")
            .arg("--config")
            .arg(&config)
            .args(["--payoff", payoff])
            .output()
            .unwrap();
        assert!(output.status.success(), "{text} {payoff}");
        let init = exact_init_value(&String::from_utf8(output.stderr).unwrap());

        let market = crr_core::crr::MarketConfig::from_json(&text)
            .unwrap()
            .market()
            .unwrap();
        let expr = crr_core::payoff::parse_payoff(payoff).unwrap();
        let price = crr_core::pricing::fair_price(&market, &expr, horizon).unwrap();
        assert!(
            (init - price).abs() < 1e-9,
            "{text} {payoff}: {init} vs {price}"
        );
        assert_eq!(printed.trim(), crr_core::format::sig6(price));
    }
}
