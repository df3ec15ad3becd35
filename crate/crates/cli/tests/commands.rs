use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasifisher"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> serde_json::Value {
    let out = run(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

#[test]
fn solve_writes_exact_prices() {
    let r = json(&[
        "solve",
        &fixture("example2.json"),
        "--json",
        "--no-timestamp",
    ]);
    assert_eq!(r["mode"], "exact");
    assert_eq!(r["result"]["p_star"], serde_json::json!(["3/5", "3/5"]));
    assert_eq!(r["result"]["revenue"], "3");
    assert_eq!(r["input"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn one_good_fixture_prices_at_the_budget_sum() {
    let r = json(&[
        "solve",
        &fixture("example1.json"),
        "--mode",
        "float",
        "--json",
    ]);
    assert_eq!(r["result"]["p_star"][0], 0.5);
    assert!(r["timing_ms"].is_number());
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = run(&[
            "solve",
            &fixture("example2.json"),
            "--mode",
            "float",
            "--no-timestamp",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"kind\": \"market\"").unwrap();
    assert_eq!(
        run(&["solve", bad.to_str().unwrap()]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["solve", "/nonexistent/market.json"]).status.code(),
        Some(1)
    );
    let capped = run(&["solve", &fixture("example2.json"), "--max-iterations", "2"]);
    assert_eq!(capped.status.code(), Some(2));
    assert_eq!(
        run(&["monopoly", "--valuation", "cubic", "--supply", "3"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn price_checks() {
    let at = |price: &str| {
        json(&[
            "check-price",
            &fixture("example2.json"),
            "--price",
            price,
            "--json",
        ])
    };
    let r = at("0.6,0.6");
    assert_eq!(
        (
            r["result"]["feasible"].clone(),
            r["result"]["clearing"].clone()
        ),
        (true.into(), true.into())
    );
    assert_eq!(r["result"]["max_extension"]["revenue"], "3");
    let r = at("0.5,0.5");
    assert_eq!(r["result"]["feasible"], false);
    let goods = r["result"]["over_demanded"]["goods"].as_array().unwrap();
    assert!(goods.contains(&"A".into()));
    let r = at("0.65,0.65");
    assert_eq!(
        (
            r["result"]["feasible"].clone(),
            r["result"]["clearing"].clone()
        ),
        (true.into(), false.into())
    );
    assert_eq!(r["result"]["max_extension"]["revenue"], "3");
}

#[test]
fn region_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.csv");
    let r = json(&[
        "region",
        &fixture("example2.json"),
        "--bounds",
        "0.1:5",
        "--resolution",
        "2",
        "--grid",
        grid.to_str().unwrap(),
        "--json",
    ]);
    assert_eq!(r["result"]["points"], 4);
    assert_eq!(std::fs::read_to_string(&grid).unwrap().lines().count(), 5);

    let boundary = dir.path().join("b.csv");
    let out = run(&[
        "region",
        &fixture("three-goods.json"),
        "--bounds",
        "0.1:5",
        "--resolution",
        "4",
        "--grid",
        grid.to_str().unwrap(),
        "--boundary",
        boundary.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("two goods"));

    let out = run(&[
        "region",
        &fixture("three-goods.json"),
        "--bounds",
        "0.1:5",
        "--resolution",
        "1000",
        "--grid",
        grid.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lower the resolution"));
}

#[test]
fn monopoly_reports() {
    let r = json(&[
        "monopoly",
        "--valuation",
        "example-a1",
        "--budget",
        "2",
        "--supply",
        "3",
        "--json",
    ]);
    let res = &r["result"];
    assert_eq!(res["clearing_price"], 0.5);
    assert_eq!(res["clearing_revenue"], 1.5);
    let open = &res["optimum_without_budget"];
    let (e, ln2) = (std::f64::consts::E, std::f64::consts::LN_2);
    assert!((open["price"].as_f64().unwrap() - 4.0 / e).abs() < 1e-3);
    assert!((open["quantity"].as_f64().unwrap() - 1.0 / ln2).abs() < 1e-3);
    assert!((open["revenue"].as_f64().unwrap() - 4.0 / (e * ln2)).abs() < 1e-3);
    assert!(res["divergence"].is_object());

    let r = json(&[
        "monopoly",
        "--valuation",
        "linear:5",
        "--budget",
        "2",
        "--supply",
        "3",
        "--json",
    ]);
    let res = &r["result"];
    assert_eq!(res["clearing_price"], res["optimum"]["price"]);
    assert_eq!(res["optimum"]["revenue"], 2.0);
    assert!(res["divergence"].is_null());

    let r = json(&[
        "monopoly",
        "--valuation",
        "linear:5",
        "--budget",
        "100",
        "--supply",
        "3",
        "--json",
    ]);
    assert_eq!(r["result"]["optimum"]["price"], 5.0);
    assert_eq!(r["result"]["optimum"]["revenue"], 15.0);
}

#[test]
fn arctic_and_csv_inputs_match_the_direct_market() {
    let direct = json(&[
        "solve",
        &fixture("example2.json"),
        "--json",
        "--no-timestamp",
    ]);
    for file in ["example2-owners.json", "example2-one-owner.json"] {
        let r = json(&["solve", &fixture(file), "--json"]);
        assert_eq!(r["result"]["aggregate"], direct["result"]["aggregate"]);
        assert_eq!(r["result"]["revenue"], direct["result"]["revenue"]);
    }
    let r = json(&["solve", &fixture("example2-one-owner.json"), "--json"]);
    assert_eq!(r["result"]["allocation"].as_array().unwrap().len(), 1);
    let r = json(&[
        "solve",
        &fixture("example2.csv"),
        "--supply",
        "3,2",
        "--json",
    ]);
    assert_eq!(r["result"]["p_star"], direct["result"]["p_star"]);
}

#[test]
fn small_property_run() {
    let r = json(&[
        "proptest",
        "--markets",
        "2",
        "--max-goods",
        "2",
        "--max-buyers",
        "3",
        "--pairs",
        "5",
        "--max-points",
        "100",
        "--json",
        "--seed",
        "9",
    ]);
    assert_eq!(r["result"]["passed"], true);
    assert_eq!(r["result"]["seed"], 9);
}
