//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quasifisher::fixtures::rat;
use quasifisher::monopoly::{clearing_price, divergence_witness, max_revenue_price};
use quasifisher::oracle::{distance_to_boundary, Polyline};
use quasifisher::properties::{cross_method, prepare, run_suites, SuiteConfig};
use quasifisher::{
    check_feasible, parse_instance, solve, ConcaveValuation, Market, MonopolyInstance, PriceVector,
    Rational,
};
use quasifisher_cli::{cmd_region, InputArgs, Mode, OutputArgs, RegionFiles};

type Check = Result<String, String>;
type Criterion<'a> = Box<dyn Fn() -> Check + 'a>;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn load<T: quasifisher::Scalar>(name: &str) -> Market<T> {
    let bytes = std::fs::read(fixture(name)).expect("fixture exists");
    parse_instance::<T>(&bytes).expect("fixture parses").market
}

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn within_time(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:?}, limit {limit:?}")
    })
}

fn two_goods_end_to_end() -> Check {
    let start = Instant::now();
    let float = solve(&load::<f64>("example2.json"), 1e-8).map_err(|e| e.to_string())?;
    let float_time = start.elapsed();
    let start = Instant::now();
    let exact = solve(&load::<Rational>("example2.json"), 1e-8).map_err(|e| e.to_string())?;
    let exact_time = start.elapsed();

    let err = float
        .p_star
        .0
        .iter()
        .map(|p| (p - 0.6).abs())
        .fold(0.0, f64::max);
    ensure(err <= 1e-6, || format!("float price error {err:e}"))?;
    ensure(exact.p_star.0 == vec![rat(3, 5), rat(3, 5)], || {
        format!("exact price {:?}", exact.p_star.0)
    })?;
    ensure((float.revenue - 3.0).abs() <= 1e-9, || {
        format!("revenue {}", float.revenue)
    })?;
    let agg = float.allocation.aggregate(2);
    ensure(
        (agg[0] - 3.0).abs() <= 1e-9 && (agg[1] - 2.0).abs() <= 1e-9,
        || format!("aggregate {agg:?}"),
    )?;
    ensure((float.welfare - 15.0).abs() <= 1e-8, || {
        format!("welfare {}", float.welfare)
    })?;
    ensure(
        exact.revenue == rat(3, 1) && exact.welfare == rat(15, 1),
        || "exact revenue or welfare".into(),
    )?;
    within_time(float_time.max(exact_time), Duration::from_secs(1))?;
    Ok(format!(
        "p* = (3/5, 3/5), float error {err:.1e}, {:?} float / {:?} exact",
        float_time, exact_time
    ))
}

fn one_good_budget_sum() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let v2: f64 = rng.gen_range(0.2..2.0);
        let v1 = v2 + rng.gen_range(0.01..2.0);
        let total = rng.gen_range(0.02..=v2);
        let b1 = total * rng.gen_range(0.51..0.99);
        let b2 = total - b1;
        let m = Market::from_parts(vec![1.0], vec![vec![v1], vec![v2]], vec![b1, b2])
            .map_err(|e| e.to_string())?;
        let r = solve(&m, 1e-9).map_err(|e| format!("instance {k}: {e}"))?;
        let price_err = (r.p_star.0[0] - (b1 + b2)).abs();
        let share_err = (r.allocation.0[0].0[0] - b1 / (b1 + b2)).abs();
        worst = worst.max(price_err).max(share_err);
        ensure(price_err <= 1e-7 && share_err <= 1e-7, || {
            format!("instance {k}: price error {price_err:e}, share error {share_err:e}")
        })?;
    }
    within_time(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "100 instances, worst error {worst:.1e}, {:?}",
        start.elapsed()
    ))
}

fn concave_monopoly() -> Check {
    let start = Instant::now();
    let budgeted = MonopolyInstance::new(ConcaveValuation::example_a1(), 3.0, 2.0)
        .map_err(|e| e.to_string())?;
    let p = clearing_price(&budgeted).map_err(|e| e.to_string())?;
    let rev = budgeted.revenue_at(p).map_err(|e| e.to_string())?;
    ensure((p - 0.5).abs() <= 1e-9 && (rev - 1.5).abs() <= 1e-9, || {
        format!("clearing ({p}, {rev})")
    })?;
    let at_one = budgeted.revenue_at(1.0).map_err(|e| e.to_string())?;
    ensure((at_one - 2.0).abs() <= 1e-9, || {
        format!("revenue at 1 is {at_one}")
    })?;

    let open = MonopolyInstance::new(ConcaveValuation::example_a1(), 3.0, f64::INFINITY)
        .map_err(|e| e.to_string())?;
    let opt = max_revenue_price(&open, 1e-12).map_err(|e| e.to_string())?;
    let e = std::f64::consts::E;
    let ln2 = std::f64::consts::LN_2;
    let expected = [4.0 / e, 1.0 / ln2, 4.0 / (e * ln2)];
    let got = [opt.price, opt.quantity, opt.revenue];
    let err = expected
        .iter()
        .zip(&got)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(err <= 1e-4, || {
        format!("optimum {got:?}, expected {expected:?}")
    })?;
    within_time(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "clearing (0.5, 1.5), optimum ({:.5}, {:.5}, {:.5}) without budget, {:?}",
        got[0],
        got[1],
        got[2],
        start.elapsed()
    ))
}

fn read_boundary(path: &std::path::Path) -> Result<Vec<Polyline>, String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let mut lines: Vec<Polyline> = Vec::new();
    let mut current = None;
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        let parse = |k: usize| record[k].parse::<f64>().map_err(|e| e.to_string());
        let (x, y, id) = (parse(0)?, parse(1)?, record[2].to_string());
        if current.as_ref() != Some(&id) {
            lines.push(Polyline {
                points: Vec::new(),
                closed: false,
            });
            current = Some(id);
        }
        lines.last_mut().expect("just pushed").points.push((x, y));
    }
    Ok(lines)
}

fn region_geometry() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (grid, boundary) = (dir.path().join("grid.csv"), dir.path().join("boundary.csv"));
    let input = InputArgs {
        path: fixture("example2.json"),
        mode: Mode::Float,
        supply: Vec::new(),
    };
    let output = OutputArgs {
        out: None,
        json: false,
        no_timestamp: true,
    };
    let files = RegionFiles {
        grid: &grid,
        boundary: Some(&boundary),
    };
    let report =
        cmd_region(&input, &["0.1:5".into()], 491, &files, &output).map_err(|e| e.to_string())?;
    let step = report.result["step"][0].as_f64().unwrap_or(f64::NAN);
    ensure((step - 0.01).abs() < 1e-12, || format!("grid step {step}"))?;
    let lines = read_boundary(&boundary)?;
    let corners = [
        (1.0, 1.5),
        (2.0 / 3.0, 1.0),
        (2.0 / 3.0, 2.0 / 3.0),
        (1.0, 1.0),
        (2.0, 1.0),
        (3.0, 1.5),
    ];
    let mut worst = 0.0f64;
    for (x, y) in corners {
        let d = distance_to_boundary(&lines, x, y);
        worst = worst.max(d);
        ensure(d <= 0.02, || {
            format!("({x:.3}, {y:.3}) is {d} from the boundary")
        })?;
    }
    let m = load::<Rational>("example2.json");
    let member = |a: (i64, i64), b: (i64, i64)| {
        check_feasible(&m, &PriceVector::new(vec![rat(a.0, a.1), rat(b.0, b.1)]))
            .map(|c| c.feasible)
    };
    let verdicts = [
        member((3, 5), (3, 5)),
        member((2, 1), (2, 1)),
        member((1, 2), (1, 2)),
        member((9, 10), (7, 10)),
    ]
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(|e| e.to_string())?;
    ensure(verdicts == [true, true, false, false], || {
        format!("membership {verdicts:?}")
    })?;
    within_time(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "worst corner distance {worst:.4}, membership ok, {:?}",
        start.elapsed()
    ))
}

fn suite_line(summary: &quasifisher::properties::SuiteSummary, name: &str) -> Check {
    let s = summary
        .suites
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| format!("suite {name} missing"))?;
    if s.passed() {
        Ok(format!(
            "{} markets, {} checks, worst excess {:.1e}",
            summary.markets, s.cases, s.worst
        ))
    } else {
        Err(format!(
            "{} failures: {}",
            s.failures.len(),
            s.failures.join("; ")
        ))
    }
}

fn cross_method_with_fixtures(summary: &quasifisher::properties::SuiteSummary) -> Check {
    let random = suite_line(summary, "cross-method")?;
    let cfg = SuiteConfig::default();
    let mut cases = 0;
    let mut worst = 0.0f64;
    for name in [
        "example1.json",
        "example2.json",
        "example2-owners.json",
        "three-goods.json",
    ] {
        let prep = prepare(0, load::<Rational>(name), &cfg).map_err(|e| format!("{name}: {e}"))?;
        let r = cross_method(0, &prep.market, &prep.p_star, prep.raw_agreement, 1e-5)
            .map_err(|e| e.to_string())?;
        if !r.passed() {
            return Err(format!("{name}: {}", r.failures.join("; ")));
        }
        cases += r.cases;
        worst = worst.max(r.worst);
    }
    Ok(format!(
        "{random}; fixtures {cases} checks, worst gap {worst:.1e}"
    ))
}

fn arctic_reduction() -> Check {
    let direct = solve(&load::<Rational>("example2.json"), 1e-8).map_err(|e| e.to_string())?;
    let want = direct.allocation.aggregate(2);
    for name in ["example2-owners.json", "example2-one-owner.json"] {
        let bytes = std::fs::read(fixture(name)).map_err(|e| e.to_string())?;
        let inst = parse_instance::<Rational>(&bytes).map_err(|e| e.to_string())?;
        let r = solve(&inst.market, 1e-8).map_err(|e| e.to_string())?;
        let shares =
            quasifisher::reaggregate(&inst, &r.p_star, &r.allocation).map_err(|e| e.to_string())?;
        let mut per_owner = vec![Rational::from_integer(0.into()); 2];
        for s in &shares {
            for (acc, x) in per_owner.iter_mut().zip(&s.bundle) {
                *acc += x;
            }
        }
        ensure(per_owner == want && r.revenue == direct.revenue, || {
            format!("{name}: aggregate {per_owner:?}, revenue {}", r.revenue)
        })?;
    }
    Ok("three owners and one owner both give aggregate (3, 2), revenue 3 exactly".into())
}

fn linear_monopoly() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let (v, beta, s) = (
            rng.gen_range(0.1..10.0),
            rng.gen_range(0.1..10.0),
            rng.gen_range(0.1..10.0),
        );
        let inst = MonopolyInstance::new(ConcaveValuation::linear(v), s, beta)
            .map_err(|e| e.to_string())?;
        let opt = max_revenue_price(&inst, 1e-12).map_err(|e| e.to_string())?;
        let err = (opt.price - f64::min(v, beta / s)).abs();
        worst = worst.max(err);
        ensure(err <= 1e-7, || {
            format!("triple {k} ({v}, {beta}, {s}): price {}", opt.price)
        })?;
        ensure(divergence_witness(&inst.valuation, beta).is_none(), || {
            format!("triple {k} has a witness")
        })?;
    }
    Ok(format!(
        "200 triples, worst price error {worst:.1e}, no witnesses"
    ))
}

fn main() {
    let started = Instant::now();
    let summary = run_suites(&SuiteConfig::default());
    let summary = &summary;
    let suites = |name: &'static str| -> Criterion<'_> {
        Box::new(move || match summary {
            Ok(s) => suite_line(s, name),
            Err(e) => Err(e.to_string()),
        })
    };
    let criteria: Vec<(&str, Criterion<'_>)> = vec![
        ("two-good market end to end", Box::new(two_goods_end_to_end)),
        ("one-good budget-sum price", Box::new(one_good_budget_sum)),
        ("concave single-good monopoly", Box::new(concave_monopoly)),
        ("feasible-region geometry", Box::new(region_geometry)),
        ("meet closure", suites("meet-closure")),
        ("revenue dominance", suites("revenue-dominance")),
        ("equilibrium iff efficient", suites("ce-efficiency")),
        (
            "cross-method agreement",
            Box::new(move || match summary {
                Ok(s) => cross_method_with_fixtures(s),
                Err(e) => Err(e.to_string()),
            }),
        ),
        ("arctic bid reduction", Box::new(arctic_reduction)),
        ("linear monopoly coincidence", Box::new(linear_monopoly)),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS  {:>2}  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2}  {name}: {detail}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed in {:?}",
        criteria.len() - failed,
        criteria.len(),
        started.elapsed()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
