//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test -p nsdde-cli --test acceptance`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Deserialize;
use serde_json::Value;

use nsdde::model::{example1, example2, Coefficients, ConditionProbeReport};
use nsdde::paths::{BrownianGrid, MeshSpec};
use nsdde::scheme::{simulate_em, simulate_mtem, simulate_with_level};
use nsdde::truncation::{probe_trunc_khasminskii, probe_trunc_lipschitz, TruncatedCoefficients, TruncationPolicy};

const BIN: &str = env!("CARGO_BIN_EXE_nsdde");
const SWEEP_SEED: &str = "20240601";
const PROBE_DELTAS: [f64; 3] = [1e-2, 1e-3, 1e-4];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn nsdde(args: &[&str], out: &Path) -> (i32, String) {
    let output = Command::new(BIN)
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    let code = output.status.code().unwrap_or(-1);
    (code, String::from_utf8_lossy(&output.stderr).into_owned())
}

/// The single run directory created under `out`.
fn run_dir(out: &Path) -> PathBuf {
    let mut dirs: Vec<PathBuf> = fs::read_dir(out).expect("output dir").map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 1, "expected one run directory in {}", out.display());
    dirs.pop().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).expect("artifact exists")).expect("valid JSON")
}

// ---- criterion 1 ----------------------------------------------------------

fn f1(x: f64, y: f64) -> f64 {
    2.0 * x - x * (3.0 * x).exp() + 0.5 * y.sin()
}

fn g1(x: f64, y: f64) -> f64 {
    (x * x * (3.0 * x).exp() / 5.0 + y * y + 1.0).sqrt()
}

fn f2(x: f64, y: f64) -> f64 {
    2.0 * x - x.powi(5) + 0.5 * y.sin()
}

fn g2(x: f64, y: f64) -> f64 {
    x.powi(3) * y / (2.0 * (1.0 + y * y))
}

/// The modified truncated function, evaluated directly.
fn modified(c: fn(f64, f64) -> f64, h: f64, x: f64, y: f64) -> f64 {
    let s = x.abs().max(y.abs());
    if s <= h {
        c(x, y)
    } else {
        s / h * c(h / s * x, h / s * y)
    }
}

fn criterion_1() -> Verdict {
    let mut rng = StdRng::seed_from_u64(1);
    let p1 = example1::<f64>();
    let p2 = example2::<f64>();
    let mut worst = 0.0f64;
    let cases = 100_000;
    for _ in 0..cases {
        let signed = |rng: &mut StdRng, lo: f64, hi: f64| {
            let v = 10f64.powf(rng.random_range(lo..hi));
            if rng.random_bool(0.5) { v } else { -v }
        };
        let h = 10f64.powf(rng.random_range(-0.5..1.7));
        let x = signed(&mut rng, -3.0, 2.0);
        let y = signed(&mut rng, -3.0, 2.0);
        let t1 = TruncatedCoefficients::new(&p1, h);
        let t2 = TruncatedCoefficients::new(&p2, h);
        let pairs = [
            (t1.drift(&[x], &[y])[0], modified(f1, h, x, y)),
            (t1.diffusion(&[x], &[y]).get(0, 0), modified(g1, h, x, y)),
            (t2.drift(&[x], &[y])[0], modified(f2, h, x, y)),
            (t2.diffusion(&[x], &[y]).get(0, 0), modified(g2, h, x, y)),
        ];
        for (got, want) in pairs {
            let dev = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
            worst = worst.max(dev);
        }
    }
    verdict(worst <= 1e-14, format!("{cases} cases x 4 coefficients, max relative deviation {worst:.3e}"))
}

// ---- criteria 2, 3 --------------------------------------------------------

fn policies() -> [(&'static str, nsdde::Problem, TruncationPolicy<f64>); 2] {
    [
        ("example1", example1(), TruncationPolicy::example1(0.5).unwrap()),
        ("example2", example2(), TruncationPolicy::example2(0.9).unwrap()),
    ]
}

type TruncProbe = fn(&nsdde::Problem, &TruncationPolicy<f64>, f64, usize, u64) -> nsdde::Result<ConditionProbeReport<f64>>;

fn probe_criterion(probe: TruncProbe) -> Verdict {
    let mut total = 0;
    let mut parts = Vec::new();
    for (name, problem, policy) in policies() {
        for delta in PROBE_DELTAS {
            let r = probe(&problem, &policy, delta, 10_000, 3).expect("probe runs");
            total += r.violations;
            if r.violations > 0 {
                parts.push(format!(
                    "{name} Δ={delta:e}: {} violations, worst margin {:.3e} at {:?}",
                    r.violations,
                    r.worst_margin,
                    r.witness.as_ref().map(|w| (w.x[0], w.y[0]))
                ));
            }
        }
    }
    let detail = if parts.is_empty() {
        "zero violations on both examples".to_string()
    } else {
        parts.join("; ")
    };
    verdict(total == 0, detail)
}

// ---- criterion 4 ----------------------------------------------------------

fn criterion_4() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mut parts = Vec::new();
    let mut ok = true;

    for (label, args) in [
        ("example1", vec!["check", "--problem", "example1", "--radius", "5", "--samples", "10000", "--seed", "7"]),
        ("example2", vec!["check", "--problem", "example2", "--radius", "5", "--epsilon", "0.9", "--q", "4"]),
    ] {
        let out = tmp.path().join(label);
        let (code, _) = nsdde(&args, &out);
        let summary = read_json(&run_dir(&out).join("summary.json"));
        let failing: Vec<String> = summary["conditions"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| !c["passed"].as_bool().unwrap())
            .map(|c| c["condition"].as_str().unwrap().to_string())
            .collect();
        let adm = summary["admissibility_passed"].as_bool().unwrap();
        ok &= code == 0;
        parts.push(format!(
            "{label} exit {code} (failing: {}{})",
            if failing.is_empty() { "none".to_string() } else { failing.join(",") },
            if adm { "" } else { ", admissibility" }
        ));
    }

    let out = tmp.path().join("flag");
    let (code, _) = nsdde(
        &["check", "--problem", "example2", "--epsilon", "0.5", "--q", "4", "--deltas", "1e-6"],
        &out,
    );
    let rows = read_json(&run_dir(&out).join("admissibility.json"))["rows"].clone();
    let row = &rows[0];
    let flagged = !row["rate_condition_holds"].as_bool().unwrap();
    ok &= flagged && code != 0;
    parts.push(format!(
        "example2 ε=0.5 Δ=1e-6: rate condition {} (h = {:.4}, threshold = {:.3e}), exit {code}",
        if flagged { "flagged" } else { "not flagged" },
        row["h"].as_f64().unwrap(),
        row["rate_threshold"].as_f64().unwrap()
    ));
    verdict(ok, parts.join("; "))
}

// ---- criterion 5 ----------------------------------------------------------

fn criterion_5() -> Verdict {
    let grid: Vec<f64> = (0..20).map(|i| 10f64.powf(-8.0 + 6.0 * i as f64 / 19.0)).collect();

    let eps2 = 0.9;
    let p2 = TruncationPolicy::<f64>::example2(eps2).unwrap();
    let mut worst2 = 0.0f64;
    for &d in grid.iter().filter(|&&d| d <= p2.delta_star()) {
        let h = p2.h(d).unwrap();
        let l = 5.0 * h.powi(4) + 4.0;
        let lhs = l.powi(4) * d;
        let rhs = d.powf(1.0 - eps2);
        worst2 = worst2.max(((lhs - rhs) / rhs).abs());
    }

    let eps1 = 0.5;
    let p1 = TruncationPolicy::<f64>::example1(eps1).unwrap();
    let l_of = |x: f64| {
        let lx = 3.0 * (1.0 + x + x * x) * x.exp();
        1.0 / (x.powf(1.0 - eps1) * lx.powi(4))
    };
    let mut worst1 = 0.0f64;
    let mut monotone = true;
    let mut prev: Option<f64> = None;
    for &d in &grid {
        let h = p1.h(d).unwrap();
        worst1 = worst1.max(((l_of(h) - d) / d).abs());
        if let Some(p) = prev {
            // grid ascends in Δ, so h must strictly descend
            monotone &= h < p;
        }
        prev = Some(h);
    }
    verdict(
        worst2 <= 1e-9 && worst1 <= 1e-9 && monotone,
        format!(
            "example2 max rel |L⁴Δ - Δ^(1-ε)| = {worst2:.3e}; example1 inverse residual {worst1:.3e}, strictly monotone: {monotone}"
        ),
    )
}

// ---- criterion 6 ----------------------------------------------------------

fn criterion_6() -> Verdict {
    let factors = [8usize, 16, 32, 64, 128];
    let mesh = MeshSpec::new(1.0, 1024, 2.0).unwrap();
    let mut mismatches = 0;
    let mut checks = 0;
    for path in 0..100 {
        let grid = BrownianGrid::generate(99, path, mesh, 1).unwrap();
        let fine = grid.increments();
        let fine_values = fine.to_values();
        for &f in &factors {
            let coarse = grid.coarsen(f).unwrap();
            let sums: Vec<i64> = fine.ticks().chunks(f).map(|c| c.iter().sum()).collect();
            let value_sums: Vec<f64> = fine_values.chunks(f).map(|c| c.iter().sum()).collect();
            checks += 2;
            mismatches += usize::from(coarse.ticks() != sums.as_slice());
            mismatches += usize::from(
                coarse.to_values().iter().map(|v| v.to_bits()).ne(value_sums.iter().map(|v| v.to_bits())),
            );
            for &g in &factors {
                if 1024 % (f * g) != 0 {
                    continue;
                }
                let nested = coarse.coarsen(g).unwrap();
                let direct = grid.coarsen(f * g).unwrap();
                checks += 1;
                mismatches += usize::from(nested.ticks() != direct.ticks());
            }
        }
    }
    verdict(mismatches == 0, format!("100 paths, {checks} bitwise comparisons, {mismatches} mismatches"))
}

// ---- criterion 7 ----------------------------------------------------------

fn criterion_7() -> Verdict {
    let problem = example1::<f64>().with_constant_initial(&[0.5]).unwrap();
    let policy = TruncationPolicy::<f64>::example1(0.5).unwrap();
    let mesh = MeshSpec::new(1.0, 64, 1.0).unwrap();
    let h_star = policy.h(policy.delta_star()).unwrap();
    let paths = 200;
    let (mut qualifying, mut mismatched) = (0, 0);
    let (mut supp_qualifying, mut supp_mismatched) = (0, 0);
    for path in 0..paths {
        let grid = BrownianGrid::generate(7, path, mesh, 1).unwrap();
        let inc = grid.increments();
        let em = simulate_em(&problem, inc).ok();
        let same = |states: &[f64]| {
            em.as_ref()
                .is_some_and(|e| e.states().iter().map(|v| v.to_bits()).eq(states.iter().map(|v| v.to_bits())))
        };
        let mtem = simulate_mtem(&problem, &policy, inc).unwrap();
        if mtem.truncation_activations() == 0 {
            qualifying += 1;
            mismatched += usize::from(!same(mtem.states()));
        }
        let level = simulate_with_level(&problem, h_star, inc).unwrap();
        if level.truncation_activations() == 0 {
            supp_qualifying += 1;
            supp_mismatched += usize::from(!same(level.states()));
        }
    }
    let h = policy.h(mesh.step()).unwrap();
    verdict(
        mismatched == 0 && supp_mismatched == 0,
        format!(
            "h(1/64) = {h:.3}: {qualifying}/{paths} paths inactive, {mismatched} differ from EM \
             (90% expectation {}met); at h(Δ*) = {h_star:.3}: {supp_qualifying}/{paths} inactive, {supp_mismatched} differ",
            if qualifying * 10 >= paths as usize * 9 { "" } else { "not " }
        ),
    )
}

// ---- criteria 8, 9, 11 ----------------------------------------------------

#[derive(Debug, Deserialize)]
struct ErrorCsvRow {
    q: f64,
    estimator: String,
    m: usize,
    delta: f64,
    error_q: f64,
    std_error: f64,
}

struct ConvergeRun {
    dir: PathBuf,
    code: i32,
    stderr: String,
    elapsed: Duration,
}

fn converge(out: &Path, workers: &str) -> ConvergeRun {
    let start = Instant::now();
    let (code, stderr) = nsdde(
        &[
            "converge", "--problem", "example2", "--epsilon", "0.9", "--horizon", "2", "--q", "3,4", "--m-list",
            "8,16,32,64,128", "--m-ref", "1024", "--paths", "2000", "--seed", SWEEP_SEED, "--workers", workers,
        ],
        out,
    );
    ConvergeRun { dir: run_dir(out), code, stderr, elapsed: start.elapsed() }
}

fn rows(run: &ConvergeRun) -> Vec<ErrorCsvRow> {
    let mut r = csv::Reader::from_path(run.dir.join("errors.csv")).expect("errors.csv");
    r.deserialize().map(|row| row.expect("well-formed row")).collect()
}

fn slope(summary: &Value, q: f64, estimator: &str) -> Option<f64> {
    summary["fitted_orders"]
        .as_array()?
        .iter()
        .find(|f| f["q"].as_f64() == Some(q) && f["estimator"].as_str() == Some(estimator))
        .and_then(|f| f["slope"].as_f64())
}

fn criterion_8(run: &ConvergeRun) -> Verdict {
    if run.code != 0 {
        return verdict(false, format!("converge exited {}: {}", run.code, run.stderr.trim()));
    }
    let summary = read_json(&run.dir.join("summary.json"));
    let order = slope(&summary, 4.0, "fixedT_x");
    let mut series: Vec<ErrorCsvRow> = rows(run).into_iter().filter(|r| r.q == 4.0 && r.estimator == "fixedT_x").collect();
    series.sort_by(|a, b| b.delta.partial_cmp(&a.delta).unwrap());
    // compared on the q-th moment, where the standard errors live
    let moment = |r: &ErrorCsvRow| r.error_q.powf(r.q);
    let monotone = series.windows(2).all(|w| {
        let slack = 2.0 * (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        moment(&w[1]) <= moment(&w[0]) + slack
    });
    let errors: Vec<String> = series.iter().map(|r| format!("m={}:{:.4}", r.m, r.error_q)).collect();
    let in_band = order.is_some_and(|o| (0.35..=0.70).contains(&o));
    verdict(
        in_band && monotone,
        format!(
            "fixedT order (q=4) {} in [0.35, 0.70]; errors {}; decreasing within 2 SE: {monotone}; {:.1}s",
            order.map_or("n/a".into(), |o| format!("{o:.3}")),
            errors.join(" "),
            run.elapsed.as_secs_f64()
        ),
    )
}

fn criterion_9(run: &ConvergeRun) -> Verdict {
    if run.code != 0 {
        return verdict(false, format!("converge exited {}", run.code));
    }
    let summary = read_json(&run.dir.join("summary.json"));
    let sup4 = slope(&summary, 4.0, "sup_x");
    let sup3 = slope(&summary, 3.0, "sup_x");
    let bar3 = slope(&summary, 3.0, "sup_xbar");
    let band = sup4.is_some_and(|o| (0.30..=0.70).contains(&o));
    let gap = match (sup3, bar3) {
        (Some(a), Some(b)) => b <= a - 0.05,
        _ => false,
    };
    let fmt = |o: Option<f64>| o.map_or("n/a".to_string(), |o| format!("{o:.3}"));
    verdict(
        band && gap,
        format!(
            "sup_x order (q=4) {} in [0.30, 0.70]: {band}; q=3 sup_xbar {} vs sup_x {}, gap >= 0.05: {gap}",
            fmt(sup4),
            fmt(bar3),
            fmt(sup3)
        ),
    )
}

fn criterion_11(a: &ConvergeRun, b: &ConvergeRun) -> Verdict {
    if a.code != 0 || b.code != 0 {
        return verdict(false, format!("converge exited {} / {}", a.code, b.code));
    }
    let mut same = a.dir.file_name() == b.dir.file_name();
    for f in ["errors.csv", "summary.json", "config.toml"] {
        same &= fs::read(a.dir.join(f)).unwrap() == fs::read(b.dir.join(f)).unwrap();
    }
    verdict(same, format!("workers 1 vs 4: artifacts byte-identical: {same}"))
}

// ---- criterion 10 ---------------------------------------------------------

fn criterion_10() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("moments");
    let (code, stderr) = nsdde(
        &[
            "moments", "--problem", "example2", "--epsilon", "0.9", "--p-bar", "5", "--horizon", "2", "--m-list",
            "8,16,32,64,128", "--m-ref", "1024", "--paths", "2000", "--seed", SWEEP_SEED,
        ],
        &out,
    );
    let (ratio, divergent) = if code == 0 {
        let s = read_json(&run_dir(&out).join("summary.json"));
        (s["ratio"].as_f64().unwrap_or(f64::NAN), s["divergent_paths_total"].as_u64().unwrap_or(u64::MAX))
    } else {
        (f64::NAN, u64::MAX)
    };

    let em_out = tmp.path().join("em");
    let (em_code, _) = nsdde(&["simulate", "--problem", "example2", "--scheme", "em", "--m", "2", "--x0", "3", "--horizon", "10"], &em_out);

    let ok = code == 0 && ratio <= 3.0 && divergent == 0 && em_code == 5;
    let detail = if code == 0 {
        format!("max/min E sup|x|^5 = {ratio:.4e} (<= 3), MTEM divergent paths {divergent}, EM baseline exit {em_code}")
    } else {
        format!("moments exited {code}: {}; EM baseline exit {em_code}", stderr.trim())
    };
    verdict(ok, detail)
}

fn main() {
    let mut failed = 0;
    let mut report = |n: u32, limit: Option<Duration>, run: &dyn Fn() -> Verdict| {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let passed = v.passed && in_time;
        if !passed {
            failed += 1;
        }
        let timing = match limit {
            Some(l) => format!(" [{:.2}s, limit {}s]", elapsed.as_secs_f64(), l.as_secs()),
            None => format!(" [{:.2}s]", elapsed.as_secs_f64()),
        };
        println!("criterion {n:>2}: {} {}{timing}", if passed { "PASS" } else { "FAIL" }, v.detail);
    };

    report(1, Some(Duration::from_secs(5)), &criterion_1);
    report(2, Some(Duration::from_secs(30)), &|| probe_criterion(probe_trunc_lipschitz));
    report(3, Some(Duration::from_secs(30)), &|| probe_criterion(probe_trunc_khasminskii));
    report(4, Some(Duration::from_secs(60)), &criterion_4);
    report(5, Some(Duration::from_secs(5)), &criterion_5);
    report(6, Some(Duration::from_secs(10)), &criterion_6);
    report(7, Some(Duration::from_secs(30)), &criterion_7);

    let tmp = tempfile::tempdir().unwrap();
    let one = converge(&tmp.path().join("w1"), "1");
    let four = converge(&tmp.path().join("w4"), "4");
    report(8, None, &|| criterion_8(&one));
    report(9, None, &|| criterion_9(&one));
    report(10, None, &criterion_10);
    report(11, None, &|| criterion_11(&one, &four));

    println!("acceptance: {} of 11 criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
