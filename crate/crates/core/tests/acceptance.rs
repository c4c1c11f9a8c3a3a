//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;

use common::{bin_path, cat, num, row, schema};
use ensy::baselines::{smote_nc_traced, SmoteNcConfig};
use ensy::bench::{self, BenchConfig, BenchResult, MINORITY};
use ensy::catsampler::EmpiricalCdf;
use ensy::data::{BoundPolicy, Dataset, Value};
use ensy::gmm::{fit_em, EmConfig, GaussianComponent, GaussianMixture};
use ensy::metrics::{confusion, f1_score, report};
use ensy::pipeline::{balance_plan, run_ensy, AugmentPlan};
use ensy::seed;
use ensy::validator::ClassifierSpec;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_mixture_sample(rng: &mut impl Rng) -> Vec<f64> {
    let k = rng.random_range(1..=4);
    let comps: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random_range(-10.0..10.0), rng.random_range(0.1..3.0)))
        .collect();
    let n = rng.random_range(20..300);
    (0..n)
        .map(|_| {
            let (m, s) = comps[rng.random_range(0..k)];
            // sum of uniforms, roughly normal
            let z: f64 = (0..6).map(|_| rng.random_range(-1.0..1.0)).sum::<f64>() / 2.0_f64.sqrt();
            m + s * z
        })
        .collect()
}

fn gmm_correctness() -> Check {
    let mut rng = seed::rng(2024, &[seed::text_key("acceptance-gmm")]);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let xs = random_mixture_sample(&mut rng);
        let k = 1 + case % 5;
        let cfg = EmConfig {
            restarts: 1,
            seed: case as u64,
            ..EmConfig::default()
        };
        let m = fit_em(&xs, k, &cfg).map_err(|e| e.to_string())?;
        for w in m.info().trace.windows(2) {
            worst = worst.max(w[0] - w[1]);
            ensure(
                w[1] >= w[0] - 1e-8,
                format!("case {case}: log-likelihood fell {} -> {}", w[0], w[1]),
            )?;
        }
    }

    let xs = random_mixture_sample(&mut rng);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let one = fit_em(&xs, 1, &EmConfig::default()).map_err(|e| e.to_string())?;
    let c = one.components()[0];
    ensure(
        (c.mean - mean).abs() <= 1e-9,
        format!("K=1 mean {} vs {}", c.mean, mean),
    )?;
    ensure(
        (c.variance - var).abs() <= 1e-9,
        format!("K=1 variance {} vs {}", c.variance, var),
    )?;

    let m = fit_em(&xs, 3, &EmConfig::default()).map_err(|e| e.to_string())?;
    let lo = m
        .components()
        .iter()
        .map(|c| c.mean - 15.0 * c.variance.sqrt())
        .fold(f64::INFINITY, f64::min);
    let hi = m
        .components()
        .iter()
        .map(|c| c.mean + 15.0 * c.variance.sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    let steps = 200_000;
    let h = (hi - lo) / steps as f64;
    let mut s = m.pdf(lo) + m.pdf(hi);
    for i in 1..steps {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * m.pdf(lo + i as f64 * h);
    }
    let integral = s * h / 3.0;
    ensure(
        (integral - 1.0).abs() <= 1e-6,
        format!("pdf integrates to {integral}"),
    )?;
    Ok(format!(
        "100 EM traces monotone (largest drop {worst:.1e}); K=1 moments exact; pdf integral {integral:.9}"
    ))
}

fn mixture_recovery() -> Check {
    let truth = GaussianMixture::new(vec![
        GaussianComponent {
            weight: 0.35,
            mean: -1.5,
            variance: 0.8,
        },
        GaussianComponent {
            weight: 0.65,
            mean: 2.5,
            variance: 1.2,
        },
    ])
    .map_err(|e| e.to_string())?;
    let xs = truth
        .sample(5000, None, BoundPolicy::None, 99)
        .map_err(|e| e.to_string())?;
    let fit = fit_em(&xs, 2, &EmConfig::default().with_seed(7)).map_err(|e| e.to_string())?;
    let mut got = fit.components().to_vec();
    got.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    let mut detail = Vec::new();
    for (g, t) in got.iter().zip(truth.components()) {
        let (dm, dw) = ((g.mean - t.mean).abs(), (g.weight - t.weight).abs());
        ensure(
            dm <= 0.15 && dw <= 0.05,
            format!("component {t:?} recovered as {g:?}"),
        )?;
        detail.push(format!("mean err {dm:.3}, weight err {dw:.3}"));
    }
    Ok(detail.join("; "))
}

fn categorical_sampler() -> Check {
    let d = EmpiricalCdf::from_probabilities(
        vec!["a".into(), "b".into(), "c".into()],
        vec![0.5, 0.3, 0.2],
    )
    .map_err(|e| e.to_string())?;
    let draws = d.sample(100_000, 31);
    let mut worst = 0.0f64;
    for (c, p) in ["a", "b", "c"].iter().zip([0.5, 0.3, 0.2]) {
        let f = draws.iter().filter(|x| x == c).count() as f64 / draws.len() as f64;
        worst = worst.max((f - p).abs());
        ensure((f - p).abs() <= 0.01, format!("{c}: frequency {f} vs {p}"))?;
    }
    let cdf = d.cdf().to_vec();
    let next = |x: f64| f64::from_bits(x.to_bits() + 1);
    let injected = [
        (1e-12, "a"),
        (0.25, "a"),
        (cdf[0], "a"),
        (next(cdf[0]), "b"),
        (0.6, "b"),
        (cdf[1], "b"),
        (next(cdf[1]), "c"),
        (0.95, "c"),
        (cdf[2], "c"),
    ];
    let got = d.map_uniforms(injected.iter().map(|(r, _)| *r));
    for ((r, want), g) in injected.iter().zip(&got) {
        ensure(g == want, format!("R = {r}: got {g}, expected {want}"))?;
    }
    let fitted = EmpiricalCdf::fit(&["x", "y", "x", "z"]).map_err(|e| e.to_string())?;
    let got = fitted.map_uniforms([0.5, 0.5000001, 0.75, 0.7500001, 1.0]);
    ensure(
        got == ["x", "y", "y", "z", "z"],
        format!("fitted mapping {got:?}"),
    )?;
    Ok(format!(
        "max frequency error {worst:.4}; {} injected R values mapped exactly",
        injected.len() + 5
    ))
}

/// Two-class mixed data where class `a` is a compact cluster near `b`.
fn mixed_demo(seed_: u64) -> Dataset {
    let mut rng = seed::rng(seed_, &[seed::text_key("acceptance-mixed")]);
    let mut rows = Vec::new();
    for i in 0..400 {
        let (label, cx, cats) = if i < 40 {
            ("a", 1.5, ["u", "v", "v"])
        } else {
            ("b", 0.0, ["u", "w", "v"])
        };
        let spread = if label == "a" { 0.6 } else { 1.5 };
        let x = cx + spread * rng.random_range(-1.0..1.0);
        let y = cx + spread * rng.random_range(-1.0..1.0);
        let c = cats[rng.random_range(0..3)];
        rows.push(row(
            vec![Value::Num(x), Value::Num(y), Value::Cat(c.into())],
            label,
        ));
    }
    Dataset::new(
        schema(vec![num("x"), num("y"), cat("c")], &["a", "b"]),
        rows,
    )
    .unwrap()
}

fn validator_filter(bench_runs: &[BenchResult]) -> Check {
    let mut checked = 0usize;
    let mut runs = 0usize;
    for s in 1..=4u64 {
        let d = mixed_demo(s);
        for vspec in [
            ClassifierSpec::knn(5),
            ClassifierSpec::forest(20, 6, 1).with_seed(s),
        ] {
            let plan = AugmentPlan {
                seed: s,
                ..balance_plan(&d)
            };
            let out = run_ensy(&d, &plan, &EmConfig::default().with_seed(s), &vspec)
                .map_err(|e| e.to_string())?;
            runs += 1;
            for r in &out.augmented.rows()[d.len()..] {
                let p = out
                    .validator
                    .predict(&r.values)
                    .map_err(|e| e.to_string())?;
                ensure(
                    p == r.label,
                    format!(
                        "appended {:?} labelled {} but validator says {p}",
                        r.values, r.label
                    ),
                )?;
                checked += 1;
            }
        }
    }
    for b in bench_runs {
        let ensy = &b.augmented.iter().find(|(m, _)| m == "ensy").unwrap().1;
        let cfg = BenchConfig::default();
        let vspec = cfg
            .validator
            .with_seed(seed::derive(b.seed, &[seed::text_key("validator")]));
        let v = ensy::validator::train(&vspec, &b.train).map_err(|e| e.to_string())?;
        runs += 1;
        for r in &ensy.rows()[b.train.len()..] {
            let p = v.predict(&r.values).map_err(|e| e.to_string())?;
            ensure(
                p == r.label,
                format!("bench seed {}: appended row rejected by validator", b.seed),
            )?;
            checked += 1;
        }
    }
    ensure(checked > 0, "no synthetic rows were produced")?;
    Ok(format!(
        "{checked} appended rows across {runs} runs, all validator-consistent"
    ))
}

fn expected_mode(neighbors: &[&str], own: &str) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for n in neighbors {
        *counts.entry(n).or_default() += 1;
    }
    let top = *counts.values().max().unwrap();
    let tied: Vec<&str> = counts
        .iter()
        .filter(|(_, c)| **c == top)
        .map(|(k, _)| *k)
        .collect();
    if tied.contains(&own) {
        own.to_string()
    } else {
        tied[0].to_string()
    }
}

fn smote_geometry() -> Check {
    let mut produced = 0usize;
    let mut violations = 0usize;
    for s in 0..5u64 {
        let d = mixed_demo(100 + s);
        let plan = AugmentPlan::new(vec![("a".into(), 2000), ("b".into(), 0)], s);
        let (out, trace) = smote_nc_traced(&d, &plan, &SmoteNcConfig { k: 5, seed: s })
            .map_err(|e| e.to_string())?;
        for (synthetic, t) in out.rows()[d.len()..].iter().zip(&trace) {
            produced += 1;
            let seed_row = &d.rows()[t.seed_row].values;
            let nb = &d.rows()[t.neighbor_row].values;
            for j in 0..2 {
                let (x, a, b) = (
                    synthetic.values[j].as_num().unwrap(),
                    seed_row[j].as_num().unwrap(),
                    nb[j].as_num().unwrap(),
                );
                if x < a.min(b) || x > a.max(b) {
                    violations += 1;
                }
            }
            let pool: Vec<&str> = t
                .neighbors
                .iter()
                .map(|&i| d.rows()[i].values[2].as_cat().unwrap())
                .collect();
            let want = expected_mode(&pool, seed_row[2].as_cat().unwrap());
            if synthetic.values[2].as_cat() != Some(want.as_str()) {
                violations += 1;
            }
        }
    }
    ensure(
        produced == 10_000,
        format!("expected 10000 synthetic rows, got {produced}"),
    )?;
    ensure(violations == 0, format!("{violations} violations"))?;
    Ok(format!("{produced} synthetic rows, 0 violations"))
}

fn metrics_oracle() -> Check {
    let classes: Vec<String> = ["p", "q", "r"].iter().map(|s| s.to_string()).collect();
    let mut rng = seed::rng(6, &[seed::text_key("acceptance-metrics")]);
    for case in 0..1000 {
        let n = rng.random_range(1..25);
        let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let names = |v: &[usize]| v.iter().map(|&i| classes[i].clone()).collect::<Vec<_>>();
        let r = report(&confusion(&names(&t), &names(&p), &classes).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        for (ci, c) in classes.iter().enumerate() {
            let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
            for (a, b) in t.iter().zip(&p) {
                match (*a == ci, *b == ci) {
                    (true, true) => tp += 1.0,
                    (false, true) => fp += 1.0,
                    (true, false) => fn_ += 1.0,
                    _ => {}
                }
            }
            let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let rec = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            let f1 = if prec + rec > 0.0 {
                2.0 * prec * rec / (prec + rec)
            } else {
                0.0
            };
            let m = &r.classes[c];
            ensure(
                m.precision == prec && m.recall == rec && m.f1 == f1,
                format!("case {case}, class {c}: {m:?} vs ({prec}, {rec}, {f1})"),
            )?;
        }
    }

    let f = f1_score(0.64, 0.07);
    ensure(
        (f - 2.0 * 0.64 * 0.07 / 0.71).abs() < 1e-15,
        format!("F1(0.64, 0.07) = {f}"),
    )?;
    // Precision and recall quoted to two decimals are themselves rounded.
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=100 {
        for j in 0..=100 {
            let v = f1_score(
                0.635 + 0.01 * i as f64 / 100.0,
                0.065 + 0.01 * j as f64 / 100.0,
            );
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let truncated = (f * 100.0).floor() / 100.0;
    ensure(
        truncated == 0.12,
        format!("two-decimal truncation gives {truncated}"),
    )?;
    ensure(
        lo <= 0.125 && hi >= 0.115,
        format!("0.12 not reachable from rounded inputs: [{lo}, {hi}]"),
    )?;
    Ok(format!(
        "1000 random cases exact; F1(0.64, 0.07) = {f:.5}, truncates to 0.12 (half-up rounding gives {f:.2}); rounded inputs admit F1 in [{lo:.4}, {hi:.4}]"
    ))
}

fn run_bench_seeds() -> Result<(Vec<BenchResult>, Duration), String> {
    let started = Instant::now();
    let runs = bench::DEFAULT_SEEDS
        .iter()
        .map(|&s| {
            bench::run(&BenchConfig {
                seed: s,
                ..BenchConfig::default()
            })
            .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((runs, started.elapsed()))
}

fn qualitative_claim(runs: &[BenchResult]) -> Check {
    let forest = ClassifierSpec::forest(50, 8, 1).to_string();
    let mut wins = 0;
    let mut detail = Vec::new();
    for b in runs {
        let raw = b.minority_f1("raw", &forest).ok_or("missing raw row")?;
        let ensy = b.minority_f1("ensy", &forest).ok_or("missing ensy row")?;
        if ensy >= raw {
            wins += 1;
        }
        detail.push(format!("seed {}: {raw:.3} -> {ensy:.3}", b.seed));
    }
    let summary = format!(
        "ENSY >= raw minority F1 in {wins}/5 seeds ({})",
        detail.join(", ")
    );
    ensure(wins >= 4, summary.clone())?;
    Ok(summary)
}

fn run_cli(args: &[&str]) -> Result<i32, String> {
    let out = Command::new(bin_path())
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    out.status
        .code()
        .ok_or_else(|| "terminated by signal".to_string())
}

fn dir_bytes(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        files.insert(
            entry.file_name().to_string_lossy().into_owned(),
            fs::read(entry.path()).map_err(|e| e.to_string())?,
        );
    }
    Ok(files)
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = tmp.path();
    let data = mixed_demo(8);
    data.write_csv(base.join("data.csv"))
        .map_err(|e| e.to_string())?;
    fs::write(base.join("schema.toml"), data.schema().to_toml_string())
        .map_err(|e| e.to_string())?;
    let mut compared = 0;
    for method in ["ensy", "ros", "smote-nc"] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = base.join(format!("{method}-{run}"));
            let code = run_cli(&[
                "augment",
                "--data",
                base.join("data.csv").to_str().unwrap(),
                "--schema",
                base.join("schema.toml").to_str().unwrap(),
                "--method",
                method,
                "--seed",
                "42",
                "--classifier",
                "forest:trees=10,depth=5",
                "--out",
                out.to_str().unwrap(),
            ])?;
            ensure(
                code == 0 || code == 3,
                format!("augment {method} exited {code}"),
            )?;
            outputs.push(dir_bytes(&out)?);
        }
        ensure(
            outputs[0] == outputs[1],
            format!("augment {method} outputs differ between runs"),
        )?;
        compared += outputs[0].len();
    }
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = base.join(format!("bench-{run}"));
        let code = run_cli(&[
            "bench",
            "--seed",
            "3",
            "--n",
            "1000",
            "--out",
            out.to_str().unwrap(),
        ])?;
        ensure(code == 0, format!("bench exited {code}"))?;
        outputs.push(dir_bytes(&out)?);
    }
    ensure(
        outputs[0] == outputs[1],
        "bench outputs differ between runs",
    )?;
    compared += outputs[0].len();
    Ok(format!(
        "{compared} output files byte-identical across two runs"
    ))
}

fn range_escape(runs: &[BenchResult]) -> Check {
    let mut detail = Vec::new();
    let mut ensy_escaped = 0;
    for b in runs {
        ensure(
            b.smote_out_of_range == 0,
            format!(
                "seed {}: {} SMOTE-NC values outside the minority range",
                b.seed, b.smote_out_of_range
            ),
        )?;
        let recount = bench::out_of_range(
            &b.train,
            &b.augmented.iter().find(|(m, _)| m == "smote-nc").unwrap().1,
        );
        ensure(
            recount == 0,
            format!("seed {}: recount found {recount} escapes", b.seed),
        )?;
        if b.ensy_out_of_range > 0 {
            ensy_escaped += 1;
        }
        detail.push(format!("seed {}: ensy {}", b.seed, b.ensy_out_of_range));
    }
    let minority_rows: usize = runs.iter().map(|b| b.train.rows_of(MINORITY).count()).sum();
    Ok(format!(
        "SMOTE-NC 0 escapes; ENSY escaped the minority range in {ensy_escaped}/5 seeds ({}; {minority_rows} minority rows total)",
        detail.join(", ")
    ))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut line =
        |n: usize, name: &str, limit: Option<Duration>, elapsed: Duration, result: Check| {
            let over = limit.is_some_and(|l| elapsed > l);
            let (status, detail) = match (&result, over) {
                (Ok(d), false) => ("PASS", d.clone()),
                (Ok(d), true) => ("FAIL", format!("over time limit {:?}: {d}", limit.unwrap())),
                (Err(e), _) => ("FAIL", e.clone()),
            };
            if status == "FAIL" {
                failed += 1;
            }
            println!(
                "criterion {n} [{status}] {name} ({:.2}s): {detail}",
                elapsed.as_secs_f64()
            );
        };
    let timed = |f: &dyn Fn() -> Check| {
        let t = Instant::now();
        let r = f();
        (r, t.elapsed())
    };

    let (r, t) = timed(&gmm_correctness);
    line(1, "gmm correctness", Some(Duration::from_secs(10)), t, r);
    let (r, t) = timed(&mixture_recovery);
    line(2, "mixture recovery", Some(Duration::from_secs(5)), t, r);
    let (r, t) = timed(&categorical_sampler);
    line(3, "categorical sampler", Some(Duration::from_secs(2)), t, r);

    let bench_runs = run_bench_seeds();
    let runs: &[BenchResult] = match &bench_runs {
        Ok((runs, _)) => runs,
        Err(_) => &[],
    };
    let (r, t) = timed(&|| validator_filter(runs));
    line(4, "validator filter invariant", None, t, r);
    let (r, t) = timed(&smote_geometry);
    line(5, "smote-nc geometry", None, t, r);
    let (r, t) = timed(&metrics_oracle);
    line(6, "metrics oracle", None, t, r);
    match &bench_runs {
        Ok((runs, elapsed)) => {
            let r = qualitative_claim(runs);
            line(
                7,
                "ensy vs raw minority f1",
                Some(Duration::from_secs(60)),
                *elapsed,
                r,
            );
        }
        Err(e) => line(
            7,
            "ensy vs raw minority f1",
            None,
            Duration::ZERO,
            Err(e.clone()),
        ),
    }
    let (r, t) = timed(&determinism);
    line(8, "determinism", None, t, r);
    let (r, t) = timed(&|| range_escape(runs));
    line(9, "range escape contrast", None, t, r);

    if failed == 0 {
        println!("all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
