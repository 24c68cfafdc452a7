//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the report is always visible. Pass criterion
//! numbers as arguments to run a subset, e.g. `cargo test --test acceptance -- 3 7`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use sphtest::augment::{spherical_variant, RngStream};
use sphtest::calibrate::{null_table, runs_law, sign_law};
use sphtest::generators::{gen_equicorr_normal, generate};
use sphtest::harness::{
    estimate_power, oracle_compare, run_test, zero_difference_fractions, Execution, ExperimentConfig, NExpr,
    OracleConfig,
};
use sphtest::{CenterMode, DiagRecipe, GeneratorSpec, PowerEstimate, StatKind, TestConfig};

const DIMS: [usize; 10] = [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024];

fn ex31() -> GeneratorSpec {
    GeneratorSpec::EquicorrNormal { a: 0.4, b: 0.6, location: 0.0 }
}
fn ex32() -> GeneratorSpec {
    GeneratorSpec::DiagNormal { recipe: DiagRecipe::HalfHalf { low: 1.0, high: 2.0 } }
}
fn ex33() -> GeneratorSpec {
    GeneratorSpec::DiagNormal { recipe: DiagRecipe::Spike { gamma: 1.0 } }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn power(label: &str, spec: GeneratorSpec, n: usize, dims: &[usize], reps: usize, tests: &[StatKind], seed: u64, test: TestConfig) -> Vec<PowerEstimate> {
    let mut cfg = ExperimentConfig::new(label, spec, NExpr::fixed(n), dims.to_vec());
    cfg.reps = reps;
    cfg.tests = tests.to_vec();
    cfg.test = test;
    cfg.seed = seed;
    estimate_power(&cfg, Execution::Parallel).expect("power study")
}

fn rate(est: &[PowerEstimate], test: StatKind, d: usize) -> f64 {
    est.iter().find(|e| e.test == test && e.d == d).expect("estimate").rejection_rate
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

/// Chi-square goodness of fit of integer counts to `pmf`, pooling adjacent
/// cells until each expected count is at least 5.
fn chi2_gof(samples: &[usize], pmf: &[f64]) -> (f64, f64) {
    let total = samples.len() as f64;
    let mut obs = vec![0.0; pmf.len()];
    for &s in samples {
        obs[s] += 1.0;
    }
    let (mut cells, mut acc_e, mut acc_o) = (Vec::new(), 0.0, 0.0);
    for (o, p) in obs.iter().zip(pmf) {
        acc_e += p * total;
        acc_o += o;
        if acc_e >= 5.0 {
            cells.push((acc_o, acc_e));
            acc_e = 0.0;
            acc_o = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += acc_o;
        last.1 += acc_e;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (cells.len() - 1) as f64;
    (stat, ChiSquared::new(df).unwrap().sf(stat))
}

/// Two-sample chi-square homogeneity test on integer samples of equal size.
fn chi2_two_sample(a: &[usize], b: &[usize], support: usize) -> (f64, f64) {
    let mut ca = vec![0.0; support];
    let mut cb = vec![0.0; support];
    a.iter().for_each(|&v| ca[v] += 1.0);
    b.iter().for_each(|&v| cb[v] += 1.0);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut cells = Vec::new();
    let (mut xa, mut xb) = (0.0, 0.0);
    for k in 0..support {
        xa += ca[k];
        xb += cb[k];
        if xa + xb >= 10.0 {
            cells.push((xa, xb));
            xa = 0.0;
            xb = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += xa;
        last.1 += xb;
    }
    let n = na + nb;
    let mut stat = 0.0;
    for (oa, ob) in &cells {
        let col = oa + ob;
        let (ea, eb) = (col * na / n, col * nb / n);
        stat += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    let df = (cells.len() - 1) as f64;
    (stat, ChiSquared::new(df).unwrap().sf(stat))
}

/// Draws `reps` samples from `spec` and returns the (T_S, T_R) values.
fn sample_statistics(spec: &GeneratorSpec, n: usize, d: usize, reps: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let master = RngStream::new(seed);
    let pairs: Vec<(usize, usize)> = sphtest::harness::map_replicates(Execution::Parallel, reps, |rep| {
        let s = master.path(&[d as u64, rep as u64]);
        let data = generate(spec, n, d, &mut s.child(1).rng()).unwrap();
        let cfg = TestConfig::default().with_seed(s.child(2).derive_seed());
        let r = run_test(&data, &cfg).unwrap();
        let ts = r.get(StatKind::Sign).unwrap().value.unwrap() as usize;
        let tr = r.get(StatKind::Runs).unwrap().value.unwrap() as usize;
        (ts, tr)
    });
    pairs.into_iter().unzip()
}

fn criterion_1() -> Outcome {
    let (n, reps) = (50, 2000);
    let settings = [(GeneratorSpec::SphericalNormal, 5usize), (GeneratorSpec::SphericalT { nu: 1.0 }, 512)];
    let mut ok = true;
    let mut parts = Vec::new();
    let mut samples = Vec::new();
    for (spec, d) in &settings {
        let (ts, tr) = sample_statistics(spec, n, *d, reps, 101);
        let (_, p_s) = chi2_gof(&ts, &sign_law(n).pmf);
        let tr0: Vec<usize> = tr.iter().map(|t| t - 1).collect();
        let (_, p_r) = chi2_gof(&tr0, &runs_law(n).pmf);
        ok &= p_s > 0.001 && p_r > 0.001;
        parts.push(format!("d={d}: p(T_S)={p_s:.3} p(T_R)={p_r:.3}"));
        samples.push((ts, tr0));
    }
    let (_, p2s) = chi2_two_sample(&samples[0].0, &samples[1].0, n + 1);
    let (_, p2r) = chi2_two_sample(&samples[0].1, &samples[1].1, n);
    ok &= p2s > 0.001 && p2r > 0.001;
    parts.push(format!("two-sample p(T_S)={p2s:.3} p(T_R)={p2r:.3}"));
    check(ok, parts.join("; "))
}

fn criterion_2() -> Outcome {
    let n = 50;
    let table = null_table(n, 0.05).unwrap();
    let est = power("null", GeneratorSpec::SphericalNormal, n, &[2, 64, 1024], 1000, &[StatKind::Sign, StatKind::Runs], 202, TestConfig::default());
    let mut ok = true;
    let mut parts = Vec::new();
    for (kind, row) in [(StatKind::Sign, &table[0]), (StatKind::Runs, &table[1])] {
        for d in [2, 64, 1024] {
            let r = rate(&est, kind, d);
            ok &= within(r, row.exact_size, 0.015);
            parts.push(format!("{} d={d}: {r:.3}", kind.name()));
        }
        parts.push(format!("(exact size {:.4})", row.exact_size));
    }
    check(ok, parts.join(" "))
}

fn criterion_3() -> Outcome {
    let est = power("3.1", ex31(), 50, &DIMS, 500, &[StatKind::Sign], 303, TestConfig::default());
    let (p2, p8) = (rate(&est, StatKind::Sign, 2), rate(&est, StatKind::Sign, 8));
    let high: Vec<f64> = DIMS.iter().filter(|d| **d >= 32).map(|&d| rate(&est, StatKind::Sign, d)).collect();
    let min_high = high.iter().cloned().fold(1.0, f64::min);
    let runs = power("3.3", ex33(), 50, &[8], 500, &[StatKind::Runs], 304, TestConfig::default());
    let r8 = rate(&runs, StatKind::Runs, 8);
    let ok = within(p2, 0.309, 0.06) && within(p8, 0.955, 0.06) && min_high >= 0.99 && within(r8, 0.805, 0.06);

    // Not part of the verdict: the same designs rejected at T_S >= 31 and
    // T_R <= 20, the inclusive reading of the tabulated 5% cutoffs.
    let frac = |xs: &[usize], f: &dyn Fn(usize) -> bool| xs.iter().filter(|&&x| f(x)).count() as f64 / xs.len() as f64;
    let (ts2, _) = sample_statistics(&ex31(), 50, 2, 500, 3031);
    let (_, tr8) = sample_statistics(&ex33(), 50, 8, 500, 3033);
    let incl = format!(
        "[inclusive 31/20: Ex3.1 d=2 {:.3}, Ex3.3 runs d=8 {:.3}]",
        frac(&ts2, &|t| t >= 31),
        frac(&tr8, &|t| t <= 20)
    );
    check(
        ok,
        format!("Ex3.1 sign d=2 {p2:.3} (0.309), d=8 {p8:.3} (0.955), min d>=32 {min_high:.3} (>=0.99); Ex3.3 runs d=8 {r8:.3} (0.805) {incl}"),
    )
}

fn criterion_4() -> Outcome {
    let tests = [StatKind::Sign, StatKind::DiagSign];
    let e32 = power("3.2", ex32(), 50, &[128], 500, &tests, 404, TestConfig::default());
    let (diag, plain) = (rate(&e32, StatKind::DiagSign, 128), rate(&e32, StatKind::Sign, 128));
    let e31 = power("3.1", ex31(), 50, &DIMS, 500, &[StatKind::DiagSign], 405, TestConfig::default());
    let max31 = DIMS.iter().map(|&d| rate(&e31, StatKind::DiagSign, d)).fold(0.0, f64::max);
    let ok = within(diag, 0.859, 0.06) && plain <= 0.25 && max31 <= 0.08;
    check(
        ok,
        format!("Ex3.2 d=128 diag-sign {diag:.3} (0.859), sign {plain:.3} (<=0.25); Ex3.1 diag-sign max over d {max31:.3} (<=0.08)"),
    )
}

fn criterion_5() -> Outcome {
    let e31 = power("3.1", ex31(), 50, &[8], 500, &[StatKind::ModifiedSign], 505, TestConfig::default());
    let m8 = rate(&e31, StatKind::ModifiedSign, 8);
    let high: Vec<usize> = DIMS.iter().copied().filter(|d| *d >= 16).collect();
    let e33 = power("3.3", ex33(), 50, &high, 500, &[StatKind::ModifiedRuns], 506, TestConfig::default());
    let min_r = high.iter().map(|&d| rate(&e33, StatKind::ModifiedRuns, d)).fold(1.0, f64::min);
    let ok = within(m8, 0.864, 0.06) && min_r >= 0.99;
    check(ok, format!("Ex3.1 modified-sign d=8 {m8:.3} (0.864); Ex3.3 modified-runs min d>=16 {min_r:.3} (>=0.99)"))
}

fn criterion_6() -> Outcome {
    let tests = [StatKind::ModifiedSign, StatKind::ModifiedRuns];
    let e41 = power("4.1", GeneratorSpec::HypercubeUniform, 50, &[64], 500, &tests, 606, TestConfig::default());
    let e42 = power("4.2", GeneratorSpec::IidLaplace, 50, &[64], 500, &tests, 607, TestConfig::default());
    let (r41, s41) = (rate(&e41, StatKind::ModifiedRuns, 64), rate(&e41, StatKind::ModifiedSign, 64));
    let s42 = rate(&e42, StatKind::ModifiedSign, 64);
    let ok = within(r41, 0.848, 0.07) && s41 <= 0.06 && within(s42, 0.651, 0.07);
    check(
        ok,
        format!("Ex4.1 d=64 modified-runs {r41:.3} (0.848), modified-sign {s41:.3} (<=0.06); Ex4.2 d=64 modified-sign {s42:.3} (0.651)"),
    )
}

fn criterion_7() -> Outcome {
    let recs = oracle_compare(&OracleConfig::new(5, vec![3, 3000], 100, 707), Execution::Parallel).unwrap();
    let (s3, r3) = zero_difference_fractions(&recs, 3);
    let (s3000, r3000) = zero_difference_fractions(&recs, 3000);
    check(
        s3000 > s3 && r3000 > r3,
        format!("zero-difference fraction T_S: d=3 {s3:.2}, d=3000 {s3000:.2}; T_R: d=3 {r3:.2}, d=3000 {r3000:.2}"),
    )
}

fn criterion_8() -> Outcome {
    let (d, pairs) = (100usize, 20_000usize);
    let stream = RngStream::new(808);
    let mut rng = stream.rng();
    let mut vrng = stream.child(1).rng();
    let x1 = gen_equicorr_normal(pairs, d, 0.4, 0.6, &mut rng).unwrap();
    let x2 = gen_equicorr_normal(pairs, d, 0.4, 0.6, &mut rng).unwrap();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut same = Vec::with_capacity(pairs);
    let mut cross = Vec::with_capacity(pairs);
    for i in 0..pairs {
        let (a, b) = (x1.row(i), x2.row(i));
        let bv = spherical_variant(b, &mut vrng).unwrap();
        same.push(dot(a, b).powi(2) / d as f64);
        cross.push(dot(a, &bv).powi(2) / d as f64);
    }
    let mean_se = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let s2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (m, (s2 / v.len() as f64).sqrt())
    };
    let (m1, se1) = mean_se(&same);
    let (m2, se2) = mean_se(&cross);
    let t1 = 1.0 + 0.36 * 99.0;
    let ok = (m1 - t1).abs() <= 3.0 * se1 && (m2 - 1.0).abs() <= 3.0 * se2;
    check(ok, format!("E[(X1'X2)^2]/d = {m1:.3} +- {se1:.3} (target {t1:.2}); E[(X1'X2v)^2]/d = {m2:.4} +- {se2:.4} (target 1)"))
}

/// Raw KS of lattice values `k` (centered at `mu`, scale `sd`) against the
/// normal, and the continuity-corrected distance comparing `F_n(k)` with
/// `Phi((k + 1/2 - mu) / sd)` at lattice points.
fn ks_lattice(samples: &[usize], mu: f64, sd: f64, support: usize) -> (f64, f64) {
    let norm = Normal::new(mu, sd).unwrap();
    let mut counts = vec![0usize; support + 1];
    samples.iter().for_each(|&s| counts[s] += 1);
    let total = samples.len() as f64;
    let (mut raw, mut cc, mut cum) = (0.0f64, 0.0f64, 0.0);
    for (k, c) in counts.iter().enumerate() {
        let before = cum / total;
        cum += *c as f64;
        let after = cum / total;
        let g = norm.cdf(k as f64);
        raw = raw.max((before - g).abs()).max((after - g).abs());
        cc = cc.max((after - norm.cdf(k as f64 + 0.5)).abs());
    }
    (raw, cc)
}

fn criterion_9() -> Outcome {
    let (n, reps) = (400usize, 2000);
    let (ts, tr) = sample_statistics(&GeneratorSpec::SphericalNormal, n, 5, reps, 909);
    // n^{-1/2}(T - center) ~ N(0, 1/4)  <=>  T ~ N(center, n/4).
    let sd = (n as f64).sqrt() / 2.0;
    let (raw_s, cc_s) = ks_lattice(&ts, n as f64 / 2.0, sd, n);
    let (raw_r, cc_r) = ks_lattice(&tr, (n as f64 + 1.0) / 2.0, sd, n);
    check(
        cc_s <= 0.04 && cc_r <= 0.04,
        format!(
            "KS (continuity-corrected) T_S {cc_s:.4}, T_R {cc_r:.4} (<=0.04); uncorrected T_S {raw_s:.4}, T_R {raw_r:.4}"
        ),
    )
}

fn criterion_10() -> Outcome {
    let ex61 = GeneratorSpec::EquicorrNormal { a: 1.0, b: 0.0, location: 1.0 };
    let split = TestConfig { center_mode: CenterMode::SampleSplit, ..TestConfig::default() };
    // 60 observations give 30 differences, where the exact sign-test size
    // (0.0494) is close to nominal.
    let es = power("6.1", ex61.clone(), 60, &[4, 256], 1000, &[StatKind::Sign], 1010, split);
    let (s4, s256) = (rate(&es, StatKind::Sign, 4), rate(&es, StatKind::Sign, 256));
    let med = TestConfig { center_mode: CenterMode::SpatialMedian, ..TestConfig::default() };
    let em = power("6.1", ex61, 50, &[1024], 500, &[StatKind::Sign], 1011, med);
    let m1024 = rate(&em, StatKind::Sign, 1024);
    let ok = within(s4, 0.05, 0.02) && within(s256, 0.05, 0.02) && m1024 >= 0.09;
    check(ok, format!("split sign Type I d=4 {s4:.3}, d=256 {s256:.3} (0.05 +- 0.02); spatial-median sign Type I d=1024 {m1024:.3} (>=0.09)"))
}

fn run_cli(args: &[&str], threads: &str) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_sphtest"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .expect("run sphtest");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&ex31(), 40, 6, &mut RngStream::new(1111).rng()).unwrap();
    let input = dir.path().join("data.csv");
    write_csv(&input, &data);
    let input = input.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["test", "--input", input, "--stat", "sign,runs,modified-sign,modified-runs", "--seed", "5"],
        vec!["simulate", "--example", "3.1", "--n", "d+20", "--dims", "2,8", "--reps", "40", "--tests", "sign,runs,modified-sign", "--seed", "6"],
        vec!["oracle-compare", "--n", "5", "--dims", "3,300", "--reps", "20", "--seed", "7"],
        vec!["null-table", "--n", "50", "--alpha", "0.05"],
        vec!["subsample", "--input", input, "--proportions", "0.5,1", "--reps", "20", "--seed", "8"],
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for args in &commands {
        let (c1, a) = run_cli(args, "1");
        let (c2, b) = run_cli(args, "1");
        let (c3, c) = run_cli(args, "4");
        let same = c1 == 0 && c2 == 0 && c3 == 0 && !a.is_empty() && a == b && a == c;
        ok &= same;
        parts.push(format!("{}: {}", args[0], if same { "identical" } else { "DIFFERS" }));
    }
    check(ok, parts.join(", "))
}

fn write_csv(path: &Path, m: &sphtest::ObservationMatrix) {
    let mut s = String::new();
    for r in m.rows() {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "exact distribution-freeness", criterion_1),
        (2, "Type I control", criterion_2),
        (3, "sign/runs power", criterion_3),
        (4, "squared-coordinate sign power", criterion_4),
        (5, "combined tests power", criterion_5),
        (6, "independent-coordinate examples", criterion_6),
        (7, "heuristic vs exact concentration", criterion_7),
        (8, "moment identities", criterion_8),
        (9, "asymptotic normality", criterion_9),
        (10, "unknown center", criterion_10),
        (11, "CLI determinism", criterion_11),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{verdict}] {name}: {} ({:.1}s)", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
