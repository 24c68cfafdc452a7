//! Test pipeline, Monte Carlo experiments and CSV output.
//!
//! Every replicate draws from a stream keyed by `(d, n, rep)` under the
//! master seed, so results do not depend on execution order or on the
//! number of worker threads.

pub mod cli;
mod ingest;
mod pipeline;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::augment::{augment, RngStream};
use crate::cost::cost_matrix;
use crate::error::{Error, Result};
use crate::generators::generate;
use crate::model::{
    CostKind, DiagRecipe, GeneratorSpec, ObservationMatrix, PowerEstimate, StatKind, TestConfig,
    DEFAULT_ENUMERATION_CAP,
};
use crate::path::{exact_path, extract_profile, heuristic_path};
use crate::stats::{runs_statistic, sign_statistic};

pub use ingest::{ingest_csv, parse_csv, parse_scores};
pub use pipeline::{prepare, run_test, NOT_DISTRIBUTION_FREE};

// Stream keys below a replicate.
const DATA: u64 = 1;
const TEST: u64 = 2;
const SUBSAMPLE: u64 = 3;

/// First 16 hex digits of the SHA-256 of the value's JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&json);
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

/// How replicates are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon worker pool; sequential when built without `parallel`.
    #[default]
    Parallel,
}

/// `f(0), ..., f(count - 1)` in index order.
pub fn map_replicates<T, F>(exec: Execution, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(f).collect()
        }
        _ => (0..count).map(f).collect(),
    }
}

/// Sample size as a polynomial in `d` with nonnegative integer
/// coefficients, e.g. `50`, `d+20`, `d^2+20`, `2*d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NExpr {
    source: String,
    /// `(coefficient, power)` terms.
    terms: Vec<(u64, u32)>,
}

impl NExpr {
    pub fn fixed(n: usize) -> Self {
        Self {
            source: n.to_string(),
            terms: vec![(n as u64, 0)],
        }
    }

    pub fn eval(&self, d: usize) -> Result<usize> {
        let mut n: u64 = 0;
        for &(c, p) in &self.terms {
            let term = (d as u64)
                .checked_pow(p)
                .and_then(|v| v.checked_mul(c))
                .ok_or_else(|| Error::InvalidParameter(format!("n = {} overflows at d = {d}", self.source)))?;
            n = n
                .checked_add(term)
                .ok_or_else(|| Error::InvalidParameter(format!("n = {} overflows at d = {d}", self.source)))?;
        }
        Ok(n as usize)
    }
}

impl fmt::Display for NExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl FromStr for NExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let source: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::InvalidParameter(format!("cannot parse sample-size expression '{s}'"));
        if source.is_empty() {
            return Err(bad());
        }
        let mut terms = Vec::new();
        for term in source.split('+') {
            let (coef, var) = match term.split_once('*') {
                Some((_, "")) => return Err(bad()),
                Some((c, v)) => (c.parse::<u64>().map_err(|_| bad())?, v),
                None if term.starts_with('d') => (1, term),
                None => (term.parse::<u64>().map_err(|_| bad())?, ""),
            };
            let power = match var {
                "" => 0,
                "d" => 1,
                v => v
                    .strip_prefix("d^")
                    .and_then(|p| p.parse::<u32>().ok())
                    .ok_or_else(bad)?,
            };
            terms.push((coef, power));
        }
        Ok(Self { source, terms })
    }
}

impl Serialize for NExpr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for NExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A power (or Type I) study over a dimension schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub label: String,
    pub generator: GeneratorSpec,
    pub n: NExpr,
    pub dims: Vec<usize>,
    pub reps: usize,
    /// Statistics to record; overrides `test.statistics`.
    pub tests: Vec<StatKind>,
    pub test: TestConfig,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(label: impl Into<String>, generator: GeneratorSpec, n: NExpr, dims: Vec<usize>) -> Self {
        Self {
            label: label.into(),
            generator,
            n,
            dims,
            reps: 500,
            tests: vec![StatKind::Sign, StatKind::Runs],
            test: TestConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.tests.is_empty() {
            return Err(Error::InvalidParameter("empty dimension or test schedule".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be at least 1".into()));
        }
        if let Some(d) = self.dims.iter().find(|d| **d == 0) {
            return Err(Error::InvalidDimension(*d));
        }
        self.test_config(0).validate()
    }

    fn test_config(&self, seed: u64) -> TestConfig {
        let mut t = self.test.clone();
        t.statistics = self.tests.clone();
        t.seed = seed;
        t
    }
}

fn decisions(report: &crate::model::TestReport, tests: &[StatKind]) -> Result<Vec<bool>> {
    tests
        .iter()
        .map(|&k| match report.get(k) {
            Some(r) => match &r.error {
                Some(e) => Err(Error::Upstream(format!("{}: {e}", k.name()))),
                None => Ok(r.reject),
            },
            None => Err(Error::Invariant(format!("{} missing from report", k.name()))),
        })
        .collect()
}

fn tally(label: &str, tests: &[StatKind], n: usize, d: usize, rows: Vec<Vec<bool>>) -> Vec<PowerEstimate> {
    let reps = rows.len();
    tests
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let hits = rows.iter().filter(|r| r[j]).count();
            PowerEstimate::new(label, k, n, d, reps, hits)
        })
        .collect()
}

/// Rejection rates, one per (test, d), in schedule order.
pub fn estimate_power(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<PowerEstimate>> {
    cfg.validate()?;
    let master = RngStream::new(cfg.seed);
    let mut out = Vec::new();
    for &d in &cfg.dims {
        let n = cfg.n.eval(d)?;
        let rows = map_replicates(exec, cfg.reps, |rep| {
            let stream = master.path(&[d as u64, n as u64, rep as u64]);
            let data = generate(&cfg.generator, n, d, &mut stream.child(DATA).rng())?;
            let report = run_test(&data, &cfg.test_config(stream.child(TEST).derive_seed()))?;
            decisions(&report, &cfg.tests)
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        out.extend(tally(&cfg.label, &cfg.tests, n, d, rows));
    }
    Ok(out)
}

/// `example,test,n,d,reps,power,mc_se,seed,config_hash`.
pub fn write_power_csv<W: Write>(estimates: &[PowerEstimate], seed: u64, hash: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["example", "test", "n", "d", "reps", "power", "mc_se", "seed", "config_hash"])?;
    for e in estimates {
        w.write_record([
            e.label.clone(),
            e.test.name().to_string(),
            e.n.to_string(),
            e.d.to_string(),
            e.reps.to_string(),
            e.rejection_rate.to_string(),
            e.mc_se.to_string(),
            seed.to_string(),
            hash.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Heuristic and exact statistics for one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleRecord {
    pub d: usize,
    pub rep: usize,
    pub sign_heuristic: usize,
    pub sign_exact: usize,
    pub runs_heuristic: usize,
    pub runs_exact: usize,
}

impl OracleRecord {
    pub fn sign_diff(&self) -> i64 {
        self.sign_heuristic as i64 - self.sign_exact as i64
    }

    pub fn runs_diff(&self) -> i64 {
        self.runs_heuristic as i64 - self.runs_exact as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleConfig {
    pub n: usize,
    pub dims: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub cap: usize,
}

impl OracleConfig {
    pub fn new(n: usize, dims: Vec<usize>, reps: usize, seed: u64) -> Self {
        Self {
            n,
            dims,
            reps,
            seed,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

/// Heuristic versus exhaustive paths on the spike model `diag(d, 1, ..., 1)`
/// with the inner-product cost.
pub fn oracle_compare(cfg: &OracleConfig, exec: Execution) -> Result<Vec<OracleRecord>> {
    if cfg.n > cfg.cap {
        return Err(Error::EnumerationCap {
            n: cfg.n,
            cap: cfg.cap,
            required: crate::path::distinct_path_count(cfg.n),
        });
    }
    if cfg.n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, found: cfg.n });
    }
    let spec = GeneratorSpec::DiagNormal {
        recipe: DiagRecipe::Spike { gamma: 1.0 },
    };
    let master = RngStream::new(cfg.seed);
    let mut out = Vec::new();
    for &d in &cfg.dims {
        let recs = map_replicates(exec, cfg.reps, |rep| {
            let stream = master.path(&[d as u64, cfg.n as u64, rep as u64]);
            let data = generate(&spec, cfg.n, d, &mut stream.child(DATA).rng())?;
            let aug = augment(&data, stream.child(TEST))?;
            let m = cost_matrix(&aug, CostKind::InnerProduct)?;
            let h = extract_profile(&heuristic_path(&m)?, cfg.n)?;
            let e = extract_profile(&exact_path(&m, cfg.cap)?.path, cfg.n)?;
            Ok(OracleRecord {
                d,
                rep,
                sign_heuristic: sign_statistic(&h),
                sign_exact: sign_statistic(&e),
                runs_heuristic: runs_statistic(&h),
                runs_exact: runs_statistic(&e),
            })
        });
        out.extend(recs.into_iter().collect::<Result<Vec<_>>>()?);
    }
    Ok(out)
}

/// Fraction of records per dimension with zero sign and zero runs difference.
pub fn zero_difference_fractions(records: &[OracleRecord], d: usize) -> (f64, f64) {
    let rs: Vec<_> = records.iter().filter(|r| r.d == d).collect();
    let k = rs.len().max(1) as f64;
    (
        rs.iter().filter(|r| r.sign_diff() == 0).count() as f64 / k,
        rs.iter().filter(|r| r.runs_diff() == 0).count() as f64 / k,
    )
}

pub fn write_oracle_csv<W: Write>(records: &[OracleRecord], n: usize, seed: u64, hash: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "d",
        "rep",
        "n",
        "sign_heuristic",
        "sign_exact",
        "sign_diff",
        "runs_heuristic",
        "runs_exact",
        "runs_diff",
        "seed",
        "config_hash",
    ])?;
    for r in records {
        w.write_record([
            r.d.to_string(),
            r.rep.to_string(),
            n.to_string(),
            r.sign_heuristic.to_string(),
            r.sign_exact.to_string(),
            r.sign_diff().to_string(),
            r.runs_heuristic.to_string(),
            r.runs_exact.to_string(),
            r.runs_diff().to_string(),
            seed.to_string(),
            hash.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsampleConfig {
    pub proportions: Vec<f64>,
    pub reps: usize,
    /// Its `seed` drives augmentation and stays fixed across replicates.
    pub test: TestConfig,
    /// Drives the choice of rows.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsampleEstimate {
    pub proportion: f64,
    /// Rows per subsample, `round(p n)`.
    pub m: usize,
    pub estimate: PowerEstimate,
}

/// Rejection rates over random subsamples without replacement.
pub fn subsample_power(data: &ObservationMatrix, cfg: &SubsampleConfig, exec: Execution) -> Result<Vec<SubsampleEstimate>> {
    cfg.test.validate()?;
    if cfg.reps == 0 || cfg.proportions.is_empty() {
        return Err(Error::InvalidParameter("need reps >= 1 and at least one proportion".into()));
    }
    let n = data.n();
    let master = RngStream::new(cfg.seed);
    let mut out = Vec::new();
    for (pi, &p) in cfg.proportions.iter().enumerate() {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::OutOfRange {
                what: "proportion",
                value: p,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let m = (p * n as f64).round() as usize;
        if m < 4 {
            return Err(Error::SampleTooSmall { needed: 4, found: m });
        }
        let rows = map_replicates(exec, cfg.reps, |rep| {
            let mut rng = master.path(&[pi as u64, rep as u64, SUBSAMPLE]).rng();
            let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
            idx.sort_unstable();
            let sub = data.select_rows(&idx)?;
            let report = run_test(&sub, &cfg.test)?;
            decisions(&report, &cfg.test.statistics)
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        for est in tally(&p.to_string(), &cfg.test.statistics, m, data.d(), rows) {
            out.push(SubsampleEstimate {
                proportion: p,
                m,
                estimate: est,
            });
        }
    }
    Ok(out)
}

/// `proportion,m,test,d,reps,power,mc_se,seed,config_hash`.
pub fn write_subsample_csv<W: Write>(rows: &[SubsampleEstimate], seed: u64, hash: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["proportion", "m", "test", "d", "reps", "power", "mc_se", "seed", "config_hash"])?;
    for r in rows {
        let e = &r.estimate;
        w.write_record([
            r.proportion.to_string(),
            r.m.to_string(),
            e.test.name().to_string(),
            e.d.to_string(),
            e.reps.to_string(),
            e.rejection_rate.to_string(),
            e.mc_se.to_string(),
            seed.to_string(),
            hash.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
