//! The end-to-end test: center, augment, build paths, compute, calibrate.

use crate::augment::{self, RngStream, WEISZFELD_MAX_ITER, WEISZFELD_TOL};
use crate::calibrate::{self, Component};
use crate::cost::cost_matrix;
use crate::error::{Error, Result};
use crate::model::{
    Calibration, CenterMode, CostKind, ObservationMatrix, ReportMetadata, SignRankProfile, StatKind,
    StatRecord, TestConfig, TestReport,
};
use crate::path::{extract_profile, solve};
use crate::stats;

use super::config_hash;

/// Stream key for the augmentation draws under a test seed.
const AUGMENT: u64 = 0xA0;

pub const NOT_DISTRIBUTION_FREE: &str =
    "spatial-median centering is not exactly distribution-free; Type I error may exceed alpha";

/// Applies the configured centering. Returns the data to test and warnings.
pub fn prepare(data: &ObservationMatrix, mode: CenterMode) -> Result<(ObservationMatrix, Vec<String>)> {
    match mode {
        CenterMode::KnownOrigin => Ok((data.clone(), Vec::new())),
        CenterMode::SampleSplit => Ok((augment::split_differences(data)?, Vec::new())),
        CenterMode::SpatialMedian => {
            let med = augment::spatial_median(data, WEISZFELD_TOL, WEISZFELD_MAX_ITER);
            let mut warnings = vec![NOT_DISTRIBUTION_FREE.to_string()];
            if !med.converged {
                warnings.push(format!(
                    "spatial median did not converge in {} iterations",
                    med.iterations
                ));
            }
            Ok((augment::center(data, &med.point)?, warnings))
        }
    }
}

fn profile_for(
    aug: &crate::model::AugmentedSet,
    kind: CostKind,
    config: &TestConfig,
) -> Result<SignRankProfile> {
    let m = cost_matrix(aug, kind)?;
    let path = solve(&m, config.path_method, config.enumeration_cap)?;
    extract_profile(&path, aug.n())
}

struct Ctx<'a> {
    n: usize,
    config: &'a TestConfig,
    inner: Option<std::result::Result<SignRankProfile, String>>,
    diag: Option<std::result::Result<SignRankProfile, String>>,
}

fn need(p: &Option<std::result::Result<SignRankProfile, String>>) -> Result<&SignRankProfile> {
    match p {
        Some(Ok(p)) => Ok(p),
        Some(Err(e)) => Err(Error::Upstream(e.clone())),
        None => Err(Error::Invariant("profile was not computed".into())),
    }
}

fn sign_p(t: usize, n: usize, cal: Calibration) -> Result<f64> {
    match cal {
        Calibration::Exact => calibrate::sign_pvalue(t, n),
        Calibration::Asymptotic => calibrate::sign_asymptotic_pvalue(t, n),
    }
}

fn runs_p(t: usize, n: usize, cal: Calibration) -> Result<f64> {
    match cal {
        Calibration::Exact => calibrate::runs_pvalue(t, n),
        Calibration::Asymptotic => calibrate::runs_asymptotic_pvalue(t, n),
    }
}

fn sign_cut(n: usize, level: f64, cal: Calibration) -> Option<f64> {
    match cal {
        Calibration::Exact => calibrate::sign_cutoff(n, level).map(|(c, _)| c as f64),
        Calibration::Asymptotic => {
            Some(n as f64 / 2.0 + calibrate::normal_upper_quantile(level) * (n as f64).sqrt() / 2.0)
        }
    }
}

fn runs_cut(n: usize, level: f64, cal: Calibration) -> Option<f64> {
    match cal {
        Calibration::Exact => calibrate::runs_cutoff(n, level).map(|(c, _)| c as f64),
        Calibration::Asymptotic => Some(
            (n as f64 + 1.0) / 2.0 - calibrate::normal_upper_quantile(level) * (n as f64).sqrt() / 2.0,
        ),
    }
}

fn record(kind: StatKind, value: f64, p: f64, cutoff: Option<f64>, alpha: f64) -> StatRecord {
    StatRecord {
        name: kind.name().into(),
        value: Some(value),
        p_value: Some(p),
        cutoff,
        reject: p <= alpha,
        fired: None,
        error: None,
    }
}

fn component_name(c: Component) -> String {
    match c {
        Component::Inner => "inner-product".into(),
        Component::Diag => "squared-coordinate".into(),
    }
}

impl Ctx<'_> {
    fn compute(&self, kind: StatKind) -> Result<StatRecord> {
        let (n, alpha, cal) = (self.n, self.config.alpha, self.config.calibration);
        match kind {
            StatKind::Sign | StatKind::DiagSign => {
                let prof = need(if kind == StatKind::Sign { &self.inner } else { &self.diag })?;
                let t = stats::sign_statistic(prof);
                Ok(record(kind, t as f64, sign_p(t, n, cal)?, sign_cut(n, alpha, cal), alpha))
            }
            StatKind::Runs | StatKind::DiagRuns => {
                let prof = need(if kind == StatKind::Runs { &self.inner } else { &self.diag })?;
                let t = stats::runs_statistic(prof);
                Ok(record(kind, t as f64, runs_p(t, n, cal)?, runs_cut(n, alpha, cal), alpha))
            }
            StatKind::Lr => {
                let scores = self
                    .config
                    .scores
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter("lr needs scores".into()))?;
                let t = stats::linear_rank_statistic(need(&self.inner)?, scores, self.config.allow_asymmetric)?;
                let (p, cut) = match cal {
                    Calibration::Exact => {
                        let law = calibrate::lr_exact_law(scores, self.config.lr_resolution)?;
                        (law.upper_tail(t), law.upper_cutoff(alpha).map(|(c, _)| c))
                    }
                    Calibration::Asymptotic => {
                        let s1: f64 = scores.values().iter().sum();
                        let s2: f64 = scores.values().iter().map(|a| a * a).sum();
                        let cut = s1 / 2.0 + calibrate::normal_upper_quantile(alpha) * s2.sqrt() / 2.0;
                        (calibrate::lr_asymptotic_pvalue(t, scores)?, Some(cut))
                    }
                };
                Ok(record(kind, t, p, cut, alpha))
            }
            StatKind::ModifiedSign | StatKind::ModifiedRuns => {
                let (pi, pd) = (need(&self.inner)?, need(&self.diag)?);
                let sign = kind == StatKind::ModifiedSign;
                let (value, p_inner, p_diag, cut) = if sign {
                    let (a, b) = (stats::sign_statistic(pi), stats::sign_statistic(pd));
                    (
                        stats::combined_sign(a, b),
                        sign_p(a, n, cal)?,
                        sign_p(b, n, cal)?,
                        sign_cut(n, alpha / 2.0, cal),
                    )
                } else {
                    let (a, b) = (stats::runs_statistic(pi), stats::runs_statistic(pd));
                    (
                        stats::combined_runs(a, b),
                        runs_p(a, n, cal)?,
                        runs_p(b, n, cal)?,
                        runs_cut(n, alpha / 2.0, cal),
                    )
                };
                let dec = calibrate::bonferroni_decide(p_inner, p_diag, alpha)?;
                Ok(StatRecord {
                    name: kind.name().into(),
                    value: Some(value as f64),
                    p_value: Some(dec.adjusted_p),
                    cutoff: cut,
                    reject: dec.reject,
                    fired: dec.fired.map(component_name),
                    error: None,
                })
            }
        }
    }
}

/// Runs every configured statistic on `data`.
///
/// Failures specific to one statistic (an over-cap exact path, an
/// asymmetric score function, an oversized null grid) are reported in
/// that statistic's record; the other statistics are still computed.
pub fn run_test(data: &ObservationMatrix, config: &TestConfig) -> Result<TestReport> {
    config.validate()?;
    let (x, mut warnings) = prepare(data, config.center_mode)?;
    let n = x.n();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, found: n });
    }
    let aug = augment::augment(&x, RngStream::new(config.seed).child(AUGMENT))?;

    let want_inner = config.statistics.iter().any(|k| k.needs_inner());
    let want_diag = config.statistics.iter().any(|k| k.needs_diag());
    let mut cost_kinds = Vec::new();
    let build = |kind| profile_for(&aug, kind, config).map_err(|e| e.to_string());
    let inner = want_inner.then(|| {
        cost_kinds.push(CostKind::InnerProduct);
        build(CostKind::InnerProduct)
    });
    let diag = want_diag.then(|| {
        cost_kinds.push(CostKind::SquaredCoordinate);
        build(CostKind::SquaredCoordinate)
    });

    if config.calibration == Calibration::Asymptotic {
        if let Some(s) = &config.scores {
            let c = calibrate::score_condition(s);
            if c > 0.1 {
                warnings.push(format!(
                    "max a(i)^2 / sum a(i)^2 = {c:.3}; the normal approximation may be poor"
                ));
            }
        }
    }

    let ctx = Ctx { n, config, inner, diag };
    let statistics = config
        .statistics
        .iter()
        .map(|&k| {
            ctx.compute(k).unwrap_or_else(|e| StatRecord {
                name: k.name().into(),
                value: None,
                p_value: None,
                cutoff: None,
                reject: false,
                fired: None,
                error: Some(e.to_string()),
            })
        })
        .collect();

    Ok(TestReport {
        statistics,
        metadata: ReportMetadata {
            n: data.n(),
            d: data.d(),
            n_tested: n,
            alpha: config.alpha,
            seed: config.seed,
            config_hash: config_hash(config)?,
            cost_kinds,
            path_method: config.path_method,
            center_mode: config.center_mode,
            calibration: config.calibration,
            warnings,
        },
    })
}
