//! Null distributions, p-values, cutoffs and decisions.
//!
//! Under spherical symmetry the string signs are i.i.d. fair bits, so
//! `T_S ~ Bin(n, 1/2)` and `T_R - 1 ~ Bin(n - 1, 1/2)` whatever the
//! dimension. Nothing here takes a dimension argument.
//!
//! Rejection directions are fixed: upper tail for `T_S` and `T_LR`, lower
//! tail for `T_R`. Cutoffs are non-randomized and conservative.

use std::io::Write;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::ScoreFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Upper,
    Lower,
}

/// Log-pmf of `Bin(n, 1/2)` up to a constant, built outward from the mode
/// so rounding error grows with distance from the mode, not with `n`.
fn rel_log_pmf(n: u64) -> Vec<f64> {
    let n_us = n as usize;
    let mode = n_us / 2;
    let mut r = vec![0.0; n_us + 1];
    for k in mode..n_us {
        r[k + 1] = r[k] + ((n - k as u64) as f64 / (k + 1) as f64).ln();
    }
    for k in (1..=mode).rev() {
        r[k - 1] = r[k] + (k as f64 / (n - k as u64 + 1) as f64).ln();
    }
    r
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Exact tail of `Bin(n, 1/2)`: `P[B >= t]` (upper) or `P[B <= t]` (lower).
///
/// Computed as a ratio of log-sum-exps, so tails far below the smallest
/// normal double relative to the mode are still resolved.
pub fn binom_tail(n: u64, t: u64, tail: Tail) -> Result<f64> {
    if t > n {
        return Err(Error::OutOfRange {
            what: "t",
            value: t as f64,
            lo: 0.0,
            hi: n as f64,
        });
    }
    let r = rel_log_pmf(n);
    let part = match tail {
        Tail::Upper => &r[t as usize..],
        Tail::Lower => &r[..=t as usize],
    };
    if part.len() == r.len() {
        return Ok(1.0);
    }
    Ok((log_sum_exp(part) - log_sum_exp(&r)).exp().min(1.0))
}

/// `P[Bin(n, 1/2) >= t_s]`.
pub fn sign_pvalue(t_s: usize, n: usize) -> Result<f64> {
    binom_tail(n as u64, t_s as u64, Tail::Upper)
}

/// `P[Bin(n - 1, 1/2) <= t_r - 1]`.
pub fn runs_pvalue(t_r: usize, n: usize) -> Result<f64> {
    if n == 0 || t_r < 1 || t_r > n {
        return Err(Error::OutOfRange {
            what: "t_r",
            value: t_r as f64,
            lo: 1.0,
            hi: n as f64,
        });
    }
    binom_tail(n as u64 - 1, t_r as u64 - 1, Tail::Lower)
}

/// A lattice distribution `origin + step * i` with probabilities `pmf[i]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullLaw {
    pub statistic: String,
    pub origin: f64,
    pub step: f64,
    pub pmf: Vec<f64>,
    /// Mean and variance of the normal limit.
    pub mean: f64,
    pub variance: f64,
}

impl NullLaw {
    pub fn value(&self, i: usize) -> f64 {
        self.origin + self.step * i as f64
    }

    fn index_at_or_above(&self, t: f64) -> usize {
        let x = (t - self.origin) / self.step;
        let i = (x - 1e-9).ceil();
        i.max(0.0) as usize
    }

    fn index_at_or_below(&self, t: f64) -> Option<usize> {
        let x = (t - self.origin) / self.step;
        let i = (x + 1e-9).floor();
        if i < 0.0 {
            None
        } else {
            Some((i as usize).min(self.pmf.len() - 1))
        }
    }

    /// `P[T >= t]`.
    pub fn upper_tail(&self, t: f64) -> f64 {
        let i = self.index_at_or_above(t);
        self.pmf.iter().skip(i).sum::<f64>().min(1.0)
    }

    /// `P[T <= t]`.
    pub fn cdf(&self, t: f64) -> f64 {
        match self.index_at_or_below(t) {
            None => 0.0,
            Some(i) => self.pmf[..=i].iter().sum::<f64>().min(1.0),
        }
    }

    /// Smallest support point `c` with `P[T >= c] <= alpha`, and that size.
    pub fn upper_cutoff(&self, alpha: f64) -> Option<(f64, f64)> {
        let mut tail = 0.0;
        let mut best = None;
        for i in (0..self.pmf.len()).rev() {
            tail += self.pmf[i];
            if tail <= alpha + 1e-15 {
                best = Some((self.value(i), tail));
            } else {
                break;
            }
        }
        best
    }
}

pub fn sign_law(n: usize) -> NullLaw {
    let pmf = binomial_pmf(n as u64);
    NullLaw {
        statistic: "sign".into(),
        origin: 0.0,
        step: 1.0,
        pmf,
        mean: n as f64 / 2.0,
        variance: n as f64 / 4.0,
    }
}

pub fn runs_law(n: usize) -> NullLaw {
    let pmf = binomial_pmf(n.saturating_sub(1) as u64);
    NullLaw {
        statistic: "runs".into(),
        origin: 1.0,
        step: 1.0,
        pmf,
        mean: (n as f64 + 1.0) / 2.0,
        variance: n as f64 / 4.0,
    }
}

fn binomial_pmf(n: u64) -> Vec<f64> {
    let r = rel_log_pmf(n);
    let z = log_sum_exp(&r);
    r.iter().map(|l| (l - z).exp()).collect()
}

/// Largest grid the exact linear-rank convolution will allocate.
pub const LR_GRID_BUDGET: usize = 1 << 22;

/// Exact null law of `sum_i a(i) B_i` with `B_i` i.i.d. fair bits.
///
/// Integer scores are handled exactly on a unit grid. Other scores need a
/// `resolution`; each score is rounded to the nearest multiple of it.
pub fn lr_exact_law(scores: &ScoreFunction, resolution: Option<f64>) -> Result<NullLaw> {
    let n = scores.len();
    if n > 10_000 {
        return Err(Error::InvalidParameter(format!(
            "exact linear rank law supports n <= 10000, got {n}"
        )));
    }
    let step = match resolution {
        Some(r) if r > 0.0 && r.is_finite() => r,
        Some(r) => return Err(Error::InvalidParameter(format!("resolution {r} must be positive"))),
        None => {
            if scores.values().iter().all(|a| (a - a.round()).abs() <= 1e-9 * a.abs().max(1.0)) {
                1.0
            } else {
                return Err(Error::InvalidParameter(
                    "non-integer scores need an explicit grid resolution".into(),
                ));
            }
        }
    };
    let ks: Vec<i64> = scores.values().iter().map(|a| (a / step).round() as i64).collect();
    let cells: u128 = ks.iter().map(|k| k.unsigned_abs() as u128).sum::<u128>() + 1;
    if cells > LR_GRID_BUDGET as u128 {
        return Err(Error::Resolution {
            cells,
            budget: LR_GRID_BUDGET,
        });
    }
    let origin: i64 = ks.iter().filter(|k| **k < 0).sum();
    let mut pmf = vec![0.0; cells as usize];
    pmf[0] = 1.0;
    let mut width = 1usize;
    for k in &ks {
        let shift = k.unsigned_abs() as usize;
        if shift == 0 {
            continue;
        }
        for v in (0..width + shift).rev() {
            let stay = if v < width { pmf[v] } else { 0.0 };
            let moved = if v >= shift { pmf[v - shift] } else { 0.0 };
            pmf[v] = 0.5 * (stay + moved);
        }
        width += shift;
    }
    let sum_a: f64 = scores.values().iter().sum();
    let sum_a2: f64 = scores.values().iter().map(|a| a * a).sum();
    Ok(NullLaw {
        statistic: "lr".into(),
        origin: origin as f64 * step,
        step,
        pmf,
        mean: sum_a / 2.0,
        variance: sum_a2 / 4.0,
    })
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// `max a(i)^2 / sum a(i)^2`; the normal limit needs this to vanish.
pub fn score_condition(scores: &ScoreFunction) -> f64 {
    let s2: f64 = scores.values().iter().map(|a| a * a).sum();
    let m = scores.values().iter().map(|a| a * a).fold(0.0, f64::max);
    m / s2
}

/// Upper-tail normal p-value of `(t - sum a / 2) / (sqrt(sum a^2) / 2)`.
pub fn lr_asymptotic_pvalue(t: f64, scores: &ScoreFunction) -> Result<f64> {
    let sum_a: f64 = scores.values().iter().sum();
    let sum_a2: f64 = scores.values().iter().map(|a| a * a).sum();
    if sum_a2 == 0.0 {
        return Err(Error::Degenerate("all scores are zero".into()));
    }
    let z = (t - 0.5 * sum_a) / (0.5 * sum_a2.sqrt());
    Ok(std_normal().sf(z))
}

/// Normal-limit p-value for `T_S`.
pub fn sign_asymptotic_pvalue(t_s: usize, n: usize) -> Result<f64> {
    if t_s > n {
        return Err(Error::OutOfRange {
            what: "t_s",
            value: t_s as f64,
            lo: 0.0,
            hi: n as f64,
        });
    }
    lr_asymptotic_pvalue(t_s as f64, &ScoreFunction::constant(n))
}

/// Lower-tail normal p-value of `(t_r - (n + 1)/2) / (sqrt(n)/2)`.
pub fn runs_asymptotic_pvalue(t_r: usize, n: usize) -> Result<f64> {
    if n < 2 || t_r < 1 || t_r > n {
        return Err(Error::OutOfRange {
            what: "t_r",
            value: t_r as f64,
            lo: 1.0,
            hi: n as f64,
        });
    }
    let z = (t_r as f64 - (n as f64 + 1.0) / 2.0) / ((n as f64).sqrt() / 2.0);
    Ok(std_normal().cdf(z))
}

/// Upper normal quantile `z_{1-p}`.
pub fn normal_upper_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(1.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    /// Inner-product cost.
    Inner,
    /// Squared-coordinate cost.
    Diag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BonferroniDecision {
    pub reject: bool,
    /// Component with the smaller p-value when the test rejects.
    pub fired: Option<Component>,
    /// `min(1, 2 min(p_inner, p_diag))`.
    pub adjusted_p: f64,
}

/// Rejects iff `min(p_inner, p_diag) <= alpha / 2` (boundary inclusive).
pub fn bonferroni_decide(p_inner: f64, p_diag: f64, alpha: f64) -> Result<BonferroniDecision> {
    for (what, p) in [("p_inner", p_inner), ("p_diag", p_diag), ("alpha", alpha)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange {
                what,
                value: p,
                lo: 0.0,
                hi: 1.0,
            });
        }
    }
    let (p_min, comp) = if p_diag < p_inner {
        (p_diag, Component::Diag)
    } else {
        (p_inner, Component::Inner)
    };
    let reject = p_min <= alpha / 2.0;
    Ok(BonferroniDecision {
        reject,
        fired: reject.then_some(comp),
        adjusted_p: (2.0 * p_min).min(1.0),
    })
}

/// Smallest `c` with `P[T_S >= c] <= alpha`, and that exact size.
pub fn sign_cutoff(n: usize, alpha: f64) -> Option<(usize, f64)> {
    sign_law(n).upper_cutoff(alpha).map(|(c, s)| (c as usize, s))
}

/// Largest `c` with `P[T_R <= c] <= alpha`, and that exact size.
pub fn runs_cutoff(n: usize, alpha: f64) -> Option<(usize, f64)> {
    let law = runs_law(n);
    let mut cdf = 0.0;
    let mut best = None;
    for (i, p) in law.pmf.iter().enumerate() {
        cdf += p;
        if cdf <= alpha + 1e-15 {
            best = Some((1 + i, cdf));
        } else {
            break;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffRecord {
    pub statistic: String,
    pub n: usize,
    pub alpha: f64,
    /// `None` when no non-randomized region has size `<= alpha`.
    pub cutoff: Option<usize>,
    pub exact_size: f64,
}

impl CutoffRecord {
    pub fn level_attainable(&self) -> bool {
        self.cutoff.is_some()
    }
}

/// Exact cutoffs for the sign test (reject `T_S >= c`) and the runs test
/// (reject `T_R <= c`).
pub fn null_table(n: usize, alpha: f64) -> Result<Vec<CutoffRecord>> {
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, found: n });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange {
            what: "alpha",
            value: alpha,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let record = |name: &str, c: Option<(usize, f64)>| CutoffRecord {
        statistic: name.into(),
        n,
        alpha,
        cutoff: c.map(|(c, _)| c),
        exact_size: c.map_or(0.0, |(_, s)| s),
    };
    Ok(vec![
        record("sign", sign_cutoff(n, alpha)),
        record("runs", runs_cutoff(n, alpha)),
    ])
}

/// Writes `statistic,n,alpha,cutoff,exact_size`; unattainable cutoffs are `NA`.
pub fn write_null_table_csv<W: Write>(records: &[CutoffRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["statistic", "n", "alpha", "cutoff", "exact_size"])?;
    for r in records {
        w.write_record([
            r.statistic.clone(),
            r.n.to_string(),
            r.alpha.to_string(),
            r.cutoff.map_or_else(|| "NA".to_string(), |c| c.to_string()),
            r.exact_size.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
