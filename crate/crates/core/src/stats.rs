//! Test statistics computed from string signs and ranks.

use crate::error::{Error, Result};
use crate::model::{ScoreFunction, SignRankProfile};

/// `T_S`: number of original observations on the path.
pub fn sign_statistic(profile: &SignRankProfile) -> usize {
    profile.signs.iter().map(|&s| s as usize).sum()
}

/// `T_R`: one plus the number of sign changes along the path.
pub fn runs_statistic(profile: &SignRankProfile) -> usize {
    let along: Vec<u8> = profile.signs_along_path().collect();
    1 + along.windows(2).filter(|w| w[0] != w[1]).count()
}

/// `T_LR = sum_i S_{Pi_i} a(i)`.
///
/// Asymmetric scores make the statistic depend on path orientation and are
/// refused unless `allow_asymmetric` is set.
pub fn linear_rank_statistic(
    profile: &SignRankProfile,
    scores: &ScoreFunction,
    allow_asymmetric: bool,
) -> Result<f64> {
    if scores.len() != profile.n() {
        return Err(Error::DimensionMismatch {
            expected: profile.n(),
            found: scores.len(),
        });
    }
    if !scores.is_symmetric() && !allow_asymmetric {
        return Err(Error::AsymmetricScores);
    }
    Ok(profile
        .signs_along_path()
        .zip(scores.values())
        .map(|(s, a)| s as f64 * a)
        .sum())
}

/// `T^M_S = max(T_S, T~_S)`.
pub fn combined_sign(t_inner: usize, t_diag: usize) -> usize {
    t_inner.max(t_diag)
}

/// `T^M_R = min(T_R, T~_R)`.
pub fn combined_runs(t_inner: usize, t_diag: usize) -> usize {
    t_inner.min(t_diag)
}
