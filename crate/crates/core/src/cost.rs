//! Edge-cost kernels and cost-matrix assembly.
//!
//! Every kernel is returned in log space: the value is the negated kernel
//! argument, so the edge cost is `exp(value)` and lies in `(0, 1]`.

use crate::error::{Error, Result};
use crate::model::{norm, AugmentedSet, CostKind, CostMatrix};

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `-((z_i'z_j) / d)^2`.
pub fn inner_logcost(zi: &[f64], zj: &[f64]) -> Result<f64> {
    check_dims(zi, zj)?;
    let s = dot(zi, zj) / zi.len() as f64;
    Ok(-(s * s))
}

/// `-(1/d) sum_q z_iq^2 z_jq^2`.
pub fn diag_logcost(zi: &[f64], zj: &[f64]) -> Result<f64> {
    check_dims(zi, zj)?;
    let s: f64 = zi.iter().zip(zj).map(|(x, y)| x * x * y * y).sum();
    Ok(-s / zi.len() as f64)
}

/// `-cos^2(z_i, z_j)`. Undefined for a zero vector.
pub fn cosine_logcost(zi: &[f64], zj: &[f64]) -> Result<f64> {
    check_dims(zi, zj)?;
    let (ni, nj) = (norm(zi), norm(zj));
    if ni == 0.0 || nj == 0.0 {
        return Err(Error::Degenerate("cosine similarity with a zero vector".into()));
    }
    let c = dot(zi, zj) / (ni * nj);
    Ok(-(c * c))
}

pub fn kernel(kind: CostKind, zi: &[f64], zj: &[f64]) -> Result<f64> {
    match kind {
        CostKind::InnerProduct => inner_logcost(zi, zj),
        CostKind::SquaredCoordinate => diag_logcost(zi, zj),
        CostKind::Cosine => cosine_logcost(zi, zj),
    }
}

/// Log-costs over all allowed pairs of the `2n` augmented nodes.
pub fn cost_matrix(aug: &AugmentedSet, kind: CostKind) -> Result<CostMatrix> {
    let n = aug.n();
    let size = 2 * n;
    let d = aug.d() as f64;

    // Precompute per-node transforms so each pair costs one dot product.
    let nodes: Vec<Vec<f64>> = match kind {
        CostKind::InnerProduct => (1..=size).map(|k| aug.node(k).to_vec()).collect(),
        CostKind::SquaredCoordinate => (1..=size)
            .map(|k| aug.node(k).iter().map(|v| v * v).collect())
            .collect(),
        CostKind::Cosine => (1..=size)
            .map(|k| {
                let z = aug.node(k);
                let r = norm(z);
                if r == 0.0 {
                    return Err(Error::Degenerate(format!(
                        "node {k} has zero norm; cosine cost undefined"
                    )));
                }
                Ok(z.iter().map(|v| v / r).collect())
            })
            .collect::<Result<_>>()?,
    };

    let mut m = CostMatrix::zeroed(n);
    for i in 1..=size {
        for j in (i + 1)..=size {
            if m.is_forbidden(i, j) {
                continue;
            }
            let s = dot(&nodes[i - 1], &nodes[j - 1]);
            let v = match kind {
                CostKind::InnerProduct => {
                    let t = s / d;
                    -(t * t)
                }
                CostKind::SquaredCoordinate => -s / d,
                CostKind::Cosine => -(s * s),
            };
            m.set(i, j, v);
        }
    }
    Ok(m)
}
