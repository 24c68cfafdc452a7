//! Spherically symmetric variants, unknown-center transforms and centering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{norm, AugmentedSet, ObservationMatrix};

/// A deterministic random stream identified by `(seed, id)`.
///
/// The seed keys a ChaCha generator and the id selects one of its 2^64
/// independent streams. Child streams are derived by hashing, so a
/// replicate's randomness depends only on its key and never on the order
/// in which replicates run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub id: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, id: 0 }
    }

    /// Substream keyed by `key` under this stream.
    pub fn child(self, key: u64) -> Self {
        Self {
            seed: self.seed,
            id: mix(self.id ^ mix(key.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }

    /// Substream keyed by a sequence of keys.
    pub fn path(self, keys: &[u64]) -> Self {
        keys.iter().fold(self, |s, &k| s.child(k))
    }

    pub fn rng(self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.id);
        rng
    }

    /// A 64-bit seed summarizing this stream, for nested configurations.
    pub fn derive_seed(self) -> u64 {
        mix(self.seed ^ mix(self.id))
    }
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw from the unit sphere in `R^d`: a standard Gaussian vector
/// divided by its norm.
pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    loop {
        let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&u);
        if r > 0.0 {
            u.iter_mut().for_each(|v| *v /= r);
            return Ok(u);
        }
    }
}

/// `||x|| U` with `U` uniform on the sphere. The zero vector maps to itself.
pub fn spherical_variant<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let r = norm(x);
    let mut u = sample_unit_sphere(x.len(), rng)?;
    u.iter_mut().for_each(|v| *v *= r);
    Ok(u)
}

/// Pairs every observation with a spherically symmetric variant. Variant `k`
/// draws from substream `k` of `stream`.
pub fn augment(data: &ObservationMatrix, stream: RngStream) -> Result<AugmentedSet> {
    let mut variants = Vec::with_capacity(data.n() * data.d());
    for (k, x) in data.rows().enumerate() {
        let mut rng = stream.child(k as u64).rng();
        variants.extend(spherical_variant(x, &mut rng)?);
    }
    AugmentedSet::new(data.clone(), variants)
}

/// Differences `X_i - X_{m+i}`, `m = floor(n/2)`. An odd trailing
/// observation is dropped first.
pub fn split_differences(data: &ObservationMatrix) -> Result<ObservationMatrix> {
    let n = data.n();
    if n < 4 {
        return Err(Error::SampleTooSmall { needed: 4, found: n });
    }
    let m = n / 2;
    let mut values = Vec::with_capacity(m * data.d());
    for i in 0..m {
        values.extend(data.row(i).iter().zip(data.row(m + i)).map(|(a, b)| a - b));
    }
    ObservationMatrix::new(m, data.d(), values)
}

pub const WEISZFELD_TOL: f64 = 1e-8;
pub const WEISZFELD_MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMedian {
    pub point: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iter` was reached before the step fell below `tol`.
    pub converged: bool,
}

/// Minimizer of `sum_i ||X_i - m||` by Weiszfeld iteration from the
/// coordinate-wise mean.
///
/// When an iterate lands on a data point, that point is returned if it
/// satisfies the optimality condition; otherwise the iteration restarts
/// from a small perturbation.
pub fn spatial_median(data: &ObservationMatrix, tol: f64, max_iter: usize) -> SpatialMedian {
    let n = data.n();
    let d = data.d();
    let mut m = vec![0.0; d];
    for x in data.rows() {
        m.iter_mut().zip(x).for_each(|(a, b)| *a += b / n as f64);
    }
    if n == 1 {
        return SpatialMedian {
            point: data.row(0).to_vec(),
            iterations: 0,
            converged: true,
        };
    }
    let scale = data.rows().map(norm).fold(0.0f64, f64::max).max(1.0);
    let mut restarts = 0u32;

    for iter in 1..=max_iter {
        let mut num = vec![0.0; d];
        let mut den = 0.0;
        let mut coincident = None;
        for (i, x) in data.rows().enumerate() {
            let dist = distance(x, &m);
            if dist < tol {
                coincident = Some(i);
                continue;
            }
            let w = 1.0 / dist;
            den += w;
            num.iter_mut().zip(x).for_each(|(a, b)| *a += w * b);
        }

        if let Some(j) = coincident {
            // Optimality at a data point: ||sum_{i != j} (x_j - x_i)/||x_j - x_i|| || <= 1.
            let xj = data.row(j);
            let mut g = vec![0.0; d];
            for (i, x) in data.rows().enumerate() {
                if i == j {
                    continue;
                }
                let dist = distance(x, xj);
                if dist == 0.0 {
                    continue;
                }
                g.iter_mut()
                    .zip(xj.iter().zip(x))
                    .for_each(|(a, (p, q))| *a += (p - q) / dist);
            }
            let dup = data.rows().filter(|x| distance(x, xj) == 0.0).count() as f64;
            if norm(&g) <= dup {
                return SpatialMedian {
                    point: xj.to_vec(),
                    iterations: iter,
                    converged: true,
                };
            }
            restarts += 1;
            let eps = 1e3 * tol * scale;
            for (q, v) in m.iter_mut().enumerate() {
                let sgn = if (q + restarts as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
                *v = xj[q] + sgn * eps / (d as f64).sqrt();
            }
            continue;
        }

        let next: Vec<f64> = num.iter().map(|v| v / den).collect();
        let step = distance(&next, &m);
        m = next;
        if step < tol {
            return SpatialMedian {
                point: m,
                iterations: iter,
                converged: true,
            };
        }
    }
    SpatialMedian {
        point: m,
        iterations: max_iter,
        converged: false,
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Subtracts `mu` from every row.
pub fn center(data: &ObservationMatrix, mu: &[f64]) -> Result<ObservationMatrix> {
    if mu.len() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            found: mu.len(),
        });
    }
    let values = data
        .rows()
        .flat_map(|x| x.iter().zip(mu).map(|(a, b)| a - b))
        .collect();
    ObservationMatrix::new(data.n(), data.d(), values)
}
