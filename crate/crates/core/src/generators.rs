//! Synthetic data for the simulated examples, plus covariance diagnostics.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{DiagRecipe, GeneratorSpec, ObservationMatrix, Scatter};

fn check_shape(n: usize, d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    if n == 0 {
        return Err(Error::SampleTooSmall { needed: 1, found: 0 });
    }
    Ok(())
}

/// Closed-form square root of `a I + b J`: returns `(alpha, beta)` with
/// `(alpha I + beta J)^2 = a I + b J`.
pub fn equicorr_sqrt(a: f64, b: f64, d: usize) -> Result<(f64, f64)> {
    let top = a + d as f64 * b;
    if a.is_nan() || a <= 0.0 || top.is_nan() || top < 0.0 || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "a I + b J is not positive semidefinite for a = {a}, b = {b}, d = {d}"
        )));
    }
    let alpha = a.sqrt();
    Ok((alpha, (top.sqrt() - alpha) / d as f64))
}

fn equicorr_rows<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    a: f64,
    b: f64,
    rng: &mut R,
    mut scale: impl FnMut(&mut R) -> f64,
) -> Result<ObservationMatrix> {
    check_shape(n, d)?;
    let (alpha, beta) = equicorr_sqrt(a, b, d)?;
    let mut values = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let s: f64 = z.iter().sum();
        let c = scale(rng);
        values.extend(z.iter().map(|v| c * (alpha * v + beta * s)));
    }
    ObservationMatrix::new(n, d, values)
}

/// Mean-zero normal with covariance `a I + b J`, in `O(nd)`.
pub fn gen_equicorr_normal<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    a: f64,
    b: f64,
    rng: &mut R,
) -> Result<ObservationMatrix> {
    equicorr_rows(n, d, a, b, rng, |_| 1.0)
}

/// Variances prescribed by a diagonal recipe.
pub fn recipe_variances(recipe: &DiagRecipe, d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    let v = match recipe {
        DiagRecipe::Spike { gamma } => {
            let mut v = vec![1.0; d];
            v[0] = (d as f64).powf(*gamma);
            v
        }
        DiagRecipe::HalfHalf { low, high } => {
            (0..d).map(|i| if i < d / 2 { *low } else { *high }).collect()
        }
        DiagRecipe::Custom(v) => {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            v.clone()
        }
    };
    if let Some(bad) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter(format!("variance {bad} must be positive")));
    }
    Ok(v)
}

/// Independent normals with variances from `recipe`.
pub fn gen_diag_normal<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    recipe: &DiagRecipe,
    rng: &mut R,
) -> Result<ObservationMatrix> {
    check_shape(n, d)?;
    let sd: Vec<f64> = recipe_variances(recipe, d)?.iter().map(|v| v.sqrt()).collect();
    let mut values = Vec::with_capacity(n * d);
    for _ in 0..n {
        for s in &sd {
            let z: f64 = rng.sample(StandardNormal);
            values.push(s * z);
        }
    }
    ObservationMatrix::new(n, d, values)
}

/// Elliptic Cauchy with scatter `a I + b J`: `sqrt(Sigma) Z / |W|`.
pub fn gen_elliptic_cauchy<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    a: f64,
    b: f64,
    rng: &mut R,
) -> Result<ObservationMatrix> {
    equicorr_rows(n, d, a, b, rng, |r| {
        let w: f64 = r.sample(StandardNormal);
        1.0 / w.abs()
    })
}

/// I.i.d. `Unif(-1, 1)` entries.
pub fn gen_hypercube_uniform<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<ObservationMatrix> {
    check_shape(n, d)?;
    let values = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    ObservationMatrix::new(n, d, values)
}

/// I.i.d. standard Laplace entries by inverse CDF.
pub fn gen_iid_laplace<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<ObservationMatrix> {
    check_shape(n, d)?;
    let mut values = Vec::with_capacity(n * d);
    while values.len() < n * d {
        let u: f64 = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail <= 0.0 {
            continue;
        }
        values.push(-u.signum() * tail.ln());
    }
    ObservationMatrix::new(n, d, values)
}

/// `X = R U` in the plane with `R ~ Unif[1, 5]` when `U1 U2 > 0` and
/// `R = 1` otherwise. Angularly symmetric but not spherical.
pub fn gen_angular2d<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ObservationMatrix> {
    check_shape(n, 2)?;
    let mut values = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let theta = rng.random_range(0.0..2.0 * PI);
        let (u1, u2) = (theta.cos(), theta.sin());
        let r = if u1 * u2 > 0.0 { rng.random_range(1.0..=5.0) } else { 1.0 };
        values.push(r * u1);
        values.push(r * u2);
    }
    ObservationMatrix::new(n, 2, values)
}

pub fn gen_spherical_normal<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<ObservationMatrix> {
    gen_diag_normal(n, d, &DiagRecipe::Custom(vec![1.0; d]), rng)
}

/// Spherical multivariate t: `Z sqrt(nu / chi2_nu)`.
pub fn gen_spherical_t<R: Rng + ?Sized>(n: usize, d: usize, nu: f64, rng: &mut R) -> Result<ObservationMatrix> {
    let chi = ChiSquared::new(nu)
        .map_err(|_| Error::InvalidParameter(format!("degrees of freedom {nu} must be positive")))?;
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("degrees of freedom {nu} must be positive")));
    }
    equicorr_rows(n, d, 1.0, 0.0, rng, |r| {
        let c: f64 = chi.sample(r);
        (nu / c).sqrt()
    })
}

/// Draws `n` rows in dimension `d` from `spec`.
pub fn generate<R: Rng + ?Sized>(spec: &GeneratorSpec, n: usize, d: usize, rng: &mut R) -> Result<ObservationMatrix> {
    match spec {
        GeneratorSpec::EquicorrNormal { a, b, location } => {
            let x = gen_equicorr_normal(n, d, *a, *b, rng)?;
            if *location == 0.0 {
                return Ok(x);
            }
            let shifted = x.as_slice().iter().map(|v| v + location).collect();
            ObservationMatrix::new(n, d, shifted)
        }
        GeneratorSpec::DiagNormal { recipe } => gen_diag_normal(n, d, recipe, rng),
        GeneratorSpec::EllipticCauchy { a, b } => gen_elliptic_cauchy(n, d, *a, *b, rng),
        GeneratorSpec::HypercubeUniform => gen_hypercube_uniform(n, d, rng),
        GeneratorSpec::IidLaplace => gen_iid_laplace(n, d, rng),
        GeneratorSpec::Angular2d => {
            if d != 2 {
                return Err(Error::InvalidParameter(format!(
                    "the angular example is two-dimensional, got d = {d}"
                )));
            }
            gen_angular2d(n, rng)
        }
        GeneratorSpec::SphericalNormal => gen_spherical_normal(n, d, rng),
        GeneratorSpec::SphericalT { nu } => gen_spherical_t(n, d, *nu, rng),
    }
}

/// Scatter matrix of `spec` in dimension `d` (covariance where finite;
/// the elliptic Cauchy reports its scatter parameter).
pub fn scatter(spec: &GeneratorSpec, d: usize) -> Result<Scatter> {
    Ok(match spec {
        GeneratorSpec::EquicorrNormal { a, b, .. } | GeneratorSpec::EllipticCauchy { a, b } => {
            equicorr_sqrt(*a, *b, d)?;
            Scatter::Equicorrelated { a: *a, b: *b }
        }
        GeneratorSpec::DiagNormal { recipe } => Scatter::Diagonal(recipe_variances(recipe, d)?),
        GeneratorSpec::HypercubeUniform => Scatter::Diagonal(vec![1.0 / 3.0; d]),
        GeneratorSpec::IidLaplace => Scatter::Diagonal(vec![2.0; d]),
        GeneratorSpec::SphericalNormal => Scatter::Diagonal(vec![1.0; d]),
        GeneratorSpec::SphericalT { nu } if *nu > 2.0 => Scatter::Diagonal(vec![nu / (nu - 2.0); d]),
        GeneratorSpec::SphericalT { .. } | GeneratorSpec::Angular2d => Scatter::Unavailable,
    })
}

/// Sphericity ratio `sum lambda^2 / (sum lambda)^2`, between `1/d` and 1.
pub fn eps_sphericity(eigs: &[f64]) -> Result<f64> {
    if let Some(bad) = eigs.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter(format!("eigenvalue {bad} must be nonnegative")));
    }
    let s: f64 = eigs.iter().sum();
    if s == 0.0 {
        return Err(Error::Degenerate("all eigenvalues are zero".into()));
    }
    Ok(eigs.iter().map(|l| l * l).sum::<f64>() / (s * s))
}

/// `d^-alpha Tr(D^2) - d^-(1+alpha) Tr(D)^2` for diagonal `D`.
///
/// Nonnegative by Jensen, zero iff all variances are equal. The exponent
/// describes how the variances grow with `d` and must come from the caller.
pub fn diag_signal(diag: &[f64], alpha_exp: f64) -> f64 {
    let d = diag.len() as f64;
    let tr: f64 = diag.iter().sum();
    let tr2: f64 = diag.iter().map(|v| v * v).sum();
    tr2 / d.powf(alpha_exp) - tr * tr / d.powf(1.0 + alpha_exp)
}
