//! Moment series of sub-stochastic matrices.
//!
//! The renewal quantities need `Σ_{m>=1} m Q^{m-1}` and `Σ_{m>=1} m² Q^{m-1}`
//! for a failure matrix `Q`. Both have exact closed forms, `(I-Q)^{-2}` and
//! `(I+Q)(I-Q)^{-3}`, whenever the spectral radius of `Q` is below one.
//! [`perturbed_diagonalization_moments`] keeps the eigendecomposition route as
//! a comparison path.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

const RADIUS_THRESHOLD: f64 = 1.0 - 1e-9;
const POWER_STEPS: usize = 50;

/// Upper bound on the spectral radius of `Q` from 50 steps of power
/// iteration on `|Q|`: `min_k ‖|Q|^k 1‖_∞^{1/k}`.
pub fn spectral_radius_bound(q: &DMatrix<f64>) -> f64 {
    let abs = q.abs();
    let mut v = nalgebra::DVector::from_element(q.nrows(), 1.0);
    let mut best = f64::INFINITY;
    for k in 1..=POWER_STEPS {
        v = &abs * v;
        let norm = v.amax();
        if norm == 0.0 {
            return 0.0;
        }
        best = best.min(norm.powf(1.0 / k as f64));
    }
    best
}

fn check_convergent(q: &DMatrix<f64>) -> Result<()> {
    if !q.is_square() {
        return Err(Error::Domain("moment series needs a square matrix".into()));
    }
    let radius = spectral_radius_bound(q);
    if radius >= RADIUS_THRESHOLD {
        return Err(Error::IllConditioned(radius));
    }
    Ok(())
}

/// `Σ_{m>=1} m Q^{m-1} = (I - Q)^{-2}`, by two linear solves.
pub fn neumann_first_moment(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_convergent(q)?;
    let n = q.nrows();
    let lu = (DMatrix::identity(n, n) - q).lu();
    let once = lu.solve(&DMatrix::identity(n, n)).ok_or(Error::Singular)?;
    lu.solve(&once).ok_or(Error::Singular)
}

/// `Σ_{m>=1} m² Q^{m-1} = (I + Q)(I - Q)^{-3}`, by three linear solves.
pub fn neumann_second_moment(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_convergent(q)?;
    let n = q.nrows();
    let lu = (DMatrix::identity(n, n) - q).lu();
    let mut acc = DMatrix::identity(n, n) + q;
    for _ in 0..3 {
        acc = lu.solve(&acc).ok_or(Error::Singular)?;
    }
    Ok(acc)
}

/// Both moment series through an (optionally perturbed) eigendecomposition.
#[derive(Debug, Clone)]
pub struct DiagonalizationMoments {
    pub first: DMatrix<f64>,
    pub second: DMatrix<f64>,
    /// Number of decompositions tried; the first one is unperturbed.
    pub attempts: usize,
    /// Max-norm distance of `first` from the exact closed form.
    pub first_error: f64,
    /// Max-norm distance of `second` from the exact closed form.
    pub second_error: f64,
}

const MAX_ATTEMPTS: usize = 5;
/// Variance of the Gaussian noise added to the diagonal on retries.
const NOISE_VARIANCE: f64 = 1e-6;
const MAX_CONDITION: f64 = 1e10;

/// Approximates the moment series as `V f(Λ) V^{-1}`.
///
/// The first attempt decomposes `Q` as is. When the eigenvector matrix comes
/// out singular or badly conditioned (defective `Q`), Gaussian noise of
/// variance `1e-6` is added to the diagonal of `Q` and the decomposition is
/// retried, up to five attempts in total. The result is an approximation:
/// the reported errors compare it to the Neumann closed forms.
pub fn perturbed_diagonalization_moments(q: &DMatrix<f64>, seed: u64) -> Result<DiagonalizationMoments> {
    let exact_first = neumann_first_moment(q)?;
    let exact_second = neumann_second_moment(q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_VARIANCE.sqrt()).expect("valid normal");

    for attempt in 0..MAX_ATTEMPTS {
        let mut candidate = q.clone();
        if attempt > 0 {
            for i in 0..candidate.nrows() {
                candidate[(i, i)] += noise.sample(&mut rng);
            }
        }
        let Some((vectors, values)) = eigendecompose(&candidate, &mut rng) else {
            continue;
        };
        let Some(inverse) = vectors.clone().try_inverse() else {
            continue;
        };
        let condition = vectors.norm() * inverse.norm();
        if !condition.is_finite() || condition > MAX_CONDITION {
            continue;
        }
        let apply = |f: &dyn Fn(Complex64) -> Complex64| -> DMatrix<f64> {
            let mut scaled = vectors.clone();
            for (j, mut col) in scaled.column_iter_mut().enumerate() {
                col *= f(values[j]);
            }
            (scaled * &inverse).map(|z| z.re)
        };
        let one = Complex64::new(1.0, 0.0);
        let first = apply(&|l| one / ((one - l) * (one - l)));
        let second = apply(&|l| (one + l) / ((one - l) * (one - l) * (one - l)));
        let first_error = (&first - &exact_first).amax();
        let second_error = (&second - &exact_second).amax();
        return Ok(DiagonalizationMoments {
            first,
            second,
            attempts: attempt + 1,
            first_error,
            second_error,
        });
    }
    Err(Error::Singular)
}

/// Eigenvalues from the real Schur form, eigenvectors by complex inverse
/// iteration. Returns `None` when the decomposition does not reproduce `q`.
fn eigendecompose(q: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Option<(DMatrix<Complex64>, Vec<Complex64>)> {
    let n = q.nrows();
    let values: Vec<Complex64> = q.complex_eigenvalues().iter().copied().collect();
    let qc = q.map(|v| Complex64::new(v, 0.0));
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for (j, &lambda) in values.iter().enumerate() {
        let shift = lambda + Complex64::new(1e-10 * (1.0 + lambda.norm()), 0.0);
        let shifted = &qc - DMatrix::<Complex64>::identity(n, n) * shift;
        let lu = shifted.lu();
        let mut v = nalgebra::DVector::<Complex64>::from_fn(n, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            Complex64::new(re, 0.0)
        });
        for _ in 0..3 {
            v = lu.solve(&v)?;
            let norm = v.norm();
            if !norm.is_finite() || norm == 0.0 {
                return None;
            }
            v /= Complex64::new(norm, 0.0);
        }
        vectors.set_column(j, &v);
    }
    // Reject decompositions that do not satisfy Q V = V Λ.
    let mut scaled = vectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= values[j];
    }
    let residual = (&qc * &vectors - scaled).norm();
    (residual < 1e-6).then_some((vectors, values))
}
