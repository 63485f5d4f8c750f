//! Row-stochastic matrices and their stationary distributions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const ENTRY_TOLERANCE: f64 = 1e-12;
const ROW_SUM_TOLERANCE: f64 = 1e-9;
const STATIONARY_RESIDUAL: f64 = 1e-9;

/// A square matrix with entries in `[0, 1]` whose rows sum to one, or to at
/// most one for the sub-stochastic variant.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    inner: DMatrix<f64>,
}

impl StochasticMatrix {
    /// Validates a row-stochastic matrix. Entries within `1e-12` of `[0, 1]`
    /// are clamped, anything further out is an error.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let m = Self::checked(matrix)?;
        for (i, sum) in m.row_sums().iter().enumerate() {
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Inconsistent(format!("row {i} sums to {sum}")));
            }
        }
        Ok(m)
    }

    /// Validates a sub-stochastic matrix (rows sum to at most one).
    pub fn substochastic(matrix: DMatrix<f64>) -> Result<Self> {
        let m = Self::checked(matrix)?;
        for (i, sum) in m.row_sums().iter().enumerate() {
            if *sum > 1.0 + ROW_SUM_TOLERANCE {
                return Err(Error::Inconsistent(format!("row {i} sums to {sum} > 1")));
            }
        }
        Ok(m)
    }

    fn checked(mut matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Domain(format!(
                "stochastic matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        for v in matrix.iter_mut() {
            if !v.is_finite() || *v < -ENTRY_TOLERANCE || *v > 1.0 + ENTRY_TOLERANCE {
                return Err(Error::Inconsistent(format!("entry {v} outside [0, 1]")));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self { inner: matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { inner: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.inner.row_iter().map(|r| r.sum()).collect()
    }
}

/// `P^m` by repeated squaring; `P^0` is the identity.
pub fn matrix_power(p: &StochasticMatrix, m: u32) -> StochasticMatrix {
    let mut result = DMatrix::identity(p.dim(), p.dim());
    let mut base = p.inner.clone();
    let mut exp = m;
    while exp > 0 {
        if exp & 1 == 1 {
            result = &result * &base;
        }
        exp >>= 1;
        if exp > 0 {
            base = &base * &base;
        }
    }
    // Rounding can push entries a hair outside [0, 1].
    result.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    StochasticMatrix { inner: result }
}

/// Stationary vector `π` of `p`, restricted to `support` when given (states
/// outside it get zero mass). The chain on the support must have a single
/// recurrent class; it may be periodic.
///
/// Solves `π (P - I) = 0` with one balance equation replaced by `Σπ = 1`.
pub fn stationary_distribution(p: &StochasticMatrix, support: Option<&[usize]>) -> Result<DVector<f64>> {
    let n = p.dim();
    let all: Vec<usize>;
    let support = match support {
        Some(s) => s,
        None => {
            all = (0..n).collect();
            &all
        }
    };
    if support.is_empty() {
        return Err(Error::Domain("empty support".into()));
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= n) {
        return Err(Error::Domain(format!("support index {bad} out of range for dimension {n}")));
    }
    let k = support.len();
    let mut system = DMatrix::<f64>::zeros(k, k);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            // Transposed: row c of the system is the balance equation of state j.
            system[(c, r)] = p.get(i, j) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for c in 0..k {
        system[(k - 1, c)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k);
    rhs[k - 1] = 1.0;
    let solution = system.lu().solve(&rhs).ok_or(Error::Singular)?;

    let mut pi = DVector::<f64>::zeros(n);
    for (r, &i) in support.iter().enumerate() {
        let v = solution[r];
        if v < -STATIONARY_RESIDUAL {
            return Err(Error::NoConvergence { residual: -v });
        }
        pi[i] = v.max(0.0);
    }
    let total = pi.sum();
    pi /= total;

    let residual = (pi.transpose() * &p.inner - pi.transpose()).amax();
    if residual > STATIONARY_RESIDUAL {
        return Err(Error::NoConvergence { residual });
    }
    Ok(pi)
}
