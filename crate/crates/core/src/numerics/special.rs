//! Poisson terms, incomplete gamma and Erlang distribution functions for
//! integer orders.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Above this mean Poisson terms are evaluated in the log domain.
const LOG_DOMAIN_MEAN: f64 = 50.0;

const LN_FACTORIAL_TABLE: usize = 1024;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = 0.0;
        table.push(0.0);
        for n in 1..LN_FACTORIAL_TABLE {
            acc += (n as f64).ln();
            table.push(acc);
        }
        table
    })
}

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    if n < LN_FACTORIAL_TABLE {
        return ln_factorial_table()[n];
    }
    // Stirling series, far beyond any order used here.
    let x = n as f64 + 1.0;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x.powi(3))
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if n <= 60 {
        let mut acc = 1.0_f64;
        for i in 0..k {
            acc = acc * (n - i) as f64 / (i + 1) as f64;
        }
        return acc.round();
    }
    (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp()
}

/// `P(Pois(mean) = k)`.
pub fn poisson_pmf(k: usize, mean: f64) -> f64 {
    if mean <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mean.ln() - mean - ln_factorial(k)).exp()
}

/// `P(Pois(mean) = k)` for `k = 0..len`.
pub fn poisson_pmfs(len: usize, mean: f64) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    if mean <= 0.0 {
        let mut out = vec![0.0; len];
        out[0] = 1.0;
        return out;
    }
    if mean > LOG_DOMAIN_MEAN {
        return (0..len).map(|k| poisson_pmf(k, mean)).collect();
    }
    let mut out = Vec::with_capacity(len);
    let mut term = (-mean).exp();
    out.push(term);
    for k in 1..len {
        term *= mean / k as f64;
        out.push(term);
    }
    out
}

/// Regularized lower incomplete gamma `P(k, x) = P(Pois(x) >= k)` for
/// integer `k >= 1`.
fn regularized_lower(k: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < k as f64 {
        // Upper Poisson tail, summed directly to keep relative accuracy.
        let mut term = poisson_pmf(k, x);
        let mut sum = term;
        let mut i = k;
        while term > sum * 1e-17 && term > 0.0 {
            i += 1;
            term *= x / i as f64;
            sum += term;
        }
        sum.min(1.0)
    } else {
        let head: f64 = poisson_pmfs(k, x).iter().sum();
        (1.0 - head).max(0.0)
    }
}

/// `γ_k(x) = ∫_0^x e^{-t} t^{k-1} dt` for integer `k >= 1`.
pub fn lower_incomplete_gamma(k: usize, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("incomplete gamma order must be at least 1".into()));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("incomplete gamma argument must be nonnegative, got {x}")));
    }
    Ok(ln_factorial(k - 1).exp() * regularized_lower(k, x))
}

/// CDF at `t` of the sum of `k` exponentials with rate `rate`, i.e.
/// `γ_k(rate·t) / (k-1)!`.
pub fn erlang_cdf(k: usize, rate: f64, t: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("Erlang order must be at least 1".into()));
    }
    if !(rate > 0.0) {
        return Err(Error::Domain(format!("Erlang rate must be positive, got {rate}")));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("Erlang argument must be nonnegative, got {t}")));
    }
    Ok(regularized_lower(k, rate * t))
}

/// `F_j(t)` for `j = 0..=max_order`, where `F_j` is the Erlang-`j` CDF with
/// rate `rate` and `F_0 = 1`.
///
/// Entries are accumulated from the tail when the mean is below the largest
/// order, so small probabilities keep their relative accuracy.
pub fn erlang_cdfs(max_order: usize, rate: f64, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    out[0] = 1.0;
    let x = rate * t;
    if max_order == 0 || x <= 0.0 {
        return out;
    }
    if x < max_order as f64 {
        let pmf = poisson_pmfs(max_order, x);
        let mut acc = regularized_lower(max_order, x);
        out[max_order] = acc;
        for j in (1..max_order).rev() {
            acc += pmf[j];
            out[j] = acc.min(1.0);
        }
    } else {
        let pmf = poisson_pmfs(max_order, x);
        let mut head = 0.0;
        for j in 1..=max_order {
            head += pmf[j - 1];
            out[j] = (1.0 - head).max(0.0);
        }
    }
    out
}

/// `∫_0^len F_j(t) dt` for `j = 0..=max_order`, with `F_0 = 1`.
///
/// Uses `∫_0^ℓ F_j = ℓ F_j(ℓ) - (j/rate) F_{j+1}(ℓ)`.
pub fn erlang_cdf_integrals(max_order: usize, rate: f64, len: f64) -> Vec<f64> {
    let cdf = erlang_cdfs(max_order + 1, rate, len);
    (0..=max_order)
        .map(|j| {
            if j == 0 {
                len
            } else {
                (len * cdf[j] - j as f64 / rate * cdf[j + 1]).max(0.0)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Composite Simpson rule, used as an independent quadrature oracle.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn incomplete_gamma_examples() {
        assert_eq!(lower_incomplete_gamma(1, 0.0).unwrap(), 0.0);
        assert_relative_eq!(lower_incomplete_gamma(1, 1.0).unwrap(), 0.6321205588285577, epsilon = 1e-15);
        assert_relative_eq!(lower_incomplete_gamma(2, 1.0).unwrap(), 0.2642411176571153, epsilon = 1e-15);
        let quad = simpson(|t| (-t).exp() * t, 0.0, 1.0, 2000);
        assert_relative_eq!(lower_incomplete_gamma(2, 1.0).unwrap(), quad, epsilon = 1e-12);
    }

    #[test]
    fn incomplete_gamma_matches_quadrature_across_orders() {
        for k in 1..=12 {
            for &x in &[0.05, 0.7, 3.0, 9.5, 20.0] {
                let quad = simpson(|t| (-t).exp() * t.powi(k as i32 - 1), 0.0, x, 4000);
                let value = lower_incomplete_gamma(k, x).unwrap();
                assert!((value - quad).abs() <= 1e-9 * quad.max(1.0), "k={k} x={x}: {value} vs {quad}");
            }
        }
    }

    #[test]
    fn incomplete_gamma_rejects_bad_input() {
        assert!(lower_incomplete_gamma(0, 1.0).is_err());
        assert!(lower_incomplete_gamma(1, -0.5).is_err());
        assert!(erlang_cdf(1, 0.0, 1.0).is_err());
    }

    #[test]
    fn erlang_cdf_examples() {
        assert_eq!(erlang_cdf(1, 5.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(erlang_cdf(1, 1.0, 2f64.ln()).unwrap(), 0.5, epsilon = 1e-15);
        assert!((erlang_cdf(3, 2.0, 10.0).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn vectorized_cdfs_match_scalar() {
        for &(rate, t) in &[(5.0, 0.01), (5.0, 1.0), (10.0, 3.0), (80.0, 1.0), (1.0, 200.0)] {
            let all = erlang_cdfs(12, rate, t);
            assert_eq!(all[0], 1.0);
            for j in 1..=12 {
                let single = erlang_cdf(j, rate, t).unwrap();
                assert!((all[j] - single).abs() <= 1e-14 + 1e-12 * single, "j={j}");
            }
        }
    }

    #[test]
    fn small_tail_keeps_relative_accuracy() {
        // F_5 at x = 1e-3 is about x^5 / 5!.
        let v = erlang_cdfs(5, 1.0, 1e-3)[5];
        assert_relative_eq!(v, 1e-15 / 120.0, max_relative = 1e-3);
    }

    #[test]
    fn log_domain_poisson_for_large_means() {
        let pmf = poisson_pmfs(200, 120.0);
        let total: f64 = pmf.iter().sum();
        assert!(total > 0.99 && total <= 1.0 + 1e-12);
        assert_relative_eq!(pmf[120], poisson_pmf(120, 120.0), max_relative = 1e-12);
    }

    #[test]
    fn cdf_integrals_match_quadrature() {
        let ints = erlang_cdf_integrals(6, 4.0, 0.8);
        for j in 1..=6 {
            let quad = simpson(|t| erlang_cdf(j, 4.0, t).unwrap(), 0.0, 0.8, 2000);
            assert!((ints[j] - quad).abs() < 1e-10, "j={j}");
        }
        assert_eq!(ints[0], 0.8);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(8, 0), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_relative_eq!(binomial(64, 32), 1_832_624_140_942_590_534.0, max_relative = 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn erlang_cdf_is_monotone(k in 1usize..20, t1 in 0.0f64..10.0, dt in 0.0f64..5.0) {
            let a = erlang_cdf(k, 1.5, t1).unwrap();
            let b = erlang_cdf(k, 1.5, t1 + dt).unwrap();
            proptest::prop_assert!(b + 1e-15 >= a);
            proptest::prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
