//! Chi-square goodness of fit.

use crate::scalar::{FloatScalar, Scalar};

/// Pearson statistic of `counts` against a uniform expectation `n / K`.
///
/// Computed as `Σ (K·o − n)² / (K·n)` so the only division is the last one,
/// which keeps the value exact for rational scalars.
pub fn chi_square_uniform<T: Scalar>(counts: &[u64]) -> T {
    let n: u64 = counts.iter().sum();
    let k = counts.len() as u64;
    if n == 0 || k == 0 {
        return T::zero();
    }
    let denom = T::from_count(k * n);
    let total = T::from_count(n);
    counts.iter().fold(T::zero(), |acc, &o| {
        let diff = T::from_count(k * o) - total;
        acc + diff * diff / denom
    })
}

/// Pearson statistic of observed counts against arbitrary expected counts.
///
/// Categories with zero expectation must also have zero observations; they
/// contribute nothing.
pub fn chi_square_gof<T: Scalar>(observed: &[u64], expected: &[T]) -> T {
    assert_eq!(observed.len(), expected.len(), "category count mismatch");
    observed
        .iter()
        .zip(expected)
        .filter(|(_, &e)| e > T::zero())
        .fold(T::zero(), |acc, (&o, &e)| {
            let diff = T::from_count(o) - e;
            acc + diff * diff / e
        })
}

/// Survival function of the chi-square distribution: `P(X ≥ x)` with `df`
/// degrees of freedom.
pub fn chi_square_sf<T: FloatScalar>(x: T, df: usize) -> T {
    if df == 0 {
        return if x > T::zero() { T::zero() } else { T::one() };
    }
    if x <= T::zero() {
        return T::one();
    }
    let two = T::lit(2.0);
    upper_regularized_gamma(T::from_count(df as u64) / two, x / two)
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: FloatScalar>(x: T) -> T {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let half = T::lit(0.5);
    if x < half {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = T::lit(std::f64::consts::PI);
        return (pi / (pi * x).sin()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(COEFFS[0]);
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_count(i as u64));
    }
    let t = x + T::lit(7.5);
    T::lit(0.5 * (2.0 * std::f64::consts::PI).ln()) + (x + half) * t.ln() - t + acc.ln()
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn upper_regularized_gamma<T: FloatScalar>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::one();
    }
    if x < a + T::one() {
        T::one() - lower_series(a, x)
    } else {
        upper_continued_fraction(a, x)
    }
}

const MAX_ITER: usize = 1000;

fn prefactor<T: FloatScalar>(a: T, x: T) -> T {
    (a * x.ln() - x - ln_gamma(a)).exp()
}

fn lower_series<T: FloatScalar>(a: T, x: T) -> T {
    let eps = T::epsilon();
    let mut ap = a;
    let mut term = T::one() / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap = ap + T::one();
        term = term * x / ap;
        sum = sum + term;
        if term.abs() < sum.abs() * eps {
            break;
        }
    }
    sum * prefactor(a, x)
}

fn upper_continued_fraction<T: FloatScalar>(a: T, x: T) -> T {
    let eps = T::epsilon();
    let tiny = T::min_positive_value() / eps;
    let two = T::lit(2.0);
    let mut b = x + T::one() - a;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let i = T::from_count(i as u64);
        let an = -i * (i - a);
        b = b + two;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let delta = d * c;
        h = h * delta;
        if (delta - T::one()).abs() < eps {
            break;
        }
    }
    prefactor(a, x) * h
}
