//! Log-space combinatorial helpers.
//!
//! Log-factorials for small integers come from a lazily built table; larger
//! arguments fall back to `ln Γ`.

use statrs::function::gamma::ln_gamma;
use std::sync::OnceLock;

const TABLE_LEN: usize = 1 << 16;

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..TABLE_LEN as u64)
            .map(statrs::function::factorial::ln_factorial)
            .collect()
    })
}

pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < TABLE_LEN {
        table()[n as usize]
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

pub fn ln_gamma_f(x: f64) -> f64 {
    ln_gamma(x)
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binom(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `ln C(n + k - 1, k)`, the number of multisets of size `k` drawn from `n`
/// kinds. Zero when `k == 0`; `-inf` when `n == 0 < k`.
pub fn ln_multiset(n: u64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    ln_binom(n + k - 1, k)
}

/// `ln B(a, b)` for positive reals.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln (2m)!!` for the double factorial of an even number.
pub fn ln_double_factorial_even(m: u64) -> f64 {
    m as f64 * std::f64::consts::LN_2 + ln_factorial(m)
}

/// `x ln y` with the convention `0 ln 0 = 0`.
pub fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Numerically stable `ln Σ exp(v)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
