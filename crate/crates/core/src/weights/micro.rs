//! Per-pair and per-level terms of the nested microcanonical weight models.
//!
//! Every function returns a log-probability (a log-density for continuous
//! families). Degenerate populations (a single value, an all-zero sum, or a
//! zero scaled variance) contribute zero.

use crate::special::{ln_binom, ln_factorial, ln_gamma_f, ln_multiset};
use std::f64::consts::PI;

/// Values pooled under a fixed non-negative sum are uniform on the simplex:
/// `ln (n−1)! − (n−1) ln μ`.
pub fn exponential_pair(n: u64, mu: f64) -> f64 {
    if n <= 1 || mu <= 0.0 {
        return 0.0;
    }
    ln_factorial(n - 1) - (n - 1) as f64 * mu.ln()
}

/// Integer values with a fixed sum are uniform over compositions:
/// `−ln C(n + μ − 1, μ)`.
pub fn geometric_pair(n: u64, mu: u64) -> f64 {
    if n == 0 || mu == 0 {
        return 0.0;
    }
    -ln_multiset(n, mu)
}

/// Bottom-level binomial pair: `μ` successes placed among `M m` trials,
/// `−ln C(M m, μ)`. The `Σ ln C(M, x)` part is partition independent.
pub fn binomial_base_pair(m: u64, bound: u64, mu: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    -ln_binom(bound * m, mu)
}

/// Bottom-level Poisson pair: `μ` events spread uniformly over `m` edges,
/// `ln μ! − μ ln m`. The `−Σ ln x!` part is partition independent.
pub fn poisson_base_pair(m: u64, mu: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    ln_factorial(mu) - mu as f64 * (m as f64).ln()
}

/// Values with fixed sum and sum of squares lie on a sphere slice of squared
/// radius `z`: `ln Γ((n−1)/2) + ½ ln n − ((n−1)/2) ln π − ((n−3)/2) ln z`.
pub fn normal_pair(n: u64, z: f64) -> f64 {
    if n <= 1 || z <= 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    ln_gamma_f((nf - 1.0) / 2.0) + 0.5 * nf.ln() - (nf - 1.0) / 2.0 * PI.ln() - (nf - 3.0) / 2.0 * z.ln()
}

/// Per-level term for the scaled variances: the `m_z` derivative factor and
/// the simplex law of `m_z` values summing to `μ_z`.
pub fn normal_level(m_z: u64, mu_z: f64) -> f64 {
    let mut t = 0.0;
    if m_z > 0 {
        t += (m_z as f64).ln();
    }
    if mu_z > 0.0 {
        t += exponential_pair(m_z, mu_z);
    }
    t
}

/// Prefactor tying the per-level totals `m_z μ_z` together across the
/// `l_bar` populated levels.
pub fn normal_global(l_bar: u64, total: f64) -> f64 {
    exponential_pair(l_bar, total)
}
