//! Direct samplers for the hard-constraint sets behind the microcanonical
//! weight models.
//!
//! Each sampler draws whole populations uniformly under the constraints:
//!
//! - exponential: the simplex `Σx = μ`, `x ≥ 0`
//! - normal: the sphere slice `Σx = μ`, `Σx² = ν`
//! - geometric: integer compositions of `μ`
//! - binomial: `μ` successes among `M n` trials
//! - Poisson: `μ` balls thrown into `n` boxes

use super::OracleError;
use crate::channel::Family;
use rand::seq::index;
use rand::{Rng, RngExt};
use rand_distr::{Exp1, StandardNormal};

/// Fixed statistics of a population.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstrainedStats {
    pub sum: f64,
    /// Sum of squares; normal family only.
    pub sumsq: f64,
    /// Trials per value; binomial family only.
    pub bound: u64,
}

impl ConstrainedStats {
    pub fn sum(sum: f64) -> Self {
        Self {
            sum,
            sumsq: 0.0,
            bound: 0,
        }
    }
}

fn count(x: f64, what: &str) -> Result<u64, OracleError> {
    if x < 0.0 || x.fract() != 0.0 || !x.is_finite() {
        return Err(OracleError::Infeasible(format!(
            "{what} {x} is not a non-negative integer"
        )));
    }
    Ok(x as u64)
}

/// Draws `samples` populations of `n` values uniformly from the constraint
/// set of `family`.
pub fn constrained_sample<R: Rng + ?Sized>(
    family: Family,
    n: usize,
    stats: ConstrainedStats,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, OracleError> {
    if n == 0 {
        return Err(OracleError::Infeasible("population is empty".into()));
    }
    let mu = stats.sum;
    match family {
        Family::Exponential => {
            if mu < 0.0 || !mu.is_finite() {
                return Err(OracleError::Infeasible(format!("sum {mu} is negative")));
            }
            Ok((0..samples)
                .map(|_| {
                    let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                    let t: f64 = e.iter().sum();
                    e.iter().map(|x| mu * x / t).collect()
                })
                .collect())
        }
        Family::Normal => {
            let nf = n as f64;
            let z = stats.sumsq - mu * mu / nf;
            if z < -1e-9 * stats.sumsq.abs().max(1.0) {
                return Err(OracleError::Infeasible(format!(
                    "sum of squares {} is below sum²/n = {}",
                    stats.sumsq,
                    mu * mu / nf
                )));
            }
            let z = z.max(0.0);
            if n == 1 && z > 1e-9 * stats.sumsq.abs().max(1.0) {
                return Err(OracleError::Infeasible("a single value cannot have spread".into()));
            }
            let mean = mu / nf;
            Ok((0..samples)
                .map(|_| {
                    if n == 1 || z == 0.0 {
                        return vec![mean; n];
                    }
                    // An isotropic Gaussian projected onto the zero-sum
                    // hyperplane stays isotropic there; rescaling puts it
                    // uniformly on the sphere of radius √z.
                    let g: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    let gm = g.iter().sum::<f64>() / nf;
                    let r = g.iter().map(|x| (x - gm).powi(2)).sum::<f64>().sqrt();
                    g.iter().map(|x| mean + (x - gm) * z.sqrt() / r).collect()
                })
                .collect())
        }
        Family::Geometric => {
            let total = count(mu, "sum")? as usize;
            // Stars and bars: n − 1 bars among total + n − 1 slots.
            Ok((0..samples)
                .map(|_| {
                    let mut bars = index::sample(rng, total + n - 1, n - 1).into_vec();
                    bars.sort_unstable();
                    let mut out = Vec::with_capacity(n);
                    let mut prev = 0usize;
                    for (i, &b) in bars.iter().enumerate() {
                        out.push((b - i - prev) as f64);
                        prev = b - i;
                    }
                    out.push((total - prev) as f64);
                    out
                })
                .collect())
        }
        Family::Binomial => {
            let total = count(mu, "sum")? as usize;
            let m = stats.bound as usize;
            if m == 0 {
                return Err(OracleError::Infeasible("binomial needs at least one trial".into()));
            }
            if total > m * n {
                return Err(OracleError::Infeasible(format!(
                    "{total} successes exceed {} trials",
                    m * n
                )));
            }
            Ok((0..samples)
                .map(|_| {
                    let mut out = vec![0.0; n];
                    for slot in index::sample(rng, m * n, total) {
                        out[slot / m] += 1.0;
                    }
                    out
                })
                .collect())
        }
        Family::Poisson => {
            let total = count(mu, "sum")?;
            Ok((0..samples)
                .map(|_| {
                    let mut out = vec![0.0; n];
                    for _ in 0..total {
                        out[rng.random_range(0..n)] += 1.0;
                    }
                    out
                })
                .collect())
        }
    }
}
