//! Single-value marginals of the microcanonical populations.
//!
//! For a population of `n` values with fixed sufficient statistics, the law of
//! one value `x` is the ratio between the number (or volume) of completions of
//! the remaining `n − 1` values and the total. Degenerate populations put all
//! their mass on atoms, which are reported separately from the density.

use crate::channel::Family;
use crate::special::{ln_binom, ln_gamma_f, ln_multiset, xlny};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MicroMarginal {
    pub family: Family,
    /// Population size.
    pub n: u64,
    /// Sum of the values.
    pub mu: f64,
    /// Sum of squared values (normal family only).
    pub nu: f64,
    /// Binomial trial count.
    pub bound: u64,
}

impl MicroMarginal {
    pub fn new(family: Family, n: u64, mu: f64, nu: f64, bound: u64) -> Self {
        Self {
            family,
            n,
            mu,
            nu,
            bound,
        }
    }

    /// `z = ν − μ²/n`, the squared radius of the sphere slice.
    fn z(&self) -> f64 {
        let n = self.n as f64;
        (self.nu - self.mu * self.mu / n).max(0.0)
    }

    fn normal_degenerate(&self) -> bool {
        self.n <= 1 || self.z() <= 1e-12 * self.nu.abs()
    }

    /// Point masses for continuous families; empty for discrete ones.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self.family {
            Family::Exponential => {
                if self.n == 1 {
                    vec![(self.mu, 1.0)]
                } else if self.mu <= 0.0 {
                    vec![(0.0, 1.0)]
                } else {
                    Vec::new()
                }
            }
            Family::Normal => {
                let mean = self.mu / self.n as f64;
                if self.normal_degenerate() {
                    vec![(mean, 1.0)]
                } else if self.n == 2 {
                    let h = (self.z() / 2.0).sqrt();
                    vec![(mean - h, 0.5), (mean + h, 0.5)]
                } else {
                    Vec::new()
                }
            }
            _ => Vec::new(),
        }
    }

    /// Range outside of which the marginal vanishes.
    pub fn support(&self) -> (f64, f64) {
        match self.family {
            Family::Exponential => (0.0, self.mu.max(0.0)),
            Family::Normal => {
                let n = self.n as f64;
                let mean = self.mu / n;
                if self.n <= 1 {
                    return (mean, mean);
                }
                let r = (self.z() * (n - 1.0) / n).sqrt();
                (mean - r, mean + r)
            }
            Family::Binomial => (0.0, (self.mu.max(0.0)).min(self.bound as f64)),
            Family::Geometric | Family::Poisson => (0.0, self.mu.max(0.0)),
        }
    }

    /// Density (continuous families, excluding atoms) or probability mass
    /// (discrete families) at `x`. Zero outside the support.
    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let ninf = f64::NEG_INFINITY;
        match self.family {
            Family::Exponential => {
                if !self.atoms().is_empty() || x < 0.0 || x > self.mu {
                    return ninf;
                }
                let n = self.n as f64;
                (n - 1.0).ln() + xlny(n - 2.0, self.mu - x) - (n - 1.0) * self.mu.ln()
            }
            Family::Normal => {
                if !self.atoms().is_empty() {
                    return ninf;
                }
                let n = self.n as f64;
                let z = self.z();
                let zr = z - n / (n - 1.0) * (x - self.mu / n).powi(2);
                if zr < 0.0 {
                    return ninf;
                }
                ln_gamma_f((n - 1.0) / 2.0) - ln_gamma_f((n - 2.0) / 2.0)
                    + 0.5 * (n / (PI * (n - 1.0))).ln()
                    + xlny((n - 4.0) / 2.0, zr)
                    - (n - 3.0) / 2.0 * z.ln()
            }
            Family::Geometric | Family::Binomial | Family::Poisson => {
                if x < 0.0 || x.fract() != 0.0 || x > self.mu {
                    return ninf;
                }
                let k = x as u64;
                let mu = self.mu as u64;
                let n = self.n;
                match self.family {
                    Family::Geometric => ln_multiset(n - 1, mu - k) - ln_multiset(n, mu),
                    Family::Binomial => {
                        let m = self.bound;
                        if k > m {
                            return ninf;
                        }
                        ln_binom(m, k) + ln_binom(m * (n - 1), mu - k) - ln_binom(m * n, mu)
                    }
                    _ => {
                        let p = 1.0 / n as f64;
                        ln_binom(mu, k) + k as f64 * p.ln() + xlny((mu - k) as f64, 1.0 - p)
                    }
                }
            }
        }
    }
}

/// Density or mass of one value drawn from a population of `n` values with
/// sum `mu` (and sum of squares `nu` for the normal family).
pub fn micro_marginal_pdf(family: Family, n: u64, mu: f64, nu: f64, bound: u64, x: f64) -> f64 {
    MicroMarginal::new(family, n, mu, nu, bound).pdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let e = MicroMarginal::new(Family::Exponential, 2, 2.0, 0.0, 0);
        assert!((e.pdf(0.3) - 0.5).abs() < 1e-12);
        assert!((e.pdf(2.0) - 0.5).abs() < 1e-12);
        assert_eq!(e.pdf(2.1), 0.0);
        let g = MicroMarginal::new(Family::Geometric, 2, 3.0, 0.0, 0);
        assert!((g.pdf(1.0) - 0.25).abs() < 1e-12);
        let b = MicroMarginal::new(Family::Binomial, 2, 2.0, 0.0, 2);
        assert!((b.pdf(1.0) - 2.0 / 3.0).abs() < 1e-12);
        let p = MicroMarginal::new(Family::Poisson, 2, 2.0, 0.0, 0);
        assert!((p.pdf(1.0) - 0.5).abs() < 1e-12);
        assert!((p.pdf(0.0) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn degenerate_populations_are_atoms() {
        let n = MicroMarginal::new(Family::Normal, 2, 0.0, 2.0, 0);
        assert_eq!(n.atoms(), vec![(-1.0, 0.5), (1.0, 0.5)]);
        let n = MicroMarginal::new(Family::Normal, 4, 4.0, 4.0, 0);
        assert_eq!(n.atoms(), vec![(1.0, 1.0)]);
        let e = MicroMarginal::new(Family::Exponential, 1, 3.0, 0.0, 0);
        assert_eq!(e.atoms(), vec![(3.0, 1.0)]);
        let g = MicroMarginal::new(Family::Geometric, 1, 3.0, 0.0, 0);
        assert_eq!(g.pdf(3.0), 1.0);
        assert_eq!(g.pdf(2.0), 0.0);
    }
}
