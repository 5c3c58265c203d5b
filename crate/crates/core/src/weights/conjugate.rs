//! Closed-form marginal likelihoods of the flat conjugate weight models.
//!
//! Each group pair has its own parameters drawn from a shared conjugate prior,
//! which integrates out analytically. Partition-independent factors such as
//! `Σ ln C(M, x)` live in the channel constant.

use crate::channel::{Family, Prior};
use crate::special::{ln_beta, ln_gamma_f};
use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::neldermead::NelderMead;
use std::f64::consts::PI;

/// Sufficient statistics of one bottom-level pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatStats {
    pub m: u64,
    pub sum: f64,
    pub sumsq: f64,
}

/// Log marginal likelihood of one pair's values, excluding the channel
/// constant. `bound` is the binomial trial count.
pub fn pair_log_marginal(family: Family, prior: &Prior, bound: u64, s: FlatStats) -> f64 {
    if s.m == 0 {
        return 0.0;
    }
    let m = s.m as f64;
    match (family, *prior) {
        (Family::Exponential, Prior::Gamma { alpha, beta }) => {
            ln_gamma_f(m + alpha) - ln_gamma_f(alpha) + alpha * beta.ln() - (m + alpha) * (s.sum + beta).ln()
        }
        (Family::Poisson, Prior::Gamma { alpha, beta }) => {
            alpha * beta.ln() + ln_gamma_f(s.sum + alpha) - ln_gamma_f(alpha) - (s.sum + alpha) * (m + beta).ln()
        }
        (Family::Geometric, Prior::Beta { alpha, beta }) => ln_beta(m + alpha, s.sum + beta) - ln_beta(alpha, beta),
        (Family::Binomial, Prior::Beta { alpha, beta }) => {
            let trials = bound as f64 * m;
            ln_beta(s.sum + alpha, trials - s.sum + beta) - ln_beta(alpha, beta)
        }
        (
            Family::Normal,
            Prior::NormalInvChi2 {
                mu0,
                kappa0,
                nu0,
                sigma0_sq,
            },
        ) => {
            let mean = s.sum / m;
            let ss = (s.sumsq - s.sum * mean).max(0.0);
            let kappa_n = kappa0 + m;
            let nu_n = nu0 + m;
            let scatter = nu0 * sigma0_sq + ss + kappa0 * m / kappa_n * (mean - mu0).powi(2);
            ln_gamma_f(nu_n / 2.0) - ln_gamma_f(nu0 / 2.0)
                + 0.5 * (kappa0 / kappa_n).ln()
                + nu0 / 2.0 * (nu0 * sigma0_sq).ln()
                - nu_n / 2.0 * scatter.ln()
                - m / 2.0 * PI.ln()
        }
        (family, prior) => panic!("prior {prior:?} does not belong to the {} family", family.name()),
    }
}

/// Sum of [`pair_log_marginal`] over pairs.
pub fn log_marginal(family: Family, prior: &Prior, bound: u64, pairs: &[FlatStats]) -> f64 {
    pairs.iter().map(|&s| pair_log_marginal(family, prior, bound, s)).sum()
}

struct HyperCost<'a> {
    family: Family,
    template: Prior,
    bound: u64,
    pairs: &'a [FlatStats],
}

impl HyperCost<'_> {
    /// Positive hyperparameters are optimised on a log scale; the normal prior
    /// mean is left unconstrained.
    fn decode(&self, p: &[f64]) -> Prior {
        let v: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if matches!(self.template, Prior::NormalInvChi2 { .. }) && i == 0 {
                    x
                } else {
                    x.exp()
                }
            })
            .collect();
        self.template.with_values(&v)
    }

    fn encode(&self, prior: &Prior) -> Vec<f64> {
        prior
            .to_vec()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if matches!(self.template, Prior::NormalInvChi2 { .. }) && i == 0 {
                    x
                } else {
                    x.ln()
                }
            })
            .collect()
    }
}

impl CostFunction for HyperCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, ArgminError> {
        let prior = self.decode(p);
        let v = -log_marginal(self.family, &prior, self.bound, self.pairs);
        Ok(if v.is_finite() { v } else { f64::MAX })
    }
}

/// Maximises the conjugate marginal likelihood over the hyperparameters,
/// starting from `start`. Returns the best prior and its log marginal.
pub fn optimize_prior(family: Family, start: Prior, bound: u64, pairs: &[FlatStats]) -> (Prior, f64) {
    let cost = HyperCost {
        family,
        template: start,
        bound,
        pairs,
    };
    let x0 = cost.encode(&start);
    let mut simplex = vec![x0.clone()];
    for i in 0..x0.len() {
        let mut v = x0.clone();
        v[i] += 0.5;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-10)
        .expect("tolerance is positive");
    let best = Executor::new(cost, solver)
        .configure(|state| state.max_iters(2000))
        .run()
        .ok()
        .and_then(|res| res.state().get_best_param().cloned());
    let cost = HyperCost {
        family,
        template: start,
        bound,
        pairs,
    };
    let prior = best.map_or(start, |p| cost.decode(&p));
    let ll = log_marginal(family, &prior, bound, pairs);
    let start_ll = log_marginal(family, &start, bound, pairs);
    if ll >= start_ll {
        (prior, ll)
    } else {
        (start, start_ll)
    }
}
