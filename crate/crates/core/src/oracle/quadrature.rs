//! Numerical integration and goodness-of-fit helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Integrates `f` over `[a, b]` by splitting the range into `panels` equal
/// pieces, each handled by double-exponential quadrature. Panels let the
/// rule cope with kinks and steep edges that a single pass would smear.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == panels { b } else { lo + h };
            ::quadrature::double_exponential::integrate(&f, lo, hi, 1e-13).integral
        })
        .sum()
}

/// Pearson chi-square test of observed counts against expected
/// probabilities. Cells with expected count below 5 are pooled into one.
/// Returns the statistic and its p-value.
pub fn chi_square_test(observed: &[u64], probabilities: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), probabilities.len());
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probabilities) {
        let e = p * n;
        if e < 5.0 {
            pooled_obs += o as f64;
            pooled_exp += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    } else if pooled_obs > 0.0 {
        return (f64::INFINITY, 0.0);
    }
    if cells < 2 {
        return (stat, 1.0);
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    (stat, 1.0 - dist.cdf(stat))
}
