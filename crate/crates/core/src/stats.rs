//! Small statistics helpers shared by the samplers and the checks:
//! Kolmogorov-Smirnov distances and the Pareto law used for radial factors.

/// One-sample Kolmogorov-Smirnov statistic of `sample` against the CDF `f`.
pub fn ks_statistic(sample: &mut [f64], f: impl Fn(f64) -> f64) -> f64 {
    assert!(!sample.is_empty());
    sample.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample value"));
    let n = sample.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sample.iter().enumerate() {
        let cdf = f(x);
        d = d.max((cdf - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - cdf).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Survival function of the alpha-Pareto law, `s^-alpha` for `s >= 1`.
pub fn pareto_sf(s: f64, alpha: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else {
        s.powf(-alpha)
    }
}

/// CDF of the alpha-Pareto law.
pub fn pareto_cdf(s: f64, alpha: f64) -> f64 {
    1.0 - pareto_sf(s, alpha)
}

/// CDF of the alpha-Frechet law, `exp(-x^-alpha)` for `x > 0`.
pub fn frechet_cdf(x: f64, alpha: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-x.powf(-alpha)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn ks_detects_exact_fit_and_gross_misfit() {
        let mut rng = crate::rng::rng_for(17, 0);
        let mut unif: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let d = ks_statistic(&mut unif, |x| x.clamp(0.0, 1.0));
        assert!(d < 0.015, "uniform KS {d}");
        let mut shifted: Vec<f64> = unif.iter().map(|x| x * 0.5).collect();
        let d2 = ks_statistic(&mut shifted, |x| x.clamp(0.0, 1.0));
        assert!(d2 > 0.4, "misfit KS {d2}");
    }

    #[test]
    fn two_sample_ks_on_same_law_is_small() {
        let mut rng = crate::rng::rng_for(18, 0);
        let mut a: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let mut b: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_two_sample(&mut a, &mut b) < 0.025);
    }

    #[test]
    fn pareto_survival_values() {
        assert_eq!(pareto_sf(0.5, 2.0), 1.0);
        assert_eq!(pareto_sf(2.0, 1.0), 0.5);
        assert!((pareto_cdf(2.0, 2.0) - 0.75).abs() < 1e-15);
    }
}
