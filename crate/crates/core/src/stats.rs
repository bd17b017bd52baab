//! Two-sample Kolmogorov-Smirnov statistic.

use crate::error::{Error, Result};

/// `sup_x |F_a(x) - F_b(x)|` of the two empirical distribution functions.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("both samples must be nonempty"));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::invalid("samples must not contain NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
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
    Ok(d)
}

/// Asymptotic critical value `c(alpha) sqrt((n + m) / (n m))` with
/// `c(alpha) = sqrt(-ln(alpha / 2) / 2)`.
pub fn ks_critical_value(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [0.3, 1.0, -2.0, 4.0];
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_samples() {
        assert_eq!(ks_statistic(&[0.0, 1.0], &[2.0, 3.0, 4.0]).unwrap(), 1.0);
    }

    #[test]
    fn ties_across_samples() {
        // F_a jumps to 1/2 at 1, F_b to 1 at 1
        let d = ks_statistic(&[1.0, 2.0], &[1.0]).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn one_percent_critical_value_for_thousand_paths() {
        let c = ks_critical_value(0.01, 1000, 1000);
        assert!((c - 0.0728).abs() < 5e-5, "{c}");
    }

    #[test]
    fn rejects_empty() {
        assert!(ks_statistic(&[], &[1.0]).is_err());
    }
}
