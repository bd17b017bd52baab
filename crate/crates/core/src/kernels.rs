//! Radial kernel profiles `k(r)` for the landmark cometric.
//!
//! Two families are shipped: the half-integer Matérn (Sobolev / Bessel potential)
//! profiles `scale * e^{-r} P_nu(r)` for `nu` in {1/2, 3/2, 5/2, 7/2}, and the Gaussian
//! `scale * exp(-r^2)`. Every kernel also carries its near-zero expansion
//! `k(0) - k(r) = D r^gamma + o(r^gamma)`, which is all the singularity classifier needs.
//!
//! The deficit `lambda - k(r)` is evaluated without cancellation near `r = 0` (Taylor
//! series for Matérn, `expm1` for Gaussian), so the diffusion coefficient and the scale
//! density stay accurate at separations far below `sqrt(eps)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Coefficients of `P_nu`, lowest degree first, indexed by `(2 nu - 1) / 2`.
const MATERN_POLYS: [&[f64]; 4] = [
    &[1.0],
    &[1.0, 1.0],
    &[3.0, 3.0, 1.0],
    &[15.0, 15.0, 6.0, 1.0],
];

const SERIES_TERMS: usize = 32;
/// Below this separation the Matérn deficit is summed from its Taylor series.
const SERIES_CUTOFF: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// Matérn profile of order `nu = twice_nu / 2`.
    MaternHalfInteger { twice_nu: u32 },
    Gaussian,
}

impl KernelFamily {
    pub fn nu(&self) -> Option<f64> {
        match self {
            KernelFamily::MaternHalfInteger { twice_nu } => Some(f64::from(*twice_nu) / 2.0),
            KernelFamily::Gaussian => None,
        }
    }
}

/// Near-zero expansion `k(0) - k(r) = D r^gamma (|log r|) + o(...)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticData {
    /// Leading coefficient `D`.
    pub coefficient: f64,
    pub gamma: f64,
    /// Logarithmic correction, only present for the `r^2 log r` (integer order 1) case.
    pub has_log: bool,
}

impl AsymptoticData {
    pub fn new(coefficient: f64, gamma: f64, has_log: bool) -> Result<Self> {
        if !(coefficient.is_finite() && coefficient > 0.0) {
            return Err(Error::invalid(format!(
                "asymptotic coefficient must be positive, got {coefficient}"
            )));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid(format!(
                "asymptotic exponent must be positive, got {gamma}"
            )));
        }
        Ok(Self {
            coefficient,
            gamma,
            has_log,
        })
    }
}

impl fmt::Display for AsymptoticData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "asymptotic:{}:{}", self.coefficient, self.gamma)?;
        if self.has_log {
            f.write_str(":log")?;
        }
        Ok(())
    }
}

/// A radial kernel profile with closed-form value and derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialKernel {
    family: KernelFamily,
    scale: f64,
    lambda: f64,
    asymptotics: AsymptoticData,
    poly: &'static [f64],
    /// `P' - P`, so that `k'(r) = scale * e^{-r} * dpoly(r)`.
    dpoly: [f64; 4],
    /// Taylor coefficients of `lambda - k(r)` (index = power of r).
    deficit_series: [f64; SERIES_TERMS],
}

fn check_scale(scale: f64) -> Result<()> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "kernel scale must be positive, got {scale}"
        )))
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Matérn kernel `scale * e^{-r} P_nu(r)` for half-integer `nu <= 7/2`.
pub fn make_matern(nu: f64, scale: f64) -> Result<RadialKernel> {
    let twice = 2.0 * nu;
    let rounded = twice.round();
    if !nu.is_finite() || (twice - rounded).abs() > 1e-12 || rounded < 1.0 || rounded % 2.0 == 0.0
    {
        return Err(Error::invalid(format!(
            "Matern order must be a positive half-integer, got {nu}"
        )));
    }
    if rounded > 7.0 {
        return Err(Error::UnsupportedOrder(nu));
    }
    check_scale(scale)?;
    let twice_nu = rounded as u32;
    let poly = MATERN_POLYS[(twice_nu as usize - 1) / 2];

    let mut dpoly = [0.0; 4];
    for (i, slot) in dpoly.iter_mut().enumerate().take(poly.len()) {
        let next = poly.get(i + 1).map_or(0.0, |c| (i + 1) as f64 * c);
        *slot = next - poly[i];
    }

    // e^{-r} P(r) = sum_j c_j r^j with c_j = sum_i p_i (-1)^{j-i} / (j-i)!
    let mut inv_fact = [1.0; SERIES_TERMS];
    for j in 1..SERIES_TERMS {
        inv_fact[j] = inv_fact[j - 1] / j as f64;
    }
    let mut deficit_series = [0.0; SERIES_TERMS];
    for (j, slot) in deficit_series.iter_mut().enumerate().skip(1) {
        let c: f64 = poly
            .iter()
            .enumerate()
            .filter(|(i, _)| *i <= j)
            .map(|(i, p)| {
                let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
                sign * p * inv_fact[j - i]
            })
            .sum();
        *slot = -scale * c;
    }

    let (gamma, coefficient) = deficit_series
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, c)| c.abs() > 1e-14 * scale)
        .map(|(j, c)| (j as f64, *c))
        .expect("Matern deficit series has a nonzero term");
    debug_assert!((gamma - (2.0 * nu).min(2.0)).abs() < 1e-12);

    Ok(RadialKernel {
        family: KernelFamily::MaternHalfInteger { twice_nu },
        scale,
        lambda: scale * poly[0],
        asymptotics: AsymptoticData {
            coefficient,
            gamma,
            has_log: false,
        },
        poly,
        dpoly,
        deficit_series,
    })
}

/// Gaussian kernel `scale * exp(-r^2)`.
pub fn make_gaussian(scale: f64) -> Result<RadialKernel> {
    check_scale(scale)?;
    Ok(RadialKernel {
        family: KernelFamily::Gaussian,
        scale,
        lambda: scale,
        asymptotics: AsymptoticData {
            coefficient: scale,
            gamma: 2.0,
            has_log: false,
        },
        poly: &[],
        dpoly: [0.0; 4],
        deficit_series: [0.0; SERIES_TERMS],
    })
}

/// The three kernels of the numerical experiments: `e^{-r}`, `2(1+r)e^{-r}`, `e^{-r^2}`.
pub fn experiment_kernels() -> [RadialKernel; 3] {
    [
        make_matern(0.5, 1.0).expect("valid preset"),
        make_matern(1.5, 2.0).expect("valid preset"),
        make_gaussian(1.0).expect("valid preset"),
    ]
}

impl RadialKernel {
    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `k(0)`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn asymptotics(&self) -> AsymptoticData {
        self.asymptotics
    }

    /// `k(r)` for `r >= 0`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::invalid(format!(
                "kernel argument must be nonnegative, got {r}"
            )));
        }
        Ok(self.value(r))
    }

    /// Exact `k'(r)` for `r > 0`.
    pub fn eval_derivative(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::invalid(format!(
                "kernel derivative needs r > 0, got {r}"
            )));
        }
        Ok(self.derivative(r))
    }

    /// Unchecked `k(r)`; callers guarantee `r >= 0`.
    #[inline]
    pub(crate) fn value(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => self.scale * (-r * r).exp(),
            KernelFamily::MaternHalfInteger { .. } => {
                self.scale * (-r).exp() * horner(self.poly, r)
            }
        }
    }

    #[inline]
    pub(crate) fn derivative(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => -2.0 * r * self.scale * (-r * r).exp(),
            KernelFamily::MaternHalfInteger { .. } => {
                self.scale * (-r).exp() * horner(&self.dpoly[..self.poly.len()], r)
            }
        }
    }

    /// `lambda - k(r)` for `r >= 0`, free of cancellation at small `r`.
    #[inline]
    pub fn deficit(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => -self.scale * (-r * r).exp_m1(),
            KernelFamily::MaternHalfInteger { .. } => {
                if r < SERIES_CUTOFF {
                    horner(&self.deficit_series, r)
                } else {
                    self.lambda - self.value(r)
                }
            }
        }
    }
}

impl fmt::Display for RadialKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::MaternHalfInteger { twice_nu } => {
                write!(f, "matern:{}", f64::from(twice_nu) / 2.0)?
            }
            KernelFamily::Gaussian => f.write_str("gauss")?,
        }
        if self.scale != 1.0 {
            write!(f, ":{}", self.scale)?;
        }
        Ok(())
    }
}

/// A parsed kernel spec string: an evaluable kernel or classification-only asymptotics.
///
/// Grammar: `matern:<nu>[:<scale>]`, `gauss[:<scale>]`, `asymptotic:<D>:<gamma>[:log]`.
/// `nu` may be written as a decimal (`1.5`) or a fraction (`3/2`).
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum KernelSpec {
    Kernel(RadialKernel),
    Asymptotic(AsymptoticData),
}

impl KernelSpec {
    pub fn asymptotics(&self) -> AsymptoticData {
        match self {
            KernelSpec::Kernel(k) => k.asymptotics(),
            KernelSpec::Asymptotic(a) => *a,
        }
    }

    pub fn kernel(&self) -> Result<&RadialKernel> {
        match self {
            KernelSpec::Kernel(k) => Ok(k),
            KernelSpec::Asymptotic(a) => Err(Error::NoEvaluator(a.to_string())),
        }
    }

    /// Filesystem-safe tag derived from the canonical spec string.
    pub fn tag(&self) -> String {
        self.to_string().replace([':', '/'], "-")
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Kernel(k) => k.fmt(f),
            KernelSpec::Asymptotic(a) => a.fmt(f),
        }
    }
}

fn parse_number(spec: &str, field: &str) -> Result<f64> {
    let bad = |reason: String| Error::KernelSpec {
        spec: spec.to_string(),
        reason,
    };
    let value = match field.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num
                .trim()
                .parse()
                .map_err(|_| bad(format!("`{field}` is not a number")))?;
            let den: f64 = den
                .trim()
                .parse()
                .map_err(|_| bad(format!("`{field}` is not a number")))?;
            num / den
        }
        None => field
            .trim()
            .parse()
            .map_err(|_| bad(format!("`{field}` is not a number")))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad(format!("`{field}` is not finite")))
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = |reason: &str| Error::KernelSpec {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        match parts.as_slice() {
            ["matern", nu] => Ok(KernelSpec::Kernel(make_matern(parse_number(s, nu)?, 1.0)?)),
            ["matern", nu, scale] => Ok(KernelSpec::Kernel(make_matern(
                parse_number(s, nu)?,
                parse_number(s, scale)?,
            )?)),
            ["gauss"] => Ok(KernelSpec::Kernel(make_gaussian(1.0)?)),
            ["gauss", scale] => Ok(KernelSpec::Kernel(make_gaussian(parse_number(s, scale)?)?)),
            ["asymptotic", d, gamma] => Ok(KernelSpec::Asymptotic(AsymptoticData::new(
                parse_number(s, d)?,
                parse_number(s, gamma)?,
                false,
            )?)),
            ["asymptotic", d, gamma, "log"] => Ok(KernelSpec::Asymptotic(AsymptoticData::new(
                parse_number(s, d)?,
                parse_number(s, gamma)?,
                true,
            )?)),
            ["matern" | "gauss" | "asymptotic", ..] => Err(bad("wrong number of fields")),
            _ => Err(bad("expected matern:<nu>[:<scale>], gauss[:<scale>] or asymptotic:<D>:<gamma>[:log]")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_fd(k: &RadialKernel, r: f64, h: f64) -> f64 {
        (k.value(r + h) - k.value(r - h)) / (2.0 * h)
    }

    fn shipped() -> Vec<RadialKernel> {
        vec![
            make_matern(0.5, 1.0).unwrap(),
            make_matern(1.5, 2.0).unwrap(),
            make_matern(2.5, 1.0).unwrap(),
            make_matern(3.5, 1.0).unwrap(),
            make_gaussian(1.0).unwrap(),
        ]
    }

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }

    #[test]
    fn matern_half_values() {
        let k = make_matern(0.5, 1.0).unwrap();
        assert_eq!(k.eval(0.0).unwrap(), 1.0);
        assert!((k.eval(1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(k.asymptotics().gamma, 1.0);
        assert!((k.asymptotics().coefficient - 1.0).abs() < 1e-15);
        assert!(!k.asymptotics().has_log);
    }

    #[test]
    fn matern_three_halves_preset() {
        let k = make_matern(1.5, 2.0).unwrap();
        assert_eq!(k.lambda(), 2.0);
        assert_eq!(k.eval(0.0).unwrap(), 2.0);
        let r: f64 = 0.7;
        assert!((k.eval(r).unwrap() - 2.0 * (1.0 + r) * (-r).exp()).abs() < 1e-15);
        assert_eq!(k.asymptotics().gamma, 2.0);
        // 2(1+r)e^{-r} = 2 - r^2 + O(r^3)
        assert!((k.asymptotics().coefficient - 1.0).abs() < 1e-15);
        // gamma = 2 forces k'(0+) = 0
        assert!(k.eval_derivative(1e-300).unwrap().abs() < 1e-290);
    }

    #[test]
    fn matern_gamma_is_min_two_nu_two() {
        for (nu, gamma) in [(0.5, 1.0), (1.5, 2.0), (2.5, 2.0), (3.5, 2.0)] {
            let k = make_matern(nu, 3.0).unwrap();
            assert_eq!(k.asymptotics().gamma, gamma, "nu={nu}");
            assert_eq!(k.lambda(), 3.0 * MATERN_POLYS[((2.0 * nu) as usize - 1) / 2][0]);
        }
    }

    #[test]
    fn matern_order_validation() {
        assert!(matches!(make_matern(1.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_matern(0.3, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_matern(-0.5, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_matern(4.5, 1.0), Err(Error::UnsupportedOrder(_))));
        assert!(make_matern(0.5, 0.0).is_err());
        assert!(make_gaussian(-1.0).is_err());
    }

    #[test]
    fn gaussian_values() {
        let k = make_gaussian(1.0).unwrap();
        assert_eq!(k.eval(0.0).unwrap(), 1.0);
        assert!((k.eval(1.0).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-15);
        let a = k.asymptotics();
        assert_eq!((a.coefficient, a.gamma, a.has_log), (1.0, 2.0, false));
        let dk = k.eval_derivative(1.0).unwrap();
        assert!((dk + 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((dk - central_fd(&k, 1.0, 1e-6)).abs() <= 1e-8 * dk.abs());
    }

    #[test]
    fn matern_half_derivative_at_zero() {
        let k = make_matern(0.5, 1.0).unwrap();
        assert!((k.eval_derivative(1e-14).unwrap() + 1.0).abs() < 1e-13);
        let r = 2.0;
        assert!((k.eval_derivative(r).unwrap() + (-r).exp()).abs() < 1e-16);
    }

    #[test]
    fn domain_errors() {
        let k = make_gaussian(1.0).unwrap();
        assert!(k.eval(-1e-3).is_err());
        assert!(k.eval(f64::NAN).is_err());
        assert!(k.eval_derivative(0.0).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for k in shipped() {
            for r in log_grid(1e-6, 1e2, 120) {
                // stencil must stay inside [0, inf)
                let h = (1e-6 * r.max(1.0)).min(0.5 * r);
                let exact = k.derivative(r);
                let fd = central_fd(&k, r, h);
                let tol = 1e-6 * (1.0 + exact.abs());
                assert!((exact - fd).abs() <= tol, "{k} r={r}: {exact} vs {fd}");
                assert!(exact <= 0.0);
            }
        }
    }

    #[test]
    fn asymptotic_ratio_tends_to_one() {
        for k in shipped() {
            let a = k.asymptotics();
            for r in [1e-3, 1e-4, 1e-5] {
                let ratio = k.deficit(r) / (a.coefficient * r.powf(a.gamma));
                assert!((ratio - 1.0).abs() <= 0.05, "{k} r={r} ratio={ratio}");
            }
        }
    }

    #[test]
    fn deficit_agrees_with_direct_difference() {
        for k in shipped() {
            for r in log_grid(1e-2, 10.0, 60) {
                let direct = k.lambda() - k.value(r);
                assert!((k.deficit(r) - direct).abs() <= 1e-13 * k.lambda(), "{k} r={r}");
            }
        }
    }

    #[test]
    fn decays_and_stays_positive() {
        for k in shipped() {
            for r in [1e2, 1e3] {
                let v = k.eval(r).unwrap();
                assert!(v >= 0.0 && v < 1e-20 * k.lambda(), "{k} r={r}");
            }
            let grid = log_grid(1e-6, 50.0, 400);
            for w in grid.windows(2) {
                // strict until the profile underflows
                let (a, b) = (k.value(w[0]), k.value(w[1]));
                assert!(a > b || (a == 0.0 && b == 0.0), "{k} not decreasing at {}", w[0]);
                assert!(k.deficit(w[0]) > 0.0);
            }
        }
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["matern:0.5", "matern:1.5:2", "gauss", "gauss:2.5", "asymptotic:1:2:log", "asymptotic:0.5:1.5"] {
            let spec: KernelSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        let frac: KernelSpec = "matern:3/2:2".parse().unwrap();
        assert_eq!(frac.to_string(), "matern:1.5:2");
        assert_eq!(frac.tag(), "matern-1.5-2");
        assert!("matern".parse::<KernelSpec>().is_err());
        assert!("matern:1,5".parse::<KernelSpec>().is_err());
        assert!("exp:1".parse::<KernelSpec>().is_err());
        assert!("asymptotic:1:2:ln".parse::<KernelSpec>().is_err());
        assert!(matches!(
            "matern:4.5".parse::<KernelSpec>(),
            Err(Error::UnsupportedOrder(_))
        ));
        let asym: KernelSpec = "asymptotic:1:2".parse().unwrap();
        assert!(matches!(asym.kernel(), Err(Error::NoEvaluator(_))));
    }

    #[test]
    fn lambda_is_scale_times_profile_at_zero() {
        for k in shipped() {
            let unit = match k.family() {
                KernelFamily::Gaussian => make_gaussian(1.0).unwrap(),
                KernelFamily::MaternHalfInteger { twice_nu } => {
                    make_matern(f64::from(twice_nu) / 2.0, 1.0).unwrap()
                }
            };
            assert_eq!(k.lambda(), k.scale() * unit.value(0.0));
        }
    }
}
