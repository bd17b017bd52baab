//! Classification of the zero boundary of the two-landmark distance SDE.
//!
//! [`classify`] maps the near-zero exponent `gamma` and the ambient dimension to a
//! Cherny–Engelbert singularity type in closed form. [`classify_numerically`] reaches the
//! same answer independently: it evaluates the scale density `rho`, the function `s` and
//! the coefficient ratios of the SDE pointwise, and decides each integrability question
//! near zero from the log-log slope of the integrand.
//!
//! Slopes close to `-1` are the boundary between integrable and divergent and cannot be
//! settled by a plain power fit. Those are refit on a deeper window with the model
//! `f(r) ~ C r^alpha |log r|^beta`; the integrand diverges iff `alpha < -1`, or
//! `alpha = -1` with `beta >= -1`. When even that fit is ambiguous the test is reported as
//! inconclusive instead of guessing.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::distance_sde::DistanceCoefficients;
use crate::error::{Error, Result};
use crate::kernels::RadialKernel;
use crate::quadrature;

/// Default log-uniform sampling window for slope estimates.
pub const DEFAULT_WINDOW: (f64, f64) = (1e-5, 1e-3);
pub const DEFAULT_POINTS: usize = 50;
/// Half-width of the band around slope `-1` reported as marginal.
pub const MARGINAL_BAND: f64 = 0.05;

const REFINE_WINDOW: (f64, f64) = (1e-12, 1e-4);
const REFINE_POINTS: usize = 60;
/// Power-exponent tolerance under which the refined fit treats `alpha` as exactly `-1`.
const REFINE_POWER_TOL: f64 = 0.02;
const S_REL_TOL: f64 = 1e-8;
const S_MAX_INTERVALS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SingularityKind {
    Regular,
    Type1,
    Type2,
    Type4,
    Type5,
}

impl SingularityKind {
    pub fn collision_possible(self) -> bool {
        matches!(
            self,
            SingularityKind::Regular | SingularityKind::Type1 | SingularityKind::Type2
        )
    }

    fn notes(self) -> &'static [&'static str] {
        match self {
            SingularityKind::Regular => &["E[T_{0,a}] < inf", "P(r_{T_{0,a}} = 0) > 0"],
            SingularityKind::Type1 => &["E[T_{0,a}] < inf", "P(r_{T_{0,a}} = 0) > 0"],
            SingularityKind::Type2 => &["E[T_a] < inf", "P(r_t = 0 for some t <= T_a) > 0"],
            SingularityKind::Type4 => &[
                "r_t > 0 for all t",
                "P(T_a = inf) > 0",
                "r_t -> 0 a.s. on {T_a = inf}",
            ],
            SingularityKind::Type5 => &["r_t > 0 for all t", "T_a < inf a.s."],
        }
    }
}

impl fmt::Display for SingularityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SingularityKind::Regular => "Regular",
            SingularityKind::Type1 => "Type1",
            SingularityKind::Type2 => "Type2",
            SingularityKind::Type4 => "Type4",
            SingularityKind::Type5 => "Type5",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularityClassification {
    pub kind: SingularityKind,
    pub collision_possible: bool,
    /// Brownian completeness of the two-landmark space; escape to infinity cannot
    /// precede collision, so this is exactly "no collision".
    pub brownian_complete: bool,
    pub notes: Vec<String>,
}

impl From<SingularityKind> for SingularityClassification {
    fn from(kind: SingularityKind) -> Self {
        let collision_possible = kind.collision_possible();
        Self {
            kind,
            collision_possible,
            brownian_complete: !collision_possible,
            notes: kind.notes().iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Closed-form classification from the near-zero exponent.
///
/// `gamma < 1` is regular, `1 <= gamma < 2` is type 2 (`d = 1`) or type 1 (`d >= 2`), and
/// `gamma >= 2` is type 5 (`d = 1`) or type 4 (`d >= 2`). A logarithmic factor does not
/// change the `gamma = 2` outcome.
pub fn classify(gamma: f64, has_log: bool, dim: usize) -> Result<SingularityClassification> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    if dim == 0 {
        return Err(Error::invalid("ambient dimension must be at least 1"));
    }
    let _ = has_log;
    let kind = if gamma < 1.0 {
        SingularityKind::Regular
    } else if gamma < 2.0 {
        if dim == 1 {
            SingularityKind::Type2
        } else {
            SingularityKind::Type1
        }
    } else if dim == 1 {
        SingularityKind::Type5
    } else {
        SingularityKind::Type4
    };
    Ok(kind.into())
}

/// Scale density `rho(r) = exp(int_r^a 2b/sigma^2)` in closed form:
/// `((lam - k(a)) / (lam - k(r)))^{1 - d/2} ((lam + k(a)) / (lam + k(r)))^{-d/2}`.
#[derive(Debug, Clone)]
pub struct RhoFunction {
    coeffs: DistanceCoefficients,
    anchor: f64,
    deficit_at_anchor: f64,
    sum_at_anchor: f64,
}

impl RhoFunction {
    /// `anchor` must lie in `(0, 1]`, where every shipped profile is monotone.
    pub fn new(kernel: RadialKernel, dim: usize, anchor: f64) -> Result<Self> {
        if !(anchor > 0.0 && anchor <= 1.0) {
            return Err(Error::invalid(format!(
                "anchor must lie in (0, 1], got {anchor}"
            )));
        }
        let deficit_at_anchor = kernel.deficit(anchor);
        let sum_at_anchor = kernel.lambda() + kernel.value(anchor);
        Ok(Self {
            coeffs: DistanceCoefficients::new(kernel, dim)?,
            anchor,
            deficit_at_anchor,
            sum_at_anchor,
        })
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn coefficients(&self) -> &DistanceCoefficients {
        &self.coeffs
    }

    #[inline]
    pub(crate) fn value(&self, r: f64) -> f64 {
        let kernel = self.coeffs.kernel();
        let half_d = self.coeffs.dim() as f64 / 2.0;
        let deficit_ratio = self.deficit_at_anchor / kernel.deficit(r);
        let sum_ratio = self.sum_at_anchor / (kernel.lambda() + kernel.value(r));
        deficit_ratio.powf(1.0 - half_d) * sum_ratio.powf(-half_d)
    }
}

/// `rho(r)` for `0 < r <= a`.
pub fn rho(rho_fn: &RhoFunction, r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= rho_fn.anchor) {
        return Err(Error::invalid(format!(
            "rho is defined on (0, {}], got r = {r}",
            rho_fn.anchor
        )));
    }
    Ok(rho_fn.value(r))
}

/// Which base point `s` integrates `rho` from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SBranch {
    /// `int_0^a rho < inf`: `s(r) = int_0^r rho`.
    FromZero,
    /// `int_0^a rho = inf`: `s(r) = int_a^r rho`, negative for `r < a`.
    FromAnchor,
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

fn integrability_of(divergent: bool) -> Integrability {
    if divergent {
        Integrability::Divergent
    } else {
        Integrability::Integrable
    }
}

/// `int_0^a rho` converges or diverges, decided by the exponent test (with refinement).
pub fn s_branch(rho_fn: &RhoFunction) -> Result<SBranch> {
    let test = run_test("rho", |r| rho_fn.value(r))?;
    match test.resolved {
        Some(Integrability::Integrable) => Ok(SBranch::FromZero),
        Some(Integrability::Divergent) => Ok(SBranch::FromAnchor),
        _ => Err(Error::Inconclusive(format!(
            "integrability of rho near zero (slope {:.4})",
            test.slope
        ))),
    }
}

/// `s` evaluated at ascending points `rs` (all in `(0, a]`), integrating piecewise between
/// neighbouring points.
pub fn s_values(rho_fn: &RhoFunction, branch: SBranch, rs: &[f64]) -> Result<Vec<f64>> {
    if rs.iter().any(|&r| !(r > 0.0 && r <= rho_fn.anchor)) {
        return Err(Error::invalid("s is evaluated on (0, a] only"));
    }
    if rs.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("s evaluation points must be ascending"));
    }
    let piece = |lo: f64, hi: f64| {
        quadrature::integrate(|y| rho_fn.value(y), lo, hi, S_REL_TOL, S_MAX_INTERVALS)
            .map(|q| q.value)
    };
    let mut out = vec![0.0; rs.len()];
    match branch {
        SBranch::FromZero => {
            let mut acc = 0.0;
            let mut prev = 0.0;
            for (slot, &r) in out.iter_mut().zip(rs) {
                acc += piece(prev, r)?;
                prev = r;
                *slot = acc;
            }
        }
        SBranch::FromAnchor => {
            let mut acc = 0.0;
            let mut prev = rho_fn.anchor;
            for (slot, &r) in out.iter_mut().zip(rs).rev() {
                acc -= piece(r, prev)?;
                prev = r;
                *slot = acc;
            }
        }
    }
    Ok(out)
}

/// `s(r)` for `0 < r <= a`.
pub fn s_function(rho_fn: &RhoFunction, r: f64) -> Result<f64> {
    let branch = s_branch(rho_fn)?;
    Ok(s_values(rho_fn, branch, &[r])?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Integrability {
    Integrable,
    Divergent,
    /// Slope within [`MARGINAL_BAND`] of `-1`.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentEstimate {
    pub slope: f64,
    pub verdict: Integrability,
}

fn check_samples(rs: &[f64], fs: &[f64]) -> Result<()> {
    if let Some(i) = fs.iter().position(|&f| !(f > 0.0 && f.is_finite())) {
        return Err(Error::invalid(format!(
            "integrand must be positive and finite, got {} at r = {}",
            fs[i], rs[i]
        )));
    }
    Ok(())
}

fn slope_verdict(slope: f64) -> Integrability {
    if (slope + 1.0).abs() <= MARGINAL_BAND {
        Integrability::Marginal
    } else if slope > -1.0 {
        Integrability::Integrable
    } else {
        Integrability::Divergent
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Least-squares slope of `log f` against `log r` over a log-uniform grid on
/// `[lo, hi]`. A slope above `-1` means `f` is integrable at zero.
pub fn integrability_exponent(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<ExponentEstimate> {
    if !(lo > 0.0 && lo < hi) || points < 2 {
        return Err(Error::invalid(
            "exponent window needs 0 < lo < hi and at least two points",
        ));
    }
    let rs = log_grid(lo, hi, points);
    let fs: Vec<f64> = rs.iter().map(|&r| f(r)).collect();
    exponent_from_samples(&rs, &fs)
}

fn exponent_from_samples(rs: &[f64], fs: &[f64]) -> Result<ExponentEstimate> {
    check_samples(rs, fs)?;
    let xs: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = fs.iter().map(|f| f.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    Ok(ExponentEstimate {
        slope,
        verdict: slope_verdict(slope),
    })
}

/// Fit of `log f = alpha log r + beta log|log r| + c` on the deep window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryFit {
    pub power: f64,
    pub log_power: f64,
    /// `None` when neither exponent settles the question.
    pub verdict: Option<Integrability>,
}

pub fn boundary_fit(rs: &[f64], fs: &[f64]) -> Result<BoundaryFit> {
    check_samples(rs, fs)?;
    if rs.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::invalid("boundary fit needs 0 < r < 1"));
    }
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (&r, &f) in rs.iter().zip(fs) {
        let row = Vector3::new(r.ln(), (-r.ln()).ln(), 1.0);
        normal += row * row.transpose();
        rhs += row * f.ln();
    }
    let coef = normal
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::invalid("degenerate boundary fit"))?;
    let (power, log_power) = (coef[0], coef[1]);
    let verdict = if (power + 1.0).abs() > REFINE_POWER_TOL {
        Some(integrability_of(power < -1.0))
    } else if log_power >= -0.5 {
        Some(Integrability::Divergent)
    } else if log_power <= -1.5 {
        Some(Integrability::Integrable)
    } else {
        None
    };
    Ok(BoundaryFit {
        power,
        log_power,
        verdict,
    })
}

/// One integrability question asked by the numerical classifier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityTest {
    pub name: &'static str,
    pub slope: f64,
    pub verdict: Integrability,
    pub refined: Option<BoundaryFit>,
    /// Final answer; `None` means inconclusive.
    pub resolved: Option<Integrability>,
}

fn test_from_grids(
    name: &'static str,
    primary: (&[f64], &[f64]),
    deep: impl FnOnce() -> Result<(Vec<f64>, Vec<f64>)>,
) -> Result<IntegrabilityTest> {
    let estimate = exponent_from_samples(primary.0, primary.1)?;
    let (refined, resolved) = match estimate.verdict {
        Integrability::Marginal => {
            let (rs, fs) = deep()?;
            let fit = boundary_fit(&rs, &fs)?;
            (Some(fit), fit.verdict)
        }
        v => (None, Some(v)),
    };
    Ok(IntegrabilityTest {
        name,
        slope: estimate.slope,
        verdict: estimate.verdict,
        refined,
        resolved,
    })
}

fn run_test(name: &'static str, f: impl Fn(f64) -> f64) -> Result<IntegrabilityTest> {
    let rs = log_grid(DEFAULT_WINDOW.0, DEFAULT_WINDOW.1, DEFAULT_POINTS);
    let fs: Vec<f64> = rs.iter().map(|&r| f(r)).collect();
    test_from_grids(name, (&rs, &fs), || {
        let rs = log_grid(REFINE_WINDOW.0, REFINE_WINDOW.1, REFINE_POINTS);
        let fs = rs.iter().map(|&r| f(r)).collect();
        Ok((rs, fs))
    })
}

/// Outcome of [`classify_numerically`]: the classification, or `None` with the stage
/// whose integrability question stayed inconclusive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericalClassification {
    pub classification: Option<SingularityClassification>,
    pub inconclusive_stage: Option<&'static str>,
    pub branch: Option<SBranch>,
    pub tests: Vec<IntegrabilityTest>,
}

impl NumericalClassification {
    pub fn is_inconclusive(&self) -> bool {
        self.classification.is_none()
    }

    pub fn kind(&self) -> Option<SingularityKind> {
        self.classification.as_ref().map(|c| c.kind)
    }
}

struct Grid {
    rs: Vec<f64>,
    b_abs: Vec<f64>,
    sigma2: Vec<f64>,
    rho: Vec<f64>,
    s_abs: Option<Vec<f64>>,
}

impl Grid {
    fn new(rho_fn: &RhoFunction, lo: f64, hi: f64, points: usize) -> Self {
        let coeffs = rho_fn.coefficients();
        let rs = log_grid(lo, hi, points);
        Self {
            b_abs: rs.iter().map(|&r| coeffs.drift_unchecked(r).abs()).collect(),
            sigma2: rs.iter().map(|&r| coeffs.sigma_squared(r)).collect(),
            rho: rs.iter().map(|&r| rho_fn.value(r)).collect(),
            rs,
            s_abs: None,
        }
    }

    fn with_s(&mut self, rho_fn: &RhoFunction, branch: SBranch) -> Result<&[f64]> {
        if self.s_abs.is_none() {
            let s = s_values(rho_fn, branch, &self.rs)?;
            self.s_abs = Some(s.into_iter().map(f64::abs).collect());
        }
        Ok(self.s_abs.as_deref().expect("just filled"))
    }

    fn combine(&self, f: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..self.rs.len()).map(f).collect()
    }
}

/// Runs the integrability decision tree on the actual coefficients of `kernel`.
///
/// `anchor` is the right end `a` of the interval `(0, a]` on which `rho` and `s` live.
pub fn classify_numerically(
    kernel: &RadialKernel,
    dim: usize,
    anchor: f64,
) -> Result<NumericalClassification> {
    let rho_fn = RhoFunction::new(kernel.clone(), dim, anchor)?;
    let mut primary = Grid::new(&rho_fn, DEFAULT_WINDOW.0, DEFAULT_WINDOW.1, DEFAULT_POINTS);
    let mut deep = Grid::new(&rho_fn, REFINE_WINDOW.0, REFINE_WINDOW.1, REFINE_POINTS);
    let mut tests = Vec::new();

    macro_rules! ask {
        ($name:expr, |$g:ident, $i:ident| $body:expr) => {{
            let fs = {
                let $g = &primary;
                $g.combine(|$i| $body)
            };
            let t = test_from_grids($name, (&primary.rs, &fs), || {
                let $g = &deep;
                Ok((deep.rs.clone(), $g.combine(|$i| $body)))
            })?;
            let resolved = t.resolved;
            tests.push(t);
            match resolved {
                Some(v) => v,
                None => {
                    return Ok(NumericalClassification {
                        classification: None,
                        inconclusive_stage: Some($name),
                        branch: None,
                        tests,
                    })
                }
            }
        }};
    }

    let classified = |kind: SingularityKind, branch, tests| {
        Ok(NumericalClassification {
            classification: Some(kind.into()),
            inconclusive_stage: None,
            branch,
            tests,
        })
    };

    let zero_singular = ask!("(1+|b|)/sigma^2", |g, i| (1.0 + g.b_abs[i]) / g.sigma2[i]);
    if zero_singular == Integrability::Integrable {
        return classified(SingularityKind::Regular, None, tests);
    }

    let rho_int = ask!("rho", |g, i| g.rho[i]);
    let branch = if rho_int == Integrability::Integrable {
        SBranch::FromZero
    } else {
        SBranch::FromAnchor
    };
    primary.with_s(&rho_fn, branch)?;

    if branch == SBranch::FromAnchor {
        deep.with_s(&rho_fn, branch)?;
        let t = ask!("(1+|b|)|s|/(rho sigma^2)", |g, i| (1.0 + g.b_abs[i])
            * g.s_abs.as_ref().expect("s sampled")[i]
            / (g.rho[i] * g.sigma2[i]));
        if t == Integrability::Divergent {
            return classified(SingularityKind::Type5, Some(branch), tests);
        }
        debug_assert!(false, "type 6 boundary is outside the shipped kernel family");
        return Ok(NumericalClassification {
            classification: None,
            inconclusive_stage: Some("type 6 boundary"),
            branch: Some(branch),
            tests,
        });
    }

    let t2 = ask!("(1+|b|)/(rho sigma^2)", |g, i| (1.0 + g.b_abs[i])
        / (g.rho[i] * g.sigma2[i]));
    if t2 == Integrability::Integrable {
        let t3 = ask!("|b|/sigma^2", |g, i| g.b_abs[i] / g.sigma2[i]);
        if t3 == Integrability::Divergent {
            return classified(SingularityKind::Type2, Some(branch), tests);
        }
        return Ok(NumericalClassification {
            classification: None,
            inconclusive_stage: Some("|b|/sigma^2 integrable at a singular point"),
            branch: Some(branch),
            tests,
        });
    }

    deep.with_s(&rho_fn, branch)?;
    let t4 = ask!("(1+|b|)|s|/(rho sigma^2)", |g, i| (1.0 + g.b_abs[i])
        * g.s_abs.as_ref().expect("s sampled")[i]
        / (g.rho[i] * g.sigma2[i]));
    if t4 == Integrability::Integrable {
        return classified(SingularityKind::Type1, Some(branch), tests);
    }
    let t5 = ask!("|s|/(rho sigma^2)", |g, i| g.s_abs.as_ref().expect("s sampled")[i]
        / (g.rho[i] * g.sigma2[i]));
    if t5 == Integrability::Divergent {
        return classified(SingularityKind::Type4, Some(branch), tests);
    }
    debug_assert!(false, "type 3 boundary is outside the shipped kernel family");
    Ok(NumericalClassification {
        classification: None,
        inconclusive_stage: Some("type 3 boundary"),
        branch: Some(branch),
        tests,
    })
}
