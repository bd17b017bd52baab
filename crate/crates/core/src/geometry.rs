//! Kernel-induced Riemannian structure on landmark configurations.
//!
//! Coordinates are flattened landmark-major: index `i * d + c` is coordinate `c` of
//! landmark `i`. The cometric is `K^{(i,c),(j,c')} = k(|q_i - q_j|) delta_{cc'}` and the
//! metric is its inverse. Metric derivatives come from `dg = -g (dK) g`, never from
//! differentiating the inverse numerically.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::kernels::RadialKernel;

/// `n >= 2` pairwise distinct landmarks in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkConfig {
    dim: usize,
    coords: Vec<f64>,
}

impl LandmarkConfig {
    /// Builds a configuration from a flat landmark-major coordinate vector.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("ambient dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} coordinates do not split into landmarks of dimension {dim}",
                coords.len()
            )));
        }
        if coords.len() / dim < 2 {
            return Err(Error::invalid("at least two landmarks are required"));
        }
        if let Some(pos) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {pos} is {}", coords[pos])));
        }
        let config = Self { dim, coords };
        let n = config.landmarks();
        for i in 0..n {
            for j in (i + 1)..n {
                if config.distance(i, j) == 0.0 {
                    return Err(Error::CoincidentLandmarks {
                        first: i,
                        second: j,
                    });
                }
            }
        }
        Ok(config)
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("landmarks have inconsistent dimensions"));
        }
        Self::new(dim, points.concat())
    }

    /// Landmarks at unit spacing along the first axis: `(0,..), (1,..), .., (n-1,..)`.
    pub fn unit_spacing(landmarks: usize, dim: usize) -> Result<Self> {
        let mut coords = vec![0.0; landmarks * dim];
        for i in 0..landmarks {
            coords[i * dim] = i as f64;
        }
        Self::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn landmarks(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Number of flat coordinates, `n * d`.
    pub fn order(&self) -> usize {
        self.coords.len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.coords
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let n = self.landmarks();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.min(self.distance(i, j));
            }
        }
        best
    }

    /// Euclidean norm of the flat `R^{nd}` vector.
    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Shifts every landmark by the same `offset` (length `d`).
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim {
            return Err(Error::invalid("translation offset has the wrong dimension"));
        }
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(k, x)| x + offset[k % self.dim])
            .collect();
        Self::new(self.dim, coords)
    }
}

/// Dense symmetric matrix; symmetry is enforced on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Evaluates `f` on the upper triangle and mirrors it.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(order, order);
        for i in 0..order {
            for j in i..order {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    /// Symmetrizes a square matrix as `(M + M^T) / 2`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid("symmetric matrix must be square"));
        }
        let order = m.nrows();
        Ok(Self::from_fn(order, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
    }

    pub fn identity(order: usize) -> Self {
        SymMatrix(DMatrix::identity(order, order))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs_diff(&self, other: &DMatrix<f64>) -> f64 {
        (&self.0 - other).amax()
    }
}

/// Cometric `K(q)`, order `n * d`, with blocks `k(|q_i - q_j|) I_d`.
pub fn cometric_matrix(config: &LandmarkConfig, kernel: &RadialKernel) -> SymMatrix {
    let d = config.dim();
    let n = config.landmarks();
    let mut m = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                kernel.lambda()
            } else {
                kernel.value(config.distance(i, j))
            };
            for c in 0..d {
                m[(i * d + c, j * d + c)] = v;
                m[(j * d + c, i * d + c)] = v;
            }
        }
    }
    SymMatrix(m)
}

/// Cholesky-based inverse of a symmetric positive definite matrix.
pub fn invert_spd(matrix: &SymMatrix) -> Result<SymMatrix> {
    match Cholesky::new(matrix.0.clone()) {
        Some(chol) => {
            let inv = chol.inverse();
            if inv.iter().all(|x| x.is_finite()) {
                SymMatrix::from_matrix(inv)
            } else {
                Err(Error::IllConditioned {
                    condition: condition_estimate(matrix),
                })
            }
        }
        None => Err(Error::IllConditioned {
            condition: condition_estimate(matrix),
        }),
    }
}

/// Ratio of extreme eigenvalue magnitudes; infinite when the smallest vanishes.
pub fn condition_estimate(matrix: &SymMatrix) -> f64 {
    let eig = SymmetricEigen::new(matrix.0.clone()).eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Metric `g = K(q)^{-1}`.
pub fn metric_matrix(config: &LandmarkConfig, kernel: &RadialKernel) -> Result<SymMatrix> {
    invert_spd(&cometric_matrix(config, kernel))
}

/// Coordinate derivatives `dK/dq^a` for every flat coordinate `a`.
#[derive(Debug, Clone)]
pub struct CometricPartials {
    slices: Vec<SymMatrix>,
}

impl CometricPartials {
    pub fn order(&self) -> usize {
        self.slices.len()
    }

    /// `dK/dq^a`.
    pub fn slice(&self, a: usize) -> &SymMatrix {
        &self.slices[a]
    }

    /// `d K^{ij} / d q^a`.
    pub fn get(&self, a: usize, i: usize, j: usize) -> f64 {
        self.slices[a].get(i, j)
    }
}

pub fn cometric_partials(config: &LandmarkConfig, kernel: &RadialKernel) -> CometricPartials {
    let d = config.dim();
    let n = config.landmarks();
    let m = n * d;
    let mut slices = vec![DMatrix::zeros(m, m); m];
    for i in 0..n {
        for j in (i + 1)..n {
            let r = config.distance(i, j);
            let dk = kernel.derivative(r);
            let (pi, pj) = (config.point(i), config.point(j));
            for e in 0..d {
                // dr_ij / dq_i^e = (q_i^e - q_j^e) / r = -dr_ij / dq_j^e
                let grad = dk * (pi[e] - pj[e]) / r;
                for (landmark, sign) in [(i, 1.0), (j, -1.0)] {
                    let slice = &mut slices[landmark * d + e];
                    for c in 0..d {
                        slice[(i * d + c, j * d + c)] = sign * grad;
                        slice[(j * d + c, i * d + c)] = sign * grad;
                    }
                }
            }
        }
    }
    CometricPartials {
        slices: slices.into_iter().map(SymMatrix).collect(),
    }
}

/// Christoffel symbols `Gamma^i_{lm}` of the metric, over flat coordinates.
#[derive(Debug, Clone)]
pub struct ChristoffelTensor {
    order: usize,
    data: Vec<f64>,
}

impl ChristoffelTensor {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `Gamma^i_{lm}`.
    pub fn get(&self, i: usize, l: usize, m: usize) -> f64 {
        self.data[(i * self.order + l) * self.order + m]
    }

    /// `sum_{l,m} K^{lm} Gamma^i_{lm}` for each upper index `i`.
    pub fn contract(&self, cometric: &SymMatrix) -> Vec<f64> {
        let m = self.order;
        let k = cometric.as_matrix();
        (0..m)
            .map(|i| {
                let block = &self.data[i * m * m..(i + 1) * m * m];
                let mut acc = 0.0;
                for l in 0..m {
                    for mm in 0..m {
                        acc += k[(l, mm)] * block[l * m + mm];
                    }
                }
                acc
            })
            .collect()
    }
}

/// `Gamma^i_{lm} = 1/2 K^{ia} (d_l g_{am} + d_m g_{al} - d_a g_{lm})` with `d g = -g (dK) g`.
pub fn christoffel(config: &LandmarkConfig, kernel: &RadialKernel) -> Result<ChristoffelTensor> {
    let cometric = cometric_matrix(config, kernel);
    let metric = invert_spd(&cometric)?;
    let partials = cometric_partials(config, kernel);
    Ok(christoffel_from_parts(&cometric, &metric, &partials))
}

pub(crate) fn christoffel_from_parts(
    cometric: &SymMatrix,
    metric: &SymMatrix,
    partials: &CometricPartials,
) -> ChristoffelTensor {
    let m = cometric.order();
    let g = metric.as_matrix();
    let dg: Vec<DMatrix<f64>> = (0..m)
        .map(|a| -(g * partials.slice(a).as_matrix() * g))
        .collect();

    // lowered[a][l][m] = d_l g_{am} + d_m g_{al} - d_a g_{lm}, symmetric in (l, m)
    let mut lowered = vec![0.0; m * m * m];
    for a in 0..m {
        for l in 0..m {
            for mm in l..m {
                let v = dg[l][(a, mm)] + dg[mm][(a, l)] - dg[a][(l, mm)];
                lowered[(a * m + l) * m + mm] = v;
                lowered[(a * m + mm) * m + l] = v;
            }
        }
    }

    let k = cometric.as_matrix();
    let mut data = vec![0.0; m * m * m];
    for i in 0..m {
        for l in 0..m {
            for mm in l..m {
                let mut acc = 0.0;
                for a in 0..m {
                    acc += k[(i, a)] * lowered[(a * m + l) * m + mm];
                }
                data[(i * m + l) * m + mm] = 0.5 * acc;
                data[(i * m + mm) * m + l] = 0.5 * acc;
            }
        }
    }
    ChristoffelTensor { order: m, data }
}

/// Symmetric square root via eigendecomposition.
///
/// Rejects inputs whose smallest eigenvalue is below `-1e-12 * |K|_F`; eigenvalues in
/// that tolerance band are clamped to zero.
pub fn sqrt_psd(matrix: &SymMatrix) -> Result<SymMatrix> {
    let eig = SymmetricEigen::new(matrix.as_matrix().clone());
    let scale = matrix.frobenius_norm();
    let min = eig.eigenvalues.min();
    if !min.is_finite() || min < -1e-12 * scale {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min,
        });
    }
    let roots = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let s = v * DMatrix::from_diagonal(&roots) * v.transpose();
    SymMatrix::from_matrix(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_gaussian, make_matern};

    fn gauss() -> RadialKernel {
        make_gaussian(1.0).unwrap()
    }

    #[test]
    fn two_landmark_cometric_in_one_dimension() {
        let q = LandmarkConfig::new(1, vec![0.0, 1.0]).unwrap();
        let k = cometric_matrix(&q, &gauss());
        let e = (-1.0f64).exp();
        assert_eq!(k.get(0, 0), 1.0);
        assert_eq!(k.get(1, 1), 1.0);
        assert!((k.get(0, 1) - e).abs() < 1e-16);
        assert_eq!(k.get(0, 1), k.get(1, 0));
    }

    #[test]
    fn pythagorean_blocks() {
        let q = LandmarkConfig::from_points(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let k = cometric_matrix(&q, &make_matern(0.5, 1.0).unwrap());
        let e5 = (-5.0f64).exp();
        assert!((k.get(0, 2) - e5).abs() < 1e-18);
        assert!((k.get(1, 3) - e5).abs() < 1e-18);
        assert_eq!(k.get(0, 3), 0.0);
        assert_eq!(k.get(1, 2), 0.0);
    }

    #[test]
    fn coincident_landmarks_rejected() {
        for d in 1..=3 {
            let err = LandmarkConfig::new(d, vec![0.5; 2 * d]).unwrap_err();
            assert!(matches!(err, Error::CoincidentLandmarks { first: 0, second: 1 }));
        }
        assert!(LandmarkConfig::new(1, vec![1.0]).is_err());
        assert!(LandmarkConfig::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(LandmarkConfig::new(1, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn two_landmark_metric_closed_form() {
        let kern = make_matern(1.5, 2.0).unwrap();
        let q = LandmarkConfig::new(1, vec![-0.2, 0.5]).unwrap();
        let g = metric_matrix(&q, &kern).unwrap();
        let lam = kern.lambda();
        let k = kern.value(0.7);
        let det = lam * lam - k * k;
        assert!((g.get(0, 0) - lam / det).abs() < 1e-12);
        assert!((g.get(0, 1) + k / det).abs() < 1e-12);
        assert!((g.get(1, 1) - lam / det).abs() < 1e-12);
    }

    #[test]
    fn far_apart_metric_is_diagonal() {
        let kern = gauss();
        let q = LandmarkConfig::new(1, vec![0.0, 100.0]).unwrap();
        let g = metric_matrix(&q, &kern).unwrap();
        assert!(g.max_abs_diff(&DMatrix::identity(2, 2)) < 1e-15);
    }

    #[test]
    fn sqrt_of_simple_matrices() {
        let id = SymMatrix::identity(3);
        assert!(sqrt_psd(&id).unwrap().max_abs_diff(id.as_matrix()) < 1e-15);
        let s = sqrt_psd(&SymMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert!((s.get(0, 0) - 2.0).abs() < 1e-15);
        assert!((s.get(1, 1) - 3.0).abs() < 1e-15);
        assert!(s.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn sqrt_of_two_by_two_kernel_matrix() {
        let (lam, k) = (1.0f64, 0.6f64);
        let m = SymMatrix::from_fn(2, |i, j| if i == j { lam } else { k });
        let s = sqrt_psd(&m).unwrap();
        let (p, q) = ((lam + k).sqrt(), (lam - k).sqrt());
        assert!((s.get(0, 0) - 0.5 * (p + q)).abs() < 1e-15);
        assert!((s.get(0, 1) - 0.5 * (p - q)).abs() < 1e-15);
        let sq = s.as_matrix() * s.as_matrix();
        assert!((&sq - m.as_matrix()).norm() <= 1e-10 * m.frobenius_norm());
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = SymMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert!(matches!(
            sqrt_psd(&m),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn partials_have_zero_diagonal_blocks() {
        let q = LandmarkConfig::from_points(&[vec![0.1, 0.3], vec![1.0, -0.4], vec![0.2, 1.1]])
            .unwrap();
        let p = cometric_partials(&q, &gauss());
        for a in 0..q.order() {
            for i in 0..q.landmarks() {
                for c in 0..2 {
                    for c2 in 0..2 {
                        assert_eq!(p.get(a, i * 2 + c, i * 2 + c2), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_of_off_diagonal_in_one_dimension() {
        let q = LandmarkConfig::new(1, vec![0.0, 1.0]).unwrap();
        let p = cometric_partials(&q, &gauss());
        // r = |x - y| with x < y, so dr/dx = -1
        let expected = -gauss().derivative(1.0);
        assert!((p.get(0, 0, 1) - expected).abs() < 1e-16);
        assert!((expected - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        let q = LandmarkConfig::new(1, vec![1.0, 0.0]).unwrap();
        let p = cometric_partials(&q, &gauss());
        assert!((p.get(0, 0, 1) + 2.0 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn christoffel_symmetric_in_lower_indices() {
        let q = LandmarkConfig::from_points(&[vec![0.1, 0.3], vec![1.0, -0.4], vec![0.2, 1.1]])
            .unwrap();
        let gamma = christoffel(&q, &make_matern(1.5, 2.0).unwrap()).unwrap();
        let m = gamma.order();
        for i in 0..m {
            for l in 0..m {
                for mm in 0..m {
                    assert_eq!(gamma.get(i, l, mm), gamma.get(i, mm, l));
                }
            }
        }
    }

    #[test]
    fn christoffel_translation_invariant() {
        let q = LandmarkConfig::from_points(&[vec![0.1, 0.3], vec![1.0, -0.4]]).unwrap();
        let shifted = q.translated(&[2.5, -1.0]).unwrap();
        let kern = gauss();
        let a = christoffel(&q, &kern).unwrap();
        let b = christoffel(&shifted, &kern).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn symmetric_config_drift_matches_distance_equation() {
        // q = (-s, s): x = (u+v)/2 moves with half the u-drift, u-drift is lam k'(u)/(lam+k(u))
        // with sign flipped because u = x - y < 0 here
        for kern in [gauss(), make_matern(0.5, 1.0).unwrap(), make_matern(1.5, 2.0).unwrap()] {
            let s = 0.4;
            let q = LandmarkConfig::new(1, vec![-s, s]).unwrap();
            let gamma = christoffel(&q, &kern).unwrap();
            let drift: Vec<f64> = gamma
                .contract(&cometric_matrix(&q, &kern))
                .iter()
                .map(|c| -0.5 * c)
                .collect();
            let lam = kern.lambda();
            let r = 2.0 * s;
            let b = -lam * kern.derivative(r) / (lam + kern.value(r));
            // landmark 0 is at -s, so the separation grows when x moves left
            assert!((drift[0] - (-0.5 * b)).abs() < 1e-12, "{kern}: {drift:?} vs {b}");
            assert!((drift[1] - 0.5 * b).abs() < 1e-12);
        }
    }
}
