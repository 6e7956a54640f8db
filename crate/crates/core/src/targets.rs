//! Unnormalized target densities and their component conditionals.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// An unnormalized log-density on `R^n`.
///
/// Must return `-inf` (never NaN) where the density vanishes.
pub trait TargetDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

/// Log of the full conditional `pi_ell(xi | x_{-ell})`, up to an additive
/// constant in `xi`.
///
/// `point` is the whole state vector; its entry `ell` is ignored and `xi`
/// takes its place.
pub trait ConditionalTarget: Sync {
    fn dim(&self) -> usize;
    fn log_conditional(&self, ell: usize, xi: f64, point: &[f64]) -> f64;
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
}

/// Log-density of `N(mean, var)` at `x`.
pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Log-density of the isotropic Gaussian `N(mean, var * I)` at `x`.
pub fn isotropic_normal_log_pdf(x: &[f64], mean: &[f64], var: f64) -> f64 {
    let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * (x.len() as f64 * (LN_2PI + var.ln()) + sq / var)
}

/// Numerically stable `log(sum(exp(v)))`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone)]
struct MixtureComponent {
    log_weight: f64,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

/// Finite mixture of multivariate Gaussians.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<MixtureComponent>,
}

impl GaussianMixture {
    /// Builds a mixture from `(weight, mean, covariance)` triples.
    ///
    /// Weights must be positive and sum to one within `1e-12`; covariances must
    /// be symmetric positive definite.
    pub fn new(components: Vec<(f64, Vec<f64>, DMatrix<f64>)>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        };
        let dim = first.1.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("mixture dimension must be positive".into()));
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        let mut out = Vec::with_capacity(components.len());
        for (k, (w, mean, cov)) in components.into_iter().enumerate() {
            if !(w > 0.0) {
                return Err(Error::InvalidArgument(format!("weight {k} is not positive")));
            }
            check_dim(dim, mean.len())?;
            if cov.nrows() != dim || cov.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: cov.nrows(),
                });
            }
            if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
                return Err(Error::NotPositiveDefinite(format!(
                    "covariance {k} is not symmetric"
                )));
            }
            let chol = cov
                .clone()
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite(format!("covariance {k}")))?
                .l();
            let log_det: f64 = 2.0 * chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
            out.push(MixtureComponent {
                log_weight: w.ln(),
                mean: DVector::from_vec(mean),
                covariance: cov,
                chol,
                log_norm: -0.5 * (dim as f64 * LN_2PI + log_det),
            });
        }
        Ok(GaussianMixture {
            dim,
            components: out,
        })
    }

    /// Mixture of isotropic Gaussians `sum_k w_k N(C_k, variance * I)`.
    pub fn isotropic(weights: &[f64], centers: &[Vec<f64>], variance: f64) -> Result<Self> {
        check_dim(weights.len(), centers.len())?;
        let comps = weights
            .iter()
            .zip(centers)
            .map(|(&w, c)| (w, c.clone(), DMatrix::identity(c.len(), c.len()) * variance))
            .collect();
        Self::new(comps)
    }

    /// The three-mode planar mixture used by the mode-hopping benchmark:
    /// weights (0.1, 0.3, 0.6) at (-10,-10), (5,0), (-5,5).
    pub fn three_modes(variance: f64) -> Result<Self> {
        Self::isotropic(&THREE_MODE_WEIGHTS, &three_mode_centers(), variance)
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.log_weight.exp()).collect()
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .map(|c| c.mean.iter().copied().collect())
            .collect()
    }

    pub fn covariance(&self, k: usize) -> &DMatrix<f64> {
        &self.components[k].covariance
    }

    fn component_log_density(&self, c: &MixtureComponent, x: &[f64]) -> f64 {
        let diff = DVector::from_iterator(self.dim, x.iter().zip(c.mean.iter()).map(|(a, b)| a - b));
        let z = c
            .chol
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
        c.log_weight + c.log_norm - 0.5 * z.norm_squared()
    }
}

pub const THREE_MODE_WEIGHTS: [f64; 3] = [0.1, 0.3, 0.6];

pub fn three_mode_centers() -> Vec<Vec<f64>> {
    vec![vec![-10.0, -10.0], vec![5.0, 0.0], vec![-5.0, 5.0]]
}

/// `log sum_k w_k N(x; C_k, Sigma_k)`, evaluated with log-sum-exp.
pub fn mixture_log_density(m: &GaussianMixture, x: &[f64]) -> Result<f64> {
    check_dim(m.dim, x.len())?;
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::NotANumber("mixture argument"));
    }
    let terms: Vec<f64> = m
        .components
        .iter()
        .map(|c| m.component_log_density(c, x))
        .collect();
    Ok(log_sum_exp(&terms))
}

impl TargetDensity for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let mut terms = [f64::NEG_INFINITY; 8];
        if self.components.len() <= terms.len() {
            for (t, c) in terms.iter_mut().zip(&self.components) {
                *t = self.component_log_density(c, x);
            }
            log_sum_exp(&terms[..self.components.len()])
        } else {
            mixture_log_density(self, x).unwrap_or(f64::NAN)
        }
    }
}

/// `log pi(x)` with `x_ell := xi` and the other components taken from `rest`
/// (length `n - 1`, in order). As a function of `xi` this is the log of the
/// full conditional up to a constant.
pub fn conditional_from_joint<T: TargetDensity + ?Sized>(
    t: &T,
    ell: usize,
    xi: f64,
    rest: &[f64],
) -> Result<f64> {
    let n = t.dim();
    if ell >= n {
        return Err(Error::InvalidArgument(format!(
            "component {ell} out of range for dimension {n}"
        )));
    }
    check_dim(n - 1, rest.len())?;
    let mut x = Vec::with_capacity(n);
    x.extend_from_slice(&rest[..ell]);
    x.push(xi);
    x.extend_from_slice(&rest[ell..]);
    Ok(t.log_density(&x))
}

/// Uses a joint density as its own conditional family.
#[derive(Debug, Clone, Copy)]
pub struct JointConditional<T>(pub T);

impl<T: TargetDensity> ConditionalTarget for JointConditional<T> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn log_conditional(&self, ell: usize, xi: f64, point: &[f64]) -> f64 {
        let mut buf = [0.0; 16];
        if point.len() <= buf.len() {
            let x = &mut buf[..point.len()];
            x.copy_from_slice(point);
            x[ell] = xi;
            self.0.log_density(x)
        } else {
            let mut x = point.to_vec();
            x[ell] = xi;
            self.0.log_density(&x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn standard_normal_at_mode() {
        let m = GaussianMixture::isotropic(&[1.0], &[vec![0.0, 0.0]], 1.0).unwrap();
        let v = mixture_log_density(&m, &[0.0, 0.0]).unwrap();
        assert!((v - (1.0 / (2.0 * PI)).ln()).abs() < 1e-14);
    }

    #[test]
    fn three_modes_at_third_center_matches_direct_summation() {
        let m = GaussianMixture::three_modes(1.0).unwrap();
        let x = [-5.0, 5.0];
        // direct summation of the three weighted isotropic pdfs
        let direct: f64 = THREE_MODE_WEIGHTS
            .iter()
            .zip(three_mode_centers())
            .map(|(w, c)| {
                let sq = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                w * (-0.5 * sq).exp() / (2.0 * PI)
            })
            .sum();
        let v = mixture_log_density(&m, &x).unwrap();
        assert!((v - direct.ln()).abs() < 1e-13);
        assert!((v - (0.6 / (2.0 * PI)).ln()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_mirrors() {
        let m = GaussianMixture::isotropic(&[0.5, 0.5], &[vec![-2.0, 0.0], vec![2.0, 0.0]], 1.0)
            .unwrap();
        let a = mixture_log_density(&m, &[0.0, 1.3]).unwrap();
        let b = mixture_log_density(&m, &[0.0, -1.3]).unwrap();
        let c = mixture_log_density(&m, &[0.7, 0.2]).unwrap();
        let d = mixture_log_density(&m, &[-0.7, 0.2]).unwrap();
        assert_eq!(a, b);
        assert!((c - d).abs() < 1e-15);
    }

    #[test]
    fn finite_far_from_every_mode() {
        let m = GaussianMixture::three_modes(1.0).unwrap();
        let v = mixture_log_density(&m, &[1e3, -1e3]).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn dimension_and_weight_errors() {
        let m = GaussianMixture::three_modes(1.0).unwrap();
        assert!(matches!(
            mixture_log_density(&m, &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(GaussianMixture::isotropic(&[0.5, 0.6], &[vec![0.0], vec![1.0]], 1.0).is_err());
        assert!(GaussianMixture::isotropic(&[1.0, 0.0], &[vec![0.0], vec![1.0]], 1.0).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianMixture::new(vec![(1.0, vec![0.0, 0.0], bad)]).is_err());
    }

    #[test]
    fn full_covariance_matches_closed_form() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let m = GaussianMixture::new(vec![(1.0, vec![1.0, -1.0], cov)]).unwrap();
        let x = [0.3, 0.4];
        let det: f64 = 2.0 * 1.0 - 0.36;
        let (dx, dy) = (x[0] - 1.0, x[1] + 1.0);
        // inverse of [[2, .6], [.6, 1]] is [[1, -.6], [-.6, 2]] / det
        let q = (dx * dx * 1.0 - 2.0 * 0.6 * dx * dy + 2.0 * dy * dy) / det;
        let expected = -(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * q;
        assert!((mixture_log_density(&m, &x).unwrap() - expected).abs() < 1e-13);
    }

    fn trapezoid_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / (n - 1) as f64;
        (0..n)
            .map(|k| {
                let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                w * f(lo + k as f64 * h)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn mixture_integrates_to_one_in_1d() {
        let m = GaussianMixture::isotropic(
            &[0.2, 0.5, 0.3],
            &[vec![-4.0], vec![0.5], vec![6.0]],
            1.5,
        )
        .unwrap();
        let sd = 1.5f64.sqrt();
        let total = trapezoid_1d(
            |x| m.log_density(&[x]).exp(),
            -4.0 - 8.0 * sd,
            6.0 + 8.0 * sd,
            20_001,
        );
        assert!((total - 1.0).abs() < 1e-6, "total = {total}");
    }

    #[test]
    fn mixture_integrates_to_one_in_2d() {
        let m = GaussianMixture::three_modes(1.0).unwrap();
        let (lo, hi, n) = (-18.0, 13.0, 1201);
        let h = (hi - lo) / (n - 1) as f64;
        let w = |k: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let mut total = 0.0;
        for a in 0..n {
            for b in 0..n {
                let x = [lo + a as f64 * h, lo + b as f64 * h];
                total += w(a) * w(b) * m.log_density(&x).exp();
            }
        }
        total *= h * h;
        assert!((total - 1.0).abs() < 1e-6, "total = {total}");
    }

    struct Product;
    impl TargetDensity for Product {
        fn dim(&self) -> usize {
            2
        }
        fn log_density(&self, x: &[f64]) -> f64 {
            normal_log_pdf(x[0], 1.0, 2.0) + normal_log_pdf(x[1], -3.0, 0.5)
        }
    }

    #[test]
    fn conditional_of_independent_product_is_marginal() {
        let rest = [0.7];
        let c = |xi| conditional_from_joint(&Product, 1, xi, &rest).unwrap();
        let m = |xi| normal_log_pdf(xi, -3.0, 0.5);
        let offset = c(0.0) - m(0.0);
        for xi in [-5.0, -3.0, -1.0, 2.0] {
            assert!((c(xi) - m(xi) - offset).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_of_correlated_gaussian_matches_closed_form() {
        // x ~ N(mu, S), S = [[s1^2, r s1 s2], [r s1 s2, s2^2]]
        let (s1, s2, r) = (1.5, 0.8, 0.6);
        let mu = [0.5, -1.0];
        let cov = DMatrix::from_row_slice(2, 2, &[s1 * s1, r * s1 * s2, r * s1 * s2, s2 * s2]);
        let m = GaussianMixture::new(vec![(1.0, mu.to_vec(), cov)]).unwrap();
        let x1 = 1.7;
        let cmean = mu[1] + r * s2 / s1 * (x1 - mu[0]);
        let cvar = s2 * s2 * (1.0 - r * r);
        let c = |xi| conditional_from_joint(&m, 1, xi, &[x1]).unwrap();
        let offset = c(cmean) - normal_log_pdf(cmean, cmean, cvar);
        for xi in [-3.0, -1.0, 0.0, 0.4, 2.5] {
            assert!((c(xi) - normal_log_pdf(xi, cmean, cvar) - offset).abs() < 1e-12);
        }
    }

    struct HalfPlane;
    impl TargetDensity for HalfPlane {
        fn dim(&self) -> usize {
            2
        }
        fn log_density(&self, x: &[f64]) -> f64 {
            if x[0] < 0.0 {
                f64::NEG_INFINITY
            } else {
                -x[0] - x[1] * x[1]
            }
        }
    }

    #[test]
    fn conditional_is_neg_infinity_outside_support() {
        assert_eq!(
            conditional_from_joint(&HalfPlane, 0, -1.0, &[0.0]).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(conditional_from_joint(&HalfPlane, 2, 0.0, &[0.0]).is_err());
        assert!(conditional_from_joint(&HalfPlane, 0, 0.0, &[0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn conditional_differences_equal_joint_differences(
            x in prop::collection::vec(-15.0f64..15.0, 2),
            ell in 0usize..2,
            a in -15.0f64..15.0,
            b in -15.0f64..15.0,
        ) {
            let m = GaussianMixture::three_modes(1.0).unwrap();
            let rest: Vec<f64> = x.iter().enumerate().filter(|(k, _)| *k != ell).map(|(_, v)| *v).collect();
            let mut xa = x.clone();
            xa[ell] = a;
            let mut xb = x.clone();
            xb[ell] = b;
            let dc = conditional_from_joint(&m, ell, b, &rest).unwrap()
                - conditional_from_joint(&m, ell, a, &rest).unwrap();
            let dj = m.log_density(&xb) - m.log_density(&xa);
            prop_assert_eq!(dc, dj);
            let jc = JointConditional(&m);
            let dw = jc.log_conditional(ell, b, &x) - jc.log_conditional(ell, a, &x);
            prop_assert_eq!(dw, dj);
        }
    }
}
