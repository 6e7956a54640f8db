//! Scalar linear-Gaussian state-space model with unknown transition
//! coefficient.
//!
//! ```text
//! s_1 ~ N(s1_mean, s1_var)
//! s_{l+1} = theta * s_l + w_l,   w_l ~ N(0, sigma2_w)
//! y_l     = b * s_l + v_l,       v_l ~ N(0, sigma2_v)
//! theta   ~ N(theta_mean, theta_var)
//! ```
//!
//! The posterior of `(s_1..s_n, theta)` given `y` is sampled either by the
//! exact Gibbs sweep below or by the generic MwG samplers through
//! [`LgssmPosterior`]. Components are ordered `s_1..s_n, theta`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ensemble::ChainEnsemble;
use crate::error::{check_dim, Error, Result};
use crate::stream::{Purpose, Streams};
use crate::targets::{normal_log_pdf, ConditionalTarget, TargetDensity};

#[derive(Debug, Clone, PartialEq)]
pub struct LgssmModel {
    /// Transition coefficient used to generate data.
    pub a_true: f64,
    pub b: f64,
    pub sigma2_w: f64,
    pub sigma2_v: f64,
    pub s1_mean: f64,
    pub s1_var: f64,
    pub theta_mean: f64,
    pub theta_var: f64,
    /// Horizon `n`.
    pub n: usize,
}

impl Default for LgssmModel {
    fn default() -> Self {
        LgssmModel {
            a_true: 2.0,
            b: 2.0,
            sigma2_w: 9.0,
            sigma2_v: 25.0,
            s1_mean: 4.0,
            s1_var: 9.0,
            theta_mean: 1.0,
            theta_var: 4.0,
            n: 10,
        }
    }
}

impl LgssmModel {
    /// Checks the model can be simulated (variances may be zero).
    pub fn validate_for_simulation(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("horizon n must be at least 1".into()));
        }
        for (name, v) in self.variances() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }

    /// Checks the posterior is well defined (all variances positive).
    pub fn validate(&self) -> Result<()> {
        self.validate_for_simulation()?;
        for (name, v) in self.variances() {
            if v <= 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    fn variances(&self) -> [(&'static str, f64); 4] {
        [
            ("sigma2_w", self.sigma2_w),
            ("sigma2_v", self.sigma2_v),
            ("s1_var", self.s1_var),
            ("theta_var", self.theta_var),
        ]
    }

    /// Number of sampled components, `n + 1`.
    pub fn posterior_dim(&self) -> usize {
        self.n + 1
    }
}

/// Sampler state `(s_1..s_n, theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LgssmPosteriorState {
    pub s: Vec<f64>,
    pub theta: f64,
}

impl LgssmPosteriorState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.s.clone();
        v.push(self.theta);
        v
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let (s, theta) = x.split_at(x.len() - 1);
        LgssmPosteriorState {
            s: s.to_vec(),
            theta: theta[0],
        }
    }
}

/// One simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub y: Vec<f64>,
    pub s_true: Vec<f64>,
    pub seed: u64,
}

/// Mean and variance of a univariate Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalParams {
    pub mean: f64,
    pub var: f64,
}

impl NormalParams {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.mean + self.var.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        normal_log_pdf(x, self.mean, self.var)
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64) -> f64 {
    mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal)
}

/// Draws states and observations with `theta = a_true`, from `rng`.
pub fn simulate_with<R: Rng + ?Sized>(model: &LgssmModel, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    model.validate_for_simulation()?;
    let mut s = Vec::with_capacity(model.n);
    let mut y = Vec::with_capacity(model.n);
    let mut state = gaussian(rng, model.s1_mean, model.s1_var);
    for l in 0..model.n {
        if l > 0 {
            state = model.a_true * state + gaussian(rng, 0.0, model.sigma2_w);
        }
        s.push(state);
        y.push(model.b * state + gaussian(rng, 0.0, model.sigma2_v));
    }
    Ok((y, s))
}

/// Simulates one dataset from the substream reserved for data generation.
pub fn simulate(model: &LgssmModel, seed: u64) -> Result<ObservationRecord> {
    let mut rng = Streams::new(seed).purpose(Purpose::Dataset);
    let (y, s_true) = simulate_with(model, &mut rng)?;
    Ok(ObservationRecord { y, s_true, seed })
}

/// Full conditional of `s_ell` (0-based) given the other states, `theta`
/// and `y`.
///
/// Interior components combine the observation with both neighbours. The
/// first state replaces the left neighbour by its prior `N(s1_mean, s1_var)`;
/// the last has no right neighbour.
pub fn state_conditional(
    model: &LgssmModel,
    y: &[f64],
    s: &[f64],
    theta: f64,
    ell: usize,
) -> Result<NormalParams> {
    let n = model.n;
    check_dim(n, y.len())?;
    check_dim(n, s.len())?;
    if ell >= n {
        return Err(Error::InvalidArgument(format!("state index {ell} out of range")));
    }
    Ok(state_conditional_unchecked(model, y, s, theta, ell))
}

fn state_conditional_unchecked(model: &LgssmModel, y: &[f64], s: &[f64], theta: f64, ell: usize) -> NormalParams {
    let n = model.n;
    let (w, v) = (model.sigma2_w, model.sigma2_v);
    let mut precision = model.b * model.b / v;
    let mut shift = model.b * y[ell] / v;
    if ell == 0 {
        precision += 1.0 / model.s1_var;
        shift += model.s1_mean / model.s1_var;
    } else {
        precision += 1.0 / w;
        shift += theta * s[ell - 1] / w;
    }
    if ell + 1 < n {
        precision += theta * theta / w;
        shift += theta * s[ell + 1] / w;
    }
    let var = 1.0 / precision;
    NormalParams {
        mean: var * shift,
        var,
    }
}

/// Full conditional of `theta` given the states.
pub fn theta_conditional(model: &LgssmModel, s: &[f64]) -> Result<NormalParams> {
    check_dim(model.n, s.len())?;
    Ok(theta_conditional_unchecked(model, s))
}

fn theta_conditional_unchecked(model: &LgssmModel, s: &[f64]) -> NormalParams {
    let w = model.sigma2_w;
    let (sq, cross) = s
        .windows(2)
        .fold((0.0, 0.0), |(sq, cross), p| (sq + p[0] * p[0], cross + p[0] * p[1]));
    let precision = 1.0 / model.theta_var + sq / w;
    let var = 1.0 / precision;
    NormalParams {
        mean: var * (model.theta_mean / model.theta_var + cross / w),
        var,
    }
}

/// One exact Gibbs sweep: `s_1..s_n` in order, then `theta`.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    model: &LgssmModel,
    y: &[f64],
    state: &mut LgssmPosteriorState,
    rng: &mut R,
) -> Result<()> {
    gibbs_sweep_states(model, y, state, rng)?;
    state.theta = theta_conditional(model, &state.s)?.sample(rng);
    Ok(())
}

/// Gibbs sweep over the states only, with `theta` held fixed.
pub fn gibbs_sweep_states<R: Rng + ?Sized>(
    model: &LgssmModel,
    y: &[f64],
    state: &mut LgssmPosteriorState,
    rng: &mut R,
) -> Result<()> {
    check_dim(model.n, y.len())?;
    check_dim(model.n, state.s.len())?;
    for ell in 0..model.n {
        let c = state_conditional_unchecked(model, y, &state.s, state.theta, ell);
        state.s[ell] = c.sample(rng);
    }
    Ok(())
}

/// Exact posterior of `s | y, theta`: assembles the tridiagonal precision
/// matrix from the joint density and inverts it densely.
pub fn joint_gaussian_oracle(model: &LgssmModel, y: &[f64], theta: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    model.validate()?;
    let n = model.n;
    check_dim(n, y.len())?;
    let mut precision = DMatrix::<f64>::zeros(n, n);
    let mut h = DVector::<f64>::zeros(n);
    precision[(0, 0)] += 1.0 / model.s1_var;
    h[0] += model.s1_mean / model.s1_var;
    for k in 0..n {
        precision[(k, k)] += model.b * model.b / model.sigma2_v;
        h[k] += model.b * y[k] / model.sigma2_v;
    }
    // (s_{k+1} - theta s_k)^2 / sigma2_w
    for k in 0..n.saturating_sub(1) {
        precision[(k, k)] += theta * theta / model.sigma2_w;
        precision[(k + 1, k + 1)] += 1.0 / model.sigma2_w;
        precision[(k, k + 1)] -= theta / model.sigma2_w;
        precision[(k + 1, k)] -= theta / model.sigma2_w;
    }
    let chol = precision
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("posterior precision".into()))?;
    let cov = chol.inverse();
    let mean = &cov * h;
    Ok((mean, cov))
}

/// The posterior `pi(s, theta | y)` as a joint and as conditionals.
#[derive(Debug, Clone)]
pub struct LgssmPosterior<'a> {
    pub model: &'a LgssmModel,
    pub y: &'a [f64],
}

impl<'a> LgssmPosterior<'a> {
    pub fn new(model: &'a LgssmModel, y: &'a [f64]) -> Result<Self> {
        model.validate()?;
        check_dim(model.n, y.len())?;
        Ok(LgssmPosterior { model, y })
    }

    /// Conditional law of component `ell` given the rest of `point`.
    pub fn conditional(&self, ell: usize, point: &[f64]) -> NormalParams {
        let n = self.model.n;
        let (s, theta) = (&point[..n], point[n]);
        if ell < n {
            state_conditional_unchecked(self.model, self.y, s, theta, ell)
        } else {
            theta_conditional_unchecked(self.model, s)
        }
    }
}

impl ConditionalTarget for LgssmPosterior<'_> {
    fn dim(&self) -> usize {
        self.model.n + 1
    }

    fn log_conditional(&self, ell: usize, xi: f64, point: &[f64]) -> f64 {
        self.conditional(ell, point).log_pdf(xi)
    }
}

impl TargetDensity for LgssmPosterior<'_> {
    fn dim(&self) -> usize {
        self.model.n + 1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let m = self.model;
        let n = m.n;
        let (s, theta) = (&x[..n], x[n]);
        let mut lp = normal_log_pdf(theta, m.theta_mean, m.theta_var)
            + normal_log_pdf(s[0], m.s1_mean, m.s1_var);
        for k in 0..n {
            if k + 1 < n {
                lp += normal_log_pdf(s[k + 1], theta * s[k], m.sigma2_w);
            }
            lp += normal_log_pdf(self.y[k], m.b * s[k], m.sigma2_v);
        }
        lp
    }
}

/// How chains of the state-space experiment are initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitScheme {
    /// `theta` from its prior, `s_l ~ N(y_l / b, sigma2_v / b^2)`.
    Observations,
    /// `theta` from its prior, every `s_l` from the prior of `s_1`.
    #[default]
    Prior,
}

impl std::str::FromStr for InitScheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "observations" => Ok(InitScheme::Observations),
            "prior" => Ok(InitScheme::Prior),
            other => Err(format!("unknown init scheme `{other}` (expected observations|prior)")),
        }
    }
}

impl std::fmt::Display for InitScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InitScheme::Observations => "observations",
            InitScheme::Prior => "prior",
        })
    }
}

/// Draws one initial point `(s, theta)`.
pub fn initial_state<R: Rng + ?Sized>(model: &LgssmModel, y: &[f64], scheme: InitScheme, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = match scheme {
        InitScheme::Observations => {
            let var = model.sigma2_v / (model.b * model.b);
            y.iter().map(|yl| gaussian(rng, yl / model.b, var)).collect()
        }
        InitScheme::Prior => (0..model.n).map(|_| gaussian(rng, model.s1_mean, model.s1_var)).collect(),
    };
    x.push(gaussian(rng, model.theta_mean, model.theta_var));
    x
}

/// `chains` i.i.d. initial points, chain `i` drawn from its own substream.
pub fn initial_ensemble(model: &LgssmModel, y: &[f64], scheme: InitScheme, chains: usize, seed: u64) -> Result<ChainEnsemble> {
    let streams = Streams::new(seed);
    let states: Vec<Vec<f64>> = (0..chains)
        .map(|i| initial_state(model, y, scheme, &mut streams.chain(Purpose::Init, i)))
        .collect();
    ChainEnsemble::from_chains(states)
}

/// Runs `sweeps` exact Gibbs sweeps on every chain of `initial`
/// independently (in parallel, one substream per chain) and returns the
/// final states.
pub fn reference_gibbs_run(
    model: &LgssmModel,
    y: &[f64],
    initial: &ChainEnsemble,
    sweeps: u64,
    seed: u64,
) -> Result<ChainEnsemble> {
    model.validate()?;
    check_dim(model.n + 1, initial.dim())?;
    let streams = Streams::new(seed);
    let finals: Vec<Vec<f64>> = (0..initial.n_chains())
        .into_par_iter()
        .map(|i| {
            let mut rng: ChaCha8Rng = streams.chain(Purpose::Reference, i);
            let mut state = LgssmPosteriorState::from_slice(initial.chain(i));
            for _ in 0..sweeps {
                gibbs_sweep(model, y, &mut state, &mut rng)?;
            }
            Ok(state.to_vec())
        })
        .collect::<Result<_>>()?;
    ChainEnsemble::from_chains(finals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn random_instance(rng: &mut ChaCha8Rng) -> (LgssmModel, Vec<f64>, Vec<f64>, f64) {
        let n = rng.random_range(1..=12);
        let model = LgssmModel {
            a_true: rng.random_range(-2.0..2.0),
            b: rng.random_range(-3.0..3.0),
            sigma2_w: rng.random_range(0.1..10.0),
            sigma2_v: rng.random_range(0.1..30.0),
            s1_mean: rng.random_range(-5.0..5.0),
            s1_var: rng.random_range(0.1..10.0),
            theta_mean: rng.random_range(-2.0..2.0),
            theta_var: rng.random_range(0.1..5.0),
            n,
        };
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let theta = rng.random_range(-2.5..2.5);
        (model, y, s, theta)
    }

    /// Conditional of component `ell` implied by a joint Gaussian.
    fn implied_conditional(mean: &DVector<f64>, cov: &DMatrix<f64>, s: &[f64], ell: usize) -> (f64, f64) {
        let p = cov.clone().try_inverse().unwrap();
        let var = 1.0 / p[(ell, ell)];
        let shift: f64 = (0..s.len())
            .filter(|&m| m != ell)
            .map(|m| p[(ell, m)] * (s[m] - mean[m]))
            .sum();
        (mean[ell] - var * shift, var)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn noise_free_simulation_is_deterministic() {
        let model = LgssmModel {
            sigma2_w: 0.0,
            sigma2_v: 0.0,
            s1_var: 0.0,
            ..LgssmModel::default()
        };
        let rec = simulate(&model, 3).unwrap();
        for l in 0..model.n {
            let s = 2f64.powi(l as i32) * 4.0;
            assert_eq!(rec.s_true[l], s);
            assert_eq!(rec.y[l], 2.0 * s);
        }
    }

    #[test]
    fn default_model_has_benchmark_parameters() {
        let m = LgssmModel::default();
        assert_eq!(
            (m.a_true, m.b, m.sigma2_w, m.sigma2_v, m.s1_mean, m.s1_var, m.theta_mean, m.theta_var, m.n),
            (2.0, 2.0, 9.0, 25.0, 4.0, 9.0, 1.0, 4.0, 10)
        );
    }

    #[test]
    fn transition_noise_has_stated_variance() {
        // with a_true = 0 the states after the first are pure w draws
        let model = LgssmModel {
            a_true: 0.0,
            n: 100_001,
            ..LgssmModel::default()
        };
        let rec = simulate(&model, 9).unwrap();
        let w = &rec.s_true[1..];
        let m = w.len() as f64;
        let mean = w.iter().sum::<f64>() / m;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
        // sd of the sample variance is 9 * sqrt(2/m) ~ 0.04
        assert!((var - 9.0).abs() < 0.2, "var {var}");
    }

    #[test]
    fn interior_conditional_matches_displayed_formula() {
        let model = LgssmModel::default();
        let y = [1.0, 3.0, -2.0, 5.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let s = [0.5, -1.0, 2.0, 0.3, 1.0, 4.0, 2.0, -3.0, 0.0, 1.0];
        let theta = 1.7;
        let c = state_conditional(&model, &y, &s, theta, 4).unwrap();
        let r2 = 1.0 / (4.0 / 25.0 + 1.0 / 9.0 + theta * theta / 9.0);
        let m = r2 * (2.0 * y[4] / 25.0 + theta * s[5] / 9.0 + theta * s[3] / 9.0);
        assert!(rel(c.var, r2) < 1e-15 && rel(c.mean, m) < 1e-14);
    }

    #[test]
    fn interior_conditional_without_information_is_increment_prior() {
        let model = LgssmModel {
            b: 0.0,
            ..LgssmModel::default()
        };
        let y = [0.0; 10];
        let s = [1.0; 10];
        let c = state_conditional(&model, &y, &s, 0.0, 5).unwrap();
        assert_eq!(c.mean, 0.0);
        assert!(rel(c.var, model.sigma2_w) < 1e-15);
    }

    #[test]
    fn state_conditionals_match_joint_gaussian_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for _ in 0..100 {
            let (model, y, s, theta) = random_instance(&mut rng);
            let (mean, cov) = joint_gaussian_oracle(&model, &y, theta).unwrap();
            for ell in 0..model.n {
                let c = state_conditional(&model, &y, &s, theta, ell).unwrap();
                let (om, ov) = implied_conditional(&mean, &cov, &s, ell);
                assert!(rel(c.var, ov) < 1e-10, "var {} vs {}", c.var, ov);
                assert!((c.mean - om).abs() <= 1e-10 * om.abs().max(1.0), "mean {} vs {}", c.mean, om);
            }
        }
    }

    /// Mean and variance of a Gaussian log-density from three evaluations.
    fn quadratic_fit(f: impl Fn(f64) -> f64, x0: f64, h: f64) -> (f64, f64) {
        let (a, b, c) = (f(x0 - h), f(x0), f(x0 + h));
        let second = (a - 2.0 * b + c) / (h * h);
        let first = (c - a) / (2.0 * h);
        let var = -1.0 / second;
        (x0 + first * var, var)
    }

    #[test]
    fn theta_conditional_matches_quadratic_fit_of_joint() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..100 {
            let (model, y, s, _) = random_instance(&mut rng);
            let post = LgssmPosterior::new(&model, &y).unwrap();
            let c = theta_conditional(&model, &s).unwrap();
            let mut x = s.clone();
            x.push(0.0);
            let f = |t: f64| {
                let mut x = x.clone();
                x[model.n] = t;
                post.log_density(&x)
            };
            let (m, v) = quadratic_fit(f, c.mean, c.var.sqrt());
            assert!(rel(c.var, v) < 1e-6, "{} vs {v}", c.var);
            assert!((c.mean - m).abs() < 1e-6 * c.var.sqrt().max(m.abs()));
        }
    }

    #[test]
    fn theta_without_states_is_prior() {
        let model = LgssmModel::default();
        let c = theta_conditional(&model, &[0.0; 10]).unwrap();
        assert_eq!((c.mean, c.var), (model.theta_mean, model.theta_var));
    }

    #[test]
    fn theta_is_ratio_when_likelihood_dominates() {
        let model = LgssmModel {
            n: 2,
            ..LgssmModel::default()
        };
        let c = theta_conditional(&model, &[1e6, 3.7e6]).unwrap();
        assert!((c.mean - 3.7).abs() < 1e-9);
    }

    #[test]
    fn theta_precision_never_below_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(102);
        for _ in 0..200 {
            let (model, _, s, _) = random_instance(&mut rng);
            let c = theta_conditional(&model, &s).unwrap();
            assert!(1.0 / c.var >= 1.0 / model.theta_var);
        }
    }

    #[test]
    fn conditional_log_density_differences_match_joint() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for _ in 0..50 {
            let (model, y, s, theta) = random_instance(&mut rng);
            let post = LgssmPosterior::new(&model, &y).unwrap();
            let mut x = s.clone();
            x.push(theta);
            for ell in 0..=model.n {
                let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                let dc = post.log_conditional(ell, b, &x) - post.log_conditional(ell, a, &x);
                let mut xa = x.clone();
                xa[ell] = a;
                let mut xb = x.clone();
                xb[ell] = b;
                let dj = post.log_density(&xb) - post.log_density(&xa);
                assert!((dc - dj).abs() < 1e-9 * dj.abs().max(1.0), "{ell}: {dc} vs {dj}");
            }
        }
    }

    #[test]
    fn single_state_oracle_is_conjugate_update() {
        let model = LgssmModel {
            n: 1,
            ..LgssmModel::default()
        };
        let (mean, cov) = joint_gaussian_oracle(&model, &[10.0], 0.3).unwrap();
        let prec = 1.0 / 9.0 + 4.0 / 25.0;
        assert!(rel(cov[(0, 0)], 1.0 / prec) < 1e-14);
        assert!(rel(mean[0], (4.0 / 9.0 + 20.0 / 25.0) / prec) < 1e-14);
    }

    #[test]
    fn smaller_observation_noise_shrinks_marginals() {
        let y: Vec<f64> = (0..10).map(|l| l as f64).collect();
        let loud = LgssmModel::default();
        let quiet = LgssmModel {
            sigma2_v: 5.0,
            ..loud.clone()
        };
        let (_, c1) = joint_gaussian_oracle(&loud, &y, 1.2).unwrap();
        let (_, c2) = joint_gaussian_oracle(&quiet, &y, 1.2).unwrap();
        for k in 0..10 {
            assert!(c2[(k, k)] < c1[(k, k)]);
        }
    }

    #[test]
    fn fixed_theta_gibbs_matches_smoother_mean() {
        let model = LgssmModel::default();
        let rec = simulate(&model, 5).unwrap();
        let theta = 2.0;
        let (mean, cov) = joint_gaussian_oracle(&model, &rec.y, theta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut state = LgssmPosteriorState {
            s: rec.y.iter().map(|y| y / 2.0).collect(),
            theta,
        };
        let (burn, m) = (500, 40_000);
        let mut sum = vec![0.0; 10];
        let mut draws = Vec::with_capacity(m);
        for t in 0..burn + m {
            gibbs_sweep_states(&model, &rec.y, &mut state, &mut rng).unwrap();
            if t >= burn {
                for k in 0..10 {
                    sum[k] += state.s[k];
                }
                draws.push(state.s.clone());
            }
        }
        for k in 0..10 {
            let est = sum[k] / m as f64;
            // batch-means standard error
            let b = 100;
            let bs = m / b;
            let bm: Vec<f64> = draws.chunks(bs).map(|c| c.iter().map(|d| d[k]).sum::<f64>() / bs as f64).collect();
            let se = (bm.iter().map(|x| (x - est).powi(2)).sum::<f64>() / (b - 1) as f64 / b as f64).sqrt();
            let se = se.max((cov[(k, k)] / m as f64).sqrt());
            assert!((est - mean[k]).abs() < 3.0 * se, "k={k}: {est} vs {} (se {se})", mean[k]);
        }
    }

    #[test]
    fn vanishing_observation_noise_pins_states() {
        let model = LgssmModel {
            sigma2_v: 1e-10,
            ..LgssmModel::default()
        };
        let y = [3.0, 5.0, -1.0, 8.0, 2.0, 1.0, 0.0, 4.0, 7.0, 9.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut state = LgssmPosteriorState { s: vec![0.0; 10], theta: 1.0 };
        for _ in 0..5 {
            gibbs_sweep(&model, &y, &mut state, &mut rng).unwrap();
        }
        for k in 0..10 {
            assert!((state.s[k] - y[k] / 2.0).abs() < 1e-3);
        }
    }

    #[test]
    fn validation_and_dimension_errors() {
        let bad = LgssmModel {
            sigma2_w: 0.0,
            ..LgssmModel::default()
        };
        assert!(bad.validate().is_err());
        assert!(bad.validate_for_simulation().is_ok());
        assert!(joint_gaussian_oracle(&bad, &[0.0; 10], 1.0).is_err());
        let m = LgssmModel::default();
        assert!(state_conditional(&m, &[0.0; 9], &[0.0; 10], 1.0, 0).is_err());
        assert!(state_conditional(&m, &[0.0; 10], &[0.0; 10], 1.0, 10).is_err());
        assert!(theta_conditional(&m, &[0.0; 3]).is_err());
    }

    #[test]
    fn reference_run_is_deterministic_and_well_shaped() {
        let model = LgssmModel::default();
        let rec = simulate(&model, 1).unwrap();
        let init = initial_ensemble(&model, &rec.y, InitScheme::Observations, 8, 1).unwrap();
        let a = reference_gibbs_run(&model, &rec.y, &init, 20, 1).unwrap();
        let b = reference_gibbs_run(&model, &rec.y, &init, 20, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.n_chains(), a.dim()), (8, 11));
    }
}
