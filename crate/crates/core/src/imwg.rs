//! Component-wise samplers.
//!
//! [`imwg_sweep`] is the interacting Metropolis-within-Gibbs sweep: for each
//! component `ell` and each chain `i` in turn, all `N` chains propose a scalar
//! candidate for entry `(ell, i)` and the multinomial selection of the
//! interacting MH step picks one or keeps the current value.
//! [`plain_mwg_sweep`] is the textbook single-chain version and
//! [`IndependentMwg`] runs `N` non-interacting copies of it.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ensemble::ChainEnsemble;
use crate::error::{Error, Result};
use crate::imh::{alpha_from_log, log_alpha_from_terms, SelectionProbabilities, SubIterationRecord, SweepOptions, SweepRecord};
use crate::proposals::Centering;
use crate::stream::{Purpose, Streams};
use crate::targets::{normal_log_pdf, ConditionalTarget};

/// The bracket `<Z, xi, X>^i_ell` seen by proposer `j` while entry `(ell, i)`
/// is updated: rows `< ell` hold new values, row `ell` holds new values for
/// chains `< i`, everything else is old. Entry `(ell, i)` itself is the
/// current value `xi`.
#[derive(Debug, Clone, Copy)]
pub struct ComponentContext<'a> {
    pub component: usize,
    pub target: usize,
    pub proposer: usize,
    pub ensemble: &'a ChainEnsemble,
}

impl<'a> ComponentContext<'a> {
    pub fn new(ensemble: &'a ChainEnsemble, component: usize, target: usize, proposer: usize) -> Self {
        ComponentContext {
            component,
            target,
            proposer,
            ensemble,
        }
    }

    pub fn current(&self) -> f64 {
        self.ensemble.get(self.component, self.target)
    }

    /// Component `ell` of the proposing chain.
    pub fn anchor(&self) -> f64 {
        self.ensemble.get(self.component, self.proposer)
    }

    /// Chain `i`'s own state, the conditioning point of `pi_ell`.
    pub fn target_state(&self) -> &'a [f64] {
        self.ensemble.chain(self.target)
    }

    pub fn is_self(&self) -> bool {
        self.target == self.proposer
    }
}

/// Scalar cross-chain proposal `q^{i,j}_ell(xi' | xi)`.
pub trait ScalarProposalKernel: Sync {
    fn sample<R: Rng + ?Sized>(&self, cctx: &ComponentContext<'_>, rng: &mut R) -> f64;
    fn log_density(&self, cctx: &ComponentContext<'_>, from: f64, to: f64) -> f64;
}

/// Single-chain component proposal used by plain MwG.
pub trait ComponentProposal: Sync {
    fn sample<R: Rng + ?Sized>(&self, ell: usize, from: f64, rng: &mut R) -> f64;
    fn log_density(&self, ell: usize, from: f64, to: f64) -> f64;
}

/// Per-component standard deviations; a single entry applies to every
/// component.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizes(Vec<f64>);

impl StepSizes {
    pub fn new(steps: Vec<f64>) -> Result<Self> {
        if steps.is_empty() || steps.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(
                "step sizes must be positive and finite".into(),
            ));
        }
        Ok(StepSizes(steps))
    }

    pub fn uniform(step: f64) -> Self {
        StepSizes(vec![step])
    }

    pub fn get(&self, ell: usize) -> f64 {
        if self.0.len() == 1 {
            self.0[0]
        } else {
            self.0[ell]
        }
    }
}

/// Scalar Gaussian random walk `N(from, step_ell^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRandomWalk {
    pub steps: StepSizes,
}

impl GaussianRandomWalk {
    pub fn new(step: f64) -> Self {
        GaussianRandomWalk {
            steps: StepSizes::uniform(step),
        }
    }
}

impl ComponentProposal for GaussianRandomWalk {
    fn sample<R: Rng + ?Sized>(&self, ell: usize, from: f64, rng: &mut R) -> f64 {
        from + self.steps.get(ell) * rng.sample::<f64, _>(StandardNormal)
    }

    fn log_density(&self, ell: usize, from: f64, to: f64) -> f64 {
        let s = self.steps.get(ell);
        normal_log_pdf(to, from, s * s)
    }
}

impl ScalarProposalKernel for GaussianRandomWalk {
    fn sample<R: Rng + ?Sized>(&self, cctx: &ComponentContext<'_>, rng: &mut R) -> f64 {
        ComponentProposal::sample(self, cctx.component, cctx.current(), rng)
    }

    fn log_density(&self, cctx: &ComponentContext<'_>, from: f64, to: f64) -> f64 {
        ComponentProposal::log_density(self, cctx.component, from, to)
    }
}

/// One-dimensional analogue of the distance-adaptive kernel: a random walk
/// for self proposals, `N(center, 1/d)` with `d = clamp(|xi - X^j_ell|)` for
/// foreign proposers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarDistanceAdaptive {
    pub self_steps: StepSizes,
    pub d_min: f64,
    pub d_max: f64,
    pub centering: Centering,
}

impl ScalarDistanceAdaptive {
    pub fn new(self_steps: StepSizes, d_min: f64, d_max: f64, centering: Centering) -> Result<Self> {
        if !(d_min > 0.0 && d_min <= d_max && d_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "distance clamp requires 0 < d_min <= d_max < inf, got [{d_min}, {d_max}]"
            )));
        }
        Ok(ScalarDistanceAdaptive {
            self_steps,
            d_min,
            d_max,
            centering,
        })
    }

    fn moments(&self, cctx: &ComponentContext<'_>, from: f64) -> (f64, f64) {
        if cctx.is_self() {
            let s = self.self_steps.get(cctx.component);
            return (from, s * s);
        }
        let anchor = cctx.anchor();
        let var = 1.0 / (from - anchor).abs().clamp(self.d_min, self.d_max);
        match self.centering {
            Centering::Current => (from, var),
            Centering::Proposer => (anchor, var),
        }
    }
}

impl ScalarProposalKernel for ScalarDistanceAdaptive {
    fn sample<R: Rng + ?Sized>(&self, cctx: &ComponentContext<'_>, rng: &mut R) -> f64 {
        let (mean, var) = self.moments(cctx, cctx.current());
        mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }

    fn log_density(&self, cctx: &ComponentContext<'_>, from: f64, to: f64) -> f64 {
        let (mean, var) = self.moments(cctx, from);
        normal_log_pdf(to, mean, var)
    }
}

/// `log alpha^{i,j}_ell(xi, xi')`. The conditional is always that of chain
/// `i`, whatever the proposer.
pub fn scalar_log_acceptance_alpha<C, K>(
    ct: &C,
    kernel: &K,
    cctx: &ComponentContext<'_>,
    xi: f64,
    xi_cand: f64,
) -> Result<f64>
where
    C: ConditionalTarget + ?Sized,
    K: ScalarProposalKernel,
{
    if xi.is_nan() || xi_cand.is_nan() {
        return Err(Error::NotANumber("acceptance argument"));
    }
    let ell = cctx.component;
    let point = cctx.target_state();
    log_alpha_from_terms(
        ct.log_conditional(ell, xi, point),
        ct.log_conditional(ell, xi_cand, point),
        kernel.log_density(cctx, xi, xi_cand),
        kernel.log_density(cctx, xi_cand, xi),
    )
}

/// `min(1, pi_ell(xi') q(xi | xi') / (pi_ell(xi) q(xi' | xi)))`, or 0 off the
/// support set.
pub fn scalar_acceptance_alpha<C, K>(
    ct: &C,
    kernel: &K,
    cctx: &ComponentContext<'_>,
    xi: f64,
    xi_cand: f64,
) -> Result<f64>
where
    C: ConditionalTarget + ?Sized,
    K: ScalarProposalKernel,
{
    scalar_log_acceptance_alpha(ct, kernel, cctx, xi, xi_cand).map(alpha_from_log)
}

/// Updates entry `(ell, i)` in place.
pub fn imwg_sub_step<C, K>(
    ensemble: &mut ChainEnsemble,
    ell: usize,
    i: usize,
    ct: &C,
    kernel: &K,
    opts: &SweepOptions,
) -> Result<SubIterationRecord>
where
    C: ConditionalTarget + ?Sized,
    K: ScalarProposalKernel,
{
    let n_chains = ensemble.n_chains();
    let k = ensemble.sweep_count;
    let streams = opts.streams();
    let snapshot: &ChainEnsemble = ensemble;
    let xi = snapshot.get(ell, i);
    let point = snapshot.chain(i);
    let log_pi_xi = ct.log_conditional(ell, xi, point);

    let candidate = |j: usize| -> Result<(f64, f64)> {
        let cctx = ComponentContext::new(snapshot, ell, i, j);
        let mut rng = streams.proposal(k, ell, i, j);
        let y = kernel.sample(&cctx, &mut rng);
        let log_alpha = log_alpha_from_terms(
            log_pi_xi,
            ct.log_conditional(ell, y, point),
            kernel.log_density(&cctx, xi, y),
            kernel.log_density(&cctx, y, xi),
        )?;
        Ok((y, alpha_from_log(log_alpha)))
    };

    let candidates: Vec<(f64, f64)> = if opts.parallel {
        (0..n_chains).into_par_iter().map(candidate).collect::<Result<_>>()?
    } else {
        (0..n_chains).map(candidate).collect::<Result<_>>()?
    };
    let (ys, alphas): (Vec<_>, Vec<_>) = candidates.into_iter().unzip();
    let selection = SelectionProbabilities::from_alphas(alphas);
    let u: f64 = streams.selection(k, ell, i).random();
    let chosen = selection.select(u);
    if let Some(j) = chosen {
        ensemble.set(ell, i, ys[j]);
    }
    Ok(SubIterationRecord { chosen, selection })
}

/// One interacting MwG sweep: `ell = 1..n` outer, `i = 1..N` inner, strictly
/// sequential. `chosen` in the record lists every `(ell, i)` step in that
/// order.
pub fn imwg_sweep<C, K>(
    ensemble: &mut ChainEnsemble,
    ct: &C,
    kernel: &K,
    opts: &SweepOptions,
) -> Result<SweepRecord>
where
    C: ConditionalTarget + ?Sized,
    K: ScalarProposalKernel,
{
    let (n, n_chains) = (ensemble.dim(), ensemble.n_chains());
    let mut record = SweepRecord {
        chosen: Vec::with_capacity(n * n_chains),
        mean_alpha: Vec::with_capacity(n * n_chains),
        evaluations: 0,
    };
    for ell in 0..n {
        for i in 0..n_chains {
            let sub = imwg_sub_step(ensemble, ell, i, ct, kernel, opts)?;
            record.chosen.push(sub.chosen);
            record
                .mean_alpha
                .push(sub.selection.alphas.iter().sum::<f64>() / n_chains as f64);
            record.evaluations += 1 + 3 * n_chains as u64;
        }
    }
    ensemble.sweep_count += 1;
    Ok(record)
}

/// Order in which plain MwG visits the components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComponentOrder {
    #[default]
    Ascending,
    /// A fresh uniform permutation every sweep.
    Random,
}

/// One sweep of single-chain Metropolis-within-Gibbs. Returns the number of
/// accepted component moves.
pub fn plain_mwg_sweep<C, K, R>(
    state: &mut [f64],
    ct: &C,
    kernel: &K,
    order: ComponentOrder,
    rng: &mut R,
) -> Result<usize>
where
    C: ConditionalTarget + ?Sized,
    K: ComponentProposal,
    R: Rng + ?Sized,
{
    let mut components: Vec<usize> = (0..state.len()).collect();
    if order == ComponentOrder::Random {
        components.shuffle(rng);
    }
    let mut accepted = 0;
    for ell in components {
        let x = state[ell];
        let y = kernel.sample(ell, x, rng);
        let log_alpha = log_alpha_from_terms(
            ct.log_conditional(ell, x, state),
            ct.log_conditional(ell, y, state),
            kernel.log_density(ell, x, y),
            kernel.log_density(ell, y, x),
        )?;
        let u: f64 = rng.random();
        if u < alpha_from_log(log_alpha) {
            state[ell] = y;
            accepted += 1;
        }
    }
    Ok(accepted)
}

/// `N` non-interacting plain MwG samplers. Chain `i` consumes only its own
/// substream, so its trajectory does not depend on `N` or on the other
/// chains.
#[derive(Debug, Clone)]
pub struct IndependentMwg {
    rngs: Vec<ChaCha8Rng>,
    pub order: ComponentOrder,
    pub parallel: bool,
}

impl IndependentMwg {
    pub fn new(seed: u64, n_chains: usize) -> Self {
        let streams = Streams::new(seed);
        IndependentMwg {
            rngs: (0..n_chains)
                .map(|i| streams.chain(Purpose::Independent, i))
                .collect(),
            order: ComponentOrder::Ascending,
            parallel: false,
        }
    }

    /// The substream chain `i` runs on.
    pub fn chain_stream(seed: u64, i: usize) -> ChaCha8Rng {
        Streams::new(seed).chain(Purpose::Independent, i)
    }

    pub fn sweep<C, K>(
        &mut self,
        ensemble: &mut ChainEnsemble,
        ct: &C,
        kernel: &K,
    ) -> Result<SweepRecord>
    where
        C: ConditionalTarget + ?Sized,
        K: ComponentProposal,
    {
        let dim = ensemble.dim();
        if self.rngs.len() != ensemble.n_chains() {
            return Err(Error::DimensionMismatch {
                expected: self.rngs.len(),
                found: ensemble.n_chains(),
            });
        }
        let order = self.order;
        let mut states: Vec<Vec<f64>> = ensemble.chains().map(|c| c.to_vec()).collect();
        let step = |(state, rng): (&mut Vec<f64>, &mut ChaCha8Rng)| {
            plain_mwg_sweep(state, ct, kernel, order, rng)
        };
        let accepted: Vec<usize> = if self.parallel {
            states
                .par_iter_mut()
                .zip(self.rngs.par_iter_mut())
                .map(step)
                .collect::<Result<_>>()?
        } else {
            states
                .iter_mut()
                .zip(self.rngs.iter_mut())
                .map(step)
                .collect::<Result<_>>()?
        };
        for (i, s) in states.iter().enumerate() {
            ensemble.chain_mut(i).copy_from_slice(s);
        }
        ensemble.sweep_count += 1;
        Ok(SweepRecord {
            chosen: accepted
                .iter()
                .enumerate()
                .map(|(i, &a)| (a > 0).then_some(i))
                .collect(),
            mean_alpha: accepted.iter().map(|&a| a as f64 / dim as f64).collect(),
            evaluations: (accepted.len() * dim * 4) as u64,
        })
    }
}

/// Runs `sweeps` sweeps of [`IndependentMwg`] from `initial`, handing every
/// intermediate ensemble to `observe`.
pub fn independent_parallel_run<C, K, F>(
    initial: ChainEnsemble,
    sweeps: u64,
    ct: &C,
    kernel: &K,
    seed: u64,
    mut observe: F,
) -> Result<ChainEnsemble>
where
    C: ConditionalTarget + ?Sized,
    K: ComponentProposal,
    F: FnMut(&ChainEnsemble),
{
    let mut ensemble = initial;
    let mut sampler = IndependentMwg::new(seed, ensemble.n_chains());
    observe(&ensemble);
    for _ in 0..sweeps {
        sampler.sweep(&mut ensemble, ct, kernel)?;
        observe(&ensemble);
    }
    Ok(ensemble)
}
