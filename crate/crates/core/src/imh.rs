//! The parallel/interacting Metropolis-Hastings sweep.
//!
//! One sweep updates the chains in order `i = 1..N`. In sub-iteration `i`
//! every chain `j` proposes a candidate `Y^j ~ q_{i,j}(. | X^i)`; chain `i`
//! then moves to `Y^j` with probability `alpha^{i,j}(X^i, Y^j) / N` or stays
//! put with the remaining mass. The product of `N` copies of the target is
//! invariant under the resulting kernel.

use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::ChainEnsemble;
use crate::error::{Error, Result};
use crate::proposals::{InteractionContext, ProposalKernel};
use crate::stream::Streams;
use crate::targets::TargetDensity;

/// Log-ratios are clamped here before exponentiation; `min(1, .)` caps the
/// result anyway.
pub const LOG_RATIO_CLAMP: f64 = 50.0;

/// `min(0, log r)` from the four log terms of the MH ratio, or `-inf` when the
/// pair lies outside the set where both `pi(y) q(x|y)` and `pi(x) q(y|x)` are
/// positive.
pub fn log_alpha_from_terms(
    log_pi_x: f64,
    log_pi_y: f64,
    log_q_forward: f64,
    log_q_reverse: f64,
) -> Result<f64> {
    if [log_pi_x, log_pi_y, log_q_forward, log_q_reverse]
        .iter()
        .any(|v| v.is_nan())
    {
        return Err(Error::NotANumber("acceptance ratio"));
    }
    let num = log_pi_y + log_q_reverse;
    let den = log_pi_x + log_q_forward;
    if num == f64::NEG_INFINITY || den == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if num == f64::INFINITY || den == f64::INFINITY {
        return Err(Error::InvalidArgument("infinite log-density".into()));
    }
    Ok((num - den).min(0.0))
}

pub(crate) fn alpha_from_log(log_alpha: f64) -> f64 {
    log_alpha.min(LOG_RATIO_CLAMP).exp().min(1.0)
}

/// `log alpha^{i,j}(x, y)`; see [`acceptance_alpha`].
pub fn log_acceptance_alpha<T, K>(
    target: &T,
    kernel: &K,
    ctx: &InteractionContext<'_>,
    x: &[f64],
    y: &[f64],
) -> Result<f64>
where
    T: TargetDensity + ?Sized,
    K: ProposalKernel,
{
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::NotANumber("acceptance argument"));
    }
    log_alpha_from_terms(
        target.log_density(x),
        target.log_density(y),
        kernel.log_density(ctx, x, y),
        kernel.log_density(ctx, y, x),
    )
}

/// `alpha^{i,j}(x, y) = min(1, pi(y) q(x|y) / (pi(x) q(y|x)))`, or 0 off the
/// support set.
pub fn acceptance_alpha<T, K>(
    target: &T,
    kernel: &K,
    ctx: &InteractionContext<'_>,
    x: &[f64],
    y: &[f64],
) -> Result<f64>
where
    T: TargetDensity + ?Sized,
    K: ProposalKernel,
{
    log_acceptance_alpha(target, kernel, ctx, x, y).map(alpha_from_log)
}

/// The multinomial law of one selection step: candidate `j` with
/// probability `alphas[j] / N`, the current state with probability `stay`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProbabilities {
    pub alphas: Vec<f64>,
    pub stay: f64,
}

impl SelectionProbabilities {
    pub fn from_alphas(alphas: Vec<f64>) -> Self {
        let n = alphas.len() as f64;
        let stay = 1.0 - alphas.iter().sum::<f64>() / n;
        SelectionProbabilities {
            alphas,
            stay: stay.max(0.0),
        }
    }

    pub fn candidate_probability(&self, j: usize) -> f64 {
        self.alphas[j] / self.alphas.len() as f64
    }

    pub fn total(&self) -> f64 {
        self.stay + self.alphas.iter().sum::<f64>() / self.alphas.len() as f64
    }

    /// Inverts the cumulative law at `u in [0,1)`, scanning candidates in
    /// order and then the stay atom. `None` means stay.
    pub fn select(&self, u: f64) -> Option<usize> {
        let n = self.alphas.len() as f64;
        let mut cum = 0.0;
        for (j, a) in self.alphas.iter().enumerate() {
            cum += a / n;
            if u < cum {
                return Some(j);
            }
        }
        None
    }
}

/// Random-number and scheduling options shared by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub seed: u64,
    /// Evaluate the `N` candidates of a sub-iteration on the rayon pool.
    /// Output is identical either way.
    pub parallel: bool,
}

impl SweepOptions {
    pub fn new(seed: u64) -> Self {
        SweepOptions {
            seed,
            parallel: false,
        }
    }

    pub fn parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn streams(&self) -> Streams {
        Streams::new(self.seed)
    }
}

/// What happened in one sub-iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SubIterationRecord {
    /// Proposer whose candidate was taken, `None` when the chain stayed.
    pub chosen: Option<usize>,
    pub selection: SelectionProbabilities,
}

/// Per-sweep summary: which proposer (if any) moved each chain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepRecord {
    pub chosen: Vec<Option<usize>>,
    pub mean_alpha: Vec<f64>,
    /// Number of target and proposal density evaluations performed.
    pub evaluations: u64,
}

impl SweepRecord {
    pub fn acceptance_rate(&self) -> f64 {
        if self.chosen.is_empty() {
            return 0.0;
        }
        self.chosen.iter().filter(|c| c.is_some()).count() as f64 / self.chosen.len() as f64
    }

    /// Moves taken from a proposer other than the chain itself.
    pub fn cross_moves(&self) -> usize {
        self.chosen
            .iter()
            .enumerate()
            .filter(|(i, c)| matches!(c, Some(j) if j != i))
            .count()
    }
}

/// Updates chain `i` in place. Chains `< i` must already hold this sweep's
/// values.
pub fn sub_iteration<T, K>(
    ensemble: &mut ChainEnsemble,
    i: usize,
    target: &T,
    kernel: &K,
    opts: &SweepOptions,
) -> Result<SubIterationRecord>
where
    T: TargetDensity + ?Sized,
    K: ProposalKernel,
{
    let n_chains = ensemble.n_chains();
    let k = ensemble.sweep_count;
    let streams = opts.streams();
    let snapshot: &ChainEnsemble = ensemble;
    let x = snapshot.chain(i);
    let log_pi_x = target.log_density(x);

    let candidate = |j: usize| -> Result<(Vec<f64>, f64)> {
        let ctx = InteractionContext::new(snapshot, i, j);
        let mut rng = streams.proposal(k, 0, i, j);
        let y = kernel.sample(&ctx, &mut rng);
        let log_alpha = log_alpha_from_terms(
            log_pi_x,
            target.log_density(&y),
            kernel.log_density(&ctx, x, &y),
            kernel.log_density(&ctx, &y, x),
        )?;
        Ok((y, alpha_from_log(log_alpha)))
    };

    let candidates: Vec<(Vec<f64>, f64)> = if opts.parallel {
        (0..n_chains).into_par_iter().map(candidate).collect::<Result<_>>()?
    } else {
        (0..n_chains).map(candidate).collect::<Result<_>>()?
    };

    let (ys, alphas): (Vec<_>, Vec<_>) = candidates.into_iter().unzip();
    let selection = SelectionProbabilities::from_alphas(alphas);
    let u: f64 = streams.selection(k, 0, i).random();
    let chosen = selection.select(u);
    if let Some(j) = chosen {
        ensemble.chain_mut(i).copy_from_slice(&ys[j]);
    }
    Ok(SubIterationRecord { chosen, selection })
}

/// One full sweep over `i = 1..N`, strictly in order. Increments
/// `sweep_count`.
pub fn sweep<T, K>(
    ensemble: &mut ChainEnsemble,
    target: &T,
    kernel: &K,
    opts: &SweepOptions,
) -> Result<SweepRecord>
where
    T: TargetDensity + ?Sized,
    K: ProposalKernel,
{
    let n_chains = ensemble.n_chains();
    let mut record = SweepRecord {
        chosen: Vec::with_capacity(n_chains),
        mean_alpha: Vec::with_capacity(n_chains),
        evaluations: 0,
    };
    for i in 0..n_chains {
        let sub = sub_iteration(ensemble, i, target, kernel, opts)?;
        record.chosen.push(sub.chosen);
        record
            .mean_alpha
            .push(sub.selection.alphas.iter().sum::<f64>() / n_chains as f64);
        // one target and two proposal densities per candidate, plus pi(X^i)
        record.evaluations += 1 + 3 * n_chains as u64;
    }
    ensemble.sweep_count += 1;
    Ok(record)
}
