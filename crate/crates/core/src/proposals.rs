//! Cross-chain proposal kernels `q_{i,j}(y | X^i)`.
//!
//! During sub-iteration `i` every chain `j` offers chain `i` a candidate. The
//! kernel may depend on the whole ensemble except the state of chain `i`
//! itself, which enters only through the `from` argument. That split is what
//! lets the acceptance ratio evaluate the reverse density `q_{i,j}(x | y)`
//! with the same kernel.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::ensemble::ChainEnsemble;
use crate::targets::isotropic_normal_log_pdf;

/// Snapshot seen by proposer `j` while chain `i` is being updated.
///
/// Chains `< i` already hold their new values, chains `>= i` the old ones.
#[derive(Debug, Clone, Copy)]
pub struct InteractionContext<'a> {
    /// Chain being updated.
    pub target: usize,
    /// Chain offering the candidate.
    pub proposer: usize,
    pub ensemble: &'a ChainEnsemble,
}

impl<'a> InteractionContext<'a> {
    pub fn new(ensemble: &'a ChainEnsemble, target: usize, proposer: usize) -> Self {
        debug_assert!(target < ensemble.n_chains() && proposer < ensemble.n_chains());
        InteractionContext {
            target,
            proposer,
            ensemble,
        }
    }

    pub fn current(&self) -> &'a [f64] {
        self.ensemble.chain(self.target)
    }

    pub fn proposer_state(&self) -> &'a [f64] {
        self.ensemble.chain(self.proposer)
    }

    pub fn is_self(&self) -> bool {
        self.target == self.proposer
    }
}

/// A proposal kernel whose density is known in closed form.
pub trait ProposalKernel: Sync {
    /// Draws a candidate for `ctx.target` starting from its current state.
    fn sample<R: Rng + ?Sized>(&self, ctx: &InteractionContext<'_>, rng: &mut R) -> Vec<f64>;

    /// `log q_{i,j}(to | from)`. Must be the exact density of `sample` when
    /// `from` is the current state of `ctx.target`.
    fn log_density(&self, ctx: &InteractionContext<'_>, from: &[f64], to: &[f64]) -> f64;
}

/// Where the cross-chain Gaussian is centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    /// `N(X^i, I/d)`: centered at the chain being updated.
    #[default]
    Current,
    /// `N(X^j, I/d)`: centered at the proposing chain.
    Proposer,
}

impl std::str::FromStr for Centering {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "current" => Ok(Centering::Current),
            "proposer" => Ok(Centering::Proposer),
            other => Err(format!("unknown centering `{other}` (expected current|proposer)")),
        }
    }
}

impl std::fmt::Display for Centering {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Centering::Current => "current",
            Centering::Proposer => "proposer",
        })
    }
}

pub const DEFAULT_D_MIN: f64 = 1e-3;
pub const DEFAULT_D_MAX: f64 = 1e6;

/// Gaussian kernel whose spread shrinks with the distance between chains.
///
/// Self proposals (`i == j`) are a unit random walk `N(X^i, I)`. A foreign
/// proposer `j` uses `N(center, I/d)` with `d = |X^i - X^j|` clamped to
/// `[d_min, d_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceAdaptiveGaussian {
    pub d_min: f64,
    pub d_max: f64,
    pub centering: Centering,
}

impl Default for DistanceAdaptiveGaussian {
    fn default() -> Self {
        DistanceAdaptiveGaussian {
            d_min: DEFAULT_D_MIN,
            d_max: DEFAULT_D_MAX,
            centering: Centering::Current,
        }
    }
}

impl DistanceAdaptiveGaussian {
    pub fn new(d_min: f64, d_max: f64, centering: Centering) -> crate::Result<Self> {
        if !(d_min > 0.0 && d_min <= d_max && d_max.is_finite()) {
            return Err(crate::Error::InvalidArgument(format!(
                "distance clamp requires 0 < d_min <= d_max < inf, got [{d_min}, {d_max}]"
            )));
        }
        Ok(DistanceAdaptiveGaussian {
            d_min,
            d_max,
            centering,
        })
    }

    pub fn clamped_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        d.clamp(self.d_min, self.d_max)
    }

    /// Mean and per-coordinate variance of the kernel started at `from`.
    fn moments<'a>(&self, ctx: &InteractionContext<'a>, from: &'a [f64]) -> (&'a [f64], f64) {
        if ctx.is_self() {
            return (from, 1.0);
        }
        let anchor = ctx.proposer_state();
        let var = 1.0 / self.clamped_distance(from, anchor);
        match self.centering {
            Centering::Current => (from, var),
            Centering::Proposer => (anchor, var),
        }
    }
}

/// Draws from the distance-adaptive kernel at the current state of `ctx.target`.
pub fn da_sample<R: Rng + ?Sized>(
    kernel: &DistanceAdaptiveGaussian,
    ctx: &InteractionContext<'_>,
    rng: &mut R,
) -> Vec<f64> {
    let (mean, var) = kernel.moments(ctx, ctx.current());
    let sd = var.sqrt();
    mean.iter()
        .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// `log q_{i,j}(to | from)` for the distance-adaptive kernel. The distance is
/// re-measured from `from` to the proposer's state.
pub fn da_log_density(
    kernel: &DistanceAdaptiveGaussian,
    ctx: &InteractionContext<'_>,
    from: &[f64],
    to: &[f64],
) -> f64 {
    let (mean, var) = kernel.moments(ctx, from);
    isotropic_normal_log_pdf(to, mean, var)
}

impl ProposalKernel for DistanceAdaptiveGaussian {
    fn sample<R: Rng + ?Sized>(&self, ctx: &InteractionContext<'_>, rng: &mut R) -> Vec<f64> {
        da_sample(self, ctx, rng)
    }

    fn log_density(&self, ctx: &InteractionContext<'_>, from: &[f64], to: &[f64]) -> f64 {
        da_log_density(self, ctx, from, to)
    }
}

/// Isotropic random walk `N(x, step^2 I)` that ignores the other chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomWalk {
    pub step: f64,
}

impl ProposalKernel for RandomWalk {
    fn sample<R: Rng + ?Sized>(&self, ctx: &InteractionContext<'_>, rng: &mut R) -> Vec<f64> {
        ctx.current()
            .iter()
            .map(|m| m + self.step * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn log_density(&self, _ctx: &InteractionContext<'_>, from: &[f64], to: &[f64]) -> f64 {
        isotropic_normal_log_pdf(to, from, self.step * self.step)
    }
}
