//! Exact transition matrices on small discrete state spaces.
//!
//! Each chain lives on the grid `values^n` (`M^n` chain states), the ensemble
//! on `M^(nN)` states. The builders below enumerate the one-sweep kernel of
//! the interacting MH sampler and of its component-wise variant directly from
//! the target and proposal mass functions, without going through the
//! sampling code, so the two can be checked against each other. The same
//! [`DiscreteSpec`] is exposed to the production sweeps through
//! [`DiscreteTarget`], [`DiscreteChainKernel`] and [`DiscreteComponentKernel`].

use rand::Rng;

use crate::ensemble::ChainEnsemble;
use crate::error::{Error, Result};
use crate::imwg::{ComponentContext, ScalarProposalKernel};
use crate::proposals::{InteractionContext, ProposalKernel};
use crate::targets::TargetDensity;

/// Largest ensemble space for which single kernel rows are built.
pub const ROW_STATE_LIMIT: u128 = 1_000_000;
/// Largest ensemble space for which the dense one-sweep matrix is built.
pub const DENSE_STATE_LIMIT: u128 = 4096;

/// Proposal mass functions on the discrete grid.
///
/// Ensemble points are given as one state index per chain (chain level) or
/// one value index per `(chain, component)` entry, chain-major (component
/// level). The entry being updated must not influence the result: it enters
/// only through `from`.
pub trait DiscreteProposal: Send + Sync {
    /// Mass over the `M^n` chain states offered by chain `j` to chain `i`.
    fn chain_pmf(&self, i: usize, j: usize, chains: &[usize], from: usize) -> Vec<f64>;

    /// Mass over the `M` values of component `ell` offered by chain `j` to
    /// chain `i`.
    fn component_pmf(&self, ell: usize, i: usize, j: usize, entries: &[usize], from: usize) -> Vec<f64>;
}

/// Strictly positive pseudo-random proposal family that depends on the
/// whole context.
#[derive(Debug, Clone)]
pub struct RandomProposal {
    pub seed: u64,
    pub m: usize,
    pub n: usize,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_unit(words: &[u64]) -> f64 {
    let h = words.iter().fold(0u64, |acc, w| splitmix(acc ^ w));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn normalise(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Packs indices into one code, skipping position `skip`.
fn context_code(indices: &[usize], base: usize, skip: usize) -> u64 {
    indices
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != skip)
        .fold(0u64, |acc, (_, &v)| acc.wrapping_mul(base as u64 + 1).wrapping_add(v as u64 + 1))
}

impl DiscreteProposal for RandomProposal {
    fn chain_pmf(&self, i: usize, j: usize, chains: &[usize], from: usize) -> Vec<f64> {
        let states = self.m.pow(self.n as u32);
        let ctx = context_code(chains, states, i);
        normalise(
            (0..states)
                .map(|to| 0.1 + hash_unit(&[self.seed, 1, i as u64, j as u64, ctx, from as u64, to as u64]))
                .collect(),
        )
    }

    fn component_pmf(&self, ell: usize, i: usize, j: usize, entries: &[usize], from: usize) -> Vec<f64> {
        let ctx = context_code(entries, self.m, i * self.n + ell);
        normalise(
            (0..self.m)
                .map(|to| {
                    0.1 + hash_unit(&[self.seed, 2, ell as u64, i as u64, j as u64, ctx, from as u64, to as u64])
                })
                .collect(),
        )
    }
}

/// Uniform proposal over the whole grid (symmetric).
#[derive(Debug, Clone)]
pub struct UniformProposal {
    pub m: usize,
    pub n: usize,
}

impl DiscreteProposal for UniformProposal {
    fn chain_pmf(&self, _: usize, _: usize, _: &[usize], _: usize) -> Vec<f64> {
        let s = self.m.pow(self.n as u32);
        vec![1.0 / s as f64; s]
    }

    fn component_pmf(&self, _: usize, _: usize, _: usize, _: &[usize], _: usize) -> Vec<f64> {
        vec![1.0 / self.m as f64; self.m]
    }
}

/// Always proposes the current state.
#[derive(Debug, Clone)]
pub struct IdentityProposal {
    pub m: usize,
    pub n: usize,
}

impl DiscreteProposal for IdentityProposal {
    fn chain_pmf(&self, _: usize, _: usize, _: &[usize], from: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.m.pow(self.n as u32)];
        v[from] = 1.0;
        v
    }

    fn component_pmf(&self, _: usize, _: usize, _: usize, _: &[usize], from: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        v[from] = 1.0;
        v
    }
}

/// A finite instance: grid values, target masses and a proposal family.
pub struct DiscreteSpec {
    pub values: Vec<f64>,
    pub dim: usize,
    pub chains: usize,
    /// Mass of each chain state, indexed by [`DiscreteSpec::state_index`].
    pub target: Vec<f64>,
    pub proposal: Box<dyn DiscreteProposal>,
}

impl std::fmt::Debug for DiscreteSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteSpec")
            .field("values", &self.values)
            .field("dim", &self.dim)
            .field("chains", &self.chains)
            .field("target", &self.target)
            .finish_non_exhaustive()
    }
}

/// Whether the oracle uses the true acceptance rule or a deliberately broken
/// one (negative control).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AcceptanceRule {
    #[default]
    Metropolis,
    /// The raw ratio `r` without `min(1, r)`.
    UnclampedRatio,
}

impl DiscreteSpec {
    pub fn new(
        values: Vec<f64>,
        dim: usize,
        chains: usize,
        target: Vec<f64>,
        proposal: Box<dyn DiscreteProposal>,
    ) -> Result<Self> {
        let m = values.len();
        if m == 0 || dim == 0 || chains == 0 {
            return Err(Error::InvalidArgument("empty discrete specification".into()));
        }
        for (a, v) in values.iter().enumerate() {
            if !v.is_finite() || values[..a].contains(v) {
                return Err(Error::InvalidArgument("grid values must be finite and distinct".into()));
            }
        }
        let states = checked_pow(m as u128, dim as u128)?;
        if target.len() as u128 != states {
            return Err(Error::DimensionMismatch {
                expected: states as usize,
                found: target.len(),
            });
        }
        if target.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidArgument("target masses must be non-negative".into()));
        }
        let total: f64 = target.iter().sum();
        if (total - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidArgument(format!("target masses sum to {total}")));
        }
        Ok(DiscreteSpec {
            values,
            dim,
            chains,
            target,
            proposal,
        })
    }

    /// Random strictly positive target with a [`RandomProposal`] family.
    pub fn random(seed: u64, m: usize, dim: usize, chains: usize) -> Result<Self> {
        let values = (0..m).map(|k| -1.0 + 1.5 * k as f64).collect();
        let states = checked_pow(m as u128, dim as u128)? as usize;
        let target = normalise(
            (0..states)
                .map(|s| 0.2 + hash_unit(&[seed, 0, s as u64]))
                .collect(),
        );
        Self::new(values, dim, chains, target, Box::new(RandomProposal { seed, m, n: dim }))
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    /// Number of states of one chain, `M^n`.
    pub fn chain_states(&self) -> usize {
        self.m().pow(self.dim as u32)
    }

    /// Number of ensemble states, `M^(nN)`.
    pub fn ensemble_states(&self) -> u128 {
        (self.chain_states() as u128).saturating_pow(self.chains as u32)
    }

    /// Value indices of the components of chain state `s`.
    pub fn components_of(&self, s: usize) -> Vec<usize> {
        let m = self.m();
        (0..self.dim).map(|l| (s / m.pow(l as u32)) % m).collect()
    }

    pub fn state_index(&self, components: &[usize]) -> usize {
        let m = self.m();
        components.iter().rev().fold(0, |acc, &c| acc * m + c)
    }

    /// Chain states of ensemble state `e`.
    pub fn chains_of(&self, e: usize) -> Vec<usize> {
        let s = self.chain_states();
        (0..self.chains).map(|c| (e / s.pow(c as u32)) % s).collect()
    }

    pub fn ensemble_index(&self, chains: &[usize]) -> usize {
        let s = self.chain_states();
        chains.iter().rev().fold(0, |acc, &c| acc * s + c)
    }

    fn value_index(&self, v: f64) -> Option<usize> {
        self.values.iter().position(|&x| x == v)
    }

    /// Chain state of a real vector on the grid.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        let comps: Option<Vec<usize>> = point.iter().map(|&v| self.value_index(v)).collect();
        comps.map(|c| self.state_index(&c))
    }

    pub fn point(&self, s: usize) -> Vec<f64> {
        self.components_of(s).iter().map(|&k| self.values[k]).collect()
    }

    /// Ensemble of real vectors for ensemble state `e`.
    pub fn ensemble(&self, e: usize) -> ChainEnsemble {
        ChainEnsemble::from_chains(self.chains_of(e).into_iter().map(|s| self.point(s)))
            .expect("grid points are finite")
    }

    /// Product mass `Pi(e) = prod_c pi(e_c)`.
    pub fn product_mass(&self, e: usize) -> f64 {
        self.chains_of(e).iter().map(|&s| self.target[s]).product()
    }

    /// Entry-level value indices (chain-major) of ensemble state `e`.
    pub fn entries_of(&self, e: usize) -> Vec<usize> {
        self.chains_of(e)
            .into_iter()
            .flat_map(|s| self.components_of(s))
            .collect()
    }

    /// Largest deviation from one of the row sums of every proposal mass
    /// function reachable on this grid.
    pub fn proposal_row_error(&self) -> Result<f64> {
        guard(self.ensemble_states(), ROW_STATE_LIMIT)?;
        let mut worst: f64 = 0.0;
        for e in 0..self.ensemble_states() as usize {
            let chains = self.chains_of(e);
            let entries = self.entries_of(e);
            for i in 0..self.chains {
                for j in 0..self.chains {
                    let p = self.proposal.chain_pmf(i, j, &chains, chains[i]);
                    worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
                    for ell in 0..self.dim {
                        let p = self.proposal.component_pmf(ell, i, j, &entries, entries[i * self.dim + ell]);
                        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

fn checked_pow(base: u128, exp: u128) -> Result<u128> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base).ok_or(Error::StateSpaceTooLarge {
            states: u128::MAX,
            limit: ROW_STATE_LIMIT,
        })?;
    }
    Ok(acc)
}

fn guard(states: u128, limit: u128) -> Result<()> {
    if states > limit {
        Err(Error::StateSpaceTooLarge { states, limit })
    } else {
        Ok(())
    }
}

fn alpha(pi_x: f64, pi_z: f64, q_forward: f64, q_reverse: f64, rule: AcceptanceRule) -> f64 {
    let num = pi_z * q_reverse;
    let den = pi_x * q_forward;
    if num > 0.0 && den > 0.0 {
        let r = num / den;
        match rule {
            AcceptanceRule::Metropolis => r.min(1.0),
            AcceptanceRule::UnclampedRatio => r,
        }
    } else {
        0.0
    }
}

/// One row of a sub-kernel together with the rejection mass computed both
/// ways.
#[derive(Debug, Clone, PartialEq)]
pub struct SubKernelRow {
    /// Mass of every new value of the updated site.
    pub row: Vec<f64>,
    /// `rho = 1 - (1/N) sum_j sum_z alpha q`, the rejection mass.
    pub rho: f64,
    /// `|atom - (rho + (1/N) sum_j alpha(x,x) q(x|x))|` where `atom` is one
    /// minus the off-diagonal mass.
    pub atom_discrepancy: f64,
}

/// Assembles a sub-kernel row from per-proposer forward/reverse masses.
fn assemble_row(
    n_chains: usize,
    x: usize,
    size: usize,
    mut mass: impl FnMut(usize, usize) -> (f64, f64, f64),
    rule: AcceptanceRule,
    pi: impl Fn(usize) -> f64,
) -> SubKernelRow {
    let nf = n_chains as f64;
    let mut row = vec![0.0; size];
    let mut accepted_total = 0.0;
    let mut self_mass = 0.0;
    for j in 0..n_chains {
        for z in 0..size {
            let (q_forward, q_reverse, _) = mass(j, z);
            let a = alpha(pi(x), pi(z), q_forward, q_reverse, rule);
            let contrib = a * q_forward / nf;
            accepted_total += contrib;
            if z == x {
                self_mass += contrib;
            } else {
                row[z] += contrib;
            }
        }
    }
    let off: f64 = row.iter().sum();
    let atom = 1.0 - off;
    let rho = 1.0 - accepted_total;
    row[x] = atom;
    SubKernelRow {
        row,
        rho,
        atom_discrepancy: (atom - (rho + self_mass)).abs(),
    }
}

/// Row of the chain-`i` sub-kernel `P^i` at ensemble point `chains` (one
/// state index per chain; chains `< i` already updated).
pub fn build_sub_kernel(spec: &DiscreteSpec, i: usize, chains: &[usize], rule: AcceptanceRule) -> Result<SubKernelRow> {
    guard(spec.ensemble_states(), ROW_STATE_LIMIT)?;
    if i >= spec.chains || chains.len() != spec.chains {
        return Err(Error::InvalidArgument("chain index or ensemble point out of range".into()));
    }
    let x = chains[i];
    let size = spec.chain_states();
    let forward: Vec<Vec<f64>> = (0..spec.chains)
        .map(|j| spec.proposal.chain_pmf(i, j, chains, x))
        .collect();
    let reverse: Vec<Vec<Vec<f64>>> = (0..spec.chains)
        .map(|j| (0..size).map(|z| spec.proposal.chain_pmf(i, j, chains, z)).collect())
        .collect();
    Ok(assemble_row(
        spec.chains,
        x,
        size,
        |j, z| (forward[j][z], reverse[j][z][x], 0.0),
        rule,
        |s| spec.target[s],
    ))
}

/// Conditional mass of component `ell` of chain state `s` given its other
/// components, as a function of the value index.
fn conditional_masses(spec: &DiscreteSpec, s: usize, ell: usize) -> Vec<f64> {
    let mut comps = spec.components_of(s);
    let joint: Vec<f64> = (0..spec.m())
        .map(|v| {
            comps[ell] = v;
            spec.target[spec.state_index(&comps)]
        })
        .collect();
    let total: f64 = joint.iter().sum();
    if total > 0.0 {
        joint.iter().map(|p| p / total).collect()
    } else {
        joint
    }
}

/// Row of the component sub-kernel `P^i_ell` at the bracket `entries`
/// (value indices, chain-major).
pub fn build_component_sub_kernel(
    spec: &DiscreteSpec,
    ell: usize,
    i: usize,
    entries: &[usize],
    rule: AcceptanceRule,
) -> Result<SubKernelRow> {
    guard(spec.ensemble_states(), ROW_STATE_LIMIT)?;
    let n = spec.dim;
    if ell >= n || i >= spec.chains || entries.len() != n * spec.chains {
        return Err(Error::InvalidArgument("component index or bracket out of range".into()));
    }
    let x = entries[i * n + ell];
    let s = spec.state_index(&entries[i * n..(i + 1) * n]);
    let cond = conditional_masses(spec, s, ell);
    let m = spec.m();
    let forward: Vec<Vec<f64>> = (0..spec.chains)
        .map(|j| spec.proposal.component_pmf(ell, i, j, entries, x))
        .collect();
    let reverse: Vec<Vec<Vec<f64>>> = (0..spec.chains)
        .map(|j| (0..m).map(|z| spec.proposal.component_pmf(ell, i, j, entries, z)).collect())
        .collect();
    Ok(assemble_row(
        spec.chains,
        x,
        m,
        |j, z| (forward[j][z], reverse[j][z][x], 0.0),
        rule,
        |v| cond[v],
    ))
}

/// Dense row-stochastic matrix over the ensemble space.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    size: usize,
    data: Vec<f64>,
    /// Largest rejection-mass discrepancy met while building.
    pub atom_discrepancy: f64,
}

impl TransitionMatrix {
    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for k in 0..size {
            data[k * size + k] = 1.0;
        }
        TransitionMatrix {
            size,
            data,
            atom_discrepancy: 0.0,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn row(&self, e: usize) -> &[f64] {
        &self.data[e * self.size..(e + 1) * self.size]
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.size + to]
    }

    /// Largest `|sum(row) - 1|`.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.size)
            .map(|e| (self.row(e).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Composes per-site kernels in order; `step_row(site, e)` returns the row of
/// site `site` at ensemble state `e` together with the ensemble state reached
/// for each new value.
fn compose<F>(size: usize, steps: usize, mut step_row: F) -> Result<TransitionMatrix>
where
    F: FnMut(usize, usize) -> Result<(SubKernelRow, Vec<usize>)>,
{
    // cache rows: step x state
    let mut rows = Vec::with_capacity(steps);
    let mut worst: f64 = 0.0;
    for site in 0..steps {
        let mut per_state = Vec::with_capacity(size);
        for e in 0..size {
            let (row, targets) = step_row(site, e)?;
            worst = worst.max(row.atom_discrepancy);
            per_state.push((row.row, targets));
        }
        rows.push(per_state);
    }
    let mut data = vec![0.0; size * size];
    let mut dist = vec![0.0; size];
    let mut next = vec![0.0; size];
    for start in 0..size {
        dist.iter_mut().for_each(|v| *v = 0.0);
        dist[start] = 1.0;
        for per_state in &rows {
            next.iter_mut().for_each(|v| *v = 0.0);
            for (e, &w) in dist.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let (row, targets) = &per_state[e];
                for (p, &t) in row.iter().zip(targets) {
                    next[t] += w * p;
                }
            }
            std::mem::swap(&mut dist, &mut next);
        }
        data[start * size..(start + 1) * size].copy_from_slice(&dist);
    }
    Ok(TransitionMatrix {
        size,
        data,
        atom_discrepancy: worst,
    })
}

/// Exact one-sweep matrix of the interacting MH sampler: `P = P^1 ... P^N`.
pub fn build_transition_matrix(spec: &DiscreteSpec, rule: AcceptanceRule) -> Result<TransitionMatrix> {
    let states = spec.ensemble_states();
    guard(states, DENSE_STATE_LIMIT)?;
    let size = states as usize;
    compose(size, spec.chains, |i, e| {
        let chains = spec.chains_of(e);
        let row = build_sub_kernel(spec, i, &chains, rule)?;
        let targets = (0..spec.chain_states())
            .map(|z| {
                let mut c = chains.clone();
                c[i] = z;
                spec.ensemble_index(&c)
            })
            .collect();
        Ok((row, targets))
    })
}

/// Exact one-sweep matrix of the interacting MwG sampler: components outer,
/// chains inner.
pub fn build_component_transition_matrix(spec: &DiscreteSpec, rule: AcceptanceRule) -> Result<TransitionMatrix> {
    let states = spec.ensemble_states();
    guard(states, DENSE_STATE_LIMIT)?;
    let size = states as usize;
    let n = spec.dim;
    compose(size, n * spec.chains, |site, e| {
        let (ell, i) = (site / spec.chains, site % spec.chains);
        let entries = spec.entries_of(e);
        let row = build_component_sub_kernel(spec, ell, i, &entries, rule)?;
        let targets = (0..spec.m())
            .map(|v| {
                let mut en = entries.clone();
                en[i * n + ell] = v;
                let chains: Vec<usize> = en.chunks(n).map(|c| spec.state_index(c)).collect();
                spec.ensemble_index(&chains)
            })
            .collect();
        Ok((row, targets))
    })
}

/// `|| Pi P - Pi ||_1` for the product of `chains` copies of `target`.
pub fn check_invariance(p: &TransitionMatrix, target: &[f64], chains: usize) -> f64 {
    let s = target.len();
    let pi: Vec<f64> = (0..p.size())
        .map(|e| (0..chains).map(|c| target[(e / s.pow(c as u32)) % s]).product())
        .collect();
    let mut pushed = vec![0.0; p.size()];
    for (e, &w) in pi.iter().enumerate() {
        for (t, v) in p.row(e).iter().enumerate() {
            pushed[t] += w * v;
        }
    }
    pushed.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum()
}

/// Largest `|pi(x) P^i(x, z) - pi(z) P^i(z, x)|` over every chain `i`,
/// every frozen context of the other chains and every pair `(x, z)`.
pub fn check_conditional_detailed_balance(spec: &DiscreteSpec, rule: AcceptanceRule) -> Result<f64> {
    guard(spec.ensemble_states(), ROW_STATE_LIMIT)?;
    let size = spec.chain_states();
    let mut worst: f64 = 0.0;
    for i in 0..spec.chains {
        for e in 0..spec.ensemble_states() as usize {
            let mut chains = spec.chains_of(e);
            if chains[i] != 0 {
                continue; // one representative per context
            }
            let rows: Vec<Vec<f64>> = (0..size)
                .map(|x| {
                    chains[i] = x;
                    build_sub_kernel(spec, i, &chains, rule).map(|r| r.row)
                })
                .collect::<Result<_>>()?;
            for x in 0..size {
                for z in 0..size {
                    let v = (spec.target[x] * rows[x][z] - spec.target[z] * rows[z][x]).abs();
                    worst = worst.max(v);
                }
            }
        }
    }
    Ok(worst)
}

/// Component-wise counterpart of [`check_conditional_detailed_balance`],
/// with respect to the conditional law of the updated component.
pub fn check_component_detailed_balance(spec: &DiscreteSpec, rule: AcceptanceRule) -> Result<f64> {
    guard(spec.ensemble_states(), ROW_STATE_LIMIT)?;
    let (n, m) = (spec.dim, spec.m());
    let mut worst: f64 = 0.0;
    for e in 0..spec.ensemble_states() as usize {
        let base = spec.entries_of(e);
        for i in 0..spec.chains {
            for ell in 0..n {
                let site = i * n + ell;
                if base[site] != 0 {
                    continue;
                }
                let mut entries = base.clone();
                let rows: Vec<Vec<f64>> = (0..m)
                    .map(|x| {
                        entries[site] = x;
                        build_component_sub_kernel(spec, ell, i, &entries, rule).map(|r| r.row)
                    })
                    .collect::<Result<_>>()?;
                let s = spec.state_index(&base[i * n..(i + 1) * n]);
                let cond = conditional_masses(spec, s, ell);
                for x in 0..m {
                    for z in 0..m {
                        worst = worst.max((cond[x] * rows[x][z] - cond[z] * rows[z][x]).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

/// The discrete target as a production [`TargetDensity`]; off-grid points
/// have zero density.
#[derive(Debug, Clone, Copy)]
pub struct DiscreteTarget<'a>(pub &'a DiscreteSpec);

impl TargetDensity for DiscreteTarget<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        match self.0.locate(x) {
            Some(s) => self.0.target[s].ln(),
            None => f64::NEG_INFINITY,
        }
    }
}

fn draw_index<R: Rng + ?Sized>(pmf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (k, p) in pmf.iter().enumerate() {
        cum += p;
        if u < cum {
            return k;
        }
    }
    pmf.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn ensemble_chain_states(spec: &DiscreteSpec, ensemble: &ChainEnsemble) -> Vec<usize> {
    ensemble
        .chains()
        .map(|c| spec.locate(c).expect("ensemble left the grid"))
        .collect()
}

fn ensemble_entries(spec: &DiscreteSpec, ensemble: &ChainEnsemble) -> Vec<usize> {
    ensemble
        .as_slice()
        .iter()
        .map(|&v| spec.value_index(v).expect("ensemble left the grid"))
        .collect()
}

/// The discrete proposal family as a production [`ProposalKernel`].
#[derive(Debug, Clone, Copy)]
pub struct DiscreteChainKernel<'a>(pub &'a DiscreteSpec);

impl ProposalKernel for DiscreteChainKernel<'_> {
    fn sample<R: Rng + ?Sized>(&self, ctx: &InteractionContext<'_>, rng: &mut R) -> Vec<f64> {
        let chains = ensemble_chain_states(self.0, ctx.ensemble);
        let pmf = self.0.proposal.chain_pmf(ctx.target, ctx.proposer, &chains, chains[ctx.target]);
        self.0.point(draw_index(&pmf, rng))
    }

    fn log_density(&self, ctx: &InteractionContext<'_>, from: &[f64], to: &[f64]) -> f64 {
        let chains = ensemble_chain_states(self.0, ctx.ensemble);
        match (self.0.locate(from), self.0.locate(to)) {
            (Some(f), Some(t)) => self.0.proposal.chain_pmf(ctx.target, ctx.proposer, &chains, f)[t].ln(),
            _ => f64::NEG_INFINITY,
        }
    }
}

/// The discrete component proposal as a production [`ScalarProposalKernel`].
#[derive(Debug, Clone, Copy)]
pub struct DiscreteComponentKernel<'a>(pub &'a DiscreteSpec);

impl ScalarProposalKernel for DiscreteComponentKernel<'_> {
    fn sample<R: Rng + ?Sized>(&self, cctx: &ComponentContext<'_>, rng: &mut R) -> f64 {
        let entries = ensemble_entries(self.0, cctx.ensemble);
        let from = entries[cctx.target * self.0.dim + cctx.component];
        let pmf = self
            .0
            .proposal
            .component_pmf(cctx.component, cctx.target, cctx.proposer, &entries, from);
        self.0.values[draw_index(&pmf, rng)]
    }

    fn log_density(&self, cctx: &ComponentContext<'_>, from: f64, to: f64) -> f64 {
        let entries = ensemble_entries(self.0, cctx.ensemble);
        match (self.0.value_index(from), self.0.value_index(to)) {
            (Some(f), Some(t)) => self
                .0
                .proposal
                .component_pmf(cctx.component, cctx.target, cctx.proposer, &entries, f)[t]
                .ln(),
            _ => f64::NEG_INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_spec(m: usize, n: usize, chains: usize) -> DiscreteSpec {
        let s = m.pow(n as u32);
        DiscreteSpec::new(
            (0..m).map(|k| k as f64).collect(),
            n,
            chains,
            vec![1.0 / s as f64; s],
            Box::new(UniformProposal { m, n }),
        )
        .unwrap()
    }

    #[test]
    fn index_round_trips() {
        let spec = DiscreteSpec::random(1, 3, 2, 2).unwrap();
        for e in 0..81 {
            assert_eq!(spec.ensemble_index(&spec.chains_of(e)), e);
            let ens = spec.ensemble(e);
            let located: Vec<usize> = ens.chains().map(|c| spec.locate(c).unwrap()).collect();
            assert_eq!(located, spec.chains_of(e));
        }
        for s in 0..9 {
            assert_eq!(spec.state_index(&spec.components_of(s)), s);
        }
        assert!(spec.proposal_row_error().unwrap() < 1e-14);
    }

    #[test]
    fn unit_acceptance_gives_mixture_of_proposals() {
        let spec = uniform_spec(3, 1, 2);
        let r = build_sub_kernel(&spec, 0, &[1, 2], AcceptanceRule::Metropolis).unwrap();
        for v in &r.row {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(r.rho.abs() < 1e-15);
    }

    #[test]
    fn identity_proposal_gives_identity() {
        let m = 3;
        let spec = DiscreteSpec::random(4, m, 1, 2).unwrap();
        let spec = DiscreteSpec::new(spec.values.clone(), 1, 2, spec.target.clone(), Box::new(IdentityProposal { m, n: 1 })).unwrap();
        let r = build_sub_kernel(&spec, 1, &[0, 2], AcceptanceRule::Metropolis).unwrap();
        assert_eq!(r.row, vec![0.0, 0.0, 1.0]);
        let p = build_transition_matrix(&spec, AcceptanceRule::Metropolis).unwrap();
        assert_eq!(p, TransitionMatrix { atom_discrepancy: p.atom_discrepancy, ..TransitionMatrix::identity(9) });
    }

    /// Target vanishing everywhere except the current state: every alpha is 0.
    #[test]
    fn zero_acceptance_gives_point_mass() {
        let spec = DiscreteSpec::new(
            vec![0.0, 1.0, 2.0],
            1,
            2,
            vec![0.0, 1.0, 0.0],
            Box::new(RandomProposal { seed: 3, m: 3, n: 1 }),
        )
        .unwrap();
        let r = build_sub_kernel(&spec, 0, &[1, 0], AcceptanceRule::Metropolis).unwrap();
        assert_eq!(r.row, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn rows_sum_to_one_and_rho_forms_agree() {
        let spec = DiscreteSpec::random(7, 3, 1, 2).unwrap();
        for e in 0..9 {
            for i in 0..2 {
                let r = build_sub_kernel(&spec, i, &spec.chains_of(e), AcceptanceRule::Metropolis).unwrap();
                assert!((r.row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
                assert!(r.row.iter().all(|v| *v >= 0.0));
                assert!(r.atom_discrepancy < 1e-14);
            }
        }
    }

    /// Textbook single-chain MH matrix, built independently.
    fn classical_mh(target: &[f64], q: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
        let s = target.len();
        let mut p = vec![vec![0.0; s]; s];
        for x in 0..s {
            for z in 0..s {
                if z != x {
                    let a = ((target[z] * q(z, x)) / (target[x] * q(x, z))).min(1.0);
                    p[x][z] = q(x, z) * a;
                }
            }
            p[x][x] = 1.0 - p[x].iter().sum::<f64>();
        }
        p
    }

    #[test]
    fn single_chain_reduces_to_classical_mh() {
        let spec = DiscreteSpec::random(9, 4, 1, 1).unwrap();
        let p = build_transition_matrix(&spec, AcceptanceRule::Metropolis).unwrap();
        let classical = classical_mh(&spec.target, |x, z| spec.proposal.chain_pmf(0, 0, &[x], x)[z]);
        for x in 0..4 {
            for z in 0..4 {
                assert!((p.get(x, z) - classical[x][z]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn invariance_and_negative_control_small() {
        let spec = DiscreteSpec::random(11, 3, 1, 2).unwrap();
        let p = build_transition_matrix(&spec, AcceptanceRule::Metropolis).unwrap();
        assert!(p.row_sum_error() < 1e-12);
        assert!(p.min_entry() >= 0.0);
        assert!(check_invariance(&p, &spec.target, 2) < 1e-12);
        assert!(check_conditional_detailed_balance(&spec, AcceptanceRule::Metropolis).unwrap() < 1e-12);
        let bad = build_transition_matrix(&spec, AcceptanceRule::UnclampedRatio).unwrap();
        assert!(check_invariance(&bad, &spec.target, 2) > 1e-4);
        assert!(check_conditional_detailed_balance(&spec, AcceptanceRule::UnclampedRatio).unwrap() > 1e-4);
    }

    #[test]
    fn identity_matrix_leaves_any_product_invariant() {
        let target = [0.2, 0.5, 0.3];
        assert_eq!(check_invariance(&TransitionMatrix::identity(9), &target, 2), 0.0);
    }

    #[test]
    fn two_state_balance_by_hand() {
        // symmetric two-point proposal, N = 1: both sides equal alpha pi(x) q / N
        let spec = DiscreteSpec::new(
            vec![0.0, 1.0],
            1,
            1,
            vec![0.25, 0.75],
            Box::new(UniformProposal { m: 2, n: 1 }),
        )
        .unwrap();
        let up = build_sub_kernel(&spec, 0, &[0], AcceptanceRule::Metropolis).unwrap();
        let down = build_sub_kernel(&spec, 0, &[1], AcceptanceRule::Metropolis).unwrap();
        // pi(0) P(0,1) = 0.25 * 0.5 * 1; pi(1) P(1,0) = 0.75 * 0.5 * (1/3)
        assert!((0.25 * up.row[1] - 0.125).abs() < 1e-15);
        assert!((0.75 * down.row[0] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn component_kernel_invariance() {
        let spec = DiscreteSpec::random(13, 3, 2, 2).unwrap();
        let p = build_component_transition_matrix(&spec, AcceptanceRule::Metropolis).unwrap();
        assert!(p.row_sum_error() < 1e-12);
        assert!(p.atom_discrepancy < 1e-14);
        assert!(check_invariance(&p, &spec.target, 2) < 1e-12);
        assert!(check_component_detailed_balance(&spec, AcceptanceRule::Metropolis).unwrap() < 1e-12);
    }

    #[test]
    fn size_guards_refuse_large_spaces() {
        let spec = DiscreteSpec::random(1, 5, 2, 3).unwrap(); // 25^3 = 15625 > dense limit
        assert!(matches!(
            build_transition_matrix(&spec, AcceptanceRule::Metropolis),
            Err(Error::StateSpaceTooLarge { .. })
        ));
        assert!(build_sub_kernel(&spec, 0, &[0, 0, 0], AcceptanceRule::Metropolis).is_ok());
        let huge = DiscreteSpec::random(1, 10, 2, 4).unwrap(); // 10^8
        assert!(build_sub_kernel(&huge, 0, &[0, 0, 0, 0], AcceptanceRule::Metropolis).is_err());
    }

    #[test]
    fn spec_validation() {
        let p = || Box::new(UniformProposal { m: 2, n: 1 }) as Box<dyn DiscreteProposal>;
        assert!(DiscreteSpec::new(vec![0.0, 0.0], 1, 1, vec![0.5, 0.5], p()).is_err());
        assert!(DiscreteSpec::new(vec![0.0, 1.0], 1, 1, vec![0.5, 0.6], p()).is_err());
        assert!(DiscreteSpec::new(vec![0.0, 1.0], 1, 1, vec![1.0], p()).is_err());
        assert!(DiscreteSpec::new(vec![0.0, 1.0], 1, 1, vec![1.5, -0.5], p()).is_err());
    }
}
