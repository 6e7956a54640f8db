//! Exact-kernel checks on a random discrete instance.

use std::fmt;

use anyhow::{Context, Result};
use imcmc_core::oracle::{
    build_component_transition_matrix, build_transition_matrix, check_component_detailed_balance,
    check_conditional_detailed_balance, check_invariance, AcceptanceRule, DiscreteChainKernel, DiscreteSpec,
    DiscreteTarget, TransitionMatrix,
};
use imcmc_core::{sweep, ChainEnsemble, SweepOptions};

use crate::config::RunConfig;

/// Bound on an invariance residual or balance violation.
pub const EXACT_TOLERANCE: f64 = 1e-12;
/// The broken acceptance rule must be at least this far off.
pub const NEGATIVE_CONTROL_MIN: f64 = 1e-4;
/// Monte Carlo agreement, in multinomial standard deviations.
pub const MC_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
}

impl Check {
    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost(b) => self.value <= b,
            Bound::AtLeast(b) => self.value >= b,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (op, b) = match self.bound {
            Bound::AtMost(b) => ("<=", b),
            Bound::AtLeast(b) => (">=", b),
        };
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {:.3e} (want {op} {b:e})", self.name, self.value)
    }
}

fn check(name: impl Into<String>, value: f64, bound: Bound) -> Check {
    Check {
        name: name.into(),
        value,
        bound,
    }
}

/// Invariance, negative control and row-sum checks of one matrix pair.
pub fn matrix_checks(label: &str, good: &TransitionMatrix, bad: &TransitionMatrix, spec: &DiscreteSpec) -> Vec<Check> {
    vec![
        check(format!("{label} row sums"), good.row_sum_error(), Bound::AtMost(EXACT_TOLERANCE)),
        check(format!("{label} rejection-mass forms"), good.atom_discrepancy, Bound::AtMost(1e-14)),
        check(
            format!("{label} invariance residual"),
            check_invariance(good, &spec.target, spec.chains),
            Bound::AtMost(EXACT_TOLERANCE),
        ),
        check(
            format!("{label} negative control residual"),
            check_invariance(bad, &spec.target, spec.chains),
            Bound::AtLeast(NEGATIVE_CONTROL_MIN),
        ),
    ]
}

/// Worst standardized deviation between one-sweep frequencies of the
/// production sampler, restarted `total` times from ensemble state `start`,
/// and the exact row.
pub fn monte_carlo_deviation(
    spec: &DiscreteSpec,
    p: &TransitionMatrix,
    start: usize,
    total: u64,
    opts: &SweepOptions,
) -> Result<f64> {
    let target = DiscreteTarget(spec);
    let kernel = DiscreteChainKernel(spec);
    let mut counts = vec![0u64; p.size()];
    for k in 0..total {
        let mut ens: ChainEnsemble = spec.ensemble(start);
        ens.sweep_count = k;
        sweep(&mut ens, &target, &kernel, opts)?;
        let chains: Vec<usize> = ens
            .chains()
            .map(|c| spec.locate(c).context("sweep left the grid"))
            .collect::<Result<_>>()?;
        counts[spec.ensemble_index(&chains)] += 1;
    }
    let t = total as f64;
    let mut worst: f64 = 0.0;
    for (&c, &q) in counts.iter().zip(p.row(start)) {
        let f = c as f64 / t;
        let z = if q == 0.0 {
            if c > 0 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            (f - q).abs() / (q * (1.0 - q) / t).sqrt()
        };
        worst = worst.max(z);
    }
    Ok(worst)
}

pub fn run_oracle_check(cfg: &RunConfig) -> Result<Vec<Check>> {
    let o = cfg.oracle.as_ref().context("oracle settings missing")?;
    let spec = DiscreteSpec::random(cfg.seed, o.values, o.components, cfg.chains)?;
    let mut checks = vec![check(
        "proposal rows",
        spec.proposal_row_error()?,
        Bound::AtMost(1e-14),
    )];

    let good = build_transition_matrix(&spec, AcceptanceRule::Metropolis)?;
    let bad = build_transition_matrix(&spec, AcceptanceRule::UnclampedRatio)?;
    checks.extend(matrix_checks("chain kernel", &good, &bad, &spec));
    checks.push(check(
        "chain kernel conditional detailed balance",
        check_conditional_detailed_balance(&spec, AcceptanceRule::Metropolis)?,
        Bound::AtMost(EXACT_TOLERANCE),
    ));

    let cgood = build_component_transition_matrix(&spec, AcceptanceRule::Metropolis)?;
    let cbad = build_component_transition_matrix(&spec, AcceptanceRule::UnclampedRatio)?;
    checks.extend(matrix_checks("component kernel", &cgood, &cbad, &spec));
    checks.push(check(
        "component kernel conditional detailed balance",
        check_component_detailed_balance(&spec, AcceptanceRule::Metropolis)?,
        Bound::AtMost(EXACT_TOLERANCE),
    ));

    let opts = SweepOptions::new(cfg.seed).parallel(cfg.parallel);
    checks.push(check(
        format!("sweep frequencies vs exact row ({} sweeps, sigmas)", cfg.sweeps),
        monte_carlo_deviation(&spec, &good, 0, cfg.sweeps, &opts)?,
        Bound::AtMost(MC_SIGMAS),
    ));

    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
        crate::output::write_manifest(dir, &cfg.manifest_lines())?;
        let text: String = checks.iter().map(|c| format!("{c}\n")).collect();
        std::fs::write(dir.join("oracle_report.txt"), text)?;
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Experiment, RawConfig};

    #[test]
    fn default_instance_passes() {
        let mut raw = RawConfig::new(Experiment::OracleCheck);
        raw.set("sweeps", "20000").unwrap();
        let checks = run_oracle_check(&raw.resolve().unwrap()).unwrap();
        for c in &checks {
            assert!(c.passed(), "{c}");
        }
    }

    #[test]
    fn display_marks_failures() {
        let c = check("x", 2.0, Bound::AtMost(1.0));
        assert!(c.to_string().starts_with("FAIL x"));
        assert!(check("y", 2.0, Bound::AtLeast(1.0)).passed());
    }
}
