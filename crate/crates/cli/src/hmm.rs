//! State-space model comparison: a long exact-Gibbs reference fixes the
//! target marginals, then the interacting and the independent
//! Metropolis-within-Gibbs samplers are scored against it.

use std::path::Path;

use anyhow::{Context, Result};
use imcmc_core::diagnostics::{epsilon_mean, BandwidthRule, ReferenceDensity};
use imcmc_core::imwg::{GaussianRandomWalk, ScalarDistanceAdaptive, StepSizes};
use imcmc_core::lgssm::{initial_ensemble, reference_gibbs_run, simulate, LgssmPosterior, ObservationRecord};
use imcmc_core::stream::Purpose;
use imcmc_core::{imwg_sweep, ChainEnsemble, IndependentMwg, Streams, SweepOptions};
use rand::RngCore;

use crate::clock::MethodClock;
use crate::config::{HmmConfig, RunConfig};
use crate::output::{header, numbered, real, write_manifest, CsvWriter};

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonRow {
    pub sweep: u64,
    pub cpu_seconds: f64,
    pub mean: f64,
    pub components: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmSummary {
    pub dataset: ObservationRecord,
    pub interacting: Vec<EpsilonRow>,
    pub independent: Vec<EpsilonRow>,
}

/// Last row whose `cpu_seconds` does not exceed `budget`.
pub fn at_budget(rows: &[EpsilonRow], budget: f64) -> Option<&EpsilonRow> {
    rows.iter().take_while(|r| r.cpu_seconds <= budget).last()
}

fn write_dataset(dir: &Path, d: &ObservationRecord) -> Result<()> {
    let mut w = CsvWriter::create_with_comments(
        &dir.join("dataset.csv"),
        &[format!("seed = {}", d.seed)],
        &header(&["ell"], vec!["y".into(), "s_true".into()]),
    )?;
    for (k, (y, s)) in d.y.iter().zip(&d.s_true).enumerate() {
        w.row(k as u64 + 1, &[*y, *s])?;
    }
    w.finish()
}

struct Scorer<'a> {
    reference: &'a ReferenceDensity,
    csv: CsvWriter,
    rows: Vec<EpsilonRow>,
}

impl Scorer<'_> {
    fn record(&mut self, ensemble: &ChainEnsemble, cpu_seconds: f64) -> Result<()> {
        let components = self.reference.epsilon_components(ensemble, BandwidthRule::Silverman)?;
        let mean = epsilon_mean(&components)?;
        let mut values = vec![cpu_seconds, mean];
        values.extend(&components);
        self.csv.row(ensemble.sweep_count, &values)?;
        self.rows.push(EpsilonRow {
            sweep: ensemble.sweep_count,
            cpu_seconds,
            mean,
            components,
        });
        Ok(())
    }
}

fn scorer<'a>(dir: &Path, reference: &'a ReferenceDensity, dim: usize) -> Result<Scorer<'a>> {
    let csv = CsvWriter::create(
        &dir.join("epsilon.csv"),
        &header(&["sweep", "cpu_seconds", "epsilon_mean"], numbered("epsilon_", dim)),
    )?;
    Ok(Scorer {
        reference,
        csv,
        rows: Vec::new(),
    })
}

fn due(k: u64, cadence: u64, last: u64) -> bool {
    k % cadence == 0 || k == last
}

/// Method (i): interacting MwG.
fn run_interacting(
    cfg: &RunConfig,
    posterior: &LgssmPosterior<'_>,
    initial: ChainEnsemble,
    reference: &ReferenceDensity,
    dir: &Path,
) -> Result<Vec<EpsilonRow>> {
    let p = &cfg.proposal;
    let kernel = ScalarDistanceAdaptive::new(StepSizes::uniform(p.self_step), p.d_min, p.d_max, p.centering)?;
    let opts = SweepOptions::new(cfg.seed).parallel(cfg.parallel);
    let mut clock = MethodClock::new(cfg.clock, cfg.work_unit_seconds, cfg.parallel);
    let mut ensemble = initial;
    let mut s = scorer(dir, reference, ensemble.dim())?;
    s.record(&ensemble, 0.0)?;
    for _ in 0..cfg.sweeps {
        clock.measure(|| imwg_sweep(&mut ensemble, posterior, &kernel, &opts).map(|r| ((), r.evaluations)))?;
        if due(ensemble.sweep_count, cfg.cadence, cfg.sweeps) {
            s.record(&ensemble, clock.seconds())?;
        }
    }
    s.csv.finish()?;
    Ok(s.rows)
}

/// Method (ii): independent MwG chains.
fn run_independent(
    cfg: &RunConfig,
    hmm: &HmmConfig,
    posterior: &LgssmPosterior<'_>,
    initial: ChainEnsemble,
    reference: &ReferenceDensity,
    dir: &Path,
) -> Result<Vec<EpsilonRow>> {
    let kernel = GaussianRandomWalk::new(hmm.independent_step);
    let mut sampler = IndependentMwg::new(cfg.seed, initial.n_chains());
    sampler.parallel = cfg.parallel;
    let mut clock = MethodClock::new(cfg.clock, cfg.work_unit_seconds, cfg.parallel);
    let mut ensemble = initial;
    let mut s = scorer(dir, reference, ensemble.dim())?;
    s.record(&ensemble, 0.0)?;
    for _ in 0..hmm.independent_sweeps {
        clock.measure(|| sampler.sweep(&mut ensemble, posterior, &kernel).map(|r| ((), r.evaluations)))?;
        if due(ensemble.sweep_count, cfg.cadence, hmm.independent_sweeps) {
            s.record(&ensemble, clock.seconds())?;
        }
    }
    s.csv.finish()?;
    Ok(s.rows)
}

/// Exact-Gibbs reference density from `reference_chains` chains.
pub fn build_reference(cfg: &RunConfig, y: &[f64]) -> Result<ReferenceDensity> {
    let hmm = cfg.hmm.as_ref().context("hmm settings missing")?;
    let init_seed = Streams::new(cfg.seed).purpose(Purpose::Reference).next_u64();
    let start = initial_ensemble(&hmm.model, y, hmm.init, hmm.reference_chains, init_seed)?;
    let fin = reference_gibbs_run(&hmm.model, y, &start, hmm.reference_sweeps, cfg.seed)?;
    Ok(ReferenceDensity::from_ensemble(&fin, BandwidthRule::Silverman, hmm.grid_points)?)
}

pub fn run_hmm(cfg: &RunConfig) -> Result<HmmSummary> {
    let hmm = cfg.hmm.as_ref().context("hmm settings missing")?;
    let dir = cfg.out.as_deref().context("output directory missing")?;
    std::fs::create_dir_all(dir)?;
    write_manifest(dir, &cfg.manifest_lines())?;

    let dataset = simulate(&hmm.model, hmm.dataset_seed)?;
    write_dataset(dir, &dataset)?;
    let posterior = LgssmPosterior::new(&hmm.model, &dataset.y)?;
    let reference = build_reference(cfg, &dataset.y)?;
    write_reference(dir, &reference)?;

    let initial = initial_ensemble(&hmm.model, &dataset.y, hmm.init, cfg.chains, cfg.seed)?;
    let (dir_i, dir_ii) = (dir.join("interacting"), dir.join("independent"));
    let (interacting, independent) = if hmm.concurrent && !cfg.parallel {
        std::thread::scope(|scope| {
            let a = scope.spawn(|| run_interacting(cfg, &posterior, initial.clone(), &reference, &dir_i));
            let b = run_independent(cfg, hmm, &posterior, initial.clone(), &reference, &dir_ii);
            (a.join().expect("interacting run panicked"), b)
        })
    } else {
        (
            run_interacting(cfg, &posterior, initial.clone(), &reference, &dir_i),
            run_independent(cfg, hmm, &posterior, initial, &reference, &dir_ii),
        )
    };
    Ok(HmmSummary {
        dataset,
        interacting: interacting?,
        independent: independent?,
    })
}

/// Tabulated reference marginals (`reference.csv`: component, x, density).
fn write_reference(dir: &Path, reference: &ReferenceDensity) -> Result<()> {
    let mut text = String::from("component,x,density\n");
    for (ell, m) in reference.marginals.iter().enumerate() {
        let t = m.table();
        for (x, v) in t.grid().nodes().zip(t.values()) {
            text.push_str(&format!("{},{},{}\n", ell + 1, real(x), real(*v)));
        }
    }
    std::fs::write(dir.join("reference.csv"), text)?;
    Ok(())
}
