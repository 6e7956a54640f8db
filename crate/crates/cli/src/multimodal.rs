//! Mode-hopping benchmark on the three-mode planar mixture.

use std::path::Path;

use anyhow::{Context, Result};
use imcmc_core::diagnostics::mode_occupancy;
use imcmc_core::stream::Purpose;
use imcmc_core::{sweep, ChainEnsemble, DistanceAdaptiveGaussian, GaussianMixture, Streams, SweepOptions};
use rand::Rng;

use crate::clock::MethodClock;
use crate::config::RunConfig;
use crate::output::{header, numbered, write_manifest, CsvWriter};

/// Occupancy trajectory of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalSummary {
    /// `(sweep, proportions)` at every recorded sweep.
    pub occupancy: Vec<(u64, Vec<f64>)>,
    pub acceptance_rate: f64,
    pub cpu_seconds: f64,
}

impl MultimodalSummary {
    pub fn final_occupancy(&self) -> &[f64] {
        &self.occupancy.last().expect("sweep 0 is always recorded").1
    }

    /// Largest occupancy of mode `k` seen at any recorded sweep.
    pub fn max_occupancy(&self, k: usize) -> f64 {
        self.occupancy.iter().map(|(_, p)| p[k]).fold(0.0, f64::max)
    }
}

/// `chains` points uniform on the box, chain `i` from its own substream.
pub fn initial_square(chains: usize, b: [f64; 4], seed: u64) -> Result<ChainEnsemble> {
    let streams = Streams::new(seed);
    let pts: Vec<Vec<f64>> = (0..chains)
        .map(|i| {
            let mut rng = streams.chain(Purpose::Init, i);
            vec![rng.random_range(b[0]..b[1]), rng.random_range(b[2]..b[3])]
        })
        .collect();
    Ok(ChainEnsemble::from_chains(pts)?)
}

fn write_positions(dir: &Path, ensemble: &ChainEnsemble) -> Result<()> {
    let path = dir.join(format!("positions_{}.csv", ensemble.sweep_count));
    let mut w = CsvWriter::create(&path, &header(&["chain"], numbered("x", ensemble.dim())))?;
    for (i, c) in ensemble.chains().enumerate() {
        w.row(i as u64, c)?;
    }
    w.finish()
}

pub fn run_multimodal(cfg: &RunConfig) -> Result<MultimodalSummary> {
    let mm = cfg.multimodal.as_ref().context("multimodal settings missing")?;
    let dir = cfg.out.as_deref().context("output directory missing")?;
    std::fs::create_dir_all(dir)?;
    write_manifest(dir, &cfg.manifest_lines())?;

    let target = GaussianMixture::three_modes(mm.mixture_variance)?;
    let centers = target.means();
    let kernel = DistanceAdaptiveGaussian::new(cfg.proposal.d_min, cfg.proposal.d_max, cfg.proposal.centering)?;
    let opts = SweepOptions::new(cfg.seed).parallel(cfg.parallel);
    let mut clock = MethodClock::new(cfg.clock, cfg.work_unit_seconds, cfg.parallel);

    let mut ensemble = initial_square(cfg.chains, mm.init_box, cfg.seed)?;
    let mut occ_csv = CsvWriter::create(&dir.join("occupancy.csv"), &header(&["sweep"], numbered("p_", centers.len())))?;
    let mut acc_csv = CsvWriter::create(
        &dir.join("acceptance.csv"),
        &header(&["sweep"], vec!["acceptance_rate".into(), "cross_moves".into(), "cpu_seconds".into()]),
    )?;
    let mut summary = MultimodalSummary {
        occupancy: Vec::new(),
        acceptance_rate: 0.0,
        cpu_seconds: 0.0,
    };
    let mut accepted = 0.0;

    let mut record = |ensemble: &ChainEnsemble, summary: &mut MultimodalSummary| -> Result<()> {
        let p = mode_occupancy(ensemble, &centers)?;
        occ_csv.row(ensemble.sweep_count, &p)?;
        summary.occupancy.push((ensemble.sweep_count, p));
        Ok(())
    };

    record(&ensemble, &mut summary)?;
    if mm.snapshots.contains(&0) {
        write_positions(dir, &ensemble)?;
    }
    for _ in 0..cfg.sweeps {
        let rec = clock.measure(|| sweep(&mut ensemble, &target, &kernel, &opts).map(|r| {
            let e = r.evaluations;
            (r, e)
        }))?;
        accepted += rec.acceptance_rate();
        acc_csv.row(
            ensemble.sweep_count,
            &[rec.acceptance_rate(), rec.cross_moves() as f64, clock.seconds()],
        )?;
        let k = ensemble.sweep_count;
        if k % cfg.cadence == 0 || k == cfg.sweeps {
            record(&ensemble, &mut summary)?;
        }
        if mm.snapshots.contains(&k) {
            write_positions(dir, &ensemble)?;
        }
    }
    occ_csv.finish()?;
    acc_csv.finish()?;
    summary.acceptance_rate = accepted / cfg.sweeps as f64;
    summary.cpu_seconds = clock.seconds();
    Ok(summary)
}
