//! Convergence indicators.
//!
//! Marginal Gaussian-kernel density estimates, the L1 distance between two
//! of them, its mean over components, and mode occupancy of an ensemble.

use crate::ensemble::ChainEnsemble;
use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Kernel evaluations beyond this many bandwidths are dropped (`exp(-32)`).
const KERNEL_CUTOFF: f64 = 8.0;
/// Padding, in bandwidths, around the sample range of a density's support.
pub const SUPPORT_PAD: f64 = 4.0;
pub const DEFAULT_GRID_POINTS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BandwidthRule {
    /// `1.06 * sd * m^(-1/5)`.
    #[default]
    Silverman,
    Fixed(f64),
}

/// One-dimensional Gaussian kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde1D {
    sorted: Vec<f64>,
    bandwidth: f64,
}

pub fn silverman_bandwidth(sample: &[f64]) -> f64 {
    let m = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / m;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    1.06 * var.sqrt() * m.powf(-0.2)
}

/// Fits a Gaussian KDE. Needs at least two finite, non-identical values
/// unless the bandwidth is fixed.
pub fn kde_fit(sample: &[f64], rule: BandwidthRule) -> Result<Kde1D> {
    if sample.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 points, got {}",
            sample.len()
        )));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("sample contains non-finite values".into()));
    }
    let bandwidth = match rule {
        BandwidthRule::Silverman => silverman_bandwidth(sample),
        BandwidthRule::Fixed(h) => h,
    };
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::DegenerateSample(format!(
            "bandwidth {bandwidth} (constant sample?)"
        )));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Kde1D { sorted, bandwidth })
}

impl Kde1D {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn sample(&self) -> &[f64] {
        &self.sorted
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let lo = self.sorted.partition_point(|&v| v < x - KERNEL_CUTOFF * h);
        let hi = self.sorted.partition_point(|&v| v <= x + KERNEL_CUTOFF * h);
        let sum: f64 = self.sorted[lo..hi]
            .iter()
            .map(|&v| {
                let z = (x - v) / h;
                (-0.5 * z * z).exp()
            })
            .sum();
        sum * INV_SQRT_2PI / (h * self.sorted.len() as f64)
    }

    /// Sample range padded by [`SUPPORT_PAD`] bandwidths.
    pub fn support(&self) -> (f64, f64) {
        let pad = SUPPORT_PAD * self.bandwidth;
        (self.sorted[0] - pad, self.sorted[self.sorted.len() - 1] + pad)
    }

    /// Densities on `points` evenly spaced nodes across [`Kde1D::support`].
    pub fn tabulate(&self, points: usize) -> DensityTable {
        let (lo, hi) = self.support();
        let grid = Grid1D { lo, hi, points };
        let values = grid.nodes().map(|x| self.density(x)).collect();
        DensityTable { grid, values }
    }
}

/// Evenly spaced quadrature nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo < hi) || points < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs lo < hi and at least 2 points, got [{lo}, {hi}] x {points}"
            )));
        }
        Ok(Grid1D { lo, hi, points })
    }

    /// Grid spanning the union of the padded supports of `kdes`.
    pub fn covering(kdes: &[&Kde1D], points: usize) -> Result<Self> {
        let (lo, hi) = kdes.iter().map(|k| k.support()).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), (a, b)| (lo.min(a), hi.max(b)),
        );
        Self::new(lo, hi, points)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.step();
        (0..self.points).map(move |k| {
            if k + 1 == self.points {
                self.hi
            } else {
                self.lo + k as f64 * h
            }
        })
    }

    fn contains(&self, (lo, hi): (f64, f64)) -> bool {
        self.lo <= lo && hi <= self.hi
    }
}

/// A density frozen on a grid, linearly interpolated between nodes and zero
/// outside.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    grid: Grid1D,
    values: Vec<f64>,
}

impl DensityTable {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Density at each grid node.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: f64) -> f64 {
        let g = &self.grid;
        if !(x >= g.lo && x <= g.hi) {
            return 0.0;
        }
        let t = (x - g.lo) / g.step();
        let k = (t.floor() as usize).min(g.points - 2);
        let frac = t - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }
}

/// Result of an L1 quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Estimate {
    pub value: f64,
    /// False when the grid did not cover both padded supports; the value then
    /// misses tail mass.
    pub covered: bool,
}

fn trapezoid(xs: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    let mut prev = (xs[0], f(xs[0]));
    for &x in &xs[1..] {
        let fx = f(x);
        total += 0.5 * (x - prev.0) * (fx + prev.1);
        prev = (x, fx);
    }
    total
}

/// `int |p - q|` by the trapezoid rule on `grid`.
pub fn l1_error(p: &Kde1D, q: &Kde1D, grid: &Grid1D) -> L1Estimate {
    let nodes: Vec<f64> = grid.nodes().collect();
    let value = trapezoid(&nodes, |x| (p.density(x) - q.density(x)).abs());
    L1Estimate {
        value,
        covered: grid.contains(p.support()) && grid.contains(q.support()),
    }
}

/// Frozen reference marginal: the KDE plus its tabulation.
#[derive(Debug, Clone)]
pub struct ReferenceMarginal {
    pub kde: Kde1D,
    table: DensityTable,
}

impl ReferenceMarginal {
    pub fn new(kde: Kde1D, points: usize) -> Self {
        let table = kde.tabulate(points);
        ReferenceMarginal { kde, table }
    }

    pub fn table(&self) -> &DensityTable {
        &self.table
    }
}

/// `int |p - ref|` on the merged node set of `p`'s own grid and the
/// reference table, so each density is resolved at its own bandwidth even
/// when their scales differ by orders of magnitude.
pub fn l1_error_to_reference(p: &Kde1D, reference: &ReferenceMarginal, points: usize) -> f64 {
    let (lo, hi) = p.support();
    let own = Grid1D { lo, hi, points };
    let mut xs: Vec<f64> = own.nodes().chain(reference.table.grid.nodes()).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    trapezoid(&xs, |x| (p.density(x) - reference.table.value(x)).abs())
}

/// Frozen reference marginals for every component of an ensemble.
#[derive(Debug, Clone)]
pub struct ReferenceDensity {
    pub marginals: Vec<ReferenceMarginal>,
    pub points: usize,
}

impl ReferenceDensity {
    pub fn from_ensemble(ensemble: &ChainEnsemble, rule: BandwidthRule, points: usize) -> Result<Self> {
        let marginals = (0..ensemble.dim())
            .map(|ell| kde_fit(&ensemble.component(ell), rule).map(|k| ReferenceMarginal::new(k, points)))
            .collect::<Result<_>>()?;
        Ok(ReferenceDensity { marginals, points })
    }

    /// Per-component L1 errors `eps_ell` of `ensemble` against the reference.
    pub fn epsilon_components(&self, ensemble: &ChainEnsemble, rule: BandwidthRule) -> Result<Vec<f64>> {
        if ensemble.dim() != self.marginals.len() {
            return Err(Error::DimensionMismatch {
                expected: self.marginals.len(),
                found: ensemble.dim(),
            });
        }
        self.marginals
            .iter()
            .enumerate()
            .map(|(ell, r)| {
                let kde = kde_fit(&ensemble.component(ell), rule)?;
                Ok(l1_error_to_reference(&kde, r, self.points))
            })
            .collect()
    }
}

/// Arithmetic mean of the per-component errors.
pub fn epsilon_mean(per_component: &[f64]) -> Result<f64> {
    if per_component.is_empty() {
        return Err(Error::InvalidArgument("no components".into()));
    }
    Ok(per_component.iter().sum::<f64>() / per_component.len() as f64)
}

/// Fraction of chains whose nearest center (Euclidean, lowest index on ties)
/// is each of `centers`.
pub fn mode_occupancy(ensemble: &ChainEnsemble, centers: &[Vec<f64>]) -> Result<Vec<f64>> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument("need at least one center".into()));
    }
    for c in centers {
        crate::error::check_dim(ensemble.dim(), c.len())?;
    }
    let mut counts = vec![0usize; centers.len()];
    for chain in ensemble.chains() {
        let mut best = (0, f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let d: f64 = chain.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (k, d);
            }
        }
        counts[best.0] += 1;
    }
    let n = ensemble.n_chains() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}
