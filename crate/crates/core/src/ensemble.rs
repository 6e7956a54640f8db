use crate::error::{check_dim, Error, Result};

/// The state matrix of `N` chains, each a point in `R^n`.
///
/// Stored chain-major: the `n` components of chain `i` are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEnsemble {
    dim: usize,
    states: Vec<f64>,
    /// Number of completed sweeps. Also keys the random substreams.
    pub sweep_count: u64,
}

impl ChainEnsemble {
    pub fn new(dim: usize, states: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if states.is_empty() || states.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot be split into chains of dimension {dim}",
                states.len()
            )));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("ensemble entries must be finite".into()));
        }
        Ok(ChainEnsemble {
            dim,
            states,
            sweep_count: 0,
        })
    }

    pub fn from_chains<I, V>(chains: I) -> Result<Self>
    where
        I: IntoIterator<Item = V>,
        V: AsRef<[f64]>,
    {
        let mut dim = None;
        let mut states = Vec::new();
        for c in chains {
            let c = c.as_ref();
            match dim {
                None => dim = Some(c.len()),
                Some(d) => check_dim(d, c.len())?,
            }
            states.extend_from_slice(c);
        }
        Self::new(dim.unwrap_or(0), states)
    }

    /// Number of chains `N`.
    pub fn n_chains(&self) -> usize {
        self.states.len() / self.dim
    }

    /// Number of components `n` per chain.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn chain(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn chain_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.states[i * self.dim..(i + 1) * self.dim]
    }

    /// Component `ell` of chain `i`.
    pub fn get(&self, ell: usize, i: usize) -> f64 {
        self.states[i * self.dim + ell]
    }

    pub fn set(&mut self, ell: usize, i: usize, value: f64) {
        self.states[i * self.dim + ell] = value;
    }

    pub fn chains(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    /// All values of component `ell`, one per chain.
    pub fn component(&self, ell: usize) -> Vec<f64> {
        self.chains().map(|c| c[ell]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.states
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_chain_major() {
        let e = ChainEnsemble::from_chains([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(e.n_chains(), 3);
        assert_eq!(e.dim(), 2);
        assert_eq!(e.chain(1), &[3.0, 4.0]);
        assert_eq!(e.get(1, 2), 6.0);
        assert_eq!(e.component(0), vec![1.0, 3.0, 5.0]);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(ChainEnsemble::new(0, vec![1.0]).is_err());
        assert!(ChainEnsemble::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(ChainEnsemble::new(1, vec![]).is_err());
        assert!(ChainEnsemble::new(1, vec![f64::NAN]).is_err());
        assert!(ChainEnsemble::from_chains([vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
