//! Reference networks used by the experiment drivers and tests.
//!
//! Node labels in comments are 1-based; matrix indices are 0-based, with
//! `a[i][j]` the influence of node `j` on node `i`.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::{HawkesModel, KernelSpec};

/// Pre-change edges of the eight-node network, as `(from, to)` 1-based labels.
pub const PAPER_PRE_EDGES: [(usize, usize); 9] =
    [(1, 4), (4, 5), (5, 1), (3, 6), (6, 7), (7, 8), (8, 6), (2, 5), (3, 2)];
pub const PAPER_PRE_WEIGHT: f64 = 0.3;
/// Edges that emerge at the change: `2 → 1` and `1 → 3`.
pub const PAPER_CHANGE_EDGES: [(usize, usize); 2] = [(2, 1), (1, 3)];
pub const PAPER_CHANGE_WEIGHT: f64 = 0.4;

fn set_edges(a: &mut [Vec<f64>], edges: &[(usize, usize)], w: f64) {
    for &(from, to) in edges {
        a[to - 1][from - 1] = w;
    }
}

/// Eight-node network with base rates from 0.5 to 1 and unit-rate exponential kernels.
pub fn paper_pre() -> HawkesModel {
    let d = 8;
    let mu = (0..d).map(|i| 0.5 + 0.5 * i as f64 / (d - 1) as f64).collect();
    let mut a = vec![vec![0.0; d]; d];
    set_edges(&mut a, &PAPER_PRE_EDGES, PAPER_PRE_WEIGHT);
    HawkesModel::new(mu, a, KernelSpec::exponential(1.0).expect("valid rate")).expect("valid network")
}

/// [`paper_pre`] with the two emerging edges at weight `weight`.
pub fn paper_post_scaled(weight: f64) -> Result<HawkesModel> {
    paper_post_with(&PAPER_CHANGE_EDGES, weight)
}

pub fn paper_post() -> HawkesModel {
    paper_post_scaled(PAPER_CHANGE_WEIGHT).expect("valid network")
}

/// [`paper_pre`] plus the given `(from, to)` edges at `weight`.
pub fn paper_post_with(edges: &[(usize, usize)], weight: f64) -> Result<HawkesModel> {
    let pre = paper_pre();
    let mut a = pre.alpha_rows();
    set_edges(&mut a, edges, weight);
    pre.with_alpha(a)
}

/// Assumed post-change models for the misspecification study, with labels.
pub fn paper_misspecified() -> Vec<(&'static str, HawkesModel)> {
    let w = PAPER_CHANGE_WEIGHT;
    vec![
        ("scale-50", paper_post_scaled(0.5 * w).expect("valid network")),
        ("scale-200", paper_post_scaled(2.0 * w).expect("valid network")),
        ("one-edge", paper_post_with(&[(2, 1)], w).expect("valid network")),
        ("four-edges", paper_post_with(&[(2, 1), (1, 3), (6, 1), (1, 7)], w).expect("valid network")),
    ]
}

/// One-node exponential model.
pub fn one_dim(mu: f64, alpha: f64, beta: f64) -> Result<HawkesModel> {
    HawkesModel::new(vec![mu], vec![vec![alpha]], KernelSpec::exponential(beta)?)
}

/// Spiking network used by the neuronal replica (time in milliseconds).
#[derive(Debug, Clone)]
pub struct NeuroNetwork {
    pub pre: HawkesModel,
    pub post: HawkesModel,
    /// Neurons whose mutual coupling defines each state.
    pub codes: [Vec<usize>; 2],
}

pub const NEURO_D: usize = 14;
/// Kernel decay rate per millisecond.
pub const NEURO_BETA: f64 = 0.05;
pub const NEURO_MAX_MU: f64 = 0.016;
pub const NEURO_MAX_WEIGHT: f64 = 0.06;
/// Coupling within the active coding subset.
pub const NEURO_CODE_WEIGHT: f64 = 0.25;

/// Random 14-neuron network switching between two coding subsets.
///
/// Background edges are sparse with weights up to [`NEURO_MAX_WEIGHT`];
/// the active subset of four neurons is fully coupled at [`NEURO_CODE_WEIGHT`].
pub fn neuro_network(seed: u64) -> Result<NeuroNetwork> {
    let d = NEURO_D;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu: Vec<f64> = (0..d).map(|_| rng.random_range(0.004..NEURO_MAX_MU)).collect();
    let mut base = vec![vec![0.0; d]; d];
    for row in base.iter_mut() {
        for v in row.iter_mut() {
            if rng.random::<f64>() < 0.15 {
                *v = rng.random_range(0.01..NEURO_MAX_WEIGHT);
            }
        }
    }
    let mut perm: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let codes = [perm[..4].to_vec(), perm[4..8].to_vec()];
    let coupled = |code: &[usize]| {
        let mut a = base.clone();
        for &i in code {
            for &j in code {
                if i != j {
                    a[i][j] = NEURO_CODE_WEIGHT;
                }
            }
        }
        a
    };
    let kernel = KernelSpec::exponential(NEURO_BETA)?;
    let pre = HawkesModel::new(mu.clone(), coupled(&codes[0]), kernel.clone())?;
    let post = HawkesModel::new(mu, coupled(&codes[1]), kernel)?;
    pre.ensure_valid()?;
    post.ensure_valid()?;
    Ok(NeuroNetwork { pre, post, codes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_network_shape() {
        let pre = paper_pre();
        let post = paper_post();
        assert_eq!(pre.dim(), 8);
        assert_eq!(pre.mu()[0], 0.5);
        assert_eq!(pre.mu()[7], 1.0);
        assert!(pre.spectral_radius() < 1.0 && post.spectral_radius() < 1.0);
        let diff: Vec<(usize, usize)> = (0..8)
            .flat_map(|i| (0..8).map(move |j| (i, j)))
            .filter(|&(i, j)| pre.alpha(i, j) != post.alpha(i, j))
            .collect();
        assert_eq!(diff, vec![(0, 1), (2, 0)]);
        assert_eq!(post.alpha(0, 1), 0.4);
        for (_, m) in paper_misspecified() {
            m.ensure_valid().unwrap();
        }
    }

    #[test]
    fn neuro_network_is_stationary_and_deterministic() {
        let a = neuro_network(3).unwrap();
        let b = neuro_network(3).unwrap();
        assert_eq!(a.pre, b.pre);
        assert!(a.pre.spectral_radius() < 1.0 && a.post.spectral_radius() < 1.0);
        assert!(a.pre.mu().iter().all(|&m| m <= NEURO_MAX_MU));
        assert_ne!(a.pre, a.post);
    }
}
