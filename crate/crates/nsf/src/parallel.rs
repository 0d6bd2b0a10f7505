//! Monte-Carlo loops split into fixed realization chunks, evaluated on the
//! rayon pool and merged in chunk order, so results do not depend on the
//! thread count.

use nsf_core::equivalence::{mc_loss_range, McEstimate, ScalarMoments};
use nsf_core::stats::{accumulate_realizations, coeff_samples_range, mc_chunks, SpectrumMoments};
use nsf_core::{CoeffSampleSet, ImageGrid, NoiseSpec, Penalty, VarianceMap};
use rayon::prelude::*;

use crate::error::Result;

/// Sizes the global pool; `0` keeps rayon's default.
pub fn init_threads(threads: usize) {
    if threads > 0 {
        // a second call (as in tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn chunks(m: usize) -> Vec<std::ops::Range<u64>> {
    mc_chunks(m as u64).collect()
}

pub fn coeff_samples(
    spec: &NoiseSpec,
    height: usize,
    width: usize,
    bins: &[(usize, usize)],
    m: usize,
    seed: u64,
) -> Result<Vec<CoeffSampleSet>> {
    let parts: Vec<Vec<CoeffSampleSet>> = chunks(m)
        .into_par_iter()
        .map(|r| coeff_samples_range(spec, height, width, bins, r, seed))
        .collect::<nsf_core::Result<_>>()?;
    let mut sets: Vec<CoeffSampleSet> = bins
        .iter()
        .map(|&bin| CoeffSampleSet {
            bin,
            shape: (height, width),
            a: Vec::with_capacity(m),
            b: Vec::with_capacity(m),
        })
        .collect();
    for part in parts {
        for (set, p) in sets.iter_mut().zip(part) {
            set.a.extend(p.a);
            set.b.extend(p.b);
        }
    }
    Ok(sets)
}

pub fn variance_map(spec: &NoiseSpec, height: usize, width: usize, m: usize, seed: u64) -> Result<VarianceMap> {
    let parts: Vec<SpectrumMoments> = chunks(m)
        .into_par_iter()
        .map(|r| accumulate_realizations(spec, height, width, r, seed))
        .collect::<nsf_core::Result<_>>()?;
    let mut total = SpectrumMoments::new(height, width);
    for p in &parts {
        total.merge(p)?;
    }
    Ok(total.variance_map()?)
}

pub fn expected_loss(
    f: &ImageGrid,
    z: &ImageGrid,
    spec: &NoiseSpec,
    phi: &Penalty,
    m: usize,
    seed: u64,
) -> Result<McEstimate> {
    let parts: Vec<ScalarMoments> = chunks(m)
        .into_par_iter()
        .map(|r| mc_loss_range(f, z, spec, phi, r, seed))
        .collect::<nsf_core::Result<_>>()?;
    let mut total = ScalarMoments::default();
    for p in &parts {
        total.merge(p);
    }
    Ok(total.into())
}

/// `f` applied to every item on the pool, results in input order.
pub fn map_ordered<T: Sync, U: Send>(items: &[T], f: impl Fn(usize, &T) -> Result<U> + Sync + Send) -> Result<Vec<U>> {
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}
