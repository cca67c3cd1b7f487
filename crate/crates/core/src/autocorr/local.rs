use rayon::prelude::*;

use super::global::bivariate_fields;
use super::perm::{
    arrangements, check_enumerable, for_each_weighted_selection, region_rng, sample_distinct,
};
use super::{
    active_field, as_extreme, lag_at, upper_tail, ActiveField, ClusterClass, Inference, DEFAULT_ALPHA,
    EXHAUSTIVE_LIMIT,
};
use crate::error::{Error, Result};
use crate::weights::SpatialWeights;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LisaOptions {
    pub inference: Inference,
    pub alpha: f64,
    /// Benjamini–Hochberg control of the false discovery rate at `alpha`.
    pub fdr: bool,
}

impl Default for LisaOptions {
    fn default() -> Self {
        LisaOptions {
            inference: Inference::default(),
            alpha: DEFAULT_ALPHA,
            fdr: false,
        }
    }
}

impl LisaOptions {
    pub fn new(inference: Inference, alpha: f64) -> Self {
        LisaOptions {
            inference,
            alpha,
            fdr: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LisaResult {
    /// Local statistic; `None` for islands.
    pub local_i: Vec<Option<f64>>,
    pub pseudo_p: Vec<Option<f64>>,
    pub clusters: Vec<ClusterClass>,
    /// Standardized focal variable.
    pub focal: Vec<f64>,
    /// Spatial lag of the standardized neighbor variable.
    pub lag: Vec<f64>,
    pub options: LisaOptions,
    /// Largest p-value declared significant under FDR control, when enabled.
    pub fdr_threshold: Option<f64>,
}

impl LisaResult {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn count(&self, class: ClusterClass) -> usize {
        self.clusters.iter().filter(|&&c| c == class).count()
    }
}

/// Univariate local Moran's I with conditional permutation inference.
///
/// `I_i = (z_i / m2) Σ_j w_ij z_j` with `m2 = Σ_k z_k² / n_eff`.
pub fn local_moran(
    values: &[f64],
    weights: &SpatialWeights,
    options: LisaOptions,
) -> Result<LisaResult> {
    options.inference.validate()?;
    let field = active_field(values, weights)?;
    let m2 = field.active.iter().map(|&i| field.z[i].powi(2)).sum::<f64>() / field.n_eff() as f64;
    let factors: Vec<f64> = field.z.iter().map(|z| z / m2).collect();
    run_local(weights, &field, &field.z, &factors, options)
}

/// Bivariate local Moran's I: `I_i = zx_i Σ_j w_ij zy_j`, permuting `y`
/// with `x` held fixed at the focal region.
pub fn bivariate_local_moran(
    x: &[f64],
    y: &[f64],
    weights: &SpatialWeights,
    options: LisaOptions,
) -> Result<LisaResult> {
    options.inference.validate()?;
    let (fx, fy) = bivariate_fields(x, y, weights)?;
    run_local(weights, &fx, &fy.z, &fx.z, options)
}

struct Scratch {
    identity: Vec<usize>,
    swaps: Vec<usize>,
    draws: Vec<usize>,
}

fn run_local(
    weights: &SpatialWeights,
    field: &ActiveField,
    pool: &[f64],
    factors: &[f64],
    options: LisaOptions,
) -> Result<LisaResult> {
    let n = weights.n();
    let m = field.n_eff() - 1;
    let max_degree = field.active.iter().map(|&i| weights.degree(i)).max().unwrap_or(0);
    if max_degree > m {
        return Err(Error::TooFewRegions(field.n_eff()));
    }
    if options.inference == Inference::Exhaustive {
        check_enumerable(arrangements(m, max_degree), EXHAUSTIVE_LIMIT)?;
    }

    let lag: Vec<f64> = (0..n).map(|i| lag_at(weights, pool, i)).collect();
    let pseudo_p: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map_init(
            || Scratch {
                identity: (0..m).collect(),
                swaps: Vec::new(),
                draws: Vec::new(),
            },
            |scratch, i| {
                let pos = field.position[i]?;
                Some(region_pvalue(
                    weights, field, pool, factors[i], lag[i], i, pos, options.inference, scratch,
                ))
            },
        )
        .collect();

    let fdr_threshold = options.fdr.then(|| benjamini_hochberg(&pseudo_p, options.alpha));
    let clusters = (0..n)
        .map(|i| match pseudo_p[i] {
            None => ClusterClass::Undefined,
            Some(p) => {
                let significant =
                    p < options.alpha && fdr_threshold.is_none_or(|t| t.is_some_and(|t| p <= t));
                quadrant(field.z[i], lag[i], significant)
            }
        })
        .collect();
    Ok(LisaResult {
        local_i: (0..n)
            .map(|i| field.position[i].map(|_| factors[i] * lag[i]))
            .collect(),
        pseudo_p,
        clusters,
        focal: field.z.clone(),
        lag,
        options,
        fdr_threshold: fdr_threshold.flatten(),
    })
}

fn quadrant(z: f64, lag: f64, significant: bool) -> ClusterClass {
    super::classify(z, lag, if significant { 0.0 } else { 1.0 }, 0.5, false)
}

#[allow(clippy::too_many_arguments)]
fn region_pvalue(
    weights: &SpatialWeights,
    field: &ActiveField,
    pool: &[f64],
    factor: f64,
    observed: f64,
    region: usize,
    pos: usize,
    inference: Inference,
    scratch: &mut Scratch,
) -> f64 {
    if factor == 0.0 {
        // Every arrangement yields I_i = 0.
        return 1.0;
    }
    // Tail of I_i = factor · lag, expressed on the lag; I_i ≈ 0 takes the upper tail.
    let upper = if factor > 0.0 {
        upper_tail(observed, 0.0)
    } else {
        !upper_tail(-observed, 0.0)
    };
    let nbr_weights = weights.neighbor_weights(region);
    let k = nbr_weights.len();
    let active = &field.active;
    match inference {
        Inference::MonteCarlo { permutations, seed } => {
            let mut rng = region_rng(seed, region);
            let mut extreme = 0usize;
            for _ in 0..permutations {
                sample_distinct(
                    &mut rng,
                    &mut scratch.identity,
                    k,
                    &mut scratch.swaps,
                    &mut scratch.draws,
                );
                let mut acc = 0.0;
                for (&w, &r) in nbr_weights.iter().zip(&scratch.draws) {
                    let j = active[if r < pos { r } else { r + 1 }];
                    acc += w * pool[j];
                }
                if as_extreme(acc, observed, upper) {
                    extreme += 1;
                }
            }
            (extreme + 1) as f64 / (permutations + 1) as f64
        }
        Inference::Exhaustive => {
            let others: Vec<f64> = active
                .iter()
                .enumerate()
                .filter(|&(p, _)| p != pos)
                .map(|(_, &j)| pool[j])
                .collect();
            let (mut extreme, mut total) = (0usize, 0usize);
            for_each_weighted_selection(&others, nbr_weights, |s| {
                total += 1;
                if as_extreme(s, observed, upper) {
                    extreme += 1;
                }
            });
            extreme as f64 / total as f64
        }
    }
}

/// Benjamini–Hochberg cutoff over the defined p-values: the largest
/// `p_(k)` with `p_(k) ≤ k·alpha/m`, or `None` when nothing passes.
fn benjamini_hochberg(pseudo_p: &[Option<f64>], alpha: f64) -> Option<f64> {
    let mut ps: Vec<f64> = pseudo_p.iter().flatten().copied().collect();
    ps.sort_by(f64::total_cmp);
    let m = ps.len() as f64;
    ps.iter()
        .enumerate()
        .filter(|&(k, &p)| p <= (k + 1) as f64 * alpha / m)
        .map(|(_, &p)| p)
        .next_back()
}
