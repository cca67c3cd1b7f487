use rayon::prelude::*;

use super::perm::{check_enumerable, for_each_permutation, global_rng, shuffle};
use super::{active_field, as_extreme, lag_at, upper_tail, ActiveField, Inference, EXHAUSTIVE_LIMIT};
use crate::error::{Error, Result};
use crate::weights::SpatialWeights;

#[derive(Debug, Clone, PartialEq)]
pub struct MoranResult {
    pub statistic: f64,
    /// Expectation under the randomization null.
    pub expected: f64,
    pub pseudo_p: f64,
    /// (statistic − mean of permuted statistics) / their standard deviation.
    pub z_sim: Option<f64>,
    /// Reference-distribution size, excluding the observed arrangement.
    pub permutations: usize,
    pub inference: Inference,
    pub n_eff: usize,
}

/// Cross-product statistic `scale · Σ_i x_i Σ_j w_ij y_j` over active regions.
/// With `x` unset the statistic is univariate and `x = y`.
struct CrossStat<'a> {
    weights: &'a SpatialWeights,
    field: &'a ActiveField,
    x: Option<&'a [f64]>,
    scale: f64,
}

impl CrossStat<'_> {
    fn eval(&self, y: &[f64]) -> f64 {
        let x = self.x.unwrap_or(y);
        let mut acc = 0.0;
        for &i in &self.field.active {
            acc += x[i] * lag_at(self.weights, y, i);
        }
        self.scale * acc
    }
}

fn moran_scale(weights: &SpatialWeights, field: &ActiveField, x: &[f64]) -> f64 {
    let m2: f64 = field.active.iter().map(|&i| x[i] * x[i]).sum();
    field.n_eff() as f64 / (weights.s0() * m2)
}

/// Moran's I over the non-island regions.
pub fn global_moran(values: &[f64], weights: &SpatialWeights) -> Result<f64> {
    let field = active_field(values, weights)?;
    let stat = CrossStat {
        weights,
        field: &field,
        x: None,
        scale: moran_scale(weights, &field, &field.z),
    };
    Ok(stat.eval(&field.z))
}

pub fn global_moran_inference(
    values: &[f64],
    weights: &SpatialWeights,
    inference: Inference,
) -> Result<MoranResult> {
    inference.validate()?;
    let field = active_field(values, weights)?;
    let stat = CrossStat {
        weights,
        field: &field,
        x: None,
        scale: moran_scale(weights, &field, &field.z),
    };
    let expected = -1.0 / (field.n_eff() as f64 - 1.0);
    infer(&stat, &field.z, expected, inference)
}

/// Bivariate Moran's I: standardized `x` against the spatial lag of standardized `y`.
pub fn global_bivariate_moran(x: &[f64], y: &[f64], weights: &SpatialWeights) -> Result<f64> {
    let (fx, fy) = bivariate_fields(x, y, weights)?;
    let stat = CrossStat {
        weights,
        field: &fx,
        x: Some(&fx.z),
        scale: moran_scale(weights, &fx, &fx.z),
    };
    Ok(stat.eval(&fy.z))
}

/// Inference permutes `y` over the active regions with `x` fixed; the null expectation is 0.
pub fn global_bivariate_moran_inference(
    x: &[f64],
    y: &[f64],
    weights: &SpatialWeights,
    inference: Inference,
) -> Result<MoranResult> {
    inference.validate()?;
    let (fx, fy) = bivariate_fields(x, y, weights)?;
    let stat = CrossStat {
        weights,
        field: &fx,
        x: Some(&fx.z),
        scale: moran_scale(weights, &fx, &fx.z),
    };
    infer(&stat, &fy.z, 0.0, inference)
}

pub(super) fn bivariate_fields(
    x: &[f64],
    y: &[f64],
    weights: &SpatialWeights,
) -> Result<(ActiveField, ActiveField)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok((active_field(x, weights)?, active_field(y, weights)?))
}

fn infer(stat: &CrossStat, y: &[f64], expected: f64, inference: Inference) -> Result<MoranResult> {
    let observed = stat.eval(y);
    let upper = upper_tail(observed, expected);
    let active = &stat.field.active;
    let pool: Vec<f64> = active.iter().map(|&i| y[i]).collect();

    let (sims, includes_observed) = match inference {
        Inference::MonteCarlo { permutations, seed } => {
            let sims: Vec<f64> = (0..permutations)
                .into_par_iter()
                .map_init(
                    || (pool.clone(), y.to_vec()),
                    |(shuffled, full), k| {
                        shuffled.copy_from_slice(&pool);
                        shuffle(&mut global_rng(seed, k), shuffled);
                        for (&i, &v) in active.iter().zip(shuffled.iter()) {
                            full[i] = v;
                        }
                        stat.eval(full)
                    },
                )
                .collect();
            (sims, false)
        }
        Inference::Exhaustive => {
            let count = (1..=pool.len() as u128).product();
            check_enumerable(count, EXHAUSTIVE_LIMIT)?;
            let mut sims = Vec::with_capacity(count as usize);
            let mut full = y.to_vec();
            let mut arranged = pool.clone();
            for_each_permutation(&mut arranged, |p| {
                for (&i, &v) in active.iter().zip(p) {
                    full[i] = v;
                }
                sims.push(stat.eval(&full));
            });
            (sims, true)
        }
    };

    let extreme = sims.iter().filter(|&&s| as_extreme(s, observed, upper)).count();
    let pseudo_p = if includes_observed {
        extreme as f64 / sims.len() as f64
    } else {
        (extreme + 1) as f64 / (sims.len() + 1) as f64
    };
    let mean = sims.iter().sum::<f64>() / sims.len() as f64;
    let sd = (sims.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / sims.len() as f64).sqrt();
    Ok(MoranResult {
        statistic: observed,
        expected,
        pseudo_p,
        z_sim: (sd > 0.0).then(|| (observed - mean) / sd),
        permutations: if includes_observed { sims.len() - 1 } else { sims.len() },
        inference,
        n_eff: stat.field.n_eff(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{checkerboard, grid_edges};

    fn path(n: usize) -> SpatialWeights {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        SpatialWeights::from_edge_list(n, &edges).unwrap().row_standardize()
    }

    #[test]
    fn checkerboard_is_perfectly_negative() {
        let w = SpatialWeights::from_edge_list(16, &grid_edges(4, 4, false))
            .unwrap()
            .row_standardize();
        let i = global_moran(&checkerboard(4, 4), &w).unwrap();
        assert!((i + 1.0).abs() < 1e-12, "{i}");
    }

    #[test]
    fn two_halves_on_path() {
        // z = (-1,-1,1,1), lags (-1,0,0,1): Σ z·lag = 2, Σ z² = 4, n/S0 = 1.
        let i = global_moran(&[0.0, 0.0, 1.0, 1.0], &path(4)).unwrap();
        assert!((i - 0.5).abs() < 1e-12, "{i}");
    }

    #[test]
    fn all_islands_too_few() {
        let w = SpatialWeights::from_edge_list(4, &[]).unwrap();
        assert!(matches!(
            global_moran(&[1.0, 2.0, 3.0, 4.0], &w),
            Err(Error::TooFewRegions(0))
        ));
    }

    #[test]
    fn constant_values_zero_variance() {
        assert!(matches!(
            global_moran_inference(&[2.0; 5], &path(5), Inference::monte_carlo(99, 1)),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn missing_value_rejected() {
        assert!(matches!(
            global_moran(&[1.0, f64::NAN, 3.0, 4.0], &path(4)),
            Err(Error::MissingValue(1))
        ));
    }

    #[test]
    fn too_few_permutations_rejected() {
        assert!(matches!(
            global_moran_inference(&[1.0, 2.0, 3.0, 4.0], &path(4), Inference::monte_carlo(10, 1)),
            Err(Error::InvalidPermutations(10))
        ));
    }

    #[test]
    fn checkerboard_pseudo_p_floor() {
        let w = SpatialWeights::from_edge_list(36, &grid_edges(6, 6, false))
            .unwrap()
            .row_standardize();
        for seed in [0, 1, 42] {
            let r = global_moran_inference(&checkerboard(6, 6), &w, Inference::monte_carlo(999, seed))
                .unwrap();
            assert_eq!(r.pseudo_p, 0.001);
            assert!(r.z_sim.unwrap() < 0.0);
        }
    }

    #[test]
    fn exhaustive_2x2_checkerboard() {
        // Of the 24 arrangements of {0,0,1,1} on a 2x2 rook grid, exactly the 8
        // relabelings that reproduce a checkerboard reach I = -1.
        let w = SpatialWeights::from_edge_list(4, &grid_edges(2, 2, false))
            .unwrap()
            .row_standardize();
        let r = global_moran_inference(&checkerboard(2, 2), &w, Inference::Exhaustive).unwrap();
        assert!((r.statistic + 1.0).abs() < 1e-12);
        assert_eq!(r.permutations, 23);
        assert_eq!(r.pseudo_p, 8.0 / 24.0);
    }

    #[test]
    fn exhaustive_limit() {
        let n = 11;
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        assert!(matches!(
            global_moran_inference(&values, &path(n), Inference::Exhaustive),
            Err(Error::EnumerationTooLarge(_))
        ));
    }

    #[test]
    fn bivariate_of_identical_features_is_univariate() {
        let w = SpatialWeights::from_edge_list(9, &grid_edges(3, 3, true))
            .unwrap()
            .row_standardize();
        let x = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0];
        let a = global_moran(&x, &w).unwrap();
        let b = global_bivariate_moran(&x, &x, &w).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
