//! Neighbor-mean imputation of missing attribute values.
//!
//! Sweeps are Jacobi-style: every region imputed in sweep `s` uses only
//! values known before sweep `s` began, so the result does not depend on
//! the order regions are visited in. Sweeps continue until nothing is
//! missing; a sweep that imputes nothing while gaps remain is an error.

use crate::error::{Error, Result};
use crate::weights::SpatialWeights;

#[derive(Debug, Clone, PartialEq)]
pub struct ImputedValue {
    pub region: usize,
    /// 1-based sweep in which the value was filled.
    pub sweep: usize,
    pub value: f64,
    /// Number of observed (or earlier-imputed) neighbors averaged.
    pub neighbors_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Imputation {
    pub values: Vec<f64>,
    pub imputed: Vec<ImputedValue>,
    pub sweeps: usize,
}

pub fn impute_missing(values: &[Option<f64>], weights: &SpatialWeights) -> Result<Imputation> {
    if values.len() != weights.n() {
        return Err(Error::DimensionMismatch {
            expected: weights.n(),
            actual: values.len(),
        });
    }
    let mut current: Vec<Option<f64>> = values.to_vec();
    let mut imputed = Vec::new();
    let mut sweep = 0;
    while current.iter().any(Option::is_none) {
        sweep += 1;
        let filled: Vec<ImputedValue> = current
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_none())
            .filter_map(|(i, _)| {
                let known: Vec<f64> = weights
                    .neighbor_indices(i)
                    .iter()
                    .filter_map(|&j| current[j])
                    .collect();
                (!known.is_empty()).then(|| ImputedValue {
                    region: i,
                    sweep,
                    value: known.iter().sum::<f64>() / known.len() as f64,
                    neighbors_used: known.len(),
                })
            })
            .collect();
        if filled.is_empty() {
            let stuck = current
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_none())
                .map(|(i, _)| i)
                .collect();
            return Err(Error::Unimputable(stuck));
        }
        for f in &filled {
            current[f.region] = Some(f.value);
        }
        imputed.extend(filled);
    }
    Ok(Imputation {
        values: current.into_iter().map(|v| v.expect("all filled")).collect(),
        imputed,
        sweeps: sweep,
    })
}
