use std::fmt::Write as _;

use serde::Serialize;
use serde_json::value::RawValue;
use serde_json::{Map, Value};

use crate::attributes::csv_field;
use crate::autocorr::{Inference, LisaResult, MoranResult};
use crate::error::{Error, Result};
use crate::impute::ImputedValue;
use crate::lattice::RegionLattice;
use crate::numfmt::format_sig6;

#[derive(Serialize)]
struct FeatureOut<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    properties: Map<String, Value>,
    geometry: &'a RawValue,
}

#[derive(Serialize)]
struct CollectionOut<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    features: Vec<FeatureOut<'a>>,
}

/// FeatureCollection of the lattice with `local_I`, `pseudo_p` and
/// `cluster` added to each feature's properties. Geometry is copied
/// verbatim from the input.
pub fn emit_geojson(lattice: &RegionLattice, lisa: &LisaResult) -> Result<String> {
    if lisa.len() != lattice.len() {
        return Err(Error::DimensionMismatch {
            expected: lattice.len(),
            actual: lisa.len(),
        });
    }
    let geometries: Vec<Box<RawValue>> = lattice.regions().iter().map(|r| r.geometry_json()).collect();
    let number = |v: Option<f64>| {
        v.and_then(serde_json::Number::from_f64)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    };
    let features = lattice
        .regions()
        .iter()
        .zip(&geometries)
        .enumerate()
        .map(|(i, (region, geometry))| {
            let mut properties = region.properties.clone();
            if properties.is_empty() {
                properties.insert("region_id".into(), Value::String(region.id.clone()));
            }
            properties.insert("local_I".into(), number(lisa.local_i[i]));
            properties.insert("pseudo_p".into(), number(lisa.pseudo_p[i]));
            properties.insert("cluster".into(), Value::String(lisa.clusters[i].label().into()));
            FeatureOut {
                kind: "Feature",
                properties,
                geometry,
            }
        })
        .collect();
    let mut text = serde_json::to_string(&CollectionOut {
        kind: "FeatureCollection",
        features,
    })
    .map_err(|e| Error::Json(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// `region_id,local_I,pseudo_p,cluster`; islands leave the numeric cells empty.
pub fn lisa_csv(region_ids: &[String], lisa: &LisaResult) -> String {
    let mut out = String::from("region_id,local_I,pseudo_p,cluster\n");
    let cell = |v: Option<f64>| v.map(format_sig6).unwrap_or_default();
    for (i, id) in region_ids.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            csv_field(id),
            cell(lisa.local_i[i]),
            cell(lisa.pseudo_p[i]),
            lisa.clusters[i]
        )
        .unwrap();
    }
    out
}

pub fn global_csv(analysis: &str, features: &[String], result: &MoranResult) -> String {
    let seed = match result.inference {
        Inference::MonteCarlo { seed, .. } => seed.to_string(),
        Inference::Exhaustive => "exhaustive".to_string(),
    };
    format!(
        "analysis,features,statistic,expected,pseudo_p,z_sim,permutations,seed,n_eff\n{},{},{},{},{},{},{},{},{}\n",
        csv_field(analysis),
        csv_field(&features.join("|")),
        format_sig6(result.statistic),
        format_sig6(result.expected),
        format_sig6(result.pseudo_p),
        result.z_sim.map(format_sig6).unwrap_or_default(),
        result.permutations,
        seed,
        result.n_eff
    )
}

/// One audit row per imputed value.
pub fn imputation_audit_csv(rows: &[(String, Vec<ImputedValue>)], region_ids: &[String]) -> String {
    let mut out = String::from("feature,region_id,sweep,value,neighbors_used\n");
    for (feature, imputed) in rows {
        for v in imputed {
            writeln!(
                out,
                "{},{},{},{},{}",
                csv_field(feature),
                csv_field(&region_ids[v.region]),
                v.sweep,
                format_sig6(v.value),
                v.neighbors_used
            )
            .unwrap();
        }
    }
    out
}
