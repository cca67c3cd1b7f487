//! Per-region numeric feature tables with explicit missingness.

use std::collections::HashMap;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::numfmt::format_sig6;

/// Feature columns aligned to a fixed region universe. `None` is MISSING.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTable {
    region_ids: Vec<String>,
    features: IndexMap<String, Vec<Option<f64>>>,
}

#[derive(Debug, Clone, Default)]
pub struct AttributeOptions {
    /// Numeric values treated as MISSING, e.g. `-999`.
    pub missing_sentinels: Vec<f64>,
}

impl AttributeTable {
    pub fn new(region_ids: Vec<String>) -> Self {
        AttributeTable {
            region_ids,
            features: IndexMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.region_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_ids.is_empty()
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.features.keys().map(String::as_str)
    }

    pub fn feature(&self, name: &str) -> Result<&[Option<f64>]> {
        self.features
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingFeature(name.to_string()))
    }

    /// Values of a feature with no MISSING entries.
    pub fn complete_feature(&self, name: &str) -> Result<Vec<f64>> {
        self.feature(name)?
            .iter()
            .enumerate()
            .map(|(i, v)| v.ok_or(Error::MissingValue(i)))
            .collect()
    }

    /// Adds or replaces a feature column.
    pub fn insert(&mut self, name: impl Into<String>, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.region_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: self.region_ids.len(),
                actual: values.len(),
            });
        }
        if let Some((i, _)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_some_and(|x| !x.is_finite()))
        {
            return Err(Error::NonFiniteValue {
                row: i + 1,
                column: name.into(),
            });
        }
        self.features.insert(name.into(), values);
        Ok(())
    }

    /// Merges all columns of `other`, which must share the same universe.
    pub fn merge(&mut self, other: AttributeTable) -> Result<()> {
        if other.region_ids != self.region_ids {
            return Err(Error::Config(
                "attribute tables cover different region universes".into(),
            ));
        }
        for (name, values) in other.features {
            if self.features.contains_key(&name) {
                return Err(Error::DuplicateFeature(name));
            }
            self.features.insert(name, values);
        }
        Ok(())
    }

    /// CSV text: `region_id` column followed by every feature, empty cells for MISSING.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("region_id");
        for name in self.features.keys() {
            out.push(',');
            out.push_str(&csv_field(name));
        }
        out.push('\n');
        for (i, id) in self.region_ids.iter().enumerate() {
            out.push_str(&csv_field(id));
            for values in self.features.values() {
                out.push(',');
                if let Some(v) = values[i] {
                    out.push_str(&format_sig6(v));
                }
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Parses a numeric cell; empty cells (after trimming) are MISSING.
pub(crate) fn parse_cell(
    cell: &str,
    row: usize,
    column: &str,
    sentinels: &[f64],
) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let value: f64 = cell.parse().map_err(|_| Error::NonNumericValue {
        row,
        column: column.to_string(),
        value: cell.to_string(),
    })?;
    if !value.is_finite() {
        return Err(Error::NonFiniteValue {
            row,
            column: column.to_string(),
        });
    }
    if sentinels.contains(&value) {
        return Ok(None);
    }
    Ok(Some(value))
}

struct RawTable {
    columns: Vec<String>,
    /// (source row number, key, cells)
    rows: Vec<(usize, String, Vec<Option<f64>>)>,
}

fn read_raw(bytes: &[u8], options: &AttributeOptions) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .clone();
    if headers.is_empty() {
        return Err(Error::Csv("empty header".into()));
    }
    let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashMap::new();
    for c in &columns {
        if seen.insert(c.clone(), ()).is_some() {
            return Err(Error::DuplicateFeature(c.clone()));
        }
    }
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let row = r + 1;
        let key = record.get(0).unwrap_or_default().to_string();
        let cells = columns
            .iter()
            .enumerate()
            .map(|(c, name)| {
                parse_cell(
                    record.get(c + 1).unwrap_or_default(),
                    row,
                    name,
                    &options.missing_sentinels,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((row, key, cells));
    }
    Ok(RawTable { columns, rows })
}

fn table_from_rows<'a>(
    universe: &[String],
    columns: Vec<String>,
    rows_for_region: impl Fn(usize) -> Option<&'a [Option<f64>]>,
) -> AttributeTable {
    let mut features: IndexMap<String, Vec<Option<f64>>> = columns
        .into_iter()
        .map(|c| (c, vec![None; universe.len()]))
        .collect();
    for i in 0..universe.len() {
        if let Some(cells) = rows_for_region(i) {
            for (col, v) in features.values_mut().zip(cells) {
                col[i] = *v;
            }
        }
    }
    AttributeTable {
        region_ids: universe.to_vec(),
        features,
    }
}

/// Parses a CSV whose first column is the region id. Regions absent from
/// the file are MISSING for every feature.
pub fn parse_attributes(
    bytes: &[u8],
    universe: &[String],
    options: &AttributeOptions,
) -> Result<AttributeTable> {
    let index: HashMap<&str, usize> = universe
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let raw = read_raw(bytes, options)?;
    let mut by_region: Vec<Option<usize>> = vec![None; universe.len()];
    for (k, (_, key, _)) in raw.rows.iter().enumerate() {
        let i = *index
            .get(key.as_str())
            .ok_or_else(|| Error::UnknownRegion(key.clone()))?;
        if by_region[i].replace(k).is_some() {
            return Err(Error::DuplicateRegionId(key.clone()));
        }
    }
    let rows = &raw.rows;
    Ok(table_from_rows(universe, raw.columns.clone(), |i| {
        by_region[i].map(|k| rows[k].2.as_slice())
    }))
}

/// Parses a group-level CSV (first column a group key such as a county id)
/// and broadcasts each group's row to every region mapped to it.
///
/// `mapping` is a two-column CSV `region_id,group_id`. Regions without a
/// mapping or whose group has no row are MISSING.
pub fn parse_broadcast_attributes(
    bytes: &[u8],
    mapping: &[u8],
    universe: &[String],
    options: &AttributeOptions,
) -> Result<AttributeTable> {
    let index: HashMap<&str, usize> = universe
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut group_of: Vec<Option<String>> = vec![None; universe.len()];
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(mapping);
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let (Some(region), Some(group)) = (record.get(0), record.get(1)) else {
            return Err(Error::Csv("broadcast map rows need region_id,group_id".into()));
        };
        let i = *index
            .get(region)
            .ok_or_else(|| Error::UnknownRegion(region.to_string()))?;
        group_of[i] = Some(group.to_string());
    }
    let raw = read_raw(bytes, options)?;
    let mut groups: HashMap<&str, usize> = HashMap::new();
    for (k, (_, key, _)) in raw.rows.iter().enumerate() {
        if groups.insert(key.as_str(), k).is_some() {
            return Err(Error::Csv(format!("duplicate group key \"{key}\"")));
        }
    }
    let rows = &raw.rows;
    Ok(table_from_rows(universe, raw.columns.clone(), |i| {
        group_of[i]
            .as_deref()
            .and_then(|g| groups.get(g))
            .map(|&k| rows[k].2.as_slice())
    }))
}
