//! Facility point locations and their assignment to regions.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Coord, RegionLattice};

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointSet {
    points: Vec<Point>,
}

impl PointSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::DuplicatePointId(p.id.clone()));
            }
            let valid = p.lon.is_finite()
                && p.lat.is_finite()
                && (-180.0..=180.0).contains(&p.lon)
                && (-90.0..=90.0).contains(&p.lat);
            if !valid {
                return Err(Error::CoordinateOutOfRange(p.id.clone()));
            }
        }
        Ok(PointSet { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Parses a CSV with `point_id`, `lon` and `lat` columns (any order, extra columns ignored).
pub fn parse_points(bytes: &[u8]) -> Result<PointSet> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (id_col, lon_col, lat_col) = (column("point_id")?, column("lon")?, column("lat")?);
    let mut points = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let id = record.get(id_col).unwrap_or_default().to_string();
        let coord = |c: usize, name: &str| -> Result<f64> {
            let cell = record.get(c).unwrap_or_default();
            cell.parse().map_err(|_| Error::NonNumericValue {
                row: r + 1,
                column: name.to_string(),
                value: cell.to_string(),
            })
        };
        points.push(Point {
            lon: coord(lon_col, "lon")?,
            lat: coord(lat_col, "lat")?,
            id,
        });
    }
    PointSet::new(points)
}

/// Region index per point, in point order. `None` means UNASSIGNED.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinAssignment {
    pub point_ids: Vec<String>,
    pub regions: Vec<Option<usize>>,
}

impl JoinAssignment {
    pub fn unassigned(&self) -> impl Iterator<Item = &str> {
        self.point_ids
            .iter()
            .zip(&self.regions)
            .filter(|(_, r)| r.is_none())
            .map(|(id, _)| id.as_str())
    }

    pub fn assigned_count(&self) -> usize {
        self.regions.iter().filter(|r| r.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct JoinOptions {
    pub bbox_prefilter: bool,
}

impl Default for JoinOptions {
    fn default() -> Self {
        JoinOptions {
            bbox_prefilter: true,
        }
    }
}

/// Assigns each point to the lowest-indexed region containing it.
pub fn spatial_join(points: &PointSet, lattice: &RegionLattice) -> JoinAssignment {
    spatial_join_with(points, lattice, JoinOptions::default())
}

pub fn spatial_join_with(
    points: &PointSet,
    lattice: &RegionLattice,
    options: JoinOptions,
) -> JoinAssignment {
    let regions = points
        .points
        .par_iter()
        .map(|p| {
            let c: Coord = [p.lon, p.lat];
            lattice.regions().iter().position(|r| {
                (!options.bbox_prefilter || r.bbox.contains(c)) && r.contains(c)
            })
        })
        .collect();
    JoinAssignment {
        point_ids: points.points.iter().map(|p| p.id.clone()).collect(),
        regions,
    }
}
