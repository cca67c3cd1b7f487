//! Region geometry: polygon lattices parsed from GeoJSON.

use std::collections::HashMap;

use serde::Deserialize;
use serde_json::value::RawValue;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const DEFAULT_ID_PROPERTY: &str = "region_id";

/// A lon/lat vertex in degrees.
pub type Coord = [f64; 2];

/// Closed ring: at least four vertices, first equal to last.
pub type Ring = Vec<Coord>;

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn new(exterior: Ring, holes: Vec<Ring>) -> Self {
        Polygon { exterior, holes }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Coord,
    pub max: Coord,
}

impl BBox {
    fn empty() -> Self {
        BBox {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
        }
    }

    fn extend(&mut self, p: Coord) {
        for (k, v) in p.into_iter().enumerate() {
            self.min[k] = self.min[k].min(v);
            self.max[k] = self.max[k].max(v);
        }
    }

    pub fn contains(&self, p: Coord) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

#[derive(Debug, Clone)]
pub struct Region {
    pub id: String,
    pub polygons: Vec<Polygon>,
    pub bbox: BBox,
    /// Geometry text exactly as it appeared in the source file.
    pub raw_geometry: Option<Box<RawValue>>,
    /// Feature properties from the source file.
    pub properties: Map<String, Value>,
}

impl Region {
    pub fn new(id: impl Into<String>, polygons: Vec<Polygon>) -> Result<Self> {
        let id = id.into();
        if polygons.is_empty() {
            return Err(Error::NonArealGeometry(id));
        }
        let mut bbox = BBox::empty();
        for poly in &polygons {
            for ring in poly.rings() {
                validate_ring(&id, ring)?;
                for &p in ring {
                    bbox.extend(p);
                }
            }
        }
        Ok(Region {
            id,
            polygons,
            bbox,
            raw_geometry: None,
            properties: Map::new(),
        })
    }

    pub fn contains(&self, p: Coord) -> bool {
        self.polygons.iter().any(|poly| point_in_polygon(p, poly))
    }

    /// GeoJSON geometry object, either the verbatim input or a rebuilt MultiPolygon.
    pub fn geometry_json(&self) -> Box<RawValue> {
        if let Some(raw) = &self.raw_geometry {
            return raw.clone();
        }
        let coords: Vec<Vec<&Ring>> = self
            .polygons
            .iter()
            .map(|p| p.rings().collect())
            .collect();
        let value = serde_json::json!({ "type": "MultiPolygon", "coordinates": coords });
        RawValue::from_string(value.to_string()).expect("serializable geometry")
    }
}

fn validate_ring(region: &str, ring: &Ring) -> Result<()> {
    let invalid = |reason: &str| Error::InvalidRing {
        region: region.to_string(),
        reason: reason.to_string(),
    };
    if ring.len() < 4 {
        return Err(invalid("fewer than 4 vertices"));
    }
    if ring.first() != ring.last() {
        return Err(invalid("not closed"));
    }
    if ring.iter().flatten().any(|c| !c.is_finite()) {
        return Err(invalid("non-finite coordinate"));
    }
    Ok(())
}

/// Ordered set of regions. Position in `regions` is the canonical index.
#[derive(Debug, Clone, Default)]
pub struct RegionLattice {
    regions: Vec<Region>,
    index: HashMap<String, usize>,
}

impl RegionLattice {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        let mut index = HashMap::with_capacity(regions.len());
        for (i, r) in regions.iter().enumerate() {
            if r.id.is_empty() {
                return Err(Error::MissingRegionId {
                    feature: i,
                    property: DEFAULT_ID_PROPERTY.to_string(),
                });
            }
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::DuplicateRegionId(r.id.clone()));
            }
        }
        Ok(RegionLattice { regions, index })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, i: usize) -> &Region {
        &self.regions[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.id.clone()).collect()
    }
}

#[derive(Deserialize)]
struct RawCollection<'a> {
    #[serde(rename = "type")]
    kind: String,
    #[serde(borrow)]
    features: Vec<RawFeature<'a>>,
}

#[derive(Deserialize)]
struct RawFeature<'a> {
    #[serde(default)]
    properties: Option<Map<String, Value>>,
    #[serde(borrow)]
    geometry: Option<&'a RawValue>,
}

#[derive(Deserialize)]
#[serde(tag = "type", content = "coordinates")]
enum ArealGeometry {
    Polygon(Vec<Ring>),
    MultiPolygon(Vec<Vec<Ring>>),
}

/// Parses a GeoJSON FeatureCollection of Polygon/MultiPolygon features.
/// `id_property` names the feature property carrying the region id.
pub fn parse_lattice(bytes: &[u8], id_property: &str) -> Result<RegionLattice> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Json(e.to_string()))?;
    let collection: RawCollection =
        serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
    if collection.kind != "FeatureCollection" {
        return Err(Error::Json(format!(
            "expected FeatureCollection, found {}",
            collection.kind
        )));
    }
    let mut regions = Vec::with_capacity(collection.features.len());
    for (i, feature) in collection.features.into_iter().enumerate() {
        let id = feature
            .properties
            .as_ref()
            .and_then(|p| p.get(id_property))
            .and_then(|v| match v {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            })
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::MissingRegionId {
                feature: i,
                property: id_property.to_string(),
            })?;
        let raw = feature
            .geometry
            .ok_or_else(|| Error::NonArealGeometry(id.clone()))?;
        let geometry: ArealGeometry =
            serde_json::from_str(raw.get()).map_err(|_| Error::NonArealGeometry(id.clone()))?;
        let polygons = match geometry {
            ArealGeometry::Polygon(rings) => vec![rings_to_polygon(&id, rings)?],
            ArealGeometry::MultiPolygon(parts) => parts
                .into_iter()
                .map(|rings| rings_to_polygon(&id, rings))
                .collect::<Result<_>>()?,
        };
        let mut region = Region::new(id, polygons)?;
        region.raw_geometry = Some(raw.to_owned());
        region.properties = feature.properties.unwrap_or_default();
        regions.push(region);
    }
    RegionLattice::new(regions)
}

fn rings_to_polygon(id: &str, mut rings: Vec<Ring>) -> Result<Polygon> {
    if rings.is_empty() {
        return Err(Error::NonArealGeometry(id.to_string()));
    }
    let exterior = rings.remove(0);
    Ok(Polygon::new(exterior, rings))
}

/// Even-odd containment test over all rings of the polygon.
///
/// Points on any ring edge or vertex are inside. Coordinates are treated
/// as planar.
pub fn point_in_polygon(p: Coord, poly: &Polygon) -> bool {
    if poly.rings().any(|ring| on_ring_boundary(p, ring)) {
        return true;
    }
    let mut inside = false;
    for ring in poly.rings() {
        for edge in ring.windows(2) {
            let (a, b) = (edge[0], edge[1]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x_cross = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x_cross {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

fn on_ring_boundary(p: Coord, ring: &Ring) -> bool {
    ring.windows(2).any(|e| on_segment(p, e[0], e[1]))
}

fn on_segment(p: Coord, a: Coord, b: Coord) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let scale = (b[0] - a[0]).abs().max((b[1] - a[1]).abs()).max(1.0);
    if cross.abs() > 1e-12 * scale * scale {
        return false;
    }
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}
