//! Deterministic synthetic lattices, fields and point sets for tests,
//! benchmarks and the bundled demo fixture.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{Polygon, Region, RegionLattice};
use crate::numfmt::format_sig6;
use crate::points::{Point, PointSet};

pub fn grid_region_id(row: usize, col: usize) -> String {
    format!("r{row:03}c{col:03}")
}

/// `rows × cols` square cells of side `cell`, row-major, origin at (0, 0).
pub fn grid_lattice(rows: usize, cols: usize, cell: f64) -> RegionLattice {
    let regions = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| {
            let (x0, y0) = (c as f64 * cell, r as f64 * cell);
            let (x1, y1) = ((c + 1) as f64 * cell, (r + 1) as f64 * cell);
            let ring = vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]];
            Region::new(grid_region_id(r, c), vec![Polygon::new(ring, vec![])])
                .expect("valid cell")
        })
        .collect();
    RegionLattice::new(regions).expect("unique ids")
}

/// GeoJSON text for a grid lattice, offset so cells sit at `(lon0, lat0)`.
pub fn grid_geojson(rows: usize, cols: usize, cell: f64, lon0: f64, lat0: f64) -> String {
    let mut out = String::from("{\"type\":\"FeatureCollection\",\"features\":[\n");
    for r in 0..rows {
        for c in 0..cols {
            let x0 = lon0 + c as f64 * cell;
            let y0 = lat0 + r as f64 * cell;
            let (x1, y1) = (x0 + cell, y0 + cell);
            if r + c > 0 {
                out.push_str(",\n");
            }
            write!(
                out,
                "{{\"type\":\"Feature\",\"properties\":{{\"region_id\":\"{}\"}},\"geometry\":{{\"type\":\"Polygon\",\"coordinates\":[[[{x0:?},{y0:?}],[{x1:?},{y0:?}],[{x1:?},{y1:?}],[{x0:?},{y1:?}],[{x0:?},{y0:?}]]]}}}}",
                grid_region_id(r, c)
            )
            .unwrap();
        }
    }
    out.push_str("\n]}\n");
    out
}

/// Undirected grid adjacency in row-major indexing. `queen` adds diagonals.
pub fn grid_edges(rows: usize, cols: usize, queen: bool) -> Vec<(usize, usize)> {
    let idx = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((idx(r, c), idx(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((idx(r, c), idx(r + 1, c)));
                if queen {
                    if c + 1 < cols {
                        edges.push((idx(r, c), idx(r + 1, c + 1)));
                    }
                    if c > 0 {
                        edges.push((idx(r, c), idx(r + 1, c - 1)));
                    }
                }
            }
        }
    }
    edges
}

/// 0/1 checkerboard in row-major order.
pub fn checkerboard(rows: usize, cols: usize) -> Vec<f64> {
    (0..rows * cols)
        .map(|k| ((k / cols + k % cols) % 2) as f64)
        .collect()
}

/// Smooth field with a hot corner at the origin side and a cold far corner,
/// plus seeded noise.
pub fn gradient_field(rows: usize, cols: usize, noise: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows * cols)
        .map(|k| {
            let (r, c) = ((k / cols) as f64, (k % cols) as f64);
            let base = 100.0 - 100.0 * (r + c) / ((rows + cols).max(2) - 2).max(1) as f64;
            base + noise * (rng.random::<f64>() - 0.5)
        })
        .collect()
}

/// Uniform random points over the box `[lon0, lon1] × [lat0, lat1]`.
pub fn random_points(count: usize, bounds: [f64; 4], seed: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lon0, lat0, lon1, lat1] = bounds;
    let points = (0..count)
        .map(|k| Point {
            id: format!("p{k:05}"),
            lon: rng.random_range(lon0..=lon1),
            lat: rng.random_range(lat0..=lat1),
        })
        .collect();
    PointSet::new(points).expect("valid synthetic points")
}

pub fn points_csv(points: &PointSet) -> String {
    let mut out = String::from("point_id,lon,lat\n");
    for p in points.points() {
        writeln!(out, "{},{:?},{:?}", p.id, p.lon, p.lat).unwrap();
    }
    out
}

/// Writes the demo fixture used by the README and the end-to-end tests:
/// a 10x10 grid of tracts, hazard and event attributes per tract, outage
/// attributes per 2x2-tract county (one county missing), 200 facility
/// points, a weights file and a run configuration.
pub fn write_demo_fixture(dir: &Path) -> Result<()> {
    const ROWS: usize = 10;
    const COLS: usize = 10;
    const CELL: f64 = 0.1;
    const LON0: f64 = -95.0;
    const LAT0: f64 = 44.0;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    };

    write("tracts.geojson", grid_geojson(ROWS, COLS, CELL, LON0, LAT0))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2014);
    let hurricane = gradient_field(ROWS, COLS, 10.0, 1);
    let earthquake: Vec<f64> = gradient_field(ROWS, COLS, 15.0, 2)
        .into_iter()
        .map(|v| 100.0 - v)
        .collect();
    let mut tracts = String::from(
        "region_id,hurricane_risk,earthquake_risk,tornado_risk,building_value,agriculture_value,social_vulnerability,community_resilience,earthquake_events,hurricane_events,tornado_events\n",
    );
    for k in 0..ROWS * COLS {
        let (r, c) = (k / COLS, k % COLS);
        let tornado = 50.0 + 40.0 * ((c as f64) * 0.7).sin() + 5.0 * rng.random::<f64>();
        let building = 5e8 + 4e8 * rng.random::<f64>();
        let agriculture = 1e6 * (1.0 + 20.0 * rng.random::<f64>());
        let sovi = 100.0 * rng.random::<f64>();
        let resilience = 100.0 * rng.random::<f64>();
        let events = |risk: f64, rng: &mut ChaCha8Rng| (risk / 25.0 + rng.random::<f64>() * 2.0).floor();
        let (eq_ev, hu_ev, to_ev) = (
            events(earthquake[k], &mut rng),
            events(hurricane[k], &mut rng),
            events(tornado, &mut rng),
        );
        writeln!(
            tracts,
            "{},{},{},{},{},{},{},{},{},{},{}",
            grid_region_id(r, c),
            format_sig6(hurricane[k]),
            format_sig6(earthquake[k]),
            format_sig6(tornado),
            format_sig6(building),
            format_sig6(agriculture),
            format_sig6(sovi),
            format_sig6(resilience),
            eq_ev,
            hu_ev,
            to_ev
        )
        .unwrap();
    }
    write("tracts.csv", tracts)?;

    let mut mapping = String::from("region_id,county_id\n");
    for r in 0..ROWS {
        for c in 0..COLS {
            writeln!(mapping, "{},c{}{}", grid_region_id(r, c), r / 2, c / 2).unwrap();
        }
    }
    write("tract_county.csv", mapping)?;

    let mut counties = String::from("county_id,total_outages,outage_duration\n");
    for cr in 0..ROWS / 2 {
        for cc in 0..COLS / 2 {
            if (cr, cc) == (2, 2) {
                // no outage record: these four tracts are imputed from neighbors
                continue;
            }
            let outages = (200.0 + 150.0 * (cr + cc) as f64 + 80.0 * rng.random::<f64>()).round();
            let duration = (3600.0 * (1.0 + 4.0 * rng.random::<f64>())).round();
            writeln!(counties, "c{cr}{cc},{outages},{duration}").unwrap();
        }
    }
    write("county_outages.csv", counties)?;

    let bounds = [
        LON0 - 0.05,
        LAT0 - 0.05,
        LON0 + COLS as f64 * CELL + 0.05,
        LAT0 + ROWS as f64 * CELL + 0.05,
    ];
    write("facilities.csv", points_csv(&random_points(200, bounds, 7)))?;

    write(
        "weights.cfg",
        "# feature,weight,direction\n\
         earthquake_risk,0.35,HIGHER_IS_WORSE\n\
         hurricane_risk,0.1,HIGHER_IS_WORSE\n\
         tornado_risk,0.1,HIGHER_IS_WORSE\n\
         total_outages,0.15,HIGHER_IS_WORSE\n\
         outage_duration,0.1,HIGHER_IS_WORSE\n\
         building_value,0.05,HIGHER_IS_WORSE\n\
         agriculture_value,0.05,HIGHER_IS_WORSE\n\
         social_vulnerability,0.05,HIGHER_IS_WORSE\n\
         community_resilience,0.05,LOWER_IS_WORSE\n\
         weights_sum=1.0\n"
            .to_string(),
    )?;
    write("run.toml", DEMO_RUN_CONFIG.to_string())?;
    Ok(())
}

pub const DEMO_RUN_CONFIG: &str = r#"# Demo run over the synthetic 10x10 tract fixture.
# Relative paths resolve against this file's directory.

# Region polygons and the feature property holding each region's id.
lattice = "tracts.geojson"
id_property = "region_id"

# Facility locations (point_id,lon,lat).
points = "facilities.csv"

# queen | rook, and the vertex-matching tolerance in degrees.
contiguity = "queen"
snap_tolerance = 1e-7

# Permutation inference.
permutations = 999
seed = 42
alpha = 0.05
fdr = false

output_dir = "out"

# Tract-level attributes.
[[attributes]]
path = "tracts.csv"

# County-level attributes broadcast to tracts through a region_id,county_id map.
[[attributes]]
path = "county_outages.csv"
broadcast = "tract_county.csv"

[[analysis]]
name = "hurricane"
kind = "lisa"
features = ["hurricane_risk"]

[[analysis]]
name = "outages"
kind = "global"
features = ["total_outages"]

# Bivariate: earthquake risk at the tract against outages around it.
[[analysis]]
name = "EPO"
kind = "bilisa"
features = ["earthquake_risk", "total_outages"]

# Composite score over the EPO cold spots (LL).
[score]
weights = "weights.cfg"
analysis = "EPO"
cluster = "LL"
event_columns = ["earthquake_events", "hurricane_events", "tornado_events"]
outage_column = "total_outages"
top_k = 5
"#;
