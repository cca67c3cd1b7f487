//! Sparse spatial weights over a region lattice.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::{Coord, RegionLattice};

pub const DEFAULT_SNAP_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Contiguity {
    #[default]
    Queen,
    Rook,
}

impl FromStr for Contiguity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "queen" => Ok(Contiguity::Queen),
            "rook" => Ok(Contiguity::Rook),
            other => Err(Error::Config(format!("unknown contiguity rule \"{other}\""))),
        }
    }
}

/// Row-compressed neighbor lists. Row `i` holds `(j, w_ij)` sorted by `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWeights {
    offsets: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f64>,
    standardized: bool,
    s0: f64,
}

impl SpatialWeights {
    /// Builds weights from per-region neighbor lists.
    pub fn from_neighbors(neighbors: Vec<Vec<(usize, f64)>>, standardized: bool) -> Result<Self> {
        let n = neighbors.len();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut indices = Vec::new();
        let mut weights = Vec::new();
        for (i, mut row) in neighbors.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for (k, &(j, w)) in row.iter().enumerate() {
                if j == i {
                    return Err(Error::SelfEdge(i));
                }
                if j >= n {
                    return Err(Error::IndexOutOfRange { index: j, n });
                }
                if k > 0 && row[k - 1].0 == j {
                    return Err(Error::WeightsFormat(format!("duplicate pair ({i}, {j})")));
                }
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::WeightsFormat(format!("invalid weight {w} at ({i}, {j})")));
                }
                indices.push(j);
                weights.push(w);
            }
            offsets.push(indices.len());
        }
        let s0 = weights.iter().sum();
        Ok(SpatialWeights {
            offsets,
            indices,
            weights,
            standardized,
            s0,
        })
    }

    /// Symmetric binary weights from an undirected edge list; duplicates collapse.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut sets = vec![BTreeSet::new(); n];
        for &(i, j) in edges {
            if i == j {
                return Err(Error::SelfEdge(i));
            }
            for k in [i, j] {
                if k >= n {
                    return Err(Error::IndexOutOfRange { index: k, n });
                }
            }
            sets[i].insert(j);
            sets[j].insert(i);
        }
        Self::from_neighbors(
            sets.into_iter()
                .map(|s| s.into_iter().map(|j| (j, 1.0)).collect())
                .collect(),
            false,
        )
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Sum of all weights.
    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn neighbor_indices(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn neighbor_weights(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.neighbor_indices(i)
            .iter()
            .copied()
            .zip(self.neighbor_weights(i).iter().copied())
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn is_island(&self, i: usize) -> bool {
        self.degree(i) == 0
    }

    /// Indices with no neighbors, ascending.
    pub fn islands(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.is_island(i)).collect()
    }

    /// `j ∈ N(i) ⇔ i ∈ N(j)` for every pair.
    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n()).all(|i| {
            self.neighbor_indices(i)
                .iter()
                .all(|&j| self.neighbor_indices(j).binary_search(&i).is_ok())
        })
    }

    /// Scales every non-island row to sum to one. Idempotent.
    pub fn row_standardize(&self) -> SpatialWeights {
        let mut weights = self.weights.clone();
        for i in 0..self.n() {
            let row = &mut weights[self.offsets[i]..self.offsets[i + 1]];
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter_mut().for_each(|w| *w /= sum);
            }
        }
        let s0 = weights.iter().sum();
        SpatialWeights {
            offsets: self.offsets.clone(),
            indices: self.indices.clone(),
            weights,
            standardized: true,
            s0,
        }
    }

    /// Edge-list CSV: header `# n=<count> standardized=<bool>`, then `i,j,w` rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# n={} standardized={}\n", self.n(), self.standardized);
        for i in 0..self.n() {
            for (j, w) in self.neighbors(i) {
                // Shortest round-trip representation keeps row sums exact on re-import.
                writeln!(out, "{i},{j},{w:?}").expect("write to string");
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::WeightsFormat("empty file".into()))?;
        let (n, standardized) = parse_weights_header(header)?;
        let mut neighbors = vec![Vec::new(); n];
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::WeightsFormat(format!("line {}: \"{line}\"", lineno + 2));
            let mut parts = line.split(',');
            let i: usize = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
            let j: usize = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
            let w: f64 = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
            if parts.next().is_some() {
                return Err(bad());
            }
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            neighbors[i].push((j, w));
        }
        Self::from_neighbors(neighbors, standardized)
    }
}

fn parse_weights_header(line: &str) -> Result<(usize, bool)> {
    let bad = || Error::WeightsFormat(format!("bad header \"{line}\""));
    let rest = line.strip_prefix('#').ok_or_else(bad)?;
    let mut n = None;
    let mut standardized = None;
    for token in rest.split_whitespace() {
        match token.split_once('=') {
            Some(("n", v)) => n = v.parse().ok(),
            Some(("standardized", v)) => standardized = v.parse().ok(),
            _ => return Err(bad()),
        }
    }
    Ok((n.ok_or_else(bad)?, standardized.ok_or_else(bad)?))
}

/// One ring vertex. Vertices of a ring are stored contiguously.
#[derive(Clone, Copy)]
struct VertexRef {
    region: usize,
    pos: usize,
    /// Distinct vertices in the ring (closing duplicate excluded).
    ring_len: usize,
}

/// Binary contiguity weights. Vertices closer than `snap_tol` (per axis)
/// are treated as identical. QUEEN links regions sharing a vertex, ROOK
/// links regions sharing an edge (both endpoints matched).
pub fn build_contiguity(
    lattice: &RegionLattice,
    rule: Contiguity,
    snap_tol: f64,
) -> Result<SpatialWeights> {
    let tol = snap_tol.max(f64::MIN_POSITIVE);
    let cell = |p: Coord| -> (i64, i64) { ((p[0] / tol).floor() as i64, (p[1] / tol).floor() as i64) };

    let mut vertices: Vec<(Coord, VertexRef)> = Vec::new();
    for (r, region) in lattice.regions().iter().enumerate() {
        for poly in &region.polygons {
            for ring in poly.rings() {
                let ring_len = ring.len() - 1;
                for (pos, &p) in ring[..ring_len].iter().enumerate() {
                    vertices.push((
                        p,
                        VertexRef {
                            region: r,
                            pos,
                            ring_len,
                        },
                    ));
                }
            }
        }
    }
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (k, (p, _)) in vertices.iter().enumerate() {
        grid.entry(cell(*p)).or_default().push(k);
    }
    // Vertices from other regions within tolerance of vertex k.
    let matches = |k: usize| -> Vec<usize> {
        let (p, v) = vertices[k];
        let (cx, cy) = cell(p);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(cx + dx, cy + dy)) {
                    for &m in bucket {
                        let (q, u) = vertices[m];
                        if u.region != v.region
                            && (p[0] - q[0]).abs() <= tol
                            && (p[1] - q[1]).abs() <= tol
                        {
                            out.push(m);
                        }
                    }
                }
            }
        }
        out
    };

    let n = lattice.len();
    let mut sets = vec![BTreeSet::new(); n];
    match rule {
        Contiguity::Queen => {
            for k in 0..vertices.len() {
                let r = vertices[k].1.region;
                for m in matches(k) {
                    sets[r].insert(vertices[m].1.region);
                }
            }
        }
        Contiguity::Rook => {
            // Walk each ring edge (k, next) and look for a matching edge in another region.
            let mut k = 0;
            while k < vertices.len() {
                let v = vertices[k].1;
                let start = k - v.pos;
                let next = start + (v.pos + 1) % v.ring_len;
                let at_next = matches(next);
                for m in matches(k) {
                    let u = vertices[m].1;
                    let base = m - u.pos;
                    let fwd = base + (u.pos + 1) % u.ring_len;
                    let back = base + (u.pos + u.ring_len - 1) % u.ring_len;
                    if at_next.contains(&fwd) || at_next.contains(&back) {
                        sets[v.region].insert(u.region);
                        sets[u.region].insert(v.region);
                    }
                }
                k += 1;
            }
        }
    }
    SpatialWeights::from_neighbors(
        sets.into_iter()
            .map(|s| s.into_iter().map(|j| (j, 1.0)).collect())
            .collect(),
        false,
    )
}
