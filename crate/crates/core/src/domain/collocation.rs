use std::collections::BTreeMap;
use std::ops::Range;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::boundary::Edge;
use super::material::{material_at_point, Material, MaterialTable};
use super::phase_map::{point_segment_distance, PhaseMap};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Cell-centred lattice; the interior count must factor into the lattice.
    Grid,
    #[default]
    UniformRandom,
}

/// How many points to draw and where to put extra density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSpec {
    pub interior: usize,
    pub per_edge: usize,
    pub strategy: Strategy,
    /// Relative density of every phase except the one covering the largest
    /// area (the matrix).
    pub inclusion_density: f64,
    /// Explicit per-phase densities, overriding `inclusion_density`.
    pub phase_density: BTreeMap<u32, f64>,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            interior: 5000,
            per_edge: 400,
            strategy: Strategy::UniformRandom,
            inclusion_density: 2.0,
            phase_density: BTreeMap::new(),
        }
    }
}

impl SampleSpec {
    pub fn new(interior: usize, per_edge: usize) -> Self {
        SampleSpec {
            interior,
            per_edge,
            ..Self::default()
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }
}

/// Interior points followed by the points of each edge in `Edge::ALL` order,
/// with the material cached per point.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet {
    lx: f64,
    ly: f64,
    points: Vec<[f64; 2]>,
    materials: Vec<Material>,
    n_interior: usize,
    edge_counts: [usize; 4],
}

impl CollocationSet {
    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn interior(&self) -> Range<usize> {
        0..self.n_interior
    }

    pub fn edge(&self, e: Edge) -> Range<usize> {
        let start = self.n_interior + self.edge_counts[..e.index()].iter().sum::<usize>();
        start..start + self.edge_counts[e.index()]
    }

    pub fn n_boundary(&self) -> usize {
        self.edge_counts.iter().sum()
    }

    pub fn extents(&self) -> (f64, f64) {
        (self.lx, self.ly)
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Builds a set from explicit point lists, looking up materials.
    pub fn from_parts(
        map: &PhaseMap,
        table: &MaterialTable,
        interior: Vec<[f64; 2]>,
        edges: [Vec<[f64; 2]>; 4],
    ) -> Result<Self> {
        let (lx, ly) = (map.lx(), map.ly());
        for p in &interior {
            if !(p[0] > 0.0 && p[0] < lx && p[1] > 0.0 && p[1] < ly) {
                return Err(Error::Domain(format!("interior point {p:?} not strictly inside")));
            }
        }
        for (e, pts) in Edge::ALL.iter().zip(&edges) {
            for p in pts {
                let on = match e {
                    Edge::Left => p[0] == 0.0,
                    Edge::Right => p[0] == lx,
                    Edge::Bottom => p[1] == 0.0,
                    Edge::Top => p[1] == ly,
                };
                if !on {
                    return Err(Error::Domain(format!("point {p:?} not on the {e:?} edge")));
                }
            }
        }
        let n_interior = interior.len();
        let edge_counts = [edges[0].len(), edges[1].len(), edges[2].len(), edges[3].len()];
        let mut points = interior;
        for pts in edges {
            points.extend(pts);
        }
        let materials = points
            .iter()
            .map(|&p| material_at_point(map, table, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(CollocationSet {
            lx,
            ly,
            points,
            materials,
            n_interior,
            edge_counts,
        })
    }

    fn edge_points(&self, e: Edge) -> Vec<[f64; 2]> {
        self.points[self.edge(e)].to_vec()
    }
}

fn open_uniform(rng: &mut ChaCha8Rng, len: f64) -> f64 {
    loop {
        let v = rng.random::<f64>() * len;
        if v > 0.0 && v < len {
            return v;
        }
    }
}

/// Relative sampling density per phase present in `map`.
fn densities(map: &PhaseMap, spec: &SampleSpec) -> BTreeMap<u32, f64> {
    let phases = map.phases();
    let matrix = phases
        .iter()
        .copied()
        .max_by(|a, b| map.phase_area(*a).total_cmp(&map.phase_area(*b)).then(b.cmp(a)))
        .unwrap_or(0);
    for id in spec.phase_density.keys() {
        if !phases.contains(id) {
            warn!("extra density requested for phase {id}, which has zero area; ignored");
        }
    }
    phases
        .into_iter()
        .map(|id| {
            let d = spec.phase_density.get(&id).copied().unwrap_or(if id == matrix {
                1.0
            } else {
                spec.inclusion_density
            });
            (id, d)
        })
        .collect()
}

/// Draws interior points by `spec.strategy` and `spec.per_edge` equally
/// spaced points on each edge at arc parameters `(i + 1/2)/n`, which keeps
/// corners out of every edge set.
pub fn sample_collocation(
    map: &PhaseMap,
    table: &MaterialTable,
    spec: &SampleSpec,
    seed: u64,
) -> Result<CollocationSet> {
    if spec.interior == 0 || spec.per_edge == 0 {
        return Err(Error::config("collocation counts must be positive"));
    }
    table.check_covers(map)?;
    let (lx, ly) = (map.lx(), map.ly());
    let interior = match spec.strategy {
        Strategy::Grid => {
            let n = spec.interior;
            let nx = ((n as f64 * lx / ly).sqrt().round() as usize).max(1);
            let ny = n / nx;
            if nx * ny != n {
                return Err(Error::config(format!(
                    "grid strategy cannot lay {n} points on a {lx} x {ly} domain"
                )));
            }
            let mut pts = Vec::with_capacity(n);
            for j in 0..ny {
                for i in 0..nx {
                    pts.push([
                        (i as f64 + 0.5) * lx / nx as f64,
                        (j as f64 + 0.5) * ly / ny as f64,
                    ]);
                }
            }
            pts
        }
        Strategy::UniformRandom => {
            let dens = densities(map, spec);
            let wmax = dens.values().copied().fold(0.0, f64::max);
            if !(wmax > 0.0) || dens.values().any(|d| !(*d >= 0.0)) {
                return Err(Error::config("phase densities must be non-negative with a positive maximum"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts = Vec::with_capacity(spec.interior);
            while pts.len() < spec.interior {
                let p = [open_uniform(&mut rng, lx), open_uniform(&mut rng, ly)];
                let w = dens[&map.phase_at(p[0], p[1])];
                if rng.random::<f64>() * wmax < w {
                    pts.push(p);
                }
            }
            pts
        }
    };
    let n = spec.per_edge;
    let edges = Edge::ALL.map(|e| {
        (0..n)
            .map(|i| e.point((i as f64 + 0.5) / n as f64, lx, ly))
            .collect::<Vec<_>>()
    });
    CollocationSet::from_parts(map, table, interior, edges)
}

/// Appends `n_extra` uniform-random interior points whose distance to the
/// nearest phase boundary is at most `radius`.
pub fn refine_near_interface(
    set: &CollocationSet,
    map: &PhaseMap,
    table: &MaterialTable,
    n_extra: usize,
    radius: f64,
    seed: u64,
) -> Result<CollocationSet> {
    if n_extra == 0 {
        return Ok(set.clone());
    }
    let segs = map.interface_segments();
    if segs.is_empty() {
        warn!("phase map has no interface; collocation set left unchanged");
        return Ok(set.clone());
    }
    if !(radius > 0.0) {
        return Err(Error::config(format!("refinement radius must be positive, got {radius}")));
    }
    let (lx, ly) = (map.lx(), map.ly());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut interior = set.points[set.interior()].to_vec();
    let max_attempts = 10_000 * n_extra;
    let mut added = 0;
    for _ in 0..max_attempts {
        if added == n_extra {
            break;
        }
        let p = [open_uniform(&mut rng, lx), open_uniform(&mut rng, ly)];
        if segs
            .iter()
            .any(|&(a, b)| point_segment_distance(p, a, b) <= radius)
        {
            interior.push(p);
            added += 1;
        }
    }
    if added < n_extra {
        return Err(Error::config(format!(
            "could not place {n_extra} points within {radius} of the interface"
        )));
    }
    let edges = Edge::ALL.map(|e| set.edge_points(e));
    CollocationSet::from_parts(map, table, interior, edges)
}

/// Uniform `nx x ny` lattice over `[0, lx] x [0, ly]` including the boundary,
/// x varying fastest.
pub fn eval_grid(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Vec<[f64; 2]>> {
    if nx < 2 || ny < 2 {
        return Err(Error::structural(format!("evaluation grid needs at least 2x2 points, got {nx}x{ny}")));
    }
    let mut pts = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = j as f64 * ly / (ny - 1) as f64;
        for i in 0..nx {
            pts.push([i as f64 * lx / (nx - 1) as f64, y]);
        }
    }
    Ok(pts)
}
