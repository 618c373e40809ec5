use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Pixel grid of phase ids tiling `[0, L_x] x [0, L_y]`. Row 0 is the bottom
/// row.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMap {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    cells: Vec<u32>,
}

const SQUARE_INCLUSION: &str = include_str!("../../../../data/maps/square_inclusion_32.txt");
const MULTI_BLOB: &str = include_str!("../../../../data/maps/multi_blob_32.txt");

impl PhaseMap {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, cells: Vec<u32>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::structural("phase map needs at least one cell"));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::structural(format!("invalid extents {lx} x {ly}")));
        }
        if cells.len() != nx * ny {
            return Err(Error::structural(format!(
                "phase map {nx}x{ny} needs {} cells, got {}",
                nx * ny,
                cells.len()
            )));
        }
        Ok(PhaseMap {
            nx,
            ny,
            lx,
            ly,
            cells,
        })
    }

    pub fn homogeneous(nx: usize, ny: usize, lx: f64, ly: f64, phase: u32) -> Result<Self> {
        Self::new(nx, ny, lx, ly, vec![phase; nx * ny])
    }

    /// 32x32 unit-square map of phase 1 with a centered phase-2 square over
    /// cells `[12, 20)^2`.
    pub fn square_inclusion() -> Self {
        Self::parse(SQUARE_INCLUSION).expect("bundled map is valid")
    }

    /// 32x32 unit-square map with several phase-2 blobs including reentrant
    /// corners.
    pub fn multi_blob() -> Self {
        Self::parse(MULTI_BLOB).expect("bundled map is valid")
    }

    /// Bundled maps by name: `square_inclusion` or `multi_blob`.
    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "square_inclusion" | "square_inclusion_32" => Some(Self::square_inclusion()),
            "multi_blob" | "multi_blob_32" => Some(Self::multi_blob()),
            _ => None,
        }
    }

    /// Text format: `n_x n_y L_x L_y` header, then `n_y` rows of `n_x` ids,
    /// bottom row first.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::structural("empty phase map"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 {
            return Err(Error::structural(format!(
                "phase map header must be `n_x n_y L_x L_y`, got {header:?}"
            )));
        }
        let bad = |what: &str| Error::structural(format!("bad {what} in header {header:?}"));
        let nx: usize = h[0].parse().map_err(|_| bad("n_x"))?;
        let ny: usize = h[1].parse().map_err(|_| bad("n_y"))?;
        let lx: f64 = h[2].parse().map_err(|_| bad("L_x"))?;
        let ly: f64 = h[3].parse().map_err(|_| bad("L_y"))?;
        let mut cells = Vec::with_capacity(nx * ny);
        for (row, line) in lines.enumerate() {
            let ids = line
                .split_whitespace()
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::structural(format!("row {row}: {e}")))?;
            if ids.len() != nx {
                return Err(Error::structural(format!(
                    "row {row} has {} ids, expected {nx}",
                    ids.len()
                )));
            }
            cells.extend(ids);
        }
        if cells.len() != nx * ny {
            return Err(Error::structural(format!(
                "expected {ny} rows, got {}",
                cells.len() / nx.max(1)
            )));
        }
        Self::new(nx, ny, lx, ly, cells)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {} {}\n", self.nx, self.ny, self.lx, self.ly);
        for j in 0..self.ny {
            let row: Vec<String> = (0..self.nx).map(|i| self.cell(i, j).to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn cell_width(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Phase of cell column `i`, row `j` (row 0 at the bottom).
    pub fn cell(&self, i: usize, j: usize) -> u32 {
        self.cells[j * self.nx + i]
    }

    pub fn phases(&self) -> std::collections::BTreeSet<u32> {
        self.cells.iter().copied().collect()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.cells.iter().all(|&c| c == self.cells[0])
    }

    /// Cell containing a point strictly inside the domain (clamped at the
    /// outer boundary).
    pub fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let i = ((x / self.cell_width()).floor() as isize).clamp(0, self.nx as isize - 1);
        let j = ((y / self.cell_height()).floor() as isize).clamp(0, self.ny as isize - 1);
        (i as usize, j as usize)
    }

    pub fn phase_at(&self, x: f64, y: f64) -> u32 {
        let (i, j) = self.cell_of(x, y);
        self.cell(i, j)
    }

    /// Segments separating cells of different phase, as `(start, end)`.
    pub fn interface_segments(&self) -> Vec<([f64; 2], [f64; 2])> {
        let (dx, dy) = (self.cell_width(), self.cell_height());
        let mut segs = Vec::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                if i + 1 < self.nx && self.cell(i, j) != self.cell(i + 1, j) {
                    let x = (i + 1) as f64 * dx;
                    segs.push(([x, j as f64 * dy], [x, (j + 1) as f64 * dy]));
                }
                if j + 1 < self.ny && self.cell(i, j) != self.cell(i, j + 1) {
                    let y = (j + 1) as f64 * dy;
                    segs.push(([i as f64 * dx, y], [(i + 1) as f64 * dx, y]));
                }
            }
        }
        segs
    }

    /// Area covered by a phase.
    pub fn phase_area(&self, phase: u32) -> f64 {
        let n = self.cells.iter().filter(|&&c| c == phase).count();
        n as f64 * self.cell_width() * self.cell_height()
    }
}

/// Euclidean distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (vx, vy) = (b[0] - a[0], b[1] - a[1]);
    let (wx, wy) = (p[0] - a[0], p[1] - a[1]);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a[0] + t * vx - p[0], a[1] + t * vy - p[1]);
    (cx * cx + cy * cy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_square_inclusion_layout() {
        let m = PhaseMap::square_inclusion();
        assert_eq!((m.nx(), m.ny()), (32, 32));
        assert_eq!((m.lx(), m.ly()), (1.0, 1.0));
        for j in 0..32 {
            for i in 0..32 {
                let inside = (12..20).contains(&i) && (12..20).contains(&j);
                assert_eq!(m.cell(i, j), if inside { 2 } else { 1 }, "cell {i},{j}");
            }
        }
        assert_eq!(m.interface_segments().len(), 32);
    }

    #[test]
    fn bundled_multi_blob_is_two_phase() {
        let m = PhaseMap::multi_blob();
        assert_eq!(m.phases().into_iter().collect::<Vec<_>>(), vec![1, 2]);
        assert!(m.phase_area(2) > 0.1 && m.phase_area(2) < 0.5);
    }

    #[test]
    fn text_round_trip() {
        let m = PhaseMap::multi_blob();
        assert_eq!(PhaseMap::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn row_zero_is_bottom() {
        let m = PhaseMap::parse("2 2 1 1\n1 2\n3 4\n").unwrap();
        assert_eq!(m.phase_at(0.25, 0.25), 1);
        assert_eq!(m.phase_at(0.75, 0.25), 2);
        assert_eq!(m.phase_at(0.25, 0.75), 3);
    }

    #[test]
    fn malformed_maps_are_rejected() {
        assert!(PhaseMap::parse("2 2 1 1\n1 2\n").is_err());
        assert!(PhaseMap::parse("2 2 1 1\n1 2 3\n1 2\n").is_err());
        assert!(PhaseMap::parse("2 2 1\n1 2\n1 2\n").is_err());
        assert!(PhaseMap::parse("2 2 1 -1\n1 2\n1 2\n").is_err());
    }

    #[test]
    fn segment_distance() {
        assert_eq!(point_segment_distance([0.5, 1.0], [0.0, 0.0], [1.0, 0.0]), 1.0);
        assert_eq!(point_segment_distance([2.0, 0.0], [0.0, 0.0], [1.0, 0.0]), 1.0);
    }
}
