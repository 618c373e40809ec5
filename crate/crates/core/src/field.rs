//! Solution fields on rectangular lattices, their CSV form and the
//! relative-difference report used to compare two solutions.

use std::fmt::{self, Write as _};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Pinn,
    Fem,
    /// Read back from a file, which does not record its origin.
    Unknown,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Pinn => "pinn",
            Provenance::Fem => "fem",
            Provenance::Unknown => "unknown",
        })
    }
}

/// Named columns over an `nx x ny` lattice of points, x varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    nx: usize,
    ny: usize,
    points: Vec<[f64; 2]>,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl FieldGrid {
    pub fn new(nx: usize, ny: usize, points: Vec<[f64; 2]>, provenance: Provenance) -> Result<Self> {
        if nx * ny != points.len() || nx == 0 || ny == 0 {
            return Err(Error::structural(format!(
                "{} points do not form a {nx}x{ny} grid",
                points.len()
            )));
        }
        Ok(FieldGrid {
            nx,
            ny,
            points,
            names: Vec::new(),
            columns: Vec::new(),
            provenance,
        })
    }

    pub fn push_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.points.len() {
            return Err(Error::structural(format!(
                "column {name} has {} values for {} points",
                values.len(),
                self.points.len()
            )));
        }
        if self.names.iter().any(|n| n == name) || name == "x" || name == "y" {
            return Err(Error::structural(format!("duplicate column {name}")));
        }
        self.names.push(name.to_string());
        self.columns.push(values);
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    fn xs(&self) -> Vec<f64> {
        self.points[..self.nx].iter().map(|p| p[0]).collect()
    }

    fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.points[j * self.nx][1]).collect()
    }

    /// CSV with header `x,y,<fields>` and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, p) in self.points.iter().enumerate() {
            let _ = write!(out, "{:.16e},{:.16e}", p[0], p[1]);
            for c in &self.columns {
                let _ = write!(out, ",{:.16e}", c[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    /// Parses the CSV form; the lattice width is the length of the first
    /// run of rows sharing the first row's `y`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::structural("empty field file"))?;
        let names: Vec<&str> = header.split(',').map(str::trim).collect();
        if names.len() < 2 || names[0] != "x" || names[1] != "y" {
            return Err(Error::structural(format!("header must start with x,y, got {header:?}")));
        }
        let n_fields = names.len() - 2;
        let mut points = Vec::new();
        let mut columns = vec![Vec::new(); n_fields];
        for (row, line) in lines.enumerate() {
            let vals = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::structural(format!("row {row}: {e}")))?;
            if vals.len() != names.len() {
                return Err(Error::structural(format!(
                    "row {row} has {} values, header has {}",
                    vals.len(),
                    names.len()
                )));
            }
            points.push([vals[0], vals[1]]);
            for (c, v) in columns.iter_mut().zip(&vals[2..]) {
                c.push(*v);
            }
        }
        if points.is_empty() {
            return Err(Error::structural("field file has no rows"));
        }
        let nx = points.iter().take_while(|p| p[1] == points[0][1]).count();
        if points.len() % nx != 0 {
            return Err(Error::structural("rows do not form a lattice"));
        }
        let ny = points.len() / nx;
        for (i, p) in points.iter().enumerate() {
            if p[0] != points[i % nx][0] || p[1] != points[(i / nx) * nx][1] {
                return Err(Error::structural(format!("row {i} breaks the lattice layout")));
            }
        }
        let mut grid = FieldGrid::new(nx, ny, points, Provenance::Unknown)?;
        for (name, c) in names[2..].iter().zip(columns) {
            grid.push_column(name, c)?;
        }
        Ok(grid)
    }

    /// Bilinear interpolation of every column at `p` (clamped to the
    /// lattice extent).
    fn interpolate_with(&self, xs: &[f64], ys: &[f64], p: [f64; 2]) -> Vec<f64> {
        let locate = |axis: &[f64], v: f64| -> (usize, f64) {
            if axis.len() == 1 {
                return (0, 0.0);
            }
            let i = axis.partition_point(|&a| a <= v).clamp(1, axis.len() - 1) - 1;
            let t = ((v - axis[i]) / (axis[i + 1] - axis[i])).clamp(0.0, 1.0);
            (i, t)
        };
        let (i, tx) = locate(xs, p[0]);
        let (j, ty) = locate(ys, p[1]);
        let i1 = (i + 1).min(self.nx - 1);
        let j1 = (j + 1).min(self.ny - 1);
        let idx = |i: usize, j: usize| j * self.nx + i;
        self.columns
            .iter()
            .map(|c| {
                let a = c[idx(i, j)] * (1.0 - tx) + c[idx(i1, j)] * tx;
                let b = c[idx(i, j1)] * (1.0 - tx) + c[idx(i1, j1)] * tx;
                a * (1.0 - ty) + b * ty
            })
            .collect()
    }

    /// Values of every column at `p` by bilinear interpolation.
    pub fn interpolate(&self, p: [f64; 2]) -> Vec<f64> {
        self.interpolate_with(&self.xs(), &self.ys(), p)
    }

    /// This grid interpolated onto the lattice `points` (`nx x ny`).
    pub fn resample(&self, points: &[[f64; 2]], nx: usize, ny: usize) -> Result<FieldGrid> {
        let (xs, ys) = (self.xs(), self.ys());
        let mut cols = vec![Vec::with_capacity(points.len()); self.columns.len()];
        for &p in points {
            for (c, v) in cols.iter_mut().zip(self.interpolate_with(&xs, &ys, p)) {
                c.push(v);
            }
        }
        let mut out = FieldGrid::new(nx, ny, points.to_vec(), self.provenance)?;
        for (n, c) in self.names.iter().zip(cols) {
            out.push_column(n, c)?;
        }
        Ok(out)
    }

    /// Values along the vertical line `x = x0` at each lattice row, as
    /// `(y, values)` pairs.
    pub fn section_x(&self, x0: f64) -> Vec<(f64, Vec<f64>)> {
        let (xs, ys) = (self.xs(), self.ys());
        ys.iter()
            .map(|&y| (y, self.interpolate_with(&xs, &ys, [x0, y])))
            .collect()
    }
}

/// Components reported together, normalized by the largest reference
/// magnitude over the whole group.
pub const FIELD_GROUPS: [(&str, &[&str]); 4] = [
    ("displacement", &["u_x", "u_y"]),
    ("stress", &["sigma_x", "sigma_y", "sigma_xy"]),
    ("temperature", &["T"]),
    ("flux", &["q_x", "q_y"]),
];

/// Reference magnitudes at or below this are treated as zero and the
/// field is reported in absolute terms.
pub const NORMALIZATION_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDiff {
    pub name: String,
    pub max: f64,
    pub mean: f64,
    /// `false` when the reference field is identically (near) zero and the
    /// numbers are absolute differences.
    pub relative: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffReport {
    pub fields: Vec<FieldDiff>,
    pub groups: Vec<FieldDiff>,
    /// Pointwise normalized differences, one column per field.
    pub pointwise: FieldGrid,
}

impl DiffReport {
    pub fn field(&self, name: &str) -> Option<&FieldDiff> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn group(&self, name: &str) -> Option<&FieldDiff> {
        self.groups.iter().find(|f| f.name == name)
    }

    /// Summary CSV: `name,kind,max,mean,normalization`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,kind,max,mean,normalization\n");
        for (kind, list) in [("field", &self.fields), ("group", &self.groups)] {
            for f in list {
                let _ = writeln!(
                    out,
                    "{},{kind},{:.16e},{:.16e},{}",
                    f.name,
                    f.max,
                    f.mean,
                    if f.relative { "relative" } else { "absolute" }
                );
            }
        }
        out
    }
}

fn stats(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut max, mut sum, mut n) = (0.0f64, 0.0, 0usize);
    for v in values {
        max = max.max(v);
        sum += v;
        n += 1;
    }
    (max, if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Pointwise `|a - b| / max|b|` per field (`b` is the reference), with
/// max/mean per field and per pooled group.
pub fn compare(a: &FieldGrid, b: &FieldGrid) -> Result<DiffReport> {
    if a.nx != b.nx || a.ny != b.ny {
        return Err(Error::structural(format!(
            "grid {}x{} against {}x{}",
            a.nx, a.ny, b.nx, b.ny
        )));
    }
    let tol = 1e-9 * (1.0 + b.points.iter().fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs())));
    if a.points.iter().zip(&b.points).any(|(p, q)| (p[0] - q[0]).abs() > tol || (p[1] - q[1]).abs() > tol) {
        return Err(Error::structural("grids have different point coordinates"));
    }
    if a.names != b.names {
        return Err(Error::structural(format!(
            "column sets differ: {:?} vs {:?}",
            a.names, b.names
        )));
    }
    let scale_of = |c: &[f64]| c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut pointwise = FieldGrid::new(a.nx, a.ny, b.points.clone(), b.provenance)?;
    let mut fields = Vec::new();
    for (i, name) in a.names.iter().enumerate() {
        let (ca, cb) = (&a.columns[i], &b.columns[i]);
        let scale = scale_of(cb);
        let relative = scale > NORMALIZATION_FLOOR;
        let div = if relative { scale } else { 1.0 };
        let d: Vec<f64> = ca.iter().zip(cb).map(|(x, y)| (x - y).abs() / div).collect();
        let (max, mean) = stats(d.iter().copied());
        fields.push(FieldDiff {
            name: name.clone(),
            max,
            mean,
            relative,
        });
        pointwise.push_column(name, d)?;
    }
    let mut groups = Vec::new();
    for (group, members) in FIELD_GROUPS {
        let idx: Option<Vec<usize>> = members.iter().map(|m| a.names.iter().position(|n| n == m)).collect();
        let Some(idx) = idx else { continue };
        let scale = idx.iter().map(|&i| scale_of(&b.columns[i])).fold(0.0, f64::max);
        let relative = scale > NORMALIZATION_FLOOR;
        let div = if relative { scale } else { 1.0 };
        let (max, mean) = stats(
            idx.iter()
                .flat_map(|&i| a.columns[i].iter().zip(&b.columns[i]).map(move |(x, y)| (x - y).abs() / div)),
        );
        groups.push(FieldDiff {
            name: group.to_string(),
            max,
            mean,
            relative,
        });
    }
    Ok(DiffReport {
        fields,
        groups,
        pointwise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::eval_grid;
    use approx::assert_relative_eq;

    fn grid(values: impl Fn([f64; 2]) -> [f64; 2]) -> FieldGrid {
        let pts = eval_grid(1.0, 2.0, 4, 3).unwrap();
        let mut g = FieldGrid::new(4, 3, pts.clone(), Provenance::Fem).unwrap();
        g.push_column("u_x", pts.iter().map(|&p| values(p)[0]).collect()).unwrap();
        g.push_column("u_y", pts.iter().map(|&p| values(p)[1]).collect()).unwrap();
        g
    }

    #[test]
    fn self_comparison_is_zero() {
        let g = grid(|p| [p[0] * 0.3, p[1].sin()]);
        let r = compare(&g, &g).unwrap();
        assert!(r.fields.iter().all(|f| f.max == 0.0 && f.mean == 0.0));
        assert_eq!(r.group("displacement").unwrap().max, 0.0);
    }

    #[test]
    fn constant_ten_percent() {
        let a = grid(|_| [2.2, 1.0]);
        let b = grid(|_| [2.0, 1.0]);
        let r = compare(&a, &b).unwrap();
        let f = r.field("u_x").unwrap();
        assert_relative_eq!(f.max, 0.1, max_relative = 1e-12);
        assert_relative_eq!(f.mean, 0.1, max_relative = 1e-12);
        // pooled: mismatch 0.2 over group scale 2.0 on half the entries
        let g = r.group("displacement").unwrap();
        assert_relative_eq!(g.max, 0.1, max_relative = 1e-12);
        assert_relative_eq!(g.mean, 0.05, max_relative = 1e-12);
    }

    #[test]
    fn zero_reference_falls_back_to_absolute() {
        let a = grid(|_| [0.5, 0.01]);
        let b = grid(|_| [0.5, 0.0]);
        let f = compare(&a, &b).unwrap().field("u_y").unwrap().clone();
        assert!(!f.relative);
        assert_relative_eq!(f.max, 0.01);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = grid(|_| [0.0, 0.0]);
        let pts = eval_grid(1.0, 2.0, 3, 4).unwrap();
        let b = FieldGrid::new(3, 4, pts, Provenance::Fem).unwrap();
        assert!(compare(&a, &b).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = grid(|p| [p[0] / 3.0, (p[1] * 7.1).exp()]);
        let back = FieldGrid::parse(&g.to_csv()).unwrap();
        assert_eq!(back.nx(), 4);
        assert_eq!(back.ny(), 3);
        assert_eq!(back.column("u_y"), g.column("u_y"));
        let r = compare(&back, &g).unwrap();
        assert!(r.fields.iter().all(|f| f.max == 0.0));
    }

    #[test]
    fn bilinear_reproduces_bilinear_fields() {
        let f = |p: [f64; 2]| [1.0 + 2.0 * p[0] - p[1] + 0.5 * p[0] * p[1], 3.0];
        let g = grid(f);
        let target = eval_grid(1.0, 2.0, 7, 5).unwrap();
        let r = g.resample(&target, 7, 5).unwrap();
        for (i, p) in target.iter().enumerate() {
            assert_relative_eq!(r.column("u_x").unwrap()[i], f(*p)[0], max_relative = 1e-13);
        }
        let sec = g.section_x(0.5);
        assert_eq!(sec.len(), 3);
        assert_relative_eq!(sec[1].1[0], f([0.5, 1.0])[0], max_relative = 1e-13);
    }
}
