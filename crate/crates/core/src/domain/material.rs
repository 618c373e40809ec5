use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PhaseMap;
use crate::error::{Error, Result};

/// Per-phase constants: Young's modulus (GPa), Poisson ratio and thermal
/// conductivity (W/mK).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
    pub k: f64,
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if !(self.e > 0.0 && self.e.is_finite()) {
            return Err(Error::config(format!("Young's modulus must be positive, got {}", self.e)));
        }
        if !(0.0..0.5).contains(&self.nu) {
            return Err(Error::config(format!(
                "Poisson ratio must lie in [0, 0.5), got {}",
                self.nu
            )));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::config(format!("conductivity must be positive, got {}", self.k)));
        }
        Ok(())
    }

    /// Plane-strain stiffness coefficients `(C11, C12, mu)` so that
    /// `sigma_x = C11 eps_x + C12 eps_y`, `sigma_y = C12 eps_x + C11 eps_y`
    /// and `sigma_xy = 2 mu eps_xy` (tensorial shear strain).
    pub fn plane_strain(&self) -> (f64, f64, f64) {
        let f = self.e / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu));
        (f * (1.0 - self.nu), f * self.nu, self.e / (2.0 * (1.0 + self.nu)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialTable {
    phases: BTreeMap<u32, Material>,
}

impl Default for MaterialTable {
    /// Matrix (phase 1) and inclusion (phase 2) constants of the reference
    /// benchmark.
    fn default() -> Self {
        let mut phases = BTreeMap::new();
        phases.insert(1, Material { e: 0.5, nu: 0.3, k: 1.0 });
        phases.insert(2, Material { e: 1.0, nu: 0.3, k: 0.5 });
        MaterialTable { phases }
    }
}

impl MaterialTable {
    pub fn new(phases: BTreeMap<u32, Material>) -> Result<Self> {
        for m in phases.values() {
            m.validate()?;
        }
        Ok(MaterialTable { phases })
    }

    pub fn uniform(phase: u32, material: Material) -> Result<Self> {
        Self::new(BTreeMap::from([(phase, material)]))
    }

    pub fn get(&self, phase: u32) -> Option<Material> {
        self.phases.get(&phase).copied()
    }

    pub fn phases(&self) -> &BTreeMap<u32, Material> {
        &self.phases
    }

    pub fn validate(&self) -> Result<()> {
        for m in self.phases.values() {
            m.validate()?;
        }
        Ok(())
    }

    /// Every cell id of `map` must have an entry.
    pub fn check_covers(&self, map: &PhaseMap) -> Result<()> {
        self.validate()?;
        for id in map.phases() {
            if !self.phases.contains_key(&id) {
                return Err(Error::config(format!("phase {id} has no material entry")));
            }
        }
        Ok(())
    }
}

/// Candidate cell indices along one axis: one cell inside, two on an
/// internal grid line, one on the outer boundary.
fn axis_cells(coord: f64, length: f64, n: usize) -> Result<Vec<usize>> {
    let tol = 1e-9 * length;
    if coord < -tol || coord > length + tol {
        return Err(Error::Domain(format!(
            "coordinate {coord} outside [0, {length}]"
        )));
    }
    let h = length / n as f64;
    let s = coord / h;
    let line = s.round();
    if (coord - line * h).abs() <= tol {
        let line = line as isize;
        Ok([line - 1, line]
            .into_iter()
            .filter(|&c| c >= 0 && c < n as isize)
            .map(|c| c as usize)
            .collect())
    } else {
        Ok(vec![(s.floor() as usize).min(n - 1)])
    }
}

/// Material at a point: a cell's own values strictly inside it, and the
/// arithmetic mean over all adjacent cells on shared edges (two cells) or
/// corners (up to four).
pub fn material_at_point(map: &PhaseMap, table: &MaterialTable, point: [f64; 2]) -> Result<Material> {
    let cols = axis_cells(point[0], map.lx(), map.nx())?;
    let rows = axis_cells(point[1], map.ly(), map.ny())?;
    let mut acc = Material { e: 0.0, nu: 0.0, k: 0.0 };
    let mut n = 0usize;
    for &j in &rows {
        for &i in &cols {
            let id = map.cell(i, j);
            let m = table
                .get(id)
                .ok_or_else(|| Error::config(format!("phase {id} has no material entry")))?;
            acc.e += m.e;
            acc.nu += m.nu;
            acc.k += m.k;
            n += 1;
        }
    }
    let n = n as f64;
    Ok(Material {
        e: acc.e / n,
        nu: acc.nu / n,
        k: acc.k / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_phase() -> PhaseMap {
        // left column phase 1, right column phase 2
        PhaseMap::parse("2 2 1 1\n1 2\n1 2\n").unwrap()
    }

    #[test]
    fn interior_of_phase_one_cell() {
        let m = material_at_point(&two_phase(), &MaterialTable::default(), [0.2, 0.3]).unwrap();
        assert_eq!(m, Material { e: 0.5, nu: 0.3, k: 1.0 });
    }

    #[test]
    fn shared_edge_is_averaged() {
        let m = material_at_point(&two_phase(), &MaterialTable::default(), [0.5, 0.3]).unwrap();
        assert_relative_eq!(m.e, 0.75);
        assert_relative_eq!(m.k, 0.75);
        assert_relative_eq!(m.nu, 0.3);
    }

    #[test]
    fn corner_of_identical_cells_is_exact() {
        let map = PhaseMap::homogeneous(4, 4, 1.0, 1.0, 1).unwrap();
        let m = material_at_point(&map, &MaterialTable::default(), [0.5, 0.25]).unwrap();
        assert_eq!(m, MaterialTable::default().get(1).unwrap());
    }

    #[test]
    fn four_cell_corner_mean() {
        let map = PhaseMap::parse("2 2 1 1\n1 2\n2 2\n").unwrap();
        let m = material_at_point(&map, &MaterialTable::default(), [0.5, 0.5]).unwrap();
        assert_relative_eq!(m.e, (0.5 + 3.0) / 4.0);
    }

    #[test]
    fn tolerance_snaps_to_grid_line() {
        let m = material_at_point(&two_phase(), &MaterialTable::default(), [0.5 + 5e-10, 0.3]).unwrap();
        assert_relative_eq!(m.e, 0.75);
        let m = material_at_point(&two_phase(), &MaterialTable::default(), [0.5 + 1e-8, 0.3]).unwrap();
        assert_eq!(m.e, 1.0);
    }

    #[test]
    fn outer_boundary_uses_single_cell() {
        let m = material_at_point(&two_phase(), &MaterialTable::default(), [1.0, 0.3]).unwrap();
        assert_eq!(m.e, 1.0);
        let m = material_at_point(&two_phase(), &MaterialTable::default(), [0.0, 0.0]).unwrap();
        assert_eq!(m.e, 0.5);
    }

    #[test]
    fn outside_is_domain_error() {
        assert!(matches!(
            material_at_point(&two_phase(), &MaterialTable::default(), [1.1, 0.3]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn invalid_materials_rejected() {
        assert!(Material { e: 0.0, nu: 0.3, k: 1.0 }.validate().is_err());
        assert!(Material { e: 1.0, nu: 0.5, k: 1.0 }.validate().is_err());
        assert!(Material { e: 1.0, nu: 0.3, k: -1.0 }.validate().is_err());
    }

    #[test]
    fn missing_phase_entry_detected() {
        let map = PhaseMap::parse("2 1 1 1\n1 7\n").unwrap();
        assert!(MaterialTable::default().check_covers(&map).is_err());
    }
}
