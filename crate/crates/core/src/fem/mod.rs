//! Q1 finite-element reference solver on the pixel lattice.

mod element;
mod sparse;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

pub use element::{elastic_stiffness, gauss_points, gauss_to_nodes, plane_strain_matrix, thermal_stiffness};
pub use sparse::{pcg, CsrMatrix};

use crate::domain::{BoundarySpec, Condition, Edge, Material, MaterialTable, PhaseMap};
use crate::error::{Error, Result};
use crate::field::{FieldGrid, Provenance};
use crate::network::Problem;
use crate::pinn::{DEFORMATION_SCALE, ELASTIC_COLUMNS, THERMAL_COLUMNS};

/// Reduced systems with fewer free unknowns than this are solved densely.
pub const DENSE_LIMIT: usize = 2000;
pub const CG_TOLERANCE: f64 = 1e-10;

/// Structured mesh of `nx x ny` rectangular elements over `[0, lx] x [0, ly]`
/// with one material per element. Node `(i, j)` has index `j (nx + 1) + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FemMesh {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    materials: Vec<Material>,
}

impl FemMesh {
    /// One element per pixel, or `refine x refine` elements per pixel.
    pub fn from_phase_map(map: &PhaseMap, table: &MaterialTable, refine: usize) -> Result<Self> {
        if refine == 0 {
            return Err(Error::config("mesh refinement factor must be at least 1"));
        }
        table.check_covers(map)?;
        let (nx, ny) = (map.nx() * refine, map.ny() * refine);
        let mut materials = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let id = map.cell(i / refine, j / refine);
                materials.push(table.get(id).expect("coverage checked"));
            }
        }
        Ok(FemMesh {
            nx,
            ny,
            lx: map.lx(),
            ly: map.ly(),
            materials,
        })
    }

    pub fn uniform(nx: usize, ny: usize, lx: f64, ly: f64, material: Material) -> Result<Self> {
        material.validate()?;
        if nx == 0 || ny == 0 {
            return Err(Error::structural("mesh needs at least one element"));
        }
        Ok(FemMesh {
            nx,
            ny,
            lx,
            ly,
            materials: vec![material; nx * ny],
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn num_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn element_size(&self) -> (f64, f64) {
        (self.lx / self.nx as f64, self.ly / self.ny as f64)
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn node_coords(&self, n: usize) -> [f64; 2] {
        let (i, j) = (n % (self.nx + 1), n / (self.nx + 1));
        [
            i as f64 * self.lx / self.nx as f64,
            j as f64 * self.ly / self.ny as f64,
        ]
    }

    /// Counterclockwise node indices of element `(i, j)`.
    pub fn element_nodes(&self, i: usize, j: usize) -> [usize; 4] {
        [
            self.node(i, j),
            self.node(i + 1, j),
            self.node(i + 1, j + 1),
            self.node(i, j + 1),
        ]
    }

    pub fn material(&self, i: usize, j: usize) -> &Material {
        &self.materials[j * self.nx + i]
    }

    /// Nodes on an edge in increasing arc order, corners included.
    pub fn edge_nodes(&self, e: Edge) -> Vec<usize> {
        match e {
            Edge::Left => (0..=self.ny).map(|j| self.node(0, j)).collect(),
            Edge::Right => (0..=self.ny).map(|j| self.node(self.nx, j)).collect(),
            Edge::Bottom => (0..=self.nx).map(|i| self.node(i, 0)).collect(),
            Edge::Top => (0..=self.nx).map(|i| self.node(i, self.ny)).collect(),
        }
    }
}

fn components(physics: Problem) -> usize {
    match physics {
        Problem::Elastic => 2,
        Problem::Thermal => 1,
    }
}

/// Global stiffness, load vector and prescribed values (dof -> value).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constraints: BTreeMap<usize, f64>,
    pub dofs_per_node: usize,
}

pub fn assemble(mesh: &FemMesh, physics: Problem) -> Result<SparseSystem> {
    let d = components(physics);
    let (dx, dy) = mesh.element_size();
    let per = (4 * d) * (4 * d);
    let mut triplets = Vec::with_capacity(mesh.num_elements() * per);
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            let nodes = mesh.element_nodes(i, j);
            let m = mesh.material(i, j);
            match physics {
                Problem::Thermal => {
                    let ke = thermal_stiffness(m.k, dx, dy);
                    for a in 0..4 {
                        for b in 0..4 {
                            triplets.push((nodes[a], nodes[b], ke[a][b]));
                        }
                    }
                }
                Problem::Elastic => {
                    let ke = elastic_stiffness(m, dx, dy);
                    for a in 0..8 {
                        for b in 0..8 {
                            triplets.push((2 * nodes[a / 2] + a % 2, 2 * nodes[b / 2] + b % 2, ke[a][b]));
                        }
                    }
                }
            }
        }
    }
    let n = mesh.num_nodes() * d;
    Ok(SparseSystem {
        matrix: CsrMatrix::from_triplets(n, &triplets)?,
        rhs: vec![0.0; n],
        constraints: BTreeMap::new(),
        dofs_per_node: d,
    })
}

/// Adds consistent edge loads for Neumann data and records Dirichlet
/// values. A node shared by a Dirichlet and a Neumann edge is
/// constrained; between two Dirichlet edges the first in
/// left/right/bottom/top order wins. Thermal Neumann data is the outward
/// normal flux `q.n`, elastic Neumann data the traction component.
pub fn apply_boundary(system: &mut SparseSystem, mesh: &FemMesh, bcs: &BoundarySpec) -> Result<()> {
    let d = system.dofs_per_node;
    bcs.validate(d)?;
    let sign = if d == 1 { -1.0 } else { 1.0 };
    for e in Edge::ALL {
        let nodes = mesh.edge_nodes(e);
        for (c, cond) in bcs.edge(e).iter().enumerate() {
            if let Condition::Neumann(v) = *cond {
                for w in nodes.windows(2) {
                    let (p, q) = (mesh.node_coords(w[0]), mesh.node_coords(w[1]));
                    let h = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                    system.rhs[w[0] * d + c] += sign * v * h / 2.0;
                    system.rhs[w[1] * d + c] += sign * v * h / 2.0;
                }
            }
        }
    }
    for e in Edge::ALL {
        for (c, cond) in bcs.edge(e).iter().enumerate() {
            if let Condition::Dirichlet(v) = *cond {
                for n in mesh.edge_nodes(e) {
                    system.constraints.entry(n * d + c).or_insert(v);
                }
            }
        }
    }
    Ok(())
}

/// Eliminates constrained dofs and solves the reduced system, densely by
/// Cholesky below [`DENSE_LIMIT`] free unknowns and by Jacobi-preconditioned
/// CG otherwise. Returns the full dof vector.
pub fn solve(system: &SparseSystem) -> Result<Vec<f64>> {
    let n = system.matrix.n();
    let mut x = vec![0.0; n];
    for (&dof, &v) in &system.constraints {
        x[dof] = v;
    }
    let free: Vec<usize> = (0..n).filter(|i| !system.constraints.contains_key(i)).collect();
    if free.is_empty() {
        return Ok(x);
    }
    let mut kx = vec![0.0; n];
    system.matrix.matvec(&x, &mut kx);
    let rhs: Vec<f64> = free.iter().map(|&i| system.rhs[i] - kx[i]).collect();
    let reduced = system.matrix.submatrix(&free);
    let sol = if free.len() < DENSE_LIMIT {
        let m = free.len();
        let mut dense = DMatrix::<f64>::zeros(m, m);
        for r in 0..m {
            for (c, v) in reduced.row(r) {
                dense[(r, c)] = v;
            }
        }
        let chol = dense
            .cholesky()
            .ok_or_else(|| Error::Solver("reduced stiffness is not positive definite".into()))?;
        chol.solve(&DVector::from_vec(rhs)).iter().copied().collect::<Vec<_>>()
    } else {
        pcg(&reduced, &rhs, CG_TOLERANCE, 20 * free.len())?.0
    };
    for (&i, v) in free.iter().zip(sol) {
        x[i] = v;
    }
    Ok(x)
}

/// `K x - f`: reaction forces at constrained dofs, residual elsewhere.
pub fn reactions(system: &SparseSystem, x: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; x.len()];
    system.matrix.matvec(x, &mut r);
    r.iter_mut().zip(&system.rhs).for_each(|(r, f)| *r -= f);
    r
}

/// Stored energy `x.K x / 2`.
pub fn strain_energy(system: &SparseSystem, x: &[f64]) -> f64 {
    let mut kx = vec![0.0; x.len()];
    system.matrix.matvec(x, &mut kx);
    0.5 * x.iter().zip(&kx).map(|(a, b)| a * b).sum::<f64>()
}

/// Nodal fields: primary values directly, stresses/fluxes evaluated at Gauss
/// points, extrapolated to element nodes and averaged over the elements
/// sharing each node. The column set matches the network evaluation
/// (derived-stress/flux columns duplicate the recovered ones).
pub fn recover_fields(mesh: &FemMesh, x: &[f64], physics: Problem) -> Result<FieldGrid> {
    let d = components(physics);
    if x.len() != mesh.num_nodes() * d {
        return Err(Error::structural("nodal vector does not match the mesh"));
    }
    let n_flux = if d == 2 { 3 } else { 2 };
    let (dx, dy) = mesh.element_size();
    let mut sums = vec![vec![0.0; mesh.num_nodes()]; n_flux];
    let mut counts = vec![0usize; mesh.num_nodes()];
    for j in 0..mesh.ny {
        for i in 0..mesh.nx {
            let nodes = mesh.element_nodes(i, j);
            let m = mesh.material(i, j);
            let mut at_gauss = vec![[0.0; 4]; n_flux];
            for (g, [xi, eta]) in gauss_points().into_iter().enumerate() {
                let grads = element::shape_gradients(xi, eta, dx, dy);
                if d == 1 {
                    let (mut tx, mut ty) = (0.0, 0.0);
                    for a in 0..4 {
                        tx += grads[a][0] * x[nodes[a]];
                        ty += grads[a][1] * x[nodes[a]];
                    }
                    at_gauss[0][g] = -m.k * tx;
                    at_gauss[1][g] = -m.k * ty;
                } else {
                    let b = element::strain_matrix(&grads);
                    let dm = plane_strain_matrix(m);
                    let mut eps = [0.0; 3];
                    for (r, row) in b.iter().enumerate() {
                        for a in 0..8 {
                            eps[r] += row[a] * x[2 * nodes[a / 2] + a % 2];
                        }
                    }
                    for r in 0..3 {
                        at_gauss[r][g] = (0..3).map(|k| dm[r][k] * eps[k]).sum();
                    }
                }
            }
            for (f, vals) in at_gauss.into_iter().enumerate() {
                for (a, v) in gauss_to_nodes(vals).into_iter().enumerate() {
                    sums[f][nodes[a]] += v;
                }
            }
            for n in nodes {
                counts[n] += 1;
            }
        }
    }
    for s in &mut sums {
        s.iter_mut().zip(&counts).for_each(|(v, &c)| *v /= c as f64);
    }
    let points: Vec<[f64; 2]> = (0..mesh.num_nodes()).map(|n| mesh.node_coords(n)).collect();
    let mut grid = FieldGrid::new(mesh.nx + 1, mesh.ny + 1, points.clone(), Provenance::Fem)?;
    if d == 1 {
        let cols = [x.to_vec(), sums[0].clone(), sums[1].clone(), sums[0].clone(), sums[1].clone()];
        for (name, c) in THERMAL_COLUMNS.iter().zip(cols) {
            grid.push_column(name, c)?;
        }
    } else {
        let ux: Vec<f64> = (0..mesh.num_nodes()).map(|n| x[2 * n]).collect();
        let uy: Vec<f64> = (0..mesh.num_nodes()).map(|n| x[2 * n + 1]).collect();
        let xdef = points.iter().zip(&ux).map(|(p, u)| p[0] + DEFORMATION_SCALE * u).collect();
        let ydef = points.iter().zip(&uy).map(|(p, u)| p[1] + DEFORMATION_SCALE * u).collect();
        let cols = [
            ux,
            uy,
            sums[0].clone(),
            sums[1].clone(),
            sums[2].clone(),
            sums[0].clone(),
            sums[1].clone(),
            sums[2].clone(),
            xdef,
            ydef,
        ];
        for (name, c) in ELASTIC_COLUMNS.iter().zip(cols) {
            grid.push_column(name, c)?;
        }
    }
    Ok(grid)
}

/// Mesh, assemble, constrain, solve and recover in one call.
pub fn solve_fem(
    map: &PhaseMap,
    table: &MaterialTable,
    bcs: &BoundarySpec,
    physics: Problem,
    refine: usize,
) -> Result<FieldGrid> {
    let mesh = FemMesh::from_phase_map(map, table, refine)?;
    let mut system = assemble(&mesh, physics)?;
    apply_boundary(&mut system, &mesh, bcs)?;
    let x = solve(&system)?;
    recover_fields(&mesh, &x, physics)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAT: Material = Material { e: 0.5, nu: 0.3, k: 1.0 };

    #[test]
    fn global_matrix_symmetric() {
        let map = PhaseMap::square_inclusion();
        let mesh = FemMesh::from_phase_map(&map, &MaterialTable::default(), 1).unwrap();
        for p in [Problem::Thermal, Problem::Elastic] {
            assert!(assemble(&mesh, p).unwrap().matrix.is_symmetric());
        }
    }

    #[test]
    fn thermal_patch_test() {
        let mesh = FemMesh::uniform(5, 4, 1.0, 1.0, MAT).unwrap();
        let mut sys = assemble(&mesh, Problem::Thermal).unwrap();
        let f = |p: [f64; 2]| 0.3 + 1.7 * p[0] - 0.4 * p[1];
        for e in Edge::ALL {
            for n in mesh.edge_nodes(e) {
                sys.constraints.insert(n, f(mesh.node_coords(n)));
            }
        }
        let x = solve(&sys).unwrap();
        for n in 0..mesh.num_nodes() {
            assert!((x[n] - f(mesh.node_coords(n))).abs() < 1e-10);
        }
    }

    #[test]
    fn one_dimensional_conduction() {
        let map = PhaseMap::homogeneous(8, 8, 1.0, 1.0, 1).unwrap();
        let grid = solve_fem(&map, &MaterialTable::default(), &BoundarySpec::thermal(1.0, 0.0), Problem::Thermal, 1)
            .unwrap();
        for (p, t) in grid.points().iter().zip(grid.column("T").unwrap()) {
            assert!((t - (1.0 - p[0])).abs() < 1e-10);
        }
        assert!(grid.column("q_x").unwrap().iter().all(|q| (q - 1.0).abs() < 1e-10));
    }

    #[test]
    fn elastic_patch_test() {
        let mesh = FemMesh::uniform(4, 4, 1.0, 1.0, MAT).unwrap();
        let mut sys = assemble(&mesh, Problem::Elastic).unwrap();
        let u = |p: [f64; 2]| [0.01 + 0.02 * p[0] + 0.005 * p[1], -0.01 * p[0] + 0.03 * p[1]];
        for e in Edge::ALL {
            for n in mesh.edge_nodes(e) {
                let v = u(mesh.node_coords(n));
                sys.constraints.insert(2 * n, v[0]);
                sys.constraints.insert(2 * n + 1, v[1]);
            }
        }
        let x = solve(&sys).unwrap();
        let grid = recover_fields(&mesh, &x, Problem::Elastic).unwrap();
        let (c11, c12, mu) = MAT.plane_strain();
        let sx = c11 * 0.02 + c12 * 0.03;
        let sxy = mu * (0.005 - 0.01);
        for i in 0..grid.len() {
            assert!((grid.column("sigma_x").unwrap()[i] - sx).abs() < 1e-9);
            assert!((grid.column("sigma_xy").unwrap()[i] - sxy).abs() < 1e-9);
        }
    }

    #[test]
    fn reactions_balance() {
        let map = PhaseMap::square_inclusion();
        let mesh = FemMesh::from_phase_map(&map, &MaterialTable::default(), 1).unwrap();
        let mut sys = assemble(&mesh, Problem::Elastic).unwrap();
        apply_boundary(&mut sys, &mesh, &BoundarySpec::tension(0.05)).unwrap();
        let x = solve(&sys).unwrap();
        let r = reactions(&sys, &x);
        let left: f64 = mesh.edge_nodes(Edge::Left).iter().map(|n| r[2 * n]).sum();
        let right: f64 = mesh.edge_nodes(Edge::Right).iter().map(|n| r[2 * n]).sum();
        assert!(right > 0.0);
        assert!((left + right).abs() <= 1e-8 * right.abs(), "{left} {right}");
    }

    #[test]
    fn dense_and_iterative_agree() {
        let map = PhaseMap::square_inclusion();
        let mesh = FemMesh::from_phase_map(&map, &MaterialTable::default(), 1).unwrap();
        let mut sys = assemble(&mesh, Problem::Thermal).unwrap();
        apply_boundary(&mut sys, &mesh, &BoundarySpec::thermal(1.0, 0.0)).unwrap();
        let dense = solve(&sys).unwrap();
        let free: Vec<usize> = (0..sys.matrix.n()).filter(|i| !sys.constraints.contains_key(i)).collect();
        let mut kx = vec![0.0; sys.matrix.n()];
        let mut x0 = vec![0.0; sys.matrix.n()];
        for (&d, &v) in &sys.constraints {
            x0[d] = v;
        }
        sys.matrix.matvec(&x0, &mut kx);
        let rhs: Vec<f64> = free.iter().map(|&i| sys.rhs[i] - kx[i]).collect();
        let (it, _) = pcg(&sys.matrix.submatrix(&free), &rhs, 1e-12, 20 * free.len()).unwrap();
        for (&i, v) in free.iter().zip(it) {
            assert!((dense[i] - v).abs() < 1e-9);
        }
    }

    #[test]
    fn neumann_flux_enters_load() {
        // prescribed inflow on the left (q.n = -1) against T = 0 on the right
        let mesh = FemMesh::uniform(4, 2, 1.0, 1.0, MAT).unwrap();
        let mut sys = assemble(&mesh, Problem::Thermal).unwrap();
        let bcs = BoundarySpec {
            left: vec![Condition::Neumann(-1.0)],
            right: vec![Condition::Dirichlet(0.0)],
            bottom: vec![Condition::Neumann(0.0)],
            top: vec![Condition::Neumann(0.0)],
        };
        apply_boundary(&mut sys, &mesh, &bcs).unwrap();
        let x = solve(&sys).unwrap();
        for n in 0..mesh.num_nodes() {
            assert!((x[n] - (1.0 - mesh.node_coords(n)[0])).abs() < 1e-10);
        }
    }
}
