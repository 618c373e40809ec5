//! Q1 element matrices on axis-aligned rectangles with 2x2 Gauss
//! quadrature.

use crate::domain::Material;

/// Natural coordinates of the four nodes, counterclockwise from the
/// lower-left corner.
pub const NODES: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Gauss points in the same counterclockwise order as the nodes.
pub fn gauss_points() -> [[f64; 2]; 4] {
    let g = 1.0 / 3f64.sqrt();
    NODES.map(|[a, b]| [a * g, b * g])
}

/// Physical shape-function gradients `[dN/dx, dN/dy]` at natural point
/// `(xi, eta)` for a `dx x dy` rectangle.
pub fn shape_gradients(xi: f64, eta: f64, dx: f64, dy: f64) -> [[f64; 2]; 4] {
    NODES.map(|[a, b]| {
        [
            0.25 * a * (1.0 + b * eta) * 2.0 / dx,
            0.25 * b * (1.0 + a * xi) * 2.0 / dy,
        ]
    })
}

pub fn thermal_stiffness(k: f64, dx: f64, dy: f64) -> [[f64; 4]; 4] {
    let det = dx * dy / 4.0;
    let mut ke = [[0.0; 4]; 4];
    for [xi, eta] in gauss_points() {
        let g = shape_gradients(xi, eta, dx, dy);
        for a in 0..4 {
            for b in 0..4 {
                ke[a][b] += k * (g[a][0] * g[b][0] + g[a][1] * g[b][1]) * det;
            }
        }
    }
    ke
}

/// Plane-strain constitutive matrix acting on `(eps_x, eps_y, gamma_xy)`.
pub fn plane_strain_matrix(m: &Material) -> [[f64; 3]; 3] {
    let (c11, c12, mu) = m.plane_strain();
    [[c11, c12, 0.0], [c12, c11, 0.0], [0.0, 0.0, mu]]
}

/// Strain-displacement matrix for dofs ordered `(u_x, u_y)` per node;
/// the third row is the engineering shear.
pub fn strain_matrix(g: &[[f64; 2]; 4]) -> [[f64; 8]; 3] {
    let mut b = [[0.0; 8]; 3];
    for a in 0..4 {
        b[0][2 * a] = g[a][0];
        b[1][2 * a + 1] = g[a][1];
        b[2][2 * a] = g[a][1];
        b[2][2 * a + 1] = g[a][0];
    }
    b
}

pub fn elastic_stiffness(m: &Material, dx: f64, dy: f64) -> [[f64; 8]; 8] {
    let d = plane_strain_matrix(m);
    let det = dx * dy / 4.0;
    let mut ke = [[0.0; 8]; 8];
    for [xi, eta] in gauss_points() {
        let b = strain_matrix(&shape_gradients(xi, eta, dx, dy));
        let mut db = [[0.0; 8]; 3];
        for i in 0..3 {
            for j in 0..8 {
                db[i][j] = (0..3).map(|k| d[i][k] * b[k][j]).sum();
            }
        }
        for i in 0..8 {
            for j in i..8 {
                ke[i][j] += (0..3).map(|k| b[k][i] * db[k][j]).sum::<f64>() * det;
            }
        }
    }
    for i in 0..8 {
        for j in 0..i {
            ke[i][j] = ke[j][i];
        }
    }
    ke
}

/// Extrapolates values at the four Gauss points to the four nodes by the
/// bilinear interpolant through the Gauss points.
pub fn gauss_to_nodes(values: [f64; 4]) -> [f64; 4] {
    let s = 3f64.sqrt();
    NODES.map(|[xi, eta]| {
        let (u, v) = (xi * s, eta * s);
        NODES
            .iter()
            .zip(values)
            .map(|([a, b], val)| 0.25 * (1.0 + a * u) * (1.0 + b * v) * val)
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_laplacian_element() {
        let ke = thermal_stiffness(1.0, 1.0, 1.0);
        let expected = [
            [4.0, -1.0, -2.0, -1.0],
            [-1.0, 4.0, -1.0, -2.0],
            [-2.0, -1.0, 4.0, -1.0],
            [-1.0, -2.0, -1.0, 4.0],
        ];
        for a in 0..4 {
            for b in 0..4 {
                assert_relative_eq!(ke[a][b], expected[a][b] / 6.0, epsilon = 1e-15);
            }
            assert!(ke[a].iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn rigid_modes_in_kernel() {
        let m = Material { e: 0.7, nu: 0.3, k: 1.0 };
        let ke = elastic_stiffness(&m, 0.25, 0.5);
        let (dx, dy) = (0.25, 0.5);
        let coords = NODES.map(|[a, b]| [(a + 1.0) * dx / 2.0, (b + 1.0) * dy / 2.0]);
        let tx = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        let ty = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let mut rot = [0.0; 8];
        for a in 0..4 {
            rot[2 * a] = -coords[a][1];
            rot[2 * a + 1] = coords[a][0];
        }
        for mode in [tx, ty, rot] {
            for row in &ke {
                let r: f64 = row.iter().zip(&mode).map(|(k, u)| k * u).sum();
                assert!(r.abs() < 1e-14, "{r}");
            }
        }
        for i in 0..8 {
            for j in 0..8 {
                assert_eq!(ke[i][j], ke[j][i]);
            }
        }
    }

    #[test]
    fn extrapolation_reproduces_bilinear() {
        let f = |p: [f64; 2]| 1.0 + 2.0 * p[0] - 0.5 * p[1] + 0.3 * p[0] * p[1];
        let at_nodes = gauss_to_nodes(gauss_points().map(f));
        for (v, n) in at_nodes.iter().zip(NODES) {
            assert_relative_eq!(*v, f(n), epsilon = 1e-14);
        }
    }
}
