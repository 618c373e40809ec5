//! Plane-strain elasticity: kinematics, constitutive law and the five loss
//! terms.

use super::{check_len, mean_over, nonempty_edge, nonempty_interior, EnergyForm, LossBreakdown};
use crate::autodiff::{Dual2, Real};
use crate::domain::{BoundarySpec, CollocationSet, Condition, Edge, Material};
use crate::error::{Error, Result};
use crate::network::{LossTerm, Variant};

/// Network outputs at one point: displacement duals and, for mixed
/// variants, the stress heads `(sigma_x, sigma_y, sigma_xy)`.
#[derive(Clone, Copy, Debug)]
pub struct ElasticPoint<T> {
    pub u: [Dual2<T>; 2],
    pub sigma: Option<[Dual2<T>; 3]>,
}

/// Everything the loss terms need at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticSample<T> {
    pub u: [T; 2],
    /// `(eps_x, eps_y, eps_xy)`, shear with the symmetric-gradient 1/2.
    pub strain: [T; 3],
    /// Stress derived from `u`.
    pub stress: [T; 3],
    /// Divergence of the stress derived from `u`; needs second-order duals.
    pub div_stress: Option<[T; 2]>,
    pub stress_heads: Option<[T; 3]>,
    pub div_heads: Option<[T; 2]>,
}

/// Which stress field a strong-form or traction term is evaluated on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StressSource {
    Heads,
    Primary,
}

/// Strain from the displacement gradient and stress through the plane-strain
/// law, `sigma_xy = 2 mu eps_xy`.
pub fn strain_stress_from_u<T: Real>(u: &[Dual2<T>; 2], m: &Material) -> ElasticSample<T> {
    let (c11, c12, mu) = m.plane_strain();
    let [ux, uy] = u;
    let ex = ux.d_x;
    let ey = uy.d_y;
    let exy = (ux.d_y + uy.d_x) * 0.5;
    let stress = [ex * c11 + ey * c12, ex * c12 + ey * c11, exy * (2.0 * mu)];
    let div_stress = (ux.is_second_order() || uy.is_second_order()).then(|| {
        // material is constant inside a cell, so only u is differentiated
        [
            ux.d_xx * c11 + uy.d_xy * c12 + (ux.d_yy + uy.d_xy) * mu,
            ux.d_xy * c12 + uy.d_yy * c11 + (ux.d_xy + uy.d_xx) * mu,
        ]
    });
    ElasticSample {
        u: [ux.value, uy.value],
        strain: [ex, ey, exy],
        stress,
        div_stress,
        stress_heads: None,
        div_heads: None,
    }
}

pub fn elastic_sample<T: Real>(point: &ElasticPoint<T>, m: &Material) -> ElasticSample<T> {
    let mut s = strain_stress_from_u(&point.u, m);
    if let Some([sx, sy, sxy]) = point.sigma {
        s.stress_heads = Some([sx.value, sy.value, sxy.value]);
        s.div_heads = Some([sx.d_x + sxy.d_y, sy.d_y + sxy.d_x]);
    }
    s
}

/// Traction `sigma . n` for a Voigt stress `(sigma_x, sigma_y, sigma_xy)`.
pub fn traction<T: Real>(s: [T; 3], n: [f64; 2]) -> [T; 2] {
    [s[0] * n[0] + s[2] * n[1], s[2] * n[0] + s[1] * n[1]]
}

fn heads<T: Real>(s: &ElasticSample<T>) -> Result<[T; 3]> {
    s.stress_heads
        .ok_or_else(|| Error::structural("variant needs stress heads but the sample has none"))
}

fn source_stress<T: Real>(s: &ElasticSample<T>, source: StressSource) -> Result<[T; 3]> {
    match source {
        StressSource::Heads => heads(s),
        StressSource::Primary => Ok(s.stress),
    }
}

/// Energy term. In literal form, the absolute value of internal energy
/// `(1/2) sigma:eps` (single shear product) against the boundary work of
/// the traction on edges with nonzero prescribed data. In signed form, the
/// total potential `(1/2) sigma:eps` (Voigt, shear counted twice) minus the
/// work of prescribed tractions.
pub fn loss_ef<T: Real>(
    set: &CollocationSet,
    bcs: &BoundarySpec,
    samples: &[ElasticSample<T>],
    form: EnergyForm,
) -> Result<T> {
    check_len(set, samples.len())?;
    let interior = nonempty_interior(set)?;
    let shear = match form {
        EnergyForm::Literal => 1.0,
        EnergyForm::SignedPotential => 2.0,
    };
    let density = mean_over(interior, |i| {
        let s = &samples[i];
        s.stress[0] * s.strain[0] + s.stress[1] * s.strain[1] + s.stress[2] * s.strain[2] * shear
    });
    let internal = density * (0.5 * set.area());
    let (lx, ly) = set.extents();
    let mut work = T::zero();
    for e in Edge::ALL {
        let n = e.outward_normal();
        let conds = bcs.edge(e);
        let active = conds.iter().any(|c| match (form, *c) {
            (EnergyForm::Literal, Condition::Dirichlet(v) | Condition::Neumann(v)) => v != 0.0,
            (EnergyForm::SignedPotential, Condition::Neumann(v)) => v != 0.0,
            _ => false,
        });
        if !active {
            continue;
        }
        let range = nonempty_edge(set, e)?;
        let edge_work = mean_over(range, |i| {
            let s = &samples[i];
            let t = traction(s.stress, n);
            let mut w = T::zero();
            for (c, cond) in conds.iter().enumerate() {
                match *cond {
                    Condition::Dirichlet(v) if v != 0.0 && form == EnergyForm::Literal => {
                        w = w + t[c] * s.u[c];
                    }
                    Condition::Neumann(v) if v != 0.0 => w = w + s.u[c] * v,
                    _ => {}
                }
            }
            w
        });
        work = work + edge_work * e.length(lx, ly);
    }
    Ok(match form {
        EnergyForm::Literal => (work - internal).abs(),
        EnergyForm::SignedPotential => internal - work,
    })
}

/// Sum over Dirichlet edges of the edge mean of squared displacement
/// mismatch on the constrained components.
pub fn loss_dbc<T: Real>(set: &CollocationSet, bcs: &BoundarySpec, samples: &[ElasticSample<T>]) -> Result<T> {
    check_len(set, samples.len())?;
    let mut total = T::zero();
    for e in Edge::ALL.into_iter().filter(|&e| bcs.has_dirichlet(e)) {
        let conds = bcs.edge(e);
        let m = mean_over(nonempty_edge(set, e)?, |i| {
            let mut r = T::zero();
            for (c, cond) in conds.iter().enumerate() {
                if let Condition::Dirichlet(v) = *cond {
                    r = r + (samples[i].u[c] - v).square();
                }
            }
            r
        });
        total = total + m;
    }
    Ok(total)
}

/// Mean over interior points of the squared mismatch between stress heads
/// and the stress derived from `u`, summed over the three components.
pub fn loss_cnc<T: Real>(set: &CollocationSet, samples: &[ElasticSample<T>]) -> Result<T> {
    check_len(set, samples.len())?;
    let range = nonempty_interior(set)?;
    for i in range.clone() {
        heads(&samples[i])?;
    }
    Ok(mean_over(range, |i| {
        let s = &samples[i];
        let h = s.stress_heads.unwrap_or(s.stress);
        (h[0] - s.stress[0]).square() + (h[1] - s.stress[1]).square() + (h[2] - s.stress[2]).square()
    }))
}

/// Mean over interior points of the squared divergence of the stress.
pub fn loss_sf<T: Real>(set: &CollocationSet, samples: &[ElasticSample<T>], source: StressSource) -> Result<T> {
    check_len(set, samples.len())?;
    let range = nonempty_interior(set)?;
    let mut divs = Vec::with_capacity(range.len());
    for i in range {
        let d = match source {
            StressSource::Heads => samples[i].div_heads,
            StressSource::Primary => samples[i].div_stress,
        };
        divs.push(d.ok_or_else(|| {
            Error::structural(match source {
                StressSource::Heads => "strong form on heads needs stress head derivatives",
                StressSource::Primary => "strong form on u needs second-order derivatives",
            })
        })?);
    }
    Ok(crate::autodiff::mean(divs.into_iter().map(|d| d[0].square() + d[1].square())))
}

/// Sum over Neumann edges of the edge mean of squared traction mismatch on
/// the traction-controlled components.
pub fn loss_nbc<T: Real>(
    set: &CollocationSet,
    bcs: &BoundarySpec,
    samples: &[ElasticSample<T>],
    source: StressSource,
) -> Result<T> {
    check_len(set, samples.len())?;
    let mut total = T::zero();
    for e in Edge::ALL.into_iter().filter(|&e| bcs.has_neumann(e)) {
        let n = e.outward_normal();
        let conds = bcs.edge(e);
        let range = nonempty_edge(set, e)?;
        let mut terms = Vec::with_capacity(range.len());
        for i in range {
            let t = traction(source_stress(&samples[i], source)?, n);
            let mut r = T::zero();
            for (c, cond) in conds.iter().enumerate() {
                if let Condition::Neumann(v) = *cond {
                    r = r + (t[c] - v).square();
                }
            }
            terms.push(r);
        }
        total = total + crate::autodiff::mean(terms);
    }
    Ok(total)
}

/// Active terms of `variant` with equal weights. Variants A and D impose the
/// strong form on the stress derived from `u`; A also takes tractions from
/// `u` since it has no heads.
pub fn total_loss<T: Real>(
    variant: Variant,
    set: &CollocationSet,
    bcs: &BoundarySpec,
    samples: &[ElasticSample<T>],
    form: EnergyForm,
) -> Result<LossBreakdown<T>> {
    bcs.validate(2)?;
    let strong = match variant {
        Variant::A | Variant::D => StressSource::Primary,
        _ => StressSource::Heads,
    };
    let traction_source = if variant.has_flux_heads() {
        StressSource::Heads
    } else {
        StressSource::Primary
    };
    let mut out = LossBreakdown::zero();
    for term in variant.loss_terms() {
        match term {
            LossTerm::EnergyForm => out.ef = loss_ef(set, bcs, samples, form)?,
            LossTerm::Dirichlet => out.dbc = loss_dbc(set, bcs, samples)?,
            LossTerm::Connection => out.cnc = loss_cnc(set, samples)?,
            LossTerm::StrongForm => out.sf = loss_sf(set, samples, strong)?,
            LossTerm::Neumann => out.nbc = loss_nbc(set, bcs, samples, traction_source)?,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{MaterialTable, PhaseMap};
    use approx::assert_relative_eq;

    const MAT: Material = Material { e: 0.5, nu: 0.3, k: 1.0 };

    fn lin(value: f64, gx: f64, gy: f64) -> Dual2<f64> {
        Dual2::from_parts(value, [gx, gy], None)
    }

    fn set_with(interior: Vec<[f64; 2]>, edges: [Vec<[f64; 2]>; 4]) -> CollocationSet {
        let map = PhaseMap::homogeneous(1, 1, 1.0, 1.0, 1).unwrap();
        CollocationSet::from_parts(&map, &MaterialTable::default(), interior, edges).unwrap()
    }

    #[test]
    fn uniaxial_stretch_stress() {
        let s = strain_stress_from_u(&[lin(0.0, 0.05, 0.0), lin(0.0, 0.0, 0.0)], &MAT);
        assert_relative_eq!(s.strain[0], 0.05);
        assert_relative_eq!(s.stress[0], 0.0336538, max_relative = 1e-5);
        assert_relative_eq!(s.stress[1], 0.0144231, max_relative = 1e-5);
        assert_eq!(s.stress[2], 0.0);
    }

    #[test]
    fn pure_shear_stress() {
        let g = 0.01;
        let s = strain_stress_from_u(&[lin(0.0, 0.0, g), lin(0.0, 0.0, 0.0)], &MAT);
        assert_eq!(s.stress[0], 0.0);
        assert_eq!(s.stress[1], 0.0);
        assert_relative_eq!(s.stress[2], 0.5 / 2.6 * g, max_relative = 1e-14);
        assert_relative_eq!(s.strain[2], g / 2.0);
    }

    #[test]
    fn zero_field_zero_everything() {
        let s = strain_stress_from_u(&[lin(0.0, 0.0, 0.0), lin(0.0, 0.0, 0.0)], &MAT);
        assert_eq!(s.stress, [0.0; 3]);
        assert_eq!(s.strain, [0.0; 3]);
    }

    #[test]
    fn energy_single_interior_sample() {
        let set = set_with(vec![[0.5, 0.5]], Default::default());
        let s = ElasticSample {
            u: [0.0; 2],
            strain: [1.0, 0.0, 0.0],
            stress: [0.002, 0.0, 0.0],
            div_stress: None,
            stress_heads: None,
            div_heads: None,
        };
        let bcs = BoundarySpec::tension(0.0);
        assert_relative_eq!(loss_ef(&set, &bcs, &[s], EnergyForm::Literal).unwrap(), 0.001);
    }

    #[test]
    fn energy_of_uniform_stretch() {
        let set = set_with(
            vec![[0.3, 0.4], [0.7, 0.2]],
            [vec![[0.0, 0.5]], vec![[1.0, 0.5]], vec![[0.5, 0.0]], vec![[0.5, 1.0]]],
        );
        let samples: Vec<_> = set
            .points()
            .iter()
            .map(|p| strain_stress_from_u(&[lin(0.05 * p[0], 0.05, 0.0), lin(0.0, 0.0, 0.0)], &MAT))
            .collect();
        let bcs = BoundarySpec::tension(0.05);
        let ef = loss_ef(&set, &bcs, &samples, EnergyForm::Literal).unwrap();
        assert_relative_eq!(ef, 8.41346e-4, max_relative = 1e-5);
        // internal 8.41346e-4 less top/bottom Neumann work (zero)
        let pot = loss_ef(&set, &bcs, &samples, EnergyForm::SignedPotential).unwrap();
        assert_relative_eq!(pot, 8.41346e-4, max_relative = 1e-5);
    }

    #[test]
    fn dirichlet_mismatch() {
        let set = set_with(vec![[0.5, 0.5]], [vec![[0.0, 0.5]], vec![], vec![], vec![]]);
        let mut s = vec![strain_stress_from_u(&[lin(0.0, 0.0, 0.0), lin(0.0, 0.0, 0.0)], &MAT); 2];
        s[1].u = [0.01, 0.0];
        let mut bcs = BoundarySpec::tension(0.05);
        bcs.right = vec![Condition::Neumann(0.0), Condition::Neumann(0.0)];
        assert_relative_eq!(loss_dbc(&set, &bcs, &s).unwrap(), 1e-4);
        // right edge Dirichlet with no right points is a configuration error
        assert!(loss_dbc(&set, &BoundarySpec::tension(0.05), &s).is_err());
    }

    #[test]
    fn connection_and_strong_form() {
        let set = set_with(vec![[0.5, 0.5]], Default::default());
        let p = ElasticPoint {
            u: [lin(0.0, 0.0, 0.0), lin(0.0, 0.0, 0.0)],
            sigma: Some([lin(0.1, 1.0, 0.0), lin(0.0, 0.0, 0.0), lin(0.0, 0.0, 0.0)]),
        };
        let s = [elastic_sample(&p, &MAT)];
        assert_relative_eq!(loss_cnc(&set, &s).unwrap(), 0.01);
        assert_relative_eq!(loss_sf(&set, &s, StressSource::Heads).unwrap(), 1.0);
        let p = ElasticPoint {
            sigma: Some([lin(0.2, 0.0, 2.0), lin(0.0, 0.0, 0.0), lin(0.0, 0.0, 0.0)]),
            ..p
        };
        let s = [elastic_sample(&p, &MAT)];
        assert_relative_eq!(loss_cnc(&set, &s).unwrap(), 0.04);
        assert_eq!(loss_sf(&set, &s, StressSource::Heads).unwrap(), 0.0);
        assert!(loss_sf(&set, &s, StressSource::Primary).is_err());
    }

    #[test]
    fn traction_on_top_edge() {
        let set = set_with(vec![], [vec![], vec![], vec![], vec![[0.5, 1.0]]]);
        let p = ElasticPoint {
            u: [lin(0.0, 0.0, 0.0), lin(0.0, 0.0, 0.0)],
            sigma: Some([lin(0.0, 0.0, 0.0), lin(0.02, 0.0, 0.0), lin(0.0, 0.0, 0.0)]),
        };
        let s = [elastic_sample(&p, &MAT)];
        // only the top edge has points, so every other edge is Dirichlet
        let only_top = BoundarySpec {
            left: vec![Condition::Dirichlet(0.0); 2],
            right: vec![Condition::Dirichlet(0.0); 2],
            bottom: vec![Condition::Dirichlet(0.0); 2],
            top: vec![Condition::Neumann(0.0); 2],
        };
        assert_relative_eq!(loss_nbc(&set, &only_top, &s, StressSource::Heads).unwrap(), 4e-4);
        assert!(loss_nbc(&set, &BoundarySpec::tension(0.05), &s, StressSource::Heads).is_err());
    }

    #[test]
    fn second_order_divergence() {
        // u_x = x^2 + x y, u_y = y^2: exact divergence by hand
        let x = Dual2::var_x(0.3, true);
        let y = Dual2::var_y(0.6, true);
        let ux = x * x + x * y;
        let uy = y * y;
        let s = strain_stress_from_u(&[ux, uy], &MAT);
        let (c11, c12, mu) = MAT.plane_strain();
        let d = s.div_stress.unwrap();
        // uxx=2, uxy=1, uyy=0; vyy=2
        assert_relative_eq!(d[0], 2.0 * c11 + 0.0 * c12 + mu * (0.0 + 0.0), max_relative = 1e-14);
        assert_relative_eq!(d[1], c12 * 1.0 + c11 * 2.0 + mu * 1.0, max_relative = 1e-14);
    }
}
