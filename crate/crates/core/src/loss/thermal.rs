//! Steady-state diffusion: Fourier's law and the five loss terms.

use super::{check_len, mean_over, nonempty_edge, nonempty_interior, EnergyForm, LossBreakdown};
use crate::autodiff::{mean, Dual2, Real};
use crate::domain::{BoundarySpec, CollocationSet, Condition, Edge, Material};
use crate::error::{Error, Result};
use crate::network::{LossTerm, Variant};

/// Network outputs at one point: temperature dual and, for mixed variants,
/// the flux heads `(q_x, q_y)`.
#[derive(Clone, Copy, Debug)]
pub struct ThermalPoint<T> {
    pub t: Dual2<T>,
    pub q: Option<[Dual2<T>; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalSample<T> {
    pub t: T,
    pub grad: [T; 2],
    /// `-k grad T`.
    pub flux: [T; 2],
    /// Divergence of the derived flux; needs second-order duals.
    pub div_flux: Option<T>,
    pub flux_heads: Option<[T; 2]>,
    pub div_heads: Option<T>,
}

/// Which flux field a strong-form or flux boundary term is evaluated on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FluxSource {
    Heads,
    Primary,
}

pub fn flux_from_t<T: Real>(t: &Dual2<T>, m: &Material) -> ThermalSample<T> {
    let k = m.k;
    ThermalSample {
        t: t.value,
        grad: [t.d_x, t.d_y],
        flux: [t.d_x * -k, t.d_y * -k],
        div_flux: t.is_second_order().then(|| (t.d_xx + t.d_yy) * -k),
        flux_heads: None,
        div_heads: None,
    }
}

pub fn thermal_sample<T: Real>(point: &ThermalPoint<T>, m: &Material) -> ThermalSample<T> {
    let mut s = flux_from_t(&point.t, m);
    if let Some([qx, qy]) = point.q {
        s.flux_heads = Some([qx.value, qy.value]);
        s.div_heads = Some(qx.d_x + qy.d_y);
    }
    s
}

fn heads<T: Real>(s: &ThermalSample<T>) -> Result<[T; 2]> {
    s.flux_heads
        .ok_or_else(|| Error::structural("variant needs flux heads but the sample has none"))
}

/// Energy term. Literal form: `| (1/2) int q.grad T + int (-q.n) T |`, the
/// boundary integral taken over edges with nonzero prescribed data (on a
/// Neumann edge `q.n` is the prescribed value). Signed form: the potential
/// `(1/2) int k |grad T|^2 + int_N qbar T`.
pub fn loss_ef<T: Real>(
    set: &CollocationSet,
    bcs: &BoundarySpec,
    samples: &[ThermalSample<T>],
    form: EnergyForm,
) -> Result<T> {
    check_len(set, samples.len())?;
    let interior = nonempty_interior(set)?;
    let density = mean_over(interior, |i| {
        let s = &samples[i];
        s.flux[0] * s.grad[0] + s.flux[1] * s.grad[1]
    });
    // q.grad T = -k |grad T|^2, so this is minus the internal energy
    let half_q_grad = density * (0.5 * set.area());
    let (lx, ly) = set.extents();
    let mut work = T::zero();
    for e in Edge::ALL {
        let n = e.outward_normal();
        let term = match (form, bcs.edge(e)[0]) {
            (EnergyForm::Literal, Condition::Dirichlet(v)) if v != 0.0 => Condition::Dirichlet(v),
            (_, Condition::Neumann(v)) if v != 0.0 => Condition::Neumann(v),
            _ => continue,
        };
        let range = nonempty_edge(set, e)?;
        let edge = mean_over(range, |i| {
            let s = &samples[i];
            match term {
                Condition::Dirichlet(_) => -(s.flux[0] * n[0] + s.flux[1] * n[1]) * s.t,
                Condition::Neumann(v) => s.t * -v,
            }
        });
        work = work + edge * e.length(lx, ly);
    }
    Ok(match form {
        EnergyForm::Literal => (half_q_grad + work).abs(),
        EnergyForm::SignedPotential => -half_q_grad - work,
    })
}

/// Sum over Dirichlet edges of the edge mean of `(T - Tbar)^2`.
pub fn loss_dbc<T: Real>(set: &CollocationSet, bcs: &BoundarySpec, samples: &[ThermalSample<T>]) -> Result<T> {
    check_len(set, samples.len())?;
    let mut total = T::zero();
    for e in Edge::ALL {
        if let Condition::Dirichlet(v) = bcs.edge(e)[0] {
            total = total + mean_over(nonempty_edge(set, e)?, |i| (samples[i].t - v).square());
        }
    }
    Ok(total)
}

/// Mean over interior points of `|q_heads - q(T)|^2`.
pub fn loss_cnc<T: Real>(set: &CollocationSet, samples: &[ThermalSample<T>]) -> Result<T> {
    check_len(set, samples.len())?;
    let range = nonempty_interior(set)?;
    let mut terms = Vec::with_capacity(range.len());
    for i in range {
        let s = &samples[i];
        let h = heads(s)?;
        terms.push((h[0] - s.flux[0]).square() + (h[1] - s.flux[1]).square());
    }
    Ok(mean(terms))
}

/// Mean over interior points of the squared flux divergence.
pub fn loss_sf<T: Real>(set: &CollocationSet, samples: &[ThermalSample<T>], source: FluxSource) -> Result<T> {
    check_len(set, samples.len())?;
    let range = nonempty_interior(set)?;
    let mut terms = Vec::with_capacity(range.len());
    for i in range {
        let d = match source {
            FluxSource::Heads => samples[i].div_heads,
            FluxSource::Primary => samples[i].div_flux,
        }
        .ok_or_else(|| {
            Error::structural(match source {
                FluxSource::Heads => "strong form on heads needs flux head derivatives",
                FluxSource::Primary => "strong form on T needs second-order derivatives",
            })
        })?;
        terms.push(d.square());
    }
    Ok(mean(terms))
}

/// Sum over Neumann edges of the edge mean of `(q.n - qbar)^2`.
pub fn loss_nbc<T: Real>(
    set: &CollocationSet,
    bcs: &BoundarySpec,
    samples: &[ThermalSample<T>],
    source: FluxSource,
) -> Result<T> {
    check_len(set, samples.len())?;
    let mut total = T::zero();
    for e in Edge::ALL {
        if let Condition::Neumann(v) = bcs.edge(e)[0] {
            let n = e.outward_normal();
            let range = nonempty_edge(set, e)?;
            let mut terms = Vec::with_capacity(range.len());
            for i in range {
                let q = match source {
                    FluxSource::Heads => heads(&samples[i])?,
                    FluxSource::Primary => samples[i].flux,
                };
                terms.push((q[0] * n[0] + q[1] * n[1] - v).square());
            }
            total = total + mean(terms);
        }
    }
    Ok(total)
}

/// Active terms of `variant` with equal weights; see the elastic
/// counterpart for how variants A and D differ.
pub fn total_loss<T: Real>(
    variant: Variant,
    set: &CollocationSet,
    bcs: &BoundarySpec,
    samples: &[ThermalSample<T>],
    form: EnergyForm,
) -> Result<LossBreakdown<T>> {
    bcs.validate(1)?;
    let strong = match variant {
        Variant::A | Variant::D => FluxSource::Primary,
        _ => FluxSource::Heads,
    };
    let boundary = if variant.has_flux_heads() {
        FluxSource::Heads
    } else {
        FluxSource::Primary
    };
    let mut out = LossBreakdown::zero();
    for term in variant.loss_terms() {
        match term {
            LossTerm::EnergyForm => out.ef = loss_ef(set, bcs, samples, form)?,
            LossTerm::Dirichlet => out.dbc = loss_dbc(set, bcs, samples)?,
            LossTerm::Connection => out.cnc = loss_cnc(set, samples)?,
            LossTerm::StrongForm => out.sf = loss_sf(set, samples, strong)?,
            LossTerm::Neumann => out.nbc = loss_nbc(set, bcs, samples, boundary)?,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{MaterialTable, PhaseMap, SampleSpec};
    use approx::assert_relative_eq;

    fn lin(value: f64, gx: f64, gy: f64) -> Dual2<f64> {
        Dual2::from_parts(value, [gx, gy], None)
    }

    #[test]
    fn fourier_law() {
        let m = Material { e: 1.0, nu: 0.3, k: 1.0 };
        let s = flux_from_t(&lin(0.5, -1.0, 0.0), &m);
        assert_eq!(s.flux, [1.0, -0.0]);
        let s = flux_from_t(&lin(0.5, -1.0, 0.0), &Material { k: 0.5, ..m });
        assert_eq!(s.flux[0], 0.5);
        let s = flux_from_t(&lin(3.0, 0.0, 0.0), &m);
        assert_eq!(s.flux, [-0.0, -0.0]);
    }

    fn exact_samples(set: &CollocationSet, t: impl Fn([f64; 2]) -> Dual2<f64>) -> Vec<ThermalSample<f64>> {
        set.points()
            .iter()
            .zip(set.materials())
            .map(|(&p, m)| {
                thermal_sample(
                    &ThermalPoint {
                        t: t(p),
                        q: Some([lin(m.k, 0.0, 0.0), lin(0.0, 0.0, 0.0)]),
                    },
                    m,
                )
            })
            .collect()
    }

    #[test]
    fn exact_solution_losses() {
        let map = PhaseMap::homogeneous(1, 1, 1.0, 1.0, 1).unwrap();
        let table = MaterialTable::default();
        let set = crate::domain::sample_collocation(&map, &table, &SampleSpec::new(50, 5), 1).unwrap();
        let samples = exact_samples(&set, |p| lin(1.0 - p[0], -1.0, 0.0));
        let bcs = BoundarySpec::thermal(1.0, 0.0);
        let l = total_loss(Variant::E, &set, &bcs, &samples, EnergyForm::Literal).unwrap();
        assert_eq!(l.dbc, 0.0);
        assert_eq!(l.cnc, 0.0);
        assert_eq!(l.sf, 0.0);
        assert_eq!(l.nbc, 0.0);
        assert_relative_eq!(l.ef, 0.5, max_relative = 1e-14);
        let p = total_loss(Variant::E, &set, &bcs, &samples, EnergyForm::SignedPotential).unwrap();
        assert_relative_eq!(p.ef, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn zero_temperature() {
        let map = PhaseMap::homogeneous(1, 1, 1.0, 1.0, 1).unwrap();
        let set = crate::domain::sample_collocation(&map, &MaterialTable::default(), &SampleSpec::new(20, 4), 1)
            .unwrap();
        let samples: Vec<_> = set
            .materials()
            .iter()
            .map(|m| thermal_sample(&ThermalPoint { t: lin(0.0, 0.0, 0.0), q: Some([lin(0.0, 0.0, 0.0); 2]) }, m))
            .collect();
        let l = total_loss(Variant::E, &set, &BoundarySpec::thermal(1.0, 0.0), &samples, EnergyForm::Literal)
            .unwrap();
        assert_eq!(l.dbc, 1.0);
        assert_eq!([l.ef, l.cnc, l.sf, l.nbc], [0.0; 4]);
    }

    #[test]
    fn top_flux_penalty() {
        let map = PhaseMap::homogeneous(1, 1, 1.0, 1.0, 1).unwrap();
        let set = CollocationSet::from_parts(
            &map,
            &MaterialTable::default(),
            vec![],
            [vec![], vec![], vec![], vec![[0.5, 1.0]]],
        )
        .unwrap();
        let m = set.materials()[0];
        let s = [thermal_sample(
            &ThermalPoint { t: lin(0.0, 0.0, 0.0), q: Some([lin(0.0, 0.0, 0.0), lin(0.1, 0.0, 0.0)]) },
            &m,
        )];
        let bcs = BoundarySpec {
            left: vec![Condition::Dirichlet(0.0)],
            right: vec![Condition::Dirichlet(0.0)],
            bottom: vec![Condition::Dirichlet(0.0)],
            top: vec![Condition::Neumann(0.0)],
        };
        assert_relative_eq!(loss_nbc(&set, &bcs, &s, FluxSource::Heads).unwrap(), 0.01);
    }

    #[test]
    fn derived_flux_scales_with_k() {
        let t = lin(0.2, 0.3, -0.7);
        let a = flux_from_t(&t, &Material { e: 1.0, nu: 0.3, k: 1.0 });
        let b = flux_from_t(&t, &Material { e: 1.0, nu: 0.3, k: 2.5 });
        assert_eq!(b.flux, [a.flux[0] * 2.5, a.flux[1] * 2.5]);
    }

    #[test]
    fn second_order_divergence() {
        let x = Dual2::var_x(0.4, true);
        let y = Dual2::var_y(0.1, true);
        let t = x * x * 3.0 + y * y;
        let s = flux_from_t(&t, &Material { e: 1.0, nu: 0.3, k: 0.5 });
        assert_relative_eq!(s.div_flux.unwrap(), -0.5 * 8.0);
    }
}
