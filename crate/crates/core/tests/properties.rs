use std::collections::BTreeMap;

use approx::assert_relative_eq;
use proptest::prelude::*;

use mixpinn::autodiff::{Dual2, Real, Tape, Var};
use mixpinn::domain::{
    eval_grid, material_at_point, sample_collocation, BoundarySpec, Edge, Material, MaterialTable, PhaseMap, SampleSpec,
};
use mixpinn::fem::{self, FemMesh};
use mixpinn::field::{compare, FieldGrid, Provenance};
use mixpinn::loss::EnergyForm;
use mixpinn::network::{assemble_variant, init_params, Mlp, NetworkShape, Problem, Variant};
use mixpinn::ode::{y_true, OdeOrder, OdeProblem};
use mixpinn::optimizer::{AdamConfig, AdamState};
use mixpinn::pinn::losses_at;

fn sizes_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=5, 1..=2).prop_map(|hidden| {
        let mut s = vec![2];
        s.extend(hidden);
        s.push(1);
        s
    })
}

/// Sum of squares of every dual channel at one point, on the tape.
fn channel_loss<'t>(net: &Mlp, params: &[Var<'t>], p: [f64; 2]) -> Var<'t> {
    let input = [Dual2::var_x(Var::constant(p[0]), true), Dual2::var_y(Var::constant(p[1]), true)];
    let d = net.forward_with(params, &input).unwrap()[0];
    [d.value, d.d_x, d.d_y, d.d_xx, d.d_xy, d.d_yy]
        .into_iter()
        .fold(Var::constant(0.0), |acc, v| acc + v.square())
}

fn plain_loss(net: &Mlp, p: [f64; 2]) -> f64 {
    let d = net.forward_point(p, true).unwrap()[0];
    [d.value, d.d_x, d.d_y, d.d_xx, d.d_xy, d.d_yy].iter().map(|v| v * v).sum()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn tape_gradient_matches_central_differences(sizes in sizes_strategy(), seed in 0u64..1000, x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let net = init_params(&sizes, seed).unwrap();
        let tape = Tape::new();
        let params = tape.vars(net.params());
        let grad = tape.gradient(&channel_loss(&net, &params, [x, y])).unwrap();
        let h = 1e-5;
        for i in 0..net.num_params() {
            let mut a = net.clone();
            a.params_mut()[i] += h;
            let mut b = net.clone();
            b.params_mut()[i] -= h;
            let fd = (plain_loss(&a, [x, y]) - plain_loss(&b, [x, y])) / (2.0 * h);
            let err = (grad[i] - fd).abs();
            prop_assert!(err <= 1e-8 || err <= 1e-5 * fd.abs(), "param {i}: {} vs {fd}", grad[i]);
        }
    }

    #[test]
    fn second_spatial_derivatives_match_differences(sizes in sizes_strategy(), seed in 0u64..1000, x in 0.1..0.9f64, y in 0.1..0.9f64) {
        let net = init_params(&sizes, seed).unwrap();
        let d = net.forward_point([x, y], true).unwrap()[0];
        let f = |x: f64, y: f64| net.forward_point([x, y], false).unwrap()[0].value;
        let h = 1e-3;
        let xx = (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h);
        let yy = (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h);
        let xy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h);
        for (ad, fd) in [(d.d_xx, xx), (d.d_yy, yy), (d.d_xy, xy)] {
            prop_assert!((ad - fd).abs() <= 1e-3 * fd.abs().max(1e-3), "{ad} vs {fd}");
        }
    }

    #[test]
    fn gradient_is_linear_in_the_loss(seed in 0u64..1000, ka in -3i32..3, kb in -3i32..3) {
        let (a, b) = (2f64.powi(ka), -(2f64.powi(kb)));
        let net = init_params(&[2, 4, 1], seed).unwrap();
        let tape = Tape::new();
        let params = tape.vars(net.params());
        let l1 = channel_loss(&net, &params, [0.3, 0.6]);
        let l2 = channel_loss(&net, &params, [0.8, 0.1]);
        let combined = tape.gradient(&(l1 * a + l2 * b)).unwrap();
        let (g1, g2) = (tape.gradient(&l1).unwrap(), tape.gradient(&l2).unwrap());
        for i in 0..net.num_params() {
            // same terms, different accumulation order: equal up to rounding
            let expect = a * g1[i] + b * g2[i];
            prop_assert!((combined[i] - expect).abs() <= 1e-13 * (a * g1[i]).abs().max((b * g2[i]).abs()).max(1e-300));
        }
    }

    #[test]
    fn loss_terms_nonnegative_and_summed(seed in 0u64..500, variant in prop::sample::select(Variant::ALL.to_vec()), elastic in any::<bool>()) {
        let (problem, bcs) = if elastic {
            (Problem::Elastic, BoundarySpec::tension(0.05))
        } else {
            (Problem::Thermal, BoundarySpec::thermal(1.0, 0.0))
        };
        let map = PhaseMap::square_inclusion();
        let table = MaterialTable::default();
        let set = sample_collocation(&map, &table, &SampleSpec::new(20, 3), seed).unwrap();
        let model = assemble_variant(variant, problem, NetworkShape { hidden_layers: 1, neurons: 5 }, seed).unwrap();
        let l = losses_at(&model, &set, &bcs, EnergyForm::Literal).unwrap();
        prop_assert!(l.ef >= 0.0 && l.dbc >= 0.0 && l.cnc >= 0.0 && l.sf >= 0.0 && l.nbc >= 0.0);
        prop_assert_eq!(l.total(), l.ef + l.dbc + l.cnc + l.sf + l.nbc);
    }

    #[test]
    fn material_is_constant_inside_a_cell(i in 0usize..32, j in 0usize..32, a in 0.01..0.99f64, b in 0.01..0.99f64, c in 0.01..0.99f64, d in 0.01..0.99f64) {
        let map = PhaseMap::multi_blob();
        let table = MaterialTable::default();
        let h = map.cell_width();
        let p = [(i as f64 + a) * h, (j as f64 + b) * h];
        let q = [(i as f64 + c) * h, (j as f64 + d) * h];
        prop_assert_eq!(material_at_point(&map, &table, p).unwrap(), material_at_point(&map, &table, q).unwrap());
    }

    #[test]
    fn collocation_counts_and_determinism(seed in any::<u64>(), interior in 1usize..200, per_edge in 1usize..30) {
        let map = PhaseMap::square_inclusion();
        let table = MaterialTable::default();
        let spec = SampleSpec::new(interior, per_edge);
        let a = sample_collocation(&map, &table, &spec, seed).unwrap();
        prop_assert_eq!(a.len(), interior + 4 * per_edge);
        prop_assert_eq!(a.n_interior(), interior);
        let b = sample_collocation(&map, &table, &spec, seed).unwrap();
        prop_assert_eq!(a.points(), b.points());
    }

    #[test]
    fn stiffness_is_exactly_symmetric(cells in prop::collection::vec(1u32..=2, 16), e2 in 0.1..10.0f64, nu in 0.0..0.45f64, k2 in 0.1..10.0f64) {
        let map = PhaseMap::new(4, 4, 1.0, 1.0, cells).unwrap();
        let mut phases = BTreeMap::new();
        phases.insert(1, Material { e: 1.0, nu: 0.3, k: 1.0 });
        phases.insert(2, Material { e: e2, nu, k: k2 });
        let table = MaterialTable::new(phases).unwrap();
        let mesh = FemMesh::from_phase_map(&map, &table, 2).unwrap();
        for p in [Problem::Elastic, Problem::Thermal] {
            prop_assert!(fem::assemble(&mesh, p).unwrap().matrix.is_symmetric());
        }
    }

    #[test]
    fn field_csv_round_trip_compares_to_zero(values in prop::collection::vec(-1e3..1e3f64, 12)) {
        let pts = eval_grid(2.0, 1.0, 4, 3).unwrap();
        let mut g = FieldGrid::new(4, 3, pts, Provenance::Pinn).unwrap();
        g.push_column("T", values.clone()).unwrap();
        g.push_column("q_x", values.iter().map(|v| v * 0.5).collect()).unwrap();
        let back = FieldGrid::parse(&g.to_csv()).unwrap();
        let r = compare(&back, &g).unwrap();
        for d in &r.fields {
            prop_assert_eq!((d.max, d.mean), (0.0, 0.0));
        }
    }

    #[test]
    fn doubling_learning_rate_doubles_first_step(grad in prop::collection::vec(-10.0..10.0f64, 1..8), lr in 1e-5..1e-1f64) {
        let step = |lr: f64| {
            let mut p = vec![0.0; grad.len()];
            AdamState::new(grad.len(), AdamConfig { learning_rate: lr, ..Default::default() }).step(&mut p, &grad).unwrap();
            p
        };
        for (a, b) in step(lr).iter().zip(step(2.0 * lr)) {
            prop_assert_eq!(2.0 * a, b);
        }
    }

    #[test]
    fn exact_ode_solution_has_no_residual(x in 0.0..10.0f64) {
        for order in OdeOrder::ALL {
            let r = OdeProblem::new(order).residual(x, x.cos() + 0.1, -x.sin());
            prop_assert!(r * r <= 1e-20);
        }
        prop_assert!((y_true(x) - (x.sin() + 0.1 * x + 0.1)).abs() == 0.0);
    }
}

fn tension_energy(n: usize) -> (f64, f64) {
    let mat = Material { e: 0.5, nu: 0.3, k: 1.0 };
    let mesh = FemMesh::uniform(n, n, 1.0, 1.0, mat).unwrap();
    let mut sys = fem::assemble(&mesh, Problem::Elastic).unwrap();
    fem::apply_boundary(&mut sys, &mesh, &BoundarySpec::tension(0.05)).unwrap();
    let x = fem::solve(&sys).unwrap();
    let r = fem::reactions(&sys, &x);
    let left: f64 = mesh.edge_nodes(Edge::Left).iter().map(|n| r[2 * n]).sum();
    let right: f64 = mesh.edge_nodes(Edge::Right).iter().map(|n| r[2 * n]).sum();
    assert_relative_eq!(left, -right, max_relative = 1e-8);
    (fem::strain_energy(&sys, &x), right)
}

#[test]
fn mesh_refinement_converges_monotonically() {
    let e: Vec<f64> = [16, 32, 64].iter().map(|&n| tension_energy(n).0).collect();
    assert!((e[0] - e[1]).abs() > (e[1] - e[2]).abs(), "{e:?}");
    // displacement-driven: the discrete energy decreases toward the exact one
    assert!(e[0] >= e[1] && e[1] >= e[2]);
}

#[test]
fn right_edge_reaction_does_the_work() {
    // for a prescribed displacement the stored energy is half the reaction work
    let (energy, right) = tension_energy(16);
    assert_relative_eq!(energy, 0.5 * right * 0.05, max_relative = 1e-9);
}

#[test]
fn derived_flux_scales_with_conductivity() {
    use mixpinn::loss::thermal::flux_from_t;
    let t = Dual2::from_parts(0.4, [-0.7, 0.2], None);
    for c in [0.5, 3.0, 7.25] {
        let base = flux_from_t(&t, &Material { e: 1.0, nu: 0.3, k: 1.0 });
        let scaled = flux_from_t(&t, &Material { e: 1.0, nu: 0.3, k: c });
        for (a, b) in base.flux.iter().zip(scaled.flux) {
            assert_relative_eq!(c * a, b, max_relative = 1e-15);
        }
    }
}
