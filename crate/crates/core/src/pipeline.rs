//! End-to-end runs driven by a [`RunConfig`]: sampling, training,
//! evaluation, reference solves and output files.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use crate::config::{ProblemKind, RunConfig};
use crate::domain::{eval_grid, refine_near_interface, sample_collocation, CollocationSet, Edge, PhaseMap};
use crate::error::{Error, Result};
use crate::fem;
use crate::field::{compare, DiffReport, FieldGrid};
use crate::network::{assemble_variant, Model, Problem, Variant};
use crate::ode::{run_sweep, SweepTable};
use crate::optimizer::{confidence_band, TrainRecord, TrainStatus};
use crate::pinn::{evaluate_pinn, train_pinn};

pub const MANIFEST: &str = "manifest.toml";

/// Command-line style adjustments applied on top of a loaded config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub variant: Option<Variant>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(e) = self.epochs {
            cfg.training.epochs = e;
            cfg.ode.epochs = e;
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        cfg.validate()
    }
}

fn field_problem(cfg: &RunConfig) -> Result<Problem> {
    cfg.problem
        .field_problem()
        .ok_or_else(|| Error::config("this command needs an elastic or thermal problem"))
}

/// Training points for `seed`, with interface refinement when configured.
pub fn collocation(cfg: &RunConfig, map: &PhaseMap, seed: u64) -> Result<CollocationSet> {
    let set = sample_collocation(map, &cfg.materials, &cfg.sampling, seed)?;
    if cfg.refinement.points == 0 {
        return Ok(set);
    }
    refine_near_interface(&set, map, &cfg.materials, cfg.refinement.points, cfg.refinement.radius, seed)
}

pub fn eval_points(cfg: &RunConfig, map: &PhaseMap) -> Result<Vec<[f64; 2]>> {
    eval_grid(map.lx(), map.ly(), cfg.eval.nx, cfg.eval.ny)
}

#[derive(Clone, Debug)]
pub struct PinnRun {
    pub seed: u64,
    pub model: Model,
    pub record: TrainRecord,
    pub status: TrainStatus,
    pub field: FieldGrid,
}

/// Trains one model for `seed` and evaluates it on the configured grid.
pub fn run_pinn(cfg: &RunConfig, seed: u64) -> Result<PinnRun> {
    let problem = field_problem(cfg)?;
    let map = cfg.phase_map()?;
    cfg.materials.check_covers(&map)?;
    let set = collocation(cfg, &map, seed)?;
    let bcs = cfg.boundary();
    let mut model = assemble_variant(cfg.variant, problem, cfg.network, seed)?;
    info!(
        "training {} variant {} on {} points, seed {seed}",
        problem,
        cfg.variant,
        set.len()
    );
    let outcome = train_pinn(&mut model, &set, &bcs, cfg.energy_form, &cfg.training, seed)?;
    let pts = eval_points(cfg, &map)?;
    let field = evaluate_pinn(&model, &map, &cfg.materials, &pts, cfg.eval.nx, cfg.eval.ny)?;
    Ok(PinnRun {
        seed,
        model,
        record: outcome.record,
        status: outcome.status,
        field,
    })
}

/// Reference solution on the mesh nodes.
pub fn run_fem(cfg: &RunConfig) -> Result<FieldGrid> {
    let problem = field_problem(cfg)?;
    let map = cfg.phase_map()?;
    fem::solve_fem(&map, &cfg.materials, &cfg.boundary(), problem, cfg.fem.refine)
}

/// Reference solution interpolated onto the configured evaluation grid.
pub fn run_fem_on_eval_grid(cfg: &RunConfig) -> Result<FieldGrid> {
    let nodal = run_fem(cfg)?;
    let map = cfg.phase_map()?;
    nodal.resample(&eval_points(cfg, &map)?, cfg.eval.nx, cfg.eval.ny)
}

/// Mean over `fields` of the average absolute difference along `x = x0`,
/// each normalized by the largest reference magnitude on that line.
pub fn section_error(pinn: &FieldGrid, reference: &FieldGrid, x0: f64, fields: &[&str]) -> Result<f64> {
    let (a, b) = (pinn.section_x(x0), reference.section_x(x0));
    let mut total = 0.0;
    for name in fields {
        let col = |g: &FieldGrid| {
            g.names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::structural(format!("missing column {name}")))
        };
        let (ia, ib) = (col(pinn)?, col(reference)?);
        let scale = b.iter().map(|(_, v)| v[ib].abs()).fold(0.0, f64::max);
        let diff = a.iter().zip(&b).map(|((_, va), (_, vb))| (va[ia] - vb[ib]).abs()).sum::<f64>() / a.len() as f64;
        total += if scale > crate::field::NORMALIZATION_FLOOR { diff / scale } else { diff };
    }
    Ok(total / fields.len() as f64)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_manifest(cfg: &RunConfig, dir: &Path) -> Result<PathBuf> {
    create_dir(dir)?;
    let path = dir.join(MANIFEST);
    write_text(&path, &cfg.to_toml()?)?;
    Ok(path)
}

/// Trains every configured seed and writes `field_seed<N>.csv`,
/// `history_seed<N>.csv`, `model_seed<N>.txt`, a loss band over seeds when
/// there are several, and the manifest. A diverged run is reported as a
/// training error after its outputs are written.
pub fn solve_pinn_to_dir(cfg: &RunConfig, dir: &Path) -> Result<Vec<PinnRun>> {
    write_manifest(cfg, dir)?;
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let run = run_pinn(cfg, seed)?;
        run.field.write(&dir.join(format!("field_seed{seed}.csv")))?;
        write_text(&dir.join(format!("history_seed{seed}.csv")), &run.record.to_csv())?;
        write_text(&dir.join(format!("model_seed{seed}.txt")), &run.model.to_snapshot())?;
        runs.push(run);
    }
    if runs.len() > 1 {
        let histories: Vec<Vec<f64>> = runs.iter().map(|r| r.record.totals()).collect();
        write_text(&dir.join("loss_band.csv"), &confidence_band(&histories)?.to_csv())?;
    }
    for r in &runs {
        if let TrainStatus::Diverged { epoch, reason } = &r.status {
            return Err(Error::Training {
                epoch: *epoch,
                reason: format!("seed {}: {reason}", r.seed),
            });
        }
    }
    Ok(runs)
}

/// Writes `fem_nodes.csv` (mesh lattice), `fem_field.csv` (evaluation
/// grid) and the manifest.
pub fn solve_fem_to_dir(cfg: &RunConfig, dir: &Path) -> Result<FieldGrid> {
    write_manifest(cfg, dir)?;
    let nodal = run_fem(cfg)?;
    nodal.write(&dir.join("fem_nodes.csv"))?;
    let map = cfg.phase_map()?;
    let on_grid = nodal.resample(&eval_points(cfg, &map)?, cfg.eval.nx, cfg.eval.ny)?;
    on_grid.write(&dir.join("fem_field.csv"))?;
    Ok(on_grid)
}

pub fn compare_files(a: &Path, b: &Path, dir: &Path) -> Result<DiffReport> {
    let report = compare(&FieldGrid::read(a)?, &FieldGrid::read(b)?)?;
    create_dir(dir)?;
    write_text(&dir.join("diff_report.csv"), &report.to_csv())?;
    report.pointwise.write(&dir.join("diff_field.csv"))?;
    Ok(report)
}

pub fn ode_bench_to_dir(cfg: &RunConfig, dir: &Path) -> Result<SweepTable> {
    if cfg.problem != ProblemKind::Ode {
        return Err(Error::config("ode-bench needs problem = \"ode\""));
    }
    write_manifest(cfg, dir)?;
    let table = run_sweep(&cfg.ode)?;
    write_text(&dir.join("ode_sweep.csv"), &table.to_csv())?;
    Ok(table)
}

/// Collocation points of every seed as `x,y,region,E,nu,k`.
pub fn sample_points_to_dir(cfg: &RunConfig, dir: &Path) -> Result<Vec<CollocationSet>> {
    field_problem(cfg)?;
    write_manifest(cfg, dir)?;
    let map = cfg.phase_map()?;
    let mut sets = Vec::new();
    for &seed in &cfg.seeds {
        let set = collocation(cfg, &map, seed)?;
        write_text(&dir.join(format!("points_seed{seed}.csv")), &points_csv(&set))?;
        sets.push(set);
    }
    Ok(sets)
}

pub fn points_csv(set: &CollocationSet) -> String {
    let mut region = vec!["interior"; set.len()];
    for e in Edge::ALL {
        let name = match e {
            Edge::Left => "left",
            Edge::Right => "right",
            Edge::Bottom => "bottom",
            Edge::Top => "top",
        };
        region[set.edge(e)].iter_mut().for_each(|r| *r = name);
    }
    let mut s = String::from("x,y,region,E,nu,k\n");
    for ((p, m), r) in set.points().iter().zip(set.materials()).zip(region) {
        s.push_str(&format!("{:.16e},{:.16e},{r},{},{},{}\n", p[0], p[1], m.e, m.nu, m.k));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::HomogeneousDomain;

    fn small_thermal() -> RunConfig {
        let mut cfg = RunConfig::new(ProblemKind::Thermal);
        cfg.domain.homogeneous = Some(HomogeneousDomain { nx: 4, ny: 4, lx: 1.0, ly: 1.0, phase: 1 });
        cfg.sampling = crate::domain::SampleSpec::new(30, 5);
        cfg.network.hidden_layers = 1;
        cfg.network.neurons = 4;
        cfg.training.epochs = 5;
        cfg.eval.nx = 5;
        cfg.eval.ny = 5;
        cfg
    }

    #[test]
    fn overrides_replace_fields() {
        let mut cfg = small_thermal();
        Overrides { seed: Some(9), epochs: Some(3), variant: Some(Variant::B) }.apply(&mut cfg).unwrap();
        assert_eq!((cfg.seeds.clone(), cfg.training.epochs, cfg.variant), (vec![9], 3, Variant::B));
    }

    #[test]
    fn pinn_runs_are_deterministic() {
        let cfg = small_thermal();
        let a = run_pinn(&cfg, 2).unwrap();
        let b = run_pinn(&cfg, 2).unwrap();
        assert_eq!(a.field.to_csv(), b.field.to_csv());
        assert_eq!(a.record, b.record);
    }

    #[test]
    fn fem_on_eval_grid_is_linear() {
        let cfg = small_thermal();
        let g = run_fem_on_eval_grid(&cfg).unwrap();
        for (p, t) in g.points().iter().zip(g.column("T").unwrap()) {
            assert!((t - (1.0 - p[0])).abs() < 1e-10);
        }
    }

    #[test]
    fn section_error_of_identical_fields_is_zero() {
        let cfg = small_thermal();
        let g = run_fem_on_eval_grid(&cfg).unwrap();
        assert_eq!(section_error(&g, &g, 0.5, &["T", "q_x"]).unwrap(), 0.0);
        assert!(section_error(&g, &g, 0.5, &["u_x"]).is_err());
    }

    #[test]
    fn ode_bench_rejects_field_config() {
        let dir = std::env::temp_dir();
        assert!(ode_bench_to_dir(&small_thermal(), &dir).is_err());
    }
}
