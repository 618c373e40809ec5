//! Small 1-D benchmark: the same network trained on a first- or
//! second-order residual of an ODE with a known solution.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{init_params, BackwardScratch, BatchTrace, DerivOrder, Mlp, CH_X, CH_XX, CH_VALUE};
use crate::optimizer::{AdamConfig, AdamState};

pub const INTERVAL: (f64, f64) = (0.0, 10.0);
pub const EXTRAPOLATION_END: f64 = 15.0;

pub fn y_true(x: f64) -> f64 {
    x.sin() + 0.1 * x + 0.1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OdeOrder {
    #[serde(rename = "1")]
    First,
    #[serde(rename = "2")]
    Second,
}

impl OdeOrder {
    pub const ALL: [OdeOrder; 2] = [OdeOrder::First, OdeOrder::Second];

    pub fn as_u8(self) -> u8 {
        match self {
            OdeOrder::First => 1,
            OdeOrder::Second => 2,
        }
    }
}

impl fmt::Display for OdeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl FromStr for OdeOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(OdeOrder::First),
            "2" => Ok(OdeOrder::Second),
            _ => Err(Error::config(format!("ODE order must be 1 or 2, got {s:?}"))),
        }
    }
}

/// Residual `y' - cos x - 0.1` (first order) or `y'' + sin x` (second
/// order), plus two point conditions `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeProblem {
    pub order: OdeOrder,
    pub bcs: [(f64, f64); 2],
}

impl OdeProblem {
    /// Point conditions taken from the exact solution at both ends.
    pub fn new(order: OdeOrder) -> Self {
        OdeProblem {
            order,
            bcs: [(INTERVAL.0, y_true(INTERVAL.0)), (INTERVAL.1, y_true(INTERVAL.1))],
        }
    }

    /// Point conditions rounded to three digits, `y(0) = 0.1, y(10) = 0.556`.
    pub fn rounded(order: OdeOrder) -> Self {
        OdeProblem {
            order,
            bcs: [(0.0, 0.1), (10.0, 0.556)],
        }
    }

    pub fn residual(&self, x: f64, dy: f64, d2y: f64) -> f64 {
        match self.order {
            OdeOrder::First => dy - x.cos() - 0.1,
            OdeOrder::Second => d2y + x.sin(),
        }
    }

    fn deriv_order(&self) -> DerivOrder {
        match self.order {
            OdeOrder::First => DerivOrder::First,
            OdeOrder::Second => DerivOrder::Second,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeLoss {
    pub residual: f64,
    pub boundary: f64,
}

impl OdeLoss {
    pub fn total(&self) -> f64 {
        self.residual + self.boundary
    }
}

/// Loss from values `(y, y', y'')` at the collocation points and `y` at
/// the two condition points.
pub fn ode_loss_from_values(problem: &OdeProblem, points: &[f64], values: &[[f64; 3]], ends: [f64; 2]) -> Result<OdeLoss> {
    if points.is_empty() || points.len() != values.len() {
        return Err(Error::structural("ODE loss needs one value triple per collocation point"));
    }
    let residual = points
        .iter()
        .zip(values)
        .map(|(&x, v)| problem.residual(x, v[1], v[2]).powi(2))
        .sum::<f64>()
        / points.len() as f64;
    let boundary = problem.bcs.iter().zip(ends).map(|(&(_, y), e)| (e - y).powi(2)).sum();
    Ok(OdeLoss { residual, boundary })
}

fn batch_points(problem: &OdeProblem, points: &[f64]) -> Vec<[f64; 2]> {
    points
        .iter()
        .copied()
        .chain(problem.bcs.iter().map(|b| b.0))
        .map(|x| [x, 0.0])
        .collect()
}

fn losses_and_adjoint(
    problem: &OdeProblem,
    points: &[f64],
    trace: &BatchTrace,
    adjoint: &mut Vec<f64>,
) -> Result<OdeLoss> {
    let n = points.len();
    let bsz = trace.batch();
    let second = problem.order == OdeOrder::Second;
    let values: Vec<[f64; 3]> = (0..n)
        .map(|b| {
            [
                trace.output_at(0, CH_VALUE, b),
                trace.output_at(0, CH_X, b),
                if second { trace.output_at(0, CH_XX, b) } else { 0.0 },
            ]
        })
        .collect();
    let ends = [trace.output_at(0, CH_VALUE, n), trace.output_at(0, CH_VALUE, n + 1)];
    let loss = ode_loss_from_values(problem, points, &values, ends)?;
    adjoint.clear();
    adjoint.resize(trace.output().len(), 0.0);
    let ch = if second { CH_XX } else { CH_X };
    for (b, (&x, v)) in points.iter().zip(&values).enumerate() {
        adjoint[ch * bsz + b] = 2.0 * problem.residual(x, v[1], v[2]) / n as f64;
    }
    for (k, &(_, y)) in problem.bcs.iter().enumerate() {
        adjoint[CH_VALUE * bsz + n + k] = 2.0 * (ends[k] - y);
    }
    Ok(loss)
}

/// Loss of `net` on `points`.
pub fn ode_loss(problem: &OdeProblem, net: &Mlp, points: &[f64]) -> Result<OdeLoss> {
    check_net(net)?;
    let trace = net.forward_batch(&batch_points(problem, points), problem.deriv_order())?;
    losses_and_adjoint(problem, points, &trace, &mut Vec::new())
}

fn check_net(net: &Mlp) -> Result<()> {
    if net.input_dim() != 1 || net.output_dim() != 1 {
        return Err(Error::structural("ODE networks map one input to one output"));
    }
    Ok(())
}

/// `n` equally spaced points on `[a, b]`, both ends included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Full-batch Adam on the ODE loss. Returns the loss history.
pub fn train_ode(problem: &OdeProblem, net: &mut Mlp, points: &[f64], epochs: usize, adam: AdamConfig) -> Result<Vec<OdeLoss>> {
    check_net(net)?;
    adam.validate()?;
    let batch = batch_points(problem, points);
    let mut state = AdamState::new(net.num_params(), adam);
    let mut trace = BatchTrace::default();
    let mut scratch = BackwardScratch::default();
    let mut adjoint = Vec::new();
    let mut grad = vec![0.0; net.num_params()];
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        net.forward_batch_into(&batch, problem.deriv_order(), &mut trace)?;
        let loss = losses_and_adjoint(problem, points, &trace, &mut adjoint)?;
        if !loss.total().is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "ODE loss is not finite".into(),
            });
        }
        history.push(loss);
        grad.iter_mut().for_each(|g| *g = 0.0);
        net.backward_batch(&trace, &adjoint, &mut grad, &mut scratch)?;
        state.step(net.params_mut(), &grad)?;
    }
    Ok(history)
}

/// Mean absolute difference to the exact solution on `n` points of `[a, b]`.
pub fn mae_against_truth(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64, n: usize) -> Result<f64> {
    let xs = linspace(a, b, n);
    let mut sum = 0.0;
    for &x in &xs {
        sum += (f(x)? - y_true(x)).abs();
    }
    Ok(sum / xs.len().max(1) as f64)
}

fn net_mae(net: &Mlp, a: f64, b: f64, n: usize) -> Result<f64> {
    let xs = linspace(a, b, n);
    let pts: Vec<[f64; 2]> = xs.iter().map(|&x| [x, 0.0]).collect();
    let trace = net.forward_batch(&pts, DerivOrder::First)?;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (trace.output_at(0, CH_VALUE, i) - y_true(x)).abs())
        .sum::<f64>()
        / xs.len().max(1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub counts: Vec<usize>,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    pub hidden_layers: usize,
    pub neurons: usize,
    pub adam: AdamConfig,
    pub truth_points: usize,
    /// Use the three-digit rounded end conditions instead of exact ones.
    pub rounded_bcs: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            counts: vec![10, 20, 30, 50, 100],
            epochs: 1500,
            seeds: vec![1, 2, 3],
            hidden_layers: 4,
            neurons: 20,
            adam: AdamConfig::default(),
            truth_points: 1001,
            rounded_bcs: false,
        }
    }
}

impl SweepConfig {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![1];
        s.extend(std::iter::repeat_n(self.neurons, self.hidden_layers));
        s.push(1);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.iter().any(|&c| c < 2) || self.counts.is_empty() {
            return Err(Error::config("ODE sweep counts must be at least 2"));
        }
        if self.seeds.is_empty() || self.truth_points < 2 || self.neurons == 0 || self.hidden_layers == 0 {
            return Err(Error::config("ODE sweep needs seeds, a truth grid and a non-empty network"));
        }
        self.adam.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRun {
    pub count: usize,
    pub order: OdeOrder,
    pub seed: u64,
    pub mae: f64,
    pub extrapolation_mae: f64,
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub count: usize,
    pub order: OdeOrder,
    pub mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub runs: Vec<SweepRun>,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn cell(&self, count: usize, order: OdeOrder) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.count == count && c.order == order)
    }

    /// Per-run rows followed by aggregate rows with `seed = mean|std`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("count,order,seed,mae,extrapolation_mae,final_loss\n");
        for r in &self.runs {
            s.push_str(&format!(
                "{},{},{},{:.16e},{:.16e},{:.16e}\n",
                r.count, r.order, r.seed, r.mae, r.extrapolation_mae, r.final_loss
            ));
        }
        for c in &self.cells {
            s.push_str(&format!("{},{},mean,{:.16e},,\n", c.count, c.order, c.mean));
            s.push_str(&format!("{},{},std,{:.16e},,\n", c.count, c.order, c.std));
        }
        s
    }
}

pub fn run_single(config: &SweepConfig, count: usize, order: OdeOrder, seed: u64) -> Result<SweepRun> {
    let problem = if config.rounded_bcs {
        OdeProblem::rounded(order)
    } else {
        OdeProblem::new(order)
    };
    let mut net = init_params(&config.layer_sizes(), seed)?;
    let points = linspace(INTERVAL.0, INTERVAL.1, count);
    let history = train_ode(&problem, &mut net, &points, config.epochs, config.adam)?;
    let final_loss = match history.last() {
        Some(l) => l.total(),
        None => ode_loss(&problem, &net, &points)?.total(),
    };
    let mae = net_mae(&net, INTERVAL.0, INTERVAL.1, config.truth_points)?;
    // (10, 15]: drop the shared left end
    let h = (EXTRAPOLATION_END - INTERVAL.1) / (config.truth_points - 1) as f64;
    let extrapolation_mae = net_mae(&net, INTERVAL.1 + h, EXTRAPOLATION_END, config.truth_points - 1)?;
    Ok(SweepRun {
        count,
        order,
        seed,
        mae,
        extrapolation_mae,
        final_loss,
    })
}

/// Every (count, order, seed) combination, spread over the available
/// cores. The result does not depend on the thread count.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepTable> {
    config.validate()?;
    let mut jobs = Vec::new();
    for &count in &config.counts {
        for order in OdeOrder::ALL {
            for &seed in &config.seeds {
                jobs.push((count, order, seed));
            }
        }
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len());
    let chunk = jobs.len().div_ceil(threads);
    let results: Vec<Result<SweepRun>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|&(c, o, sd)| run_single(config, c, o, sd)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for &count in &config.counts {
        for order in OdeOrder::ALL {
            let maes: Vec<f64> = runs
                .iter()
                .filter(|r| r.count == count && r.order == order)
                .map(|r| r.mae)
                .collect();
            let n = maes.len() as f64;
            let mean = maes.iter().sum::<f64>() / n;
            let std = if maes.len() > 1 {
                (maes.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            cells.push(SweepCell { count, order, mean, std });
        }
    }
    Ok(SweepTable { runs, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exact_values(xs: &[f64]) -> Vec<[f64; 3]> {
        xs.iter().map(|&x| [y_true(x), x.cos() + 0.1, -x.sin()]).collect()
    }

    #[test]
    fn exact_solution_zero_loss() {
        let xs = linspace(0.0, 10.0, 37);
        for order in OdeOrder::ALL {
            let p = OdeProblem::new(order);
            let l = ode_loss_from_values(&p, &xs, &exact_values(&xs), [y_true(0.0), y_true(10.0)]).unwrap();
            assert!(l.total() <= 1e-20, "{l:?}");
        }
    }

    #[test]
    fn zero_net_boundary_part() {
        let xs = linspace(0.0, 10.0, 11);
        let net = Mlp::zeros(&[1, 5, 1]).unwrap();
        for order in OdeOrder::ALL {
            let l = ode_loss(&OdeProblem::rounded(order), &net, &xs).unwrap();
            assert_relative_eq!(l.boundary, 0.319136, epsilon = 1e-15);
        }
        let l = ode_loss(&OdeProblem::rounded(OdeOrder::Second), &net, &xs).unwrap();
        let expect = xs.iter().map(|x| x.sin().powi(2)).sum::<f64>() / 11.0;
        assert_relative_eq!(l.residual, expect, epsilon = 1e-14);
    }

    #[test]
    fn rounded_end_value() {
        assert!((y_true(10.0) - 0.556).abs() < 5e-4);
    }

    #[test]
    fn truth_mae_of_truth_is_zero() {
        assert_eq!(mae_against_truth(|x| Ok(y_true(x)), 0.0, 10.0, 1001).unwrap(), 0.0);
    }

    #[test]
    fn adjoint_matches_finite_differences() {
        let xs = linspace(0.0, 10.0, 7);
        for order in OdeOrder::ALL {
            let p = OdeProblem::new(order);
            let net = init_params(&[1, 6, 6, 1], 3).unwrap();
            let trace = net.forward_batch(&batch_points(&p, &xs), p.deriv_order()).unwrap();
            let mut adj = Vec::new();
            losses_and_adjoint(&p, &xs, &trace, &mut adj).unwrap();
            let mut grad = vec![0.0; net.num_params()];
            net.backward_batch(&trace, &adj, &mut grad, &mut BackwardScratch::default()).unwrap();
            for i in [0, 5, 17, net.num_params() - 1] {
                let h = 1e-6;
                let mut a = net.clone();
                a.params_mut()[i] += h;
                let mut b = net.clone();
                b.params_mut()[i] -= h;
                let fd = (ode_loss(&p, &a, &xs).unwrap().total() - ode_loss(&p, &b, &xs).unwrap().total()) / (2.0 * h);
                assert_relative_eq!(grad[i], fd, max_relative = 1e-5, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn training_reduces_loss() {
        let xs = linspace(0.0, 10.0, 20);
        let p = OdeProblem::new(OdeOrder::First);
        let mut net = init_params(&[1, 10, 10, 1], 1).unwrap();
        let h = train_ode(&p, &mut net, &xs, 200, AdamConfig::default()).unwrap();
        assert!(h.last().unwrap().total() < h[0].total());
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = SweepConfig {
            counts: vec![5],
            epochs: 20,
            seeds: vec![1, 2],
            hidden_layers: 2,
            neurons: 5,
            truth_points: 101,
            ..Default::default()
        };
        let a = run_sweep(&cfg).unwrap();
        assert_eq!(a, run_sweep(&cfg).unwrap());
        assert_eq!(a.runs.len(), 4);
        assert!(a.to_csv().lines().count() == 1 + 4 + 4);
    }
}
