use std::fmt::Write as _;
use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use crate::autodiff::ParamVector;
use crate::error::{Error, Result};
use crate::loss::LossBreakdown;

/// Something that yields a loss breakdown and its parameter gradient.
pub trait Objective {
    fn num_params(&self) -> usize;

    /// Loss at `params`; the gradient of the total is written to `grad`.
    fn evaluate(&mut self, params: &[f64], grad: &mut [f64]) -> Result<LossBreakdown<f64>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Training stops once `|total| < stop_loss`.
    pub stop_loss: f64,
    pub adam: AdamConfig,
    /// Progress is logged every this many epochs (0 disables).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100_000,
            stop_loss: 1e-12,
            adam: AdamConfig::default(),
            log_every: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EpochRecord {
    pub epoch: usize,
    pub losses: LossBreakdown<f64>,
    pub total: f64,
    pub seconds: f64,
}

/// Wall-clock time is excluded: two runs are equal when their losses are.
impl PartialEq for EpochRecord {
    fn eq(&self, other: &Self) -> bool {
        self.epoch == other.epoch && self.losses == other.losses && self.total.to_bits() == other.total.to_bits()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainRecord {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
}

impl TrainRecord {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.total).collect()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// CSV `epoch,L_EF,L_DBC,L_cnc,L_SF,L_NBC,L_total`. Histories longer
    /// than 10^4 epochs keep every 10th row plus the last.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,L_EF,L_DBC,L_cnc,L_SF,L_NBC,L_total\n");
        let stride = if self.epochs.len() > 10_000 { 10 } else { 1 };
        let n = self.epochs.len();
        for (i, e) in self.epochs.iter().enumerate() {
            if i % stride != 0 && i + 1 != n {
                continue;
            }
            let l = &e.losses;
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                e.epoch, l.ef, l.dbc, l.cnc, l.sf, l.nbc, e.total
            );
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainStatus {
    /// The epoch budget ran out.
    Completed,
    /// `|total|` dropped below the stopping value.
    Converged,
    /// A non-finite loss or gradient appeared; parameters are the last
    /// finite ones.
    Diverged { epoch: usize, reason: String },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParamVector,
    pub record: TrainRecord,
    pub status: TrainStatus,
}

impl TrainOutcome {
    /// Turns divergence into a training error.
    pub fn into_result(self) -> Result<(ParamVector, TrainRecord)> {
        match self.status {
            TrainStatus::Diverged { epoch, reason } => Err(Error::Training { epoch, reason }),
            _ => Ok((self.params, self.record)),
        }
    }
}

/// Full-batch Adam from `params` until the budget is used up or the total
/// loss falls below the stopping value.
pub fn train(
    objective: &mut dyn Objective,
    params: ParamVector,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    config.adam.validate()?;
    let n = objective.num_params();
    if params.len() != n {
        return Err(Error::structural(format!(
            "objective has {n} parameters, initial vector {}",
            params.len()
        )));
    }
    let mut params = params;
    let mut grad = vec![0.0; n];
    let mut adam = AdamState::new(n, config.adam);
    let mut record = TrainRecord {
        seed,
        epochs: Vec::with_capacity(config.epochs),
    };
    let mut last_finite = params.clone();
    let mut status = TrainStatus::Completed;
    for epoch in 0..config.epochs {
        let start = Instant::now();
        let losses = objective.evaluate(&params, &mut grad)?;
        let total = losses.total();
        if !total.is_finite() {
            warn!("non-finite loss at epoch {epoch}; keeping last finite parameters");
            status = TrainStatus::Diverged {
                epoch,
                reason: format!("total loss is {total}"),
            };
            params = last_finite;
            break;
        }
        last_finite.0.copy_from_slice(&params);
        if total.abs() < config.stop_loss {
            record.epochs.push(EpochRecord {
                epoch,
                losses,
                total,
                seconds: start.elapsed().as_secs_f64(),
            });
            info!("stopping value reached at epoch {epoch}: {total:e}");
            status = TrainStatus::Converged;
            break;
        }
        if let Err(e) = adam.step(&mut params, &grad) {
            let reason = match e {
                Error::Training { reason, .. } => reason,
                other => return Err(other),
            };
            status = TrainStatus::Diverged { epoch, reason };
            params = last_finite;
            break;
        }
        record.epochs.push(EpochRecord {
            epoch,
            losses,
            total,
            seconds: start.elapsed().as_secs_f64(),
        });
        if config.log_every > 0 && epoch % config.log_every == 0 {
            debug!(
                "epoch {epoch}: total {total:.6e} (EF {:.3e} DBC {:.3e} cnc {:.3e} SF {:.3e} NBC {:.3e})",
                losses.ef, losses.dbc, losses.cnc, losses.sf, losses.nbc
            );
        }
    }
    Ok(TrainOutcome {
        params,
        record,
        status,
    })
}

/// Per-epoch mean and 95% band `mean +- 1.96 stderr` of several loss
/// histories.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceBand {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ConfidenceBand {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean,lower,upper\n");
        for i in 0..self.mean.len() {
            let _ = writeln!(out, "{i},{:.16e},{:.16e},{:.16e}", self.mean[i], self.lower[i], self.upper[i]);
        }
        out
    }
}

/// Band over histories truncated to the shortest one.
pub fn confidence_band(histories: &[Vec<f64>]) -> Result<ConfidenceBand> {
    if histories.len() < 2 {
        return Err(Error::config("a confidence band needs at least two runs"));
    }
    let len = histories.iter().map(Vec::len).min().unwrap_or(0);
    let n = histories.len() as f64;
    let mut band = ConfidenceBand {
        mean: Vec::with_capacity(len),
        lower: Vec::with_capacity(len),
        upper: Vec::with_capacity(len),
    };
    for i in 0..len {
        let mean = histories.iter().map(|h| h[i]).sum::<f64>() / n;
        let var = histories.iter().map(|h| (h[i] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let half = 1.96 * (var / n).sqrt();
        band.mean.push(mean);
        band.lower.push(mean - half);
        band.upper.push(mean + half);
    }
    Ok(band)
}

/// Runs `run` once per seed and bands the total-loss histories.
pub fn repeat_runs(
    seeds: &[u64],
    mut run: impl FnMut(u64) -> Result<TrainRecord>,
) -> Result<(Vec<TrainRecord>, ConfidenceBand)> {
    if seeds.len() < 2 {
        return Err(Error::config("repeat runs need at least two seeds"));
    }
    let records = seeds.iter().map(|&s| run(s)).collect::<Result<Vec<_>>>()?;
    let band = confidence_band(&records.iter().map(TrainRecord::totals).collect::<Vec<_>>())?;
    Ok((records, band))
}
