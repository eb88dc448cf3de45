use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{db_to_linear, decorrelate, dof_slope, per_cell_rate, transmit_two_slots, CellRate, SimError, TransmitPayload};
use crate::linalg::{numeric_rank, CVector, RankTolerance};
use crate::network::{ChannelSet, NetworkConfig, Node};
use crate::solver::{effective_channel, interference_residual, solve, Beamformer};

pub const DEFAULT_SNR_GRID_DB: [f64; 6] = [0.0, 10.0, 20.0, 30.0, 40.0, 60.0];

#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub trials: usize,
    pub snr_db: Vec<f64>,
    pub seed: u64,
    pub tol: RankTolerance,
    /// Residuals above this count as violations.
    pub residual_tol: f64,
}

impl McOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            snr_db: DEFAULT_SNR_GRID_DB.to_vec(),
            seed,
            tol: RankTolerance::default(),
            residual_tol: 1e-8,
        }
    }

    pub fn with_snr_db(mut self, snr_db: Vec<f64>) -> Self {
        self.snr_db = snr_db;
        self
    }
}

/// Outcome of one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub trial: usize,
    /// Master seed of the run; with `trial` it reproduces this report.
    pub seed: u64,
    pub channel_seed: u64,
    pub feasible: bool,
    pub max_residual: Option<f64>,
    /// Numeric rank of each receiver's effective channel.
    pub eff_ranks: Vec<(Node, usize)>,
    /// Per-cell rates, one row per SNR grid point.
    pub rates: Vec<Vec<CellRate>>,
    /// Network-total slope between the two highest grid points.
    pub dof_estimate: Option<f64>,
    /// Largest relative error of the noiseless decorrelator output over
    /// receivers whose effective channel has full column rank.
    pub recovery_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellDof {
    pub uplink: Option<f64>,
    pub downlink: Option<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub infeasible_trials: usize,
    pub residual_violations: usize,
    pub max_residual: f64,
    /// Mean per-cell rates over feasible trials, one row per grid point.
    pub mean_rates: Vec<Vec<CellRate>>,
    pub mean_network_rate: Vec<f64>,
    /// Slopes of the mean rates between the two highest grid points.
    pub cell_dof: Option<Vec<CellDof>>,
    pub network_dof: Option<f64>,
    pub max_recovery_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOutcome {
    pub reports: Vec<TrialReport>,
    pub aggregate: Aggregate,
}

/// Channel and noise seeds of trial `trial`, drawn from stream `trial` of
/// the master seed.
pub fn trial_seeds(seed: u64, trial: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    (rng.next_u64(), rng.next_u64())
}

/// Indices of the two highest distinct grid points, lower first.
fn top_two(snr_db: &[f64]) -> Option<(usize, usize)> {
    let mut idx: Vec<usize> = (0..snr_db.len()).collect();
    idx.sort_by(|&a, &b| snr_db[b].total_cmp(&snr_db[a]));
    let hi = *idx.first()?;
    let lo = idx.into_iter().find(|&i| snr_db[i] < snr_db[hi])?;
    Some((lo, hi))
}

fn slope_between(snr_db: &[f64], lo_rate: f64, hi_rate: f64) -> Option<f64> {
    let (lo, hi) = top_two(snr_db)?;
    dof_slope(lo_rate, hi_rate, db_to_linear(snr_db[lo]), db_to_linear(snr_db[hi])).ok()
}

fn recovery_error(ch: &ChannelSet, bf: &Beamformer, noise_seed: u64) -> Option<f64> {
    let cfg = ch.config();
    let payload = TransmitPayload::gaussian(ch, bf, 1.0, noise_seed);
    let frame = transmit_two_slots(ch, bf, &payload, 0.0, noise_seed).ok()?;
    let mut worst: Option<f64> = None;
    for rx in cfg.receivers() {
        let eff = effective_channel(ch, bf, rx)?;
        if eff.ncols() == 0 || numeric_rank(&eff, RankTolerance::default()) < eff.ncols() {
            continue;
        }
        let reference: CVector = match rx {
            Node::Bs(_) => {
                let parts: Vec<&CVector> = cfg.desired_transmitters(rx).iter().map(|t| &payload.signals[t]).collect();
                CVector::from_iterator(eff.ncols(), parts.into_iter().flat_map(|v| v.iter().copied()))
            }
            Node::Ue { cell, .. } => {
                let bs = Node::Bs(cell);
                let d = eff.ncols();
                let pos = cfg.downlink_users_of(cell).iter().position(|&u| u == rx)?;
                payload.streams[&bs].rows(pos * d, d) * Complex64::new(payload.gains[&bs], 0.0)
            }
        };
        let estimate = decorrelate(&eff, &frame.combined(ch, bf, &payload, rx)?);
        let err = (estimate - &reference).norm() / reference.norm();
        worst = Some(worst.map_or(err, |w| w.max(err)));
    }
    worst
}

/// Runs trial `trial` of a Monte-Carlo experiment in isolation.
pub fn run_trial(config: &NetworkConfig, opts: &McOptions, trial: usize) -> TrialReport {
    let (channel_seed, noise_seed) = trial_seeds(opts.seed, trial);
    let ch = ChannelSet::sample(config, channel_seed);
    let mut report = TrialReport {
        trial,
        seed: opts.seed,
        channel_seed,
        feasible: false,
        max_residual: None,
        eff_ranks: Vec::new(),
        rates: Vec::new(),
        dof_estimate: None,
        recovery_error: None,
    };
    let Ok(bf) = solve(&ch, opts.tol) else {
        return report;
    };
    report.feasible = true;
    report.max_residual = Some(interference_residual(&ch, &bf).max_residual);
    report.eff_ranks = config
        .receivers()
        .into_iter()
        .filter_map(|rx| Some((rx, numeric_rank(&effective_channel(&ch, &bf, rx)?, opts.tol))))
        .collect();
    report.rates = opts.snr_db.iter().map(|&db| per_cell_rate(&ch, &bf, db_to_linear(db))).collect();
    if let Some((lo, hi)) = top_two(&opts.snr_db) {
        let total = |row: &Vec<CellRate>| row.iter().map(CellRate::total).sum::<f64>();
        report.dof_estimate = slope_between(&opts.snr_db, total(&report.rates[lo]), total(&report.rates[hi]));
    }
    report.recovery_error = recovery_error(&ch, &bf, noise_seed);
    report
}

fn mean_option(values: impl Iterator<Item = Option<f64>>, count: usize) -> Option<f64> {
    let mut sum = 0.0;
    for v in values {
        sum += v?;
    }
    Some(sum / count as f64)
}

fn aggregate(config: &NetworkConfig, opts: &McOptions, reports: &[TrialReport]) -> Aggregate {
    let feasible: Vec<&TrialReport> = reports.iter().filter(|r| r.feasible).collect();
    let count = feasible.len();
    let cells = config.cells();
    let mean_rates: Vec<Vec<CellRate>> = (0..opts.snr_db.len())
        .map(|s| {
            (0..cells)
                .map(|c| CellRate {
                    uplink: mean_option(feasible.iter().map(|r| r.rates[s][c].uplink), count),
                    downlink: mean_option(feasible.iter().map(|r| r.rates[s][c].downlink), count),
                })
                .collect()
        })
        .collect();
    let mean_network_rate: Vec<f64> = mean_rates.iter().map(|row| row.iter().map(CellRate::total).sum()).collect();

    let (cell_dof, network_dof) = match top_two(&opts.snr_db) {
        Some((lo, hi)) => {
            let slope = |a: f64, b: f64| slope_between(&opts.snr_db, a, b).expect("grid points ordered");
            let per_cell = (0..cells)
                .map(|c| {
                    let (l, h) = (mean_rates[lo][c], mean_rates[hi][c]);
                    CellDof {
                        uplink: l.uplink.zip(h.uplink).map(|(a, b)| slope(a, b)),
                        downlink: l.downlink.zip(h.downlink).map(|(a, b)| slope(a, b)),
                        total: slope(l.total(), h.total()),
                    }
                })
                .collect();
            (Some(per_cell), Some(slope(mean_network_rate[lo], mean_network_rate[hi])))
        }
        None => (None, None),
    };

    let residuals = feasible.iter().filter_map(|r| r.max_residual);
    Aggregate {
        snr_db: opts.snr_db.clone(),
        trials: reports.len(),
        infeasible_trials: reports.len() - count,
        residual_violations: feasible
            .iter()
            .filter(|r| r.max_residual.is_some_and(|x| x > opts.residual_tol))
            .count(),
        max_residual: residuals.fold(0.0, f64::max),
        mean_rates,
        mean_network_rate,
        cell_dof,
        network_dof,
        max_recovery_error: feasible
            .iter()
            .filter_map(|r| r.recovery_error)
            .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e)))),
    }
}

/// Independent trials in parallel; reports come back in trial order, so the
/// aggregate is bit-identical for a fixed `(config, seed)`.
pub fn monte_carlo(config: &NetworkConfig, opts: &McOptions) -> Result<McOutcome, SimError> {
    if opts.trials == 0 {
        return Err(SimError::Domain("trials must be at least 1".into()));
    }
    if opts.snr_db.is_empty() || opts.snr_db.iter().any(|x| !x.is_finite()) {
        return Err(SimError::Domain("SNR grid must be nonempty and finite".into()));
    }
    let reports: Vec<TrialReport> = (0..opts.trials).into_par_iter().map(|t| run_trial(config, opts, t)).collect();
    if reports.iter().all(|r| !r.feasible) {
        return Err(SimError::AllTrialsInfeasible { trials: opts.trials });
    }
    let aggregate = aggregate(config, opts, &reports);
    Ok(McOutcome { reports, aggregate })
}
