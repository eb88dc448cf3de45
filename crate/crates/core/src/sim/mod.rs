//! Two-slot transmission, decorrelating receivers and rate/DoF estimation.
//!
//! In slot 1 every transmitter sends and the relay and receivers listen; in
//! slot 2 the relay forwards `T y_R` while transmitters are silent, so every
//! rate carries a ½ pre-log. The instantaneous full-duplex variant forwards
//! within the same slot and drops the ½. Noise is unit-variance CN(0, 1)
//! unless stated otherwise, so the transmit power `P` doubles as the SNR.

mod monte_carlo;

use std::collections::BTreeMap;

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{complex_gaussian, pseudo_inverse, CMatrix, CVector, RankTolerance};
use crate::network::{ChannelSet, Node};
use crate::solver::{combined_channel, Beamformer};

pub use monte_carlo::{
    monte_carlo, run_trial, trial_seeds, Aggregate, CellDof, McOptions, McOutcome, TrialReport,
    DEFAULT_SNR_GRID_DB,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("all {trials} trials were infeasible")]
    AllTrialsInfeasible { trials: usize },
}

/// Transmitted signals of one channel use.
///
/// A UE sends `x = sqrt(P/M) s` and a BS sends `x = β V s` with
/// `β = sqrt(P / ‖V‖_F²)`, where `s` has i.i.d. CN(0, 1) entries, so every
/// node meets the average power budget `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitPayload {
    pub power: f64,
    /// Unit-variance symbols `s` per transmitter.
    pub streams: BTreeMap<Node, CVector>,
    /// Scalar gain applied to `s` (before the precoder at a BS).
    pub gains: BTreeMap<Node, f64>,
    /// Antenna signals `x` per transmitter.
    pub signals: BTreeMap<Node, CVector>,
}

/// Precoding matrix `F` with `x = F s` for transmitter `tx` at power `p`.
fn shaping(ch: &ChannelSet, bf: &Beamformer, tx: Node, p: f64) -> (CMatrix, f64) {
    let cfg = ch.config();
    match (tx, bf.precoder(tx.cell())) {
        (Node::Bs(_), Some(v)) => {
            let gain = (p / v.norm_squared()).sqrt();
            (v * Complex64::new(gain, 0.0), gain)
        }
        _ => {
            let m = cfg.antennas(tx);
            let gain = (p / m as f64).sqrt();
            (CMatrix::identity(m, m) * Complex64::new(gain, 0.0), gain)
        }
    }
}

impl TransmitPayload {
    /// Draws Gaussian symbols for every transmitter of the scheme.
    pub fn gaussian(ch: &ChannelSet, bf: &Beamformer, power: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut payload = Self { power, streams: BTreeMap::new(), gains: BTreeMap::new(), signals: BTreeMap::new() };
        for tx in ch.config().transmitters() {
            let (f, gain) = shaping(ch, bf, tx, power);
            let s: CVector = complex_gaussian(f.ncols(), 1, &mut rng).column(0).into_owned();
            payload.signals.insert(tx, &f * &s);
            payload.streams.insert(tx, s);
            payload.gains.insert(tx, gain);
        }
        payload
    }
}

/// Observations of one channel use. For the instantaneous scheme the relay
/// path arrives in the same slot; `slot2` then holds the relayed component
/// without a second receiver-noise draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    pub slot1: BTreeMap<Node, CVector>,
    pub slot2: BTreeMap<Node, CVector>,
    pub relay: CVector,
    pub noise1: BTreeMap<Node, CVector>,
    pub noise2: BTreeMap<Node, CVector>,
    pub relay_noise: CVector,
}

fn noise(len: usize, variance: f64, rng: &mut ChaCha8Rng) -> CVector {
    complex_gaussian(len, 1, rng).column(0) * Complex64::new(variance.sqrt(), 0.0)
}

pub fn transmit_two_slots(
    ch: &ChannelSet,
    bf: &Beamformer,
    payload: &TransmitPayload,
    noise_variance: f64,
    noise_seed: u64,
) -> Result<ReceivedFrame, SimError> {
    let cfg = ch.config();
    let nr = cfg.relay_antennas();
    if bf.relay_t.shape() != (nr, nr) {
        return Err(SimError::Dimension(format!("relay matrix is {:?}, expected {nr}×{nr}", bf.relay_t.shape())));
    }
    for tx in cfg.transmitters() {
        let got = payload.signals.get(&tx).map(|x| x.len());
        if got != Some(cfg.antennas(tx)) {
            return Err(SimError::Dimension(format!("payload for {tx} has length {got:?}, expected {}", cfg.antennas(tx))));
        }
    }
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(SimError::Domain(format!("noise variance must be nonnegative, got {noise_variance}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let relay_noise = noise(nr, noise_variance, &mut rng);
    let mut relay = relay_noise.clone();
    for (tx, x) in &payload.signals {
        relay += ch.to_relay(*tx).expect("transmitter has a relay link") * x;
    }
    let forwarded = &bf.relay_t * &relay;

    let instantaneous = cfg.scheme().is_instantaneous();
    let mut frame = ReceivedFrame {
        slot1: BTreeMap::new(),
        slot2: BTreeMap::new(),
        relay,
        noise1: BTreeMap::new(),
        noise2: BTreeMap::new(),
        relay_noise,
    };
    for rx in cfg.receivers() {
        let n = cfg.antennas(rx);
        let n1 = noise(n, noise_variance, &mut rng);
        let n2 = if instantaneous { CVector::zeros(n) } else { noise(n, noise_variance, &mut rng) };
        let mut y1 = n1.clone();
        for (tx, x) in &payload.signals {
            if *tx != rx {
                y1 += ch.direct(rx, *tx).expect("direct link sampled") * x;
            }
        }
        let y2 = ch.from_relay(rx).expect("receiver has a relay link") * &forwarded + &n2;
        frame.slot1.insert(rx, y1);
        frame.slot2.insert(rx, y2);
        frame.noise1.insert(rx, n1);
        frame.noise2.insert(rx, n2);
    }
    Ok(frame)
}

impl ReceivedFrame {
    /// `y₁ + y₂` at `rx`, with the relayed copy of `rx`'s own transmission
    /// (known to `rx`) removed.
    pub fn combined(&self, ch: &ChannelSet, bf: &Beamformer, payload: &TransmitPayload, rx: Node) -> Option<CVector> {
        let mut y = self.slot1.get(&rx)? + self.slot2.get(&rx)?;
        if let Some(own) = payload.signals.get(&rx) {
            y -= combined_channel(ch, &bf.relay_t, rx, rx)? * own;
        }
        Some(y)
    }
}

/// Pseudo-inverse receiver `x̂ = H_eff† y`.
pub fn decorrelate(h_eff: &CMatrix, combined: &CVector) -> CVector {
    pseudo_inverse(h_eff, RankTolerance::default()) * combined
}

/// Per-cell achievable rates in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRate {
    /// Rate decoded at the BS.
    pub uplink: Option<f64>,
    /// Sum rate of the cell's downlink UEs.
    pub downlink: Option<f64>,
}

impl CellRate {
    pub fn total(&self) -> f64 {
        self.uplink.unwrap_or(0.0) + self.downlink.unwrap_or(0.0)
    }
}

fn log2_det_hpd(m: &CMatrix) -> f64 {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let chol = Cholesky::new(sym).expect("covariance is positive definite");
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>() / std::f64::consts::LN_2
}

/// Rate of the receiver `rx` at transmit power `p`, treating residual
/// interference and other users' streams as Gaussian noise.
pub fn receiver_rate(ch: &ChannelSet, bf: &Beamformer, rx: Node, p: f64) -> f64 {
    let cfg = ch.config();
    let instantaneous = cfg.scheme().is_instantaneous();
    let n = cfg.antennas(rx);
    let gt = ch.from_relay(rx).expect("receiver has a relay link") * &bf.relay_t;
    let receiver_noise = if instantaneous { 1.0 } else { 2.0 };
    let q = CMatrix::identity(n, n) * Complex64::new(receiver_noise, 0.0) + &gt * gt.adjoint();

    let desired = cfg.desired_transmitters(rx);
    let mut interference = CMatrix::zeros(n, n);
    let mut signal = CMatrix::zeros(n, n);
    for tx in cfg.transmitters() {
        if tx == rx {
            continue;
        }
        let e = combined_channel(ch, &bf.relay_t, rx, tx).expect("link sampled") * shaping(ch, bf, tx, p).0;
        if !desired.contains(&tx) {
            interference += &e * e.adjoint();
            continue;
        }
        match (tx, rx) {
            (Node::Bs(cell), Node::Ue { .. }) => {
                let users = cfg.downlink_users_of(cell);
                let d = e.ncols() / users.len();
                let pos = users.iter().position(|&u| u == rx).expect("served user");
                for (k, _) in users.iter().enumerate() {
                    let block = e.columns(k * d, d);
                    let cov = block * block.adjoint();
                    if k == pos {
                        signal += cov;
                    } else {
                        interference += cov;
                    }
                }
            }
            _ => signal += &e * e.adjoint(),
        }
    }
    let base = q + interference;
    let pre = if instantaneous { 1.0 } else { 0.5 };
    (pre * (log2_det_hpd(&(&base + signal)) - log2_det_hpd(&base))).max(0.0)
}

pub fn per_cell_rate(ch: &ChannelSet, bf: &Beamformer, p: f64) -> Vec<CellRate> {
    let cfg = ch.config();
    (0..cfg.cells())
        .map(|cell| {
            let bs = Node::Bs(cell);
            let uplink = cfg.receives(bs).then(|| receiver_rate(ch, bf, bs, p));
            let users = cfg.downlink_users_of(cell);
            let downlink = (!users.is_empty()).then(|| users.iter().map(|&u| receiver_rate(ch, bf, u, p)).sum());
            CellRate { uplink, downlink }
        })
        .collect()
}

/// Rate increase per doubling of power between two operating points.
pub fn dof_slope(rate_lo: f64, rate_hi: f64, p_lo: f64, p_hi: f64) -> Result<f64, SimError> {
    if !(p_lo > 0.0 && p_hi > p_lo && p_hi.is_finite()) {
        return Err(SimError::Domain(format!("need 0 < P_lo < P_hi, got P_lo = {p_lo}, P_hi = {p_hi}")));
    }
    Ok((rate_hi - rate_lo) / (p_hi.log2() - p_lo.log2()))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests;
