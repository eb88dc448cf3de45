//! Closed-form relay sizing and degrees-of-freedom accounting.

use num_rational::Ratio;

use super::config::{NetworkConfig, Scheme};

pub type Dof = Ratio<u64>;

fn whole(x: usize) -> Dof {
    Dof::from_integer(x as u64)
}

fn half(x: Dof) -> Dof {
    x / 2
}

/// Relay antenna count that guarantees a relay beamformer exists for
/// generic channels.
pub fn required_relay_antennas(config: &NetworkConfig) -> usize {
    let c = config.cells();
    match config.scheme() {
        Scheme::Imac => {
            let per_cell_ue: Vec<usize> = (0..c)
                .map(|j| (0..config.users(j)).map(|k| config.ue_antennas(j, k)).sum())
                .collect();
            let total_ue: usize = per_cell_ue.iter().sum();
            let worst_interference = per_cell_ue.iter().map(|own| total_ue - own).max().unwrap_or(0);
            worst_interference.max(config.total_bs_antennas())
        }
        Scheme::ImacBoost => config.total_ue_antennas().max(config.total_bs_antennas()),
        Scheme::Ibc => {
            let (k, m, n) = config.symmetric_dims().expect("ibc configs are symmetric");
            ((c - 1) * n).max(c * k * m)
        }
        Scheme::Fd | Scheme::FdInstantaneous => {
            let (k, m, n) = config.symmetric_dims().expect("fd configs are symmetric");
            c * (k * m + n)
        }
        Scheme::HdUeFdBs => {
            let (_, m, n) = config.symmetric_dims().expect("fd configs are symmetric");
            let (k1, k2) = (config.uplink_users(), config.downlink_users());
            let bs_tx = if k2 > 0 { n } else { 0 };
            let bs_rx = if k1 > 0 { n } else { 0 };
            // widest interference seen by a BS, by a downlink UE, and the
            // total receive dimension served through the relay
            let bs_side = if k1 > 0 { (c - 1) * (k1 * m + bs_tx) } else { 0 };
            let ue_side = if k2 > 0 { (c - 1) * n + c * k1 * m } else { 0 };
            let receive = c * (bs_rx + k2 * m);
            bs_side.max(ue_side).max(receive)
        }
    }
}

/// Achievable DoF of each scheme plus two reference bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DofSummary {
    /// One entry per cell.
    pub per_cell: Vec<Dof>,
    /// DoF of the BS receive side (uplink schemes, full duplex) or transmit
    /// side (downlink); for symmetric networks.
    pub per_bs: Option<Dof>,
    /// DoF of one downlink UE.
    pub per_ue: Option<Dof>,
    pub network_total: Dof,
    /// Linear cooperative bound `KM + N`.
    pub linear_coop_bound: Option<Dof>,
    /// Information-theoretic bound of the IMAC, `KMN / (KM + N)`.
    pub imac_info_bound: Option<Dof>,
}

impl DofSummary {
    /// The per-cell DoF when all cells agree.
    pub fn uniform_per_cell(&self) -> Option<Dof> {
        let first = *self.per_cell.first()?;
        self.per_cell.iter().all(|&d| d == first).then_some(first)
    }
}

pub fn closed_form_dof(config: &NetworkConfig) -> DofSummary {
    let c = config.cells();
    let dims = config.symmetric_dims();

    let (per_cell, per_bs, per_ue) = match config.scheme() {
        Scheme::Imac | Scheme::ImacBoost => {
            let per_cell: Vec<Dof> = (0..c)
                .map(|j| {
                    let m_sum: usize = (0..config.users(j)).map(|k| config.ue_antennas(j, k)).sum();
                    half(whole(config.bs_antennas(j).min(m_sum)))
                })
                .collect();
            let per_bs = dims.map(|_| per_cell[0]);
            (per_cell, per_bs, None)
        }
        Scheme::Ibc => {
            let (k, _, n) = dims.expect("ibc configs are symmetric");
            let d = config.streams_per_ue();
            let cell = half(whole((k * d).min(n)));
            (vec![cell; c], Some(cell), Some(cell / k as u64))
        }
        Scheme::Fd | Scheme::FdInstantaneous => {
            let (k, m, n) = dims.expect("fd configs are symmetric");
            let scale = if config.scheme() == Scheme::FdInstantaneous { 2 } else { 1 };
            let bs = half(whole((k * m).min(n))) * scale;
            let ue = half(whole(m).min(Dof::new(n as u64, k as u64))) * scale;
            (vec![bs + ue * k as u64; c], Some(bs), Some(ue))
        }
        Scheme::HdUeFdBs => {
            let (_, m, n) = dims.expect("fd configs are symmetric");
            let (k1, k2) = (config.uplink_users(), config.downlink_users());
            let bs = half(whole((k1 * m).min(n)));
            let ue = (k2 > 0).then(|| half(whole(m).min(Dof::new(n as u64, k2 as u64))));
            let cell = bs + ue.unwrap_or_default() * k2 as u64;
            (vec![cell; c], Some(bs), ue)
        }
    };

    let network_total = per_cell.iter().copied().sum();
    let (linear_coop_bound, imac_info_bound) = match dims {
        Some((k, m, n)) => {
            let km = (k * m) as u64;
            let n = n as u64;
            (Some(Dof::from_integer(km + n)), Some(Dof::new(km * n, km + n)))
        }
        None => (None, None),
    };
    DofSummary { per_cell, per_bs, per_ue, network_total, linear_coop_bound, imac_info_bound }
}
