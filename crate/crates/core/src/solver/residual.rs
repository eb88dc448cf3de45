use num_complex::Complex64;

use crate::linalg::{fro, hcat, CMatrix};
use crate::network::{ChannelSet, Node};

use super::Beamformer;

/// Relative Frobenius residual of the alignment condition at each receiver
/// that sees interference.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub per_node: Vec<(Node, f64)>,
    pub max_residual: f64,
}

/// Channel from `tx` to `rx` after both slots: direct path plus relay path,
/// `H_{rx,tx} + G_rx T H^R_tx`. For `rx == tx` only the relay loop remains.
pub fn combined_channel(ch: &ChannelSet, t: &CMatrix, rx: Node, tx: Node) -> Option<CMatrix> {
    let relayed = ch.from_relay(rx)? * t * ch.to_relay(tx)?;
    if rx == tx {
        return Some(relayed);
    }
    Some(ch.direct(rx, tx)? + relayed)
}

pub fn interference_residual(ch: &ChannelSet, bf: &Beamformer) -> ResidualReport {
    let cfg = ch.config();
    let per_node: Vec<(Node, f64)> = cfg
        .receivers()
        .into_iter()
        .filter_map(|rx| {
            let interferers = cfg.interferers(rx);
            if interferers.is_empty() {
                return None;
            }
            let rows = cfg.antennas(rx);
            let after: Vec<CMatrix> = interferers
                .iter()
                .map(|&i| combined_channel(ch, &bf.relay_t, rx, i).expect("interfering link sampled"))
                .collect();
            let before = hcat(rows, interferers.iter().map(|&i| ch.direct(rx, i).expect("interfering link sampled")));
            let scale = fro(&before);
            let residual = if scale > 0.0 { fro(&hcat(rows, &after)) / scale } else { 0.0 };
            Some((rx, residual))
        })
        .collect();
    let max_residual = per_node.iter().map(|&(_, r)| r).fold(0.0, f64::max);
    ResidualReport { per_node, max_residual }
}

/// Desired-signal channel at `node`: `Ĥ + G T Ĥ^R` over its own transmitters
/// (`N × ΣM` at a BS), followed by the user's precoder columns at a downlink
/// UE (`M × d`). `None` when `node` does not receive in this scheme.
pub fn effective_channel(ch: &ChannelSet, bf: &Beamformer, node: Node) -> Option<CMatrix> {
    let cfg = ch.config();
    if !cfg.receives(node) {
        return None;
    }
    let rows = cfg.antennas(node);
    let mut blocks = Vec::new();
    for tx in cfg.desired_transmitters(node) {
        let h = combined_channel(ch, &bf.relay_t, node, tx)?;
        match (tx, node) {
            (Node::Bs(cell), Node::Ue { .. }) => {
                let v = bf.precoder(cell)?;
                let d = v.ncols() / cfg.downlink_users_of(cell).len();
                let pos = cfg.downlink_users_of(cell).iter().position(|&u| u == node)?;
                blocks.push(h * v.columns(pos * d, d));
            }
            _ => blocks.push(h),
        }
    }
    Some(hcat(rows, &blocks))
}

/// Largest `‖Ĥ_eff,j − (1 + α) Ĥ_j‖_F / ‖Ĥ_j‖_F` over BSs, for a boost
/// beamformer.
pub fn boost_deviation(ch: &ChannelSet, bf: &Beamformer) -> Option<f64> {
    let alpha = bf.alpha?;
    let cfg = ch.config();
    let worst = cfg
        .receivers()
        .into_iter()
        .map(|rx| {
            let rows = cfg.antennas(rx);
            let desired = cfg.desired_transmitters(rx);
            let direct = hcat(rows, desired.iter().map(|&t| ch.direct(rx, t).expect("desired link sampled")));
            let eff = effective_channel(ch, bf, rx).expect("receiver");
            fro(&(eff - &direct * Complex64::new(1.0 + alpha, 0.0))) / fro(&direct)
        })
        .fold(0.0, f64::max);
    Some(worst)
}
