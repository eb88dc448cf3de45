//! Augmented channel matrices seen by one receiving node.

use thiserror::Error;

use super::channels::{ChannelSet, Node};
use super::config::Scheme;
use crate::linalg::{hcat, CMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("{what} index {index} out of range (limit {limit})")]
    Index { what: &'static str, index: usize, limit: usize },
    #[error("operation requires scheme {expected}, channel set uses {got}")]
    Scheme { expected: &'static str, got: Scheme },
    #[error("{0} does not receive in this scheme")]
    NotReceiver(Node),
}

/// Interference and desired channel blocks for one receiver, each block
/// ordered by [`Node`] order (BSs by cell, then UEs by cell and user).
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedView {
    pub owner: Node,
    /// Direct channels from interfering transmitters to `owner`.
    pub interference_direct: CMatrix,
    /// Channels from the same interferers to the relay.
    pub interference_relay_side: CMatrix,
    pub desired_direct: CMatrix,
    pub desired_relay_side: CMatrix,
    pub interferers: Vec<Node>,
    pub desired: Vec<Node>,
}

/// Builds the view of any receiver in the channel set's scheme.
pub fn view_for(ch: &ChannelSet, owner: Node) -> Result<AugmentedView, NetworkError> {
    let cfg = ch.config();
    if !cfg.receives(owner) {
        return Err(NetworkError::NotReceiver(owner));
    }
    let rows = cfg.antennas(owner);
    let nr = cfg.relay_antennas();
    let interferers = cfg.interferers(owner);
    let desired = cfg.desired_transmitters(owner);
    let direct = |txs: &[Node]| {
        hcat(rows, txs.iter().map(|&t| ch.direct(owner, t).expect("link sampled for scheme")))
    };
    let relay = |txs: &[Node]| {
        hcat(nr, txs.iter().map(|&t| ch.to_relay(t).expect("link sampled for scheme")))
    };
    Ok(AugmentedView {
        owner,
        interference_direct: direct(&interferers),
        interference_relay_side: relay(&interferers),
        desired_direct: direct(&desired),
        desired_relay_side: relay(&desired),
        interferers,
        desired,
    })
}

fn check_cell(ch: &ChannelSet, cell: usize) -> Result<(), NetworkError> {
    let limit = ch.config().cells();
    if cell >= limit {
        return Err(NetworkError::Index { what: "cell", index: cell, limit });
    }
    Ok(())
}

/// Uplink view of BS `cell`: `H̄_j`, `H̄^UR_j`, `Ĥ_j`, `Ĥ^UR_j`.
pub fn uplink_view(ch: &ChannelSet, cell: usize) -> Result<AugmentedView, NetworkError> {
    let scheme = ch.config().scheme();
    if !matches!(scheme, Scheme::Imac | Scheme::ImacBoost) {
        return Err(NetworkError::Scheme { expected: "imac or imac_boost", got: scheme });
    }
    check_cell(ch, cell)?;
    view_for(ch, Node::Bs(cell))
}

/// Downlink view of UE `(user, cell)`: `H̄_(k,j)` and `H̄^BR_j`, with the
/// serving BS as the desired block.
pub fn downlink_view(ch: &ChannelSet, user: usize, cell: usize) -> Result<AugmentedView, NetworkError> {
    let scheme = ch.config().scheme();
    if scheme != Scheme::Ibc {
        return Err(NetworkError::Scheme { expected: "ibc", got: scheme });
    }
    check_cell(ch, cell)?;
    let limit = ch.config().users(cell);
    if user >= limit {
        return Err(NetworkError::Index { what: "user", index: user, limit });
    }
    view_for(ch, Node::Ue { cell, user })
}

/// Full-duplex views: one per receiving BS and one per receiving UE.
pub fn fd_views(ch: &ChannelSet) -> Result<(Vec<AugmentedView>, Vec<AugmentedView>), NetworkError> {
    let cfg = ch.config();
    if !cfg.scheme().is_full_duplex() {
        return Err(NetworkError::Scheme {
            expected: "fd, fd_instantaneous or hd_ue_fd_bs",
            got: cfg.scheme(),
        });
    }
    let mut bs = Vec::new();
    let mut ue = Vec::new();
    for rx in cfg.receivers() {
        let view = view_for(ch, rx)?;
        match rx {
            Node::Bs(_) => bs.push(view),
            Node::Ue { .. } => ue.push(view),
        }
    }
    Ok((bs, ue))
}
