use crate::linalg::{numeric_rank, pseudo_inverse, vcat, CMatrix, RankTolerance};
use crate::network::{ChannelSet, Node};

use super::residual::combined_channel;
use super::SolveError;

/// Stacks the relay-combined channels from BS `cell` to its downlink users.
fn stacked_downlink(ch: &ChannelSet, t: &CMatrix, cell: usize) -> CMatrix {
    let users = ch.config().downlink_users_of(cell);
    let blocks: Vec<CMatrix> = users
        .iter()
        .map(|&ue| combined_channel(ch, t, ue, Node::Bs(cell)).expect("downlink link sampled"))
        .collect();
    vcat(ch.config().bs_antennas(cell), &blocks)
}

/// BS precoders `V_j` (`N × K_dl·d`) that separate the downlink users of each
/// cell once the relay `t` has removed inter-cell interference.
///
/// With `N ≥ K_dl·M` the precoder is the column selection
/// `[A_j†]_{1:d, M+1:M+d, …}` of the pseudo-inverse of the stacked combined
/// channel, so `A_j V_j` is the block identity on each user's first `d`
/// antennas. With `N < K_dl·M` only those `d` antennas per user are inverted
/// and the remaining antennas are left unconstrained. Cells whose BS does not
/// transmit get an empty `N × 0` precoder.
pub fn bs_beamformers(
    ch: &ChannelSet,
    t: &CMatrix,
    d: usize,
    tol: RankTolerance,
) -> Result<Vec<CMatrix>, SolveError> {
    let cfg = ch.config();
    let nr = cfg.relay_antennas();
    if t.shape() != (nr, nr) {
        return Err(SolveError::Dimension(format!("relay matrix is {:?}, expected {nr}×{nr}", t.shape())));
    }
    if d == 0 {
        return Err(SolveError::Dimension("d must be at least 1".into()));
    }
    (0..cfg.cells())
        .map(|cell| {
            let n = cfg.bs_antennas(cell);
            let users = cfg.downlink_users_of(cell);
            if users.is_empty() || !cfg.transmits(Node::Bs(cell)) {
                return Ok(CMatrix::zeros(n, 0));
            }
            let m: Vec<usize> = users.iter().map(|&u| cfg.antennas(u)).collect();
            if let Some(&small) = m.iter().find(|&&mk| d > mk) {
                return Err(SolveError::Dimension(format!("d = {d} exceeds M = {small}")));
            }
            if n < users.len() * d {
                return Err(SolveError::Dimension(format!(
                    "N = {n} is smaller than K·d = {}",
                    users.len() * d
                )));
            }
            let a = stacked_downlink(ch, t, cell);
            let expected = a.nrows().min(a.ncols());
            let rank = numeric_rank(&a, tol);
            if rank < expected {
                return Err(SolveError::RankDeficient { cell, rank, expected });
            }
            let offsets: Vec<usize> = m.iter().scan(0, |acc, &mk| {
                let at = *acc;
                *acc += mk;
                Some(at)
            }).collect();
            let picks: Vec<usize> = offsets.iter().flat_map(|&o| o..o + d).collect();
            if a.nrows() <= n {
                Ok(pseudo_inverse(&a, tol).select_columns(picks.iter()))
            } else {
                Ok(pseudo_inverse(&a.select_rows(picks.iter()), tol))
            }
        })
        .collect()
}
