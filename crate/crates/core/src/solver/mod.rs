//! Closed-form relay beamformers for every ODIA variant.
//!
//! Each receiver `r` contributes the block equation `G_r T B_r = Y_r`, where
//! `G_r` is the relay-to-`r` channel, `B_r` concatenates the transmitter-to-relay
//! channels of the constrained transmitters and `Y_r` the matching target
//! (`-H` for interferers, `αH` for boosted desired links). Vectorizing gives
//! `(B_rᵀ ⊗ G_r) vec(T) = vec(Y_r)`; the blocks are stacked over receivers in
//! node order and solved for the minimum-norm `vec(T)`.

mod precoder;
mod residual;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{
    devectorize, fro, hcat, kron, solve_consistent_detailed, vectorize, CMatrix, CVector,
    LinalgError, RankTolerance,
};
use crate::network::{ChannelSet, Node, Scheme};

pub use precoder::bs_beamformers;
pub use residual::{
    boost_deviation, combined_channel, effective_channel, interference_residual, ResidualReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(
        "no relay beamformer exists for this realization: rank([H | h]) = {augmented_rank} > rank(H) = {rank} ({rows} equations)"
    )]
    Infeasible { rank: usize, augmented_rank: usize, rows: usize },
    #[error("solver expects scheme {expected}, channel set uses {got}")]
    Scheme { expected: &'static str, got: Scheme },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("A matrix of cell {cell} has rank {rank}, expected {expected}")]
    RankDeficient { cell: usize, rank: usize, expected: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Facts about the stacked system behind a relay beamformer.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub rows: usize,
    pub unknowns: usize,
    pub rank: usize,
    pub augmented_rank: usize,
    pub consistent: bool,
    /// `‖H vec(T) − h‖ / ‖h‖`, zero when `h` is empty or zero.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub scheme: Scheme,
    /// Relay matrix, `N_R × N_R`.
    pub relay_t: CMatrix,
    /// Per-cell BS precoders `N × K_dl·d`, for schemes whose BSs transmit.
    pub bs_v: Option<Vec<CMatrix>>,
    /// Boost factor, for the boost scheme.
    pub alpha: Option<f64>,
    pub diagnostics: SolveDiagnostics,
}

impl Beamformer {
    /// Precoder of BS `cell`, if this scheme precodes at that BS.
    pub fn precoder(&self, cell: usize) -> Option<&CMatrix> {
        self.bs_v.as_ref().and_then(|v| v.get(cell)).filter(|v| v.ncols() > 0)
    }
}

/// One block row of the stacked system.
struct Constraint {
    rx: Node,
    targets: Vec<(Node, Complex64)>,
}

fn constraints(ch: &ChannelSet, boost: Option<f64>) -> Vec<Constraint> {
    let cfg = ch.config();
    let minus_one = Complex64::new(-1.0, 0.0);
    cfg.receivers()
        .into_iter()
        .map(|rx| {
            let mut targets: Vec<(Node, Complex64)> =
                cfg.interferers(rx).into_iter().map(|t| (t, minus_one)).collect();
            if let Some(alpha) = boost {
                targets.extend(cfg.desired_transmitters(rx).into_iter().map(|t| (t, Complex64::new(alpha, 0.0))));
                targets.sort_by_key(|&(t, _)| t);
            }
            Constraint { rx, targets }
        })
        .filter(|c| !c.targets.is_empty())
        .collect()
}

fn stacked_system(ch: &ChannelSet, cons: &[Constraint]) -> (CMatrix, CVector) {
    let nr = ch.config().relay_antennas();
    let blocks: Vec<(CMatrix, CVector)> = cons
        .iter()
        .map(|c| {
            let rows = ch.config().antennas(c.rx);
            let g = ch.from_relay(c.rx).expect("receiver has a relay link");
            let b = hcat(nr, c.targets.iter().map(|&(t, _)| ch.to_relay(t).expect("transmitter has a relay link")));
            let scaled: Vec<CMatrix> = c
                .targets
                .iter()
                .map(|&(t, coef)| ch.direct(c.rx, t).expect("direct link sampled") * coef)
                .collect();
            let y = hcat(rows, &scaled);
            (kron(&b.transpose(), g), vectorize(&y))
        })
        .collect();
    let total: usize = blocks.iter().map(|(m, _)| m.nrows()).sum();
    let mut h = CMatrix::zeros(total, nr * nr);
    let mut rhs = CVector::zeros(total);
    let mut at = 0;
    for (m, v) in &blocks {
        h.rows_mut(at, m.nrows()).copy_from(m);
        rhs.rows_mut(at, v.len()).copy_from(v);
        at += m.nrows();
    }
    (h, rhs)
}

/// Builds the stacked system `H vec(T) = h` for the scheme of `ch`; the
/// boost scheme uses `boost` as α (0 when absent).
pub fn stacked(ch: &ChannelSet, boost: Option<f64>) -> (CMatrix, CVector) {
    let boost = (ch.config().scheme() == Scheme::ImacBoost).then(|| boost.unwrap_or(0.0));
    stacked_system(ch, &constraints(ch, boost))
}

fn solve_relay(ch: &ChannelSet, boost: Option<f64>, tol: RankTolerance) -> Result<(CMatrix, SolveDiagnostics), SolveError> {
    let (h, rhs) = stacked_system(ch, &constraints(ch, boost));
    let rows = h.nrows();
    let sol = solve_consistent_detailed(&h, &rhs, tol).map_err(|e| match e {
        LinalgError::Inconsistent { rank, augmented_rank } => SolveError::Infeasible { rank, augmented_rank, rows },
        other => SolveError::Linalg(other),
    })?;
    let rhs_norm = rhs.norm();
    let relative_residual = if rhs_norm > 0.0 { (&h * &sol.x - &rhs).norm() / rhs_norm } else { 0.0 };
    let t = devectorize(&sol.x, ch.config().relay_antennas())?;
    let diagnostics = SolveDiagnostics {
        rows,
        unknowns: h.ncols(),
        rank: sol.rank,
        augmented_rank: sol.augmented_rank,
        consistent: true,
        relative_residual,
    };
    Ok((t, diagnostics))
}

fn expect_scheme(ch: &ChannelSet, ok: &[Scheme], expected: &'static str) -> Result<Scheme, SolveError> {
    let got = ch.config().scheme();
    if ok.contains(&got) {
        Ok(got)
    } else {
        Err(SolveError::Scheme { expected, got })
    }
}

/// Uplink relay beamformer aligning inter-cell interference at every BS.
pub fn solve_imac(ch: &ChannelSet, tol: RankTolerance) -> Result<Beamformer, SolveError> {
    let scheme = expect_scheme(ch, &[Scheme::Imac], "imac")?;
    let (relay_t, diagnostics) = solve_relay(ch, None, tol)?;
    Ok(Beamformer { scheme, relay_t, bs_v: None, alpha: None, diagnostics })
}

/// Downlink relay beamformer plus BS precoders separating the users of a cell.
pub fn solve_ibc(ch: &ChannelSet, tol: RankTolerance) -> Result<Beamformer, SolveError> {
    let scheme = expect_scheme(ch, &[Scheme::Ibc], "ibc")?;
    let (relay_t, diagnostics) = solve_relay(ch, None, tol)?;
    let bs_v = bs_beamformers(ch, &relay_t, ch.config().streams_per_ue(), tol)?;
    Ok(Beamformer { scheme, relay_t, bs_v: Some(bs_v), alpha: None, diagnostics })
}

/// Full-duplex relay beamformer satisfying the BS-side and UE-side
/// conditions at once; also covers the instantaneous-relay and mixed
/// half-duplex-UE variants.
pub fn solve_fd(ch: &ChannelSet, tol: RankTolerance) -> Result<Beamformer, SolveError> {
    let scheme = expect_scheme(
        ch,
        &[Scheme::Fd, Scheme::FdInstantaneous, Scheme::HdUeFdBs],
        "fd, fd_instantaneous or hd_ue_fd_bs",
    )?;
    let (relay_t, diagnostics) = solve_relay(ch, None, tol)?;
    let bs_v = if ch.config().downlink_users() > 0 {
        Some(bs_beamformers(ch, &relay_t, ch.config().streams_per_ue(), tol)?)
    } else {
        None
    };
    Ok(Beamformer { scheme, relay_t, bs_v, alpha: None, diagnostics })
}

/// Uplink relay beamformer that cancels interference and adds `α` times
/// every desired direct channel, so `Ĥ_eff,j = (1 + α) Ĥ_j`.
pub fn solve_boost(ch: &ChannelSet, alpha: f64, tol: RankTolerance) -> Result<Beamformer, SolveError> {
    let scheme = expect_scheme(ch, &[Scheme::ImacBoost], "imac_boost")?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(SolveError::Dimension(format!("boost factor must be finite and nonnegative, got {alpha}")));
    }
    let (relay_t, diagnostics) = solve_relay(ch, Some(alpha), tol)?;
    Ok(Beamformer { scheme, relay_t, bs_v: None, alpha: Some(alpha), diagnostics })
}

/// Dispatches on the scheme of `ch`; the boost factor comes from the config.
pub fn solve(ch: &ChannelSet, tol: RankTolerance) -> Result<Beamformer, SolveError> {
    match ch.config().scheme() {
        Scheme::Imac => solve_imac(ch, tol),
        Scheme::Ibc => solve_ibc(ch, tol),
        Scheme::Fd | Scheme::FdInstantaneous | Scheme::HdUeFdBs => solve_fd(ch, tol),
        Scheme::ImacBoost => solve_boost(ch, ch.config().alpha(), tol),
    }
}

/// Relative Frobenius distance between two relay matrices.
pub fn relative_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = fro(a).max(fro(b));
    if scale == 0.0 {
        0.0
    } else {
        fro(&(a - b)) / scale
    }
}
