use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Transmission scheme the relay is designed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Half-duplex uplink (interfering multiple-access channel).
    Imac,
    /// Half-duplex downlink (interfering broadcast channel) with BS precoding.
    Ibc,
    /// Full-duplex BSs and UEs, half-duplex two-slot relay.
    Fd,
    /// Full-duplex network with a zero-delay forwarding relay.
    FdInstantaneous,
    /// Half-duplex UEs split into uplink and downlink groups, full-duplex BSs.
    HdUeFdBs,
    /// Uplink relay that also scales every desired direct channel by `1 + alpha`.
    ImacBoost,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Imac,
        Scheme::Ibc,
        Scheme::Fd,
        Scheme::FdInstantaneous,
        Scheme::HdUeFdBs,
        Scheme::ImacBoost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Imac => "imac",
            Scheme::Ibc => "ibc",
            Scheme::Fd => "fd",
            Scheme::FdInstantaneous => "fd_instantaneous",
            Scheme::HdUeFdBs => "hd_ue_fd_bs",
            Scheme::ImacBoost => "imac_boost",
        }
    }

    /// Schemes in which BSs precode downlink streams.
    pub fn has_downlink(self) -> bool {
        matches!(
            self,
            Scheme::Ibc | Scheme::Fd | Scheme::FdInstantaneous | Scheme::HdUeFdBs
        )
    }

    pub fn is_full_duplex(self) -> bool {
        matches!(self, Scheme::Fd | Scheme::FdInstantaneous | Scheme::HdUeFdBs)
    }

    /// Whether the relay forwards within the same slot it listens in.
    pub fn is_instantaneous(self) -> bool {
        self == Scheme::FdInstantaneous
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| ConfigError::UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown scheme `{0}` (expected one of imac, ibc, fd, fd_instantaneous, hd_ue_fd_bs, imac_boost)")]
    UnknownScheme(String),
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("{what} lists {got} entries, expected {expected}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("scheme {0} supports only symmetric networks")]
    AsymmetricUnsupported(Scheme),
    #[error("streams per UE d = {d} violates d <= M = {m}")]
    TooManyStreams { d: usize, m: usize },
    #[error("BS antennas N = {n} violate N >= K*d = {kd}")]
    TooFewBsAntennas { n: usize, kd: usize },
    #[error("uplink_users + downlink_users = {sum} must equal users_per_cell = {k}")]
    UserSplit { sum: usize, k: usize },
    #[error("{0} is required for scheme {1}")]
    Missing(&'static str, Scheme),
    #[error("alpha must be finite and nonnegative, got {0}")]
    Alpha(f64),
}

/// Cell, user and antenna layout plus the scheme-specific parameters.
///
/// Built through [`NetworkConfig::builder`]; a constructed value always
/// satisfies the layout invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    scheme: Scheme,
    ue_antennas: Vec<Vec<usize>>,
    bs_antennas: Vec<usize>,
    relay_antennas: usize,
    streams_per_ue: usize,
    alpha: f64,
    uplink_users: usize,
    downlink_users: usize,
}

impl NetworkConfig {
    pub fn builder(scheme: Scheme) -> ConfigBuilder {
        ConfigBuilder {
            scheme,
            cells: 1,
            layout: Layout::Symmetric { users: 1, ue_antennas: 1, bs_antennas: 1 },
            relay_antennas: 1,
            streams_per_ue: None,
            alpha: None,
            user_split: None,
        }
    }

    /// Shorthand for a symmetric `(C, K, M, N)` network with default
    /// scheme parameters.
    pub fn symmetric(
        scheme: Scheme,
        cells: usize,
        users: usize,
        ue_antennas: usize,
        bs_antennas: usize,
        relay_antennas: usize,
    ) -> Result<Self, ConfigError> {
        Self::builder(scheme)
            .cells(cells)
            .symmetric(users, ue_antennas, bs_antennas)
            .relay_antennas(relay_antennas)
            .build()
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn cells(&self) -> usize {
        self.bs_antennas.len()
    }

    pub fn users(&self, cell: usize) -> usize {
        self.ue_antennas[cell].len()
    }

    pub fn ue_antennas(&self, cell: usize, user: usize) -> usize {
        self.ue_antennas[cell][user]
    }

    pub fn bs_antennas(&self, cell: usize) -> usize {
        self.bs_antennas[cell]
    }

    pub fn relay_antennas(&self) -> usize {
        self.relay_antennas
    }

    /// Streams per downlink UE (`d`); meaningful for schemes with BS precoding.
    pub fn streams_per_ue(&self) -> usize {
        self.streams_per_ue
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Uplink group size `K1` per cell. Equals `K` for uplink-only schemes.
    pub fn uplink_users(&self) -> usize {
        self.uplink_users
    }

    /// Downlink group size `K2` per cell.
    pub fn downlink_users(&self) -> usize {
        self.downlink_users
    }

    /// `(K, M, N)` when every cell, UE and BS is identical.
    pub fn symmetric_dims(&self) -> Option<(usize, usize, usize)> {
        let k = self.users(0);
        let m = self.ue_antennas[0][0];
        let n = self.bs_antennas[0];
        let uniform = self.ue_antennas.iter().all(|c| c.len() == k && c.iter().all(|&a| a == m))
            && self.bs_antennas.iter().all(|&b| b == n);
        uniform.then_some((k, m, n))
    }

    pub fn total_ue_antennas(&self) -> usize {
        self.ue_antennas.iter().flatten().sum()
    }

    pub fn total_bs_antennas(&self) -> usize {
        self.bs_antennas.iter().sum()
    }

    /// Same layout with a different relay size.
    pub fn with_relay_antennas(&self, relay_antennas: usize) -> Result<Self, ConfigError> {
        if relay_antennas == 0 {
            return Err(ConfigError::ZeroCount("relay_antennas"));
        }
        Ok(Self { relay_antennas, ..self.clone() })
    }
}

#[derive(Debug, Clone)]
enum Layout {
    Symmetric { users: usize, ue_antennas: usize, bs_antennas: usize },
    Asymmetric { ue_antennas: Vec<Vec<usize>>, bs_antennas: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct ConfigBuilder {
    scheme: Scheme,
    cells: usize,
    layout: Layout,
    relay_antennas: usize,
    streams_per_ue: Option<usize>,
    alpha: Option<f64>,
    user_split: Option<(usize, usize)>,
}

impl ConfigBuilder {
    pub fn cells(mut self, cells: usize) -> Self {
        self.cells = cells;
        self
    }

    pub fn symmetric(mut self, users: usize, ue_antennas: usize, bs_antennas: usize) -> Self {
        self.layout = Layout::Symmetric { users, ue_antennas, bs_antennas };
        self
    }

    /// Per-cell layout: `ue_antennas[j][k]` is `M_(k,j)`, `bs_antennas[j]` is `N_j`.
    /// The number of cells is taken from `bs_antennas`.
    pub fn asymmetric(mut self, ue_antennas: Vec<Vec<usize>>, bs_antennas: Vec<usize>) -> Self {
        self.cells = bs_antennas.len();
        self.layout = Layout::Asymmetric { ue_antennas, bs_antennas };
        self
    }

    pub fn relay_antennas(mut self, relay_antennas: usize) -> Self {
        self.relay_antennas = relay_antennas;
        self
    }

    pub fn streams_per_ue(mut self, d: usize) -> Self {
        self.streams_per_ue = Some(d);
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn user_split(mut self, uplink_users: usize, downlink_users: usize) -> Self {
        self.user_split = Some((uplink_users, downlink_users));
        self
    }

    pub fn build(self) -> Result<NetworkConfig, ConfigError> {
        let scheme = self.scheme;
        if self.cells == 0 {
            return Err(ConfigError::ZeroCount("cells"));
        }
        if self.relay_antennas == 0 {
            return Err(ConfigError::ZeroCount("relay_antennas"));
        }
        let (ue_antennas, bs_antennas) = match self.layout {
            Layout::Symmetric { users, ue_antennas, bs_antennas } => {
                if users == 0 {
                    return Err(ConfigError::ZeroCount("users_per_cell"));
                }
                if ue_antennas == 0 {
                    return Err(ConfigError::ZeroCount("ue_antennas"));
                }
                if bs_antennas == 0 {
                    return Err(ConfigError::ZeroCount("bs_antennas"));
                }
                (vec![vec![ue_antennas; users]; self.cells], vec![bs_antennas; self.cells])
            }
            Layout::Asymmetric { ue_antennas, bs_antennas } => {
                if ue_antennas.len() != bs_antennas.len() {
                    return Err(ConfigError::LengthMismatch {
                        what: "ue_antennas",
                        expected: bs_antennas.len(),
                        got: ue_antennas.len(),
                    });
                }
                if ue_antennas.iter().any(|c| c.is_empty()) {
                    return Err(ConfigError::ZeroCount("users_per_cell"));
                }
                if ue_antennas.iter().flatten().any(|&m| m == 0) {
                    return Err(ConfigError::ZeroCount("ue_antennas"));
                }
                if bs_antennas.contains(&0) {
                    return Err(ConfigError::ZeroCount("bs_antennas"));
                }
                (ue_antennas, bs_antennas)
            }
        };

        let mut cfg = NetworkConfig {
            scheme,
            ue_antennas,
            bs_antennas,
            relay_antennas: self.relay_antennas,
            streams_per_ue: 0,
            alpha: 0.0,
            uplink_users: 0,
            downlink_users: 0,
        };
        let dims = cfg.symmetric_dims();
        if scheme != Scheme::Imac && dims.is_none() {
            return Err(ConfigError::AsymmetricUnsupported(scheme));
        }
        let (k, m, n) = dims.unwrap_or((0, 0, 0));

        (cfg.uplink_users, cfg.downlink_users) = match scheme {
            Scheme::Imac | Scheme::ImacBoost => (cfg.users(0), 0),
            Scheme::Ibc => (0, k),
            Scheme::Fd | Scheme::FdInstantaneous => (k, k),
            Scheme::HdUeFdBs => {
                let (k1, k2) = self.user_split.ok_or(ConfigError::Missing("uplink_users/downlink_users", scheme))?;
                if k1 + k2 != k {
                    return Err(ConfigError::UserSplit { sum: k1 + k2, k });
                }
                (k1, k2)
            }
        };

        if scheme.has_downlink() && cfg.downlink_users > 0 {
            let k_dl = cfg.downlink_users;
            // default: as many streams as the antenna budget allows
            let d = self.streams_per_ue.unwrap_or_else(|| m.min(n / k_dl));
            if d == 0 {
                return Err(ConfigError::ZeroCount("streams_per_ue"));
            }
            if d > m {
                return Err(ConfigError::TooManyStreams { d, m });
            }
            if n < k_dl * d {
                return Err(ConfigError::TooFewBsAntennas { n, kd: k_dl * d });
            }
            cfg.streams_per_ue = d;
        }

        if scheme == Scheme::ImacBoost {
            let alpha = self.alpha.unwrap_or(0.0);
            if !alpha.is_finite() || alpha < 0.0 {
                return Err(ConfigError::Alpha(alpha));
            }
            cfg.alpha = alpha;
        }
        Ok(cfg)
    }
}
