use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{NetworkConfig, Scheme};
use crate::linalg::{complex_gaussian, is_finite, CMatrix};

/// A BS or UE. Ordering is all BSs by cell, then all UEs by `(cell, user)`,
/// which is the block order used in every augmented matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Bs(usize),
    Ue { cell: usize, user: usize },
}

impl Node {
    pub fn cell(self) -> usize {
        match self {
            Node::Bs(c) | Node::Ue { cell: c, .. } => c,
        }
    }

    fn code(self) -> u64 {
        match self {
            Node::Bs(c) => c as u64,
            Node::Ue { cell, user } => (1 << 30) | ((cell as u64) << 15) | user as u64,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Bs(c) => write!(f, "BS{}", c + 1),
            Node::Ue { cell, user } => write!(f, "UE({},{})", user + 1, cell + 1),
        }
    }
}

impl NetworkConfig {
    pub fn antennas(&self, node: Node) -> usize {
        match node {
            Node::Bs(c) => self.bs_antennas(c),
            Node::Ue { cell, user } => self.ue_antennas(cell, user),
        }
    }

    /// Every BS and UE in canonical order.
    pub fn nodes(&self) -> Vec<Node> {
        let bss = (0..self.cells()).map(Node::Bs);
        let ues = (0..self.cells())
            .flat_map(|cell| (0..self.users(cell)).map(move |user| Node::Ue { cell, user }));
        bss.chain(ues).collect()
    }

    /// Whether `node` sends data in this scheme.
    pub fn transmits(&self, node: Node) -> bool {
        match (self.scheme(), node) {
            (Scheme::Imac | Scheme::ImacBoost, n) => matches!(n, Node::Ue { .. }),
            (Scheme::Ibc, n) => matches!(n, Node::Bs(_)),
            (Scheme::Fd | Scheme::FdInstantaneous, _) => true,
            (Scheme::HdUeFdBs, Node::Bs(_)) => self.downlink_users() > 0,
            (Scheme::HdUeFdBs, Node::Ue { user, .. }) => user < self.uplink_users(),
        }
    }

    /// Whether `node` decodes data in this scheme.
    pub fn receives(&self, node: Node) -> bool {
        match (self.scheme(), node) {
            (Scheme::Imac | Scheme::ImacBoost, n) => matches!(n, Node::Bs(_)),
            (Scheme::Ibc, n) => matches!(n, Node::Ue { .. }),
            (Scheme::Fd | Scheme::FdInstantaneous, _) => true,
            (Scheme::HdUeFdBs, Node::Bs(_)) => self.uplink_users() > 0,
            (Scheme::HdUeFdBs, Node::Ue { user, .. }) => user >= self.uplink_users(),
        }
    }

    pub fn transmitters(&self) -> Vec<Node> {
        self.nodes().into_iter().filter(|&n| self.transmits(n)).collect()
    }

    pub fn receivers(&self) -> Vec<Node> {
        self.nodes().into_iter().filter(|&n| self.receives(n)).collect()
    }

    /// Transmitters whose data `rx` wants: a BS wants its own UEs, a UE wants
    /// its serving BS.
    pub fn desired_transmitters(&self, rx: Node) -> Vec<Node> {
        match rx {
            Node::Bs(j) => (0..self.users(j))
                .map(|user| Node::Ue { cell: j, user })
                .filter(|&n| self.transmits(n))
                .collect(),
            Node::Ue { cell, .. } => {
                let bs = Node::Bs(cell);
                if self.transmits(bs) {
                    vec![bs]
                } else {
                    Vec::new()
                }
            }
        }
    }

    /// Transmitters other than `rx` itself and its desired transmitters.
    pub fn interferers(&self, rx: Node) -> Vec<Node> {
        let desired = self.desired_transmitters(rx);
        self.transmitters()
            .into_iter()
            .filter(|&t| t != rx && !desired.contains(&t))
            .collect()
    }

    /// Downlink receivers served by BS `cell`, in user order.
    pub fn downlink_users_of(&self, cell: usize) -> Vec<Node> {
        (0..self.users(cell))
            .map(|user| Node::Ue { cell, user })
            .filter(|&n| self.receives(n))
            .collect()
    }
}

/// One realization of every channel the scheme uses.
///
/// Links exist from every transmitter to every other receiver, from every
/// transmitter to the relay and from the relay to every receiver. Links the
/// scheme never uses (e.g. UE-to-UE between two downlink UEs) are absent
/// rather than zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    config: NetworkConfig,
    direct: BTreeMap<(Node, Node), CMatrix>,
    to_relay: BTreeMap<Node, CMatrix>,
    from_relay: BTreeMap<Node, CMatrix>,
}

#[derive(Clone, Copy)]
enum LinkKind {
    Direct = 0,
    ToRelay = 1,
    FromRelay = 2,
}

fn link_rng(seed: u64, kind: LinkKind, rx: u64, tx: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((kind as u64) << 62) | (rx << 31) | tx);
    rng
}

const RELAY_CODE: u64 = (1 << 31) - 1;

impl ChannelSet {
    /// Draws every link with i.i.d. CN(0, 1) entries.
    ///
    /// Each link has its own random stream keyed by `(seed, link)`, so a link
    /// present in two schemes gets the same matrix for the same seed.
    pub fn sample(config: &NetworkConfig, seed: u64) -> Self {
        let nr = config.relay_antennas();
        let receivers = config.receivers();
        let transmitters = config.transmitters();

        let mut direct = BTreeMap::new();
        for &rx in &receivers {
            for &tx in &transmitters {
                if rx == tx {
                    continue;
                }
                let mut rng = link_rng(seed, LinkKind::Direct, rx.code(), tx.code());
                direct.insert(
                    (rx, tx),
                    complex_gaussian(config.antennas(rx), config.antennas(tx), &mut rng),
                );
            }
        }
        let to_relay = transmitters
            .iter()
            .map(|&tx| {
                let mut rng = link_rng(seed, LinkKind::ToRelay, RELAY_CODE, tx.code());
                (tx, complex_gaussian(nr, config.antennas(tx), &mut rng))
            })
            .collect();
        let from_relay = receivers
            .iter()
            .map(|&rx| {
                let mut rng = link_rng(seed, LinkKind::FromRelay, rx.code(), RELAY_CODE);
                (rx, complex_gaussian(config.antennas(rx), nr, &mut rng))
            })
            .collect();
        Self { config: config.clone(), direct, to_relay, from_relay }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Channel from `tx` to `rx` (`antennas(rx) x antennas(tx)`).
    pub fn direct(&self, rx: Node, tx: Node) -> Option<&CMatrix> {
        self.direct.get(&(rx, tx))
    }

    /// Channel from `tx` to the relay (`N_R x antennas(tx)`).
    pub fn to_relay(&self, tx: Node) -> Option<&CMatrix> {
        self.to_relay.get(&tx)
    }

    /// Channel from the relay to `rx` (`antennas(rx) x N_R`).
    pub fn from_relay(&self, rx: Node) -> Option<&CMatrix> {
        self.from_relay.get(&rx)
    }

    pub fn direct_links(&self) -> impl Iterator<Item = (&(Node, Node), &CMatrix)> {
        self.direct.iter()
    }

    /// Applies `f` to every stored matrix.
    pub fn map_matrices(&self, mut f: impl FnMut(&CMatrix) -> CMatrix) -> Self {
        Self {
            config: self.config.clone(),
            direct: self.direct.iter().map(|(k, m)| (*k, f(m))).collect(),
            to_relay: self.to_relay.iter().map(|(k, m)| (*k, f(m))).collect(),
            from_relay: self.from_relay.iter().map(|(k, m)| (*k, f(m))).collect(),
        }
    }

    /// Grows the relay to `config.relay_antennas() + extra` antennas, keeping
    /// every existing entry and drawing the new relay rows/columns fresh.
    pub fn with_extra_relay_antennas(&self, extra: usize, seed: u64) -> Self {
        let nr = self.config.relay_antennas() + extra;
        let config = self
            .config
            .with_relay_antennas(nr)
            .expect("relay count only grows");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let to_relay = self
            .to_relay
            .iter()
            .map(|(&tx, m)| {
                let fresh = complex_gaussian(extra, m.ncols(), &mut rng);
                let mut grown = m.clone().resize_vertically(nr, Default::default());
                grown.rows_mut(m.nrows(), extra).copy_from(&fresh);
                (tx, grown)
            })
            .collect();
        let from_relay = self
            .from_relay
            .iter()
            .map(|(&rx, m)| {
                let fresh = complex_gaussian(m.nrows(), extra, &mut rng);
                let mut grown = m.clone().resize_horizontally(nr, Default::default());
                grown.columns_mut(m.ncols(), extra).copy_from(&fresh);
                (rx, grown)
            })
            .collect();
        Self { config, direct: self.direct.clone(), to_relay, from_relay }
    }

    /// Copy of this realization reinterpreted under another configuration
    /// with the same antenna layout. Links the new scheme needs must already
    /// be present; links it does not use are dropped.
    pub fn restrict_to(&self, config: &NetworkConfig) -> Option<Self> {
        if config.nodes() != self.config.nodes()
            || config.relay_antennas() != self.config.relay_antennas()
            || config.nodes().iter().any(|&n| config.antennas(n) != self.config.antennas(n))
        {
            return None;
        }
        let mut direct = BTreeMap::new();
        for rx in config.receivers() {
            for tx in config.transmitters() {
                if rx != tx {
                    direct.insert((rx, tx), self.direct.get(&(rx, tx))?.clone());
                }
            }
        }
        let to_relay = config
            .transmitters()
            .into_iter()
            .map(|tx| Some((tx, self.to_relay.get(&tx)?.clone())))
            .collect::<Option<_>>()?;
        let from_relay = config
            .receivers()
            .into_iter()
            .map(|rx| Some((rx, self.from_relay.get(&rx)?.clone())))
            .collect::<Option<_>>()?;
        Some(Self { config: config.clone(), direct, to_relay, from_relay })
    }

    /// Every matrix has the dimensions its endpoints imply and finite entries.
    pub fn is_well_formed(&self) -> bool {
        let nr = self.config.relay_antennas();
        let cfg = &self.config;
        self.direct.iter().all(|(&(rx, tx), m)| {
            m.shape() == (cfg.antennas(rx), cfg.antennas(tx)) && is_finite(m)
        }) && self
            .to_relay
            .iter()
            .all(|(&tx, m)| m.shape() == (nr, cfg.antennas(tx)) && is_finite(m))
            && self
                .from_relay
                .iter()
                .all(|(&rx, m)| m.shape() == (cfg.antennas(rx), nr) && is_finite(m))
    }
}
