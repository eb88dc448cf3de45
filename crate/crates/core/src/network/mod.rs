//! Network topology, channel realizations and closed-form accounting.

mod channels;
mod config;
mod dof;
mod views;

pub use channels::{ChannelSet, Node};
pub use config::{ConfigBuilder, ConfigError, NetworkConfig, Scheme};
pub use dof::{closed_form_dof, required_relay_antennas, Dof, DofSummary};
pub use views::{downlink_view, fd_views, uplink_view, view_for, AugmentedView, NetworkError};
