use std::path::{Path, PathBuf};

use clap::Args;
use odia::linalg::RankTolerance;
use odia::network::{required_relay_antennas, NetworkConfig, Scheme};
use odia::sim::{McOptions, DEFAULT_SNR_GRID_DB};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;

/// Antenna counts: one value for every node, one per cell, or one per user.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Antennas {
    Uniform(usize),
    PerCell(Vec<usize>),
    PerUser(Vec<Vec<usize>>),
}

/// Keys of a config file. Every key is optional; flags override them.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub cells: Option<usize>,
    pub users_per_cell: Option<usize>,
    pub ue_antennas: Option<Antennas>,
    pub bs_antennas: Option<Antennas>,
    pub relay_antennas: Option<usize>,
    pub scheme: Option<String>,
    pub streams_per_ue: Option<usize>,
    pub alpha: Option<f64>,
    pub uplink_users: Option<usize>,
    pub downlink_users: Option<usize>,
    pub trials: Option<usize>,
    pub snr_db: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub rank_rel_tol: Option<f64>,
    pub residual_tol: Option<f64>,
}

impl FileConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with experiment keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub users_per_cell: Option<usize>,
    #[arg(long)]
    pub ue_antennas: Option<usize>,
    #[arg(long)]
    pub bs_antennas: Option<usize>,
    /// Defaults to the smallest size the scheme needs
    #[arg(long)]
    pub relay_antennas: Option<usize>,
    #[arg(long)]
    pub streams_per_ue: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub uplink_users: Option<usize>,
    #[arg(long)]
    pub downlink_users: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated SNR grid in dB
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr_db: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rank_rel_tol: Option<f64>,
    #[arg(long)]
    pub residual_tol: Option<f64>,
}

impl ConfigArgs {
    /// File keys with every given flag applied on top.
    pub fn merged(&self) -> Result<FileConfig, CliError> {
        let mut f = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { f.$field = Some(v.clone()); })*
            };
        }
        apply!(
            scheme, cells, users_per_cell, relay_antennas, streams_per_ue, alpha, uplink_users, downlink_users,
            trials, snr_db, seed, rank_rel_tol, residual_tol
        );
        if let Some(m) = self.ue_antennas {
            f.ue_antennas = Some(Antennas::Uniform(m));
        }
        if let Some(n) = self.bs_antennas {
            f.bs_antennas = Some(Antennas::Uniform(n));
        }
        Ok(f)
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::from_file(&self.merged()?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub trials: usize,
    pub snr_db: Vec<f64>,
    pub seed: u64,
    pub tol: RankTolerance,
    pub residual_tol: f64,
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing key `{key}`"))
}

fn layout(f: &FileConfig) -> Result<(Vec<Vec<usize>>, Vec<usize>), CliError> {
    let ue = f.ue_antennas.as_ref().ok_or_else(|| missing("ue_antennas"))?;
    let bs = f.bs_antennas.as_ref().ok_or_else(|| missing("bs_antennas"))?;
    let cells = match (f.cells, ue, bs) {
        (Some(c), _, _) => c,
        (None, Antennas::PerCell(v), _) | (None, _, Antennas::PerCell(v)) => v.len(),
        (None, Antennas::PerUser(v), _) => v.len(),
        _ => return Err(missing("cells")),
    };
    let bs_antennas = match bs {
        Antennas::Uniform(n) => vec![*n; cells],
        Antennas::PerCell(v) => v.clone(),
        Antennas::PerUser(_) => return Err(CliError::Config("`bs_antennas` takes one value per cell".into())),
    };
    let ue_antennas = match ue {
        Antennas::PerUser(v) => v.clone(),
        Antennas::Uniform(m) => vec![vec![*m; f.users_per_cell.ok_or_else(|| missing("users_per_cell"))?]; cells],
        Antennas::PerCell(v) => {
            let k = f.users_per_cell.ok_or_else(|| missing("users_per_cell"))?;
            v.iter().map(|&m| vec![m; k]).collect()
        }
    };
    if let Some(k) = f.users_per_cell {
        if ue_antennas.iter().any(|cell| cell.len() != k) {
            return Err(CliError::Config("`ue_antennas` disagrees with `users_per_cell`".into()));
        }
    }
    if ue_antennas.len() != cells || bs_antennas.len() != cells {
        return Err(CliError::Config(format!("antenna lists must have one entry per cell ({cells})")));
    }
    Ok((ue_antennas, bs_antennas))
}

impl ExperimentConfig {
    pub fn from_file(f: &FileConfig) -> Result<Self, CliError> {
        let scheme: Scheme = f
            .scheme
            .as_deref()
            .ok_or_else(|| missing("scheme"))?
            .parse()
            .map_err(|e| CliError::Config(format!("{e}")))?;
        let (ue, bs) = layout(f)?;
        let mut b = NetworkConfig::builder(scheme).asymmetric(ue, bs).relay_antennas(f.relay_antennas.unwrap_or(1));
        if let Some(d) = f.streams_per_ue {
            b = b.streams_per_ue(d);
        }
        if let Some(a) = f.alpha {
            b = b.alpha(a);
        }
        match (f.uplink_users, f.downlink_users) {
            (Some(ul), Some(dl)) => b = b.user_split(ul, dl),
            (None, None) => {}
            _ => return Err(CliError::Config("`uplink_users` and `downlink_users` go together".into())),
        }
        let probe = b.build().map_err(|e| CliError::Config(e.to_string()))?;
        let network = match f.relay_antennas {
            Some(_) => probe,
            None => probe
                .with_relay_antennas(required_relay_antennas(&probe))
                .map_err(|e| CliError::Config(e.to_string()))?,
        };

        let trials = f.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(CliError::Config("`trials` must be at least 1".into()));
        }
        let snr_db = f.snr_db.clone().unwrap_or_else(|| DEFAULT_SNR_GRID_DB.to_vec());
        if snr_db.is_empty() || snr_db.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config("`snr_db` must be a nonempty list of finite values".into()));
        }
        let tol = match f.rank_rel_tol {
            Some(t) => RankTolerance::new(t).map_err(|e| CliError::Config(format!("rank_rel_tol: {e}")))?,
            None => RankTolerance::default(),
        };
        let residual_tol = f.residual_tol.unwrap_or(DEFAULT_RESIDUAL_TOL);
        if !(residual_tol.is_finite() && residual_tol > 0.0) {
            return Err(CliError::Config(format!("`residual_tol` must be positive, got {residual_tol}")));
        }
        Ok(Self { network, trials, snr_db, seed: f.seed.unwrap_or(0), tol, residual_tol })
    }

    pub fn mc_options(&self) -> McOptions {
        McOptions {
            trials: self.trials,
            snr_db: self.snr_db.clone(),
            seed: self.seed,
            tol: self.tol,
            residual_tol: self.residual_tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::from_file(&FileConfig::parse(text, "test.toml")?)
    }

    #[test]
    fn symmetric_file_defaults_relay_size() {
        let e = parse("scheme = \"imac\"\ncells = 3\nusers_per_cell = 2\nue_antennas = 2\nbs_antennas = 4\n").unwrap();
        assert_eq!(e.network.relay_antennas(), 12);
        assert_eq!(e.trials, DEFAULT_TRIALS);
        assert_eq!(e.snr_db, DEFAULT_SNR_GRID_DB.to_vec());
    }

    #[test]
    fn per_user_antennas_give_asymmetric_network() {
        let e = parse("scheme = \"imac\"\nue_antennas = [[1, 2], [1]]\nbs_antennas = [3, 2]\n").unwrap();
        assert_eq!(e.network.cells(), 2);
        assert_eq!(e.network.users(0), 2);
        assert_eq!(e.network.ue_antennas(0, 1), 2);
        assert_eq!(e.network.bs_antennas(1), 2);
    }

    #[test]
    fn unknown_key_names_line_and_key() {
        let err = parse("scheme = \"imac\"\ncells = 3\nrelays = 4\n").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("relays"), "{err}");
    }

    #[test]
    fn flags_override_file_keys() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        std::io::Write::write_all(&mut file, b"scheme = \"imac\"\ncells = 3\nseed = 7\n").unwrap();
        let args = ConfigArgs {
            config: Some(file.path().to_path_buf()),
            cells: Some(2),
            scheme: Some("ibc".into()),
            ..Default::default()
        };
        let merged = args.merged().unwrap();
        assert_eq!(merged.cells, Some(2));
        assert_eq!(merged.scheme.as_deref(), Some("ibc"));
        assert_eq!(merged.seed, Some(7));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let base = "cells = 2\nusers_per_cell = 2\nue_antennas = 2\nbs_antennas = 4\n";
        for extra in ["scheme = \"mimo\"", "scheme = \"imac\"\ntrials = 0", "scheme = \"imac\"\nrank_rel_tol = 2.0", "scheme = \"hd_ue_fd_bs\""] {
            assert!(matches!(parse(&format!("{base}{extra}\n")), Err(CliError::Config(_))), "{extra}");
        }
    }
}
