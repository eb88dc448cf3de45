use std::fs::File;
use std::io::{BufWriter, Write};

use odia::linalg::numeric_rank;
use odia::network::{closed_form_dof, required_relay_antennas, ChannelSet, Dof, DofSummary, NetworkConfig, Node};
use odia::sim::{monte_carlo, trial_seeds, McOutcome, SimError, TrialReport};
use odia::solver::{effective_channel, interference_residual, solve, SolveError};

use crate::config::ExperimentConfig;
use crate::{verify, CliError, Command};

pub const CSV_HEADER: [&str; 9] =
    ["trial", "snr_db", "cell", "direction", "rate_bits_per_use", "max_residual", "eff_rank", "feasible", "seed"];

pub fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Feasibility(args) => feasibility(&args.resolve()?, out),
        Command::Solve { config, trial } => solve_one(&config.resolve()?, trial, out),
        Command::Verify(args) => verify::run(&args, out),
        Command::Simulate { config, output } => {
            let exp = config.resolve()?;
            let outcome = simulate(&exp)?;
            match output {
                Some(path) => {
                    let file = File::create(&path)
                        .map_err(|e| CliError::Failed(format!("cannot create {}: {e}", path.display())))?;
                    write_csv(&exp.network, &outcome, BufWriter::new(file))?;
                    summary(&exp, &outcome, out)?;
                }
                None => {
                    write_csv(&exp.network, &outcome, &mut *out)?;
                    summary(&exp, &outcome, err)?;
                }
            }
            check_residuals(&exp, &outcome)
        }
        Command::Dof(args) => {
            let exp = args.resolve()?;
            let outcome = simulate(&exp)?;
            summary(&exp, &outcome, out)?;
            dof_table(&exp, &outcome, out)?;
            check_residuals(&exp, &outcome)
        }
    }
}

fn header(cfg: &NetworkConfig, out: &mut dyn Write) -> std::io::Result<()> {
    let dims = match cfg.symmetric_dims() {
        Some((k, m, n)) => format!("K = {k}, M = {m}, N = {n}"),
        None => format!("{} UE antennas, {} BS antennas in total", cfg.total_ue_antennas(), cfg.total_bs_antennas()),
    };
    let streams = match cfg.streams_per_ue() {
        0 => String::new(),
        d => format!(", d = {d}"),
    };
    writeln!(out, "scheme {}: C = {}, {dims}{streams}, N_R = {}", cfg.scheme(), cfg.cells(), cfg.relay_antennas())
}

fn as_f64(r: Dof) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn bounds(dof: &DofSummary, out: &mut dyn Write) -> std::io::Result<()> {
    if let (Some(coop), Some(info)) = (dof.linear_coop_bound, dof.imac_info_bound) {
        writeln!(out, "reference bounds per cell: KM+N = {coop}, KMN/(KM+N) = {info}")?;
    }
    Ok(())
}

fn feasibility(exp: &ExperimentConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &exp.network;
    let required = required_relay_antennas(cfg);
    let dof = closed_form_dof(cfg);
    header(cfg, out)?;
    writeln!(out, "required relay antennas: N_R >= {required}")?;
    if cfg.relay_antennas() < required {
        writeln!(out, "configured N_R = {} is below the requirement", cfg.relay_antennas())?;
    }
    match dof.uniform_per_cell() {
        Some(d) => writeln!(out, "closed-form DoF per cell: {d}")?,
        None => {
            let cells: Vec<String> = dof.per_cell.iter().map(ToString::to_string).collect();
            writeln!(out, "closed-form DoF per cell: [{}]", cells.join(", "))?;
        }
    }
    if let Some(bs) = dof.per_bs {
        writeln!(out, "closed-form DoF per BS: {bs}")?;
    }
    if let Some(ue) = dof.per_ue {
        writeln!(out, "closed-form DoF per UE: {ue}")?;
    }
    writeln!(out, "closed-form network DoF: {}", dof.network_total)?;
    bounds(&dof, out)?;
    Ok(())
}

fn solve_one(exp: &ExperimentConfig, trial: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &exp.network;
    let (channel_seed, _) = trial_seeds(exp.seed, trial);
    header(cfg, out)?;
    writeln!(out, "seed {}, trial {trial}, channel seed {channel_seed}", exp.seed)?;
    let ch = ChannelSet::sample(cfg, channel_seed);
    let bf = match solve(&ch, exp.tol) {
        Ok(bf) => bf,
        Err(SolveError::Infeasible { rank, augmented_rank, rows }) => {
            writeln!(out, "relay system: {rows} equations, rank {rank}, augmented rank {augmented_rank}")?;
            return Err(CliError::Infeasible(format!(
                "no relay matrix cancels the interference (rank {rank} < augmented rank {augmented_rank})"
            )));
        }
        Err(e) => return Err(CliError::Failed(e.to_string())),
    };
    let d = &bf.diagnostics;
    writeln!(
        out,
        "relay system: {} equations, {} unknowns, rank {}, relative residual {:.3e}",
        d.rows, d.unknowns, d.rank, d.relative_residual
    )?;
    let report = interference_residual(&ch, &bf);
    for (node, r) in &report.per_node {
        writeln!(out, "  residual at {node}: {r:.3e}")?;
    }
    for rx in cfg.receivers() {
        if let Some(eff) = effective_channel(&ch, &bf, rx) {
            writeln!(out, "  effective rank at {rx}: {} of {}", numeric_rank(&eff, exp.tol), eff.ncols())?;
        }
    }
    let ok = report.max_residual <= exp.residual_tol;
    writeln!(
        out,
        "max residual {:.3e} {} {:e}",
        report.max_residual,
        if ok { "<=" } else { ">" },
        exp.residual_tol
    )?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Failed("interference residual above tolerance".into()))
    }
}

fn simulate(exp: &ExperimentConfig) -> Result<McOutcome, CliError> {
    monte_carlo(&exp.network, &exp.mc_options()).map_err(|e| match e {
        SimError::AllTrialsInfeasible { .. } => CliError::Infeasible(e.to_string()),
        SimError::Domain(_) => CliError::Config(e.to_string()),
        SimError::Dimension(_) => CliError::Failed(e.to_string()),
    })
}

fn check_residuals(exp: &ExperimentConfig, outcome: &McOutcome) -> Result<(), CliError> {
    match outcome.aggregate.residual_violations {
        0 => Ok(()),
        n => Err(CliError::Failed(format!("{n} trials exceed residual tolerance {:e}", exp.residual_tol))),
    }
}

/// Directions a cell carries: uplink when its BS receives, downlink when it
/// serves downlink users.
fn directions(cfg: &NetworkConfig, cell: usize) -> Vec<&'static str> {
    let mut dirs = Vec::new();
    if cfg.receives(Node::Bs(cell)) {
        dirs.push("ul");
    }
    if !cfg.downlink_users_of(cell).is_empty() {
        dirs.push("dl");
    }
    dirs
}

fn eff_rank(cfg: &NetworkConfig, report: &TrialReport, cell: usize, dir: &str) -> Option<usize> {
    let rank_of = |n: Node| report.eff_ranks.iter().find(|(m, _)| *m == n).map(|&(_, r)| r);
    match dir {
        "ul" => rank_of(Node::Bs(cell)),
        _ => cfg.downlink_users_of(cell).into_iter().map(rank_of).sum(),
    }
}

/// One row per trial, grid point, cell and direction, in that order.
pub fn write_csv<W: Write>(cfg: &NetworkConfig, outcome: &McOutcome, sink: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_HEADER)?;
    let snr_db = &outcome.aggregate.snr_db;
    for report in &outcome.reports {
        for (s, db) in snr_db.iter().enumerate() {
            for cell in 0..cfg.cells() {
                for dir in directions(cfg, cell) {
                    let (rate, residual, rank) = if report.feasible {
                        let r = report.rates[s][cell];
                        let rate = if dir == "ul" { r.uplink } else { r.downlink };
                        (
                            rate.map(|x| x.to_string()).unwrap_or_default(),
                            report.max_residual.map(|x| format!("{x:e}")).unwrap_or_default(),
                            eff_rank(cfg, report, cell, dir).map(|x| x.to_string()).unwrap_or_default(),
                        )
                    } else {
                        Default::default()
                    };
                    w.write_record([
                        report.trial.to_string(),
                        db.to_string(),
                        cell.to_string(),
                        dir.to_string(),
                        rate,
                        residual,
                        rank,
                        u8::from(report.feasible).to_string(),
                        report.seed.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn summary(exp: &ExperimentConfig, outcome: &McOutcome, out: &mut dyn Write) -> Result<(), CliError> {
    let a = &outcome.aggregate;
    header(&exp.network, out)?;
    writeln!(out, "trials {}, seed {}, infeasible {}", a.trials, exp.seed, a.infeasible_trials)?;
    writeln!(
        out,
        "max residual {:.3e} (tolerance {:e}, {} violations)",
        a.max_residual, exp.residual_tol, a.residual_violations
    )?;
    for (db, rate) in a.snr_db.iter().zip(&a.mean_network_rate) {
        writeln!(out, "  {db:>6} dB: mean network rate {rate:.4} bits/use")?;
    }
    let dof = closed_form_dof(&exp.network);
    match a.network_dof {
        Some(slope) => writeln!(out, "network DoF slope {slope:.3} (closed form {})", dof.network_total)?,
        None => writeln!(out, "network DoF slope needs two distinct SNR points")?,
    }
    Ok(())
}

fn fmt_slope(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

fn dof_table(exp: &ExperimentConfig, outcome: &McOutcome, out: &mut dyn Write) -> Result<(), CliError> {
    let dof = closed_form_dof(&exp.network);
    let Some(cells) = &outcome.aggregate.cell_dof else {
        return Ok(());
    };
    writeln!(out, "{:>5} {:>8} {:>8} {:>8} {:>12}", "cell", "ul", "dl", "total", "closed form")?;
    for (c, slope) in cells.iter().enumerate() {
        writeln!(
            out,
            "{:>5} {:>8} {:>8} {:>8.3} {:>12}",
            c,
            fmt_slope(slope.uplink),
            fmt_slope(slope.downlink),
            slope.total,
            dof.per_cell[c]
        )?;
    }
    if let Some(network) = outcome.aggregate.network_dof {
        let expected = as_f64(dof.network_total);
        let rel = if expected > 0.0 { (network - expected).abs() / expected } else { network.abs() };
        writeln!(out, "network slope {network:.3} vs closed form {} (relative gap {rel:.3})", dof.network_total)?;
    }
    bounds(&dof, out)?;
    Ok(())
}
