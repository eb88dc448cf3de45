use std::io::Write;

use num_complex::Complex64;
use odia::linalg::{complex_gaussian, kron, numeric_rank, transpose, vectorize, CMatrix, RankTolerance};
use odia::network::{required_relay_antennas, ChannelSet, NetworkConfig, Scheme};
use odia::sim::{db_to_linear, per_cell_rate};
use odia::solver::{interference_residual, solve, stacked, SolveError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{CliError, VerifyArgs};

struct Check {
    name: &'static str,
    failures: usize,
    cases: usize,
    worst: f64,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Self { name, failures: 0, cases: 0, worst: 0.0 }
    }

    fn record(&mut self, ok: bool, value: f64) {
        self.cases += 1;
        self.failures += usize::from(!ok);
        self.worst = self.worst.max(value);
    }
}

fn small(scheme: Scheme, nr: Option<usize>) -> NetworkConfig {
    let b = NetworkConfig::builder(scheme).cells(2).symmetric(2, 1, 2).relay_antennas(1);
    let b = match scheme {
        Scheme::HdUeFdBs => b.user_split(1, 1),
        Scheme::ImacBoost => b.alpha(0.5),
        _ => b,
    };
    let probe = b.build().expect("small network is valid");
    let nr = nr.unwrap_or_else(|| required_relay_antennas(&probe));
    probe.with_relay_antennas(nr).expect("relay size is positive")
}

fn rank_gap(ch: &ChannelSet, tol: RankTolerance) -> bool {
    let (h, rhs) = stacked(ch, Some(ch.config().alpha()));
    let mut aug = CMatrix::zeros(h.nrows(), h.ncols() + 1);
    aug.columns_mut(0, h.ncols()).copy_from(&h);
    aug.column_mut(h.ncols()).copy_from(&rhs);
    numeric_rank(&aug, tol) > numeric_rank(&h, tol)
}

pub fn run(args: &VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Config("`trials` must be at least 1".into()));
    }
    let tol = match args.rank_rel_tol {
        Some(t) => RankTolerance::new(t).map_err(|e| CliError::Config(format!("rank_rel_tol: {e}")))?,
        None => RankTolerance::default(),
    };
    let seeds = (0..args.trials as u64).map(|t| args.seed.wrapping_add(t));
    let mut checks = Vec::new();

    let mut c = Check::new("residual within tolerance at the required relay size");
    for scheme in Scheme::ALL {
        let cfg = small(scheme, None);
        for seed in seeds.clone() {
            let ch = ChannelSet::sample(&cfg, seed);
            match solve(&ch, tol) {
                Ok(bf) => {
                    let r = interference_residual(&ch, &bf).max_residual;
                    c.record(r <= args.residual_tol, r);
                }
                Err(_) => c.record(false, f64::INFINITY),
            }
        }
    }
    checks.push(c);

    let mut c = Check::new("infeasible exactly when the augmented rank grows");
    for scheme in Scheme::ALL {
        let required = required_relay_antennas(&small(scheme, None));
        for nr in required.saturating_sub(3).max(1)..=required {
            let cfg = small(scheme, Some(nr));
            for seed in seeds.clone() {
                let ch = ChannelSet::sample(&cfg, seed);
                let infeasible = matches!(solve(&ch, tol), Err(SolveError::Infeasible { .. }));
                c.record(infeasible == rank_gap(&ch, tol), 0.0);
            }
        }
    }
    checks.push(c);

    let mut c = Check::new("extra relay antennas keep feasibility");
    for scheme in Scheme::ALL {
        let cfg = small(scheme, None);
        for seed in seeds.clone() {
            let grown = ChannelSet::sample(&cfg, seed).with_extra_relay_antennas(2, seed ^ 0x5eed);
            let r = solve(&grown, tol).map(|bf| interference_residual(&grown, &bf).max_residual);
            let r = r.unwrap_or(f64::INFINITY);
            c.record(r <= args.residual_tol, r);
        }
    }
    checks.push(c);

    let mut c = Check::new("residual invariant under common channel scaling");
    let s = Complex64::new(3.0, -1.5);
    for scheme in Scheme::ALL {
        let cfg = small(scheme, None);
        for seed in seeds.clone() {
            let ch = ChannelSet::sample(&cfg, seed);
            let scaled = ch.map_matrices(|m| m * s);
            let gap = match (solve(&ch, tol), solve(&scaled, tol)) {
                (Ok(a), Ok(b)) => {
                    let (a, b) = (interference_residual(&ch, &a), interference_residual(&scaled, &b));
                    (a.max_residual - b.max_residual).abs()
                }
                _ => f64::INFINITY,
            };
            c.record(gap <= 1e-12, gap);
        }
    }
    checks.push(c);

    let mut c = Check::new("per-cell rates grow with transmit power");
    for scheme in Scheme::ALL {
        let cfg = small(scheme, None);
        for seed in seeds.clone() {
            let ch = ChannelSet::sample(&cfg, seed);
            let Ok(bf) = solve(&ch, tol) else {
                c.record(false, f64::INFINITY);
                continue;
            };
            let rates: Vec<Vec<f64>> = [0.0, 10.0, 20.0, 30.0]
                .iter()
                .map(|&db| per_cell_rate(&ch, &bf, db_to_linear(db)).iter().map(|r| r.total()).collect())
                .collect();
            let ok = rates.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| *a >= 0.0 && b >= a));
            c.record(ok, 0.0);
        }
    }
    checks.push(c);

    let mut c = Check::new("hd_ue_fd_bs without downlink users matches imac");
    let imac = small(Scheme::Imac, None);
    let hd = NetworkConfig::builder(Scheme::HdUeFdBs)
        .cells(2)
        .symmetric(2, 1, 2)
        .relay_antennas(imac.relay_antennas())
        .user_split(2, 0)
        .build()
        .expect("valid split");
    for seed in seeds.clone() {
        let gap = match (solve(&ChannelSet::sample(&imac, seed), tol), solve(&ChannelSet::sample(&hd, seed), tol)) {
            (Ok(a), Ok(b)) => (a.relay_t - b.relay_t).norm(),
            _ => f64::INFINITY,
        };
        c.record(gap <= 1e-10, gap);
    }
    checks.push(c);

    let mut c = Check::new("vec(AXB) = kron(B^T, A) vec(X)");
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = complex_gaussian(3, 2, &mut rng);
        let x = complex_gaussian(2, 4, &mut rng);
        let b = complex_gaussian(4, 3, &mut rng);
        let lhs = vectorize(&(&a * &x * &b));
        let gap = (&lhs - kron(&transpose(&b), &a) * vectorize(&x)).norm() / lhs.norm().max(1.0);
        c.record(gap <= 1e-12, gap);
    }
    checks.push(c);

    let mut failed = 0;
    for c in &checks {
        let verdict = if c.failures == 0 { "PASS" } else { "FAIL" };
        failed += usize::from(c.failures > 0);
        writeln!(out, "{verdict} {} ({}/{} cases, worst {:.2e})", c.name, c.cases - c.failures, c.cases, c.worst)?;
    }
    writeln!(out, "verify: {} passed, {failed} failed", checks.len() - failed)?;
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{failed} invariant checks failed")))
    }
}
