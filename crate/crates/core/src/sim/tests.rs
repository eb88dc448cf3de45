use nalgebra::LU;

use super::*;
use crate::network::{NetworkConfig, Scheme};
use crate::solver::{effective_channel, solve};

fn sym(scheme: Scheme, c: usize, k: usize, m: usize, n: usize, nr: usize) -> NetworkConfig {
    NetworkConfig::symmetric(scheme, c, k, m, n, nr).unwrap()
}

fn solved(cfg: &NetworkConfig, seed: u64) -> (ChannelSet, Beamformer) {
    let ch = ChannelSet::sample(cfg, seed);
    let bf = solve(&ch, RankTolerance::default()).unwrap();
    (ch, bf)
}

fn stacked_signals(cfg: &NetworkConfig, payload: &TransmitPayload, rx: Node) -> CVector {
    let parts: Vec<Complex64> = cfg
        .desired_transmitters(rx)
        .iter()
        .flat_map(|t| payload.signals[t].iter().copied().collect::<Vec<_>>())
        .collect();
    CVector::from_vec(parts)
}

#[test]
fn scalar_link_rate_matches_closed_form() {
    let cfg = sym(Scheme::Imac, 1, 1, 1, 1, 1);
    for seed in 0..5 {
        let (ch, bf) = solved(&cfg, seed);
        let h = ch.direct(Node::Bs(0), Node::Ue { cell: 0, user: 0 }).unwrap()[(0, 0)];
        for p in [0.1, 1.0, 100.0, 1e6] {
            let want = 0.5 * (1.0 + p * h.norm_sqr() / 2.0).log2();
            let got = per_cell_rate(&ch, &bf, p)[0];
            assert!((got.uplink.unwrap() - want).abs() <= 1e-10);
            assert_eq!(got.downlink, None);
        }
    }
}

#[test]
fn rate_vanishes_at_zero_power_and_grows_with_power() {
    let (ch, bf) = solved(&sym(Scheme::Imac, 3, 2, 2, 4, 12), 1);
    assert!(per_cell_rate(&ch, &bf, 1e-12).iter().all(|r| r.total() < 1e-9));
    let mut last = [0.0; 3];
    for db in [-10.0, 0.0, 10.0, 20.0, 30.0, 40.0] {
        let rates = per_cell_rate(&ch, &bf, db_to_linear(db));
        for (c, r) in rates.iter().enumerate() {
            assert!(r.total() > last[c]);
            last[c] = r.total();
        }
    }
}

#[test]
fn doubling_power_adds_half_the_stream_count() {
    let cfg = sym(Scheme::Imac, 3, 2, 2, 4, 12);
    let (lo, hi) = (db_to_linear(40.0), db_to_linear(43.0));
    let mut gain = 0.0;
    for seed in 0..10 {
        let (ch, bf) = solved(&cfg, seed);
        let a = per_cell_rate(&ch, &bf, lo);
        let b = per_cell_rate(&ch, &bf, hi);
        gain += (0..3).map(|c| b[c].total() - a[c].total()).sum::<f64>() / 30.0;
    }
    // 3 dB is one doubling; min{N, KM}/2 = 2 bits per cell
    let per_doubling = gain / (hi.log2() - lo.log2());
    assert!((per_doubling - 2.0).abs() < 0.2, "{per_doubling}");
}

#[test]
fn noiseless_frame_carries_only_desired_signal() {
    for cfg in [
        sym(Scheme::Imac, 3, 2, 2, 4, 12),
        sym(Scheme::Fd, 2, 2, 2, 4, 16),
        sym(Scheme::FdInstantaneous, 2, 2, 2, 4, 16),
    ] {
        let (ch, bf) = solved(&cfg, 2);
        let payload = TransmitPayload::gaussian(&ch, &bf, 100.0, 7);
        let frame = transmit_two_slots(&ch, &bf, &payload, 0.0, 8).unwrap();
        for rx in cfg.receivers() {
            let y = frame.combined(&ch, &bf, &payload, rx).unwrap();
            let desired: CVector = cfg
                .desired_transmitters(rx)
                .iter()
                .map(|&t| crate::solver::combined_channel(&ch, &bf.relay_t, rx, t).unwrap() * &payload.signals[&t])
                .fold(CVector::zeros(y.len()), |acc, v| acc + v);
            assert!((&y - &desired).norm() <= 1e-8 * desired.norm(), "{rx}");
            if let Node::Bs(_) = rx {
                let eff = effective_channel(&ch, &bf, rx).unwrap();
                assert!((&y - eff * stacked_signals(&cfg, &payload, rx)).norm() <= 1e-8 * y.norm());
            }
        }
    }
}

#[test]
fn zero_relay_single_cell_adds_only_noise() {
    let cfg = sym(Scheme::Imac, 1, 2, 1, 2, 3);
    let (ch, bf) = solved(&cfg, 3);
    assert_eq!(bf.relay_t, CMatrix::zeros(3, 3));
    let payload = TransmitPayload::gaussian(&ch, &bf, 10.0, 1);
    let frame = transmit_two_slots(&ch, &bf, &payload, 1.0, 2).unwrap();
    let rx = Node::Bs(0);
    let y = frame.combined(&ch, &bf, &payload, rx).unwrap();
    let h_hat = effective_channel(&ch, &bf, rx).unwrap();
    let want = h_hat * stacked_signals(&cfg, &payload, rx) + &frame.noise1[&rx] + &frame.noise2[&rx];
    assert!((y - want).norm() <= 1e-12);
}

#[test]
fn frames_are_deterministic() {
    let (ch, bf) = solved(&sym(Scheme::Fd, 2, 1, 1, 2, 6), 4);
    let payload = TransmitPayload::gaussian(&ch, &bf, 5.0, 1);
    let a = transmit_two_slots(&ch, &bf, &payload, 1.0, 99).unwrap();
    let b = transmit_two_slots(&ch, &bf, &payload, 1.0, 99).unwrap();
    let c = transmit_two_slots(&ch, &bf, &payload, 1.0, 100).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn payload_dimensions_are_checked() {
    let (ch, bf) = solved(&sym(Scheme::Imac, 2, 1, 1, 1, 2), 0);
    let mut payload = TransmitPayload::gaussian(&ch, &bf, 1.0, 0);
    payload.signals.insert(Node::Ue { cell: 0, user: 0 }, CVector::zeros(3));
    assert!(matches!(transmit_two_slots(&ch, &bf, &payload, 1.0, 0), Err(SimError::Dimension(_))));
}

#[test]
fn instantaneous_frame_has_one_noise_draw() {
    let (ch, bf) = solved(&sym(Scheme::FdInstantaneous, 1, 1, 1, 1, 2), 0);
    let payload = TransmitPayload::gaussian(&ch, &bf, 1.0, 0);
    let frame = transmit_two_slots(&ch, &bf, &payload, 1.0, 0).unwrap();
    assert!(frame.noise2.values().all(|n| n.norm() == 0.0));
}

#[test]
fn decorrelator_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y = complex_gaussian(3, 1, &mut rng).column(0).into_owned();
    assert!((decorrelate(&CMatrix::identity(3, 3), &y) - &y).norm() < 1e-15);

    // tall: exact recovery
    let h = complex_gaussian(4, 3, &mut rng);
    let x = complex_gaussian(3, 1, &mut rng).column(0).into_owned();
    assert!((decorrelate(&h, &(&h * &x)) - &x).norm() <= 1e-8 * x.norm());

    // wide: minimum-norm least squares, compared with H^H (H H^H)^-1 y
    let h = complex_gaussian(2, 4, &mut rng);
    let x = complex_gaussian(4, 1, &mut rng).column(0).into_owned();
    let y = &h * &x;
    let gram = LU::new(&h * h.adjoint());
    let oracle = h.adjoint() * gram.solve(&y).unwrap();
    let got = decorrelate(&h, &y);
    assert!((&got - &oracle).norm() <= 1e-10 * oracle.norm());
    assert!((got - &x).norm() > 0.1 * x.norm());
}

#[test]
fn slope_arithmetic() {
    let s = dof_slope(10.0, 20.0, 1e3, 1e6).unwrap();
    assert!((s - 10.0 / 1e3f64.log2()).abs() < 1e-12);
    assert!((s - 1.0034).abs() < 1e-3);
    assert_eq!(dof_slope(5.0, 5.0, 1.0, 2.0).unwrap(), 0.0);
    assert!(matches!(dof_slope(1.0, 2.0, 2.0, 1.0), Err(SimError::Domain(_))));
    assert!(matches!(dof_slope(1.0, 2.0, 0.0, 1.0), Err(SimError::Domain(_))));
}

#[test]
fn downlink_users_get_their_own_streams() {
    let cfg = sym(Scheme::Ibc, 2, 2, 2, 4, 8);
    let (ch, bf) = solved(&cfg, 5);
    let payload = TransmitPayload::gaussian(&ch, &bf, 1.0, 3);
    let frame = transmit_two_slots(&ch, &bf, &payload, 0.0, 0).unwrap();
    for cell in 0..2 {
        let bs = Node::Bs(cell);
        for (k, ue) in cfg.downlink_users_of(cell).into_iter().enumerate() {
            let eff = effective_channel(&ch, &bf, ue).unwrap();
            let est = decorrelate(&eff, &frame.combined(&ch, &bf, &payload, ue).unwrap());
            let want = payload.streams[&bs].rows(2 * k, 2) * Complex64::new(payload.gains[&bs], 0.0);
            assert!((est - want).norm() <= 1e-8);
        }
    }
    let rates = per_cell_rate(&ch, &bf, 100.0);
    assert!(rates.iter().all(|r| r.uplink.is_none() && r.downlink.unwrap() > 0.0));
}

#[test]
fn boost_raises_rate_at_fixed_power() {
    let plain = NetworkConfig::builder(Scheme::ImacBoost).cells(3).symmetric(2, 2, 4).relay_antennas(12).build().unwrap();
    let boosted = NetworkConfig::builder(Scheme::ImacBoost)
        .cells(3)
        .symmetric(2, 2, 4)
        .relay_antennas(12)
        .alpha(1.0)
        .build()
        .unwrap();
    for seed in 0..5 {
        let (ch0, bf0) = solved(&plain, seed);
        let (ch1, bf1) = solved(&boosted, seed);
        let p = db_to_linear(20.0);
        let r0: f64 = per_cell_rate(&ch0, &bf0, p).iter().map(CellRate::total).sum();
        let r1: f64 = per_cell_rate(&ch1, &bf1, p).iter().map(CellRate::total).sum();
        assert!(r1 > r0, "seed {seed}: {r1} <= {r0}");
    }
}

#[test]
fn monte_carlo_is_deterministic_and_counts_infeasible_trials() {
    let cfg = sym(Scheme::Imac, 3, 2, 2, 4, 12);
    let opts = McOptions::new(8, 42);
    let a = monte_carlo(&cfg, &opts).unwrap();
    let b = monte_carlo(&cfg, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.aggregate.infeasible_trials, 0);
    assert_eq!(a.aggregate.residual_violations, 0);
    assert!(a.aggregate.max_recovery_error.unwrap() <= 1e-8);
    assert_eq!(run_trial(&cfg, &opts, 5), a.reports[5]);
    assert!(a.reports.iter().all(|r| r.eff_ranks.iter().all(|&(_, rank)| rank == 4)));

    let small = cfg.with_relay_antennas(9).unwrap();
    assert_eq!(
        monte_carlo(&small, &McOptions::new(10, 1)),
        Err(SimError::AllTrialsInfeasible { trials: 10 })
    );
    assert!(matches!(monte_carlo(&cfg, &McOptions::new(0, 1)), Err(SimError::Domain(_))));
    assert!(matches!(monte_carlo(&cfg, &McOptions::new(1, 1).with_snr_db(vec![])), Err(SimError::Domain(_))));
}

#[test]
fn single_grid_point_has_no_dof_estimate() {
    let cfg = sym(Scheme::Imac, 2, 1, 1, 1, 2);
    let out = monte_carlo(&cfg, &McOptions::new(3, 0).with_snr_db(vec![20.0])).unwrap();
    assert_eq!(out.aggregate.network_dof, None);
    assert!(out.reports.iter().all(|r| r.dof_estimate.is_none()));
}

#[test]
fn trial_seeds_differ_per_trial() {
    let seeds: Vec<_> = (0..50).map(|t| trial_seeds(7, t)).collect();
    for (i, a) in seeds.iter().enumerate() {
        assert!(seeds[i + 1..].iter().all(|b| a.0 != b.0));
    }
    assert_eq!(trial_seeds(7, 3), seeds[3]);
}
