use num_complex::Complex64;
use odia::linalg::{numeric_rank, vcat, CMatrix, RankTolerance};
use odia::network::{closed_form_dof, required_relay_antennas, ChannelSet, NetworkConfig, Node, Scheme};
use odia::sim::{db_to_linear, per_cell_rate};
use odia::solver::{
    combined_channel, interference_residual, solve, stacked, SolveError,
};
use proptest::prelude::*;

fn tol() -> RankTolerance {
    RankTolerance::default()
}

fn config(scheme: Scheme, c: usize, k: usize, m: usize, n: usize, nr: usize) -> NetworkConfig {
    let b = NetworkConfig::builder(scheme).cells(c).symmetric(k, m, n).relay_antennas(nr);
    match scheme {
        Scheme::HdUeFdBs => b.user_split(k.div_ceil(2), k / 2).build().unwrap(),
        Scheme::ImacBoost => b.alpha(0.5).build().unwrap(),
        _ => b.build().unwrap(),
    }
}

fn scheme_strategy() -> impl Strategy<Value = Scheme> {
    proptest::sample::select(Scheme::ALL.to_vec())
}

fn augmented_rank_gap(ch: &ChannelSet) -> bool {
    let (h, rhs) = stacked(ch, Some(ch.config().alpha()));
    let mut aug = CMatrix::zeros(h.nrows(), h.ncols() + 1);
    aug.columns_mut(0, h.ncols()).copy_from(&h);
    aug.column_mut(h.ncols()).copy_from(&rhs);
    numeric_rank(&aug, tol()) > numeric_rank(&h, tol())
}

#[test]
fn imac_system_has_full_row_rank_at_required_size() {
    let cfg = config(Scheme::Imac, 3, 2, 2, 4, 12);
    assert_eq!(required_relay_antennas(&cfg), 12);
    for seed in 0..100 {
        let (h, _) = stacked(&ChannelSet::sample(&cfg, seed), None);
        assert_eq!(numeric_rank(&h, tol()), h.nrows(), "seed {seed}");
    }
}

#[test]
fn required_size_is_feasible_for_every_scheme() {
    for scheme in Scheme::ALL {
        for (c, k, m, n) in [(2, 2, 2, 4), (3, 1, 2, 2), (2, 2, 1, 3)] {
            let probe = config(scheme, c, k, m, n, 1);
            let cfg = probe.with_relay_antennas(required_relay_antennas(&probe)).unwrap();
            for seed in 0..5 {
                let ch = ChannelSet::sample(&cfg, seed);
                let bf = solve(&ch, tol()).unwrap_or_else(|e| panic!("{scheme} {:?}: {e}", (c, k, m, n)));
                assert!(interference_residual(&ch, &bf).max_residual <= 1e-8, "{scheme}");
            }
        }
    }
}

#[test]
fn closed_form_dof_is_bounded_by_cooperative_limit() {
    for scheme in [Scheme::Imac, Scheme::Ibc, Scheme::ImacBoost] {
        for (c, k, m, n) in [(2, 2, 2, 4), (3, 1, 2, 2), (2, 2, 1, 3)] {
            let dof = closed_form_dof(&config(scheme, c, k, m, n, 1));
            assert!(dof.uniform_per_cell().unwrap() <= dof.linear_coop_bound.unwrap());
        }
    }
}

#[test]
fn precoders_leak_nothing_to_other_users() {
    for (scheme, nr) in [(Scheme::Ibc, 8), (Scheme::Fd, 16)] {
        let cfg = config(scheme, 2, 2, 2, 4, nr);
        for seed in 0..20 {
            let ch = ChannelSet::sample(&cfg, seed);
            let bf = solve(&ch, tol()).unwrap();
            let d = cfg.streams_per_ue();
            for cell in 0..2 {
                let users = cfg.downlink_users_of(cell);
                let a = vcat(
                    4,
                    &users
                        .iter()
                        .map(|&u| combined_channel(&ch, &bf.relay_t, u, Node::Bs(cell)).unwrap())
                        .collect::<Vec<_>>(),
                );
                let av = a * bf.precoder(cell).unwrap();
                for (k, _) in users.iter().enumerate() {
                    for row in 0..2 {
                        for col in 0..av.ncols() {
                            let own = col / d == k && row == col % d;
                            let want = if own { Complex64::ONE } else { Complex64::ZERO };
                            assert!((av[(2 * k + row, col)] - want).norm() <= 1e-9);
                        }
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn infeasible_exactly_when_rank_test_fails(
        scheme in scheme_strategy(),
        seed in any::<u64>(),
        c in 1usize..4,
        k in 1usize..3,
        m in 1usize..3,
        n in 1usize..4,
        shrink in 0usize..4,
    ) {
        let n = n.max(k);
        let probe = config(scheme, c, k, m.min(n), n, 1);
        let nr = required_relay_antennas(&probe).saturating_sub(shrink).max(1);
        let ch = ChannelSet::sample(&probe.with_relay_antennas(nr).unwrap(), seed);
        let result = solve(&ch, tol());
        let infeasible = matches!(result, Err(SolveError::Infeasible { .. }));
        prop_assert_eq!(infeasible, augmented_rank_gap(&ch));
        if let Ok(bf) = result {
            let report = interference_residual(&ch, &bf);
            prop_assert!(report.per_node.iter().all(|&(_, r)| r >= 0.0));
            prop_assert!(report.max_residual <= 1e-7);
        }
    }

    #[test]
    fn extra_relay_antennas_preserve_feasibility(
        scheme in scheme_strategy(),
        seed in any::<u64>(),
        extra in 1usize..3,
    ) {
        let probe = config(scheme, 2, 2, 1, 2, 1);
        let cfg = probe.with_relay_antennas(required_relay_antennas(&probe)).unwrap();
        let ch = ChannelSet::sample(&cfg, seed);
        if solve(&ch, tol()).is_ok() {
            let grown = ch.with_extra_relay_antennas(extra, seed ^ 0x5eed);
            let bf = solve(&grown, tol());
            prop_assert!(bf.is_ok());
            prop_assert!(interference_residual(&grown, &bf.unwrap()).max_residual <= 1e-8);
        }
    }

    #[test]
    fn residuals_ignore_common_channel_scaling(
        scheme in scheme_strategy(),
        seed in any::<u64>(),
        re in 0.1f64..10.0,
        im in -5.0f64..5.0,
    ) {
        let probe = config(scheme, 2, 2, 1, 2, 1);
        let cfg = probe.with_relay_antennas(required_relay_antennas(&probe)).unwrap();
        let ch = ChannelSet::sample(&cfg, seed);
        let s = Complex64::new(re, im);
        let scaled = ch.map_matrices(|m| m * s);
        let mut bf = solve(&ch, tol()).unwrap();
        let mut bf_scaled = solve(&scaled, tol()).unwrap();
        let a = interference_residual(&ch, &bf);
        let b = interference_residual(&scaled, &bf_scaled);
        for ((_, x), (_, y)) in a.per_node.iter().zip(&b.per_node) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        // a perturbed relay matrix, compensated for the scaling
        bf.relay_t *= Complex64::new(1.1, 0.3);
        bf_scaled.relay_t = &bf.relay_t / s;
        let a = interference_residual(&ch, &bf);
        let b = interference_residual(&scaled, &bf_scaled);
        for ((_, x), (_, y)) in a.per_node.iter().zip(&b.per_node) {
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }
    }

    #[test]
    fn rates_grow_with_power(scheme in scheme_strategy(), seed in any::<u64>(), lo_db in -10.0f64..40.0, step in 0.5f64..20.0) {
        let probe = config(scheme, 2, 2, 1, 2, 1);
        let cfg = probe.with_relay_antennas(required_relay_antennas(&probe)).unwrap();
        let ch = ChannelSet::sample(&cfg, seed);
        let bf = solve(&ch, tol()).unwrap();
        let lo = per_cell_rate(&ch, &bf, db_to_linear(lo_db));
        let hi = per_cell_rate(&ch, &bf, db_to_linear(lo_db + step));
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!(a.total() >= 0.0);
            prop_assert!(b.total() >= a.total());
        }
    }

    #[test]
    fn hd_without_downlink_matches_imac(seed in any::<u64>(), c in 2usize..4, k in 1usize..3) {
        let imac = config(Scheme::Imac, c, k, 1, 2, 1);
        let nr = required_relay_antennas(&imac);
        let imac = imac.with_relay_antennas(nr).unwrap();
        let hd = NetworkConfig::builder(Scheme::HdUeFdBs)
            .cells(c)
            .symmetric(k, 1, 2)
            .relay_antennas(nr)
            .user_split(k, 0)
            .build()
            .unwrap();
        let a = solve(&ChannelSet::sample(&imac, seed), tol()).unwrap();
        let b = solve(&ChannelSet::sample(&hd, seed), tol()).unwrap();
        prop_assert!((a.relay_t - b.relay_t).norm() <= 1e-10);
    }
}
