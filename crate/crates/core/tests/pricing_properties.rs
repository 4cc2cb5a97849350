//! Pricing invariants over random models, plus checks on the published
//! payoff-surface parameter sets.

use proptest::prelude::*;

use switchcos::mc::{price_european_mc, terminal_log_returns, McConfig};
use switchcos::{ContractSpec, CosConfig, CosPricer, OptionKind, RegimeParams, SubordinatorFamily, SwitchingModel};

fn family() -> impl Strategy<Value = SubordinatorFamily> {
    prop_oneof![
        Just(SubordinatorFamily::Gamma),
        Just(SubordinatorFamily::InverseGaussian)
    ]
}

fn regime() -> impl Strategy<Value = RegimeParams> {
    (0.1..0.6f64, 2.0..8.0f64, 2.0..8.0f64).prop_map(|(s, a, b)| RegimeParams::new(0.0, s, a, b).unwrap())
}

prop_compose! {
    fn model()(f in family(), p1 in regime(), p2 in regime(), l12 in 0.2..5.0f64, l21 in 0.2..5.0f64, r in 0.0..0.08f64)
        -> SwitchingModel {
        SwitchingModel::new([p1, p2], l12, l21, f, 20.0, r).unwrap().risk_neutral().unwrap()
    }
}

const TOL: f64 = 1e-8;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prices_respect_no_arbitrage_bounds(m in model(), t in 0.5..2.0f64, k in 10.0..30.0f64) {
        let p = CosPricer::new(&m, t, &CosConfig::default()).unwrap();
        let disc_k = k * (-m.r * t).exp();
        let (call, put) = (p.call(k).unwrap(), p.put(k).unwrap());
        prop_assert!(call >= (m.s0 - disc_k).max(0.0) - TOL, "call {} below intrinsic", call);
        prop_assert!(call <= m.s0 + TOL);
        prop_assert!(put >= 0.0 && put <= disc_k + TOL, "put {}", put);
    }

    #[test]
    fn calls_fall_in_strike_and_rise_in_maturity(m in model(), t in 0.5..1.5f64, k in 12.0..28.0f64, dk in 0.1..3.0f64, dt in 0.05..0.5f64) {
        let p = CosPricer::new(&m, t, &CosConfig::default()).unwrap();
        prop_assert!(p.call(k).unwrap() >= p.call(k + dk).unwrap() - TOL);
        let later = CosPricer::new(&m, t + dt, &CosConfig::default()).unwrap();
        prop_assert!(later.call(k).unwrap() >= p.call(k).unwrap() - TOL);
    }
}

fn fig4(family: SubordinatorFamily) -> SwitchingModel {
    let p1 = RegimeParams::new(0.0, 0.03, 0.1, 1.0).unwrap();
    let p2 = RegimeParams::new(0.0, 0.7, 0.1, 1.2).unwrap();
    SwitchingModel::new([p1, p2], 2.5, 1.0, family, 20.0, 0.04)
        .unwrap()
        .risk_neutral()
        .unwrap()
}

#[test]
fn fig4_gamma_interval_covers_simulated_mass() {
    let m = fig4(SubordinatorFamily::Gamma);
    for t in [0.5, 1.0, 2.0] {
        let (a, b) = CosPricer::new(&m, t, &CosConfig::default()).unwrap().interval_for(m.s0);
        let z = terminal_log_returns(&m, t, t, 100_000, 11).unwrap();
        let outside = z.iter().filter(|v| **v < a || **v > b).count();
        assert_eq!(outside, 0, "T = {t}: {outside} of 1e5 samples outside [{a}, {b}]");
    }
}

/// With a clock shape of 0.1 per year the log-return density is nearly
/// singular at the strike, so COS converges algebraically. Large N still
/// reaches the Monte Carlo value.
#[test]
fn fig4_prices_converge_to_monte_carlo_at_large_n() {
    for family in [SubordinatorFamily::Gamma, SubordinatorFamily::InverseGaussian] {
        let m = fig4(family);
        let c = ContractSpec::new(20.0, 1.0, OptionKind::Call).unwrap();
        let cos = CosPricer::new(&m, 1.0, &CosConfig::with_terms(1 << 15))
            .unwrap()
            .call(20.0)
            .unwrap();
        let mc = price_european_mc(
            &m,
            &c,
            &McConfig {
                n_paths: 1_000_000,
                dt: 1.0,
                seed: 5,
            },
        )
        .unwrap();
        assert!(
            (cos - mc.price).abs() < 3.0 * mc.std_error,
            "{family:?}: COS {cos} vs MC {} +- {}",
            mc.price,
            mc.std_error
        );
    }
}

/// Doubling N from 256 on the payoff-surface sets. This does not hold:
/// the gap at the money is of order 1e-2 because the density is not smooth.
#[test]
#[ignore = "COS converges algebraically on these near-singular densities; kept as a record"]
fn fig4_self_convergence_256_vs_512() {
    for family in [SubordinatorFamily::Gamma, SubordinatorFamily::InverseGaussian] {
        let m = fig4(family);
        let p = |n| {
            CosPricer::new(&m, 1.0, &CosConfig::with_terms(n))
                .unwrap()
                .call(20.0)
                .unwrap()
        };
        assert!((p(256) - p(512)).abs() < 1e-6, "{family:?}");
    }
}
