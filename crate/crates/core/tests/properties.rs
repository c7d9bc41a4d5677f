use bandreg::bands::{bollinger_bands, prediction_interval, rolling_intercept_fit, IntervalMode};
use bandreg::engine::{run_strategy, EngineConfig, Execution, Side, Strategy, Trade};
use bandreg::models::{
    arima011_forecast_step, lambda_for_window, mave_weighted_age, rwpn_gamma1, ses_forecast_step,
    ses_weighted_age, theta_from_q, Arima011Params, RwpnParams, SesState,
};
use bandreg::series::parse_price_reader;
use bandreg::{align_pair, BandParams, PriceSeries};
use chrono::NaiveDate;
use proptest::prelude::*;
use proptest::strategy::Strategy as _;

fn walk(len: std::ops::Range<usize>) -> impl proptest::strategy::Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len).prop_map(|steps| {
        let mut level = 0.0;
        steps
            .into_iter()
            .map(|s| {
                level += s;
                level
            })
            .collect()
    })
}

fn prices(len: usize) -> impl proptest::strategy::Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1e4, len)
}

fn series(id: &str, start: u32, values: &[f64]) -> PriceSeries {
    let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    let obs = values
        .iter()
        .enumerate()
        .map(|(i, &p)| (d0 + chrono::Days::new((start as usize + i) as u64), p))
        .collect();
    PriceSeries::new(id, obs).unwrap()
}

fn config(n: usize, k: f64, strategy: Strategy, execution: Execution) -> EngineConfig {
    EngineConfig::new(BandParams::new(n, k).unwrap(), strategy).with_execution(execution)
}

fn executions() -> impl proptest::strategy::Strategy<Value = Execution> {
    prop_oneof![Just(Execution::Lagged), Just(Execution::Idealized)]
}

fn strategies() -> impl proptest::strategy::Strategy<Value = Strategy> {
    prop_oneof![Just(Strategy::Bbpt), Just(Strategy::Ffmdpt)]
}

fn entry_sides(trades: &[Trade]) -> Vec<(usize, usize, usize, Side)> {
    trades
        .iter()
        .map(|t| (t.signal_index, t.entry_index, t.exit_index, t.side))
        .collect()
}

proptest! {
    #[test]
    fn log_ratio_is_antisymmetric(z in prices(30), x in prices(30), shift in 0u32..10) {
        let zs = series("z", 0, &z);
        let xs = series("x", shift, &x);
        let a = align_pair(&zs, &xs).unwrap();
        let b = align_pair(&xs, &zs).unwrap();
        prop_assert_eq!(a.dates(), b.dates());
        for (u, v) in a.values().iter().zip(b.values()) {
            prop_assert_eq!(u + v, 0.0);
        }
    }

    #[test]
    fn price_csv_round_trip(p in prices(25), gap in 0u32..400) {
        let s = series("asset", gap, &p);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = parse_price_reader(buf.as_slice(), "asset").unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn bands_match_rolling_regression(y in walk(20..120), n in 2usize..20) {
        let bands = bollinger_bands(&y, BandParams::new(n, 2.0).unwrap()).unwrap();
        let fit = rolling_intercept_fit(&y, n).unwrap();
        for i in 0..y.len() {
            match (bands.center[i], fit.beta_hat[i]) {
                (Some(c), Some(b)) => prop_assert!((c - b).abs() <= 1e-10),
                (None, None) => {}
                other => prop_assert!(false, "definedness differs at {}: {:?}", i, other),
            }
            match (bands.sigma[i], fit.sigma_hat[i]) {
                (Some(s), Some(t)) => prop_assert!((s - t).abs() <= 1e-10),
                (None, None) => {}
                other => prop_assert!(false, "definedness differs at {}: {:?}", i, other),
            }
        }
    }

    #[test]
    fn exact_interval_contains_approximate(
        beta in -5.0f64..5.0, sigma in 1e-6f64..10.0, n in 2usize..200, m in 0.1f64..4.0,
    ) {
        let (el, eu) = prediction_interval(beta, sigma, n, m, IntervalMode::Exact).unwrap();
        let (al, au) = prediction_interval(beta, sigma, n, m, IntervalMode::Approximate).unwrap();
        prop_assert!(el < al && au < eu);
    }

    #[test]
    fn bands_are_location_and_scale_equivariant(
        y in walk(10..80), n in 2usize..10, c in -50.0f64..50.0, a in 0.01f64..100.0,
    ) {
        let p = BandParams::new(n, 1.5).unwrap();
        let base = bollinger_bands(&y, p).unwrap();
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        let scaled: Vec<f64> = y.iter().map(|v| v * a).collect();
        let sb = bollinger_bands(&shifted, p).unwrap();
        let cb = bollinger_bands(&scaled, p).unwrap();
        for i in base.valid_from..y.len() {
            let (b, s, k) = (base.at(i).unwrap(), sb.at(i).unwrap(), cb.at(i).unwrap());
            let tol = 1e-9 * (1.0 + c.abs() + b.center.abs());
            prop_assert!((s.center - (b.center + c)).abs() <= tol);
            prop_assert!((s.upper - (b.upper + c)).abs() <= tol);
            prop_assert!((s.lower - (b.lower + c)).abs() <= tol);
            prop_assert!((s.sigma - b.sigma).abs() <= tol);
            let tol = 1e-9 * a * (1.0 + b.center.abs() + b.sigma);
            prop_assert!((k.center - a * b.center).abs() <= tol);
            prop_assert!((k.sigma - a * b.sigma).abs() <= tol);
        }
    }

    #[test]
    fn ses_and_arima_agree_bitwise(y in walk(1..200), theta in -0.99f64..0.99) {
        let arima = Arima011Params::new(theta).unwrap();
        let mut ses = SesState::new(1.0 - theta).unwrap();
        let mut prev: Option<f64> = None;
        for &v in &y {
            ses = ses_forecast_step(ses, v);
            let next = match prev {
                Some(f) => arima011_forecast_step(arima, v, f),
                None => v,
            };
            prop_assert_eq!(ses.forecast().unwrap().to_bits(), next.to_bits());
            prev = Some(next);
        }
    }

    #[test]
    fn weighted_ages_match(n in 1usize..5000) {
        let ses = ses_weighted_age(lambda_for_window(n as f64).unwrap()).unwrap();
        let mave = mave_weighted_age(n).unwrap();
        prop_assert!((ses - mave).abs() <= 1e-12 * (1.0 + mave));
    }

    #[test]
    fn theta_map_matches_rwpn_autocorrelation(log_q in -6.0f64..6.0) {
        let q = 10f64.powf(log_q);
        let theta = theta_from_q(q).unwrap();
        prop_assert!(theta > -1.0 && theta < 0.0);
        // The ratio fed to the map is σ²_η/σ²_ε.
        let rwpn = RwpnParams::new(1.0, q).unwrap();
        let acf = theta / (1.0 + theta * theta);
        prop_assert!((acf - rwpn_gamma1(rwpn)).abs() <= 1e-12);
        prop_assert!((acf + 1.0 / (2.0 + q)).abs() <= 1e-12);
    }

    #[test]
    fn rwpn_autocorrelation_range(e in 1e-8f64..1e8, h in 1e-8f64..1e8) {
        let g = rwpn_gamma1(RwpnParams::new(e, h).unwrap());
        prop_assert!(g > -0.5 && g < 0.0);
    }

    #[test]
    fn trades_never_overlap(
        y in walk(20..300), n in 2usize..25, k in 0.5f64..2.5,
        strategy in strategies(), execution in executions(),
    ) {
        prop_assume!(y.len() >= n);
        let r = run_strategy(&y, &config(n, k, strategy, execution)).unwrap();
        for t in &r.trades {
            prop_assert!(t.signal_index <= t.entry_index && t.entry_index <= t.exit_index);
        }
        for w in r.trades.windows(2) {
            prop_assert!(w[0].exit_index < w[1].entry_index);
        }
    }

    #[test]
    fn ffmdpt_never_exceeds_window(
        y in walk(20..300), n in 2usize..25, k in 0.5f64..2.5, execution in executions(),
    ) {
        prop_assume!(y.len() >= n);
        let r = run_strategy(&y, &config(n, k, Strategy::Ffmdpt, execution)).unwrap();
        for t in &r.trades {
            prop_assert!(t.duration <= n, "duration {} > n = {}", t.duration, n);
        }
    }

    #[test]
    fn mirrored_series_mirrors_trades(
        y in walk(20..200), n in 2usize..20, k in 0.5f64..2.5,
        strategy in strategies(), execution in executions(),
    ) {
        prop_assume!(y.len() >= n);
        let cfg = config(n, k, strategy, execution);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let a = run_strategy(&y, &cfg).unwrap();
        let b = run_strategy(&neg, &cfg).unwrap();
        prop_assert_eq!(a.trades.len(), b.trades.len());
        for (s, t) in a.trades.iter().zip(&b.trades) {
            prop_assert_eq!(t.side, s.side.flipped());
            prop_assert_eq!((t.entry_index, t.exit_index, t.duration), (s.entry_index, s.exit_index, s.duration));
            prop_assert_eq!(t.log_return, s.log_return);
            prop_assert_eq!(t.exit_y - t.entry_y, -(s.exit_y - s.entry_y));
        }
    }

    #[test]
    fn shifted_series_trades_identically(
        y in walk(20..200), n in 2usize..20, k in 0.5f64..2.5, c in -20.0f64..20.0,
        strategy in strategies(), execution in executions(),
    ) {
        prop_assume!(y.len() >= n);
        let cfg = config(n, k, strategy, execution);
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        let a = run_strategy(&y, &cfg).unwrap();
        let b = run_strategy(&shifted, &cfg).unwrap();
        prop_assert_eq!(entry_sides(&a.trades), entry_sides(&b.trades));
        for (s, t) in a.trades.iter().zip(&b.trades) {
            prop_assert!((s.log_return - t.log_return).abs() <= 1e-9);
        }
    }
}
