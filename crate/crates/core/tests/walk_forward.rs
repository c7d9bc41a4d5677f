use bandreg::engine::{
    run_strategy, run_strategy_from, EngineConfig, Execution, Strategy, Weighting,
};
use bandreg::optimizer::{grid_search, walk_forward, ComparisonRow, WalkForwardPlan};
use bandreg::series::LogRatioSeries;
use bandreg::{BandParams, Error};
use chrono::NaiveDate;
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn mean_reverting(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shock = Normal::new(0.0, 0.01).unwrap();
    let mut level = 0.0;
    (0..len)
        .map(|_| {
            level = 0.95 * level + shock.sample(&mut rng);
            level
        })
        .collect()
}

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2001, 1, 1).unwrap()
}

/// Four calendar years of daily values starting 2001-01-01.
fn fixture(seed: u64) -> LogRatioSeries {
    LogRatioSeries::synthetic(start(), mean_reverting(seed, 1461))
}

const THREE_SPLITS: &str = "\
k = 1
n_grid = 10..30
weighting = mean
execution = lagged
split = 2002, 2001-01-01, 2001-12-31, 2002-01-01, 2002-12-31
split = 2003, 2002-01-01, 2002-12-31, 2003-01-01, 2003-12-31
split = 2004, 2003-01-01, 2003-12-31, 2004-01-01, 2004-12-31
";

fn index_of(series: &LogRatioSeries, date: &str) -> usize {
    let d = NaiveDate::parse_from_str(date, "%Y-%m-%d").unwrap();
    series.index_at_or_after(d)
}

#[test]
fn grid_search_matches_brute_force() {
    let y = mean_reverting(42, 400);
    let grid: Vec<usize> = (10..=50).collect();
    for strategy in [Strategy::Bbpt, Strategy::Ffmdpt] {
        let found = grid_search(
            &y,
            strategy,
            1.0,
            &grid,
            Weighting::EqualPerTrade,
            Execution::Lagged,
        )
        .unwrap();
        let mut best: Option<(usize, f64)> = None;
        for &n in &grid {
            let cfg = EngineConfig::new(BandParams::new(n, 1.0).unwrap(), strategy);
            let r = run_strategy_from(&y, &cfg, 49)
                .unwrap()
                .strategy_return
                .value;
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((n, r));
            }
        }
        assert_eq!((found.best_n, found.best_return), best.unwrap());
        let mut shuffled = grid.clone();
        shuffled.reverse();
        let again = grid_search(
            &y,
            strategy,
            1.0,
            &shuffled,
            Weighting::EqualPerTrade,
            Execution::Lagged,
        )
        .unwrap();
        assert_eq!(again, found);
    }
}

#[test]
fn three_splits_give_three_consistent_rows() {
    let series = fixture(7);
    let plan = WalkForwardPlan::parse(THREE_SPLITS).unwrap();
    let rows = walk_forward(&series, &plan).unwrap();
    assert_eq!(rows.len(), 3);
    let y = series.values();
    for (row, split) in rows.iter().zip(&plan.splits) {
        assert_eq!(row.label, split.label);
        assert!(plan.n_grid.contains(&row.n_bbpt) && plan.n_grid.contains(&row.n_ffmdpt));
        assert!((row.diff - (row.rtn_bbpt - row.rtn_ffmdpt)).abs() <= 1e-12);

        // Replay the out-of-sample runs from the ledger.
        let out_lo = series.index_at_or_after(split.out_sample.start);
        let out_hi = series.index_after(split.out_sample.end) - 1;
        let from = out_lo - plan.max_n();
        let replay = |n: usize, strategy| {
            let cfg = EngineConfig::new(BandParams::new(n, 1.0).unwrap(), strategy);
            let r = run_strategy_from(&y[from..=out_hi], &cfg, out_lo - from).unwrap();
            assert!(r.trades.iter().all(|t| t.entry_index >= out_lo - from));
            r.trades.iter().map(|t| t.log_return).sum::<f64>() / r.trades.len().max(1) as f64
        };
        assert!((replay(row.n_bbpt, Strategy::Bbpt) - row.rtn_bbpt).abs() <= 1e-12);
        assert!((replay(row.n_ffmdpt, Strategy::Ffmdpt) - row.rtn_ffmdpt).abs() <= 1e-12);
    }
}

#[test]
fn identical_ranges_reduce_to_a_backtest() {
    let series = fixture(3);
    let text = "k = 2\nn_grid = 20\nsplit = all, 2001-01-01, 2004-12-31, 2001-01-01, 2004-12-31\n";
    let plan = WalkForwardPlan::parse(text).unwrap();
    let rows = walk_forward(&series, &plan).unwrap();
    for (strategy, rtn) in [
        (Strategy::Bbpt, rows[0].rtn_bbpt),
        (Strategy::Ffmdpt, rows[0].rtn_ffmdpt),
    ] {
        let cfg = EngineConfig::new(BandParams::new(20, 2.0).unwrap(), strategy);
        assert_eq!(
            run_strategy(series.values(), &cfg)
                .unwrap()
                .strategy_return
                .value,
            rtn
        );
    }
}

#[test]
fn splits_outside_the_data_are_missing() {
    let series = fixture(3);
    let text = "k = 1\nn_grid = 10\nsplit = late, 2004-01-01, 2004-12-31, 2005-01-01, 2005-12-31\n";
    let plan = WalkForwardPlan::parse(text).unwrap();
    assert!(matches!(
        walk_forward(&series, &plan),
        Err(Error::MissingData(_))
    ));
}

#[test]
fn gap_between_ranges_is_rejected() {
    let series = fixture(3);
    let text = "k = 1\nn_grid = 10\nsplit = gap, 2001-01-01, 2001-11-30, 2002-01-01, 2002-12-31\n";
    let plan = WalkForwardPlan::parse(text).unwrap();
    assert!(matches!(walk_forward(&series, &plan), Err(Error::Plan(_))));
}

#[test]
fn short_in_sample_is_missing_data() {
    let series = fixture(3);
    let text =
        "k = 1\nn_grid = 10..50\nsplit = s, 2001-01-01, 2001-01-20, 2001-01-21, 2001-12-31\n";
    let plan = WalkForwardPlan::parse(text).unwrap();
    assert!(matches!(
        walk_forward(&series, &plan),
        Err(Error::MissingData(_))
    ));
}

fn chosen(rows: &[ComparisonRow]) -> Vec<(usize, usize)> {
    rows.iter().map(|r| (r.n_bbpt, r.n_ffmdpt)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn out_of_sample_data_never_moves_the_choice(seed in 0u64..1000, noise in 0.001f64..0.05) {
        let series = fixture(11);
        let plan = WalkForwardPlan::parse(THREE_SPLITS).unwrap();
        let base = walk_forward(&series, &plan).unwrap();
        // Perturb the last split's out-of-sample year, which no in-sample range uses.
        let lo = index_of(&series, "2004-01-01");
        let mut values = series.values().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bump = Normal::new(0.0, noise).unwrap();
        for v in &mut values[lo..] {
            *v += bump.sample(&mut rng);
        }
        let perturbed = LogRatioSeries::synthetic(start(), values);
        let rows = walk_forward(&perturbed, &plan).unwrap();
        prop_assert_eq!(chosen(&rows), chosen(&base));
        for r in &rows {
            prop_assert!((r.diff - (r.rtn_bbpt - r.rtn_ffmdpt)).abs() <= 1e-12);
        }
    }
}
