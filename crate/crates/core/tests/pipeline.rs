use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use murspin::infoloss::{device_loss_closed, noisy_decomposition, relative_entropy, visibility, ProbVector};
use murspin::lp::game_value;
use murspin::minimize::{analytic_solution, bound_check, inner_from_diagonal, outer_search, SearchOptions, Verification};
use murspin::orthogonal::{cloning_device_loss, CloningSpec};
use murspin::qcoeff::{q_table, AngleGrid, LambdaWeights, QBuilder, QTable};
use murspin::{Direction, SpinValue};

fn sp(ts: u32) -> SpinValue {
    SpinValue::from_twice(ts).unwrap()
}

#[test]
fn reports_are_consistent_with_the_table_they_describe() {
    for ts in 1..=5 {
        let s = sp(ts);
        let report = outer_search(s, &SearchOptions::default()).unwrap();
        let table = q_table(s, &report.grid_opt).unwrap();
        assert_abs_diff_eq!(device_loss_closed(&table, &report.lambdas_opt).unwrap(), report.info_loss, epsilon = 1e-12);
        assert_abs_diff_eq!(visibility(&table, &report.lambdas_opt).unwrap(), report.visibility, epsilon = 1e-12);
        let dec = noisy_decomposition(&table, &report.lambdas_opt, &Direction::polar(0.4, 1.1)).unwrap();
        assert_abs_diff_eq!(dec.visibility, report.visibility, epsilon = 1e-12);
        assert!(bound_check(&report).unwrap().passed);
        assert!(report.solver_trace.as_ref().unwrap().converged);
        match (&report.verification, ts) {
            (Verification::Analytic { agrees, .. }, 1..=3) => assert!(agrees),
            (Verification::Unverified, 4..) => {}
            (v, _) => panic!("unexpected verification {v:?} for 2s = {ts}"),
        }
    }
}

#[test]
fn minimum_loss_grows_with_spin_and_beats_the_unbiased_grid() {
    let mut previous = 0.0;
    for ts in 1..=5 {
        let s = sp(ts);
        let opt = outer_search(s, &SearchOptions::default()).unwrap().info_loss;
        assert!(opt > previous);
        previous = opt;
        let unbiased = q_table(s, &AngleGrid::unbiased(s)).unwrap();
        let inner = inner_from_diagonal(s, &QBuilder::new(s).diagonal(unbiased.grid())).unwrap();
        assert!(opt <= -inner.value.log2() + 1e-12);
    }
}

#[test]
fn cloning_bounds_lie_below_the_all_component_optimum() {
    for ts in 1..=3 {
        let s = sp(ts);
        let all = analytic_solution(s).unwrap().info_loss;
        for r in [2, 3] {
            assert!(cloning_device_loss(&CloningSpec::new(s, r).unwrap()) < all);
        }
    }
}

#[test]
fn table_json_round_trip() {
    for ts in 1..=6 {
        let s = sp(ts);
        let free: Vec<f64> = (0..s.free_angles()).map(|k| 0.9 - 0.17 * k as f64).collect();
        let table = q_table(s, &AngleGrid::from_free(s, &free).unwrap()).unwrap();
        let back = QTable::from_json(&table.to_json().unwrap()).unwrap();
        assert_eq!(back, table);
    }
    assert!(QTable::from_json("{\"s\": \"1\", \"grid\": [1, 0.5, -0.5, -1], \"q\": []}").is_err());
}

#[test]
fn report_json_is_reproducible() {
    let opts = SearchOptions::default();
    let a = outer_search(sp(4), &opts).unwrap().to_json().unwrap();
    let b = outer_search(sp(4), &opts).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    for key in ["lambdas_opt", "grid_opt", "k_value", "info_loss", "slackness_residual", "solver_trace", "verification"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

fn positive_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..6).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0.01f64..1.0, n), n))
}

proptest! {
    #[test]
    fn game_value_lies_between_pure_strategy_bounds(q in positive_matrix()) {
        let g = game_value(&q).unwrap();
        let n = q.len();
        // max over columns of the row-minimum and min over rows of the column-maximum
        let lower = (0..n).map(|l| (0..n).map(|m| q[m][l]).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
        let upper = (0..n).map(|m| (0..n).map(|l| q[m][l]).fold(0.0, f64::max)).fold(f64::INFINITY, f64::min);
        prop_assert!(g.value >= lower - 1e-12 && g.value <= upper + 1e-12);
    }

    #[test]
    fn inner_solution_guarantees_its_value(q in positive_matrix()) {
        let n = q.len();
        let s = SpinValue::from_twice(n as u32 - 1).unwrap();
        let inner = inner_from_diagonal(s, &q).unwrap();
        let w = inner.lambdas.weights();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        for row in &q {
            let guaranteed: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum();
            prop_assert!(guaranteed >= inner.value - 1e-10);
        }
    }

    #[test]
    fn relative_entropy_is_nonnegative(raw in prop::collection::vec(0.01f64..1.0, 2..8), shift in 0.0f64..1.0) {
        let t: f64 = raw.iter().sum();
        let p = ProbVector::new(raw.iter().map(|x| x / t).collect()).unwrap();
        let mixed: Vec<f64> = p.as_slice().iter().map(|x| (1.0 - shift) * x + shift / raw.len() as f64).collect();
        let q = ProbVector::new(mixed).unwrap();
        prop_assert!(relative_entropy(&p, &q).unwrap() >= 0.0);
        prop_assert!(relative_entropy(&p, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn mixed_table_is_linear_in_the_weights(c in 0.1f64..0.9, w in 0.0f64..1.0) {
        let s = SpinValue::ONE;
        let table = q_table(s, &AngleGrid::from_a(s, c).unwrap()).unwrap();
        let top = table.mixed(&LambdaWeights::delta(s, s.at(0))).unwrap();
        let mid = table.mixed(&LambdaWeights::delta(s, s.at(1))).unwrap();
        let mix = table.mixed(&LambdaWeights::new(s, vec![w, 1.0 - w, 0.0]).unwrap()).unwrap();
        for m in 0..3 {
            for h in 0..3 {
                prop_assert!((mix[m][h] - w * top[m][h] - (1.0 - w) * mid[m][h]).abs() < 1e-14);
            }
        }
    }
}
