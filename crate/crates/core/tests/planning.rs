mod common;

use common::data_dir;
use msinv::estimators::Estimator;
use msinv::planner::{gamma_p, gamma_table, predict_variance, PlanScenario};
use msinv::pod_model::PodParams;

fn scenario() -> PlanScenario {
    PlanScenario::load(&data_dir().join("plan_scenario.json")).unwrap()
}

#[test]
fn gamma_examples() {
    assert!((gamma_p(&[0.9, 0.9]) - 0.99).abs() < 1e-15);
    assert_eq!(gamma_p(&[]), 0.0);
    assert_eq!(gamma_p(&[1.0, 0.2]), 1.0);
}

#[test]
fn stage_one_shrinks_with_more_facilities() {
    for est in [Estimator::Ipw, Estimator::Hajek] {
        let base = scenario();
        for h in 0..base.strata.len() {
            let mut last = f64::INFINITY;
            for n in 1..=base.strata[h].n_population {
                let mut s = base.clone();
                s.strata[h].n_sampled = n;
                let v = predict_variance(&s, est).unwrap()[h].stage1;
                assert!(v <= last * (1.0 + 1e-12), "{est:?} stratum {h} n {n}");
                last = v;
            }
            assert_eq!(last, 0.0);
        }
    }
}

#[test]
fn stage_two_shrinks_with_more_days() {
    for est in [Estimator::Ipw, Estimator::Hajek] {
        let mut last = vec![f64::INFINITY; 5];
        for d in 1..=60 {
            let s = PlanScenario {
                days: 60,
                days_sampled: d,
                ..scenario()
            };
            let rows = predict_variance(&s, est).unwrap();
            for (r, l) in rows.iter().zip(&mut last) {
                assert!(r.stage2 <= *l * (1.0 + 1e-12), "{est:?} {} d {d}", r.stratum);
                *l = r.stage2;
            }
        }
    }
}

#[test]
fn certain_detection_over_all_days_leaves_only_stage_one() {
    let mut s = PlanScenario {
        days: 5,
        days_sampled: 5,
        ..scenario()
    };
    for st in &mut s.strata {
        st.phi = 1.0;
    }
    for est in [Estimator::Ipw, Estimator::Hajek] {
        for r in predict_variance(&s, est).unwrap() {
            assert_eq!((r.stage2, r.stage3), (0.0, 0.0), "{est:?} {}", r.stratum);
        }
    }
}

#[test]
fn invalid_counts_are_config_errors() {
    let mut s = scenario();
    s.strata[0].n_sampled = s.strata[0].n_population + 1;
    assert_eq!(predict_variance(&s, Estimator::Ipw).unwrap_err().exit_code(), 4);
    let s = PlanScenario {
        days_sampled: 0,
        ..scenario()
    };
    assert_eq!(predict_variance(&s, Estimator::Ipw).unwrap_err().exit_code(), 4);
}

#[test]
fn subset_gamma_first_quartile_is_one() {
    let rows = gamma_table(&common::subset(), &PodParams::default()).unwrap();
    let mut values: Vec<f64> = rows.iter().map(|g| g.gamma).collect();
    values.sort_by(f64::total_cmp);
    assert!(values.iter().all(|g| (0.0..=1.0).contains(g)));
    let q1 = msinv::planner::quantile(&values, 0.25).unwrap();
    assert_eq!(format!("{q1:.2}"), "1.00");
}
