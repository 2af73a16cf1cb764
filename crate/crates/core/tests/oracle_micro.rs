mod common;

use common::{data_dir, rel_diff};
use msinv::design::Horizon;
use msinv::estimators::{Decomposition, DesignView, EstimationConfig, Estimator};
use msinv::oracle::{enumerate, exact_stage_variances, true_total, MicroPopulation, OUTCOME_LIMIT};
use msinv::planner::predict_micro;

fn micro(name: &str) -> MicroPopulation {
    MicroPopulation::load(&data_dir().join("micro").join(name)).unwrap()
}

fn ipw(horizon: u32) -> EstimationConfig {
    EstimationConfig::new(Estimator::Ipw, Horizon::Fixed(horizon))
}

#[test]
fn micro_b_truth_by_hand() {
    // day means averaged over three days, summed over the four components
    let a1 = (4.5 + 3.0 + 4.0) / 3.0;
    let b1 = (10.0 + 10.0 + 9.0) / 3.0;
    let b2 = (1.5 + 0.5 + 3.0) / 3.0;
    let c1 = (7.0 + 5.0 + 5.0) / 3.0;
    assert!((true_total(&micro("micro_b.json")) - (a1 + b1 + b2 + c1)).abs() < 1e-12);
}

#[test]
fn micro_b_stage_variances_lock() {
    let exact = exact_stage_variances(&micro("micro_b.json"), &ipw(3)).unwrap();
    assert!((exact.stage1 - 22.93056).abs() < 1e-5, "{exact:?}");
    assert!((exact.stage2 - 0.95833).abs() < 1e-5, "{exact:?}");
    assert!((exact.stage3 - 29.02604).abs() < 1e-5, "{exact:?}");
}

#[test]
fn enumeration_probabilities_sum_to_one_under_both_designs() {
    let pop = micro("micro_b.json");
    for (est, view) in [
        (Estimator::Ipw, DesignView::Original),
        (Estimator::Ipw, DesignView::Modified),
        (Estimator::Hajek, DesignView::Modified),
    ] {
        let cfg = EstimationConfig {
            design: view,
            ..EstimationConfig::new(est, Horizon::Fixed(3))
        };
        let r = enumerate(&pop, &cfg).unwrap();
        assert!((r.probability_sum - 1.0).abs() < 1e-12, "{est:?} {view:?}");
        assert_eq!(r.outcomes as usize, r.totals.len());
        let var: f64 = r.totals.iter().map(|(t, p)| p * (t - r.mean_total).powi(2)).sum();
        assert!(rel_diff(var, r.var_total) < 1e-10);
        assert!(rel_diff(r.exact.sum(), r.var_total) < 1e-10);
    }
}

#[test]
fn ipw_variance_estimators_are_unbiased_under_the_modified_design() {
    let pop = micro("micro_b.json");
    let cfg = EstimationConfig {
        design: DesignView::Modified,
        ..ipw(3)
    };
    let r = enumerate(&pop, &cfg).unwrap();
    assert!(rel_diff(r.mean_total, r.true_total) < 1e-8);
    assert!(rel_diff(r.mean_var_3stage, r.var_total) < 1e-8);
}

#[test]
fn printed_decomposition_is_biased_only_when_days_are_sampled() {
    let pop = micro("micro_b.json");
    let printed = |cfg: EstimationConfig| {
        enumerate(
            &pop,
            &EstimationConfig {
                decomposition: Decomposition::Printed,
                ..cfg
            },
        )
        .unwrap()
    };
    let r = printed(ipw(3));
    assert!(rel_diff(r.mean_unclipped.stage3, r.exact.stage3) > 1e-3);

    // with a census of days both scalings agree
    let census = MicroPopulation {
        days_sampled: pop.days,
        ..pop.clone()
    };
    let corrected = enumerate(&census, &ipw(3)).unwrap();
    let literal = enumerate(
        &census,
        &EstimationConfig {
            decomposition: Decomposition::Printed,
            ..ipw(3)
        },
    )
    .unwrap();
    assert!(rel_diff(corrected.mean_unclipped.stage3 * 3.0, literal.mean_unclipped.stage3) < 1e-12);
    assert!(corrected.exact.stage2.abs() < 1e-12);
}

#[test]
fn planner_matches_enumeration_for_ipw() {
    for name in ["micro_a.json", "micro_b.json"] {
        let pop = micro(name);
        let planned = predict_micro(&pop, Estimator::Ipw).unwrap();
        let exact = exact_stage_variances(&pop, &ipw(pop.days)).unwrap();
        for (p, e) in [
            (planned.stage1, exact.stage1),
            (planned.stage2, exact.stage2),
            (planned.stage3, exact.stage3),
        ] {
            assert!((p - e).abs() <= 1e-10 * e.abs().max(1.0), "{name}: {planned:?} vs {exact:?}");
        }
    }
}

#[test]
fn oversized_populations_are_refused() {
    let mut pop = micro("micro_b.json");
    let template = pop.strata[0].facilities[0].clone();
    while pop.outcome_count() <= OUTCOME_LIMIT {
        let mut f = template.clone();
        f.id = format!("X{}", pop.strata[0].facilities.len());
        for c in &mut f.components {
            c.id = format!("{}-{}", f.id, c.id);
        }
        pop.strata[0].facilities.push(f);
        pop.strata[0].n_sampled += 1;
    }
    assert_eq!(enumerate(&pop, &ipw(3)).unwrap_err().exit_code(), 3);
}
