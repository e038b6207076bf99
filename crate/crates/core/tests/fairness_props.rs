use std::collections::HashMap;

use proptest::prelude::*;

use csc_sim::fairness::{
    contribution, contributions, jain_index, meritocratic_index, min_max_ratio, normalize_report,
    social_welfare, weighted_utility, FairnessReport, Indicator, UtilityVector,
};
use csc_sim::model::MemberId;

fn utilities() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..200.0, 1..30)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

fn net_series() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..8, 1usize..20).prop_flat_map(|(n, t)| prop::collection::vec(prop::collection::vec(-3.0f64..3.0, t), n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn jain_is_bounded_and_scale_free(u in utilities(), k in 0.01f64..100.0) {
        if let Indicator::Value(j) = jain_index(&u) {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&j));
            let scaled: Vec<f64> = u.iter().map(|x| x * k).collect();
            prop_assert!(close(jain_index(&scaled).value().unwrap(), j, 1e-9));
            if u.iter().all(|&x| x >= 0.0) {
                prop_assert!(j >= 1.0 / u.len() as f64 - 1e-12);
            }
        }
    }

    #[test]
    fn min_max_is_scale_free(u in utilities(), k in 0.01f64..100.0) {
        let scaled: Vec<f64> = u.iter().map(|x| x * k).collect();
        match min_max_ratio(&u) {
            Indicator::Degenerate => prop_assert!(u.iter().all(|&x| x <= 0.0)),
            Indicator::Value(r) => {
                prop_assert!(r <= 1.0);
                prop_assert!(close(min_max_ratio(&scaled).value().unwrap(), r, 1e-9));
            }
        }
    }

    #[test]
    fn contributions_match_pairwise_definition(net in net_series()) {
        let fast = contributions(&net);
        for (i, own) in net.iter().enumerate() {
            let rest: Vec<f64> = (0..own.len())
                .map(|t| net.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s[t]).sum())
                .collect();
            prop_assert!(close(fast[i], contribution(own, &rest), 1e-9));
        }
    }

    #[test]
    fn opposite_flows_contribute_positively(a in prop::collection::vec(0.01f64..3.0, 1..20), b in prop::collection::vec(0.01f64..3.0, 1..20)) {
        let t = a.len().min(b.len());
        let exporter = a[..t].to_vec();
        let importer: Vec<f64> = b[..t].iter().map(|x| -x).collect();
        let c = contributions(&[exporter.clone(), importer.clone()]);
        prop_assert!(c[0] > 0.0 && c[1] > 0.0);
        prop_assert!(close(c[0], (0..t).map(|k| exporter[k].min(b[k]) * b[k]).sum(), 1e-9));
        prop_assert!(close(c[1], (0..t).map(|k| exporter[k].min(b[k]) * exporter[k]).sum(), 1e-9));
        let same = contributions(&[exporter.clone(), exporter]);
        prop_assert!(same.iter().all(|&x| x < 0.0));
    }

    #[test]
    fn merit_is_zero_for_proportional_utilities(c in prop::collection::vec(0.1f64..10.0, 1..20), k in -5.0f64..5.0) {
        let u: Vec<f64> = c.iter().map(|x| x * k).collect();
        prop_assert!(meritocratic_index(&u, &c).value().unwrap() <= 1e-9 * (1.0 + k.abs() * 10.0));
    }

    #[test]
    fn merit_scales_with_utilities(u in utilities(), seed in prop::collection::vec(0.1f64..10.0, 30), k in 0.01f64..100.0, kc in 0.01f64..100.0) {
        let c = &seed[..u.len()];
        let base = meritocratic_index(&u, c).value().unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| x * k).collect();
        prop_assert!(close(meritocratic_index(&scaled, c).value().unwrap(), k * base, 1e-9));
        let cs: Vec<f64> = c.iter().map(|x| x * kc).collect();
        prop_assert!(close(meritocratic_index(&u, &cs).value().unwrap(), base, 1e-9));
    }

    #[test]
    fn unit_weights_give_welfare(u in utilities()) {
        let ids: Vec<MemberId> = (0..u.len()).map(|i| MemberId(format!("m{i}"))).collect();
        let weights: HashMap<MemberId, f64> = ids.iter().map(|id| (id.clone(), 1.0)).collect();
        let uv = UtilityVector::new(ids, u.clone());
        prop_assert!(close(weighted_utility(&uv, &weights).unwrap(), social_welfare(&u), 1e-12));
    }

    #[test]
    fn normalized_indicators_stay_in_unit_range(
        runs in prop::collection::vec(prop::collection::vec(0.0f64..100.0, 6), 1..5),
        c in prop::collection::vec(-5.0f64..10.0, 6),
    ) {
        let ids: Vec<MemberId> = (0..6).map(|i| MemberId(format!("m{i}"))).collect();
        let reports: Vec<FairnessReport> = runs.iter()
            .map(|u| FairnessReport::compute(&UtilityVector::new(ids.clone(), u.clone()), c.clone(), None).unwrap())
            .collect();
        let refs: Vec<&FairnessReport> = reports.iter().collect();
        for n in normalize_report(&refs) {
            for ind in [n.jain, n.min_max, n.merit, n.social_welfare] {
                if let Indicator::Value(v) = ind {
                    prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "{v}");
                }
            }
        }
    }
}

#[test]
fn equal_utilities_are_perfectly_fair() {
    let u = [3.0; 5];
    assert_eq!(jain_index(&u), Indicator::Value(1.0));
    assert_eq!(min_max_ratio(&u), Indicator::Value(1.0));
    assert!(jain_index(&[0.0; 4]).is_degenerate());
}
