use mvpose::fusion::{fuse, FusionRule, PoseOffset};
use mvpose::predict::ViewPrediction;
use mvpose::viewrig::{index_of, Rig, Viewpoint, VIEW_COUNT};
use proptest::prelude::*;

fn one_hot(category: &str, others: &[&str], view: usize) -> ViewPrediction {
    let mut scores = vec![0.0; VIEW_COUNT];
    scores[view] = 1.0;
    let mut class_scores: std::collections::BTreeMap<String, f64> =
        others.iter().map(|c| (c.to_string(), 0.0)).collect();
    class_scores.insert(category.to_string(), 1.0);
    ViewPrediction {
        class_scores,
        viewpoint_scores: scores,
    }
}

/// Ground-truth prediction for a capture of an object yawed by `steps`.
fn truth(capture: &Viewpoint, steps: usize) -> ViewPrediction {
    let seen = index_of(capture.ring, (capture.azimuth + 12 - steps) % 12).unwrap();
    one_hot("mug", &["bowl"], seen)
}

#[test]
fn ground_truth_predictions_recover_every_yaw() {
    let rig = Rig::default();
    for steps in 0..12 {
        for captures in [vec![0], vec![3, 17, 25, 40, 58], (0..60).collect::<Vec<_>>()] {
            let views: Vec<_> = captures
                .iter()
                .map(|&i| {
                    let c = rig.viewpoint(i).unwrap();
                    (c, truth(&c, steps))
                })
                .collect();
            for rule in [FusionRule::ArgmaxPlurality, FusionRule::ScoreSum] {
                let f = fuse(&views, rule).unwrap();
                assert_eq!(f.pose, PoseOffset::new(30 * steps as i32, 0).unwrap());
                assert_eq!(f.category, "mug");
            }
        }
    }
}

fn arb_views() -> impl Strategy<Value = Vec<(usize, usize, usize)>> {
    proptest::collection::vec((0usize..60, 0usize..3, 0usize..60), 1..12)
}

fn build(spec: &[(usize, usize, usize)]) -> Vec<(Viewpoint, ViewPrediction)> {
    let rig = Rig::default();
    let names = ["a", "b", "c"];
    spec.iter()
        .map(|&(capture, class, view)| {
            let mut p = one_hot(names[class], &names, view);
            // Dyadic scores keep every support sum exact.
            let s = 0.5 + 0.125 * (capture % 4) as f64;
            for (name, v) in p.class_scores.iter_mut() {
                *v = if *name == names[class] { s } else { (1.0 - s) / 2.0 };
            }
            (rig.viewpoint(capture).unwrap(), p)
        })
        .collect()
}

proptest! {
    #[test]
    fn fusion_ignores_view_order(spec in arb_views(), rotate in 0usize..12) {
        let views = build(&spec);
        let mut shuffled = views.clone();
        shuffled.rotate_left(rotate % views.len());
        shuffled.reverse();
        for rule in [FusionRule::ArgmaxPlurality, FusionRule::ScoreSum] {
            prop_assert_eq!(fuse(&views, rule).unwrap(), fuse(&shuffled, rule).unwrap());
        }
    }

    #[test]
    fn duplicating_every_view_keeps_the_winner(spec in arb_views()) {
        let views = build(&spec);
        let doubled: Vec<_> = views.iter().chain(views.iter()).cloned().collect();
        let (a, b) = (fuse(&views, FusionRule::ArgmaxPlurality).unwrap(), fuse(&doubled, FusionRule::ArgmaxPlurality).unwrap());
        prop_assert_eq!(&a.category, &b.category);
        prop_assert_eq!(a.pose, b.pose);
        prop_assert_eq!(b.views_used, 2 * a.views_used);
        let total: f64 = a.class_votes.values().sum();
        prop_assert_eq!(total, views.len() as f64);
    }
}
