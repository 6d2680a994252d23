//! Majority-vote fusion of per-view predictions into a label and a pose.
//!
//! A view captured from rig viewpoint `c` whose predicted viewpoint is `p`
//! votes for the pose offset `c - p`: yaw cyclic modulo 360, pitch signed.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::predict::exchange::FILE_SUM_TOLERANCE;
use crate::predict::ViewPrediction;
use crate::viewrig::{cell_of, Viewpoint, STEP_DEGREES};

/// Discrete object rotation relative to the canonical orientation, degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PoseOffset {
    /// Yaw offset in `{0, 30, ..., 330}`.
    pub d_theta: i32,
    /// Pitch offset in `{-120, -90, ..., 120}`.
    pub d_phi: i32,
}

impl PoseOffset {
    pub fn new(d_theta: i32, d_phi: i32) -> Result<Self> {
        if d_theta % STEP_DEGREES != 0 || d_phi % STEP_DEGREES != 0 || !(-120..=120).contains(&d_phi) {
            return Err(Error::invalid(format!("invalid pose offset ({d_theta}, {d_phi})")));
        }
        Ok(PoseOffset {
            d_theta: d_theta.rem_euclid(360),
            d_phi,
        })
    }
}

impl fmt::Display for PoseOffset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.d_theta, self.d_phi)
    }
}

pub fn pose_offset(capture: &Viewpoint, predicted_index: usize) -> Result<PoseOffset> {
    let (ring, azimuth) = cell_of(predicted_index)?;
    let theta_p = STEP_DEGREES * azimuth as i32;
    let phi_p = STEP_DEGREES * (ring as i32 + 1);
    Ok(PoseOffset {
        d_theta: (capture.theta() - theta_p).rem_euclid(360),
        d_phi: capture.phi() - phi_p,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FusionRule {
    /// Each view votes once for its top class and top viewpoint.
    #[default]
    ArgmaxPlurality,
    /// Scores are summed across views before taking the maximum.
    ScoreSum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusedPrediction {
    pub category: String,
    pub pose: PoseOffset,
    /// Vote count per category (summed scores under [`FusionRule::ScoreSum`]).
    pub class_votes: BTreeMap<String, f64>,
    pub pose_votes: BTreeMap<PoseOffset, f64>,
    pub views_used: usize,
}

/// Accumulates votes and the scores backing them. Scores are summed in
/// sorted order so the result does not depend on input order.
struct Ballot<K> {
    entries: BTreeMap<K, (f64, Vec<f64>)>,
}

impl<K: Ord + Clone> Ballot<K> {
    fn new() -> Self {
        Ballot {
            entries: BTreeMap::new(),
        }
    }

    fn add(&mut self, key: K, weight: f64, support: f64) {
        let e = self.entries.entry(key).or_insert((0.0, Vec::new()));
        e.0 += weight;
        e.1.push(support);
    }

    /// Highest tally, then highest support, then smallest key.
    fn winner(self) -> (K, BTreeMap<K, f64>) {
        let mut best: Option<(K, f64, f64)> = None;
        let mut tallies = BTreeMap::new();
        for (key, (tally, mut support)) in self.entries {
            support.sort_by(f64::total_cmp);
            let s: f64 = support.iter().sum();
            let better = match &best {
                None => true,
                Some((_, bt, bs)) => tally > *bt || (tally == *bt && s > *bs),
            };
            if better {
                best = Some((key.clone(), tally, s));
            }
            tallies.insert(key, tally);
        }
        (best.expect("ballot is nonempty").0, tallies)
    }
}

pub fn fuse(views: &[(Viewpoint, ViewPrediction)], rule: FusionRule) -> Result<FusedPrediction> {
    if views.is_empty() {
        return Err(Error::invalid("cannot fuse an empty set of views"));
    }
    for (capture, p) in views {
        p.validate(FILE_SUM_TOLERANCE)
            .map_err(|e| Error::invalid(format!("view {}: {e}", capture.index())))?;
    }

    let mut classes = Ballot::new();
    let mut poses = Ballot::new();
    match rule {
        FusionRule::ArgmaxPlurality => {
            for (capture, p) in views {
                let (name, score) = p.top_class().expect("validated nonempty");
                classes.add(name.to_string(), 1.0, score);
                let (idx, score) = p.top_viewpoint().expect("validated nonempty");
                poses.add(pose_offset(capture, idx)?, 1.0, score);
            }
        }
        FusionRule::ScoreSum => {
            let mut class_sums: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            let mut pose_sums: BTreeMap<PoseOffset, Vec<f64>> = BTreeMap::new();
            for (capture, p) in views {
                for (name, &s) in &p.class_scores {
                    class_sums.entry(name.clone()).or_default().push(s);
                }
                for (idx, &s) in p.viewpoint_scores.iter().enumerate() {
                    pose_sums.entry(pose_offset(capture, idx)?).or_default().push(s);
                }
            }
            let sorted_sum = |mut v: Vec<f64>| {
                v.sort_by(f64::total_cmp);
                v.iter().sum::<f64>()
            };
            for (k, v) in class_sums {
                let s = sorted_sum(v);
                classes.add(k, s, s);
            }
            for (k, v) in pose_sums {
                let s = sorted_sum(v);
                poses.add(k, s, s);
            }
        }
    }

    let (category, class_votes) = classes.winner();
    let (pose, pose_votes) = poses.winner();
    Ok(FusedPrediction {
        category,
        pose,
        class_votes,
        pose_votes,
        views_used: views.len(),
    })
}
