//! Per-depth generalized step-up engine.
//!
//! Each candidate i at the current depth carries a threshold function of
//! the tentative rejection count r:
//!
//! ```text
//! alpha_i(r) = c_i * beta_i(m_i + r + R_prev - 1) / m_i    (testable)
//! alpha_i(r) = 0                                           (not testable)
//! ```
//!
//! where `c_i = alpha * ell_i / L`, `m_i` is the effective node count of the
//! candidate's sub-DAG, `R_prev` the total rejections at shallower depths,
//! and `beta_i` a reshaping function (identity when no reshaping is
//! wanted). The step-up count is the largest r such that at least r
//! candidates satisfy `p_i <= alpha_i(r)`; those candidates are rejected.
//!
//! [`run_depth`] finds the count after one sort of per-candidate minimal
//! ranks; [`run_depth_bruteforce`] is the literal quadratic scan kept as an
//! oracle, and the two must agree bit for bit.

use crate::dag::NodeIdx;
use crate::reshape::ReshapeFn;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StepupError {
    #[error("testable candidate {0} has no p-value")]
    MissingPValue(NodeIdx),
}

/// One node's inputs to the step-up at its depth. A candidate that is not
/// testable (some parent unrejected) has threshold identically zero and can
/// never be rejected; only untestable candidates may omit their p-value.
#[derive(Debug, Clone)]
pub struct DepthCandidate {
    pub node: NodeIdx,
    pub p: Option<f64>,
    pub testable: bool,
    /// alpha * ell_i / L
    pub c: f64,
    /// effective node count m_i
    pub m: f64,
    pub reshape: ReshapeFn,
}

impl DepthCandidate {
    /// Convenience constructor for a testable candidate without reshaping.
    pub fn plain(node: NodeIdx, p: f64, c: f64, m: f64) -> Self {
        DepthCandidate {
            node,
            p: Some(p),
            testable: true,
            c,
            m,
            reshape: ReshapeFn::Identity,
        }
    }
}

/// Rejections made at one depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthOutcome {
    /// Number of rejections R_d.
    pub r_d: usize,
    pub rejected: BTreeSet<NodeIdx>,
    /// Level alpha_i(R_d) each candidate was held to (at r = 1 when the
    /// depth rejected nothing). Zero for untestable candidates.
    pub levels: BTreeMap<NodeIdx, f64>,
}

/// The threshold alpha_i(r) given `R_prev` rejections at earlier depths.
/// Nondecreasing in both `r` and `r_prev`.
pub fn threshold(cand: &DepthCandidate, r: usize, r_prev: usize) -> f64 {
    if !cand.testable {
        return 0.0;
    }
    let arg = cand.m + (r + r_prev) as f64 - 1.0;
    match &cand.reshape {
        ReshapeFn::Identity => cand.c * (arg / cand.m),
        f => cand.c * (f.eval(arg) / cand.m),
    }
}

fn outcome_at(
    cands: &[DepthCandidate],
    ps: &[Option<f64>],
    r_d: usize,
    r_prev: usize,
) -> DepthOutcome {
    let level_r = r_d.max(1);
    let mut rejected = BTreeSet::new();
    let mut levels = BTreeMap::new();
    for (cand, &p) in cands.iter().zip(ps) {
        let level = threshold(cand, level_r, r_prev);
        levels.insert(cand.node, level);
        if r_d > 0 {
            if let Some(p) = p {
                if cand.testable && p <= level {
                    rejected.insert(cand.node);
                }
            }
        }
    }
    debug_assert_eq!(rejected.len(), r_d);
    DepthOutcome {
        r_d,
        rejected,
        levels,
    }
}

fn checked_ps(cands: &[DepthCandidate]) -> Result<Vec<Option<f64>>, StepupError> {
    cands
        .iter()
        .map(|c| {
            if c.testable && c.p.is_none() {
                Err(StepupError::MissingPValue(c.node))
            } else {
                Ok(c.p)
            }
        })
        .collect()
}

/// Minimal r at which candidate `cand` would be rejected, or None if no
/// r in 1..=k works. Uses the closed form under the identity reshape and a
/// binary search otherwise (valid since thresholds are nondecreasing in r),
/// then validates against the exact threshold comparison, nudging by one if
/// the float ceil landed on a representation boundary.
fn minimal_rank(cand: &DepthCandidate, p: f64, k: usize, r_prev: usize) -> Option<usize> {
    if !cand.testable {
        return None;
    }
    if p > threshold(cand, k, r_prev) {
        return None;
    }
    let mut r = match &cand.reshape {
        ReshapeFn::Identity => {
            let raw = p * cand.m / cand.c - cand.m - r_prev as f64 + 1.0;
            if raw <= 1.0 {
                1
            } else {
                (raw.ceil() as usize).min(k)
            }
        }
        _ => {
            let (mut lo, mut hi) = (1usize, k);
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if p <= threshold(cand, mid, r_prev) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            lo
        }
    };
    while r > 1 && p <= threshold(cand, r - 1, r_prev) {
        r -= 1;
    }
    while p > threshold(cand, r, r_prev) {
        r += 1; // bounded: p <= threshold(k)
    }
    Some(r)
}

/// Run the step-up over one depth's candidates: one pass to compute each
/// candidate's minimal qualifying rank, one sort, one scan.
pub fn run_depth(cands: &[DepthCandidate], r_prev: usize) -> Result<DepthOutcome, StepupError> {
    let ps = checked_ps(cands)?;
    let k = cands.len();
    let mut ranks: Vec<usize> = cands
        .iter()
        .zip(&ps)
        .filter_map(|(c, p)| p.and_then(|p| minimal_rank(c, p, k, r_prev)))
        .collect();
    ranks.sort_unstable();
    let mut r_d = 0;
    for r in (1..=ranks.len()).rev() {
        // ranks[r-1] is the r-th smallest minimal rank; at least r
        // candidates qualify at level r iff it is <= r
        if ranks[r - 1] <= r {
            r_d = r;
            break;
        }
    }
    Ok(outcome_at(cands, &ps, r_d, r_prev))
}

/// Literal step-up oracle: scan r from K down to 1 and count qualifying
/// candidates at every r. O(K^2); identical contract to [`run_depth`].
pub fn run_depth_bruteforce(
    cands: &[DepthCandidate],
    r_prev: usize,
) -> Result<DepthOutcome, StepupError> {
    let ps = checked_ps(cands)?;
    let k = cands.len();
    for r in (1..=k).rev() {
        let count = cands
            .iter()
            .zip(&ps)
            .filter(|(c, p)| {
                c.testable && p.is_some_and(|p| p <= threshold(c, r, r_prev))
            })
            .count();
        if count >= r {
            return Ok(outcome_at(cands, &ps, r, r_prev));
        }
    }
    Ok(outcome_at(cands, &ps, 0, r_prev))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_root_candidate() -> DepthCandidate {
        // alpha = 0.05, ell = 1.25, L = 2, m = 3.75
        DepthCandidate::plain(0, 0.01, 0.05 * 1.25 / 2.0, 3.75)
    }

    #[test]
    fn threshold_examples() {
        let cand = toy_root_candidate();
        let got = threshold(&cand, 2, 0);
        let want = (1.25 / 2.0) * ((3.75 + 2.0 - 1.0) / 3.75) * 0.05;
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.039_583_333_333_333_33).abs() < 1e-12);

        let untestable = DepthCandidate {
            testable: false,
            p: None,
            ..toy_root_candidate()
        };
        assert_eq!(threshold(&untestable, 5, 3), 0.0);

        // edgeless node: ell = 1, L = N, m = 1 -> the BH level alpha * r / N
        let n = 40.0;
        let bh = DepthCandidate::plain(0, 0.5, 0.2 / n, 1.0);
        for r in 1..=10 {
            assert!((threshold(&bh, r, 0) - 0.2 * r as f64 / n).abs() < 1e-15);
        }
    }

    #[test]
    fn threshold_monotone_in_r_and_r_prev() {
        let shapes = [
            ReshapeFn::Identity,
            ReshapeFn::by_global(7).unwrap(),
            ReshapeFn::dagger_by(2.5, 2, 9).unwrap(),
        ];
        for reshape in shapes {
            let cand = DepthCandidate {
                reshape,
                ..toy_root_candidate()
            };
            let mut prev = 0.0;
            for r in 1..20 {
                let t = threshold(&cand, r, 3);
                assert!(t >= prev);
                prev = t;
            }
            assert!(threshold(&cand, 4, 9) >= threshold(&cand, 4, 2));
        }
    }

    fn edgeless(ps: &[f64], alpha: f64) -> Vec<DepthCandidate> {
        let n = ps.len() as f64;
        ps.iter()
            .enumerate()
            .map(|(i, &p)| DepthCandidate::plain(i as NodeIdx, p, alpha / n, 1.0))
            .collect()
    }

    #[test]
    fn run_depth_bh_example() {
        let cands = edgeless(&[0.01, 0.02, 0.2, 0.9], 0.2);
        let out = run_depth(&cands, 0).unwrap();
        assert_eq!(out.r_d, 2);
        assert_eq!(out.rejected, BTreeSet::from([0, 1]));
        let brute = run_depth_bruteforce(&cands, 0).unwrap();
        assert_eq!(out, brute);
    }

    #[test]
    fn run_depth_toy_depth_two() {
        // depth 2 of the worked example: R_prev = 2, alpha = 0.05
        let h21 = DepthCandidate::plain(0, 0.05, 0.05 * 1.5 / 2.0, 2.5);
        let h22 = DepthCandidate::plain(1, 0.9, 0.05 * 0.5 / 2.0, 1.5);
        let cands = vec![h21.clone(), h22];
        assert!((threshold(&h21, 1, 2) - 0.0675).abs() < 1e-15);
        let out = run_depth(&cands, 2).unwrap();
        assert_eq!(out.r_d, 1);
        assert_eq!(out.rejected, BTreeSet::from([0]));
        assert_eq!(out, run_depth_bruteforce(&cands, 2).unwrap());
    }

    #[test]
    fn run_depth_nothing_rejected() {
        let cands = edgeless(&[1.0, 1.0, 1.0], 0.2);
        let out = run_depth(&cands, 0).unwrap();
        assert_eq!(out.r_d, 0);
        assert!(out.rejected.is_empty());
        // levels reported at r = 1
        assert!((out.levels[&0] - 0.2 / 3.0).abs() < 1e-15);
        assert_eq!(out, run_depth_bruteforce(&cands, 0).unwrap());
    }

    #[test]
    fn missing_p_on_testable_candidate() {
        let mut cands = edgeless(&[0.5], 0.2);
        cands[0].p = None;
        assert!(matches!(
            run_depth(&cands, 0),
            Err(StepupError::MissingPValue(0))
        ));
        // untestable candidates may omit p
        cands[0].testable = false;
        assert_eq!(run_depth(&cands, 0).unwrap().r_d, 0);
    }

    #[test]
    fn untestable_candidates_never_reject() {
        let mut cands = edgeless(&[0.0, 0.01], 0.2);
        cands[0].testable = false;
        cands[0].p = None;
        let out = run_depth(&cands, 0).unwrap();
        assert!(!out.rejected.contains(&0));
        assert_eq!(out.levels[&0], 0.0);
    }

    fn arb_reshape() -> impl Strategy<Value = ReshapeFn> {
        prop_oneof![
            Just(ReshapeFn::Identity),
            (1u32..40).prop_map(|k| ReshapeFn::by_global(k).unwrap()),
            (0.5f64..6.0, 1usize..5, 0usize..30)
                .prop_map(|(m, d, extra)| ReshapeFn::dagger_by(m, d, d + extra).unwrap()),
        ]
    }

    fn arb_instance() -> impl Strategy<Value = (Vec<DepthCandidate>, usize)> {
        (1usize..14, 0usize..8).prop_flat_map(|(k, r_prev)| {
            (
                proptest::collection::vec(
                    (
                        0.0f64..1.0,
                        prop::bool::weighted(0.8),
                        1e-4f64..0.2,
                        1.0f64..20.0,
                        arb_reshape(),
                    ),
                    k,
                ),
                Just(r_prev),
            )
                .prop_map(|(specs, r_prev)| {
                    let cands = specs
                        .into_iter()
                        .enumerate()
                        .map(|(i, (p, testable, c, m, reshape))| DepthCandidate {
                            node: i as NodeIdx,
                            p: testable.then_some(p),
                            testable,
                            c,
                            m,
                            reshape,
                        })
                        .collect();
                    (cands, r_prev)
                })
        })
    }

    proptest! {
        #[test]
        fn fast_path_matches_bruteforce(inst in arb_instance()) {
            let (cands, r_prev) = inst;
            let fast = run_depth(&cands, r_prev).unwrap();
            let brute = run_depth_bruteforce(&cands, r_prev).unwrap();
            prop_assert_eq!(fast, brute);
        }

        // Eq self-consistency: at R_d the count qualifies, and above it no r does.
        #[test]
        fn stepup_count_is_maximal(inst in arb_instance()) {
            let (cands, r_prev) = inst;
            let out = run_depth(&cands, r_prev).unwrap();
            let count_at = |r: usize| {
                cands
                    .iter()
                    .filter(|c| c.testable && c.p.unwrap() <= threshold(c, r, r_prev))
                    .count()
            };
            if out.r_d > 0 {
                prop_assert!(count_at(out.r_d) >= out.r_d);
            }
            for r in out.r_d + 1..=cands.len() {
                prop_assert!(count_at(r) < r);
            }
        }
    }
}
