//! Independent Benjamini-Hochberg and Benjamini-Yekutieli implementations.
//!
//! These are written from the naive definition (sort the p-values, scan for
//! the largest qualifying rank) and deliberately share no code with the
//! step-up engine, so that the reduction tests between the graph procedure
//! and these baselines are meaningful oracles.

use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("empty p-value list")]
    EmptyInput,
    #[error("p-value {0} outside [0, 1]")]
    InvalidP(f64),
    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    InvalidAlpha(f64),
}

fn check(p: &[f64], alpha: f64) -> Result<(), BaselineError> {
    if p.is_empty() {
        return Err(BaselineError::EmptyInput);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BaselineError::InvalidAlpha(alpha));
    }
    for &x in p {
        if !(0.0..=1.0).contains(&x) || x.is_nan() {
            return Err(BaselineError::InvalidP(x));
        }
    }
    Ok(())
}

fn step_up(p: &[f64], alpha: f64) -> BTreeSet<usize> {
    let k = p.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
    let mut cutoff = None;
    for r in (1..=k).rev() {
        let level = alpha * r as f64 / k as f64;
        if p[order[r - 1]] <= level {
            cutoff = Some(p[order[r - 1]]);
            break;
        }
    }
    match cutoff {
        Some(c) => (0..k).filter(|&i| p[i] <= c).collect(),
        None => BTreeSet::new(),
    }
}

/// Benjamini-Hochberg: reject the indices of the r smallest p-values, where
/// r is the largest rank with P_(r) <= alpha * r / K. Ties with the cutoff
/// value are all rejected.
pub fn bh(p: &[f64], alpha: f64) -> Result<BTreeSet<usize>, BaselineError> {
    check(p, alpha)?;
    Ok(step_up(p, alpha))
}

/// Benjamini-Yekutieli: BH at level alpha / H_K, valid under arbitrary
/// dependence.
pub fn by(p: &[f64], alpha: f64) -> Result<BTreeSet<usize>, BaselineError> {
    check(p, alpha)?;
    let h_k: f64 = (1..=p.len()).map(|i| 1.0 / i as f64).sum();
    Ok(step_up(p, alpha / h_k))
}

/// The BH cutoff level alpha * r / K at rejection count r (the level column
/// reported for baseline runs); r is floored at 1 so the unmet bar is shown
/// when nothing was rejected.
pub fn bh_level(k: usize, alpha: f64, r: usize) -> f64 {
    alpha * r.max(1) as f64 / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bh_examples() {
        let got = bh(&[0.01, 0.02, 0.2, 0.9], 0.2).unwrap();
        assert_eq!(got, BTreeSet::from([0, 1]));
        assert!(bh(&[1.0, 1.0, 1.0], 0.2).unwrap().is_empty());
        assert_eq!(bh(&[0.04], 0.05).unwrap(), BTreeSet::from([0]));
    }

    #[test]
    fn by_examples() {
        // H_4 = 25/12, effective alpha 0.096, levels 0.024/0.048/0.072/0.096
        let got = by(&[0.01, 0.02, 0.2, 0.9], 0.2).unwrap();
        assert_eq!(got, BTreeSet::from([0, 1]));
        assert_eq!(by(&[0.04], 0.05).unwrap(), bh(&[0.04], 0.05).unwrap());
        assert!(by(&[1.0, 1.0], 0.2).unwrap().is_empty());
    }

    #[test]
    fn bh_rejects_ties_at_the_cutoff() {
        // sorted levels at alpha=0.2, K=2: 0.1, 0.2; both 0.2s qualify at r=2
        let got = bh(&[0.2, 0.2], 0.2).unwrap();
        assert_eq!(got, BTreeSet::from([0, 1]));
    }

    #[test]
    fn input_validation() {
        assert!(matches!(bh(&[], 0.2), Err(BaselineError::EmptyInput)));
        assert!(matches!(bh(&[0.5], 0.0), Err(BaselineError::InvalidAlpha(_))));
        assert!(matches!(bh(&[1.5], 0.2), Err(BaselineError::InvalidP(_))));
    }

    proptest! {
        #[test]
        fn by_is_contained_in_bh(
            p in proptest::collection::vec(0.0f64..=1.0, 1..60),
            alpha in 0.01f64..0.5,
        ) {
            let b = bh(&p, alpha).unwrap();
            let y = by(&p, alpha).unwrap();
            prop_assert!(y.is_subset(&b));
        }
    }
}
