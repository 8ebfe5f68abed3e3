//! Reshaping functions for arbitrary-dependence protection.
//!
//! A reshaping function is built from a probability measure tau on the
//! positive reals as beta(r) = integral of x over [0, r] against tau. Any
//! such beta is nondecreasing, has beta(0) = 0, and satisfies beta(r) <= r,
//! so substituting beta(r) for r in a threshold only makes the procedure
//! more conservative.
//!
//! Three kinds are provided: the identity (no reshaping), the global
//! harmonic-mass function beta(r) = r / H_K that turns step-up levels into
//! their arbitrary-dependence analogue, and finitely supported discrete
//! measures, including the depth-adapted measure putting mass proportional
//! to 1/k on the unit grid {m_i + d - 1, ..., m_i + n_upto_d - 1} of values
//! the threshold argument can actually take.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReshapeError {
    #[error("K must be a positive integer")]
    NonPositiveK,
    #[error("empty support: need n_upto_d >= d (got n_upto_d={n_upto_d}, d={d})")]
    EmptySupport { n_upto_d: usize, d: usize },
    #[error("invalid discrete measure: {0}")]
    InvalidMeasure(&'static str),
}

/// A reshaping function; immutable and cheap to share.
#[derive(Debug, Clone, PartialEq)]
pub enum ReshapeFn {
    /// beta(r) = r.
    Identity,
    /// beta(r) = r / H_K with H_K the K-th harmonic number.
    ByGlobal { k: u32, harmonic: f64 },
    /// beta(r) = sum of x * weight(x) over support points x <= r.
    DiscreteMeasure {
        support: Vec<f64>,
        weights: Vec<f64>,
        /// prefix[i] = sum of support[j] * weights[j] for j <= i
        prefix: Vec<f64>,
    },
}

fn harmonic(k: u32) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

impl ReshapeFn {
    pub fn identity() -> Self {
        ReshapeFn::Identity
    }

    pub fn by_global(k: u32) -> Result<Self, ReshapeError> {
        if k == 0 {
            return Err(ReshapeError::NonPositiveK);
        }
        Ok(ReshapeFn::ByGlobal {
            k,
            harmonic: harmonic(k),
        })
    }

    /// Discrete measure from explicit support points and weights. The
    /// support must be strictly increasing and positive; weights must be
    /// positive and sum to 1 (within 1e-9, then renormalized exactly).
    pub fn discrete(support: Vec<f64>, weights: Vec<f64>) -> Result<Self, ReshapeError> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(ReshapeError::InvalidMeasure(
                "support and weights must be nonempty and of equal length",
            ));
        }
        if support[0] <= 0.0 || support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ReshapeError::InvalidMeasure(
                "support must be strictly increasing and positive",
            ));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(ReshapeError::InvalidMeasure("weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ReshapeError::InvalidMeasure("weights must sum to 1"));
        }
        let weights: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        let mut prefix = Vec::with_capacity(support.len());
        let mut acc = 0.0;
        for (x, w) in support.iter().zip(&weights) {
            acc += x * w;
            prefix.push(acc);
        }
        Ok(ReshapeFn::DiscreteMeasure {
            support,
            weights,
            prefix,
        })
    }

    /// The depth-adapted discrete measure: mass proportional to 1/k on each
    /// of the unit-spaced points k in {m_i + d - 1, ..., m_i + n_upto_d - 1},
    /// where `n_upto_d` is the number of nodes at depth <= d.
    pub fn dagger_by(m_i: f64, d: usize, n_upto_d: usize) -> Result<Self, ReshapeError> {
        debug_assert!(m_i > 0.0 && d >= 1);
        if n_upto_d < d {
            return Err(ReshapeError::EmptySupport { n_upto_d, d });
        }
        let count = n_upto_d - d + 1;
        let start = m_i + d as f64 - 1.0;
        let support: Vec<f64> = (0..count).map(|j| start + j as f64).collect();
        let raw: Vec<f64> = support.iter().map(|&x| 1.0 / x).collect();
        let z: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.into_iter().map(|w| w / z).collect();
        let mut prefix = Vec::with_capacity(count);
        let mut acc = 0.0;
        for (x, w) in support.iter().zip(&weights) {
            acc += x * w;
            prefix.push(acc);
        }
        Ok(ReshapeFn::DiscreteMeasure {
            support,
            weights,
            prefix,
        })
    }

    /// Evaluate beta(r). Nondecreasing in r, with beta(0) = 0 and
    /// beta(r) <= r. Discrete measures use a binary search over the
    /// precomputed prefix sums, O(log s) per call.
    pub fn eval(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        match self {
            ReshapeFn::Identity => r,
            ReshapeFn::ByGlobal { harmonic, .. } => r / harmonic,
            ReshapeFn::DiscreteMeasure { support, prefix, .. } => {
                let k = support.partition_point(|&x| x <= r);
                if k == 0 {
                    0.0
                } else {
                    prefix[k - 1]
                }
            }
        }
    }
}
