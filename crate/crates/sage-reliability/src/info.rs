//! Exact information measures over small discrete joints, in bits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ReliabilityError, ReliabilityResult};

/// Dense joint distribution over a fixed set of finite axes.
///
/// Probabilities are stored row-major with the last axis fastest. Entries
/// must be nonnegative and sum to 1 within 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(dims: Vec<usize>, probs: Vec<f64>) -> ReliabilityResult<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(ReliabilityError::InvalidArgument(
                "joint needs at least one axis and no empty axis".into(),
            ));
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| {
                ReliabilityError::InvalidArgument("joint support size overflows".into())
            })?;
        if probs.len() != len {
            return Err(ReliabilityError::InvalidArgument(format!(
                "dims {:?} want {len} entries, got {}",
                dims,
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ReliabilityError::InvalidArgument(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ReliabilityError::InvalidArgument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(DiscreteJoint { dims, probs })
    }

    /// Normalizes nonnegative weights into a joint.
    pub fn from_weights(dims: Vec<usize>, weights: Vec<f64>) -> ReliabilityResult<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ReliabilityError::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ReliabilityError::InvalidArgument(
                "weights must have positive total".into(),
            ));
        }
        Self::new(dims, weights.into_iter().map(|w| w / total).collect())
    }

    /// Draws a joint uniformly from the probability simplex over `dims`.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> ReliabilityResult<Self> {
        let len = dims.iter().product();
        // Normalized Exp(1) weights are uniform on the simplex.
        let weights: Vec<f64> = (0..len).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        Self::from_weights(dims.to_vec(), weights)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.dims.len(), "index rank mismatch");
        let mut flat = 0;
        for (i, (&d, &j)) in self.dims.iter().zip(idx).enumerate() {
            assert!(j < d, "index {j} out of bounds for axis {i}");
            flat = flat * d + j;
        }
        self.probs[flat]
    }

    /// Sums out every axis not listed. `axes` must be strictly increasing.
    pub fn marginal(&self, axes: &[usize]) -> ReliabilityResult<DiscreteJoint> {
        if axes.is_empty() {
            return Err(ReliabilityError::InvalidArgument(
                "marginal needs at least one axis".into(),
            ));
        }
        if axes.windows(2).any(|w| w[0] >= w[1]) || *axes.last().unwrap() >= self.dims.len() {
            return Err(ReliabilityError::InvalidArgument(format!(
                "axes {axes:?} must be strictly increasing and below {}",
                self.dims.len()
            )));
        }
        let out_dims: Vec<usize> = axes.iter().map(|&a| self.dims[a]).collect();
        let mut out = vec![0.0; out_dims.iter().product()];
        let mut idx = vec![0usize; self.dims.len()];
        for (flat, &p) in self.probs.iter().enumerate() {
            let mut rem = flat;
            for a in (0..self.dims.len()).rev() {
                idx[a] = rem % self.dims[a];
                rem /= self.dims[a];
            }
            let mut out_flat = 0;
            for &a in axes {
                out_flat = out_flat * self.dims[a] + idx[a];
            }
            out[out_flat] += p;
        }
        // Bypass the sum re-check: a marginal of a valid joint is valid.
        Ok(DiscreteJoint {
            dims: out_dims,
            probs: out,
        })
    }

    /// Shannon entropy of the whole joint in bits, with 0*log(0) = 0.
    pub fn entropy_bits(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.log2())
            .sum::<f64>()
    }

    /// Entropy in bits of the marginal on `axes`.
    pub fn entropy_of(&self, axes: &[usize]) -> ReliabilityResult<f64> {
        Ok(self.marginal(axes)?.entropy_bits())
    }
}

/// How much a fresh observation tells about the target, all in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    /// H(target | side, trace).
    pub h_given_trace: f64,
    /// H(target | side, trace, next).
    pub h_given_extended: f64,
    /// I(target ; next | side, trace).
    pub info_gain: f64,
}

/// Conditional entropies around one step of evidence growth, over a 4-axis
/// joint: axis 0 the target, axis 1 side information, axis 2 the evidence
/// so far, axis 3 the next observation.
///
/// The three quantities are computed as three independent sums over the
/// table, so `h_given_extended == h_given_trace - info_gain` is a genuine
/// numerical check rather than an algebraic restatement.
pub fn trace_entropy_suite(joint: &DiscreteJoint) -> ReliabilityResult<EntropyReport> {
    let d = joint.dims();
    if d.len() != 4 {
        return Err(ReliabilityError::InvalidArgument(format!(
            "trace_entropy_suite wants 4 axes, got {}",
            d.len()
        )));
    }
    let (dx, dy, dz, dw) = (d[0], d[1], d[2], d[3]);
    let mut m_xyz = vec![0.0; dx * dy * dz];
    let mut m_yz = vec![0.0; dy * dz];
    let mut m_yzw = vec![0.0; dy * dz * dw];
    for x in 0..dx {
        for y in 0..dy {
            for z in 0..dz {
                for w in 0..dw {
                    let p = joint.prob(&[x, y, z, w]);
                    m_xyz[(x * dy + y) * dz + z] += p;
                    m_yz[y * dz + z] += p;
                    m_yzw[(y * dz + z) * dw + w] += p;
                }
            }
        }
    }
    let mut h_given_trace = 0.0;
    for x in 0..dx {
        for y in 0..dy {
            for z in 0..dz {
                let pxyz = m_xyz[(x * dy + y) * dz + z];
                if pxyz > 0.0 {
                    h_given_trace -= pxyz * (pxyz / m_yz[y * dz + z]).log2();
                }
            }
        }
    }
    let mut h_given_extended = 0.0;
    let mut info_gain = 0.0;
    for x in 0..dx {
        for y in 0..dy {
            for z in 0..dz {
                for w in 0..dw {
                    let p = joint.prob(&[x, y, z, w]);
                    if p > 0.0 {
                        let pyz = m_yz[y * dz + z];
                        let pxyz = m_xyz[(x * dy + y) * dz + z];
                        let pyzw = m_yzw[(y * dz + z) * dw + w];
                        h_given_extended -= p * (p / pyzw).log2();
                        info_gain += p * (p * pyz / (pxyz * pyzw)).log2();
                    }
                }
            }
        }
    }
    Ok(EntropyReport {
        h_given_trace,
        h_given_extended,
        info_gain,
    })
}

/// Both sides of the error-floor comparison, reported without judgment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoBoundReport {
    /// Bayes error of predicting the target from (input, evidence),
    /// by exhaustive enumeration.
    pub lhs: f64,
    /// 1 - 2^-(H(target|input) - I(input;evidence)), in bits.
    pub rhs: f64,
    pub h_target_given_input: f64,
    pub mi_input_evidence: f64,
    /// lhs >= rhs, with 1e-12 slack for roundoff.
    pub satisfied: bool,
}

/// Compares the enumerated optimal-decoder error against the exponential
/// floor expression, over a 3-axis joint: axis 0 the input, axis 1 the
/// target, axis 2 the evidence. The comparison is reported, never asserted:
/// the machinery is exact either way.
pub fn info_bound_check(joint: &DiscreteJoint) -> ReliabilityResult<InfoBoundReport> {
    let d = joint.dims();
    if d.len() != 3 {
        return Err(ReliabilityError::InvalidArgument(format!(
            "info_bound_check wants 3 axes, got {}",
            d.len()
        )));
    }
    let (dx, dy, dz) = (d[0], d[1], d[2]);
    let mut best = 0.0;
    for x in 0..dx {
        for z in 0..dz {
            let mut top = 0.0f64;
            for y in 0..dy {
                top = top.max(joint.prob(&[x, y, z]));
            }
            best += top;
        }
    }
    let lhs = 1.0 - best;
    let m_xy = joint.marginal(&[0, 1])?;
    let m_x = joint.marginal(&[0])?;
    let m_z = joint.marginal(&[2])?;
    let m_xz = joint.marginal(&[0, 2])?;
    let mut h_target_given_input = 0.0;
    for x in 0..dx {
        for y in 0..dy {
            let pxy = m_xy.prob(&[x, y]);
            if pxy > 0.0 {
                h_target_given_input -= pxy * (pxy / m_x.prob(&[x])).log2();
            }
        }
    }
    let mut mi_input_evidence = 0.0;
    for x in 0..dx {
        for z in 0..dz {
            let pxz = m_xz.prob(&[x, z]);
            if pxz > 0.0 {
                mi_input_evidence += pxz * (pxz / (m_x.prob(&[x]) * m_z.prob(&[z]))).log2();
            }
        }
    }
    let rhs = 1.0 - (-(h_target_given_input - mi_input_evidence)).exp2();
    Ok(InfoBoundReport {
        lhs,
        rhs,
        h_target_given_input,
        mi_input_evidence,
        satisfied: lhs >= rhs - 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_dims(rng: &mut ChaCha8Rng, axes: usize) -> Vec<usize> {
        (0..axes).map(|_| rng.random_range(2..=4)).collect()
    }

    #[test]
    fn construction_is_checked() {
        assert!(DiscreteJoint::new(vec![], vec![]).is_err());
        assert!(DiscreteJoint::new(vec![2, 0], vec![]).is_err());
        assert!(DiscreteJoint::new(vec![2], vec![0.5, 0.5, 0.0]).is_err());
        assert!(DiscreteJoint::new(vec![2], vec![0.7, 0.4]).is_err());
        assert!(DiscreteJoint::new(vec![2], vec![-0.1, 1.1]).is_err());
        assert!(DiscreteJoint::from_weights(vec![2], vec![0.0, 0.0]).is_err());
        DiscreteJoint::new(vec![2, 2], vec![0.25; 4]).unwrap();
    }

    #[test]
    fn uniform_entropy_is_the_log_of_the_support() {
        let j = DiscreteJoint::new(vec![2, 2, 2], vec![0.125; 8]).unwrap();
        assert_eq!(j.entropy_bits(), 3.0);
        assert_eq!(j.entropy_of(&[0]).unwrap(), 1.0);
        assert_eq!(j.entropy_of(&[0, 2]).unwrap(), 2.0);
    }

    #[test]
    fn marginals_sum_the_right_cells() {
        let j = DiscreteJoint::new(vec![2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m0 = j.marginal(&[0]).unwrap();
        assert_relative_eq!(m0.prob(&[0]), 0.3, epsilon = 1e-15);
        assert_relative_eq!(m0.prob(&[1]), 0.7, epsilon = 1e-15);
        let m1 = j.marginal(&[1]).unwrap();
        assert_relative_eq!(m1.prob(&[0]), 0.4, epsilon = 1e-15);
        assert_relative_eq!(m1.prob(&[1]), 0.6, epsilon = 1e-15);
        assert!(j.marginal(&[]).is_err());
        assert!(j.marginal(&[1, 0]).is_err());
        assert!(j.marginal(&[0, 0]).is_err());
        assert!(j.marginal(&[2]).is_err());
    }

    #[test]
    fn independent_observation_carries_no_information() {
        // Outer product of four marginals.
        let px = [0.3, 0.7];
        let py = [0.2, 0.5, 0.3];
        let pz = [0.6, 0.4];
        let pw = [0.1, 0.9];
        let mut probs = Vec::new();
        for &a in &px {
            for &b in &py {
                for &c in &pz {
                    for &d in &pw {
                        probs.push(a * b * c * d);
                    }
                }
            }
        }
        let j = DiscreteJoint::new(vec![2, 3, 2, 2], probs).unwrap();
        let r = trace_entropy_suite(&j).unwrap();
        assert_abs_diff_eq!(r.info_gain, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.h_given_extended, r.h_given_trace, epsilon = 1e-12);
    }

    #[test]
    fn observation_equal_to_target_kills_the_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let (dx, dy, dz) = (3, 2, 2);
        let base = DiscreteJoint::random(&[dx, dy, dz], &mut rng).unwrap();
        let mut probs = vec![0.0; dx * dy * dz * dx];
        for x in 0..dx {
            for y in 0..dy {
                for z in 0..dz {
                    probs[((x * dy + y) * dz + z) * dx + x] = base.prob(&[x, y, z]);
                }
            }
        }
        let j = DiscreteJoint::new(vec![dx, dy, dz, dx], probs).unwrap();
        let r = trace_entropy_suite(&j).unwrap();
        assert_abs_diff_eq!(r.h_given_extended, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.info_gain, r.h_given_trace, epsilon = 1e-12);
    }

    #[test]
    fn chain_rule_identity_and_monotonicity_on_random_joints() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            let dims = random_dims(&mut rng, 4);
            let j = DiscreteJoint::random(&dims, &mut rng).unwrap();
            let r = trace_entropy_suite(&j).unwrap();
            let identity_err = (r.h_given_extended - (r.h_given_trace - r.info_gain)).abs();
            assert!(identity_err <= 1e-12, "identity off by {identity_err}");
            assert!(r.h_given_extended <= r.h_given_trace + 1e-12);
            assert!(r.info_gain >= -1e-12);
            // Cross-check the direct sum against the marginal-entropy
            // grouping H(X,Y,Z) - H(Y,Z).
            let grouped = j.entropy_of(&[0, 1, 2]).unwrap() - j.entropy_of(&[1, 2]).unwrap();
            assert_abs_diff_eq!(r.h_given_trace, grouped, epsilon = 1e-12);
        }
    }

    #[test]
    fn info_bound_anchor_evidence_equals_input() {
        // p(x,y,z) = 1/8 exactly when z == x, x uniform over 4, y uniform
        // over 2 independent of the rest.
        let (dx, dy, dz) = (4, 2, 4);
        let mut probs = vec![0.0; dx * dy * dz];
        for x in 0..dx {
            for y in 0..dy {
                probs[(x * dy + y) * dz + x] = 0.125;
            }
        }
        let j = DiscreteJoint::new(vec![dx, dy, dz], probs).unwrap();
        let r = info_bound_check(&j).unwrap();
        assert_relative_eq!(r.h_target_given_input, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.mi_input_evidence, 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.rhs, -1.0, epsilon = 1e-12);
        assert_relative_eq!(r.lhs, 0.5, epsilon = 1e-12);
        assert!(r.satisfied);
    }

    #[test]
    fn deterministic_target_floors_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let (dx, dy, dz) = (4, 2, 3);
        let base = DiscreteJoint::random(&[dx, dz], &mut rng).unwrap();
        let mut probs = vec![0.0; dx * dy * dz];
        for x in 0..dx {
            for z in 0..dz {
                probs[(x * dy + x % 2) * dz + z] = base.prob(&[x, z]);
            }
        }
        let j = DiscreteJoint::new(vec![dx, dy, dz], probs).unwrap();
        let r = info_bound_check(&j).unwrap();
        assert_abs_diff_eq!(r.h_target_given_input, 0.0, epsilon = 1e-12);
        assert!(r.rhs <= 1e-12);
        assert_abs_diff_eq!(r.lhs, 0.0, epsilon = 1e-12);
        assert!(r.satisfied);
    }

    #[test]
    fn satisfaction_rate_over_random_joints_is_logged() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let mut satisfied = 0usize;
        for _ in 0..500 {
            let dims = random_dims(&mut rng, 3);
            let j = DiscreteJoint::random(&dims, &mut rng).unwrap();
            let r = info_bound_check(&j).unwrap();
            assert!((-1e-12..=1.0 + 1e-12).contains(&r.lhs));
            assert!(r.rhs <= 1.0 + 1e-12);
            assert_eq!(r.satisfied, r.lhs >= r.rhs - 1e-12);
            if r.satisfied {
                satisfied += 1;
            }
        }
        println!("info bound satisfied on {satisfied}/500 random joints");
    }

    #[test]
    fn suite_rejects_wrong_rank() {
        let j = DiscreteJoint::new(vec![2, 2], vec![0.25; 4]).unwrap();
        assert!(trace_entropy_suite(&j).is_err());
        assert!(info_bound_check(&j).is_err());
    }
}
