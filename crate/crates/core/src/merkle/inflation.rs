//! Expected growth of sparse-tree proofs under a prefix-grinding attacker.
//!
//! An attacker computing `m` hashes to find keys sharing a long index
//! prefix with a target lengthens the target's proof. The longest shared
//! prefix `l_p` satisfies `P(l_p ≥ l) = 1 − (1 − 2^−l)^m`.

use num_traits::Float;

use super::SMT_DEPTH;

/// `E[l_p] = Σ_{l≥1} P(l_p ≥ l)` for `m` attacker hashes.
pub fn expected_max_prefix<F: Float>(m: F) -> F {
    let mut sum = F::zero();
    if m <= F::zero() {
        return sum;
    }
    let half = F::from(0.5).expect("representable");
    let mut p = F::one();
    for _ in 1..=SMT_DEPTH {
        p = p * half;
        // 1 − (1 − p)^m, stable for tiny p and huge m.
        let term = -(m * (-p).ln_1p()).exp_m1();
        sum = sum + term;
        if term < F::epsilon() * sum && p * m < F::epsilon() {
            break;
        }
    }
    sum
}

/// Extra proof bytes expected after `hash_rate × duration` attacker hashes
/// against a tree of `baseline_leaves` honest leaves.
pub fn expected_proof_inflation<F: Float>(hash_rate: F, duration: F, baseline_leaves: F) -> F {
    let m = hash_rate * duration;
    let baseline = if baseline_leaves > F::one() {
        baseline_leaves.log2().ceil()
    } else {
        F::zero()
    };
    let extra = expected_max_prefix(m) - baseline;
    F::from(32).expect("representable") * extra.max(F::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_work_costs_nothing() {
        assert_eq!(expected_proof_inflation(0.0f64, 1.0, 1024.0), 0.0);
        assert_eq!(expected_proof_inflation(1e9f64, 0.0, 1.0), 0.0);
    }

    #[test]
    fn single_hash_expects_one_level() {
        // Σ 2^-l = 1.
        assert!((expected_max_prefix(1.0f64) - 1.0).abs() < 1e-12);
        assert!((expected_proof_inflation(1.0f64, 1.0, 1.0) - 32.0).abs() < 1e-9);
        assert_eq!(expected_proof_inflation(1.0f64, 1.0, 4.0), 0.0);
    }

    #[test]
    fn f32_and_f64_agree() {
        let a = expected_proof_inflation(1e6f64, 3600.0, 65536.0);
        let b = expected_proof_inflation(1e6f32, 3600.0, 65536.0) as f64;
        assert!((a - b).abs() / a < 1e-3, "{a} {b}");
    }
}
