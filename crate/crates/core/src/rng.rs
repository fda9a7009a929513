//! Counter-based uniforms: the state of vertex `v` in replica `r` is a pure
//! function of `(seed, r, v)`, so configurations can be regenerated in any
//! order on any worker, and thresholding one uniform at different `p`
//! couples all parameters monotonically.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const REPLICA_MUL: u64 = 0xd1b5_4a32_d192_ed03;
const VERTEX_MUL: u64 = 0xaef1_7502_108e_f2d9;

/// SplitMix64 output function.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key shared by every vertex of one replica.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaKey(u64);

impl ReplicaKey {
    #[inline]
    pub fn new(seed: u64, replica: u64) -> Self {
        ReplicaKey(mix(mix(seed ^ GOLDEN) ^ replica.wrapping_mul(REPLICA_MUL)))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(self, vertex: u32) -> f64 {
        let bits = mix(self.0 ^ u64::from(vertex).wrapping_add(1).wrapping_mul(VERTEX_MUL));
        (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniforms_are_reproducible_and_distinct() {
        let a = ReplicaKey::new(7, 3);
        assert_eq!(a.uniform(11), ReplicaKey::new(7, 3).uniform(11));
        assert_ne!(a.uniform(11), a.uniform(12));
        assert_ne!(a.uniform(11), ReplicaKey::new(7, 4).uniform(11));
        assert_ne!(a.uniform(11), ReplicaKey::new(8, 3).uniform(11));
    }

    #[test]
    fn uniform_moments() {
        let n = 200_000u32;
        let key = ReplicaKey::new(42, 0);
        let (mut s, mut s2) = (0.0, 0.0);
        for v in 0..n {
            let u = key.uniform(v);
            assert!((0.0..1.0).contains(&u));
            s += u;
            s2 += u * u;
        }
        let mean = s / f64::from(n);
        let var = s2 / f64::from(n) - mean * mean;
        // Standard error of the mean is about 6.5e-4.
        assert!((mean - 0.5).abs() < 4e-3, "{mean}");
        assert!((var - 1.0 / 12.0).abs() < 2e-3, "{var}");
    }
}
