//! Per-symbol two-step block interleaver of the 802.11 OFDM PHY.

/// `perm[k]` is the output position of coded bit `k`.
pub fn permutation(n_cbps: usize, n_bpsc: usize) -> Vec<usize> {
    let s = (n_bpsc / 2).max(1);
    (0..n_cbps)
        .map(|k| {
            let i = (n_cbps / 16) * (k % 16) + k / 16;
            s * (i / s) + (i + n_cbps - (16 * i / n_cbps)) % s
        })
        .collect()
}

pub fn interleave<T: Copy + Default>(block: &[T], perm: &[usize]) -> Vec<T> {
    let mut out = vec![T::default(); block.len()];
    for (k, &j) in perm.iter().enumerate() {
        out[j] = block[k];
    }
    out
}

pub fn deinterleave<T: Copy + Default>(block: &[T], perm: &[usize]) -> Vec<T> {
    perm.iter().map(|&j| block[j]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn is_a_permutation_for_every_modulation() {
        for n_bpsc in [1, 2, 4, 6] {
            let mut p = permutation(48 * n_bpsc, n_bpsc);
            p.sort_unstable();
            assert_eq!(p, (0..48 * n_bpsc).collect::<Vec<_>>());
        }
    }

    #[test]
    fn bpsk_first_step_only() {
        // with s = 1 the second permutation is the identity
        let p = permutation(48, 1);
        assert_eq!(&p[..4], &[0, 3, 6, 9]);
        assert_eq!(p[16], 1);
    }

    #[test]
    fn round_trip() {
        let p = permutation(288, 6);
        let x: Vec<u32> = (0..288).collect();
        assert_eq!(deinterleave(&interleave(&x, &p), &p), x);
    }
}
