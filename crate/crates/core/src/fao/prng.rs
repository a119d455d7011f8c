//! Counter-based SplitMix64 stream for implicit random matrices.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Entry `idx` of the stream for `seed`, uniform on (-1, 1).
pub(crate) fn entry(seed: u64, idx: u64) -> f64 {
    let z = splitmix64(seed.wrapping_add(idx.wrapping_add(1).wrapping_mul(GOLDEN)));
    let u = (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * u - 1.0
}

/// `y = M x` where `M[i, j] = entry(seed, i + j·m)`.
pub(crate) fn forward(seed: u64, m: usize, x: &[f64], y: &mut [f64]) {
    y.fill(0.0);
    for (j, &xj) in x.iter().enumerate() {
        let base = (j * m) as u64;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += entry(seed, base + i as u64) * xj;
        }
    }
}

/// `x = Mᵀ y`.
pub(crate) fn adjoint(seed: u64, m: usize, y: &[f64], x: &mut [f64]) {
    for (j, xj) in x.iter_mut().enumerate() {
        let base = (j * m) as u64;
        *xj = y
            .iter()
            .enumerate()
            .map(|(i, yi)| entry(seed, base + i as u64) * yi)
            .sum();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_in_open_interval() {
        for i in 0..10_000 {
            let v = entry(42, i);
            assert!(v > -1.0 - 1e-300 && v < 1.0);
        }
    }

    #[test]
    fn mean_near_zero() {
        let mean: f64 = (0..100_000).map(|i| entry(7, i)).sum::<f64>() / 100_000.0;
        assert!(mean.abs() < 0.02);
    }
}
