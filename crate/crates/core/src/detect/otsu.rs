use super::DetectError;

/// Histogram level maximizing the between-class variance of the split
/// `[0, t]` / `[t + 1, 255]`. Ties go to the lowest level; a histogram with a
/// single occupied bin returns that bin.
pub fn otsu_threshold(histogram: &[u64; 256]) -> Result<u8, DetectError> {
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return Err(DetectError::EmptyHistogram);
    }
    let total = total as f64;
    let sum_total: f64 = histogram
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();

    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    let mut best: Option<(u8, f64)> = None;
    for (t, &count) in histogram.iter().enumerate() {
        w0 += count as f64;
        sum0 += t as f64 * count as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum0 / w0;
        let mu1 = (sum_total - sum0) / w1;
        let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if best.is_none_or(|(_, v)| between > v) {
            best = Some((t as u8, between));
        }
    }
    Ok(match best {
        Some((t, _)) => t,
        // every split leaves one side empty: only one bin is occupied
        None => histogram.iter().position(|&c| c > 0).unwrap_or(0) as u8,
    })
}

/// 256-bin histogram of 8-bit codes.
pub fn histogram(codes: &[u8]) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &c in codes {
        h[usize::from(c)] += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Recomputes class means from scratch for every candidate level.
    fn exhaustive(h: &[u64; 256]) -> u8 {
        let mut best = (0u8, -1.0f64);
        for t in 0..256usize {
            let (mut n0, mut s0, mut n1, mut s1) = (0.0, 0.0, 0.0, 0.0);
            for (i, &c) in h.iter().enumerate() {
                if i <= t {
                    n0 += c as f64;
                    s0 += (i as f64) * c as f64;
                } else {
                    n1 += c as f64;
                    s1 += (i as f64) * c as f64;
                }
            }
            let v = if n0 == 0.0 || n1 == 0.0 {
                0.0
            } else {
                n0 * n1 * (s0 / n0 - s1 / n1).powi(2)
            };
            if v > best.1 {
                best = (t as u8, v);
            }
        }
        best.0
    }

    #[test]
    fn single_bin() {
        let mut h = [0u64; 256];
        h[77] = 40;
        assert_eq!(otsu_threshold(&h).unwrap(), 77);
    }

    #[test]
    fn two_spikes() {
        let mut h = [0u64; 256];
        h[50] = 100;
        h[200] = 100;
        let t = otsu_threshold(&h).unwrap();
        assert_eq!(t, exhaustive(&h));
        assert_eq!(t, 50);
    }

    #[test]
    fn uniform_is_midpoint() {
        let h = [3u64; 256];
        assert_eq!(otsu_threshold(&h).unwrap(), 127);
        assert_eq!(exhaustive(&h), 127);
    }

    #[test]
    fn empty_histogram_is_an_error() {
        assert!(matches!(otsu_threshold(&[0; 256]), Err(DetectError::EmptyHistogram)));
    }

    proptest! {
        #[test]
        fn agrees_with_exhaustive_search(bins in prop::collection::vec((0usize..256, 1u64..500), 2..12)) {
            let mut h = [0u64; 256];
            for (i, c) in bins { h[i] += c; }
            let occupied = h.iter().filter(|&&c| c > 0).count();
            prop_assume!(occupied >= 2);
            prop_assert_eq!(otsu_threshold(&h).unwrap(), exhaustive(&h));
        }
    }
}
