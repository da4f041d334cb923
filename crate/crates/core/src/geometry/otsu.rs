use crate::raster::Image;

/// Result of Otsu's method on a 256-bin histogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtsuResult {
    /// Ink is every pixel whose level is `<= threshold`.
    pub threshold: u8,
    /// Between-class variance at the threshold, in level² units. Zero means
    /// the histogram has a single occupied bin and nothing counts as ink.
    pub variance: f64,
}

/// Quantizes a `[0, 1]` intensity to a level in `0..=255`.
pub fn level_of(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn histogram(gray: &Image) -> [u64; 256] {
    assert_eq!(gray.channels, 1, "histogram expects a single-channel image");
    let mut h = [0u64; 256];
    for &v in &gray.data {
        h[level_of(v) as usize] += 1;
    }
    h
}

/// Between-class variance when levels `0..=t` form class 0, scaled by `n²`,
/// as the exact fraction `(n·s0 − n0·S)² / (n0·n1)` where `s0`, `S` are level
/// sums. `None` when one class is empty.
fn scaled_variance(n: u64, total_sum: u64, n0: u64, s0: u64) -> Option<(u128, u64)> {
    let n1 = n - n0;
    if n0 == 0 || n1 == 0 {
        return None;
    }
    let d = (n as i128 * s0 as i128 - n0 as i128 * total_sum as i128).unsigned_abs();
    Some((d * d, n0 * n1))
}

/// `a · b` as a 192-bit number `(high, low)`.
fn mul_wide(a: u128, b: u64) -> (u128, u128) {
    let (ah, al) = (a >> 64, a & u64::MAX as u128);
    let (ph, pl) = (ah * b as u128, al * b as u128);
    let (lo, carry) = pl.overflowing_add(ph << 64);
    ((ph >> 64) + carry as u128, lo)
}

/// `p.0 / p.1 > q.0 / q.1`, exactly.
fn greater(p: (u128, u64), q: (u128, u64)) -> bool {
    mul_wide(p.0, q.1) > mul_wide(q.0, p.1)
}

fn to_f64(v: (u128, u64)) -> f64 {
    v.0 as f64 / v.1 as f64
}

/// Between-class variance `ω0 ω1 (μ0 − μ1)²` for threshold `t`, computed directly.
pub fn between_class_variance(hist: &[u64; 256], t: u8) -> f64 {
    let n: u64 = hist.iter().sum();
    let total: u64 = hist.iter().enumerate().map(|(l, &c)| l as u64 * c).sum();
    let n0: u64 = hist[..=t as usize].iter().sum();
    let s0: u64 = hist[..=t as usize].iter().enumerate().map(|(l, &c)| l as u64 * c).sum();
    if n == 0 {
        return 0.0;
    }
    scaled_variance(n, total, n0, s0).map_or(0.0, to_f64) / (n as f64 * n as f64)
}

/// Threshold maximizing the between-class variance; ties go to the smallest
/// threshold. A constant image yields its own level with zero variance.
pub fn otsu_from_histogram(hist: &[u64; 256]) -> OtsuResult {
    let n: u64 = hist.iter().sum();
    let total: u64 = hist.iter().enumerate().map(|(l, &c)| l as u64 * c).sum();
    let (mut n0, mut s0) = (0u64, 0u64);
    let mut best: Option<(u8, (u128, u64))> = None;
    for (t, &c) in hist.iter().enumerate() {
        n0 += c;
        s0 += t as u64 * c;
        if let Some(v) = scaled_variance(n, total, n0, s0) {
            if best.is_none_or(|(_, b)| greater(v, b)) {
                best = Some((t as u8, v));
            }
        }
    }
    match best {
        Some((t, v)) if v.0 > 0 => OtsuResult { threshold: t, variance: to_f64(v) / (n as f64 * n as f64) },
        _ => {
            let level = hist.iter().position(|&c| c > 0).unwrap_or(0) as u8;
            OtsuResult { threshold: level, variance: 0.0 }
        }
    }
}

pub fn otsu(gray: &Image) -> OtsuResult {
    otsu_from_histogram(&histogram(gray))
}

/// Just the threshold level of [`otsu`].
pub fn otsu_threshold(gray: &Image) -> u8 {
    otsu(gray).threshold
}
