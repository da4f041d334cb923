//! Independent reference implementations and random inputs shared by the
//! integration tests. Oracles here favour the most literal formulation over
//! speed.

#![allow(dead_code)]

pub mod gradcheck;

use doclayout::pagexml::{PageDocument, Point, Polygon, Polyline, TextLine, Zone, ZoneSchema, PAGE_ZONE_LABEL};
use doclayout::raster::{Image, LabelMap};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_map(rng: &mut ChaCha8Rng, w: u32, h: u32, k: usize) -> LabelMap {
    let mut m = LabelMap::zeros(2, k, w, h);
    // Mostly blocky maps with some noise, so every class pattern shows up.
    let bias = rng.random_range(0..k) as u8;
    for v in &mut m.data {
        *v = if rng.random_bool(0.3) { bias } else { rng.random_range(0..k) as u8 };
    }
    m
}

/// `counts[gt][pred]` by nested loops over pixel coordinates.
pub fn brute_confusion(pred: &LabelMap, gt: &LabelMap, k: usize) -> Vec<Vec<u64>> {
    let mut c = vec![vec![0u64; k]; k];
    for y in 0..gt.height {
        for x in 0..gt.width {
            c[gt.get(x, y) as usize][pred.get(x, y) as usize] += 1;
        }
    }
    c
}

/// Pixel acc, mean acc, mean IU, f.w. IU straight from their definitions,
/// averaging only over classes that occur in the reference.
pub fn brute_seg(c: &[Vec<u64>]) -> [f64; 4] {
    let k = c.len();
    let eta = |i: usize, j: usize| c[i][j] as f64;
    let tau: Vec<f64> = (0..k).map(|i| (0..k).map(|j| eta(i, j)).sum()).collect();
    let total: f64 = tau.iter().sum();
    let present: Vec<usize> = (0..k).filter(|&i| tau[i] > 0.0).collect();
    let iu = |i: usize| eta(i, i) / (tau[i] + (0..k).map(|j| eta(j, i)).sum::<f64>() - eta(i, i));
    let pixel_acc = (0..k).map(|i| eta(i, i)).sum::<f64>() / total;
    let mean_acc = present.iter().map(|&i| eta(i, i) / tau[i]).sum::<f64>() / present.len() as f64;
    let mean_iu = present.iter().map(|&i| iu(i)).sum::<f64>() / present.len() as f64;
    let fw_iu = present.iter().map(|&i| tau[i] * iu(i)).sum::<f64>() / total;
    [pixel_acc, mean_acc, mean_iu, fw_iu]
}

/// Gray crop of random size whose levels cluster around a few modes.
pub fn random_crop(rng: &mut ChaCha8Rng) -> Image {
    let (w, h) = (rng.random_range(1..=32), rng.random_range(1..=32));
    let modes: Vec<f32> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(0.0..=1.0)).collect();
    let spread = rng.random_range(0.0..0.2f32);
    let data = (0..w * h)
        .map(|_| {
            let m = modes[rng.random_range(0..modes.len())];
            (m + rng.random_range(-1.0..=1.0f32) * spread).clamp(0.0, 1.0)
        })
        .collect();
    Image::new(w, h, 1, data)
}

/// Threshold by scanning all 256 candidates and comparing the between-class
/// variance `ω0·ω1·(μ0 − μ1)²` as exact fractions. Ties keep the smallest
/// threshold; a single-level crop returns that level.
pub fn brute_otsu(levels: &[u8]) -> u8 {
    let n = levels.len() as i128;
    let total: i128 = levels.iter().map(|&l| l as i128).sum();
    // n²·variance = (n·s0 − n0·S)² / (n0·n1)
    let mut best: Option<(u8, i128, i128)> = None;
    for t in 0..=255u8 {
        let n0 = levels.iter().filter(|&&l| l <= t).count() as i128;
        let s0: i128 = levels.iter().filter(|&&l| l <= t).map(|&l| l as i128).sum();
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let num = (n * s0 - n0 * total).pow(2);
        let den = n0 * n1;
        if best.is_none_or(|(_, bn, bd)| num * bd > bn * den) {
            best = Some((t, num, den));
        }
    }
    match best {
        Some((t, num, _)) if num > 0 => t,
        _ => *levels.iter().min().unwrap(),
    }
}

fn dist2_to_line(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let l2 = dx * dx + dy * dy;
    if l2 == 0.0 {
        return (p.0 - a.0).powi(2) + (p.1 - a.1).powi(2);
    }
    let cross = (p.0 - a.0) * dy - (p.1 - a.1) * dx;
    cross * cross / l2
}

/// Cost of the polyline through `idx`, summing the squared distance of every
/// skipped point to the line of its segment.
pub fn direct_cost(points: &[(f64, f64)], idx: &[usize]) -> f64 {
    idx.windows(2)
        .map(|w| ((w[0] + 1)..w[1]).map(|k| dist2_to_line(points[k], points[w[0]], points[w[1]])).sum::<f64>())
        .sum()
}

/// Minimum cost over every choice of `m − 2` interior vertices.
pub fn brute_reduce(points: &[(f64, f64)], m: usize) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut combo: Vec<usize> = (1..m - 1).collect();
    loop {
        let mut idx = vec![0];
        idx.extend(&combo);
        idx.push(n - 1);
        best = best.min(direct_cost(points, &idx));
        // Next combination of interior indices in 1..n-1.
        let k = combo.len();
        let mut i = k;
        while i > 0 && combo[i - 1] == n - 1 - (k - i) - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        combo[i - 1] += 1;
        for j in i..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
    best
}

/// A wandering digital curve of `n` points.
pub fn random_curve(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    let mut p = (rng.random_range(0..50) as f64, rng.random_range(0..50) as f64);
    (0..n)
        .map(|_| {
            let q = p;
            p = (p.0 + rng.random_range(0..=4) as f64, p.1 + rng.random_range(-3..=3) as f64);
            q
        })
        .collect()
}

fn random_polygon(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Polygon {
    loop {
        let n = rng.random_range(3..=8);
        let pts = (0..n).map(|_| Point::new(rng.random_range(0..=w), rng.random_range(0..=h))).collect();
        if let Some(p) = Polygon::new(pts) {
            return p;
        }
    }
}

fn random_polyline(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Polyline {
    loop {
        let n = rng.random_range(2..=6);
        let pts = (0..n).map(|_| Point::new(rng.random_range(0..=w), rng.random_range(0..=h))).collect();
        if let Some(p) = Polyline::new(pts) {
            return p;
        }
    }
}

/// Random document in reading order with labels from `schema` (plus the
/// page label), ids needing XML escaping and coordinates on the page.
pub fn random_doc(rng: &mut ChaCha8Rng, schema: &ZoneSchema) -> PageDocument {
    let (w, h) = (rng.random_range(1..=3000), rng.random_range(1..=3000));
    let names = ["page.png", "scan <1> & co.png", "a\"b'c.png", "ñandú.tif"];
    let mut doc = PageDocument::new(names[rng.random_range(0..names.len())], w, h);
    for z in 0..rng.random_range(0..6) {
        let label = match rng.random_range(0..=schema.labels().len()) {
            0 => PAGE_ZONE_LABEL.to_string(),
            i => schema.labels()[i - 1].clone(),
        };
        let id = format!("r{z}&<{z}>");
        let lines = (0..rng.random_range(0..4))
            .map(|l| TextLine { id: format!("{id}_l{l}"), baseline: random_polyline(rng, w, h) })
            .collect();
        doc.zones.push(Zone { id, label, boundary: random_polygon(rng, w, h), lines });
    }
    doc.in_reading_order()
}

/// Height of `line` at column `x` by linear interpolation, or `None` outside
/// its horizontal extent. Vertices must be ordered left to right.
pub fn y_at(line: &Polyline, x: f64) -> Option<f64> {
    let p = line.points();
    p.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        let (x0, x1) = (a.x as f64, b.x as f64);
        if x < x0 || x > x1 {
            None
        } else if x1 == x0 {
            Some(a.y.max(b.y) as f64)
        } else {
            Some(a.y as f64 + (x - x0) / (x1 - x0) * (b.y as f64 - a.y as f64))
        }
    })
}

/// Largest vertical gap between `hyp` and `gt` over the integer columns both
/// span, with the fraction of `gt`'s columns that `hyp` covers.
pub fn column_deviation(hyp: &Polyline, gt: &Polyline) -> (f64, f64) {
    let (g0, g1) = (gt.points()[0].x, gt.points()[gt.points().len() - 1].x);
    let (mut worst, mut covered) = (0.0f64, 0usize);
    for x in g0..=g1 {
        if let (Some(a), Some(b)) = (y_at(hyp, x as f64), y_at(gt, x as f64)) {
            worst = worst.max((a - b).abs());
            covered += 1;
        }
    }
    (worst, covered as f64 / (g1 - g0 + 1) as f64)
}
