//! Outer borders of 8-connected components as pixel-corner polygons.
//!
//! Components are found by raster scan. The first pixel of each component
//! starts a border follow that walks the cracks between component and
//! background pixels, keeping the component on its left, so every polygon runs
//! counterclockwise on screen and encloses exactly the component's pixels
//! (holes included). Diagonally touching pixels are joined at a shared vertex.

use std::collections::VecDeque;

use crate::pagexml::{Point, Polygon};
use crate::raster::{fill_polygon_f, LabelMap, Mask};

/// A zone polygon together with its Task-2 class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub polygon: Polygon,
    pub class: usize,
}

/// Connected-component labels (8-connectivity); 0 is background, components
/// are numbered from 1 in raster order of their first pixel.
pub fn label_components(mask: &Mask) -> (Vec<u32>, u32) {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut labels = vec![0u32; mask.data.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..mask.data.len() {
        if !mask.data[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i as i64) % w, (i as i64) / w);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = (ny * w + nx) as usize;
                    if mask.data[j] && labels[j] == 0 {
                        labels[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    (labels, next)
}

/// Follows the crack outline of the component `id` from the top-left corner
/// of its first pixel `(sx, sy)`.
fn trace(labels: &[u32], w: i64, h: i64, id: u32, sx: i64, sy: i64) -> Vec<Point> {
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && labels[(y * w + x) as usize] == id;
    // Directions in y-down coordinates: S, E, N, W. Left of (dx, dy) is (dy, -dx).
    const DIRS: [(i64, i64); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];
    // Pixel ahead-left / ahead-right of corner (cx, cy) when heading `d`.
    let ahead = |cx: i64, cy: i64, d: usize| -> ((i64, i64), (i64, i64)) {
        match d {
            0 => ((cx, cy), (cx - 1, cy)),
            1 => ((cx, cy - 1), (cx, cy)),
            2 => ((cx - 1, cy - 1), (cx, cy - 1)),
            _ => ((cx - 1, cy), (cx - 1, cy - 1)),
        }
    };
    let (mut cx, mut cy, mut d) = (sx, sy, 0usize);
    let mut pts = vec![Point::new(sx as u32, sy as u32)];
    loop {
        cx += DIRS[d].0;
        cy += DIRS[d].1;
        let (fl, fr) = ahead(cx, cy, d);
        let nd = if inside(fr.0, fr.1) {
            (d + 3) % 4
        } else if inside(fl.0, fl.1) {
            d
        } else {
            (d + 1) % 4
        };
        if (cx, cy) == (sx, sy) && nd == 0 {
            break;
        }
        if nd != d {
            pts.push(Point::new(cx as u32, cy as u32));
        }
        d = nd;
    }
    pts
}

/// Outer border polygons of the 8-connected components of `mask`, in raster
/// order of their first pixel, dropping those with area below `min_area`.
pub fn extract_contours(mask: &Mask, min_area: f64) -> Vec<Polygon> {
    let (labels, count) = label_components(mask);
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut seen = vec![false; count as usize + 1];
    let mut out = Vec::new();
    for (i, &id) in labels.iter().enumerate() {
        if id == 0 || seen[id as usize] {
            continue;
        }
        seen[id as usize] = true;
        let (x, y) = (i as i64 % w, i as i64 / w);
        if let Some(poly) = Polygon::new(trace(&labels, w, h, id, x, y)) {
            if poly.area() >= min_area {
                out.push(poly);
            }
        }
    }
    out
}

/// Rasterizes `polygon` into a mask of the given size.
pub fn polygon_mask(polygon: &Polygon, width: u32, height: u32) -> Mask {
    let mut m = Mask::new(width, height);
    let verts: Vec<(f64, f64)> = polygon.points().iter().map(|p| (p.x as f64, p.y as f64)).collect();
    fill_polygon_f(&mut m, &verts);
    m
}

/// Zone polygons for every non-background class of a Task-2 map, indexed by
/// class (entry 0 is always empty).
pub fn zone_contours(map: &LabelMap, min_area: f64) -> Vec<Vec<Polygon>> {
    let mut out = vec![Vec::new(); map.num_classes];
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        let mask = map.mask_of(k as u8);
        if mask.count() > 0 {
            *slot = extract_contours(&mask, min_area);
        }
    }
    out
}

/// Baseline regions: Task-1 baseline pixels restricted to `zone`.
pub fn baseline_regions(task1: &LabelMap, zone: &Polygon, min_area: f64) -> Vec<Polygon> {
    let mask = task1.mask_of(1).and(&polygon_mask(zone, task1.width, task1.height));
    extract_contours(&mask, min_area)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> Mask {
        let mut m = Mask::new(rows[0].len() as u32, rows.len() as u32);
        for (y, r) in rows.iter().enumerate() {
            for (x, c) in r.chars().enumerate() {
                m.set(x as u32, y as u32, c == '#');
            }
        }
        m
    }

    #[test]
    fn empty_mask_has_no_contours() {
        assert!(extract_contours(&Mask::new(5, 5), 0.0).is_empty());
    }

    #[test]
    fn square_is_traced_counterclockwise() {
        let mut m = Mask::new(8, 8);
        for y in 2..5 {
            for x in 2..5 {
                m.set(x, y, true);
            }
        }
        let c = extract_contours(&m, 0.0);
        assert_eq!(c.len(), 1);
        let pts: Vec<(u32, u32)> = c[0].points().iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(pts, vec![(2, 2), (2, 5), (5, 5), (5, 2)]);
        assert!(c[0].signed_area() < 0.0);
        assert_eq!(c[0].area(), 9.0);
    }

    #[test]
    fn diagonal_pixels_form_one_component() {
        let m = mask_from(&["#..", ".#.", "..#"]);
        let c = extract_contours(&m, 0.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].area(), 3.0);
        assert_eq!(polygon_mask(&c[0], 3, 3), m);
    }

    #[test]
    fn holes_are_filled_and_concavities_kept() {
        let m = mask_from(&["#####", "#...#", "#.#.#", "#...#", "#####", "##..#"]);
        let c = extract_contours(&m, 0.0);
        // The island inside the hole is its own component.
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].area(), 1.0);
        let filled = polygon_mask(&c[0], 5, 6);
        let expected = mask_from(&["#####", "#####", "#####", "#####", "#####", "##..#"]);
        assert_eq!(filled, expected);
    }

    #[test]
    fn min_area_drops_specks() {
        let m = mask_from(&["#....", ".....", "..###", "..###"]);
        assert_eq!(extract_contours(&m, 2.0).len(), 1);
        assert_eq!(extract_contours(&m, 0.0).len(), 2);
    }
}
