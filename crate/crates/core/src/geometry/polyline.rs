//! Optimal polygonal approximation of digital curves and the per-column
//! baseline detector built on it.

use crate::pagexml::{Point, Polygon, Polyline};
use crate::raster::Image;

use super::contour::polygon_mask;
use super::otsu::{level_of, otsu_from_histogram};
use super::GeometryError;

/// Default number of baseline vertices.
pub const DEFAULT_VERTICES: usize = 10;

/// Prefix sums giving the squared distances of a run of points to a line in O(1).
struct Sums {
    n: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    xx: Vec<f64>,
    yy: Vec<f64>,
    xy: Vec<f64>,
    pts: Vec<(f64, f64)>,
}

impl Sums {
    fn new(points: &[(f64, f64)]) -> Self {
        // Centering keeps the expanded quadratic well conditioned.
        let k = points.len() as f64;
        let cx = points.iter().map(|p| p.0).sum::<f64>() / k;
        let cy = points.iter().map(|p| p.1).sum::<f64>() / k;
        let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.0 - cx, p.1 - cy)).collect();
        let mut s = Sums {
            n: vec![0.0],
            x: vec![0.0],
            y: vec![0.0],
            xx: vec![0.0],
            yy: vec![0.0],
            xy: vec![0.0],
            pts,
        };
        for i in 0..s.pts.len() {
            let (x, y) = s.pts[i];
            s.n.push(s.n[i] + 1.0);
            s.x.push(s.x[i] + x);
            s.y.push(s.y[i] + y);
            s.xx.push(s.xx[i] + x * x);
            s.yy.push(s.yy[i] + y * y);
            s.xy.push(s.xy[i] + x * y);
        }
        s
    }

    /// Sum over points strictly between `i` and `j` of the squared distance
    /// to the line through points `i` and `j`.
    fn cost(&self, i: usize, j: usize) -> f64 {
        if j <= i + 1 {
            return 0.0;
        }
        let (a, b) = (self.pts[i], self.pts[j]);
        let (lo, hi) = (i + 1, j);
        let n = self.n[hi] - self.n[lo];
        let sx = self.x[hi] - self.x[lo];
        let sy = self.y[hi] - self.y[lo];
        let sxx = self.xx[hi] - self.xx[lo];
        let syy = self.yy[hi] - self.yy[lo];
        let sxy = self.xy[hi] - self.xy[lo];
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let l2 = dx * dx + dy * dy;
        let v = if l2 == 0.0 {
            // Coincident endpoints: distance to the point itself.
            sxx - 2.0 * a.0 * sx + n * a.0 * a.0 + syy - 2.0 * a.1 * sy + n * a.1 * a.1
        } else {
            // Σ (x·dy − y·dx − c)² / |d|² with c = a.x·dy − a.y·dx.
            let c = a.0 * dy - a.1 * dx;
            (dy * dy * sxx + dx * dx * syy - 2.0 * dx * dy * sxy - 2.0 * c * (dy * sx - dx * sy) + n * c * c) / l2
        };
        v.max(0.0)
    }
}

/// Squared-distance cost of approximating `points` by the polyline through
/// the given vertex indices (which must start at 0 and end at the last point).
pub fn approximation_cost(points: &[(f64, f64)], vertices: &[usize]) -> f64 {
    let s = Sums::new(points);
    vertices.windows(2).map(|w| s.cost(w[0], w[1])).sum()
}

/// Chooses `m` of the points, keeping both endpoints, so that the sum of
/// squared distances from every point to the line of its approximating
/// segment is minimal. Returns the chosen indices and the cost. `O(m·n²)`.
pub fn reduce_indices(points: &[(f64, f64)], m: usize) -> Result<(Vec<usize>, f64), GeometryError> {
    let n = points.len();
    if n < 2 || m < 2 || m > n {
        return Err(GeometryError::BadM { m, n });
    }
    let s = Sums::new(points);
    let inf = f64::INFINITY;
    // best[k][j]: cost with k+1 vertices, the last at j; from[k][j]: previous vertex.
    let mut best = vec![vec![inf; n]; m];
    let mut from = vec![vec![0usize; n]; m];
    best[0][0] = 0.0;
    for k in 1..m {
        for j in k..n {
            let mut bv = inf;
            let mut bi = 0;
            for i in (k - 1)..j {
                let prev = best[k - 1][i];
                if prev == inf {
                    continue;
                }
                let v = prev + s.cost(i, j);
                if v < bv {
                    bv = v;
                    bi = i;
                }
            }
            best[k][j] = bv;
            from[k][j] = bi;
        }
    }
    let mut idx = vec![n - 1];
    let mut j = n - 1;
    for k in (1..m).rev() {
        j = from[k][j];
        idx.push(j);
    }
    idx.reverse();
    Ok((idx, best[m - 1][n - 1]))
}

/// [`reduce_indices`] on a digital curve, returning the reduced polyline and its cost.
pub fn reduce_polyline(curve: &[Point], m: usize) -> Result<(Polyline, f64), GeometryError> {
    let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.x as f64, p.y as f64)).collect();
    let (idx, cost) = reduce_indices(&pts, m)?;
    let poly = Polyline::new(idx.iter().map(|&i| curve[i]).collect()).ok_or(GeometryError::Degenerate)?;
    Ok((poly, cost))
}

/// Lowest ink pixel of every inked column inside `region`, as a digital curve
/// in page coordinates. Pixels of the region's bounding box that lie outside
/// the polygon are treated as background before binarization.
pub fn lower_envelope(img: &Image, region: &Polygon) -> Result<Vec<Point>, GeometryError> {
    let bb = region.bbox();
    let x0 = bb.x0.min(img.width);
    let y0 = bb.y0.min(img.height);
    let x1 = bb.x1.min(img.width);
    let y1 = bb.y1.min(img.height);
    if x1 <= x0 || y1 <= y0 {
        return Err(GeometryError::NoInk);
    }
    let (cw, ch) = (x1 - x0, y1 - y0);
    let inside = polygon_mask(region, img.width, img.height);
    let mut levels = vec![255u8; (cw * ch) as usize];
    let mut hist = [0u64; 256];
    for y in 0..ch {
        for x in 0..cw {
            let (px, py) = (x + x0, y + y0);
            let l = if inside.get(px, py) {
                let g = if img.channels == 1 {
                    img.get(px, py, 0)
                } else {
                    0.299 * img.get(px, py, 0) + 0.587 * img.get(px, py, 1) + 0.114 * img.get(px, py, 2)
                };
                level_of(g)
            } else {
                255
            };
            levels[(y * cw + x) as usize] = l;
            hist[l as usize] += 1;
        }
    }
    let otsu = otsu_from_histogram(&hist);
    if otsu.variance <= 0.0 {
        return Err(GeometryError::NoInk);
    }
    let mut curve = Vec::new();
    for x in 0..cw {
        // Scanning rows top-down and keeping the last ink row gives the lowest one.
        let mut lowest = None;
        for y in 0..ch {
            if levels[(y * cw + x) as usize] <= otsu.threshold {
                lowest = Some(y);
            }
        }
        if let Some(y) = lowest {
            curve.push(Point::new(x + x0, y + y0));
        }
    }
    if curve.is_empty() {
        return Err(GeometryError::NoInk);
    }
    Ok(curve)
}

/// Baseline of the text line whose baseline region is `region`: the lower
/// ink envelope reduced to at most `m` vertices.
pub fn detect_baseline(img: &Image, region: &Polygon, m: usize) -> Result<Polyline, GeometryError> {
    if m < 2 {
        return Err(GeometryError::BadM { m, n: 0 });
    }
    let curve = lower_envelope(img, region)?;
    if curve.len() < 2 {
        return Err(GeometryError::Degenerate);
    }
    Ok(reduce_polyline(&curve, m.min(curve.len()))?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_reduce_to_endpoints() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let (idx, cost) = reduce_indices(&pts, 2).unwrap();
        assert_eq!(idx, vec![0, 9]);
        assert!(cost.abs() < 1e-9);
    }

    #[test]
    fn full_vertex_budget_is_identity() {
        let pts = vec![(0.0, 0.0), (1.0, 5.0), (2.0, -3.0), (3.0, 1.0)];
        let (idx, cost) = reduce_indices(&pts, 4).unwrap();
        assert_eq!(idx, vec![0, 1, 2, 3]);
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn bad_m_is_rejected() {
        let pts = vec![(0.0, 0.0), (1.0, 1.0)];
        assert!(matches!(reduce_indices(&pts, 3), Err(GeometryError::BadM { .. })));
        assert!(matches!(reduce_indices(&pts, 1), Err(GeometryError::BadM { .. })));
    }

    #[test]
    fn horizontal_bar_gives_flat_baseline() {
        let mut img = Image::filled(64, 32, 3, 1.0);
        for y in 10..=14 {
            for x in 5..=50 {
                for c in 0..3 {
                    img.set(x, y, c, 0.0);
                }
            }
        }
        let region = Polygon::rect(0, 0, 64, 32).unwrap();
        let b = detect_baseline(&img, &region, 10).unwrap();
        let pts: Vec<(u32, u32)> = b.points().iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(pts.first(), Some(&(5, 14)));
        assert_eq!(pts.last(), Some(&(50, 14)));
        assert!(pts.iter().all(|p| p.1 == 14));
    }

    #[test]
    fn white_crop_has_no_ink() {
        let img = Image::filled(16, 16, 3, 1.0);
        let region = Polygon::rect(2, 2, 10, 10).unwrap();
        assert_eq!(detect_baseline(&img, &region, 10), Err(GeometryError::NoInk));
    }
}
