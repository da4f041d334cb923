//! Synthetic pages with known layout.
//!
//! A page holds one or more `$par` columns, an optional `$not` strip in the
//! left margin and an optional `$pag` box in the top right corner. Each zone
//! is filled with dark horizontal strokes whose lower edge is exactly the
//! ground-truth baseline, so every stage of the pipeline can be checked
//! against the emitted document.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::pagexml::{Point, Polygon, Polyline, TextLine, Zone, PageDocument};
use crate::raster::Image;

/// Zone coordinates are snapped to this grid.
pub const GRID: u32 = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("layout does not fit the page: {0}")]
    LayoutOverflow(String),
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub width: u32,
    pub height: u32,
    pub margin: u32,
    /// Range of `$par` columns per page.
    pub columns: (u32, u32),
    /// Chance of a `$not` strip.
    pub note_probability: f64,
    pub note_width: u32,
    /// Chance of a `$pag` box.
    pub page_number_probability: f64,
    pub lines_per_zone: (u32, u32),
    /// Stroke height in pixels.
    pub stroke: u32,
    /// Peak vertical displacement of a baseline vertex.
    pub wobble: u32,
    /// Vertices of each ground-truth baseline.
    pub baseline_vertices: usize,
    pub ink: f32,
    pub background: f32,
    pub noise: f32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 768,
            height: 1024,
            margin: 64,
            columns: (1, 2),
            note_probability: 0.5,
            note_width: 128,
            page_number_probability: 0.5,
            lines_per_zone: (3, 8),
            stroke: 12,
            wobble: 2,
            baseline_vertices: 6,
            ink: 0.1,
            background: 0.9,
            noise: 0.02,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.columns.0 == 0 || self.columns.0 > self.columns.1 {
            return bad("columns range");
        }
        if self.lines_per_zone.0 == 0 || self.lines_per_zone.0 > self.lines_per_zone.1 {
            return bad("lines_per_zone range");
        }
        if !(0.0..=1.0).contains(&self.note_probability) || !(0.0..=1.0).contains(&self.page_number_probability) {
            return bad("probabilities must lie in [0, 1]");
        }
        if (self.background - self.ink).abs() < 64.0 / 255.0 {
            return bad("ink and background gray levels too close");
        }
        if !(0.0..=1.0).contains(&self.ink) || !(0.0..=1.0).contains(&self.background) || !(self.noise >= 0.0) {
            return bad("gray levels must lie in [0, 1] and noise must be nonnegative");
        }
        if self.stroke == 0 || self.baseline_vertices < 2 {
            return bad("stroke and baseline_vertices");
        }
        if self.margin < 4 * GRID || self.margin % GRID != 0 || self.note_width % GRID != 0 {
            return bad("margin and note_width must be multiples of 8, margin at least 32");
        }
        Ok(())
    }
}

struct Block {
    label: &'static str,
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
    lines: u32,
}

fn snap(v: u32) -> u32 {
    v / GRID * GRID
}

fn plan(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Block>, SynthError> {
    let (w, h, m) = (spec.width, spec.height, spec.margin);
    if w < 2 * m + 8 * GRID || h < 2 * m + 8 * GRID {
        return Err(SynthError::LayoutOverflow(format!("page {w}x{h} too small for margin {m}")));
    }
    let lines = |rng: &mut ChaCha8Rng| rng.random_range(spec.lines_per_zone.0..=spec.lines_per_zone.1);
    let mut blocks = Vec::new();

    if rng.random_bool(spec.page_number_probability) {
        // The box sits in the top margin, clear of the text block.
        let (bw, bh) = (8 * GRID, m - 2 * GRID);
        blocks.push(Block { label: "$pag", x0: w - m - bw, y0: GRID, x1: w - m, y1: GRID + bh, lines: 1 });
    }

    let (mut left, right) = (m, snap(w - m));
    let (top, bottom) = (m, snap(h - m));
    if rng.random_bool(spec.note_probability) {
        let nh = snap(rng.random_range((bottom - top) / 4..=(bottom - top) / 2)).max(4 * GRID);
        let n = lines(rng);
        blocks.push(Block { label: "$not", x0: left, y0: top, x1: left + spec.note_width, y1: top + nh, lines: n });
        left += spec.note_width + 2 * GRID;
    }

    let cols = rng.random_range(spec.columns.0..=spec.columns.1);
    let gap = 2 * GRID;
    let avail = right.saturating_sub(left);
    let cw = snap(avail.saturating_sub(gap * (cols - 1)) / cols);
    if cw < 8 * GRID {
        return Err(SynthError::LayoutOverflow(format!("{cols} columns do not fit in {avail} px")));
    }
    for c in 0..cols {
        let x0 = left + c * (cw + gap);
        let n = lines(rng);
        blocks.push(Block { label: "$par", x0, y0: top, x1: x0 + cw, y1: bottom, lines: n });
    }

    for b in &blocks {
        // Each line needs its stroke, the wobble on both sides and some clearance.
        let pitch = spec.stroke + 2 * spec.wobble + 6;
        if b.lines * pitch + 2 * GRID > b.y1 - b.y0 || b.x1 - b.x0 < 4 * GRID {
            return Err(SynthError::LayoutOverflow(format!(
                "{} lines of {} px do not fit a {} zone of {}x{}",
                b.lines,
                pitch,
                b.label,
                b.x1 - b.x0,
                b.y1 - b.y0
            )));
        }
    }
    Ok(blocks)
}

/// Row of the polyline at integer column `x`, rounded half up.
pub fn baseline_row(baseline: &Polyline, x: u32) -> Option<u32> {
    let pts = baseline.points();
    pts.windows(2).find(|s| s[0].x <= x && x <= s[1].x).map(|s| {
        if s[1].x == s[0].x {
            return s[1].y;
        }
        let t = (x - s[0].x) as f64 / (s[1].x - s[0].x) as f64;
        (s[0].y as f64 + t * (s[1].y as f64 - s[0].y as f64) + 0.5).floor() as u32
    })
}

fn make_baseline(spec: &SynthSpec, x0: u32, x1: u32, y: u32, rng: &mut ChaCha8Rng) -> Polyline {
    let k = spec.baseline_vertices.min((x1 - x0) as usize + 1).max(2);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let amp = spec.wobble as f64;
    let pts = (0..k)
        .map(|i| {
            let x = x0 + ((x1 - x0) as f64 * i as f64 / (k - 1) as f64).round() as u32;
            let dy = (amp * (phase + i as f64 * 1.3).sin()).round() as i64;
            Point::new(x, (y as i64 + dy) as u32)
        })
        .collect();
    Polyline::new(pts).expect("at least two vertices")
}

/// Page `index` of the synthetic set described by `spec`.
pub fn generate_page(spec: &SynthSpec, index: u64) -> Result<(Image, PageDocument), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let blocks = plan(spec, &mut rng)?;

    let (w, h) = (spec.width, spec.height);
    let mut gray = vec![spec.background; (w * h) as usize];
    let mut doc = PageDocument::new(format!("page_{index:04}.png"), w, h);
    let t = spec.stroke;

    for (zi, b) in blocks.iter().enumerate() {
        let zid = format!("r{}", zi + 1);
        let inset = GRID.min((b.x1 - b.x0) / 8);
        let usable = (b.y1 - b.y0) - 2 * GRID;
        let pitch = usable / b.lines;
        let mut lines = Vec::new();
        for j in 0..b.lines {
            // Baselines sit near the bottom of each line slot, leaving room above for the stroke.
            let y = b.y0 + GRID + j * pitch + pitch - spec.wobble - 3;
            let lx0 = b.x0 + inset + rng.random_range(0..=inset);
            let lx1 = b.x1 - inset - rng.random_range(0..=(b.x1 - b.x0) / 4);
            let baseline = make_baseline(spec, lx0, lx1.max(lx0 + 1), y, &mut rng);
            for x in lx0..=baseline.points().last().expect("nonempty").x {
                let by = baseline_row(&baseline, x).expect("column within baseline");
                for yy in (by + 1).saturating_sub(t)..=by {
                    gray[(yy * w + x) as usize] = spec.ink;
                }
            }
            lines.push(TextLine { id: format!("{zid}_l{}", j + 1), baseline });
        }
        let boundary = Polygon::rect(b.x0, b.y0, b.x1, b.y1).expect("nonempty zone");
        doc.zones.push(Zone { id: zid, label: b.label.to_string(), boundary, lines });
    }

    if spec.noise > 0.0 {
        let normal = Normal::new(0.0f32, spec.noise).expect("finite sigma");
        for v in &mut gray {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    let data = gray.iter().flat_map(|&g| [g, g, g]).collect();
    Ok((Image::new(w, h, 3, data), doc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed_and_index() {
        let spec = SynthSpec::default();
        let (a, da) = generate_page(&spec, 3).unwrap();
        let (b, db) = generate_page(&spec, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(da, db);
        let (c, _) = generate_page(&spec, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_paragraph_three_lines() {
        let spec = SynthSpec {
            columns: (1, 1),
            note_probability: 0.0,
            page_number_probability: 0.0,
            lines_per_zone: (3, 3),
            ..SynthSpec::default()
        };
        let (_, doc) = generate_page(&spec, 0).unwrap();
        assert_eq!(doc.zones.len(), 1);
        assert_eq!(doc.zones[0].label, "$par");
        assert_eq!(doc.line_count(), 3);
    }

    #[test]
    fn baselines_are_lower_ink_edge() {
        let spec = SynthSpec { noise: 0.0, ..SynthSpec::default() };
        let (img, doc) = generate_page(&spec, 1).unwrap();
        for b in doc.baselines() {
            let (x0, x1) = (b.points()[0].x, b.points().last().unwrap().x);
            for x in x0..=x1 {
                let y = baseline_row(b, x).unwrap();
                assert_eq!(img.get(x, y, 0), spec.ink);
                assert_eq!(img.get(x, y + 1, 0), spec.background);
            }
        }
    }

    #[test]
    fn too_many_lines_overflow() {
        let spec = SynthSpec { lines_per_zone: (200, 200), ..SynthSpec::default() };
        assert!(matches!(generate_page(&spec, 0), Err(SynthError::LayoutOverflow(_))));
    }
}
