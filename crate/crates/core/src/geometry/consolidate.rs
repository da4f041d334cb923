use crate::pagexml::{scale_layout, PageDocument, Point, Polygon, Polyline, TextLine, Zone, ZoneSchema, PAGE_ZONE_LABEL};
use crate::raster::{Image, LabelMap, LabelMapStack};

use super::contour::{baseline_regions, zone_contours};
use super::polyline::{detect_baseline, DEFAULT_VERTICES};

/// Which of the two tasks drive consolidation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsolidateMode {
    /// Zones from Task 2, baselines searched inside each zone.
    #[default]
    Both,
    /// A single page-sized zone holding every detected baseline.
    Task1Only,
    /// Zones only.
    Task2Only,
}

impl std::str::FromStr for ConsolidateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "both" => Ok(Self::Both),
            "task1_only" => Ok(Self::Task1Only),
            "task2_only" => Ok(Self::Task2Only),
            _ => Err(format!("unknown mode `{s}` (expected both, task1_only or task2_only)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsolidateParams {
    /// Components smaller than this fraction of the page are dropped.
    pub min_area_frac: f64,
    /// Vertices per detected baseline.
    pub vertices: usize,
}

impl Default for ConsolidateParams {
    fn default() -> Self {
        Self { min_area_frac: 1e-4, vertices: DEFAULT_VERTICES }
    }
}

fn lines_in(
    img: &Image,
    task1: &LabelMap,
    zone: &Polygon,
    zone_id: &str,
    params: &ConsolidateParams,
    min_area: f64,
) -> Vec<TextLine> {
    baseline_regions(task1, zone, min_area)
        .iter()
        .filter_map(|r| detect_baseline(img, r, params.vertices).ok())
        .enumerate()
        .map(|(j, baseline)| TextLine { id: format!("{zone_id}_l{}", j + 1), baseline })
        .collect()
}

/// Turns predicted label maps into a page document.
///
/// `img` and `labels` share the working resolution; the result is rescaled
/// to `original` (width, height). Lines for which no ink is found are skipped.
pub fn consolidate_page(
    img: &Image,
    labels: &LabelMapStack,
    mode: ConsolidateMode,
    schema: &ZoneSchema,
    params: &ConsolidateParams,
    original: (u32, u32),
    image_filename: &str,
) -> PageDocument {
    let (w, h) = (labels.width(), labels.height());
    assert_eq!((img.width, img.height), (w, h), "image and label maps must be aligned");
    let min_area = params.min_area_frac * (w as f64 * h as f64);
    let task1 = &labels.maps[0];
    let mut doc = PageDocument::new(image_filename, w, h);

    match mode {
        ConsolidateMode::Task1Only => {
            let page = Polygon::rect(0, 0, w, h).expect("nonempty page");
            let lines = lines_in(img, task1, &page, "r1", params, min_area);
            doc.zones.push(Zone { id: "r1".into(), label: PAGE_ZONE_LABEL.into(), boundary: page, lines });
        }
        ConsolidateMode::Both | ConsolidateMode::Task2Only => {
            let task2 = labels.maps.get(1).expect("zone map present");
            let mut n = 0;
            for (class, polys) in zone_contours(task2, min_area).into_iter().enumerate() {
                let Some(label) = schema.label_of(class) else { continue };
                for boundary in polys {
                    n += 1;
                    let id = format!("r{n}");
                    let lines = if mode == ConsolidateMode::Both {
                        lines_in(img, task1, &boundary, &id, params, min_area)
                    } else {
                        Vec::new()
                    };
                    doc.zones.push(Zone { id, label: label.to_string(), boundary, lines });
                }
            }
        }
    }

    let (ow, oh) = original;
    if (ow, oh) == (w, h) {
        return doc;
    }
    let (sx, sy) = (ow as f64 / w as f64, oh as f64 / h as f64);
    let mut scaled = scale_layout(&doc, sx, sy).expect("positive scale");
    scaled.width = ow;
    scaled.height = oh;
    // Baseline vertices are pixel indices, so map pixel centers rather than corners.
    let center = |v: u32, s: f64, max: u32| (((v as f64 + 0.5) * s - 0.5).round().max(0.0) as u32).min(max - 1);
    for (zs, z) in scaled.zones.iter_mut().zip(&doc.zones) {
        for (ls, l) in zs.lines.iter_mut().zip(&z.lines) {
            let pts = l.baseline.points().iter().map(|p| Point::new(center(p.x, sx, ow), center(p.y, sy, oh))).collect();
            if let Some(b) = Polyline::new(pts) {
                ls.baseline = b;
            }
        }
    }
    scaled
}
