//! Zone segmentation scores from a confusion matrix, baseline precision and
//! recall, and a page-level bootstrap interval.
//!
//! `cargo run --example metrics`

use doclayout::metrics::{baseline_prf, bootstrap_ci, confusion, seg_scores};
use doclayout::pagexml::{Point, Polyline};
use doclayout::raster::LabelMap;

fn line(y: u32, x0: u32, x1: u32) -> Polyline {
    Polyline::new(vec![Point::new(x0, y), Point::new(x1, y)]).expect("two points")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut gt = LabelMap::zeros(2, 3, 8, 8);
    let mut pred = LabelMap::zeros(2, 3, 8, 8);
    for y in 0..8 {
        for x in 0..8 {
            gt.set(x, y, if x < 4 { 1 } else if y < 2 { 2 } else { 0 });
            pred.set(x, y, if x < 5 { 1 } else { 0 });
        }
    }
    let m = confusion(&pred, &gt, 3)?;
    let s = seg_scores(&m)?;
    println!("confusion (rows = reference) {:?}", m.counts);
    println!("pixel acc {:.3}  mean acc {:.3}  mean IU {:.3}  f.w. IU {:.3}", s.pixel_acc, s.mean_acc, s.mean_iu, s.fw_iu);

    let truth = [line(100, 50, 600), line(160, 50, 600), line(220, 50, 600)];
    let found = [line(102, 60, 590), line(158, 300, 600)];
    let b = baseline_prf(&found, &truth);
    println!("baselines: P {:.3}  R {:.3}  F1 {:.3}", b.precision, b.recall, b.f1);

    let per_page = [0.91, 0.88, 0.97, 0.93, 0.79, 0.95, 0.90, 0.86];
    let mean = |s: &[&f64]| s.iter().copied().sum::<f64>() / s.len() as f64;
    let ci = bootstrap_ci(&per_page, mean, 10_000, 0.95, 1)?;
    println!("mean page F1 {:.3}, 95% interval [{:.3}, {:.3}]", ci.point, ci.lo, ci.hi);
    Ok(())
}
