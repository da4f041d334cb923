//! Stage 2 on a single text line: binarize a wobbly stroke with Otsu's
//! threshold, trace its lower envelope and reduce it to a few vertices.
//!
//! `cargo run --example baseline`

use doclayout::geometry::{lower_envelope, otsu, reduce_polyline};
use doclayout::pagexml::Polygon;
use doclayout::raster::Image;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (w, h) = (120u32, 40u32);
    let mut img = Image::filled(w, h, 1, 0.85);
    for x in 10..110 {
        let bottom = 24 + ((x as f64 / 12.0).sin() * 3.0).round() as u32;
        for y in bottom - 8..=bottom {
            img.set(x, y, 0, 0.15);
        }
    }
    let t = otsu(&img);
    println!("threshold level {} (between-class variance {:.1})", t.threshold, t.variance);

    let region = Polygon::rect(0, 0, w, h).expect("non-empty");
    let envelope = lower_envelope(&img, &region)?;
    println!("lower envelope: {} columns", envelope.len());
    for m in [2, 4, 8, 12] {
        let (line, cost) = reduce_polyline(&envelope, m)?;
        let pts: Vec<String> = line.points().iter().map(|p| format!("{},{}", p.x, p.y)).collect();
        println!("m = {m:>2}: cost {cost:>8.2}  {}", pts.join(" "));
    }
    Ok(())
}
