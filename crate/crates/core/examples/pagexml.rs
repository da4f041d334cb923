//! Builds a layout by hand, writes it as PAGE-XML, parses it back and
//! rescales it to another resolution.
//!
//! `cargo run --example pagexml`

use doclayout::pagexml::{parse_page, scale_layout, serialize_page, PageDocument, Point, Polygon, Polyline, TextLine, Zone, ZoneSchema};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = ZoneSchema::ohg();
    let mut doc = PageDocument::new("folio_12r.png", 768, 1024);
    let lines = (0..3)
        .map(|i| TextLine {
            id: format!("r1_l{}", i + 1),
            baseline: Polyline::new(vec![Point::new(80, 200 + 60 * i), Point::new(680, 204 + 60 * i)]).expect("two points"),
        })
        .collect();
    doc.zones.push(Zone { id: "r1".into(), label: "$par".into(), boundary: Polygon::rect(64, 150, 704, 400).expect("box"), lines });
    doc.zones.push(Zone { id: "r2".into(), label: "$pag".into(), boundary: Polygon::rect(640, 8, 704, 56).expect("box"), lines: vec![] });

    let xml = serialize_page(&doc, &schema);
    println!("{xml}");
    let back = parse_page(&xml, &schema)?;
    assert_eq!(back, doc.in_reading_order());

    let half = scale_layout(&back, 0.5, 0.5)?;
    let first = half.baselines().next().expect("three lines");
    println!("at half size the first baseline is {:?}", first.points());
    Ok(())
}
