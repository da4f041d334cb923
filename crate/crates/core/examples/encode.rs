//! Rasterizes the ground truth of a synthetic page into the two label maps
//! (baselines, zones) and saves them as indexed PNGs next to the page image.
//!
//! `cargo run --example encode -- [out_dir]`

use std::path::PathBuf;

use doclayout::pagexml::ZoneSchema;
use doclayout::raster::{encode_ground_truth, save_label_map};
use doclayout::synthdoc::{generate_page, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "encoded".into()));
    std::fs::create_dir_all(&out)?;
    let schema = ZoneSchema::ohg();
    let (img, doc) = generate_page(&SynthSpec::default(), 0)?;
    img.save(&out.join("page.png"))?;

    let maps = encode_ground_truth(&doc, &schema, 192, 256, 2.0)?;
    for (t, m) in maps.maps.iter().enumerate() {
        let histogram: Vec<usize> = (0..m.num_classes as u8).map(|c| m.count(c)).collect();
        println!("task {}: pixels per class {histogram:?}", t + 1);
        // Class indices are tiny; stretch them so the dump is visible.
        let mut shown = m.clone();
        let step = 255 / (m.num_classes as u8 - 1);
        shown.data.iter_mut().for_each(|v| *v *= step);
        save_label_map(&shown, &out.join(format!("task{}.png", t + 1)))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
