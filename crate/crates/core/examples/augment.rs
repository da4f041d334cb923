//! Draws a few random affine + elastic deformations of one page and its
//! zone map, and checks that labels stay within their classes.
//!
//! `cargo run --example augment -- [out_dir]`

use std::path::PathBuf;

use doclayout::augment::{augment_sample, AugmentConfig};
use doclayout::pagexml::ZoneSchema;
use doclayout::raster::{encode_ground_truth, resize_image, save_label_map};
use doclayout::synthdoc::{generate_page, SynthSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "augmented".into()));
    std::fs::create_dir_all(&out)?;
    let (img, doc) = generate_page(&SynthSpec::default(), 1)?;
    let small = resize_image(&img, 192, 256)?;
    let labels = encode_ground_truth(&doc, &ZoneSchema::ohg(), 192, 256, 2.0)?;

    let cfg = AugmentConfig { probability: 1.0, ..AugmentConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..4 {
        let (warped, maps) = augment_sample(&small, &labels, &cfg, &mut rng)?;
        let zones = &maps.maps[1];
        let moved = zones.data.iter().zip(&labels.maps[1].data).filter(|(a, b)| a != b).count();
        println!("sample {i}: {moved} of {} zone pixels changed class", zones.data.len());
        warped.save(&out.join(format!("sample{i}.png")))?;
        let mut shown = zones.clone();
        shown.data.iter_mut().for_each(|v| *v *= 36);
        save_label_map(&shown, &out.join(format!("sample{i}_zones.png")))?;
    }
    Ok(())
}
