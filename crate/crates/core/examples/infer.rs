//! Layout inference on page images. Without a checkpoint the pixel classifier
//! is replaced by rasterized ground truth, which isolates Stage 2.
//!
//! `cargo run --release --example infer -- [checkpoint]`

use std::path::Path;

use doclayout::cli::{infer_page, GroundTruthClassifier, PixelClassifier, RunConfig};
use doclayout::geometry::ConsolidateMode;
use doclayout::net::load_checkpoint;
use doclayout::pagexml::serialize_page;
use doclayout::synthdoc::generate_page;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::default();
    let schema = cfg.schema()?;
    let pages: Vec<_> = (0..3).map(|i| generate_page(&cfg.synth.spec, i)).collect::<Result<_, _>>()?;

    let mut classifier: Box<dyn PixelClassifier> = match std::env::args().nth(1) {
        Some(path) => Box::new(load_checkpoint::<f32>(Path::new(&path))?),
        None => Box::new(GroundTruthClassifier {
            pages: pages.iter().map(|(_, d)| (d.image_filename.clone(), d.clone())).collect(),
            schema: schema.clone(),
            size: cfg.working_size(),
            baseline_width: cfg.working_baseline_width(),
        }),
    };
    for mode in [ConsolidateMode::Both, ConsolidateMode::Task1Only, ConsolidateMode::Task2Only] {
        for (img, gt) in &pages {
            let doc = infer_page(classifier.as_mut(), &cfg, &schema, &gt.image_filename, img, mode)?;
            println!(
                "{mode:?} {}: {} zones, {} lines (reference {} zones, {} lines)",
                gt.image_filename,
                doc.zones.len(),
                doc.line_count(),
                gt.zones.len(),
                gt.line_count()
            );
        }
    }
    let (img, gt) = &pages[0];
    let doc = infer_page(classifier.as_mut(), &cfg, &schema, &gt.image_filename, img, ConsolidateMode::Both)?;
    println!("{}", serialize_page(&doc, &schema));
    Ok(())
}
