//! Saves a trainer after a few steps, reloads it and shows that both copies
//! continue identically.
//!
//! `cargo run --release --example checkpoint`

use doclayout::net::{load_checkpoint, save_checkpoint, Tensor, TrainConfig, Trainer};
use doclayout::pagexml::ZoneSchema;
use doclayout::raster::{encode_ground_truth, normalize_image, resize_image};
use doclayout::synthdoc::{generate_page, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = TrainConfig { height: 128, width: 128, depth: 4, batch_size: 1, learning_rate: 1e-3, ..TrainConfig::default() };
    let (img, doc) = generate_page(&SynthSpec::default(), 0)?;
    let x = Tensor::stack(&[normalize_image(&resize_image(&img, 128, 128)?)]);
    let y = vec![encode_ground_truth(&doc, &ZoneSchema::ohg(), 128, 128, 1.0)?];

    let mut tr = Trainer::<f32>::new(cfg)?;
    for _ in 0..3 {
        tr.train_step(&x, &y)?;
    }
    let path = std::env::temp_dir().join("doclayout-example.ckpt");
    save_checkpoint(&mut tr, &path)?;
    println!("saved step {} to {} ({} bytes)", tr.step, path.display(), std::fs::metadata(&path)?.len());

    let mut back = load_checkpoint::<f32>(&path)?;
    let a = tr.train_step(&x, &y)?;
    let b = back.train_step(&x, &y)?;
    println!("next step from the original: ce {:.6}; from the reloaded copy: ce {:.6}", a.ce, b.ce);
    assert_eq!(a, b);
    std::fs::remove_file(&path)?;
    Ok(())
}
