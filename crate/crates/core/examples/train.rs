//! Trains the reduced network for a few epochs on freshly generated pages,
//! through the same code path as `doclayout train`.
//!
//! `cargo run --release --example train -- [out_dir] [epochs]`

use std::path::PathBuf;

use doclayout::cli::{cmd_synth, cmd_train, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "train-run".into()));
    let epochs: usize = args.next().map_or(Ok(3), |s| s.parse())?;

    let text = format!(
        "[data]\ntrain_dir = \"data\"\n[train]\nepochs = {epochs}\nbatch_size = 2\nlearning_rate = 0.001\n[augment]\nprobability = 0.5\n"
    );
    let cfg = RunConfig::from_toml(&text, &out)?;
    cmd_synth(&cfg, 4, &out.join("data"))?;
    let summary = cmd_train(&cfg, &out, None)?;
    for e in &summary.history {
        println!("epoch {}: l_m {:.4}  l_a {:.4}  ce {:.4}", e.epoch, e.l_m, e.l_a, e.ce);
    }
    println!("metrics in {}, best model in {}", summary.metrics_csv.display(), summary.best_checkpoint.display());
    Ok(())
}
