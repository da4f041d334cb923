//! Writes a small synthetic dataset (`images/` + `page/`) and prints what each page holds.
//!
//! `cargo run --example synth -- [out_dir] [pages]`

use std::path::PathBuf;

use doclayout::cli::{cmd_synth, RunConfig};
use doclayout::synthdoc::generate_page;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synth".into()));
    let pages: u64 = args.next().map_or(Ok(4), |s| s.parse())?;

    let cfg = RunConfig::default();
    for i in 0..pages {
        let (_, doc) = generate_page(&cfg.synth.spec, i)?;
        let labels: Vec<&str> = doc.zones.iter().map(|z| z.label.as_str()).collect();
        println!("{}: {} lines in zones {labels:?}", doc.image_filename, doc.line_count());
    }
    let written = cmd_synth(&cfg, pages, &out)?;
    println!("wrote {} pages under {}", written.len(), out.display());
    Ok(())
}
