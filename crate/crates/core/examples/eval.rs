//! Scores hypothesis PAGE-XML against ground truth with bootstrap intervals.
//! The hypotheses here are the ground truth with every third line dropped.
//!
//! `cargo run --release --example eval -- [work_dir]`

use std::fs;
use std::path::PathBuf;

use doclayout::cli::{cmd_eval, cmd_synth, RunConfig};
use doclayout::pagexml::{parse_page, serialize_page};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "eval-demo".into()));
    let mut cfg = RunConfig::default();
    cfg.eval.reps = 2000;
    let schema = cfg.schema()?;
    let gt = dir.join("gt");
    cmd_synth(&cfg, 6, &gt)?;

    let hyp = dir.join("hyp");
    fs::create_dir_all(&hyp)?;
    for entry in fs::read_dir(gt.join("page"))? {
        let path = entry?.path();
        let mut doc = parse_page(&fs::read_to_string(&path)?, &schema)?;
        for z in &mut doc.zones {
            let mut i = 0;
            z.lines.retain(|_| {
                i += 1;
                i % 3 != 0
            });
        }
        fs::write(hyp.join(path.file_name().expect("file")), serialize_page(&doc, &schema))?;
    }
    let report = cmd_eval(&cfg, &hyp, &gt.join("page"), Some(&dir.join("report.csv")))?;
    print!("{}", report.to_table());
    Ok(())
}
