//! The commands behind the binary, driven on small synthetic datasets.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use doclayout::cli::{
    cmd_encode, cmd_eval, cmd_infer, cmd_synth, cmd_train, load_dataset, run, Cli, CliError, GroundTruthClassifier,
    RunConfig,
};
use doclayout::geometry::ConsolidateMode;
use doclayout::metrics::{BootstrapInterval, ScoreReport};
use doclayout::pagexml::{parse_page, serialize_page, PageDocument, Point, Polyline, PAGE_ZONE_LABEL};
use doclayout::raster::Image;

/// A reduced network that trains in well under a second per epoch.
fn small_config(root: &Path) -> RunConfig {
    let text = r#"
        [data]
        train_dir = "data"
        [model]
        channel_scale = 0.03125
        depth = 3
        height = 64
        width = 64
        seed = 3
        [train]
        learning_rate = 0.001
        batch_size = 2
        epochs = 5
        [eval]
        reps = 200
        [synth]
        count = 2
    "#;
    RunConfig::from_toml(text, root).unwrap()
}

fn synth_into(cfg: &RunConfig, dir: &Path, n: u64) {
    cmd_synth(cfg, n, dir).unwrap();
}

fn cli(args: &[&str]) -> i32 {
    run(Cli::parse_from(std::iter::once("doclayout").chain(args.iter().copied())))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn training_lowers_cross_entropy_and_writes_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    synth_into(&cfg, &tmp.path().join("data"), 2);
    let out = tmp.path().join("run");
    let summary = cmd_train(&cfg, &out, None).unwrap();
    assert_eq!(summary.history.len(), 5);
    assert!(summary.best_checkpoint.exists());
    for e in 1..=5 {
        assert!(out.join(format!("checkpoints/epoch_{e:03}.ckpt")).exists());
    }
    let (first, last) = (summary.history[0].ce, summary.history[4].ce);
    assert!(last < first, "ce {first} -> {last}");
    let csv = fs::read_to_string(&summary.metrics_csv).unwrap();
    assert!(csv.starts_with("epoch,l_m,l_a,ce\n"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn training_twice_gives_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path());
    cfg.train.epochs = 2;
    synth_into(&cfg, &tmp.path().join("data"), 2);
    let a = cmd_train(&cfg, &tmp.path().join("a"), None).unwrap();
    let b = cmd_train(&cfg, &tmp.path().join("b"), None).unwrap();
    assert_eq!(fs::read(a.metrics_csv).unwrap(), fs::read(b.metrics_csv).unwrap());
    assert_eq!(fs::read(a.best_checkpoint).unwrap(), fs::read(b.best_checkpoint).unwrap());
}

#[test]
fn empty_dataset_is_an_invalid_invocation() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir_all(tmp.path().join("data/page")).unwrap();
    let cfg = small_config(tmp.path());
    let err = cmd_train(&cfg, &tmp.path().join("run"), None).unwrap_err();
    assert!(matches!(err, CliError::DatasetEmpty(_)));
    assert_eq!(err.exit_code(), 2);

    let config = tmp.path().join("run.toml");
    fs::write(&config, cfg.to_toml()).unwrap();
    let out = tmp.path().join("run");
    assert_eq!(cli(&["train", "--config", path_str(&config), "--out", path_str(&out)]), 2);
}

#[test]
fn bad_config_is_an_invalid_invocation() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.toml");
    fs::write(&config, "[model]\ndepth = 3\nheight = 70\n").unwrap();
    assert_eq!(cli(&["synth", "--config", path_str(&config), "--out", path_str(tmp.path())]), 2);
    fs::write(&config, "[model]\nunknown_key = 1\n").unwrap();
    assert_eq!(cli(&["synth", "--config", path_str(&config), "--out", path_str(tmp.path())]), 2);
}

fn images_of(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir.join("images")).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn ideal_classifier_reproduces_ground_truth_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path());
    cfg.model.height = 1024;
    cfg.model.width = 768;
    let data = tmp.path().join("data");
    synth_into(&cfg, &data, 4);
    let mut ideal = GroundTruthClassifier::from_dataset(&cfg, &data).unwrap();
    let hyp = tmp.path().join("hyp");
    let summary = cmd_infer(&cfg, &mut ideal, &images_of(&data), ConsolidateMode::Both, &hyp).unwrap();
    assert_eq!(summary.written.len(), 4);
    assert!(summary.failed.is_empty());
    let schema = cfg.schema().unwrap();
    for item in load_dataset(&data, &schema).unwrap() {
        let stem = Path::new(&item.doc.image_filename).file_stem().unwrap().to_str().unwrap().to_string();
        let got = parse_page(&fs::read_to_string(hyp.join(format!("{stem}.xml"))).unwrap(), &schema).unwrap();
        assert_eq!(got.zones.len(), item.doc.zones.len(), "{stem}");
        assert_eq!(got.baselines().count(), item.doc.baselines().count(), "{stem}");
    }

    // Scoring the hypotheses against their source is perfect.
    let report = cmd_eval(&cfg, &hyp, &data.join("page"), None).unwrap();
    for (name, ci) in &report.rows {
        assert!(ci.point > 0.99, "{name} = {}", ci.point);
    }
}

#[test]
fn task1_only_emits_one_page_zone() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let data = tmp.path().join("data");
    synth_into(&cfg, &data, 3);
    let mut ideal = GroundTruthClassifier::from_dataset(&cfg, &data).unwrap();
    let hyp = tmp.path().join("hyp");
    let summary = cmd_infer(&cfg, &mut ideal, &[data.join("images")], ConsolidateMode::Task1Only, &hyp).unwrap();
    assert_eq!(summary.written.len(), 3);
    let schema = cfg.schema().unwrap();
    for path in &summary.written {
        let doc = parse_page(&fs::read_to_string(path).unwrap(), &schema).unwrap();
        assert_eq!(doc.zones.len(), 1);
        let z = &doc.zones[0];
        assert_eq!(z.label, PAGE_ZONE_LABEL);
        let bb = z.boundary.bbox();
        assert_eq!((bb.x0, bb.y0, bb.x1, bb.y1), (0, 0, doc.width, doc.height));
    }
}

#[test]
fn unreadable_image_is_skipped_with_partial_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path());
    cfg.train.epochs = 1;
    let data = tmp.path().join("data");
    synth_into(&cfg, &data, 2);
    let broken = data.join("images/page_0002.png");
    fs::write(&broken, b"not an image").unwrap();

    let mut ideal = GroundTruthClassifier::from_dataset(&cfg, &data).unwrap();
    let hyp = tmp.path().join("hyp");
    let summary = cmd_infer(&cfg, &mut ideal, &images_of(&data), ConsolidateMode::Both, &hyp).unwrap();
    assert_eq!(summary.written.len(), 2);
    assert_eq!(summary.failed.len(), 1);
    assert_eq!(summary.failed[0].0, broken);

    // The binary reports the partial failure through its exit code.
    fs::remove_file(&broken).unwrap();
    let run_dir = tmp.path().join("run");
    cmd_train(&cfg, &run_dir, None).unwrap();
    fs::write(&broken, b"not an image").unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(&config, cfg.to_toml()).unwrap();
    let out = tmp.path().join("cli_hyp");
    let ckpt = run_dir.join("best.ckpt");
    let images = data.join("images");
    let code = cli(&[
        "infer",
        "--config",
        path_str(&config),
        "--checkpoint",
        path_str(&ckpt),
        "--mode",
        "both",
        "--out",
        path_str(&out),
        path_str(&images),
    ]);
    assert_eq!(code, 1);
    assert_eq!(fs::read_dir(&out).unwrap().count(), 2);
}

#[test]
fn eval_scores_identity_and_rejects_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let data = tmp.path().join("data");
    synth_into(&cfg, &data, 3);
    let gt = data.join("page");

    let csv = tmp.path().join("report/scores.csv");
    let report = cmd_eval(&cfg, &gt, &gt, Some(&csv)).unwrap();
    assert_eq!(report.rows.len(), 7);
    for (name, ci) in &report.rows {
        assert_eq!((ci.point, ci.lo, ci.hi), (1.0, 1.0, 1.0), "{name}");
    }
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("metric,point,lo,hi"));
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 4));

    let lonely = tmp.path().join("lonely");
    fs::create_dir_all(&lonely).unwrap();
    fs::copy(gt.join("page_0000.xml"), lonely.join("page_0000.xml")).unwrap();
    let err = cmd_eval(&cfg, &lonely, &gt, None).unwrap_err();
    assert!(matches!(err, CliError::PairMismatch(_)));
    assert_eq!(err.exit_code(), 2);
}

/// Writes the ground truth of `data` to `dir` after `edit`ing each document.
fn write_edited(cfg: &RunConfig, data: &Path, dir: &Path, edit: impl Fn(&mut PageDocument)) {
    let schema = cfg.schema().unwrap();
    fs::create_dir_all(dir).unwrap();
    for item in load_dataset(data, &schema).unwrap() {
        let mut doc = item.doc.clone();
        edit(&mut doc);
        let stem = Path::new(&doc.image_filename).file_stem().unwrap().to_str().unwrap().to_string();
        fs::write(dir.join(format!("{stem}.xml")), serialize_page(&doc, &schema)).unwrap();
    }
}

fn f1_of(report: &ScoreReport) -> BootstrapInterval {
    report.rows.iter().find(|(n, _)| n == "surrogate_f1").unwrap().1
}

#[test]
fn disjoint_or_missing_baselines_have_zero_f1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let data = tmp.path().join("data");
    synth_into(&cfg, &data, 2);

    // Every hypothesis baseline moves into the bottom margin, far from all text.
    let far = tmp.path().join("far");
    write_edited(&cfg, &data, &far, |doc| {
        let y = doc.height - 4;
        for line in doc.zones.iter_mut().flat_map(|z| z.lines.iter_mut()) {
            line.baseline = Polyline::new(vec![Point::new(0, y), Point::new(10, y)]).unwrap();
        }
    });
    let f1 = f1_of(&cmd_eval(&cfg, &far, &data.join("page"), None).unwrap());
    assert_eq!((f1.point, f1.lo, f1.hi), (0.0, 0.0, 0.0));

    let empty = tmp.path().join("empty");
    write_edited(&cfg, &data, &empty, |doc| doc.zones.iter_mut().for_each(|z| z.lines.clear()));
    let f1 = f1_of(&cmd_eval(&cfg, &empty, &data.join("page"), None).unwrap());
    assert_eq!((f1.point, f1.lo, f1.hi), (0.0, 0.0, 0.0));
}

#[test]
fn synth_writes_reproducible_parseable_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(cli(&["synth", "--seed", "4", "-n", "10", "--out", path_str(&a)]), 0);
    assert_eq!(cli(&["synth", "--seed", "4", "-n", "10", "--out", path_str(&b)]), 0);
    assert_eq!(images_of(&a).len(), 10);
    assert_eq!(fs::read_dir(a.join("page")).unwrap().count(), 10);
    for dir in ["images", "page"] {
        for entry in fs::read_dir(a.join(dir)).unwrap() {
            let p = entry.unwrap().path();
            let twin = b.join(dir).join(p.file_name().unwrap());
            assert_eq!(fs::read(&p).unwrap(), fs::read(&twin).unwrap(), "{}", p.display());
        }
    }
    let schema = cfg.schema().unwrap();
    let items = load_dataset(&a, &schema).unwrap();
    assert_eq!(items.len(), 10);
    for it in &items {
        let img = Image::load(&it.image).unwrap();
        assert_eq!((img.width, img.height), (it.doc.width, it.doc.height));
    }
}

#[test]
fn encode_dumps_both_label_maps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let data = tmp.path().join("data");
    synth_into(&cfg, &data, 2);
    let out = tmp.path().join("labels");
    let written = cmd_encode(&cfg, &[data.join("page")], &out).unwrap();
    assert_eq!(written.len(), 4);
    let k = cfg.schema().unwrap().num_classes() as u8;
    for (i, p) in written.iter().enumerate() {
        let img = image::open(p).unwrap().to_luma8();
        assert_eq!(img.dimensions(), (64, 64));
        let bound = if i % 2 == 0 { 2 } else { k };
        assert!(img.pixels().all(|px| px.0[0] < bound));
        assert!(img.pixels().any(|px| px.0[0] > 0));
    }
}
