//! Overfits the reduced network on ten synthetic pages, first without and then
//! with the adversarial term, and reports training-set scores.
//!
//! `cargo run --release --example overfit -- [steps] [learning_rate] [batch]`

use std::time::Instant;

use doclayout::cli::{prepare_sample, score_classifier, set_prior_weights, train_epochs, RunConfig, Sample};
use doclayout::augment::AugmentConfig;
use doclayout::geometry::ConsolidateMode;
use doclayout::net::Trainer;
use doclayout::synthdoc::{generate_page, SynthSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let steps: usize = args.first().map_or(Ok(400), |s| s.parse())?;
    let lr: f64 = args.get(1).map_or(Ok(1e-3), |s| s.parse())?;
    let batch: usize = args.get(2).map_or(Ok(2), |s| s.parse())?;

    let mut cfg = RunConfig::default();
    cfg.train.learning_rate = lr;
    cfg.train.batch_size = batch;
    let schema = cfg.schema()?;
    let spec = SynthSpec::default();
    let pages: Vec<_> = (0..10).map(|i| generate_page(&spec, i)).collect::<Result<_, _>>()?;
    let samples: Vec<Sample> =
        pages.iter().map(|(img, doc)| prepare_sample(&cfg, &schema, img, doc)).collect::<Result<_, _>>()?;
    let no_augment = AugmentConfig { probability: 0.0, ..AugmentConfig::default() };
    let epochs = steps.div_ceil(samples.len().div_ceil(batch));

    for lambda in [0.0, 0.01] {
        cfg.model.lambda = lambda;
        let start = Instant::now();
        let mut tr = Trainer::<f32>::new(cfg.train_config())?;
        set_prior_weights(&mut tr, &samples)?;
        let history = train_epochs(&mut tr, &samples, &no_augment, epochs, |_, e| {
            if e.epoch % 10 == 0 {
                println!("  epoch {:>3}  l_m {:.4}  l_a {:.4}  ce {:.4}", e.epoch, e.l_m, e.l_a, e.ce);
            }
            Ok(())
        })?;
        let last = history.last().expect("at least one epoch");
        let scores = score_classifier(&mut tr, &cfg, &pages, ConsolidateMode::Both)?;
        println!(
            "lambda {lambda}: {} steps in {:.1}s, final ce {:.4}, task-2 pixel acc {:.4}, baseline P {:.4} R {:.4} F1 {:.4}",
            tr.step,
            start.elapsed().as_secs_f64(),
            last.ce,
            scores.zones.pixel_acc,
            scores.baselines.precision,
            scores.baselines.recall,
            scores.baselines.f1
        );
    }
    Ok(())
}
