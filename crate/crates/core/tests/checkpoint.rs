mod common;

use common::gradcheck::random_targets;
use doclayout::net::checkpoint::{checkpoint_bytes, trainer_from_bytes, CheckpointError, MAGIC};
use doclayout::net::{load_checkpoint, save_checkpoint, Tensor, TrainConfig, Trainer};
use doclayout::raster::LabelMapStack;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> TrainConfig {
    TrainConfig {
        seed: 5,
        batch_size: 2,
        channel_scale: 1.0 / 32.0,
        depth: 3,
        height: 64,
        width: 64,
        task_classes: vec![2, 4],
        learning_rate: 1e-3,
        ..TrainConfig::default()
    }
}

fn batch(seed: u64) -> (Tensor<f32>, Vec<LabelMapStack>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::from_vec(vec![2, 3, 64, 64], (0..2 * 3 * 64 * 64).map(|_| rng.random_range(-1.0..1.0)).collect());
    (x, random_targets(&mut rng, 2, &[2, 4], 64, 64))
}

fn trained(steps: u64) -> Trainer<f32> {
    let mut tr = Trainer::new(small_config()).unwrap();
    for s in 0..steps {
        let (x, y) = batch(s);
        tr.train_step(&x, &y).unwrap();
    }
    tr
}

fn parameters(tr: &mut Trainer<f32>) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = tr.mnet.params().iter().map(|p| p.value.data().iter().map(|v| v.to_bits()).collect()).collect();
    out.extend(tr.anet.params().iter().map(|p| p.value.data().iter().map(|v| v.to_bits()).collect()));
    out
}

#[test]
fn save_and_load_is_bit_identical() {
    let mut tr = trained(2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.ckpt");
    save_checkpoint(&mut tr, &path).unwrap();
    let mut back = load_checkpoint::<f32>(&path).unwrap();
    assert_eq!(parameters(&mut back), parameters(&mut tr));
    assert_eq!(back.step, 2);
    assert_eq!(back.cfg, tr.cfg);
    assert_eq!(checkpoint_bytes(&mut back).unwrap(), std::fs::read(&path).unwrap());
}

#[test]
fn fresh_trainer_round_trips() {
    let mut tr = Trainer::<f32>::new(small_config()).unwrap();
    let bytes = checkpoint_bytes(&mut tr).unwrap();
    let mut back = trainer_from_bytes::<f32>(&bytes).unwrap();
    assert_eq!(checkpoint_bytes(&mut back).unwrap(), bytes);
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let mut straight = trained(4);
    let mut first = trained(2);
    let mut resumed = trainer_from_bytes::<f32>(&checkpoint_bytes(&mut first).unwrap()).unwrap();
    for s in 2..4 {
        let (x, y) = batch(s);
        resumed.train_step(&x, &y).unwrap();
    }
    assert_eq!(parameters(&mut resumed), parameters(&mut straight));
}

#[test]
fn truncated_file_fails_the_checksum() {
    let bytes = checkpoint_bytes(&mut trained(1)).unwrap();
    for cut in [bytes.len() - 1, bytes.len() / 2, 12] {
        assert!(matches!(trainer_from_bytes::<f32>(&bytes[..cut]), Err(CheckpointError::ChecksumMismatch)));
    }
}

#[test]
fn flipped_byte_fails_the_checksum() {
    let mut bytes = checkpoint_bytes(&mut trained(1)).unwrap();
    let i = bytes.len() / 3;
    bytes[i] ^= 0x10;
    assert!(matches!(trainer_from_bytes::<f32>(&bytes), Err(CheckpointError::ChecksumMismatch)));
}

#[test]
fn foreign_file_has_bad_magic() {
    let mut bytes = checkpoint_bytes(&mut trained(0)).unwrap();
    bytes[0] = b'X';
    assert!(matches!(trainer_from_bytes::<f32>(&bytes), Err(CheckpointError::BadMagic)));
    assert!(matches!(trainer_from_bytes::<f32>(b"PK\x03\x04"), Err(CheckpointError::BadMagic)));
}

#[test]
fn newer_version_is_refused() {
    let mut bytes = checkpoint_bytes(&mut trained(0)).unwrap();
    let body = bytes.len() - 4;
    bytes[MAGIC.len()..MAGIC.len() + 4].copy_from_slice(&2u32.to_le_bytes());
    let crc = crc32fast::hash(&bytes[..body]);
    bytes[body..].copy_from_slice(&crc.to_le_bytes());
    assert!(matches!(trainer_from_bytes::<f32>(&bytes), Err(CheckpointError::VersionUnsupported(2))));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_checkpoint::<f32>(&dir.path().join("none.ckpt")), Err(CheckpointError::Io(_))));
}
