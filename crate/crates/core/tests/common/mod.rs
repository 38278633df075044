//! Shared fixtures: a small synthetic IDX dataset and a matching config.

#![allow(dead_code)]

pub mod oracle;

use std::fs;
use std::path::{Path, PathBuf};

use nvmsim::data::{TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use nvmsim::rng::derive_stream;
use rand::Rng;

fn idx_images(images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = vec![0, 0, 8, 3];
    for d in [images.len() as u32, 28, 28] {
        out.extend_from_slice(&d.to_be_bytes());
    }
    for im in images {
        out.extend_from_slice(im);
    }
    out
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, 8, 1];
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// 28x28 images where each digit lights a distinct 6x6 patch, plus sparse noise.
fn synthetic(n: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<u8>) {
    let mut rng = derive_stream(seed, &[]);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let label: u8 = rng.gen_range(0..10);
        let (r0, c0) = (2 + 6 * (label as usize / 4), 2 + 6 * (label as usize % 4));
        let mut im = vec![0u8; 784];
        for r in r0..r0 + 6 {
            for c in c0..c0 + 6 {
                im[r * 28 + c] = 255;
            }
        }
        for _ in 0..20 {
            im[rng.gen_range(0..784)] = 255;
        }
        images.push(im);
        labels.push(label);
    }
    (images, labels)
}

/// Writes train and test IDX files (uncompressed) into `dir`.
pub fn write_synthetic_mnist(dir: &Path, n_train: usize, n_test: usize) {
    fs::create_dir_all(dir).unwrap();
    let (tr, trl) = synthetic(n_train, 1);
    let (te, tel) = synthetic(n_test, 2);
    fs::write(dir.join(TRAIN_IMAGES), idx_images(&tr)).unwrap();
    fs::write(dir.join(TRAIN_LABELS), idx_labels(&trl)).unwrap();
    fs::write(dir.join(TEST_IMAGES), idx_images(&te)).unwrap();
    fs::write(dir.join(TEST_LABELS), idx_labels(&tel)).unwrap();
}

/// A config small enough that every subcommand finishes in well under a second.
pub fn tiny_config(root: &Path) -> PathBuf {
    let data = root.join("mnist");
    write_synthetic_mnist(&data, 80, 40);
    let text = format!(
        r#"master_seed = 5

[data]
mnist_dir = "{}"
n_train = 80
n_test = 40

[rbm]
n_hidden = 8
epochs = 2

[sweep]
sigmas = [0.0, 0.01]
voltages = [1.1, 1.3]
seeds = 2
low_r_ohms = [600.0, 600000.0]

[irdrop]
sizes = [4, 16]
r_cells = [10000.0, 1000000.0]
"#,
        data.display()
    );
    let path = root.join("tiny.toml");
    fs::write(&path, text).unwrap();
    path
}

/// The real MNIST directory, if one is available.
pub fn mnist_dir() -> Option<PathBuf> {
    let candidates = [
        std::env::var_os("NVMSIM_MNIST_DIR").map(PathBuf::from),
        Some(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")),
    ];
    candidates
        .into_iter()
        .flatten()
        .find(|d| d.join(format!("{TRAIN_IMAGES}.gz")).exists() || d.join(TRAIN_IMAGES).exists())
}
