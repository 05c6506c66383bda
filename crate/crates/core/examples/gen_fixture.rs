//! Generate a synthetic bright-square image dataset (pixmaps + attribute
//! file) for trying the pipeline without a real dataset.
//!
//! Usage: gen_fixture <out-dir> [n-images] [side] [seed]

use std::path::PathBuf;

fn main() {
    let mut args = std::env::args().skip(1);
    let dir: PathBuf = args.next().expect("usage: gen_fixture <out-dir> [n] [side] [seed]").into();
    let n: usize = args.next().map(|s| s.parse().expect("n")).unwrap_or(256);
    let side: usize = args.next().map(|s| s.parse().expect("side")).unwrap_or(16);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(17);

    std::fs::create_dir_all(&dir).expect("create output dir");
    let square = (side / 2).max(1);
    facekit::synthetic::write_square_dataset(&dir, n, (3, side, side), square, seed, "Bright_Square")
        .expect("write dataset");
    println!(
        "wrote {n} {side}x{side} images and attr.txt (attribute 'Bright_Square') to {}",
        dir.display()
    );
}
