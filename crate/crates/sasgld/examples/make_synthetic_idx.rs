//! Generates the synthetic digit corpus and round-trips it through the
//! big-endian IDX container (the classic 0x0803/0x0801 image and label
//! layout), so the files can feed any tool that reads that format.
//! Output lands in target/idx-demo/.

use sasgld::data_io::{load_image_set, write_idx_images, write_idx_labels};
use sasgld::synthetic::generate_dataset;
use std::path::Path;

fn main() {
    let (train, test) = generate_dataset(1000, 200, 0);
    let dir = Path::new("target/idx-demo");
    std::fs::create_dir_all(dir).unwrap();

    for (name, set) in [("train", &train), ("t10k", &test)] {
        let images = dir.join(format!("{name}-images-idx3-ubyte"));
        let labels = dir.join(format!("{name}-labels-idx1-ubyte"));
        write_idx_images(&set.images, 28, 28, &images).unwrap();
        write_idx_labels(&set.labels, &labels).unwrap();

        let back = load_image_set(&images, &labels).unwrap();
        assert_eq!(back.images, set.images);
        assert_eq!(back.labels, set.labels);

        let mut per_class = [0u32; 10];
        for &l in &set.labels {
            per_class[l as usize] += 1;
        }
        println!(
            "{name}: {} images round-tripped, {} bytes on disk, per-class {:?}",
            set.n(),
            std::fs::metadata(&images).unwrap().len(),
            per_class
        );
    }
}
