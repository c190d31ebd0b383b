//! Applies flips, rotation and translation to a synthetic image and expands
//! an unbalanced set with class-balancing augmentation.

use gliomanet::data::{augment_set, blob_image, hflip, rotate, synthetic_dataset, translate, vflip, AugmentConfig};
use gliomanet::{Rng, Tensor};

fn centroid(t: &Tensor<f32>) -> (f32, f32) {
    let w = t.shape()[1];
    let (mut sum, mut y, mut x) = (0.0, 0.0, 0.0);
    for (i, &v) in t.data().iter().enumerate() {
        sum += v;
        y += v * (i / w) as f32;
        x += v * (i % w) as f32;
    }
    (y / sum, x / sum)
}

fn main() {
    let mut rng = Rng::new(5);
    let image = blob_image(32, true, &mut rng);
    println!("original      centroid {:?}", centroid(&image));
    println!("hflip         centroid {:?}", centroid(&hflip(&image)));
    println!("vflip         centroid {:?}", centroid(&vflip(&image)));
    println!("rotate 90     centroid {:?}", centroid(&rotate(&image, 90.0)));
    println!("translate 4,2 centroid {:?}", centroid(&translate(&image, 4, 2)));

    let samples = synthetic_dataset(5, 15, 32, 5);
    let config = AugmentConfig {
        hflip: true,
        max_rotation_deg: 10.0,
        balance: true,
        ..AugmentConfig::default()
    };
    let expanded = augment_set(&samples, &mut rng, &config);
    let positives = expanded.iter().filter(|s| s.label == 1).count();
    println!("{} samples -> {} ({positives} positive)", samples.len(), expanded.len());
}
