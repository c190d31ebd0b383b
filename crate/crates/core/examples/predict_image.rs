//! Trains briefly on synthetic images, writes one to disk as a PNG, and
//! classifies the file.

use gliomanet::data::{synthetic_dataset, write_image_dir};
use gliomanet::optim::LrSchedule;
use gliomanet::train::{fit, predict, TrainConfig};
use gliomanet::{ArchConfig, Model};

fn main() -> gliomanet::Result<()> {
    let samples = synthetic_dataset(12, 12, 32, 3);
    let mut model = Model::<f32>::build(&ArchConfig::reduced(), 3)?;
    let config = TrainConfig {
        max_epochs: 40,
        batch_size: 4,
        schedule: LrSchedule::Constant { initial: 1e-3 },
        ..TrainConfig::default()
    };
    fit(&mut model, &samples, &samples, &config)?;

    let dir = std::env::temp_dir().join("gliomanet-predict-example");
    let unseen = synthetic_dataset(1, 1, 32, 99);
    write_image_dir(&dir, &unseen)?;
    for sample in &unseen {
        let path = dir.join(&sample.path);
        let p = predict(&model, &path)?;
        println!("{}: label {} (true {}), p = [{:.4}, {:.4}]", path.display(), p.label, sample.label, p.probs[0], p.probs[1]);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
