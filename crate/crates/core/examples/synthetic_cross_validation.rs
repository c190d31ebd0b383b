//! Splits a synthetic blob-vs-blank dataset, selects a model by 3-fold
//! cross-validation and scores it on the held-out test set.

use gliomanet::data::{self, split, synthetic_dataset};
use gliomanet::train::{cross_validate, evaluate, TrainConfig};
use gliomanet::{ArchConfig, Rng};

fn main() -> gliomanet::Result<()> {
    let samples = synthetic_dataset(60, 60, 32, 0);
    let parts = split(&data::labels(&samples), 0.2, &mut Rng::new(0))?;
    let train = data::select(&samples, &parts.train);
    let test = data::select(&samples, &parts.test);

    let config = TrainConfig { max_epochs: 30, threads: 3, ..TrainConfig::default() };
    let cv = cross_validate::<f32>(&train, &ArchConfig::reduced(), &config)?;
    for fold in &cv.folds {
        println!(
            "fold {}: best epoch {:>2} ({}), val loss {:.4}, val f1 {:.4}",
            fold.fold, fold.best_epoch, fold.stop_reason, fold.val_loss, fold.val_f1
        );
    }
    println!("selected fold {}", cv.selected_fold);
    let report = evaluate(cv.selected_model(), &test)?;
    print!("{}", report.table(&["blank", "blob"]));
    Ok(())
}
