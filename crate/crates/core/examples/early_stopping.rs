//! Feeds a validation-loss curve through the early-stopping rule.

use gliomanet::train::{EarlyStopConfig, EarlyStopping};

fn main() {
    let losses = [0.69, 0.52, 0.41, 0.405, 0.4095, 0.41, 0.43, 0.40, 0.44, 0.45, 0.47, 0.46, 0.50];
    let mut es = EarlyStopping::new(EarlyStopConfig { patience: 4, ..EarlyStopConfig::default() });
    for (i, &loss) in losses.iter().enumerate() {
        let improved = es.observe(loss);
        println!("epoch {:>2}  val_loss {loss:.4}  {}", i + 1, if improved { "best" } else { "" });
        if es.should_stop() {
            println!("stopping after epoch {}; restoring epoch {}", i + 1, es.best_epoch());
            break;
        }
    }
}
