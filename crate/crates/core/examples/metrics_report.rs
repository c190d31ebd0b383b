//! Builds a precision/recall/F1 report from predicted and true labels.

use gliomanet::metrics;

fn main() -> gliomanet::Result<()> {
    let truths = [1, 1, 1, 1, 0, 0, 0, 0, 0, 1];
    let preds = [1, 1, 1, 0, 0, 0, 0, 1, 0, 1];
    let cm = metrics::confusion(&preds, &truths)?;
    println!("tp {} fp {} fn {} tn {}", cm.tp, cm.fp, cm.fn_, cm.tn);
    let report = metrics::report(&preds, &truths)?;
    print!("{}", report.table(&["no", "yes"]));
    Ok(())
}
