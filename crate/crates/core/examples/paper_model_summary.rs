//! Prints the layer table of the full-size 256x256 classifier.

use gliomanet::model::summary;
use gliomanet::Model;

fn main() -> gliomanet::Result<()> {
    let model = Model::<f32>::paper(0)?;
    print!("{}", summary(&model));
    Ok(())
}
