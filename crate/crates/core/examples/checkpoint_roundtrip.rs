//! Saves a model to a checkpoint directory, loads it back and confirms the
//! outputs are bit-for-bit identical.

use gliomanet::{ArchConfig, Model, Rng, Tensor};

fn main() -> gliomanet::Result<()> {
    let dir = std::env::temp_dir().join("gliomanet-checkpoint-example");
    let model = Model::<f32>::build(&ArchConfig::reduced(), 42)?;
    model.save(&dir)?;
    let loaded = Model::<f32>::load(&dir)?;

    let x = Tensor::<f32>::rand_uniform(&mut Rng::new(7), model.input_shape(), 0.0, 1.0)?;
    let (a, b) = (model.infer(&x)?, loaded.infer(&x)?);
    let same = a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits());
    println!("saved to {}", dir.display());
    println!("probabilities {:?} vs {:?}: identical = {same}", a.data(), b.data());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
