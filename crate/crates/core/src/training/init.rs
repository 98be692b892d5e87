use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{ModelDims, ModelParams, Variant};
use crate::numerics::Matrix;

/// Draws every weight from `U[−1/√fan_in, 1/√fan_in]` and zeroes the biases.
///
/// `fan_in` is the length of the vector each weight multiplies: the row count
/// for row-vector weights (`x W`) and the column count for the sensor
/// attention matrices, which act on column vectors.
pub fn init_params(
    seed: u64,
    dims: &ModelDims,
    variant: Variant,
    modality_map: Vec<usize>,
) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(dims, variant, modality_map)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, t) in params.tensors_mut() {
        let leaf = name.rsplit('.').next().unwrap_or(&name);
        if leaf.starts_with("b_") {
            continue;
        }
        let fan_in = if name.starts_with("sensor.") {
            t.cols()
        } else {
            t.rows()
        };
        fill_uniform(&mut rng, t, 1.0 / (fan_in as f64).sqrt());
    }
    Ok(params)
}

fn fill_uniform(rng: &mut ChaCha8Rng, t: &mut Matrix, bound: f64) {
    for v in t.as_mut_slice() {
        *v = rng.random_range(-bound..=bound);
    }
}
