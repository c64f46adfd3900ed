//! A checkpoint is a directory holding `config.json` and one `<name>.stmt`
//! tensor per named parameter.

use std::fs;
use std::path::Path;

use super::{Float, ModelConfig, ModelError, ModelParams};
use crate::io::json::write_json;
use crate::io::{read_tensor, write_tensor, IoError, Tensor};

const CONFIG_FILE: &str = "config.json";

pub fn save_checkpoint<F: Float>(params: &ModelParams<F>, cfg: &ModelConfig, dir: impl AsRef<Path>) -> Result<(), ModelError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    write_json(cfg, dir.join(CONFIG_FILE))?;
    for t in params.named(cfg) {
        let tensor = Tensor::new(t.shape.clone(), F::into_tensor_data(t.values.to_vec()))?;
        write_tensor(&tensor, dir.join(format!("{}.stmt", t.name)))?;
    }
    Ok(())
}

pub fn load_checkpoint<F: Float>(dir: impl AsRef<Path>) -> Result<(ModelConfig, ModelParams<F>), ModelError> {
    let dir = dir.as_ref();
    let path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&path).map_err(|e| IoError::io(&path, e))?;
    let cfg: ModelConfig = serde_json::from_str(&text).map_err(IoError::from)?;
    cfg.validate()?;
    let mut params = ModelParams::<F>::zeros(&cfg);
    let names: Vec<(String, Vec<usize>)> = params.named(&cfg).into_iter().map(|t| (t.name, t.shape)).collect();
    for (name, shape) in names {
        let tensor = read_tensor(dir.join(format!("{name}.stmt")))?;
        if tensor.shape() != shape.as_slice() {
            return Err(ModelError::ShapeMismatch { expected: shape, got: tensor.shape().to_vec() });
        }
        *params.tensor_mut(&cfg, &name).expect("name from named()") = F::from_tensor(&tensor);
    }
    if !params.all_finite() {
        return Err(ModelError::InvalidConfig("checkpoint holds non-finite parameters".into()));
    }
    Ok((cfg, params))
}
