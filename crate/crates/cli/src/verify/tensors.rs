use attnmem_core::io::{read_tensor, write_tensor};
use attnmem_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ensure, Outcome};

fn random_tensor(rng: &mut ChaCha8Rng, dtype: usize, shape: Vec<usize>) -> Tensor {
    let n: usize = shape.iter().product();
    match dtype {
        0 => Tensor::from_f32(shape, (0..n).map(|_| rng.random_range(-1e3f32..1e3)).collect()),
        1 => Tensor::from_f64(shape, (0..n).map(|_| rng.random::<f64>() * 1e6 - 5e5).collect()),
        _ => Tensor::from_u16(shape, (0..n).map(|_| rng.random()).collect()),
    }
    .expect("shape matches payload")
}

pub fn round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut shapes: Vec<Vec<usize>> = vec![vec![1], vec![3, 224, 224], vec![5, 7, 7, 64]];
    for ndim in 1..=5 {
        shapes.push((0..ndim).map(|_| rng.random_range(1..5)).collect());
    }
    let mut checked = 0;
    for shape in &shapes {
        for dtype in 0..3 {
            let t = random_tensor(&mut rng, dtype, shape.clone());
            let bytes = t.to_bytes();
            let back = Tensor::from_bytes(&bytes).map_err(|e| e.to_string())?;
            ensure(back.to_bytes() == bytes && back == t, || format!("in-memory round trip differs for {shape:?}"))?;
            let path = dir.path().join(format!("t{checked}.stmt"));
            write_tensor(&t, &path).map_err(|e| e.to_string())?;
            let disk = read_tensor(&path).map_err(|e| e.to_string())?;
            ensure(disk == t, || format!("disk round trip differs for {shape:?}"))?;
            checked += 1;
        }
    }
    ensure(Tensor::from_bytes(b"NOPE\x01\x01").is_err(), || "bad magic accepted".into())?;
    Ok(format!("{checked} tensors byte-identical after write and read"))
}
