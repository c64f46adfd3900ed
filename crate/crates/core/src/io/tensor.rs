//! Binary tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size        field
//! 0       4           magic "STMT"
//! 4       1           version (1)
//! 5       1           dtype code: 1 = f32, 2 = f64, 3 = u16
//! 6       4           ndim (u32, 1..=5)
//! 10      8 * ndim    dims (u64 each)
//! ...     prod(dims) * width   row-major payload
//! ```

use std::fs;
use std::path::Path;

use super::IoError;

pub const MAGIC: &[u8; 4] = b"STMT";
pub const VERSION: u8 = 1;
pub const MAX_NDIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
    U16,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 1,
            DType::F64 => 2,
            DType::U16 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(DType::F32),
            2 => Some(DType::F64),
            3 => Some(DType::U16),
            _ => None,
        }
    }

    pub fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
            DType::U16 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U16(Vec<u16>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U16(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
            TensorData::U16(_) => DType::U16,
        }
    }
}

/// Dense row-major tensor as stored in a TensorFile.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: TensorData) -> Result<Self, IoError> {
        if shape.is_empty() || shape.len() > MAX_NDIM {
            return Err(IoError::BadRank(shape.len()));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(IoError::ShapeMismatch {
                shape,
                len: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn from_f32(shape: Vec<usize>, values: Vec<f32>) -> Result<Self, IoError> {
        Self::new(shape, TensorData::F32(values))
    }

    pub fn from_f64(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, IoError> {
        Self::new(shape, TensorData::F64(values))
    }

    pub fn from_u16(shape: Vec<usize>, values: Vec<u16>) -> Result<Self, IoError> {
        Self::new(shape, TensorData::U16(values))
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Values widened to f64 regardless of storage type.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::U16(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn as_u16(&self) -> Option<&[u16]> {
        match &self.data {
            TensorData::U16(v) => Some(v),
            _ => None,
        }
    }

    pub fn into_parts(self) -> (Vec<usize>, TensorData) {
        (self.shape, self.data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header_len = 10 + 8 * self.shape.len();
        let mut out = Vec::with_capacity(header_len + self.len() * self.dtype().width());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.dtype().code());
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IoError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(IoError::BadMagic { offset: 0 });
        }
        let header = |offset: usize, len: usize| -> Result<&[u8], IoError> {
            bytes
                .get(offset..offset + len)
                .ok_or(IoError::TruncatedPayload { offset: bytes.len() })
        };
        let version = header(4, 1)?[0];
        if version != VERSION {
            return Err(IoError::UnsupportedVersion { offset: 4, version });
        }
        let code = header(5, 1)?[0];
        let dtype = DType::from_code(code).ok_or(IoError::UnsupportedDtype { offset: 5, code })?;
        let ndim = u32::from_le_bytes(header(6, 4)?.try_into().unwrap()) as usize;
        if ndim == 0 || ndim > MAX_NDIM {
            return Err(IoError::BadRank(ndim));
        }
        let mut shape = Vec::with_capacity(ndim);
        for k in 0..ndim {
            let raw = u64::from_le_bytes(header(10 + 8 * k, 8)?.try_into().unwrap());
            shape.push(usize::try_from(raw).map_err(|_| IoError::BadRank(ndim))?);
        }
        let start = 10 + 8 * ndim;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(IoError::TruncatedPayload { offset: start })?;
        let payload_len = count
            .checked_mul(dtype.width())
            .ok_or(IoError::TruncatedPayload { offset: start })?;
        let available = bytes.len() - start.min(bytes.len());
        if available < payload_len {
            return Err(IoError::TruncatedPayload {
                offset: start + available,
            });
        }
        if available > payload_len {
            return Err(IoError::TrailingBytes {
                offset: start + payload_len,
            });
        }
        let payload = &bytes[start..];
        let data = match dtype {
            DType::F32 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DType::F64 => TensorData::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DType::U16 => TensorData::U16(
                payload
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        };
        Tensor::new(shape, data)
    }
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor, IoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    Tensor::from_bytes(&bytes)
}

pub fn write_tensor(tensor: &Tensor, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    if tensor.is_empty() {
        return Err(IoError::EmptyTensor);
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| IoError::io(parent, e))?;
        }
    }
    fs::write(path, tensor.to_bytes()).map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bytes_2x2() -> Vec<u8> {
        let mut b = b"STMT".to_vec();
        b.push(1);
        b.push(1);
        b.extend_from_slice(&2u32.to_le_bytes());
        b.extend_from_slice(&2u64.to_le_bytes());
        b.extend_from_slice(&2u64.to_le_bytes());
        for v in [1.0f32, 2.0, 3.0, 4.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn decodes_hand_built_header() {
        let t = Tensor::from_bytes(&bytes_2x2()).unwrap();
        assert_eq!(t.shape(), &[2, 2]);
        assert_eq!(t.data(), &TensorData::F32(vec![1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn file_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.stmt");
        let b = dir.path().join("b.stmt");
        fs::write(&a, bytes_2x2()).unwrap();
        write_tensor(&read_tensor(&a).unwrap(), &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn truncation_is_reported_with_offset() {
        let mut b = bytes_2x2();
        b.truncate(b.len() - 4);
        match Tensor::from_bytes(&b) {
            Err(IoError::TruncatedPayload { offset }) => assert_eq!(offset, b.len()),
            other => panic!("expected TruncatedPayload, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_dtype() {
        let mut b = bytes_2x2();
        b[0] = b'X';
        assert!(matches!(Tensor::from_bytes(&b), Err(IoError::BadMagic { offset: 0 })));
        let mut b = bytes_2x2();
        b[5] = 9;
        assert!(matches!(
            Tensor::from_bytes(&b),
            Err(IoError::UnsupportedDtype { offset: 5, code: 9 })
        ));
    }

    #[test]
    fn round_trips_listed_shapes() {
        let dir = tempfile::tempdir().unwrap();
        for shape in [vec![1], vec![3, 224, 224], vec![5, 7, 7, 64]] {
            let n: usize = shape.iter().product();
            let t = Tensor::from_f32(shape.clone(), (0..n).map(|i| i as f32 * 0.5 - 3.0).collect()).unwrap();
            let p = dir.path().join("t.stmt");
            write_tensor(&t, &p).unwrap();
            assert_eq!(read_tensor(&p).unwrap(), t);
        }
    }

    #[test]
    fn empty_tensor_is_rejected_on_write() {
        let t = Tensor::from_f32(vec![0], vec![]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(write_tensor(&t, dir.path().join("x")), Err(IoError::EmptyTensor)));
    }

    fn arb_tensor() -> impl Strategy<Value = Tensor> {
        (prop::collection::vec(1usize..4, 1..=5), 0u8..3).prop_flat_map(|(shape, code)| {
            let n: usize = shape.iter().product();
            let data = match code {
                0 => prop::collection::vec(any::<f32>(), n).prop_map(TensorData::F32).boxed(),
                1 => prop::collection::vec(any::<f64>(), n).prop_map(TensorData::F64).boxed(),
                _ => prop::collection::vec(any::<u16>(), n).prop_map(TensorData::U16).boxed(),
            };
            data.prop_map(move |d| Tensor::new(shape.clone(), d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn bytes_round_trip_bit_exact(t in arb_tensor()) {
            let bytes = t.to_bytes();
            let back = Tensor::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.shape(), t.shape());
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
