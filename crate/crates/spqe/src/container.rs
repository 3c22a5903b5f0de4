//! Named-array parameter container.
//!
//! ```text
//! magic   8 bytes  "SPQEARR\0"
//! version u32 LE   1
//! length  u64 LE   byte length of the JSON index
//! index   JSON     [{"name", "shape", "dtype", "offset", "len"}, ...]
//! data             little-endian arrays; offsets are relative to here
//! ```
//!
//! `dtype` is `"f32"` for everything written by training in single
//! precision, `"f64"` for double-precision runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spqe_core::backbone::{BackboneConfig, BackboneParams};
use spqe_core::Scalar;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SPQEARR\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// Scalars that can be stored in a container.
pub trait Element: Scalar {
    const DTYPE: Dtype;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Element for f32 {
    const DTYPE: Dtype = Dtype::F32;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Element for f64 {
    const DTYPE: Dtype = Dtype::F64;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    name: String,
    shape: Vec<usize>,
    dtype: Dtype,
    offset: usize,
    len: usize,
}

/// One array as read from a container; values are kept as raw bytes until
/// installed so either precision can be requested.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: Dtype,
    bytes: Vec<u8>,
}

impl NamedArray {
    pub fn new<T: Element>(name: impl Into<String>, shape: Vec<usize>, values: &[T]) -> Self {
        let mut bytes = Vec::with_capacity(values.len() * T::DTYPE.size());
        values.iter().for_each(|v| v.write_le(&mut bytes));
        Self {
            name: name.into(),
            shape,
            dtype: T::DTYPE,
            bytes,
        }
    }

    pub fn len(&self) -> usize {
        self.bytes.len() / self.dtype.size()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    /// Values as `T`; errors unless the stored dtype is `T`'s.
    pub fn values<T: Element>(&self) -> Result<Vec<T>> {
        if self.dtype != T::DTYPE {
            return Err(Error::Param {
                name: self.name.clone(),
                message: format!("stored as {:?}, expected {:?}", self.dtype, T::DTYPE),
            });
        }
        Ok(self.bytes.chunks_exact(self.dtype.size()).map(T::read_le).collect())
    }
}

pub fn to_bytes(arrays: &[NamedArray]) -> Vec<u8> {
    let mut offset = 0;
    let index: Vec<IndexEntry> = arrays
        .iter()
        .map(|a| {
            let e = IndexEntry {
                name: a.name.clone(),
                shape: a.shape.clone(),
                dtype: a.dtype,
                offset,
                len: a.len(),
            };
            offset += a.bytes.len();
            e
        })
        .collect();
    let json = serde_json::to_vec(&index).expect("plain data");
    let mut out = Vec::with_capacity(20 + json.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for a in arrays {
        out.extend_from_slice(&a.bytes);
    }
    out
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Vec<NamedArray>> {
    let corrupt = |m: &str| Error::format(path, format!("corrupt parameter container: {m}"));
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(corrupt(&format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let data_start = 20usize.checked_add(n).filter(|&e| e <= bytes.len()).ok_or_else(|| corrupt("index truncated"))?;
    let index: Vec<IndexEntry> =
        serde_json::from_slice(&bytes[20..data_start]).map_err(|e| corrupt(&format!("index: {e}")))?;
    let data = &bytes[data_start..];
    let mut out = Vec::with_capacity(index.len());
    let mut seen = std::collections::HashSet::new();
    for e in index {
        if !seen.insert(e.name.clone()) {
            return Err(corrupt(&format!("duplicate array {}", e.name)));
        }
        if e.shape.iter().product::<usize>() != e.len {
            return Err(corrupt(&format!("array {} has shape {:?} but {} values", e.name, e.shape, e.len)));
        }
        let end = e
            .len
            .checked_mul(e.dtype.size())
            .and_then(|b| e.offset.checked_add(b))
            .filter(|&end| end <= data.len())
            .ok_or_else(|| corrupt(&format!("array {} runs past end of file", e.name)))?;
        out.push(NamedArray {
            name: e.name,
            shape: e.shape,
            dtype: e.dtype,
            bytes: data[e.offset..end].to_vec(),
        });
    }
    Ok(out)
}

pub fn write_container(path: &Path, arrays: &[NamedArray]) -> Result<()> {
    fs::write(path, to_bytes(arrays)).map_err(|e| Error::io(path, e))
}

pub fn read_container(path: &Path) -> Result<Vec<NamedArray>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}

/// Collects arrays from a `visit`-style walker.
pub fn collect<'a, T: Element>(visit: impl FnOnce(&mut dyn FnMut(String, Vec<usize>, &'a [T]))) -> Vec<NamedArray> {
    let mut out = Vec::new();
    visit(&mut |name, shape, values| out.push(NamedArray::new(name, shape, values)));
    out
}

/// Copies arrays into the slots enumerated by a `visit_mut`-style walker.
/// Every slot must be filled by an array of the same name and shape, and
/// every array must land in a slot; the first violation is reported.
pub fn install<'a, T: Element>(
    arrays: Vec<NamedArray>,
    visit_mut: impl FnOnce(&mut dyn FnMut(String, Vec<usize>, &'a mut [T])),
) -> Result<()> {
    let mut by_name: BTreeMap<String, NamedArray> = arrays.into_iter().map(|a| (a.name.clone(), a)).collect();
    let mut first_err: Option<Error> = None;
    visit_mut(&mut |name, shape, slot| {
        if first_err.is_some() {
            return;
        }
        let Some(a) = by_name.remove(&name) else {
            first_err = Some(Error::Param { name, message: "missing from file".into() });
            return;
        };
        if a.shape != shape {
            first_err = Some(Error::Param {
                name,
                message: format!("shape {:?} in file, {:?} expected", a.shape, shape),
            });
            return;
        }
        match a.values::<T>() {
            Ok(v) => slot.copy_from_slice(&v),
            Err(e) => first_err = Some(e),
        }
    });
    if let Some(e) = first_err {
        return Err(e);
    }
    if let Some(name) = by_name.into_keys().next() {
        return Err(Error::Param {
            name,
            message: "unknown array name".into(),
        });
    }
    Ok(())
}

/// Writes backbone parameters.
pub fn save_params<T: Element>(params: &BackboneParams<T>, path: &Path) -> Result<()> {
    write_container(path, &collect(|f| params.visit(f)))
}

/// Reads backbone parameters for `config` from a container.
pub fn load_pretrained<T: Element>(path: &Path, config: &BackboneConfig) -> Result<BackboneParams<T>> {
    config.validate()?;
    let arrays = read_container(path)?;
    let mut params = BackboneParams::<T>::zeros(config);
    install(arrays, |f| params.visit_mut(f))?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip() {
        let arrays = vec![
            NamedArray::new("a", vec![2, 2], &[1.0f32, -2.5, 3.25, f32::MIN_POSITIVE]),
            NamedArray::new("b", vec![3], &[0.1f64, 0.2, 0.3]),
        ];
        let bytes = to_bytes(&arrays);
        assert_eq!(&bytes[..8], MAGIC);
        let back = from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, arrays);
        assert_eq!(back[1].values::<f64>().unwrap(), [0.1, 0.2, 0.3]);
        assert!(back[1].values::<f32>().is_err());
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = to_bytes(&[NamedArray::new("a", vec![4], &[1.0f32; 4])]);
        let p = Path::new("mem");
        assert!(from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        assert!(from_bytes(b"NOTMAGIC", p).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad, p).is_err());
    }
}
