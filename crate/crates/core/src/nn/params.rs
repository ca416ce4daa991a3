use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorEntry {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Named tensors packed into one contiguous `f64` buffer.
///
/// Values are kept exactly representable in `f32` (see [`quantize_f32`]) so
/// that checkpoints, which store `f32`, round-trip bit-exactly.
///
/// [`quantize_f32`]: ParamSet::quantize_f32
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<TensorEntry>,
    data: Vec<f64>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a zero tensor and returns its offset.
    pub fn alloc(&mut self, name: &str, shape: &[usize]) -> usize {
        assert!(self.entry(name).is_none(), "duplicate tensor `{name}`");
        let offset = self.data.len();
        let entry = TensorEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset,
        };
        self.data.resize(offset + entry.numel(), 0.0);
        self.entries.push(entry);
        offset
    }

    pub fn entries(&self) -> &[TensorEntry] {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> Option<&TensorEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let e = self.entry(name)?;
        Some(&self.data[e.offset..e.offset + e.numel()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let e = self.entry(name)?.clone();
        Some(&mut self.data[e.offset..e.offset + e.numel()])
    }

    /// Sets every element of the named tensor to zero. Returns false when no
    /// such tensor exists.
    pub fn zero_tensor(&mut self, name: &str) -> bool {
        match self.tensor_mut(name) {
            Some(t) => {
                t.fill(0.0);
                true
            }
            None => false,
        }
    }

    /// Rounds every value to the nearest `f32`.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.data {
            *v = f64::from(*v as f32);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// SHA-256 over names, shapes and the little-endian value bytes.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.name.as_bytes());
            for d in &e.shape {
                h.update((*d as u64).to_le_bytes());
            }
        }
        for v in &self.data {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub(crate) fn same_layout(&self, other: &ParamSet) -> bool {
        self.entries == other.entries
    }

    pub(crate) fn from_parts(entries: Vec<TensorEntry>, data: Vec<f64>) -> Self {
        Self { entries, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alloc_and_lookup() {
        let mut p = ParamSet::new();
        assert_eq!(p.alloc("a", &[2, 3]), 0);
        assert_eq!(p.alloc("b", &[4]), 6);
        assert_eq!(p.len(), 10);
        p.tensor_mut("b").unwrap()[1] = 2.5;
        assert_eq!(p.values()[7], 2.5);
        assert!(p.zero_tensor("b"));
        assert!(!p.zero_tensor("c"));
        assert_eq!(p.tensor("b").unwrap(), &[0.0; 4]);
    }

    #[test]
    fn hash_tracks_values() {
        let mut p = ParamSet::new();
        p.alloc("a", &[2]);
        let h0 = p.content_hash();
        p.values_mut()[0] = 1.0;
        assert_ne!(h0, p.content_hash());
    }
}
