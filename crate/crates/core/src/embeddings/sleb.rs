//! Precomputed contextual vectors.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SLEB" | u32 version = 1 | u32 d
//! repeated until EOF:
//!   u32 doc_id byte length | doc_id UTF-8 | u32 sentence index | u32 n | n·d f64
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::numkernel::Matrix;

pub const SLEB_MAGIC: &[u8; 4] = b"SLEB";
pub const SLEB_VERSION: u32 = 1;

/// Sentence matrices keyed by `(doc_id, sentence index)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecomputedEmbeddings {
    dim: usize,
    entries: BTreeMap<(String, usize), Matrix>,
}

fn format_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        what: "precomputed embedding file",
        offset: offset as u64,
        msg: msg.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(format_err(
                self.pos,
                format!("truncated {what}: need {n} bytes, {} left", self.bytes.len() - self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

impl PrecomputedEmbeddings {
    pub fn new(dim: usize) -> Self {
        PrecomputedEmbeddings {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, doc_id: impl Into<String>, index: usize, m: Matrix) -> Result<()> {
        if m.cols() != self.dim {
            return Err(Error::Dimension {
                op: "precomputed embeddings insert",
                left: m.shape(),
                right: (m.rows(), self.dim),
            });
        }
        if !m.is_finite() {
            return Err(Error::Config("precomputed embeddings must be finite".into()));
        }
        self.entries.insert((doc_id.into(), index), m);
        Ok(())
    }

    pub fn get(&self, doc_id: &str, index: usize) -> Result<&Matrix> {
        self.entries
            .get(&(doc_id.to_string(), index))
            .ok_or_else(|| Error::Missing(format!("precomputed embedding for {doc_id}#{index}")))
    }

    /// Looks up a sentence's matrix and checks its row count.
    pub fn for_sentence(&self, s: &Sentence) -> Result<&Matrix> {
        let m = self.get(&s.doc_id, s.index)?;
        if m.rows() != s.len() {
            return Err(Error::Alignment(format!(
                "{}#{} has {} tokens but {} embedding rows",
                s.doc_id,
                s.index,
                s.len(),
                m.rows()
            )));
        }
        Ok(m)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, usize), &Matrix)> {
        self.entries.iter()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SLEB_MAGIC);
        out.extend_from_slice(&SLEB_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for ((doc, idx), m) in &self.entries {
            out.extend_from_slice(&(doc.len() as u32).to_le_bytes());
            out.extend_from_slice(doc.as_bytes());
            out.extend_from_slice(&(*idx as u32).to_le_bytes());
            out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            for v in m.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != SLEB_MAGIC {
            return Err(format_err(0, "bad magic, expected \"SLEB\""));
        }
        let version = r.u32("version")?;
        if version != SLEB_VERSION {
            return Err(format_err(4, format!("unsupported version {version}")));
        }
        let dim = r.u32("dimension")? as usize;
        let mut out = PrecomputedEmbeddings::new(dim);
        while r.pos < bytes.len() {
            let id_len = r.u32("doc id length")? as usize;
            let id_at = r.pos;
            let doc = std::str::from_utf8(r.take(id_len, "doc id")?)
                .map_err(|_| format_err(id_at, "doc id is not UTF-8"))?
                .to_string();
            let index = r.u32("sentence index")? as usize;
            let n = r.u32("row count")? as usize;
            let count = n
                .checked_mul(dim)
                .and_then(|c| c.checked_mul(8))
                .ok_or_else(|| format_err(r.pos, "row count overflows"))?;
            let body_at = r.pos;
            let body = r.take(count, "matrix data")?;
            let mut data = Vec::with_capacity(n * dim);
            for (i, chunk) in body.chunks_exact(8).enumerate() {
                let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
                if !v.is_finite() {
                    return Err(format_err(body_at + 8 * i, format!("non-finite value {v}")));
                }
                data.push(v);
            }
            let key = (doc, index);
            if out.entries.contains_key(&key) {
                return Err(format_err(id_at, format!("duplicate record {}#{}", key.0, key.1)));
            }
            out.entries.insert(key, Matrix::from_vec(n, dim, data)?);
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::Rng;

    fn sample() -> PrecomputedEmbeddings {
        let mut p = PrecomputedEmbeddings::new(4);
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0, 4.0], [-0.5, 0.25, 1e-300, -7.0]]).unwrap();
        p.insert("d1", 0, m).unwrap();
        p
    }

    #[test]
    fn round_trip() {
        let p = sample();
        let back = PrecomputedEmbeddings::from_bytes(&p.to_bytes()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.get("d1", 0).unwrap().shape(), (2, 4));
        assert!(matches!(back.get("d1", 1), Err(Error::Missing(_))));
    }

    #[test]
    fn exact_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"SLEB");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[4, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[2, 0, 0, 0]);
        assert_eq!(&bytes[16..18], b"d1");
        assert_eq!(&bytes[18..22], &[0, 0, 0, 0]);
        assert_eq!(&bytes[22..26], &[2, 0, 0, 0]);
        assert_eq!(&bytes[26..34], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 26 + 8 * 8);
    }

    #[test]
    fn writers_are_deterministic() {
        let mut rng = Rng::new(9);
        let mats: Vec<Matrix> = (0..5).map(|i| rng.uniform_matrix(i + 1, 3, -1.0, 1.0)).collect();
        let mut a = PrecomputedEmbeddings::new(3);
        let mut b = PrecomputedEmbeddings::new(3);
        for (i, m) in mats.iter().enumerate() {
            a.insert(format!("doc{}", i % 2), i, m.clone()).unwrap();
        }
        for (i, m) in mats.iter().enumerate().rev() {
            b.insert(format!("doc{}", i % 2), i, m.clone()).unwrap();
        }
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn corrupt_inputs() {
        let good = sample().to_bytes();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            PrecomputedEmbeddings::from_bytes(&bad_magic),
            Err(Error::Format { offset: 0, .. })
        ));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(PrecomputedEmbeddings::from_bytes(&bad_version).is_err());

        let mut bad_len = good.clone();
        bad_len[22] = 200;
        assert!(matches!(
            PrecomputedEmbeddings::from_bytes(&bad_len),
            Err(Error::Format { .. })
        ));

        assert!(PrecomputedEmbeddings::from_bytes(&good[..good.len() - 3]).is_err());

        let mut nan = good.clone();
        nan[34..42].copy_from_slice(&f64::NAN.to_le_bytes());
        match PrecomputedEmbeddings::from_bytes(&nan) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 34),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sentence_alignment() {
        let p = sample();
        let ok = Sentence::from_tokens("d1", 0, vec!["a".into(), "b".into()], vec![0, 0]);
        assert!(p.for_sentence(&ok).is_ok());
        let short = Sentence::from_tokens("d1", 0, vec!["a".into()], vec![0]);
        assert!(matches!(p.for_sentence(&short), Err(Error::Alignment(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.sleb");
        sample().save(&path).unwrap();
        assert_eq!(PrecomputedEmbeddings::load(&path).unwrap(), sample());
        assert!(matches!(
            PrecomputedEmbeddings::load(&dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }
}
