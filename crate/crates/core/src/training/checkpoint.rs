//! Model checkpoints.
//!
//! ```text
//! "SLCK" | u32 version | u64 payload length | payload | u32 CRC-32 of payload
//!
//! payload:
//!   str config (key=value lines)
//!   u32 class count,  str × count
//!   u32 vocab size,   str × size        (ids in order, reserved ones included)
//!   u32 epoch | f64 dev F
//!   u32 param count,  { str name | u32 rows | u32 cols | f64 × rows·cols } × count
//!
//! str = u32 byte length + UTF-8; all integers and floats little-endian.
//! ```

use std::io::Write as _;
use std::path::Path;

use crate::corpus::{TagScheme, Vocabulary};
use crate::error::{Error, Result};
use crate::numkernel::{Matrix, Parameterized, Rng};

use super::config::TrainConfig;
use super::model::Model;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SLCK";
pub const CHECKPOINT_VERSION: u32 = 1;

const HEADER_LEN: usize = 16;

/// A model plus the training state stored next to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub epoch: usize,
    pub dev_f: f64,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

fn format_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        offset: offset as u64,
        msg: msg.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    base: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(format_err(self.base + self.pos, "payload ends early"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let at = self.base + self.pos;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| format_err(at, "string is not UTF-8"))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let m = &self.model;
        let mut payload = Vec::new();
        put_str(&mut payload, &m.config.to_kv());
        put_u32(&mut payload, m.scheme.num_classes() as u32);
        for c in m.scheme.classes() {
            put_str(&mut payload, c);
        }
        put_u32(&mut payload, m.vocab.len() as u32);
        for t in m.vocab.tokens() {
            put_str(&mut payload, t);
        }
        put_u32(&mut payload, self.epoch as u32);
        payload.extend_from_slice(&self.dev_f.to_le_bytes());
        let params = m.params();
        put_u32(&mut payload, params.len() as u32);
        for p in params {
            put_str(&mut payload, &p.name);
            put_u32(&mut payload, p.value.rows() as u32);
            put_u32(&mut payload, p.value.cols() as u32);
            for v in p.value.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut out = Vec::with_capacity(payload.len() + HEADER_LEN + 4);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        put_u32(&mut out, crc32fast::hash(&payload));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        if bytes.len() < HEADER_LEN {
            return Err(format_err(0, "file shorter than header"));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(format_err(0, "bad magic, expected \"SLCK\""));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(format_err(4, format!("unsupported version {version}")));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let expected = (HEADER_LEN as u64).checked_add(len).and_then(|v| v.checked_add(4));
        if expected != Some(bytes.len() as u64) {
            return Err(format_err(
                8,
                format!("payload length {len} does not match file size {}", bytes.len()),
            ));
        }
        let len = len as usize;
        let payload = &bytes[HEADER_LEN..HEADER_LEN + len];
        let stored = u32::from_le_bytes(bytes[HEADER_LEN + len..].try_into().expect("4 bytes"));
        let actual = crc32fast::hash(payload);
        if stored != actual {
            return Err(format_err(
                HEADER_LEN + len,
                format!("checksum mismatch: stored {stored:08x}, computed {actual:08x}"),
            ));
        }

        let mut r = Reader {
            bytes: payload,
            pos: 0,
            base: HEADER_LEN,
        };
        let config = TrainConfig::from_kv(&r.str()?)?;
        let n_classes = r.u32()? as usize;
        let classes = (0..n_classes).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let scheme = TagScheme::new(&classes)?;
        let n_vocab = r.u32()? as usize;
        let tokens = (0..n_vocab).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let vocab = Vocabulary::from_tokens(tokens.iter().skip(2).cloned());
        if vocab.tokens() != tokens.as_slice() {
            return Err(format_err(HEADER_LEN, "vocabulary block is inconsistent"));
        }
        let epoch = r.u32()? as usize;
        let dev_f = r.f64()?;

        // Build the skeleton, then overwrite every parameter in order.
        let mut model = Model::new(config, vocab, scheme, &mut Rng::new(0))?;
        let n_params = r.u32()? as usize;
        let mut params = model.params_mut();
        if n_params != params.len() {
            return Err(format_err(
                HEADER_LEN + r.pos,
                format!("{n_params} parameter blocks, configuration implies {}", params.len()),
            ));
        }
        for p in params.iter_mut() {
            let at = HEADER_LEN + r.pos;
            let name = r.str()?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            if name != p.name || (rows, cols) != p.value.shape() {
                return Err(format_err(
                    at,
                    format!(
                        "parameter {name} {rows}x{cols} where {} {:?} was expected",
                        p.name,
                        p.value.shape()
                    ),
                ));
            }
            let data = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            p.value = Matrix::from_vec(rows, cols, data)?;
        }
        drop(params);
        if r.pos != payload.len() {
            return Err(format_err(HEADER_LEN + r.pos, "trailing bytes in payload"));
        }
        Ok(Checkpoint { model, epoch, dev_f })
    }

    /// Writes to a temporary file next to `path`, then renames it over.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let write = || -> std::io::Result<()> {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
            std::fs::rename(&tmp, path)
        };
        write().map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            Error::io(path, e)
        })
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;

    fn checkpoint() -> Checkpoint {
        let config = TrainConfig {
            embedding_dim: 6,
            lstm_dim: 3,
            enc_hidden_dim: 6,
            num_heads: 2,
            key_dim: 2,
            val_dim: 2,
            encoder_blocks: 1,
            max_len: 32,
            crf_constraints: true,
            ..TrainConfig::default()
        };
        let vocab = Vocabulary::from_tokens(["a", "b", "PDMS", "acid"]);
        let mut model = Model::new(config, vocab, TagScheme::chemdner(), &mut Rng::new(5)).unwrap();
        model.transitions.value = Rng::new(6).uniform_matrix(27, 27, -1.0, 1.0);
        Checkpoint {
            model,
            epoch: 7,
            dev_f: 88.5,
        }
    }

    #[test]
    fn round_trip_preserves_tagging() {
        let c = checkpoint();
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        let mut rng = Rng::new(11);
        let words = ["a", "b", "PDMS", "acid", "unseen"];
        for i in 0..20 {
            let n = 1 + rng.below(10);
            let toks: Vec<String> = (0..n).map(|_| words[rng.below(5)].to_string()).collect();
            let s = Sentence::from_tokens("d", i, toks, vec![0; n]);
            assert_eq!(c.model.tag(&s).unwrap(), back.model.tag(&s).unwrap());
            assert_eq!(c.model.emissions(&s).unwrap(), back.model.emissions(&s).unwrap());
        }
    }

    #[test]
    fn header_layout() {
        let bytes = checkpoint().to_bytes();
        assert_eq!(&bytes[..4], b"SLCK");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 16 + len + 4);
        let crc = u32::from_le_bytes(bytes[16 + len..].try_into().unwrap());
        assert_eq!(crc, crc32fast::hash(&bytes[16..16 + len]));
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = checkpoint().to_bytes();
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format { .. })
        ));
        assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());

        let mut flipped = bytes.clone();
        let mid = bytes.len() / 2;
        flipped[mid] ^= 0x01;
        match Checkpoint::from_bytes(&flipped) {
            Err(Error::Format { msg, .. }) => assert!(msg.contains("checksum")),
            other => panic!("{other:?}"),
        }

        let mut version = bytes.clone();
        version[4] = 9;
        assert!(Checkpoint::from_bytes(&version).is_err());

        let mut magic = bytes;
        magic[0] = b'X';
        assert!(Checkpoint::from_bytes(&magic).is_err());
    }

    #[test]
    fn save_is_atomic_and_loadable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.slck");
        let c = checkpoint();
        c.save(&path).unwrap();
        assert!(!dir.path().join("model.tmp").exists());
        assert_eq!(Checkpoint::load(&path).unwrap(), c);
        assert_eq!(std::fs::read(&path).unwrap(), c.to_bytes());
    }
}
