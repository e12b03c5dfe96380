use crate::error::{Error, Result};
use crate::numkernel::{Matrix, Param, Parameterized, Rng};

/// Token (`|V|×d`), segment (`2×d`) and learned position (`L_max×d`)
/// tables.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTables {
    pub token: Param,
    pub segment: Param,
    pub position: Param,
}

impl EmbeddingTables {
    pub fn zeros(vocab_size: usize, dim: usize, max_len: usize) -> Self {
        EmbeddingTables {
            token: Param::zeros("emb.token", vocab_size, dim),
            segment: Param::zeros("emb.segment", 2, dim),
            position: Param::zeros("emb.position", max_len, dim),
        }
    }

    /// Entries uniform in ±√(3/d), so each row has roughly unit norm.
    pub fn init(vocab_size: usize, dim: usize, max_len: usize, rng: &mut Rng) -> Self {
        let a = (3.0 / dim.max(1) as f64).sqrt();
        let mut t = EmbeddingTables::zeros(vocab_size, dim, max_len);
        t.token.value = rng.uniform_matrix(vocab_size, dim, -a, a);
        t.segment.value = rng.uniform_matrix(2, dim, -a, a);
        t.position.value = rng.uniform_matrix(max_len, dim, -a, a);
        t
    }

    pub fn dim(&self) -> usize {
        self.token.value.cols()
    }

    pub fn max_len(&self) -> usize {
        self.position.value.rows()
    }

    pub fn vocab_size(&self) -> usize {
        self.token.value.rows()
    }

    /// Checks ids and length against the tables.
    fn validate(&self, ids: &[usize], segments: &[usize]) -> Result<()> {
        let d = self.dim();
        if self.segment.value.cols() != d || self.position.value.cols() != d {
            return Err(Error::Dimension {
                op: "compose_embeddings tables",
                left: self.segment.shape(),
                right: self.position.shape(),
            });
        }
        if ids.len() != segments.len() {
            return Err(Error::Dimension {
                op: "compose_embeddings ids",
                left: (ids.len(), 1),
                right: (segments.len(), 1),
            });
        }
        if ids.len() > self.max_len() {
            return Err(Error::Length {
                len: ids.len(),
                max: self.max_len(),
            });
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= self.vocab_size()) {
            return Err(Error::Index {
                what: "token table",
                index: bad,
                len: self.vocab_size(),
            });
        }
        if let Some(&bad) = segments.iter().find(|&&s| s >= 2) {
            return Err(Error::Index {
                what: "segment table",
                index: bad,
                len: 2,
            });
        }
        Ok(())
    }

    /// Scatter-adds `d_out` into the three gradient tables.
    pub fn backward(&mut self, ids: &[usize], segments: &[usize], d_out: &Matrix) {
        for t in 0..d_out.rows() {
            let g = d_out.row(t);
            for (dst, row) in [
                (&mut self.token.grad, ids[t]),
                (&mut self.segment.grad, segments[t]),
                (&mut self.position.grad, t),
            ] {
                for (a, b) in dst.row_mut(row).iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
    }
}

impl Parameterized for EmbeddingTables {
    fn params(&self) -> Vec<&Param> {
        vec![&self.token, &self.segment, &self.position]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.token, &mut self.segment, &mut self.position]
    }
}

/// Row `t` is `token[ids[t]] + segment[segments[t]] + position[t]`.
pub fn compose_embeddings(ids: &[usize], segments: &[usize], tables: &EmbeddingTables) -> Result<Matrix> {
    tables.validate(ids, segments)?;
    let d = tables.dim();
    let mut out = Matrix::zeros(ids.len(), d);
    for (t, (&id, &seg)) in ids.iter().zip(segments).enumerate() {
        let tok = tables.token.value.row(id);
        let sg = tables.segment.value.row(seg);
        let pos = tables.position.value.row(t);
        for (j, o) in out.row_mut(t).iter_mut().enumerate() {
            *o = tok[j] + sg[j] + pos[j];
        }
    }
    Ok(out)
}
