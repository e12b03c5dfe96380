//! Linear-chain CRF over an `n × m` emission matrix and an `(m+2) × (m+2)`
//! transition matrix whose last two indices are the START and STOP
//! sentinels.
//!
//! `score(y) = Σₜ P[t, yₜ] + A[START, y₀] + Σₜ A[yₜ₋₁, yₜ] + A[yₙ₋₁, STOP]`.
//! Everything is computed in log space.

use crate::corpus::TagScheme;
use crate::error::{Error, Result};
use crate::numkernel::{log_sum_exp, Matrix};

/// Transition scores with START/STOP sentinels and a mask of forbidden
/// moves. Forbidden entries read as `-∞`; the stored score stays finite.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    num_tags: usize,
    scores: Matrix,
    allowed: Vec<bool>,
}

impl TransitionMatrix {
    pub fn zeros(num_tags: usize) -> Self {
        TransitionMatrix::from_scores(num_tags, Matrix::zeros(num_tags + 2, num_tags + 2)).expect("shape is consistent")
    }

    pub fn from_scores(num_tags: usize, scores: Matrix) -> Result<Self> {
        let k = num_tags + 2;
        if scores.shape() != (k, k) {
            return Err(Error::Dimension {
                op: "transition matrix",
                left: (k, k),
                right: scores.shape(),
            });
        }
        let mut allowed = vec![true; k * k];
        for i in 0..k {
            allowed[i * k + num_tags] = false; // into START
            allowed[(num_tags + 1) * k + i] = false; // out of STOP
        }
        Ok(TransitionMatrix {
            num_tags,
            scores,
            allowed,
        })
    }

    /// Same scores with an explicit mask (row-major over `(m+2)²`). The
    /// structural START/STOP exclusions are always kept.
    pub fn with_mask(num_tags: usize, scores: Matrix, mask: &[bool]) -> Result<Self> {
        let mut t = TransitionMatrix::from_scores(num_tags, scores)?;
        if mask.len() != t.allowed.len() {
            return Err(Error::Dimension {
                op: "transition mask",
                left: (t.allowed.len(), 1),
                right: (mask.len(), 1),
            });
        }
        for (a, &m) in t.allowed.iter_mut().zip(mask) {
            *a &= m;
        }
        Ok(t)
    }

    #[inline]
    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    #[inline]
    pub fn start(&self) -> usize {
        self.num_tags
    }

    #[inline]
    pub fn stop(&self) -> usize {
        self.num_tags + 1
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        let k = self.num_tags + 2;
        if self.allowed[from * k + to] {
            self.scores.get(from, to)
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn is_allowed(&self, from: usize, to: usize) -> bool {
        self.allowed[from * (self.num_tags + 2) + to]
    }

    pub fn forbid(&mut self, from: usize, to: usize) {
        let k = self.num_tags + 2;
        self.allowed[from * k + to] = false;
    }

    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    pub fn scores_mut(&mut self) -> &mut Matrix {
        &mut self.scores
    }

    pub fn mask(&self) -> &[bool] {
        &self.allowed
    }

    /// Forbids every move that cannot occur in a well-formed tag sequence
    /// of `scheme`.
    pub fn apply_scheme_constraints(&mut self, scheme: &TagScheme) {
        assert_eq!(scheme.num_tags(), self.num_tags);
        for (from, to) in scheme.forbidden_transitions() {
            self.forbid(from, to);
        }
        for t in scheme.forbidden_start() {
            self.forbid(self.start(), t);
        }
        for t in scheme.forbidden_end() {
            self.forbid(t, self.stop());
        }
    }
}

fn check_shapes(p: &Matrix, a: &TransitionMatrix) -> Result<()> {
    if p.cols() != a.num_tags() {
        return Err(Error::Dimension {
            op: "emission vs transition",
            left: p.shape(),
            right: a.scores().shape(),
        });
    }
    Ok(())
}

pub fn score_sequence(p: &Matrix, a: &TransitionMatrix, y: &[usize]) -> Result<f64> {
    check_shapes(p, a)?;
    if y.len() != p.rows() {
        return Err(Error::Dimension {
            op: "score_sequence",
            left: p.shape(),
            right: (y.len(), 1),
        });
    }
    if let Some(&bad) = y.iter().find(|&&t| t >= a.num_tags()) {
        return Err(Error::Index {
            what: "tag",
            index: bad,
            len: a.num_tags(),
        });
    }
    let mut prev = a.start();
    let mut total = 0.0;
    for (t, &tag) in y.iter().enumerate() {
        total += p.get(t, tag) + a.get(prev, tag);
        prev = tag;
    }
    Ok(total + a.get(prev, a.stop()))
}

/// Forward log-scores `α[t][j]`: best-of-all-prefixes in log-sum form.
fn forward(p: &Matrix, a: &TransitionMatrix) -> Matrix {
    let (n, m) = p.shape();
    let mut alpha = Matrix::zeros(n, m);
    let mut buf = vec![0.0; m];
    for j in 0..m {
        alpha.set(0, j, a.get(a.start(), j) + p.get(0, j));
    }
    for t in 1..n {
        for j in 0..m {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = alpha.get(t - 1, i) + a.get(i, j);
            }
            alpha.set(t, j, p.get(t, j) + log_sum_exp(&buf));
        }
    }
    alpha
}

fn backward(p: &Matrix, a: &TransitionMatrix) -> Matrix {
    let (n, m) = p.shape();
    let mut beta = Matrix::zeros(n, m);
    let mut buf = vec![0.0; m];
    for i in 0..m {
        beta.set(n - 1, i, a.get(i, a.stop()));
    }
    for t in (0..n - 1).rev() {
        for i in 0..m {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = a.get(i, j) + p.get(t + 1, j) + beta.get(t + 1, j);
            }
            beta.set(t, i, log_sum_exp(&buf));
        }
    }
    beta
}

fn finish_partition(alpha: &Matrix, a: &TransitionMatrix) -> f64 {
    let n = alpha.rows();
    let last: Vec<f64> = (0..a.num_tags())
        .map(|j| alpha.get(n - 1, j) + a.get(j, a.stop()))
        .collect();
    log_sum_exp(&last)
}

fn empty_partition(a: &TransitionMatrix) -> Result<f64> {
    let v = a.get(a.start(), a.stop());
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(
            "empty sequence with START→STOP forbidden has no paths".into(),
        ))
    }
}

/// `log Σ_y exp(score(y))` by the forward algorithm, `O(n·m²)`.
pub fn log_partition(p: &Matrix, a: &TransitionMatrix) -> Result<f64> {
    check_shapes(p, a)?;
    if p.rows() == 0 {
        return empty_partition(a);
    }
    if !p.is_finite() {
        return Err(Error::Config("emission scores must be finite".into()));
    }
    let z = finish_partition(&forward(p, a), a);
    if z == f64::NEG_INFINITY {
        return Err(Error::Config(
            "every tag path is forbidden by the transition mask".into(),
        ));
    }
    Ok(z)
}

/// Posterior marginals from forward-backward.
#[derive(Debug, Clone)]
pub struct Marginals {
    pub log_partition: f64,
    /// `n × m`, `P(yₜ = j)`.
    pub unary: Matrix,
    /// Expected transition counts, `(m+2) × (m+2)`, sentinels included.
    pub transitions: Matrix,
}

pub fn marginals(p: &Matrix, a: &TransitionMatrix) -> Result<Marginals> {
    let log_z = log_partition(p, a)?;
    let (n, m) = p.shape();
    let k = m + 2;
    let mut trans = Matrix::zeros(k, k);
    if n == 0 {
        trans.set(a.start(), a.stop(), 1.0);
        return Ok(Marginals {
            log_partition: log_z,
            unary: Matrix::zeros(0, m),
            transitions: trans,
        });
    }
    let alpha = forward(p, a);
    let beta = backward(p, a);
    let mut unary = Matrix::zeros(n, m);
    for t in 0..n {
        for j in 0..m {
            unary.set(t, j, (alpha.get(t, j) + beta.get(t, j) - log_z).exp());
        }
    }
    for j in 0..m {
        trans.add_at(a.start(), j, unary.get(0, j));
        trans.add_at(j, a.stop(), unary.get(n - 1, j));
    }
    for t in 0..n.saturating_sub(1) {
        for i in 0..m {
            let left = alpha.get(t, i);
            if left == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..m {
                let v = left + a.get(i, j) + p.get(t + 1, j) + beta.get(t + 1, j) - log_z;
                trans.add_at(i, j, v.exp());
            }
        }
    }
    Ok(Marginals {
        log_partition: log_z,
        unary,
        transitions: trans,
    })
}

/// Negative log-likelihood of a gold path and its gradients.
#[derive(Debug, Clone)]
pub struct CrfLoss {
    pub nll: f64,
    /// `∂nll/∂P`, `n × m`.
    pub grad_emissions: Matrix,
    /// `∂nll/∂A`, `(m+2) × (m+2)`; zero on forbidden entries.
    pub grad_transitions: Matrix,
}

/// `log Z − score(gold)` with gradients (expected minus observed counts).
pub fn neg_log_likelihood(p: &Matrix, a: &TransitionMatrix, gold: &[usize]) -> Result<CrfLoss> {
    let gold_score = score_sequence(p, a, gold)?;
    let marg = marginals(p, a)?;
    let nll = (marg.log_partition - gold_score).max(0.0);
    let mut grad_emissions = marg.unary;
    let mut grad_transitions = marg.transitions;
    let mut prev = a.start();
    for (t, &tag) in gold.iter().enumerate() {
        grad_emissions.add_at(t, tag, -1.0);
        grad_transitions.add_at(prev, tag, -1.0);
        prev = tag;
    }
    grad_transitions.add_at(prev, a.stop(), -1.0);
    Ok(CrfLoss {
        nll,
        grad_emissions,
        grad_transitions,
    })
}

/// Highest-scoring path and its score. Ties are broken toward the lowest
/// tag index, both for the final tag and at every backtrack step.
pub fn viterbi_decode(p: &Matrix, a: &TransitionMatrix) -> Result<(Vec<usize>, f64)> {
    check_shapes(p, a)?;
    let (n, m) = p.shape();
    if n == 0 {
        return Ok((Vec::new(), empty_partition(a)?));
    }
    let mut delta = Matrix::zeros(n, m);
    let mut back = vec![0usize; n * m];
    for j in 0..m {
        delta.set(0, j, a.get(a.start(), j) + p.get(0, j));
    }
    for t in 1..n {
        for j in 0..m {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in 0..m {
                let v = delta.get(t - 1, i) + a.get(i, j);
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            delta.set(t, j, p.get(t, j) + best);
            back[t * m + j] = arg;
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut last = 0;
    for j in 0..m {
        let v = delta.get(n - 1, j) + a.get(j, a.stop());
        if v > best {
            best = v;
            last = j;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Config(
            "every tag path is forbidden by the transition mask".into(),
        ));
    }
    let mut path = vec![0; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = back[t * m + path[t]];
    }
    Ok((path, best))
}

/// `exp(score(y) − log Z)`.
pub fn sequence_probability(p: &Matrix, a: &TransitionMatrix, y: &[usize]) -> Result<f64> {
    let s = score_sequence(p, a, y)?;
    Ok((s - log_partition(p, a)?).exp())
}
