use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict};

use chemner::chaincrf::{log_partition, viterbi_decode, TransitionMatrix};
use chemner::corpus::{
    parse_conll, parse_conll_untagged, tokenize_words, write_conll, Sentence, TagScheme, DEFAULT_DOC_ID,
};
use chemner::data::TOY_CONLL;
use chemner::evaluation::{evaluate, MatchMode};
use chemner::numkernel::Matrix;
use chemner::training::{train as train_model, Checkpoint, TrainConfig, TrainOptions};

create_exception!(chemner_py, ChemnerError, PyException);

fn err(e: chemner::Error) -> PyErr {
    ChemnerError::new_err(format!("{}: {e}", e.kind()))
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(err)
}

fn crf_inputs(emissions: Vec<Vec<f64>>, transitions: Vec<Vec<f64>>) -> PyResult<(Matrix, TransitionMatrix)> {
    let p = matrix(emissions)?;
    let a = matrix(transitions)?;
    let m = a.rows().saturating_sub(2);
    Ok((p, TransitionMatrix::from_scores(m, a).map_err(err)?))
}

/// F = 2PR / (P + R), 0 when both are 0.
#[pyfunction]
fn f_score(precision: f64, recall: f64) -> f64 {
    chemner::evaluation::f_score(precision, recall)
}

/// Splits text into tokens the way `chemner tag --raw` does.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    tokenize_words(text)
}

/// log Z for an n×m emission matrix and an (m+2)×(m+2) transition matrix
/// whose last two rows/columns are START and STOP.
#[pyfunction]
fn crf_log_partition(emissions: Vec<Vec<f64>>, transitions: Vec<Vec<f64>>) -> PyResult<f64> {
    let (p, a) = crf_inputs(emissions, transitions)?;
    log_partition(&p, &a).map_err(err)
}

/// Best tag path and its score.
#[pyfunction]
fn crf_viterbi(emissions: Vec<Vec<f64>>, transitions: Vec<Vec<f64>>) -> PyResult<(Vec<usize>, f64)> {
    let (p, a) = crf_inputs(emissions, transitions)?;
    viterbi_decode(&p, &a).map_err(err)
}

/// The bundled 60-sentence toy corpus as CoNLL text.
#[pyfunction]
fn toy_corpus() -> &'static str {
    TOY_CONLL
}

/// Micro precision, recall and F (percent) of predicted CoNLL against gold.
#[pyfunction]
#[pyo3(signature = (gold, predicted, overlap = false))]
fn evaluate_conll(gold: &str, predicted: &str, overlap: bool) -> PyResult<(f64, f64, f64)> {
    let scheme = TagScheme::chemdner();
    let gold = parse_conll(gold, &scheme).map_err(err)?;
    let predicted = parse_conll(predicted, &scheme).map_err(err)?;
    let mode = if overlap { MatchMode::Overlap } else { MatchMode::Exact };
    let r = evaluate(&gold, &predicted, &scheme, mode).map_err(err)?;
    Ok((r.micro.precision, r.micro.recall, r.micro.f))
}

/// A trained model.
#[pyclass(module = "chemner_py")]
struct Tagger {
    checkpoint: Checkpoint,
}

impl Tagger {
    fn sentence(&self, tokens: Vec<String>) -> Sentence {
        let n = tokens.len();
        Sentence::from_tokens(DEFAULT_DOC_ID, 0, tokens, vec![0; n])
    }
}

#[pymethods]
impl Tagger {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Tagger> {
        let checkpoint = Checkpoint::load(path.as_ref()).map_err(err)?;
        Ok(Tagger { checkpoint })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.checkpoint.save(path.as_ref()).map_err(err)
    }

    /// The checkpoint in its on-disk byte layout.
    fn to_bytes(&self) -> Vec<u8> {
        self.checkpoint.to_bytes()
    }

    #[getter]
    fn epoch(&self) -> usize {
        self.checkpoint.epoch
    }

    #[getter]
    fn dev_f(&self) -> f64 {
        self.checkpoint.dev_f
    }

    /// Configuration as key=value lines.
    #[getter]
    fn config(&self) -> String {
        self.checkpoint.model.config.to_kv()
    }

    /// Tag names for a list of tokens.
    fn tag(&self, tokens: Vec<String>) -> PyResult<Vec<String>> {
        let model = &self.checkpoint.model;
        let tags = model.tag(&self.sentence(tokens)).map_err(err)?;
        Ok(tags.iter().map(|&t| model.scheme.tag_name(t)).collect())
    }

    /// `(start, end, class)` token spans; `end` is exclusive.
    fn mentions(&self, tokens: Vec<String>) -> PyResult<Vec<(usize, usize, String)>> {
        let model = &self.checkpoint.model;
        let s = self.sentence(tokens);
        let tagged = s.with_tags(model.tag(&s).map_err(err)?);
        Ok(tagged
            .spans(&model.scheme)
            .0
            .into_iter()
            .map(|sp| (sp.start, sp.end, model.scheme.class_name(sp.class).to_string()))
            .collect())
    }

    /// Tags CoNLL text (tag column optional) and returns tagged CoNLL.
    fn tag_conll(&self, text: &str) -> PyResult<String> {
        let model = &self.checkpoint.model;
        let sentences = parse_conll_untagged(text, &model.scheme).map_err(err)?;
        let tagged = model.tag_all(&sentences).map_err(err)?;
        Ok(write_conll(&tagged, &model.scheme))
    }

    /// Per-head n×n attention weights over the BiLSTM states.
    fn attention(&self, tokens: Vec<String>) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let records = self
            .checkpoint
            .model
            .attention_records(&self.sentence(tokens))
            .map_err(err)?;
        Ok(records
            .iter()
            .map(|r| (0..r.weights.rows()).map(|i| r.weights.row(i).to_vec()).collect())
            .collect())
    }
}

/// Trains on tagged CoNLL text. `config` maps configuration keys (as in
/// `chemner train --help`, underscores or hyphens) to values.
#[pyfunction]
#[pyo3(signature = (conll, dev = None, config = None))]
fn train(py: Python<'_>, conll: &str, dev: Option<&str>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Tagger> {
    let scheme = TagScheme::chemdner();
    let train_set = parse_conll(conll, &scheme).map_err(err)?;
    let dev_set = match dev {
        Some(d) => parse_conll(d, &scheme).map_err(err)?,
        None => Vec::new(),
    };
    let mut cfg = TrainConfig::default();
    let mut lstm_only = false;
    if let Some(d) = config {
        for (k, v) in d.iter() {
            let key: String = k.extract()?;
            let value = if v.is_instance_of::<PyBool>() {
                v.extract::<bool>()?.to_string()
            } else {
                v.str()?.to_string()
            };
            cfg.set(&key, &value).map_err(err)?;
        }
        let has = |name: &str| {
            d.keys()
                .iter()
                .any(|k| k.extract::<String>().is_ok_and(|k| k.replace('-', "_") == name))
        };
        lstm_only = has("lstm_dim") && !has("enc_hidden_dim");
    }
    if lstm_only {
        cfg.enc_hidden_dim = 2 * cfg.lstm_dim;
    }
    let outcome = py
        .detach(|| train_model(&train_set, &dev_set, &scheme, &cfg, TrainOptions::default()))
        .map_err(err)?;
    Ok(Tagger {
        checkpoint: outcome.best,
    })
}

#[pymodule]
fn chemner_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ChemnerError", m.py().get_type::<ChemnerError>())?;
    m.add_class::<Tagger>()?;
    m.add_function(wrap_pyfunction!(f_score, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(crf_log_partition, m)?)?;
    m.add_function(wrap_pyfunction!(crf_viterbi, m)?)?;
    m.add_function(wrap_pyfunction!(toy_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_conll, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_score_matches_core() {
        assert_eq!(format!("{:.2}", f_score(91.8, 89.9)), "90.84");
    }

    #[test]
    fn tokenize_splits_punctuation() {
        assert_eq!(
            tokenize("PDMS was added, (film)."),
            ["PDMS", "was", "added", ",", "(film)", "."]
        );
    }
}
