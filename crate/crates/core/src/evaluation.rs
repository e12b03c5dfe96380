//! Entity-level precision/recall/F, per-class breakdown, document label
//! consistency and attention export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::attention::AttentionExport;
use crate::corpus::{Sentence, TagScheme, TokenSpan};
use crate::error::{Error, Result};
use crate::training::Model;

/// Harmonic mean of two percentages; 0 when both are 0.
pub fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// How a predicted mention is matched against gold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Same document, sentence, token span and class.
    #[default]
    Exact,
    /// Same class and at least one shared token.
    Overlap,
}

/// Counts and scores for one slice of the data. Percentages are in
/// `[0, 100]`; an empty denominator yields 0 and sets the matching flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub gold: usize,
    pub predicted: usize,
    /// Predicted mentions that found a gold match.
    pub matched_predicted: usize,
    /// Gold mentions that were found.
    pub matched_gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

impl Prf {
    fn from_counts(gold: usize, predicted: usize, matched_predicted: usize, matched_gold: usize) -> Prf {
        let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
        let precision = pct(matched_predicted, predicted);
        let recall = pct(matched_gold, gold);
        Prf {
            gold,
            predicted,
            matched_predicted,
            matched_gold,
            precision,
            recall,
            f: f_score(precision, recall),
            precision_undefined: predicted == 0,
            recall_undefined: gold == 0,
        }
    }

    /// True positives under exact matching.
    pub fn tp(&self) -> usize {
        self.matched_predicted
    }

    pub fn fp(&self) -> usize {
        self.predicted - self.matched_predicted
    }

    pub fn fn_(&self) -> usize {
        self.gold - self.matched_gold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub micro: Prf,
    /// Classes with gold support, keyed by name.
    pub per_class: BTreeMap<String, Prf>,
    /// Scheme classes with no gold mention; reported as absent rather than 0.
    pub absent_classes: Vec<String>,
    /// Decoder repairs over the predicted tag sequences.
    pub repairs: usize,
    pub consistency: ConsistencyReport,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    doc: String,
    sentence: usize,
    span: TokenSpan,
}

fn collect(sentences: &[Sentence], scheme: &TagScheme) -> (Vec<Key>, usize) {
    let mut out = Vec::new();
    let mut repairs = 0;
    for (pos, s) in sentences.iter().enumerate() {
        let (spans, r) = s.spans(scheme);
        repairs += r;
        for span in spans {
            out.push(Key {
                doc: s.doc_id.clone(),
                sentence: pos,
                span,
            });
        }
    }
    (out, repairs)
}

fn check_alignment(gold: &[Sentence], predicted: &[Sentence]) -> Result<()> {
    if gold.len() != predicted.len() {
        return Err(Error::Alignment(format!(
            "{} gold sentences vs {} predicted",
            gold.len(),
            predicted.len()
        )));
    }
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Alignment(format!(
                "sentence {i} ({}#{}) has {} gold tokens but {} predicted",
                g.doc_id,
                g.index,
                g.len(),
                p.len()
            )));
        }
    }
    Ok(())
}

fn matches(a: &Key, b: &Key, mode: MatchMode) -> bool {
    a.doc == b.doc
        && a.sentence == b.sentence
        && a.span.class == b.span.class
        && match mode {
            MatchMode::Exact => a.span.start == b.span.start && a.span.end == b.span.end,
            MatchMode::Overlap => a.span.overlaps(&b.span),
        }
}

fn count(gold: &[&Key], pred: &[&Key], mode: MatchMode) -> Prf {
    let (matched_pred, matched_gold) = match mode {
        MatchMode::Exact => {
            let g: BTreeSet<&Key> = gold.iter().copied().collect();
            let tp = pred.iter().filter(|k| g.contains(*k)).count();
            (tp, tp)
        }
        MatchMode::Overlap => (
            pred.iter().filter(|p| gold.iter().any(|g| matches(g, p, mode))).count(),
            gold.iter().filter(|g| pred.iter().any(|p| matches(g, p, mode))).count(),
        ),
    };
    Prf::from_counts(gold.len(), pred.len(), matched_pred, matched_gold)
}

/// Scores `predicted` against `gold`. The two lists must hold the same
/// sentences in the same order.
pub fn evaluate(gold: &[Sentence], predicted: &[Sentence], scheme: &TagScheme, mode: MatchMode) -> Result<EvalReport> {
    check_alignment(gold, predicted)?;
    let (g, _) = collect(gold, scheme);
    let (p, repairs) = collect(predicted, scheme);
    let all_g: Vec<&Key> = g.iter().collect();
    let all_p: Vec<&Key> = p.iter().collect();
    let micro = count(&all_g, &all_p, mode);
    let (per_class, absent_classes) = per_category_keys(&g, &p, scheme, mode);
    Ok(EvalReport {
        micro,
        per_class,
        absent_classes,
        repairs,
        consistency: consistency(predicted, scheme),
    })
}

fn per_category_keys(
    g: &[Key],
    p: &[Key],
    scheme: &TagScheme,
    mode: MatchMode,
) -> (BTreeMap<String, Prf>, Vec<String>) {
    let mut per_class = BTreeMap::new();
    let mut absent = Vec::new();
    for c in 0..scheme.num_classes() {
        let gc: Vec<&Key> = g.iter().filter(|k| k.span.class == c).collect();
        let name = scheme.class_name(c).to_string();
        if gc.is_empty() {
            absent.push(name);
            continue;
        }
        let pc: Vec<&Key> = p.iter().filter(|k| k.span.class == c).collect();
        per_class.insert(name, count(&gc, &pc, mode));
    }
    (per_class, absent)
}

/// Per-class scores. Classes without gold support are returned in the
/// second list instead of being scored.
pub fn per_category(
    gold: &[Sentence],
    predicted: &[Sentence],
    scheme: &TagScheme,
    mode: MatchMode,
) -> Result<(BTreeMap<String, Prf>, Vec<String>)> {
    check_alignment(gold, predicted)?;
    let (g, _) = collect(gold, scheme);
    let (p, _) = collect(predicted, scheme);
    Ok(per_category_keys(&g, &p, scheme, mode))
}

/// Class order as listed in the scheme, for printing.
fn ordered<'a>(report: &'a EvalReport, scheme: &TagScheme) -> Vec<(&'a str, &'a Prf)> {
    scheme
        .classes()
        .iter()
        .filter_map(|c| report.per_class.get_key_value(c.as_str()))
        .map(|(k, v)| (k.as_str(), v))
        .collect()
}

impl EvalReport {
    /// Aligned table: a model row, then one row per class with support.
    pub fn to_table(&self, model_name: &str, scheme: &TagScheme) -> String {
        let mut out = String::new();
        let w = ordered(self, scheme)
            .iter()
            .map(|(c, _)| c.len())
            .chain([model_name.len(), 5])
            .max()
            .unwrap_or(5);
        let _ = writeln!(
            out,
            "{:<w$}  {:>7}  {:>7}  {:>7}  {:>7}",
            "Model", "P (%)", "R (%)", "F (%)", "Support"
        );
        let row = |out: &mut String, name: &str, p: &Prf| {
            let _ = writeln!(
                out,
                "{:<w$}  {:>7.2}  {:>7.2}  {:>7.2}  {:>7}",
                name, p.precision, p.recall, p.f, p.gold
            );
        };
        row(&mut out, model_name, &self.micro);
        let classes = ordered(self, scheme);
        if !classes.is_empty() {
            out.push('\n');
            for (name, p) in classes {
                row(&mut out, name, p);
            }
        }
        for c in &self.absent_classes {
            let _ = writeln!(out, "{c:<w$}  {:>7}  {:>7}  {:>7}  {:>7}", "-", "-", "-", "absent");
        }
        let _ = writeln!(out, "\nrepairs: {}", self.repairs);
        match self.consistency.score() {
            Some(s) => {
                let _ = writeln!(
                    out,
                    "consistency: {:.4} ({}/{} repeated forms)",
                    s, self.consistency.consistent, self.consistency.forms
                );
            }
            None => out.push_str("consistency: n/a (no repeated forms)\n"),
        }
        if self.micro.precision_undefined || self.micro.recall_undefined {
            out.push_str("note: an empty denominator was scored as 0\n");
        }
        out
    }

    /// `key=value` lines with fixed key order.
    pub fn to_key_values(&self, scheme: &TagScheme) -> String {
        let mut out = String::new();
        let prf = |out: &mut String, prefix: &str, p: &Prf| {
            let _ = writeln!(out, "{prefix}.precision={:.4}", p.precision);
            let _ = writeln!(out, "{prefix}.recall={:.4}", p.recall);
            let _ = writeln!(out, "{prefix}.f={:.4}", p.f);
            let _ = writeln!(out, "{prefix}.gold={}", p.gold);
            let _ = writeln!(out, "{prefix}.predicted={}", p.predicted);
            let _ = writeln!(out, "{prefix}.tp={}", p.tp());
        };
        prf(&mut out, "micro", &self.micro);
        let _ = writeln!(out, "micro.precision_undefined={}", self.micro.precision_undefined);
        let _ = writeln!(out, "micro.recall_undefined={}", self.micro.recall_undefined);
        for (name, p) in ordered(self, scheme) {
            prf(&mut out, &format!("class.{name}"), p);
        }
        for c in &self.absent_classes {
            let _ = writeln!(out, "class.{c}=absent");
        }
        let _ = writeln!(out, "repairs={}", self.repairs);
        out.push_str(&self.consistency.to_key_values());
        out
    }
}

/// Label consistency of repeated surface forms within documents.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ConsistencyReport {
    /// Per document: (repeated forms, consistent forms).
    pub per_document: BTreeMap<String, (usize, usize)>,
    pub forms: usize,
    pub consistent: usize,
}

impl ConsistencyReport {
    /// Fraction of repeated forms that were labeled consistently, or `None`
    /// when no form repeats.
    pub fn score(&self) -> Option<f64> {
        (self.forms > 0).then(|| self.consistent as f64 / self.forms as f64)
    }

    pub fn document_score(&self, doc: &str) -> Option<f64> {
        self.per_document
            .get(doc)
            .filter(|(f, _)| *f > 0)
            .map(|&(f, c)| c as f64 / f as f64)
    }

    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "consistency.forms={}", self.forms);
        let _ = writeln!(out, "consistency.consistent={}", self.consistent);
        match self.score() {
            Some(s) => {
                let _ = writeln!(out, "consistency.score={s:.4}");
            }
            None => out.push_str("consistency.score=n/a\n"),
        }
        for (doc, (f, c)) in &self.per_document {
            let _ = writeln!(out, "consistency.doc.{doc}={c}/{f}");
        }
        out
    }
}

/// What the tagger did with one occurrence of a form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Decision {
    Outside,
    Entity(usize),
    /// Covered by a mention with a different extent.
    Partial,
}

/// Consistency over the surface forms of the predicted mentions.
pub fn consistency(predicted: &[Sentence], scheme: &TagScheme) -> ConsistencyReport {
    let mut forms: BTreeMap<String, BTreeSet<Vec<String>>> = BTreeMap::new();
    for s in predicted {
        let entry = forms.entry(s.doc_id.clone()).or_default();
        for span in s.spans(scheme).0 {
            entry.insert(s.tokens[span.start..span.end].to_vec());
        }
    }
    consistency_for_forms(predicted, scheme, &forms)
}

/// Consistency over given forms (token sequences) per document. A form
/// counts when it occurs at least twice in its document; it is consistent
/// when every occurrence received the same decision: the same class with
/// exactly that extent, or no entity at all.
pub fn consistency_for_forms(
    predicted: &[Sentence],
    scheme: &TagScheme,
    forms: &BTreeMap<String, BTreeSet<Vec<String>>>,
) -> ConsistencyReport {
    let mut by_doc: BTreeMap<&str, Vec<(&Sentence, Vec<TokenSpan>)>> = BTreeMap::new();
    for s in predicted {
        by_doc.entry(&s.doc_id).or_default().push((s, s.spans(scheme).0));
    }
    let mut report = ConsistencyReport::default();
    for (doc, doc_forms) in forms {
        let Some(sentences) = by_doc.get(doc.as_str()) else {
            continue;
        };
        let (mut n_forms, mut n_consistent) = (0, 0);
        for form in doc_forms {
            if form.is_empty() {
                continue;
            }
            let mut decisions = Vec::new();
            for (s, spans) in sentences {
                if s.len() < form.len() {
                    continue;
                }
                for start in 0..=s.len() - form.len() {
                    let end = start + form.len();
                    if s.tokens[start..end] != form[..] {
                        continue;
                    }
                    let d = if let Some(sp) = spans.iter().find(|sp| sp.start == start && sp.end == end) {
                        Decision::Entity(sp.class)
                    } else if spans.iter().any(|sp| sp.start < end && start < sp.end) {
                        Decision::Partial
                    } else {
                        Decision::Outside
                    };
                    decisions.push(d);
                }
            }
            if decisions.len() < 2 {
                continue;
            }
            n_forms += 1;
            if decisions.iter().all(|d| *d == decisions[0]) {
                n_consistent += 1;
            }
        }
        if n_forms > 0 {
            report.per_document.insert(doc.clone(), (n_forms, n_consistent));
            report.forms += n_forms;
            report.consistent += n_consistent;
        }
    }
    report
}

/// Gold mention forms per document, for scoring two taggers on the same
/// set of forms.
pub fn gold_forms(gold: &[Sentence], scheme: &TagScheme) -> BTreeMap<String, BTreeSet<Vec<String>>> {
    let mut forms: BTreeMap<String, BTreeSet<Vec<String>>> = BTreeMap::new();
    for s in gold {
        let entry = forms.entry(s.doc_id.clone()).or_default();
        for span in s.spans(scheme).0 {
            entry.insert(s.tokens[span.start..span.end].to_vec());
        }
    }
    forms
}

/// Writes `<stem>.json` and `<stem>.svg` with the attention maps the model
/// produces for `sentence`. Returns both paths.
pub fn export_attention(
    model: &Model,
    sentence: &Sentence,
    stem: &Path,
    heads: Option<&[usize]>,
) -> Result<(PathBuf, PathBuf)> {
    let records = model.attention_records(sentence)?;
    let export = AttentionExport {
        doc_id: sentence.doc_id.clone(),
        sentence: sentence.index,
        tokens: sentence.tokens.clone(),
        records,
    };
    let json = stem.with_extension("json");
    let svg = stem.with_extension("svg");
    std::fs::write(&json, export.to_json()).map_err(|e| Error::io(&json, e))?;
    std::fs::write(&svg, export.to_svg(heads)).map_err(|e| Error::io(&svg, e))?;
    Ok((json, svg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::encode_spans;
    use crate::numkernel::Rng;
    use proptest::prelude::*;

    fn sentence(doc: &str, tokens: &[&str], spans: &[(usize, usize, usize)], scheme: &TagScheme) -> Sentence {
        let spans: Vec<TokenSpan> = spans.iter().map(|&(s, e, c)| TokenSpan::new(s, e, c)).collect();
        let tags = encode_spans(&spans, tokens.len(), scheme).unwrap();
        Sentence::from_tokens(doc, 0, tokens.iter().map(|t| t.to_string()).collect(), tags)
    }

    #[test]
    fn reference_f_scores() {
        assert_eq!(format!("{:.2}", f_score(91.31, 87.73)), "89.48");
        assert_eq!(format!("{:.2}", f_score(91.8, 89.9)), "90.84");
        assert_eq!(f_score(42.5, 42.5), 42.5);
        assert_eq!(f_score(0.0, 0.0), 0.0);
        assert_eq!(f_score(30.0, 70.0), f_score(70.0, 30.0));
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let scheme = TagScheme::chemdner();
        let gold = vec![sentence("d", &["a", "b", "c"], &[(0, 1, 0), (1, 3, 2)], &scheme)];
        let r = evaluate(&gold, &gold, &scheme, MatchMode::Exact).unwrap();
        assert_eq!((r.micro.precision, r.micro.recall, r.micro.f), (100.0, 100.0, 100.0));

        let none = vec![gold[0].with_tags(vec![0; 3])];
        let r = evaluate(&gold, &none, &scheme, MatchMode::Exact).unwrap();
        assert_eq!((r.micro.precision, r.micro.recall, r.micro.f), (0.0, 0.0, 0.0));
        assert!(r.micro.precision_undefined);
    }

    #[test]
    fn hand_counted_case() {
        let scheme = TagScheme::chemdner();
        let toks = ["a", "b", "c", "d", "e", "f"];
        let gold = vec![sentence("d", &toks, &[(0, 1, 0), (2, 4, 1), (5, 6, 3)], &scheme)];
        let pred = vec![sentence("d", &toks, &[(0, 1, 0), (2, 3, 1)], &scheme)];
        let r = evaluate(&gold, &pred, &scheme, MatchMode::Exact).unwrap();
        assert_eq!(format!("{:.2}", r.micro.precision), "50.00");
        assert_eq!(format!("{:.2}", r.micro.recall), "33.33");
        assert_eq!(format!("{:.2}", r.micro.f), "40.00");
        let relaxed = evaluate(&gold, &pred, &scheme, MatchMode::Overlap).unwrap();
        assert_eq!(relaxed.micro.precision, 100.0);
        assert!((relaxed.micro.recall - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn misaligned_inputs() {
        let scheme = TagScheme::chemdner();
        let a = vec![sentence("d", &["a", "b"], &[], &scheme)];
        let b = vec![sentence("d", &["a"], &[], &scheme)];
        assert!(matches!(
            evaluate(&a, &b, &scheme, MatchMode::Exact),
            Err(Error::Alignment(_))
        ));
        assert!(evaluate(&a, &[], &scheme, MatchMode::Exact).is_err());
    }

    #[test]
    fn single_class_and_absent_classes() {
        let scheme = TagScheme::chemdner();
        let toks = ["a", "b", "c", "d"];
        let gold = vec![sentence("d", &toks, &[(0, 1, 2), (2, 3, 2)], &scheme)];
        let pred = vec![sentence("d", &toks, &[(0, 1, 2), (3, 4, 2)], &scheme)];
        let r = evaluate(&gold, &pred, &scheme, MatchMode::Exact).unwrap();
        assert_eq!(r.per_class.len(), 1);
        assert_eq!(r.per_class["ABBREVIATION"], r.micro);
        assert_eq!(r.absent_classes.len(), 7);
        assert!(!r.per_class.contains_key("TRIVIAL"));
        let table = r.to_table("model", &scheme);
        assert!(table.contains("absent"));
        assert!(r.to_key_values(&scheme).contains("class.TRIVIAL=absent"));
    }

    /// Random corpus with a known number of injected errors per class.
    #[test]
    fn generator_ledger_per_class() {
        let scheme = TagScheme::chemdner();
        let mut rng = Rng::new(31);
        let mut ledger = [(0usize, 0usize, 0usize); 8]; // (gold, tp, fp)
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        for doc in 0..40 {
            let n = 12;
            let toks: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
            let mut gs = Vec::new();
            let mut ps = Vec::new();
            for slot in 0..4 {
                let start = slot * 3;
                let class = rng.below(8);
                gs.push(TokenSpan::new(start, start + 2, class));
                ledger[class].0 += 1;
                match rng.below(3) {
                    0 => {
                        ps.push(TokenSpan::new(start, start + 2, class));
                        ledger[class].1 += 1;
                    }
                    1 => {
                        let wrong = (class + 1) % 8;
                        ps.push(TokenSpan::new(start, start + 2, wrong));
                        ledger[wrong].2 += 1;
                    }
                    _ => {}
                }
            }
            let g = encode_spans(&gs, n, &scheme).unwrap();
            let p = encode_spans(&ps, n, &scheme).unwrap();
            gold.push(Sentence::from_tokens(format!("d{doc}"), 0, toks.clone(), g));
            pred.push(Sentence::from_tokens(format!("d{doc}"), 0, toks, p));
        }
        let (per, absent) = per_category(&gold, &pred, &scheme, MatchMode::Exact).unwrap();
        let report = evaluate(&gold, &pred, &scheme, MatchMode::Exact).unwrap();
        let mut tp_sum = 0;
        for (c, &(g, tp, fp)) in ledger.iter().enumerate() {
            let name = scheme.class_name(c);
            if g == 0 {
                assert!(absent.iter().any(|a| a == name));
                continue;
            }
            let p = &per[name];
            assert_eq!((p.gold, p.tp(), p.fp()), (g, tp, fp), "{name}");
            tp_sum += p.tp();
        }
        assert_eq!(tp_sum, report.micro.tp());
        assert_eq!(report.micro.tp() + report.micro.fn_(), report.micro.gold);
        assert_eq!(report.micro.tp() + report.micro.fp(), report.micro.predicted);
    }

    #[test]
    fn repeated_form_consistency() {
        let scheme = TagScheme::chemdner();
        let abbr = scheme.class_index("ABBREVIATION").unwrap();
        let mut doc = Vec::new();
        for i in 0..6 {
            let mut s = sentence("t4", &["the", "(", "PDMS", ")", "film"], &[(2, 3, abbr)], &scheme);
            s.index = i;
            doc.push(s);
        }
        let r = consistency(&doc, &scheme);
        assert_eq!((r.forms, r.consistent), (1, 1));
        assert_eq!(r.score(), Some(1.0));

        doc[3] = doc[3].with_tags(vec![0; 5]);
        let r = consistency(&doc, &scheme);
        assert_eq!(r.score(), Some(0.0));
        assert_eq!(r.document_score("t4"), Some(0.0));

        let single = vec![sentence("x", &["PDMS", "PDMS"], &[(0, 1, abbr)], &scheme)];
        assert_eq!(consistency(&single, &scheme).score(), Some(0.0));
        let none = vec![sentence("x", &["a", "b"], &[], &scheme)];
        assert_eq!(consistency(&none, &scheme).score(), None);
    }

    proptest! {
        #[test]
        fn consistency_is_a_fraction_and_order_free(
            seed in 0u64..10_000,
            docs in 1usize..4,
        ) {
            let scheme = TagScheme::chemdner();
            let mut rng = Rng::new(seed);
            let vocab = ["PDMS", "acid", "of", "the", "Ca"];
            let mut sentences = Vec::new();
            for d in 0..docs {
                for i in 0..4 {
                    let n = 1 + rng.below(6);
                    let toks: Vec<String> = (0..n).map(|_| vocab[rng.below(vocab.len())].to_string()).collect();
                    let tags: Vec<usize> = (0..n).map(|_| rng.below(scheme.num_tags() + 2)).collect();
                    sentences.push(Sentence::from_tokens(format!("d{d}"), i, toks, tags));
                }
            }
            let r = consistency(&sentences, &scheme);
            if let Some(s) = r.score() {
                prop_assert!((0.0..=1.0).contains(&s));
            }
            let mut shuffled = sentences.clone();
            rng.shuffle(&mut shuffled);
            prop_assert_eq!(consistency(&shuffled, &scheme), r);
        }

        #[test]
        fn swapping_gold_and_prediction_swaps_p_and_r(seed in 0u64..10_000) {
            let scheme = TagScheme::chemdner();
            let mut rng = Rng::new(seed);
            let mut a = Vec::new();
            let mut b = Vec::new();
            for i in 0..5 {
                let n = 1 + rng.below(8);
                let toks: Vec<String> = (0..n).map(|k| format!("t{k}")).collect();
                let ta: Vec<usize> = (0..n).map(|_| rng.below(scheme.num_tags())).collect();
                let tb: Vec<usize> = (0..n).map(|_| rng.below(scheme.num_tags())).collect();
                a.push(Sentence::from_tokens("d", i, toks.clone(), ta));
                b.push(Sentence::from_tokens("d", i, toks, tb));
            }
            for mode in [MatchMode::Exact, MatchMode::Overlap] {
                let ab = evaluate(&a, &b, &scheme, mode).unwrap().micro;
                let ba = evaluate(&b, &a, &scheme, mode).unwrap().micro;
                prop_assert_eq!(ab.precision, ba.recall);
                prop_assert_eq!(ab.recall, ba.precision);
                prop_assert!(ab.f >= 0.0 && ab.f <= 100.0);
            }
        }
    }
}
