//! Test-set metrics and report rendering.
//!
//! Seven columns per run: one-hot win, softmax win, `-ln` of the softmax
//! win, cross-entropy, and coarsest / parents' / finest accuracy of the
//! greedily decoded leaf. Wins are the normalized (root-omitted) form. A mean
//! containing an infinite term is reported as overflow (`OF`).

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::hierloss::{self, HierLossError, WinKind};
use crate::taxonomy::{Taxonomy, TaxonomyError};
use crate::textmodel::{LossKind, Model};
use crate::trainer::LabeledSample;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("model was trained against a different taxonomy (checksum {model:016x}, taxonomy {taxonomy:016x})")]
    TaxonomyMismatch { model: u64, taxonomy: u64 },
    #[error("model has {model} outputs but the taxonomy implies {expected}")]
    ClassCountMismatch { model: usize, expected: usize },
    #[error("no samples to evaluate")]
    EmptyCorpus,
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Loss(#[from] HierLossError),
}

/// A mean that may have overflowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mean {
    Finite(f64),
    Overflow,
}

impl Mean {
    fn of(sum: f64, n: usize) -> Self {
        if sum.is_finite() {
            Mean::Finite(sum / n as f64)
        } else {
            Mean::Overflow
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Mean::Finite(v) => Some(v),
            Mean::Overflow => None,
        }
    }

    pub fn is_overflow(self) -> bool {
        matches!(self, Mean::Overflow)
    }
}

impl Serialize for Mean {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Mean::Finite(v) => s.serialize_f64(*v),
            Mean::Overflow => s.serialize_str("OF"),
        }
    }
}

/// Metrics of one test sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMetrics {
    pub decoded: usize,
    pub onehot_win: f64,
    pub softmax_win: f64,
    pub neglog_win: f64,
    pub cross_entropy: f64,
    pub coarsest_hit: bool,
    pub parents_hit: bool,
    pub finest_hit: bool,
}

/// Averaged metrics for one run. Coarse-mode runs only fill
/// `coarsest_acc`; the other metric fields are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub onehot_win: Option<f64>,
    pub softmax_win: Option<f64>,
    pub neglog_win: Option<Mean>,
    pub cross_entropy: Option<Mean>,
    pub coarsest_acc: f64,
    pub parents_acc: Option<f64>,
    pub finest_acc: Option<f64>,
    pub n_samples: usize,
    pub n_empty_feature: usize,
}

impl EvalReport {
    /// Means over per-sample metrics, summed in slice order.
    pub fn from_samples(samples: &[SampleMetrics], n_empty_feature: usize) -> Self {
        let n = samples.len();
        let sum = |f: fn(&SampleMetrics) -> f64| samples.iter().map(f).sum::<f64>();
        let frac = |f: fn(&SampleMetrics) -> bool| {
            samples.iter().filter(|s| f(s)).count() as f64 / n as f64
        };
        EvalReport {
            onehot_win: Some(sum(|s| s.onehot_win) / n as f64),
            softmax_win: Some(sum(|s| s.softmax_win) / n as f64),
            neglog_win: Some(Mean::of(sum(|s| s.neglog_win), n)),
            cross_entropy: Some(Mean::of(sum(|s| s.cross_entropy), n)),
            coarsest_acc: frac(|s| s.coarsest_hit),
            parents_acc: Some(frac(|s| s.parents_hit)),
            finest_acc: Some(frac(|s| s.finest_hit)),
            n_samples: n,
            n_empty_feature,
        }
    }

    pub fn from_coarse_hits(hits: &[bool], n_empty_feature: usize) -> Self {
        EvalReport {
            onehot_win: None,
            softmax_win: None,
            neglog_win: None,
            cross_entropy: None,
            coarsest_acc: hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64,
            parents_acc: None,
            finest_acc: None,
            n_samples: hits.len(),
            n_empty_feature,
        }
    }

    pub fn is_coarse(&self) -> bool {
        self.finest_acc.is_none()
    }
}

fn neg_ln(x: f64) -> f64 {
    if x > 0.0 {
        -x.ln()
    } else {
        f64::INFINITY
    }
}

/// Metrics for a leaf distribution `p` (normally a softmax output).
pub fn eval_distribution(
    t: &Taxonomy,
    p: &[f64],
    true_leaf: usize,
) -> Result<SampleMetrics, EvalError> {
    t.check_leaf(true_leaf)?;
    let decoded = hierloss::decode_best_leaf(t, p)?;
    let weights = hierloss::win_weights(t, true_leaf, WinKind::Normalized)?;
    let onehot_win = weights.weights[decoded];
    // Summing from the target term keeps softmax_win >= p[true_leaf] under
    // rounding, so neglog_win never exceeds cross_entropy.
    let softmax_win = weights
        .weights
        .iter()
        .zip(p)
        .enumerate()
        .filter(|&(j, _)| j != true_leaf)
        .fold(p[true_leaf], |acc, (_, (w, x))| acc + w * x);
    let coarsest_hit = t.coarsest_ancestor(decoded)? == t.coarsest_ancestor(true_leaf)?;
    // A leaf hanging off the root has itself as coarsest class, so sharing
    // the root as parent must not count; this keeps parents_hit => coarsest_hit.
    let parents_hit = coarsest_hit && t.parent_of_leaf(decoded)? == t.parent_of_leaf(true_leaf)?;
    Ok(SampleMetrics {
        decoded,
        onehot_win,
        softmax_win,
        neglog_win: neg_ln(softmax_win),
        cross_entropy: neg_ln(p[true_leaf]),
        coarsest_hit,
        parents_hit,
        finest_hit: decoded == true_leaf,
    })
}

fn check_model(m: &Model, t: &Taxonomy) -> Result<(), EvalError> {
    if m.taxonomy_checksum() != t.checksum() {
        return Err(EvalError::TaxonomyMismatch {
            model: m.taxonomy_checksum(),
            taxonomy: t.checksum(),
        });
    }
    let expected = match m.loss_kind() {
        LossKind::Coarse => t.coarsest_classes().len(),
        _ => t.leaf_count(),
    };
    if m.classes() != expected {
        return Err(EvalError::ClassCountMismatch {
            model: m.classes(),
            expected,
        });
    }
    Ok(())
}

/// Per-sample metrics for a leaf-level model. Also returns whether the text
/// produced no features (its distribution is then uniform).
pub fn eval_sample(
    m: &Model,
    t: &Taxonomy,
    text: &str,
    true_leaf: usize,
) -> Result<(SampleMetrics, bool), EvalError> {
    check_model(m, t)?;
    let feats = m.featurize_text(text);
    let p = hierloss::softmax(&m.forward(&feats));
    Ok((eval_distribution(t, &p, true_leaf)?, feats.is_empty()))
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Evaluates a model over samples labeled with leaf ordinals. Samples are
/// processed in parallel; means are reduced in sample order.
pub fn evaluate(
    m: &Model,
    t: &Taxonomy,
    samples: &[LabeledSample],
) -> Result<EvalReport, EvalError> {
    check_model(m, t)?;
    if samples.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    if m.loss_kind() == LossKind::Coarse {
        let per: Vec<(bool, bool)> = samples
            .par_iter()
            .map(|s| {
                let feats = m.featurize_text(&s.text);
                let predicted = argmax_first(&m.forward(&feats));
                Ok((predicted == t.coarse_label(s.target)?, feats.is_empty()))
            })
            .collect::<Result<_, EvalError>>()?;
        let hits: Vec<bool> = per.iter().map(|&(h, _)| h).collect();
        let empty = per.iter().filter(|&&(_, e)| e).count();
        return Ok(EvalReport::from_coarse_hits(&hits, empty));
    }
    let per: Vec<(SampleMetrics, bool)> = samples
        .par_iter()
        .map(|s| {
            let feats = m.featurize_text(&s.text);
            let p = hierloss::softmax(&m.forward(&feats));
            Ok((eval_distribution(t, &p, s.target)?, feats.is_empty()))
        })
        .collect::<Result<_, EvalError>>()?;
    let metrics: Vec<SampleMetrics> = per.iter().map(|&(s, _)| s).collect();
    let empty = per.iter().filter(|&&(_, e)| e).count();
    Ok(EvalReport::from_samples(&metrics, empty))
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => String::new(),
    }
}

fn mean_cell(v: Option<Mean>) -> String {
    match v {
        Some(Mean::Finite(x)) => format!("{x:.3}"),
        Some(Mean::Overflow) => "OF".to_owned(),
        None => String::new(),
    }
}

fn render_block(
    out: &mut String,
    first_width: usize,
    header: [&[&str]; 2],
    rows: &[(String, Vec<String>)],
    ideal: &[&str],
) {
    let widths: Vec<usize> = header[0]
        .iter()
        .zip(header[1])
        .map(|(a, b)| a.len().max(b.len()).max(6))
        .collect();
    let line = |out: &mut String, first: &str, cells: &[String]| {
        let _ = write!(out, "{first:>first_width$}");
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(out, "  {c:>w$}");
        }
        out.push('\n');
    };
    let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    line(out, "training loss,", &owned(header[0]));
    line(out, "rate, epochs", &owned(header[1]));
    let rule = "-".repeat(first_width + widths.iter().map(|w| w + 2).sum::<usize>());
    out.push_str(&rule);
    out.push('\n');
    for (name, cells) in rows {
        line(out, name, cells);
    }
    out.push_str(&rule);
    out.push('\n');
    line(out, "the ideal", &owned(ideal));
}

/// Fixed-width two-block table: wins and losses, then accuracies. Coarse
/// runs appear only in the accuracy block, with blank parents' and finest
/// cells.
pub fn render_table(reports: &[(String, EvalReport)]) -> String {
    let first_width = reports
        .iter()
        .map(|(n, _)| n.len())
        .chain(["training loss,".len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();

    let wins: Vec<(String, Vec<String>)> = reports
        .iter()
        .filter(|(_, r)| !r.is_coarse())
        .map(|(n, r)| {
            (
                n.clone(),
                vec![
                    cell(r.onehot_win),
                    cell(r.softmax_win),
                    mean_cell(r.neglog_win),
                    mean_cell(r.cross_entropy),
                ],
            )
        })
        .collect();
    render_block(
        &mut out,
        first_width,
        [
            &["one-hot win", "softmax win", "-log of win", "cross"],
            &["via hierarchy", "via hierarchy", "via hierarchy", "entropy"],
        ],
        &wins,
        &["higher", "higher", "lower", "lower"],
    );
    out.push('\n');

    let accs: Vec<(String, Vec<String>)> = reports
        .iter()
        .map(|(n, r)| {
            (
                n.clone(),
                vec![
                    cell(Some(r.coarsest_acc)),
                    cell(r.parents_acc),
                    cell(r.finest_acc),
                ],
            )
        })
        .collect();
    render_block(
        &mut out,
        first_width,
        [
            &["coarsest", "parents'", "finest"],
            &["accuracy", "accuracy", "accuracy"],
        ],
        &accs,
        &["higher", "higher", "higher"],
    );
    out
}

#[derive(Serialize)]
struct JsonRun<'a> {
    run: &'a str,
    #[serde(flatten)]
    report: &'a EvalReport,
}

/// One JSON object per run, one per line.
pub fn render_json(reports: &[(String, EvalReport)]) -> String {
    let mut out = String::new();
    for (run, report) in reports {
        let obj = JsonRun { run, report };
        out.push_str(&serde_json::to_string(&obj).expect("report serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t0() -> Taxonomy {
        Taxonomy::parse("a1\tA\na2\tA\nb1\tB\nb2\tB\nA\tR\nB\tR\n").unwrap()
    }

    #[test]
    fn saturated_correct_sample() {
        let t = t0();
        let p = hierloss::softmax(&[60.0, 0.0, 0.0, 0.0]);
        let s = eval_distribution(&t, &p, 0).unwrap();
        assert_eq!(s.onehot_win, 1.0);
        assert!((s.softmax_win - 1.0).abs() < 1e-15);
        assert!(s.neglog_win.abs() < 1e-15);
        assert!(s.cross_entropy.abs() < 1e-15);
        assert!(s.coarsest_hit && s.parents_hit && s.finest_hit);
    }

    #[test]
    fn uniform_sample_on_t0() {
        let t = t0();
        let s = eval_distribution(&t, &[0.25; 4], 0).unwrap();
        assert_eq!(s.decoded, 0);
        assert_eq!(s.onehot_win, 1.0);
        assert_eq!(s.softmax_win, 0.375);
        assert!((s.neglog_win + 0.375f64.ln()).abs() < 1e-15);
        assert!((s.cross_entropy + 0.25f64.ln()).abs() < 1e-15);
        assert!(s.coarsest_hit && s.parents_hit && s.finest_hit);
    }

    #[test]
    fn maximally_wrong_decode() {
        let t = t0();
        let s = eval_distribution(&t, &[0.0, 0.0, 1.0, 0.0], 0).unwrap();
        assert_eq!(s.decoded, 2);
        assert_eq!(s.onehot_win, 0.0);
        assert!(!s.coarsest_hit && !s.parents_hit && !s.finest_hit);
        assert_eq!(s.cross_entropy, f64::INFINITY);
    }

    #[test]
    fn sharing_the_root_is_not_a_parents_hit() {
        let t = Taxonomy::parse("x\tR\ny\tR\na1\tA\na2\tA\nA\tR\n").unwrap();
        let s = eval_distribution(&t, &[0.0, 1.0, 0.0, 0.0], 0).unwrap();
        assert!(!s.coarsest_hit && !s.parents_hit && !s.finest_hit);
        let s = eval_distribution(&t, &[0.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert!(s.coarsest_hit && s.parents_hit && !s.finest_hit);
    }

    #[test]
    fn label_out_of_range() {
        assert!(eval_distribution(&t0(), &[0.25; 4], 4).is_err());
    }

    #[test]
    fn overflow_poisons_mean() {
        let t = t0();
        let good = eval_distribution(&t, &[0.7, 0.1, 0.1, 0.1], 0).unwrap();
        let bad = eval_distribution(&t, &[0.0, 1.0, 0.0, 0.0], 0).unwrap();
        let r = EvalReport::from_samples(&[good, bad], 0);
        assert_eq!(r.cross_entropy, Some(Mean::Overflow));
        assert!(matches!(r.neglog_win, Some(Mean::Finite(_))));
        let table = render_table(&[("raw, 12, 4".into(), r.clone())]);
        assert!(table
            .lines()
            .any(|l| l.trim_start().starts_with("raw, 12, 4") && l.trim_end().ends_with("OF")));
        assert!(render_json(&[("x".into(), r)]).contains("\"cross_entropy\":\"OF\""));
    }

    #[test]
    fn duplicated_samples_leave_report_unchanged() {
        let t = t0();
        let a = eval_distribution(&t, &[0.1, 0.2, 0.3, 0.4], 1).unwrap();
        let b = eval_distribution(&t, &[0.4, 0.3, 0.2, 0.1], 3).unwrap();
        let once = EvalReport::from_samples(&[a, b], 0);
        let twice = EvalReport::from_samples(&[a, b, a, b], 0);
        assert_eq!(once.coarsest_acc, twice.coarsest_acc);
        assert_eq!(once.finest_acc, twice.finest_acc);
        assert!((once.softmax_win.unwrap() - twice.softmax_win.unwrap()).abs() < 1e-15);
        assert!((once.onehot_win.unwrap() - twice.onehot_win.unwrap()).abs() < 1e-15);
    }

    #[test]
    fn table_layout() {
        let t = t0();
        let s = eval_distribution(&t, &[0.7, 0.1, 0.1, 0.1], 0).unwrap();
        let reports = vec![
            ("flat, 2, 4".to_owned(), EvalReport::from_samples(&[s], 0)),
            (
                "coarse, .05, 100".to_owned(),
                EvalReport::from_coarse_hits(&[true, false], 0),
            ),
        ];
        let table = render_table(&reports);
        assert_eq!(table.matches("the ideal").count(), 2);
        assert!(table.contains("one-hot win"));
        assert!(table.contains("parents'"));
        let coarse_rows: Vec<&str> = table
            .lines()
            .filter(|l| l.contains("coarse, .05"))
            .collect();
        assert_eq!(
            coarse_rows.len(),
            1,
            "coarse run appears only in the accuracy block"
        );
        assert!(coarse_rows[0].trim_end().ends_with("0.500"));
        let json = render_json(&reports);
        assert_eq!(json.lines().count(), 2);
        assert!(json.lines().nth(1).unwrap().contains("\"finest_acc\":null"));
    }

    #[test]
    fn json_has_all_fields() {
        let t = t0();
        let s = eval_distribution(&t, &[0.7, 0.1, 0.1, 0.1], 0).unwrap();
        let json = render_json(&[("run".into(), EvalReport::from_samples(&[s], 0))]);
        let v: serde_json::Value = serde_json::from_str(json.trim()).unwrap();
        for field in [
            "onehot_win",
            "softmax_win",
            "neglog_win",
            "cross_entropy",
            "coarsest_acc",
            "parents_acc",
            "finest_acc",
            "n_samples",
            "n_empty_feature",
        ] {
            assert!(v.get(field).is_some(), "{field}");
        }
    }
}
