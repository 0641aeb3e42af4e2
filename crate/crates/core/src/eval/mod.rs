//! Scoring dialog-answering models over generated datasets.
//!
//! The harness owns all history bookkeeping. For each round it shows the
//! model the caption plus a window of earlier question/answer pairs, where
//! the answers are either ground truth or the model's own earlier
//! predictions, and compares the normalized prediction with the recorded
//! answer.

mod metrics;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::dialoggen::{Coref, Dialog};
use crate::dsl::{Category, Kind};
use crate::executor::Executor;
use crate::scene::Scene;
use crate::templates::TemplateSet;

pub use metrics::{ffr, first_failure, nffr, nffr_ragged, to_f64, Fraction, MetricError};

/// Everything a model sees for one round.
#[derive(Debug, Clone, Copy)]
pub struct Query<'a> {
    pub dialog: usize,
    /// 1-based round number.
    pub round: usize,
    pub scene: &'a Scene,
    pub caption: &'a str,
    pub history: &'a [(String, String)],
    pub question: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ModelError(pub String);

pub trait DialogModel: Sync {
    fn answer(&self, query: &Query<'_>) -> Result<String, ModelError>;
}

/// Parses the caption and every visible history question back to programs
/// and replays them on a fresh knowledge base, then answers the question.
/// History answers are never looked at. History rounds that fail to parse
/// or execute are skipped.
#[derive(Debug, Clone)]
pub struct SymbolicModel {
    templates: TemplateSet,
}

impl SymbolicModel {
    pub fn new(templates: TemplateSet) -> Self {
        SymbolicModel { templates }
    }
}

impl DialogModel for SymbolicModel {
    fn answer(&self, q: &Query<'_>) -> Result<String, ModelError> {
        let err = |e: &dyn fmt::Display| ModelError(e.to_string());
        let schema = self.templates.schema();
        let ex = Executor::new(schema);
        let mut kb = ex.init_kb(q.scene);
        let caption = self
            .templates
            .parse_nl(q.caption, Kind::Caption)
            .map_err(|e| err(&e))?;
        ex.execute_caption(&mut kb, &caption).map_err(|e| err(&e))?;
        for (question, _) in q.history {
            kb.advance_round();
            if let Ok(p) = self.templates.parse_nl(question, Kind::Question) {
                let _ = ex.execute_question(&mut kb, &p);
            }
        }
        kb.advance_round();
        let p = self
            .templates
            .parse_nl(q.question, Kind::Question)
            .map_err(|e| err(&e))?;
        ex.execute_question(&mut kb, &p)
            .map(|a| a.render(schema))
            .map_err(|e| ModelError(e.kind_name().to_string()))
    }
}

/// Answers from a fixed table indexed by dialog and 1-based round.
#[derive(Debug, Clone, Default)]
pub struct StubModel {
    answers: Vec<Vec<String>>,
}

impl StubModel {
    pub fn new(answers: Vec<Vec<String>>) -> Self {
        StubModel { answers }
    }

    /// The recorded answers of a dataset, i.e. a perfect oracle.
    pub fn oracle(dialogs: &[Dialog]) -> Self {
        StubModel::new(
            dialogs
                .iter()
                .map(|d| d.rounds.iter().map(|r| r.answer.clone()).collect())
                .collect(),
        )
    }

    /// Reads a JSON list of per-dialog answer lists.
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map(StubModel::new)
            .map_err(|e| ModelError(format!("{}: {e}", path.display())))
    }
}

impl DialogModel for StubModel {
    fn answer(&self, q: &Query<'_>) -> Result<String, ModelError> {
        self.answers
            .get(q.dialog)
            .and_then(|d| d.get(q.round - 1))
            .cloned()
            .ok_or_else(|| {
                ModelError(format!(
                    "no stub answer for dialog {} round {}",
                    q.dialog, q.round
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    GtHistory,
    PredHistory,
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gt" | "gt_history" => Ok(Scheme::GtHistory),
            "pred" | "pred_history" => Ok(Scheme::PredHistory),
            _ => Err(format!("unknown scheme `{s}` (expected gt or pred)")),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::GtHistory => "gt_history",
            Scheme::PredHistory => "pred_history",
        })
    }
}

/// How many earlier rounds the model gets to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Window {
    All,
    Last(usize),
}

impl FromStr for Window {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(Window::All);
        }
        s.parse()
            .map(Window::Last)
            .map_err(|_| format!("bad history window `{s}` (expected all or a count)"))
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::All => f.write_str("all"),
            Window::Last(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for Window {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A co-reference bin: `none`, `all`, or distances `lo..=hi` (`hi` open if
/// absent).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorefBin {
    None,
    All,
    Distance { lo: usize, hi: Option<usize> },
}

impl CorefBin {
    pub fn contains(&self, c: Coref) -> bool {
        match (self, c) {
            (CorefBin::None, Coref::None) | (CorefBin::All, Coref::All) => true,
            (CorefBin::Distance { lo, hi }, Coref::Distance(d)) => {
                d >= *lo && hi.is_none_or(|h| d <= h)
            }
            _ => false,
        }
    }

    /// The default bins: none, 1, 2, 3, 4+, all.
    pub fn defaults() -> Vec<CorefBin> {
        let exact = |d| CorefBin::Distance { lo: d, hi: Some(d) };
        vec![
            CorefBin::None,
            exact(1),
            exact(2),
            exact(3),
            CorefBin::Distance { lo: 4, hi: None },
            CorefBin::All,
        ]
    }

    /// Checks that `bins` assign every possible label to exactly one bin.
    pub fn check_partition(bins: &[CorefBin]) -> Result<(), String> {
        let count = |c: Coref| bins.iter().filter(|b| b.contains(c)).count();
        for c in [Coref::None, Coref::All] {
            if count(c) != 1 {
                return Err(format!("label `{c}` is covered by {} bins", count(c)));
            }
        }
        let mut edges = vec![1usize];
        for b in bins {
            if let CorefBin::Distance { lo, hi } = b {
                if hi.is_some_and(|h| h < *lo) || *lo == 0 {
                    return Err(format!("empty or invalid bin `{b}`"));
                }
                edges.push(*lo);
                edges.extend(hi.map(|h| h + 1));
            }
        }
        // Each distance bin changes membership only at its edges; checking one
        // point per edge (and the open tail) covers every distance.
        edges.sort_unstable();
        edges.dedup();
        for d in edges {
            if count(Coref::Distance(d)) != 1 {
                return Err(format!(
                    "distance {d} is covered by {} bins",
                    count(Coref::Distance(d))
                ));
            }
        }
        Ok(())
    }
}

impl fmt::Display for CorefBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorefBin::None => f.write_str("none"),
            CorefBin::All => f.write_str("all"),
            CorefBin::Distance { lo, hi: Some(h) } if lo == h => write!(f, "{lo}"),
            CorefBin::Distance { lo, hi: Some(h) } => write!(f, "{lo}-{h}"),
            CorefBin::Distance { lo, hi: None } => write!(f, "{lo}+"),
        }
    }
}

impl FromStr for CorefBin {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| format!("bad coref bin `{s}`"))
        };
        match s {
            "none" => Ok(CorefBin::None),
            "all" => Ok(CorefBin::All),
            _ if s.ends_with('+') => Ok(CorefBin::Distance {
                lo: num(&s[..s.len() - 1])?,
                hi: None,
            }),
            _ => match s.split_once('-') {
                Some((a, b)) => Ok(CorefBin::Distance {
                    lo: num(a)?,
                    hi: Some(num(b)?),
                }),
                None => {
                    let d = num(s)?;
                    Ok(CorefBin::Distance { lo: d, hi: Some(d) })
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationConfig {
    pub scheme: Scheme,
    pub window: Window,
    pub coref_bins: Vec<CorefBin>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            scheme: Scheme::GtHistory,
            window: Window::All,
            coref_bins: CorefBin::defaults(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("dialog {dialog}: no scene with id {scene_id}")]
    MissingScene { dialog: usize, scene_id: u64 },
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Outcome of one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub dialog: usize,
    pub round: usize,
    pub question_type: String,
    pub category: Category,
    pub coref: Coref,
    pub correct: bool,
    pub predicted: Option<String>,
}

/// Correct/total counts of one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct Slice {
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

impl Slice {
    fn add(&mut self, correct: bool) {
        self.count += 1;
        self.correct += correct as usize;
    }

    fn finish(mut self) -> Self {
        self.accuracy = if self.count == 0 {
            0.0
        } else {
            self.correct as f64 / self.count as f64
        };
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinSlice {
    pub bin: String,
    #[serde(flatten)]
    pub slice: Slice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub dialogs: usize,
    /// Longest dialog length.
    pub rounds: usize,
    pub overall: Slice,
    pub overall_accuracy: f64,
    pub nffr: f64,
    /// Exact NFFR as `numerator/denominator`.
    pub nffr_exact: String,
    pub ffr: f64,
    pub per_round: Vec<Slice>,
    pub per_category: BTreeMap<Category, Slice>,
    pub per_coref_bin: Vec<BinSlice>,
    /// Dialogs whose caption needed a tie-break are excluded here.
    pub unambiguous: Slice,
    pub model_errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub rounds: Vec<RoundRecord>,
}

pub fn normalize_answer(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Runs one dialog; returns per-round records and the model error count.
fn run_dialog(
    index: usize,
    d: &Dialog,
    scene: &Scene,
    model: &dyn DialogModel,
    config: &EvaluationConfig,
) -> (Vec<RoundRecord>, usize) {
    let mut history: Vec<(String, String)> = Vec::with_capacity(d.rounds.len());
    let mut records = Vec::with_capacity(d.rounds.len());
    let mut errors = 0;
    for (i, r) in d.rounds.iter().enumerate() {
        let start = match config.window {
            Window::All => 0,
            Window::Last(n) => i.saturating_sub(n),
        };
        let q = Query {
            dialog: index,
            round: i + 1,
            scene,
            caption: &d.caption,
            history: &history[start..i],
            question: &r.question,
        };
        let predicted = match model.answer(&q) {
            Ok(a) => Some(normalize_answer(&a)),
            Err(_) => {
                errors += 1;
                None
            }
        };
        let correct = predicted.as_deref() == Some(normalize_answer(&r.answer).as_str());
        let shown = match config.scheme {
            Scheme::GtHistory => r.answer.clone(),
            Scheme::PredHistory => predicted.clone().unwrap_or_default(),
        };
        history.push((r.question.clone(), shown));
        records.push(RoundRecord {
            dialog: index,
            round: i + 1,
            question_type: r.question_type.clone(),
            category: r.category(),
            coref: r.coref,
            correct,
            predicted,
        });
    }
    (records, errors)
}

/// Evaluates `model` on every dialog. Dialogs run in parallel; results are
/// aggregated in dataset order.
pub fn evaluate(
    dialogs: &[Dialog],
    scenes: &[Scene],
    model: &dyn DialogModel,
    config: &EvaluationConfig,
) -> Result<Evaluation, EvalError> {
    CorefBin::check_partition(&config.coref_bins).map_err(EvalError::Config)?;
    if dialogs.is_empty() {
        return Err(MetricError::EmptyInput.into());
    }
    let by_id: HashMap<u64, &Scene> = scenes.iter().map(|s| (s.scene_id, s)).collect();
    let resolved = dialogs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            by_id
                .get(&d.scene_id)
                .copied()
                .ok_or(EvalError::MissingScene {
                    dialog: i,
                    scene_id: d.scene_id,
                })
        })
        .collect::<Result<Vec<&Scene>, _>>()?;
    let per_dialog: Vec<(Vec<RoundRecord>, usize)> = dialogs
        .par_iter()
        .zip(resolved.par_iter())
        .enumerate()
        .map(|(i, (d, s))| run_dialog(i, d, s, model, config))
        .collect();
    Ok(aggregate(dialogs, per_dialog, &config.coref_bins))
}

fn aggregate(
    dialogs: &[Dialog],
    per_dialog: Vec<(Vec<RoundRecord>, usize)>,
    bins: &[CorefBin],
) -> Evaluation {
    let max_rounds = dialogs.iter().map(|d| d.rounds.len()).max().unwrap_or(0);
    let mut overall = Slice::default();
    let mut unambiguous = Slice::default();
    let mut per_round = vec![Slice::default(); max_rounds];
    let mut per_category: BTreeMap<Category, Slice> =
        [Category::Count, Category::Exist, Category::Seek]
            .into_iter()
            .map(|c| (c, Slice::default()))
            .collect();
    let mut per_bin = vec![Slice::default(); bins.len()];
    let mut errors = 0;
    let mut rows: Vec<Vec<bool>> = Vec::with_capacity(dialogs.len());
    let mut records = Vec::new();
    for (d, (recs, e)) in dialogs.iter().zip(per_dialog) {
        errors += e;
        rows.push(recs.iter().map(|r| r.correct).collect());
        for r in &recs {
            overall.add(r.correct);
            if !d.ambiguous_caption {
                unambiguous.add(r.correct);
            }
            per_round[r.round - 1].add(r.correct);
            per_category.entry(r.category).or_default().add(r.correct);
            if let Some(b) = bins.iter().position(|b| b.contains(r.coref)) {
                per_bin[b].add(r.correct);
            }
        }
        records.extend(recs);
    }
    let exact = nffr_ragged(rows.iter().map(|r| r.as_slice()));
    let ffr_sum: usize = rows.iter().map(|r| first_failure(r)).sum();
    let overall = overall.finish();
    let report = EvaluationReport {
        dialogs: dialogs.len(),
        rounds: max_rounds,
        overall,
        overall_accuracy: overall.accuracy,
        nffr: to_f64(exact),
        nffr_exact: format!("{}/{}", exact.numer(), exact.denom()),
        ffr: ffr_sum as f64 / dialogs.len() as f64,
        per_round: per_round.into_iter().map(Slice::finish).collect(),
        per_category: per_category
            .into_iter()
            .map(|(k, v)| (k, v.finish()))
            .collect(),
        per_coref_bin: bins
            .iter()
            .zip(per_bin)
            .map(|(b, s)| BinSlice {
                bin: b.to_string(),
                slice: s.finish(),
            })
            .collect(),
        unambiguous: unambiguous.finish(),
        model_errors: errors,
    };
    Evaluation {
        report,
        rounds: records,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub scheme: Scheme,
    pub window: Window,
    pub report: EvaluationReport,
}

/// Evaluates every (window, scheme) combination.
pub fn sweep_history_window(
    dialogs: &[Dialog],
    scenes: &[Scene],
    model: &dyn DialogModel,
    windows: &[Window],
    schemes: &[Scheme],
    coref_bins: &[CorefBin],
) -> Result<Vec<SweepCell>, EvalError> {
    if windows.is_empty() || schemes.is_empty() {
        return Err(EvalError::Config(
            "sweep needs at least one window and scheme".into(),
        ));
    }
    let mut cells = Vec::new();
    for &window in windows {
        for &scheme in schemes {
            let config = EvaluationConfig {
                scheme,
                window,
                coref_bins: coref_bins.to_vec(),
            };
            let report = evaluate(dialogs, scenes, model, &config)?.report;
            cells.push(SweepCell {
                scheme,
                window,
                report,
            });
        }
    }
    Ok(cells)
}

/// One CSV row per round.
pub fn write_rounds_csv<W: std::io::Write>(
    out: W,
    records: &[RoundRecord],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dialog_id",
        "round",
        "question_type",
        "category",
        "coref",
        "correct",
    ])?;
    for r in records {
        w.write_record([
            r.dialog.to_string(),
            r.round.to_string(),
            r.question_type.clone(),
            r.category.to_string(),
            r.coref.to_string(),
            r.correct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_parse_and_partition() {
        let bins: Vec<CorefBin> = "none,1,2,3,4+,all"
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(bins, CorefBin::defaults());
        CorefBin::check_partition(&bins).unwrap();
        let gap: Vec<CorefBin> = "none,1,3+,all"
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert!(CorefBin::check_partition(&gap).is_err());
        let overlap: Vec<CorefBin> = "none,1-3,2+,all"
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert!(CorefBin::check_partition(&overlap).is_err());
        let no_all: Vec<CorefBin> = "none,1+".split(',').map(|s| s.parse().unwrap()).collect();
        assert!(CorefBin::check_partition(&no_all).is_err());
        assert_eq!(CorefBin::Distance { lo: 2, hi: Some(5) }.to_string(), "2-5");
    }

    #[test]
    fn window_and_scheme_parse() {
        assert_eq!("all".parse::<Window>().unwrap(), Window::All);
        assert_eq!("3".parse::<Window>().unwrap(), Window::Last(3));
        assert!("x".parse::<Window>().is_err());
        assert_eq!("pred".parse::<Scheme>().unwrap(), Scheme::PredHistory);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_answer("  Yes "), "yes");
        assert_ne!(normalize_answer("two"), normalize_answer("2"));
    }
}
