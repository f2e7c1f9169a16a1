//! Protocol and score parsing, equal error rate, DET points and results-grid reports.

mod report;

pub use report::{published_results, report_layout, GridRow, ReportFormat, ResultsGrid, RowKind, AVG_FLAG_TOLERANCE};

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}line {line}: {reason}", source_prefix(.source_name))]
    Malformed { source_name: Option<String>, line: usize, reason: String },
    #[error("no trials: the {0} class is empty")]
    EmptyClass(&'static str),
    #[error("trial '{0}' has no score")]
    MissingScore(String),
    #[error("score for '{0}' has no matching trial")]
    UnknownScore(String),
    #[error("report grid is empty")]
    EmptyGrid,
}

fn source_prefix(name: &Option<String>) -> String {
    name.as_ref().map(|n| format!("{n}: ")).unwrap_or_default()
}

fn malformed(source_name: Option<&Path>, line: usize, reason: impl Into<String>) -> EvalError {
    EvalError::Malformed { source_name: source_name.map(|p| p.display().to_string()), line, reason: reason.into() }
}

fn read(path: &Path) -> Result<String, EvalError> {
    fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Key {
    Bonafide,
    Spoof,
}

impl Key {
    pub fn as_str(self) -> &'static str {
        match self {
            Key::Bonafide => "bonafide",
            Key::Spoof => "spoof",
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One protocol line: `SPEAKER UTT ENV SYSTEM KEY`, with `-` placeholders allowed in
/// the third and fourth fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    pub speaker_id: String,
    pub utt_id: String,
    pub environment: Option<String>,
    pub attack_system_id: Option<String>,
    pub key: Key,
}

impl Trial {
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.speaker_id,
            self.utt_id,
            self.environment.as_deref().unwrap_or("-"),
            self.attack_system_id.as_deref().unwrap_or("-"),
            self.key
        )
    }
}

/// Trials in file order with unique utterance ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialSet {
    entries: Vec<Trial>,
    index: HashMap<String, usize>,
}

impl TrialSet {
    pub fn from_trials(trials: Vec<Trial>) -> Result<Self, EvalError> {
        let mut set = TrialSet::default();
        for (i, t) in trials.into_iter().enumerate() {
            set.push(t, None, i + 1)?;
        }
        Ok(set)
    }

    fn push(&mut self, t: Trial, source: Option<&Path>, line: usize) -> Result<(), EvalError> {
        if self.index.contains_key(&t.utt_id) {
            return Err(malformed(source, line, format!("duplicate utterance id '{}'", t.utt_id)));
        }
        self.index.insert(t.utt_id.clone(), self.entries.len());
        self.entries.push(t);
        Ok(())
    }

    pub fn parse(text: &str, source: Option<&Path>) -> Result<Self, EvalError> {
        let mut set = TrialSet::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() != 5 {
                return Err(malformed(source, line, format!("expected 5 fields, found {}", fields.len())));
            }
            let key = match fields[4] {
                "bonafide" => Key::Bonafide,
                "spoof" => Key::Spoof,
                other => return Err(malformed(source, line, format!("key must be bonafide or spoof, found '{other}'"))),
            };
            let opt = |s: &str| (s != "-").then(|| s.to_string());
            let trial = Trial {
                speaker_id: fields[0].to_string(),
                utt_id: fields[1].to_string(),
                environment: opt(fields[2]),
                attack_system_id: opt(fields[3]),
                key,
            };
            set.push(trial, source, line)?;
        }
        Ok(set)
    }

    pub fn entries(&self) -> &[Trial] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, utt_id: &str) -> Option<&Trial> {
        self.index.get(utt_id).map(|&i| &self.entries[i])
    }

    pub fn count(&self, key: Key) -> usize {
        self.entries.iter().filter(|t| t.key == key).count()
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|t| t.to_line() + "\n").collect()
    }
}

pub fn parse_protocol(path: &Path) -> Result<TrialSet, EvalError> {
    TrialSet::parse(&read(path)?, Some(path))
}

/// Scores in file order; higher means more bonafide.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub system_name: String,
    pub condition_tag: String,
    entries: Vec<(String, f64)>,
    index: HashMap<String, usize>,
}

impl ScoreSet {
    pub fn new(system_name: impl Into<String>, condition_tag: impl Into<String>) -> Self {
        Self { system_name: system_name.into(), condition_tag: condition_tag.into(), ..Self::default() }
    }

    /// Adds a score; returns `false` (and keeps the first) on a duplicate id.
    pub fn insert(&mut self, utt_id: impl Into<String>, score: f64) -> bool {
        let utt_id = utt_id.into();
        if self.index.contains_key(&utt_id) {
            return false;
        }
        self.index.insert(utt_id.clone(), self.entries.len());
        self.entries.push((utt_id, score));
        true
    }

    /// Parses `utt_id ... score` lines; the last field is the score.
    pub fn parse(text: &str, source: Option<&Path>) -> Result<Self, EvalError> {
        let mut set = ScoreSet::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let fields: Vec<&str> = raw.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() < 2 {
                return Err(malformed(source, line, "expected 'utt_id score'"));
            }
            let last = fields[fields.len() - 1];
            let score: f64 = last.parse().map_err(|_| malformed(source, line, format!("score '{last}' is not a number")))?;
            if !score.is_finite() {
                return Err(malformed(source, line, format!("score '{last}' is not finite")));
            }
            if !set.insert(fields[0], score) {
                return Err(malformed(source, line, format!("duplicate utterance id '{}'", fields[0])));
            }
        }
        Ok(set)
    }

    pub fn get(&self, utt_id: &str) -> Option<f64> {
        self.index.get(utt_id).map(|&i| self.entries[i].1)
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `utt_id score` lines with scores printed at full round-trip precision.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(u, s)| format!("{u} {s:e}\n")).collect()
    }

    /// Splits scores by trial key, in protocol order. Every trial needs a score and
    /// every score a trial.
    pub fn split_by_key(&self, trials: &TrialSet) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        if let Some((u, _)) = self.entries.iter().find(|(u, _)| trials.get(u).is_none()) {
            return Err(EvalError::UnknownScore(u.clone()));
        }
        let (mut bona, mut spoof) = (Vec::new(), Vec::new());
        for t in trials.entries() {
            let s = self.get(&t.utt_id).ok_or_else(|| EvalError::MissingScore(t.utt_id.clone()))?;
            match t.key {
                Key::Bonafide => bona.push(s),
                Key::Spoof => spoof.push(s),
            }
        }
        Ok((bona, spoof))
    }
}

pub fn parse_scores(path: &Path) -> Result<ScoreSet, EvalError> {
    ScoreSet::parse(&read(path)?, Some(path))
}

/// Equal error rate in `[0, 1]` and the threshold where it is reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eer {
    pub eer: f64,
    pub threshold: f64,
}

/// Operating points `(threshold, p_miss, p_fa)` for every distinct score and `+inf`,
/// accepting as bonafide iff `score >= threshold`.
fn sweep(bonafide: &[f64], spoof: &[f64]) -> Result<Vec<(f64, f64, f64)>, EvalError> {
    if bonafide.is_empty() {
        return Err(EvalError::EmptyClass("bonafide"));
    }
    if spoof.is_empty() {
        return Err(EvalError::EmptyClass("spoof"));
    }
    let mut b = bonafide.to_vec();
    let mut s = spoof.to_vec();
    b.sort_by(f64::total_cmp);
    s.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = b.iter().chain(&s).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    let (nb, ns) = (b.len() as f64, s.len() as f64);
    let (mut below_b, mut below_s) = (0usize, 0usize);
    Ok(thresholds
        .into_iter()
        .map(|th| {
            while below_b < b.len() && b[below_b] < th {
                below_b += 1;
            }
            while below_s < s.len() && s[below_s] < th {
                below_s += 1;
            }
            (th, below_b as f64 / nb, (s.len() - below_s) as f64 / ns)
        })
        .collect())
}

/// Equal error rate by threshold sweep with linear interpolation at the sign change
/// of `p_miss - p_fa`.
pub fn compute_eer(bonafide: &[f64], spoof: &[f64]) -> Result<Eer, EvalError> {
    let points = sweep(bonafide, spoof)?;
    let i = points.iter().position(|&(_, pm, pfa)| pm - pfa >= 0.0).expect("the +inf threshold has p_miss = 1, p_fa = 0");
    let (th1, pm1, pfa1) = points[i];
    let d1 = pm1 - pfa1;
    if d1 == 0.0 || i == 0 {
        return Ok(Eer { eer: pm1, threshold: th1 });
    }
    let (th0, pm0, pfa0) = points[i - 1];
    let d0 = pm0 - pfa0;
    let t = -d0 / (d1 - d0);
    let eer = pm0 + t * (pm1 - pm0);
    let threshold = if th1.is_finite() { th0 + t * (th1 - th0) } else { th0 };
    Ok(Eer { eer, threshold })
}

/// DET operating points `(p_fa, p_miss)` in increasing threshold order.
pub fn det_points(bonafide: &[f64], spoof: &[f64]) -> Result<Vec<(f64, f64)>, EvalError> {
    Ok(sweep(bonafide, spoof)?.into_iter().map(|(_, pm, pfa)| (pfa, pm)).collect())
}
