//! The pipeline stages: launder, features, train, score, evaluate and report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use launderbench_core::audio::{read_wav, AudioBuffer};
use launderbench_core::eval::{
    compute_eer, parse_protocol, parse_scores, report_layout, Eer, GridRow, Key, ReportFormat, ResultsGrid, RowKind,
    ScoreSet, Trial, TrialSet,
};
use launderbench_core::features::{extract, FeatureKind, FeatureMatrix};
use launderbench_core::gmm::{em_train, llr_score, GmmModel, TrainConfig};
use rayon::prelude::*;

use crate::config::load_grid_config;
use crate::grid::DEFAULT_LPF_CUTOFF_HZ;
use crate::jobs::{run_launder_job, JobContext, SharedCaches};
use crate::journal::Journal;
use crate::manifest::{accounting, condition_of, expand_grid, Accounting};

/// Model file names inside a model directory.
pub const BONAFIDE_MODEL: &str = "bonafide.lbgm";
pub const SPOOF_MODEL: &str = "spoof.lbgm";
/// Feature file extension.
pub const FEATURE_EXT: &str = "lbfm";
/// Journal file name inside a laundering output directory.
pub const JOURNAL_FILE: &str = "journal.txt";

/// Bounded worker pool used by every parallel stage.
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    ensure!(workers >= 1, "--workers must be at least 1");
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.partial",
        path.extension().and_then(|e| e.to_str()).unwrap_or_default()
    ));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("moving {} into place", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Runs fallible jobs in parallel, keeping going after failures, and reports how
/// many failed together with the first few messages.
fn run_all<I: Sync>(pool: &rayon::ThreadPool, items: &[I], stage: &str, job: impl Fn(&I) -> Result<()> + Sync) -> Result<()> {
    let failures: Vec<String> = pool.install(|| {
        items.par_iter().filter_map(|it| job(it).err().map(|e| format!("{e:#}"))).collect()
    });
    if failures.is_empty() {
        return Ok(());
    }
    let shown: Vec<&str> = failures.iter().take(5).map(String::as_str).collect();
    bail!("{stage}: {} of {} jobs failed; first errors:\n  {}", failures.len(), items.len(), shown.join("\n  "))
}

/// Loads and concatenates protocol files (utterance ids must be unique overall).
pub fn load_trials(paths: &[PathBuf]) -> Result<TrialSet> {
    ensure!(!paths.is_empty(), "at least one protocol file is required");
    let mut all: Vec<Trial> = Vec::new();
    for p in paths {
        all.extend(parse_protocol(p)?.entries().iter().cloned());
    }
    Ok(TrialSet::from_trials(all)?)
}

#[derive(Debug, Clone)]
pub struct LaunderOptions {
    pub config: PathBuf,
    pub protocol: PathBuf,
    pub input_dir: PathBuf,
    pub out_dir: PathBuf,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct LaunderSummary {
    pub jobs: usize,
    pub resumed: usize,
    pub accounting: Accounting,
}

/// Expands the grid over the protocol and launders every (utterance, spec) pair.
///
/// Layout under `out_dir`: `audio/<laundered_id>.wav`, `manifest.tsv`,
/// `protocol.txt` (all laundered trials), `protocols/<tag>.txt`, `accounting.txt`
/// and `journal.txt`. Jobs listed in the journal whose output exists are skipped.
pub fn launder(opts: &LaunderOptions) -> Result<LaunderSummary> {
    let grid = load_grid_config(&opts.config)?;
    let trials = parse_protocol(&opts.protocol)?;
    let missing: Vec<String> = trials
        .entries()
        .iter()
        .map(|t| opts.input_dir.join(format!("{}.wav", t.utt_id)))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        bail!("{} input files are missing, e.g. {}", missing.len(), missing[..missing.len().min(3)].join(", "));
    }
    let manifest = expand_grid(&grid, &trials);
    let audio_dir = opts.out_dir.join("audio");
    let protocols_dir = opts.out_dir.join("protocols");
    let scratch_dir = opts.out_dir.join("scratch");
    for d in [&audio_dir, &protocols_dir, &scratch_dir] {
        create_dir(d)?;
    }

    write_atomic(&opts.out_dir.join("manifest.tsv"), manifest.to_tsv().as_bytes())?;
    let mut all = String::new();
    let mut per_tag: BTreeMap<&str, String> = BTreeMap::new();
    for row in manifest.rows() {
        let line = row.laundered_trial().to_line() + "\n";
        all += &line;
        per_tag.entry(row.tag).or_default().push_str(&line);
    }
    write_atomic(&opts.out_dir.join("protocol.txt"), all.as_bytes())?;
    for (tag, text) in &per_tag {
        write_atomic(&protocols_dir.join(format!("{tag}.txt")), text.as_bytes())?;
    }
    let acc = accounting(&manifest);
    write_atomic(&opts.out_dir.join("accounting.txt"), acc.render().as_bytes())?;

    let journal = Journal::open(&opts.out_dir.join(JOURNAL_FILE), false)
        .with_context(|| format!("opening the journal in {}", opts.out_dir.display()))?;
    let caches = SharedCaches::default();
    let ctx = JobContext { grid: &grid, caches: &caches, out_dir: &audio_dir, scratch_dir: &scratch_dir };
    let pending: Vec<usize> = (0..manifest.len())
        .filter(|&i| {
            let id = manifest.row(i).laundered_utt_id();
            !(journal.is_done(&id) && audio_dir.join(format!("{id}.wav")).is_file())
        })
        .collect();
    let resumed = manifest.len() - pending.len();
    let pool = worker_pool(opts.workers)?;
    run_all(&pool, &pending, "launder", |&i| {
        let row = manifest.row(i);
        let id = row.laundered_utt_id();
        let input = opts.input_dir.join(format!("{}.wav", row.orig_utt_id()));
        run_launder_job(&ctx, &input, row.orig_utt_id(), &manifest.specs[row.spec_index], &id)?;
        journal.record(&id).with_context(|| format!("recording {id} in {}", journal.path().display()))
    })?;
    let _ = fs::remove_dir(&scratch_dir);
    Ok(LaunderSummary { jobs: manifest.len(), resumed, accounting: acc })
}

#[derive(Debug, Clone)]
pub struct FeatureOptions {
    pub kind: FeatureKind,
    pub input_dir: PathBuf,
    pub protocols: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub workers: usize,
}

/// Extracts `<out>/<utt_id>.lbfm` for every trial of the protocols; returns the count.
pub fn features(opts: &FeatureOptions) -> Result<usize> {
    let trials = load_trials(&opts.protocols)?;
    create_dir(&opts.out_dir)?;
    let pool = worker_pool(opts.workers)?;
    run_all(&pool, trials.entries(), "features", |t| {
        let input = opts.input_dir.join(format!("{}.wav", t.utt_id));
        let audio: AudioBuffer<f64> = read_wav(&input).with_context(|| format!("reading {}", input.display()))?;
        let m = extract(&audio, opts.kind).with_context(|| format!("extracting {} from {}", opts.kind, input.display()))?;
        write_atomic(&feature_path(&opts.out_dir, &t.utt_id), &m.to_bytes())
    })?;
    Ok(trials.len())
}

pub fn feature_path(dir: &Path, utt_id: &str) -> PathBuf {
    dir.join(format!("{utt_id}.{FEATURE_EXT}"))
}

fn read_features(dir: &Path, utt_id: &str, kind: FeatureKind) -> Result<FeatureMatrix<f64>> {
    let m = FeatureMatrix::<f64>::read(&feature_path(dir, utt_id))?;
    ensure!(m.kind() == kind, "{utt_id}: feature file holds {}, expected {kind}", m.kind());
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub features_dir: PathBuf,
    pub protocol: PathBuf,
    pub kind: FeatureKind,
    pub config: TrainConfig,
    pub out_dir: PathBuf,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub bonafide_frames: usize,
    pub spoof_frames: usize,
    pub bonafide_history: Vec<f64>,
    pub spoof_history: Vec<f64>,
}

/// Trains the bonafide and spoof GMMs on the protocol's feature files.
pub fn train(opts: &TrainOptions) -> Result<TrainSummary> {
    let trials = parse_protocol(&opts.protocol)?;
    let pool = worker_pool(opts.workers)?;
    create_dir(&opts.out_dir)?;
    let mut histories = Vec::new();
    let mut frames = Vec::new();
    for (key, name) in [(Key::Bonafide, BONAFIDE_MODEL), (Key::Spoof, SPOOF_MODEL)] {
        let ids: Vec<&str> = trials.entries().iter().filter(|t| t.key == key).map(|t| t.utt_id.as_str()).collect();
        ensure!(!ids.is_empty(), "the training protocol has no {key} trials");
        let parts = ids.iter().map(|id| read_features(&opts.features_dir, id, opts.kind)).collect::<Result<Vec<_>>>()?;
        let data = FeatureMatrix::stack(&parts)?;
        let trained = pool.install(|| em_train(&data, &opts.config)).with_context(|| format!("training the {key} model"))?;
        let path = opts.out_dir.join(name);
        write_atomic(&path, &trained.model.to_bytes())?;
        frames.push(data.frames());
        histories.push(trained.log_likelihood_history);
    }
    let spoof_history = histories.pop().unwrap_or_default();
    let bonafide_history = histories.pop().unwrap_or_default();
    Ok(TrainSummary { bonafide_frames: frames[0], spoof_frames: frames[1], bonafide_history, spoof_history })
}

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    pub models_dir: PathBuf,
    pub features_dir: PathBuf,
    pub out: PathBuf,
    pub workers: usize,
}

/// Scores every feature file of the directory (sorted by name) with the LLR of the
/// two models and writes `utt_id score` lines; returns the number of scores.
pub fn score(opts: &ScoreOptions) -> Result<usize> {
    let mut models = Vec::new();
    for name in [BONAFIDE_MODEL, SPOOF_MODEL] {
        let path = opts.models_dir.join(name);
        ensure!(path.is_file(), "model file {} does not exist; run `train` first", path.display());
        models.push(GmmModel::load(&path)?);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&opts.features_dir)
        .with_context(|| format!("listing {}", opts.features_dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == FEATURE_EXT));
    files.sort();
    ensure!(!files.is_empty(), "no .{FEATURE_EXT} files in {}", opts.features_dir.display());
    let pool = worker_pool(opts.workers)?;
    let scored: Vec<Result<(String, f64)>> = pool.install(|| {
        files
            .par_iter()
            .map(|p| {
                let id = p.file_stem().and_then(|s| s.to_str()).context("non-UTF-8 feature file name")?.to_string();
                let m = FeatureMatrix::<f64>::read(p)?;
                let s = llr_score(&models[0], &models[1], &m).with_context(|| format!("scoring {}", p.display()))?;
                Ok((id, s))
            })
            .collect()
    });
    let mut set = ScoreSet::default();
    for r in scored {
        let (id, s) = r?;
        set.insert(id, s);
    }
    if let Some(parent) = opts.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_atomic(&opts.out, set.to_text().as_bytes())?;
    Ok(set.len())
}

/// EER of one condition's scores.
fn condition_eer(scores: &ScoreSet, trials: &TrialSet) -> Result<Eer> {
    let mut subset = Vec::with_capacity(scores.len());
    for (id, _) in scores.entries() {
        let t = trials.get(id).with_context(|| format!("score for '{id}' has no matching trial"))?;
        subset.push(t.clone());
    }
    let (b, s) = scores.split_by_key(&TrialSet::from_trials(subset)?)?;
    Ok(compute_eer(&b, &s)?)
}

/// Splits scores by the condition tag encoded in their utterance ids.
pub fn split_by_condition(scores: &ScoreSet) -> BTreeMap<String, ScoreSet> {
    let mut out: BTreeMap<String, ScoreSet> = BTreeMap::new();
    for (id, s) in scores.entries() {
        let tag = condition_of(id);
        out.entry(tag.to_string()).or_insert_with(|| ScoreSet::new(&scores.system_name, tag)).insert(id.clone(), *s);
    }
    out
}

/// EER per condition of one score file.
pub fn evaluate(scores_path: &Path, protocols: &[PathBuf]) -> Result<BTreeMap<String, Eer>> {
    let trials = load_trials(protocols)?;
    let scores = parse_scores(scores_path)?;
    ensure!(!scores.is_empty(), "{} holds no scores", scores_path.display());
    split_by_condition(&scores)
        .iter()
        .map(|(tag, set)| Ok((tag.clone(), condition_eer(set, &trials).with_context(|| format!("condition {tag}"))?)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub scores_dir: PathBuf,
    pub protocols: Vec<PathBuf>,
    pub out: PathBuf,
    pub format: Option<ReportFormat>,
    pub lpf_cutoff_hz: u32,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            scores_dir: PathBuf::new(),
            protocols: Vec::new(),
            out: PathBuf::new(),
            format: None,
            lpf_cutoff_hz: DEFAULT_LPF_CUTOFF_HZ,
        }
    }
}

/// Builds the results grid from `scores_dir/<system>/*.txt`: each subdirectory is a
/// system, its score files are merged and split by condition. Conditions outside
/// the standard layout are appended under the group "Other".
pub fn build_report(opts: &ReportOptions) -> Result<ResultsGrid> {
    let trials = load_trials(&opts.protocols)?;
    let mut systems: Vec<PathBuf> = fs::read_dir(&opts.scores_dir)
        .with_context(|| format!("listing {}", opts.scores_dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    systems.retain(|p| p.is_dir());
    systems.sort();
    ensure!(!systems.is_empty(), "no system directories in {}", opts.scores_dir.display());

    let mut rows = report_layout(opts.lpf_cutoff_hz);
    let mut cells: Vec<(String, String, f64)> = Vec::new();
    let mut system_names = Vec::new();
    for dir in &systems {
        let system = dir.file_name().and_then(|s| s.to_str()).context("non-UTF-8 system directory")?.to_string();
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
        files.retain(|p| p.extension().is_some_and(|e| e == "txt"));
        files.sort();
        let mut merged = ScoreSet::new(&system, "");
        for f in &files {
            for (id, s) in parse_scores(f)?.entries() {
                ensure!(merged.insert(id.clone(), *s), "{}: duplicate score for '{id}'", f.display());
            }
        }
        for (tag, set) in split_by_condition(&merged) {
            let eer = condition_eer(&set, &trials).with_context(|| format!("system {system}, condition {tag}"))?;
            if !rows.iter().any(|r| r.tag() == Some(tag.as_str())) {
                rows.push(GridRow { group: "Other".into(), parameter: tag.clone(), kind: RowKind::Condition { tag: tag.clone() } });
            }
            cells.push((tag, system.clone(), eer.eer));
        }
        system_names.push(system);
    }
    let mut grid = ResultsGrid::new(rows);
    for s in &system_names {
        grid.add_system(s);
    }
    for (tag, system, eer) in cells {
        grid.set_eer(&tag, &system, eer);
    }
    Ok(grid)
}

/// Format from the explicit choice or the output extension (`.csv` or markdown).
pub fn report_format(out: &Path, explicit: Option<ReportFormat>) -> ReportFormat {
    explicit.unwrap_or_else(|| {
        if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            ReportFormat::Csv
        } else {
            ReportFormat::Markdown
        }
    })
}

/// Builds and writes the report; returns the grid.
pub fn report(opts: &ReportOptions) -> Result<ResultsGrid> {
    let grid = build_report(opts)?;
    let text = grid.render(report_format(&opts.out, opts.format))?;
    if let Some(parent) = opts.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_atomic(&opts.out, text.as_bytes())?;
    Ok(grid)
}
