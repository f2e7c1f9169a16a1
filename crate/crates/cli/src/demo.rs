//! End-to-end run over the synthetic mini-corpus.

use std::path::{Path, PathBuf};

use anyhow::Result;
use launderbench_core::eval::{ReportFormat, ResultsGrid};
use launderbench_core::features::FeatureKind;
use launderbench_core::gmm::TrainConfig;

use crate::minicorpus::{generate_minicorpus, MiniCorpus};
use crate::pipeline::{
    features, launder, report, score, train, FeatureOptions, LaunderOptions, LaunderSummary, ReportOptions, ScoreOptions,
    TrainOptions,
};

#[derive(Debug, Clone)]
pub struct DemoOptions {
    pub root: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub kinds: Vec<FeatureKind>,
    pub k: usize,
    pub em_iters: usize,
}

impl DemoOptions {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), seed: 0, workers: 4, kinds: vec![FeatureKind::Lfcc, FeatureKind::Cqcc], k: 8, em_iters: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct DemoSummary {
    pub corpus: MiniCorpus,
    pub launder: LaunderSummary,
    pub grid: ResultsGrid,
    pub report_md: PathBuf,
    pub report_csv: PathBuf,
}

/// Report column name of a GMM system on `kind` features.
pub fn system_name(kind: FeatureKind) -> String {
    format!("{}-GMM", kind.name().to_uppercase())
}

/// Layout under `root`: `corpus/`, `laundered/`, `features/<kind>/{train,eval}`,
/// `models/<kind>/`, `scores/<system>/eval.txt`, `report.md` and `report.csv`.
pub fn run_demo(opts: &DemoOptions) -> Result<DemoSummary> {
    let root = &opts.root;
    let corpus = generate_minicorpus(&root.join("corpus"), opts.seed)?;
    let laundered = root.join("laundered");
    let launder_summary = launder(&LaunderOptions {
        config: corpus.grid_config.clone(),
        protocol: corpus.eval_protocol.clone(),
        input_dir: corpus.audio_dir.clone(),
        out_dir: laundered.clone(),
        workers: opts.workers,
    })?;
    let laundered_protocol = laundered.join("protocol.txt");

    for &kind in &opts.kinds {
        let fdir = root.join("features").join(kind.name());
        let extract = |input: &Path, protocol: &Path, out: PathBuf| {
            features(&FeatureOptions {
                kind,
                input_dir: input.to_path_buf(),
                protocols: vec![protocol.to_path_buf()],
                out_dir: out,
                workers: opts.workers,
            })
        };
        extract(&corpus.audio_dir, &corpus.train_protocol, fdir.join("train"))?;
        extract(&corpus.audio_dir, &corpus.eval_protocol, fdir.join("eval"))?;
        extract(&laundered.join("audio"), &laundered_protocol, fdir.join("eval"))?;
        let models = root.join("models").join(kind.name());
        train(&TrainOptions {
            features_dir: fdir.join("train"),
            protocol: corpus.train_protocol.clone(),
            kind,
            config: TrainConfig { k: opts.k, em_iters: opts.em_iters, seed: opts.seed, ..TrainConfig::default() },
            out_dir: models.clone(),
            workers: opts.workers,
        })?;
        score(&ScoreOptions {
            models_dir: models,
            features_dir: fdir.join("eval"),
            out: root.join("scores").join(system_name(kind)).join("eval.txt"),
            workers: opts.workers,
        })?;
    }

    let mut ropts = ReportOptions {
        scores_dir: root.join("scores"),
        protocols: vec![corpus.eval_protocol.clone(), laundered_protocol],
        out: root.join("report.md"),
        format: Some(ReportFormat::Markdown),
        ..ReportOptions::default()
    };
    let grid = report(&ropts)?;
    ropts.out = root.join("report.csv");
    ropts.format = Some(ReportFormat::Csv);
    report(&ropts)?;
    Ok(DemoSummary { corpus, launder: launder_summary, grid, report_md: root.join("report.md"), report_csv: ropts.out })
}
