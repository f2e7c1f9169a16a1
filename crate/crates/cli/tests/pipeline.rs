//! Integration tests of the pipeline stages and the binary on a small slice of the
//! synthetic mini-corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use launderbench::manifest::parse_laundered_utt_id;
use launderbench::minicorpus::{generate_minicorpus, MiniCorpus};
use launderbench::pipeline::{
    build_report, evaluate, features, launder, score, train, FeatureOptions, LaunderOptions, ReportOptions, ScoreOptions,
    TrainOptions, JOURNAL_FILE,
};
use launderbench_core::eval::{parse_protocol, Key, TrialSet};
use launderbench_core::features::FeatureKind;
use launderbench_core::gmm::TrainConfig;

/// Corpus plus an eval protocol reduced to one bonafide and one spoof trial.
fn small_corpus(root: &Path) -> (MiniCorpus, PathBuf) {
    let c = generate_minicorpus(&root.join("corpus"), 11).unwrap();
    let eval = parse_protocol(&c.eval_protocol).unwrap();
    let pick: Vec<_> = [Key::Bonafide, Key::Spoof]
        .iter()
        .map(|&k| eval.entries().iter().find(|t| t.key == k).unwrap().clone())
        .collect();
    let p = root.join("small.txt");
    fs::write(&p, TrialSet::from_trials(pick).unwrap().to_text()).unwrap();
    (c, p)
}

fn launder_opts(config: &Path, protocol: &Path, c: &MiniCorpus, out: &Path, workers: usize) -> LaunderOptions {
    LaunderOptions {
        config: config.to_path_buf(),
        protocol: protocol.to_path_buf(),
        input_dir: c.audio_dir.clone(),
        out_dir: out.to_path_buf(),
        workers,
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn launder_writes_named_outputs_and_is_idempotent_and_schedule_independent() {
    let dir = tempfile::tempdir().unwrap();
    let (c, small) = small_corpus(dir.path());
    let out1 = dir.path().join("out1");
    let s = launder(&launder_opts(&c.grid_config, &small, &c, &out1, 3)).unwrap();
    assert_eq!((s.jobs, s.resumed), (58, 0));
    let audio = read_dir_sorted(&out1.join("audio"));
    assert_eq!(audio.len(), 58);
    for (name, _) in &audio {
        let stem = name.strip_suffix(".wav").unwrap();
        let (orig, tag) = parse_laundered_utt_id(stem).unwrap();
        assert!(orig.starts_with("MINI_E_"), "{name}");
        assert!(out1.join("protocols").join(format!("{tag}.txt")).is_file());
    }
    let protocol = parse_protocol(&out1.join("protocol.txt")).unwrap();
    assert_eq!(protocol.len(), 58);
    assert_eq!(fs::read_to_string(out1.join(JOURNAL_FILE)).unwrap().lines().count(), 58);
    assert!(fs::read_to_string(out1.join("manifest.tsv")).unwrap().starts_with("orig_utt_id\ttag\tlaundered_utt_id\tkey\n"));

    // Re-running over complete outputs changes nothing.
    let again = launder(&launder_opts(&c.grid_config, &small, &c, &out1, 3)).unwrap();
    assert_eq!(again.resumed, 58);
    assert_eq!(read_dir_sorted(&out1.join("audio")), audio);

    // A single worker produces the same bytes.
    let out2 = dir.path().join("out2");
    launder(&launder_opts(&c.grid_config, &small, &c, &out2, 1)).unwrap();
    assert_eq!(read_dir_sorted(&out2.join("audio")), audio);
    assert_eq!(fs::read(out1.join("manifest.tsv")).unwrap(), fs::read(out2.join("manifest.tsv")).unwrap());
}

#[test]
fn resume_redoes_only_missing_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let (c, small) = small_corpus(dir.path());
    let out = dir.path().join("out");
    launder(&launder_opts(&c.grid_config, &small, &c, &out, 2)).unwrap();
    let before = read_dir_sorted(&out.join("audio"));
    // Simulate an interruption: one output lost, one journal line torn.
    let victim = out.join("audio").join(&before[0].0);
    fs::remove_file(&victim).unwrap();
    let journal = out.join(JOURNAL_FILE);
    let mut text = fs::read_to_string(&journal).unwrap();
    text.truncate(text.len() - 1);
    let torn = text.rsplit('\n').next().unwrap().to_string();
    fs::write(&journal, text).unwrap();
    let s = launder(&launder_opts(&c.grid_config, &small, &c, &out, 2)).unwrap();
    let redone = if before[0].0.strip_suffix(".wav").unwrap() == torn { 1 } else { 2 };
    assert_eq!(s.resumed, 58 - redone);
    assert_eq!(read_dir_sorted(&out.join("audio")), before);
}

#[test]
fn identity_resampling_copies_and_noise_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (c, small) = small_corpus(dir.path());
    let cfg = dir.path().join("custom.toml");
    let noises = c.root.join("noises").display().to_string();
    fs::write(
        &cfg,
        format!(
            "seed = 9\n[noise-bank]\nwhite = \"synthetic-white\"\nbabble = \"{noises}/babble.wav\"\n\
             [[attack]]\nkind = \"resampling\"\nrate-hz = 16000\n\
             [[attack]]\nkind = \"additive_noise\"\nnoise = \"white\"\nsnr-db = 20\n"
        ),
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    launder(&launder_opts(&cfg, &small, &c, &a, 2)).unwrap();
    launder(&launder_opts(&cfg, &small, &c, &b, 1)).unwrap();
    for t in parse_protocol(&small).unwrap().entries() {
        let copy = fs::read(a.join("audio").join(format!("{}__rs_16000.wav", t.utt_id))).unwrap();
        assert_eq!(copy, fs::read(c.audio_dir.join(format!("{}.wav", t.utt_id))).unwrap());
        let name = format!("{}__white_20.wav", t.utt_id);
        assert_eq!(fs::read(a.join("audio").join(&name)).unwrap(), fs::read(b.join("audio").join(&name)).unwrap());
    }
    // A different seed changes the noise.
    let cfg2 = dir.path().join("custom2.toml");
    fs::write(&cfg2, fs::read_to_string(&cfg).unwrap().replace("seed = 9", "seed = 10")).unwrap();
    let d = dir.path().join("d");
    launder(&launder_opts(&cfg2, &small, &c, &d, 1)).unwrap();
    let t = parse_protocol(&small).unwrap().entries()[0].utt_id.clone();
    let name = format!("{t}__white_20.wav");
    assert_ne!(fs::read(a.join("audio").join(&name)).unwrap(), fs::read(d.join("audio").join(&name)).unwrap());
}

#[test]
fn missing_inputs_and_bad_configs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let (c, small) = small_corpus(dir.path());
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let mut opts = launder_opts(&c.grid_config, &small, &c, &dir.path().join("o"), 1);
    opts.input_dir = empty;
    let e = format!("{:#}", launder(&opts).unwrap_err());
    assert!(e.contains("2 input files are missing"), "{e}");

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "paper-grid = true\n[[attack]]\nkind = \"reverberation\"\nrt60 = 0\n").unwrap();
    let e = format!("{:#}", launder(&launder_opts(&bad, &small, &c, &dir.path().join("o2"), 1)).unwrap_err());
    assert!(e.contains("attack[0].rt60"), "{e}");
    assert!(e.contains("babble"), "{e}");
}

#[test]
fn train_score_evaluate_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (c, small) = small_corpus(dir.path());
    let laundered = dir.path().join("laundered");
    launder(&launder_opts(&c.grid_config, &small, &c, &laundered, 2)).unwrap();
    let fdir = dir.path().join("features");
    let n = features(&FeatureOptions {
        kind: FeatureKind::Lfcc,
        input_dir: c.audio_dir.clone(),
        protocols: vec![c.train_protocol.clone(), small.clone()],
        out_dir: fdir.join("train"),
        workers: 2,
    })
    .unwrap();
    assert_eq!(n, 42);
    features(&FeatureOptions {
        kind: FeatureKind::Lfcc,
        input_dir: laundered.join("audio"),
        protocols: vec![laundered.join("protocol.txt")],
        out_dir: fdir.join("eval"),
        workers: 2,
    })
    .unwrap();
    fs::copy(fdir.join("train").join("MINI_E_0000.lbfm"), fdir.join("eval").join("MINI_E_0000.lbfm")).unwrap();
    fs::copy(fdir.join("train").join("MINI_E_0020.lbfm"), fdir.join("eval").join("MINI_E_0020.lbfm")).unwrap();

    let models = dir.path().join("models");
    let missing = score(&ScoreOptions {
        models_dir: models.clone(),
        features_dir: fdir.join("eval"),
        out: dir.path().join("s.txt"),
        workers: 1,
    })
    .unwrap_err()
    .to_string();
    assert!(missing.contains(&models.join("bonafide.lbgm").display().to_string()), "{missing}");

    let cfg = TrainConfig { k: 4, em_iters: 5, ..TrainConfig::default() };
    let t = train(&TrainOptions {
        features_dir: fdir.join("train"),
        protocol: c.train_protocol.clone(),
        kind: FeatureKind::Lfcc,
        config: cfg,
        out_dir: models.clone(),
        workers: 2,
    })
    .unwrap();
    assert_eq!(t.bonafide_history.len(), 6);
    assert!(t.bonafide_history.windows(2).all(|w| w[1] >= w[0] - 1e-9));

    let scores = dir.path().join("scores").join("LFCC-GMM").join("eval.txt");
    let count = score(&ScoreOptions { models_dir: models.clone(), features_dir: fdir.join("eval"), out: scores.clone(), workers: 3 }).unwrap();
    assert_eq!(count, 60);
    let serial = dir.path().join("serial.txt");
    score(&ScoreOptions { models_dir: models, features_dir: fdir.join("eval"), out: serial.clone(), workers: 1 }).unwrap();
    assert_eq!(fs::read(&scores).unwrap(), fs::read(&serial).unwrap());

    let protocols = vec![small.clone(), laundered.join("protocol.txt")];
    let eers = evaluate(&scores, &protocols).unwrap();
    assert_eq!(eers.len(), 30);
    assert!(eers.contains_key("clean") && eers.contains_key("lpf_7000"));

    // Conditions outside the standard layout land under "Other".
    let extra = dir.path().join("scores").join("LFCC-GMM").join("extra.txt");
    fs::write(&extra, "MINI_E_0000__odd 1.0\nMINI_E_0020__odd -1.0\n").unwrap();
    let extra_protocol = dir.path().join("extra_protocol.txt");
    fs::write(&extra_protocol, "S MINI_E_0000__odd - - bonafide\nS MINI_E_0020__odd - NQ spoof\n").unwrap();
    let grid = build_report(&ReportOptions {
        scores_dir: dir.path().join("scores"),
        protocols: vec![small, laundered.join("protocol.txt"), extra_protocol],
        ..ReportOptions::default()
    })
    .unwrap();
    assert_eq!(grid.condition_rows(), 31);
    assert_eq!(grid.get("odd", "LFCC-GMM"), Some(0.0));
    assert_eq!(grid.rows().last().unwrap().group, "Other");
}

#[test]
fn binary_reports_errors_with_nonzero_exit() {
    let bin = env!("CARGO_BIN_EXE_launderbench");
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(bin)
        .args(["score", "--models"])
        .arg(dir.path().join("nowhere"))
        .args(["--features"])
        .arg(dir.path())
        .args(["--out"])
        .arg(dir.path().join("s.txt"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere/bonafide.lbgm") && err.contains("does not exist"), "{err}");

    let out = Command::new(bin).args(["minicorpus", "--out"]).arg(dir.path().join("mc")).output().unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("mc/grid.toml").is_file());

    let out = Command::new(bin).args(["features", "--kind", "mfcc", "--in", ".", "--protocol", "p", "--out", "o"]).output().unwrap();
    assert!(!out.status.success());
}
