use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use launderbench::demo::{run_demo, DemoOptions};
use launderbench::minicorpus::generate_minicorpus;
use launderbench::pipeline::{
    evaluate, features, launder, report, score, train, FeatureOptions, LaunderOptions, ReportOptions, ScoreOptions,
    TrainOptions,
};
use launderbench_core::eval::ReportFormat;
use launderbench_core::features::FeatureKind;
use launderbench_core::gmm::TrainConfig;

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Parser)]
#[command(name = "launderbench", version, about = "Laundering-attack corpus generation and GMM countermeasure evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply every attack of the grid to every utterance of the protocol.
    Launder {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        protocol: PathBuf,
        /// Directory holding `<utt_id>.wav` inputs.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Extract LFCC or CQCC feature files for the protocol's utterances.
    Features {
        #[arg(long)]
        kind: FeatureKind,
        #[arg(long = "in")]
        input: PathBuf,
        /// Protocol file; repeat to combine several.
        #[arg(long, required = true)]
        protocol: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Train the bonafide and spoof GMMs.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long)]
        kind: FeatureKind,
        #[arg(long, default_value_t = 512)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        em_iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Score every feature file with the bonafide/spoof log-likelihood ratio.
    Score {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
    },
    /// Print the EER of a score file, per condition.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, required = true)]
        protocol: Vec<PathBuf>,
    },
    /// Render the results grid from `<scores-dir>/<system>/*.txt`.
    Report {
        #[arg(long)]
        scores_dir: PathBuf,
        #[arg(long, required = true)]
        protocol: Vec<PathBuf>,
        /// Output file; `.csv` selects CSV, anything else markdown.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        format: Option<ReportFormat>,
        #[arg(long, default_value_t = 7000)]
        lpf_cutoff_hz: u32,
    },
    /// Write the synthetic mini-corpus (audio, protocols, noise stand-ins, grid config).
    Minicorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the whole pipeline on a fresh mini-corpus.
    Demo {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "lfcc,cqcc")]
        kinds: Vec<FeatureKind>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Launder { config, protocol, input, out, workers } => {
            let s = launder(&LaunderOptions { config, protocol, input_dir: input, out_dir: out, workers })?;
            println!("laundered {} files ({} already complete)", s.jobs, s.resumed);
            print!("{}", s.accounting.render());
        }
        Command::Features { kind, input, protocol, out, workers } => {
            let n = features(&FeatureOptions { kind, input_dir: input, protocols: protocol, out_dir: out, workers })?;
            println!("wrote {n} {kind} feature files");
        }
        Command::Train { features: dir, protocol, kind, k, em_iters, seed, out, workers } => {
            let config = TrainConfig { k, em_iters, seed, ..TrainConfig::default() };
            let s = train(&TrainOptions { features_dir: dir, protocol, kind, config, out_dir: out, workers })?;
            let last = |h: &[f64]| h.last().copied().unwrap_or(f64::NAN);
            println!("bonafide: {} frames, final mean log-likelihood {:.4}", s.bonafide_frames, last(&s.bonafide_history));
            println!("spoof: {} frames, final mean log-likelihood {:.4}", s.spoof_frames, last(&s.spoof_history));
        }
        Command::Score { models, features: dir, out, workers } => {
            let n = score(&ScoreOptions { models_dir: models, features_dir: dir, out: out.clone(), workers })?;
            println!("wrote {n} scores to {}", out.display());
        }
        Command::Evaluate { scores, protocol } => {
            for (tag, eer) in evaluate(&scores, &protocol)? {
                println!("{tag}\tEER {:.4}%\tthreshold {}", 100.0 * eer.eer, eer.threshold);
            }
        }
        Command::Report { scores_dir, protocol, out, format, lpf_cutoff_hz } => {
            report(&ReportOptions { scores_dir, protocols: protocol, out: out.clone(), format, lpf_cutoff_hz })?;
            println!("wrote {}", out.display());
        }
        Command::Minicorpus { out, seed } => {
            let c = generate_minicorpus(&out, seed)?;
            println!("wrote mini-corpus to {} (grid config {})", c.root.display(), c.grid_config.display());
        }
        Command::Demo { out, seed, workers, k, kinds } => {
            let s = run_demo(&DemoOptions { root: out, seed, workers, kinds, k, em_iters: 10 })?;
            print!("{}", s.launder.accounting.render());
            println!("{}", std::fs::read_to_string(&s.report_md)?);
            println!("report written to {} and {}", s.report_md.display(), s.report_csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
