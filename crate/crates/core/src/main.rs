use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use emoconn::classify::{self, accuracy, select_and_train, SvmConfig};
use emoconn::connectivity::save_ncm1;
use emoconn::harness::pipeline::{features_for, select_subnetworks, trial_connectivity};
use emoconn::harness::{
    build_folds, export_subnetworks, prepare, run_experiment, synth_generate, DatasetManifest, ExperimentConfig,
    FoldModel, SynthSpec,
};
use emoconn::signal::{io, preprocess, TrialMeta};
use emoconn::table::{self, FeatureRow, FeatureTable};
use emoconn::{Error, Result};

#[derive(Parser)]
#[command(name = "emoconn", version, about = "EEG functional-connectivity emotion recognition")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted connectivity.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Generator settings (TOML); defaults give 3 subjects × 15 trials, 5 classes, 18 channels.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        strength: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Mean removal, broadband filter and resampling of one recording.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Sampling rate of a CSV input.
        #[arg(long)]
        fs: Option<f64>,
    },
    /// Windowed band connectivity of one recording, one NCM1 file per band.
    Connect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        fs: Option<f64>,
    },
    /// Critical subnetworks of every fold, from training trials only.
    Subnet {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Feature table of all trials under one fold's subnetworks.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0)]
        fold: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train an SVM on a feature table (C chosen by trial-grouped inner CV).
    Train {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Apply a trained SVM to a feature table.
    Evaluate {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Optional CSV of per-row predictions.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Run the full protocol and write the report.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load_any_recording(path: &Path, fs: Option<f64>) -> Result<emoconn::signal::Recording> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let fs = fs.ok_or_else(|| Error::Parameter("--fs is required for CSV recordings".into()))?;
        io::load_csv(path, fs, TrialMeta::default())
    } else {
        io::load_ncr1(path, TrialMeta::default())
    }
}

/// Rows, labels and trial groups of a labelled table.
type Xyg = (Vec<Vec<f64>>, Vec<usize>, Vec<u64>);

fn table_xy(t: &FeatureTable) -> Result<Xyg> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut g = Vec::new();
    for r in &t.rows {
        let label = r.meta.label.ok_or_else(|| Error::Data(format!("row {:?} has no label", r.meta)))?;
        x.push(r.values.clone());
        y.push(label);
        g.push((u64::from(r.meta.subject_id) << 40) | (u64::from(r.meta.session_id) << 20) | u64::from(r.meta.trial_id));
    }
    Ok((x, y, g))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Synth { out, spec, strength, noise } => {
            let mut s = match spec {
                Some(p) => toml::from_str(&std::fs::read_to_string(&p)?)
                    .map_err(|e| Error::Format(format!("{}: {e}", p.display())))?,
                None => SynthSpec::default(),
            };
            if let Some(v) = strength {
                s.strength = v;
            }
            if let Some(v) = noise {
                s.noise = v;
            }
            let m = synth_generate(&s, cfg.seed, &out)?;
            println!("wrote {} trials to {}", m.trials.len(), out.display());
        }
        Command::Preprocess { input, output, fs } => {
            let rec = load_any_recording(&input, fs)?;
            let out = preprocess(&rec, &cfg.preprocess.to_config())?;
            io::save_ncr1(&out, &output)?;
            println!("{} channels × {} samples at {} Hz", out.n_channels(), out.n_samples(), out.fs);
        }
        Command::Connect { input, out_dir, fs } => {
            let rec = load_any_recording(&input, fs)?;
            std::fs::create_dir_all(&out_dir)?;
            for (band, mats) in cfg.bands.iter().zip(trial_connectivity(&rec, &cfg)?) {
                if mats.is_empty() {
                    return Err(Error::Data("recording is shorter than one window".into()));
                }
                save_ncm1(&mats, &out_dir.join(format!("{}.ncm1", band.name)))?;
                println!("{}: {} windows", band.name, mats.len());
            }
        }
        Command::Subnet { manifest, out_dir } => {
            let m = DatasetManifest::load(&manifest)?;
            let plan = build_folds(&m)?;
            let data = prepare(&m, &cfg)?;
            let bands: Vec<usize> = (0..cfg.bands.len()).collect();
            let t = cfg.threshold_grid[0];
            let models = plan
                .folds
                .iter()
                .map(|f| {
                    Ok(FoldModel {
                        fold: f.index,
                        bands: cfg.bands.iter().map(|b| b.name.clone()).collect(),
                        threshold: t,
                        threshold_scores: Vec::new(),
                        subnetworks: select_subnetworks(&data, &f.train, &bands, t)?,
                        units: Default::default(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let files = export_subnetworks(&models, &m.labels, &out_dir)?;
            println!("wrote {} edge lists to {}", files.len(), out_dir.display());
        }
        Command::Features { manifest, fold, output } => {
            let m = DatasetManifest::load(&manifest)?;
            let plan = build_folds(&m)?;
            let f = plan
                .folds
                .get(fold)
                .ok_or_else(|| Error::Parameter(format!("fold {fold} out of range ({} folds)", plan.folds.len())))?;
            let data = prepare(&m, &cfg)?;
            let bands: Vec<usize> = (0..cfg.bands.len()).collect();
            let subs = select_subnetworks(&data, &f.train, &bands, cfg.threshold_grid[0])?;
            let keys = data.trials.keys().copied().collect();
            let feats = features_for(&data, &keys, &bands, &subs, &cfg)?;
            let dim = feats.values().flat_map(|r| r.first()).map(Vec::len).next().unwrap_or(0);
            let mut t = FeatureTable::new(dim);
            for entry in &m.trials {
                for (w, values) in feats[&entry.key()].iter().enumerate() {
                    t.push(FeatureRow { meta: entry.meta(), window_index: w, values: values.clone() })?;
                }
            }
            table::save(&t, &output)?;
            println!("{} rows × {} features", t.len(), t.dim);
        }
        Command::Train { table: path, model } => {
            let t = table::load(&path)?;
            let (x, y, g) = table_xy(&t)?;
            let base = SvmConfig { tol: cfg.svm.tol, max_iter: cfg.svm.max_iter, seed: cfg.seed, ..Default::default() };
            let (svm, grid) = select_and_train(&x, &y, &g, &cfg.svm.c_grid, cfg.svm.inner_folds, &base)?;
            let mut w = BufWriter::new(File::create(&model)?);
            classify::write_checkpoint(&mut w, &svm)?;
            w.flush()?;
            println!("selected C={} inner_accuracy={:.6}", grid.best, grid.scores[grid.best_index]);
        }
        Command::Evaluate { table: path, model, predictions } => {
            let t = table::load(&path)?;
            let svm = classify::read_checkpoint(&mut BufReader::new(File::open(&model)?))?;
            let (x, y, _) = table_xy(&t)?;
            let (pred, _) = classify::svm_predict(&svm, &x)?;
            if let Some(p) = predictions {
                let mut w = BufWriter::new(File::create(p)?);
                writeln!(w, "subject,session,trial,window,label,predicted")?;
                for (r, p) in t.rows.iter().zip(&pred) {
                    let m = &r.meta;
                    let label = m.label.map(|l| l.to_string()).unwrap_or_default();
                    writeln!(w, "{},{},{},{},{label},{p}", m.subject_id, m.session_id, m.trial_id, r.window_index)?;
                }
                w.flush()?;
            }
            println!("accuracy={:.6} n={}", accuracy(&pred, &y), y.len());
        }
        Command::Report { manifest, out_dir } => {
            let m = DatasetManifest::load(&manifest)?;
            let run = run_experiment(&m, &cfg)?;
            run.report.write_dir(&out_dir)?;
            export_subnetworks(&run.models, &m.labels, &out_dir.join("subnetworks"))?;
            let p = run.report.primary_report();
            info!("report written to {}", out_dir.display());
            println!("{}: accuracy {:.4} ± {:.4}", p.name, p.mean, p.std);
            for f in &run.report.folds {
                let cs: Vec<String> = f.selected_c.iter().map(|(u, k, c)| format!("{u}/{k}={c}")).collect();
                println!("fold={} threshold={} C={}", f.fold, f.threshold, cs.join(";"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
